//! Home configuration and the three controllability assumptions.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, ConfigError};

/// Physical and economic constants of one home.
///
/// Temperatures, `conductivity_a` and `gamma` share one temperature unit of
/// the caller's choosing. Slots are normalised to one hour, so power and
/// energy are interchangeable inside the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HomeConfigFile")]
pub struct HomeConfig {
    pub slot_hours: f64,
    /// Thermal inertia factor, `exp(-slot_hours / omega)`.
    pub epsilon: f64,
    pub eta: f64,
    pub conductivity_a: f64,
    pub e_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_out_min: f64,
    pub t_out_max: f64,
    pub t_ref_min: f64,
    pub t_ref_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub gamma: f64,
    pub g_min_ess: f64,
    pub g_max_ess: f64,
    pub u_cmax: f64,
    pub u_dmax: f64,
    pub v_max: f64,
    pub x_max: f64,
    pub a_max: f64,
    /// Tolerated EV charging delay in slots.
    pub r_tolerance: u32,
    pub theta_pv: f64,
    pub c_pv: f64,
    pub sell_ratio: f64,
    pub initial_temp: Option<f64>,
    pub initial_ess: Option<f64>,
    pub currency: String,
}

/// On-disk form. Either `epsilon` or `omega` (time constant, hours) must be
/// given; unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HomeConfigFile {
    #[serde(default = "default_slot_hours")]
    slot_hours: f64,
    epsilon: Option<f64>,
    omega: Option<f64>,
    eta: f64,
    conductivity_a: f64,
    e_max: f64,
    t_min: f64,
    t_max: f64,
    t_out_min: f64,
    t_out_max: f64,
    t_ref_min: f64,
    t_ref_max: f64,
    b_min: f64,
    b_max: f64,
    s_min: f64,
    s_max: f64,
    gamma: f64,
    g_min_ess: f64,
    g_max_ess: f64,
    u_cmax: f64,
    u_dmax: f64,
    v_max: f64,
    x_max: f64,
    a_max: f64,
    r_tolerance: u32,
    theta_pv: f64,
    c_pv: f64,
    #[serde(default = "default_sell_ratio")]
    sell_ratio: f64,
    #[serde(default)]
    initial_temp: Option<f64>,
    #[serde(default)]
    initial_ess: Option<f64>,
    #[serde(default = "default_currency")]
    currency: String,
}

fn default_slot_hours() -> f64 {
    1.0
}

fn default_sell_ratio() -> f64 {
    0.9
}

fn default_currency() -> String {
    "RMB".to_string()
}

impl TryFrom<HomeConfigFile> for HomeConfig {
    type Error = ConfigError;

    fn try_from(f: HomeConfigFile) -> Result<Self, Self::Error> {
        let epsilon = match (f.epsilon, f.omega) {
            (Some(e), None) => e,
            (None, Some(w)) => {
                if !(w > 0.0) {
                    return Err(ConfigError::RangeError {
                        field: "omega",
                        reason: format!("time constant must be positive, got {w}"),
                    });
                }
                (-f.slot_hours / w).exp()
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::Malformed(
                    "give either epsilon or omega, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Malformed("missing epsilon (or omega)".into()))
            }
        };
        Ok(HomeConfig {
            slot_hours: f.slot_hours,
            epsilon,
            eta: f.eta,
            conductivity_a: f.conductivity_a,
            e_max: f.e_max,
            t_min: f.t_min,
            t_max: f.t_max,
            t_out_min: f.t_out_min,
            t_out_max: f.t_out_max,
            t_ref_min: f.t_ref_min,
            t_ref_max: f.t_ref_max,
            b_min: f.b_min,
            b_max: f.b_max,
            s_min: f.s_min,
            s_max: f.s_max,
            gamma: f.gamma,
            g_min_ess: f.g_min_ess,
            g_max_ess: f.g_max_ess,
            u_cmax: f.u_cmax,
            u_dmax: f.u_dmax,
            v_max: f.v_max,
            x_max: f.x_max,
            a_max: f.a_max,
            r_tolerance: f.r_tolerance,
            theta_pv: f.theta_pv,
            c_pv: f.c_pv,
            sell_ratio: f.sell_ratio,
            initial_temp: f.initial_temp,
            initial_ess: f.initial_ess,
            currency: f.currency,
        })
    }
}

impl HomeConfig {
    /// Reference home used throughout the tests and the bundled data:
    /// inertia 0.985, eta/A = 15, 8 kW heater, band [15, 25], outdoor
    /// [0, 10], 5..20 kWh battery at 1 kW, 3 kW EV, five-slot deadline slack.
    pub fn reference() -> Self {
        HomeConfig {
            slot_hours: 1.0,
            epsilon: 0.985,
            eta: 1.0,
            conductivity_a: 1.0 / 15.0,
            e_max: 8.0,
            t_min: 15.0,
            t_max: 25.0,
            t_out_min: 0.0,
            t_out_max: 10.0,
            t_ref_min: 22.5,
            t_ref_max: 22.5,
            b_min: 0.5,
            b_max: 1.0,
            s_min: 0.45,
            s_max: 0.9,
            gamma: 0.0,
            g_min_ess: 5.0,
            g_max_ess: 20.0,
            u_cmax: 1.0,
            u_dmax: 1.0,
            v_max: 3.0,
            x_max: 3.0,
            a_max: 3.0,
            r_tolerance: 5,
            theta_pv: 0.2,
            c_pv: 30.0,
            sell_ratio: 0.9,
            initial_temp: Some(22.5),
            initial_ess: None,
            currency: default_currency(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError::Malformed(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// `eta / A`, degrees of steady-state lift per kW of HVAC input.
    pub fn heat_gain(&self) -> f64 {
        self.eta / self.conductivity_a
    }

    /// Worst-case one-slot temperature swing
    /// `(1 - eps)(t_out_max - t_out_min + (eta/A) e_max)`.
    pub fn psi(&self) -> f64 {
        (1.0 - self.epsilon) * (self.t_out_max - self.t_out_min + self.heat_gain() * self.e_max)
    }

    pub fn initial_temp(&self) -> f64 {
        self.initial_temp
            .unwrap_or(0.5 * (self.t_ref_min + self.t_ref_max))
    }

    pub fn initial_ess(&self) -> f64 {
        self.initial_ess
            .unwrap_or(0.5 * (self.g_min_ess + self.g_max_ess))
    }

    /// Same home with the battery disabled.
    pub fn without_ess(&self) -> Self {
        HomeConfig {
            u_cmax: 0.0,
            u_dmax: 0.0,
            ..self.clone()
        }
    }
}

/// Free-function form of [`HomeConfig::psi`].
pub fn compute_psi(cfg: &HomeConfig) -> f64 {
    cfg.psi()
}

/// A configuration that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(HomeConfig);

impl Deref for ValidatedConfig {
    type Target = HomeConfig;

    fn deref(&self) -> &HomeConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> HomeConfig {
        self.0
    }
}

fn range_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::RangeError {
        field,
        reason: reason.into(),
    }
}

fn check_finite(cfg: &HomeConfig) -> Result<(), ConfigError> {
    let fields: [(&'static str, f64); 26] = [
        ("slot_hours", cfg.slot_hours),
        ("epsilon", cfg.epsilon),
        ("eta", cfg.eta),
        ("conductivity_a", cfg.conductivity_a),
        ("e_max", cfg.e_max),
        ("t_min", cfg.t_min),
        ("t_max", cfg.t_max),
        ("t_out_min", cfg.t_out_min),
        ("t_out_max", cfg.t_out_max),
        ("t_ref_min", cfg.t_ref_min),
        ("t_ref_max", cfg.t_ref_max),
        ("b_min", cfg.b_min),
        ("b_max", cfg.b_max),
        ("s_min", cfg.s_min),
        ("s_max", cfg.s_max),
        ("gamma", cfg.gamma),
        ("g_min_ess", cfg.g_min_ess),
        ("g_max_ess", cfg.g_max_ess),
        ("u_cmax", cfg.u_cmax),
        ("u_dmax", cfg.u_dmax),
        ("v_max", cfg.v_max),
        ("x_max", cfg.x_max),
        ("a_max", cfg.a_max),
        ("theta_pv", cfg.theta_pv),
        ("c_pv", cfg.c_pv),
        ("sell_ratio", cfg.sell_ratio),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(range_err(name, format!("not finite: {v}")));
        }
    }
    Ok(())
}

/// Checks type invariants and the controllability assumptions
/// `t_out_max <= t_max`, `(eta/A) e_max + t_out_min >= t_min` and
/// `t_max - t_min > psi`.
pub fn validate_config(cfg: HomeConfig) -> Result<ValidatedConfig, ConfigError> {
    check_finite(&cfg)?;
    if !(cfg.slot_hours > 0.0) {
        return Err(range_err("slot_hours", "must be positive"));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(range_err(
            "epsilon",
            format!("must lie in (0, 1), got {}", cfg.epsilon),
        ));
    }
    if !(cfg.eta > 0.0) {
        return Err(range_err("eta", "must be positive"));
    }
    if !(cfg.conductivity_a > 0.0) {
        return Err(range_err("conductivity_a", "must be positive"));
    }
    for (name, v) in [
        ("e_max", cfg.e_max),
        ("u_cmax", cfg.u_cmax),
        ("u_dmax", cfg.u_dmax),
        ("v_max", cfg.v_max),
        ("x_max", cfg.x_max),
        ("a_max", cfg.a_max),
        ("gamma", cfg.gamma),
        ("theta_pv", cfg.theta_pv),
        ("c_pv", cfg.c_pv),
        ("g_min_ess", cfg.g_min_ess),
    ] {
        if v < 0.0 {
            return Err(range_err(name, format!("must be >= 0, got {v}")));
        }
    }
    if !(cfg.t_min < cfg.t_max) {
        return Err(range_err("t_min", "comfort band requires t_min < t_max"));
    }
    if cfg.t_out_min > cfg.t_out_max {
        return Err(range_err("t_out_min", "t_out_min > t_out_max"));
    }
    if cfg.t_ref_min > cfg.t_ref_max {
        return Err(range_err("t_ref_min", "t_ref_min > t_ref_max"));
    }
    if cfg.b_min > cfg.b_max {
        return Err(range_err("b_min", "b_min > b_max"));
    }
    if cfg.s_min > cfg.s_max {
        return Err(range_err("s_min", "s_min > s_max"));
    }
    if !(cfg.g_min_ess < cfg.g_max_ess) {
        return Err(range_err("g_min_ess", "requires g_min_ess < g_max_ess"));
    }
    if cfg.r_tolerance < 1 {
        return Err(range_err("r_tolerance", "must be at least 1 slot"));
    }
    if !(0.0..=1.0).contains(&cfg.sell_ratio) {
        return Err(range_err("sell_ratio", "must lie in [0, 1]"));
    }

    if cfg.t_out_max > cfg.t_max {
        return Err(ConfigError::AssumptionViolated {
            which: Assumption::OutdoorBelowComfortMax,
            lhs: cfg.t_out_max,
            rhs: cfg.t_max,
        });
    }
    let heated = cfg.heat_gain() * cfg.e_max + cfg.t_out_min;
    if heated < cfg.t_min {
        return Err(ConfigError::AssumptionViolated {
            which: Assumption::HeaterCoversMinimum,
            lhs: heated,
            rhs: cfg.t_min,
        });
    }
    let psi = cfg.psi();
    let band = cfg.t_max - cfg.t_min;
    if !(band > psi) {
        return Err(ConfigError::AssumptionViolated {
            which: Assumption::BandWiderThanSwing,
            lhs: band,
            rhs: psi,
        });
    }
    Ok(ValidatedConfig(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(eps: f64) -> HomeConfig {
        HomeConfig {
            epsilon: eps,
            ..HomeConfig::reference()
        }
    }

    #[test]
    fn low_inertia_breaks_band_assumption() {
        // psi = 0.1 * (10 + 120) = 13 >= 10
        let err = validate_config(example(0.9)).unwrap_err();
        match err {
            ConfigError::AssumptionViolated { which, lhs, rhs } => {
                assert_eq!(which, Assumption::BandWiderThanSwing);
                assert_eq!(lhs, 10.0);
                assert!((rhs - 13.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reference_home_is_valid() {
        let cfg = validate_config(example(0.985)).unwrap();
        assert!((compute_psi(&cfg) - 1.95).abs() < 1e-12);
    }

    #[test]
    fn warm_outdoor_breaks_first_assumption() {
        let cfg = HomeConfig {
            t_out_max: 30.0,
            ..HomeConfig::reference()
        };
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::AssumptionViolated {
                which: Assumption::OutdoorBelowComfortMax,
                ..
            })
        ));
    }

    #[test]
    fn weak_heater_breaks_second_assumption() {
        let cfg = HomeConfig {
            e_max: 0.5,
            ..HomeConfig::reference()
        };
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::AssumptionViolated {
                which: Assumption::HeaterCoversMinimum,
                ..
            })
        ));
    }

    #[test]
    fn psi_vanishes_without_heat_loss() {
        assert_eq!(example(1.0).psi(), 0.0);
    }

    #[test]
    fn malformed_ranges_are_range_errors() {
        let cfg = HomeConfig {
            g_min_ess: 20.0,
            g_max_ess: 5.0,
            ..HomeConfig::reference()
        };
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::RangeError {
                field: "g_min_ess",
                ..
            })
        ));
        let cfg = HomeConfig {
            epsilon: f64::NAN,
            ..HomeConfig::reference()
        };
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::RangeError { .. })
        ));
    }

    #[test]
    fn json_roundtrip_and_unknown_fields() {
        let cfg = HomeConfig::reference();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(HomeConfig::from_json_str(&text).unwrap(), cfg);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(HomeConfig::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn omega_derives_epsilon() {
        let mut v = serde_json::to_value(HomeConfig::reference()).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("epsilon");
        obj.insert("omega".into(), serde_json::json!(10.0));
        let cfg = HomeConfig::from_json_str(&v.to_string()).unwrap();
        assert!((cfg.epsilon - (-0.1f64).exp()).abs() < 1e-15);

        obj_both_rejected();
    }

    fn obj_both_rejected() {
        let mut v = serde_json::to_value(HomeConfig::reference()).unwrap();
        v["omega"] = serde_json::json!(10.0);
        assert!(HomeConfig::from_json_str(&v.to_string()).is_err());
    }
}
