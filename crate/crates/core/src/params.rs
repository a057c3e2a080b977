//! Closed-form controller parameters and the bounds they guarantee.
//!
//! Everything here is a pure function of the validated configuration (and an
//! optional user choice of `V`). The comfort band is guaranteed for
//! `V <= v1_max` with the temperature shift in `[gamma_min, gamma_max]`; the
//! battery band for `V <= v2_max` with the battery shift in
//! `[alpha_min, alpha_max]`; and the EV deadline through the delay-queue
//! arrival rate `xi`.

use serde::{Deserialize, Serialize};

use crate::config::{HomeConfig, ValidatedConfig};
use crate::error::ConfigError;

/// Relative slack allowed when comparing the two ends of a shift interval.
/// At `V = v1_max` the temperature interval collapses to a point and the two
/// ends agree only up to round-off.
const INTERVAL_SLACK: f64 = 1e-9;

/// Offset subtracted before taking the ceiling of the delay ratio, which
/// lands exactly on an integer for the default `xi`.
const CEIL_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Cost weight `V`.
    pub v: f64,
    /// Temperature queue shift, `H = T + gamma_shift`.
    pub gamma_shift: f64,
    /// Battery queue shift, `K = G + alpha_shift`.
    pub alpha_shift: f64,
    /// Arrival rate of the delay queue.
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub v: Option<f64>,
    pub gamma_shift: Option<f64>,
    pub alpha_shift: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedBounds {
    pub v1_max: f64,
    pub v2_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub psi: f64,
    pub d: f64,
    pub f: f64,
    pub h: f64,
    pub m: f64,
    /// Lower bound of the per-slot HVAC threshold term at the chosen `V`.
    pub b_min_coeff: f64,
    /// Upper bound of the per-slot HVAC threshold term at the chosen `V`.
    pub c_max_coeff: f64,
    pub q_max: f64,
    pub z_max: f64,
    /// Worst-case EV queueing delay, slots.
    pub d_max: u32,
    pub theta: f64,
    pub upsilon: f64,
    pub omega_0: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub omega_3: f64,
}

/// Constants of the drift-plus-penalty bound and the resulting optimality gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceGap {
    pub omega_0: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub omega_3: f64,
    pub upsilon: f64,
    pub theta: f64,
    pub gap_per_v: f64,
}

/// Worst-case HVAC threshold terms per unit of `V`, taken over the declared
/// outdoor, setpoint, comfort-band and occupancy boxes.
fn hvac_term_bounds_per_v(cfg: &HomeConfig) -> (f64, f64) {
    let eps = cfg.epsilon;
    let k = cfg.heat_gain();
    let coef = 2.0 * cfg.gamma * (1.0 - eps).powi(2) * k;
    let b_expr = cfg.t_out_min - (cfg.t_ref_max - eps * cfg.t_min) / (1.0 - eps);
    let c_expr = cfg.t_out_max + k * cfg.e_max - (cfg.t_ref_min - eps * cfg.t_max) / (1.0 - eps);
    // occupancy 0 zeroes both terms, so 0 is always attainable
    (coef * b_expr.min(0.0), coef * c_expr.max(0.0))
}

fn infeasible(msg: impl Into<String>) -> ConfigError {
    ConfigError::InfeasibleParameters(msg.into())
}

fn interval_ok(lo: f64, hi: f64) -> bool {
    lo <= hi + INTERVAL_SLACK * lo.abs().max(hi.abs()).max(1.0)
}

/// Derives `V`, the two queue shifts and `xi`, together with every bound the
/// feasibility guarantees rely on.
///
/// By default `V = min(v1_max, v2_max)`, the temperature shift is
/// `gamma_max`, the battery shift is `alpha_max` and
/// `xi = (2 V b_max + v_max) / (R - 1)`.
pub fn derive_controller_params(
    cfg: &ValidatedConfig,
    overrides: &ParamOverrides,
) -> Result<(ControllerParams, DerivedBounds), ConfigError> {
    let eps = cfg.epsilon;
    let k = cfg.heat_gain();
    let r = cfg.r_tolerance;
    if r < 2 {
        return Err(infeasible(format!("r_tolerance must be >= 2, got {r}")));
    }

    let d = cfg.t_max - cfg.t_min - (1.0 - eps) * (cfg.t_out_max + k * cfg.e_max - cfg.t_out_min);
    if !(d > 0.0) {
        return Err(infeasible(format!(
            "comfort margin d = {d} is not positive"
        )));
    }
    let (b_unit, c_unit) = hvac_term_bounds_per_v(cfg);
    let f = c_unit - b_unit;
    let spread = cfg.b_max - cfg.s_min;
    if spread < 0.0 {
        return Err(infeasible("b_max < s_min contradicts b >= s"));
    }

    let v1_max = if spread + f > 0.0 {
        (1.0 - eps) * k * d / (spread + f)
    } else {
        f64::INFINITY
    };
    let ess_room = cfg.g_max_ess - cfg.g_min_ess - (cfg.u_cmax + cfg.u_dmax);
    if !(ess_room > 0.0) {
        return Err(infeasible(format!(
            "v2_max = 0: battery band {} leaves no room beyond charge+discharge limits",
            cfg.g_max_ess - cfg.g_min_ess
        )));
    }
    let v2_max = if spread > 0.0 {
        ess_room / spread
    } else {
        f64::INFINITY
    };
    let cap = v1_max.min(v2_max);

    let v = match overrides.v {
        Some(v) => {
            if !(v > 0.0 && v <= cap) {
                return Err(infeasible(format!("V = {v} outside (0, {cap}]")));
            }
            v
        }
        None => {
            if !cap.is_finite() {
                return Err(infeasible(
                    "price spread is zero so V is unbounded; supply an explicit V",
                ));
            }
            cap
        }
    };

    let b_min_coeff = v * b_unit;
    let c_max_coeff = v * c_unit;
    let slope = -eps * (1.0 - eps) * k;
    let h = (1.0 - eps) * (cfg.t_out_max + k * cfg.e_max) - cfg.t_max;
    let m = (1.0 - eps) * cfg.t_out_min - cfg.t_min;
    let gamma_min = (v * cfg.s_min + b_min_coeff) / slope + h / eps;
    let gamma_max = (v * cfg.b_max + c_max_coeff) / slope + m / eps;
    if !interval_ok(gamma_min, gamma_max) {
        return Err(infeasible(format!(
            "temperature shift interval empty: [{gamma_min}, {gamma_max}]"
        )));
    }

    let alpha_min = -v * cfg.s_min + cfg.u_cmax - cfg.g_max_ess;
    let alpha_max = -v * cfg.b_max - cfg.u_dmax - cfg.g_min_ess;
    if !interval_ok(alpha_min, alpha_max) {
        return Err(infeasible(format!(
            "battery shift interval empty: [{alpha_min}, {alpha_max}]"
        )));
    }

    let gamma_shift = match overrides.gamma_shift {
        Some(g) if g >= gamma_min.min(gamma_max) && g <= gamma_max => g,
        Some(g) => {
            return Err(infeasible(format!(
                "temperature shift {g} outside [{gamma_min}, {gamma_max}]"
            )))
        }
        None => gamma_max,
    };
    let alpha_shift = match overrides.alpha_shift {
        Some(a) if a >= alpha_min.min(alpha_max) && a <= alpha_max => a,
        Some(a) => {
            return Err(infeasible(format!(
                "battery shift {a} outside [{alpha_min}, {alpha_max}]"
            )))
        }
        None => alpha_max,
    };

    let xi = (2.0 * v * cfg.b_max + cfg.v_max) / f64::from(r - 1);
    if !(xi > 0.0) {
        return Err(infeasible(format!("xi = {xi} is not positive")));
    }
    if cfg.x_max < cfg.a_max.max(xi) {
        return Err(infeasible(format!(
            "x_max = {} below max(a_max, xi) = {}",
            cfg.x_max,
            cfg.a_max.max(xi)
        )));
    }
    let q_max = v * cfg.b_max + cfg.a_max;
    let z_max = v * cfg.b_max + xi;
    let d_max = ((q_max + z_max) / xi - CEIL_GUARD).ceil().max(0.0) as u32;
    if d_max > r {
        return Err(infeasible(format!(
            "delay bound {d_max} exceeds tolerance {r}"
        )));
    }

    let params = ControllerParams {
        v,
        gamma_shift,
        alpha_shift,
        xi,
    };
    let gap = compute_performance_gap(cfg, &params);
    let bounds = DerivedBounds {
        v1_max,
        v2_max,
        gamma_min,
        gamma_max,
        alpha_min,
        alpha_max,
        psi: cfg.psi(),
        d,
        f,
        h,
        m,
        b_min_coeff,
        c_max_coeff,
        q_max,
        z_max,
        d_max,
        theta: gap.theta,
        upsilon: gap.upsilon,
        omega_0: gap.omega_0,
        omega_1: gap.omega_1,
        omega_2: gap.omega_2,
        omega_3: gap.omega_3,
    };
    Ok((params, bounds))
}

/// Drift-bound constants and `Theta / V`. Diagnostic only.
pub fn compute_performance_gap(cfg: &HomeConfig, params: &ControllerParams) -> PerformanceGap {
    let eps = cfg.epsilon;
    let k = cfg.heat_gain();
    let g = params.gamma_shift;
    let omega_0 = 0.5
        * (1.0 - eps).powi(2)
        * (g + cfg.t_out_min)
            .powi(2)
            .max((g + cfg.t_out_max + k * cfg.e_max).powi(2));
    let omega_1 = 0.5 * (cfg.x_max.powi(2) + cfg.a_max.powi(2));
    let omega_2 = 0.5 * params.xi.powi(2).max(cfg.x_max.powi(2));
    let omega_3 = 0.5 * cfg.u_cmax.max(cfg.u_dmax).powi(2);
    let upsilon =
        eps * (1.0 - eps) * (cfg.t_max + g) * (cfg.t_max + g + (cfg.t_out_max - cfg.t_out_min));
    let theta = omega_0 + omega_1 + omega_2 + omega_3 + upsilon;
    PerformanceGap {
        omega_0,
        omega_1,
        omega_2,
        omega_3,
        upsilon,
        theta,
        gap_per_v: theta / params.v,
    }
}
