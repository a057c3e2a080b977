//! Slot-to-slot dynamics of the home.
//!
//! Slots are one hour long, so every power (kW) doubles as an energy (kWh)
//! per slot. Heating mode only.

use serde::{Deserialize, Serialize};

use crate::config::HomeConfig;
use crate::params::ControllerParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: usize,
    /// Indoor temperature.
    pub temp: f64,
    /// EV energy backlog.
    pub q: f64,
    /// Delay virtual queue.
    pub z: f64,
    /// Battery energy level.
    pub g_ess: f64,
}

impl SystemState {
    pub fn initial(temp: f64, g_ess: f64) -> Self {
        SystemState {
            t: 0,
            temp,
            q: 0.0,
            z: 0.0,
            g_ess,
        }
    }

    /// Shifted temperature queue `H = T + gamma_shift`.
    pub fn h(&self, params: &ControllerParams) -> f64 {
        self.temp + params.gamma_shift
    }

    /// Shifted battery queue `K = G + alpha_shift`.
    pub fn k(&self, params: &ControllerParams) -> f64 {
        self.g_ess + params.alpha_shift
    }

    /// `(H^2 + Q^2 + Z^2 + K^2) / 2`.
    pub fn lyapunov(&self, params: &ControllerParams) -> f64 {
        let h = self.h(params);
        let k = self.k(params);
        0.5 * (h * h + self.q * self.q + self.z * self.z + k * k)
    }
}

/// Exogenous inputs seen at the start of slot `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotObservation {
    pub price_buy: f64,
    pub price_sell: f64,
    pub t_out: f64,
    /// Solar radiation, W/m^2.
    pub solar_rho: f64,
    /// EV energy submitted this slot.
    pub ev_arrival: f64,
    /// Comfort setpoint for slot `t + 1`.
    pub t_ref_next: f64,
    /// Whether the home is occupied in slot `t + 1`.
    pub occupied_next: bool,
}

impl SlotObservation {
    pub fn occupancy(&self) -> f64 {
        if self.occupied_next {
            1.0
        } else {
            0.0
        }
    }
}

/// One EV charging request: plug-in slot, completion slot and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvRequest {
    pub start: usize,
    pub deadline: usize,
    pub energy: f64,
}

impl EvRequest {
    /// Number of full-power submission slots, `floor(E / v_max)`.
    pub fn full_slots(&self, v_max: f64) -> usize {
        if v_max <= 0.0 || self.energy <= 0.0 {
            return 0;
        }
        (self.energy / v_max).floor() as usize
    }

    /// Slack between the last submission and the deadline, `c - s - kappa`.
    pub fn tolerance(&self, v_max: f64) -> i64 {
        self.deadline as i64 - self.start as i64 - self.full_slots(v_max) as i64
    }
}

/// PV output in kW from radiation in W/m^2.
pub fn pv_output(solar_rho: f64, cfg: &HomeConfig) -> f64 {
    cfg.theta_pv * cfg.c_pv * solar_rho / 1000.0
}

/// First-order indoor temperature update under heating power `e`.
pub fn thermal_step(temp: f64, t_out: f64, e: f64, cfg: &HomeConfig) -> f64 {
    let eps = cfg.epsilon;
    eps * temp + (1.0 - eps) * (t_out + cfg.heat_gain() * e)
}

/// Shifted-temperature recursion, the image of [`thermal_step`] under
/// `H = T + gamma_shift`. Kept as a separate formula so the two can be
/// checked against each other.
pub fn h_step(h: f64, t_out: f64, e: f64, gamma_shift: f64, cfg: &HomeConfig) -> f64 {
    let eps = cfg.epsilon;
    eps * h + (1.0 - eps) * (gamma_shift + t_out + cfg.heat_gain() * e)
}

/// Battery level after charging (`y > 0`) or discharging (`y < 0`).
pub fn ess_step(g_ess: f64, y: f64) -> f64 {
    g_ess + y
}

/// Shifted battery recursion `K' = K + y`.
pub fn k_step(k: f64, y: f64) -> f64 {
    k + y
}

/// Energy the EV submits to the backlog at slot `t`: `v_max` per slot for
/// `floor(E / v_max)` slots from `start`, then the remainder, then nothing.
pub fn ev_arrival(req: &EvRequest, t: usize, v_max: f64) -> f64 {
    let kappa = req.full_slots(v_max);
    if t < req.start {
        0.0
    } else if t < req.start + kappa {
        v_max
    } else if t == req.start + kappa {
        (req.energy - kappa as f64 * v_max).max(0.0)
    } else {
        0.0
    }
}

/// EV backlog update `max(q - x, 0) + a`.
pub fn energy_queue_step(q: f64, x: f64, a: f64) -> f64 {
    (q - x).max(0.0) + a
}

/// Delay queue update: grows by `xi - x` while backlog remains after
/// service, resets to zero once the backlog is cleared.
pub fn delay_queue_step(z: f64, q: f64, x: f64, xi: f64) -> f64 {
    if q > x {
        (z - x + xi).max(0.0)
    } else {
        0.0
    }
}

/// Grid exchange from power balance; positive buys, negative sells.
pub fn grid_exchange(e: f64, x: f64, y: f64, r: f64) -> f64 {
    e + x + y - r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg_with(eps: f64) -> HomeConfig {
        HomeConfig {
            epsilon: eps,
            ..HomeConfig::reference()
        }
    }

    #[test]
    fn pv_examples() {
        let cfg = HomeConfig::reference();
        assert!((pv_output(1000.0, &cfg) - 6.0).abs() < 1e-12);
        assert!((pv_output(500.0, &cfg) - 3.0).abs() < 1e-12);
        assert_eq!(pv_output(0.0, &cfg), 0.0);
    }

    #[test]
    fn thermal_examples() {
        let cfg = cfg_with(0.9);
        assert!((thermal_step(20.0, 10.0, 1.0, &cfg) - 20.5).abs() < 1e-12);
        assert_eq!(thermal_step(18.0, 18.0, 0.0, &cfg_with(0.5)), 18.0);
        assert_eq!(thermal_step(21.0, -5.0, 8.0, &cfg_with(1.0)), 21.0);
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess_step(10.0, 1.0), 11.0);
        assert_eq!(ess_step(10.0, 0.0), 10.0);
        assert_eq!(ess_step(5.0, -1.0), 4.0);
    }

    #[test]
    fn ev_arrival_examples() {
        let r = EvRequest {
            start: 0,
            deadline: 10,
            energy: 8.0,
        };
        let a: Vec<f64> = (0..4).map(|t| ev_arrival(&r, t, 3.0)).collect();
        assert_eq!(a, vec![3.0, 3.0, 2.0, 0.0]);

        let r = EvRequest { energy: 0.0, ..r };
        assert!((0..5).all(|t| ev_arrival(&r, t, 3.0) == 0.0));

        let r = EvRequest { energy: 6.0, ..r };
        let a: Vec<f64> = (0..3).map(|t| ev_arrival(&r, t, 3.0)).collect();
        assert_eq!(a, vec![3.0, 3.0, 0.0]);

        let r = EvRequest {
            start: 19,
            deadline: 30,
            energy: 18.0,
        };
        assert_eq!(r.full_slots(3.0), 6);
        assert_eq!(r.tolerance(3.0), 5);
        assert_eq!(ev_arrival(&r, 18, 3.0), 0.0);
        assert_eq!(ev_arrival(&r, 24, 3.0), 3.0);
        assert_eq!(ev_arrival(&r, 25, 3.0), 0.0);
    }

    #[test]
    fn queue_examples() {
        assert_eq!(energy_queue_step(5.0, 2.0, 3.0), 6.0);
        assert_eq!(energy_queue_step(1.0, 1.0, 0.0), 0.0);
        assert_eq!(energy_queue_step(0.0, 0.0, 3.0), 3.0);
        assert_eq!(delay_queue_step(4.0, 5.0, 2.0, 1.0), 3.0);
        assert_eq!(delay_queue_step(40.0, 2.0, 2.0, 1.0), 0.0);
        assert_eq!(delay_queue_step(0.0, 1.0, 0.0, 2.0), 2.0);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_exchange(2.0, 1.0, 0.0, 3.0), 0.0);
        assert_eq!(grid_exchange(2.0, 1.0, 1.0, 0.0), 4.0);
        assert_eq!(grid_exchange(0.0, 0.0, -1.0, 2.0), -3.0);
    }

    proptest! {
        #[test]
        fn queues_stay_nonnegative(q in 0.0..50.0f64, frac in 0.0..=1.0f64, a in 0.0..3.0f64,
                                   z in 0.0..50.0f64, xi in 0.01..5.0f64) {
            let x = frac * q.min(3.0);
            prop_assert!(energy_queue_step(q, x, a) >= 0.0);
            prop_assert!(delay_queue_step(z, q, x, xi) >= 0.0);
        }

        #[test]
        fn thermal_is_monotone(temp in 10.0..30.0f64, t_out in -5.0..15.0f64,
                               e1 in 0.0..8.0f64, e2 in 0.0..8.0f64, dt in 0.0..5.0f64) {
            let cfg = HomeConfig::reference();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(thermal_step(temp, t_out, lo, &cfg) <= thermal_step(temp, t_out, hi, &cfg));
            prop_assert!(thermal_step(temp, t_out, lo, &cfg) <= thermal_step(temp, t_out + dt, lo, &cfg));
        }

        #[test]
        fn backlog_nonincreasing_in_service(q in 0.0..20.0f64, f1 in 0.0..=1.0f64, f2 in 0.0..=1.0f64, a in 0.0..3.0f64) {
            let (lo, hi) = if f1 <= f2 { (f1 * q, f2 * q) } else { (f2 * q, f1 * q) };
            prop_assert!(energy_queue_step(q, hi, a) <= energy_queue_step(q, lo, a));
        }

        #[test]
        fn balance_closes(e in 0.0..8.0f64, x in 0.0..3.0f64, y in -1.0..1.0f64, r in 0.0..6.0f64) {
            let g = grid_exchange(e, x, y, r);
            prop_assert!((g + r - (e + x + y)).abs() <= 4.0 * f64::EPSILON * (e + x + y.abs() + r));
        }
    }
}
