//! Exact solver for the per-slot drift-plus-penalty subproblem.
//!
//! Per slot the controller minimises
//!
//! ```text
//! K y - (Q + Z) x + eps (1 - eps) H (Gamma + T_out + (eta/A) e)
//!     + V (Phi1(g) + gamma pi (T_next(e) - T_ref)^2)
//! ```
//!
//! over `0 <= e <= e_max`, `0 <= x <= min(x_max, Q)`, `-u_d <= y <= u_c`
//! with `g = e + x + y - r`. `Phi1` is `B g` when buying and `S g` when
//! selling, so for a fixed unit price `p` the problem separates: `x` and `y`
//! are bang-bang, `e` minimises a clipped scalar quadratic. The solver tries
//! `p = V B` (accept if `g >= 0`), `p = V S` (accept if `g <= 0`), and
//! otherwise finds the price in `[V S, V B]` whose response balances to
//! `g = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::HomeConfig;
use crate::error::SolveError;
use crate::params::ControllerParams;
use crate::physics::{grid_exchange, SlotObservation, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2Instance {
    /// Shifted temperature queue.
    pub h: f64,
    pub q: f64,
    pub z: f64,
    /// Shifted battery queue.
    pub k: f64,
    pub temp: f64,
    pub price_buy: f64,
    pub price_sell: f64,
    pub t_out: f64,
    /// PV output this slot, kW.
    pub pv: f64,
    pub t_ref_next: f64,
    /// Occupancy of the next slot as 0.0 or 1.0.
    pub occupancy: f64,
    pub v: f64,
    pub gamma_shift: f64,
    pub epsilon: f64,
    pub heat_gain: f64,
    pub gamma: f64,
    pub e_max: f64,
    /// `min(x_max, Q)`.
    pub x_upper: f64,
    pub u_cmax: f64,
    pub u_dmax: f64,
}

impl P2Instance {
    pub fn new(
        state: &SystemState,
        obs: &SlotObservation,
        params: &ControllerParams,
        cfg: &HomeConfig,
    ) -> Self {
        P2Instance {
            h: state.h(params),
            q: state.q,
            z: state.z,
            k: state.k(params),
            temp: state.temp,
            price_buy: obs.price_buy,
            price_sell: obs.price_sell,
            t_out: obs.t_out,
            pv: crate::physics::pv_output(obs.solar_rho, cfg),
            t_ref_next: obs.t_ref_next,
            occupancy: obs.occupancy(),
            v: params.v,
            gamma_shift: params.gamma_shift,
            epsilon: cfg.epsilon,
            heat_gain: cfg.heat_gain(),
            gamma: cfg.gamma,
            e_max: cfg.e_max,
            x_upper: cfg.x_max.min(state.q).max(0.0),
            u_cmax: cfg.u_cmax,
            u_dmax: cfg.u_dmax,
        }
    }

    /// Indoor temperature of the next slot under HVAC power `e`.
    pub fn next_temp(&self, e: f64) -> f64 {
        self.epsilon * self.temp + (1.0 - self.epsilon) * (self.t_out + self.heat_gain * e)
    }

    /// Objective of a candidate decision, with `Phi1` in its branch form.
    pub fn objective(&self, e: f64, x: f64, y: f64) -> f64 {
        let g = grid_exchange(e, x, y, self.pv);
        let phi1 = if g >= 0.0 {
            self.price_buy * g
        } else {
            self.price_sell * g
        };
        let dev = self.next_temp(e) - self.t_ref_next;
        let phi2 = self.gamma * self.occupancy * dev * dev;
        self.k * y - (self.q + self.z) * x
            + self.epsilon
                * (1.0 - self.epsilon)
                * self.h
                * (self.gamma_shift + self.t_out + self.heat_gain * e)
            + self.v * (phi1 + phi2)
    }

    /// Quadratic and linear coefficients of the HVAC part of the objective
    /// (constant dropped).
    fn hvac_coeffs(&self) -> (f64, f64) {
        let one_m = 1.0 - self.epsilon;
        let w = self.v * self.gamma * self.occupancy;
        let slope = one_m * self.heat_gain;
        let coast = self.epsilon * self.temp + one_m * self.t_out;
        let a2 = w * slope * slope;
        let a1 = self.epsilon * one_m * self.h * self.heat_gain
            + 2.0 * w * slope * (coast - self.t_ref_next);
        (a2, a1)
    }

    fn check(&self) -> Result<(), SolveError> {
        let vals = [
            self.h,
            self.q,
            self.z,
            self.k,
            self.temp,
            self.price_buy,
            self.price_sell,
            self.t_out,
            self.pv,
            self.t_ref_next,
            self.occupancy,
            self.v,
            self.gamma_shift,
            self.epsilon,
            self.heat_gain,
            self.gamma,
            self.e_max,
            self.x_upper,
            self.u_cmax,
            self.u_dmax,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NumericalFailure(
                "non-finite instance data".into(),
            ));
        }
        if self.e_max < 0.0 || self.x_upper < 0.0 || self.u_cmax < 0.0 || self.u_dmax < 0.0 {
            return Err(SolveError::NumericalFailure("empty decision box".into()));
        }
        if self.price_sell > self.price_buy {
            return Err(SolveError::NumericalFailure(format!(
                "sell price {} above buy price {}",
                self.price_sell, self.price_buy
            )));
        }
        Ok(())
    }
}

/// One slot's controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// HVAC power.
    pub e: f64,
    /// EV service.
    pub x: f64,
    /// Battery power, positive charges.
    pub y: f64,
    /// Grid exchange, positive buys.
    pub g: f64,
    /// Subproblem objective; zero for baseline decisions.
    pub objective: f64,
}

/// HVAC threshold terms `(b_t, c_t)`: the marginal discomfort penalty of
/// heating at `e = 0` and at `e = e_max`.
pub fn hvac_thresholds(inst: &P2Instance) -> (f64, f64) {
    let one_m = 1.0 - inst.epsilon;
    let coef = 2.0 * inst.v * inst.gamma * inst.occupancy * one_m * one_m * inst.heat_gain;
    let base = inst.t_out - (inst.t_ref_next - inst.epsilon * inst.temp) / one_m;
    (coef * base, coef * (base + inst.heat_gain * inst.e_max))
}

/// A linear decision variable: cost coefficient and box.
#[derive(Clone, Copy)]
struct LinearVar {
    coef: f64,
    lo: f64,
    hi: f64,
}

impl LinearVar {
    /// Response to unit price `p`; zero-cost ties resolve to the box point
    /// closest to zero.
    fn respond(&self, p: f64) -> f64 {
        let c = self.coef + p;
        if c > 0.0 {
            self.lo
        } else if c < 0.0 {
            self.hi
        } else {
            0.0f64.clamp(self.lo, self.hi)
        }
    }
}

struct Separable {
    x: LinearVar,
    y: LinearVar,
    a2: f64,
    a1: f64,
    e_max: f64,
}

impl Separable {
    fn new(inst: &P2Instance) -> Self {
        let (a2, a1) = inst.hvac_coeffs();
        Separable {
            x: LinearVar {
                coef: -(inst.q + inst.z),
                lo: 0.0,
                hi: inst.x_upper,
            },
            y: LinearVar {
                coef: inst.k,
                lo: -inst.u_dmax,
                hi: inst.u_cmax,
            },
            a2,
            a1,
            e_max: inst.e_max,
        }
    }

    fn quadratic(&self) -> bool {
        self.a2 > 0.0
    }

    fn hvac_as_linear(&self) -> LinearVar {
        LinearVar {
            coef: self.a1,
            lo: 0.0,
            hi: self.e_max,
        }
    }

    fn respond_e(&self, p: f64) -> f64 {
        if self.quadratic() {
            (-(self.a1 + p) / (2.0 * self.a2)).clamp(0.0, self.e_max)
        } else {
            self.hvac_as_linear().respond(p)
        }
    }

    fn respond(&self, p: f64) -> (f64, f64, f64) {
        (self.respond_e(p), self.x.respond(p), self.y.respond(p))
    }

    /// Finds a point of the `g = 0` face that minimises the separable
    /// objective, by locating the balancing unit price in `[p_lo, p_hi]`.
    fn balance(&self, p_lo: f64, p_hi: f64, r: f64) -> Option<(f64, f64, f64)> {
        let tol = 1e-9 * r.abs().max(1.0);
        // linear variables in fill order; HVAC last so ties favour less heating
        let mut linear: Vec<(usize, LinearVar)> = vec![(1, self.x), (2, self.y)];
        if !self.quadratic() {
            linear.push((0, self.hvac_as_linear()));
        }
        let mut prices: Vec<f64> = vec![p_lo, p_hi];
        prices.extend(
            linear
                .iter()
                .map(|(_, v)| -v.coef)
                .filter(|p| *p > p_lo && *p < p_hi),
        );
        prices.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prices.dedup();

        // balancing exactly at a breakpoint, using the tied variables' boxes
        for &p in &prices {
            let mut vals = [0.0f64; 3];
            let mut fixed = 0.0;
            let mut ties = Vec::new();
            for &(idx, var) in &linear {
                if var.coef + p == 0.0 {
                    ties.push((idx, var));
                    vals[idx] = var.lo;
                    fixed += var.lo;
                } else {
                    let v = var.respond(p);
                    vals[idx] = v;
                    fixed += v;
                }
            }
            if self.quadratic() {
                vals[0] = self.respond_e(p);
                fixed += vals[0];
            }
            let room: f64 = ties.iter().map(|(_, v)| v.hi - v.lo).sum();
            let need = r - fixed;
            if need >= -tol && need <= room + tol {
                let mut left = need.max(0.0);
                for (idx, var) in ties {
                    let add = left.min(var.hi - var.lo);
                    vals[idx] = var.lo + add;
                    left -= add;
                }
                return Some((vals[0], vals[1], vals[2]));
            }
        }

        // balancing strictly between breakpoints, where only e moves
        if self.quadratic() {
            for w in prices.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let mid = 0.5 * (lo + hi);
                let x = self.x.respond(mid);
                let y = self.y.respond(mid);
                let target = r - x - y;
                let e_hi = self.respond_e(lo);
                let e_lo = self.respond_e(hi);
                if target >= e_lo - tol && target <= e_hi + tol {
                    return Some((target.clamp(0.0, self.e_max), x, y));
                }
            }
        }
        None
    }
}

fn decision(inst: &P2Instance, (e, x, y): (f64, f64, f64)) -> Decision {
    Decision {
        e,
        x,
        y,
        g: grid_exchange(e, x, y, inst.pv),
        objective: inst.objective(e, x, y),
    }
}

fn better(a: &Decision, b: &Decision) -> bool {
    let scale = 1e-12 * (1.0 + a.objective.abs().max(b.objective.abs()));
    if a.objective < b.objective - scale {
        return true;
    }
    if a.objective > b.objective + scale {
        return false;
    }
    if a.g.abs() != b.g.abs() {
        return a.g.abs() < b.g.abs();
    }
    a.e < b.e
}

/// Exact global minimiser of the per-slot subproblem.
pub fn solve_p2(inst: &P2Instance) -> Result<Decision, SolveError> {
    inst.check()?;
    let sep = Separable::new(inst);
    let p_buy = inst.v * inst.price_buy;
    let p_sell = inst.v * inst.price_sell;

    let buy = decision(inst, sep.respond(p_buy));
    if inst.price_buy == inst.price_sell {
        return Ok(buy);
    }
    let sell = decision(inst, sep.respond(p_sell));

    let mut accepted: Vec<Decision> = Vec::with_capacity(2);
    if buy.g >= 0.0 {
        accepted.push(buy);
    }
    if sell.g <= 0.0 {
        accepted.push(sell);
    }
    if accepted.is_empty() {
        let point = sep.balance(p_sell, p_buy, inst.pv).ok_or_else(|| {
            SolveError::NumericalFailure(format!(
                "no balancing price in [{p_sell}, {p_buy}] for pv {}",
                inst.pv
            ))
        })?;
        return Ok(decision(inst, point));
    }
    let mut best = accepted[0];
    for cand in &accepted[1..] {
        if better(cand, &best) {
            best = *cand;
        }
    }
    Ok(best)
}

/// Objective evaluated from first principles, with `Phi1` in its half-sum
/// form. Used by the grid oracle only.
pub fn reference_objective(inst: &P2Instance, e: f64, x: f64, y: f64) -> f64 {
    let g = e + x + y - inst.pv;
    let (b, s) = (inst.price_buy, inst.price_sell);
    let phi1 = 0.5 * (b - s) * g.abs() + 0.5 * (b + s) * g;
    let t_next = inst.epsilon * inst.temp
        + (1.0 - inst.epsilon) * inst.t_out
        + (1.0 - inst.epsilon) * inst.heat_gain * e;
    let phi2 = inst.gamma * inst.occupancy * (t_next - inst.t_ref_next).powi(2);
    let drift = inst.k * y - (inst.q + inst.z) * x
        + inst.epsilon
            * (1.0 - inst.epsilon)
            * inst.h
            * (inst.gamma_shift + inst.t_out + inst.heat_gain * e);
    drift + inst.v * (phi1 + phi2)
}

#[derive(Clone, Copy)]
struct Box3 {
    lo: [f64; 3],
    hi: [f64; 3],
}

fn grid_search(inst: &P2Instance, bx: &Box3, n: usize) -> ([f64; 3], f64) {
    let pt = |d: usize, i: usize| -> f64 {
        if n <= 1 || bx.hi[d] <= bx.lo[d] {
            bx.lo[d]
        } else {
            bx.lo[d] + (bx.hi[d] - bx.lo[d]) * i as f64 / (n - 1) as f64
        }
    };
    let mut best = ([bx.lo[0], bx.lo[1], bx.lo[2]], f64::INFINITY);
    for i in 0..n {
        let e = pt(0, i);
        for j in 0..n {
            let x = pt(1, j);
            for l in 0..n {
                let y = pt(2, l);
                let val = reference_objective(inst, e, x, y);
                if val < best.1 {
                    best = ([e, x, y], val);
                }
            }
        }
    }
    best
}

fn full_box(inst: &P2Instance) -> Box3 {
    Box3 {
        lo: [0.0, 0.0, -inst.u_dmax],
        hi: [inst.e_max, inst.x_upper, inst.u_cmax],
    }
}

fn to_decision(inst: &P2Instance, p: [f64; 3], val: f64) -> Decision {
    Decision {
        e: p[0],
        x: p[1],
        y: p[2],
        g: p[0] + p[1] + p[2] - inst.pv,
        objective: val,
    }
}

/// Best point of a `grid_n^3` lattice over the decision boxes.
pub fn oracle_p2(inst: &P2Instance, grid_n: usize) -> Decision {
    let n = grid_n.max(2);
    let (p, val) = grid_search(inst, &full_box(inst), n);
    to_decision(inst, p, val)
}

/// Lattice search followed by `rounds` zoomed lattices around the incumbent,
/// each shrinking the box to two lattice steps either side.
pub fn oracle_p2_refined(inst: &P2Instance, grid_n: usize, rounds: usize) -> Decision {
    let n = grid_n.max(3);
    let full = full_box(inst);
    let (mut p, mut val) = grid_search(inst, &full, n);
    let mut half: [f64; 3] =
        std::array::from_fn(|d| 2.0 * (full.hi[d] - full.lo[d]) / (n - 1) as f64);
    for _ in 0..rounds {
        let bx = Box3 {
            lo: std::array::from_fn(|d| (p[d] - half[d]).max(full.lo[d])),
            hi: std::array::from_fn(|d| (p[d] + half[d]).min(full.hi[d])),
        };
        let (np, nv) = grid_search(inst, &bx, n);
        if nv < val {
            p = np;
            val = nv;
        }
        for h in half.iter_mut() {
            *h *= 4.0 / (n - 1) as f64;
        }
    }
    to_decision(inst, p, val)
}

/// Random subproblem for solver verification. Roughly one draw in eight has
/// a degenerate box or equal buy and sell prices.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> P2Instance {
    let epsilon = rng.gen_range(0.8..0.999);
    let heat_gain = rng.gen_range(1.0..20.0);
    let temp = rng.gen_range(10.0..30.0);
    let gamma_shift = rng.gen_range(-60.0..0.0);
    let q = if rng.gen_bool(0.2) {
        0.0
    } else {
        rng.gen_range(0.0..20.0)
    };
    let x_max: f64 = rng.gen_range(0.0..5.0);
    let price_buy = rng.gen_range(0.1..1.5);
    let price_sell = if rng.gen_bool(0.1) {
        price_buy
    } else {
        price_buy * rng.gen_range(0.0..1.0)
    };
    let degenerate = rng.gen_bool(0.05);
    P2Instance {
        h: temp + gamma_shift,
        q,
        z: if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..20.0)
        },
        k: rng.gen_range(-30.0..10.0),
        temp,
        price_buy,
        price_sell,
        t_out: rng.gen_range(-5.0..15.0),
        pv: if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..8.0)
        },
        t_ref_next: rng.gen_range(18.0..25.0),
        occupancy: if rng.gen_bool(0.7) { 1.0 } else { 0.0 },
        v: rng.gen_range(0.01..10.0),
        gamma_shift,
        epsilon,
        heat_gain,
        gamma: if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..0.05)
        },
        e_max: if degenerate {
            0.0
        } else {
            rng.gen_range(0.0..10.0)
        },
        x_upper: if degenerate { 0.0 } else { x_max.min(q) },
        u_cmax: if degenerate {
            0.0
        } else {
            rng.gen_range(0.0..3.0)
        },
        u_dmax: if degenerate {
            0.0
        } else {
            rng.gen_range(0.0..3.0)
        },
    }
}
