//! The online policy, the three baselines and the horizon runner.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::{validate_config, HomeConfig, ValidatedConfig};
use crate::error::{ConfigError, SimError, SolveError};
use crate::metrics::{discomfort_cost, energy_cost};
use crate::params::{derive_controller_params, ControllerParams, DerivedBounds, ParamOverrides};
use crate::physics::{
    delay_queue_step, energy_queue_step, ess_step, grid_exchange, pv_output, thermal_step,
    EvRequest, SlotObservation, SystemState,
};
use crate::solver::{solve_p2, Decision, P2Instance};
use crate::traces::{arrival_stream, TraceBundle};

/// Served energy below this is treated as rounding noise by the delay ledger.
const CHUNK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Drift-plus-penalty controller.
    Proposed,
    /// Track the setpoint, charge the EV greedily, no battery.
    B1,
    /// Two-tier price rule for heating, greedy EV, no battery.
    B2,
    /// Proposed controller with the battery removed.
    B3,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Proposed,
        PolicyKind::B1,
        PolicyKind::B2,
        PolicyKind::B3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Proposed => "P",
            PolicyKind::B1 => "B1",
            PolicyKind::B2 => "B2",
            PolicyKind::B3 => "B3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P" | "PROPOSED" => Some(PolicyKind::Proposed),
            "B1" => Some(PolicyKind::B1),
            "B2" => Some(PolicyKind::B2),
            "B3" => Some(PolicyKind::B3),
            _ => None,
        }
    }
}

/// A policy bound to the configuration it runs on.
///
/// For [`PolicyKind::B3`] the configuration is the battery-less copy and the
/// parameters are derived from it. The baselines carry parameters too, only
/// so that their runs report `H` and `K` on the same footing.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub kind: PolicyKind,
    pub cfg: ValidatedConfig,
    pub params: ControllerParams,
    pub bounds: DerivedBounds,
}

impl Policy {
    pub fn new(
        kind: PolicyKind,
        cfg: &ValidatedConfig,
        overrides: &ParamOverrides,
    ) -> Result<Self, ConfigError> {
        let cfg = match kind {
            PolicyKind::B3 => validate_config(cfg.without_ess())?,
            _ => cfg.clone(),
        };
        let (params, bounds) = derive_controller_params(&cfg, overrides)?;
        Ok(Policy {
            kind,
            cfg,
            params,
            bounds,
        })
    }

    fn home(&self) -> &HomeConfig {
        &self.cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: usize,
    pub decision: Decision,
    /// State at `t + 1`.
    pub state_after: SystemState,
    pub phi1: f64,
    pub phi2: f64,
    /// Lyapunov value of the state the decision was taken in.
    pub lyapunov: f64,
    /// Largest queueing delay among EV energy served in this slot.
    pub ev_delay: u32,
    /// Whether the vacant-and-coasting rule fixed `e = 0`.
    pub shortcut: bool,
    pub occupied_next: bool,
    pub t_ref_next: f64,
    pub price_buy: f64,
    pub price_sell: f64,
}

/// Delay outcome of one EV request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestDelay {
    pub request: usize,
    /// Slots between submission and service, maximised over the request's
    /// energy. For unfinished requests this counts up to the last slot.
    pub delay: u32,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub policy: PolicyKind,
    pub cfg: ValidatedConfig,
    pub params: ControllerParams,
    pub bounds: DerivedBounds,
    pub initial_state: SystemState,
    pub records: Vec<SlotRecord>,
    pub final_state: SystemState,
    pub request_delays: Vec<RequestDelay>,
}

impl SimulationRun {
    pub fn max_ev_delay(&self) -> u32 {
        self.request_delays
            .iter()
            .map(|d| d.delay)
            .max()
            .unwrap_or(0)
    }

    pub fn shortcut_count(&self) -> usize {
        self.records.iter().filter(|r| r.shortcut).count()
    }
}

/// True when the home is vacant next slot and coasting keeps the band
/// minimum.
fn vacant_coast(state: &SystemState, obs: &SlotObservation, cfg: &HomeConfig) -> bool {
    !obs.occupied_next && thermal_step(state.temp, obs.t_out, 0.0, cfg) >= cfg.t_min
}

/// HVAC power that lands the next temperature on `target`, clipped to the
/// heater range.
fn heat_to(target: f64, state: &SystemState, obs: &SlotObservation, cfg: &HomeConfig) -> f64 {
    let eps = cfg.epsilon;
    let e = ((target - eps * state.temp) / (1.0 - eps) - obs.t_out) / cfg.heat_gain();
    if e.is_nan() {
        0.0
    } else {
        e.clamp(0.0, cfg.e_max)
    }
}

fn decision(e: f64, x: f64, y: f64, obs: &SlotObservation, cfg: &HomeConfig) -> Decision {
    Decision {
        e,
        x,
        y,
        g: grid_exchange(e, x, y, pv_output(obs.solar_rho, cfg)),
        objective: 0.0,
    }
}

/// One slot of the drift-plus-penalty controller. Returns the decision and
/// whether the vacancy rule overrode the HVAC power.
pub fn step_proposed(
    state: &SystemState,
    obs: &SlotObservation,
    policy: &Policy,
) -> Result<(Decision, bool), SolveError> {
    let cfg = policy.home();
    let inst = P2Instance::new(state, obs, &policy.params, cfg);
    let mut d = solve_p2(&inst)?;
    let shortcut = vacant_coast(state, obs, cfg);
    if shortcut && d.e != 0.0 {
        d.e = 0.0;
        d.g = grid_exchange(0.0, d.x, d.y, inst.pv);
        d.objective = inst.objective(0.0, d.x, d.y);
    }
    Ok((d, shortcut))
}

/// Setpoint tracking with greedy EV charging.
pub fn step_b1(state: &SystemState, obs: &SlotObservation, cfg: &HomeConfig) -> (Decision, bool) {
    let shortcut = vacant_coast(state, obs, cfg);
    let e = if shortcut {
        0.0
    } else {
        heat_to(obs.t_ref_next, state, obs, cfg)
    };
    let x = state.q.min(cfg.x_max).max(0.0);
    (decision(e, x, 0.0, obs, cfg), shortcut)
}

/// Price-aware heating: pre-heat toward `t_max` ahead of a price rise,
/// otherwise hold the band minimum. Greedy EV charging.
pub fn step_b2(
    state: &SystemState,
    obs: &SlotObservation,
    next_price_buy: f64,
    cfg: &HomeConfig,
) -> (Decision, bool) {
    let shortcut = vacant_coast(state, obs, cfg);
    let e = if shortcut {
        0.0
    } else if obs.price_buy < cfg.epsilon * next_price_buy {
        heat_to(cfg.t_max, state, obs, cfg)
    } else {
        heat_to(cfg.t_min, state, obs, cfg)
    };
    let x = state.q.min(cfg.x_max).max(0.0);
    (decision(e, x, 0.0, obs, cfg), shortcut)
}

/// Applies a decision to the state.
pub fn advance(
    state: &SystemState,
    obs: &SlotObservation,
    d: &Decision,
    params: &ControllerParams,
    cfg: &HomeConfig,
) -> SystemState {
    SystemState {
        t: state.t + 1,
        temp: thermal_step(state.temp, obs.t_out, d.e, cfg),
        q: energy_queue_step(state.q, d.x, obs.ev_arrival),
        z: delay_queue_step(state.z, state.q, d.x, params.xi),
        g_ess: ess_step(state.g_ess, d.y),
    }
}

/// Observation for slot `t`: prices, weather and arrivals of `t`, setpoint
/// and occupancy of `t + 1`.
pub fn observation(traces: &TraceBundle, arrivals: &[f64], t: usize) -> SlotObservation {
    SlotObservation {
        price_buy: traces.buy_price[t],
        price_sell: traces.sell_price[t],
        t_out: traces.outdoor_temp[t],
        solar_rho: traces.solar_rho[t],
        ev_arrival: arrivals[t],
        t_ref_next: traces.t_ref[t + 1],
        occupied_next: traces.occupied[t + 1],
    }
}

/// FIFO ledger of submitted EV energy, used to measure queueing delay.
struct DelayLedger {
    chunks: VecDeque<(usize, usize, f64)>,
    delays: Vec<RequestDelay>,
}

impl DelayLedger {
    fn new(n_requests: usize) -> Self {
        DelayLedger {
            chunks: VecDeque::new(),
            delays: (0..n_requests)
                .map(|request| RequestDelay {
                    request,
                    delay: 0,
                    completed: false,
                })
                .collect(),
        }
    }

    /// Serves `x` at slot `t` in arrival order; returns the largest delay.
    fn serve(&mut self, t: usize, mut x: f64) -> u32 {
        let mut worst = 0;
        while x > CHUNK_EPS {
            let Some(front) = self.chunks.front_mut() else {
                break;
            };
            let take = front.2.min(x);
            front.2 -= take;
            x -= take;
            let delay = (t - front.0) as u32;
            worst = worst.max(delay);
            let rd = &mut self.delays[front.1];
            rd.delay = rd.delay.max(delay);
            if front.2 <= CHUNK_EPS {
                self.chunks.pop_front();
            }
        }
        worst
    }

    fn submit(&mut self, t: usize, request: usize, amount: f64) {
        if amount > 0.0 {
            self.chunks.push_back((t, request, amount));
        }
    }

    fn finish(mut self, last_slot: usize) -> Vec<RequestDelay> {
        let mut pending = vec![false; self.delays.len()];
        for &(s, req, _) in &self.chunks {
            pending[req] = true;
            let rd = &mut self.delays[req];
            rd.delay = rd.delay.max(last_slot.saturating_sub(s) as u32);
        }
        for (rd, p) in self.delays.iter_mut().zip(pending) {
            rd.completed = !p;
        }
        self.delays
    }
}

fn check_inputs(
    traces: &TraceBundle,
    reqs: &[EvRequest],
    cfg: &HomeConfig,
) -> Result<(), SimError> {
    if !traces.lengths_consistent() {
        return Err(SimError::TraceLengthMismatch(
            "trace columns have different lengths".into(),
        ));
    }
    if traces.n_slots() < 2 {
        return Err(SimError::TraceLengthMismatch(format!(
            "need at least 2 slots, got {}",
            traces.n_slots()
        )));
    }
    traces
        .validate(cfg)
        .map_err(|e| SimError::InvalidInput(e.to_string()))?;
    for (i, r) in reqs.iter().enumerate() {
        if !(r.energy.is_finite() && r.energy >= 0.0) || r.deadline <= r.start {
            return Err(SimError::InvalidInput(format!(
                "EV request {i} is malformed"
            )));
        }
    }
    Ok(())
}

/// Runs `policy` over the whole trace. Decisions are taken for slots
/// `0..N-1`, so the run has `N - 1` records.
pub fn run_simulation(
    traces: &TraceBundle,
    ev_requests: &[EvRequest],
    policy: &Policy,
) -> Result<SimulationRun, SimError> {
    let cfg = policy.home();
    check_inputs(traces, ev_requests, cfg)?;
    let n = traces.n_slots();
    let init = SystemState::initial(cfg.initial_temp(), cfg.initial_ess());
    if !(init.temp >= cfg.t_min && init.temp <= cfg.t_max) {
        return Err(SimError::InfeasibleInitialState(format!(
            "temperature {} outside [{}, {}]",
            init.temp, cfg.t_min, cfg.t_max
        )));
    }
    if !(init.g_ess >= cfg.g_min_ess && init.g_ess <= cfg.g_max_ess) {
        return Err(SimError::InfeasibleInitialState(format!(
            "battery level {} outside [{}, {}]",
            init.g_ess, cfg.g_min_ess, cfg.g_max_ess
        )));
    }

    let per_request: Vec<Vec<f64>> = ev_requests
        .iter()
        .map(|r| arrival_stream(std::slice::from_ref(r), n, cfg.v_max))
        .collect();
    let arrivals: Vec<f64> = (0..n)
        .map(|t| per_request.iter().map(|a| a[t]).sum())
        .collect();
    if let Some(t) = arrivals.iter().position(|a| *a > cfg.a_max * (1.0 + 1e-12)) {
        return Err(SimError::InvalidInput(format!(
            "EV arrivals at slot {t} ({}) exceed a_max {}",
            arrivals[t], cfg.a_max
        )));
    }

    let mut ledger = DelayLedger::new(ev_requests.len());
    let mut state = init;
    let mut records = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let obs = observation(traces, &arrivals, t);
        let (d, shortcut) = match policy.kind {
            PolicyKind::Proposed | PolicyKind::B3 => step_proposed(&state, &obs, policy)?,
            PolicyKind::B1 => step_b1(&state, &obs, cfg),
            PolicyKind::B2 => step_b2(&state, &obs, traces.buy_price[t + 1], cfg),
        };
        let ev_delay = ledger.serve(t, d.x);
        for (i, a) in per_request.iter().enumerate() {
            ledger.submit(t, i, a[t]);
        }
        let next = advance(&state, &obs, &d, &policy.params, cfg);
        records.push(SlotRecord {
            t,
            decision: d,
            state_after: next,
            phi1: energy_cost(d.g, obs.price_buy, obs.price_sell),
            phi2: discomfort_cost(next.temp, obs.t_ref_next, obs.occupancy(), cfg.gamma),
            lyapunov: state.lyapunov(&policy.params),
            ev_delay,
            shortcut,
            occupied_next: obs.occupied_next,
            t_ref_next: obs.t_ref_next,
            price_buy: obs.price_buy,
            price_sell: obs.price_sell,
        });
        state = next;
    }
    Ok(SimulationRun {
        policy: policy.kind,
        cfg: policy.cfg.clone(),
        params: policy.params,
        bounds: policy.bounds,
        initial_state: init,
        records,
        final_state: state,
        request_delays: ledger.finish(n - 1),
    })
}
