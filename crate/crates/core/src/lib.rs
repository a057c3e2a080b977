//! Online energy management for a smart home with an inverter HVAC, an EV,
//! a battery (ESS) and rooftop PV.
//!
//! The controller stabilises four queues (a shifted indoor temperature, the
//! EV energy backlog, an EV delay queue and a shifted battery level) and
//! picks every slot's decision by minimising a drift-plus-penalty bound.
//! All controller parameters that guarantee comfort-band, battery-band and
//! charging-deadline feasibility are derived in closed form from the home
//! configuration.
//!
//! Module map:
//!
//! - [`config`]: home constants and the controllability checks.
//! - [`params`]: closed-form controller parameters, bounds and gap constants.
//! - [`physics`]: state transitions for temperature, battery, EV queues.
//! - [`solver`]: exact per-slot subproblem solver plus a grid oracle.
//! - [`controller`]: the online policy, three baselines, horizon runner.
//! - [`traces`]: CSV ingestion, occupancy heuristic, EV and synthetic traces.
//! - [`metrics`]: cost functions, run summaries and report emission.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod error;
pub mod metrics;
pub mod params;
pub mod physics;
pub mod solver;
pub mod traces;

pub use config::{HomeConfig, ValidatedConfig};
pub use controller::{run_simulation, Policy, PolicyKind, SimulationRun, SlotRecord};
pub use error::{ConfigError, ReportError, SimError, SolveError, TraceError};
pub use params::{ControllerParams, DerivedBounds, PerformanceGap};
pub use physics::{EvRequest, SlotObservation, SystemState};
pub use solver::{Decision, P2Instance};
pub use traces::TraceBundle;
