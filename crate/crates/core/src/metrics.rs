//! Cost functions, run summaries and report writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controller::SimulationRun;
use crate::error::ReportError;
use crate::params::{compute_performance_gap, DerivedBounds};

/// Energy cost of grid exchange `g`: buy price when importing, sell price
/// (a credit) when exporting.
pub fn energy_cost(g: f64, buy: f64, sell: f64) -> f64 {
    if g > 0.0 {
        buy * g
    } else {
        sell * g
    }
}

/// Same cost written without a branch on the sign of `g`:
/// `((b - s) |g| + (b + s) g) / 2`.
///
/// Evaluated with error-free sums and products, since the two terms nearly
/// cancel when exporting at a sell price far below the buy price.
pub fn energy_cost_halfsum(g: f64, buy: f64, sell: f64) -> f64 {
    let (d, d_err) = two_sum(buy, -sell);
    let (p, p_err) = two_sum(buy, sell);
    let a = g.abs();
    let (t1, t1_err) = two_prod(d, a);
    let (t2, t2_err) = two_prod(p, g);
    let (r, r_err) = two_sum(t1, t2);
    0.5 * (r + (r_err + t1_err + t2_err + d_err * a + p_err * g))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Quadratic discomfort, charged only when the home is occupied.
pub fn discomfort_cost(temp: f64, t_ref: f64, occupancy: f64, gamma: f64) -> f64 {
    let dev = temp - t_ref;
    gamma * occupancy * dev * dev
}

/// Average absolute deviation from the setpoint over occupied slots, with
/// an `N_on - 1` denominator. Zero when at most one slot is occupied.
pub fn atd(run: &SimulationRun) -> f64 {
    let (n_on, sum) = run
        .records
        .iter()
        .filter(|r| r.occupied_next)
        .fold((0usize, 0.0), |(n, s), r| {
            (n + 1, s + (r.state_after.temp - r.t_ref_next).abs())
        });
    if n_on <= 1 {
        0.0
    } else {
        sum / (n_on - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryParams {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Gamma")]
    pub gamma_shift: f64,
    pub alpha: f64,
    pub xi: f64,
    pub gamma: f64,
    pub eps: f64,
    pub t_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy: f64,
    pub discomfort: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub params: SummaryParams,
    pub totals: Totals,
    pub atd: f64,
    pub max_ev_delay: u32,
    pub temp_range: [f64; 2],
    pub ess_range: [f64; 2],
    /// Peaks of `Q` and `Z`.
    pub queue_peaks: [f64; 2],
    pub theta_over_v: f64,
    pub currency: String,
    #[serde(skip)]
    pub n_on: usize,
    #[serde(skip)]
    pub bounds: Option<DerivedBounds>,
}

fn range(it: impl Iterator<Item = f64>) -> [f64; 2] {
    it.fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], v| {
        [lo.min(v), hi.max(v)]
    })
}

pub fn summarize(run: &SimulationRun) -> Result<RunSummary, ReportError> {
    if run.records.is_empty() {
        return Err(ReportError::EmptyRun);
    }
    let energy: f64 = run.records.iter().map(|r| r.phi1).sum();
    let discomfort: f64 = run.records.iter().map(|r| r.phi2).sum();
    let states =
        || std::iter::once(run.initial_state).chain(run.records.iter().map(|r| r.state_after));
    let gap = compute_performance_gap(&run.cfg, &run.params);
    Ok(RunSummary {
        policy: run.policy.name().to_string(),
        params: SummaryParams {
            v: run.params.v,
            gamma_shift: run.params.gamma_shift,
            alpha: run.params.alpha_shift,
            xi: run.params.xi,
            gamma: run.cfg.gamma,
            eps: run.cfg.epsilon,
            t_min: run.cfg.t_min,
        },
        totals: Totals {
            energy,
            discomfort,
            total: energy + discomfort,
        },
        atd: atd(run),
        max_ev_delay: run.max_ev_delay(),
        temp_range: range(states().map(|s| s.temp)),
        ess_range: range(states().map(|s| s.g_ess)),
        queue_peaks: [
            range(states().map(|s| s.q))[1],
            range(states().map(|s| s.z))[1],
        ],
        theta_over_v: gap.gap_per_v,
        currency: run.cfg.currency.clone(),
        n_on: run.records.iter().filter(|r| r.occupied_next).count(),
        bounds: Some(run.bounds),
    })
}

pub fn write_summary_json<W: Write>(summary: &RunSummary, mut w: W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    Ok(())
}

/// `%g`-style formatting with `sig` significant digits.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sig = sig.max(1);
    let exp = v.abs().log10().floor() as i32;
    if exp < -5 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, v);
        match s.split_once('e') {
            Some((m, e)) => format!("{}e{}", trim_zeros(m), e),
            None => s,
        }
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const SLOT_COLUMNS: [&str; 14] = [
    "t",
    "e",
    "x",
    "y",
    "g",
    "T",
    "Q",
    "Z",
    "G",
    "H",
    "K",
    "phi1",
    "phi2",
    "occupied_next",
];

/// One row per decision slot; state columns hold the post-decision values.
pub fn write_slots_csv<W: Write>(run: &SimulationRun, w: W) -> Result<(), ReportError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SLOT_COLUMNS)?;
    for r in &run.records {
        let s = r.state_after;
        let d = r.decision;
        let mut row: Vec<String> = vec![r.t.to_string()];
        row.extend(
            [
                d.e,
                d.x,
                d.y,
                d.g,
                s.temp,
                s.q,
                s.z,
                s.g_ess,
                s.h(&run.params),
                s.k(&run.params),
                r.phi1,
                r.phi2,
            ]
            .iter()
            .map(|v| fmt_sig(*v, 9)),
        );
        row.push(if r.occupied_next { "1" } else { "0" }.into());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub summary: RunSummary,
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "policy",
    "param",
    "value",
    "energy",
    "discomfort",
    "total",
    "atd",
    "max_ev_delay",
    "T_min_obs",
    "T_max_obs",
    "V",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<(), ReportError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        let s = &r.summary;
        wtr.write_record([
            s.policy.clone(),
            r.param.clone(),
            fmt_sig(r.value, 9),
            fmt_sig(s.totals.energy, 9),
            fmt_sig(s.totals.discomfort, 9),
            fmt_sig(s.totals.total, 9),
            fmt_sig(s.atd, 9),
            s.max_ev_delay.to_string(),
            fmt_sig(s.temp_range[0], 9),
            fmt_sig(s.temp_range[1], 9),
            fmt_sig(s.params.v, 9),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, HomeConfig};
    use crate::controller::{run_simulation, Policy, PolicyKind};
    use crate::params::ParamOverrides;
    use crate::traces::{generate_ev_requests, synthetic_trace, EnergyRange, EvWindow};
    use proptest::prelude::*;

    fn run(kind: PolicyKind, gamma: f64) -> SimulationRun {
        let cfg = validate_config(HomeConfig {
            gamma,
            ..HomeConfig::reference()
        })
        .unwrap();
        let trace = synthetic_trace(&cfg, 7, 9).bundle;
        let (reqs, _) =
            generate_ev_requests(9, 7, EvWindow::default(), EnergyRange::default(), &cfg).unwrap();
        let policy = Policy::new(kind, &cfg, &ParamOverrides::default()).unwrap();
        run_simulation(&trace, &reqs, &policy).unwrap()
    }

    #[test]
    fn cost_examples() {
        assert!((energy_cost(2.0, 0.6, 0.4) - 1.2).abs() < 1e-15);
        assert!((energy_cost(-2.0, 0.6, 0.4) + 0.8).abs() < 1e-15);
        assert_eq!(energy_cost(0.0, 0.6, 0.4), 0.0);
        assert!((discomfort_cost(20.0, 22.0, 1.0, 0.1) - 0.4).abs() < 1e-12);
        assert_eq!(discomfort_cost(20.0, 22.0, 0.0, 0.1), 0.0);
    }

    #[test]
    fn atd_examples() {
        let mut r = run(PolicyKind::B1, 0.0);
        for (i, rec) in r.records.iter_mut().enumerate() {
            rec.occupied_next = i < 3;
            rec.t_ref_next = 22.0;
            rec.state_after.temp = [21.0, 23.0, 22.0][i.min(2)];
        }
        assert!((atd(&r) - 1.0).abs() < 1e-12);
        r.records[2].state_after.temp = 23.0;
        assert!((atd(&r) - 1.5).abs() < 1e-12);
        r.records
            .iter_mut()
            .for_each(|rec| rec.occupied_next = false);
        assert_eq!(atd(&r), 0.0);
        r.records[0].occupied_next = true;
        assert_eq!(atd(&r), 0.0);
    }

    #[test]
    fn summary_schema() {
        let r = run(PolicyKind::Proposed, 0.0);
        let s = summarize(&r).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in [
            "policy",
            "params",
            "totals",
            "atd",
            "max_ev_delay",
            "temp_range",
            "ess_range",
            "queue_peaks",
            "theta_over_v",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        for key in ["V", "Gamma", "alpha", "xi", "gamma", "eps", "t_min"] {
            assert!(v["params"].get(key).is_some(), "missing params.{key}");
        }
        assert_eq!(v["policy"], "P");
        let mut empty = r.clone();
        empty.records.clear();
        assert!(matches!(summarize(&empty), Err(ReportError::EmptyRun)));
    }

    #[test]
    fn summary_totals_example() {
        let mut r = run(PolicyKind::B1, 0.0);
        r.records.truncate(2);
        r.records[0].phi1 = 1.0;
        r.records[1].phi1 = -0.9;
        r.records[0].phi2 = 0.0;
        r.records[1].phi2 = 0.0225;
        let s = summarize(&r).unwrap();
        assert!((s.totals.total - 0.1225).abs() < 1e-12);
        r.records.truncate(1);
        let s = summarize(&r).unwrap();
        assert_eq!(s.totals.total, 1.0);
    }

    #[test]
    fn proposed_temperatures_stay_in_band() {
        let r = run(PolicyKind::Proposed, 0.01);
        let s = summarize(&r).unwrap();
        assert!(s.temp_range[0] >= r.cfg.t_min && s.temp_range[1] <= r.cfg.t_max);
    }

    #[test]
    fn totals_are_order_independent() {
        let r = run(PolicyKind::Proposed, 0.05);
        let s = summarize(&r).unwrap();
        let rev: f64 = r.records.iter().rev().map(|x| x.phi1 + x.phi2).sum();
        assert!((rev - s.totals.total).abs() <= 1e-9 * s.totals.total.abs().max(1.0));
    }

    #[test]
    fn slots_csv_shape() {
        let r = run(PolicyKind::B2, 0.0);
        let mut buf = Vec::new();
        write_slots_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SLOT_COLUMNS.join(","));
        assert_eq!(lines.count(), r.records.len());
    }

    #[test]
    fn sig_format() {
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(22.5, 9), "22.5");
        assert_eq!(fmt_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(fmt_sig(-30.0876788, 9), "-30.0876788");
        assert_eq!(fmt_sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(fmt_sig(123456789012.0, 9), "1.23456789e11");
    }

    fn ulps(a: f64, b: f64) -> u64 {
        if a == b {
            return 0;
        }
        let key = |x: f64| {
            let i = x.to_bits() as i64;
            if i < 0 {
                i64::MIN - i
            } else {
                i
            }
        };
        key(a).abs_diff(key(b))
    }

    proptest! {
        #[test]
        fn halfsum_matches_branch(g in -20.0..20.0f64, s in 0.0..1.0f64, spread in 0.0..1.0f64) {
            let b = s + spread;
            prop_assert!(ulps(energy_cost(g, b, s), energy_cost_halfsum(g, b, s)) <= 4);
        }

        #[test]
        fn cost_monotone_in_g(g1 in -20.0..20.0f64, g2 in -20.0..20.0f64, s in 0.0..1.0f64, spread in 0.0..1.0f64) {
            let b = s + spread;
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            prop_assert!(energy_cost(lo, b, s) <= energy_cost(hi, b, s));
        }
    }
}
