//! Exogenous input series: CSV ingestion and export, the step-count
//! occupancy heuristic, EV request synthesis and a seeded synthetic month.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::HomeConfig;
use crate::error::TraceError;
use crate::physics::{ev_arrival, EvRequest};

/// Steps per hour above which the home counts as unoccupied.
pub const DEFAULT_STEP_THRESHOLD: u32 = 1800;

/// Aligned per-slot inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBundle {
    pub outdoor_temp: Vec<f64>,
    pub buy_price: Vec<f64>,
    pub sell_price: Vec<f64>,
    /// Solar radiation, W/m^2.
    pub solar_rho: Vec<f64>,
    pub occupied: Vec<bool>,
    pub t_ref: Vec<f64>,
}

impl TraceBundle {
    pub fn n_slots(&self) -> usize {
        self.outdoor_temp.len()
    }

    pub fn lengths_consistent(&self) -> bool {
        let n = self.n_slots();
        [
            self.buy_price.len(),
            self.sell_price.len(),
            self.solar_rho.len(),
            self.occupied.len(),
            self.t_ref.len(),
        ]
        .iter()
        .all(|&l| l == n)
    }

    pub fn vacancy_fraction(&self) -> f64 {
        if self.occupied.is_empty() {
            return 0.0;
        }
        self.occupied.iter().filter(|o| !**o).count() as f64 / self.occupied.len() as f64
    }

    /// Checks every slot against the configured bounds and `B >= S`.
    pub fn validate(&self, cfg: &HomeConfig) -> Result<(), TraceError> {
        if !self.lengths_consistent() {
            return Err(TraceError::ParseError {
                line: 0,
                column: String::new(),
                message: "trace columns have different lengths".into(),
            });
        }
        for t in 0..self.n_slots() {
            let bounds = [
                ("T_out", self.outdoor_temp[t], cfg.t_out_min, cfg.t_out_max),
                ("B", self.buy_price[t], cfg.b_min, cfg.b_max),
                ("S", self.sell_price[t], cfg.s_min, cfg.s_max),
                ("rho", self.solar_rho[t], 0.0, f64::INFINITY),
                ("T_ref", self.t_ref[t], cfg.t_ref_min, cfg.t_ref_max),
            ];
            for (field, v, lo, hi) in bounds {
                if !(v >= lo && v <= hi) {
                    return Err(TraceError::BoundsError {
                        slot: t,
                        field,
                        message: format!("{v} outside [{lo}, {hi}]"),
                    });
                }
            }
            if self.sell_price[t] > self.buy_price[t] {
                return Err(TraceError::BoundsError {
                    slot: t,
                    field: "S",
                    message: format!(
                        "sell price {} above buy price {}",
                        self.sell_price[t], self.buy_price[t]
                    ),
                });
            }
        }
        Ok(())
    }
}

const TRACE_COLUMNS: [&str; 7] = ["t", "T_out", "B", "S", "rho", "pi", "T_ref"];

fn parse_err(line: u64, column: &str, message: impl Into<String>) -> TraceError {
    TraceError::ParseError {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

/// Maps each expected column name to its position, rejecting unknown and
/// duplicate columns.
fn column_index(
    headers: &csv::StringRecord,
    required: &[&str],
    optional: &[&str],
) -> Result<Vec<Option<usize>>, TraceError> {
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "", "missing header"));
    }
    let names: Vec<&str> = required.iter().chain(optional).copied().collect();
    let mut idx = vec![None; names.len()];
    for (pos, h) in headers.iter().enumerate() {
        match names.iter().position(|n| *n == h) {
            Some(i) if idx[i].is_none() => idx[i] = Some(pos),
            Some(_) => return Err(parse_err(1, h, "duplicate column")),
            None => return Err(parse_err(1, h, "unknown column")),
        }
    }
    for (i, name) in required.iter().enumerate() {
        if idx[i].is_none() {
            return Err(TraceError::MissingColumn((*name).to_string()));
        }
    }
    Ok(idx)
}

fn field<'a>(
    rec: &'a csv::StringRecord,
    pos: usize,
    line: u64,
    name: &str,
) -> Result<&'a str, TraceError> {
    rec.get(pos)
        .ok_or_else(|| parse_err(line, name, "missing value"))
}

fn parse_f64(
    rec: &csv::StringRecord,
    pos: usize,
    line: u64,
    name: &str,
) -> Result<f64, TraceError> {
    let s = field(rec, pos, line, name)?;
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, name, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, name, format!("not finite: {s:?}")));
    }
    Ok(v)
}

fn parse_usize(
    rec: &csv::StringRecord,
    pos: usize,
    line: u64,
    name: &str,
) -> Result<usize, TraceError> {
    let s = field(rec, pos, line, name)?;
    s.parse()
        .map_err(|_| parse_err(line, name, format!("not a non-negative integer: {s:?}")))
}

fn record_line(rec: &csv::StringRecord, fallback: u64) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(fallback)
}

fn csv_error(e: csv::Error) -> TraceError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(line, "", e.to_string())
}

/// Parses a trace CSV (`t,T_out,B[,S],rho,pi,T_ref`) without bounds checks.
/// When `S` is absent it is `sell_ratio * B`.
pub fn parse_trace_csv<R: Read>(rdr: R, sell_ratio: f64) -> Result<TraceBundle, TraceError> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = column_index(&headers, &["t", "T_out", "B", "rho", "pi", "T_ref"], &["S"])?;
    let col = |i: usize| idx[i].unwrap();
    let mut bundle = TraceBundle {
        outdoor_temp: Vec::new(),
        buy_price: Vec::new(),
        sell_price: Vec::new(),
        solar_rho: Vec::new(),
        occupied: Vec::new(),
        t_ref: Vec::new(),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = record_line(&rec, row as u64 + 2);
        let t = parse_usize(&rec, col(0), line, "t")?;
        if t != row {
            return Err(parse_err(
                line,
                "t",
                format!("expected slot {row}, got {t}"),
            ));
        }
        let b = parse_f64(&rec, col(2), line, "B")?;
        let s = match idx[6] {
            Some(p) => parse_f64(&rec, p, line, "S")?,
            None => sell_ratio * b,
        };
        let pi = match field(&rec, col(4), line, "pi")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(
                    line,
                    "pi",
                    format!("expected 0 or 1, got {other:?}"),
                ))
            }
        };
        bundle
            .outdoor_temp
            .push(parse_f64(&rec, col(1), line, "T_out")?);
        bundle.buy_price.push(b);
        bundle.sell_price.push(s);
        bundle.solar_rho.push(parse_f64(&rec, col(3), line, "rho")?);
        bundle.occupied.push(pi);
        bundle.t_ref.push(parse_f64(&rec, col(5), line, "T_ref")?);
    }
    if bundle.n_slots() == 0 {
        return Err(parse_err(1, "", "trace has no rows"));
    }
    Ok(bundle)
}

/// Reads and validates a trace file against `cfg`.
pub fn load_trace_csv(path: &Path, cfg: &HomeConfig) -> Result<TraceBundle, TraceError> {
    let file = std::fs::File::open(path)?;
    let bundle = parse_trace_csv(std::io::BufReader::new(file), cfg.sell_ratio)?;
    bundle.validate(cfg)?;
    Ok(bundle)
}

/// Writes a trace with an explicit `S` column; floats use the shortest
/// representation that reads back to the same value.
pub fn write_trace_csv<W: Write>(bundle: &TraceBundle, w: W) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRACE_COLUMNS).map_err(csv_error)?;
    for t in 0..bundle.n_slots() {
        wtr.write_record([
            t.to_string(),
            bundle.outdoor_temp[t].to_string(),
            bundle.buy_price[t].to_string(),
            bundle.sell_price[t].to_string(),
            bundle.solar_rho[t].to_string(),
            if bundle.occupied[t] { "1" } else { "0" }.to_string(),
            bundle.t_ref[t].to_string(),
        ])
        .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses EV requests from `s,c,E` rows.
pub fn parse_ev_csv<R: Read>(rdr: R) -> Result<Vec<EvRequest>, TraceError> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = column_index(&headers, &["s", "c", "E"], &[])?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = record_line(&rec, row as u64 + 2);
        let start = parse_usize(&rec, idx[0].unwrap(), line, "s")?;
        let deadline = parse_usize(&rec, idx[1].unwrap(), line, "c")?;
        let energy = parse_f64(&rec, idx[2].unwrap(), line, "E")?;
        if energy < 0.0 {
            return Err(parse_err(line, "E", "negative energy"));
        }
        if deadline <= start {
            return Err(parse_err(line, "c", "deadline not after start"));
        }
        out.push(EvRequest {
            start,
            deadline,
            energy,
        });
    }
    Ok(out)
}

pub fn load_ev_csv(path: &Path) -> Result<Vec<EvRequest>, TraceError> {
    let file = std::fs::File::open(path)?;
    parse_ev_csv(std::io::BufReader::new(file))
}

pub fn write_ev_csv<W: Write>(reqs: &[EvRequest], w: W) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["s", "c", "E"]).map_err(csv_error)?;
    for r in reqs {
        wtr.write_record([
            r.start.to_string(),
            r.deadline.to_string(),
            r.energy.to_string(),
        ])
        .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses hourly step counts from `t,steps` rows.
pub fn parse_steps_csv<R: Read>(rdr: R) -> Result<Vec<u32>, TraceError> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = column_index(&headers, &["t", "steps"], &[])?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = record_line(&rec, row as u64 + 2);
        let t = parse_usize(&rec, idx[0].unwrap(), line, "t")?;
        if t != row {
            return Err(parse_err(
                line,
                "t",
                format!("expected slot {row}, got {t}"),
            ));
        }
        let s = field(&rec, idx[1].unwrap(), line, "steps")?;
        let steps: u32 = s
            .parse()
            .map_err(|_| parse_err(line, "steps", format!("not a step count: {s:?}")))?;
        out.push(steps);
    }
    Ok(out)
}

/// Occupied unless the hour's step count is strictly above `threshold`.
pub fn occupancy_from_steps(steps: &[u32], threshold: u32) -> Vec<bool> {
    steps.iter().map(|&s| s <= threshold).collect()
}

/// Daily plug-in window in hours of the day; `end_hour` may wrap past
/// midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvWindow {
    pub start_hour: usize,
    pub end_hour: usize,
}

impl EvWindow {
    pub fn length(&self) -> usize {
        (self.end_hour + 24 - self.start_hour) % 24
    }
}

impl Default for EvWindow {
    fn default() -> Self {
        EvWindow {
            start_hour: 19,
            end_hour: 6,
        }
    }
}

/// Inclusive integer range of requested EV energy, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyRange {
    pub lo: u32,
    pub hi: u32,
}

impl Default for EnergyRange {
    fn default() -> Self {
        EnergyRange { lo: 4, hi: 18 }
    }
}

/// Per-slot arrival stream for `n_slots` slots; requests past the horizon
/// are truncated.
pub fn arrival_stream(reqs: &[EvRequest], n_slots: usize, v_max: f64) -> Vec<f64> {
    let mut a = vec![0.0; n_slots];
    for r in reqs {
        let end = (r.start + r.full_slots(v_max) + 1).min(n_slots);
        for (t, slot) in a.iter_mut().enumerate().take(end).skip(r.start) {
            *slot += ev_arrival(r, t, v_max);
        }
    }
    a
}

/// One request per day with energy drawn uniformly from `energy`, plus the
/// resulting arrival stream over `n_days * 24` slots.
pub fn generate_ev_requests(
    seed: u64,
    n_days: usize,
    window: EvWindow,
    energy: EnergyRange,
    cfg: &HomeConfig,
) -> Result<(Vec<EvRequest>, Vec<f64>), TraceError> {
    if energy.lo > energy.hi {
        return Err(TraceError::WindowTooShort(format!(
            "empty energy range [{}, {}]",
            energy.lo, energy.hi
        )));
    }
    let worst = EvRequest {
        start: 0,
        deadline: window.length(),
        energy: f64::from(energy.hi),
    };
    let slack = worst.tolerance(cfg.v_max);
    let needed = i64::from(cfg.r_tolerance.max(1));
    if slack < needed {
        return Err(TraceError::WindowTooShort(format!(
            "window of {} slots leaves slack {slack} for {} kWh, need {needed}",
            window.length(),
            energy.hi
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reqs: Vec<EvRequest> = (0..n_days)
        .map(|day| {
            let start = day * 24 + window.start_hour;
            EvRequest {
                start,
                deadline: start + window.length(),
                energy: f64::from(rng.gen_range(energy.lo..=energy.hi)),
            }
        })
        .collect();
    let arrivals = arrival_stream(&reqs, n_days * 24, cfg.v_max);
    Ok((reqs, arrivals))
}

/// A synthetic month plus the step counts its occupancy was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub bundle: TraceBundle,
    pub steps: Vec<u32>,
}

/// Seeded synthetic inputs shaped like a winter month: diurnal outdoor
/// temperature, a two-tier (peak 08:00-22:00) price, clipped-sine solar and
/// weekday/weekend step counts. All values stay within the configured bounds.
pub fn synthetic_trace(cfg: &HomeConfig, days: usize, seed: u64) -> SyntheticTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = days * 24;
    let span = cfg.t_out_max - cfg.t_out_min;
    let mid = 0.5 * (cfg.t_out_min + cfg.t_out_max);
    let t_ref = 0.5 * (cfg.t_ref_min + cfg.t_ref_max);

    let mut bundle = TraceBundle {
        outdoor_temp: Vec::with_capacity(n),
        buy_price: Vec::with_capacity(n),
        sell_price: Vec::with_capacity(n),
        solar_rho: Vec::with_capacity(n),
        occupied: Vec::with_capacity(n),
        t_ref: vec![t_ref; n],
    };
    let mut steps = Vec::with_capacity(n);
    for day in 0..days {
        let offset = rng.gen_range(-0.15..0.15) * span;
        let peak_sun: f64 = rng.gen_range(300.0..800.0);
        let weekend = day % 7 >= 5;
        for hour in 0..24 {
            let phase = 2.0 * std::f64::consts::PI * (hour as f64 - 9.0) / 24.0;
            let noise = rng.gen_range(-0.05..0.05) * span;
            let temp = (mid + 0.3 * span * phase.sin() + offset + noise)
                .clamp(cfg.t_out_min, cfg.t_out_max);
            bundle.outdoor_temp.push(temp);

            let buy = if (8..22).contains(&hour) {
                cfg.b_max
            } else {
                cfg.b_min
            };
            bundle.buy_price.push(buy);
            bundle
                .sell_price
                .push((cfg.sell_ratio * buy).clamp(cfg.s_min, cfg.s_max).min(buy));

            let rho = if (7..17).contains(&hour) {
                peak_sun * (std::f64::consts::PI * (hour as f64 - 7.0) / 10.0).sin()
            } else {
                0.0
            };
            bundle.solar_rho.push(rho.max(0.0));

            let p_out = match (weekend, hour) {
                (_, 0..=6) | (_, 23) => 0.0,
                (false, 9..=17) => 0.6,
                _ => 0.15,
            };
            let s = if rng.gen_bool(p_out) {
                rng.gen_range(DEFAULT_STEP_THRESHOLD + 100..6000)
            } else if hour <= 6 || hour == 23 {
                rng.gen_range(0..60)
            } else {
                rng.gen_range(0..1500)
            };
            steps.push(s);
        }
    }
    bundle.occupied = occupancy_from_steps(&steps, DEFAULT_STEP_THRESHOLD);
    SyntheticTrace { bundle, steps }
}
