//! CSV and summary output. Column layouts are documented in `docs/csv.md`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::Error;
use crate::scenario::Scenario;
use crate::sim::Trajectory;
use crate::sweep::SweepRow;

/// Formats `x` with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn trajectory_header(scenario: &Scenario) -> Vec<String> {
    let topo = &scenario.topology;
    let n = topo.n_cells();
    let mut h = vec!["k".to_string(), "t_s".to_string()];
    h.extend((1..=n).map(|i| format!("rho_{i}")));
    h.extend((1..=n + 1).map(|i| format!("phi_{i}")));
    for p in 1..=topo.stations.len() {
        h.push(format!("s_s_{p}"));
        h.push(format!("r_s_{p}"));
        h.push(format!("ell_{p}"));
        h.push(format!("e_{p}"));
    }
    h.push("boundary_queue".into());
    for r in 1..=topo.on_ramps.len() {
        h.push(format!("ramp_flow_{r}"));
        h.push(format!("ramp_queue_{r}"));
    }
    h.push("delta_s".into());
    h
}

pub fn write_trajectory_csv<W: Write>(
    out: W,
    scenario: &Scenario,
    trajectory: &Trajectory,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(scenario))?;
    for row in &trajectory.rows {
        let mut rec = vec![
            row.k.to_string(),
            fmt_sig(row.k as f64 * scenario.interval_s),
        ];
        rec.extend(row.rho.iter().map(|v| fmt_sig(*v)));
        rec.extend(row.flows.phi.iter().map(|v| fmt_sig(*v)));
        for p in 0..row.ell.len() {
            rec.push(fmt_sig(row.flows.s_station[p]));
            rec.push(fmt_sig(row.flows.r_station[p]));
            rec.push(fmt_sig(row.ell[p]));
            rec.push(fmt_sig(row.e_queue[p]));
        }
        rec.push(fmt_sig(row.boundary_queue));
        for r in 0..row.ramp_queue.len() {
            rec.push(fmt_sig(row.flows.ramp_flow[r]));
            rec.push(fmt_sig(row.ramp_queue[r]));
        }
        rec.push(fmt_sig(row.delay.seconds));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 6] = ["beta_s", "delta_min", "p_ms", "delta_max_s", "pi", "max_e"];

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_sig(r.beta_s),
            fmt_sig(r.delta_min),
            fmt_sig(r.p_ms),
            fmt_sig(r.delta_max_s),
            fmt_sig(r.pi),
            fmt_sig(r.max_e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `delta_s` column of a trajectory CSV.
pub fn read_delta_column<R: Read>(input: R) -> Result<Vec<f64>, Error> {
    let mut rdr = csv::Reader::from_reader(input);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == "delta_s")
        .ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "baseline CSV has no delta_s column",
            ))
        })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: f64 = rec[idx].parse().map_err(|e| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bad delta_s value `{}`: {e}", &rec[idx]),
            ))
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: Option<String>,
    pub rows: usize,
    pub delta_max_s: f64,
    pub delta_argmax_k: usize,
    pub ttt_free_flow_min: f64,
    pub saturated_intervals: usize,
    pub conservation_residual_veh: f64,
    pub max_e: Vec<f64>,
    pub max_e_k: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_delta_max_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, trajectory: &Trajectory) -> Self {
        let m = trajectory.metrics(scenario);
        let q = trajectory.max_queue();
        RunSummary {
            name: scenario.name.clone(),
            rows: trajectory.rows.len(),
            delta_max_s: m.delta_max,
            delta_argmax_k: m.delta_argmax,
            ttt_free_flow_min: m.ttt_free_flow,
            saturated_intervals: m.saturated_intervals,
            conservation_residual_veh: trajectory.conservation_residual,
            max_e: q.iter().map(|x| x.0).collect(),
            max_e_k: q.iter().map(|x| x.1).collect(),
            baseline_delta_max_s: None,
            pi: None,
        }
    }

    pub fn with_pi(mut self, baseline_delta_max: f64, pi: f64) -> Self {
        self.baseline_delta_max_s = Some(baseline_delta_max);
        self.pi = Some(pi);
        self
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(n) = &self.name {
            s.push_str(&format!("name={n}\n"));
        }
        s.push_str(&format!("rows={}\n", self.rows));
        s.push_str(&format!("delta_max_s={}\n", fmt_sig(self.delta_max_s)));
        s.push_str(&format!("delta_argmax_k={}\n", self.delta_argmax_k));
        s.push_str(&format!(
            "ttt_free_flow_min={}\n",
            fmt_sig(self.ttt_free_flow_min)
        ));
        s.push_str(&format!(
            "saturated_intervals={}\n",
            self.saturated_intervals
        ));
        s.push_str(&format!(
            "conservation_residual_veh={}\n",
            fmt_sig(self.conservation_residual_veh)
        ));
        for (p, (e, k)) in self.max_e.iter().zip(&self.max_e_k).enumerate() {
            s.push_str(&format!("max_e_{}={} at k={k}\n", p + 1, fmt_sig(*e)));
        }
        if let (Some(b), Some(pi)) = (self.baseline_delta_max_s, self.pi) {
            s.push_str(&format!("baseline_delta_max_s={}\n", fmt_sig(b)));
            s.push_str(&format!("pi={}\n", fmt_sig(pi)));
        }
        s
    }
}
