//! Parameter grids over one station's split ratio, dwell and the
//! mainstream priority at its exit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ScenarioError};
use crate::scenario::{Override, ScenarioDoc};
use crate::sim::{compare_with_baseline, simulate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// One-based station number the grid acts on.
    #[serde(default = "first_station")]
    pub station: usize,
    /// Empty means "keep the scenario's value".
    #[serde(default)]
    pub beta_s: Vec<f64>,
    #[serde(default)]
    pub delta_min: Vec<f64>,
    #[serde(default)]
    pub p_ms: Vec<f64>,
}

fn first_station() -> usize {
    1
}

impl SweepGrid {
    /// Parses either a JSON object or the inline form
    /// `beta_s=0.06,0.15;delta_min=5,40;p_ms=0.97[;station=1]`.
    pub fn parse(text: &str) -> Result<SweepGrid, ScenarioError> {
        let text = text.trim();
        if text.starts_with('{') {
            return serde_json::from_str(text).map_err(|e| ScenarioError::Schema {
                path: "grid".into(),
                message: e.to_string(),
            });
        }
        let mut grid = SweepGrid {
            station: 1,
            beta_s: Vec::new(),
            delta_min: Vec::new(),
            p_ms: Vec::new(),
        };
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part.split_once('=').ok_or_else(|| ScenarioError::Schema {
                path: "grid".into(),
                message: format!("`{part}` is not key=values"),
            })?;
            let parsed: Result<Vec<f64>, _> =
                values.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let parsed = parsed.map_err(|e| ScenarioError::Schema {
                path: format!("grid.{key}"),
                message: e.to_string(),
            })?;
            match key.trim() {
                "beta_s" => grid.beta_s = parsed,
                "delta_min" => grid.delta_min = parsed,
                "p_ms" => grid.p_ms = parsed,
                "station" => grid.station = parsed.first().copied().unwrap_or(1.0) as usize,
                other => {
                    return Err(ScenarioError::Schema {
                        path: format!("grid.{other}"),
                        message: "unknown grid axis".into(),
                    })
                }
            }
        }
        Ok(grid)
    }

    /// Grid points in row-major order: split ratio outermost, priority innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let axis = |v: &Vec<f64>| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let mut out = Vec::new();
        for b in axis(&self.beta_s) {
            for d in axis(&self.delta_min) {
                for p in axis(&self.p_ms) {
                    out.push(GridPoint {
                        beta_s: b,
                        delta_min: d,
                        p_ms: p,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub beta_s: Option<f64>,
    pub delta_min: Option<f64>,
    pub p_ms: Option<f64>,
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta_s: f64,
    pub delta_min: f64,
    pub p_ms: f64,
    pub delta_max_s: f64,
    pub pi: f64,
    pub max_e: f64,
}

/// Runs every grid point against one shared baseline. Rows come back in
/// grid order whether or not the points run in parallel.
pub fn sweep(doc: &ScenarioDoc, grid: &SweepGrid, parallel: bool) -> Result<Vec<SweepRow>, Error> {
    if grid.station == 0 || grid.station > doc.stations.len() {
        return Err(ScenarioError::Schema {
            path: "grid.station".into(),
            message: format!("station {} does not exist", grid.station),
        }
        .into());
    }
    let points = grid.points();
    let base_scenario = doc.without_stations().resolve()?;
    let baseline = simulate(&base_scenario)?.metrics(&base_scenario);
    let station = grid.station - 1;

    let run_point = |pt: &GridPoint| -> Result<SweepRow, Error> {
        let mut variant = doc.clone();
        if let Some(v) = pt.beta_s {
            variant.apply(&Override::BetaS { station, value: v })?;
        }
        if let Some(v) = pt.delta_min {
            variant.apply(&Override::DeltaMin { station, value: v })?;
        }
        if let Some(v) = pt.p_ms {
            variant.apply(&Override::PMs { station, value: v })?;
        }
        let scenario = variant.resolve()?;
        let cmp = compare_with_baseline(&scenario, baseline.clone())?;
        let st = &variant.stations[station];
        let exit_key = st.exit.to_string();
        Ok(SweepRow {
            beta_s: st.beta_s.at(0),
            delta_min: st.delta_min,
            p_ms: variant.priorities.get(&exit_key).map_or(1.0, |p| p.ms),
            delta_max_s: cmp.variant_metrics.delta_max,
            pi: cmp.pi().expect("paired run"),
            max_e: cmp.variant.max_queue()[station].0,
        })
    };

    if parallel {
        points.par_iter().map(run_point).collect()
    } else {
        points.iter().map(run_point).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_grid() {
        let g = SweepGrid::parse("beta_s=0.06,0.15; delta_min=5,40").unwrap();
        assert_eq!(g.beta_s, vec![0.06, 0.15]);
        assert_eq!(g.delta_min, vec![5.0, 40.0]);
        assert!(g.p_ms.is_empty());
        let pts = g.points();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].beta_s, Some(0.06));
        assert_eq!(pts[1].delta_min, Some(40.0));
        assert_eq!(pts[1].p_ms, None);
    }

    #[test]
    fn json_grid() {
        let g = SweepGrid::parse(r#"{"p_ms": [0.95, 0.99]}"#).unwrap();
        assert_eq!(g.station, 1);
        assert_eq!(g.points().len(), 2);
        assert!(SweepGrid::parse(r#"{"beta": [1]}"#).is_err());
        assert!(SweepGrid::parse("beta=1").is_err());
        assert!(SweepGrid::parse("beta_s=x").is_err());
    }
}
