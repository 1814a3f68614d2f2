//! Scenario files: parsing, presets, overrides and serialization.
//!
//! A scenario is a JSON document. It may start from a named preset; any
//! other top-level field is merged over the preset (objects recursively,
//! everything else replaced), then `overrides` are applied. See
//! `docs/scenario.md` for the schema.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::ControllerConfig;
use crate::demand::DemandProfile;
use crate::error::ScenarioError;
use crate::metrics::DEFAULT_DELTA_CEILING_S;
use crate::model::{CellParams, OnRamp, Priority, Schedule, StationParams, Topology};
use crate::validate::{validate_topology, Violation};

/// Interval length of the A13 experiments [s].
pub const A13_INTERVAL_S: f64 = 10.0;
/// Three hours of 10 s intervals.
pub const A13_HORIZON_S: f64 = 10_800.0;
/// Exit ramp capacity used by the station presets [veh/h].
pub const DEFAULT_RAMP_CAPACITY: f64 = 2000.0;

/// Length, free-flow speed, wave speed, capacity, jam density.
const A13_CELLS: [[f64; 5]; 9] = [
    [0.5, 114.0, 32.7, 2511.0, 97.1],
    [0.5, 114.0, 29.6, 2472.0, 105.7],
    [0.5, 114.0, 31.3, 2338.0, 95.1],
    [0.5, 114.0, 26.7, 2310.0, 106.7],
    [0.5, 113.0, 27.8, 2337.0, 104.8],
    [0.36, 112.0, 26.2, 2343.0, 110.2],
    [0.37, 111.0, 20.0, 2136.0, 126.0],
    [0.41, 109.0, 26.4, 2317.0, 108.9],
    [0.39, 103.0, 20.9, 2111.0, 121.6],
];

pub fn a13_cells() -> Vec<CellParams> {
    A13_CELLS
        .iter()
        .map(|r| CellParams::new(r[0], r[1], r[2], r[3], r[4]))
        .collect()
}

/// The nine-cell A13 stretch with 10 s intervals, no ramps and no stations.
pub fn preset_a13() -> Topology {
    Topology::new(A13_INTERVAL_S / 3600.0, a13_cells())
}

pub const PRESETS: [&str; 3] = ["a13", "a13-single-station", "a13-multi-purpose"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    #[serde(rename = "L_km")]
    pub length_km: f64,
    pub v_free: f64,
    pub w: f64,
    pub q_max: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDoc {
    /// One-based cell number.
    pub entry: usize,
    /// One-based cell number.
    pub exit: usize,
    pub delta_min: f64,
    pub r_s_max: f64,
    pub beta_s: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityDoc {
    pub ms: f64,
    pub stations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnRampDoc {
    pub cell: usize,
    pub demand: Schedule,
    pub r_max: f64,
    pub p_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_peak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Reported extra traversal time when some cell stands still [s].
    #[serde(default = "default_ceiling")]
    pub delta_ceiling_s: f64,
}

fn default_ceiling() -> f64 {
    DEFAULT_DELTA_CEILING_S
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            delta_ceiling_s: DEFAULT_DELTA_CEILING_S,
        }
    }
}

/// The resolved document: what a scenario file holds after presets and
/// overrides have been applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    pub horizon_s: f64,
    pub cells: Vec<CellDoc>,
    #[serde(default)]
    pub offramp_beta: Vec<Schedule>,
    #[serde(default)]
    pub stations: Vec<StationDoc>,
    /// Keyed by one-based cell number.
    #[serde(default)]
    pub priorities: BTreeMap<String, PriorityDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub onramps: Vec<OnRampDoc>,
    pub demand: DemandDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub output: OutputOptions,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    /// Interval length [s]; `topology.t_hours` is derived from it.
    pub interval_s: f64,
    pub topology: Topology,
    pub demand: DemandProfile,
    pub horizon_intervals: usize,
    pub controller: Option<ControllerConfig>,
    pub output: OutputOptions,
}

fn schema_err(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Dwell in minutes to a whole number of intervals, at least one.
pub fn dwell_intervals(delta_min: f64, interval_s: f64) -> usize {
    ((delta_min * 60.0 / interval_s).round() as usize).max(1)
}

fn preset_doc(name: &str) -> Result<ScenarioDoc, ScenarioError> {
    let cells = A13_CELLS
        .iter()
        .map(|r| CellDoc {
            length_km: r[0],
            v_free: r[1],
            w: r[2],
            q_max: r[3],
            rho_max: r[4],
        })
        .collect();
    let mut doc = ScenarioDoc {
        name: Some(name.to_string()),
        t_s: A13_INTERVAL_S,
        horizon_s: A13_HORIZON_S,
        cells,
        offramp_beta: vec![Schedule::Constant(0.0); 9],
        stations: Vec::new(),
        priorities: BTreeMap::new(),
        onramps: Vec::new(),
        demand: DemandDoc {
            floor: Some(500.0),
            peak: Some(2400.0),
            slope: Some(7.04),
            k_peak: Some(540.0),
            ..DemandDoc::default()
        },
        controller: None,
        output: OutputOptions::default(),
    };
    let station = |delta_min: f64, beta: f64| StationDoc {
        entry: 2,
        exit: 4,
        delta_min,
        r_s_max: DEFAULT_RAMP_CAPACITY,
        beta_s: Schedule::Constant(beta),
    };
    match name {
        "a13" => {}
        "a13-single-station" => {
            doc.stations.push(station(5.0, 0.15));
            doc.priorities.insert(
                "4".into(),
                PriorityDoc {
                    ms: 0.97,
                    stations: vec![0.03],
                },
            );
        }
        "a13-multi-purpose" => {
            doc.stations.push(station(5.0, 0.0225));
            doc.stations.push(station(15.0, 0.0225));
            doc.stations.push(station(30.0, 0.005));
            doc.priorities.insert(
                "4".into(),
                PriorityDoc {
                    ms: 0.97,
                    stations: vec![0.01, 0.01, 0.01],
                },
            );
        }
        other => return Err(ScenarioError::UnknownPreset(other.to_string())),
    }
    Ok(doc)
}

/// The resolved document of a named preset.
pub fn preset_document(name: &str) -> Result<ScenarioDoc, ScenarioError> {
    preset_doc(name)
}

fn merge_value(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_value(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ScenarioError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| {
                    schema_err(
                        format!("overrides.{path}"),
                        format!("`{part}` is not an index"),
                    )
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    schema_err(
                        format!("overrides.{path}"),
                        format!("index {idx} out of range (length {len})"),
                    )
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(schema_err(
                    format!("overrides.{path}"),
                    format!("`{part}` does not address an object or array"),
                ))
            }
        };
    }
    Ok(())
}

/// One field-level change to a resolved document.
#[derive(Debug, Clone, PartialEq)]
pub enum Override {
    /// Split ratio of a station (zero-based index).
    BetaS {
        station: usize,
        value: f64,
    },
    /// Dwell of a station in minutes.
    DeltaMin {
        station: usize,
        value: f64,
    },
    RampCapacity {
        station: usize,
        value: f64,
    },
    /// Mainstream priority at a station's exit cell; the station weights
    /// are rescaled to keep the vector on the simplex.
    PMs {
        station: usize,
        value: f64,
    },
}

impl ScenarioDoc {
    pub fn apply(&mut self, ov: &Override) -> Result<(), ScenarioError> {
        let station = match ov {
            Override::BetaS { station, .. }
            | Override::DeltaMin { station, .. }
            | Override::RampCapacity { station, .. }
            | Override::PMs { station, .. } => *station,
        };
        let n_st = self.stations.len();
        let st = self.stations.get_mut(station).ok_or_else(|| {
            schema_err(
                "overrides",
                format!("station {} does not exist ({n_st} defined)", station + 1),
            )
        })?;
        match ov {
            Override::BetaS { value, .. } => st.beta_s = Schedule::Constant(*value),
            Override::DeltaMin { value, .. } => st.delta_min = *value,
            Override::RampCapacity { value, .. } => st.r_s_max = *value,
            Override::PMs { value, .. } => {
                let exit = st.exit;
                let exits: Vec<usize> = (0..n_st)
                    .filter(|&q| self.stations[q].exit == exit)
                    .collect();
                let key = exit.to_string();
                let old = self.priorities.get(&key).cloned().unwrap_or(PriorityDoc {
                    ms: 1.0,
                    stations: Vec::new(),
                });
                let old_sum: f64 = old.stations.iter().sum();
                let weights = if old.stations.len() == exits.len() && old_sum > 0.0 {
                    old.stations
                        .iter()
                        .map(|w| w / old_sum * (1.0 - value))
                        .collect()
                } else {
                    vec![(1.0 - value) / exits.len() as f64; exits.len()]
                };
                self.priorities.insert(
                    key,
                    PriorityDoc {
                        ms: *value,
                        stations: weights,
                    },
                );
            }
        }
        Ok(())
    }

    /// Copy without stations, station priorities and controller.
    pub fn without_stations(&self) -> ScenarioDoc {
        let mut doc = self.clone();
        doc.stations.clear();
        doc.priorities.clear();
        doc.controller = None;
        doc
    }

    /// Builds and validates the scenario.
    pub fn resolve(&self) -> Result<Scenario, ScenarioError> {
        let mut problems = Vec::new();
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(ScenarioError::Invalid(vec![format!(
                "T_s: must be positive, got {}",
                self.t_s
            )]));
        }
        let n = self.cells.len();
        let t_hours = self.t_s / 3600.0;
        let horizon = (self.horizon_s / self.t_s).round();
        if !(horizon >= 1.0) {
            problems.push(format!(
                "horizon_s: must cover at least one interval, got {}",
                self.horizon_s
            ));
        }

        let cells: Vec<CellParams> = self
            .cells
            .iter()
            .map(|c| CellParams::new(c.length_km, c.v_free, c.w, c.q_max, c.rho_max))
            .collect();
        let mut topology = Topology::new(t_hours, cells);

        if !self.offramp_beta.is_empty() {
            if self.offramp_beta.len() != n {
                problems.push(format!(
                    "offramp_beta: {} entries for {n} cells",
                    self.offramp_beta.len()
                ));
            } else {
                topology.beta_offramp = self.offramp_beta.clone();
            }
        }

        for (p, s) in self.stations.iter().enumerate() {
            if s.entry == 0 || s.entry > n || s.exit == 0 || s.exit > n {
                problems.push(format!(
                    "stations[{p}]: entry {} / exit {} must be cell numbers in 1..={n}",
                    s.entry, s.exit
                ));
                continue;
            }
            if !(s.delta_min > 0.0 && s.delta_min.is_finite()) {
                problems.push(format!(
                    "stations[{p}].delta_min: must be positive, got {}",
                    s.delta_min
                ));
                continue;
            }
            topology.stations.push(StationParams {
                entry_cell: s.entry - 1,
                exit_cell: s.exit - 1,
                dwell_intervals: dwell_intervals(s.delta_min, self.t_s),
                r_s_max: s.r_s_max,
                beta_s: s.beta_s.clone(),
            });
        }

        for (key, pr) in &self.priorities {
            match key.parse::<usize>() {
                Ok(cell) if cell >= 1 && cell <= n => {
                    topology.priorities[cell - 1] = Priority::new(pr.ms, pr.stations.clone());
                }
                _ => problems.push(format!("priorities.{key}: not a cell number in 1..={n}")),
            }
        }
        for j in 0..n {
            let exits = topology.exits_into(j).len();
            if exits > 0 && !self.priorities.contains_key(&(j + 1).to_string()) {
                problems.push(format!(
                    "priorities.{}: cell {} receives {exits} station exit(s) and needs a priority vector",
                    j + 1,
                    j + 1
                ));
            }
        }

        for (r, ramp) in self.onramps.iter().enumerate() {
            if ramp.cell == 0 || ramp.cell > n {
                problems.push(format!("onramps[{r}].cell: must be in 1..={n}"));
                continue;
            }
            topology.on_ramps.push(OnRamp {
                cell: ramp.cell - 1,
                demand: ramp.demand.clone(),
                r_max: ramp.r_max,
                p_ms: ramp.p_ms,
            });
        }

        for v in validate_topology(&topology) {
            problems.push(format!("{}: {v}", violation_path(&v)));
        }

        let demand = match self.demand_profile() {
            Ok(d) => {
                problems.extend(d.problems().into_iter().map(|p| format!("demand: {p}")));
                Some(d)
            }
            Err(e) => {
                problems.push(e);
                None
            }
        };

        if let Some(c) = &self.controller {
            problems.extend(
                c.problems(&topology)
                    .into_iter()
                    .map(|p| format!("controller: {p}")),
            );
        }
        if !(self.output.delta_ceiling_s > 0.0) {
            problems.push("output.delta_ceiling_s: must be positive".into());
        }

        if !problems.is_empty() {
            return Err(ScenarioError::Invalid(problems));
        }
        Ok(Scenario {
            name: self.name.clone(),
            interval_s: self.t_s,
            topology,
            demand: demand.expect("checked above"),
            horizon_intervals: horizon as usize,
            controller: self.controller.clone(),
            output: self.output,
        })
    }

    fn demand_profile(&self) -> Result<DemandProfile, String> {
        let d = &self.demand;
        let tri = [d.floor, d.peak, d.slope, d.k_peak];
        let n_tri = tri.iter().filter(|x| x.is_some()).count();
        let forms =
            (n_tri > 0) as usize + d.breakpoints.is_some() as usize + d.constant.is_some() as usize;
        if forms != 1 {
            return Err("demand: give exactly one of {floor, peak, slope, k_peak}, {breakpoints} or {constant}".into());
        }
        if let Some(v) = d.constant {
            return Ok(DemandProfile::constant(v));
        }
        if let Some(b) = &d.breakpoints {
            return Ok(DemandProfile::Breakpoints(b.clone()));
        }
        match tri {
            [Some(floor), Some(peak), Some(slope), Some(k_peak)] => Ok(DemandProfile::Triangular {
                floor,
                peak,
                slope,
                k_peak,
            }),
            _ => Err("demand: floor, peak, slope and k_peak are all required".into()),
        }
    }
}

fn violation_path(v: &Violation) -> String {
    match v {
        Violation::NoCells => "cells".into(),
        Violation::Interval(_) => "T_s".into(),
        Violation::NonPositiveCellParam { cell, .. } | Violation::Feasibility { cell, .. } => {
            format!("cells[{cell}]")
        }
        Violation::StationCell { station, .. } | Violation::StationParam { station, .. } => {
            format!("stations[{station}]")
        }
        Violation::PriorityShape { cell, .. }
        | Violation::PriorityNotSimplex { cell, .. }
        | Violation::PriorityComponent { cell, .. } => format!("priorities.{}", cell + 1),
        Violation::SplitRange { cell, .. } => format!("offramp_beta[{cell}]"),
        Violation::RampAndStationExit { .. } | Violation::OnRamp { .. } => "onramps".into(),
        Violation::Shape { .. } => "topology".into(),
    }
}

impl Scenario {
    /// Canonical document: no preset, every field explicit.
    pub fn to_document(&self) -> ScenarioDoc {
        let topo = &self.topology;
        let mut priorities = BTreeMap::new();
        for (j, p) in topo.priorities.iter().enumerate() {
            if !p.stations.is_empty() {
                priorities.insert(
                    (j + 1).to_string(),
                    PriorityDoc {
                        ms: p.mainstream,
                        stations: p.stations.clone(),
                    },
                );
            }
        }
        let demand = match &self.demand {
            DemandProfile::Triangular {
                floor,
                peak,
                slope,
                k_peak,
            } => DemandDoc {
                floor: Some(*floor),
                peak: Some(*peak),
                slope: Some(*slope),
                k_peak: Some(*k_peak),
                ..DemandDoc::default()
            },
            DemandProfile::Breakpoints(b) => DemandDoc {
                breakpoints: Some(b.clone()),
                ..DemandDoc::default()
            },
        };
        ScenarioDoc {
            name: self.name.clone(),
            t_s: self.interval_s,
            horizon_s: self.horizon_intervals as f64 * self.interval_s,
            cells: topo
                .cells
                .iter()
                .map(|c| CellDoc {
                    length_km: c.length_km,
                    v_free: c.v_free,
                    w: c.w_congestion,
                    q_max: c.q_max,
                    rho_max: c.rho_max,
                })
                .collect(),
            offramp_beta: topo.beta_offramp.clone(),
            stations: topo
                .stations
                .iter()
                .map(|s| StationDoc {
                    entry: s.entry_cell + 1,
                    exit: s.exit_cell + 1,
                    delta_min: s.dwell_intervals as f64 * self.interval_s / 60.0,
                    r_s_max: s.r_s_max,
                    beta_s: s.beta_s.clone(),
                })
                .collect(),
            priorities,
            onramps: topo
                .on_ramps
                .iter()
                .map(|r| OnRampDoc {
                    cell: r.cell + 1,
                    demand: r.demand.clone(),
                    r_max: r.r_max,
                    p_ms: r.p_ms,
                })
                .collect(),
            demand,
            controller: self.controller.clone(),
            output: self.output,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scenario documents serialize")
    }

    /// The same scenario with every station removed.
    pub fn baseline(&self) -> Scenario {
        self.to_document()
            .without_stations()
            .resolve()
            .expect("removing stations keeps a scenario valid")
    }

    pub fn upstream_arrivals(&self, k: usize) -> f64 {
        self.demand.at(k)
    }
}

/// Parses a scenario document into a resolved [`ScenarioDoc`].
pub fn parse_document(text: &str) -> Result<ScenarioDoc, ScenarioError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| {
        schema_err(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let Value::Object(mut top) = raw else {
        return Err(schema_err("$", "a scenario must be a JSON object"));
    };

    let preset = top.remove("preset");
    let overrides = top.remove("overrides");

    let mut merged = match preset {
        None => Value::Object(Map::new()),
        Some(Value::String(name)) => {
            serde_json::to_value(preset_doc(&name)?).expect("preset documents serialize")
        }
        Some(_) => return Err(schema_err("preset", "must be a string")),
    };
    // demand and controller blocks replace the preset's instead of merging
    if let Value::Object(base) = &mut merged {
        for key in ["demand", "controller"] {
            if let Some(v) = top.remove(key) {
                base.insert(key.to_string(), v);
            }
        }
    }
    merge_value(&mut merged, Value::Object(top));

    let mut shorthand = Vec::new();
    match overrides {
        None => {}
        Some(Value::Object(map)) => {
            for (key, value) in map {
                if key.contains('.') {
                    set_path(&mut merged, &key, value)?;
                    continue;
                }
                let num = value
                    .as_f64()
                    .ok_or_else(|| schema_err(format!("overrides.{key}"), "expected a number"))?;
                let ov = match key.as_str() {
                    "beta_s" => Override::BetaS {
                        station: 0,
                        value: num,
                    },
                    "delta_min" => Override::DeltaMin {
                        station: 0,
                        value: num,
                    },
                    "r_s_max" => Override::RampCapacity {
                        station: 0,
                        value: num,
                    },
                    "p_ms" => Override::PMs {
                        station: 0,
                        value: num,
                    },
                    other => return Err(schema_err(
                        format!("overrides.{other}"),
                        "unknown override; use beta_s, delta_min, r_s_max, p_ms or a dotted path",
                    )),
                };
                shorthand.push(ov);
            }
        }
        Some(_) => return Err(schema_err("overrides", "must be an object")),
    }

    let mut doc: ScenarioDoc = serde_path_to_error::deserialize(merged).map_err(|e| {
        let path = e.path().to_string();
        schema_err(
            if path == "." { "$".to_string() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    for ov in &shorthand {
        doc.apply(ov)?;
    }
    Ok(doc)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_document(text)?.resolve()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}
