//! Controllers that cap the flow leaving the stations.
//!
//! A controller sees the full state at the start of each interval and
//! returns one optional cap per station. The cap enters the station demand
//! as an extra term of its `min`, so granted flows never exceed it.

use serde::{Deserialize, Serialize};

use crate::model::{SimState, Topology};

/// Per-station caps for one interval [veh/h]; `None` leaves a station uncapped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlDecision {
    pub caps: Vec<Option<f64>>,
}

impl ControlDecision {
    pub fn uncapped(m: usize) -> Self {
        ControlDecision {
            caps: vec![None; m],
        }
    }
}

pub trait Controller: Send {
    fn decide(&mut self, topology: &Topology, observed: &SimState) -> ControlDecision;
}

/// Leaves every station uncapped.
#[derive(Debug, Clone, Default)]
pub struct NoControl;

impl Controller for NoControl {
    fn decide(&mut self, topology: &Topology, _observed: &SimState) -> ControlDecision {
        ControlDecision::uncapped(topology.stations.len())
    }
}

/// The same caps at every interval.
#[derive(Debug, Clone)]
pub struct FixedCaps(pub Vec<Option<f64>>);

impl Controller for FixedCaps {
    fn decide(&mut self, topology: &Topology, _observed: &SimState) -> ControlDecision {
        let mut caps = self.0.clone();
        caps.resize(topology.stations.len(), None);
        ControlDecision { caps }
    }
}

/// Integral metering of one station's exit ramp:
/// `cap(k+1) = clamp(cap(k) + gain * (rho_target - rho_exit(k)), 0, r_s_max)`,
/// where `rho_exit` is the density of the cell the station merges into.
#[derive(Debug, Clone)]
pub struct IntegralMetering {
    pub station: usize,
    pub gain: f64,
    pub rho_target: f64,
    cap: f64,
}

impl IntegralMetering {
    pub fn new(station: usize, gain: f64, rho_target: f64, initial_cap: f64) -> Self {
        IntegralMetering {
            station,
            gain,
            rho_target,
            cap: initial_cap,
        }
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

impl Controller for IntegralMetering {
    fn decide(&mut self, topology: &Topology, observed: &SimState) -> ControlDecision {
        let m = topology.stations.len();
        let mut decision = ControlDecision::uncapped(m);
        let Some(params) = topology.stations.get(self.station) else {
            return decision;
        };
        let current = self.cap.clamp(0.0, params.r_s_max);
        decision.caps[self.station] = Some(current);
        let rho = observed.rho[params.exit_cell];
        self.cap = (current + self.gain * (self.rho_target - rho)).clamp(0.0, params.r_s_max);
        decision
    }
}

/// The `controller` block of a scenario file. Station numbers are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    None {},
    Fixed {
        caps: Vec<Option<f64>>,
    },
    Integral {
        #[serde(rename = "K")]
        gain: f64,
        rho_target: f64,
        station: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_cap: Option<f64>,
    },
}

impl ControllerConfig {
    pub fn problems(&self, topology: &Topology) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ControllerConfig::None {} => {}
            ControllerConfig::Fixed { caps } => {
                if caps.len() > topology.stations.len() {
                    out.push(format!(
                        "{} caps for {} stations",
                        caps.len(),
                        topology.stations.len()
                    ));
                }
                if caps.iter().flatten().any(|c| !(*c >= 0.0)) {
                    out.push("caps must be non-negative".into());
                }
            }
            ControllerConfig::Integral {
                gain,
                rho_target,
                station,
                initial_cap,
            } => {
                if *station == 0 || *station > topology.stations.len() {
                    out.push(format!("station {station} does not exist"));
                }
                if !(gain.is_finite() && *gain >= 0.0) {
                    out.push(format!("K must be finite and non-negative, got {gain}"));
                }
                if !(rho_target.is_finite() && *rho_target >= 0.0) {
                    out.push(format!("rho_target must be non-negative, got {rho_target}"));
                }
                if initial_cap.is_some_and(|c| !(c >= 0.0)) {
                    out.push("initial_cap must be non-negative".into());
                }
            }
        }
        out
    }

    /// Instantiates the controller; call after [`ControllerConfig::problems`] came back empty.
    pub fn build(&self, topology: &Topology) -> Box<dyn Controller> {
        match self {
            ControllerConfig::None {} => Box::new(NoControl),
            ControllerConfig::Fixed { caps } => Box::new(FixedCaps(caps.clone())),
            ControllerConfig::Integral {
                gain,
                rho_target,
                station,
                initial_cap,
            } => {
                let p = station - 1;
                let init = initial_cap.unwrap_or(topology.stations[p].r_s_max);
                Box::new(IntegralMetering::new(p, *gain, *rho_target, init))
            }
        }
    }
}
