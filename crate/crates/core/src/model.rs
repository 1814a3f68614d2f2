//! Domain types: static calibration, topology and the dynamic state.
//!
//! Cell and station indices are zero-based everywhere in the library. The
//! scenario file format and all human-facing messages use one-based cell
//! numbers.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Static per-cell calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Cell length [km].
    pub length_km: f64,
    /// Free-flow speed [km/h].
    pub v_free: f64,
    /// Congestion wave speed [km/h].
    pub w_congestion: f64,
    /// Capacity [veh/h].
    pub q_max: f64,
    /// Jam density [veh/km].
    pub rho_max: f64,
}

impl CellParams {
    pub fn new(length_km: f64, v_free: f64, w_congestion: f64, q_max: f64, rho_max: f64) -> Self {
        CellParams {
            length_km,
            v_free,
            w_congestion,
            q_max,
            rho_max,
        }
    }

    /// Free-flow traversal time [h].
    pub fn free_flow_time_h(&self) -> f64 {
        self.length_km / self.v_free
    }
}

/// A value that may change with the interval index `k`.
///
/// `Steps` holds `(k_start, value)` pairs sorted by `k_start`; the value in
/// force at `k` is the one of the last step starting at or before `k` (zero
/// before the first step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    Steps(Vec<(usize, f64)>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Steps(steps) => {
                let idx = steps.partition_point(|(start, _)| *start <= k);
                if idx == 0 {
                    0.0
                } else {
                    steps[idx - 1].1
                }
            }
        }
    }

    /// Every value the schedule can take.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Schedule::Constant(v) => vec![*v],
            Schedule::Steps(steps) => {
                let mut v: Vec<f64> = steps.iter().map(|s| s.1).collect();
                if steps.first().is_none_or(|s| s.0 > 0) {
                    v.push(0.0);
                }
                v
            }
        }
    }

    /// Sorted step starts, or `None` for a constant.
    pub(crate) fn step_starts(&self) -> Option<Vec<usize>> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::Steps(steps) => Some(steps.iter().map(|s| s.0).collect()),
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Constant(0.0)
    }
}

/// A service station: vehicles leave the mainstream at the end of
/// `entry_cell`, dwell, and re-merge at the head of `exit_cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationParams {
    pub entry_cell: usize,
    pub exit_cell: usize,
    /// Dwell time as a count of intervals, at least 1.
    pub dwell_intervals: usize,
    /// Capacity of the ramp leaving the station [veh/h].
    pub r_s_max: f64,
    /// Fraction of the entry cell's exit flow turning into the station.
    pub beta_s: Schedule,
}

/// A plain on-ramp merging into `cell` with a two-source priority split.
#[derive(Debug, Clone, PartialEq)]
pub struct OnRamp {
    pub cell: usize,
    /// Arrival flow at the ramp [veh/h].
    pub demand: Schedule,
    /// Ramp capacity [veh/h].
    pub r_max: f64,
    /// Mainstream share of the receiving cell's supply under congestion.
    pub p_ms: f64,
}

/// Priority weights of the flows merging into one cell.
///
/// `stations` is ordered like [`Topology::exits_into`] for that cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Priority {
    pub mainstream: f64,
    pub stations: Vec<f64>,
}

impl Priority {
    pub fn mainstream_only() -> Self {
        Priority {
            mainstream: 1.0,
            stations: Vec::new(),
        }
    }

    pub fn new(mainstream: f64, stations: Vec<f64>) -> Self {
        Priority {
            mainstream,
            stations,
        }
    }

    /// Mainstream weight `p_ms` with the remainder spread evenly over `n` stations.
    pub fn even(p_ms: f64, n: usize) -> Self {
        let each = if n == 0 { 0.0 } else { (1.0 - p_ms) / n as f64 };
        Priority {
            mainstream: if n == 0 { 1.0 } else { p_ms },
            stations: vec![each; n],
        }
    }

    pub fn sum(&self) -> f64 {
        self.mainstream + self.stations.iter().sum::<f64>()
    }
}

/// Cells in sequence plus the stations and ramps attached to them.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Interval length [h].
    pub t_hours: f64,
    pub cells: Vec<CellParams>,
    pub stations: Vec<StationParams>,
    /// Off-ramp split ratio per cell.
    pub beta_offramp: Vec<Schedule>,
    /// Merge priority per cell.
    pub priorities: Vec<Priority>,
    pub on_ramps: Vec<OnRamp>,
}

impl Topology {
    /// Cells only: no stations, no ramps, mainstream-only priorities.
    pub fn new(t_hours: f64, cells: Vec<CellParams>) -> Self {
        let n = cells.len();
        Topology {
            t_hours,
            cells,
            stations: Vec::new(),
            beta_offramp: vec![Schedule::default(); n],
            priorities: vec![Priority::mainstream_only(); n],
            on_ramps: Vec::new(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Adds a station and extends the priority vector of its exit cell with
    /// `priority_weight`. The caller keeps that vector on the simplex.
    pub fn add_station(&mut self, station: StationParams, priority_weight: f64) -> usize {
        let exit = station.exit_cell;
        self.stations.push(station);
        if let Some(p) = self.priorities.get_mut(exit) {
            p.stations.push(priority_weight);
        }
        self.stations.len() - 1
    }

    /// Stations accessed from cell `i` (E^in), ascending.
    pub fn entries_from(&self, i: usize) -> Vec<usize> {
        (0..self.stations.len())
            .filter(|&p| self.stations[p].entry_cell == i)
            .collect()
    }

    /// Stations re-merging into cell `j` (E^out), ascending.
    pub fn exits_into(&self, j: usize) -> Vec<usize> {
        (0..self.stations.len())
            .filter(|&p| self.stations[p].exit_cell == j)
            .collect()
    }

    pub fn ramps_into(&self, j: usize) -> Vec<usize> {
        (0..self.on_ramps.len())
            .filter(|&r| self.on_ramps[r].cell == j)
            .collect()
    }

    /// Total station split ratio of cell `i` at interval `k`.
    pub fn beta_station_total(&self, i: usize, k: usize) -> f64 {
        self.stations
            .iter()
            .filter(|s| s.entry_cell == i)
            .map(|s| s.beta_s.at(k))
            .sum()
    }

    /// Free-flow traversal time of the whole stretch [min].
    pub fn free_flow_time_min(&self) -> f64 {
        self.cells
            .iter()
            .map(CellParams::free_flow_time_h)
            .sum::<f64>()
            * 60.0
    }
}

/// State of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationState {
    /// Vehicles at the station [veh].
    pub ell: f64,
    /// Vehicles whose dwell is over but could not re-merge yet [veh].
    pub e_queue: f64,
    /// Last `dwell_intervals` station inflows, oldest first [veh/h]; the
    /// front is s^s(k - δ).
    pub history: VecDeque<f64>,
}

impl StationState {
    /// Empty station with a warm-up history of zeros.
    pub fn empty(dwell_intervals: usize) -> Self {
        StationState {
            ell: 0.0,
            e_queue: 0.0,
            history: VecDeque::from(vec![0.0; dwell_intervals.max(1)]),
        }
    }

    pub fn delayed_inflow(&self) -> f64 {
        self.history.front().copied().unwrap_or(0.0)
    }
}

/// Dynamic state at the start of interval `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub k: usize,
    /// Density per cell [veh/km].
    pub rho: Vec<f64>,
    pub stations: Vec<StationState>,
    /// Vehicles waiting to enter cell 1 [veh].
    pub boundary_queue: f64,
    /// Vehicles waiting on each on-ramp [veh].
    pub ramp_queue: Vec<f64>,
}

impl SimState {
    /// Empty road and empty stations.
    pub fn empty(topology: &Topology) -> Self {
        SimState {
            k: 0,
            rho: vec![0.0; topology.n_cells()],
            stations: topology
                .stations
                .iter()
                .map(|s| StationState::empty(s.dwell_intervals))
                .collect(),
            boundary_queue: 0.0,
            ramp_queue: vec![0.0; topology.on_ramps.len()],
        }
    }

    /// Vehicles at station `p` [veh].
    pub fn ell(&self, p: usize) -> f64 {
        self.stations[p].ell
    }

    /// Backlog of station `p` [veh].
    pub fn e_queue(&self, p: usize) -> f64 {
        self.stations[p].e_queue
    }

    /// Vehicles in the system: cells, stations, boundary and ramp queues.
    pub fn vehicles(&self, topology: &Topology) -> f64 {
        let cells: f64 = self
            .rho
            .iter()
            .zip(&topology.cells)
            .map(|(r, c)| r * c.length_km)
            .sum();
        cells
            + self.stations.iter().map(|s| s.ell).sum::<f64>()
            + self.boundary_queue
            + self.ramp_queue.iter().sum::<f64>()
    }
}

/// Every flow of one interval [veh/h].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowRecord {
    pub k: usize,
    /// Arrival flow requested at the upstream boundary.
    pub upstream_arrivals: f64,
    /// `phi[i]` enters cell `i` from upstream; `phi[N]` leaves the last cell.
    pub phi: Vec<f64>,
    pub s_off: Vec<f64>,
    pub s_station: Vec<f64>,
    pub r_station: Vec<f64>,
    pub station_demand: Vec<f64>,
    pub ramp_arrivals: Vec<f64>,
    pub ramp_flow: Vec<f64>,
    pub phi_in_total: Vec<f64>,
    pub phi_out_total: Vec<f64>,
}

impl FlowRecord {
    /// Flow entering the system (upstream boundary plus ramp arrivals).
    pub fn arrivals(&self) -> f64 {
        self.upstream_arrivals + self.ramp_arrivals.iter().sum::<f64>()
    }

    /// Flow leaving the system (downstream end plus off-ramps).
    pub fn departures(&self) -> f64 {
        self.phi.last().copied().unwrap_or(0.0) + self.s_off.iter().sum::<f64>()
    }
}
