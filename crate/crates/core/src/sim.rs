//! Runs a scenario over its horizon and collects the trajectory.

use crate::control::{Controller, NoControl};
use crate::error::{Error, ModelError};
use crate::metrics::{delta_from_state, Delay, TrajectoryMetrics};
use crate::model::{FlowRecord, SimState};
use crate::scenario::Scenario;
use crate::step::step;
use crate::validate::validate_topology;

/// Everything observed during one interval: the state at its start and
/// the flows during it.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub k: usize,
    pub rho: Vec<f64>,
    pub ell: Vec<f64>,
    pub e_queue: Vec<f64>,
    pub boundary_queue: f64,
    pub ramp_queue: Vec<f64>,
    pub flows: FlowRecord,
    pub delay: Delay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<IntervalRow>,
    pub final_state: SimState,
    /// |vehicles(end) - vehicles(start) - T * Σ(arrivals - departures)| [veh].
    pub conservation_residual: f64,
}

impl Trajectory {
    pub fn delta_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delay.seconds).collect()
    }

    pub fn metrics(&self, scenario: &Scenario) -> TrajectoryMetrics {
        let delays: Vec<Delay> = self.rows.iter().map(|r| r.delay).collect();
        TrajectoryMetrics::new(&scenario.topology.cells, &delays)
    }

    /// Peak backlog of each station and the interval where it first occurs.
    pub fn max_queue(&self) -> Vec<(f64, usize)> {
        let m = self.final_state.stations.len();
        let mut out = vec![(0.0, 0); m];
        for row in &self.rows {
            for (p, e) in row.e_queue.iter().enumerate() {
                if *e > out[p].0 {
                    out[p] = (*e, row.k);
                }
            }
        }
        for (p, st) in self.final_state.stations.iter().enumerate() {
            if st.e_queue > out[p].0 {
                out[p] = (st.e_queue, self.final_state.k);
            }
        }
        out
    }
}

/// Runs `scenario` with the controller from its config block.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory, Error> {
    let mut controller: Box<dyn Controller> = match &scenario.controller {
        Some(cfg) => cfg.build(&scenario.topology),
        None => Box::new(NoControl),
    };
    simulate_with(scenario, controller.as_mut())
}

/// Runs `scenario` with an explicit controller.
pub fn simulate_with(
    scenario: &Scenario,
    controller: &mut dyn Controller,
) -> Result<Trajectory, Error> {
    let topo = &scenario.topology;
    let violations = validate_topology(topo);
    if !violations.is_empty() {
        return Err(
            ModelError::Topology(violations.iter().map(|v| v.to_string()).collect()).into(),
        );
    }
    let t = topo.t_hours;
    let mut state = SimState::empty(topo);
    let start = state.vehicles(topo);
    let mut net_inflow = 0.0;
    let mut rows = Vec::with_capacity(scenario.horizon_intervals);

    for k in 0..scenario.horizon_intervals {
        let decision = controller.decide(topo, &state);
        let (next, flows) = step(topo, &state, scenario.upstream_arrivals(k), &decision.caps)?;
        let delay = delta_from_state(
            topo,
            &state.rho,
            &flows.phi_out_total,
            scenario.output.delta_ceiling_s,
        )
        .map_err(|e| ModelError::Invariant {
            k,
            invariant: e.to_string(),
        })?;
        net_inflow += t * (flows.arrivals() - flows.departures());
        rows.push(IntervalRow {
            k,
            rho: state.rho.clone(),
            ell: state.stations.iter().map(|s| s.ell).collect(),
            e_queue: state.stations.iter().map(|s| s.e_queue).collect(),
            boundary_queue: state.boundary_queue,
            ramp_queue: state.ramp_queue.clone(),
            flows,
            delay,
        });
        state = next;
    }

    let conservation_residual = (state.vehicles(topo) - start - net_inflow).abs();
    Ok(Trajectory {
        rows,
        final_state: state,
        conservation_residual,
    })
}

/// A run paired with its station-free baseline.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub variant: Trajectory,
    pub variant_metrics: TrajectoryMetrics,
    pub baseline_metrics: TrajectoryMetrics,
}

impl Comparison {
    pub fn pi(&self) -> Option<f64> {
        self.variant_metrics.pi
    }
}

/// Runs `scenario` and its station-free baseline and computes the peak
/// reduction.
pub fn compare(scenario: &Scenario) -> Result<Comparison, Error> {
    let base = scenario.baseline();
    let baseline_metrics = simulate(&base)?.metrics(&base);
    compare_with_baseline(scenario, baseline_metrics)
}

/// As [`compare`], reusing an already computed baseline.
pub fn compare_with_baseline(
    scenario: &Scenario,
    baseline_metrics: TrajectoryMetrics,
) -> Result<Comparison, Error> {
    let variant = simulate(scenario)?;
    let variant_metrics = variant.metrics(scenario).with_baseline(&baseline_metrics)?;
    Ok(Comparison {
        variant,
        variant_metrics,
        baseline_metrics,
    })
}
