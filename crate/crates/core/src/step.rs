//! One interval of the dynamics.

use crate::error::ModelError;
use crate::flow::{cell_demand, cell_supply, station_demand, station_update};
use crate::merge::allocate_merge;
use crate::model::{FlowRecord, Priority, SimState, Topology};

/// Slack allowed on density bounds before a step is rejected.
pub const DENSITY_TOL: f64 = 1e-9;

/// Advances `state` by one interval.
///
/// `upstream_arrivals` is the flow arriving at the upstream end of cell 1
/// during this interval; whatever cell 1 cannot take waits in the boundary
/// queue. `control_caps` holds an optional cap per station (missing
/// entries mean uncapped). The downstream end has unlimited supply.
pub fn step(
    topology: &Topology,
    state: &SimState,
    upstream_arrivals: f64,
    control_caps: &[Option<f64>],
) -> Result<(SimState, FlowRecord), ModelError> {
    let k = state.k;
    let n = topology.n_cells();
    let m = topology.stations.len();
    let t = topology.t_hours;
    let cells = &topology.cells;

    if !(upstream_arrivals >= 0.0 && upstream_arrivals.is_finite()) {
        return Err(ModelError::invariant(
            k,
            format!("upstream arrivals {upstream_arrivals} must be finite and non-negative"),
        ));
    }

    let beta_off: Vec<f64> = topology.beta_offramp.iter().map(|b| b.at(k)).collect();
    let beta_st: Vec<f64> = topology.stations.iter().map(|s| s.beta_s.at(k)).collect();
    let mut beta_st_total = vec![0.0; n];
    for (p, s) in topology.stations.iter().enumerate() {
        beta_st_total[s.entry_cell] += beta_st[p];
    }

    let wrap = |e: ModelError| match e {
        ModelError::Contract { op, detail } => ModelError::invariant(k, format!("{op}: {detail}")),
        other => other,
    };

    let mut demand = Vec::with_capacity(n);
    let mut supply = Vec::with_capacity(n);
    for i in 0..n {
        demand.push(
            cell_demand(&cells[i], state.rho[i], beta_off[i], beta_st_total[i]).map_err(wrap)?,
        );
        supply.push(cell_supply(&cells[i], state.rho[i]).map_err(wrap)?);
    }

    let upstream_demand = (upstream_arrivals + state.boundary_queue / t).min(cells[0].q_max);

    let mut d_station = Vec::with_capacity(m);
    for (p, s) in topology.stations.iter().enumerate() {
        let st = &state.stations[p];
        let cap = control_caps.get(p).copied().flatten();
        d_station.push(station_demand(s, st.delayed_inflow(), st.e_queue, t, cap).map_err(wrap)?);
    }

    let ramp_arrivals: Vec<f64> = topology.on_ramps.iter().map(|r| r.demand.at(k)).collect();
    let d_ramp: Vec<f64> = topology
        .on_ramps
        .iter()
        .zip(&ramp_arrivals)
        .zip(&state.ramp_queue)
        .map(|((r, a), q)| (a + q / t).min(r.r_max))
        .collect();

    let mut phi = vec![0.0; n + 1];
    let mut r_station = vec![0.0; m];
    let mut ramp_flow = vec![0.0; topology.on_ramps.len()];
    for j in 0..n {
        let main = if j == 0 {
            upstream_demand
        } else {
            demand[j - 1]
        };
        let exits = topology.exits_into(j);
        let ramps = topology.ramps_into(j);
        if !exits.is_empty() {
            let d: Vec<f64> = exits.iter().map(|&p| d_station[p]).collect();
            let alloc =
                allocate_merge(main, &d, supply[j], &topology.priorities[j]).map_err(wrap)?;
            phi[j] = alloc.mainstream;
            for (slot, &p) in exits.iter().enumerate() {
                r_station[p] = alloc.stations[slot];
            }
        } else if let Some(&r) = ramps.first() {
            let p_ms = topology.on_ramps[r].p_ms;
            let prio = Priority::new(p_ms, vec![1.0 - p_ms]);
            let alloc = allocate_merge(main, &[d_ramp[r]], supply[j], &prio).map_err(wrap)?;
            phi[j] = alloc.mainstream;
            ramp_flow[r] = alloc.stations[0];
        } else {
            phi[j] = main.min(supply[j]);
        }
    }
    phi[n] = demand[n - 1];

    let mut phi_out_total = vec![0.0; n];
    let mut s_off = vec![0.0; n];
    for i in 0..n {
        let out = phi[i + 1] / (1.0 - beta_off[i] - beta_st_total[i]);
        phi_out_total[i] = out;
        s_off[i] = beta_off[i] * out;
    }
    let s_station: Vec<f64> = topology
        .stations
        .iter()
        .enumerate()
        .map(|(p, s)| beta_st[p] * phi_out_total[s.entry_cell])
        .collect();

    let mut phi_in_total = phi[..n].to_vec();
    for (p, s) in topology.stations.iter().enumerate() {
        phi_in_total[s.exit_cell] += r_station[p];
    }
    for (r, ramp) in topology.on_ramps.iter().enumerate() {
        phi_in_total[ramp.cell] += ramp_flow[r];
    }

    let record = FlowRecord {
        k,
        upstream_arrivals,
        phi,
        s_off,
        s_station,
        r_station,
        station_demand: d_station,
        ramp_arrivals,
        ramp_flow,
        phi_in_total,
        phi_out_total,
    };
    check_flows(k, topology, &record)?;

    let mut rho = Vec::with_capacity(n);
    for (i, c) in cells.iter().enumerate() {
        let mut next =
            state.rho[i] + t / c.length_km * (record.phi_in_total[i] - record.phi_out_total[i]);
        if next < -DENSITY_TOL || next > c.rho_max + DENSITY_TOL || !next.is_finite() {
            return Err(ModelError::invariant(
                k,
                format!("density of cell {} left [0, {}]: {next}", i + 1, c.rho_max),
            ));
        }
        next = next.clamp(0.0, c.rho_max);
        rho.push(next);
    }

    let mut stations = Vec::with_capacity(m);
    for p in 0..m {
        let mut next = station_update(
            &state.stations[p],
            record.s_station[p],
            record.r_station[p],
            record.station_demand[p],
            t,
        )
        .map_err(wrap)?;
        if next.ell < -DENSITY_TOL || next.e_queue > next.ell + DENSITY_TOL {
            return Err(ModelError::invariant(
                k,
                format!(
                    "station {}: occupancy {} and queue {} inconsistent",
                    p + 1,
                    next.ell,
                    next.e_queue
                ),
            ));
        }
        next.ell = next.ell.max(0.0);
        next.e_queue = next.e_queue.min(next.ell);
        stations.push(next);
    }

    let boundary_queue = state.boundary_queue + t * (upstream_arrivals - record.phi[0]);
    let ramp_queue: Vec<f64> = state
        .ramp_queue
        .iter()
        .enumerate()
        .map(|(r, q)| q + t * (record.ramp_arrivals[r] - record.ramp_flow[r]))
        .collect();
    if boundary_queue < -DENSITY_TOL || ramp_queue.iter().any(|q| *q < -DENSITY_TOL) {
        return Err(ModelError::invariant(
            k,
            "boundary or ramp queue went negative",
        ));
    }
    let boundary_queue = boundary_queue.max(0.0);
    let ramp_queue = ramp_queue.into_iter().map(|q| q.max(0.0)).collect();

    Ok((
        SimState {
            k: k + 1,
            rho,
            stations,
            boundary_queue,
            ramp_queue,
        },
        record,
    ))
}

fn check_flows(k: usize, topology: &Topology, r: &FlowRecord) -> Result<(), ModelError> {
    let all = r
        .phi
        .iter()
        .chain(&r.s_off)
        .chain(&r.s_station)
        .chain(&r.r_station)
        .chain(&r.ramp_flow)
        .chain(&r.phi_in_total)
        .chain(&r.phi_out_total);
    for v in all {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(ModelError::invariant(
                k,
                format!("flow {v} is negative or not finite"),
            ));
        }
    }
    let n = topology.n_cells();
    for i in 1..n {
        let cap = topology.cells[i - 1].q_max.min(topology.cells[i].q_max);
        if r.phi[i] > cap * (1.0 + 1e-12) {
            return Err(ModelError::invariant(
                k,
                format!(
                    "flow {} into cell {} exceeds capacity {cap}",
                    r.phi[i],
                    i + 1
                ),
            ));
        }
    }
    for (p, s) in topology.stations.iter().enumerate() {
        if r.r_station[p] > s.r_s_max.min(r.station_demand[p]) * (1.0 + 1e-12) + 1e-12 {
            return Err(ModelError::invariant(
                k,
                format!(
                    "station {} outflow {} above its demand",
                    p + 1,
                    r.r_station[p]
                ),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Schedule, StationParams};
    use crate::scenario::preset_a13;

    #[test]
    fn empty_road_is_fixed_point() {
        let topo = preset_a13();
        let s0 = SimState::empty(&topo);
        let (s1, rec) = step(&topo, &s0, 0.0, &[]).unwrap();
        assert_eq!(s1.rho, s0.rho);
        assert_eq!(s1.boundary_queue, 0.0);
        assert_eq!(s1.k, 1);
        assert!(rec.phi.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn free_flow_steady_state() {
        let topo = preset_a13();
        let mut s = SimState::empty(&topo);
        let mut last = None;
        for _ in 0..400 {
            let (next, rec) = step(&topo, &s, 500.0, &[]).unwrap();
            s = next;
            last = Some(rec);
        }
        let rec = last.unwrap();
        for (i, c) in topo.cells.iter().enumerate() {
            assert!(
                (rec.phi[i + 1] - 500.0).abs() < 1e-9,
                "phi {} = {}",
                i + 1,
                rec.phi[i + 1]
            );
            assert!((s.rho[i] - 500.0 / c.v_free).abs() < 1e-9);
        }
    }

    #[test]
    fn station_flow_splits_and_returns() {
        let mut topo = preset_a13();
        topo.add_station(
            StationParams {
                entry_cell: 1,
                exit_cell: 3,
                dwell_intervals: 3,
                r_s_max: 2000.0,
                beta_s: Schedule::Constant(0.1),
            },
            0.03,
        );
        topo.priorities[3].mainstream = 0.97;
        let mut s = SimState::empty(&topo);
        for _ in 0..300 {
            s = step(&topo, &s, 1000.0, &[]).unwrap().0;
        }
        let (_, rec) = step(&topo, &s, 1000.0, &[]).unwrap();
        assert!((rec.s_station[0] - 100.0).abs() < 1e-9);
        assert!((rec.r_station[0] - 100.0).abs() < 1e-9);
        assert!((rec.phi[2] - 900.0).abs() < 1e-9);
        assert!((rec.phi[4] - 1000.0).abs() < 1e-9);
        // three intervals of inflow are still dwelling
        assert!((s.stations[0].ell - 3.0 * 100.0 / 360.0).abs() < 1e-9);
    }

    #[test]
    fn saturated_upstream_fills_boundary_queue() {
        let topo = preset_a13();
        let mut s = SimState::empty(&topo);
        let (s1, rec) = step(&topo, &s, 5000.0, &[]).unwrap();
        assert_eq!(rec.phi[0], 2511.0);
        assert!((s1.boundary_queue - (5000.0 - 2511.0) / 360.0).abs() < 1e-12);
        s = s1;
        let (_, rec) = step(&topo, &s, 0.0, &[]).unwrap();
        assert!(rec.phi[0] > 0.0);
    }

    #[test]
    fn negative_arrivals_abort() {
        let topo = preset_a13();
        let s = SimState::empty(&topo);
        assert!(matches!(
            step(&topo, &s, -1.0, &[]),
            Err(ModelError::Invariant { k: 0, .. })
        ));
    }
}
