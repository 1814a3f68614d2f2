//! Helpers shared by the integration tests: a brute-force merge oracle and
//! random topologies.
#![allow(dead_code)]

use ctms_core::model::{CellParams, OnRamp, Priority, Schedule, SimState, StationParams, Topology};
use ctms_core::step::step;
use ctms_core::validate::validate_topology;
use rand::Rng;

/// Splits `budget` among `demands` by water filling: every entry gets
/// `min(d_q, w_q * level)` with the level fixed by the budget. The level is
/// found by trying every subset of entries as the "served in full" set and
/// keeping the one that is self-consistent.
fn water_fill(demands: &[f64], weights: &[f64], budget: f64) -> Vec<f64> {
    let total: f64 = demands.iter().sum();
    if total <= budget {
        return demands.to_vec();
    }
    // Exact consistency first; rounding can leave a tie on the boundary
    // unmatched, which the second pass absorbs.
    let scale = 1.0 + budget.abs() + total;
    for slack in [0.0, 1e-12 * scale] {
        if let Some(out) = consistent_fill(demands, weights, budget, slack) {
            return out;
        }
    }
    panic!("no consistent partition for {demands:?} {weights:?} {budget}");
}

fn consistent_fill(demands: &[f64], weights: &[f64], budget: f64, slack: f64) -> Option<Vec<f64>> {
    let n = demands.len();
    for mask in 0u32..(1 << n) {
        let full = |q: usize| mask & (1 << q) != 0;
        let served: f64 = (0..n).filter(|&q| full(q)).map(|q| demands[q]).sum();
        let w_rest: f64 = (0..n).filter(|&q| !full(q)).map(|q| weights[q]).sum();
        if w_rest <= 0.0 {
            continue;
        }
        let level = (budget - served) / w_rest;
        let consistent = (0..n).all(|q| {
            if full(q) {
                demands[q] <= weights[q] * level + slack
            } else {
                demands[q] > weights[q] * level - slack
            }
        });
        if consistent {
            return Some(
                (0..n)
                    .map(|q| {
                        if full(q) {
                            demands[q]
                        } else {
                            (weights[q] * level).max(0.0)
                        }
                    })
                    .collect(),
            );
        }
    }
    None
}

/// Reference merge allocation. The mainstream gets the median of its
/// demand, its guaranteed share and what the ramps leave over; the ramps
/// split the rest by equal-share water filling and, among the ramps left
/// unserved by that, by priority-weighted water filling.
pub fn oracle_merge(d_main: f64, d_ramps: &[f64], supply: f64, prio: &Priority) -> (f64, Vec<f64>) {
    let d_total: f64 = d_main + d_ramps.iter().sum::<f64>();
    if d_total <= supply {
        return (d_main, d_ramps.to_vec());
    }
    let p = prio.mainstream;
    let ramp_sum: f64 = d_ramps.iter().sum();
    let main = (d_main.min(p * supply)).max(supply - ramp_sum);
    let budget = supply - main;
    let n = d_ramps.len();
    if ramp_sum <= budget {
        return (main, d_ramps.to_vec());
    }

    let equal = water_fill(d_ramps, &vec![1.0; n], budget);
    // Entries cut by the equal-share stage move on to the weighted stage
    // with whatever budget the fully served ones left.
    let cut: Vec<usize> = (0..n).filter(|&q| equal[q] < d_ramps[q]).collect();
    let served: f64 = (0..n)
        .filter(|q| !cut.contains(q))
        .map(|q| d_ramps[q])
        .sum();
    let sub_d: Vec<f64> = cut.iter().map(|&q| d_ramps[q]).collect();
    let sub_w: Vec<f64> = cut.iter().map(|&q| prio.stations[q]).collect();
    let weighted = water_fill(&sub_d, &sub_w, budget - served);
    let mut out = d_ramps.to_vec();
    for (slot, &q) in cut.iter().enumerate() {
        out[q] = weighted[slot];
    }
    (main, out)
}

/// A point on the simplex with `n + 1` strictly positive components.
pub fn random_priority<R: Rng>(rng: &mut R, n: usize) -> Priority {
    let raw: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    // Put rounding drift on the mainstream weight so the sum is 1 to ulp.
    let rest: f64 = p[1..].iter().sum();
    p[0] = 1.0 - rest;
    Priority::new(p[0], p[1..].to_vec())
}

pub struct MergeInstance {
    pub d_main: f64,
    pub d_ramps: Vec<f64>,
    pub supply: f64,
    pub priority: Priority,
}

/// Random merge inputs. Demands are sometimes zero or duplicated so that
/// ties and empty ramps come up.
pub fn random_merge<R: Rng>(rng: &mut R, max_ramps: usize) -> MergeInstance {
    let n = rng.gen_range(1..=max_ramps);
    let mut d_ramps: Vec<f64> = (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => rng.gen_range(0.0..10.0),
            _ => rng.gen_range(0.0..1500.0),
        })
        .collect();
    if n > 1 && rng.gen_bool(0.2) {
        d_ramps[1] = d_ramps[0];
    }
    let d_main = if rng.gen_bool(0.05) {
        0.0
    } else {
        rng.gen_range(0.0..3000.0)
    };
    let supply = if rng.gen_bool(0.05) {
        0.0
    } else {
        rng.gen_range(0.0..3000.0)
    };
    MergeInstance {
        d_main,
        d_ramps,
        supply,
        priority: random_priority(rng, n),
    }
}

/// A valid random stretch of 2 to 6 cells with stations, off-ramps and
/// on-ramps. The interval is 10 s.
pub fn random_topology<R: Rng>(rng: &mut R) -> Topology {
    let t = 10.0 / 3600.0;
    let n = rng.gen_range(2..=6);
    let cells: Vec<CellParams> = (0..n)
        .map(|_| {
            let v = rng.gen_range(60.0..130.0);
            let len = v * t * rng.gen_range(1.0..2.5);
            let w = rng.gen_range(15.0..40.0);
            let rho_max = rng.gen_range(80.0..200.0);
            let q_max = rng.gen_range(0.3..0.95) * (v * w * rho_max / (v + w));
            CellParams::new(len, v, w, q_max, rho_max)
        })
        .collect();
    let mut topo = Topology::new(t, cells);

    let m = rng.gen_range(0..=3);
    for _ in 0..m {
        let entry = rng.gen_range(0..n);
        let exit = rng.gen_range(0..n);
        let beta = rng.gen_range(0.0..0.2);
        let beta_s = if rng.gen_bool(0.3) {
            Schedule::Steps(vec![
                (0, beta),
                (rng.gen_range(1..60), rng.gen_range(0.0..0.2)),
            ])
        } else {
            Schedule::Constant(beta)
        };
        topo.add_station(
            StationParams {
                entry_cell: entry,
                exit_cell: exit,
                dwell_intervals: rng.gen_range(1..40),
                r_s_max: rng.gen_range(50.0..2500.0),
                beta_s,
            },
            0.0,
        );
    }
    for j in 0..n {
        let k = topo.priorities[j].stations.len();
        if k > 0 {
            topo.priorities[j] = random_priority(rng, k);
        }
    }
    for i in 0..n {
        if rng.gen_bool(0.3) {
            topo.beta_offramp[i] = Schedule::Constant(rng.gen_range(0.0..0.2));
        }
    }
    for j in 0..n {
        if topo.exits_into(j).is_empty() && rng.gen_bool(0.25) {
            topo.on_ramps.push(OnRamp {
                cell: j,
                demand: Schedule::Constant(rng.gen_range(0.0..1200.0)),
                r_max: rng.gen_range(200.0..2000.0),
                p_ms: rng.gen_range(0.5..0.99),
            });
        }
    }
    let v = validate_topology(&topo);
    assert!(
        v.is_empty(),
        "generator produced an invalid topology: {v:?}"
    );
    topo
}

/// Worst per-step figures over a random run.
#[derive(Debug, Default, Clone, Copy)]
pub struct StepAudit {
    pub steps: usize,
    pub max_residual: f64,
    pub max_density_excess: f64,
    pub min_value: f64,
}

/// Runs `steps` intervals of `topo` under random upstream arrivals and
/// random caps and checks the vehicle balance after each interval.
pub fn audit_random_run<R: Rng>(rng: &mut R, topo: &Topology, steps: usize) -> StepAudit {
    let mut state = SimState::empty(topo);
    let mut audit = StepAudit::default();
    let q1 = topo.cells[0].q_max;
    for _ in 0..steps {
        let arrivals = rng.gen_range(0.0..1.5) * q1;
        let caps: Vec<Option<f64>> = topo
            .stations
            .iter()
            .map(|s| rng.gen_bool(0.3).then(|| rng.gen_range(0.0..s.r_s_max)))
            .collect();
        let before = state.vehicles(topo);
        let (next, flows) = step(topo, &state, arrivals, &caps).expect("step");
        let after = next.vehicles(topo);
        let residual =
            (after - before - topo.t_hours * (flows.arrivals() - flows.departures())).abs();
        audit.max_residual = audit.max_residual.max(residual);
        for (r, c) in next.rho.iter().zip(&topo.cells) {
            audit.max_density_excess = audit.max_density_excess.max(r - c.rho_max);
            audit.min_value = audit.min_value.min(*r);
        }
        for s in &next.stations {
            audit.min_value = audit.min_value.min(s.ell).min(s.e_queue);
            assert!(
                s.e_queue <= s.ell + 1e-9,
                "backlog {} above occupancy {}",
                s.e_queue,
                s.ell
            );
        }
        audit.min_value = audit.min_value.min(next.boundary_queue);
        state = next;
        audit.steps += 1;
    }
    audit
}
