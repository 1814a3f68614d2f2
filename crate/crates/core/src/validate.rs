//! Static checks on a [`Topology`]. Violations are returned as data.

use std::fmt;

use crate::model::{Schedule, Topology};

/// Split ratios must leave at least this fraction on the mainstream.
pub const EPS_SPLIT: f64 = 1e-6;

/// Tolerance on the priority simplex sum.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoCells,
    Interval(f64),
    NonPositiveCellParam {
        cell: usize,
        field: &'static str,
        value: f64,
    },
    Feasibility {
        cell: usize,
        distance_km: f64,
        length_km: f64,
    },
    StationCell {
        station: usize,
        field: &'static str,
        cell: usize,
    },
    StationParam {
        station: usize,
        detail: String,
    },
    PriorityShape {
        cell: usize,
        expected: usize,
        found: usize,
    },
    PriorityNotSimplex {
        cell: usize,
        sum: f64,
    },
    PriorityComponent {
        cell: usize,
        detail: String,
    },
    SplitRange {
        cell: usize,
        detail: String,
    },
    RampAndStationExit {
        cell: usize,
    },
    OnRamp {
        ramp: usize,
        detail: String,
    },
    Shape {
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one-based cell numbers in messages
        match self {
            Violation::NoCells => write!(f, "topology has no cells"),
            Violation::Interval(t) => write!(f, "interval length must be positive, got {t} h"),
            Violation::NonPositiveCellParam { cell, field, value } => {
                write!(f, "cell {}: {field} must be positive, got {value}", cell + 1)
            }
            Violation::Feasibility {
                cell,
                distance_km,
                length_km,
            } => write!(
                f,
                "cell {}: free-flow distance per interval {distance_km} km exceeds length {length_km} km",
                cell + 1
            ),
            Violation::StationCell {
                station,
                field,
                cell,
            } => write!(f, "station {}: {field} cell {} out of range", station + 1, cell + 1),
            Violation::StationParam { station, detail } => {
                write!(f, "station {}: {detail}", station + 1)
            }
            Violation::PriorityShape {
                cell,
                expected,
                found,
            } => write!(
                f,
                "cell {}: priority has {found} station weights, expected {expected}",
                cell + 1
            ),
            Violation::PriorityNotSimplex { cell, sum } => {
                write!(f, "cell {}: priority sums to {sum}, expected 1", cell + 1)
            }
            Violation::PriorityComponent { cell, detail } => {
                write!(f, "cell {}: {detail}", cell + 1)
            }
            Violation::SplitRange { cell, detail } => write!(f, "cell {}: {detail}", cell + 1),
            Violation::RampAndStationExit { cell } => write!(
                f,
                "cell {}: an on-ramp and a station exit cannot merge into the same cell",
                cell + 1
            ),
            Violation::OnRamp { ramp, detail } => write!(f, "on-ramp {}: {detail}", ramp + 1),
            Violation::Shape { detail } => write!(f, "{detail}"),
        }
    }
}

/// Every interval index at which some schedule of `cell` changes value.
fn change_points(schedules: &[&Schedule]) -> Vec<usize> {
    let mut ks = vec![0usize];
    for s in schedules {
        if let Some(starts) = s.step_starts() {
            ks.extend(starts);
        }
    }
    ks.sort_unstable();
    ks.dedup();
    ks
}

pub fn validate_topology(topology: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = topology.n_cells();
    if n == 0 {
        out.push(Violation::NoCells);
    }
    let t = topology.t_hours;
    if !(t > 0.0 && t.is_finite()) {
        out.push(Violation::Interval(t));
    }

    for (i, c) in topology.cells.iter().enumerate() {
        let fields = [
            ("length_km", c.length_km),
            ("v_free", c.v_free),
            ("w_congestion", c.w_congestion),
            ("q_max", c.q_max),
            ("rho_max", c.rho_max),
        ];
        let mut ok = true;
        for (field, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                ok = false;
                out.push(Violation::NonPositiveCellParam {
                    cell: i,
                    field,
                    value,
                });
            }
        }
        if ok && t > 0.0 && c.v_free * t > c.length_km * (1.0 + 1e-12) {
            out.push(Violation::Feasibility {
                cell: i,
                distance_km: c.v_free * t,
                length_km: c.length_km,
            });
        }
    }

    if topology.beta_offramp.len() != n {
        out.push(Violation::Shape {
            detail: format!(
                "offramp_beta has {} entries for {n} cells",
                topology.beta_offramp.len()
            ),
        });
    }
    if topology.priorities.len() != n {
        out.push(Violation::Shape {
            detail: format!(
                "priorities has {} entries for {n} cells",
                topology.priorities.len()
            ),
        });
    }

    for (p, s) in topology.stations.iter().enumerate() {
        if s.entry_cell >= n {
            out.push(Violation::StationCell {
                station: p,
                field: "entry",
                cell: s.entry_cell,
            });
        }
        if s.exit_cell >= n {
            out.push(Violation::StationCell {
                station: p,
                field: "exit",
                cell: s.exit_cell,
            });
        }
        if s.dwell_intervals < 1 {
            out.push(Violation::StationParam {
                station: p,
                detail: "dwell must be at least one interval".into(),
            });
        }
        if !(s.r_s_max > 0.0 && s.r_s_max.is_finite()) {
            out.push(Violation::StationParam {
                station: p,
                detail: format!("r_s_max must be positive, got {}", s.r_s_max),
            });
        }
        if s.beta_s.values().iter().any(|b| !(*b >= 0.0 && *b < 1.0)) {
            out.push(Violation::StationParam {
                station: p,
                detail: "beta_s values must lie in [0, 1)".into(),
            });
        }
    }

    for (r, ramp) in topology.on_ramps.iter().enumerate() {
        if ramp.cell >= n {
            out.push(Violation::OnRamp {
                ramp: r,
                detail: format!("cell {} out of range", ramp.cell + 1),
            });
        }
        if !(ramp.r_max > 0.0 && ramp.r_max.is_finite()) {
            out.push(Violation::OnRamp {
                ramp: r,
                detail: format!("r_max must be positive, got {}", ramp.r_max),
            });
        }
        if !(ramp.p_ms > 0.0 && ramp.p_ms < 1.0) {
            out.push(Violation::OnRamp {
                ramp: r,
                detail: format!("p_ms must lie in (0, 1), got {}", ramp.p_ms),
            });
        }
        if ramp
            .demand
            .values()
            .iter()
            .any(|d| !(*d >= 0.0 && d.is_finite()))
        {
            out.push(Violation::OnRamp {
                ramp: r,
                detail: "demand must be non-negative".into(),
            });
        }
    }

    for j in 0..n {
        let exits = topology.exits_into(j);
        let ramps = topology.ramps_into(j);
        if !exits.is_empty() && !ramps.is_empty() {
            out.push(Violation::RampAndStationExit { cell: j });
        }
        if ramps.len() > 1 {
            out.push(Violation::OnRamp {
                ramp: ramps[1],
                detail: format!("cell {} already has an on-ramp", j + 1),
            });
        }
        if let Some(p) = topology.priorities.get(j) {
            if p.stations.len() != exits.len() {
                out.push(Violation::PriorityShape {
                    cell: j,
                    expected: exits.len(),
                    found: p.stations.len(),
                });
            } else if !exits.is_empty() {
                let sum = p.sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    out.push(Violation::PriorityNotSimplex { cell: j, sum });
                }
                if !(p.mainstream > 0.0) || p.stations.iter().any(|w| !(*w > 0.0)) {
                    out.push(Violation::PriorityComponent {
                        cell: j,
                        detail: "every priority component must be positive".into(),
                    });
                }
            } else if p.mainstream != 1.0 {
                out.push(Violation::PriorityComponent {
                    cell: j,
                    detail: "a cell without station exits has mainstream priority 1".into(),
                });
            }
        }
    }

    if topology.beta_offramp.len() == n {
        for i in 0..n {
            let entries = topology.entries_from(i);
            let mut schedules: Vec<&Schedule> = vec![&topology.beta_offramp[i]];
            schedules.extend(entries.iter().map(|&p| &topology.stations[p].beta_s));
            if topology.beta_offramp[i]
                .values()
                .iter()
                .any(|b| !(*b >= 0.0 && b.is_finite()))
            {
                out.push(Violation::SplitRange {
                    cell: i,
                    detail: "off-ramp split ratio must be non-negative".into(),
                });
                continue;
            }
            for k in change_points(&schedules) {
                let total: f64 = schedules.iter().map(|s| s.at(k)).sum();
                if total > 1.0 - EPS_SPLIT {
                    out.push(Violation::SplitRange {
                        cell: i,
                        detail: format!(
                            "split ratios sum to {total} at k={k}, must not exceed 1 - {EPS_SPLIT:e}"
                        ),
                    });
                    break;
                }
            }
        }
    }

    if topology
        .stations
        .iter()
        .any(|s| s.exit_cell < n && s.entry_cell < n)
    {
        let ins: usize = (0..n).map(|i| topology.entries_from(i).len()).sum();
        let outs: usize = (0..n).map(|j| topology.exits_into(j).len()).sum();
        if ins != outs || ins != topology.stations.len() {
            out.push(Violation::Shape {
                detail: format!(
                    "station maps inconsistent: {ins} entries, {outs} exits, {} stations",
                    topology.stations.len()
                ),
            });
        }
    }

    out
}
