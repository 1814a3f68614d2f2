//! Congestion metrics: per-cell speed, extra traversal time, peak reduction.

use crate::error::MetricsError;
use crate::model::{CellParams, Topology};

/// Densities at or below this are treated as an empty cell [veh/km].
pub const EPS_RHO: f64 = 1e-6;

/// Default ceiling for the extra traversal time of a stalled stretch [s].
pub const DEFAULT_DELTA_CEILING_S: f64 = 3600.0;

/// Mean speed of a cell: exit flow over density, never above free flow.
pub fn cell_speed(rho: f64, phi_out_total: f64, v_free: f64) -> f64 {
    if rho <= EPS_RHO {
        v_free
    } else {
        v_free.min(phi_out_total / rho)
    }
}

/// Extra traversal time over free flow for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delay {
    pub seconds: f64,
    /// Some cell stood still; `seconds` holds the ceiling.
    pub saturated: bool,
}

/// `Σ L_i / v_i - L_i / v_free_i` in seconds. A stopped cell makes the
/// value infinite; it is reported as `ceiling_s` and flagged.
pub fn delta(speeds: &[f64], cells: &[CellParams], ceiling_s: f64) -> Result<Delay, MetricsError> {
    let mut hours = 0.0;
    for (i, (v, c)) in speeds.iter().zip(cells).enumerate() {
        if v.is_nan() || *v < 0.0 {
            return Err(MetricsError::NonPositiveSpeed { cell: i, speed: *v });
        }
        if *v == 0.0 {
            return Ok(Delay {
                seconds: ceiling_s,
                saturated: true,
            });
        }
        hours += c.length_km / v - c.length_km / c.v_free;
    }
    let seconds = hours * 3600.0;
    if seconds > ceiling_s {
        return Ok(Delay {
            seconds: ceiling_s,
            saturated: true,
        });
    }
    Ok(Delay {
        seconds: seconds.max(0.0),
        saturated: false,
    })
}

/// Extra traversal time from raw densities and exit flows.
pub fn delta_from_state(
    topology: &Topology,
    rho: &[f64],
    phi_out_total: &[f64],
    ceiling_s: f64,
) -> Result<Delay, MetricsError> {
    let speeds: Vec<f64> = topology
        .cells
        .iter()
        .zip(rho.iter().zip(phi_out_total))
        .map(|(c, (r, f))| cell_speed(*r, *f, c.v_free))
        .collect();
    delta(&speeds, &topology.cells, ceiling_s)
}

pub fn peak(series: &[f64]) -> Result<f64, MetricsError> {
    series
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(MetricsError::EmptySeries)
}

/// Relative reduction of the peak extra traversal time against a baseline.
pub fn pi_index(delta_baseline: &[f64], delta_variant: &[f64]) -> Result<f64, MetricsError> {
    let base = peak(delta_baseline)?;
    let var = peak(delta_variant)?;
    if !(base > 0.0) {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((base - var) / base)
}

/// Free-flow traversal time of a stretch [min].
pub fn ttt_free_flow(cells: &[CellParams]) -> f64 {
    cells.iter().map(|c| c.length_km / c.v_free).sum::<f64>() * 60.0
}

/// Summary metrics of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMetrics {
    pub delta_series: Vec<f64>,
    pub delta_max: f64,
    /// Interval at which `delta_max` is first reached.
    pub delta_argmax: usize,
    /// Free-flow traversal time [min].
    pub ttt_free_flow: f64,
    pub saturated_intervals: usize,
    /// Peak reduction against a baseline, for paired runs.
    pub pi: Option<f64>,
}

impl TrajectoryMetrics {
    pub fn new(cells: &[CellParams], delays: &[Delay]) -> Self {
        let delta_series: Vec<f64> = delays.iter().map(|d| d.seconds).collect();
        let (delta_argmax, delta_max) = delta_series
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        TrajectoryMetrics {
            delta_series,
            delta_max,
            delta_argmax,
            ttt_free_flow: ttt_free_flow(cells),
            saturated_intervals: delays.iter().filter(|d| d.saturated).count(),
            pi: None,
        }
    }

    pub fn with_baseline(mut self, baseline: &TrajectoryMetrics) -> Result<Self, MetricsError> {
        self.pi = Some(pi_index(&baseline.delta_series, &self.delta_series)?);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(len: f64, v: f64) -> CellParams {
        CellParams::new(len, v, 30.0, 2000.0, 100.0)
    }

    #[test]
    fn speed_cases() {
        assert_eq!(cell_speed(0.0, 0.0, 114.0), 114.0);
        assert!((cell_speed(500.0 / 114.0, 500.0, 114.0) - 114.0).abs() < 1e-12);
        assert!((cell_speed(100.0, 2000.0, 114.0) - 20.0).abs() < 1e-12);
        assert!(cell_speed(10.0, 1.0, 114.0) > 0.0);
    }

    #[test]
    fn delta_cases() {
        let cells = [cell(0.5, 114.0), cell(0.5, 114.0)];
        assert_eq!(delta(&[114.0, 114.0], &cells, 3600.0).unwrap().seconds, 0.0);
        // (0.5/57 - 0.5/114) h = 15.789... s
        let d = delta(&[57.0], &cells[..1], 3600.0).unwrap();
        assert!((d.seconds - 0.5 / 114.0 * 3600.0).abs() < 1e-9);
        assert!((d.seconds - 15.79).abs() < 0.01);
        let stalled = delta(&[0.0, 114.0], &cells, 900.0).unwrap();
        assert!(stalled.saturated && stalled.seconds == 900.0);
        assert!(delta(&[-1.0], &cells[..1], 900.0).is_err());
    }

    #[test]
    fn pi_cases() {
        let base = [0.0, 30.0, 56.0, 10.0];
        assert_eq!(pi_index(&base, &base).unwrap(), 0.0);
        let v = pi_index(&base, &[0.0, 17.0, 3.0]).unwrap();
        assert!((v - 39.0 / 56.0).abs() < 1e-12);
        assert!((v - 0.696).abs() < 1e-3);
        assert_eq!(pi_index(&base, &[0.0, 0.0]).unwrap(), 1.0);
        assert!(pi_index(&base, &[60.0]).unwrap() < 0.0);
        assert_eq!(
            pi_index(&[0.0, 0.0], &[1.0]),
            Err(MetricsError::ZeroBaseline)
        );
        assert_eq!(pi_index(&[], &[1.0]), Err(MetricsError::EmptySeries));
    }

    #[test]
    fn trajectory_summary() {
        let cells = [cell(0.5, 114.0)];
        let delays = [
            Delay {
                seconds: 1.0,
                saturated: false,
            },
            Delay {
                seconds: 4.0,
                saturated: false,
            },
            Delay {
                seconds: 4.0,
                saturated: false,
            },
        ];
        let m = TrajectoryMetrics::new(&cells, &delays);
        assert_eq!(m.delta_max, 4.0);
        assert_eq!(m.delta_argmax, 1);
        let half = TrajectoryMetrics::new(
            &cells,
            &[Delay {
                seconds: 2.0,
                saturated: false,
            }],
        );
        assert_eq!(half.with_baseline(&m).unwrap().pi, Some(0.5));
    }
}
