//! Allocation of a cell's supply among the mainstream and the ramps
//! merging into it.
//!
//! In free flow everybody is served. Under congestion the mainstream is
//! guaranteed the share `p_ms * S` of the supply and the station ramps
//! share the rest: ramps whose demand fits under an equal share of what is
//! left are served in full, iteratively, and the final residual is split
//! among the still-unserved ramps proportionally to their priority weights.

use crate::error::ModelError;
use crate::model::Priority;
use crate::validate::SIMPLEX_TOL;

/// Which regime a merge ended up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeRegime {
    FreeFlow,
    /// Mainstream rationed, every ramp served.
    RampsServed,
    /// Mainstream served, ramps rationed.
    MainstreamServed,
    /// Both sides exceed their guaranteed share.
    BothRationed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeAllocation {
    pub mainstream: f64,
    pub stations: Vec<f64>,
    pub regime: MergeRegime,
}

impl MergeAllocation {
    pub fn total(&self) -> f64 {
        self.mainstream + self.stations.iter().sum::<f64>()
    }
}

fn check_inputs(
    d_main: f64,
    d_stations: &[f64],
    supply: f64,
    priority: &Priority,
) -> Result<(), ModelError> {
    if !(d_main >= 0.0 && supply >= 0.0) || d_stations.iter().any(|d| !(*d >= 0.0)) {
        return Err(ModelError::contract(
            "allocate_merge",
            format!(
                "negative or NaN input: main {d_main}, stations {d_stations:?}, supply {supply}"
            ),
        ));
    }
    if priority.stations.len() != d_stations.len() {
        return Err(ModelError::contract(
            "allocate_merge",
            format!(
                "{} priority weights for {} ramps",
                priority.stations.len(),
                d_stations.len()
            ),
        ));
    }
    if !d_stations.is_empty() {
        let sum = priority.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL
            || !(priority.mainstream > 0.0)
            || priority.stations.iter().any(|w| !(*w > 0.0))
        {
            return Err(ModelError::contract(
                "allocate_merge",
                format!("priority {priority:?} is not on the simplex"),
            ));
        }
    }
    Ok(())
}

pub fn allocate_merge(
    d_main: f64,
    d_stations: &[f64],
    supply: f64,
    priority: &Priority,
) -> Result<MergeAllocation, ModelError> {
    check_inputs(d_main, d_stations, supply, priority)?;

    let d_ramps: f64 = d_stations.iter().sum();
    if d_main + d_ramps <= supply {
        return Ok(MergeAllocation {
            mainstream: d_main,
            stations: d_stations.to_vec(),
            regime: MergeRegime::FreeFlow,
        });
    }

    let p_ms = priority.mainstream;
    let main_share = p_ms * supply;
    let ramp_share = (1.0 - p_ms) * supply;

    if d_main > main_share && d_ramps <= ramp_share {
        return Ok(MergeAllocation {
            mainstream: (supply - d_ramps).max(0.0),
            stations: d_stations.to_vec(),
            regime: MergeRegime::RampsServed,
        });
    }

    let (mainstream, residual, regime) = if d_main <= main_share {
        (d_main, supply - d_main, MergeRegime::MainstreamServed)
    } else {
        (main_share, ramp_share, MergeRegime::BothRationed)
    };
    let stations = share_residual(d_stations, &priority.stations, residual.max(0.0));
    Ok(MergeAllocation {
        mainstream,
        stations,
        regime,
    })
}

/// Splits `residual` (smaller than the total demand) among ramps.
///
/// Stage `t` serves in full every remaining ramp whose demand does not
/// exceed the equal share `residual_t / |remaining_t|`. Once no ramp fits,
/// what is left goes to the remaining ramps in proportion to their weights.
/// A weighted share larger than a ramp's demand is capped at the demand and
/// the excess is re-split over the others by weight.
pub(crate) fn share_residual(demands: &[f64], weights: &[f64], residual: f64) -> Vec<f64> {
    let mut out = vec![0.0; demands.len()];
    let mut remaining: Vec<usize> = (0..demands.len()).collect();
    let mut left = residual;

    while !remaining.is_empty() {
        let share = left / remaining.len() as f64;
        let (served, rest): (Vec<usize>, Vec<usize>) =
            remaining.iter().partition(|&&q| demands[q] <= share);
        if served.is_empty() {
            break;
        }
        for q in served {
            out[q] = demands[q];
            left -= demands[q];
        }
        remaining = rest;
    }

    while !remaining.is_empty() {
        let total_w: f64 = remaining.iter().map(|&q| weights[q]).sum();
        let (capped, rest): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&q| demands[q] <= weights[q] / total_w * left);
        if capped.is_empty() {
            for &q in &remaining {
                out[q] = (weights[q] / total_w * left).max(0.0);
            }
            break;
        }
        for q in capped {
            out[q] = demands[q];
            left -= demands[q];
        }
        remaining = rest;
    }
    out
}
