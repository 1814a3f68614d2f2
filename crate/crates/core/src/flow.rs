//! Demand and supply functions, and the station bookkeeping.

use crate::error::ModelError;
use crate::model::{CellParams, StationParams, StationState};
use crate::validate::EPS_SPLIT;

/// Mainstream demand of a cell:
/// `min((1 - beta_off - beta_s_total) * v_free * rho, q_max)`.
pub fn cell_demand(
    cell: &CellParams,
    rho: f64,
    beta_off: f64,
    beta_s_total: f64,
) -> Result<f64, ModelError> {
    if !(rho >= 0.0) {
        return Err(ModelError::contract(
            "cell_demand",
            format!("density {rho} is negative"),
        ));
    }
    let beta = beta_off + beta_s_total;
    if !(beta_off >= 0.0 && beta_s_total >= 0.0 && beta <= 1.0 - EPS_SPLIT) {
        return Err(ModelError::contract(
            "cell_demand",
            format!("split ratios {beta_off} + {beta_s_total} out of range"),
        ));
    }
    Ok(((1.0 - beta) * cell.v_free * rho).min(cell.q_max))
}

/// Supply of a cell: `min(w * (rho_max - rho), q_max)`.
pub fn cell_supply(cell: &CellParams, rho: f64) -> Result<f64, ModelError> {
    if !(rho >= 0.0 && rho <= cell.rho_max) {
        return Err(ModelError::contract(
            "cell_supply",
            format!("density {rho} outside [0, {}]", cell.rho_max),
        ));
    }
    Ok((cell.w_congestion * (cell.rho_max - rho)).min(cell.q_max))
}

/// Demand of the ramp leaving a station.
///
/// The cohort trying to leave is the inflow of `dwell_intervals` ago plus
/// the backlog converted to a flow, capped by the control signal (if any)
/// and by the ramp capacity.
pub fn station_demand(
    station: &StationParams,
    inflow_delayed: f64,
    e_queue: f64,
    t_hours: f64,
    control_cap: Option<f64>,
) -> Result<f64, ModelError> {
    if !(inflow_delayed >= 0.0 && e_queue >= 0.0) {
        return Err(ModelError::contract(
            "station_demand",
            format!("negative delayed inflow {inflow_delayed} or queue {e_queue}"),
        ));
    }
    let mut d = (inflow_delayed + e_queue / t_hours).min(station.r_s_max);
    if let Some(cap) = control_cap {
        d = d.min(cap.max(0.0));
    }
    Ok(d)
}

/// Advances one station by one interval.
///
/// `demand` is the station demand of this interval; the granted flow may
/// not exceed it.
pub fn station_update(
    state: &StationState,
    s_s_now: f64,
    r_s_granted: f64,
    demand: f64,
    t_hours: f64,
) -> Result<StationState, ModelError> {
    if r_s_granted > demand * (1.0 + 1e-12) + 1e-12 {
        return Err(ModelError::contract(
            "station_update",
            format!("granted {r_s_granted} exceeds demand {demand}"),
        ));
    }
    if !(s_s_now >= 0.0 && r_s_granted >= 0.0) {
        return Err(ModelError::contract(
            "station_update",
            format!("negative flow: inflow {s_s_now}, granted {r_s_granted}"),
        ));
    }
    let delayed = state.delayed_inflow();
    let ell = state.ell + t_hours * (s_s_now - r_s_granted);
    // r <= delayed + e/T, so this is non-negative up to rounding
    let e_queue = (state.e_queue + t_hours * delayed - t_hours * r_s_granted).max(0.0);
    let mut history = state.history.clone();
    history.pop_front();
    history.push_back(s_s_now);
    Ok(StationState {
        ell,
        e_queue,
        history,
    })
}
