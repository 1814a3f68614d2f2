mod common;

use common::{audit_random_run, random_topology};
use ctms_core::control::FixedCaps;
use ctms_core::demand::DemandProfile;
use ctms_core::metrics::pi_index;
use ctms_core::model::{Schedule, SimState, StationParams};
use ctms_core::scenario::{parse_scenario, preset_a13, Scenario};
use ctms_core::sim::{simulate, simulate_with};
use ctms_core::step::step;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn preset(name: &str) -> Scenario {
    parse_scenario(&format!(r#"{{"preset": "{name}"}}"#)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // 100 cases x 100 intervals = 10^4 random steps.
    #[test]
    fn random_steps_conserve_vehicles_and_respect_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng);
        let audit = audit_random_run(&mut rng, &topo, 100);
        prop_assert_eq!(audit.steps, 100);
        prop_assert!(audit.max_residual <= 1e-9, "residual {}", audit.max_residual);
        prop_assert!(audit.max_density_excess <= 0.0, "excess {}", audit.max_density_excess);
        prop_assert!(audit.min_value >= 0.0, "negative state {}", audit.min_value);
    }

    #[test]
    fn pi_ignores_time_scale_and_order(
        base in prop::collection::vec(0.0..100.0f64, 1..50),
        var in prop::collection::vec(0.0..100.0f64, 1..50),
        scale in 0.01..100.0f64,
    ) {
        prop_assume!(base.iter().any(|x| *x > 1e-3));
        let pi = pi_index(&base, &var).unwrap();
        let scaled_b: Vec<f64> = base.iter().map(|x| x * scale).collect();
        let scaled_v: Vec<f64> = var.iter().map(|x| x * scale).collect();
        prop_assert!((pi_index(&scaled_b, &scaled_v).unwrap() - pi).abs() <= 1e-12);
        let mut rev = var.clone();
        rev.reverse();
        prop_assert_eq!(pi_index(&base, &rev).unwrap(), pi);
    }
}

#[test]
fn whole_runs_conserve_vehicles() {
    for name in ["a13", "a13-single-station", "a13-multi-purpose"] {
        let traj = simulate(&preset(name)).unwrap();
        assert!(
            traj.conservation_residual <= 1e-9,
            "{name}: {}",
            traj.conservation_residual
        );
    }
}

#[test]
fn zero_demand_stays_empty() {
    let mut sc = preset("a13-single-station");
    sc.demand = DemandProfile::constant(0.0);
    let traj = simulate(&sc).unwrap();
    assert_eq!(traj.rows.len(), 1080);
    for row in &traj.rows {
        assert!(row.flows.phi.iter().all(|f| *f == 0.0));
        assert!(row.rho.iter().all(|r| *r == 0.0));
        assert_eq!(row.delay.seconds, 0.0);
    }
}

#[test]
fn subcritical_demand_has_no_delay() {
    let mut sc = preset("a13-single-station");
    sc.demand = DemandProfile::constant(1000.0);
    let traj = simulate(&sc).unwrap();
    let worst = traj.delta_series().into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-9, "delay {worst}");
    assert_eq!(traj.metrics(&sc).saturated_intervals, 0);
}

#[test]
fn stations_flush_once_demand_stops() {
    let mut topo = preset_a13();
    topo.add_station(
        StationParams {
            entry_cell: 1,
            exit_cell: 3,
            dwell_intervals: 90,
            r_s_max: 2000.0,
            beta_s: Schedule::Constant(0.1),
        },
        0.03,
    );
    topo.priorities[3].mainstream = 0.97;
    let mut state = SimState::empty(&topo);
    for k in 0..2000 {
        let arrivals = if k < 300 { 2400.0 } else { 0.0 };
        state = step(&topo, &state, arrivals, &[]).unwrap().0;
    }
    assert!(
        state.vehicles(&topo) < 1e-6,
        "{} vehicles left",
        state.vehicles(&topo)
    );
    assert_eq!(state.stations[0].e_queue, 0.0);
}

#[test]
fn station_empties_within_dwell_plus_drain_time() {
    let mut topo = preset_a13();
    let dwell = 30;
    let r_max = 400.0;
    let k0 = 300;
    topo.add_station(
        StationParams {
            entry_cell: 1,
            exit_cell: 3,
            dwell_intervals: dwell,
            r_s_max: r_max,
            beta_s: Schedule::Steps(vec![(0, 0.1), (k0, 0.0)]),
        },
        0.03,
    );
    topo.priorities[3].mainstream = 0.97;
    let mut state = SimState::empty(&topo);
    for _ in 0..k0 {
        state = step(&topo, &state, 1500.0, &[]).unwrap().0;
    }
    let ell0 = state.stations[0].ell;
    assert!(ell0 > 1.0);
    let bound = (ell0 / (topo.t_hours * r_max)).ceil() as usize + dwell;
    for _ in 0..bound {
        state = step(&topo, &state, 1500.0, &[]).unwrap().0;
    }
    assert!(
        state.stations[0].ell <= 1e-9,
        "ell {}",
        state.stations[0].ell
    );
    assert!(state.stations[0].e_queue <= 1e-9);
}

#[test]
fn identical_stations_collapse_into_one() {
    let single = preset("a13-single-station");
    let mut split = single.clone();
    let st = split.topology.stations[0].clone();
    let half = StationParams {
        r_s_max: st.r_s_max / 2.0,
        beta_s: Schedule::Constant(st.beta_s.at(0) / 2.0),
        ..st
    };
    split.topology.stations.clear();
    let exit = half.exit_cell;
    let w = single.topology.priorities[exit].stations[0];
    split.topology.priorities[exit].stations.clear();
    split.topology.add_station(half.clone(), w / 2.0);
    split.topology.add_station(half, w / 2.0);

    let a = simulate(&single).unwrap();
    let b = simulate(&split).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in ra.rho.iter().zip(&rb.rho) {
            assert!((x - y).abs() <= 1e-9, "k {}: {x} vs {y}", ra.k);
        }
        let ea: f64 = ra.e_queue.iter().sum();
        let eb: f64 = rb.e_queue.iter().sum();
        assert!((ea - eb).abs() <= 1e-9);
    }
}

#[test]
fn uncontrolled_equals_caps_at_ramp_capacity() {
    for name in ["a13-single-station", "a13-multi-purpose"] {
        let sc = preset(name);
        let caps = sc
            .topology
            .stations
            .iter()
            .map(|s| Some(s.r_s_max))
            .collect();
        let free = simulate(&sc).unwrap();
        let capped = simulate_with(&sc, &mut FixedCaps(caps)).unwrap();
        assert_eq!(free, capped, "{name}");
    }
}

#[test]
fn caps_bound_the_station_outflow() {
    let mut sc = preset("a13-single-station");
    sc.topology.stations[0].beta_s = Schedule::Constant(0.15);
    let traj = simulate_with(&sc, &mut FixedCaps(vec![Some(50.0)])).unwrap();
    assert!(traj.rows.iter().all(|r| r.flows.r_station[0] <= 50.0));
    assert!(traj.conservation_residual <= 1e-9);
}

#[test]
fn integral_controller_runs_within_bounds() {
    let sc = parse_scenario(
        r#"{"preset": "a13-single-station",
            "controller": {"type": "integral", "K": 20.0, "rho_target": 20.0, "station": 1}}"#,
    )
    .unwrap();
    let traj = simulate(&sc).unwrap();
    assert!(traj.conservation_residual <= 1e-9);
    let uncontrolled = simulate(&preset("a13-single-station")).unwrap();
    assert_ne!(traj.rows, uncontrolled.rows);
}

#[test]
fn runs_are_deterministic() {
    let sc = preset("a13-multi-purpose");
    assert_eq!(simulate(&sc).unwrap(), simulate(&sc).unwrap());
}
