use ptbec_core::continuation::{
    detect_events, fold_from_distances, locate_fold, sweep_branch, EventKind, StepControl, SweepAxis, Termination,
};
use ptbec_core::model::PhysicalParams;
use ptbec_core::stationary::{census, newton, CensusOptions, NewtonOptions, StationaryState};

fn linear(gamma: f64) -> PhysicalParams {
    PhysicalParams {
        na: 0.0,
        nadd: 0.0,
        gamma,
        ..Default::default()
    }
}

fn labelled(states: &[StationaryState], label: &str) -> StationaryState {
    states.iter().find(|s| s.label.as_deref() == Some(label)).unwrap().clone()
}

#[test]
fn square_root_normal_form_recovers_critical_parameter() {
    let pc = 0.123_456_789;
    let ps: Vec<f64> = (0..12).map(|k| pc - 1e-2 * 0.5f64.powi(k)).collect();
    let ds: Vec<f64> = ps.iter().map(|p| 0.37 * (pc - p).sqrt()).collect();
    let fit = fold_from_distances(&ps, &ds).unwrap();
    assert!((fit.location - pc).abs() < 1e-8, "{}", fit.location);
    assert!((fit.exponent - 0.5).abs() < 1e-6);
}

#[test]
fn zero_length_sweep_returns_start_point() {
    let states = census(&linear(0.01), &CensusOptions::default()).unwrap();
    let s = labelled(&states, "S01");
    let b = sweep_branch(&s, SweepAxis::Gamma, 0.01, &StepControl::default()).unwrap();
    assert_eq!(b.points.len(), 1);
    assert_eq!(b.termination, Termination::Target);
    assert_eq!(b.points[0].param, 0.01);
}

#[test]
fn forward_then_backward_sweep_returns_to_start() {
    let p = PhysicalParams {
        na: -0.01,
        gamma: 0.0,
        ..Default::default()
    };
    let states = census(&p, &CensusOptions::default()).unwrap();
    let s = labelled(&states, "S02");
    let ctrl = StepControl::default();
    let fwd = sweep_branch(&s, SweepAxis::Gamma, 0.02, &ctrl).unwrap();
    assert_eq!(fwd.termination, Termination::Target);
    let back = sweep_branch(&fwd.last().state, SweepAxis::Gamma, 0.0, &ctrl).unwrap();
    assert_eq!(back.termination, Termination::Target);
    let end = &back.last().state;
    assert!(end.state.parameter_distance(&s.state) < 1e-6);
    assert!((end.mu - s.mu).norm() < 1e-6);
}

#[test]
fn linear_branches_meet_in_a_square_root_fold() {
    let states = census(&linear(0.0), &CensusOptions::default()).unwrap();
    let ctrl = StepControl::default();
    let branches: Vec<_> = ["S01", "S02"]
        .iter()
        .map(|l| sweep_branch(&labelled(&states, l), SweepAxis::Gamma, 0.5, &ctrl).unwrap())
        .collect();
    for b in &branches {
        assert!(matches!(b.termination, Termination::FoldSuspected { .. }), "{:?}", b.termination);
    }
    let fold = locate_fold(&branches[0], &branches[1]).unwrap();
    assert!((fold.exponent.unwrap() - 0.5).abs() < 0.02, "{:?}", fold.exponent);

    // Bisection oracle: largest gamma at which the lower branch still
    // solves and stays distinct from the upper one.
    let start = branches[0].last().state.clone();
    let exists = |g: f64| -> bool {
        let mut seed = start.state;
        seed.params = linear(g);
        match newton(&seed, &linear(g), &NewtonOptions::default(), Some(start.mu)) {
            Ok(s) => s.mu.im.abs() < 1e-8,
            Err(_) => false,
        }
    };
    let (mut lo, mut hi) = (branches[0].last().param - 1e-3, branches[0].last().param + 1e-3);
    assert!(exists(lo) && !exists(hi));
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if exists(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((fold.location - lo).abs() < 1e-4, "{} vs {}", fold.location, lo);

    let events = detect_events(&branches, &ctrl);
    let tangents: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Tangent).collect();
    assert_eq!(tangents.len(), 1, "{events:?}");
}
