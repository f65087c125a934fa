use num_complex::Complex64 as C64;
use proptest::prelude::*;
use ptbec_core::dynamics::{
    absorption_image, classify_run, evolve, extrema, perturb, EvolveOptions, LineOfSight, Observables, RunClass,
    RunTermination, Trajectory,
};
use ptbec_core::model::{apply_pt, ParamLayout, PhysicalParams};
use ptbec_core::stationary::{find_fixed_point, seed_state};

fn params(na: f64, gamma: f64) -> PhysicalParams {
    PhysicalParams {
        na,
        gamma,
        ..Default::default()
    }
}

fn opts(samples: usize) -> EvolveOptions {
    EvolveOptions {
        samples,
        ..Default::default()
    }
}

#[test]
fn hermitian_run_conserves_norm_and_energy() {
    let p = params(-0.01, 0.0);
    let s = find_fixed_point(&seed_state(&p, [0.5, 0.5], 0.0).unwrap(), &p).unwrap();
    let kicked = perturb(&s.state, &ParamLayout::default(), 1e-3, 1);
    let traj = evolve(&kicked, &p, 2.0, &opts(50)).unwrap();
    assert_eq!(traj.termination, RunTermination::Completed);
    let (n0, e0) = (traj.observables[0].norm, traj.observables[0].e_mf);
    for o in &traj.observables {
        assert!((o.norm - n0).abs() < 1e-6 * n0, "norm drift {}", o.norm - n0);
        assert!((o.e_mf - e0).norm() < 1e-6 * e0.norm(), "energy drift {}", (o.e_mf - e0).norm());
    }
}

#[test]
fn stationary_state_stays_put() {
    let p = params(-0.01, 0.02);
    let s = find_fixed_point(&seed_state(&p, [0.5, 0.5], std::f64::consts::PI).unwrap(), &p).unwrap();
    let traj = evolve(&s.state, &p, 2.0, &opts(40)).unwrap();
    assert_eq!(classify_run(&traj), RunClass::Stationary);
    let last = traj.observables.last().unwrap();
    assert!((last.norm - 1.0).abs() < 1e-6);
}

#[test]
fn pt_reversal_retraces_the_trajectory() {
    // With a PT-symmetric generator, PT psi(T) evolved for T returns PT psi(0).
    let p = params(-0.01, 0.02);
    let s = find_fixed_point(&seed_state(&p, [0.5, 0.5], 0.0).unwrap(), &p).unwrap();
    let start = perturb(&s.state, &ParamLayout::default(), 1e-2, 3);
    let fwd = evolve(&start, &p, 1.0, &opts(10)).unwrap();
    let back = evolve(&apply_pt(fwd.states.last().unwrap()), &p, 1.0, &opts(10)).unwrap();
    let d = back
        .states
        .last()
        .unwrap()
        .wavefunction_distance(&apply_pt(&start))
        .unwrap();
    assert!(d < 1e-6, "distance {d}");
}

#[test]
fn pt_conjugate_initial_states_have_mirrored_norm_growth() {
    let p = params(-0.01, 0.02);
    let s = find_fixed_point(&seed_state(&p, [0.5, 0.5], 0.0).unwrap(), &p).unwrap();
    let a = perturb(&s.state, &ParamLayout::default(), 1e-2, 5);
    let b = apply_pt(&a);
    let ta = evolve(&a, &p, 0.2, &opts(4)).unwrap();
    let tb = evolve(&b, &p, 0.2, &opts(4)).unwrap();
    let da = ta.observables[1].norm - ta.observables[0].norm;
    let db = tb.observables[1].norm - tb.observables[0].norm;
    assert!(da * db < 0.0, "{da} {db}");
}

#[test]
fn absorption_image_carries_the_norm_and_the_mirror_symmetry() {
    let p = params(-0.01, 0.0);
    let s = find_fixed_point(&seed_state(&p, [0.5, 0.5], 0.0).unwrap(), &p).unwrap();
    let img = absorption_image(&s.state, [-3.0, 3.0, -8.0, 8.0], (256, 256), LineOfSight::Z).unwrap();
    assert!((img.total() - 1.0).abs() < 1e-6, "{}", img.total());
    let (l, r) = img.halves();
    assert!((l - r).abs() < 1e-6, "{l} {r}");
}

fn synthetic(signal: impl Fn(f64) -> f64, termination: RunTermination, stable: Option<bool>) -> Trajectory {
    let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
    let observables = times
        .iter()
        .map(|&t| {
            let z = signal(t);
            Observables {
                norm: 1.0,
                i1: 0.5 * (1.0 + z),
                i2: 0.5 * (1.0 - z),
                e_mf: C64::new(-40.0, 0.0),
                pt_residual: 0.0,
            }
        })
        .collect();
    let state = seed_state(&params(0.0, 0.0), [0.5, 0.5], 0.0).unwrap();
    Trajectory {
        states: vec![state; times.len()],
        times,
        observables,
        termination,
        initially_stable: stable,
    }
}

#[test]
fn synthetic_runs_are_classified() {
    let osc = |t: f64| 0.5 * (2.0 * t).sin();
    assert_eq!(classify_run(&synthetic(|_| 0.0, RunTermination::Completed, Some(true))), RunClass::Stationary);
    assert_eq!(classify_run(&synthetic(osc, RunTermination::Completed, Some(true))), RunClass::Oscillating);
    assert_eq!(
        classify_run(&synthetic(osc, RunTermination::Completed, Some(false))),
        RunClass::DynamicallyStabilized
    );
    assert_eq!(
        classify_run(&synthetic(|t| 0.01 * t, RunTermination::Collapsed { t: 20.0 }, Some(false))),
        RunClass::Collapsing
    );
    // Swings below the threshold do not count.
    let small = |t: f64| 0.05 * (2.0 * t).sin();
    assert_eq!(classify_run(&synthetic(small, RunTermination::Completed, None)), RunClass::Stationary);
}

proptest! {
    #[test]
    fn extrema_alternate_and_exceed_hysteresis(signal in prop::collection::vec(-1.0f64..1.0, 2..200), h in 0.01f64..0.5) {
        let ext = extrema(&signal, h);
        for w in ext.windows(2) {
            prop_assert!(w[0] < w[1]);
            prop_assert!((signal[w[0]] - signal[w[1]]).abs() > h);
        }
        for w in ext.windows(3) {
            let up = signal[w[1]] > signal[w[0]];
            prop_assert_eq!(up, signal[w[1]] > signal[w[2]]);
        }
    }

    #[test]
    fn perturbation_is_reproducible_and_bounded(seed in any::<u64>(), rel in 1e-8f64..1e-2) {
        let p = params(-0.01, 0.0);
        let s = seed_state(&p, [0.5, 0.5], 0.0).unwrap();
        let layout = ParamLayout::default();
        let a = perturb(&s, &layout, rel, seed);
        let b = perturb(&s, &layout, rel, seed);
        prop_assert_eq!(a.to_components(), b.to_components());
        for (x, y) in s.to_vector(&layout).iter().zip(a.to_vector(&layout)) {
            prop_assert!((x - y).abs() <= rel * x.abs().max(1.0));
        }
    }
}
