//! Stationary states: Newton search on the phase-rotating fixed-point
//! condition and imaginary-time relaxation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{apply_pt, pt_residual, GaussianParams, PhysicalParams, VariationalState};
use crate::ode::{Dopri5, OdeOptions};
use crate::tdvp::{Flow, TdvpOptions, TimeMode};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
    pub tdvp: TdvpOptions,
    pub pt_threshold: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            fd_step: 1e-7,
            tdvp: TdvpOptions::default(),
            pt_threshold: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    PtSymmetric,
    PtBroken,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryState {
    pub state: VariationalState,
    pub mu: C64,
    pub e_mf: C64,
    pub converged_residual: f64,
    pub pt_residual: f64,
    pub symmetry: Symmetry,
    pub label: Option<String>,
    pub iterations: usize,
}

impl StationaryState {
    pub fn params(&self) -> &PhysicalParams {
        &self.state.params
    }
}

/// Newton iteration for `f(z) = phase(mu)`, `<Psi|Psi> = 1`, `Im gamma^1 = 0`.
struct NewtonProblem<'a> {
    flow: Flow,
    template: VariationalState,
    opts: &'a NewtonOptions,
}

impl NewtonProblem<'_> {
    fn n(&self) -> usize {
        self.flow.layout().dim()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let z = &x[..n];
        let mu = C64::new(x[n], x[n + 1]);
        let s = self.template.with_vector(self.flow.layout(), z);
        s.validate()?;
        let f = self.flow.velocity(&s)?.active(self.flow.layout());
        let ph = self.flow.phase_mode(mu);
        let mut r: Vec<f64> = f.iter().zip(&ph).map(|(a, b)| a - b).collect();
        r.push(s.norm()? - 1.0);
        r.push(z[self.flow.layout().im_gamma_index(0)]);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonNormalizable);
        }
        Ok(r)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let m = n + 2;
        let mut j = DMatrix::zeros(m, m);
        for c in 0..n {
            let h = self.opts.fd_step * x[c].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += h;
            xm[c] -= h;
            let fp = self.residual(&xp)?;
            let fm = self.residual(&xm)?;
            for r in 0..m {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        // d/dmu of -phase(mu)
        let ph_re = self.flow.phase_mode(C64::new(1.0, 0.0));
        let ph_im = self.flow.phase_mode(C64::new(0.0, 1.0));
        for r in 0..n {
            j[(r, n)] = -ph_re[r];
            j[(r, n + 1)] = -ph_im[r];
        }
        Ok(j)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Solves for a stationary state starting from `initial`, with `mu`
/// initialized from the energy of the initial guess unless given.
pub fn newton(
    initial: &VariationalState,
    params: &PhysicalParams,
    opts: &NewtonOptions,
    mu_guess: Option<C64>,
) -> Result<StationaryState> {
    let flow = Flow::new(*params, opts.tdvp, TimeMode::RealTime);
    let mut start = *initial;
    start.params = *params;
    let start = start.normalized()?.gauge_fixed();
    let mu0 = match mu_guess {
        Some(m) => m,
        None => flow.velocity(&start)?.energies.mu,
    };
    let problem = NewtonProblem {
        flow,
        template: start,
        opts,
    };
    let n = problem.n();
    let mut x = start.to_vector(problem.flow.layout());
    x.push(mu0.re);
    x.push(mu0.im);
    let mut r = problem.residual(&x)?;
    let mut res = inf_norm(&r);
    let mut iterations = 0;
    let mut stalled = 0;
    while res >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let j = problem.jacobian(&x)?;
        let rhs = DVector::from_iterator(n + 2, r.iter().map(|v| -v));
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        let svd = nalgebra::SVD::try_new(j, true, true, f64::EPSILON, 10_000).ok_or(Error::NoConvergence {
            iterations,
            residual: res,
        })?;
        let dx = svd
            .solve(&rhs, 1e-14 * svd.singular_values.max())
            .map_err(|e| Error::Precondition(e.to_string()))?;
        // Backtracking on the residual norm.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Ok(rt) = problem.residual(&trial) {
                let rn = inf_norm(&rt);
                if rn < res || alpha < 1e-3 {
                    stalled = if rn < 0.9 * res { 0 } else { stalled + 1 };
                    x = trial;
                    r = rt;
                    res = rn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted || stalled >= 8 {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
    }
    let state = problem.template.with_vector(problem.flow.layout(), &x[..n]);
    let mu = C64::new(x[n], x[n + 1]);
    finish(&state, params, opts, mu, res, iterations)
}

fn finish(
    state: &VariationalState,
    params: &PhysicalParams,
    opts: &NewtonOptions,
    mu: C64,
    residual: f64,
    iterations: usize,
) -> Result<StationaryState> {
    let state = state.canonical().gauge_fixed();
    let flow = Flow::new(*params, opts.tdvp, TimeMode::RealTime);
    let energies = flow.velocity(&state)?.energies;
    let pt = pt_residual(&state)?;
    let _ = mu;
    Ok(StationaryState {
        state,
        mu: energies.mu,
        e_mf: energies.e_mf,
        converged_residual: residual,
        pt_residual: pt,
        symmetry: if pt < opts.pt_threshold {
            Symmetry::PtSymmetric
        } else {
            Symmetry::PtBroken
        },
        label: None,
        iterations,
    })
}

pub fn find_fixed_point(initial: &VariationalState, params: &PhysicalParams) -> Result<StationaryState> {
    newton(initial, params, &NewtonOptions::default(), None)
}

/// Largest deviation of the velocity at `s` from a pure phase rotation.
pub fn fixed_point_defect(s: &StationaryState, opts: &TdvpOptions) -> Result<f64> {
    let flow = Flow::new(s.state.params, *opts, TimeMode::RealTime);
    let v = flow.velocity(&s.state)?;
    let f = v.active(flow.layout());
    let ph = flow.phase_mode(v.energies.mu);
    Ok(f.iter().zip(&ph).fold(0.0, |a, (x, y)| a.max((x - y).abs())))
}

#[derive(Clone, Copy, Debug)]
pub struct IteOptions {
    pub tau_max: f64,
    /// Stop when the non-phase part of the velocity is below this.
    pub tol: f64,
    pub ode: OdeOptions,
    pub newton: NewtonOptions,
    pub collapse_width: f64,
}

impl Default for IteOptions {
    fn default() -> Self {
        Self {
            tau_max: 200.0,
            tol: 1e-6,
            ode: OdeOptions {
                rtol: 1e-8,
                atol: 1e-9,
                ..Default::default()
            },
            newton: NewtonOptions::default(),
            collapse_width: 1e4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IteResult {
    pub state: StationaryState,
    /// `(tau, E_mf)` after every accepted step.
    pub trace: Vec<(f64, f64)>,
    pub polished: bool,
}

pub fn ite_ground_state(
    seed: &VariationalState,
    params: &PhysicalParams,
    tau_max: f64,
    tol: f64,
) -> Result<StationaryState> {
    let opts = IteOptions {
        tau_max,
        tol,
        ..Default::default()
    };
    Ok(ite_ground_state_with(seed, params, &opts)?.state)
}

/// Imaginary-time relaxation with renormalization after each accepted step,
/// followed by Newton polishing.
pub fn ite_ground_state_with(
    seed: &VariationalState,
    params: &PhysicalParams,
    opts: &IteOptions,
) -> Result<IteResult> {
    if params.gamma != 0.0 {
        return Err(Error::Precondition(
            "imaginary-time evolution requires gamma = 0".into(),
        ));
    }
    let flow = Flow::new(*params, opts.newton.tdvp, TimeMode::ImaginaryTime);
    let layout = *flow.layout();
    let mut template = *seed;
    template.params = *params;
    let template = template.normalized()?;
    let collapse = opts.collapse_width;
    let mut rhs = |_t: f64, z: &[f64]| -> Result<Vec<f64>> {
        let s = template.with_vector(&layout, z);
        s.validate()?;
        if max_width(&s) > collapse {
            return Err(Error::Collapse {
                max_width: max_width(&s),
            });
        }
        Ok(flow.velocity(&s)?.active(&layout))
    };
    let mut ode = Dopri5::new(&mut rhs, 0.0, template.to_vector(&layout), opts.ode)?;
    let mut trace = Vec::new();
    let mut last_e = f64::NAN;
    loop {
        let s = template.with_vector(&layout, &ode.y);
        let v = flow.velocity(&s)?;
        let e = v.energies.e_mf.re;
        trace.push((ode.t, e));
        let f = v.active(&layout);
        let ph = flow.phase_mode(v.energies.mu);
        let defect = f.iter().zip(&ph).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if defect < opts.tol {
            break;
        }
        if ode.t >= opts.tau_max {
            let slope = if trace.len() >= 2 {
                let (t0, e0) = trace[trace.len() - 2];
                (e - e0) / (ode.t - t0)
            } else {
                f64::NAN
            };
            return Err(Error::BudgetExhausted { tau: ode.t, slope });
        }
        last_e = e;
        match ode.step(&mut rhs, opts.tau_max) {
            Ok(_) => {}
            Err(Error::StepUnderflow { .. }) => {
                let s = template.with_vector(&layout, &ode.y);
                return Err(Error::Collapse {
                    max_width: max_width(&s),
                });
            }
            Err(e) => return Err(e),
        }
        let s = template.with_vector(&layout, &ode.y).normalized()?;
        if max_width(&s) > collapse {
            return Err(Error::Collapse {
                max_width: max_width(&s),
            });
        }
        ode.reset(&mut rhs, s.to_vector(&layout))?;
    }
    let _ = last_e;
    let relaxed = template.with_vector(&layout, &ode.y);
    let (state, polished) = match newton(&relaxed, params, &opts.newton, None) {
        Ok(s) => (s, true),
        Err(_) => {
            let mu = flow.velocity(&relaxed)?.energies.mu;
            (finish(&relaxed, params, &opts.newton, mu, f64::NAN, 0)?, false)
        }
    };
    Ok(IteResult {
        state,
        trace,
        polished,
    })
}

pub(crate) fn max_width(s: &VariationalState) -> f64 {
    s.g.iter()
        .flat_map(|g| [g.a_xx.re, g.a_yy.re, g.a_zz.re])
        .fold(0.0, f64::max)
}

/// Harmonic approximation of one well: `a_i = omega_i / 2`.
pub fn harmonic_widths(params: &PhysicalParams) -> [f64; 3] {
    params.well_frequencies().map(|w| 0.5 * w)
}

/// A seed with one packet per well, populations `weights` and relative
/// phase `phase` of the right packet.
pub fn seed_state(params: &PhysicalParams, weights: [f64; 2], phase: f64) -> Result<VariationalState> {
    let a = harmonic_widths(params);
    let half = 0.5 * params.l;
    let mut g = [
        GaussianParams::diagonal(a, -half, C64::new(0.0, 0.0)),
        GaussianParams::diagonal(a, half, C64::new(0.0, -phase)),
    ];
    for (gk, w) in g.iter_mut().zip(weights) {
        gk.gamma.re = gk.normalizing_gamma_re(w)?;
    }
    VariationalState::new(g[0], g[1], *params).normalized()
}

/// Symmetric, antisymmetric and left/right-weighted seeds in and out of
/// phase, plus quarter-phase seeds for the gain-loss case.
pub fn seed_library(params: &PhysicalParams) -> Vec<VariationalState> {
    use std::f64::consts::PI;
    let mut out = Vec::new();
    let phases = [0.0, PI, 0.5 * PI, -0.5 * PI];
    for left in [0.5, 0.65, 0.8, 0.92, 0.35, 0.2, 0.08] {
        for ph in phases {
            if let Ok(s) = seed_state(params, [left, 1.0 - left], ph) {
                out.push(s);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct CensusOptions {
    pub newton: NewtonOptions,
    /// Wavefunction distance below which two states are the same.
    pub dedupe: f64,
    /// Energy window above the lowest state.
    pub window: f64,
    pub jobs: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            dedupe: 1e-4,
            window: 5.0,
            jobs: 1,
        }
    }
}

/// Whether each packet sits in its own well.
fn is_double_well_state(s: &VariationalState) -> bool {
    let half = 0.5 * s.params.l;
    (s.g[0].q_x + half).abs() < 0.5 * half && (s.g[1].q_x - half).abs() < 0.5 * half
}

/// Runs the seed library through Newton and returns the distinct states,
/// labelled. At `gamma = 0` mirror partners count once.
pub fn census(params: &PhysicalParams, opts: &CensusOptions) -> Result<Vec<StationaryState>> {
    let seeds = seed_library(params);
    let results = run_parallel(&seeds, opts.jobs, |s| newton(s, params, &opts.newton, None));
    let mut found: Vec<StationaryState> = Vec::new();
    for r in results.into_iter().flatten() {
        if !is_double_well_state(&r.state) {
            continue;
        }
        let mut dup = false;
        for f in &found {
            let d = f.state.wavefunction_distance(&r.state)?;
            let mirrored = params.gamma == 0.0
                && apply_pt(&f.state).canonical().gauge_fixed().wavefunction_distance(&r.state)? < opts.dedupe;
            if d < opts.dedupe || mirrored {
                dup = true;
                break;
            }
        }
        if !dup {
            found.push(r);
        }
    }
    if found.is_empty() {
        return Ok(found);
    }
    if params.gamma == 0.0 {
        // Keep the left-heavy member of each mirror pair.
        for s in found.iter_mut().filter(|s| s.symmetry == Symmetry::PtBroken) {
            let p = s.state.populations()?;
            if p[0] < p[1] {
                let image = apply_pt(&s.state).canonical().gauge_fixed();
                *s = newton(&image, params, &opts.newton, Some(s.mu.conj()))?;
            }
        }
    }
    let e_min = found.iter().map(|s| s.e_mf.re).fold(f64::INFINITY, f64::min);
    found.retain(|s| s.e_mf.re <= e_min + opts.window);
    label_states(&mut found, params.gamma == 0.0, opts)?;
    Ok(found)
}

/// Adds the PT image of every broken state that is not yet present.
pub fn complete_pt_pairs(states: &mut Vec<StationaryState>, opts: &NewtonOptions) -> Result<()> {
    let mut extra = Vec::new();
    for s in states.iter().filter(|s| s.symmetry == Symmetry::PtBroken) {
        let image = apply_pt(&s.state).canonical().gauge_fixed();
        let present = states
            .iter()
            .chain(extra.iter())
            .any(|o: &StationaryState| o.state.wavefunction_distance(&image).map(|d| d < 1e-4).unwrap_or(false));
        if !present {
            extra.push(newton(&image, &s.state.params, opts, Some(s.mu.conj()))?);
        }
    }
    states.extend(extra);
    Ok(())
}

/// Labels states `S_{0,1} < S_{0,2}` (symmetric, by `Re E_mf`) and
/// `S_{1,1} < S_{1,2}` (broken), priming the member of each broken pair
/// with negative `Im E_mf` (at `gamma = 0`, the right-heavy member).
fn label_states(states: &mut Vec<StationaryState>, hermitian: bool, opts: &CensusOptions) -> Result<()> {
    if !hermitian {
        complete_pt_pairs(states, &opts.newton)?;
    }
    let key = |s: &StationaryState| s.e_mf.re;
    let mut sym: Vec<usize> = (0..states.len()).filter(|&i| states[i].symmetry == Symmetry::PtSymmetric).collect();
    sym.sort_by(|&a, &b| key(&states[a]).total_cmp(&key(&states[b])));
    for (rank, &i) in sym.iter().enumerate() {
        states[i].label = Some(format!("S0{}", rank + 1));
    }
    let is_unprimed = |s: &StationaryState| -> Result<bool> {
        if hermitian || s.e_mf.im.abs() < 1e-12 {
            let p = s.state.populations()?;
            Ok(p[0] >= p[1])
        } else {
            Ok(s.e_mf.im > 0.0)
        }
    };
    let mut broken = Vec::new();
    let mut primed = Vec::new();
    for i in 0..states.len() {
        if states[i].symmetry == Symmetry::PtBroken {
            if is_unprimed(&states[i])? {
                broken.push(i);
            } else {
                primed.push(i);
            }
        }
    }
    broken.sort_by(|&a, &b| key(&states[a]).total_cmp(&key(&states[b])));
    for (rank, &i) in broken.iter().enumerate() {
        states[i].label = Some(format!("S1{}", rank + 1));
        let image = apply_pt(&states[i].state).canonical().gauge_fixed();
        for &j in &primed {
            if states[j].state.wavefunction_distance(&image)? < 1e-3 {
                states[j].label = Some(format!("S1{}'", rank + 1));
            }
        }
    }
    states.sort_by(|a, b| a.label.cmp(&b.label).then(key(a).total_cmp(&key(b))));
    Ok(())
}

/// Maps `f` over `items` on up to `jobs` scoped threads, preserving order.
pub fn run_parallel<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
