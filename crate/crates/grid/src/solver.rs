//! Split-step propagation in imaginary and real time.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::operator::GpeOperator;

#[derive(Clone, Debug)]
pub struct GridIteOptions {
    /// Successive imaginary time steps; each stage runs to convergence.
    pub dt_schedule: Vec<f64>,
    /// Relative energy change between checks that counts as converged.
    pub tol: f64,
    pub check_every: usize,
    pub max_steps_per_stage: usize,
    pub boundary_threshold: f64,
    /// Fraction of the norm in a single cell that signals collapse.
    pub collapse_weight: f64,
}

impl Default for GridIteOptions {
    fn default() -> Self {
        Self {
            dt_schedule: vec![1e-2, 3e-3, 1e-3],
            tol: 1e-10,
            check_every: 10,
            max_steps_per_stage: 20_000,
            boundary_threshold: 1e-8,
            collapse_weight: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridIteResult {
    pub field: GridField,
    pub mu: f64,
    pub e_mf: f64,
    pub tau: f64,
    pub steps: usize,
}

fn peak_weight(field: &GridField) -> f64 {
    let peak = field.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    peak * field.grid.cell_volume() / field.norm()
}

fn check_domain(field: &GridField, threshold: f64) -> Result<()> {
    let ratio = field.boundary_ratio();
    if ratio > threshold {
        return Err(Error::DomainTooSmall { ratio });
    }
    Ok(())
}

/// One Strang step `exp(-V h/2) exp(-T h) exp(-V h/2)` with `h = dt` in real
/// time or `h = -i dt` in imaginary time. With `lagged`, the mean field of
/// the incoming density serves both potential half steps; this keeps the
/// fixed points and saves two transforms per step.
fn strang_step(op: &GpeOperator, psi: &mut [C64], h: C64, lagged: bool) {
    let density = |psi: &[C64]| psi.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>();
    let mut mf = (!op.is_linear()).then(|| op.mean_field(&density(psi)));
    let half = |psi: &mut [C64], mf: &Option<Vec<f64>>| {
        for (i, v) in psi.iter_mut().enumerate() {
            let mut pot = op.potential[i];
            if let Some(m) = mf {
                pot += m[i];
            }
            *v *= (-C64::i() * pot * h * 0.5).exp();
        }
    };
    half(psi, &mf);
    op.fft().forward(psi);
    for (v, k) in psi.iter_mut().zip(&op.kinetic) {
        *v *= (-C64::i() * k * h).exp();
    }
    op.fft().inverse(psi);
    if !lagged && mf.is_some() {
        mf = Some(op.mean_field(&density(psi)));
    }
    half(psi, &mf);
}

/// Imaginary-time ground state with renormalization after every step.
pub fn grid_ite(op: &GpeOperator, init: &GridField, opts: &GridIteOptions) -> Result<GridIteResult> {
    if !op.is_hermitian() {
        return Err(Error::Precondition("imaginary time needs a real potential (gamma = 0)".into()));
    }
    if init.grid != op.grid {
        return Err(Error::Precondition("field and operator grids differ".into()));
    }
    check_domain(init, opts.boundary_threshold)?;
    let mut field = init.clone();
    field.normalize_to(1.0);
    let mut tau = 0.0;
    let mut steps = 0;
    let mut energy = op.energies(&field).e_mf.re;
    for &dt in &opts.dt_schedule {
        let h = C64::new(0.0, -dt);
        let mut converged = false;
        let mut change = f64::INFINITY;
        for k in 1..=opts.max_steps_per_stage {
            strang_step(op, &mut field.values, h, true);
            field.normalize_to(1.0);
            tau += dt;
            steps += 1;
            if k % opts.check_every == 0 {
                let w = peak_weight(&field);
                if w > opts.collapse_weight || !w.is_finite() {
                    return Err(Error::Collapse { tau, peak_weight: w });
                }
                let e = op.energies(&field).e_mf.re;
                change = ((e - energy) / e).abs();
                energy = e;
                if change < opts.tol {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::NoConvergence { steps, change });
        }
    }
    check_domain(&field, opts.boundary_threshold)?;
    let en = op.energies(&field);
    Ok(GridIteResult {
        field,
        mu: en.mu.re,
        e_mf: en.e_mf.re,
        tau,
        steps,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GridEvolveOptions {
    pub dt: f64,
    /// Record every this many steps.
    pub record_every: usize,
    pub boundary_threshold: f64,
    pub collapse_weight: f64,
}

impl Default for GridEvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            record_every: 10,
            boundary_threshold: 1e-8,
            collapse_weight: 0.1,
        }
    }
}

impl GridEvolveOptions {
    /// Largest step keeping the fastest kinetic phase per step below `pi`.
    pub fn stable_dt(op: &GpeOperator) -> f64 {
        std::f64::consts::PI / op.kinetic.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridObservables {
    pub t: f64,
    pub norm: f64,
    pub i1: f64,
    pub i2: f64,
    pub e_mf: C64,
}

impl GridObservables {
    pub fn of(op: &GpeOperator, field: &GridField, t: f64) -> Self {
        let [i1, i2] = field.populations();
        Self {
            t,
            norm: field.norm(),
            i1,
            i2,
            e_mf: op.energies(field).e_mf,
        }
    }
}

/// Real-time split-step propagation; the norm is not renormalized.
pub fn grid_evolve(
    op: &GpeOperator,
    init: &GridField,
    t_end: f64,
    opts: &GridEvolveOptions,
) -> Result<(GridField, Vec<GridObservables>)> {
    if init.grid != op.grid {
        return Err(Error::Precondition("field and operator grids differ".into()));
    }
    let limit = GridEvolveOptions::stable_dt(op);
    if opts.dt > limit {
        return Err(Error::Precondition(format!("dt {} exceeds the kinetic bound {limit:.3e}", opts.dt)));
    }
    check_domain(init, opts.boundary_threshold)?;
    let steps = (t_end / opts.dt).round() as usize;
    let mut field = init.clone();
    let mut out = vec![GridObservables::of(op, &field, 0.0)];
    for k in 1..=steps {
        strang_step(op, &mut field.values, C64::new(opts.dt, 0.0), false);
        if k % opts.record_every == 0 || k == steps {
            let w = peak_weight(&field);
            if w > opts.collapse_weight || !w.is_finite() {
                return Err(Error::Collapse {
                    tau: k as f64 * opts.dt,
                    peak_weight: w,
                });
            }
            out.push(GridObservables::of(op, &field, k as f64 * opts.dt));
        }
    }
    check_domain(&field, opts.boundary_threshold)?;
    Ok((field, out))
}
