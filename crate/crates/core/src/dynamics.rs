//! Real-time propagation of the variational equations, observables,
//! absorption images and regime classification.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gauss3;
use crate::model::{pt_residual, PhysicalParams, VariationalState};
use crate::ode::{Dopri5, OdeOptions};
use crate::stationary::max_width;
use crate::tdvp::{Flow, TdvpOptions, TimeMode};

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub ode: OdeOptions,
    pub tdvp: TdvpOptions,
    /// Output samples, evenly spaced on `[0, t_end]` (plus the initial one).
    pub samples: usize,
    pub collapse_width: f64,
    pub collapse_step: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            tdvp: TdvpOptions::default(),
            samples: 2000,
            collapse_width: 1e4,
            collapse_step: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RunTermination {
    Completed,
    Collapsed { t: f64 },
    StepUnderflow { t: f64, h: f64, max_width: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Observables {
    pub norm: f64,
    pub i1: f64,
    pub i2: f64,
    pub e_mf: C64,
    pub pt_residual: f64,
}

impl Observables {
    pub fn of(state: &VariationalState, e_mf: C64) -> Result<Self> {
        let [i1, i2] = state.populations()?;
        Ok(Self {
            norm: state.norm()?,
            i1,
            i2,
            e_mf,
            pt_residual: pt_residual(state)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<VariationalState>,
    pub observables: Vec<Observables>,
    pub termination: RunTermination,
    /// Linear stability verdict of the initial state, when known.
    pub initially_stable: Option<bool>,
}

/// Adds a relative perturbation of size `rel` to every active component,
/// reproducibly from `seed`.
pub fn perturb(state: &VariationalState, layout: &crate::model::ParamLayout, rel: f64, seed: u64) -> VariationalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = state
        .to_vector(layout)
        .into_iter()
        .map(|x| x + rel * x.abs().max(1.0) * rng.gen_range(-1.0..1.0))
        .collect();
    state.with_vector(layout, &v)
}

pub fn evolve(
    initial: &VariationalState,
    params: &PhysicalParams,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if t_end < 0.0 || opts.samples == 0 {
        return Err(Error::InvalidParams("t_end must be >= 0 and samples > 0".into()));
    }
    let mut start = *initial;
    start.params = *params;
    start.validate()?;
    start.norm()?;
    let flow = Flow::new(*params, opts.tdvp, TimeMode::RealTime);
    let layout = *flow.layout();
    let mut rhs = |_t: f64, z: &[f64]| -> Result<Vec<f64>> {
        let s = start.with_vector(&layout, z);
        s.validate()?;
        Ok(flow.velocity(&s)?.active(&layout))
    };
    let mut ode = Dopri5::new(&mut rhs, 0.0, start.to_vector(&layout), opts.ode)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(opts.samples + 1),
        states: Vec::with_capacity(opts.samples + 1),
        observables: Vec::with_capacity(opts.samples + 1),
        termination: RunTermination::Completed,
        initially_stable: None,
    };
    let record = |traj: &mut Trajectory, t: f64, z: &[f64]| -> Result<()> {
        let s = start.with_vector(&layout, z);
        let e = flow.velocity(&s)?.energies.e_mf;
        traj.times.push(t);
        traj.observables.push(Observables::of(&s, e)?);
        traj.states.push(s);
        Ok(())
    };
    record(&mut traj, 0.0, &ode.y)?;
    for k in 1..=opts.samples {
        let t_out = t_end * k as f64 / opts.samples as f64;
        while ode.t < t_out {
            match ode.step(&mut rhs, t_out) {
                Ok(h) => {
                    let w = max_width(&start.with_vector(&layout, &ode.y));
                    if w > opts.collapse_width && h < opts.collapse_step {
                        traj.termination = RunTermination::Collapsed { t: ode.t };
                        return Ok(traj);
                    }
                }
                Err(Error::StepUnderflow { t, h }) => {
                    let w = max_width(&start.with_vector(&layout, &ode.y));
                    traj.termination = if w > opts.collapse_width {
                        RunTermination::Collapsed { t }
                    } else {
                        RunTermination::StepUnderflow { t, h, max_width: w }
                    };
                    return Ok(traj);
                }
                Err(e) => return Err(e),
            }
        }
        record(&mut traj, ode.t, &ode.y)?;
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineOfSight {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorptionImage {
    /// `[u_min, u_max, v_min, v_max]` of the image plane; `(u, v)` are the
    /// remaining axes in `x, y, z` order.
    pub extent: [f64; 4],
    pub resolution: (usize, usize),
    pub line_of_sight: LineOfSight,
    /// Row-major, `values[iv * nu + iu]`, sampled at pixel centres.
    pub values: Vec<f64>,
}

impl AbsorptionImage {
    pub fn pixel_area(&self) -> f64 {
        let [u0, u1, v0, v1] = self.extent;
        (u1 - u0) * (v1 - v0) / (self.resolution.0 * self.resolution.1) as f64
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pixel_area()
    }

    pub fn at(&self, iu: usize, iv: usize) -> f64 {
        self.values[iv * self.resolution.0 + iu]
    }

    /// Weights of the `u < 0` and `u > 0` halves.
    pub fn halves(&self) -> (f64, f64) {
        let (nu, nv) = self.resolution;
        let [u0, u1, ..] = self.extent;
        let du = (u1 - u0) / nu as f64;
        let (mut l, mut r) = (0.0, 0.0);
        for iv in 0..nv {
            for iu in 0..nu {
                let u = u0 + (iu as f64 + 0.5) * du;
                if u < 0.0 {
                    l += self.at(iu, iv);
                } else {
                    r += self.at(iu, iv);
                }
            }
        }
        (l * self.pixel_area(), r * self.pixel_area())
    }
}

/// Column density `int |Psi|^2` along the line of sight, evaluated in closed
/// form at pixel centres.
pub fn absorption_image(
    state: &VariationalState,
    extent: [f64; 4],
    resolution: (usize, usize),
    line_of_sight: LineOfSight,
) -> Result<AbsorptionImage> {
    let h = state.holomorphic();
    let mut products = Vec::with_capacity(4);
    for j in 0..2 {
        for k in 0..2 {
            products.push(h[j].conj().mul(&h[k]));
        }
    }
    let (nu, nv) = resolution;
    let [u0, u1, v0, v1] = extent;
    let (du, dv) = ((u1 - u0) / nu as f64, (v1 - v0) / nv as f64);
    let column = |g: &Gauss3, u: f64, v: f64| match line_of_sight {
        LineOfSight::X => g.integrate_x(u, v),
        LineOfSight::Y => g.integrate_y(u, v),
        LineOfSight::Z => g.integrate_z(u, v),
    };
    let mut values = Vec::with_capacity(nu * nv);
    for iv in 0..nv {
        let v = v0 + (iv as f64 + 0.5) * dv;
        for iu in 0..nu {
            let u = u0 + (iu as f64 + 0.5) * du;
            let mut s = 0.0;
            for g in &products {
                s += column(g, u, v)?.re;
            }
            values.push(s.max(0.0));
        }
    }
    Ok(AbsorptionImage {
        extent,
        resolution,
        line_of_sight,
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    Stationary,
    Oscillating,
    DynamicallyStabilized,
    Collapsing,
}

/// Extrema of `signal` separated by at least `hysteresis` in value.
pub fn extrema(signal: &[f64], hysteresis: f64) -> Vec<usize> {
    let mut out = Vec::new();
    if signal.is_empty() {
        return out;
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut rising: Option<bool> = None;
    for (i, &v) in signal.iter().enumerate() {
        match rising {
            None => {
                if v > signal[lo] + hysteresis {
                    rising = Some(true);
                    hi = i;
                } else if v < signal[hi] - hysteresis {
                    rising = Some(false);
                    lo = i;
                }
                if v < signal[lo] {
                    lo = i;
                }
                if v > signal[hi] {
                    hi = i;
                }
            }
            Some(true) => {
                if v > signal[hi] {
                    hi = i;
                } else if v < signal[hi] - hysteresis {
                    out.push(hi);
                    rising = Some(false);
                    lo = i;
                }
            }
            Some(false) => {
                if v < signal[lo] {
                    lo = i;
                } else if v > signal[lo] + hysteresis {
                    out.push(lo);
                    rising = Some(true);
                    hi = i;
                }
            }
        }
    }
    out
}

/// Minimum swing of the imbalance counted as an extremum: moving 10% of the
/// norm between the wells changes `(I1 - I2) / norm` by 0.2.
pub const SWING: f64 = 0.2;

/// Relative population imbalance `(I1 - I2) / norm`.
pub fn imbalance(traj: &Trajectory) -> Vec<f64> {
    traj.observables.iter().map(|o| (o.i1 - o.i2) / o.norm).collect()
}

/// Number of full oscillation periods of the population imbalance with
/// exchanges above 10% of the norm.
pub fn oscillation_periods(traj: &Trajectory) -> f64 {
    let ext = extrema(&imbalance(traj), SWING);
    ext.len().saturating_sub(1) as f64 / 2.0
}

/// Mean period of the imbalance oscillation, from consecutive maxima and
/// minima.
pub fn oscillation_period(traj: &Trajectory) -> Option<f64> {
    let ext = extrema(&imbalance(traj), SWING);
    if ext.len() < 3 {
        return None;
    }
    let span = traj.times[ext[ext.len() - 1]] - traj.times[ext[0]];
    Some(2.0 * span / (ext.len() - 1) as f64)
}

pub fn classify_run(traj: &Trajectory) -> RunClass {
    let obs = &traj.observables;
    let collapsed = matches!(traj.termination, RunTermination::Collapsed { .. });
    let variation = |f: &dyn Fn(&Observables) -> f64| {
        let (lo, hi) = obs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    };
    let scale = obs.first().map(|o| o.norm.abs().max(1e-300)).unwrap_or(1.0);
    let quiet = variation(&|o| o.norm) < 1e-3 * scale
        && variation(&|o| o.i1) < 1e-3 * scale
        && variation(&|o| o.i2) < 1e-3 * scale
        && variation(&|o| o.e_mf.re) < 1e-3 * (1.0 + obs[0].e_mf.re.abs());
    if quiet && !collapsed {
        return RunClass::Stationary;
    }
    let periods = oscillation_periods(traj);
    if traj.initially_stable == Some(false) && periods >= 3.0 {
        return RunClass::DynamicallyStabilized;
    }
    if collapsed {
        return RunClass::Collapsing;
    }
    if extrema(&imbalance(traj), SWING).len() >= 2 {
        return RunClass::Oscillating;
    }
    RunClass::Stationary
}
