//! McLachlan equations of motion for the two-Gaussian ansatz.
//!
//! The least-squares problem `min |i phi - H Psi|` is posed in the
//! holomorphic coordinates `(A, b, c)` of each packet, where every tangent
//! vector is a monomial times the packet. The resulting complex Gram system
//! is solved with diagonal scaling and Tikhonov regularization, and the
//! holomorphic velocities are mapped back to `(Re A, Im A, q, p, gamma)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    ddi_potential_at, kinetic_terms, AlgebraOptions, Assembly, DdiCache, Energies, Gauss3,
    MONOMIALS, N_MONO,
};
use crate::model::{
    comp, external_potential, GaussianParams, ParamLayout, PhysicalParams, VariationalState,
    COMPONENTS_PER_GAUSSIAN,
};
use crate::quadrature::composite_gl;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    RealTime,
    ImaginaryTime,
}

#[derive(Clone, Copy, Debug)]
pub struct TdvpOptions {
    pub algebra: AlgebraOptions,
    pub layout: ParamLayout,
    /// Condition number of the scaled Gram matrix above which assembly fails.
    pub max_condition: f64,
    /// Tikhonov shift relative to `trace(G) / dim`.
    pub regularization: f64,
}

impl Default for TdvpOptions {
    fn default() -> Self {
        Self {
            algebra: AlgebraOptions::default(),
            layout: ParamLayout::default(),
            max_condition: 1e14,
            regularization: 1e-12,
        }
    }
}

/// Active holomorphic coordinates of one packet (indices into [`MONOMIALS`]).
fn holomorphic_dirs(layout: &ParamLayout) -> &'static [usize] {
    if layout.couple_xz {
        &[0, 1, 2, 3, 4, 5, 6]
    } else {
        &[0, 1, 2, 4, 5, 6]
    }
}

/// The assembled least-squares system at one state.
#[derive(Clone, Debug)]
pub struct EomSystem {
    /// `<d_a Psi | d_b Psi>` over the active holomorphic directions.
    pub gram: DMatrix<C64>,
    /// `<d_a Psi | H Psi>`.
    pub rhs: DVector<C64>,
    /// Free components of the 32-component state record.
    pub active_map: Vec<usize>,
    /// `(packet, monomial)` of each row.
    pub directions: Vec<(usize, usize)>,
    pub energies: Energies,
    pub norm: f64,
    /// Condition number of the diagonally scaled Gram matrix.
    pub condition: f64,
}

impl EomSystem {
    pub fn assemble(
        state: &VariationalState,
        opts: &TdvpOptions,
        cache: Option<&DdiCache>,
    ) -> Result<Self> {
        let asm = Assembly::compute(state, &opts.algebra, cache)?;
        let dirs = holomorphic_dirs(&opts.layout);
        let directions: Vec<(usize, usize)> = (0..opts.layout.active_gaussians())
            .flat_map(|l| dirs.iter().map(move |&a| (l, a)))
            .collect();
        let n = directions.len();
        let mut gram = DMatrix::from_element(n, n, ZERO);
        let mut rhs = DVector::from_element(n, ZERO);
        for (i, &(l, a)) in directions.iter().enumerate() {
            let (ca, ea) = MONOMIALS[a];
            for (j, &(k, b)) in directions.iter().enumerate() {
                let (cb, eb) = MONOMIALS[b];
                let m = &asm.pair_moments[l][k];
                gram[(i, j)] = ca * cb * m.integral(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]);
            }
            let mut h = ZERO;
            for k in 0..2 {
                h += asm.kinetic[l][k][a] + asm.external[l][k][a] + asm.contact[l][k][a] + asm.ddi[l][k][a];
            }
            rhs[i] = h;
        }
        // Hermitian by construction up to rounding.
        for i in 0..n {
            gram[(i, i)].im = 0.0;
            for j in 0..i {
                let v = 0.5 * (gram[(i, j)] + gram[(j, i)].conj());
                gram[(i, j)] = v;
                gram[(j, i)] = v.conj();
            }
        }
        let scaled = scaled_gram(&gram);
        let eig = scaled.clone().symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= opts.max_condition) {
            return Err(Error::SingularGram { condition });
        }
        Ok(Self {
            gram,
            rhs,
            active_map: opts.layout.active_map(),
            directions,
            energies: asm.energies(),
            norm: asm.norm(),
            condition,
        })
    }

    /// Holomorphic velocity `y'` solving `G y' = -i rhs` (real time) or
    /// `G y' = -rhs` (imaginary time).
    pub fn solve(&self, mode: TimeMode, regularization: f64) -> Result<DVector<C64>> {
        let n = self.gram.nrows();
        let d: Vec<f64> = (0..n).map(|i| self.gram[(i, i)].re.sqrt()).collect();
        let mut s = scaled_gram(&self.gram);
        let lambda = regularization * s.trace().re / n as f64;
        for i in 0..n {
            s[(i, i)] += lambda;
        }
        let factor = match mode {
            TimeMode::RealTime => -I,
            TimeMode::ImaginaryTime => C64::new(-1.0, 0.0),
        };
        let b = DVector::from_iterator(n, (0..n).map(|i| factor * self.rhs[i] / d[i]));
        let chol = s.cholesky().ok_or(Error::SingularGram {
            condition: f64::INFINITY,
        })?;
        let x = chol.solve(&b);
        Ok(DVector::from_iterator(n, (0..n).map(|i| x[i] / d[i])))
    }

    /// `|i phi(y') - H Psi|^2 - |H Psi|^2` for the tangent vector `y'`; the
    /// `y'`-independent part is dropped.
    pub fn residual_excess(&self, ydot: &DVector<C64>, mode: TimeMode) -> f64 {
        let g = (ydot.adjoint() * &self.gram * ydot)[(0, 0)].re;
        let cross = (ydot.adjoint() * &self.rhs)[(0, 0)];
        match mode {
            // |i phi - h|^2 = phi^+ G phi - 2 Re(-i phi^+ h) + |h|^2
            TimeMode::RealTime => g - 2.0 * (-I * cross).re,
            // |phi + h|^2 = phi^+ G phi + 2 Re(phi^+ h) + |h|^2
            TimeMode::ImaginaryTime => g + 2.0 * cross.re,
        }
    }
}

fn scaled_gram(g: &DMatrix<C64>) -> DMatrix<C64> {
    let n = g.nrows();
    let d: Vec<f64> = (0..n).map(|i| g[(i, i)].re.sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (d[i] * d[j]))
}

/// Holomorphic velocities of one packet, `(A', b', c')`.
#[derive(Clone, Copy, Debug, Default)]
struct HoloVelocity {
    axx: C64,
    ayy: C64,
    azz: C64,
    axz: C64,
    bx: C64,
    bz: C64,
    c: C64,
}

impl HoloVelocity {
    fn from_dirs(values: impl Iterator<Item = (usize, C64)>) -> Self {
        let mut h = Self::default();
        for (a, v) in values {
            match a {
                0 => h.axx = v,
                1 => h.ayy = v,
                2 => h.azz = v,
                3 => h.axz = v,
                4 => h.bx = v,
                5 => h.bz = v,
                _ => h.c = v,
            }
        }
        h
    }

    /// Real velocity components of a packet in storage order.
    fn to_real(self, g: &GaussianParams) -> [f64; COMPONENTS_PER_GAUSSIAN] {
        use comp::*;
        let q = [g.q_x, g.q_z];
        let p = [g.p_x, g.p_z];
        // b = 2 A q + i p  =>  b' - 2 A' q = 2 A q' + i p'
        let w = [
            self.bx - 2.0 * (self.axx * q[0] + self.axz * q[1]),
            self.bz - 2.0 * (self.axz * q[0] + self.azz * q[1]),
        ];
        let (rxx, rxz, rzz) = (g.a_xx.re, g.a_xz.re, g.a_zz.re);
        let det = 4.0 * (rxx * rzz - rxz * rxz);
        let qd = [
            2.0 * (rzz * w[0].re - rxz * w[1].re) / det,
            2.0 * (-rxz * w[0].re + rxx * w[1].re) / det,
        ];
        let pd = [
            w[0].im - 2.0 * (g.a_xx.im * qd[0] + g.a_xz.im * qd[1]),
            w[1].im - 2.0 * (g.a_xz.im * qd[0] + g.a_zz.im * qd[1]),
        ];
        // c = -(q^T A q + i p.q + gamma)
        let aq = [g.a_xx * q[0] + g.a_xz * q[1], g.a_xz * q[0] + g.a_zz * q[1]];
        let qadq = self.axx * q[0] * q[0] + 2.0 * self.axz * q[0] * q[1] + self.azz * q[1] * q[1];
        let gd = -self.c
            - (2.0 * (qd[0] * aq[0] + qd[1] * aq[1])
                + qadq
                + I * (pd[0] * q[0] + pd[1] * q[1] + p[0] * qd[0] + p[1] * qd[1]));
        let mut out = [0.0; COMPONENTS_PER_GAUSSIAN];
        out[RE_AXX] = self.axx.re;
        out[RE_AYY] = self.ayy.re;
        out[RE_AZZ] = self.azz.re;
        out[RE_AXZ] = self.axz.re;
        out[IM_AXX] = self.axx.im;
        out[IM_AYY] = self.ayy.im;
        out[IM_AZZ] = self.azz.im;
        out[IM_AXZ] = self.axz.im;
        out[QX] = qd[0];
        out[QZ] = qd[1];
        out[PX] = pd[0];
        out[PZ] = pd[1];
        out[RE_G] = gd.re;
        out[IM_G] = gd.im;
        out
    }

    /// Inverse of [`to_real`](Self::to_real).
    fn from_real(v: &[f64], g: &GaussianParams) -> Self {
        use comp::*;
        let axx = C64::new(v[RE_AXX], v[IM_AXX]);
        let ayy = C64::new(v[RE_AYY], v[IM_AYY]);
        let azz = C64::new(v[RE_AZZ], v[IM_AZZ]);
        let axz = C64::new(v[RE_AXZ], v[IM_AXZ]);
        let q = [g.q_x, g.q_z];
        let p = [g.p_x, g.p_z];
        let qd = [v[QX], v[QZ]];
        let pd = [v[PX], v[PZ]];
        let gd = C64::new(v[RE_G], v[IM_G]);
        let bx = 2.0 * (axx * q[0] + axz * q[1]) + 2.0 * (g.a_xx * qd[0] + g.a_xz * qd[1]) + I * pd[0];
        let bz = 2.0 * (axz * q[0] + azz * q[1]) + 2.0 * (g.a_xz * qd[0] + g.a_zz * qd[1]) + I * pd[1];
        let aq = [g.a_xx * q[0] + g.a_xz * q[1], g.a_xz * q[0] + g.a_zz * q[1]];
        let qadq = axx * q[0] * q[0] + 2.0 * axz * q[0] * q[1] + azz * q[1] * q[1];
        let c = -(2.0 * (qd[0] * aq[0] + qd[1] * aq[1])
            + qadq
            + I * (pd[0] * q[0] + pd[1] * q[1] + p[0] * qd[0] + p[1] * qd[1])
            + gd);
        Self {
            axx,
            ayy,
            azz,
            axz,
            bx,
            bz,
            c,
        }
    }

    fn get(&self, a: usize) -> C64 {
        [self.axx, self.ayy, self.azz, self.axz, self.bx, self.bz, self.c][a]
    }
}

/// Parameter velocity at one state.
#[derive(Clone, Debug)]
pub struct Velocity {
    /// All 32 real components; inactive ones are zero.
    pub components: [f64; 2 * COMPONENTS_PER_GAUSSIAN],
    pub energies: Energies,
    pub norm: f64,
}

impl Velocity {
    pub fn active(&self, layout: &ParamLayout) -> Vec<f64> {
        layout.active_map().iter().map(|&i| self.components[i]).collect()
    }
}

/// Converts a holomorphic solution into the real parameter velocity.
pub fn real_velocity(
    state: &VariationalState,
    sys: &EomSystem,
    ydot: &DVector<C64>,
) -> [f64; 2 * COMPONENTS_PER_GAUSSIAN] {
    let mut out = [0.0; 2 * COMPONENTS_PER_GAUSSIAN];
    for l in 0..2 {
        let vals = sys
            .directions
            .iter()
            .zip(ydot.iter())
            .filter(|((k, _), _)| *k == l)
            .map(|((_, a), v)| (*a, *v));
        let h = HoloVelocity::from_dirs(vals);
        if sys.directions.iter().any(|(k, _)| *k == l) {
            let r = h.to_real(&state.g[l]);
            out[l * COMPONENTS_PER_GAUSSIAN..(l + 1) * COMPONENTS_PER_GAUSSIAN].copy_from_slice(&r);
        }
    }
    out
}

/// Holomorphic tangent vector of a real parameter velocity, restricted to
/// the system's directions.
pub fn holomorphic_velocity(
    state: &VariationalState,
    sys: &EomSystem,
    zdot: &[f64],
) -> DVector<C64> {
    let h = [0, 1].map(|l| {
        HoloVelocity::from_real(
            &zdot[l * COMPONENTS_PER_GAUSSIAN..(l + 1) * COMPONENTS_PER_GAUSSIAN],
            &state.g[l],
        )
    });
    DVector::from_iterator(
        sys.directions.len(),
        sys.directions.iter().map(|&(l, a)| h[l].get(a)),
    )
}

/// The flow `z' = f(z)` under fixed parameters, layout and options.
pub struct Flow {
    pub params: PhysicalParams,
    pub opts: TdvpOptions,
    pub mode: TimeMode,
    cache: Option<DdiCache>,
}

impl Flow {
    pub fn new(params: PhysicalParams, opts: TdvpOptions, mode: TimeMode) -> Self {
        Self {
            params,
            opts,
            mode,
            cache: None,
        }
    }

    /// Enables the dipolar memo (useful when the same state recurs).
    pub fn with_cache(mut self, capacity: usize) -> Self {
        self.cache = Some(DdiCache::new(capacity));
        self
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.opts.layout
    }

    pub fn system(&self, state: &VariationalState) -> Result<EomSystem> {
        let mut s = *state;
        s.params = self.params;
        EomSystem::assemble(&s, &self.opts, self.cache.as_ref())
    }

    pub fn velocity(&self, state: &VariationalState) -> Result<Velocity> {
        let sys = self.system(state)?;
        let ydot = sys.solve(self.mode, self.opts.regularization)?;
        Ok(Velocity {
            components: real_velocity(state, &sys, &ydot),
            energies: sys.energies,
            norm: sys.norm,
        })
    }

    /// `f` on the active real vector relative to a template state.
    pub fn eval(&self, template: &VariationalState, z: &[f64]) -> Result<Vec<f64>> {
        let s = template.with_vector(&self.opts.layout, z);
        s.validate()?;
        Ok(self.velocity(&s)?.active(&self.opts.layout))
    }

    /// Velocity of a pure phase rotation `Psi -> exp(-i mu t) Psi` (real
    /// time) or the decay `exp(-mu tau)` (imaginary time) on the active vector.
    pub fn phase_mode(&self, mu: C64) -> Vec<f64> {
        let layout = &self.opts.layout;
        let mut v = vec![0.0; layout.dim()];
        let gd = match self.mode {
            TimeMode::RealTime => I * mu,
            TimeMode::ImaginaryTime => mu,
        };
        for k in 0..layout.active_gaussians() {
            v[layout.re_gamma_index(k)] = gd.re;
            v[layout.im_gamma_index(k)] = gd.im;
        }
        v
    }
}

/// Parameter velocity at `state` for the default layout.
pub fn eom_velocity(
    state: &VariationalState,
    params: &PhysicalParams,
    mode: TimeMode,
) -> Result<Velocity> {
    Flow::new(*params, TdvpOptions::default(), mode).velocity(state)
}

#[derive(Clone, Copy, Debug)]
pub struct ResidualOptions {
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Panel width in units of the narrowest density standard deviation.
    pub panel_width: f64,
    /// Half-extent of the box in density standard deviations.
    pub extent: f64,
    pub ddi_tol: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            order: 8,
            panel_width: 2.0,
            extent: 8.0,
            ddi_tol: 1e-8,
        }
    }
}

/// `|i phi - H Psi|` (real time) for `phi = sum_a dPsi/dz_a zdot_a`, by
/// tensor Gauss-Legendre quadrature over a box covering both packets.
/// `zdot` holds all 32 real components.
pub fn residual_norm(
    state: &VariationalState,
    zdot: &[f64],
    params: &PhysicalParams,
) -> Result<f64> {
    residual_norm_with(state, zdot, params, &ResidualOptions::default())
}

pub fn residual_norm_with(
    state: &VariationalState,
    zdot: &[f64],
    params: &PhysicalParams,
    opts: &ResidualOptions,
) -> Result<f64> {
    state.validate()?;
    let h = state.holomorphic();
    let hv = [0, 1].map(|l| {
        HoloVelocity::from_real(
            &zdot[l * COMPONENTS_PER_GAUSSIAN..(l + 1) * COMPONENTS_PER_GAUSSIAN],
            &state.g[l],
        )
    });
    let kin = [kinetic_terms(&h[0]), kinetic_terms(&h[1])];

    // Box: each packet's density std is 1/(2 sqrt(Re a)) per axis.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut sigma_min = [f64::INFINITY; 3];
    for g in &state.g {
        let centre = [g.q_x, 0.0, g.q_z];
        for (i, a) in [g.a_xx.re, g.a_yy.re, g.a_zz.re].into_iter().enumerate() {
            let s = 0.5 / a.sqrt();
            sigma_min[i] = sigma_min[i].min(s);
            lo[i] = lo[i].min(centre[i] - opts.extent * s);
            hi[i] = hi[i].max(centre[i] + opts.extent * s);
        }
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
        .map(|i| {
            let panels = ((hi[i] - lo[i]) / (opts.panel_width * sigma_min[i])).ceil().max(1.0);
            composite_gl(lo[i], hi[i], panels as usize, opts.order)
        })
        .collect();

    let densities: Vec<(Gauss3, f64)> = if params.nadd != 0.0 {
        vec![
            (h[0].conj().mul(&h[0]), 1.0),
            (h[1].conj().mul(&h[1]), 1.0),
            (h[0].conj().mul(&h[1]), 2.0),
        ]
    } else {
        Vec::new()
    };
    let aopts = AlgebraOptions {
        ddi_tol: opts.ddi_tol,
        ..Default::default()
    };
    let poly = |terms: &[(C64, [usize; 3])], r: [f64; 3]| -> C64 {
        terms
            .iter()
            .map(|(c, e)| *c * r[0].powi(e[0] as i32) * r[1].powi(e[1] as i32) * r[2].powi(e[2] as i32))
            .sum()
    };

    let mut total = 0.0;
    for (x, wx) in axes[0].0.iter().zip(&axes[0].1) {
        for (y, wy) in axes[1].0.iter().zip(&axes[1].1) {
            for (z, wz) in axes[2].0.iter().zip(&axes[2].1) {
                let r = [*x, *y, *z];
                let g = [h[0].eval(r), h[1].eval(r)];
                let psi = g[0] + g[1];
                let mut tpsi = ZERO;
                let mut phi = ZERO;
                for l in 0..2 {
                    tpsi += poly(&kin[l], r) * g[l];
                    let mut m = ZERO;
                    for (a, (c, e)) in MONOMIALS.iter().enumerate().take(N_MONO) {
                        m += *c * hv[l].get(a) * r[0].powi(e[0] as i32) * r[1].powi(e[1] as i32) * r[2].powi(e[2] as i32);
                    }
                    phi += m * g[l];
                }
                let mut v = external_potential(params, r)
                    + 4.0 * std::f64::consts::PI * params.na * psi.norm_sqr();
                if !densities.is_empty() {
                    let mut vd = 0.0;
                    for (d, w) in &densities {
                        vd += w * ddi_potential_at(d, r, params.dipole_axis, &aopts)?.re;
                    }
                    v += 3.0 * params.nadd * vd;
                }
                let res = I * phi - tpsi - v * psi;
                total += wx * wy * wz * res.norm_sqr();
            }
        }
    }
    Ok(total.sqrt())
}
