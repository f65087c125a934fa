//! Closed-form and semi-analytic integrals between Gaussian wave packets.
//!
//! Every Gaussian is held in holomorphic form
//! `exp(-r^T M r + b^T r + c)` with `M` block diagonal in `(x, z) + y` and
//! no linear `y` term. Products of such functions stay in the same class,
//! so overlaps, kinetic, external and contact elements reduce to Gaussian
//! moments. The dipolar elements use
//! `(1 - 3 cos^2 theta) / s^3 = -d_d^2 (1/s) - (4 pi / 3) delta(s)` together
//! with `1/s = 2/sqrt(pi) int_0^inf exp(-t^2 s^2) dt`; for fixed `t` the six
//! dimensional integral is a Gaussian moment again, which leaves one
//! bounded quadrature over `t`. This is the Fourier-space kernel
//! `4 pi k_d^2 / k^2 - 4 pi / 3` with the `1/k^2` factor written as a
//! Gaussian parameter integral.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{DipoleAxis, GaussianParams, PhysicalParams, VariationalState};
use crate::quadrature::{integrate, QuadOptions};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Complex symmetric 2x2 matrix over the `(x, z)` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub xx: C64,
    pub xz: C64,
    pub zz: C64,
}

impl Sym2 {
    pub fn diag(xx: C64, zz: C64) -> Self {
        Self { xx, xz: ZERO, zz }
    }

    pub fn det(&self) -> C64 {
        self.xx * self.zz - self.xz * self.xz
    }

    pub fn inv(&self) -> Self {
        let d = self.det();
        Self {
            xx: self.zz / d,
            xz: -self.xz / d,
            zz: self.xx / d,
        }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.xx * v[0] + self.xz * v[1],
            self.xz * v[0] + self.zz * v[1],
        ]
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            xx: self.xx + o.xx,
            xz: self.xz + o.xz,
            zz: self.zz + o.zz,
        }
    }

    pub fn shift(&self, s: f64) -> Self {
        Self {
            xx: self.xx + s,
            xz: self.xz,
            zz: self.zz + s,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            xx: self.xx * s,
            xz: self.xz * s,
            zz: self.zz * s,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            xx: self.xx.conj(),
            xz: self.xz.conj(),
            zz: self.zz.conj(),
        }
    }

    /// Product of two commuting symmetric matrices (the result is symmetric).
    fn mul_commuting(&self, o: &Self) -> Self {
        let xx = self.xx * o.xx + self.xz * o.xz;
        let zz = self.xz * o.xz + self.zz * o.zz;
        let xz = 0.5 * (self.xx * o.xz + self.xz * o.zz + self.xz * o.xx + self.zz * o.xz);
        Self { xx, xz, zz }
    }

    /// `sqrt(det)` on the branch continuous from real positive definite
    /// matrices; requires a positive definite real part, checked through
    /// the symmetric LDL pivots.
    pub fn sqrt_det(&self) -> Result<C64> {
        let d1 = self.xx;
        if !(d1.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let d2 = self.zz - self.xz * self.xz / d1;
        if !(d2.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        Ok(d1.sqrt() * d2.sqrt())
    }
}

/// `exp(-r^T M r + b^T r + c)` with `M = M_xz (+) m_y` and `b_y = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gauss3 {
    pub m: Sym2,
    pub my: C64,
    pub b: [C64; 2],
    pub c: C64,
}

/// Moments of a normalizable [`Gauss3`]: `norm` is its integral, the
/// tables hold normalized expectations.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub norm: C64,
    exz: [C64; 15],
    ey: [C64; 5],
}

#[inline]
fn idx2(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

impl Moments {
    /// Normalized expectation of `x^ex y^ey z^ez`.
    #[inline]
    pub fn e(&self, ex: usize, ey: usize, ez: usize) -> C64 {
        self.exz[idx2(ex, ez)] * self.ey[ey]
    }

    /// `int x^ex y^ey z^ez G d^3r`.
    #[inline]
    pub fn integral(&self, ex: usize, ey: usize, ez: usize) -> C64 {
        self.norm * self.e(ex, ey, ez)
    }

    /// Mean position `(x, z)`.
    pub fn mean(&self) -> [C64; 2] {
        [self.exz[idx2(1, 0)], self.exz[idx2(0, 1)]]
    }
}

impl Gauss3 {
    pub fn from_params(g: &GaussianParams) -> Self {
        let m = Sym2 {
            xx: g.a_xx,
            xz: g.a_xz,
            zz: g.a_zz,
        };
        let q = [C64::from(g.q_x), C64::from(g.q_z)];
        let aq = m.apply(q);
        let b = [
            2.0 * aq[0] + C64::new(0.0, g.p_x),
            2.0 * aq[1] + C64::new(0.0, g.p_z),
        ];
        let qaq = q[0] * aq[0] + q[1] * aq[1];
        let pq = g.p_x * g.q_x + g.p_z * g.q_z;
        let c = -(qaq + C64::new(0.0, pq) + g.gamma);
        Self {
            m,
            my: g.a_yy,
            b,
            c,
        }
    }

    /// `exp(-sum_i a_i (x_i - center_i)^2)` with `center_y = 0`.
    pub fn real_diagonal(a: [f64; 3], center: [f64; 3]) -> Self {
        debug_assert_eq!(center[1], 0.0);
        Self {
            m: Sym2::diag(a[0].into(), a[2].into()),
            my: a[1].into(),
            b: [(2.0 * a[0] * center[0]).into(), (2.0 * a[2] * center[2]).into()],
            c: (-(a[0] * center[0] * center[0] + a[2] * center[2] * center[2])).into(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            m: self.m.conj(),
            my: self.my.conj(),
            b: [self.b[0].conj(), self.b[1].conj()],
            c: self.c.conj(),
        }
    }

    /// Pointwise product of the two functions.
    pub fn mul(&self, o: &Self) -> Self {
        Self {
            m: self.m.add(&o.m),
            my: self.my + o.my,
            b: [self.b[0] + o.b[0], self.b[1] + o.b[1]],
            c: self.c + o.c,
        }
    }

    pub fn eval(&self, r: [f64; 3]) -> C64 {
        let [x, y, z] = r;
        let q = self.m.xx * x * x + 2.0 * self.m.xz * x * z + self.m.zz * z * z + self.my * y * y;
        (-q + self.b[0] * x + self.b[1] * z + self.c).exp()
    }

    /// Column density-style marginal: integral over `y` at fixed `(x, z)`.
    pub fn integrate_y(&self, x: f64, z: f64) -> Result<C64> {
        if !(self.my.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let q = self.m.xx * x * x + 2.0 * self.m.xz * x * z + self.m.zz * z * z;
        Ok((PI / self.my).sqrt() * (-q + self.b[0] * x + self.b[1] * z + self.c).exp())
    }

    /// Integral over `x` at fixed `(y, z)`.
    pub fn integrate_x(&self, y: f64, z: f64) -> Result<C64> {
        if !(self.m.xx.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let lin = self.b[0] - 2.0 * self.m.xz * z;
        let rest = -self.m.zz * z * z - self.my * y * y + self.b[1] * z + self.c;
        Ok((PI / self.m.xx).sqrt() * (lin * lin / (4.0 * self.m.xx) + rest).exp())
    }

    /// Integral over `z` at fixed `(x, y)`.
    pub fn integrate_z(&self, x: f64, y: f64) -> Result<C64> {
        if !(self.m.zz.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let lin = self.b[1] - 2.0 * self.m.xz * x;
        let rest = -self.m.xx * x * x - self.my * y * y + self.b[0] * x + self.c;
        Ok((PI / self.m.zz).sqrt() * (lin * lin / (4.0 * self.m.zz) + rest).exp())
    }

    /// `int G d^3r`.
    pub fn integral(&self) -> Result<C64> {
        let sd = self.m.sqrt_det()?;
        if !(self.my.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let mi = self.m.inv();
        let mib = mi.apply(self.b);
        let quad = 0.25 * (self.b[0] * mib[0] + self.b[1] * mib[1]);
        Ok((1.5 * PI.ln() + self.c + quad).exp() / (sd * self.my.sqrt()))
    }

    /// `int |g|^2` for a single packet in holomorphic form.
    pub fn overlap_self(&self) -> Result<f64> {
        Ok(self.conj().mul(self).integral()?.re)
    }

    /// Integral and normalized moments up to total degree `deg` (at most 4)
    /// in the `(x, z)` plane and up to `y^4`.
    pub fn moments(&self, deg: usize) -> Result<Moments> {
        debug_assert!(deg <= 4);
        let sd = self.m.sqrt_det()?;
        if !(self.my.re > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let sigma = self.m.inv().scale(0.5);
        let mu = sigma.apply(self.b);
        let quad = 0.5 * (self.b[0] * mu[0] + self.b[1] * mu[1]);
        let norm = (1.5 * PI.ln() + self.c + quad).exp() / (sd * self.my.sqrt());

        let mut exz = [ZERO; 15];
        exz[0] = C64::new(1.0, 0.0);
        for d in 1..=deg {
            for j in 0..=d {
                let i = d - j;
                let v = if i > 0 {
                    let mut v = mu[0] * exz[idx2(i - 1, j)];
                    if i >= 2 {
                        v += sigma.xx * (i - 1) as f64 * exz[idx2(i - 2, j)];
                    }
                    if j >= 1 {
                        v += sigma.xz * j as f64 * exz[idx2(i - 1, j - 1)];
                    }
                    v
                } else {
                    let mut v = mu[1] * exz[idx2(0, j - 1)];
                    if j >= 2 {
                        v += sigma.zz * (j - 1) as f64 * exz[idx2(0, j - 2)];
                    }
                    v
                };
                exz[idx2(i, j)] = v;
            }
        }
        let sy = 0.5 / self.my;
        let ey = [
            C64::new(1.0, 0.0),
            ZERO,
            sy,
            ZERO,
            3.0 * sy * sy,
        ];
        Ok(Moments { norm, exz, ey })
    }
}

/// Number of derivative monomials per packet.
pub const N_MONO: usize = 7;

/// Index of the constant monomial (the amplitude direction).
pub const MONO_ONE: usize = 6;

/// Monomials `dg/dy_a = m_a(r) g` for the holomorphic coordinates
/// `(A_xx, A_yy, A_zz, A_xz, b_x, b_z, c)`, as (coefficient, exponents).
pub const MONOMIALS: [(f64, [usize; 3]); N_MONO] = [
    (-1.0, [2, 0, 0]),
    (-1.0, [0, 2, 0]),
    (-1.0, [0, 0, 2]),
    (-2.0, [1, 0, 1]),
    (1.0, [1, 0, 0]),
    (1.0, [0, 0, 1]),
    (1.0, [0, 0, 0]),
];

/// Polynomial term `coef * x^e0 y^e1 z^e2`.
pub type Term = (C64, [usize; 3]);

/// `(-1/2 Laplacian g) / g` as polynomial terms.
pub fn kinetic_terms(g: &Gauss3) -> [Term; 7] {
    let (a, b) = (&g.m, &g.b);
    let tr = a.xx + a.zz + g.my;
    [
        (-0.5 * (b[0] * b[0] + b[1] * b[1] - 2.0 * tr), [0, 0, 0]),
        (2.0 * (b[0] * a.xx + b[1] * a.xz), [1, 0, 0]),
        (2.0 * (b[0] * a.xz + b[1] * a.zz), [0, 0, 1]),
        (-2.0 * (a.xx * a.xx + a.xz * a.xz), [2, 0, 0]),
        (-4.0 * a.xz * (a.xx + a.zz), [1, 0, 1]),
        (-2.0 * (a.xz * a.xz + a.zz * a.zz), [0, 0, 2]),
        (-2.0 * g.my * g.my, [0, 2, 0]),
    ]
}

#[inline]
fn add3(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn moment_row(mom: &Moments) -> [C64; N_MONO] {
    let mut out = [ZERO; N_MONO];
    for (a, (coef, e)) in MONOMIALS.iter().enumerate() {
        out[a] = *coef * mom.integral(e[0], e[1], e[2]);
    }
    out
}

/// Options for the dipolar quadrature.
#[derive(Clone, Copy, Debug)]
pub struct AlgebraOptions {
    pub ddi_tol: f64,
    pub max_intervals: usize,
}

impl Default for AlgebraOptions {
    fn default() -> Self {
        Self {
            ddi_tol: 1e-10,
            max_intervals: 200,
        }
    }
}

impl AlgebraOptions {
    fn quad(&self) -> QuadOptions {
        QuadOptions {
            rel_tol: self.ddi_tol,
            max_intervals: self.max_intervals,
            initial_panels: 4,
        }
    }
}

/// The `t`-integrand of the dipolar double integral: for each derivative
/// monomial, `int int m_a(r) G1(r) G2(r') [4 t^4 s_d^2 - 2 t^2] exp(-t^2 s^2)`
/// with `s = r - r'`.
fn ddi_t_integrand(
    g1: &Gauss3,
    g2: &Gauss3,
    t: f64,
    axis: DipoleAxis,
) -> Result<[C64; N_MONO]> {
    let t2 = t * t;
    let t4 = t2 * t2;
    // Integrate r' out: R = M2 + t^2, Q = R^-1 M2, u = R^-1 b2 / 2.
    let r = g2.m.shift(t2);
    let rinv = r.inv();
    let q = rinv.mul_commuting(&g2.m);
    let rb = rinv.apply(g2.b);
    let u = [0.5 * rb[0], 0.5 * rb[1]];
    let ry = g2.my + t2;
    let qy = g2.my / ry;
    let marginal = Gauss3 {
        m: g1.m.add(&q.scale(t2)),
        my: g1.my + t2 * qy,
        b: [g1.b[0] + 2.0 * t2 * u[0], g1.b[1] + 2.0 * t2 * u[1]],
        c: g1.c + g2.c + 0.5 * (g2.b[0] * u[0] + g2.b[1] * u[1]),
    };
    let prefactor = PI.powf(1.5) / (r.sqrt_det()? * ry.sqrt());
    let deg = match axis {
        DipoleAxis::YRepulsive => 2,
        DipoleAxis::XAttractive => 4,
    };
    let mom = marginal.moments(deg)?;
    let norm = prefactor * mom.norm;
    let kernel: [Term; 6] = match axis {
        DipoleAxis::YRepulsive => [
            (-2.0 * t2 * qy, [0, 0, 0]),
            (4.0 * t4 * qy * qy, [0, 2, 0]),
            (ZERO, [0, 0, 0]),
            (ZERO, [0, 0, 0]),
            (ZERO, [0, 0, 0]),
            (ZERO, [0, 0, 0]),
        ],
        DipoleAxis::XAttractive => [
            (4.0 * t4 * u[0] * u[0] - 2.0 * t2 * q.xx, [0, 0, 0]),
            (-8.0 * t4 * q.xx * u[0], [1, 0, 0]),
            (-8.0 * t4 * q.xz * u[0], [0, 0, 1]),
            (4.0 * t4 * q.xx * q.xx, [2, 0, 0]),
            (8.0 * t4 * q.xx * q.xz, [1, 0, 1]),
            (4.0 * t4 * q.xz * q.xz, [0, 0, 2]),
        ],
    };
    let mut out = [ZERO; N_MONO];
    for (a, (coef, e)) in MONOMIALS.iter().enumerate() {
        let mut acc = ZERO;
        for (k, ke) in kernel.iter() {
            if *k != ZERO {
                let s = add3(*e, *ke);
                acc += *k * mom.e(s[0], s[1], s[2]);
            }
        }
        out[a] = *coef * norm * acc;
    }
    Ok(out)
}

/// Natural inverse length scale of the `t` integral for a density pair.
fn t_scale(g1: &Gauss3, g2: &Gauss3) -> f64 {
    let h = |a: f64, b: f64| 1.0 / (1.0 / a + 1.0 / b);
    let hx = h(g1.m.xx.re, g2.m.xx.re);
    let hy = h(g1.my.re, g2.my.re);
    let hz = h(g1.m.zz.re, g2.m.zz.re);
    (hx * hy * hz).powf(1.0 / 6.0)
}

/// `int int m_a(r) G1(r) K(r - r') G2(r') d^3r d^3r'` for all derivative
/// monomials, with `K = (1 - 3 cos^2 theta) / |r - r'|^3` (no coupling
/// prefactor).
pub fn ddi_pair_integral(
    g1: &Gauss3,
    g2: &Gauss3,
    axis: DipoleAxis,
    opts: &AlgebraOptions,
) -> Result<[C64; N_MONO]> {
    let s = t_scale(g1, g2);
    let mut failure = None;
    let tail = integrate(
        |tau| {
            let one_minus = 1.0 - tau;
            let t = s * tau / one_minus;
            let jac = s / (one_minus * one_minus);
            match ddi_t_integrand(g1, g2, t, axis) {
                Ok(v) => v.map(|x| x * jac),
                Err(e) => {
                    failure.get_or_insert(e);
                    [ZERO; N_MONO]
                }
            }
        },
        0.0,
        1.0,
        &opts.quad(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let contact = moment_row(&g1.mul(g2).moments(2)?);
    let pre = -2.0 / PI.sqrt();
    let mut out = [ZERO; N_MONO];
    for a in 0..N_MONO {
        out[a] = pre * tail[a] - (4.0 * PI / 3.0) * contact[a];
    }
    Ok(out)
}

/// Dipolar potential `int K(r - r') G(r') d^3r'` of a Gaussian density at a point.
pub fn ddi_potential_at(
    g: &Gauss3,
    point: [f64; 3],
    axis: DipoleAxis,
    opts: &AlgebraOptions,
) -> Result<C64> {
    let s = (g.m.xx.re * g.my.re * g.m.zz.re).powf(1.0 / 6.0);
    let [x, y, z] = point;
    let d = axis.index();
    let mut failure = None;
    let tail = integrate(
        |tau| {
            let one_minus = 1.0 - tau;
            let t = s * tau / one_minus;
            let jac = s / (one_minus * one_minus);
            let t2 = t * t;
            let r = g.m.shift(t2);
            let ry = g.my + t2;
            let eval = || -> Result<C64> {
                let rinv = r.inv();
                // Gaussian in r' with M = M2 + t^2, b = b2 + 2 t^2 r.
                let bb = [g.b[0] + 2.0 * t2 * x, g.b[1] + 2.0 * t2 * z];
                let mb = rinv.apply(bb);
                let quad = 0.25 * (bb[0] * mb[0] + bb[1] * mb[1]);
                let cc = g.c - t2 * (x * x + y * y + z * z) + t2 * t2 * y * y / ry;
                let norm = (1.5 * PI.ln() + cc + quad).exp() / (r.sqrt_det()? * ry.sqrt());
                // r_d - <r'_d> and the conditional variance, in cancellation-free form.
                let k = if d == 1 {
                    let dy = g.my * y / ry;
                    4.0 * t2 * t2 * dy * dy - 2.0 * t2 * g.my / ry
                } else {
                    let mr = g.m.apply([x.into(), z.into()]);
                    let w = rinv.apply([mr[0] - 0.5 * g.b[0], mr[1] - 0.5 * g.b[1]]);
                    let q = rinv.mul_commuting(&g.m);
                    4.0 * t2 * t2 * w[0] * w[0] - 2.0 * t2 * q.xx
                };
                Ok(norm * k * jac)
            };
            match eval() {
                Ok(v) => [v],
                Err(e) => {
                    failure.get_or_insert(e);
                    [ZERO]
                }
            }
        },
        0.0,
        1.0,
        &opts.quad(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(-2.0 / PI.sqrt() * tail[0] - (4.0 * PI / 3.0) * g.eval(point))
}

type CacheKey = ([u64; 28], usize, u64);

/// Memo of dipolar pair integrals keyed by the exact bit patterns of both
/// densities. Lookups return the value a direct evaluation would produce.
#[derive(Default)]
pub struct DdiCache {
    map: Mutex<HashMap<CacheKey, [C64; N_MONO]>>,
    capacity: usize,
}

impl DdiCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            map: Mutex::new(HashMap::new()),
            capacity,
        }
    }

    fn key(g1: &Gauss3, g2: &Gauss3, axis: DipoleAxis, tol: f64) -> CacheKey {
        let mut k = [0u64; 28];
        let mut i = 0;
        for g in [g1, g2] {
            for v in [g.m.xx, g.m.xz, g.m.zz, g.my, g.b[0], g.b[1], g.c] {
                k[i] = v.re.to_bits();
                k[i + 1] = v.im.to_bits();
                i += 2;
            }
        }
        (k, axis.index(), tol.to_bits())
    }

    pub fn len(&self) -> usize {
        self.map.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        g1: &Gauss3,
        g2: &Gauss3,
        axis: DipoleAxis,
        opts: &AlgebraOptions,
    ) -> Result<[C64; N_MONO]> {
        let key = Self::key(g1, g2, axis, opts.ddi_tol);
        if let Some(v) = self.map.lock().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(v);
        }
        let v = ddi_pair_integral(g1, g2, axis, opts)?;
        if let Ok(mut m) = self.map.lock() {
            if m.len() >= self.capacity.max(1) {
                m.clear();
            }
            m.insert(key, v);
        }
        Ok(v)
    }
}

/// All matrix elements of one state, resolved per ordered packet pair
/// `(l, k)` and per derivative monomial `a` of the bra packet:
/// `X[l][k][a] = <m_a g^l | X | g^k>`. The `MONO_ONE` entry is the plain
/// element `<g^l|X|g^k>`.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub pair_moments: [[Moments; 2]; 2],
    pub kinetic: [[[C64; N_MONO]; 2]; 2],
    pub external: [[[C64; N_MONO]; 2]; 2],
    pub contact: [[[C64; N_MONO]; 2]; 2],
    pub ddi: [[[C64; N_MONO]; 2]; 2],
}

impl Assembly {
    pub fn compute(
        state: &VariationalState,
        opts: &AlgebraOptions,
        cache: Option<&DdiCache>,
    ) -> Result<Self> {
        let p = &state.params;
        let h = state.holomorphic();
        let hc = [h[0].conj(), h[1].conj()];
        let wells = p.well_gaussians();
        let strengths = p.well_strengths();

        let mut pair = [[h[0]; 2]; 2];
        let mut pair_moments = [[None; 2]; 2];
        let mut kinetic = [[[ZERO; N_MONO]; 2]; 2];
        let mut external = [[[ZERO; N_MONO]; 2]; 2];
        for l in 0..2 {
            for k in 0..2 {
                let g = hc[l].mul(&h[k]);
                pair[l][k] = g;
                let mom = g.moments(4)?;
                let kin = kinetic_terms(&h[k]);
                for (a, (coef, e)) in MONOMIALS.iter().enumerate() {
                    let mut acc = ZERO;
                    for (kc, ke) in kin.iter() {
                        let s = add3(*e, *ke);
                        acc += *kc * mom.e(s[0], s[1], s[2]);
                    }
                    kinetic[l][k][a] = *coef * mom.norm * acc;
                }
                pair_moments[l][k] = Some(mom);
                for w in 0..2 {
                    let row = moment_row(&g.mul(&wells[w]).moments(2)?);
                    for a in 0..N_MONO {
                        external[l][k][a] += strengths[w] * row[a];
                    }
                }
            }
        }

        let mut quartic = [[[ZERO; N_MONO]; 2]; 2];
        if p.na != 0.0 || p.nadd != 0.0 {
            for l in 0..2 {
                for k in 0..2 {
                    for m in 0..2 {
                        for n in 0..2 {
                            let row = moment_row(&pair[l][k].mul(&pair[m][n]).moments(2)?);
                            for a in 0..N_MONO {
                                quartic[l][k][a] += row[a];
                            }
                        }
                    }
                }
            }
        }
        let contact = quartic.map(|r| r.map(|v| v.map(|x| 4.0 * PI * p.na * x)));

        let mut ddi = [[[ZERO; N_MONO]; 2]; 2];
        if p.nadd != 0.0 {
            let pre = 3.0 * p.nadd;
            for l in 0..2 {
                for k in 0..2 {
                    for m in 0..2 {
                        for n in 0..2 {
                            // (k, l, n, m) is the complex conjugate of (l, k, m, n).
                            if (k, l, n, m) < (l, k, m, n) {
                                continue;
                            }
                            let v = match cache {
                                Some(c) => {
                                    c.get_or_compute(&pair[l][k], &pair[m][n], p.dipole_axis, opts)?
                                }
                                None => ddi_pair_integral(&pair[l][k], &pair[m][n], p.dipole_axis, opts)?,
                            };
                            for a in 0..N_MONO {
                                ddi[l][k][a] += pre * v[a];
                                if (k, l, n, m) != (l, k, m, n) {
                                    ddi[k][l][a] += pre * v[a].conj();
                                }
                            }
                        }
                    }
                }
            }
        }

        Ok(Self {
            pair_moments: pair_moments.map(|r| r.map(|m| m.expect("filled above"))),
            kinetic,
            external,
            contact,
            ddi,
        })
    }

    pub fn overlap(&self, l: usize, k: usize) -> C64 {
        self.pair_moments[l][k].norm
    }

    pub fn norm(&self) -> f64 {
        (0..2)
            .flat_map(|l| (0..2).map(move |k| (l, k)))
            .map(|(l, k)| self.overlap(l, k))
            .sum::<C64>()
            .re
    }

    fn total(table: &[[[C64; N_MONO]; 2]; 2]) -> C64 {
        let mut s = ZERO;
        for row in table {
            for v in row {
                s += v[MONO_ONE];
            }
        }
        s
    }

    pub fn energies(&self) -> Energies {
        let n = self.norm();
        let lin = Self::total(&self.kinetic) + Self::total(&self.external);
        let c = Self::total(&self.contact);
        let d = Self::total(&self.ddi);
        Energies {
            e_mf: (lin + 0.5 * (c + d)) / n,
            mu: (lin + c + d) / n,
            kinetic: Self::total(&self.kinetic) / n,
            external: Self::total(&self.external) / n,
            contact: c / n,
            ddi: d / n,
        }
    }

    pub fn table(&self) -> ElementTable {
        let pick = |t: &[[[C64; N_MONO]; 2]; 2]| t.map(|r| r.map(|v| v[MONO_ONE]));
        let mut first = [[[ZERO; 3]; 2]; 2];
        let mut second = [[[[ZERO; 3]; 3]; 2]; 2];
        for l in 0..2 {
            for k in 0..2 {
                let m = &self.pair_moments[l][k];
                for i in 0..3 {
                    let mut e = [0; 3];
                    e[i] = 1;
                    first[l][k][i] = m.integral(e[0], e[1], e[2]);
                    for j in 0..3 {
                        let mut e2 = e;
                        e2[j] += 1;
                        second[l][k][i][j] = m.integral(e2[0], e2[1], e2[2]);
                    }
                }
            }
        }
        ElementTable {
            overlaps: self.pair_moments.map(|r| r.map(|m| m.norm)),
            kinetic: pick(&self.kinetic),
            external: pick(&self.external),
            contact: pick(&self.contact),
            ddi: pick(&self.ddi),
            first_moments: first,
            second_moments: second,
        }
    }
}

/// Mean-field energy (interaction terms halved) and chemical potential,
/// both per particle, with their constituents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    pub e_mf: C64,
    pub mu: C64,
    pub kinetic: C64,
    pub external: C64,
    pub contact: C64,
    pub ddi: C64,
}

/// `2 x 2` tables `[l][k] = <g^l|X|g^k>` with the nonlinear potentials built
/// from the full `Psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementTable {
    pub overlaps: [[C64; 2]; 2],
    pub kinetic: [[C64; 2]; 2],
    pub external: [[C64; 2]; 2],
    pub contact: [[C64; 2]; 2],
    pub ddi: [[C64; 2]; 2],
    /// `<g^l|x_i|g^k>`.
    pub first_moments: [[[C64; 3]; 2]; 2],
    /// `<g^l|x_i x_j|g^k>`.
    pub second_moments: [[[[C64; 3]; 3]; 2]; 2],
}

pub fn element_table(state: &VariationalState, opts: &AlgebraOptions) -> Result<ElementTable> {
    Ok(Assembly::compute(state, opts, None)?.table())
}

/// `<g^l|g^k>`.
pub fn overlap(gl: &GaussianParams, gk: &GaussianParams) -> Result<C64> {
    Gauss3::from_params(gl).conj().mul(&Gauss3::from_params(gk)).integral()
}

/// Single-pair linear elements.
#[derive(Clone, Copy, Debug)]
pub struct LocalElements {
    pub overlap: C64,
    pub kinetic: C64,
    pub external: C64,
    /// `<g^l|x_i|g^k>`.
    pub first: [C64; 3],
    /// `<g^l|x_i x_j|g^k>`.
    pub second: [[C64; 3]; 3],
}

pub fn local_elements(
    gl: &GaussianParams,
    gk: &GaussianParams,
    params: &PhysicalParams,
) -> Result<LocalElements> {
    let hl = Gauss3::from_params(gl).conj();
    let hk = Gauss3::from_params(gk);
    let g = hl.mul(&hk);
    let mom = g.moments(4)?;
    let kinetic = kinetic_terms(&hk)
        .iter()
        .map(|(c, e)| *c * mom.integral(e[0], e[1], e[2]))
        .sum();
    let mut external = ZERO;
    for (w, s) in params.well_gaussians().iter().zip(params.well_strengths()) {
        external += s * g.mul(w).integral()?;
    }
    let mut first = [ZERO; 3];
    let mut second = [[ZERO; 3]; 3];
    for i in 0..3 {
        let mut e = [0; 3];
        e[i] = 1;
        first[i] = mom.integral(e[0], e[1], e[2]);
        for j in 0..3 {
            let mut e2 = e;
            e2[j] += 1;
            second[i][j] = mom.integral(e2[0], e2[1], e2[2]);
        }
    }
    Ok(LocalElements {
        overlap: mom.norm,
        kinetic,
        external,
        first,
        second,
    })
}

/// `<g^l|4 pi N a |Psi|^2|g^k>`.
pub fn contact_element(
    gl: &GaussianParams,
    gk: &GaussianParams,
    state: &VariationalState,
    params: &PhysicalParams,
) -> Result<C64> {
    if params.na == 0.0 {
        return Ok(ZERO);
    }
    let g = Gauss3::from_params(gl).conj().mul(&Gauss3::from_params(gk));
    let h = state.holomorphic();
    let mut s = ZERO;
    for m in 0..2 {
        for n in 0..2 {
            s += g.mul(&h[m].conj().mul(&h[n])).integral()?;
        }
    }
    Ok(4.0 * PI * params.na * s)
}

/// `<g^l|V_dd[Psi]|g^k>` with the dipolar quadrature at relative tolerance `tol`.
pub fn ddi_element(
    gl: &GaussianParams,
    gk: &GaussianParams,
    state: &VariationalState,
    params: &PhysicalParams,
    tol: f64,
) -> Result<C64> {
    if params.nadd == 0.0 {
        return Ok(ZERO);
    }
    let opts = AlgebraOptions {
        ddi_tol: tol,
        ..Default::default()
    };
    let g = Gauss3::from_params(gl).conj().mul(&Gauss3::from_params(gk));
    let h = state.holomorphic();
    let mut s = ZERO;
    for m in 0..2 {
        for n in 0..2 {
            s += ddi_pair_integral(&g, &h[m].conj().mul(&h[n]), params.dipole_axis, &opts)?[MONO_ONE];
        }
    }
    Ok(3.0 * params.nadd * s)
}

/// Mean-field energy and chemical potential of `state` under `params`.
pub fn energies(state: &VariationalState, params: &PhysicalParams, opts: &AlgebraOptions) -> Result<Energies> {
    let mut s = *state;
    s.params = *params;
    Ok(Assembly::compute(&s, opts, None)?.energies())
}

pub fn mean_field_energy(state: &VariationalState, params: &PhysicalParams) -> Result<C64> {
    Ok(energies(state, params, &AlgebraOptions::default())?.e_mf)
}

pub fn chemical_potential(state: &VariationalState, params: &PhysicalParams) -> Result<C64> {
    Ok(energies(state, params, &AlgebraOptions::default())?.mu)
}
