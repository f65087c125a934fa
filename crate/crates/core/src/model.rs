//! Physical parameters, the complex double-well potential and the
//! two-Gaussian variational state.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gauss3;

/// Orientation of the dipoles relative to the double well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleAxis {
    /// Dipoles along y, side by side across the wells.
    YRepulsive,
    /// Dipoles along x, head to tail across the wells.
    XAttractive,
}

impl DipoleAxis {
    /// Cartesian index of the dipole axis in (x, y, z) ordering.
    pub fn index(self) -> usize {
        match self {
            DipoleAxis::XAttractive => 0,
            DipoleAxis::YRepulsive => 1,
        }
    }
}

/// Dimensionless parameters of the extended Gross-Pitaevskii equation.
///
/// Lengths are measured in units of the inter-well spacing, energies in
/// `hbar^2 / (m l^2)`. The interaction strengths only enter as the products
/// `N a` and `N a_dd`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    pub v0: f64,
    pub gamma: f64,
    pub l: f64,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub na: f64,
    pub nadd: f64,
    pub dipole_axis: DipoleAxis,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            v0: 80.0,
            gamma: 0.0,
            l: 1.0,
            lx: 0.25,
            ly: 2.0,
            lz: 0.25,
            na: 0.0,
            nadd: 0.3,
            dipole_axis: DipoleAxis::YRepulsive,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.v0, self.gamma, self.l, self.lx, self.ly, self.lz, self.na, self.nadd]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.l <= 0.0 || self.lx <= 0.0 || self.ly <= 0.0 || self.lz <= 0.0 {
            return Err(Error::InvalidParams("widths and spacing must be positive".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParams("gain-loss strength must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_na(mut self, na: f64) -> Self {
        self.na = na;
        self
    }

    pub fn with_nadd(mut self, nadd: f64) -> Self {
        self.nadd = nadd;
        self
    }

    /// Complex prefactors of the left (gain) and right (loss) wells.
    pub(crate) fn well_strengths(&self) -> [C64; 2] {
        [C64::new(-self.v0, self.gamma), C64::new(-self.v0, -self.gamma)]
    }

    /// The two real well profiles `g+` (centred at -l/2) and `g-` (centred at +l/2).
    pub(crate) fn well_gaussians(&self) -> [Gauss3; 2] {
        [-0.5 * self.l, 0.5 * self.l].map(|center| {
            Gauss3::real_diagonal(
                [
                    0.5 / (self.lx * self.lx),
                    0.5 / (self.ly * self.ly),
                    0.5 / (self.lz * self.lz),
                ],
                [center, 0.0, 0.0],
            )
        })
    }

    /// Curvature-matched harmonic frequencies of one isolated well.
    pub fn well_frequencies(&self) -> [f64; 3] {
        let s = self.v0.sqrt();
        [s / self.lx, s / self.ly, s / self.lz]
    }
}

/// `V_ext(r) = -(V0 - i Gamma) g+(r) - (V0 + i Gamma) g-(r)`.
pub fn external_potential(params: &PhysicalParams, r: [f64; 3]) -> C64 {
    let [x, y, z] = r;
    let h = 0.5 * params.l;
    let tail = -y * y / (2.0 * params.ly * params.ly) - z * z / (2.0 * params.lz * params.lz);
    let gp = (-(x + h) * (x + h) / (2.0 * params.lx * params.lx) + tail).exp();
    let gm = (-(x - h) * (x - h) / (2.0 * params.lx * params.lx) + tail).exp();
    -C64::new(params.v0, -params.gamma) * gp - C64::new(params.v0, params.gamma) * gm
}

/// Number of stored real components per Gaussian.
pub const COMPONENTS_PER_GAUSSIAN: usize = 16;

/// Names of the stored real components, in storage order.
pub const COMPONENT_NAMES: [&str; COMPONENTS_PER_GAUSSIAN] = [
    "re_a_xx", "re_a_yy", "re_a_zz", "re_a_xz", "im_a_xx", "im_a_yy", "im_a_zz", "im_a_xz", "q_x",
    "q_y", "q_z", "p_x", "p_y", "p_z", "re_gamma", "im_gamma",
];

pub mod comp {
    pub const RE_AXX: usize = 0;
    pub const RE_AYY: usize = 1;
    pub const RE_AZZ: usize = 2;
    pub const RE_AXZ: usize = 3;
    pub const IM_AXX: usize = 4;
    pub const IM_AYY: usize = 5;
    pub const IM_AZZ: usize = 6;
    pub const IM_AXZ: usize = 7;
    pub const QX: usize = 8;
    pub const QY: usize = 9;
    pub const QZ: usize = 10;
    pub const PX: usize = 11;
    pub const PY: usize = 12;
    pub const PZ: usize = 13;
    pub const RE_G: usize = 14;
    pub const IM_G: usize = 15;
}

/// One Gaussian wave packet
/// `exp(-[(x-q)^T A (x-q) - i p^T (x-q) + gamma])` with `q_y = p_y = 0`
/// and `A_xy = A_yz = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub a_xx: C64,
    pub a_yy: C64,
    pub a_zz: C64,
    pub a_xz: C64,
    pub q_x: f64,
    pub q_z: f64,
    pub p_x: f64,
    pub p_z: f64,
    pub gamma: C64,
}

impl GaussianParams {
    /// Real diagonal Gaussian centred at `(q_x, 0, q_z)` at rest.
    pub fn diagonal(a: [f64; 3], q_x: f64, gamma: C64) -> Self {
        Self {
            a_xx: a[0].into(),
            a_yy: a[1].into(),
            a_zz: a[2].into(),
            a_xz: C64::new(0.0, 0.0),
            q_x,
            q_z: 0.0,
            p_x: 0.0,
            p_z: 0.0,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a_xx.re > 0.0
            && self.a_yy.re > 0.0
            && self.a_zz.re > 0.0
            && self.a_xx.re * self.a_zz.re - self.a_xz.re * self.a_xz.re > 0.0;
        let finite = self.to_components().iter().all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::NonNormalizable)
        }
    }

    pub fn to_components(&self) -> [f64; COMPONENTS_PER_GAUSSIAN] {
        [
            self.a_xx.re,
            self.a_yy.re,
            self.a_zz.re,
            self.a_xz.re,
            self.a_xx.im,
            self.a_yy.im,
            self.a_zz.im,
            self.a_xz.im,
            self.q_x,
            0.0,
            self.q_z,
            self.p_x,
            0.0,
            self.p_z,
            self.gamma.re,
            self.gamma.im,
        ]
    }

    /// Inverse of [`to_components`](Self::to_components); `q_y` and `p_y` are ignored.
    pub fn from_components(c: &[f64]) -> Self {
        use comp::*;
        Self {
            a_xx: C64::new(c[RE_AXX], c[IM_AXX]),
            a_yy: C64::new(c[RE_AYY], c[IM_AYY]),
            a_zz: C64::new(c[RE_AZZ], c[IM_AZZ]),
            a_xz: C64::new(c[RE_AXZ], c[IM_AXZ]),
            q_x: c[QX],
            q_z: c[QZ],
            p_x: c[PX],
            p_z: c[PZ],
            gamma: C64::new(c[RE_G], c[IM_G]),
        }
    }

    /// Parameters of `conj(g(-r))`.
    pub fn pt_image(&self) -> Self {
        Self {
            a_xx: self.a_xx.conj(),
            a_yy: self.a_yy.conj(),
            a_zz: self.a_zz.conj(),
            a_xz: self.a_xz.conj(),
            q_x: -self.q_x,
            q_z: -self.q_z,
            p_x: self.p_x,
            p_z: self.p_z,
            gamma: self.gamma.conj(),
        }
    }

    pub fn evaluate(&self, r: [f64; 3]) -> C64 {
        let dx = r[0] - self.q_x;
        let dy = r[1];
        let dz = r[2] - self.q_z;
        let quad = self.a_xx * dx * dx
            + self.a_yy * dy * dy
            + self.a_zz * dz * dz
            + 2.0 * self.a_xz * dx * dz;
        let lin = C64::new(0.0, self.p_x * dx + self.p_z * dz);
        (-(quad - lin + self.gamma)).exp()
    }

    /// Value of `gamma` that normalizes this Gaussian to `weight`.
    pub fn normalizing_gamma_re(&self, weight: f64) -> Result<f64> {
        let mut unit = *self;
        unit.gamma = C64::new(0.0, self.gamma.im);
        let n = Gauss3::from_params(&unit).overlap_self()?;
        Ok(0.5 * (n / weight).ln())
    }
}

/// Which of the stored real components are free in the variational dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    /// Release the off-diagonal `a_xz` width coupling.
    pub couple_xz: bool,
    /// Freeze the second Gaussian (single-packet dynamics).
    pub single_gaussian: bool,
}

impl Default for ParamLayout {
    fn default() -> Self {
        Self {
            couple_xz: false,
            single_gaussian: false,
        }
    }
}

impl ParamLayout {
    pub fn with_xz(couple_xz: bool) -> Self {
        Self {
            couple_xz,
            single_gaussian: false,
        }
    }

    /// Active component indices within one Gaussian, in storage order.
    pub fn per_gaussian(&self) -> Vec<usize> {
        use comp::*;
        let mut idx = vec![RE_AXX, RE_AYY, RE_AZZ];
        if self.couple_xz {
            idx.push(RE_AXZ);
        }
        idx.extend([IM_AXX, IM_AYY, IM_AZZ]);
        if self.couple_xz {
            idx.push(IM_AXZ);
        }
        idx.extend([QX, QZ, PX, PZ, RE_G, IM_G]);
        idx
    }

    pub fn active_gaussians(&self) -> usize {
        if self.single_gaussian {
            1
        } else {
            2
        }
    }

    /// Active indices into the 32-component state record.
    pub fn active_map(&self) -> Vec<usize> {
        let per = self.per_gaussian();
        (0..self.active_gaussians())
            .flat_map(|k| per.iter().map(move |&i| k * COMPONENTS_PER_GAUSSIAN + i))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.per_gaussian().len() * self.active_gaussians()
    }

    /// Active-vector index of `Im gamma` of Gaussian `k`.
    pub fn im_gamma_index(&self, k: usize) -> usize {
        let per = self.per_gaussian().len();
        k * per + per - 1
    }

    pub fn re_gamma_index(&self, k: usize) -> usize {
        self.im_gamma_index(k) - 1
    }
}

/// The superposition `Psi = g1 + g2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub g: [GaussianParams; 2],
    pub params: PhysicalParams,
}

impl VariationalState {
    pub fn new(g1: GaussianParams, g2: GaussianParams, params: PhysicalParams) -> Self {
        Self { g: [g1, g2], params }
    }

    pub fn validate(&self) -> Result<()> {
        self.g[0].validate()?;
        self.g[1].validate()?;
        let n = self.norm()?;
        if n.is_finite() && n > 0.0 {
            Ok(())
        } else {
            Err(Error::NonNormalizable)
        }
    }

    pub fn to_components(&self) -> [f64; 2 * COMPONENTS_PER_GAUSSIAN] {
        let mut out = [0.0; 2 * COMPONENTS_PER_GAUSSIAN];
        out[..16].copy_from_slice(&self.g[0].to_components());
        out[16..].copy_from_slice(&self.g[1].to_components());
        out
    }

    pub fn from_components(c: &[f64], params: PhysicalParams) -> Self {
        Self {
            g: [
                GaussianParams::from_components(&c[..16]),
                GaussianParams::from_components(&c[16..32]),
            ],
            params,
        }
    }

    pub fn to_vector(&self, layout: &ParamLayout) -> Vec<f64> {
        let c = self.to_components();
        layout.active_map().iter().map(|&i| c[i]).collect()
    }

    pub fn with_vector(&self, layout: &ParamLayout, v: &[f64]) -> Self {
        let mut c = self.to_components();
        for (&i, &x) in layout.active_map().iter().zip(v) {
            c[i] = x;
        }
        Self::from_components(&c, self.params)
    }

    pub fn holomorphic(&self) -> [Gauss3; 2] {
        [Gauss3::from_params(&self.g[0]), Gauss3::from_params(&self.g[1])]
    }

    /// `<Psi|Psi>`.
    pub fn norm(&self) -> Result<f64> {
        let h = self.holomorphic();
        let mut n = C64::new(0.0, 0.0);
        for l in 0..2 {
            for k in 0..2 {
                n += h[l].conj().mul(&h[k]).integral()?;
            }
        }
        Ok(n.re)
    }

    /// Populations `I^k = <g^k|g^k>`.
    pub fn populations(&self) -> Result<[f64; 2]> {
        let h = self.holomorphic();
        Ok([h[0].overlap_self()?, h[1].overlap_self()?])
    }

    /// Rescales both amplitudes so that `<Psi|Psi> = target`.
    pub fn normalized_to(&self, target: f64) -> Result<Self> {
        let n = self.norm()?;
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonNormalizable);
        }
        let shift = 0.5 * (n / target).ln();
        let mut out = *self;
        for g in out.g.iter_mut() {
            g.gamma.re += shift;
        }
        Ok(out)
    }

    pub fn normalized(&self) -> Result<Self> {
        self.normalized_to(1.0)
    }

    /// Removes the global phase so that `Im gamma^1 = 0`, and wraps
    /// `Im gamma^2` into `(-pi, pi]`.
    pub fn gauge_fixed(&self) -> Self {
        let mut out = *self;
        let phase = out.g[0].gamma.im;
        for g in out.g.iter_mut() {
            g.gamma.im = wrap_angle(g.gamma.im - phase);
        }
        out
    }

    /// Canonical label order: g1 is the left packet, ties broken by the
    /// smaller `Re gamma` (the larger amplitude).
    pub fn canonical(&self) -> Self {
        let [a, b] = self.g;
        let swap = b.q_x < a.q_x || (b.q_x == a.q_x && b.gamma.re < a.gamma.re);
        if swap {
            Self {
                g: [b, a],
                params: self.params,
            }
        } else {
            *self
        }
    }

    pub fn evaluate(&self, r: [f64; 3]) -> C64 {
        self.g[0].evaluate(r) + self.g[1].evaluate(r)
    }

    /// Distance between gauge-fixed canonical parameter vectors, with
    /// phases compared modulo `2 pi`.
    pub fn parameter_distance(&self, other: &Self) -> f64 {
        let a = self.canonical().gauge_fixed().to_components();
        let b = other.canonical().gauge_fixed().to_components();
        let mut s = 0.0;
        for i in 0..a.len() {
            let mut d = a[i] - b[i];
            if i % COMPONENTS_PER_GAUSSIAN == comp::IM_G {
                d = wrap_angle(d);
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// `||Psi - Phi|| / ||Psi||` from analytic overlaps.
    pub fn wavefunction_distance(&self, other: &Self) -> Result<f64> {
        let a = self.holomorphic();
        let b = other.holomorphic();
        let mut d2 = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                let t = a[j].conj().mul(&a[k]).integral()? - a[j].conj().mul(&b[k]).integral()?
                    - b[j].conj().mul(&a[k]).integral()?
                    + b[j].conj().mul(&b[k]).integral()?;
                d2 += t.re;
            }
        }
        Ok(d2.max(0.0).sqrt() / self.norm()?.sqrt())
    }
}

pub(crate) fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// The state representing `conj(Psi(-r))`, in canonical label order.
pub fn apply_pt(state: &VariationalState) -> VariationalState {
    VariationalState {
        g: [state.g[0].pt_image(), state.g[1].pt_image()],
        params: state.params,
    }
    .canonical()
}

/// `min_theta ||Psi - exp(i theta) PT Psi|| / ||Psi||`; zero iff the state is
/// PT symmetric up to a global phase.
pub fn pt_residual(state: &VariationalState) -> Result<f64> {
    let s = state.canonical();
    let p = apply_pt(&s);
    let a = s.holomorphic();
    let b = p.holomorphic();
    let mut saa = C64::new(0.0, 0.0);
    let mut sbb = C64::new(0.0, 0.0);
    let mut sab = C64::new(0.0, 0.0);
    for j in 0..2 {
        for k in 0..2 {
            saa += a[j].conj().mul(&a[k]).integral()?;
            sbb += b[j].conj().mul(&b[k]).integral()?;
            sab += a[j].conj().mul(&b[k]).integral()?;
        }
    }
    let d2 = (saa.re - sab.norm()) + (sbb.re - sab.norm());
    Ok(d2.max(0.0).sqrt() / saa.re.sqrt())
}

pub fn evaluate_wavefunction(state: &VariationalState, r: [f64; 3]) -> C64 {
    state.evaluate(r)
}

/// JSON record of one Gaussian: all sixteen real components by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianRecord {
    pub re_a_xx: f64,
    pub re_a_yy: f64,
    pub re_a_zz: f64,
    pub re_a_xz: f64,
    pub im_a_xx: f64,
    pub im_a_yy: f64,
    pub im_a_zz: f64,
    pub im_a_xz: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub q_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub re_gamma: f64,
    pub im_gamma: f64,
}

impl From<&GaussianParams> for GaussianRecord {
    fn from(g: &GaussianParams) -> Self {
        let c = g.to_components();
        Self {
            re_a_xx: c[0],
            re_a_yy: c[1],
            re_a_zz: c[2],
            re_a_xz: c[3],
            im_a_xx: c[4],
            im_a_yy: c[5],
            im_a_zz: c[6],
            im_a_xz: c[7],
            q_x: c[8],
            q_y: c[9],
            q_z: c[10],
            p_x: c[11],
            p_y: c[12],
            p_z: c[13],
            re_gamma: c[14],
            im_gamma: c[15],
        }
    }
}

impl From<&GaussianRecord> for GaussianParams {
    fn from(r: &GaussianRecord) -> Self {
        GaussianParams::from_components(&[
            r.re_a_xx, r.re_a_yy, r.re_a_zz, r.re_a_xz, r.im_a_xx, r.im_a_yy, r.im_a_zz,
            r.im_a_xz, r.q_x, r.q_y, r.q_z, r.p_x, r.p_y, r.p_z, r.re_gamma, r.im_gamma,
        ])
    }
}

/// Serialized form of a [`VariationalState`] plus free-form metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub schema_version: u32,
    pub params: PhysicalParams,
    pub gaussians: [GaussianRecord; 2],
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl StateRecord {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(state: &VariationalState) -> Self {
        Self {
            schema_version: Self::SCHEMA_VERSION,
            params: state.params,
            gaussians: [(&state.g[0]).into(), (&state.g[1]).into()],
            metadata: Default::default(),
        }
    }

    pub fn state(&self) -> VariationalState {
        VariationalState::new(
            (&self.gaussians[0]).into(),
            (&self.gaussians[1]).into(),
            self.params,
        )
    }
}
