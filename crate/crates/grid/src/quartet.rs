//! Dipolar pair integrals by direct quadrature in momentum space.
//!
//! `int int G1(r) K(r - r') G2(r') d^3r d^3r'` becomes a single 3D integral
//! over `k` of the product of the closed-form Fourier transforms of the two
//! Gaussians with the dipolar kernel, evaluated here on a tensor
//! Gauss-Legendre grid in spherical coordinates around the dipole axis.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use ptbec_core::gaussian::Gauss3;
use ptbec_core::model::DipoleAxis;
use ptbec_core::quadrature::composite_gl;

use crate::error::{Error, Result};

/// `int G(r) exp(-i k.r) d^3r` of a general complex Gaussian.
struct Fourier {
    minv: Matrix3<C64>,
    b: Vector3<C64>,
    pre: C64,
}

impl Fourier {
    fn new(g: &Gauss3) -> Result<Self> {
        let z = C64::new(0.0, 0.0);
        let m = Matrix3::new(g.m.xx, z, g.m.xz, z, g.my, z, g.m.xz, z, g.m.zz);
        let minv = m
            .try_inverse()
            .ok_or_else(|| Error::Precondition("singular Gaussian exponent".into()))?;
        // sqrt(det) as the product of per-block roots keeps the branch continuous
        // from the real positive case.
        let block = g.m.xx * g.m.zz - g.m.xz * g.m.xz;
        let pre = PI.powf(1.5) / (block.sqrt() * g.my.sqrt()) * g.c.exp();
        Ok(Self {
            minv,
            b: Vector3::new(g.b[0], z, g.b[1]),
            pre,
        })
    }

    fn at(&self, k: Vector3<f64>) -> C64 {
        let beta = self.b - k.map(|v| C64::new(0.0, v));
        let quad = (beta.transpose() * self.minv * beta)[(0, 0)];
        self.pre * (0.25 * quad).exp()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    pub kmax: f64,
    pub radial_panels: usize,
    pub angular_panels: usize,
    pub order: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            kmax: 60.0,
            radial_panels: 60,
            angular_panels: 8,
            order: 12,
        }
    }
}

/// `(2 pi)^-3 int F1(k) F2(-k) (4 pi / 3)(3 k_d^2 / k^2 - 1) d^3k`, the
/// dipolar interaction of the (complex) densities `g1` and `g2` with the
/// kernel `(1 - 3 cos^2 theta) / r^3`.
pub fn ddi_pair_quadrature(g1: &Gauss3, g2: &Gauss3, axis: DipoleAxis, opts: &QuadratureOptions) -> Result<C64> {
    for g in [g1, g2] {
        let block = g.m.xx * g.m.zz - g.m.xz * g.m.xz;
        if g.my.re <= 0.0 || g.m.xx.re <= 0.0 || block.re <= 0.0 {
            return Err(Error::Precondition("Gaussian is not normalizable".into()));
        }
    }
    let (kr, wr) = composite_gl(0.0, opts.kmax, opts.radial_panels, opts.order);
    let (u, wu) = composite_gl(0.0, PI, opts.angular_panels, opts.order);
    let (phi, wphi) = composite_gl(0.0, 2.0 * PI, opts.angular_panels, opts.order);
    let (f1, f2) = (Fourier::new(g1)?, Fourier::new(g2)?);
    let mut s = C64::new(0.0, 0.0);
    for (kk, wk) in kr.iter().zip(&wr) {
        for (ui, wui) in u.iter().zip(&wu) {
            let (sin, cos) = ui.sin_cos();
            let ang = 4.0 * PI / 3.0 * (3.0 * cos * cos - 1.0) * sin;
            for (ph, wp) in phi.iter().zip(&wphi) {
                let (a1, a2) = (sin * ph.cos(), sin * ph.sin());
                let dir = match axis {
                    DipoleAxis::YRepulsive => Vector3::new(a1, cos, a2),
                    DipoleAxis::XAttractive => Vector3::new(cos, a1, a2),
                };
                let k = dir * *kk;
                s += f1.at(k) * f2.at(-k) * ang * (kk * kk * wk * wui * wp);
            }
        }
    }
    Ok(s / (2.0 * PI).powi(3))
}
