//! The extended Gross-Pitaevskii operator on a grid.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use ptbec_core::model::{external_potential, DipoleAxis, PhysicalParams};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fft::Fft3;
use crate::field::{Grid, GridField};

/// Per-norm energy contributions; `e_mf = kinetic + external + (contact +
/// ddi) / 2` and `mu = kinetic + external + contact + ddi`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct GridEnergies {
    pub kinetic: f64,
    pub external: C64,
    pub contact: f64,
    pub ddi: f64,
    pub e_mf: C64,
    pub mu: C64,
}

pub struct GpeOperator {
    pub grid: Grid,
    pub potential: Vec<C64>,
    /// `k^2 / 2` in FFT order.
    pub kinetic: Vec<f64>,
    /// `4 pi N a`.
    pub contact: f64,
    /// `3 N a_dd` times the cut-off dipolar kernel in Fourier space, if any.
    pub ddi_kernel: Option<Vec<f64>>,
    pub cutoff_radius: f64,
    fft: Fft3,
}

/// Fourier transform of `(1 - 3 cos^2 theta) / r^3` restricted to `r < R`.
pub fn cutoff_kernel(k: [f64; 3], axis: usize, radius: f64) -> f64 {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if k2 == 0.0 {
        return 0.0;
    }
    let x = k2.sqrt() * radius;
    // 1 + 3 cos x / x^2 - 3 sin x / x^3, which vanishes like x^2 / 10
    let window = if x < 1e-2 {
        x * x / 10.0 - x.powi(4) / 280.0
    } else {
        1.0 + 3.0 * x.cos() / (x * x) - 3.0 * x.sin() / (x * x * x)
    };
    (4.0 * PI / 3.0) * (3.0 * k[axis] * k[axis] / k2 - 1.0) * window
}

impl GpeOperator {
    /// Double-well operator of `params` with the dipolar cutoff at half the
    /// smallest box edge.
    pub fn new(params: &PhysicalParams, grid: Grid) -> Result<Self> {
        let potential = grid.sample(|r| external_potential(params, r));
        Self::with_potential(grid, potential, params.na, params.nadd, params.dipole_axis)
    }

    pub fn with_potential(grid: Grid, potential: Vec<C64>, na: f64, nadd: f64, axis: DipoleAxis) -> Result<Self> {
        grid.validate()?;
        let ks = [grid.wavenumbers(0), grid.wavenumbers(1), grid.wavenumbers(2)];
        let radius = 0.5 * (0..3).map(|a| grid.hi[a] - grid.lo[a]).fold(f64::INFINITY, f64::min);
        let mut kinetic = Vec::with_capacity(grid.len());
        let mut kernel = Vec::with_capacity(if nadd != 0.0 { grid.len() } else { 0 });
        for &kx in &ks[0] {
            for &ky in &ks[1] {
                for &kz in &ks[2] {
                    kinetic.push(0.5 * (kx * kx + ky * ky + kz * kz));
                    if nadd != 0.0 {
                        kernel.push(3.0 * nadd * cutoff_kernel([kx, ky, kz], axis.index(), radius));
                    }
                }
            }
        }
        Ok(Self {
            grid,
            potential,
            kinetic,
            contact: 4.0 * PI * na,
            ddi_kernel: (nadd != 0.0).then_some(kernel),
            cutoff_radius: radius,
            fft: Fft3::new(grid.n),
        })
    }

    pub fn is_linear(&self) -> bool {
        self.contact == 0.0 && self.ddi_kernel.is_none()
    }

    pub fn is_hermitian(&self) -> bool {
        self.potential.iter().all(|v| v.im == 0.0)
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    /// Dipolar mean-field potential of `density`.
    pub fn ddi_potential(&self, density: &[f64]) -> Option<Vec<f64>> {
        let kernel = self.ddi_kernel.as_ref()?;
        let mut buf: Vec<C64> = density.iter().map(|&d| C64::new(d, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf.iter_mut().zip(kernel).for_each(|(v, k)| *v *= k);
        self.fft.inverse(&mut buf);
        Some(buf.into_iter().map(|v| v.re).collect())
    }

    /// Contact plus dipolar potential of `density`.
    pub fn mean_field(&self, density: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = density.iter().map(|d| self.contact * d).collect();
        if let Some(d) = self.ddi_potential(density) {
            v.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        v
    }

    /// `T psi` through the spectral representation.
    pub fn apply_kinetic(&self, psi: &[C64]) -> Vec<C64> {
        let mut buf = psi.to_vec();
        self.fft.forward(&mut buf);
        buf.iter_mut().zip(&self.kinetic).for_each(|(v, k)| *v *= k);
        self.fft.inverse(&mut buf);
        buf
    }

    /// Full (nonlinear) Hamiltonian applied to `psi`.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = self.apply_kinetic(psi);
        let mf = if self.is_linear() {
            None
        } else {
            Some(self.mean_field(&psi.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()))
        };
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = self.potential[i];
            if let Some(m) = &mf {
                v += m[i];
            }
            *o += v * psi[i];
        }
        out
    }

    pub fn energies(&self, field: &GridField) -> GridEnergies {
        let dv = self.grid.cell_volume();
        let n = field.norm();
        let density = field.density();
        let mut spec = field.values.clone();
        self.fft.forward(&mut spec);
        // Parseval: sum |psi_k|^2 = N_points * sum |psi|^2
        let kin = spec.iter().zip(&self.kinetic).map(|(v, k)| v.norm_sqr() * k).sum::<f64>() * dv
            / self.grid.len() as f64;
        let ext: C64 = density.iter().zip(&self.potential).map(|(d, v)| v * d).sum::<C64>() * dv;
        let contact = self.contact * density.iter().map(|d| d * d).sum::<f64>() * dv;
        let ddi = self
            .ddi_potential(&density)
            .map(|phi| phi.iter().zip(&density).map(|(p, d)| p * d).sum::<f64>() * dv)
            .unwrap_or(0.0);
        GridEnergies {
            kinetic: kin / n,
            external: ext / n,
            contact: contact / n,
            ddi: ddi / n,
            e_mf: (kin + ext + 0.5 * (contact + ddi)) / n,
            mu: (kin + ext + contact + ddi) / n,
        }
    }
}
