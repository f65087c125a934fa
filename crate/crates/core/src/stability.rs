//! Linear stability of fixed points from the Jacobian of the
//! phase-compensated variational flow.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::AlgebraOptions;
use crate::model::VariationalState;
use crate::stationary::StationaryState;
use crate::tdvp::{Flow, TdvpOptions, TimeMode};

#[derive(Clone, Copy, Debug)]
pub struct StabilityOptions {
    /// Relative central-difference step of the coarse level.
    pub fd_step: f64,
    /// Bound on `max|J_h - J_{h/2}| / max|J|`.
    pub richardson_tol: f64,
    pub tdvp: TdvpOptions,
    /// Number of gauge zero modes to exclude from the verdict.
    pub expected_zero_modes: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            richardson_tol: 1e-5,
            tdvp: TdvpOptions {
                algebra: AlgebraOptions {
                    ddi_tol: 1e-12,
                    ..Default::default()
                },
                ..Default::default()
            },
            expected_zero_modes: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilitySpectrum {
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<C64>,
    pub stable: bool,
    pub zero_modes: usize,
    /// Indices into `eigenvalues` of the excluded gauge modes.
    pub zero_indices: Vec<usize>,
    pub pairing_defect: f64,
    pub spectral_radius: f64,
    pub stab_tol: f64,
    /// Largest `|Re Lambda|` over the non-gauge modes.
    pub max_re: f64,
}

/// `F(z) = f(z) - phase(mu(z))`, zero at any stationary state.
pub struct CompensatedFlow {
    flow: Flow,
    template: VariationalState,
}

impl CompensatedFlow {
    pub fn new(fixed_point: &StationaryState, opts: &TdvpOptions) -> Self {
        Self {
            flow: Flow::new(fixed_point.state.params, *opts, TimeMode::RealTime),
            template: fixed_point.state,
        }
    }

    pub fn dim(&self) -> usize {
        self.flow.layout().dim()
    }

    pub fn point(&self) -> Vec<f64> {
        self.template.to_vector(self.flow.layout())
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let s = self.template.with_vector(self.flow.layout(), z);
        s.validate()?;
        let v = self.flow.velocity(&s)?;
        let f = v.active(self.flow.layout());
        let ph = self.flow.phase_mode(v.energies.mu);
        Ok(f.iter().zip(&ph).map(|(a, b)| a - b).collect())
    }

    fn central(&self, z: &[f64], rel: f64) -> Result<DMatrix<f64>> {
        let n = z.len();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let h = rel * z[c].abs().max(1.0);
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[c] += h;
            zm[c] -= h;
            let fp = self.eval(&zp)?;
            let fm = self.eval(&zm)?;
            for r in 0..n {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Richardson-extrapolated Jacobian from steps `h` and `h/2`.
    pub fn jacobian(&self, fd_step: f64, richardson_tol: f64) -> Result<DMatrix<f64>> {
        let z = self.point();
        let coarse = self.central(&z, fd_step)?;
        let fine = self.central(&z, 0.5 * fd_step)?;
        let scale = fine.amax().max(f64::MIN_POSITIVE);
        let difference = (&coarse - &fine).amax() / scale;
        if difference > richardson_tol {
            return Err(Error::Richardson { difference });
        }
        Ok((fine * 4.0 - coarse) / 3.0)
    }
}

pub fn stability_spectrum(fixed_point: &StationaryState) -> Result<StabilitySpectrum> {
    stability_spectrum_with(fixed_point, &StabilityOptions::default())
}

pub fn stability_spectrum_with(
    fixed_point: &StationaryState,
    opts: &StabilityOptions,
) -> Result<StabilitySpectrum> {
    let cf = CompensatedFlow::new(fixed_point, &opts.tdvp);
    let j = cf.jacobian(opts.fd_step, opts.richardson_tol)?;
    Ok(spectrum_of(&j, opts.expected_zero_modes))
}

/// Eigen-analysis of a Jacobian, excluding the `zero_modes` eigenvalues of
/// smallest modulus.
pub fn spectrum_of(j: &DMatrix<f64>, zero_modes: usize) -> StabilitySpectrum {
    let mut eigenvalues: Vec<C64> = j.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let stab_tol = 1e-6 * (1.0 + spectral_radius);
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[a].norm().total_cmp(&eigenvalues[b].norm()));
    let zero_indices: Vec<usize> = order.into_iter().take(zero_modes).collect();
    let max_re = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| !zero_indices.contains(i))
        .map(|(_, l)| l.re.abs())
        .fold(0.0, f64::max);
    StabilitySpectrum {
        pairing_defect: pairing_defect(&eigenvalues) / spectral_radius.max(f64::MIN_POSITIVE),
        stable: max_re < stab_tol,
        zero_modes: zero_indices
            .iter()
            .filter(|&&i| eigenvalues[i].norm() < 1e-4 * (1.0 + spectral_radius))
            .count(),
        zero_indices,
        spectral_radius,
        stab_tol,
        max_re,
        eigenvalues,
    }
}

/// Greedy matching of each `Lambda` with the nearest unmatched `-Lambda`;
/// returns the largest mismatch.
pub fn pairing_defect(eigenvalues: &[C64]) -> f64 {
    let n = eigenvalues.len();
    let mut used = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[b].norm().total_cmp(&eigenvalues[a].norm()));
    let mut worst: f64 = 0.0;
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = -eigenvalues[i];
        let best = (0..n)
            .filter(|&k| !used[k])
            .min_by(|&a, &b| (eigenvalues[a] - target).norm().total_cmp(&(eigenvalues[b] - target).norm()));
        match best {
            Some(k) => {
                used[k] = true;
                worst = worst.max((eigenvalues[k] - target).norm());
            }
            // An odd leftover must itself be its own partner, i.e. zero.
            None => worst = worst.max(eigenvalues[i].norm()),
        }
    }
    worst
}

/// Smallest `|Im Lambda|` among the non-gauge modes with `|Re Lambda|`
/// below the stability tolerance.
pub fn smallest_excitation(spectrum: &StabilitySpectrum) -> Result<f64> {
    spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, l)| !spectrum.zero_indices.contains(i) && l.re.abs() < spectrum.stab_tol)
        .map(|(_, l)| l.im.abs())
        .filter(|v| *v > spectrum.stab_tol)
        .min_by(f64::total_cmp)
        .ok_or(Error::Undefined)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_of_symmetric_spectrum_is_exact() {
        let ev = [C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.5), C64::new(-2.0, -0.5)];
        assert_eq!(pairing_defect(&ev), 0.0);
        let ev = [C64::new(0.0, 1.0), C64::new(0.0, -1.1)];
        assert!((pairing_defect(&ev) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn harmonic_spectrum_is_stable() {
        // x' = p, p' = -w^2 x plus one null direction
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -4.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = spectrum_of(&j, 1);
        assert!(s.stable);
        assert_eq!(s.zero_modes, 1);
        assert!((smallest_excitation(&s).unwrap() - 2.0).abs() < 1e-12);
    }
}
