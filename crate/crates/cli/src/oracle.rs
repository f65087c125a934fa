//! Comparisons of the variational machinery against independent oracles.

use num_complex::Complex64 as C64;
use ptbec_core::gaussian::{ddi_pair_integral, AlgebraOptions, Gauss3, MONO_ONE};
use ptbec_core::model::{DipoleAxis, GaussianParams, PhysicalParams};
use ptbec_core::stationary::{ite_ground_state_with, run_parallel, seed_state, IteOptions};
use ptbec_grid::{ddi_pair_quadrature, grid_ite, lanczos_ground, GpeOperator, Grid, GridField, GridIteOptions, QuadratureOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

/// A random normalizable packet with complex widths, an `x-z` tilt, offsets
/// and momenta.
pub fn random_gaussian(rng: &mut ChaCha8Rng) -> GaussianParams {
    let mut c = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let (axx, azz) = (c(4.0, 16.0), c(4.0, 16.0));
    GaussianParams {
        a_xx: C64::new(axx, c(-3.0, 3.0)),
        a_yy: C64::new(c(0.3, 3.0), c(-0.5, 0.5)),
        a_zz: C64::new(azz, c(-3.0, 3.0)),
        a_xz: C64::new(0.3 * (axx * azz).sqrt() * c(-1.0, 1.0), c(-1.0, 1.0)),
        q_x: c(-0.6, 0.6),
        q_z: c(-0.1, 0.1),
        p_x: c(-2.0, 2.0),
        p_z: c(-2.0, 2.0),
        gamma: C64::new(0.0, c(-3.0, 3.0)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuartetResult {
    pub index: usize,
    pub semi_analytic: C64,
    pub quadrature: C64,
    pub relative_error: f64,
}

/// `int int g_l* g_k K g_m* g_n` for `count` random quartets, from the
/// semi-analytic one-dimensional integral and from momentum-space quadrature.
pub fn ddi_quartets(count: usize, seed: u64, axis: DipoleAxis, jobs: usize) -> Result<Vec<QuartetResult>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quartets: Vec<[GaussianParams; 4]> = (0..count)
        .map(|_| [(); 4].map(|_| random_gaussian(&mut rng)))
        .collect();
    let indexed: Vec<(usize, [GaussianParams; 4])> = quartets.into_iter().enumerate().collect();
    let results = run_parallel(&indexed, jobs, |(i, q)| -> Result<QuartetResult, CliError> {
        let h = q.map(|g| Gauss3::from_params(&g));
        let g1 = h[0].conj().mul(&h[1]);
        let g2 = h[2].conj().mul(&h[3]);
        let ours = ddi_pair_integral(&g1, &g2, axis, &AlgebraOptions::default())?[MONO_ONE];
        let oracle = ddi_pair_quadrature(&g1, &g2, axis, &QuadratureOptions::default())?;
        Ok(QuartetResult {
            index: *i,
            semi_analytic: ours,
            quadrature: oracle,
            relative_error: (ours - oracle).norm() / oracle.norm(),
        })
    });
    results.into_iter().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateComparison {
    pub grid: Grid,
    /// `Err` carries the failure message (e.g. collapse).
    pub variational_e_mf: Result<f64, String>,
    pub grid_e_mf: Result<f64, String>,
    pub relative_gap: Option<f64>,
    /// Whether either side reported a collapse.
    pub collapse: bool,
}

/// Ground state at `gamma = 0` from variational and grid imaginary time.
pub fn ground_state_comparison(params: &PhysicalParams, grid: Grid) -> Result<GroundStateComparison, CliError> {
    if params.gamma != 0.0 {
        return Err(CliError::Usage("ground-state comparison needs gamma = 0".into()));
    }
    let seed = seed_state(params, [0.5, 0.5], 0.0)?;
    let mut collapse = false;
    let mut note = |e: CliError| {
        collapse |= matches!(e, CliError::Collapse(_));
        e.to_string()
    };
    let variational = ite_ground_state_with(&seed, params, &IteOptions::default())
        .map(|r| r.state.e_mf.re)
        .map_err(|e| note(e.into()));
    let grid_e = GpeOperator::new(params, grid)
        .and_then(|op| {
            let init = GridField::from_variational(&seed, grid)?;
            grid_ite(&op, &init, &GridIteOptions::default())
        })
        .map(|r| r.e_mf)
        .map_err(|e| note(e.into()));
    let relative_gap = match (&variational, &grid_e) {
        (Ok(v), Ok(g)) => Some(((v - g) / g).abs()),
        _ => None,
    };
    Ok(GroundStateComparison {
        grid,
        variational_e_mf: variational,
        grid_e_mf: grid_e,
        relative_gap,
        collapse,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearComparison {
    pub grid: Grid,
    pub imaginary_time: f64,
    pub lanczos: f64,
    pub lanczos_iterations: usize,
    pub difference: f64,
}

/// Lowest eigenvalue of the linear Hermitian grid Hamiltonian from imaginary
/// time and from Lanczos.
pub fn linear_comparison(params: &PhysicalParams, grid: Grid) -> Result<LinearComparison, CliError> {
    if params.gamma != 0.0 {
        return Err(CliError::Usage("linear comparison needs gamma = 0".into()));
    }
    let p = PhysicalParams {
        na: 0.0,
        nadd: 0.0,
        ..*params
    };
    let op = GpeOperator::new(&p, grid)?;
    let init = GridField::from_variational(&seed_state(&p, [0.5, 0.5], 0.0)?, grid)?;
    let ite = grid_ite(&op, &init, &GridIteOptions::default())?;
    let lz = lanczos_ground(&op, &ite.field, 3000, 1e-13)?;
    Ok(LinearComparison {
        grid,
        imaginary_time: ite.e_mf,
        lanczos: lz.eigenvalue,
        lanczos_iterations: lz.iterations,
        difference: (ite.e_mf - lz.eigenvalue).abs(),
    })
}
