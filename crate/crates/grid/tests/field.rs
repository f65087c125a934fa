use num_complex::Complex64 as C64;
use proptest::prelude::*;
use ptbec_grid::fft::Fft3;
use ptbec_grid::{cutoff_kernel, Error, Grid, GridField};

#[test]
fn non_power_of_two_grid_is_rejected() {
    assert!(matches!(Grid::new([48, 32, 32], [-1.0; 3], [1.0; 3]), Err(Error::InvalidGrid(_))));
}

#[test]
fn binary_round_trip_preserves_field() {
    let grid = Grid::new([8, 4, 8], [-1.0, -2.0, -1.0], [1.0, 2.0, 1.0]).unwrap();
    let field = GridField::new(grid, grid.sample(|r| C64::new(r[0], r[1] * r[2]))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("psi");
    field.save(&stem).unwrap();
    let back = GridField::load(&stem).unwrap();
    assert_eq!(back.grid, grid);
    assert_eq!(back.values, field.values);
    assert!(stem.with_extension("json").exists());
}

#[test]
fn cutoff_kernel_vanishes_at_long_wavelength_and_keeps_sign_pattern() {
    assert_eq!(cutoff_kernel([0.0; 3], 1, 2.0), 0.0);
    let small = cutoff_kernel([0.0, 1e-4, 0.0], 1, 2.0);
    assert!(small.abs() < 1e-6);
    // Far above 1/R the window tends to one.
    let along = cutoff_kernel([0.0, 200.0, 0.0], 1, 2.0);
    let across = cutoff_kernel([200.0, 0.0, 0.0], 1, 2.0);
    assert!((along - 8.0 * std::f64::consts::PI / 3.0).abs() < 1e-3);
    assert!((across + 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-3);
}

proptest! {
    #[test]
    fn fft_round_trip_is_identity(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8 * 4 * 16)) {
        let fft = Fft3::new([8, 4, 16]);
        let orig: Vec<C64> = values.iter().map(|&(a, b)| C64::new(a, b)).collect();
        let mut buf = orig.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn populations_sum_to_norm(seed in 0u64..1000) {
        let grid = Grid::new([16, 8, 8], [-2.0, -2.0, -2.0], [2.0, 2.0, 2.0]).unwrap();
        let s = seed as f64 / 1000.0;
        let f = GridField::new(grid, grid.sample(|r| C64::new((-(r[0] - s).powi(2) - r[1] * r[1] - r[2] * r[2]).exp(), s * r[0]))).unwrap();
        let [l, r] = f.populations();
        prop_assert!((l + r - f.norm()).abs() < 1e-12 * f.norm());
    }
}
