//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Relative tolerance against the integral of the absolute integrand.
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_intervals: 200,
            initial_panels: 4,
        }
    }
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [C64; N],
    abs: [f64; N],
    error: f64,
}

fn gk15<const N: usize, F: FnMut(f64) -> [C64; N]>(
    f: &mut F,
    a: f64,
    b: f64,
) -> Panel<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let zero = C64::new(0.0, 0.0);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];
    let fc = f(c);
    let mut abs = [0.0; N];
    for i in 0..N {
        kron[i] = fc[i] * WGK[7];
        gauss[i] = fc[i] * WG[3];
        abs[i] += fc[i].norm() * WGK[7] * h;
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] += s * WGK[j];
            if j % 2 == 1 {
                gauss[i] += s * WG[j / 2];
            }
            abs[i] += (f1[i].norm() + f2[i].norm()) * WGK[j] * h;
        }
    }
    let mut error = 0.0f64;
    let mut value = [zero; N];
    for i in 0..N {
        value[i] = kron[i] * h;
        error = error.max(((kron[i] - gauss[i]) * h).norm());
    }
    Panel {
        a,
        b,
        value,
        abs,
        error,
    }
}

/// Integrates `f` over `[a, b]` until the estimated error is below
/// `rel_tol * max_i int |f_i|`.
pub fn integrate<const N: usize, F: FnMut(f64) -> [C64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<[C64; N]> {
    let n0 = opts.initial_panels.max(1);
    let mut panels: Vec<Panel<N>> = (0..n0)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / n0 as f64;
            let hi = a + (b - a) * (i + 1) as f64 / n0 as f64;
            gk15(&mut f, lo, hi)
        })
        .collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        let scale = (0..N)
            .map(|i| panels.iter().map(|p| p.abs[i]).sum::<f64>())
            .fold(0.0, f64::max);
        let target = opts.rel_tol * scale;
        let finite = total_err.is_finite() && scale.is_finite();
        if finite && (total_err <= target || scale == 0.0) {
            let mut out = [C64::new(0.0, 0.0); N];
            for p in &panels {
                for i in 0..N {
                    out[i] += p.value[i];
                }
            }
            return Ok(out);
        }
        if !finite || panels.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                requested: opts.rel_tol,
                achieved: total_err / scale.max(f64::MIN_POSITIVE),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&mut f, p.a, mid));
        panels.push(gk15(&mut f, mid, p.b));
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` panels of `order` nodes.
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x0, w0) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(panels * order);
    let mut w = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = a + h * (p as f64 + 0.5);
        for (xi, wi) in x0.iter().zip(&w0) {
            x.push(c + 0.5 * h * xi);
            w.push(0.5 * h * wi);
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| [C64::new(x.powi(5), 3.0 * x * x)], 0.0, 2.0, &QuadOptions::default())
            .unwrap();
        assert!((r[0].re - 64.0 / 6.0).abs() < 1e-13);
        assert!((r[0].im - 8.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let opts = QuadOptions::default();
        let r = integrate(|x| [C64::new(1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0)], 0.0, 1.0, &opts)
            .unwrap();
        let exact = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert!((r[0].re - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn reports_failure() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            max_intervals: 6,
            initial_panels: 1,
        };
        let err = integrate(|x| [C64::new(x.abs().sqrt().recip(), 0.0)], -1.0, 1.0, &opts);
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n = {n}");
        }
    }
}
