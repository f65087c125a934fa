//! Lowest eigenvalue of the linear grid Hamiltonian by plain Lanczos.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::operator::GpeOperator;

/// Number of eigenvalues of the symmetric tridiagonal matrix `(a, b)` below
/// `x` (Sturm count).
fn count_below(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] / q };
        q = a[i] - x - off;
        if q == 0.0 {
            q = f64::EPSILON * (a[i].abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_ritz(a: &[f64], b: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..a.len() {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i < b.len() { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosResult {
    pub eigenvalue: f64,
    pub iterations: usize,
    /// Change of the estimate over the last check interval.
    pub change: f64,
}

/// Ground-state energy of a linear, Hermitian operator from the Krylov space
/// of `start`. Loss of orthogonality only produces spurious copies of
/// converged Ritz values, which leaves the extreme one intact.
pub fn lanczos_ground(op: &GpeOperator, start: &GridField, max_iter: usize, tol: f64) -> Result<LanczosResult> {
    if !op.is_linear() || !op.is_hermitian() {
        return Err(Error::Precondition("Lanczos oracle needs a linear Hermitian operator".into()));
    }
    let dot = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum::<C64>();
    let mut v: Vec<C64> = start.values.clone();
    let n0 = dot(&v, &v).re.sqrt();
    v.iter_mut().for_each(|x| *x /= n0);
    let mut prev = vec![C64::new(0.0, 0.0); v.len()];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut last = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let mut w = op.apply(&v);
        let alpha = dot(&v, &w).re;
        let beta_prev = b.last().copied().unwrap_or(0.0);
        for i in 0..w.len() {
            w[i] -= alpha * v[i] + beta_prev * prev[i];
        }
        a.push(alpha);
        let beta = dot(&w, &w).re.sqrt();
        if it % 20 == 0 || beta < 1e-14 {
            let e = smallest_ritz(&a, &b);
            change = (e - last).abs();
            last = e;
            if change < tol * e.abs().max(1.0) || beta < 1e-14 {
                return Ok(LanczosResult {
                    eigenvalue: e,
                    iterations: it,
                    change,
                });
            }
        }
        b.push(beta);
        prev = std::mem::replace(&mut v, w);
        v.iter_mut().for_each(|x| *x /= beta);
    }
    Err(Error::NoConvergence { steps: max_iter, change })
}
