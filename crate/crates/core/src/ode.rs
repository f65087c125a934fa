//! Dormand-Prince 5(4) integrator with embedded error control.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: f64::INFINITY,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights minus the embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive stepper; `f` may fail, which rejects the trial step.
pub struct Dopri5 {
    pub opts: OdeOptions,
    pub t: f64,
    pub y: Vec<f64>,
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
    k1: Vec<f64>,
}

impl Dopri5 {
    pub fn new<F>(f: &mut F, t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Result<Self>
    where
        F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    {
        let k1 = f(t0, &y0)?;
        Ok(Self {
            h: opts.h_init,
            opts,
            t: t0,
            y: y0,
            accepted: 0,
            rejected: 0,
            k1,
        })
    }

    /// Replaces the state after an external projection (e.g. renormalization).
    pub fn reset<F>(&mut self, f: &mut F, y: Vec<f64>) -> Result<()>
    where
        F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    {
        self.k1 = f(self.t, &y)?;
        self.y = y;
        Ok(())
    }

    /// Derivative at the current point.
    pub fn derivative(&self) -> &[f64] {
        &self.k1
    }

    /// Takes one accepted step, never beyond `t_limit`. Returns the step size used.
    pub fn step<F>(&mut self, f: &mut F, t_limit: f64) -> Result<f64>
    where
        F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    {
        let n = self.y.len();
        let mut k: Vec<Vec<f64>> = vec![self.k1.clone()];
        loop {
            let remaining = t_limit - self.t;
            let last = self.h >= remaining;
            let h = self.h.min(remaining).min(self.opts.h_max);
            if h < self.opts.h_min && !last {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            k.truncate(1);
            let mut ok = true;
            let mut ynew = vec![0.0; n];
            for s in 1..7 {
                let mut ys = self.y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..n {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                if s == 6 {
                    ynew = ys.clone();
                }
                match f(self.t + C[s] * h, &ys) {
                    Ok(v) if v.iter().all(|x| x.is_finite()) => k.push(v),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                self.rejected += 1;
                self.h = 0.25 * h;
                if self.h < self.opts.h_min {
                    return Err(Error::StepUnderflow { t: self.t, h: self.h });
                }
                continue;
            }
            let mut err = 0.0;
            for i in 0..n {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
                let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_limit } else { self.t + h };
                self.y = ynew;
                self.k1 = k.pop().expect("seven stages");
                self.accepted += 1;
                // Keep the natural step when only clipped by `t_limit`.
                self.h = if h < self.h { self.h } else { h * factor };
                return Ok(h);
            }
            self.rejected += 1;
            self.h = h * factor.min(1.0);
            if self.h < self.opts.h_min {
                return Err(Error::StepUnderflow { t: self.t, h: self.h });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let mut f = |_t: f64, y: &[f64]| Ok(vec![y[1], -y[0]]);
        let mut s = Dopri5::new(&mut f, 0.0, vec![1.0, 0.0], OdeOptions::default()).unwrap();
        let t_end = 10.0;
        while s.t < t_end {
            s.step(&mut f, t_end).unwrap();
        }
        assert_eq!(s.t, t_end);
        assert!((s.y[0] - t_end.cos()).abs() < 1e-8);
        assert!((s.y[1] + t_end.sin()).abs() < 1e-8);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |rtol: f64| {
            let mut f = |t: f64, y: &[f64]| Ok(vec![y[0] * t.cos()]);
            let opts = OdeOptions {
                rtol,
                atol: rtol * 1e-2,
                ..Default::default()
            };
            let mut s = Dopri5::new(&mut f, 0.0, vec![1.0], opts).unwrap();
            while s.t < 5.0 {
                s.step(&mut f, 5.0).unwrap();
            }
            (s.y[0] - 5f64.sin().exp()).abs()
        };
        assert!(run(1e-10) < run(1e-7) / 5.0);
    }

    #[test]
    fn failing_rhs_rejects_steps() {
        // finite-time blow-up of y' = y^2 at t = 1
        let mut f = |_t: f64, y: &[f64]| {
            if y[0] > 1e12 {
                Err(Error::Collapse { max_width: y[0] })
            } else {
                Ok(vec![y[0] * y[0]])
            }
        };
        let mut s = Dopri5::new(&mut f, 0.0, vec![1.0], OdeOptions::default()).unwrap();
        let mut res = Ok(0.0);
        while s.t < 2.0 && res.is_ok() {
            res = s.step(&mut f, 2.0);
        }
        assert!(matches!(res, Err(Error::StepUnderflow { .. })));
        assert!(s.t < 1.0 && s.t > 0.99);
    }
}
