//! In-place 3D FFT over a row-major `[nx][ny][nz]` array.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(n: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: n.map(|k| planner.plan_fft_forward(k)),
            inverse: n.map(|k| planner.plan_fft_inverse(k)),
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.n;
        assert_eq!(data.len(), nx * ny * nz);
        // z is contiguous
        plans[2].process(data);
        let mut line = vec![C64::new(0.0, 0.0); ny.max(nx)];
        for ix in 0..nx {
            for iz in 0..nz {
                for iy in 0..ny {
                    line[iy] = data[(ix * ny + iy) * nz + iz];
                }
                plans[1].process(&mut line[..ny]);
                for iy in 0..ny {
                    data[(ix * ny + iy) * nz + iz] = line[iy];
                }
            }
        }
        // Transform x on blocks of whole rows to keep the gathers cache friendly.
        let plane = ny * nz;
        let mut block = vec![C64::new(0.0, 0.0); nx * nz];
        for iy in 0..ny {
            for ix in 0..nx {
                for iz in 0..nz {
                    block[iz * nx + ix] = data[ix * plane + iy * nz + iz];
                }
            }
            plans[0].process(&mut block);
            for ix in 0..nx {
                for iz in 0..nz {
                    data[ix * plane + iy * nz + iz] = block[iz * nx + ix];
                }
            }
        }
    }
}
