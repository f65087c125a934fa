//! Sampled wave functions on a periodic box.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use ptbec_core::model::{PhysicalParams, VariationalState};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point counts and box `[lo, hi)` per axis; sample `i` sits at
/// `lo + i * (hi - lo) / n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: [usize; 3],
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n: [128, 64, 128],
            lo: [-2.0, -6.0, -2.0],
            hi: [2.0, 6.0, 2.0],
        }
    }
}

impl Grid {
    pub fn new(n: [usize; 3], lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        let g = Self { n, lo, hi };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !self.n[a].is_power_of_two() || self.n[a] < 4 {
                return Err(Error::InvalidGrid(format!("axis {a}: {} points is not a power of two >= 4", self.n[a])));
            }
            if !(self.hi[a] > self.lo[a]) {
                return Err(Error::InvalidGrid(format!("axis {a}: empty extent")));
            }
        }
        Ok(())
    }

    /// Same box with every point count scaled by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: self.n.map(|k| k * factor),
            ..*self
        }
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.hi[a] - self.lo[a]) / self.n[a] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let d = self.spacing()[axis];
        (0..self.n[axis]).map(|i| self.lo[axis] + i as f64 * d).collect()
    }

    /// Angular wave numbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.n[axis];
        let len = self.hi[axis] - self.lo[axis];
        (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * m / len
            })
            .collect()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n[1] + iy) * self.n[2] + iz
    }

    /// Calls `f(index, [x, y, z])` for every point.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let (xs, ys, zs) = (self.coords(0), self.coords(1), self.coords(2));
        let mut i = 0;
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    f(i, [x, y, z]);
                    i += 1;
                }
            }
        }
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> C64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.for_each_point(|i, r| out[i] = f(r));
        out
    }
}

#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<C64>,
    pub params: Option<PhysicalParams>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} points", values.len(), grid.len())));
        }
        Ok(Self {
            grid,
            values,
            params: None,
        })
    }

    /// Samples a variational state.
    pub fn from_variational(state: &VariationalState, grid: Grid) -> Result<Self> {
        let mut f = Self::new(grid, grid.sample(|r| state.evaluate(r)))?;
        f.params = Some(state.params);
        Ok(f)
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize_to(&mut self, target: f64) {
        let s = (target / self.norm()).sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Weights of `x < 0` and `x > 0`; the `x = 0` plane is split evenly.
    pub fn populations(&self) -> [f64; 2] {
        let xs = self.grid.coords(0);
        let plane = self.grid.n[1] * self.grid.n[2];
        let (mut l, mut r) = (0.0, 0.0);
        for (ix, &x) in xs.iter().enumerate() {
            let w: f64 = self.values[ix * plane..(ix + 1) * plane].iter().map(|v| v.norm_sqr()).sum();
            if x < 0.0 {
                l += w;
            } else if x > 0.0 {
                r += w;
            } else {
                l += 0.5 * w;
                r += 0.5 * w;
            }
        }
        let dv = self.grid.cell_volume();
        [l * dv, r * dv]
    }

    /// Largest density on the outer faces of the box relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let [nx, ny, nz] = self.grid.n;
        let d = self.density();
        let peak = d.iter().cloned().fold(0.0, f64::max);
        let mut edge: f64 = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    if ix == 0 || iy == 0 || iz == 0 || ix == nx - 1 || iy == ny - 1 || iz == nz - 1 {
                        edge = edge.max(d[self.grid.index(ix, iy, iz)]);
                    }
                }
            }
        }
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// `<self|other>` with the cell volume as weight.
    pub fn inner(&self, other: &GridField) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.cell_volume()
    }

    /// `|Psi(r)|^2 - |Psi(-r)|^2`, largest magnitude over the grid, relative to
    /// the peak density. Only meaningful on boxes symmetric about the origin.
    pub fn parity_defect(&self) -> f64 {
        let [nx, ny, nz] = self.grid.n;
        let d = self.density();
        let peak = d.iter().cloned().fold(0.0, f64::max);
        let mirror = |i: usize, n: usize| (n - i) % n;
        let mut worst: f64 = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let a = d[self.grid.index(ix, iy, iz)];
                    let b = d[self.grid.index(mirror(ix, nx), mirror(iy, ny), mirror(iz, nz))];
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst / peak
    }
}

const MAGIC: &[u8; 8] = b"PTBGRID1";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    grid: Grid,
    params: Option<PhysicalParams>,
    layout: String,
    norm: f64,
}

impl GridField {
    /// Binary layout: magic, endianness tag `u8` (1 = little), three `u64`
    /// point counts, six `f64` box bounds (`lo` then `hi`), then interleaved
    /// `re, im` doubles in row-major `[x][y][z]` order, all little endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[1u8])?;
        for n in self.grid.n {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in self.grid.lo.iter().chain(&self.grid.hi) {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        if &magic != MAGIC || tag[0] != 1 {
            return Err(Error::InvalidGrid("not a little-endian grid field file".into()));
        }
        let mut b8 = [0u8; 8];
        let mut n = [0usize; 3];
        for k in n.iter_mut() {
            r.read_exact(&mut b8)?;
            *k = u64::from_le_bytes(b8) as usize;
        }
        let mut bounds = [0.0; 6];
        for v in bounds.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        let grid = Grid::new(n, [bounds[0], bounds[1], bounds[2]], [bounds[3], bounds[4], bounds[5]])?;
        let mut values = Vec::with_capacity(grid.len());
        let mut b16 = [0u8; 16];
        for _ in 0..grid.len() {
            r.read_exact(&mut b16)?;
            let re = f64::from_le_bytes(b16[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(b16[8..].try_into().expect("8 bytes"));
            values.push(C64::new(re, im));
        }
        GridField::new(grid, values)
    }

    /// Writes `<stem>.bin` and the JSON sidecar `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let bin = stem.with_extension("bin");
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(&bin)?))?;
        let side = Sidecar {
            grid: self.grid,
            params: self.params,
            layout: "magic PTBGRID1, u8 endianness, 3 x u64 counts, 6 x f64 bounds, interleaved re/im f64, row-major [x][y][z]".into(),
            norm: self.norm(),
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let mut f = Self::read_binary(std::io::BufReader::new(std::fs::File::open(stem.with_extension("bin"))?))?;
        let json = stem.with_extension("json");
        if json.exists() {
            let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(json)?)?;
            f.params = side.params;
        }
        Ok(f)
    }
}
