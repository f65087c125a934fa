//! Run configuration: TOML file plus `key=value` overrides.

use std::path::Path;

use ptbec_core::continuation::{StepControl, SweepAxis};
use ptbec_core::dynamics::{EvolveOptions, LineOfSight};
use ptbec_core::model::{DipoleAxis, ParamLayout, PhysicalParams};
use ptbec_core::ode::OdeOptions;
use ptbec_core::stability::StabilityOptions;
use ptbec_core::stationary::{CensusOptions, NewtonOptions};
use ptbec_core::tdvp::TdvpOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub v0: f64,
    pub gamma: f64,
    pub l: f64,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub na: f64,
    pub nadd: f64,
    pub dipole_axis: DipoleAxis,
    /// Release the `A_xz` width coupling.
    pub couple_xz: bool,
    pub newton: NewtonConfig,
    pub census: CensusConfig,
    pub stability: StabilityConfig,
    pub sweep: Option<SweepConfig>,
    pub evolve: Option<EvolveConfig>,
    pub image: ImageConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PhysicalParams::default();
        Self {
            schema_version: SCHEMA_VERSION,
            v0: p.v0,
            gamma: p.gamma,
            l: p.l,
            lx: p.lx,
            ly: p.ly,
            lz: p.lz,
            na: p.na,
            nadd: p.nadd,
            dipole_axis: p.dipole_axis,
            couple_xz: false,
            newton: NewtonConfig::default(),
            census: CensusConfig::default(),
            stability: StabilityConfig::default(),
            sweep: None,
            evolve: None,
            image: ImageConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub pt_threshold: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let n = NewtonOptions::default();
        Self {
            tol: n.tol,
            max_iter: n.max_iter,
            fd_step: n.fd_step,
            pt_threshold: n.pt_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusConfig {
    pub dedupe: f64,
    pub window: f64,
    /// Compute the linear stability verdict of every state.
    pub with_stability: bool,
}

impl Default for CensusConfig {
    fn default() -> Self {
        let c = CensusOptions::default();
        Self {
            dedupe: c.dedupe,
            window: c.window,
            with_stability: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Census labels to analyse; empty means all.
    pub states: Vec<String>,
    pub fd_step: f64,
    pub richardson_tol: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        let s = StabilityOptions::default();
        Self {
            states: Vec::new(),
            fd_step: s.fd_step,
            richardson_tol: s.richardson_tol,
        }
    }
}

/// No defaults for `axis` and `target`: a sweep must say where it goes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub target: f64,
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default = "yes")]
    pub with_stability: bool,
    /// Write the full stability spectrum at every branch point.
    #[serde(default)]
    pub spectra: bool,
    /// Extra census points; states found there that lie on no swept branch
    /// are continued in both directions.
    #[serde(default)]
    pub probes: Vec<f64>,
    /// Also probe just before every fold of the primary branches.
    #[serde(default = "yes")]
    pub probe_folds: bool,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn yes() -> bool {
    true
}
fn default_initial_step() -> f64 {
    StepControl::default().initial
}
fn default_min_step() -> f64 {
    StepControl::default().min_step
}
fn default_max_step() -> f64 {
    StepControl::default().max_step
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Census label of the initial state.
    pub state: String,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Relative random perturbation of the initial parameters; 0 disables.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Explicit snapshot times for absorption images.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Number of images spread over the first population oscillation.
    #[serde(default)]
    pub oscillation_snapshots: usize,
}

fn default_samples() -> usize {
    EvolveOptions::default().samples
}
fn default_rtol() -> f64 {
    OdeOptions::default().rtol
}
fn default_atol() -> f64 {
    OdeOptions::default().atol
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    /// Census labels to image; empty means all.
    pub states: Vec<String>,
    /// `[u_min, u_max, v_min, v_max]` in the plane normal to the line of sight.
    pub extent: [f64; 4],
    pub resolution: [usize; 2],
    pub line_of_sight: LineOfSight,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            states: Vec::new(),
            extent: [-1.0, 1.0, -0.5, 0.5],
            resolution: [128, 64],
            line_of_sight: LineOfSight::Y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Dipolar pair integrals against momentum-space quadrature.
    DdiQuartets,
    /// Grid imaginary time against the variational ground state.
    GroundState,
    /// Linear grid ground energy by imaginary time against Lanczos.
    LinearSpectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub quartets: usize,
    pub seed: u64,
    pub grid_n: [usize; 3],
    pub grid_lo: [f64; 3],
    pub grid_hi: [f64; 3],
}

impl Default for OracleConfig {
    fn default() -> Self {
        let g = ptbec_grid::Grid::default();
        Self {
            kind: OracleKind::DdiQuartets,
            quartets: 50,
            seed: 0,
            grid_n: g.n,
            grid_lo: g.lo,
            grid_hi: g.hi,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides (dotted keys
    /// address sections) and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.params().validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn params(&self) -> PhysicalParams {
        PhysicalParams {
            v0: self.v0,
            gamma: self.gamma,
            l: self.l,
            lx: self.lx,
            ly: self.ly,
            lz: self.lz,
            na: self.na,
            nadd: self.nadd,
            dipole_axis: self.dipole_axis,
        }
    }

    pub fn set_params(&mut self, p: &PhysicalParams) {
        self.v0 = p.v0;
        self.gamma = p.gamma;
        self.l = p.l;
        self.lx = p.lx;
        self.ly = p.ly;
        self.lz = p.lz;
        self.na = p.na;
        self.nadd = p.nadd;
        self.dipole_axis = p.dipole_axis;
    }

    pub fn tdvp(&self) -> TdvpOptions {
        TdvpOptions {
            layout: ParamLayout::with_xz(self.couple_xz),
            ..Default::default()
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton.tol,
            max_iter: self.newton.max_iter,
            fd_step: self.newton.fd_step,
            pt_threshold: self.newton.pt_threshold,
            tdvp: self.tdvp(),
        }
    }

    pub fn census_options(&self, jobs: usize) -> CensusOptions {
        CensusOptions {
            newton: self.newton_options(),
            dedupe: self.census.dedupe,
            window: self.census.window,
            jobs,
        }
    }

    pub fn stability_options(&self) -> StabilityOptions {
        let mut s = StabilityOptions {
            fd_step: self.stability.fd_step,
            richardson_tol: self.stability.richardson_tol,
            ..Default::default()
        };
        s.tdvp.layout = ParamLayout::with_xz(self.couple_xz);
        s
    }

    pub fn step_control(&self, sweep: &SweepConfig) -> StepControl {
        let base = StepControl::default();
        StepControl {
            initial: sweep.initial_step,
            min_step: sweep.min_step,
            max_step: sweep.max_step,
            with_stability: sweep.with_stability,
            newton: NewtonOptions {
                max_iter: base.newton.max_iter,
                ..self.newton_options()
            },
            stability: self.stability_options(),
            ..base
        }
    }

    pub fn evolve_options(&self, e: &EvolveConfig) -> EvolveOptions {
        EvolveOptions {
            ode: OdeOptions {
                rtol: e.rtol,
                atol: e.atol,
                ..Default::default()
            },
            tdvp: self.tdvp(),
            samples: e.samples,
            ..Default::default()
        }
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    // Parse the value as TOML; bare words fall back to strings.
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Usage(format!("empty key in `{item}`")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_model_defaults() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c.params(), PhysicalParams::default());
        assert!(c.sweep.is_none());
    }

    #[test]
    fn overrides_reach_sections_and_parse_types() {
        let c = RunConfig::from_toml(
            "na = -0.01\n",
            &["gamma=0.1".into(), "sweep.axis=gamma".into(), "sweep.target=0.3".into(), "dipole_axis=x_attractive".into()],
        )
        .unwrap();
        assert_eq!(c.na, -0.01);
        assert_eq!(c.gamma, 0.1);
        assert_eq!(c.dipole_axis, DipoleAxis::XAttractive);
        assert_eq!(c.sweep.unwrap().target, 0.3);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        assert!(matches!(RunConfig::from_toml("nad = 0.3", &[]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_toml("[census]\nwindw = 1", &[]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_toml("", &["bogus=1".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn resolved_config_round_trips_with_same_hash() {
        let c = RunConfig::from_toml("", &["sweep.axis=na".into(), "sweep.target=-0.04".into()]).unwrap();
        let back = RunConfig::from_toml(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }
}
