//! Run configuration. TOML on input; the resolved form is embedded in every
//! `summary.json` and can be fed back through `--config`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tgsim_core::dynamics::EigenMethod;
use tgsim_core::fermioracle::Geometry;
use tgsim_core::model::{Boundary, LatticeParams, LossChannels};
use tgsim_core::params::{PhysicalParams, DEFAULT_MARGIN};
use tgsim_core::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Params,
    Ground,
    Evolve,
    Relax,
    Ramp,
    Oracle,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Params => "params",
            Mode::Ground => "ground",
            Mode::Evolve => "evolve",
            Mode::Relax => "relax",
            Mode::Ramp => "ramp",
            Mode::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required unless given as a subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// SI parameters of the four-level medium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
    /// Dimensionless lattice model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeBlock>,
    /// Free-fermion reference (mode = oracle only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<Discretization>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Lattice Hamiltonian in units where ħ = 1; all fields dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    #[serde(default = "one")]
    pub hop: f64,
    /// On-site coupling as [Re U, Im U]; Im U ≤ 0.
    #[serde(default)]
    pub u: [f64; 2],
    #[serde(default)]
    pub kappa1: f64,
    #[serde(default)]
    pub kappa_d: f64,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default)]
    pub channels: LossChannels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub n: usize,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    #[serde(default = "one")]
    pub length: f64,
    /// ħ²/(2m) in the chosen units.
    #[serde(default = "half")]
    pub kinetic: f64,
    /// Number of midpoint samples z_i = (i + ½)L/samples.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub m_sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// Initial particle number; defaults to n_ph for physical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Master,
    Trajectories,
    Nojump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// All particles in the lowest kinetic orbital.
    Condensate,
    /// Ground state of the hermitian part.
    Ground,
    /// Fock state given by `solver.occupation`.
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    /// Seconds for physical runs, 1/J units for lattice runs.
    Absolute,
    /// Multiples of the two-body loss time M/(2κ₂N).
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub method: EigenMethod,
    #[serde(default = "default_dynamics")]
    pub dynamics: Dynamics,
    #[serde(default = "default_initial")]
    pub initial: Initial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<Vec<u16>>,
    /// Explicit output times; exclusive with `t_stop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<f64>>,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_stop: Option<f64>,
    /// Number of intervals between `t_start` and `t_stop`.
    #[serde(default = "default_steps")]
    pub t_steps: usize,
    #[serde(default = "default_time_unit")]
    pub t_unit: TimeUnit,
    /// Trajectory count; 0 disables the ensemble in relax mode.
    #[serde(default)]
    pub n_traj: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Numeric meaning of "≪" in the validity audit.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            method: EigenMethod::default(),
            dynamics: default_dynamics(),
            initial: default_initial(),
            occupation: None,
            t_values: None,
            t_start: 0.0,
            t_stop: None,
            t_steps: default_steps(),
            t_unit: default_time_unit(),
            n_traj: 0,
            seed: default_seed(),
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampDynamics {
    Nojump,
    Master,
}

/// Piecewise-linear control schedule. Exactly one of `u` and `delta4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampBlock {
    /// Control times in the solver's time unit.
    pub times: Vec<f64>,
    /// Lattice coupling [Re U, Im U] at each control time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<[f64; 2]>>,
    /// Probe detuning Δ [rad/s] at each control time; physical runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta4: Option<Vec<f64>>,
    #[serde(default = "default_ramp_dynamics")]
    pub dynamics: RampDynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Used when `--out` is not given.
    #[serde(default = "default_dir")]
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_geometry() -> Geometry {
    Geometry::Box
}
fn default_samples() -> usize {
    64
}
fn default_dynamics() -> Dynamics {
    Dynamics::Master
}
fn default_initial() -> Initial {
    Initial::Condensate
}
fn default_steps() -> usize {
    10
}
fn default_time_unit() -> TimeUnit {
    TimeUnit::Absolute
}
fn default_seed() -> u64 {
    1
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}
fn default_ramp_dynamics() -> RampDynamics {
    RampDynamics::Nojump
}
fn default_dir() -> String {
    "tgsim-out".into()
}

/// Configuration problem with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.field, self.message)
        }
    }
}

/// Which parameter block drives the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Source<'a> {
    Physical(&'a PhysicalParams),
    Lattice(&'a LatticeBlock),
    Oracle(&'a OracleBlock),
}

impl RunConfig {
    /// Parse TOML, or JSON — either a bare config or a `summary.json`
    /// carrying one under `config`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError::new("", format!("invalid JSON: {e}")))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| ConfigError::new("", e.to_string()))
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("", e.to_string()))
    }

    /// Settle the mode against a subcommand and apply a seed override.
    pub fn resolve(mut self, subcommand: Option<Mode>, seed: Option<u64>) -> Result<Self, ConfigError> {
        self.mode = match (self.mode, subcommand) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::new("mode", format!("config says {a}, subcommand says {b}")));
            }
            (Some(a), _) | (None, Some(a)) => Some(a),
            (None, None) => return Err(ConfigError::new("mode", "missing; set it or use a mode subcommand")),
        };
        if let Some(s) = seed {
            self.solver.seed = s;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        self.mode.expect("resolved config has a mode")
    }

    pub fn source(&self) -> Result<Source<'_>, ConfigError> {
        match (&self.physical, &self.lattice, &self.oracle) {
            (Some(p), None, None) => Ok(Source::Physical(p)),
            (None, Some(l), None) => Ok(Source::Lattice(l)),
            (None, None, Some(o)) => Ok(Source::Oracle(o)),
            _ => Err(ConfigError::new("physical|lattice|oracle", "exactly one parameter block is required")),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mode = self.mode();
        let source = self.source()?;
        match (mode, &source) {
            (Mode::Params, Source::Physical(_)) => {}
            (Mode::Params, _) => return Err(ConfigError::new("physical", "mode = params needs a [physical] block")),
            (Mode::Oracle, Source::Oracle(o)) => {
                if o.n == 0 {
                    return Err(ConfigError::new("oracle.n", "must be ≥ 1"));
                }
                if !(o.length > 0.0 && o.length.is_finite()) {
                    return Err(ConfigError::new("oracle.length", "must be positive"));
                }
                if o.samples == 0 {
                    return Err(ConfigError::new("oracle.samples", "must be ≥ 1"));
                }
            }
            (Mode::Oracle, _) => return Err(ConfigError::new("oracle", "mode = oracle needs an [oracle] block")),
            (_, Source::Oracle(_)) => {
                return Err(ConfigError::new("oracle", format!("an [oracle] block is only valid with mode = oracle, not {mode}")));
            }
            _ => {}
        }
        if let Source::Physical(p) = source {
            p.validate().map_err(|e| ConfigError::new("physical", e.to_string()))?;
        }
        let s = &self.solver;
        if !(s.margin > 0.0 && s.margin.is_finite()) {
            return Err(ConfigError::new("solver.margin", "must be positive"));
        }
        if matches!(mode, Mode::Ground | Mode::Evolve | Mode::Relax | Mode::Ramp) {
            let d = self
                .discretization
                .as_ref()
                .ok_or_else(|| ConfigError::new("discretization", format!("required for mode = {mode}")))?;
            if d.m_sites < 2 {
                return Err(ConfigError::new("discretization.m_sites", "must be ≥ 2"));
            }
            if matches!(source, Source::Lattice(_)) && d.n_max.is_none() {
                return Err(ConfigError::new("discretization.n_max", "required with a [lattice] block"));
            }
        }
        if matches!(mode, Mode::Evolve | Mode::Relax | Mode::Ramp) {
            self.check_grid()?;
        }
        if mode == Mode::Evolve && s.dynamics == Dynamics::Trajectories && s.n_traj < 2 {
            return Err(ConfigError::new("solver.n_traj", "trajectory dynamics needs n_traj ≥ 2"));
        }
        if mode == Mode::Relax && s.n_traj == 1 {
            return Err(ConfigError::new("solver.n_traj", "use 0 (no ensemble) or ≥ 2"));
        }
        if s.initial == Initial::Fock && s.occupation.is_none() {
            return Err(ConfigError::new("solver.occupation", "required with initial = \"fock\""));
        }
        if mode == Mode::Ramp {
            let r = self.ramp.as_ref().ok_or_else(|| ConfigError::new("ramp", "required for mode = ramp"))?;
            match (&r.u, &r.delta4) {
                (Some(u), None) if u.len() != r.times.len() => {
                    return Err(ConfigError::new("ramp.u", "needs one entry per control time"));
                }
                (None, Some(d)) if d.len() != r.times.len() => {
                    return Err(ConfigError::new("ramp.delta4", "needs one entry per control time"));
                }
                (None, Some(_)) if !matches!(source, Source::Physical(_)) => {
                    return Err(ConfigError::new("ramp.delta4", "detuning ramps need a [physical] block"));
                }
                (Some(_), None) | (None, Some(_)) => {}
                _ => return Err(ConfigError::new("ramp.u|ramp.delta4", "give exactly one control")),
            }
        } else if self.ramp.is_some() {
            return Err(ConfigError::new("ramp", format!("not used by mode = {mode}")));
        }
        Ok(())
    }

    fn check_grid(&self) -> Result<(), ConfigError> {
        let s = &self.solver;
        match (&s.t_values, s.t_stop) {
            (Some(v), None) => {
                if v.is_empty() {
                    return Err(ConfigError::new("solver.t_values", "must not be empty"));
                }
                if v.iter().any(|t| !t.is_finite()) || v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(ConfigError::new("solver.t_values", "must be finite and non-decreasing"));
                }
            }
            (None, Some(stop)) => {
                if !(stop.is_finite() && s.t_start.is_finite() && stop >= s.t_start) {
                    return Err(ConfigError::new("solver.t_stop", "must be finite and ≥ t_start"));
                }
                if s.t_steps == 0 {
                    return Err(ConfigError::new("solver.t_steps", "must be ≥ 1"));
                }
            }
            (Some(_), Some(_)) => return Err(ConfigError::new("solver.t_values", "conflicts with t_stop")),
            (None, None) => return Err(ConfigError::new("solver.t_stop", "a time grid (t_stop or t_values) is required")),
        }
        Ok(())
    }

    /// Output times in the configured unit.
    pub fn raw_grid(&self) -> Vec<f64> {
        let s = &self.solver;
        match (&s.t_values, s.t_stop) {
            (Some(v), _) => v.clone(),
            (None, Some(stop)) => {
                let h = (stop - s.t_start) / s.t_steps as f64;
                (0..=s.t_steps).map(|k| s.t_start + k as f64 * h).collect()
            }
            (None, None) => Vec::new(),
        }
    }
}

impl LatticeBlock {
    pub fn to_params(&self, d: &Discretization) -> Result<LatticeParams, ConfigError> {
        LatticeParams::new(
            d.m_sites,
            d.boundary,
            d.n_max.unwrap_or(0),
            self.hop,
            Complex64::new(self.u[0], self.u[1]),
            self.kappa1,
            self.kappa_d,
            self.spacing,
            self.channels,
        )
        .map_err(|e| ConfigError::new("lattice", e.to_string()))
    }
}
