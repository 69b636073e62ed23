//! Experiment configuration (TOML) and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundFamily;
use crate::energy::LyapunovConstants;
use crate::history::{HistoryData, HistoryShape};
use crate::kernels::{admissible_xi_p, Kernel, TabulatedKernel, XiProfile, XiWeight};
use crate::operators::ModalOperatorPair;
use crate::simulator::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset '{0}' (available: paper-example-q3, zero-history, exponential-oracle)")]
    UnknownPreset(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Polynomial { amplitude: f64, exponent: f64 },
    Exponential { amplitude: f64, rate: f64 },
    Zero,
    /// Two-column CSV `s,g`; relative paths resolve against the config file.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiSpec {
    /// Closed form for the polynomial kernel.
    Auto,
    Constant { value: f64, p: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64>, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `aₖ = bₖ = (kπ/L)²`.
    LaplacianSame { modes: usize, length: f64 },
    /// `aₖ = (kπ/L)²`, `bₖ = 1`.
    LaplacianIdentity { modes: usize, length: f64 },
    Explicit { a: Vec<f64>, b: Vec<f64> },
}

/// A single number broadcast to every mode, or one value per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerMode {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerMode {
    pub fn expand(&self, modes: usize, what: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerMode::Scalar(v) => Ok(vec![*v; modes]),
            PerMode::List(v) if v.len() == modes => Ok(v.clone()),
            PerMode::List(v) => Err(ConfigError::Invalid(format!(
                "history {what} has {} entries for {modes} modes",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySpec {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub coefficients: PerMode,
    pub velocities: PerMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Constant,
    Exponential { rate: f64 },
    Bump { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_energy_stride")]
    pub energy_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
}

fn default_energy_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default)]
    pub fit_start: f64,
    /// `[lo, hi]`; defaults to the final quarter of the run in log-time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[f64; 2]>,
    #[serde(default = "default_m")]
    pub lyapunov_m: f64,
    #[serde(default = "default_alpha0")]
    pub lyapunov_alpha0: f64,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
    #[serde(default = "default_prior_margin")]
    pub prior_margin: f64,
}

fn default_m() -> f64 {
    10.0
}
fn default_alpha0() -> f64 {
    1.0
}
fn default_slope_tolerance() -> f64 {
    0.15
}
fn default_drift_tolerance() -> f64 {
    0.05
}
fn default_prior_margin() -> f64 {
    0.3
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            families: Vec::new(),
            fit_start: 0.0,
            slope_window: None,
            lyapunov_m: default_m(),
            lyapunov_alpha0: default_alpha0(),
            slope_tolerance: default_slope_tolerance(),
            drift_tolerance: default_drift_tolerance(),
            prior_margin: default_prior_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_trajectory_stride")]
    pub trajectory_stride: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_trajectory_stride() -> usize {
    10
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectory_stride: default_trajectory_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub xi: XiSpec,
    pub operators: OperatorSpec,
    pub history: HistorySpec,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory against which relative paths resolve; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Fully constructed experiment objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub kernel: Kernel,
    pub xi: XiWeight,
    pub pair: ModalOperatorPair,
    pub history: HistoryData,
    pub sim: SimConfig,
    pub families: Vec<BoundFamily>,
    pub constants: LyapunovConstants,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "paper-example-q3" => Ok(paper_example_q3()),
            "zero-history" => Ok(zero_history()),
            "exponential-oracle" => Ok(exponential_oracle()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn kernel(&self) -> Result<Kernel, ConfigError> {
        match &self.kernel {
            KernelSpec::Polynomial { amplitude, exponent } => Kernel::polynomial(*amplitude, *exponent).map_err(invalid),
            KernelSpec::Exponential { amplitude, rate } => Kernel::exponential(*amplitude, *rate).map_err(invalid),
            KernelSpec::Zero => Ok(Kernel::zero()),
            KernelSpec::Tabulated { path } => {
                let path = match &self.base_dir {
                    Some(base) if path.is_relative() => base.join(path),
                    _ => path.clone(),
                };
                Ok(Kernel::Tabulated(TabulatedKernel::from_path(&path).map_err(invalid)?))
            }
        }
    }

    pub fn build(&self) -> Result<Experiment, ConfigError> {
        let kernel = self.kernel()?;
        let xi = match &self.xi {
            XiSpec::Auto => admissible_xi_p(&kernel).map_err(|e| {
                ConfigError::Invalid(format!("xi = auto needs a polynomial kernel with q > 2: {e}"))
            })?,
            XiSpec::Constant { value, p } => XiWeight::constant(*value, *p).map_err(invalid)?,
            XiSpec::Tabulated { times, values, p } => {
                XiWeight::new(XiProfile::tabulated(times.clone(), values.clone()).map_err(invalid)?, *p)
                    .map_err(invalid)?
            }
        };
        let pair = match &self.operators {
            OperatorSpec::LaplacianSame { modes, length } => ModalOperatorPair::laplacian_same(*modes, *length),
            OperatorSpec::LaplacianIdentity { modes, length } => {
                ModalOperatorPair::laplacian_identity(*modes, *length)
            }
            OperatorSpec::Explicit { a, b } => ModalOperatorPair::new(a.clone(), b.clone()),
        }
        .map_err(invalid)?;
        if let OperatorSpec::LaplacianSame { length, .. } | OperatorSpec::LaplacianIdentity { length, .. } =
            &self.operators
        {
            if !(*length > 0.0) {
                return Err(ConfigError::Invalid("operator length must be positive".into()));
            }
        }
        let modes = pair.modes();
        let shape = match self.history.shape {
            ShapeSpec::Constant => HistoryShape::Constant,
            ShapeSpec::Exponential { rate } => HistoryShape::Exponential { rate },
            ShapeSpec::Bump { width } => HistoryShape::Bump { width },
        };
        let history = HistoryData::new(
            shape,
            self.history.coefficients.expand(modes, "coefficients")?,
            self.history.velocities.expand(modes, "velocities")?,
        )
        .map_err(invalid)?;
        let mut sim = SimConfig::new(
            kernel.clone(),
            pair.clone(),
            history.clone(),
            self.simulation.dt,
            self.simulation.horizon,
        );
        sim.tail_tolerance = self.simulation.tail_tolerance;
        sim.validate().map_err(invalid)?;
        if self.simulation.energy_stride == 0 || self.output.trajectory_stride == 0 {
            return Err(ConfigError::Invalid("strides must be at least 1".into()));
        }
        let families = self
            .bounds
            .families
            .iter()
            .map(|f| f.parse::<BoundFamily>().map_err(invalid))
            .collect::<Result<Vec<_>, _>>()?;
        let constants =
            LyapunovConstants::new(self.bounds.lyapunov_m, self.bounds.lyapunov_alpha0).map_err(invalid)?;
        if let Some([lo, hi]) = self.bounds.slope_window {
            if !(lo < hi) {
                return Err(ConfigError::Invalid("slope_window must satisfy lo < hi".into()));
            }
        }
        Ok(Experiment {
            kernel,
            xi,
            pair,
            history,
            sim,
            families,
            constants,
        })
    }
}

fn all_families() -> Vec<String> {
    BoundFamily::ALL.iter().map(|f| f.tag().to_string()).collect()
}

fn paper_example_q3() -> ExperimentConfig {
    let modes = 16;
    ExperimentConfig {
        kernel: KernelSpec::Polynomial {
            amplitude: 1.0,
            exponent: 3.0,
        },
        xi: XiSpec::Auto,
        operators: OperatorSpec::LaplacianSame { modes, length: 1.0 },
        history: HistorySpec {
            shape: ShapeSpec::Constant,
            coefficients: PerMode::List((1..=modes).map(|k| 1.0 / (k * k) as f64).collect()),
            velocities: PerMode::Scalar(0.0),
        },
        simulation: SimulationSpec {
            dt: 0.005,
            horizon: 200.0,
            energy_stride: 10,
            tail_tolerance: None,
        },
        bounds: BoundsSpec {
            families: all_families(),
            slope_window: Some([50.0, 200.0]),
            ..BoundsSpec::default()
        },
        output: OutputSpec::default(),
        base_dir: None,
    }
}

fn zero_history() -> ExperimentConfig {
    let mut cfg = paper_example_q3();
    cfg.history.coefficients = PerMode::Scalar(0.0);
    cfg.simulation.dt = 0.01;
    cfg.simulation.horizon = 10.0;
    cfg.bounds.slope_window = None;
    cfg
}

fn exponential_oracle() -> ExperimentConfig {
    ExperimentConfig {
        kernel: KernelSpec::Exponential {
            amplitude: 0.5,
            rate: 1.0,
        },
        xi: XiSpec::Constant { value: 1.0, p: 1.0 },
        operators: OperatorSpec::Explicit {
            a: vec![4.0],
            b: vec![1.0],
        },
        history: HistorySpec {
            shape: ShapeSpec::Exponential { rate: 1.0 },
            coefficients: PerMode::Scalar(1.0),
            velocities: PerMode::Scalar(0.0),
        },
        simulation: SimulationSpec {
            dt: 1e-3,
            horizon: 40.0,
            energy_stride: 10,
            tail_tolerance: None,
        },
        bounds: BoundsSpec::default(),
        output: OutputSpec::default(),
        base_dir: None,
    }
}

/// Inline documentation emitted by `init`, keyed by `section.key`.
const KEY_NOTES: &[(&str, &str)] = &[
    ("kernel.family", "polynomial | exponential | zero | tabulated"),
    ("kernel.amplitude", "g(0) for exponential; a in a(1+t)^-q for polynomial"),
    ("kernel.exponent", "q > 1; the closed-form xi needs q > 2"),
    ("kernel.rate", "decay rate of a e^{-rate s}"),
    ("kernel.path", "CSV with header s,g; relative to this file"),
    ("xi.mode", "auto (polynomial closed form) | constant | tabulated"),
    ("xi.p", "exponent in g' <= -xi g^p, 1 <= p < 1.5"),
    ("operators.kind", "laplacian_same | laplacian_identity | explicit"),
    ("operators.modes", "number of Dirichlet modes"),
    ("history.shape", "constant | exponential (rate) | bump (width)"),
    ("history.coefficients", "u0 mode coefficients: one number for all modes or a list"),
    ("history.velocities", "u1 mode coefficients: one number for all modes or a list"),
    ("simulation.dt", "time step; horizon must be a whole number of steps"),
    ("simulation.energy_stride", "default 10: energies every n-th step"),
    ("simulation.tail_tolerance", "default 1e-10 (1 + sup|u0|)"),
    ("bounds.families", "any of lemma1, thm_case1_first, thm_case1_improved, thm_case2_first, thm_case2_improved, example_case1, example_case2, prior_case1, prior_case2"),
    ("bounds.fit_start", "default 0: envelope window start"),
    ("bounds.slope_window", "default: final quarter of the run in log-time"),
    ("bounds.lyapunov_m", "default 10"),
    ("bounds.lyapunov_alpha0", "default 1"),
    ("bounds.slope_tolerance", "default 0.15"),
    ("bounds.drift_tolerance", "default 0.05"),
    ("bounds.prior_margin", "default 0.3: required gain over earlier rates"),
    ("output.dir", "default \"out\""),
    ("output.trajectory_stride", "default 10"),
];

/// TOML text for `cfg` with a comment above each documented key.
pub fn scaffold(cfg: &ExperimentConfig) -> Result<String, ConfigError> {
    let body = cfg.to_toml()?;
    let mut out = String::from("# memdecay experiment configuration\n");
    let mut section = String::new();
    for line in body.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').to_string();
            if !out.ends_with("\n\n") {
                out.push('\n');
            }
        } else if let Some((key, _)) = trimmed.split_once('=') {
            let full = format!("{section}.{}", key.trim());
            if let Some((_, note)) = KEY_NOTES.iter().find(|(k, _)| *k == full) {
                out.push_str("# ");
                out.push_str(note);
                out.push('\n');
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}
