//! Experiment configuration: a JSON document whose defaults reproduce the
//! two reference experiments.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use cwdmd::dynsys::{self, IcRegion, SystemSpec};
use cwdmd::wavelet::{WaveletKind, WaveletVariant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    /// `ẋ = A x`, `y = cᵀ x`.
    Lti { a: Vec<Vec<f64>>, c: Vec<f64> },
    Lorenz { alpha: f64, rho: f64, beta: f64 },
    /// A system from the built-in registry.
    Custom { name: String },
}

impl SystemConfig {
    pub fn label(&self) -> String {
        match self {
            SystemConfig::Lti { .. } => "lti".into(),
            SystemConfig::Lorenz { .. } => "lorenz".into(),
            SystemConfig::Custom { name } => name.clone(),
        }
    }

    pub fn build(&self) -> Result<SystemSpec, ConfigError> {
        match self {
            SystemConfig::Lti { a, c } => dynsys::lti(a, c).map_err(|e| ConfigError::Invalid(e.to_string())),
            SystemConfig::Lorenz { alpha, rho, beta } => Ok(dynsys::lorenz(*alpha, *rho, *beta)),
            SystemConfig::Custom { name } => dynsys::named_system(name).ok_or_else(|| {
                ConfigError::Invalid(format!("unknown system {name:?}; known: {}", dynsys::NAMED_SYSTEMS.join(", ")))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionConfig {
    Circle { radius: f64 },
    Box { bounds: Vec<(f64, f64)> },
}

impl RegionConfig {
    pub fn to_region(&self) -> IcRegion {
        match self {
            RegionConfig::Circle { radius } => IcRegion::Circle { radius: *radius },
            RegionConfig::Box { bounds } => IcRegion::Box { bounds: bounds.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub region: RegionConfig,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveletChoice {
    ModulatedGaussian,
    Morlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub initial_conditions: InitialConditions,
    /// Simulation horizon T.
    pub horizon: f64,
    pub dt: f64,
    pub omega0: f64,
    pub c_param: u32,
    pub j_max: u32,
    pub truncation_tol: f64,
    /// Frequencies whose nearest eigenpairs are extracted, in Hz.
    pub target_frequencies_hz: Vec<f64>,
    pub output_dir: PathBuf,
    /// Wavelet used for the observables.
    #[serde(default = "default_wavelet")]
    pub wavelet: WaveletChoice,
}

fn default_wavelet() -> WaveletChoice {
    WaveletChoice::ModulatedGaussian
}

/// Converts a frequency in Hz to rad per unit time.
pub fn hz_to_rad(hz: f64) -> f64 {
    TAU * hz
}

impl ExperimentConfig {
    pub fn lti_default() -> Self {
        Self {
            system: SystemConfig::Lti { a: dynsys::reference_lti_matrix(), c: vec![1.0, 0.0] },
            initial_conditions: InitialConditions { region: RegionConfig::Circle { radius: 20.0 }, count: 100, seed: 1 },
            horizon: 2.0,
            dt: 0.001,
            omega0: 6.0,
            c_param: 32,
            j_max: 288,
            truncation_tol: cwdmd::edmd::DEFAULT_TRUNCATION_TOL,
            target_frequencies_hz: vec![79.54],
            output_dir: PathBuf::from("out/lti"),
            wavelet: WaveletChoice::ModulatedGaussian,
        }
    }

    pub fn lorenz_default() -> Self {
        Self {
            system: SystemConfig::Lorenz { alpha: 10.0, rho: 28.0, beta: 8.0 / 3.0 },
            initial_conditions: InitialConditions {
                region: RegionConfig::Box { bounds: vec![(-20.0, 20.0), (-30.0, 30.0), (0.0, 50.0)] },
                count: 40,
                seed: 1,
            },
            horizon: 100.0,
            dt: 0.02,
            omega0: 6.0,
            c_param: 20,
            j_max: 220,
            truncation_tol: cwdmd::edmd::DEFAULT_TRUNCATION_TOL,
            target_frequencies_hz: vec![8.17 / TAU],
            output_dir: PathBuf::from("out/lorenz"),
            wavelet: WaveletChoice::ModulatedGaussian,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(compact.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sample count N with `T = N dt`.
    pub fn steps(&self) -> Result<usize, ConfigError> {
        let ratio = self.horizon / self.dt;
        let n = ratio.round();
        if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * ratio {
            return Err(ConfigError::Invalid(format!("horizon {} is not a positive integer multiple of dt {}", self.horizon, self.dt)));
        }
        Ok(n as usize)
    }

    pub fn target_frequencies_rad(&self) -> Vec<f64> {
        self.target_frequencies_hz.iter().map(|&f| hz_to_rad(f)).collect()
    }

    pub fn wavelet_kind(&self) -> WaveletKind {
        let variant = match self.wavelet {
            WaveletChoice::ModulatedGaussian => WaveletVariant::ModulatedGaussian,
            WaveletChoice::Morlet => WaveletVariant::Morlet,
        };
        WaveletKind::new(variant, self.omega0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        self.steps()?;
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return invalid(format!("omega0 must be positive, got {}", self.omega0));
        }
        if self.c_param == 0 || self.j_max == 0 {
            return invalid("c_param and j_max must be at least 1".into());
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return invalid(format!("truncation_tol must lie in (0, 1), got {}", self.truncation_tol));
        }
        if self.initial_conditions.count == 0 {
            return invalid("at least one initial condition is required".into());
        }
        if self.target_frequencies_hz.iter().any(|f| !f.is_finite()) {
            return invalid("target frequencies must be finite".into());
        }
        let system = self.system.build()?;
        let region_dim_ok = match &self.initial_conditions.region {
            RegionConfig::Circle { radius } => system.dimension() == 2 && *radius > 0.0,
            RegionConfig::Box { bounds } => bounds.len() == system.dimension() && bounds.iter().all(|(lo, hi)| lo <= hi),
        };
        if !region_dim_ok {
            return invalid(format!("initial-condition region does not fit the {}-dimensional system", system.dimension()));
        }
        Ok(())
    }
}
