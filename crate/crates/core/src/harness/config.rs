use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LambdaMode;
use crate::nn::LayerSpec;
use crate::optim::LbfgsOptions;
use crate::sim::VdpConfig;

/// Iteration cap applied by [`Profile::Desk`].
pub const DESK_MAX_ITERS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Optimizer options as configured.
    Paper,
    /// Caps the optimizer at [`DESK_MAX_ITERS`].
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(Error::InvalidConfig(format!("unknown profile {other:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Desk => "desk",
        })
    }
}

/// Everything one training run needs.
///
/// `output_dir` is not serialized so that the echoed config inside
/// `summary.json` is independent of where the run was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub vdp: VdpConfig,
    pub amplitude: f64,
    pub lambda_mode: LambdaMode,
    pub layers: LayerSpec,
    pub seed: u64,
    pub optimizer: LbfgsOptions,
    pub profile: Profile,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// The benchmark: mu = 1 from (1, 0), amplitude 2, lambda 1, 6x30.
    fn default() -> Self {
        Self {
            vdp: VdpConfig::default(),
            amplitude: 2.0,
            lambda_mode: LambdaMode::Finite(1.0),
            layers: LayerSpec::hidden(6, 30).expect("valid"),
            seed: 42,
            optimizer: LbfgsOptions::default(),
            profile: Profile::Desk,
            output_dir: PathBuf::from("runs/benchmark"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.vdp.validate()?;
        crate::signal::DesiredSignal::new(self.amplitude)?;
        if let LambdaMode::Finite(l) = self.lambda_mode {
            LambdaMode::finite(l)?;
        }
        self.optimizer.validate()
    }

    /// Optimizer options after the profile's cap.
    pub fn effective_optimizer(&self) -> LbfgsOptions {
        let mut opts = self.optimizer.clone();
        if self.profile == Profile::Desk {
            opts.max_iters = opts.max_iters.min(DESK_MAX_ITERS);
        }
        opts
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ConfigOverrides::from_file(path)?.build()
    }
}

/// Flat key-value view of [`ExperimentConfig`]; used both for config files
/// and for command-line overrides. Unset keys leave the target untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub mu: Option<f64>,
    pub x0: Option<f64>,
    pub v0: Option<f64>,
    pub t_end: Option<f64>,
    pub n_points: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub amplitude: Option<f64>,
    pub lambda: Option<LambdaMode>,
    pub layers: Option<String>,
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub memory: Option<usize>,
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub f_rel_tol: Option<f64>,
    pub wolfe_c1: Option<f64>,
    pub wolfe_c2: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Keys set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> Self {
        macro_rules! merged {
            ($($field:ident),+) => {
                Self { $($field: other.$field.or(self.$field)),+ }
            };
        }
        merged!(
            mu, x0, v0, t_end, n_points, rtol, atol, amplitude, lambda, layers, seed, profile, memory,
            max_iters, grad_tol, f_rel_tol, wolfe_c1, wolfe_c2, output_dir
        )
    }

    /// The benchmark with these keys applied, validated.
    pub fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        self.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field.clone() {
                    cfg.$($target)+ = v;
                }
            };
        }
        set!(mu => vdp.mu);
        set!(x0 => vdp.initial[0]);
        set!(v0 => vdp.initial[1]);
        set!(t_end => vdp.t_end);
        set!(n_points => vdp.n_points);
        set!(rtol => vdp.rtol);
        set!(atol => vdp.atol);
        set!(amplitude => amplitude);
        set!(lambda => lambda_mode);
        set!(seed => seed);
        set!(profile => profile);
        set!(memory => optimizer.memory);
        set!(max_iters => optimizer.max_iters);
        set!(grad_tol => optimizer.grad_tol);
        set!(f_rel_tol => optimizer.f_rel_tol);
        set!(wolfe_c1 => optimizer.wolfe_c1);
        set!(wolfe_c2 => optimizer.wolfe_c2);
        set!(output_dir => output_dir);
        if let Some(layers) = &self.layers {
            cfg.layers = layers.parse()?;
        }
        Ok(())
    }
}
