//! Experiment configuration: one human-editable TOML file per experiment,
//! strictly validated (unknown keys rejected, scheme-specific constraints
//! checked) before anything runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qcbm_core::kernels::DEFAULT_BANDWIDTHS;
use qcbm_core::{BasSpec, CircuitSpec, Scheme, SchemeConfig};

/// Environment variable that, when set, re-roots every `output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "QCBM_OUTPUT_ROOT";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub bas: BasSection,
    pub circuit: CircuitSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub mcr2: Mcr2Section,
    pub grid: Option<GridSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasSection {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub depth: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub name: Scheme,
    #[serde(default)]
    pub alpha: f64,
    pub batch_m: usize,
    pub lr_g: f64,
    #[serde(default = "default_lr_d")]
    pub lr_d: f64,
    #[serde(default = "default_d_steps")]
    pub d_steps_per_g: usize,
    pub iterations: usize,
    #[serde(default)]
    pub exact_pstar: bool,
    pub root_seed: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    /// Starting checkpoint; required for (and exclusive to) `fine_tune`.
    pub init_checkpoint: Option<PathBuf>,
}

fn default_lr_d() -> f64 {
    1e-3
}

fn default_d_steps() -> usize {
    2
}

fn default_eval_interval() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub bandwidths: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            bandwidths: DEFAULT_BANDWIDTHS.to_vec(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mcr2Section {
    pub eps_sq: f64,
}

impl Default for Mcr2Section {
    fn default() -> Self {
        Self { eps_sq: 0.5 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lr_g_list: Vec<f64>,
    pub lr_d_list: Vec<f64>,
    pub n_seeds: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.bas_spec().map_err(|e| e.to_string())?;
        if self.scheme.name == Scheme::FineTune {
            if self.scheme.init_checkpoint.is_none() {
                return Err("scheme.init_checkpoint is required for fine_tune".into());
            }
        } else if self.scheme.init_checkpoint.is_some() {
            return Err("scheme.init_checkpoint is only valid for fine_tune".into());
        }
        if self.scheme.alpha != 0.0 && self.scheme.name != Scheme::InterNsMcr2 {
            return Err("scheme.alpha is only meaningful for inter_ns_mcr2".into());
        }
        if let Some(grid) = &self.grid {
            if grid.lr_g_list.is_empty() || grid.lr_d_list.is_empty() || grid.n_seeds == 0 {
                return Err("grid lists and n_seeds must be non-empty".into());
            }
        }
        self.scheme_config().validate().map_err(|e| e.to_string())
    }

    pub fn bas_spec(&self) -> qcbm_core::Result<BasSpec> {
        BasSpec::new(self.bas.height, self.bas.width)
    }

    pub fn circuit_spec(&self) -> qcbm_core::Result<CircuitSpec> {
        let bas = self.bas_spec()?;
        CircuitSpec::ring(bas.n_qubits(), self.circuit.depth)
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.scheme.name);
        cfg.alpha = self.scheme.alpha;
        cfg.batch_m = self.scheme.batch_m;
        cfg.lr_g = self.scheme.lr_g;
        cfg.lr_d = self.scheme.lr_d;
        cfg.d_steps_per_g = self.scheme.d_steps_per_g;
        cfg.iterations = self.scheme.iterations;
        cfg.exact_pstar = self.scheme.exact_pstar;
        cfg.root_seed = self.scheme.root_seed;
        cfg.eval_interval = self.scheme.eval_interval;
        cfg.bandwidths = self.kernel.bandwidths.clone();
        cfg.eps_sq = self.mcr2.eps_sq;
        cfg
    }

    /// The run output directory, re-rooted under `QCBM_OUTPUT_ROOT` when set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(&self.output_dir),
            None => self.output_dir.clone(),
        }
    }
}
