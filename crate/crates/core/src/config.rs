//! Experiment configuration: one TOML file with a documented schema, plus
//! command-line overrides that win over file values. Unknown keys are
//! rejected. All randomness flows from the two user-visible seeds here
//! (`dataset.seed` and `training.seed`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{OptimConfig, NCP_FIDELITY_THRESHOLD};
use crate::lstm::TrainConfig;
use crate::presets::SystemConfig;
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetBlock {
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub with_dcp: bool,
}

impl Default for DatasetBlock {
    fn default() -> Self {
        Self {
            train_count: 500,
            test_count: 100,
            seed: 42,
            with_dcp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub grad_tol: f64,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let d = OptimConfig::default();
        Self {
            max_iters: d.max_iters,
            learning_rate: d.learning_rate,
            grad_tol: d.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingBlock {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for TrainingBlock {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            batch_size: d.batch_size,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            hidden_dim: d.hidden_dim,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    /// Perturbation size applied to each pulse coordinate.
    pub eps: f64,
    /// Histogram bin count.
    pub bins: usize,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self { eps: 0.1, bins: 30 }
    }
}

/// The resolved configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub dataset: DatasetBlock,
    pub optimizer: OptimizerBlock,
    pub training: TrainingBlock,
    pub analysis: AnalysisBlock,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed_data: Option<u64>,
    pub seed_train: Option<u64>,
    pub drift: Option<String>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub lindblad: Option<String>,
    pub lindblad_rate: Option<f64>,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub with_dcp: Option<bool>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub hidden_dim: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed_data {
            self.dataset.seed = v;
        }
        if let Some(v) = o.seed_train {
            self.training.seed = v;
        }
        if let Some(v) = &o.drift {
            self.system.drift = v.clone();
        }
        if let Some(v) = o.gamma {
            self.system.gamma = v;
        }
        if let Some(v) = o.eps {
            self.analysis.eps = v;
        }
        if let Some(v) = &o.lindblad {
            self.system.lindblad = v.clone();
        }
        if let Some(v) = o.lindblad_rate {
            self.system.lindblad_rate = v;
        }
        if let Some(v) = o.train_count {
            self.dataset.train_count = v;
        }
        if let Some(v) = o.test_count {
            self.dataset.test_count = v;
        }
        if let Some(v) = o.with_dcp {
            self.dataset.with_dcp = v;
        }
        if let Some(v) = o.epochs {
            self.training.epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.training.batch_size = v;
        }
        if let Some(v) = o.hidden_dim {
            self.training.hidden_dim = v;
        }
    }

    /// Validate every block against the module-level invariants.
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.dataset.train_count == 0 || self.dataset.test_count == 0 {
            return Err(Error::InvalidArgument(
                "dataset train_count and test_count must be >= 1".into(),
            ));
        }
        self.optim_config().validate()?;
        self.train_config().validate()?;
        if !(self.analysis.eps >= 0.0 && self.analysis.eps < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "analysis.eps must be in [0, 2), got {}",
                self.analysis.eps
            )));
        }
        if self.analysis.bins == 0 {
            return Err(Error::InvalidArgument("analysis.bins must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed for record generation.
    pub fn data_seed(&self) -> RngSeed {
        RngSeed::new(self.dataset.seed, 0)
    }

    /// Seed for the train/test split (derived from the data seed so the
    /// corpus identity is one seed).
    pub fn split_seed(&self) -> RngSeed {
        RngSeed::new(self.dataset.seed, u64::MAX)
    }

    /// Seed driving mini-batch shuffling.
    pub fn train_seed(&self) -> RngSeed {
        RngSeed::new(self.training.seed, 0)
    }

    /// Seed for weight initialization (derived from the training seed).
    pub fn init_seed(&self) -> RngSeed {
        RngSeed::new(self.training.seed, 1)
    }

    pub fn optim_config(&self) -> OptimConfig {
        OptimConfig {
            max_iters: self.optimizer.max_iters,
            target_fidelity: NCP_FIDELITY_THRESHOLD,
            learning_rate: self.optimizer.learning_rate,
            grad_tol: self.optimizer.grad_tol,
            seed: self.data_seed(),
            stall_window: None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.training.batch_size,
            epochs: self.training.epochs,
            learning_rate: self.training.learning_rate,
            hidden_dim: self.training.hidden_dim,
            seed: self.train_seed(),
            system: self.system.clone(),
        }
    }

    /// Serialize the fully-resolved config, written into every output
    /// directory.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[system]\nhorizon = 6.0\nnot_a_key = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
        let text = "[dataset]\ntrain_count = 10\n\n[bogus]\nx = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn partial_files_fill_with_defaults() {
        let text = "[system]\ngamma = 0.4\n";
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.system.gamma, 0.4);
        assert_eq!(cfg.system.slots, 32);
        assert_eq!(cfg.dataset.train_count, 500);
    }

    #[test]
    fn overrides_win_over_file_values() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            seed_data: Some(99),
            gamma: Some(0.8),
            drift: Some("0.8sx+0.2sy".into()),
            eps: Some(0.2),
            ..Overrides::default()
        });
        assert_eq!(cfg.dataset.seed, 99);
        assert_eq!(cfg.system.gamma, 0.8);
        assert_eq!(cfg.system.drift, "0.8sx+0.2sy");
        assert_eq!(cfg.analysis.eps, 0.2);
    }

    #[test]
    fn batch_size_presets_are_accepted() {
        for batch in [5, 10, 50] {
            let mut cfg = ExperimentConfig::default();
            cfg.training.batch_size = batch;
            cfg.validate().unwrap();
        }
    }
}
