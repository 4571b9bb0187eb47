//! JSON run configuration. Every field has a default, so `{}` is a valid file.

use std::fs;
use std::path::Path;

use cohortfair::cohort::{ColumnMapping, DEFAULT_AGE_CUTOFF};
use cohortfair::scenario::{ScenarioSpec, DEFAULT_SEEDS, DEFAULT_TEST_CELL_SIZE, STANDARD_FEMALE_FRACTIONS};
use cohortfair::strategies::{AdversarialMode, StrategyConfig, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenarios: ScenarioSection,
    pub cohort: CohortSection,
    pub training: TrainingSection,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub female_fractions: Vec<f64>,
    pub age_ratio: f64,
    pub seeds: Vec<u64>,
    pub per_cell: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    /// Single-character field delimiter.
    pub delimiter: char,
    pub columns: ColumnMapping,
    pub age_cutoff: u32,
    /// Seed for picking one lesion per patient.
    pub selection_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub hidden_dim: usize,
    pub adversarial_mode: AdversarialMode,
}

/// Shape of the toy data. Sizes are overridden by a plan summary when one is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub feature_dim: usize,
    pub class_signal: f64,
    pub sex_signal: f64,
    pub sex_label_correlation: f64,
    pub noise_scale: f64,
    pub female_fraction: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            female_fractions: STANDARD_FEMALE_FRACTIONS.to_vec(),
            age_ratio: 1.0,
            seeds: DEFAULT_SEEDS.to_vec(),
            per_cell: DEFAULT_TEST_CELL_SIZE,
        }
    }
}

impl Default for CohortSection {
    fn default() -> Self {
        Self {
            delimiter: ',',
            columns: ColumnMapping::default(),
            age_cutoff: DEFAULT_AGE_CUTOFF,
            selection_seed: 0,
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let lib = StrategyConfig::default();
        Self {
            lambda: lib.lambda,
            // The paper's 2e-5 suits a pretrained CNN; the toy network needs a larger step.
            learning_rate: 0.05,
            batch_size: lib.batch_size,
            max_epochs: lib.max_epochs,
            patience: lib.patience,
            min_delta: lib.min_delta,
            hidden_dim: 4,
            adversarial_mode: lib.adversarial_mode,
        }
    }
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            feature_dim: 8,
            class_signal: 2.0,
            sex_signal: 2.0,
            sex_label_correlation: 0.8,
            noise_scale: 1.0,
            female_fraction: 0.5,
            n_train: 1000,
            n_val: 300,
            n_test: 1000,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn scenario_specs(&self) -> Vec<ScenarioSpec> {
        self.scenarios
            .female_fractions
            .iter()
            .map(|&f| ScenarioSpec {
                female_fraction: f,
                age_ratio: self.scenarios.age_ratio,
                seeds: self.scenarios.seeds.clone(),
                test_cell_size: self.scenarios.per_cell,
            })
            .collect()
    }

    pub fn strategy_config(&self, strategy: cohortfair::strategies::Strategy, seed: u64) -> StrategyConfig {
        let t = &self.training;
        StrategyConfig {
            strategy,
            lambda: t.lambda,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            min_delta: t.min_delta,
            seed,
            adversarial_mode: t.adversarial_mode,
        }
    }

    pub fn synthetic_config(&self, n_samples: usize, rho: f64, female_fraction: f64, seed: u64) -> SyntheticConfig {
        let s = &self.synthetic;
        SyntheticConfig {
            feature_dim: s.feature_dim,
            n_samples,
            class_signal: s.class_signal,
            sex_signal: s.sex_signal,
            sex_label_correlation: rho,
            noise_scale: s.noise_scale,
            female_fraction,
            seed,
        }
    }

    /// Checks value ranges, naming the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.scenarios;
        if s.female_fractions.is_empty() {
            return Err(invalid("scenarios.female_fractions", "must not be empty"));
        }
        for (i, f) in s.female_fractions.iter().enumerate() {
            if !(0.0..=1.0).contains(f) {
                return Err(invalid(&format!("scenarios.female_fractions[{i}]"), format!("{f} outside [0, 1]")));
            }
        }
        if !(s.age_ratio.is_finite() && s.age_ratio > 0.0) {
            return Err(invalid("scenarios.age_ratio", "must be > 0"));
        }
        if s.seeds.is_empty() {
            return Err(invalid("scenarios.seeds", "must not be empty"));
        }
        let mut seeds = s.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != s.seeds.len() {
            return Err(invalid("scenarios.seeds", "seeds must be distinct"));
        }
        if !self.cohort.delimiter.is_ascii() {
            return Err(invalid("cohort.delimiter", "must be a single ASCII character"));
        }
        let t = &self.training;
        if !(t.lambda.is_finite() && t.lambda >= 0.0) {
            return Err(invalid("training.lambda", format!("{} must be >= 0", t.lambda)));
        }
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
            return Err(invalid("training.learning_rate", "must be > 0"));
        }
        if t.batch_size == 0 {
            return Err(invalid("training.batch_size", "must be positive"));
        }
        if t.max_epochs == 0 {
            return Err(invalid("training.max_epochs", "must be positive"));
        }
        if t.patience > t.max_epochs {
            return Err(invalid("training.patience", "must not exceed max_epochs"));
        }
        if !(t.min_delta.is_finite() && t.min_delta >= 0.0) {
            return Err(invalid("training.min_delta", "must be >= 0"));
        }
        if t.hidden_dim == 0 {
            return Err(invalid("training.hidden_dim", "must be positive"));
        }
        let y = &self.synthetic;
        if y.feature_dim < 2 {
            return Err(invalid("synthetic.feature_dim", "must be at least 2"));
        }
        if y.sex_label_correlation.abs() > 1.0 || y.sex_label_correlation.is_nan() {
            return Err(invalid("synthetic.sex_label_correlation", "must lie in [-1, 1]"));
        }
        if !(y.noise_scale.is_finite() && y.noise_scale > 0.0) {
            return Err(invalid("synthetic.noise_scale", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&y.female_fraction) {
            return Err(invalid("synthetic.female_fraction", "must lie in [0, 1]"));
        }
        for (name, n) in [("n_train", y.n_train), ("n_val", y.n_val), ("n_test", y.n_test)] {
            if n < 2 {
                return Err(invalid(&format!("synthetic.{name}"), "must be at least 2"));
            }
        }
        Ok(())
    }
}

/// Parses JSON text, reporting schema errors with the field path.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(&path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}
