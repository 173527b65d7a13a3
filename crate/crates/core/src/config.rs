//! Declarative pipeline configuration. Every stage reads its settings and
//! seeds from here; the fingerprint of the resolved configuration is
//! stamped on every artifact.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocking::{BlockingConfig, FilterMode, SegmentCombination, Strategy};
use crate::classify::{ClassifierKind, Hyperparameters};
use crate::features::{FeatureGroup, FeatureSchema};
use crate::textnorm::TextConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub records: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockingSection {
    pub strategy: Strategy,
    pub cutoff: usize,
    pub combination_threshold: f64,
    pub filter_mode: FilterMode,
    /// `None` selects combinations with the gold filter at
    /// `combination_threshold`.
    pub enabled_combinations: Option<BTreeSet<SegmentCombination>>,
    /// Largest cutoff reported by blocking curves.
    pub max_cutoff: usize,
}

impl Default for BlockingSection {
    fn default() -> Self {
        BlockingSection {
            strategy: Strategy::Combined,
            cutoff: 5,
            combination_threshold: 0.6,
            filter_mode: FilterMode::PrecisionAtOne,
            enabled_combinations: None,
            max_cutoff: 20,
        }
    }
}

impl BlockingSection {
    pub fn blocking_config(&self) -> BlockingConfig {
        BlockingConfig {
            strategy: self.strategy,
            cutoff: self.cutoff,
            enabled_combinations: self
                .enabled_combinations
                .clone()
                .unwrap_or_else(|| SegmentCombination::all().collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub groups: BTreeSet<FeatureGroup>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            groups: FeatureSchema::all().groups,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: ClassifierKind,
    pub hyperparameters: Hyperparameters,
    /// Overrides the seeds inside `hyperparameters`.
    pub seed: u64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            kind: ClassifierKind::LargeMarginLinear,
            hyperparameters: Hyperparameters::default(),
            seed: 42,
        }
    }
}

impl ClassifierSection {
    pub fn resolved_hyperparameters(&self) -> Hyperparameters {
        self.hyperparameters.clone().with_seed(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub folds: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { folds: 10, seed: 42 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub blocking: BlockingSection,
    pub features: FeaturesSection,
    pub classifier: ClassifierSection,
    pub eval: EvalSection,
    pub text: TextConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.blocking.blocking_config().validate()?;
        if self.blocking.max_cutoff == 0 {
            return Err(Error::Invalid("blocking.max_cutoff must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.blocking.combination_threshold) {
            return Err(Error::Invalid("blocking.combination_threshold must be in [0, 1]".into()));
        }
        if self.features.groups.is_empty() {
            return Err(Error::Invalid("features.groups must not be empty".into()));
        }
        if self.eval.folds < 2 {
            return Err(Error::Invalid("eval.folds must be at least 2".into()));
        }
        if self.classifier.seed == 0 || self.eval.seed == 0 {
            return Err(Error::Invalid("seeds must be positive".into()));
        }
        if self.text.year_min > self.text.year_max {
            return Err(Error::Invalid("text.year_min exceeds text.year_max".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema {
            groups: self.features.groups.clone(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form. Paths only locate artifacts,
    /// so they are left out: moving a run does not change its fingerprint.
    pub fn fingerprint(&self) -> String {
        let resolved = PipelineConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&resolved).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
