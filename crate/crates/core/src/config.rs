//! Experiment configuration: a TOML document whose sections mirror the
//! pipeline stages. `BSADC_SEED` and `BSADC_WORKERS` override the seed and
//! worker count; command-line flags override both.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::area::CostTable;
use crate::dataset::{self, synthetic, CsvOptions, Dataset};
use crate::error::{Error, Result};
use crate::mlp::{BiasQuant, MlpTopology, QuantConfig, TrainHyper, WEIGHT_BITS};
use crate::nsga2::GaConfig;

pub const ENV_SEED: &str = "BSADC_SEED";
pub const ENV_WORKERS: &str = "BSADC_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    #[default]
    Csv,
    SeedsSurrogate,
    Blobs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Required for `kind = "csv"`; relative paths resolve against the
    /// config file's directory.
    pub path: Option<PathBuf>,
    pub csv: CsvOptions,
    /// Rows per class for `kind = "blobs"`.
    pub per_class: usize,
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Csv,
            path: None,
            csv: CsvOptions::default(),
            per_class: 50,
            train_fraction: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcConfig {
    pub bits: u32,
    pub flash_baseline: bool,
    pub binary_baseline: bool,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            bits: 3,
            flash_baseline: true,
            binary_baseline: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer widths; empty picks one layer of `max(3, classes)`.
    pub hidden: Vec<usize>,
    /// Baseline decimal-point position; unset searches all positions and
    /// keeps the best training accuracy.
    pub dpos: Option<u32>,
    pub bias: BiasQuant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessMode {
    /// Continue from the baseline shadow weights.
    #[default]
    FineTune,
    /// Train every individual from a fresh initialization.
    Scratch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalSplit {
    #[default]
    Test,
    /// Carve a stratified validation set out of the training rows and score
    /// individuals on it.
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QatConfig {
    pub float_epochs: usize,
    /// Independent float initializations; the best training accuracy is kept.
    pub float_restarts: usize,
    pub baseline_epochs: usize,
    pub fitness_epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub fitness_mode: FitnessMode,
    pub eval_split: EvalSplit,
    pub validation_fraction: f64,
}

impl Default for QatConfig {
    fn default() -> Self {
        Self {
            float_epochs: 150,
            float_restarts: 3,
            baseline_epochs: 150,
            fitness_epochs: 20,
            lr: 0.05,
            batch: 16,
            fitness_mode: FitnessMode::FineTune,
            eval_split: EvalSplit::Test,
            validation_fraction: 0.2,
        }
    }
}

impl QatConfig {
    pub fn hyper(&self, epochs: usize, seed: u64) -> TrainHyper {
        TrainHyper {
            epochs,
            lr: self.lr,
            batch: self.batch,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    /// Largest decimal-point position the search may pick.
    pub max_dpos: u32,
    /// Put the all-ones chromosome at the baseline position into the first
    /// generation.
    pub seed_full_adc: bool,
    /// Accuracy drop used to pick the operating point in summary.json.
    pub max_accuracy_drop: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            max_dpos: WEIGHT_BITS - 1,
            seed_full_adc: true,
            max_accuracy_drop: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub adc: AdcConfig,
    pub model: ModelConfig,
    pub qat: QatConfig,
    /// `ga.seed` is ignored; the search seed derives from the master seed.
    pub ga: GaConfig,
    pub cost: CostTable,
    pub explore: ExploreConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            output_dir: None,
            dataset: DatasetConfig::default(),
            adc: AdcConfig::default(),
            model: ModelConfig::default(),
            qat: QatConfig::default(),
            ga: GaConfig::default(),
            cost: CostTable::default(),
            explore: ExploreConfig::default(),
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })
    }

    /// Parses a config file. Relative dataset paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.dataset.path, path.parent()) {
            if p.is_relative() {
                cfg.dataset.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    /// Applies `BSADC_SEED` / `BSADC_WORKERS` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup(ENV_SEED) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| config_err(ENV_SEED, format!("`{v}` is not an unsigned integer")))?;
        }
        if let Some(v) = lookup(ENV_WORKERS) {
            self.workers = v
                .trim()
                .parse()
                .map_err(|_| config_err(ENV_WORKERS, format!("`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Checks every section, including that a CSV dataset file exists.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(config_err("workers", "must be at least 1"));
        }
        if !(2..=4).contains(&self.adc.bits) {
            return Err(config_err("adc.bits", format!("{} outside 2..=4", self.adc.bits)));
        }
        let d = &self.dataset;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(config_err("dataset.train_fraction", "must lie strictly between 0 and 1"));
        }
        match d.kind {
            DatasetKind::Csv => match &d.path {
                None => return Err(config_err("dataset.path", "required when kind = \"csv\"")),
                Some(p) if !p.is_file() => {
                    return Err(config_err("dataset.path", format!("{} does not exist", p.display())))
                }
                Some(_) => {}
            },
            DatasetKind::Blobs if d.per_class < 4 => {
                return Err(config_err("dataset.per_class", "need at least 4 rows per class"));
            }
            _ => {}
        }
        if self.model.hidden.contains(&0) {
            return Err(config_err("model.hidden", "layer widths must be positive"));
        }
        if self.explore.max_dpos >= WEIGHT_BITS {
            return Err(config_err(
                "explore.max_dpos",
                format!("must be below the {WEIGHT_BITS}-bit weight width"),
            ));
        }
        if let Some(dpos) = self.model.dpos {
            if dpos > self.explore.max_dpos {
                return Err(config_err("model.dpos", "exceeds explore.max_dpos"));
            }
        }
        if !(0.0..=1.0).contains(&self.explore.max_accuracy_drop) {
            return Err(config_err("explore.max_accuracy_drop", "must lie in [0, 1]"));
        }
        let q = &self.qat;
        if q.float_restarts == 0 {
            return Err(config_err("qat.float_restarts", "must be at least 1"));
        }
        if q.batch == 0 {
            return Err(config_err("qat.batch", "must be positive"));
        }
        if !(q.lr.is_finite() && q.lr > 0.0) {
            return Err(config_err("qat.lr", "must be positive"));
        }
        if q.eval_split == EvalSplit::Validation && !(q.validation_fraction > 0.0 && q.validation_fraction < 1.0) {
            return Err(config_err("qat.validation_fraction", "must lie strictly between 0 and 1"));
        }
        self.ga.validate()?;
        self.cost.validate()?;
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.dataset.kind {
            DatasetKind::Csv => {
                let path = self
                    .dataset
                    .path
                    .as_deref()
                    .ok_or_else(|| config_err("dataset.path", "required when kind = \"csv\""))?;
                dataset::load_csv(path, &self.dataset.csv)
            }
            DatasetKind::SeedsSurrogate => Ok(synthetic::seeds_surrogate(self.seed)),
            DatasetKind::Blobs => Ok(synthetic::separable_blobs(self.dataset.per_class, self.seed)),
        }
    }

    pub fn topology(&self, n_features: usize, n_classes: usize) -> Result<MlpTopology> {
        if self.model.hidden.is_empty() {
            return Ok(MlpTopology::default_for(n_features, n_classes));
        }
        let mut sizes = vec![n_features];
        sizes.extend(&self.model.hidden);
        sizes.push(n_classes);
        MlpTopology::new(sizes)
    }

    pub fn quant(&self, dpos: u32) -> Result<QuantConfig> {
        let mut q = QuantConfig::new(dpos)?;
        q.bias = self.model.bias;
        Ok(q)
    }
}

/// Independent 64-bit stream seed from a master seed and a stream tag
/// (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_sections() {
        let cfg = ExperimentConfig::from_toml_str("[dataset]\nkind = \"seeds-surrogate\"\n").unwrap();
        assert_eq!(cfg.adc.bits, 3);
        assert_eq!(cfg.ga.population, 50);
        assert_eq!(cfg.cost, CostTable::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = ExperimentConfig::from_toml_str("[ga]\npopulation = \"many\"\n").unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "ga.population"),
            other => panic!("{other}"),
        }
        let err = ExperimentConfig::from_toml_str("[adc]\nbitz = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "adc.bitz"), "{err}");
    }

    #[test]
    fn validation_rules() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.path = Some("/definitely/not/here.csv".into());
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "dataset.path"));
        cfg.dataset.kind = DatasetKind::SeedsSurrogate;
        cfg.validate().unwrap();
        cfg.adc.bits = 5;
        assert!(cfg.validate().is_err());
        cfg.adc.bits = 2;
        cfg.cost.comp_noinv_tr = 9;
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "cost.comp_noinv_tr"));
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_env(|k| match k {
            ENV_SEED => Some("42".into()),
            ENV_WORKERS => Some("3".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!((cfg.seed, cfg.workers), (42, 3));
        let err = cfg.apply_env(|k| (k == ENV_SEED).then(|| "x".into())).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == ENV_SEED));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.kind = DatasetKind::Blobs;
        cfg.model.hidden = vec![4];
        cfg.model.dpos = Some(3);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
