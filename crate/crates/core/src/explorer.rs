//! End-to-end co-exploration: full-ADC baseline, GA fitness, archive export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adc::{AdcKind, LevelMask, PrunedAdc};
use crate::area::{flash_area, pruned_system_area, system_area, AreaReport};
use crate::config::{derive_seed, EvalSplit, ExperimentConfig, FitnessMode};
use crate::dataset::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::mlp::{self, Mlp, MlpTopology, ModelFile, TrainMetrics, TrainedModel};
use crate::nsga2::{self, Chromosome, GaResult, SearchSpace};

const STREAM_SPLIT: u64 = 1;
const STREAM_VALIDATION: u64 = 2;
const STREAM_FLOAT: u64 = 3;
const STREAM_BASELINE: u64 = 4;
const STREAM_GA: u64 = 5;

const SELECT_EPS: f64 = 1e-9;

pub const SUMMARY_FORMAT: &str = "bsadc-summary/1";
pub const PARETO_FILE: &str = "pareto.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const MODELS_DIR: &str = "models";

/// Normalized data views used by one experiment.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    /// Rows the models are fitted on: `train`, minus the validation rows
    /// when validation scoring is enabled.
    pub fit: Dataset,
    /// Rows the GA scores individuals on.
    pub eval: Dataset,
}

pub fn prepare(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Splits> {
    let split = stratified_split(ds, cfg.dataset.train_fraction, derive_seed(cfg.seed, STREAM_SPLIT))?;
    let (train, test) = split.materialize(ds)?;
    let (fit, eval) = match cfg.qat.eval_split {
        EvalSplit::Test => (train.clone(), test.clone()),
        EvalSplit::Validation => {
            let inner = stratified_split(
                &train,
                1.0 - cfg.qat.validation_fraction,
                derive_seed(cfg.seed, STREAM_VALIDATION),
            )?;
            (train.subset(&inner.train), train.subset(&inner.test))
        }
    };
    Ok(Splits { train, test, fit, eval })
}

#[derive(Clone, Debug)]
pub struct Baseline {
    pub topology: MlpTopology,
    pub float_model: Mlp<f64>,
    pub float_metrics: TrainMetrics,
    /// Float model on the unquantized test features.
    pub float_accuracy: f64,
    pub model: TrainedModel<f64>,
    pub dpos: u32,
    /// Quantized model behind full binary ADCs, on the test split.
    pub accuracy: f64,
    /// Same model on the split the GA scores with.
    pub eval_accuracy: f64,
    pub binary_area: AreaReport,
    pub flash_area: AreaReport,
}

pub fn full_binary_adcs(n_inputs: usize, n_bits: u32) -> Result<Vec<AdcKind>> {
    Ok(vec![AdcKind::full_binary(n_bits)?; n_inputs])
}

/// Trains the float reference, then quantization-aware training behind full
/// binary ADCs starting from it. Without a configured decimal-point
/// position every position is tried and the best training accuracy wins,
/// lowest position on ties.
pub fn train_baseline(cfg: &ExperimentConfig, splits: &Splits) -> Result<Baseline> {
    let n_inputs = splits.fit.n_features();
    let topology = cfg.topology(n_inputs, splits.train.n_classes())?;
    // Tiny ReLU layers occasionally start with dead units; a few seeded
    // restarts make the reference robust to that.
    let mut float_best: Option<(Mlp<f64>, TrainMetrics)> = None;
    for restart in 0..cfg.qat.float_restarts.max(1) {
        let seed = derive_seed(derive_seed(cfg.seed, STREAM_FLOAT), restart as u64);
        let hyper = cfg.qat.hyper(cfg.qat.float_epochs, seed);
        let (m, metrics) = mlp::train_float::<f64>(&splits.fit, &topology, &hyper)?;
        if float_best
            .as_ref()
            .is_none_or(|(_, b)| metrics.train_accuracy > b.train_accuracy)
        {
            float_best = Some((m, metrics));
        }
    }
    let (float_model, float_metrics) = float_best.expect("at least one restart");
    let float_accuracy = mlp::evaluate_raw(&float_model, &splits.test)?;

    let adcs = full_binary_adcs(n_inputs, cfg.adc.bits)?;
    let hyper = cfg.qat.hyper(cfg.qat.baseline_epochs, derive_seed(cfg.seed, STREAM_BASELINE));
    let candidates: Vec<u32> = match cfg.model.dpos {
        Some(d) => vec![d],
        None => (0..=cfg.explore.max_dpos).collect(),
    };
    let mut best: Option<(u32, TrainedModel<f64>)> = None;
    for dpos in candidates {
        let trained = match mlp::fine_tune_qat(&float_model, &splits.fit, &cfg.quant(dpos)?, &adcs, &hyper) {
            Ok(t) => t,
            Err(Error::TrainingDiverged { .. }) if cfg.model.dpos.is_none() => continue,
            Err(e) => return Err(e),
        };
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| trained.metrics.train_accuracy > b.metrics.train_accuracy);
        if better {
            best = Some((dpos, trained));
        }
    }
    let (dpos, model) = best.ok_or(Error::TrainingDiverged {
        epoch: cfg.qat.baseline_epochs,
    })?;
    let accuracy = mlp::evaluate(&model.quantized, &splits.test, &adcs)?;
    let eval_accuracy = mlp::evaluate(&model.quantized, &splits.eval, &adcs)?;
    Ok(Baseline {
        topology,
        float_model,
        float_metrics,
        float_accuracy,
        model,
        dpos,
        accuracy,
        eval_accuracy,
        binary_area: system_area(&adcs, &cfg.cost)?,
        flash_area: system_area(&vec![AdcKind::flash(cfg.adc.bits)?; n_inputs], &cfg.cost)?,
    })
}

/// FNV-1a over the chromosome's canonical text; stable across platforms and
/// toolchains, unlike `std::hash`.
pub fn chromosome_hash(c: &Chromosome) -> u64 {
    c.to_string().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Debug)]
pub struct FitnessOutcome {
    pub accuracy: f64,
    pub area: AreaReport,
    /// `None` when training diverged; accuracy is then 0.
    pub model: Option<TrainedModel<f64>>,
}

impl FitnessOutcome {
    pub fn objectives(&self) -> nsga2::Objectives {
        [1.0 - self.accuracy, self.area.transistors as f64]
    }

    pub fn diverged(&self) -> bool {
        self.model.is_none()
    }
}

/// Shared, read-only state of a running exploration.
pub struct Explorer<'a> {
    pub cfg: &'a ExperimentConfig,
    pub splits: &'a Splits,
    pub baseline: &'a Baseline,
}

impl Explorer<'_> {
    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            n_inputs: self.splits.fit.n_features(),
            n_bits: self.cfg.adc.bits,
            max_dpos: self.cfg.explore.max_dpos,
        }
    }

    pub fn full_chromosome(&self) -> Result<Chromosome> {
        Ok(Chromosome {
            masks: vec![LevelMask::full(self.cfg.adc.bits)?; self.splits.fit.n_features()],
            dpos: self.baseline.dpos,
        })
    }

    /// Prunes every input ADC, retrains at the chromosome's decimal-point
    /// position and scores on the evaluation split. Deterministic in the
    /// chromosome and master seed.
    pub fn fitness(&self, c: &Chromosome) -> Result<FitnessOutcome> {
        let n_inputs = self.splits.fit.n_features();
        if c.masks.len() != n_inputs {
            return Err(Error::DimensionMismatch {
                expected: n_inputs,
                got: c.masks.len(),
            });
        }
        let pruned = c.masks.iter().map(PrunedAdc::from_mask).collect::<Result<Vec<_>>>()?;
        let area = pruned_system_area(&pruned, &self.cfg.cost)?;
        let adcs: Vec<AdcKind> = pruned.into_iter().map(AdcKind::PrunedBinary).collect();
        let seed = derive_seed(self.cfg.seed, chromosome_hash(c));
        let (init, epochs) = match self.cfg.qat.fitness_mode {
            FitnessMode::FineTune => (self.baseline.model.shadow.clone(), self.cfg.qat.fitness_epochs),
            FitnessMode::Scratch => (Mlp::init(&self.baseline.topology, seed), self.cfg.qat.baseline_epochs),
        };
        let hyper = self.cfg.qat.hyper(epochs, seed);
        match mlp::fine_tune_qat(&init, &self.splits.fit, &self.cfg.quant(c.dpos)?, &adcs, &hyper) {
            Ok(model) => Ok(FitnessOutcome {
                accuracy: mlp::evaluate(&model.quantized, &self.splits.eval, &adcs)?,
                area,
                model: Some(model),
            }),
            Err(Error::TrainingDiverged { .. }) => Ok(FitnessOutcome {
                accuracy: 0.0,
                area,
                model: None,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub point_id: u64,
    pub generation: usize,
    pub accuracy: f64,
    pub transistor_count: u64,
    pub dpos: u32,
    /// Hex mask per input, in feature order.
    pub masks: Vec<String>,
    /// Model file relative to the output directory.
    pub model: Option<String>,
}

/// Among points within `max_drop` of `baseline_accuracy`, the one with the
/// fewest transistors; ties go to higher accuracy, then lower id.
pub fn select_operating_point(points: &[ParetoPoint], baseline_accuracy: f64, max_drop: f64) -> Result<&ParetoPoint> {
    if points.is_empty() {
        return Err(Error::Empty("archive"));
    }
    if !(0.0..=1.0).contains(&max_drop) {
        return Err(Error::invalid(format!("accuracy drop {max_drop} outside [0, 1]")));
    }
    let floor = baseline_accuracy - max_drop - SELECT_EPS;
    points
        .iter()
        .filter(|p| p.accuracy >= floor)
        .min_by(|a, b| {
            a.transistor_count
                .cmp(&b.transistor_count)
                .then(b.accuracy.total_cmp(&a.accuracy))
                .then(a.point_id.cmp(&b.point_id))
        })
        .ok_or_else(|| {
            let closest = points
                .iter()
                .max_by(|a, b| {
                    a.accuracy
                        .total_cmp(&b.accuracy)
                        .then(b.transistor_count.cmp(&a.transistor_count))
                })
                .expect("non-empty");
            Error::NoPointWithinBound {
                closest_accuracy: closest.accuracy,
                closest_transistors: closest.transistor_count,
            }
        })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GainRatios {
    pub flash_to_binary: f64,
    pub binary_to_pruned: Option<f64>,
    pub flash_to_pruned: Option<f64>,
}

impl GainRatios {
    pub fn new(flash: u64, binary: u64, pruned: Option<u64>) -> Self {
        let ratio = |a: u64, b: u64| a as f64 / b as f64;
        Self {
            flash_to_binary: ratio(flash, binary),
            binary_to_pruned: pruned.map(|p| ratio(binary, p)),
            flash_to_pruned: pruned.map(|p| ratio(flash, p)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub accuracy: f64,
    pub eval_accuracy: f64,
    pub float_accuracy: f64,
    pub train_accuracy: f64,
    pub dpos: u32,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub dropped_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub evaluations: usize,
    pub generations: usize,
    pub archive_size: usize,
    /// Chromosomes whose training diverged; they were scored with accuracy 0.
    pub diverged: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub status: String,
    pub error: Option<String>,
    pub n_bits: u32,
    pub data: DataSummary,
    pub baseline: BaselineSummary,
    pub flash_baseline: bool,
    pub binary_baseline: bool,
    pub flash_system: AreaReport,
    pub binary_system: AreaReport,
    pub max_accuracy_drop: f64,
    pub operating_point: Option<ParetoPoint>,
    pub pruned_system: Option<AreaReport>,
    pub gains: GainRatios,
    pub search: Option<SearchSummary>,
}

impl Summary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: format!("{}: {}", path.display(), e.path()),
            message: e.into_inner().to_string(),
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(&dir.join(SUMMARY_FILE), &text)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_pareto_csv(path: &Path, feature_names: &[String], points: &[ParetoPoint]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = ["point_id", "generation", "accuracy", "transistor_count", "dpos"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(feature_names.iter().map(|n| format!("mask_{n}")));
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row = vec![
            p.point_id.to_string(),
            p.generation.to_string(),
            format!("{:.6}", p.accuracy),
            p.transistor_count.to_string(),
            p.dpos.to_string(),
        ];
        row.extend(p.masks.iter().map(|m| format!("0x{m}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `pareto.csv` back; model references follow the naming used by
/// [`explore`].
pub fn read_pareto_csv(path: &Path) -> Result<Vec<ParetoPoint>> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let header = r.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let fixed = ["point_id", "generation", "accuracy", "transistor_count", "dpos"];
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(csv_err(format!("unexpected header {header:?}")));
    }
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| csv_err(format!("row {}: bad {} `{}`", line + 2, fixed[i], field(i)));
        let point_id: u64 = field(0).parse().map_err(|_| bad(0))?;
        let accuracy: f64 = field(2).parse().map_err(|_| bad(2))?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(bad(2));
        }
        points.push(ParetoPoint {
            point_id,
            generation: field(1).parse().map_err(|_| bad(1))?,
            accuracy,
            transistor_count: field(3).parse().map_err(|_| bad(3))?,
            dpos: field(4).parse().map_err(|_| bad(4))?,
            masks: rec
                .iter()
                .skip(fixed.len())
                .map(|m| m.trim_start_matches("0x").to_string())
                .collect(),
            model: Some(model_path(point_id)),
        });
    }
    Ok(points)
}

fn model_path(point_id: u64) -> String {
    format!("{MODELS_DIR}/point_{point_id}.json")
}

fn model_metrics(accuracy: f64, transistors: u64, train: &TrainMetrics) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("accuracy".to_string(), accuracy),
        ("transistor_count".to_string(), transistors as f64),
        ("train_accuracy".to_string(), train.train_accuracy),
        ("final_loss".to_string(), train.final_loss),
    ])
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub baseline: Baseline,
    pub points: Vec<ParetoPoint>,
    pub summary: Summary,
    pub ga: GaResult,
}

fn summarize(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    splits: &Splits,
    baseline: &Baseline,
    points: &[ParetoPoint],
) -> Summary {
    let chosen = select_operating_point(points, baseline.accuracy, cfg.explore.max_accuracy_drop)
        .ok()
        .cloned();
    let pruned_system = chosen.as_ref().and_then(|p| {
        let adcs = p
            .masks
            .iter()
            .map(|h| LevelMask::from_hex(cfg.adc.bits, h).and_then(|m| PrunedAdc::from_mask(&m)))
            .collect::<Result<Vec<_>>>()
            .ok()?;
        pruned_system_area(&adcs, &cfg.cost).ok()
    });
    Summary {
        format: SUMMARY_FORMAT.into(),
        status: "ok".into(),
        error: None,
        n_bits: cfg.adc.bits,
        data: DataSummary {
            rows: ds.len(),
            features: ds.feature_names.clone(),
            classes: ds.class_names.clone(),
            train_rows: splits.train.len(),
            test_rows: splits.test.len(),
            dropped_rows: ds.dropped_rows,
        },
        baseline: BaselineSummary {
            accuracy: baseline.accuracy,
            eval_accuracy: baseline.eval_accuracy,
            float_accuracy: baseline.float_accuracy,
            train_accuracy: baseline.model.metrics.train_accuracy,
            dpos: baseline.dpos,
            model: format!("{MODELS_DIR}/baseline.json"),
        },
        flash_baseline: cfg.adc.flash_baseline,
        binary_baseline: cfg.adc.binary_baseline,
        flash_system: baseline.flash_area,
        binary_system: baseline.binary_area,
        max_accuracy_drop: cfg.explore.max_accuracy_drop,
        gains: GainRatios::new(
            baseline.flash_area.transistors,
            baseline.binary_area.transistors,
            chosen.as_ref().map(|p| p.transistor_count),
        ),
        operating_point: chosen,
        pruned_system,
        search: None,
    }
}

/// Runs the whole pipeline. With `out` set, writes the config echo,
/// baseline model, `pareto.csv`, `summary.json` and one model file per
/// archived point; a failing search still leaves the config, baseline and a
/// summary with the error behind.
pub fn explore(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Exploration> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;
    let models_dir: Option<PathBuf> = match out {
        Some(dir) => {
            let models = dir.join(MODELS_DIR);
            fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
            write_file(&dir.join(CONFIG_ECHO_FILE), &cfg.to_toml_string()?)?;
            Some(models)
        }
        None => None,
    };

    let splits = prepare(cfg, &ds)?;
    let baseline = train_baseline(cfg, &splits)?;
    if let Some(models) = &models_dir {
        let metrics = model_metrics(baseline.accuracy, baseline.binary_area.transistors, &baseline.model.metrics);
        ModelFile::from_model(&baseline.model.quantized, baseline.model.seed, metrics).save(&models.join("baseline.json"))?;
    }

    let explorer = Explorer {
        cfg,
        splits: &splits,
        baseline: &baseline,
    };
    let mut ga_cfg = cfg.ga.clone();
    ga_cfg.seed = derive_seed(cfg.seed, STREAM_GA);
    let seeds = if cfg.explore.seed_full_adc {
        vec![explorer.full_chromosome()?]
    } else {
        Vec::new()
    };
    let diverged = Mutex::new(BTreeSet::new());
    let ga = nsga2::run(&ga_cfg, &explorer.space(), &seeds, cfg.workers, |c| {
        let outcome = explorer.fitness(c)?;
        if outcome.diverged() {
            diverged.lock().expect("diverged set").insert(c.to_string());
        }
        Ok(outcome.objectives())
    });
    let ga = match ga {
        Ok(ga) => ga,
        Err(e) => {
            if let Some(dir) = out {
                let mut summary = summarize(cfg, &ds, &splits, &baseline, &[]);
                summary.status = "failed".into();
                summary.error = Some(e.to_string());
                summary.save(dir)?;
            }
            return Err(e);
        }
    };

    // Re-run the archived individuals to recover their models; this doubles
    // as a determinism audit of the fitness function.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let replays: Vec<Result<FitnessOutcome>> =
        pool.install(|| ga.archive.par_iter().map(|ind| explorer.fitness(&ind.chromosome)).collect());
    let mut points = Vec::with_capacity(ga.archive.len());
    for (ind, replay) in ga.archive.iter().zip(replays) {
        let replay = replay?;
        if Some(replay.objectives()) != ind.objectives {
            return Err(Error::Contract(format!(
                "fitness of {} is not reproducible: {:?} vs {:?}",
                ind.chromosome,
                ind.objectives,
                replay.objectives()
            )));
        }
        let model = match (&models_dir, &replay.model) {
            (Some(models), Some(m)) => {
                let rel = model_path(ind.id);
                let metrics = model_metrics(replay.accuracy, replay.area.transistors, &m.metrics);
                ModelFile::from_model(&m.quantized, m.seed, metrics)
                    .save(&models.join(format!("point_{}.json", ind.id)))?;
                Some(rel)
            }
            _ => None,
        };
        points.push(ParetoPoint {
            point_id: ind.id,
            generation: ind.generation,
            accuracy: replay.accuracy,
            transistor_count: replay.area.transistors,
            dpos: ind.chromosome.dpos,
            masks: ind.chromosome.masks.iter().map(LevelMask::to_hex).collect(),
            model,
        });
    }

    let mut summary = summarize(cfg, &ds, &splits, &baseline, &points);
    summary.search = Some(SearchSummary {
        evaluations: ga.evaluations,
        generations: cfg.ga.generations,
        archive_size: points.len(),
        diverged: diverged.into_inner().expect("diverged set").into_iter().collect(),
    });
    if let Some(dir) = out {
        write_pareto_csv(&dir.join(PARETO_FILE), &ds.feature_names, &points)?;
        summary.save(dir)?;
    }
    Ok(Exploration {
        baseline,
        points,
        summary,
        ga,
    })
}

/// Flash system area for `n_inputs` ADCs of `n_bits`.
pub fn flash_system_area(n_inputs: usize, n_bits: u32, cost: &crate::area::CostTable) -> Result<AreaReport> {
    let one = flash_area(n_bits, cost)?;
    Ok((0..n_inputs).map(|_| one).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::binary_full_area;
    use crate::config::DatasetKind;
    use crate::nsga2::GaConfig;

    fn point(id: u64, accuracy: f64, transistors: u64) -> ParetoPoint {
        ParetoPoint {
            point_id: id,
            generation: 0,
            accuracy,
            transistor_count: transistors,
            dpos: 0,
            masks: vec![],
            model: None,
        }
    }

    #[test]
    fn operating_point_rules() {
        let pts = [point(0, 0.80, 100), point(1, 0.77, 40), point(2, 0.70, 20)];
        assert_eq!(select_operating_point(&pts, 0.80, 0.05).unwrap().point_id, 1);
        assert_eq!(select_operating_point(&pts, 0.80, 1.0).unwrap().point_id, 2);
        assert_eq!(select_operating_point(&pts, 0.80, 0.0).unwrap().point_id, 0);
        match select_operating_point(&pts, 0.90, 0.0) {
            Err(Error::NoPointWithinBound {
                closest_accuracy,
                closest_transistors,
            }) => assert_eq!((closest_accuracy, closest_transistors), (0.80, 100)),
            other => panic!("{other:?}"),
        }
        let tie = [point(0, 0.75, 40), point(1, 0.78, 40)];
        assert_eq!(select_operating_point(&tie, 0.80, 0.05).unwrap().point_id, 1);
        assert!(matches!(select_operating_point(&[], 0.8, 0.1), Err(Error::Empty(_))));
    }

    #[test]
    fn gain_arithmetic() {
        let g = GainRatios::new(400, 200, Some(100));
        assert_eq!(g.flash_to_pruned, Some(4.0));
        assert_eq!(g.binary_to_pruned, Some(2.0));
        assert_eq!(g.flash_to_binary, 2.0);
        assert_eq!(GainRatios::new(400, 200, Some(200)).binary_to_pruned, Some(1.0));
    }

    fn toy_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 7;
        cfg.dataset.kind = DatasetKind::Blobs;
        cfg.dataset.per_class = 40;
        cfg.adc.bits = 2;
        cfg.model.dpos = Some(4);
        cfg.qat.float_epochs = 60;
        cfg.qat.baseline_epochs = 60;
        cfg.qat.fitness_epochs = 10;
        cfg.ga = GaConfig {
            population: 20,
            generations: 10,
            ..GaConfig::default()
        };
        cfg
    }

    #[test]
    fn baseline_areas_are_additive() {
        let mut cfg = toy_config();
        cfg.dataset.kind = DatasetKind::SeedsSurrogate;
        cfg.adc.bits = 3;
        cfg.qat.float_epochs = 5;
        cfg.qat.baseline_epochs = 5;
        let ds = cfg.load_dataset().unwrap();
        let splits = prepare(&cfg, &ds).unwrap();
        let b = train_baseline(&cfg, &splits).unwrap();
        assert_eq!(b.binary_area.transistors, 7 * binary_full_area(3, &cfg.cost).unwrap().transistors);
        assert_eq!(b.flash_area, flash_system_area(7, 3, &cfg.cost).unwrap());
        let again = train_baseline(&cfg, &splits).unwrap();
        assert_eq!(b.model.metrics, again.model.metrics);
        assert_eq!(b.accuracy, again.accuracy);
    }

    #[test]
    fn fitness_identity_and_minimal_cases() {
        let cfg = toy_config();
        let ds = cfg.load_dataset().unwrap();
        let splits = prepare(&cfg, &ds).unwrap();
        let baseline = train_baseline(&cfg, &splits).unwrap();
        let ex = Explorer {
            cfg: &cfg,
            splits: &splits,
            baseline: &baseline,
        };
        let full = ex.full_chromosome().unwrap();
        let out = ex.fitness(&full).unwrap();
        assert_eq!(out.area.transistors, baseline.binary_area.transistors);
        assert!((out.accuracy - baseline.accuracy).abs() <= 0.01 + 1e-12, "{} vs {}", out.accuracy, baseline.accuracy);
        assert_eq!(ex.fitness(&full).unwrap().objectives(), out.objectives());

        let minimal = Chromosome {
            masks: vec![LevelMask::from_codes(2, &[0, 3]).unwrap(); 2],
            dpos: baseline.dpos,
        };
        let single = crate::area::pruned_area(
            &PrunedAdc::from_mask(&LevelMask::from_codes(2, &[0, 3]).unwrap()).unwrap(),
            &cfg.cost,
        );
        assert_eq!(ex.fitness(&minimal).unwrap().area.transistors, 2 * single.transistors);
    }

    #[test]
    fn toy_exploration_prunes_without_losing_accuracy() {
        let cfg = toy_config();
        let run = explore(&cfg, None).unwrap();
        let full = run.baseline.binary_area.transistors as f64;
        assert!(
            run.points
                .iter()
                .any(|p| p.accuracy >= run.baseline.accuracy - 0.01 && p.transistor_count as f64 <= 0.5 * full),
            "{:?}",
            run.points
        );
        for a in &run.points {
            for b in &run.points {
                let (oa, ob) = ([1.0 - a.accuracy, a.transistor_count as f64], [1.0 - b.accuracy, b.transistor_count as f64]);
                assert!(!nsga2::dominates(&oa, &ob));
            }
            let masks: Vec<PrunedAdc> = a
                .masks
                .iter()
                .map(|h| PrunedAdc::from_mask(&LevelMask::from_hex(2, h).unwrap()).unwrap())
                .collect();
            assert_eq!(pruned_system_area(&masks, &cfg.cost).unwrap().transistors, a.transistor_count);
        }
    }

    #[test]
    fn pareto_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PARETO_FILE);
        let mut p = point(3, 0.8125, 40);
        p.masks = vec!["9".into(), "f".into()];
        p.model = Some(model_path(3));
        write_pareto_csv(&path, &["a".into(), "b".into()], std::slice::from_ref(&p)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "point_id,generation,accuracy,transistor_count,dpos,mask_a,mask_b\n3,0,0.812500,40,0,0x9,0xf\n"
        );
        assert_eq!(read_pareto_csv(&path).unwrap(), vec![p]);
    }
}
