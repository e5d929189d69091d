use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bsadc::adc::{self, AdcKind, LevelMask, ThresholdTree};
use bsadc::area::{self, AreaReport, CostTable};
use bsadc::config::ExperimentConfig;
use bsadc::explorer::{self, Summary};
use bsadc::mlp::ModelFile;
use bsadc::report::{self, ParetoReport, PLOTDATA_FILE};
use bsadc::Error;

#[derive(Parser)]
#[command(name = "bsadc", version, about = "Pruned binary-search ADC and tiny MLP co-exploration")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantize values through a full or pruned binary-search ADC.
    Quantize {
        #[arg(long)]
        bits: u32,
        /// Retained levels as hex, bit c = keep code c.
        #[arg(long)]
        mask: Option<String>,
        #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
        value: Option<f64>,
        /// Quantize this many equally spaced points over [0, 1].
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Transistor-count area of one ADC.
    Area {
        #[arg(long)]
        bits: u32,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        mask: Option<String>,
        /// TOML cost table, keys at top level or under [cost].
        #[arg(long)]
        cost: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Train the full-ADC baseline of a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the baseline model file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the co-exploration and write pareto.csv, summary.json and models/.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize an exploration directory and write plotdata.csv.
    ParetoReport {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        drop: f64,
        /// Defaults to <in>/plotdata.csv.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Check the models against their known anchors.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Flash,
    Binary,
    Pruned,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } => 2,
            Error::NoPointWithinBound { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Flag-level problems exit with the usage code.
fn flag(e: Error) -> Failure {
    Failure::usage(e.to_string())
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Quantize {
            bits,
            mask,
            value,
            sweep,
        } => cmd_quantize(bits, mask.as_deref(), value, sweep),
        Cmd::Area {
            bits,
            kind,
            mask,
            cost,
            json,
        } => cmd_area(bits, kind, mask.as_deref(), cost.as_deref(), json),
        Cmd::Train { config, out, seed } => cmd_train(&config, out.as_deref(), seed),
        Cmd::Explore {
            config,
            out,
            seed,
            workers,
        } => cmd_explore(&config, out, seed, workers),
        Cmd::ParetoReport { input, drop, plot } => cmd_pareto_report(&input, drop, plot),
        Cmd::Selftest => cmd_selftest(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn adc_from_flags(bits: u32, mask: Option<&str>) -> Result<AdcKind, Failure> {
    match mask {
        Some(hex) => {
            let m = LevelMask::from_hex(bits, hex).map_err(flag)?;
            AdcKind::pruned(&m).map_err(flag)
        }
        None => AdcKind::full_binary(bits).map_err(flag),
    }
}

fn cmd_quantize(bits: u32, mask: Option<&str>, value: Option<f64>, sweep: Option<usize>) -> CmdResult {
    let adc = adc_from_flags(bits, mask)?;
    let inputs: Vec<f64> = match (value, sweep) {
        (Some(v), _) => vec![v],
        (None, Some(0)) => return Err(Failure::usage("--sweep needs at least one point")),
        (None, Some(1)) => vec![0.0],
        (None, Some(k)) => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
        (None, None) => return Err(Failure::usage("one of --value or --sweep is required")),
    };
    println!("{:>10} {:>5} {:>10}", "input", "code", "repr");
    for v in inputs {
        let (code, repr) = adc::quantize(&adc, v).map_err(flag)?;
        println!("{v:>10.6} {code:>5} {repr:>10.6}");
    }
    Ok(0)
}

fn load_cost(path: &Path) -> Result<CostTable, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let cfg_err = |p: String, m: String| Error::Config { path: p, message: m };
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err("<document>".into(), e.to_string()))?;
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wrapped {
        cost: CostTable,
    }
    let de = toml::Deserializer::parse(&text).map_err(|e| cfg_err("<document>".into(), e.to_string()))?;
    let cost = if table.contains_key("cost") {
        serde_path_to_error::deserialize::<_, Wrapped>(de).map(|w| w.cost)
    } else {
        serde_path_to_error::deserialize::<_, CostTable>(de)
    }
    .map_err(|e| cfg_err(e.path().to_string(), e.into_inner().to_string()))?;
    cost.validate()?;
    Ok(cost)
}

fn print_area(label: &str, bits: u32, r: &AreaReport) {
    let b = &r.breakdown;
    println!("kind: {label}");
    println!("bits: {bits}");
    println!("transistors: {}", r.transistors);
    println!("resistors: {}", r.resistors);
    println!("comparators: {}", r.comparators);
    println!("inverters: {}", r.inverters);
    println!("  comparator transistors: {}", b.comparator_tr);
    println!("  inverter transistors: {}", b.inverter_tr);
    println!("  selection transistors: {}", b.selection_tr);
    println!("  amplifier transistors: {}", b.amplifier_tr);
    println!("  encoder transistors: {}", b.encoder_tr);
}

fn cmd_area(bits: u32, kind: KindArg, mask: Option<&str>, cost: Option<&Path>, json: bool) -> CmdResult {
    let cost = match cost {
        Some(p) => load_cost(p)?,
        None => CostTable::default(),
    };
    let (label, adc) = match (kind, mask) {
        (KindArg::Pruned, None) => return Err(Failure::usage("--kind pruned requires --mask")),
        (KindArg::Pruned, Some(_)) => ("pruned", adc_from_flags(bits, mask)?),
        (_, Some(_)) => return Err(Failure::usage("--mask is only valid with --kind pruned")),
        (KindArg::Binary, None) => ("binary", AdcKind::full_binary(bits).map_err(flag)?),
        (KindArg::Flash, None) => ("flash", AdcKind::flash(bits).map_err(flag)?),
    };
    let r = area::adc_area(&adc, &cost);
    if json {
        println!("{}", serde_json::to_string_pretty(&r).map_err(Error::from)?);
    } else {
        print_area(label, bits, &r);
    }
    Ok(0)
}

fn load_config(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::usage(e.to_string()),
        other => other.into(),
    })?;
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(config: &Path, out: Option<&Path>, seed: Option<u64>) -> CmdResult {
    let cfg = load_config(config, seed, None)?;
    let ds = cfg.load_dataset()?;
    let splits = explorer::prepare(&cfg, &ds)?;
    let b = explorer::train_baseline(&cfg, &splits)?;
    println!(
        "dataset: {} rows, {} features, {} classes (train {}, test {})",
        ds.len(),
        ds.n_features(),
        ds.n_classes(),
        splits.train.len(),
        splits.test.len()
    );
    println!("topology: {:?}", b.topology.layer_sizes);
    println!("float accuracy: {:.6}", b.float_accuracy);
    println!("baseline accuracy ({}-bit binary ADCs): {:.6}", cfg.adc.bits, b.accuracy);
    println!("baseline train accuracy: {:.6}", b.model.metrics.train_accuracy);
    println!("baseline dpos: {}", b.dpos);
    println!("binary system transistors: {}", b.binary_area.transistors);
    println!("flash system transistors: {}", b.flash_area.transistors);
    if let Some(path) = out {
        let metrics = [
            ("accuracy".to_string(), b.accuracy),
            ("float_accuracy".to_string(), b.float_accuracy),
            ("train_accuracy".to_string(), b.model.metrics.train_accuracy),
        ]
        .into_iter()
        .collect();
        let file = ModelFile::from_model(&b.model.quantized, b.model.seed, metrics);
        let path = if path.extension().is_some_and(|e| e == "json") {
            path.to_path_buf()
        } else {
            std::fs::create_dir_all(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            path.join("baseline.json")
        };
        file.save(&path)?;
        println!("model: {}", path.display());
    }
    Ok(0)
}

fn cmd_explore(config: &Path, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> CmdResult {
    let cfg = load_config(config, seed, workers)?;
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::usage("no output directory: pass --out or set output_dir"))?;
    let run = explorer::explore(&cfg, Some(&out))?;
    let s: &Summary = &run.summary;
    println!("baseline accuracy: {:.6}", s.baseline.accuracy);
    println!("archive points: {}", run.points.len());
    if let Some(p) = &s.operating_point {
        println!(
            "operating point (drop {}): accuracy {:.6} transistors {} of {}",
            s.max_accuracy_drop, p.accuracy, p.transistor_count, s.binary_system.transistors
        );
    }
    if let Some(search) = &s.search {
        if !search.diverged.is_empty() {
            eprintln!("warning: {} individual(s) diverged during training", search.diverged.len());
        }
    }
    println!("output: {}", out.display());
    Ok(0)
}

fn cmd_pareto_report(input: &Path, drop: f64, plot: Option<PathBuf>) -> CmdResult {
    if !(0.0..=1.0).contains(&drop) {
        return Err(Failure::usage(format!("--drop {drop} outside [0, 1]")));
    }
    let r = ParetoReport::from_dir(input, drop)?;
    let plot = plot.unwrap_or_else(|| input.join(PLOTDATA_FILE));
    report::write_plotdata(&plot, &r.plot)?;
    print!("{}", r.render());
    Ok(if r.found() { 0 } else { 3 })
}

fn cmd_selftest() -> CmdResult {
    let cost = CostTable::default();
    let mut failures = 0;
    let mut check = |name: &str, ok: Result<bool, Error>| {
        match ok {
            Ok(true) => println!("PASS {name}"),
            Ok(false) => {
                failures += 1;
                println!("FAIL {name}");
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {name}: {e}");
            }
        }
    };

    check(
        "binary N=3: 45 transistors, 5 comparators, 2 inverters",
        area::binary_full_area(3, &cost).map(|r| (r.transistors, r.comparators, r.inverters) == (45, 5, 2)),
    );
    check(
        "binary N=3: 9 selection and amplifier transistors, 6 last-stage switches",
        area::binary_full_area(3, &cost).map(|r| {
            r.breakdown.selection_tr + r.breakdown.amplifier_tr == 9
                && area::BinaryStructure::full(3).last_stage_switches == 6
        }),
    );
    check(
        "flash N=3: 7 comparators",
        area::flash_area(3, &cost).map(|r| r.comparators == 7),
    );
    check(
        "pruned N=2 keep {2,3}: 1 comparator",
        LevelMask::from_hex(2, "c")
            .and_then(|m| AdcKind::pruned(&m))
            .map(|a| area::adc_area(&a, &cost).comparators == 1),
    );
    check("quantize N=3 0.40 -> 3", AdcKind::full_binary(3).and_then(|a| adc::quantize(&a, 0.40)).map(|(c, _)| c == 3));
    check("quantize N=3 1.0 -> 7", AdcKind::full_binary(3).and_then(|a| adc::quantize(&a, 1.0)).map(|(c, _)| c == 7));
    check(
        "quantize N=2 mask 0x9 0.70 -> 3",
        LevelMask::from_hex(2, "9")
            .and_then(|m| AdcKind::pruned(&m))
            .and_then(|a| adc::quantize(&a, 0.70))
            .map(|(c, _)| c == 3),
    );
    for bits in [2, 3] {
        let exhaustive = (|| -> Result<bool, Error> {
            let tree = ThresholdTree::new(bits)?;
            for mask in LevelMask::enumerate(bits)? {
                let pruned = AdcKind::pruned(&mask)?;
                for i in 0..256 {
                    let v = i as f64 / 255.0;
                    if adc::quantize(&pruned, v)?.0 != adc::oracle_quantize(&tree, &mask, v)? {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })();
        check(&format!("oracle equivalence N={bits}, all masks"), exhaustive);
    }
    Ok(if failures == 0 { 0 } else { 1 })
}
