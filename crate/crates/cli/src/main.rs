//! `factorbt` command-line front end.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use factorbt::gradcheck::{gradcheck, random_params, DEFAULT_STEP};
use factorbt::io::{
    convert_readability, read_comparisons, read_gold, read_pairs, write_comparisons, write_gold, write_pairs,
    write_sweep, write_sweep_summary, ParamsFile, ReadabilityColumns,
};
use factorbt::metrics::MetricRecord;
use factorbt::simulation::{generate_serp, SerpConfig, SweepMetric, SweepOptions};
use factorbt::{
    accuracy, build_dataset_with_schema, fit, fit_allow_disconnected, generate, robustness_sweep, system_win_prob,
    Dataset, Error, FeatureSchema, FitOptions, Gold, ItemId, ModelKind, SimConfig, SpammerSpec,
};

#[derive(Parser)]
#[command(name = "factorbt", version, about = "Rank aggregation from biased pairwise comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Checks a comparison CSV and prints its dimensions.
    Validate {
        data: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Fits a model and writes its parameters as JSON.
    Fit {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Virtual-node weight; defaults to 1 (0 for bt).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        /// L1 penalty of the linear model; chosen by cross-validation if absent.
        #[arg(long)]
        l1_penalty: Option<f64>,
        /// Write per-component estimates instead of failing on a disconnected graph.
        #[arg(long)]
        allow_disconnected: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores fitted parameters against gold scores and/or system pairs.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Generates synthetic comparisons.
    Simulate {
        /// JSON generator settings; `"generator": "factorbt"` (default) or `"serp"`.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// True parameters as a params JSON file.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// System pairs (serp generator only).
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Runs a spammer-robustness grid.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spammers: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<ModelKind>,
        #[arg(long)]
        metric: MetricArg,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Grid CSV; the per-fraction means go next to it as `<stem>_summary.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares analytic gradients with central finite differences at random parameters.
    Gradcheck {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        /// Exit with an error when the max relative error exceeds this.
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Converts the reading-difficulty crowd CSV to the canonical schema.
    ConvertReadability {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gold_out: Option<PathBuf>,
        #[arg(long, default_value = "_worker_id")]
        worker_column: String,
        #[arg(long, default_value = "passage_a_id")]
        passage_a_column: String,
        #[arg(long, default_value = "passage_b_id")]
        passage_b_column: String,
        #[arg(long, default_value = "answer")]
        answer_column: String,
        #[arg(long, default_value = "passage_a_level")]
        gold_a_column: String,
        #[arg(long, default_value = "passage_b_level")]
        gold_b_column: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    SystemWinProb,
}

struct CliError {
    kind: &'static str,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        kind: "Usage",
        message: message.into(),
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError {
        kind: "Io",
        message: format!("{}: {e}", path.display()),
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError {
        kind: "Io",
        message: format!("{}: {e}", path.display()),
    })
}

fn print_json(value: &impl Serialize) -> CliResult {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_dataset(data: &Path, gold: Option<&Path>) -> CliResult<Dataset> {
    let (rows, dim) = read_comparisons(open(data)?)?;
    let gold = match gold {
        Some(g) => Some(read_gold(open(g)?)?),
        None => None,
    };
    Ok(build_dataset_with_schema(&rows, gold, FeatureSchema::all_antisymmetric(dim))?)
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Validate { data, gold } => {
            let ds = load_dataset(&data, gold.as_deref())?;
            print_json(&json!({
                "N": ds.n_items(),
                "K": ds.n_workers(),
                "M": ds.feature_dim(),
                "comparisons": ds.comparisons().len(),
            }))
        }
        Command::Fit {
            model,
            data,
            gold,
            lambda,
            seed,
            max_iterations,
            tolerance,
            l1_penalty,
            allow_disconnected,
            out,
        } => {
            let ds = load_dataset(&data, gold.as_deref())?;
            let mut options = FitOptions::for_model(model).with_seed(seed);
            if let Some(l) = lambda {
                options.config.regularization_lambda = l;
            }
            if let Some(m) = max_iterations {
                options.config.max_iterations = m;
            }
            if let Some(t) = tolerance {
                options.config.gradient_tolerance = t;
            }
            options.linear.l1_penalty = l1_penalty;
            let outcome = if allow_disconnected {
                fit_allow_disconnected(&ds, model, &options)?
            } else {
                fit(&ds, model, &options)?
            };
            ParamsFile::from_params(&outcome.params, outcome.report.clone()).write(create(&out)?)?;
            print_json(&json!({ "model": model, "report": outcome.report }))
        }
        Command::Eval { params, gold, pairs } => {
            if gold.is_none() && pairs.is_none() {
                return Err(usage("eval needs --gold and/or --pairs"));
            }
            let params = ParamsFile::read(open(&params)?)?.to_params()?;
            let mut records = Vec::new();
            let record = |metric: &str, value: f64| MetricRecord {
                metric: metric.into(),
                value,
                model: params.kind.name().into(),
                trial: None,
                spam_fraction: None,
            };
            if let Some(g) = gold {
                let gold: Gold = read_gold(open(&g)?)?;
                records.push(record("accuracy", accuracy(&params, &gold)?));
            }
            if let Some(p) = pairs {
                let pairs: Vec<(ItemId, ItemId)> = read_pairs(open(&p)?)?;
                records.push(record("system_win_prob", system_win_prob(&params, &pairs)?));
            }
            print_json(&records)
        }
        Command::Simulate {
            config,
            seed,
            out,
            truth,
            gold,
            pairs,
        } => {
            let mut value: Value = serde_json::from_reader(open(&config)?)?;
            let generator = match value.as_object_mut().and_then(|o| o.remove("generator")) {
                None => "factorbt".to_owned(),
                Some(Value::String(s)) => s,
                Some(other) => return Err(usage(format!("generator must be a string, got {other}"))),
            };
            let (dataset, true_params, system_pairs) = match generator.as_str() {
                "factorbt" => {
                    let mut cfg: SimConfig = serde_json::from_value(value)?;
                    cfg.seed = seed.unwrap_or(cfg.seed);
                    let sim = generate(&cfg)?;
                    (sim.dataset, sim.truth, None)
                }
                "serp" => {
                    let mut cfg: SerpConfig = serde_json::from_value(value)?;
                    cfg.seed = seed.unwrap_or(cfg.seed);
                    let sim = generate_serp(&cfg)?;
                    (sim.dataset, sim.truth, Some(sim.pairs))
                }
                other => return Err(usage(format!("unknown generator `{other}`"))),
            };
            write_comparisons(create(&out)?, &dataset.to_rows(), dataset.feature_dim())?;
            ParamsFile::from_params(&true_params, None).write(create(&truth)?)?;
            if let Some(g) = gold {
                write_gold(create(&g)?, dataset.gold().expect("generated data has gold"))?;
            }
            if let Some(p) = pairs {
                let sp = system_pairs.ok_or_else(|| usage("--pairs needs the serp generator"))?;
                write_pairs(create(&p)?, &sp)?;
            }
            print_json(&json!({
                "N": dataset.n_items(),
                "K": dataset.n_workers(),
                "M": dataset.feature_dim(),
                "comparisons": dataset.comparisons().len(),
            }))
        }
        Command::Sweep {
            data,
            spammers,
            models,
            metric,
            gold,
            pairs,
            seed,
            lambda,
            jobs,
            out,
        } => {
            let ds = load_dataset(&data, gold.as_deref())?;
            let spec: SpammerSpec = serde_json::from_reader(open(&spammers)?)?;
            let metric = match metric {
                MetricArg::Accuracy => SweepMetric::Accuracy,
                MetricArg::SystemWinProb => {
                    let p = pairs.ok_or_else(|| usage("system_win_prob needs --pairs"))?;
                    SweepMetric::SystemWinProb(read_pairs(open(&p)?)?)
                }
            };
            let options = SweepOptions { seed, lambda };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| usage(e.to_string()))?;
            let result = pool.install(|| robustness_sweep(&ds, &spec, &models, &metric, &options))?;
            write_sweep(create(&out)?, &result.cells)?;
            write_sweep_summary(create(&summary_path(&out))?, &result.summary)?;
            print_json(&result.summary)
        }
        Command::Gradcheck {
            model,
            data,
            lambda,
            seed,
            step,
            threshold,
        } => {
            let ds = load_dataset(&data, None)?;
            let mut options = FitOptions::for_model(model);
            if let Some(l) = lambda {
                options.config.regularization_lambda = l;
            }
            let params = random_params(&ds, model, seed)?;
            let report = gradcheck(&ds, &params, model, &options.config, step)?;
            print_json(&report)?;
            if report.max_relative_error < threshold {
                Ok(())
            } else {
                Err(CliError {
                    kind: "GradientMismatch",
                    message: format!(
                        "max relative error {} at {} exceeds {threshold}",
                        report.max_relative_error, report.worst_parameter
                    ),
                })
            }
        }
        Command::ConvertReadability {
            input,
            out,
            gold_out,
            worker_column,
            passage_a_column,
            passage_b_column,
            answer_column,
            gold_a_column,
            gold_b_column,
        } => {
            let columns = ReadabilityColumns {
                worker: worker_column,
                passage_a: passage_a_column,
                passage_b: passage_b_column,
                answer: answer_column,
                gold_a: Some(gold_a_column),
                gold_b: Some(gold_b_column),
            };
            let converted = convert_readability(open(&input)?, &columns)?;
            write_comparisons(create(&out)?, &converted.rows, 1)?;
            if let Some(g) = gold_out {
                write_gold(create(&g)?, &converted.gold)?;
            }
            print_json(&json!({
                "comparisons": converted.rows.len(),
                "dropped": converted.dropped,
                "gold_items": converted.gold.len(),
            }))
        }
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "sweep".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_summary.csv"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&usage(e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn report(e: &CliError) {
    let line = json!({ "error": e.kind, "message": e.message });
    eprintln!("{line}");
}
