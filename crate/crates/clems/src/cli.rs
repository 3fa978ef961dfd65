//! Command-line interface: `train`, `predict`, `eval`, `experiment`, and
//! `dump-embedding`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use crate::cost::{CostSpec, Criterion};
use crate::data::{Dataset, LabelVector};
use crate::embedding::CandidateSource;
use crate::error::Error;
use crate::experiment::{
    default_depth_grid, evaluate, run_experiment, write_results_csv, EmbedDim, ExperimentConfig,
};
use crate::forest::ForestParams;
use crate::io::{load_csv, load_model, load_mulan_multi, load_predictions_csv, save_model};
use crate::mds::MdsOptions;
use crate::model::{Algorithm, ClemsModel, TrainedModel};

/// Exit code for usage errors (unknown flags, missing files).
const USAGE_EXIT: i32 = 2;

#[derive(Parser)]
#[command(
    name = "clems",
    version,
    about = "Cost-sensitive label embedding for multi-label classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Mulan ARFF file; repeat the flag to concatenate a train/test split.
    #[arg(long)]
    arff: Vec<PathBuf>,
    /// Mulan labels XML naming the label attributes.
    #[arg(long)]
    xml: Option<PathBuf>,
    /// Numeric CSV whose trailing label columns are binary.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Number of trailing label columns in the CSV.
    #[arg(long)]
    num_labels: Option<usize>,
}

#[derive(Args)]
struct AlgoArgs {
    /// Training algorithm: clems, plst, or br.
    #[arg(long, default_value = "clems")]
    algo: Algorithm,
    /// Target criterion: f1, accuracy, rank_loss, or hamming.
    #[arg(long, default_value = "f1")]
    criterion: Criterion,
    /// Embedding dimension, absolute (`6`) or relative (`100%` of K).
    #[arg(long, default_value = "100%")]
    embed_dim: EmbedDim,
    /// Candidate set source: train, or all (also embeds test labels).
    #[arg(long, default_value = "train")]
    candidates: CandidateSource,
}

#[derive(Args)]
struct ForestArgs {
    /// Trees per regression target.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Fraction of features tried per split.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    feature_fraction: f64,
    /// Disable bootstrap resampling.
    #[arg(long)]
    no_bootstrap: bool,
}

impl ForestArgs {
    fn to_params(&self, max_depth: usize) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            max_depth,
            min_leaf: self.min_leaf,
            feature_fraction: self.feature_fraction,
            bootstrap: !self.no_bootstrap,
        }
    }
}

#[derive(Args)]
struct MdsArgs {
    #[arg(long, default_value_t = 1e-6)]
    mds_tol: f64,
    #[arg(long, default_value_t = 300)]
    mds_max_iter: usize,
    #[arg(long, default_value_t = 1)]
    mds_restarts: usize,
}

impl MdsArgs {
    fn to_options(&self) -> MdsOptions {
        MdsOptions {
            tol: self.mds_tol,
            max_iter: self.mds_max_iter,
            restarts: self.mds_restarts,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a whole dataset and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        mds: MdsArgs,
        /// Maximum tree depth.
        #[arg(long, default_value_t = 35)]
        depth: usize,
        #[arg(long)]
        seed: u64,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for a dataset with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Output predictions CSV (one row of K bits per instance).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Eval {
        /// Predictions CSV produced by `predict`.
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Output metrics JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full split/select/evaluate protocol over several runs.
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        /// Dataset name recorded in the results.
        #[arg(long, default_value = "dataset")]
        name: String,
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        mds: MdsArgs,
        /// Comma-separated tree-depth grid searched on validation.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        depth_grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Master seed; every number in the output derives from it.
        #[arg(long)]
        seed: u64,
        /// Check the decoding cost bound on every candidate test instance.
        #[arg(long)]
        verify_theorem1: bool,
        /// Results JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional flat CSV (one row per run) for plotting.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Export a fitted embedding's coordinates as CSV.
    DumpEmbedding {
        #[arg(long)]
        model: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A CLI failure: exit code plus message.
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: USAGE_EXIT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::from(Error::from(e))
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.code == USAGE_EXIT {
                let _ = Cli::command().print_help();
            }
            e.code
        }
    }
}

fn require_file(flag: &str, path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "file given to --{flag} does not exist: {}",
            path.display()
        )));
    }
    Ok(())
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        match (&self.csv, self.arff.is_empty()) {
            (Some(csv), true) => {
                let k = self.num_labels.ok_or_else(|| {
                    CliError::usage("--csv requires --num-labels for the trailing label columns")
                })?;
                require_file("csv", csv)?;
                Ok(load_csv(csv, k)?)
            }
            (Some(_), false) => Err(CliError::usage("pass either --arff or --csv, not both")),
            (None, false) => {
                let xml = self
                    .xml
                    .as_ref()
                    .ok_or_else(|| CliError::usage("--arff requires --xml naming the labels"))?;
                for p in &self.arff {
                    require_file("arff", p)?;
                }
                require_file("xml", xml)?;
                Ok(load_mulan_multi(&self.arff, xml)?)
            }
            (None, true) => Err(CliError::usage(
                "no input data: pass --arff ... --xml ... or --csv ... --num-labels N",
            )),
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            data,
            algo,
            forest,
            mds,
            depth,
            seed,
            out,
        } => {
            let dataset = data.load()?;
            let params = forest.to_params(depth);
            let dim = algo.embed_dim.resolve(dataset.num_labels())?;
            let model = match algo.algo {
                Algorithm::Clems => TrainedModel::Clems(ClemsModel::fit(
                    &dataset,
                    CostSpec::new(algo.criterion),
                    dim,
                    algo.candidates,
                    None,
                    &params,
                    &mds.to_options(),
                    seed,
                )?),
                Algorithm::Plst => {
                    TrainedModel::Plst(crate::baseline::fit_plst(&dataset, dim, &params, seed)?)
                }
                Algorithm::Br => TrainedModel::Br(crate::baseline::fit_br(&dataset, &params, seed)?),
            };
            save_model(&model, &out)?;
            eprintln!(
                "trained {} model on {} instances (K={}, d={}); saved to {}",
                model.algorithm(),
                dataset.len(),
                dataset.num_labels(),
                dataset.num_features(),
                out.display()
            );
            Ok(())
        }
        Command::Predict { model, data, out } => {
            require_file("model", &model)?;
            let model = load_model(&model)?;
            let dataset = data.load()?;
            let mut writer = fs::File::create(&out).map(std::io::BufWriter::new)?;
            write_predictions_csv(&mut writer, &model, &dataset)?;
            writer.flush().map_err(Error::from)?;
            Ok(())
        }
        Command::Eval { pred, data, out } => {
            require_file("pred", &pred)?;
            let dataset = data.load()?;
            let preds = load_predictions_csv(&pred, dataset.num_labels())?;
            let truth: Vec<LabelVector> = dataset.labels().cloned().collect();
            let report = MetricsReport::compute(&truth, &preds)?;
            write_json(out.as_deref(), &report)?;
            Ok(())
        }
        Command::Experiment {
            data,
            name,
            algo,
            forest,
            mds,
            depth_grid,
            runs,
            seed,
            verify_theorem1,
            out,
            csv_out,
        } => {
            let dataset = data.load()?;
            let depth_grid = depth_grid.unwrap_or_else(default_depth_grid);
            let grid_max = depth_grid.iter().copied().max().unwrap_or(35);
            let config = ExperimentConfig {
                dataset_name: name,
                algorithm: algo.algo,
                criterion: algo.criterion,
                embed_dim: algo.embed_dim,
                candidate_source: algo.candidates,
                depth_grid,
                forest: forest.to_params(grid_max),
                mds: mds.to_options(),
                n_runs: runs,
                master_seed: seed,
                verify_theorem1,
            };
            let result = run_experiment(&dataset, &config)?;
            if let Some(csv_path) = csv_out {
                let mut writer = fs::File::create(&csv_path).map(std::io::BufWriter::new)?;
                write_results_csv(&result, &mut writer).map_err(Error::from)?;
                writer.flush().map_err(Error::from)?;
            }
            write_json(out.as_deref(), &result)?;
            Ok(())
        }
        Command::DumpEmbedding { model, out } => {
            require_file("model", &model)?;
            let model = load_model(&model)?;
            let TrainedModel::Clems(clems) = &model else {
                return Err(CliError::from(Error::Validation(format!(
                    "model was trained with `{}`, which has no embedding to dump",
                    model.algorithm()
                ))));
            };
            match out {
                Some(path) => {
                    let mut writer = fs::File::create(&path).map(std::io::BufWriter::new)?;
                    clems.embedding().export_csv(&mut writer).map_err(Error::from)?;
                    writer.flush().map_err(Error::from)?;
                }
                None => {
                    let stdout = std::io::stdout();
                    clems
                        .embedding()
                        .export_csv(stdout.lock())
                        .map_err(Error::from)?;
                }
            }
            Ok(())
        }
    }
}

/// Metrics JSON document written by `eval`.
#[derive(Serialize)]
struct MetricsReport {
    version: u64,
    n: usize,
    metrics: std::collections::BTreeMap<Criterion, f64>,
}

impl MetricsReport {
    fn compute(truth: &[LabelVector], preds: &[LabelVector]) -> Result<Self, Error> {
        let mut metrics = std::collections::BTreeMap::new();
        for criterion in Criterion::ALL {
            metrics.insert(criterion, evaluate(truth, preds, criterion)?);
        }
        Ok(MetricsReport {
            version: 1,
            n: truth.len(),
            metrics,
        })
    }
}

fn write_predictions_csv<W: Write>(
    out: &mut W,
    model: &TrainedModel,
    dataset: &Dataset,
) -> Result<(), Error> {
    let k = model.num_labels();
    let header: Vec<String> = (0..k).map(|i| format!("label_{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for inst in dataset.instances() {
        let pred = model.predict(&inst.features)?;
        let row: Vec<String> = pred.bits().iter().map(|b| b.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::from(Error::Corrupt(e.to_string())))?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| CliError::from(Error::from(e)))?,
        None => println!("{text}"),
    }
    Ok(())
}
