//! Experiment pipeline: seeded splits, validation-based depth selection,
//! evaluation, and multi-run aggregation with confidence intervals.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_br, fit_plst};
use crate::cost::{CostSpec, Criterion};
use crate::data::{Dataset, LabelVector};
use crate::embedding::CandidateSource;
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::mds::MdsOptions;
use crate::model::{Algorithm, ClemsModel, TrainedModel};
use crate::seeding::derive_seed;

/// Seed streams inside one run.
const SPLIT_STREAM: u64 = 100;
const FIT_STREAM: u64 = 101;

/// Result-schema version written into experiment JSON documents.
pub const RESULTS_FORMAT_VERSION: u64 = 1;

/// Embedding dimension given absolutely or as a percentage of K.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedDim {
    Absolute(usize),
    PercentOfLabels(f64),
}

impl EmbedDim {
    /// Resolves against the label count; percentages round up and are at
    /// least 1.
    pub fn resolve(&self, num_labels: usize) -> Result<usize> {
        match *self {
            EmbedDim::Absolute(m) => {
                if m == 0 {
                    Err(Error::Validation("embedding dimension must be at least 1".into()))
                } else {
                    Ok(m)
                }
            }
            EmbedDim::PercentOfLabels(p) => {
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::Validation(format!(
                        "embedding percentage must be positive, got {p}"
                    )));
                }
                Ok(((p / 100.0 * num_labels as f64).ceil() as usize).max(1))
            }
        }
    }
}

impl FromStr for EmbedDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(pct) = s.strip_suffix('%') {
            let p: f64 = pct.trim().parse().map_err(|_| {
                Error::Validation(format!("cannot parse `{s}` as a percentage"))
            })?;
            Ok(EmbedDim::PercentOfLabels(p))
        } else {
            let m: usize = s
                .parse()
                .map_err(|_| Error::Validation(format!("cannot parse `{s}` as a dimension")))?;
            Ok(EmbedDim::Absolute(m))
        }
    }
}

impl std::fmt::Display for EmbedDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbedDim::Absolute(m) => write!(f, "{m}"),
            EmbedDim::PercentOfLabels(p) => write!(f, "{p}%"),
        }
    }
}

/// Everything one experiment needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub algorithm: Algorithm,
    /// Criterion the embedding and depth selection target.
    pub criterion: Criterion,
    pub embed_dim: EmbedDim,
    pub candidate_source: CandidateSource,
    pub depth_grid: Vec<usize>,
    pub forest: ForestParams,
    pub mds: MdsOptions,
    pub n_runs: usize,
    pub master_seed: u64,
    /// When set, every CLEMS test prediction whose ground truth is a
    /// candidate is checked against the decoding cost bound.
    pub verify_theorem1: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Validation("n_runs must be at least 1".into()));
        }
        if self.depth_grid.is_empty() {
            return Err(Error::Validation("depth grid must not be empty".into()));
        }
        Ok(())
    }

    fn grid_max(&self) -> usize {
        *self.depth_grid.iter().max().expect("grid validated nonempty")
    }
}

/// The paper's depth grid.
pub fn default_depth_grid() -> Vec<usize> {
    (1..=7).map(|i| 5 * i).collect()
}

/// One run's test metrics and bookkeeping.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub selected_depth: usize,
    /// Test mean of every criterion, from the target-criterion model.
    pub metrics: BTreeMap<Criterion, f64>,
    pub wall_time_ms: u64,
    pub theorem1_queries: usize,
    pub theorem1_violations: usize,
}

/// Mean, sample standard deviation, and normal-approximation 95% interval
/// half-width over runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub ci95_half_width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: u64,
    pub config: ExperimentConfig,
    pub resolved_dim: usize,
    pub aggregates: BTreeMap<Criterion, MetricSummary>,
    pub runs: Vec<RunResult>,
}

/// Splits into train/validation/test of sizes ceil(N/2), ceil(N/4), and the
/// remainder, after a seeded shuffle.
pub fn split_dataset(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.len();
    if n < 4 {
        return Err(Error::Validation(format!(
            "dataset with {n} instances is too small to split (need at least 4)"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = n.div_ceil(2);
    let n_val = n.div_ceil(4);
    let train = data.subset(&indices[..n_train])?;
    let validation = data.subset(&indices[n_train..n_train + n_val])?;
    let test = data.subset(&indices[n_train + n_val..])?;
    Ok((train, validation, test))
}

/// Example-based mean of a criterion over aligned truth/prediction lists.
pub fn evaluate(truth: &[LabelVector], preds: &[LabelVector], criterion: Criterion) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty prediction list".into()));
    }
    if truth.len() != preds.len() {
        return Err(Error::Dimension(format!(
            "{} truth labels but {} predictions",
            truth.len(),
            preds.len()
        )));
    }
    let mut total = 0.0;
    for (t, p) in truth.iter().zip(preds) {
        total += criterion.evaluate(t, p)?;
    }
    Ok(total / truth.len() as f64)
}

/// Fits the configured algorithm on `train` with the forest grown to the
/// grid's maximum depth; shallower grid values are evaluated by capping
/// prediction depth, which yields the same model as refitting (the forest's
/// per-node randomness is independent of the depth limit).
pub fn fit_configured(
    train: &Dataset,
    extra: Option<&Dataset>,
    config: &ExperimentConfig,
    resolved_dim: usize,
    max_depth: usize,
    seed: u64,
) -> Result<TrainedModel> {
    let forest = ForestParams {
        max_depth,
        ..config.forest.clone()
    };
    Ok(match config.algorithm {
        Algorithm::Clems => TrainedModel::Clems(ClemsModel::fit(
            train,
            CostSpec::new(config.criterion),
            resolved_dim,
            config.candidate_source,
            extra,
            &forest,
            &config.mds,
            seed,
        )?),
        Algorithm::Plst => TrainedModel::Plst(fit_plst(train, resolved_dim, &forest, seed)?),
        Algorithm::Br => TrainedModel::Br(fit_br(train, &forest, seed)?),
    })
}

fn predictions_at_depth(
    model: &TrainedModel,
    data: &Dataset,
    depth: usize,
) -> Result<Vec<LabelVector>> {
    data.instances()
        .iter()
        .map(|inst| model.predict_capped(&inst.features, depth))
        .collect()
}

fn validation_score(
    model: &TrainedModel,
    validation: &Dataset,
    depth: usize,
    criterion: Criterion,
) -> Result<f64> {
    let preds = predictions_at_depth(model, validation, depth)?;
    let truth: Vec<LabelVector> = validation.labels().cloned().collect();
    evaluate(&truth, &preds, criterion)
}

/// Chooses the grid depth with the best validation value under the target
/// criterion; ties go to the smaller depth.
fn choose_depth(
    model: &TrainedModel,
    validation: &Dataset,
    depth_grid: &[usize],
    criterion: Criterion,
) -> Result<usize> {
    let mut sorted = depth_grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best_depth = sorted[0];
    let mut best_value = f64::NAN;
    for &depth in &sorted {
        let value = validation_score(model, validation, depth, criterion)?;
        let better = if best_value.is_nan() {
            true
        } else if criterion.is_loss() {
            value < best_value
        } else {
            value > best_value
        };
        if better {
            best_value = value;
            best_depth = depth;
        }
    }
    Ok(best_depth)
}

/// Trains per grid depth on `train`, evaluates on `validation` under the
/// config's criterion, and returns the winning depth (ties to the smaller).
pub fn select_depth(
    train: &Dataset,
    validation: &Dataset,
    config: &ExperimentConfig,
) -> Result<usize> {
    config.validate()?;
    let resolved_dim = config.embed_dim.resolve(train.num_labels())?;
    let model = fit_configured(
        train,
        None,
        config,
        resolved_dim,
        config.grid_max(),
        config.master_seed,
    )?;
    choose_depth(&model, validation, &config.depth_grid, config.criterion)
}

/// Runs the full protocol: per run, split with a derived seed, fit, select
/// the depth on validation, and evaluate every criterion on test; then
/// aggregate means and 95% confidence intervals across runs.
pub fn run_experiment(data: &Dataset, config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let resolved_dim = config.embed_dim.resolve(data.num_labels())?;
    let mut runs = Vec::with_capacity(config.n_runs);
    for run in 0..config.n_runs {
        let run_seed = derive_seed(config.master_seed, run as u64);
        runs.push(execute_run(data, config, resolved_dim, run, run_seed)?);
    }
    let mut aggregates = BTreeMap::new();
    for criterion in Criterion::ALL {
        let values: Vec<f64> = runs.iter().map(|r| r.metrics[&criterion]).collect();
        aggregates.insert(criterion, summarize(&values));
    }
    Ok(ExperimentResult {
        version: RESULTS_FORMAT_VERSION,
        config: config.clone(),
        resolved_dim,
        aggregates,
        runs,
    })
}

fn execute_run(
    data: &Dataset,
    config: &ExperimentConfig,
    resolved_dim: usize,
    run: usize,
    run_seed: u64,
) -> Result<RunResult> {
    let started = Instant::now();
    let (train, validation, test) = split_dataset(data, derive_seed(run_seed, SPLIT_STREAM))?;
    if test.is_empty() || validation.is_empty() {
        return Err(Error::Validation(
            "dataset is too small: a split part came out empty".into(),
        ));
    }
    let extra = match config.candidate_source {
        CandidateSource::All => Some(&test),
        CandidateSource::Train => None,
    };
    let model = fit_configured(
        &train,
        extra,
        config,
        resolved_dim,
        config.grid_max(),
        derive_seed(run_seed, FIT_STREAM),
    )?;
    let selected_depth = choose_depth(&model, &validation, &config.depth_grid, config.criterion)?;

    let preds = predictions_at_depth(&model, &test, selected_depth)?;
    let truth: Vec<LabelVector> = test.labels().cloned().collect();
    let mut metrics = BTreeMap::new();
    for criterion in Criterion::ALL {
        metrics.insert(criterion, evaluate(&truth, &preds, criterion)?);
    }

    let mut theorem1_queries = 0;
    let mut theorem1_violations = 0;
    if config.verify_theorem1 {
        if let TrainedModel::Clems(clems) = &model {
            for inst in test.instances() {
                if clems.embedding().candidates().position(&inst.label).is_none() {
                    continue;
                }
                let (_, z_hat, _) = clems.predict_detailed(&inst.features, selected_depth)?;
                let gap = clems.embedding().theorem1_gap(&inst.label, &z_hat)?;
                theorem1_queries += 1;
                if !gap.holds {
                    theorem1_violations += 1;
                }
            }
        }
    }

    Ok(RunResult {
        run,
        seed: run_seed,
        selected_depth,
        metrics,
        wall_time_ms: started.elapsed().as_millis() as u64,
        theorem1_queries,
        theorem1_violations,
    })
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MetricSummary {
        mean,
        std,
        ci95_half_width: 1.96 * std / (n as f64).sqrt(),
    }
}

/// Flat CSV rows for plotting: one row per run carrying the target
/// criterion's test value.
pub fn write_results_csv<W: std::io::Write>(
    result: &ExperimentResult,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "dataset,algo,criterion,m,run,value,depth,seed,wall_time_ms")?;
    for run in &result.runs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            result.config.dataset_name,
            result.config.algorithm,
            result.config.criterion,
            result.resolved_dim,
            run.run,
            run.metrics[&result.config.criterion],
            run.selected_depth,
            run.seed,
            run.wall_time_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Instance;
    use crate::testutil::synthetic_dataset;

    fn base_config(algorithm: Algorithm, criterion: Criterion) -> ExperimentConfig {
        ExperimentConfig {
            dataset_name: "synthetic".into(),
            algorithm,
            criterion,
            embed_dim: EmbedDim::PercentOfLabels(100.0),
            candidate_source: CandidateSource::Train,
            depth_grid: vec![2, 5],
            forest: ForestParams {
                n_trees: 8,
                feature_fraction: 1.0,
                ..ForestParams::default()
            },
            mds: MdsOptions::default(),
            n_runs: 2,
            master_seed: 17,
            verify_theorem1: false,
        }
    }

    #[test]
    fn embed_dim_resolution() {
        assert_eq!(EmbedDim::Absolute(3).resolve(6).unwrap(), 3);
        assert_eq!(EmbedDim::PercentOfLabels(100.0).resolve(6).unwrap(), 6);
        assert_eq!(EmbedDim::PercentOfLabels(50.0).resolve(7).unwrap(), 4);
        assert_eq!(EmbedDim::PercentOfLabels(1.0).resolve(6).unwrap(), 1);
        assert!(EmbedDim::Absolute(0).resolve(6).is_err());
        assert_eq!("100%".parse::<EmbedDim>().unwrap(), EmbedDim::PercentOfLabels(100.0));
        assert_eq!("12".parse::<EmbedDim>().unwrap(), EmbedDim::Absolute(12));
        assert!("x%".parse::<EmbedDim>().is_err());
    }

    #[test]
    fn split_sizes_follow_the_rule() {
        for (n, expected) in [(8, (4, 2, 2)), (4, (2, 1, 1)), (9, (5, 3, 1)), (101, (51, 26, 24))] {
            let data = Dataset::new(
                (0..n)
                    .map(|i| Instance::new(vec![i as f64], LabelVector::zeros(2)))
                    .collect(),
            )
            .unwrap();
            let (train, val, test) = split_dataset(&data, 1).unwrap();
            assert_eq!((train.len(), val.len(), test.len()), expected, "n = {n}");
        }
        let tiny = Dataset::new(vec![Instance::new(vec![0.0], LabelVector::zeros(1)); 3]).unwrap();
        assert!(split_dataset(&tiny, 0).is_err());
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let data = synthetic_dataset(21, 2, 3);
        let (a_train, a_val, a_test) = split_dataset(&data, 9).unwrap();
        let (b_train, ..) = split_dataset(&data, 9).unwrap();
        assert_eq!(
            a_train.instances()[0].features,
            b_train.instances()[0].features
        );
        let (c_train, ..) = split_dataset(&data, 10).unwrap();
        assert_ne!(
            a_train
                .instances()
                .iter()
                .map(|i| i.features[0].to_bits())
                .collect::<Vec<_>>(),
            c_train
                .instances()
                .iter()
                .map(|i| i.features[0].to_bits())
                .collect::<Vec<_>>()
        );

        // Union of the parts is the original multiset of instances.
        let mut all: Vec<u64> = a_train
            .instances()
            .iter()
            .chain(a_val.instances())
            .chain(a_test.instances())
            .map(|i| i.features[0].to_bits())
            .collect();
        all.sort_unstable();
        let mut original: Vec<u64> = data
            .instances()
            .iter()
            .map(|i| i.features[0].to_bits())
            .collect();
        original.sort_unstable();
        assert_eq!(all, original);
    }

    #[test]
    fn evaluate_identity_is_optimal_and_errors_are_reported() {
        let labels: Vec<LabelVector> = (0..6)
            .map(|i| LabelVector::new(vec![(i % 2) as u8, 1]).unwrap())
            .collect();
        assert_eq!(evaluate(&labels, &labels, Criterion::F1).unwrap(), 1.0);
        assert_eq!(evaluate(&labels, &labels, Criterion::RankLoss).unwrap(), 0.0);
        assert_eq!(evaluate(&labels, &labels, Criterion::Hamming).unwrap(), 0.0);
        assert!(evaluate(&[], &[], Criterion::F1).is_err());
        assert!(evaluate(&labels, &labels[..3], Criterion::F1).is_err());
    }

    #[test]
    fn evaluate_half_perfect_half_complement_hamming() {
        let truth: Vec<LabelVector> = (0..4)
            .map(|_| LabelVector::new(vec![1, 0]).unwrap())
            .collect();
        let preds = vec![
            LabelVector::new(vec![1, 0]).unwrap(),
            LabelVector::new(vec![1, 0]).unwrap(),
            LabelVector::new(vec![0, 1]).unwrap(),
            LabelVector::new(vec![0, 1]).unwrap(),
        ];
        assert_eq!(evaluate(&truth, &preds, Criterion::Hamming).unwrap(), 0.5);
    }

    #[test]
    fn select_depth_singleton_and_tie_rules() {
        let data = synthetic_dataset(60, 2, 5);
        let (train, val, _) = split_dataset(&data, 3).unwrap();
        let mut config = base_config(Algorithm::Br, Criterion::F1);
        config.depth_grid = vec![4];
        assert_eq!(select_depth(&train, &val, &config).unwrap(), 4);

        // A duplicated depth value scores identically: smaller (identical)
        // depth wins, and ordering in the grid does not matter.
        config.depth_grid = vec![4, 4];
        assert_eq!(select_depth(&train, &val, &config).unwrap(), 4);
    }

    #[test]
    fn select_depth_prefers_the_depth_that_fits() {
        // One feature, labels follow a 4-interval pattern: depth 1 underfits,
        // depth 4 separates perfectly.
        let data = Dataset::new(
            (0..64)
                .map(|i| {
                    let x = i as f64 / 64.0;
                    let bit = ((i / 4) % 2) as u8;
                    Instance::new(vec![x], LabelVector::new(vec![bit, 1 - bit]).unwrap())
                })
                .collect(),
        )
        .unwrap();
        let (train, val, _) = split_dataset(&data, 2).unwrap();
        let mut config = base_config(Algorithm::Br, Criterion::Hamming);
        config.depth_grid = vec![1, 8];
        config.forest.n_trees = 12;
        config.forest.bootstrap = false;
        assert_eq!(select_depth(&train, &val, &config).unwrap(), 8);
    }

    #[test]
    fn capped_selection_equals_naive_refit_per_depth() {
        let data = synthetic_dataset(70, 3, 8);
        let (train, val, _) = split_dataset(&data, 4).unwrap();
        for algorithm in [Algorithm::Clems, Algorithm::Plst, Algorithm::Br] {
            let mut config = base_config(algorithm, Criterion::F1);
            config.depth_grid = vec![1, 3, 6];
            config.forest.feature_fraction = 0.5;
            let deep = fit_configured(&train, None, &config, 3, 6, 123).unwrap();
            for &depth in &config.depth_grid {
                let refit = fit_configured(&train, None, &config, 3, depth, 123).unwrap();
                for inst in val.instances() {
                    assert_eq!(
                        deep.predict_capped(&inst.features, depth).unwrap(),
                        refit.predict(&inst.features).unwrap(),
                        "{algorithm:?} depth {depth}"
                    );
                }
            }
        }
    }

    #[test]
    fn run_experiment_is_deterministic_and_sane() {
        let data = synthetic_dataset(80, 3, 11);
        let mut config = base_config(Algorithm::Clems, Criterion::F1);
        config.verify_theorem1 = true;
        let a = run_experiment(&data, &config).unwrap();
        let b = run_experiment(&data, &config).unwrap();
        assert_eq!(a.resolved_dim, 3);
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.metrics, rb.metrics);
            assert_eq!(ra.selected_depth, rb.selected_depth);
            assert_eq!(ra.seed, rb.seed);
        }
        for (c, s) in &a.aggregates {
            assert!(s.mean.is_finite(), "{c}: {s:?}");
            assert!(s.ci95_half_width >= 0.0);
        }
        let f1 = a.aggregates[&Criterion::F1].mean;
        assert!((0.0..=1.0).contains(&f1));
        // The synthetic fixture is learnable.
        assert!(f1 > 0.7, "f1 = {f1}");
        for run in &a.runs {
            assert!(run.theorem1_queries > 0);
            assert_eq!(run.theorem1_violations, 0);
        }
    }

    #[test]
    fn single_run_has_zero_ci() {
        let data = synthetic_dataset(40, 2, 13);
        let mut config = base_config(Algorithm::Br, Criterion::Accuracy);
        config.n_runs = 1;
        let result = run_experiment(&data, &config).unwrap();
        for s in result.aggregates.values() {
            assert_eq!(s.ci95_half_width, 0.0);
            assert_eq!(s.std, 0.0);
        }
    }

    #[test]
    fn results_csv_has_one_row_per_run() {
        let data = synthetic_dataset(40, 2, 14);
        let config = base_config(Algorithm::Plst, Criterion::F1);
        let result = run_experiment(&data, &config).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + config.n_runs);
        assert!(text.starts_with("dataset,algo,criterion,m,run,value,depth,seed,wall_time_ms"));
        assert!(text.lines().nth(1).unwrap().starts_with("synthetic,plst,f1,2,0,"));
    }

    #[test]
    fn candidate_source_all_unions_test_labels() {
        // Make one label pattern appear only in the last instances so that,
        // for some split, it is missing from train but present in test.
        let mut instances: Vec<Instance> = (0..36)
            .map(|i| {
                let bit = (i % 2) as u8;
                Instance::new(
                    vec![bit as f64, i as f64 / 36.0],
                    LabelVector::new(vec![bit, 1 - bit]).unwrap(),
                )
            })
            .collect();
        instances.push(Instance::new(vec![5.0, 5.0], LabelVector::new(vec![1, 1]).unwrap()));
        let data = Dataset::new(instances).unwrap();
        let mut config = base_config(Algorithm::Clems, Criterion::F1);
        config.candidate_source = CandidateSource::All;
        config.n_runs = 3;
        let result = run_experiment(&data, &config).unwrap();
        assert_eq!(result.runs.len(), 3);
    }
}
