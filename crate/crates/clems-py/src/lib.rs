//! Python bindings for the cost-sensitive label embedding pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use clems::cost::{CostSpec, Criterion};
use clems::data::{Dataset, Instance, LabelVector};
use clems::embedding::{CandidateSet, CandidateSource, CsEmbedding};
use clems::experiment::{run_experiment, split_dataset, EmbedDim, ExperimentConfig};
use clems::forest::ForestParams;
use clems::mds::MdsOptions;
use clems::model::{Algorithm, ClemsModel, TrainedModel};

fn py_err(e: clems::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_criterion(s: &str) -> PyResult<Criterion> {
    s.parse().map_err(py_err)
}

fn label_vector(bits: Vec<u8>) -> PyResult<LabelVector> {
    LabelVector::new(bits).map_err(py_err)
}

fn label_vectors(rows: Vec<Vec<u8>>) -> PyResult<Vec<LabelVector>> {
    rows.into_iter().map(label_vector).collect()
}

/// A multi-label dataset of feature rows and binary label rows.
#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<Vec<u8>>) -> PyResult<Self> {
        if features.len() != labels.len() {
            return Err(PyValueError::new_err(format!(
                "{} feature rows but {} label rows",
                features.len(),
                labels.len()
            )));
        }
        let instances = features
            .into_iter()
            .zip(labels)
            .map(|(f, l)| Ok(Instance::new(f, label_vector(l)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyDataset {
            inner: Dataset::new(instances).map_err(py_err)?,
        })
    }

    /// Loads a Mulan ARFF file (or several sharing a schema) plus its labels XML.
    #[staticmethod]
    #[pyo3(signature = (arff, xml))]
    fn load_mulan(arff: Vec<String>, xml: String) -> PyResult<Self> {
        Ok(PyDataset {
            inner: clems::io::load_mulan_multi(&arff, xml).map_err(py_err)?,
        })
    }

    /// Loads a numeric CSV whose trailing `num_labels` columns are binary labels.
    #[staticmethod]
    fn load_csv(path: String, num_labels: usize) -> PyResult<Self> {
        Ok(PyDataset {
            inner: clems::io::load_csv(path, num_labels).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_labels(&self) -> usize {
        self.inner.num_labels()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn distinct_labels(&self) -> usize {
        self.inner.distinct_labels()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inner
            .instances()
            .iter()
            .map(|i| i.features.clone())
            .collect()
    }

    fn labels(&self) -> Vec<Vec<u8>> {
        self.inner
            .instances()
            .iter()
            .map(|i| i.label.bits().to_vec())
            .collect()
    }

    /// Seeded 50/25/25 split into (train, validation, test).
    fn split(&self, seed: u64) -> PyResult<(PyDataset, PyDataset, PyDataset)> {
        let (a, b, c) = split_dataset(&self.inner, seed).map_err(py_err)?;
        Ok((
            PyDataset { inner: a },
            PyDataset { inner: b },
            PyDataset { inner: c },
        ))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, num_labels={}, num_features={})",
            self.inner.len(),
            self.inner.num_labels(),
            self.inner.num_features()
        )
    }
}

/// A fitted cost-sensitive embedding over an explicit candidate set.
#[pyclass(name = "Embedding")]
struct PyEmbedding {
    inner: CsEmbedding,
}

#[pymethods]
impl PyEmbedding {
    /// Fits the mirrored embedding for `labels` with frequencies `freqs`.
    #[staticmethod]
    #[pyo3(signature = (labels, freqs, criterion="f1", dim=2, seed=0, tol=1e-6, max_iter=300, restarts=1))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        labels: Vec<Vec<u8>>,
        freqs: Vec<u64>,
        criterion: &str,
        dim: usize,
        seed: u64,
        tol: f64,
        max_iter: usize,
        restarts: usize,
    ) -> PyResult<Self> {
        let candidates =
            CandidateSet::from_parts(label_vectors(labels)?, freqs, CandidateSource::Train)
                .map_err(py_err)?;
        let options = MdsOptions {
            tol,
            max_iter,
            restarts,
        };
        let inner = CsEmbedding::fit(
            candidates,
            CostSpec::new(parse_criterion(criterion)?),
            dim,
            &options,
            seed,
        )
        .map_err(py_err)?;
        Ok(PyEmbedding { inner })
    }

    #[getter]
    fn stress(&self) -> f64 {
        self.inner.stress
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Prediction-role coordinate of a candidate label.
    fn embed(&self, label: Vec<u8>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .embed(&label_vector(label)?)
            .map_err(py_err)?
            .to_vec())
    }

    /// Decodes a query to `(label_bits, candidate_index, distance)`.
    fn decode(&self, query: Vec<f64>) -> PyResult<(Vec<u8>, usize, f64)> {
        let d = self.inner.decode_nearest(&query).map_err(py_err)?;
        Ok((d.label.bits().to_vec(), d.index, d.distance))
    }

    /// Decoding cost bound diagnostics for one query, as a dict.
    fn theorem1_gap<'py>(
        &self,
        py: Python<'py>,
        truth: Vec<u8>,
        query: Vec<f64>,
    ) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let gap = self
            .inner
            .theorem1_gap(&label_vector(truth)?, &query)
            .map_err(py_err)?;
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("lhs", gap.lhs)?;
        dict.set_item("embed_err", gap.embed_err)?;
        dict.set_item("regr_err", gap.regr_err)?;
        dict.set_item("holds", gap.holds)?;
        dict.set_item("decoded_index", gap.decoded_index)?;
        dict.set_item("dist_truth_decoded", gap.dist_truth_decoded)?;
        dict.set_item("dist_truth_query", gap.dist_truth_query)?;
        Ok(dict)
    }

    fn truth_coords(&self) -> Vec<Vec<f64>> {
        self.inner.truth_coords().to_vec()
    }

    fn pred_coords(&self) -> Vec<Vec<f64>> {
        self.inner.pred_coords().to_vec()
    }
}

/// A trained model (CLEMS, PLST, or BR).
#[pyclass(name = "Model")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    /// Trains on the whole dataset at a fixed depth.
    #[staticmethod]
    #[pyo3(signature = (
        data, algorithm="clems", criterion="f1", embed_dim="100%", candidates="train",
        seed=0, trees=100, depth=35, min_leaf=1, feature_fraction=1.0/3.0, bootstrap=true,
        mds_tol=1e-6, mds_max_iter=300, mds_restarts=1,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        data: &PyDataset,
        algorithm: &str,
        criterion: &str,
        embed_dim: &str,
        candidates: &str,
        seed: u64,
        trees: usize,
        depth: usize,
        min_leaf: usize,
        feature_fraction: f64,
        bootstrap: bool,
        mds_tol: f64,
        mds_max_iter: usize,
        mds_restarts: usize,
    ) -> PyResult<Self> {
        let algorithm: Algorithm = algorithm.parse().map_err(py_err)?;
        let criterion = parse_criterion(criterion)?;
        let embed_dim: EmbedDim = embed_dim.parse().map_err(py_err)?;
        let source: CandidateSource = candidates.parse().map_err(py_err)?;
        let dim = embed_dim.resolve(data.inner.num_labels()).map_err(py_err)?;
        let params = ForestParams {
            n_trees: trees,
            max_depth: depth,
            min_leaf,
            feature_fraction,
            bootstrap,
        };
        let mds = MdsOptions {
            tol: mds_tol,
            max_iter: mds_max_iter,
            restarts: mds_restarts,
        };
        let inner = match algorithm {
            Algorithm::Clems => TrainedModel::Clems(
                ClemsModel::fit(
                    &data.inner,
                    CostSpec::new(criterion),
                    dim,
                    source,
                    None,
                    &params,
                    &mds,
                    seed,
                )
                .map_err(py_err)?,
            ),
            Algorithm::Plst => TrainedModel::Plst(
                clems::baseline::fit_plst(&data.inner, dim, &params, seed).map_err(py_err)?,
            ),
            Algorithm::Br => TrainedModel::Br(
                clems::baseline::fit_br(&data.inner, &params, seed).map_err(py_err)?,
            ),
        };
        Ok(PyModel { inner })
    }

    #[getter]
    fn algorithm(&self) -> String {
        self.inner.algorithm().to_string()
    }

    fn predict_one(&self, features: Vec<f64>) -> PyResult<Vec<u8>> {
        Ok(self
            .inner
            .predict(&features)
            .map_err(py_err)?
            .bits()
            .to_vec())
    }

    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<u8>>> {
        features
            .into_iter()
            .map(|f| self.predict_one(f))
            .collect()
    }

    /// Stress of the fitted embedding (CLEMS models only).
    #[getter]
    fn embedding_stress(&self) -> Option<f64> {
        match &self.inner {
            TrainedModel::Clems(m) => Some(m.embedding().stress),
            _ => None,
        }
    }

    fn save(&self, path: String) -> PyResult<()> {
        clems::io::save_model(&self.inner, path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: String) -> PyResult<Self> {
        Ok(PyModel {
            inner: clems::io::load_model(path).map_err(py_err)?,
        })
    }
}

/// Example-based mean of a criterion over aligned truth/prediction lists.
#[pyfunction]
fn evaluate(truth: Vec<Vec<u8>>, preds: Vec<Vec<u8>>, criterion: &str) -> PyResult<f64> {
    clems::experiment::evaluate(
        &label_vectors(truth)?,
        &label_vectors(preds)?,
        parse_criterion(criterion)?,
    )
    .map_err(py_err)
}

/// Nonnegative cost of predicting `pred` when the truth is `truth`.
#[pyfunction]
fn cost(criterion: &str, truth: Vec<u8>, pred: Vec<u8>) -> PyResult<f64> {
    CostSpec::new(parse_criterion(criterion)?)
        .cost(&label_vector(truth)?, &label_vector(pred)?)
        .map_err(py_err)
}

/// Raw criterion value (score for f1/accuracy, loss for hamming/rank_loss).
#[pyfunction]
fn criterion_value(criterion: &str, truth: Vec<u8>, pred: Vec<u8>) -> PyResult<f64> {
    parse_criterion(criterion)?
        .evaluate(&label_vector(truth)?, &label_vector(pred)?)
        .map_err(py_err)
}

/// Runs the full experiment protocol and returns the results document as a
/// JSON string.
#[pyfunction]
#[pyo3(signature = (
    data, name="dataset", algorithm="clems", criterion="f1", embed_dim="100%",
    candidates="train", depth_grid=None, runs=5, seed=0, trees=100, min_leaf=1,
    feature_fraction=1.0/3.0, bootstrap=true, verify_theorem1=false,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment_json(
    data: &PyDataset,
    name: &str,
    algorithm: &str,
    criterion: &str,
    embed_dim: &str,
    candidates: &str,
    depth_grid: Option<Vec<usize>>,
    runs: usize,
    seed: u64,
    trees: usize,
    min_leaf: usize,
    feature_fraction: f64,
    bootstrap: bool,
    verify_theorem1: bool,
) -> PyResult<String> {
    let depth_grid = depth_grid.unwrap_or_else(clems::experiment::default_depth_grid);
    let grid_max = depth_grid.iter().copied().max().unwrap_or(35);
    let config = ExperimentConfig {
        dataset_name: name.to_string(),
        algorithm: algorithm.parse().map_err(py_err)?,
        criterion: parse_criterion(criterion)?,
        embed_dim: embed_dim.parse().map_err(py_err)?,
        candidate_source: candidates.parse().map_err(py_err)?,
        depth_grid,
        forest: ForestParams {
            n_trees: trees,
            max_depth: grid_max,
            min_leaf,
            feature_fraction,
            bootstrap,
        },
        mds: MdsOptions::default(),
        n_runs: runs,
        master_seed: seed,
        verify_theorem1,
    };
    let result = run_experiment(&data.inner, &config).map_err(py_err)?;
    serde_json::to_string_pretty(&result).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn clems_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEmbedding>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_value, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_json, m)?)?;
    Ok(())
}
