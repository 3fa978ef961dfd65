//! Weighted multidimensional scaling by stress majorization (SMACOF).
//!
//! Agnostic of labels and costs: it embeds any symmetric nonnegative
//! dissimilarity matrix under a symmetric nonnegative weight matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Guard used in the relative-improvement convergence test so that a zero
/// stress never divides by zero.
const STRESS_FLOOR: f64 = 1e-12;

/// A weighted MDS instance: `n` objects, dissimilarities `delta`, weights,
/// and a target dimension.
#[derive(Clone, Debug)]
pub struct MdsProblem {
    delta: DMatrix<f64>,
    weights: DMatrix<f64>,
    dim: usize,
}

impl MdsProblem {
    /// Validates and wraps the matrices.
    ///
    /// Both must be square of the same size, symmetric, nonnegative, and
    /// zero on the diagonal; no object may have an all-zero weight row.
    pub fn new(delta: DMatrix<f64>, weights: DMatrix<f64>, dim: usize) -> Result<Self> {
        let n = delta.nrows();
        if delta.ncols() != n {
            return Err(Error::Dimension(format!(
                "dissimilarity matrix is {}x{}, expected square",
                delta.nrows(),
                delta.ncols()
            )));
        }
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::Dimension(format!(
                "weight matrix is {}x{}, expected {n}x{n}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Validation("empty MDS problem".into()));
        }
        if dim == 0 {
            return Err(Error::Validation("target dimension must be at least 1".into()));
        }
        for (name, m) in [("dissimilarity", &delta), ("weight", &weights)] {
            for i in 0..n {
                if m[(i, i)] != 0.0 {
                    return Err(Error::Validation(format!(
                        "{name} matrix has nonzero diagonal entry at {i}"
                    )));
                }
                for j in 0..n {
                    let v = m[(i, j)];
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::Validation(format!(
                            "{name} matrix entry ({i},{j}) = {v} is not finite and nonnegative"
                        )));
                    }
                    if m[(i, j)] != m[(j, i)] {
                        return Err(Error::Validation(format!(
                            "{name} matrix is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        for i in 0..n {
            if (0..n).all(|j| weights[(i, j)] == 0.0) {
                return Err(Error::Validation(format!(
                    "object {i} has an all-zero weight row; its coordinates would be undetermined"
                )));
            }
        }
        Ok(MdsProblem { delta, weights, dim })
    }

    pub fn len(&self) -> usize {
        self.delta.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// How `solve` chooses its starting coordinates.
#[derive(Clone, Debug)]
pub enum MdsInit {
    /// Seeded uniform coordinates in [-1, 1]^dim; restarts derive their own
    /// seeds from this one.
    Seed(u64),
    /// Explicit starting configuration (one row per object).
    Coords(DMatrix<f64>),
}

/// Solver options.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MdsOptions {
    /// Relative stress-decrease threshold that stops the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of seeded starts; the lowest-stress solution wins.
    pub restarts: usize,
}

impl Default for MdsOptions {
    fn default() -> Self {
        MdsOptions {
            tol: 1e-6,
            max_iter: 300,
            restarts: 1,
        }
    }
}

/// The result of a SMACOF run.
#[derive(Clone, Debug)]
pub struct MdsSolution {
    /// n x dim coordinates.
    pub coords: DMatrix<f64>,
    /// Stress after initialization and after every iteration; nonincreasing.
    pub stress_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seed of the winning start when seeded initialization was used.
    pub seed: Option<u64>,
}

impl MdsSolution {
    pub fn final_stress(&self) -> f64 {
        *self.stress_history.last().expect("history is never empty")
    }
}

/// Weighted raw stress: sum over all ordered pairs of
/// `W[i,j] * (delta[i,j] - d(x_i, x_j))^2`.
pub fn stress(coords: &DMatrix<f64>, problem: &MdsProblem) -> Result<f64> {
    let n = problem.len();
    if coords.nrows() != n || coords.ncols() != problem.dim {
        return Err(Error::Dimension(format!(
            "coordinates are {}x{}, expected {n}x{}",
            coords.nrows(),
            coords.ncols(),
            problem.dim
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = problem.weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let d = row_distance(coords, i, j);
            let diff = problem.delta[(i, j)] - d;
            total += w * diff * diff;
        }
    }
    Ok(total)
}

fn row_distance(coords: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut sq = 0.0;
    for c in 0..coords.ncols() {
        let diff = coords[(i, c)] - coords[(j, c)];
        sq += diff * diff;
    }
    sq.sqrt()
}

/// Moore-Penrose pseudoinverse of `V`, where `V[i,j] = -W[i,j]` off the
/// diagonal and `V[i,i] = sum_{j != i} W[i,j]`.
///
/// `V` always annihilates the all-ones vector, so the inverse is computed
/// through the identity `V^+ = (V + J/n)^{-1} - J/n`. A weight graph that is
/// disconnected makes `V` rank-deficient beyond that nullspace and is
/// reported as a decomposition error.
pub fn pinv_v(weights: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = weights.nrows();
    if let Some(components) = weight_graph_components(weights) {
        return Err(Error::Decomposition(format!(
            "weight graph is disconnected ({} components with sizes {:?}); \
             coordinates are only determined within each component",
            components.len(),
            components
        )));
    }
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let w = weights[(i, j)];
                v[(i, j)] = -w;
                row_sum += w;
            }
        }
        v[(i, i)] = row_sum;
    }
    let jn = 1.0 / n as f64;
    let mut a = v;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += jn;
        }
    }
    let mut inv = a
        .try_inverse()
        .ok_or_else(|| Error::Decomposition("V + J/n is numerically singular".into()))?;
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] -= jn;
        }
    }
    Ok(inv)
}

/// Connected components of the graph with an edge wherever `W[i,j] > 0`;
/// `None` when the graph is connected, otherwise the component sizes.
fn weight_graph_components(weights: &DMatrix<f64>) -> Option<Vec<usize>> {
    let n = weights.nrows();
    let mut component = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        component[start] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for j in 0..n {
                if component[j] == usize::MAX && weights[(i, j)] > 0.0 {
                    component[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    if sizes.len() <= 1 {
        None
    } else {
        Some(sizes)
    }
}

/// One Guttman transform: `X' = V^+ B(X) X`, which never increases stress.
pub fn guttman_step(
    coords: &DMatrix<f64>,
    problem: &MdsProblem,
    v_pinv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = problem.len();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = problem.weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let d = row_distance(coords, i, j);
            if d > 0.0 {
                let value = -w * problem.delta[(i, j)] / d;
                b[(i, j)] = value;
                b[(j, i)] = value;
            }
        }
    }
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                row_sum += b[(i, j)];
            }
        }
        b[(i, i)] = -row_sum;
    }
    v_pinv * (b * coords)
}

/// Deterministic seeded starting coordinates, uniform in [-1, 1]^dim.
pub fn initial_coords(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0))
}

/// Runs SMACOF until the relative stress decrease drops below `tol` or
/// `max_iter` iterations have been taken.
pub fn solve(problem: &MdsProblem, init: MdsInit, options: &MdsOptions) -> Result<MdsSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::Validation(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let v_pinv = pinv_v(&problem.weights)?;
    match init {
        MdsInit::Coords(x0) => run_from(problem, x0, None, options, &v_pinv),
        MdsInit::Seed(seed) => {
            let restarts = options.restarts.max(1);
            let mut best: Option<MdsSolution> = None;
            for r in 0..restarts {
                // Restart r always draws the same derived seed, so a
                // multi-restart solve subsumes the single-restart one.
                let run_seed = derive_seed(seed, r as u64);
                let x0 = initial_coords(problem.len(), problem.dim, run_seed);
                let sol = run_from(problem, x0, Some(run_seed), options, &v_pinv)?;
                let better = match &best {
                    None => true,
                    Some(b) => sol.final_stress() < b.final_stress(),
                };
                if better {
                    best = Some(sol);
                }
            }
            Ok(best.expect("at least one restart"))
        }
    }
}

fn run_from(
    problem: &MdsProblem,
    x0: DMatrix<f64>,
    seed: Option<u64>,
    options: &MdsOptions,
    v_pinv: &DMatrix<f64>,
) -> Result<MdsSolution> {
    let mut coords = x0;
    let mut history = vec![stress(&coords, problem)?];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..options.max_iter {
        let next = guttman_step(&coords, problem, v_pinv);
        let s = stress(&next, problem)?;
        let prev = *history.last().expect("nonempty");
        coords = next;
        history.push(s);
        iterations += 1;
        if (prev - s) / prev.max(STRESS_FLOOR) < options.tol {
            converged = true;
            break;
        }
    }
    Ok(MdsSolution {
        coords,
        stress_history: history,
        iterations,
        converged,
        seed,
    })
}
