//! Non-cost-sensitive reference algorithms: principal label space
//! transformation (PLST) and binary relevance (BR).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestModel, ForestParams};

/// PLST: labels are mean-centered, projected onto the top right singular
/// vectors, regressed against, and reconstructed with a 0.5 threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlstModel {
    mean: Vec<f64>,
    /// K x M orthonormal projection columns, flattened row-major.
    projection: Vec<f64>,
    num_labels: usize,
    dim: usize,
    forest: ForestModel,
}

/// Fits PLST with an `m`-dimensional label subspace.
pub fn fit_plst(data: &Dataset, m: usize, params: &ForestParams, seed: u64) -> Result<PlstModel> {
    let k = data.num_labels();
    if m == 0 || m > k {
        return Err(Error::Validation(format!(
            "embedding dimension {m} out of range 1..={k}"
        )));
    }
    let n = data.len();
    let mut mean = vec![0.0; k];
    for inst in data.instances() {
        for (j, &b) in inst.label.bits().iter().enumerate() {
            mean[j] += b as f64;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let centered = DMatrix::from_fn(n, k, |i, j| {
        data.instances()[i].label.bit(j) as f64 - mean[j]
    });

    // Right singular vectors via the K x K Gram matrix, sorted by descending
    // eigenvalue so the top-M subspace is deterministic.
    let gram = centered.transpose() * &centered;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let mut projection = vec![0.0; k * m];
    for (col, &src) in order.iter().take(m).enumerate() {
        for row in 0..k {
            projection[row * m + col] = eig.eigenvectors[(row, src)];
        }
    }

    // Embedded regression targets: row n of `centered` projected column by
    // column, collected per target dimension.
    let targets: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            (0..n)
                .map(|row| {
                    (0..k)
                        .map(|j| centered[(row, j)] * projection[j * m + c])
                        .sum()
                })
                .collect()
        })
        .collect();
    let forest = fit_forest(&data.feature_matrix(), &targets, params, seed)?;
    Ok(PlstModel {
        mean,
        projection,
        num_labels: k,
        dim: m,
        forest,
    })
}

impl PlstModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn forest(&self) -> &ForestModel {
        &self.forest
    }

    fn projection_at(&self, row: usize, col: usize) -> f64 {
        self.projection[row * self.dim + col]
    }

    /// Embeds a label vector: `P^T (y - mean)`.
    pub fn project(&self, label: &LabelVector) -> Result<Vec<f64>> {
        if label.len() != self.num_labels {
            return Err(Error::Dimension(format!(
                "label has {} components, model expects {}",
                label.len(),
                self.num_labels
            )));
        }
        let mut z = vec![0.0; self.dim];
        for (j, &b) in label.bits().iter().enumerate() {
            let centered = b as f64 - self.mean[j];
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += self.projection_at(j, c) * centered;
            }
        }
        Ok(z)
    }

    /// Real-valued label scores reconstructed from an embedded vector:
    /// `mean + P z`.
    pub fn reconstruct_scores(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim {
            return Err(Error::Dimension(format!(
                "embedded vector has dimension {}, model expects {}",
                z.len(),
                self.dim
            )));
        }
        let mut scores = self.mean.clone();
        for (j, s) in scores.iter_mut().enumerate() {
            for (c, &zc) in z.iter().enumerate() {
                *s += self.projection_at(j, c) * zc;
            }
        }
        Ok(scores)
    }

    pub fn predict(&self, features: &[f64]) -> Result<LabelVector> {
        self.predict_capped(features, usize::MAX)
    }

    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> Result<LabelVector> {
        let z = self.forest.predict_capped(features, max_depth)?;
        let scores = self.reconstruct_scores(&z)?;
        Ok(round_scores(&scores))
    }
}

/// Rounds real-valued scores at 0.5, ties to one.
pub fn round_scores(scores: &[f64]) -> LabelVector {
    LabelVector::from_bools(&scores.iter().map(|&s| s >= 0.5).collect::<Vec<bool>>())
}

/// Binary relevance: one independent forest per label, thresholded at 0.5.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrModel {
    forest: ForestModel,
    num_labels: usize,
}

/// Fits one single-target forest per label column.
pub fn fit_br(data: &Dataset, params: &ForestParams, seed: u64) -> Result<BrModel> {
    let k = data.num_labels();
    let targets: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            data.instances()
                .iter()
                .map(|inst| inst.label.bit(j) as f64)
                .collect()
        })
        .collect();
    let forest = fit_forest(&data.feature_matrix(), &targets, params, seed)?;
    Ok(BrModel {
        forest,
        num_labels: k,
    })
}

impl BrModel {
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn forest(&self) -> &ForestModel {
        &self.forest
    }

    pub fn predict(&self, features: &[f64]) -> Result<LabelVector> {
        self.predict_capped(features, usize::MAX)
    }

    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> Result<LabelVector> {
        let scores = self.forest.predict_capped(features, max_depth)?;
        Ok(round_scores(&scores))
    }
}
