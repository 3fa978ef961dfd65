//! Core data types: binary label vectors, instances, and datasets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A K-dimensional binary label vector.
///
/// Hashable and ordered so distinct vectors can be counted and used as map
/// keys when building candidate sets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    /// Builds a label vector, checking every element is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Validation(format!(
                "label component {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(LabelVector(bits))
    }

    /// All-zero vector of length `k`.
    pub fn zeros(k: usize) -> Self {
        LabelVector(vec![0; k])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        LabelVector(bits.iter().map(|&b| b as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }

    pub(crate) fn check_same_len(&self, other: &LabelVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "label vectors have lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// One instance: a real feature vector paired with its label vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: LabelVector,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: LabelVector) -> Self {
        Instance { features, label }
    }
}

/// A multi-label dataset: N instances sharing K labels and d features.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    instances: Vec<Instance>,
    num_labels: usize,
    num_features: usize,
}

impl Dataset {
    /// Builds a dataset from instances, inferring K and d from the first one.
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::Validation("dataset must contain at least one instance".into()))?;
        let num_labels = first.label.len();
        let num_features = first.features.len();
        Self::with_dims(instances, num_labels, num_features)
    }

    /// Builds a dataset with explicit dimensions; permits zero instances
    /// (splits of tiny datasets can have an empty part).
    pub fn with_dims(
        instances: Vec<Instance>,
        num_labels: usize,
        num_features: usize,
    ) -> Result<Self> {
        for (i, inst) in instances.iter().enumerate() {
            if inst.label.len() != num_labels {
                return Err(Error::Dimension(format!(
                    "instance {i} has {} labels, expected {num_labels}",
                    inst.label.len()
                )));
            }
            if inst.features.len() != num_features {
                return Err(Error::Dimension(format!(
                    "instance {i} has {} features, expected {num_features}",
                    inst.features.len()
                )));
            }
            if let Some(pos) = inst.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "instance {i}, feature {pos} is not finite"
                )));
            }
        }
        Ok(Dataset {
            instances,
            num_labels,
            num_features,
        })
    }

    /// Number of instances N.
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of labels K.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Number of features d.
    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelVector> {
        self.instances.iter().map(|i| &i.label)
    }

    /// New dataset holding the instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let instances = indices
            .iter()
            .map(|&i| {
                self.instances
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("subset index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::with_dims(instances, self.num_labels, self.num_features)
    }

    /// Dense row-major copy of the feature block.
    pub fn feature_matrix(&self) -> FeatureMatrix {
        let mut values = Vec::with_capacity(self.len() * self.num_features);
        for inst in &self.instances {
            values.extend_from_slice(&inst.features);
        }
        FeatureMatrix {
            values,
            rows: self.len(),
            cols: self.num_features,
        }
    }

    /// Number of distinct label vectors in the dataset.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        for inst in &self.instances {
            seen.insert(&inst.label);
        }
        seen.len()
    }
}

/// Dense row-major feature matrix.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let nrows = rows.len();
        let mut values = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {ncols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            values,
            rows: nrows,
            cols: ncols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_vector_rejects_non_binary() {
        assert!(LabelVector::new(vec![0, 1, 2]).is_err());
        assert!(LabelVector::new(vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn label_vector_counts_and_compares() {
        let a = LabelVector::new(vec![1, 0, 1]).unwrap();
        let b = LabelVector::new(vec![1, 0, 1]).unwrap();
        let c = LabelVector::new(vec![0, 0, 1]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.count_ones(), 2);
    }

    #[test]
    fn dataset_requires_consistent_dimensions() {
        let ok = Dataset::new(vec![
            Instance::new(vec![1.0, 2.0], LabelVector::zeros(2)),
            Instance::new(vec![3.0, 4.0], LabelVector::zeros(2)),
        ])
        .unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.num_features(), 2);
        assert_eq!(ok.num_labels(), 2);

        let bad = Dataset::new(vec![
            Instance::new(vec![1.0, 2.0], LabelVector::zeros(2)),
            Instance::new(vec![3.0], LabelVector::zeros(2)),
        ]);
        assert!(matches!(bad, Err(Error::Dimension(_))));

        assert!(Dataset::new(vec![]).is_err());
    }

    #[test]
    fn subset_preserves_order() {
        let data = Dataset::new(
            (0..5)
                .map(|i| Instance::new(vec![i as f64], LabelVector::zeros(1)))
                .collect(),
        )
        .unwrap();
        let sub = data.subset(&[3, 1]).unwrap();
        assert_eq!(sub.instances()[0].features[0], 3.0);
        assert_eq!(sub.instances()[1].features[0], 1.0);
    }
}
