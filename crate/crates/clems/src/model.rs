//! End-to-end trained models behind one prediction interface: the
//! cost-sensitive embedding pipeline and the two baselines.

use serde::{Deserialize, Serialize};

use crate::baseline::{BrModel, PlstModel};
use crate::cost::CostSpec;
use crate::data::{Dataset, LabelVector};
use crate::embedding::{CandidateSet, CandidateSource, CsEmbedding, Decoded};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::mds::MdsOptions;
use crate::seeding::derive_seed;

/// Seed streams inside one model fit.
const EMBED_STREAM: u64 = 1;
const FOREST_STREAM: u64 = 2;

/// Which training algorithm a model was produced by.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Clems,
    Plst,
    Br,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Clems => "clems",
            Algorithm::Plst => "plst",
            Algorithm::Br => "br",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clems" => Ok(Algorithm::Clems),
            "plst" => Ok(Algorithm::Plst),
            "br" => Ok(Algorithm::Br),
            other => Err(Error::Validation(format!(
                "unknown algorithm `{other}` (expected clems, plst, or br)"
            ))),
        }
    }
}

/// The cost-sensitive pipeline: a fitted embedding plus the multi-target
/// forest that regresses instances into the embedded space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClemsModel {
    embedding: CsEmbedding,
    forest: ForestModel,
}

impl ClemsModel {
    /// Fits the embedding on the candidate set of `train` (optionally
    /// extended by `extra` labels), then the regressor toward the
    /// prediction-role coordinates of each training label.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        train: &Dataset,
        spec: CostSpec,
        dim: usize,
        source: CandidateSource,
        extra: Option<&Dataset>,
        forest_params: &ForestParams,
        mds_options: &MdsOptions,
        seed: u64,
    ) -> Result<Self> {
        let candidates = CandidateSet::build(train, source, extra)?;
        let embedding = CsEmbedding::fit(
            candidates,
            spec,
            dim,
            mds_options,
            derive_seed(seed, EMBED_STREAM),
        )?;
        let mut targets = vec![vec![0.0; train.len()]; dim];
        for (i, inst) in train.instances().iter().enumerate() {
            let z = embedding.embed(&inst.label)?;
            for (m, &v) in z.iter().enumerate() {
                targets[m][i] = v;
            }
        }
        let forest = fit_forest(
            &train.feature_matrix(),
            &targets,
            forest_params,
            derive_seed(seed, FOREST_STREAM),
        )?;
        Ok(ClemsModel { embedding, forest })
    }

    pub fn embedding(&self) -> &CsEmbedding {
        &self.embedding
    }

    pub fn forest(&self) -> &ForestModel {
        &self.forest
    }

    pub fn predict(&self, features: &[f64]) -> Result<LabelVector> {
        self.predict_capped(features, usize::MAX)
    }

    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> Result<LabelVector> {
        Ok(self.predict_detailed(features, max_depth)?.0)
    }

    /// Prediction together with the regressed embedded vector and the
    /// decoding outcome, for diagnostics.
    pub fn predict_detailed(
        &self,
        features: &[f64],
        max_depth: usize,
    ) -> Result<(LabelVector, Vec<f64>, Decoded)> {
        let z = self.forest.predict_capped(features, max_depth)?;
        let decoded = self.embedding.decode_nearest(&z)?;
        Ok((decoded.label.clone(), z, decoded))
    }
}

/// Any trained model, tagged by algorithm for persistence.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum TrainedModel {
    Clems(ClemsModel),
    Plst(PlstModel),
    Br(BrModel),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Clems(_) => Algorithm::Clems,
            TrainedModel::Plst(_) => Algorithm::Plst,
            TrainedModel::Br(_) => Algorithm::Br,
        }
    }

    pub fn num_features(&self) -> usize {
        match self {
            TrainedModel::Clems(m) => m.forest.num_features(),
            TrainedModel::Plst(m) => m.forest().num_features(),
            TrainedModel::Br(m) => m.forest().num_features(),
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            TrainedModel::Clems(m) => m.embedding.candidates().label(0).len(),
            TrainedModel::Plst(m) => m.num_labels(),
            TrainedModel::Br(m) => m.num_labels(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<LabelVector> {
        self.predict_capped(features, usize::MAX)
    }

    pub fn predict_capped(&self, features: &[f64], max_depth: usize) -> Result<LabelVector> {
        match self {
            TrainedModel::Clems(m) => m.predict_capped(features, max_depth),
            TrainedModel::Plst(m) => m.predict_capped(features, max_depth),
            TrainedModel::Br(m) => m.predict_capped(features, max_depth),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Criterion;
    use crate::testutil::synthetic_dataset;

    fn quick_params() -> ForestParams {
        ForestParams {
            n_trees: 8,
            max_depth: 6,
            feature_fraction: 1.0,
            ..ForestParams::default()
        }
    }

    #[test]
    fn clems_fit_predicts_candidates_only_and_learns_the_fixture() {
        let data = synthetic_dataset(80, 3, 1);
        let model = ClemsModel::fit(
            &data,
            CostSpec::new(Criterion::F1),
            3,
            CandidateSource::Train,
            None,
            &quick_params(),
            &MdsOptions::default(),
            7,
        )
        .unwrap();
        let mut correct = 0;
        for inst in data.instances() {
            let pred = model.predict(&inst.features).unwrap();
            assert!(model.embedding.candidates().position(&pred).is_some());
            if pred == inst.label {
                correct += 1;
            }
        }
        // The fixture is nearly separable; training accuracy must be high.
        assert!(correct * 10 >= data.len() * 9, "{correct}/{}", data.len());
    }

    #[test]
    fn clems_fit_is_deterministic() {
        let data = synthetic_dataset(40, 3, 2);
        let fit = || {
            ClemsModel::fit(
                &data,
                CostSpec::new(Criterion::RankLoss),
                2,
                CandidateSource::Train,
                None,
                &quick_params(),
                &MdsOptions::default(),
                11,
            )
            .unwrap()
        };
        let a = fit();
        let b = fit();
        for inst in data.instances().iter().take(10) {
            let (pa, za, _) = a.predict_detailed(&inst.features, usize::MAX).unwrap();
            let (pb, zb, _) = b.predict_detailed(&inst.features, usize::MAX).unwrap();
            assert_eq!(pa, pb);
            assert_eq!(za, zb);
        }
    }

    #[test]
    fn trained_model_enum_dispatches() {
        let data = synthetic_dataset(30, 2, 3);
        let clems = TrainedModel::Clems(
            ClemsModel::fit(
                &data,
                CostSpec::new(Criterion::F1),
                2,
                CandidateSource::Train,
                None,
                &quick_params(),
                &MdsOptions::default(),
                1,
            )
            .unwrap(),
        );
        assert_eq!(clems.algorithm(), Algorithm::Clems);
        assert_eq!(clems.num_labels(), 2);
        assert_eq!(clems.num_features(), 4);
        let pred = clems.predict(&data.instances()[0].features).unwrap();
        assert_eq!(pred.len(), 2);
    }
}
