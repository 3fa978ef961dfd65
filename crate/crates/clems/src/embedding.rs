//! The cost-sensitive embedding: candidate sets, the mirroring trick that
//! turns an asymmetric cost into a symmetric dissimilarity over truth-role
//! and prediction-role copies, SMACOF fitting, and nearest-neighbor decoding.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{isotonic_delta, CostSpec};
use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::mds::{solve, MdsInit, MdsOptions, MdsProblem, MdsSolution};

/// Where candidate label vectors come from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// Distinct label vectors of the training instances.
    Train,
    /// Training labels plus the distinct labels of an extra (test) set.
    All,
}

impl std::str::FromStr for CandidateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(CandidateSource::Train),
            "all" => Ok(CandidateSource::All),
            other => Err(Error::Validation(format!(
                "unknown candidate source `{other}` (expected `train` or `all`)"
            ))),
        }
    }
}

/// The decoding vocabulary: L distinct label vectors with their observed
/// frequencies, in first-appearance order.
#[derive(Clone, Debug, Serialize)]
pub struct CandidateSet {
    labels: Vec<LabelVector>,
    freqs: Vec<u64>,
    source: CandidateSource,
    #[serde(skip)]
    index: HashMap<LabelVector, usize>,
}

impl<'de> Deserialize<'de> for CandidateSet {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            labels: Vec<LabelVector>,
            freqs: Vec<u64>,
            source: CandidateSource,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.labels.is_empty() || raw.labels.len() != raw.freqs.len() {
            return Err(serde::de::Error::custom(
                "candidate set has mismatched or empty labels/freqs",
            ));
        }
        if raw.freqs.iter().any(|&f| f == 0) {
            return Err(serde::de::Error::custom("candidate frequency of zero"));
        }
        let index: HashMap<LabelVector, usize> = raw
            .labels
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        if index.len() != raw.labels.len() {
            return Err(serde::de::Error::custom("duplicate candidate label"));
        }
        Ok(CandidateSet {
            labels: raw.labels,
            freqs: raw.freqs,
            source: raw.source,
            index,
        })
    }
}

impl CandidateSet {
    /// Builds the candidate set of `data`; with `CandidateSource::All` the
    /// distinct labels of `extra` are unioned in and frequencies are counted
    /// over all contributing instances.
    pub fn build(data: &Dataset, source: CandidateSource, extra: Option<&Dataset>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Validation("cannot build a candidate set from an empty dataset".into()));
        }
        let mut labels: Vec<LabelVector> = Vec::new();
        let mut freqs: Vec<u64> = Vec::new();
        let mut index: HashMap<LabelVector, usize> = HashMap::new();
        let mut absorb = |label: &LabelVector| {
            if let Some(&i) = index.get(label) {
                freqs[i] += 1;
            } else {
                index.insert(label.clone(), labels.len());
                labels.push(label.clone());
                freqs.push(1);
            }
        };
        for label in data.labels() {
            absorb(label);
        }
        if source == CandidateSource::All {
            if let Some(extra) = extra {
                if extra.num_labels() != data.num_labels() {
                    return Err(Error::Dimension(format!(
                        "extra dataset has {} labels, expected {}",
                        extra.num_labels(),
                        data.num_labels()
                    )));
                }
                for label in extra.labels() {
                    absorb(label);
                }
            }
        }
        Ok(CandidateSet {
            labels,
            freqs,
            source,
            index,
        })
    }

    /// Builds a candidate set directly from labels and frequencies.
    pub fn from_parts(
        labels: Vec<LabelVector>,
        freqs: Vec<u64>,
        source: CandidateSource,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation("candidate set must not be empty".into()));
        }
        if labels.len() != freqs.len() {
            return Err(Error::Dimension(format!(
                "{} labels but {} frequencies",
                labels.len(),
                freqs.len()
            )));
        }
        if let Some(pos) = freqs.iter().position(|&f| f == 0) {
            return Err(Error::Validation(format!(
                "candidate {pos} has frequency 0"
            )));
        }
        let k = labels[0].len();
        if labels.iter().any(|l| l.len() != k) {
            return Err(Error::Dimension("candidate labels differ in length".into()));
        }
        let index: HashMap<LabelVector, usize> = labels
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        if index.len() != labels.len() {
            return Err(Error::Validation("candidate labels are not distinct".into()));
        }
        Ok(CandidateSet {
            labels,
            freqs,
            source,
            index,
        })
    }

    /// Number of candidates L.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[LabelVector] {
        &self.labels
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    pub fn source(&self) -> CandidateSource {
        self.source
    }

    pub fn label(&self, i: usize) -> &LabelVector {
        &self.labels[i]
    }

    pub fn freq(&self, i: usize) -> u64 {
        self.freqs[i]
    }

    /// Index of `label` in the set, if present.
    pub fn position(&self, label: &LabelVector) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// The 2L x 2L weighted MDS problem produced by the mirroring trick.
///
/// Objects `0..L` are truth-role copies, objects `L..2L` prediction-role
/// copies. The diagonal blocks of both matrices are zero; the off-diagonal
/// blocks hold the isotonic costs and the candidate frequencies.
#[derive(Debug)]
pub struct MirroredProblem {
    pub problem: MdsProblem,
    pub num_candidates: usize,
}

/// Builds the mirrored dissimilarity and weight matrices for a candidate set.
pub fn build_mirrored_problem(
    candidates: &CandidateSet,
    spec: &CostSpec,
    dim: usize,
) -> Result<MirroredProblem> {
    let l = candidates.len();
    if l == 1 {
        log::warn!("candidate set has a single label vector; the embedding degenerates to one point");
    }
    let n = 2 * l;
    let mut delta = nalgebra::DMatrix::zeros(n, n);
    let mut weights = nalgebra::DMatrix::zeros(n, n);
    for i in 0..l {
        let f_i = candidates.freq(i) as f64;
        for j in 0..l {
            let dissim = spec.dissimilarity(candidates.label(i), candidates.label(j))?;
            // Truth-role copy i against prediction-role copy j, mirrored to
            // keep the matrices symmetric.
            delta[(i, l + j)] = dissim;
            delta[(l + j, i)] = dissim;
            weights[(i, l + j)] = f_i;
            weights[(l + j, i)] = f_i;
        }
    }
    let problem = MdsProblem::new(delta, weights, dim)?;
    Ok(MirroredProblem {
        problem,
        num_candidates: l,
    })
}

/// Metadata recorded when an embedding is fitted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitMeta {
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

/// A fitted cost-sensitive embedding.
///
/// Row i of `pred_coords` is the embedded vector of candidate i (the range
/// of the embedding function), row i of `truth_coords` its decoding target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CsEmbedding {
    candidates: CandidateSet,
    spec: CostSpec,
    dim: usize,
    truth_coords: Vec<Vec<f64>>,
    pred_coords: Vec<Vec<f64>>,
    pub stress: f64,
    pub meta: FitMeta,
}

/// Result of nearest-neighbor decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub label: LabelVector,
    pub index: usize,
    pub distance: f64,
}

/// The quantities of the cost bound for one decoded query.
#[derive(Clone, Debug)]
pub struct TheoremGap {
    /// Squared isotonic cost of the decoded prediction.
    pub lhs: f64,
    /// Squared difference between the truth-to-decoded coordinate distance
    /// and the isotonic cost.
    pub embed_err: f64,
    /// Squared distance between the truth coordinate and the query.
    pub regr_err: f64,
    /// Whether `lhs <= 5 * (embed_err + regr_err)` up to float slack.
    pub holds: bool,
    pub decoded_index: usize,
    /// Distance from the truth coordinate to the decoded coordinate.
    pub dist_truth_decoded: f64,
    /// Distance from the truth coordinate to the query.
    pub dist_truth_query: f64,
}

/// Numeric slack for the inequality check.
const THEOREM_SLACK: f64 = 1e-9;

impl CsEmbedding {
    /// Fits the embedding by solving the mirrored MDS problem.
    pub fn fit(
        candidates: CandidateSet,
        spec: CostSpec,
        dim: usize,
        options: &MdsOptions,
        seed: u64,
    ) -> Result<Self> {
        let mirrored = build_mirrored_problem(&candidates, &spec, dim)?;
        let solution = solve(&mirrored.problem, MdsInit::Seed(seed), options)?;
        Ok(Self::from_solution(candidates, spec, dim, &solution, seed))
    }

    fn from_solution(
        candidates: CandidateSet,
        spec: CostSpec,
        dim: usize,
        solution: &MdsSolution,
        seed: u64,
    ) -> Self {
        let l = candidates.len();
        let row = |i: usize| (0..dim).map(|c| solution.coords[(i, c)]).collect::<Vec<f64>>();
        let truth_coords = (0..l).map(row).collect::<Vec<_>>();
        let pred_coords = (l..2 * l).map(row).collect::<Vec<_>>();
        CsEmbedding {
            candidates,
            spec,
            dim,
            truth_coords,
            pred_coords,
            stress: solution.final_stress(),
            meta: FitMeta {
                seed: solution.seed.unwrap_or(seed),
                iterations: solution.iterations,
                converged: solution.converged,
            },
        }
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truth-role coordinates (the decoding set), one row per candidate.
    pub fn truth_coords(&self) -> &[Vec<f64>] {
        &self.truth_coords
    }

    /// Prediction-role coordinates (the embedded vectors), one row per candidate.
    pub fn pred_coords(&self) -> &[Vec<f64>] {
        &self.pred_coords
    }

    /// Embedded vector of a candidate label (its prediction-role row).
    pub fn embed(&self, label: &LabelVector) -> Result<&[f64]> {
        let i = self
            .candidates
            .position(label)
            .ok_or(Error::NotEmbeddable)?;
        Ok(&self.pred_coords[i])
    }

    /// Decodes a query to the candidate whose truth-role coordinate is
    /// nearest in Euclidean distance. Ties go to the candidate with the
    /// larger frequency, then the smaller index.
    pub fn decode_nearest(&self, query: &[f64]) -> Result<Decoded> {
        if query.len() != self.dim {
            return Err(Error::Dimension(format!(
                "query has dimension {}, embedding has {}",
                query.len(),
                self.dim
            )));
        }
        let mut best_index = 0usize;
        let mut best_sq = f64::INFINITY;
        for (i, coord) in self.truth_coords.iter().enumerate() {
            let sq = squared_distance(coord, query);
            if sq < best_sq
                || (sq == best_sq && self.candidates.freq(i) > self.candidates.freq(best_index))
            {
                best_sq = sq;
                best_index = i;
            }
        }
        Ok(Decoded {
            label: self.candidates.label(best_index).clone(),
            index: best_index,
            distance: best_sq.sqrt(),
        })
    }

    /// Evaluates the decoding cost bound for a query whose ground truth is a
    /// candidate: the squared isotonic cost of the decoded prediction is at
    /// most five times the embedding error plus the regression error.
    pub fn theorem1_gap(&self, truth: &LabelVector, query: &[f64]) -> Result<TheoremGap> {
        let truth_index = self
            .candidates
            .position(truth)
            .ok_or(Error::NotEmbeddable)?;
        let decoded = self.decode_nearest(query)?;
        let truth_coord = &self.truth_coords[truth_index];
        let dissim = self
            .spec
            .dissimilarity(truth, self.candidates.label(decoded.index))?;
        let lhs = dissim * dissim;
        let dist_truth_decoded =
            squared_distance(truth_coord, &self.truth_coords[decoded.index]).sqrt();
        let embed_err = (dist_truth_decoded - dissim).powi(2);
        let dist_truth_query = squared_distance(truth_coord, query).sqrt();
        let regr_err = dist_truth_query * dist_truth_query;
        let holds = lhs <= 5.0 * (embed_err + regr_err) + THEOREM_SLACK;
        Ok(TheoremGap {
            lhs,
            embed_err,
            regr_err,
            holds,
            decoded_index: decoded.index,
            dist_truth_decoded,
            dist_truth_query,
        })
    }

    /// Writes the fitted coordinates as CSV: role (`t` or `p`), candidate
    /// index, frequency, then the coordinates.
    pub fn export_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "role,candidate_index,frequency")?;
        for c in 0..self.dim {
            write!(out, ",coord_{c}")?;
        }
        writeln!(out)?;
        for (role, coords) in [("t", &self.truth_coords), ("p", &self.pred_coords)] {
            for (i, row) in coords.iter().enumerate() {
                write!(out, "{role},{i},{}", self.candidates.freq(i))?;
                for v in row {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Re-derivation of `isotonic_delta(cost)^2` used by callers that only need
/// the bound's left-hand side.
pub fn squared_isotonic_cost(spec: &CostSpec, truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    let d = isotonic_delta(spec.cost(truth, pred)?)?;
    Ok(d * d)
}
