//! The spectral ranking pipeline.
//!
//! For each class the opinions are reduced to one-vs-rest membership votes,
//! every pair of sources is compared, and the agreement counts are scaled by
//! the number of instances and pushed through a row-wise softmax. The result
//! is a strictly positive row-stochastic matrix, so its stationary
//! distribution exists, is unique and is strictly positive. That distribution
//! is the reliability weight of each source, and the class score of an
//! instance is the weighted vote of the (optionally top-N) sources.

use serde::{Deserialize, Serialize};

use crate::opinions::{BinaryMembershipMatrix, ClassId, OpinionMatrix};
use crate::{Error, Result};

/// Default iteration budget of the power method.
pub const DEFAULT_POWER: usize = 1000;

/// Power iteration stops once successive iterates differ by less than this (∞-norm).
pub const STEP_TOLERANCE: f64 = 1e-12;

/// A returned ranking always satisfies `‖Cᵀv − v‖∞ < FIXED_POINT_TOLERANCE`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

/// Pairwise agreement counts between sources for one class.
///
/// `counts[i][j]` is the number of instances where both sources gave a label
/// and agree on membership in the class. A missing label agrees with nothing,
/// including itself, so the diagonal counts each source's labeled instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementCounts {
    sources: usize,
    instances: usize,
    counts: Vec<u64>,
}

impl AgreementCounts {
    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.sources + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.sources..(i + 1) * self.sources]
    }
}

/// Row-stochastic, strictly positive `s × s` transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorroborationMatrix {
    size: usize,
    probs: Vec<f64>,
}

impl CorroborationMatrix {
    /// Wraps explicit row-major probabilities, checking that every entry is
    /// positive and every row sums to one within `1e-12`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::invalid("corroboration matrix must be non-empty"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::invalid(format!("row {i} has length {}, expected {size}", row.len())));
            }
            if row.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::invalid(format!("row {i} has a non-positive entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { size, probs: rows.concat() })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.size..(i + 1) * self.size]
    }

    /// Computes `Cᵀ v`, i.e. one step of the chain applied to the distribution `v`.
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size);
        let mut out = vec![0.0; self.size];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o += vi * p;
            }
        }
        out
    }

    /// `‖Cᵀ v − v‖∞`.
    pub fn stationary_residual(&self, v: &[f64]) -> f64 {
        self.transpose_apply(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Stationary distribution of a corroboration matrix: one positive weight
/// per source, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingVector {
    weights: Vec<f64>,
}

impl RankingVector {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Source indices ordered by descending weight, ties to the lower index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx
    }
}

/// Kind of labeling problem, which decides how scores become labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Two classes; only class 1 is scored and thresholded at 0.5.
    Binary,
    /// Every class is scored; the label is the argmax.
    Multinomial,
    /// Every class is scored and thresholded independently at 0.5.
    Multilabel,
}

impl Task {
    /// `Binary` for two classes, `Multinomial` otherwise.
    pub fn infer(classes: usize) -> Self {
        if classes == 2 {
            Task::Binary
        } else {
            Task::Multinomial
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multinomial" => Ok(Task::Multinomial),
            "multilabel" => Ok(Task::Multilabel),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

/// How kept weights are combined when only the top-N sources vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopNWeighting {
    /// Kept weights are rescaled to sum to one, so scores span `[0, 1]`.
    #[default]
    Renormalized,
    /// Kept weights are used as-is; scores are bounded by their sum.
    Raw,
}

/// Class membership scores, one row per scored class and one column per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScores {
    task: Task,
    classes: usize,
    instances: usize,
    scores: Vec<f64>,
}

impl WeightedScores {
    pub(crate) fn new(task: Task, classes: usize, instances: usize, scores: Vec<f64>) -> Self {
        debug_assert_eq!(scores.len() % instances, 0);
        Self { task, classes, instances, scores }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Number of classes of the underlying opinions.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    /// Number of stored score rows: 1 for binary tasks, `k` otherwise.
    pub fn rows(&self) -> usize {
        self.scores.len() / self.instances
    }

    /// Class whose membership score row `row` holds.
    pub fn row_class(&self, row: usize) -> ClassId {
        match self.task {
            Task::Binary => 1,
            _ => row as ClassId,
        }
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.scores[row * self.instances..(row + 1) * self.instances]
    }

    pub fn get(&self, row: usize, instance: usize) -> f64 {
        self.scores[row * self.instances + instance]
    }
}

/// Final decisions derived from [`WeightedScores`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predictions {
    /// One class per instance (binary and multinomial tasks).
    Labels(Vec<ClassId>),
    /// One membership flag per class for every instance.
    Multilabel(Vec<Vec<bool>>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Labels(v) => v.len(),
            Predictions::Multilabel(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        match self {
            Predictions::Labels(v) => Some(v),
            Predictions::Multilabel(_) => None,
        }
    }
}

/// Ranking computed for one scored class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRanking {
    pub class_id: ClassId,
    pub ranking: RankingVector,
    /// Sources whose votes entered the scores, best first.
    pub kept: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOutput {
    pub scores: WeightedScores,
    pub rankings: Vec<ClassRanking>,
}

impl RankOutput {
    pub fn decide(&self) -> Predictions {
        decide_labels(&self.scores)
    }
}

/// Configuration of the full ranking pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionRank {
    /// Iteration budget of the power method.
    pub power: usize,
    /// Number of top-ranked sources that vote; `None` keeps all of them.
    pub top_n: Option<usize>,
    pub weighting: TopNWeighting,
    /// Task type; `None` infers it from the number of classes.
    pub task: Option<Task>,
}

impl Default for OpinionRank {
    fn default() -> Self {
        Self { power: DEFAULT_POWER, top_n: None, weighting: TopNWeighting::Renormalized, task: None }
    }
}

impl OpinionRank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_power(mut self, power: usize) -> Self {
        self.power = power;
        self
    }

    pub fn with_top_n(mut self, top_n: usize) -> Self {
        self.top_n = Some(top_n);
        self
    }

    pub fn with_weighting(mut self, weighting: TopNWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn with_task(mut self, task: Task) -> Self {
        self.task = Some(task);
        self
    }

    /// Runs the pipeline on every scored class and collects the scores.
    pub fn run(&self, opinions: &OpinionMatrix) -> Result<RankOutput> {
        let s = opinions.sources();
        let n_keep = self.top_n.unwrap_or(s);
        if n_keep == 0 || n_keep > s {
            return Err(Error::invalid(format!("top-N must be in 1..={s}, got {n_keep}")));
        }
        if self.power == 0 {
            return Err(Error::invalid("power iteration budget must be at least 1"));
        }
        let task = self.task.unwrap_or_else(|| Task::infer(opinions.classes()));
        let scored: Vec<ClassId> = match task {
            Task::Binary if opinions.classes() != 2 => {
                return Err(Error::invalid(format!(
                    "binary task needs exactly 2 classes, got {}",
                    opinions.classes()
                )))
            }
            Task::Binary => vec![1],
            _ => (0..opinions.classes()).map(|c| c as ClassId).collect(),
        };

        let n = opinions.instances();
        let mut scores = Vec::with_capacity(scored.len() * n);
        let mut rankings = Vec::with_capacity(scored.len());
        for class_id in scored {
            let membership = build_membership_matrix(opinions, class_id)?;
            let corr = to_stochastic(&count_agreements(&membership));
            let ranking = dominant_eigenvector(&corr, self.power)?;
            let kept = select_top_n(&ranking, n_keep)?;
            scores.extend(weighted_scores_with(&membership, &ranking, &kept, self.weighting));
            rankings.push(ClassRanking { class_id, ranking, kept });
        }
        Ok(RankOutput { scores: WeightedScores::new(task, opinions.classes(), n, scores), rankings })
    }

    /// Runs the pipeline and returns one label per instance.
    ///
    /// Fails for multilabel tasks, which have no single label per instance.
    pub fn predict(&self, opinions: &OpinionMatrix) -> Result<Vec<ClassId>> {
        match self.run(opinions)?.decide() {
            Predictions::Labels(v) => Ok(v),
            Predictions::Multilabel(_) => Err(Error::invalid("multilabel task has no single label")),
        }
    }
}

/// One-vs-rest membership matrix for `class_id`.
pub fn build_membership_matrix(
    opinions: &OpinionMatrix,
    class_id: ClassId,
) -> Result<BinaryMembershipMatrix> {
    BinaryMembershipMatrix::from_opinions(opinions, class_id)
}

/// Counts, for every pair of sources, the instances on which both labeled and
/// agree on membership.
pub fn count_agreements(membership: &BinaryMembershipMatrix) -> AgreementCounts {
    let s = membership.sources();
    let words = membership.words_per_row();
    let mut counts = vec![0u64; s * s];
    for i in 0..s {
        let (pi, oi) = (membership.present_row(i), membership.ones_row(i));
        for j in i..s {
            let (pj, oj) = (membership.present_row(j), membership.ones_row(j));
            let mut c = 0u64;
            for w in 0..words {
                c += u64::from((pi[w] & pj[w] & !(oi[w] ^ oj[w])).count_ones());
            }
            counts[i * s + j] = c;
            counts[j * s + i] = c;
        }
    }
    AgreementCounts { sources: s, instances: membership.instances(), counts }
}

/// Scales counts by the number of instances and applies a row-wise softmax.
pub fn to_stochastic(counts: &AgreementCounts) -> CorroborationMatrix {
    let s = counts.sources;
    let n = counts.instances as f64;
    let mut probs = Vec::with_capacity(s * s);
    for i in 0..s {
        let row = counts.row(i);
        let max = row.iter().copied().max().unwrap_or(0) as f64 / n;
        let start = probs.len();
        probs.extend(row.iter().map(|&c| (c as f64 / n - max).exp()));
        let total: f64 = probs[start..].iter().sum();
        for p in &mut probs[start..] {
            *p /= total;
        }
    }
    CorroborationMatrix { size: s, probs }
}

/// Stationary distribution of `corr` by power iteration from the first
/// elementary vector.
pub fn dominant_eigenvector(corr: &CorroborationMatrix, power: usize) -> Result<RankingVector> {
    dominant_eigenvector_from(corr, power, 0)
}

/// Power iteration started from the elementary vector `e_start`.
///
/// Iterates `v ← Cᵀ v` until successive iterates differ by less than
/// [`STEP_TOLERANCE`] or `power` steps were taken, then requires the fixed
/// point residual to be below [`FIXED_POINT_TOLERANCE`].
pub fn dominant_eigenvector_from(
    corr: &CorroborationMatrix,
    power: usize,
    start: usize,
) -> Result<RankingVector> {
    let s = corr.size;
    if power == 0 {
        return Err(Error::invalid("power iteration budget must be at least 1"));
    }
    if start >= s {
        return Err(Error::invalid(format!("start index {start} out of range for {s} sources")));
    }
    let mut v = vec![0.0; s];
    v[start] = 1.0;
    let mut iterations = 0;
    while iterations < power {
        let mut next = corr.transpose_apply(&v);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let step = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if step < STEP_TOLERANCE {
            break;
        }
    }
    let residual = corr.stationary_residual(&v);
    if residual >= FIXED_POINT_TOLERANCE || v.iter().any(|&x| x <= 0.0) {
        return Err(Error::Convergence { iterations, residual });
    }
    Ok(RankingVector { weights: v })
}

/// Indices of the `n_keep` largest weights, best first, ties to the lower index.
pub fn select_top_n(ranking: &RankingVector, n_keep: usize) -> Result<Vec<usize>> {
    let s = ranking.len();
    if n_keep == 0 || n_keep > s {
        return Err(Error::invalid(format!("top-N must be in 1..={s}, got {n_keep}")));
    }
    let mut order = ranking.order();
    order.truncate(n_keep);
    Ok(order)
}

/// Weighted membership vote per instance, missing cells counting as 0.5.
///
/// When `keep` is a strict subset of the sources the kept weights are
/// renormalized to sum to one.
pub fn weighted_scores(
    membership: &BinaryMembershipMatrix,
    ranking: &RankingVector,
    keep: &[usize],
) -> Vec<f64> {
    weighted_scores_with(membership, ranking, keep, TopNWeighting::Renormalized)
}

pub fn weighted_scores_with(
    membership: &BinaryMembershipMatrix,
    ranking: &RankingVector,
    keep: &[usize],
    weighting: TopNWeighting,
) -> Vec<f64> {
    let n = membership.instances();
    let s = membership.sources();
    assert_eq!(ranking.len(), s, "ranking and membership disagree on the number of sources");
    let norm = if weighting == TopNWeighting::Renormalized && keep.len() < s {
        keep.iter().map(|&i| ranking.weights[i]).sum::<f64>()
    } else {
        1.0
    };
    let tail_mask = match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    };
    let words = membership.words_per_row();
    let mut scores = vec![0.0; n];
    for &i in keep {
        let w = ranking.weights[i] / norm;
        let half = 0.5 * w;
        let (present, ones) = (membership.present_row(i), membership.ones_row(i));
        for word in 0..words {
            let base = word * 64;
            let mask = if word + 1 == words { tail_mask } else { u64::MAX };
            let mut yes = present[word] & ones[word];
            while yes != 0 {
                scores[base + yes.trailing_zeros() as usize] += w;
                yes &= yes - 1;
            }
            let mut missing = !present[word] & mask;
            while missing != 0 {
                scores[base + missing.trailing_zeros() as usize] += half;
                missing &= missing - 1;
            }
        }
    }
    for x in &mut scores {
        *x = x.clamp(0.0, 1.0);
    }
    scores
}

/// Turns scores into labels: threshold at 0.5 (inclusive) for binary and
/// multilabel tasks, argmax with ties to the lowest class for multinomial.
pub fn decide_labels(scores: &WeightedScores) -> Predictions {
    let n = scores.instances;
    match scores.task {
        Task::Binary => Predictions::Labels(
            scores.row(0).iter().map(|&x| ClassId::from(x >= 0.5)).collect(),
        ),
        Task::Multilabel => Predictions::Multilabel(
            (0..n)
                .map(|j| (0..scores.rows()).map(|r| scores.get(r, j) >= 0.5).collect())
                .collect(),
        ),
        Task::Multinomial => Predictions::Labels(
            (0..n)
                .map(|j| {
                    let mut best = 0;
                    for r in 1..scores.rows() {
                        if scores.get(r, j) > scores.get(best, j) {
                            best = r;
                        }
                    }
                    scores.row_class(best)
                })
                .collect(),
        ),
    }
}
