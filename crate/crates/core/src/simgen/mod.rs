//! Synthetic annotation data under the classic noisy-labeler models, and a
//! seeded Monte-Carlo trial runner.
//!
//! Every generator is a pure function of its seed. Randomness comes from
//! [`ChaCha8Rng`], whose stream is stable across platforms and releases.

mod trials;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::opinions::{ClassId, OpinionMatrix};
use crate::{Error, Result};

pub use trials::{
    run_sweep, run_trials, summarize, ConfigurationStats, Method, MethodStats, TrialReport,
};

/// A generated opinion matrix together with the labels it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub opinions: OpinionMatrix,
    pub truth: Vec<ClassId>,
}

impl Dataset {
    /// Fraction of `predictions` equal to the truth.
    pub fn accuracy(&self, predictions: &[ClassId]) -> f64 {
        accuracy(predictions, &self.truth)
    }
}

pub fn accuracy(predictions: &[ClassId], truth: &[ClassId]) -> f64 {
    assert_eq!(predictions.len(), truth.len());
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_dims(instances: usize, sources: usize) -> Result<()> {
    if instances == 0 || sources == 0 {
        return Err(Error::invalid(format!(
            "need at least one instance and one source, got n={instances}, s={sources}"
        )));
    }
    Ok(())
}

fn uniform_truth(n: usize, classes: usize, rng: &mut impl Rng) -> Vec<ClassId> {
    (0..n).map(|_| rng.random_range(0..classes) as ClassId).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------------------
// Labeler expertise and instance difficulty

/// Per-labeler expertise `alpha` and per-instance inverse difficulty `beta`.
///
/// A label is correct with probability `1 / (1 + exp(-alpha_j * beta_i))`
/// and flipped otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitehillParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl WhitehillParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        check_dims(beta.len(), alpha.len())?;
        if beta.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::invalid("inverse difficulty beta must be non-negative"));
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha ~ N(1, 1)`, `log(beta) ~ N(1, 1)`.
    pub fn sample_model(instances: usize, sources: usize, rng: &mut impl Rng) -> Result<Self> {
        check_dims(instances, sources)?;
        let normal = Normal::new(1.0f64, 1.0).expect("valid normal");
        let alpha = (0..sources).map(|_| normal.sample(rng)).collect();
        let beta = (0..instances).map(|_| normal.sample(rng).exp()).collect();
        Self::new(alpha, beta)
    }

    /// `alpha ~ U[0, 4]`, `log(beta) ~ U[0, 3]`.
    pub fn sample_stability(instances: usize, sources: usize, rng: &mut impl Rng) -> Result<Self> {
        check_dims(instances, sources)?;
        let alpha = (0..sources).map(|_| rng.random_range(0.0..=4.0)).collect();
        let beta = (0..instances).map(|_| rng.random_range(0.0f64..=3.0).exp()).collect();
        Self::new(alpha, beta)
    }

    pub fn correct_probability(&self, source: usize, instance: usize) -> f64 {
        sigmoid(self.alpha[source] * self.beta[instance])
    }
}

/// Draws binary truth uniformly and one label per (labeler, instance).
pub fn gen_whitehill_labels(params: &WhitehillParams, rng: &mut impl Rng) -> Dataset {
    let (s, n) = (params.alpha.len(), params.beta.len());
    let truth = uniform_truth(n, 2, rng);
    let opinions = OpinionMatrix::from_fn(s, n, 2, |i, j| {
        let correct = rng.random_bool(params.correct_probability(i, j));
        Some(if correct { truth[j] } else { 1 - truth[j] })
    })
    .expect("dimensions checked by params");
    Dataset { opinions, truth }
}

pub fn gen_whitehill_model(instances: usize, sources: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let params = WhitehillParams::sample_model(instances, sources, &mut rng)?;
    Ok(gen_whitehill_labels(&params, &mut rng))
}

pub fn gen_whitehill_stability(instances: usize, sources: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let params = WhitehillParams::sample_stability(instances, sources, &mut rng)?;
    Ok(gen_whitehill_labels(&params, &mut rng))
}

/// Accuracy of good labelers on hard instances.
pub const GOOD_LABELER_ACCURACY: f64 = 0.95;
/// Accuracy of bad labelers on hard instances.
pub const BAD_LABELER_ACCURACY: f64 = 0.54;

/// Bad-labeler count closest to one bad per 25 good: `round(s / 26)`.
pub fn default_bad_labelers(sources: usize) -> usize {
    (sources as f64 / 26.0).round() as usize
}

/// Easy/hard instance experiment.
///
/// The first half of the instances is easy and always labeled correctly.
/// On the second half good labelers are right with probability 0.95 and
/// the last `bad_labelers` sources with probability 0.54.
pub fn gen_whitehill_difficulty(
    instances: usize,
    sources: usize,
    bad_labelers: usize,
    seed: u64,
) -> Result<Dataset> {
    check_dims(instances, sources)?;
    if !instances.is_multiple_of(2) {
        return Err(Error::invalid(format!("instance count must be even, got {instances}")));
    }
    if bad_labelers > sources {
        return Err(Error::invalid(format!(
            "bad labeler count {bad_labelers} exceeds source count {sources}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let truth = uniform_truth(instances, 2, &mut rng);
    let easy = instances / 2;
    let good = sources - bad_labelers;
    let opinions = OpinionMatrix::from_fn(sources, instances, 2, |i, j| {
        let p = if j < easy {
            1.0
        } else if i < good {
            GOOD_LABELER_ACCURACY
        } else {
            BAD_LABELER_ACCURACY
        };
        Some(if rng.random_bool(p) { truth[j] } else { 1 - truth[j] })
    })?;
    Ok(Dataset { opinions, truth })
}

// ---------------------------------------------------------------------------
// Multidimensional signal/noise annotators

/// How the two parameters of the annotator-noise gamma distribution are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaConvention {
    /// Second parameter is the scale; mean = shape * scale.
    #[default]
    ShapeScale,
    /// Second parameter is the rate; mean = shape / rate.
    ShapeRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelinderParams {
    /// Standard deviation of the instance signal around `±1`.
    pub theta_z: f64,
    /// Probability that an annotator is adversarial (`w = -1`).
    pub adversary_prob: f64,
    /// Standard deviation of the annotator thresholds.
    pub tau_std: f64,
    pub sigma_shape: f64,
    pub sigma_param: f64,
    pub gamma_convention: GammaConvention,
}

impl Default for WelinderParams {
    fn default() -> Self {
        Self {
            theta_z: 0.5,
            adversary_prob: 0.01,
            tau_std: 0.5,
            sigma_shape: 1.5,
            sigma_param: 0.3,
            gamma_convention: GammaConvention::ShapeScale,
        }
    }
}

impl WelinderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_z > 0.0) {
            return Err(Error::invalid("theta_z must be positive"));
        }
        if !(0.0..=1.0).contains(&self.adversary_prob) {
            return Err(Error::invalid("adversary probability must be in [0, 1]"));
        }
        if !(self.tau_std >= 0.0) || !(self.sigma_shape > 0.0) || !(self.sigma_param > 0.0) {
            return Err(Error::invalid("threshold and noise parameters must be positive"));
        }
        Ok(())
    }

    /// Distribution of the per-annotator noise scale.
    pub fn sigma_distribution(&self) -> Gamma<f64> {
        let scale = match self.gamma_convention {
            GammaConvention::ShapeScale => self.sigma_param,
            GammaConvention::ShapeRate => 1.0 / self.sigma_param,
        };
        Gamma::new(self.sigma_shape, scale).expect("validated gamma parameters")
    }

    pub fn sample_annotators(&self, sources: usize, rng: &mut impl Rng) -> Result<Vec<Annotator>> {
        self.validate()?;
        let tau = Normal::new(0.0, self.tau_std).expect("validated tau std");
        let sigma = self.sigma_distribution();
        Ok((0..sources)
            .map(|_| {
                let w = if rng.random_bool(self.adversary_prob) { -1.0 } else { 1.0 };
                Annotator { w, tau: tau.sample(rng), sigma: sigma.sample(rng) }
            })
            .collect())
    }
}

/// One annotator: labels `1` iff `w * y >= tau` where `y ~ N(x, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub w: f64,
    pub tau: f64,
    pub sigma: f64,
}

pub fn gen_welinder_with(
    instances: usize,
    theta_z: f64,
    annotators: &[Annotator],
    rng: &mut impl Rng,
) -> Result<Dataset> {
    check_dims(instances, annotators.len())?;
    if !(theta_z > 0.0) || annotators.iter().any(|a| !(a.sigma > 0.0)) {
        return Err(Error::invalid("signal and noise scales must be positive"));
    }
    let truth = uniform_truth(instances, 2, rng);
    let signal: Vec<f64> = truth
        .iter()
        .map(|&z| {
            let mu = if z == 1 { 1.0 } else { -1.0 };
            mu + theta_z * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let opinions = OpinionMatrix::from_fn(annotators.len(), instances, 2, |i, j| {
        let a = &annotators[i];
        let y = signal[j] + a.sigma * rng.sample::<f64, _>(StandardNormal);
        Some(ClassId::from(a.w * y >= a.tau))
    })?;
    Ok(Dataset { opinions, truth })
}

pub fn gen_welinder(
    instances: usize,
    sources: usize,
    params: &WelinderParams,
    seed: u64,
) -> Result<Dataset> {
    check_dims(instances, sources)?;
    let mut rng = rng_from_seed(seed);
    let annotators = params.sample_annotators(sources, &mut rng)?;
    gen_welinder_with(instances, params.theta_z, &annotators, &mut rng)
}

// ---------------------------------------------------------------------------
// Experts with obfuscated opinions

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldbergerParams {
    pub n_classes: usize,
    /// Interval from which each expert's reliability is drawn uniformly.
    pub reliability_range: (f64, f64),
}

impl Default for GoldbergerParams {
    fn default() -> Self {
        Self { n_classes: 3, reliability_range: (0.4, 0.7) }
    }
}

impl GoldbergerParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=crate::MAX_CLASSES).contains(&self.n_classes) {
            return Err(Error::invalid(format!("class count must be in 2..=255, got {}", self.n_classes)));
        }
        let (lo, hi) = self.reliability_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid("reliability range must lie within [0, 1]"));
        }
        Ok(())
    }

    pub fn sample_reliabilities(&self, sources: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = self.reliability_range;
        Ok((0..sources).map(|_| rng.random_range(lo..=hi)).collect())
    }
}

/// Correct with probability `p`, otherwise uniform over the other classes.
pub fn sample_expert_opinion(truth: ClassId, p: f64, classes: usize, rng: &mut impl Rng) -> ClassId {
    if rng.random_bool(p) {
        truth
    } else {
        let shift = rng.random_range(1..classes);
        ((truth as usize + shift) % classes) as ClassId
    }
}

/// Passes a label through a random soft observation and hardens it again.
///
/// `U` is drawn from the flat Dirichlet, `z` from the categorical
/// distribution `U`, and the result is `argmax_a U[(y + z - a) mod K]`.
pub fn obfuscate(label: ClassId, classes: usize, rng: &mut impl Rng) -> ClassId {
    let mut u: Vec<f64> = (0..classes).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= total);

    let r: f64 = rng.random();
    let mut acc = 0.0;
    let mut z = classes - 1;
    for (c, &p) in u.iter().enumerate() {
        acc += p;
        if r < acc {
            z = c;
            break;
        }
    }

    let y = label as usize;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..classes {
        let val = u[(y + z + classes - a) % classes];
        if val > best_val {
            best = a;
            best_val = val;
        }
    }
    best as ClassId
}

pub fn gen_goldberger_with(
    instances: usize,
    reliabilities: &[f64],
    classes: usize,
    rng: &mut impl Rng,
) -> Result<Dataset> {
    check_dims(instances, reliabilities.len())?;
    if reliabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("reliabilities must lie in [0, 1]"));
    }
    let truth = uniform_truth(instances, classes, rng);
    let opinions = OpinionMatrix::from_fn(reliabilities.len(), instances, classes, |i, j| {
        let y = sample_expert_opinion(truth[j], reliabilities[i], classes, rng);
        Some(obfuscate(y, classes, rng))
    })?;
    Ok(Dataset { opinions, truth })
}

pub fn gen_goldberger(
    instances: usize,
    sources: usize,
    params: &GoldbergerParams,
    seed: u64,
) -> Result<Dataset> {
    check_dims(instances, sources)?;
    let mut rng = rng_from_seed(seed);
    let p = params.sample_reliabilities(sources, &mut rng)?;
    gen_goldberger_with(instances, &p, params.n_classes, &mut rng)
}

// ---------------------------------------------------------------------------

/// A generator configuration: one cell of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    WhitehillModel { instances: usize, sources: usize },
    WhitehillDifficulty { instances: usize, sources: usize, bad_labelers: usize },
    WhitehillStability { instances: usize, sources: usize },
    Welinder { instances: usize, sources: usize, params: WelinderParams },
    Goldberger { instances: usize, sources: usize, params: GoldbergerParams },
}

impl Experiment {
    pub const NAMES: [&'static str; 5] =
        ["whitehill-model", "whitehill-difficulty", "whitehill-stability", "welinder", "goldberger"];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::WhitehillModel { .. } => "whitehill-model",
            Experiment::WhitehillDifficulty { .. } => "whitehill-difficulty",
            Experiment::WhitehillStability { .. } => "whitehill-stability",
            Experiment::Welinder { .. } => "welinder",
            Experiment::Goldberger { .. } => "goldberger",
        }
    }

    /// Default configuration of the named experiment with `sources` labelers.
    pub fn with_defaults(name: &str, sources: usize) -> Result<Self> {
        Ok(match name {
            "whitehill-model" => Experiment::WhitehillModel { instances: 200, sources },
            "whitehill-difficulty" => Experiment::WhitehillDifficulty {
                instances: 1000,
                sources,
                bad_labelers: default_bad_labelers(sources),
            },
            "whitehill-stability" => Experiment::WhitehillStability { instances: 2000, sources },
            "welinder" => Experiment::Welinder {
                instances: 500,
                sources,
                params: WelinderParams::default(),
            },
            "goldberger" => Experiment::Goldberger {
                instances: 200,
                sources,
                params: GoldbergerParams::default(),
            },
            other => return Err(Error::invalid(format!("unknown experiment {other:?}"))),
        })
    }

    /// Labeler counts swept by default for the named experiment.
    pub fn default_sources(name: &str) -> Result<Vec<usize>> {
        Ok(match name {
            "whitehill-model" => (2..=20).collect(),
            "whitehill-difficulty" => vec![50],
            "whitehill-stability" => vec![20],
            "welinder" => (4..=20).collect(),
            "goldberger" => (5..=9).collect(),
            other => return Err(Error::invalid(format!("unknown experiment {other:?}"))),
        })
    }

    pub fn sources(&self) -> usize {
        match *self {
            Experiment::WhitehillModel { sources, .. }
            | Experiment::WhitehillDifficulty { sources, .. }
            | Experiment::WhitehillStability { sources, .. }
            | Experiment::Welinder { sources, .. }
            | Experiment::Goldberger { sources, .. } => sources,
        }
    }

    pub fn instances(&self) -> usize {
        match *self {
            Experiment::WhitehillModel { instances, .. }
            | Experiment::WhitehillDifficulty { instances, .. }
            | Experiment::WhitehillStability { instances, .. }
            | Experiment::Welinder { instances, .. }
            | Experiment::Goldberger { instances, .. } => instances,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match self {
            Experiment::WhitehillModel { instances, sources } => {
                gen_whitehill_model(*instances, *sources, seed)
            }
            Experiment::WhitehillDifficulty { instances, sources, bad_labelers } => {
                gen_whitehill_difficulty(*instances, *sources, *bad_labelers, seed)
            }
            Experiment::WhitehillStability { instances, sources } => {
                gen_whitehill_stability(*instances, *sources, seed)
            }
            Experiment::Welinder { instances, sources, params } => {
                gen_welinder(*instances, *sources, params, seed)
            }
            Experiment::Goldberger { instances, sources, params } => {
                gen_goldberger(*instances, *sources, params, seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seed_deterministic() {
        for name in Experiment::NAMES {
            let sources = Experiment::default_sources(name).unwrap()[0];
            let e = Experiment::with_defaults(name, sources).unwrap();
            let a = e.generate(42).unwrap();
            assert_eq!(a, e.generate(42).unwrap(), "{name}");
            assert_ne!(a, e.generate(43).unwrap(), "{name}");
            assert_eq!(a.opinions.sources(), sources);
            assert_eq!(a.opinions.instances(), e.instances());
            assert_eq!(a.truth.len(), e.instances());
            assert_eq!(a.opinions.missing_count(), 0);
        }
    }

    #[test]
    fn whitehill_model_shape() {
        let d = gen_whitehill_model(17, 5, 1).unwrap();
        assert_eq!((d.opinions.sources(), d.opinions.instances(), d.opinions.classes()), (5, 17, 2));
    }

    #[test]
    fn difficulty_easy_half_is_exact() {
        let d = gen_whitehill_difficulty(200, 10, 4, 9).unwrap();
        for i in 0..10 {
            for j in 0..100 {
                assert_eq!(d.opinions.get(i, j), Some(d.truth[j]));
            }
        }
    }

    #[test]
    fn difficulty_rejects_bad_arguments() {
        assert!(gen_whitehill_difficulty(201, 10, 1, 0).is_err());
        assert!(gen_whitehill_difficulty(200, 10, 11, 0).is_err());
        assert!(gen_whitehill_difficulty(200, 10, 10, 0).is_ok());
    }

    #[test]
    fn default_bad_labeler_ratio() {
        assert_eq!(default_bad_labelers(50), 2);
        assert_eq!(default_bad_labelers(26), 1);
        assert_eq!(default_bad_labelers(12), 0);
    }

    #[test]
    fn stability_cells_beat_chance() {
        let d = gen_whitehill_stability(2000, 20, 5).unwrap();
        let mut hits = 0;
        for i in 0..20 {
            hits += d.opinions.row(i).zip(&d.truth).filter(|(a, t)| *a == Some(**t)).count();
        }
        assert!(hits as f64 / 40_000.0 > 0.5);
    }

    #[test]
    fn welinder_noiseless_annotators_agree() {
        let mut rng = rng_from_seed(3);
        let honest = Annotator { w: 1.0, tau: 0.0, sigma: 1e-12 };
        let d = gen_welinder_with(300, 0.5, &[honest; 6], &mut rng).unwrap();
        for j in 0..300 {
            let col: Vec<_> = d.opinions.column(j).collect();
            assert!(col.iter().all(|&c| c == col[0]));
        }
    }

    #[test]
    fn welinder_adversary_inverts() {
        let mut rng = rng_from_seed(4);
        let honest = Annotator { w: 1.0, tau: 0.0, sigma: 1e-12 };
        let liar = Annotator { w: -1.0, ..honest };
        let d = gen_welinder_with(500, 0.5, &[honest, liar], &mut rng).unwrap();
        for j in 0..500 {
            assert_eq!(d.opinions.get(1, j), d.opinions.get(0, j).map(|c| 1 - c));
        }
    }

    #[test]
    fn welinder_rejects_bad_params() {
        let p = WelinderParams { adversary_prob: 1.5, ..Default::default() };
        assert!(gen_welinder(10, 3, &p, 0).is_err());
        let p = WelinderParams { theta_z: 0.0, ..Default::default() };
        assert!(gen_welinder(10, 3, &p, 0).is_err());
    }

    #[test]
    fn gamma_conventions() {
        let scale = WelinderParams::default();
        let rate = WelinderParams { gamma_convention: GammaConvention::ShapeRate, ..scale };
        let mut rng = rng_from_seed(11);
        let n = 200_000;
        let m1: f64 = (0..n).map(|_| scale.sigma_distribution().sample(&mut rng)).sum::<f64>() / n as f64;
        let m2: f64 = (0..n).map(|_| rate.sigma_distribution().sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m1 - 0.45).abs() < 0.01, "{m1}");
        assert!((m2 - 5.0).abs() < 0.1, "{m2}");
    }

    #[test]
    fn goldberger_range() {
        let p = GoldbergerParams { n_classes: 5, ..Default::default() };
        let d = gen_goldberger(100, 7, &p, 8).unwrap();
        assert_eq!(d.opinions.classes(), 5);
        assert!((0..7).all(|i| d.opinions.row(i).all(|c| c.is_some_and(|c| c < 5))));
        assert!(d.truth.iter().all(|&t| t < 5));
    }

    #[test]
    fn goldberger_rejects_bad_params() {
        let p = GoldbergerParams { n_classes: 1, ..Default::default() };
        assert!(gen_goldberger(10, 3, &p, 0).is_err());
        let p = GoldbergerParams { reliability_range: (0.7, 0.4), ..Default::default() };
        assert!(gen_goldberger(10, 3, &p, 0).is_err());
    }

    #[test]
    fn unknown_experiment_name() {
        assert!(Experiment::with_defaults("glad", 3).is_err());
        assert!(Experiment::default_sources("glad").is_err());
    }
}
