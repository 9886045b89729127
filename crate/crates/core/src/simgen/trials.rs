use serde::Serialize;

use super::{accuracy, Experiment};
use crate::baselines::{dawid_skene, majority_vote, DawidSkeneConfig};
use crate::opinions::{ClassId, OpinionMatrix};
use crate::rank::OpinionRank;
use crate::{Error, Result};

/// An aggregator evaluated by the trial runner.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    OpinionRank(OpinionRank),
    MajorityVote,
    DawidSkene(DawidSkeneConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::OpinionRank(_) => "opinionrank",
            Method::MajorityVote => "majority-vote",
            Method::DawidSkene(_) => "dawid-skene",
        }
    }

    /// Parses `opinionrank`, `majority-vote` (or `majority`), `dawid-skene`
    /// (or `ds`) with default settings.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "opinionrank" => Ok(Method::OpinionRank(OpinionRank::default())),
            "majority-vote" | "majority" => Ok(Method::MajorityVote),
            "dawid-skene" | "ds" => Ok(Method::DawidSkene(DawidSkeneConfig::default())),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }

    pub fn predict(&self, opinions: &OpinionMatrix) -> Result<Vec<ClassId>> {
        match self {
            Method::OpinionRank(cfg) => cfg.predict(opinions),
            Method::MajorityVote => Ok(majority_vote(opinions).labels),
            Method::DawidSkene(cfg) => Ok(dawid_skene(opinions, cfg)?.0.labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: String,
    pub trials: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation of the per-trial accuracies.
    pub std_accuracy: f64,
    pub stderr: f64,
    #[serde(skip)]
    pub accuracies: Vec<f64>,
}

impl MethodStats {
    pub fn mean_error(&self) -> f64 {
        1.0 - self.mean_accuracy
    }
}

/// Mean, population standard deviation and standard error of `accuracies`
/// (given in trial order).
pub fn summarize(method: &str, accuracies: Vec<f64>) -> MethodStats {
    let trials = accuracies.len();
    let t = trials as f64;
    let mean = accuracies.iter().sum::<f64>() / t;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / t;
    let std = var.sqrt();
    MethodStats {
        method: method.to_owned(),
        trials,
        mean_accuracy: mean.clamp(0.0, 1.0),
        std_accuracy: std,
        stderr: std / t.sqrt(),
        accuracies,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigurationStats {
    pub experiment: Experiment,
    pub methods: Vec<MethodStats>,
}

impl ConfigurationStats {
    pub fn method(&self, name: &str) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Aggregate accuracy over seeded repetitions, broken down by configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trials: usize,
    pub base_seed: u64,
    pub configurations: Vec<ConfigurationStats>,
}

impl TrialReport {
    /// Stats of `method` in the configuration with `sources` labelers.
    pub fn get(&self, sources: usize, method: &str) -> Option<&MethodStats> {
        self.configurations
            .iter()
            .find(|c| c.experiment.sources() == sources)
            .and_then(|c| c.method(method))
    }
}

/// Runs `trials` repetitions of one configuration. Trial `t` generates its
/// data from seed `base_seed + t`.
pub fn run_trials(
    experiment: &Experiment,
    methods: &[Method],
    trials: usize,
    base_seed: u64,
) -> Result<TrialReport> {
    Ok(TrialReport {
        trials,
        base_seed,
        configurations: vec![run_configuration(experiment, methods, trials, base_seed)?],
    })
}

/// [`run_trials`] over several configurations with the same seeds.
pub fn run_sweep(
    experiments: &[Experiment],
    methods: &[Method],
    trials: usize,
    base_seed: u64,
) -> Result<TrialReport> {
    let configurations = experiments
        .iter()
        .map(|e| run_configuration(e, methods, trials, base_seed))
        .collect::<Result<_>>()?;
    Ok(TrialReport { trials, base_seed, configurations })
}

fn run_configuration(
    experiment: &Experiment,
    methods: &[Method],
    trials: usize,
    base_seed: u64,
) -> Result<ConfigurationStats> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }
    let mut acc = vec![Vec::with_capacity(trials); methods.len()];
    for t in 0..trials {
        let tag = |e: Error| Error::Trial { trial: t, source: Box::new(e) };
        let data = experiment.generate(base_seed.wrapping_add(t as u64)).map_err(tag)?;
        for (m, method) in methods.iter().enumerate() {
            let pred = method.predict(&data.opinions).map_err(tag)?;
            acc[m].push(accuracy(&pred, &data.truth));
        }
    }
    Ok(ConfigurationStats {
        experiment: experiment.clone(),
        methods: methods.iter().zip(acc).map(|(m, a)| summarize(m.name(), a)).collect(),
    })
}
