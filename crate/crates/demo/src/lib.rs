//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each exported function returns a JSON string. The `*_json` functions hold
//! the logic and are what the native tests call.

use opinionrank::baselines::{dawid_skene, majority_vote, DawidSkeneConfig};
use opinionrank::io::{read_opinions, AnnotationFileSpec};
use opinionrank::simgen::{run_sweep, Experiment, Method};
use opinionrank::{OpinionMatrix, OpinionRank, Predictions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest trial count the page may request per configuration.
pub const MAX_TRIALS: u32 = 200;

#[derive(Serialize)]
struct SourceRow {
    source: usize,
    weight: f64,
    rank: usize,
    /// Fraction of this source's labels that match the hidden truth.
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct MethodAccuracy {
    method: &'static str,
    accuracy: f64,
}

#[derive(Serialize)]
struct SimulateResult {
    experiment: &'static str,
    sources: usize,
    instances: usize,
    class_id: u8,
    ranking: Vec<SourceRow>,
    methods: Vec<MethodAccuracy>,
}

#[derive(Serialize)]
struct ClassWeights {
    class: String,
    sources: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct AggregateResult {
    classes: Vec<String>,
    task: String,
    predictions: Vec<(String, String)>,
    rankings: Vec<ClassWeights>,
}

#[derive(Serialize)]
struct CurvePoint {
    sources: usize,
    opinionrank: f64,
    majority_vote: f64,
    opinionrank_stderr: f64,
    majority_vote_stderr: f64,
}

fn config(top_n: u32) -> OpinionRank {
    if top_n == 0 {
        OpinionRank::new()
    } else {
        OpinionRank::new().with_top_n(top_n as usize)
    }
}

fn source_accuracy(m: &OpinionMatrix, truth: &[u8], i: usize) -> Option<f64> {
    let labeled = m.labeled_count(i);
    (labeled > 0).then(|| {
        m.row(i).zip(truth).filter(|(a, t)| *a == Some(**t)).count() as f64 / labeled as f64
    })
}

/// Generates one dataset, ranks its sources and scores every method on it.
/// `top_n = 0` keeps every source.
pub fn simulate_and_rank_json(experiment: &str, sources: u32, seed: u32, top_n: u32) -> Result<String, String> {
    let e = Experiment::with_defaults(experiment, sources as usize).map_err(|e| e.to_string())?;
    let data = e.generate(u64::from(seed)).map_err(|e| e.to_string())?;
    let m = &data.opinions;
    let out = config(top_n).run(m).map_err(|e| e.to_string())?;
    let cr = &out.rankings[0];
    let mut rank = vec![0; cr.ranking.len()];
    for (pos, i) in cr.ranking.order().into_iter().enumerate() {
        rank[i] = pos + 1;
    }
    let ranking = (0..m.sources())
        .map(|i| SourceRow {
            source: i,
            weight: cr.ranking.weights()[i],
            rank: rank[i],
            accuracy: source_accuracy(m, &data.truth, i),
        })
        .collect();
    let or = match out.decide() {
        Predictions::Labels(l) => data.accuracy(&l),
        Predictions::Multilabel(_) => unreachable!("simulations are single-label"),
    };
    let ds = dawid_skene(m, &DawidSkeneConfig::default()).map_err(|e| e.to_string())?.0;
    let result = SimulateResult {
        experiment: e.name(),
        sources: m.sources(),
        instances: m.instances(),
        class_id: cr.class_id,
        ranking,
        methods: vec![
            MethodAccuracy { method: "opinionrank", accuracy: or },
            MethodAccuracy { method: "majority-vote", accuracy: data.accuracy(&majority_vote(m).labels) },
            MethodAccuracy { method: "dawid-skene", accuracy: data.accuracy(&ds.labels) },
        ],
    };
    Ok(serde_json::to_string(&result).expect("serializable"))
}

/// Aggregates annotation CSV text in the same format the CLI reads.
pub fn aggregate_csv_json(text: &str, top_n: u32) -> Result<String, String> {
    let set = read_opinions(text.as_bytes(), &AnnotationFileSpec::default()).map_err(|e| e.to_string())?;
    let out = config(top_n).run(&set.opinions).map_err(|e| e.to_string())?;
    let token = |c: u8| set.alphabet.token(c).to_owned();
    let predictions = match out.decide() {
        Predictions::Labels(l) => l.into_iter().map(token).collect::<Vec<_>>(),
        Predictions::Multilabel(v) => v
            .iter()
            .map(|row| {
                row.iter().enumerate().filter(|(_, &on)| on).map(|(c, _)| token(c as u8)).collect::<Vec<_>>().join(";")
            })
            .collect(),
    };
    let rankings = out
        .rankings
        .iter()
        .map(|cr| ClassWeights {
            class: token(cr.class_id),
            sources: cr
                .ranking
                .order()
                .into_iter()
                .map(|i| (set.source_ids[i].clone(), cr.ranking.weights()[i]))
                .collect(),
        })
        .collect();
    let result = AggregateResult {
        classes: set.alphabet.tokens().to_vec(),
        task: format!("{:?}", out.scores.task()).to_lowercase(),
        predictions: set.instance_ids.iter().cloned().zip(predictions).collect(),
        rankings,
    };
    Ok(serde_json::to_string(&result).expect("serializable"))
}

/// Mean accuracy of OpinionRank and majority vote over the experiment's
/// default labeler sweep.
pub fn accuracy_curve_json(experiment: &str, trials: u32, seed: u32) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be between 1 and {MAX_TRIALS}"));
    }
    let sources = Experiment::default_sources(experiment).map_err(|e| e.to_string())?;
    let experiments = sources
        .iter()
        .map(|&s| Experiment::with_defaults(experiment, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let methods = [Method::OpinionRank(OpinionRank::new()), Method::MajorityVote];
    let report = run_sweep(&experiments, &methods, trials as usize, u64::from(seed)).map_err(|e| e.to_string())?;
    let points: Vec<CurvePoint> = report
        .configurations
        .iter()
        .map(|c| {
            let (or, mv) = (&c.methods[0], &c.methods[1]);
            CurvePoint {
                sources: c.experiment.sources(),
                opinionrank: or.mean_accuracy,
                majority_vote: mv.mean_accuracy,
                opinionrank_stderr: or.stderr,
                majority_vote_stderr: mv.stderr,
            }
        })
        .collect();
    Ok(serde_json::to_string(&points).expect("serializable"))
}

#[wasm_bindgen]
pub fn simulate_and_rank(experiment: &str, sources: u32, seed: u32, top_n: u32) -> Result<String, JsError> {
    simulate_and_rank_json(experiment, sources, seed, top_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn aggregate_csv(text: &str, top_n: u32) -> Result<String, JsError> {
    aggregate_csv_json(text, top_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn accuracy_curve(experiment: &str, trials: u32, seed: u32) -> Result<String, JsError> {
    accuracy_curve_json(experiment, trials, seed).map_err(|e| JsError::new(&e))
}
