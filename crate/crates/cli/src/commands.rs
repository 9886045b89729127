use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use opinionrank::baselines::{dawid_skene, majority_vote, Aggregate, DawidSkeneConfig};
use opinionrank::bench::{loglog_slope, run_grid};
use opinionrank::io::{
    format_real, read_labels_path, read_opinions_path, score_labels, write_outputs, write_predictions,
    AnnotationFileSpec, AnnotationSet,
};
use opinionrank::simgen::{run_sweep, Experiment, Method, TrialReport};
use opinionrank::{Predictions, Task};

use crate::{parse_task, AggregateArgs, BenchArgs, CmdResult, Failure, ScoreArgs, SimulateArgs};

const PAPER_SCALE_TRIALS: usize = 50_000;

fn write_file(path: &Path, contents: &str) -> CmdResult {
    let wrap = |source| Failure::Run(opinionrank::Error::Io { path: path.to_owned(), source });
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    fs::write(path, contents).map_err(wrap)
}

pub fn aggregate(a: &AggregateArgs) -> CmdResult {
    let spec = AnnotationFileSpec { missing_token: a.missing_token.clone(), alphabet: a.classes.clone() };
    let set = read_opinions_path(&a.file, &spec)?;
    let (s, n, k) = (set.opinions.sources(), set.opinions.instances(), set.opinions.classes());
    if let Some(top) = a.rank.top_n {
        if top as usize > s {
            return Err(Failure::Usage(format!("--top-n {top} exceeds the {s} sources in the input")));
        }
    }
    let task = parse_task(&a.task);
    if task == Some(Task::Binary) && k != 2 {
        return Err(Failure::Usage(format!("--task binary needs exactly 2 classes, found {k}")));
    }
    let mut config = a.rank.config();
    if let Some(t) = task {
        config = config.with_task(t);
    }
    let output = config.run(&set.opinions)?;
    let predictions = output.decide();
    let paths = write_outputs(&a.out.out_dir, &set, &output, &predictions)?;

    println!(
        "{n} instances, {s} sources, classes [{}], task {}",
        set.alphabet.tokens().join(", "),
        format!("{:?}", output.scores.task()).to_lowercase()
    );
    for cr in &output.rankings {
        let top: Vec<String> = cr
            .ranking
            .order()
            .into_iter()
            .take(5)
            .map(|i| format!("{} {:.4}", set.source_ids[i], cr.ranking.weights()[i]))
            .collect();
        println!("class {}: top sources {}", set.alphabet.token(cr.class_id), top.join(", "));
    }
    println!("wrote {}", paths.scores.display());
    println!("wrote {}", paths.predictions.display());
    println!("wrote {}", paths.rankings.display());

    if a.baselines {
        let mv = majority_vote(&set.opinions);
        write_baseline(&a.out.out_dir, "majority-vote", &set, mv)?;
        let (ds, _) = dawid_skene(&set.opinions, &DawidSkeneConfig::default())?;
        write_baseline(&a.out.out_dir, "dawid-skene", &set, ds)?;
    }
    Ok(())
}

fn write_baseline(dir: &Path, name: &str, set: &AnnotationSet, agg: Aggregate) -> CmdResult {
    if !agg.unvoted.is_empty() {
        eprintln!(
            "warning: {name}: {} instances have no opinions and were assigned {:?}",
            agg.unvoted.len(),
            set.alphabet.token(0)
        );
    }
    let path = dir.join(format!("predictions-{name}.csv"));
    write_predictions(&path, set, &Predictions::Labels(agg.labels))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let name = a.experiment.as_str();
    let difficulty = name == "whitehill-difficulty";
    let sources = match &a.sources {
        Some(s) => s.clone(),
        None => Experiment::default_sources(name)?,
    };
    if sources.is_empty() || sources.contains(&0) {
        return Err(Failure::Usage("--sources needs positive labeler counts".into()));
    }
    if a.n_bad.is_some() && !difficulty {
        return Err(Failure::Usage("--n-bad only applies to whitehill-difficulty".into()));
    }
    if let Some(nb) = a.n_bad {
        if let Some(&s) = sources.iter().find(|&&s| nb > s) {
            return Err(Failure::Usage(format!("--n-bad {nb} exceeds {s} sources")));
        }
    }
    if a.instances == Some(0) {
        return Err(Failure::Usage("--instances must be positive".into()));
    }
    let mut methods = Vec::new();
    for m in &a.methods {
        let method = match m.as_str() {
            "opinionrank" => Method::OpinionRank(a.rank.config()),
            other => Method::parse(other).map_err(|e| Failure::Usage(e.to_string()))?,
        };
        if methods.iter().any(|x: &Method| x.name() == method.name()) {
            return Err(Failure::Usage(format!("method {m:?} listed twice")));
        }
        methods.push(method);
    }
    if let Some(top) = a.rank.top_n {
        let min = *sources.iter().min().expect("non-empty");
        if top as usize > min {
            return Err(Failure::Usage(format!("--top-n {top} exceeds the smallest source count {min}")));
        }
    }
    let trials = if a.paper_scale {
        eprintln!("warning: running {PAPER_SCALE_TRIALS} trials per configuration; this can take hours");
        PAPER_SCALE_TRIALS
    } else {
        a.trials as usize
    };

    let mut experiments = Vec::with_capacity(sources.len());
    for &s in &sources {
        let mut e = Experiment::with_defaults(name, s)?;
        match &mut e {
            Experiment::WhitehillModel { instances, .. }
            | Experiment::WhitehillStability { instances, .. }
            | Experiment::Welinder { instances, .. }
            | Experiment::Goldberger { instances, .. } => {
                *instances = a.instances.unwrap_or(*instances);
            }
            Experiment::WhitehillDifficulty { instances, bad_labelers, .. } => {
                *instances = a.instances.unwrap_or(*instances);
                *bad_labelers = a.n_bad.unwrap_or(*bad_labelers);
            }
        }
        experiments.push(e);
    }

    let report = run_sweep(&experiments, &methods, trials, a.seed)?;
    print!("{}", render_table(&report, difficulty));
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let path = a.out.out_dir.join(format!("{name}.json"));
    write_file(&path, &json)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// One row per configuration and method, in the fixed column order
/// s, n, method, metric, mean, std, stderr.
pub fn render_table(report: &TrialReport, as_error: bool) -> String {
    let metric = if as_error { "error" } else { "accuracy" };
    let mut out = format!(
        "{:>4} {:>7}  {:<14} {:<8} {:>9} {:>9} {:>9}\n",
        "s", "n", "method", "metric", "mean", "std", "stderr"
    );
    for c in &report.configurations {
        for m in &c.methods {
            let mean = if as_error { m.mean_error() } else { m.mean_accuracy };
            out += &format!(
                "{:>4} {:>7}  {:<14} {:<8} {:>8.3}% {:>8.3}% {:>8.3}%\n",
                c.experiment.sources(),
                c.experiment.instances(),
                m.method,
                metric,
                100.0 * mean,
                100.0 * m.std_accuracy,
                100.0 * m.stderr
            );
        }
    }
    out
}

pub fn score(a: &ScoreArgs) -> CmdResult {
    let predictions = read_labels_path(&a.predictions)?;
    let truth = read_labels_path(&a.truth)?;
    let summary = score_labels(&predictions, &truth)?;
    println!("accuracy {} ({}/{} correct)", format_real(summary.accuracy), summary.correct, summary.total);
    let json = serde_json::json!({
        "predictions": a.predictions,
        "truth": a.truth,
        "correct": summary.correct,
        "total": summary.total,
        "accuracy": summary.accuracy,
    });
    let path = a.out.out_dir.join("score.json");
    write_file(&path, &(serde_json::to_string_pretty(&json).expect("json") + "\n"))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    if a.sources.is_empty() || a.instances.is_empty() {
        return Err(Failure::Usage("source and instance grids must be non-empty".into()));
    }
    if a.sources.contains(&0) || a.instances.contains(&0) {
        return Err(Failure::Usage("grid values must be positive".into()));
    }
    let cells = run_grid(&a.sources, &a.instances, a.repetitions as usize, a.seed)?;
    let mut csv = String::from("sources,instances,repetitions,mean_secs,min_secs\n");
    println!("{:>6} {:>9} {:>6} {:>12} {:>12}", "s", "n", "reps", "mean ms", "min ms");
    for c in &cells {
        println!(
            "{:>6} {:>9} {:>6} {:>12.4} {:>12.4}",
            c.sources,
            c.instances,
            c.repetitions,
            c.mean_secs * 1e3,
            c.min_secs * 1e3
        );
        csv += &format!(
            "{},{},{},{},{}\n",
            c.sources,
            c.instances,
            c.repetitions,
            format_real(c.mean_secs),
            format_real(c.min_secs)
        );
    }
    let mut by_s: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_n: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for c in &cells {
        by_s.entry(c.sources).or_default().push((c.instances as f64, c.mean_secs));
        by_n.entry(c.instances).or_default().push((c.sources as f64, c.mean_secs));
    }
    for (s, pts) in &by_s {
        if let Ok(slope) = loglog_slope(pts) {
            println!("s={s}: time ~ n^{slope:.3}");
        }
    }
    for (n, pts) in &by_n {
        if let Ok(slope) = loglog_slope(pts) {
            println!("n={n}: time ~ s^{slope:.3}");
        }
    }
    let path = a.out.out_dir.join("bench.csv");
    write_file(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}
