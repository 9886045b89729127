#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use opinionrank::baselines::{dawid_skene, majority_vote, DawidSkeneConfig};
use opinionrank::rank::{
    build_membership_matrix, count_agreements, dominant_eigenvector, dominant_eigenvector_from,
    to_stochastic, DEFAULT_POWER,
};
use opinionrank::simgen::rng_from_seed;
use opinionrank::{ClassId, CorroborationMatrix, OpinionMatrix, OpinionRank};
use rand::Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn random_opinions(s: usize, n: usize, k: usize, missing: f64, seed: u64) -> OpinionMatrix {
    let mut rng = rng_from_seed(seed);
    OpinionMatrix::from_fn(s, n, k, |_, _| {
        (!rng.random_bool(missing)).then(|| rng.random_range(0..k) as ClassId)
    })
    .unwrap()
}

/// Opinions with some signal: sources copy a hidden truth with varying accuracy.
pub fn noisy_opinions(s: usize, n: usize, k: usize, missing: f64, seed: u64) -> OpinionMatrix {
    let mut rng = rng_from_seed(seed);
    let truth: Vec<ClassId> = (0..n).map(|_| rng.random_range(0..k) as ClassId).collect();
    let acc: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..1.0)).collect();
    OpinionMatrix::from_fn(s, n, k, |i, j| {
        if rng.random_bool(missing) {
            None
        } else if rng.random_bool(acc[i]) {
            Some(truth[j])
        } else {
            Some(rng.random_range(0..k) as ClassId)
        }
    })
    .unwrap()
}

fn corroborations(m: &OpinionMatrix) -> Vec<CorroborationMatrix> {
    (0..m.classes())
        .map(|c| to_stochastic(&count_agreements(&build_membership_matrix(m, c as ClassId).unwrap())))
        .collect()
}

pub fn row_stochastic(m: &OpinionMatrix) -> Check {
    for (c, corr) in corroborations(m).iter().enumerate() {
        let s = corr.size();
        for i in 0..s {
            let row = corr.row(i);
            let sum: f64 = row.iter().sum();
            ensure!((sum - 1.0).abs() <= 1e-12, "class {c} row {i} sums to {sum}");
            let upper_ok = |p: f64| if s == 1 { p <= 1.0 } else { p < 1.0 };
            ensure!(row.iter().all(|&p| p > 0.0 && upper_ok(p)), "class {c} row {i} leaves (0,1): {row:?}");
        }
    }
    Ok(())
}

pub fn fixed_point(m: &OpinionMatrix) -> Check {
    for corr in corroborations(m) {
        let v = dominant_eigenvector(&corr, DEFAULT_POWER).map_err(|e| e.to_string())?;
        let r = corr.stationary_residual(v.weights());
        ensure!(r < 1e-10, "residual {r:e}");
        let sum: f64 = v.weights().iter().sum();
        ensure!((sum - 1.0).abs() < 1e-9, "weights sum to {sum}");
        ensure!(v.weights().iter().all(|&w| w > 0.0), "non-positive weight");
    }
    Ok(())
}

pub fn start_independence(m: &OpinionMatrix) -> Check {
    for corr in corroborations(m) {
        let base = dominant_eigenvector_from(&corr, DEFAULT_POWER, 0).map_err(|e| e.to_string())?;
        for start in 1..corr.size() {
            let v = dominant_eigenvector_from(&corr, DEFAULT_POWER, start).map_err(|e| e.to_string())?;
            let d = max_diff(base.weights(), v.weights());
            ensure!(d < 1e-8, "start {start} differs by {d:e}");
        }
    }
    Ok(())
}

/// Row 0 of `C^(2^6)` by explicit repeated squaring.
pub fn dense_power_row(corr: &CorroborationMatrix) -> Vec<f64> {
    let s = corr.size();
    let mut a: Vec<Vec<f64>> = (0..s).map(|i| corr.row(i).to_vec()).collect();
    for _ in 0..6 {
        let mut b = vec![vec![0.0; s]; s];
        for i in 0..s {
            for j in 0..s {
                b[i][j] = (0..s).map(|l| a[i][l] * a[l][j]).sum();
            }
        }
        a = b;
    }
    a.swap_remove(0)
}

pub fn dense_oracle(m: &OpinionMatrix) -> Check {
    ensure!(m.sources() <= 6, "oracle limited to s <= 6");
    for corr in corroborations(m) {
        let v = dominant_eigenvector(&corr, DEFAULT_POWER).map_err(|e| e.to_string())?;
        let d = max_diff(v.weights(), &dense_power_row(&corr));
        ensure!(d < 1e-8, "power iteration and dense C^64 differ by {d:e}");
    }
    Ok(())
}

// Power iteration starts from e1, which relabeling moves, so agreement is
// bounded by the convergence tolerance rather than by rounding.
pub fn permutation_equivariance(m: &OpinionMatrix, order: &[usize]) -> Check {
    let p = m.reorder_sources(order).unwrap();
    let a = OpinionRank::new().run(m).map_err(|e| e.to_string())?;
    let b = OpinionRank::new().run(&p).map_err(|e| e.to_string())?;
    for (ra, rb) in a.rankings.iter().zip(&b.rankings) {
        for (new, &old) in order.iter().enumerate() {
            let d = (rb.ranking.weights()[new] - ra.ranking.weights()[old]).abs();
            ensure!(d < 1e-9, "weight of source {old} moved by {d:e}");
        }
    }
    for r in 0..a.scores.rows() {
        let d = max_diff(a.scores.row(r), b.scores.row(r));
        ensure!(d < 1e-9, "scores changed by {d:e} under relabeling");
    }
    Ok(())
}

pub fn unanimity(labels: &[ClassId], s: usize, k: usize) -> Check {
    let m = OpinionMatrix::from_fn(s, labels.len(), k, |_, j| Some(labels[j])).unwrap();
    let out = OpinionRank::new().run(&m).map_err(|e| e.to_string())?;
    for cr in &out.rankings {
        let d = cr.ranking.weights().iter().map(|w| (w - 1.0 / s as f64).abs()).fold(0.0, f64::max);
        ensure!(d < 1e-9, "ranking not uniform (off by {d:e})");
    }
    let decided = out.decide();
    let mv = majority_vote(&m).labels;
    ensure!(decided.labels() == Some(&mv[..]), "decisions differ from majority vote");
    ensure!(mv == labels, "majority vote differs from the common labels");
    Ok(())
}

pub fn missing_monotonicity(m: &OpinionMatrix, source: usize, instance: usize) -> Check {
    if m.get(source, instance).is_none() {
        return Ok(());
    }
    let erased = m.with_cell(source, instance, None).unwrap();
    for c in 0..m.classes() {
        let before = count_agreements(&build_membership_matrix(m, c as ClassId).unwrap());
        let after = count_agreements(&build_membership_matrix(&erased, c as ClassId).unwrap());
        ensure!(
            after.get(source, source) <= before.get(source, source),
            "class {c}: self-agreement grew from {} to {}",
            before.get(source, source),
            after.get(source, source)
        );
        ensure!(after.get(source, source) + 1 == before.get(source, source), "diagonal must drop by one");
    }
    Ok(())
}

pub fn scores_bounded_and_deterministic(m: &OpinionMatrix, top_n: usize) -> Check {
    let cfg = OpinionRank::new().with_top_n(top_n);
    let a = cfg.run(m).map_err(|e| e.to_string())?;
    let b = cfg.run(m).map_err(|e| e.to_string())?;
    for r in 0..a.scores.rows() {
        ensure!(a.scores.row(r).iter().all(|&x| (0.0..=1.0).contains(&x)), "score out of [0,1]");
        let bits_a: Vec<u64> = a.scores.row(r).iter().map(|x| x.to_bits()).collect();
        let bits_b: Vec<u64> = b.scores.row(r).iter().map(|x| x.to_bits()).collect();
        ensure!(bits_a == bits_b, "non-deterministic scores");
    }
    ensure!(a == b, "non-deterministic output");
    Ok(())
}

pub fn em_monotone(m: &OpinionMatrix) -> Check {
    let (_, model) = dawid_skene(m, &DawidSkeneConfig::default()).map_err(|e| e.to_string())?;
    for w in model.objective.windows(2) {
        ensure!(w[1] >= w[0] - 1e-9, "penalized log-likelihood fell from {} to {}", w[0], w[1]);
    }
    ensure!((model.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9, "priors not normalized");
    for i in 0..model.sources() {
        for row in model.confusion(i).chunks(model.classes()) {
            ensure!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9, "confusion row not normalized");
        }
    }
    for j in 0..m.instances() {
        ensure!((model.posterior(j).iter().sum::<f64>() - 1.0).abs() < 1e-9, "posterior not normalized");
    }
    Ok(())
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `|observed - expected| <= 4 * sqrt(p(1-p)/n)`.
pub fn within_4se_bernoulli(hits: usize, n: usize, p: f64) -> Check {
    let freq = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    ensure!((freq - p).abs() <= 4.0 * se, "frequency {freq:.5} vs expected {p:.5} (4 SE = {:.5})", 4.0 * se);
    Ok(())
}

pub const DISTRIBUTION_SAMPLES: usize = 1_000_000;

/// Fixed `alpha = beta = 1`: every cell is correct with probability sigmoid(1).
pub fn whitehill_cell_accuracy(seed: u64) -> Check {
    use opinionrank::simgen::{gen_whitehill_labels, WhitehillParams};
    let params = WhitehillParams::new(vec![1.0; 1000], vec![1.0; 1000]).unwrap();
    let mut rng = rng_from_seed(seed);
    let d = gen_whitehill_labels(&params, &mut rng);
    let mut hits = 0;
    for i in 0..1000 {
        hits += d.opinions.row(i).zip(&d.truth).filter(|(a, t)| *a == Some(**t)).count();
    }
    let p = 1.0 / (1.0 + (-1.0f64).exp());
    within_4se_bernoulli(hits, DISTRIBUTION_SAMPLES, p)?;
    let freq = hits as f64 / DISTRIBUTION_SAMPLES as f64;
    ensure!((freq - 0.7311).abs() <= 0.0015, "frequency {freq} outside 0.7311 ± 0.0015");
    Ok(())
}

/// Noise scales follow Gamma(shape 1.5, scale 0.3): mean 0.45, sd sqrt(1.5) * 0.3.
pub fn welinder_sigma_mean(seed: u64) -> Check {
    use opinionrank::simgen::WelinderParams;
    let params = WelinderParams::default();
    let mut rng = rng_from_seed(seed);
    let annotators = params.sample_annotators(DISTRIBUTION_SAMPLES, &mut rng).map_err(|e| e.to_string())?;
    let mean = annotators.iter().map(|a| a.sigma).sum::<f64>() / DISTRIBUTION_SAMPLES as f64;
    let se = 1.5f64.sqrt() * 0.3 / (DISTRIBUTION_SAMPLES as f64).sqrt();
    ensure!((mean - 0.45).abs() <= 4.0 * se, "sigma mean {mean:.5} vs 0.45 (4 SE = {:.5})", 4.0 * se);
    let adversaries = annotators.iter().filter(|a| a.w < 0.0).count();
    within_4se_bernoulli(adversaries, DISTRIBUTION_SAMPLES, params.adversary_prob)
}

/// Raw expert opinions are correct with probability p. After obfuscation with
/// three classes the label survives with probability E[max U] = 11/18, and a
/// wrong label is rotated onto the truth with probability 7/36.
pub fn goldberger_frequencies(seed: u64) -> Check {
    use opinionrank::simgen::{obfuscate, sample_expert_opinion};
    let p = 0.55;
    let mut rng = rng_from_seed(seed);
    let mut raw_hits = 0;
    let mut observed_hits = 0;
    for t in 0..DISTRIBUTION_SAMPLES {
        let truth = (t % 3) as ClassId;
        let y = sample_expert_opinion(truth, p, 3, &mut rng);
        raw_hits += usize::from(y == truth);
        observed_hits += usize::from(obfuscate(y, 3, &mut rng) == truth);
    }
    within_4se_bernoulli(raw_hits, DISTRIBUTION_SAMPLES, p)?;
    within_4se_bernoulli(observed_hits, DISTRIBUTION_SAMPLES, p * 11.0 / 18.0 + (1.0 - p) * 7.0 / 36.0)
}

/// Mean accuracy of the Bayes-optimal decision on the whitehill-model data
/// of trials `base_seed..base_seed + trials`, given the true `alpha` and `beta`.
/// No aggregator that sees only the labels can beat this in expectation.
pub fn whitehill_bayes_accuracy(instances: usize, sources: usize, trials: usize, base_seed: u64) -> f64 {
    use opinionrank::simgen::{gen_whitehill_labels, WhitehillParams};
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = rng_from_seed(base_seed + t as u64);
        let params = WhitehillParams::sample_model(instances, sources, &mut rng).unwrap();
        let d = gen_whitehill_labels(&params, &mut rng);
        let mut correct = 0.0;
        for j in 0..instances {
            // log P(labels | y=1) - log P(labels | y=0)
            let llr: f64 = (0..sources)
                .map(|i| {
                    let logit = params.alpha[i] * params.beta[j];
                    if d.opinions.get(i, j) == Some(1) { logit } else { -logit }
                })
                .sum();
            correct += match llr.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => f64::from(u8::from(d.truth[j] == 1)),
                Some(std::cmp::Ordering::Less) => f64::from(u8::from(d.truth[j] == 0)),
                _ => 0.5,
            };
        }
        total += correct / instances as f64;
    }
    total / trials as f64
}

/// Exact majority-vote error on the difficulty experiment: half the
/// instances are easy, and on hard ones the number of wrong labels is
/// Bin(good, 1 - p_good) + Bin(bad, 1 - p_bad). Ties go to class 0, which is
/// wrong for half the instances.
pub fn difficulty_majority_error(sources: usize, bad: usize) -> f64 {
    use opinionrank::simgen::{BAD_LABELER_ACCURACY, GOOD_LABELER_ACCURACY};
    fn binomial(n: usize, q: f64) -> Vec<f64> {
        let mut pmf = vec![1.0];
        for _ in 0..n {
            let mut next = vec![0.0; pmf.len() + 1];
            for (k, p) in pmf.iter().enumerate() {
                next[k] += p * (1.0 - q);
                next[k + 1] += p * q;
            }
            pmf = next;
        }
        pmf
    }
    let good = binomial(sources - bad, 1.0 - GOOD_LABELER_ACCURACY);
    let badp = binomial(bad, 1.0 - BAD_LABELER_ACCURACY);
    let mut wrong = vec![0.0; sources + 1];
    for (a, pa) in good.iter().enumerate() {
        for (b, pb) in badp.iter().enumerate() {
            wrong[a + b] += pa * pb;
        }
    }
    let hard_error: f64 = wrong
        .iter()
        .enumerate()
        .map(|(w, p)| match (2 * w).cmp(&sources) {
            std::cmp::Ordering::Greater => *p,
            std::cmp::Ordering::Equal => 0.5 * p,
            std::cmp::Ordering::Less => 0.0,
        })
        .sum();
    0.5 * hard_error
}
