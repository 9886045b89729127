//! Reference aggregators: plurality vote and Dawid–Skene EM.

use serde::{Deserialize, Serialize};

use crate::opinions::{ClassId, OpinionMatrix};
use crate::{Error, Result};

/// Additive smoothing applied to every count in the Dawid–Skene M-step.
pub const DS_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub labels: Vec<ClassId>,
    /// Instances without a single vote. They are assigned class 0.
    pub unvoted: Vec<usize>,
}

/// Plurality vote per instance, ties to the lowest class.
pub fn majority_vote(opinions: &OpinionMatrix) -> Aggregate {
    let k = opinions.classes();
    let n = opinions.instances();
    let votes = vote_counts(opinions);
    let mut labels = Vec::with_capacity(n);
    let mut unvoted = Vec::new();
    for (j, row) in votes.chunks(k).enumerate() {
        let mut best = 0;
        for c in 1..k {
            if row[c] > row[best] {
                best = c;
            }
        }
        if row[best] == 0 {
            unvoted.push(j);
        }
        labels.push(best as ClassId);
    }
    Aggregate { labels, unvoted }
}

/// Instance-major `n × k` vote counts.
fn vote_counts(opinions: &OpinionMatrix) -> Vec<u32> {
    let k = opinions.classes();
    let mut votes = vec![0u32; opinions.instances() * k];
    for i in 0..opinions.sources() {
        for (j, c) in opinions.row(i).enumerate() {
            if let Some(c) = c {
                votes[j * k + c as usize] += 1;
            }
        }
    }
    votes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneConfig {
    pub max_iter: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for DawidSkeneConfig {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-7 }
    }
}

/// Fitted Dawid–Skene parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DawidSkeneModel {
    sources: usize,
    classes: usize,
    /// `sources × k × k`; entry `[i][a][b]` is P(source i says b | truth a).
    confusion: Vec<f64>,
    pub priors: Vec<f64>,
    /// `n × k` class posteriors.
    posteriors: Vec<f64>,
    /// Observed-data log-likelihood after every E-step.
    pub log_likelihood: Vec<f64>,
    /// The quantity EM maximizes: the log-likelihood plus the log density of
    /// the symmetric Dirichlet prior implied by the additive smoothing.
    pub objective: Vec<f64>,
}

impl DawidSkeneModel {
    pub fn confusion(&self, source: usize) -> &[f64] {
        let kk = self.classes * self.classes;
        &self.confusion[source * kk..(source + 1) * kk]
    }

    pub fn posterior(&self, instance: usize) -> &[f64] {
        &self.posteriors[instance * self.classes..(instance + 1) * self.classes]
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn iterations(&self) -> usize {
        self.log_likelihood.len()
    }
}

/// Dawid–Skene EM, initialized from soft majority-vote fractions.
///
/// Missing labels contribute no likelihood terms. Instances without any
/// vote are labeled 0 and reported in [`Aggregate::unvoted`].
pub fn dawid_skene(
    opinions: &OpinionMatrix,
    config: &DawidSkeneConfig,
) -> Result<(Aggregate, DawidSkeneModel)> {
    if config.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !(config.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (s, n, k) = (opinions.sources(), opinions.instances(), opinions.classes());
    let kk = k * k;

    let votes = vote_counts(opinions);
    let mut post = vec![0.0; n * k];
    let mut unvoted = Vec::new();
    for j in 0..n {
        let row = &votes[j * k..(j + 1) * k];
        let total: u32 = row.iter().sum();
        if total == 0 {
            unvoted.push(j);
            post[j * k..(j + 1) * k].fill(1.0 / k as f64);
        } else {
            for c in 0..k {
                post[j * k + c] = f64::from(row[c]) / f64::from(total);
            }
        }
    }

    let mut priors = vec![0.0; k];
    let mut confusion = vec![0.0; s * kk];
    let mut log_conf = vec![0.0; s * kk];
    let mut log_post = vec![0.0; n * k];
    let mut trace: Vec<f64> = Vec::with_capacity(config.max_iter);
    let mut objective: Vec<f64> = Vec::with_capacity(config.max_iter);

    for _ in 0..config.max_iter {
        // M-step
        for c in 0..k {
            let mass: f64 = (0..n).map(|j| post[j * k + c]).sum();
            priors[c] = (mass + DS_SMOOTHING) / (n as f64 + k as f64 * DS_SMOOTHING);
        }
        confusion.fill(DS_SMOOTHING);
        for i in 0..s {
            let conf = &mut confusion[i * kk..(i + 1) * kk];
            for (j, label) in opinions.row(i).enumerate() {
                if let Some(b) = label {
                    for a in 0..k {
                        conf[a * k + b as usize] += post[j * k + a];
                    }
                }
            }
            for row in conf.chunks_mut(k) {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
            }
        }
        for (l, &c) in log_conf.iter_mut().zip(&confusion) {
            *l = c.ln();
        }

        // E-step
        for j in 0..n {
            for a in 0..k {
                log_post[j * k + a] = priors[a].ln();
            }
        }
        for i in 0..s {
            let lc = &log_conf[i * kk..(i + 1) * kk];
            for (j, label) in opinions.row(i).enumerate() {
                if let Some(b) = label {
                    for a in 0..k {
                        log_post[j * k + a] += lc[a * k + b as usize];
                    }
                }
            }
        }
        let mut ll = 0.0;
        for j in 0..n {
            let lp = &log_post[j * k..(j + 1) * k];
            let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lp.iter().map(|x| (x - max).exp()).sum();
            let lse = max + z.ln();
            ll += lse;
            for a in 0..k {
                post[j * k + a] = (lp[a] - lse).exp();
            }
        }

        let log_prior: f64 = priors.iter().chain(&confusion).map(|p| p.ln()).sum();
        objective.push(ll + DS_SMOOTHING * log_prior);
        let converged = trace.last().is_some_and(|&prev| (ll - prev).abs() < config.tol);
        trace.push(ll);
        if converged {
            break;
        }
    }

    let mut labels: Vec<ClassId> = (0..n)
        .map(|j| {
            let p = &post[j * k..(j + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if p[c] > p[best] {
                    best = c;
                }
            }
            best as ClassId
        })
        .collect();
    for &j in &unvoted {
        labels[j] = 0;
    }
    let model = DawidSkeneModel {
        sources: s,
        classes: k,
        confusion,
        priors,
        posteriors: post,
        log_likelihood: trace,
        objective,
    };
    Ok((Aggregate { labels, unvoted }, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn columns(classes: usize, cols: &[&[Option<u8>]]) -> OpinionMatrix {
        let s = cols[0].len();
        OpinionMatrix::from_fn(s, cols.len(), classes, |i, j| cols[j][i]).unwrap()
    }

    #[test]
    fn majority_examples() {
        let m = columns(3, &[&[Some(1), Some(1), Some(1)], &[Some(0), Some(1), None], &[Some(2), Some(2), Some(0)]]);
        let agg = majority_vote(&m);
        assert_eq!(agg.labels, vec![1, 0, 2]);
        assert!(agg.unvoted.is_empty());
    }

    #[test]
    fn majority_flags_unvoted_instances() {
        let m = columns(2, &[&[None, None], &[Some(1), None]]);
        let agg = majority_vote(&m);
        assert_eq!(agg.labels, vec![0, 1]);
        assert_eq!(agg.unvoted, vec![0]);
    }

    #[test]
    fn ds_noiseless_fixed_point() {
        let m = OpinionMatrix::from_fn(4, 30, 3, |_, j| Some((j % 3) as u8)).unwrap();
        let (agg, model) = dawid_skene(&m, &DawidSkeneConfig::default()).unwrap();
        assert_eq!(agg.labels, (0..30).map(|j| (j % 3) as u8).collect::<Vec<_>>());
        for i in 0..4 {
            let conf = model.confusion(i);
            for a in 0..3 {
                for b in 0..3 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((conf[a * 3 + b] - want).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn ds_single_source() {
        let m = OpinionMatrix::from_rows(2, &[vec![Some(1), None, Some(0), Some(1)]]).unwrap();
        let (agg, _) = dawid_skene(&m, &DawidSkeneConfig::default()).unwrap();
        assert_eq!(agg.labels, vec![1, 0, 0, 1]);
        assert_eq!(agg.unvoted, vec![1]);
    }

    #[test]
    fn ds_rejects_bad_config() {
        let m = OpinionMatrix::from_rows(2, &[vec![Some(1)]]).unwrap();
        assert!(dawid_skene(&m, &DawidSkeneConfig { max_iter: 0, tol: 1e-7 }).is_err());
        assert!(dawid_skene(&m, &DawidSkeneConfig { max_iter: 5, tol: 0.0 }).is_err());
    }

    #[test]
    fn ds_model_is_stochastic() {
        let m = OpinionMatrix::from_fn(5, 40, 3, |i, j| {
            if (i + j) % 7 == 0 {
                None
            } else {
                Some(((j + i * (j % 2)) % 3) as u8)
            }
        })
        .unwrap();
        let (_, model) = dawid_skene(&m, &DawidSkeneConfig::default()).unwrap();
        assert!((model.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..5 {
            for row in model.confusion(i).chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&x| x >= 0.0));
            }
        }
        for j in 0..40 {
            assert!((model.posterior(j).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
