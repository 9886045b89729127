//! Wall-clock scaling harness for the ranking pipeline.
//!
//! Each cell generates a random binary opinion matrix once, then times
//! complete [`OpinionRank::run`] passes on the calling thread after one
//! untimed warm-up pass. Generation is excluded from the timing.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use crate::opinions::OpinionMatrix;
use crate::rank::OpinionRank;
use crate::simgen::rng_from_seed;
use crate::{Error, Result};

pub const DEFAULT_REPETITIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchCell {
    pub sources: usize,
    pub instances: usize,
    pub repetitions: usize,
    pub mean_secs: f64,
    pub min_secs: f64,
}

impl BenchCell {
    pub fn mean(&self) -> Duration {
        Duration::from_secs_f64(self.mean_secs)
    }
}

/// Uniformly random complete binary opinions.
pub fn random_binary_opinions(sources: usize, instances: usize, seed: u64) -> Result<OpinionMatrix> {
    let mut rng = rng_from_seed(seed);
    OpinionMatrix::from_fn(sources, instances, 2, |_, _| Some(rng.random_range(0..2)))
}

pub fn time_cell(sources: usize, instances: usize, repetitions: usize, seed: u64) -> Result<BenchCell> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let opinions = random_binary_opinions(sources, instances, seed)?;
    let config = OpinionRank::default();
    // Untimed warm-up pass
    black_box(config.run(black_box(&opinions))?);
    let mut total = 0.0;
    let mut min = f64::INFINITY;
    for _ in 0..repetitions {
        let start = Instant::now();
        black_box(config.run(black_box(&opinions))?);
        let secs = start.elapsed().as_secs_f64();
        total += secs;
        min = min.min(secs);
    }
    Ok(BenchCell { sources, instances, repetitions, mean_secs: total / repetitions as f64, min_secs: min })
}

/// Times every `(s, n)` pair of the grid, in row-major order.
pub fn run_grid(
    sources: &[usize],
    instances: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchCell>> {
    if sources.is_empty() || instances.is_empty() {
        return Err(Error::invalid("source and instance grids must be non-empty"));
    }
    let mut cells = Vec::with_capacity(sources.len() * instances.len());
    for &s in sources {
        for &n in instances {
            cells.push(time_cell(s, n, repetitions, seed)?);
        }
    }
    Ok(cells)
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::invalid("slope needs at least two positive points"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope needs at least two distinct x values"));
    }
    Ok(sxy / sxx)
}
