//! Sample-efficiency metrics over run records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppo::train::{EpisodeSummary, RunRecord};

/// Default number of generations a run is divided into.
pub const DEFAULT_GENERATIONS: usize = 100;

/// Episodes grouped into contiguous windows of near-equal size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSeries {
    /// Mean of the episode scores in each generation.
    pub mean: Vec<f64>,
    /// Best single reward seen up to the end of each generation.
    pub max_so_far: Vec<f64>,
    /// Episodes per generation.
    pub episodes: Vec<usize>,
    /// Cumulative samples at the end of each generation.
    pub samples: Vec<u64>,
}

impl GenerationSeries {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Episode index range of generation `g` out of `n_gen` over `n` episodes.
pub fn window(n: usize, n_gen: usize, g: usize) -> std::ops::Range<usize> {
    (g * n / n_gen)..((g + 1) * n / n_gen)
}

pub fn bin_generations(episodes: &[EpisodeSummary], n_gen: usize) -> Result<GenerationSeries> {
    if n_gen == 0 {
        return Err(Error::Contract("need at least one generation".into()));
    }
    if episodes.len() < n_gen {
        return Err(Error::Contract(format!(
            "{} episodes cannot fill {n_gen} generations",
            episodes.len()
        )));
    }
    let mut s = GenerationSeries {
        mean: Vec::with_capacity(n_gen),
        max_so_far: Vec::with_capacity(n_gen),
        episodes: Vec::with_capacity(n_gen),
        samples: Vec::with_capacity(n_gen),
    };
    let mut best = f64::NEG_INFINITY;
    for g in 0..n_gen {
        let eps = &episodes[window(episodes.len(), n_gen, g)];
        let mean = eps.iter().map(|e| e.mean_reward).sum::<f64>() / eps.len() as f64;
        best = eps.iter().map(|e| e.max_reward).fold(best, f64::max);
        s.mean.push(mean);
        s.max_so_far.push(best);
        s.episodes.push(eps.len());
        s.samples.push(eps.last().map_or(0, |e| e.end_sample));
    }
    Ok(s)
}

/// Episode scores of the last generation.
pub fn last_generation(episodes: &[EpisodeSummary], n_gen: usize) -> Result<Vec<f64>> {
    if episodes.len() < n_gen || n_gen == 0 {
        return Err(Error::Contract(format!(
            "{} episodes cannot fill {n_gen} generations",
            episodes.len()
        )));
    }
    Ok(episodes[window(episodes.len(), n_gen, n_gen - 1)]
        .iter()
        .map(|e| e.mean_reward)
        .collect())
}

/// Fraction of the budget spent before the best design was found.
pub fn improvement_ratio(record: &RunRecord) -> f64 {
    if record.total_samples == 0 {
        return 0.0;
    }
    record.best.samples_at_best as f64 / record.total_samples as f64
}

/// Mean and population standard deviation of the last-generation episode
/// scores pooled over all runs.
pub fn sample_efficiency(records: &[&RunRecord], n_gen: usize) -> Result<(f64, f64)> {
    let mut pooled = Vec::new();
    for r in records {
        pooled.extend(last_generation(&r.episodes, n_gen)?);
    }
    if pooled.is_empty() {
        return Err(Error::Contract("no runs to summarize".into()));
    }
    Ok(mean_std(&pooled))
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Optimization technique performance: fitness per evaluator call.
pub fn otp(fitness: f64, n_calls: u64) -> Result<f64> {
    if n_calls == 0 {
        return Err(Error::Domain("OTP needs at least one call".into()));
    }
    Ok(fitness / n_calls as f64)
}
