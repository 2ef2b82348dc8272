use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::EpisodeRecord;

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?);
    }
    Ok(out)
}

/// Arithmetic mean and population standard deviation; NaN for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trailing rolling mean; early entries average over what exists.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Mean discounted return over the last `window` completed episodes.
pub fn final_window(run: &[EpisodeRecord], window: usize) -> f64 {
    let tail = &run[run.len().saturating_sub(window)..];
    let values: Vec<f64> = tail.iter().map(|r| r.discounted_return).collect();
    mean_std(&values).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeAggregateRow {
    pub episode: u64,
    /// Seeds that reached this episode.
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub smoothed_mean: f64,
    pub smoothed_std: f64,
}

/// Per-episode statistics of the discounted return across runs.
pub fn episode_aggregate(runs: &[Vec<EpisodeRecord>], window: usize) -> Vec<EpisodeAggregateRow> {
    let raw: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.iter().map(|e| e.discounted_return).collect())
        .collect();
    let smooth: Vec<Vec<f64>> = raw.iter().map(|r| rolling_mean(r, window)).collect();
    let longest = raw.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|e| {
            let at: Vec<f64> = raw.iter().filter_map(|r| r.get(e).copied()).collect();
            let sm: Vec<f64> = smooth.iter().filter_map(|r| r.get(e).copied()).collect();
            let (mean, std) = mean_std(&at);
            let (smoothed_mean, smoothed_std) = mean_std(&sm);
            EpisodeAggregateRow {
                episode: e as u64,
                seeds: at.len(),
                mean,
                std,
                smoothed_mean,
                smoothed_std,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAggregateRow {
    /// Bucket end (exclusive) in environment steps.
    pub step: u64,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
}

/// Step-indexed curve: per run, the mean discounted return of episodes that
/// finished inside each bucket (carrying the last value over empty buckets),
/// then mean and std across runs.
pub fn step_aggregate(runs: &[Vec<EpisodeRecord>], bucket: u64, total_steps: u64) -> Vec<StepAggregateRow> {
    let buckets = total_steps.div_ceil(bucket) as usize;
    let per_run: Vec<Vec<Option<f64>>> = runs
        .iter()
        .map(|run| {
            let mut sums = vec![(0.0, 0u32); buckets];
            let mut end = 0u64;
            for r in run {
                end += r.steps as u64;
                let b = (((end - 1) / bucket) as usize).min(buckets - 1);
                sums[b].0 += r.discounted_return;
                sums[b].1 += 1;
            }
            let mut last = None;
            sums.iter()
                .map(|&(s, n)| {
                    if n > 0 {
                        last = Some(s / n as f64);
                    }
                    last
                })
                .collect()
        })
        .collect();
    (0..buckets)
        .map(|b| {
            let vals: Vec<f64> = per_run.iter().filter_map(|r| r[b]).collect();
            let (mean, std) = mean_std(&vals);
            StepAggregateRow {
                step: ((b as u64 + 1) * bucket).min(total_steps),
                seeds: vals.len(),
                mean,
                std,
            }
        })
        .collect()
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(())
}
