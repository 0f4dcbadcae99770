//! Wall-clock measurement helpers for training, encoding and counting.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::counting::{count_top, CountingConfig, RunFilter};
use crate::sequence::TokenSequence;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_secs: f64,
    pub std_secs: f64,
    pub samples: Vec<f64>,
}

/// Mean and sample standard deviation (zero for a single sample).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `f` repeatedly until `warmup` has elapsed, then times `runs` calls.
pub fn measure<F: FnMut()>(warmup: Duration, runs: usize, mut f: F) -> Timing {
    let start = Instant::now();
    while start.elapsed() < warmup {
        f();
    }
    let samples: Vec<f64> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    let (mean_secs, std_secs) = mean_std(&samples);
    Timing {
        mean_secs,
        std_secs,
        samples,
    }
}

/// Bytes per second expressed in MB/s (10^6 bytes).
pub fn throughput_mbs(bytes: usize, secs: f64) -> f64 {
    if secs <= 0.0 {
        return f64::INFINITY;
    }
    bytes as f64 / 1e6 / secs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub workers: usize,
    pub timing: Timing,
    pub speedup: f64,
    /// Speedup divided by worker count.
    pub efficiency: f64,
}

/// Times one full counting pass with each pool size. Speedups are relative
/// to the first entry of `workers`, which is normally 1.
pub fn counting_scaling(
    seqs: &[TokenSequence],
    cfg: &CountingConfig,
    m: usize,
    budget: usize,
    workers: &[usize],
    warmup: Duration,
    runs: usize,
) -> Result<Vec<ScalingPoint>> {
    let mut points: Vec<ScalingPoint> = Vec::new();
    for &w in workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut failure = None;
        let timing = measure(warmup, runs.max(1), || {
            if let Err(e) = pool.install(|| count_top(seqs, cfg, RunFilter::All, m, budget)) {
                failure = Some(e);
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let base = points.first().map_or(timing.mean_secs, |p| p.timing.mean_secs * p.workers as f64);
        let speedup = base / timing.mean_secs;
        points.push(ScalingPoint {
            workers: w,
            speedup,
            efficiency: speedup / w.max(1) as f64,
            timing,
        });
    }
    Ok(points)
}
