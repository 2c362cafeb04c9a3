//! Seeded Monte Carlo experiment driver: delta sweeps, canonical record
//! aggregation, and least-squares fitting of the log mean-loss against
//! delta^2.
//!
//! Per-trial randomness derives from a 64-bit hash of
//! `(master_seed, delta index, trial index, algorithm tag)`, so adding grid
//! points or algorithms never perturbs other trials, and execution order is
//! irrelevant: records are merged in canonical order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{sample_instance, GmmSpec};
use crate::kmeans::KMeansConfig;
use crate::metrics::misclustering_loss;
use crate::rng::mix;
use crate::spectral::{algorithm1, algorithm2, algorithm3, SpectralOutput};

const KMEANS_SALT: u64 = 0x6b6d_6e73; // "kmns"

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Alg1,
    Alg2,
    Alg3,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
        }
    }

    pub fn tag(&self) -> u64 {
        match self {
            Algorithm::Alg1 => 1,
            Algorithm::Alg2 => 2,
            Algorithm::Alg3 => 3,
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        match s {
            "alg1" => Ok(Algorithm::Alg1),
            "alg2" => Ok(Algorithm::Alg2),
            "alg3" => Ok(Algorithm::Alg3),
            other => Err(Error::InvalidSpec(format!("unknown algorithm '{other}'"))),
        }
    }

    pub fn run(&self, x: &crate::linalg::Matrix, k: usize, cfg: &KMeansConfig) -> Result<SpectralOutput> {
        match self {
            Algorithm::Alg1 => algorithm1(x, k, cfg),
            Algorithm::Alg2 => algorithm2(x, k, cfg),
            Algorithm::Alg3 => algorithm3(x, k, cfg),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: GmmSpec,
    pub delta_grid: Vec<f64>,
    pub trials_per_delta: usize,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    #[serde(default)]
    pub kmeans: KMeansConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.is_empty() {
            return Err(Error::InvalidSpec("delta_grid is empty".into()));
        }
        for w in self.delta_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidSpec(
                    "delta_grid must be strictly increasing".into(),
                ));
            }
        }
        if self.delta_grid[0] <= 0.0 {
            return Err(Error::InvalidSpec("delta_grid entries must be positive".into()));
        }
        if self.trials_per_delta == 0 {
            return Err(Error::InvalidSpec("trials_per_delta must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidSpec("algorithms is empty".into()));
        }
        for &delta in &self.delta_grid {
            GmmSpec {
                delta,
                ..self.base.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub trial_index: usize,
    pub algorithm: Algorithm,
    pub loss: f64,
    pub objective: f64,
    pub elapsed_ms: f64,
    pub seed_used: u64,
}

/// Samples one instance, runs the algorithm, and scores the labels against
/// the truth. Fully determined by `spec.seed` (the k-means stream derives
/// from it), except for `elapsed_ms`.
pub fn run_trial(spec: &GmmSpec, algorithm: Algorithm, kmeans: &KMeansConfig) -> Result<TrialRecord> {
    let start = Instant::now();
    let inst = sample_instance(spec)?;
    let cfg = KMeansConfig {
        seed: mix(&[spec.seed, KMEANS_SALT]),
        ..kmeans.clone()
    };
    let out = algorithm.run(&inst.x, spec.k, &cfg)?;
    let m = misclustering_loss(&out.labels, &inst.z_star, spec.k)?;
    Ok(TrialRecord {
        delta: spec.delta,
        trial_index: 0,
        algorithm,
        loss: m.loss,
        objective: out.objective,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        seed_used: spec.seed,
    })
}

/// Runs every `(delta, trial, algorithm)` combination. Trials execute in
/// parallel; records come back sorted by `(delta index, trial index,
/// algorithm tag)` regardless of schedule. A failing trial is recorded with
/// NaN loss and objective rather than aborting the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut tasks: Vec<(usize, usize, Algorithm)> = Vec::new();
    for di in 0..config.delta_grid.len() {
        for ti in 0..config.trials_per_delta {
            for &alg in &config.algorithms {
                tasks.push((di, ti, alg));
            }
        }
    }
    let mut records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(di, ti, alg)| {
            let seed = mix(&[config.master_seed, di as u64, ti as u64, alg.tag()]);
            let spec = GmmSpec {
                delta: config.delta_grid[di],
                seed,
                ..config.base.clone()
            };
            match run_trial(&spec, alg, &config.kmeans) {
                Ok(mut rec) => {
                    rec.trial_index = ti;
                    rec
                }
                Err(_) => TrialRecord {
                    delta: config.delta_grid[di],
                    trial_index: ti,
                    algorithm: alg,
                    loss: f64::NAN,
                    objective: f64::NAN,
                    elapsed_ms: 0.0,
                    seed_used: seed,
                },
            }
        })
        .collect();
    records.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.trial_index.cmp(&b.trial_index))
            .then(a.algorithm.tag().cmp(&b.algorithm.tag()))
    });
    Ok(records)
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Fitted coefficient of delta^2 in the log mean-loss.
    pub slope: f64,
    pub intercept: f64,
    pub n_points_used: usize,
    /// Grid points whose empirical mean loss was exactly zero, excluded
    /// from the regression rather than smoothed.
    pub n_censored: usize,
    pub reference_slope: f64,
}

/// Ordinary least squares of `log(mean loss)` against `delta^2` over the
/// grid points with positive mean loss, for one algorithm's records.
pub fn fit_rate(records: &[TrialRecord], algorithm: Algorithm) -> Result<RateFit> {
    let mut by_delta: Vec<(f64, f64, usize)> = Vec::new(); // (delta, loss sum, count)
    for r in records.iter().filter(|r| r.algorithm == algorithm) {
        if !r.loss.is_finite() {
            continue;
        }
        match by_delta.iter_mut().find(|(d, _, _)| *d == r.delta) {
            Some(entry) => {
                entry.1 += r.loss;
                entry.2 += 1;
            }
            None => by_delta.push((r.delta, r.loss, 1)),
        }
    }
    by_delta.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut n_censored = 0usize;
    for (delta, sum, count) in &by_delta {
        let mean = sum / *count as f64;
        if mean > 0.0 {
            xs.push(delta * delta);
            ys.push(mean.ln());
        } else {
            n_censored += 1;
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientUncensored { got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        n_points_used: xs.len(),
        n_censored,
        reference_slope: -0.125,
    })
}
