use super::potential::Potential;
use crate::error::{LabError, Result};
use crate::seed;
use crate::stats;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::Path;

pub const MCMC_MAX_N: usize = 64;

/// −βN Σ [U(x_i)/2 + x_i²/4] + β Σ_{i<j} log|x_j − x_i|, with N = x.len().
pub fn beta_log_density(x: &[f64], u: &dyn Potential, beta: f64) -> f64 {
    let n = x.len() as f64;
    let one_body: f64 = x.iter().map(|&v| 0.5 * u.value(v) + 0.25 * v * v).sum();
    let mut pair = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for xj in &x[i + 1..] {
            pair += (xj - xi).abs().ln();
        }
    }
    -beta * n * one_body + beta * pair
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcOptions {
    /// Sweeps (N single-site proposals each) discarded before recording;
    /// the proposal scale adapts only during this phase.
    pub burn_in: usize,
    /// Sweeps between recorded samples.
    pub thin: usize,
    pub target_acceptance: f64,
    /// Starting configuration; semicircle quantiles when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            thin: 2,
            target_acceptance: 0.3,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEnsembleState {
    /// Sorted positions.
    pub x: Vec<f64>,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub samples: usize,
    pub proposal_scale: f64,
    /// Acceptance rate over the recorded phase.
    pub acceptance_rate: f64,
    /// Batch-means effective sample size of Σ x_i².
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcChain {
    pub states: Vec<BetaEnsembleState>,
    pub diagnostics: McmcDiagnostics,
}

impl McmcChain {
    /// Per-index sample means of the sorted positions.
    pub fn index_means(&self) -> Vec<f64> {
        let n = self.diagnostics.n;
        (0..n)
            .map(|i| stats::mean(&self.states.iter().map(|s| s.x[i]).collect::<Vec<_>>()))
            .collect()
    }

    /// Batch-means standard errors of the per-index means.
    pub fn index_std_errs(&self, batches: usize) -> Vec<f64> {
        let n = self.diagnostics.n;
        (0..n)
            .map(|i| stats::batch_means_se(&self.states.iter().map(|s| s.x[i]).collect::<Vec<_>>(), batches))
            .collect()
    }

    /// Chain CSV (sample, log_density, x_1..x_N) plus a JSON sidecar with
    /// the diagnostics and thinning metadata next to it.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header = vec!["sample".to_string(), "log_density".to_string()];
        header.extend((1..=self.diagnostics.n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string(), s.log_density.to_string()];
            row.extend(s.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        let side = serde_json::to_string_pretty(&self.diagnostics).map_err(|e| LabError::Io(e.to_string()))?;
        std::fs::write(csv_path.with_extension("json"), side)?;
        Ok(())
    }
}

/// Semicircle quantiles (i − ½)/N by bisection on the closed-form CDF.
pub fn semicircle_locations(n: usize) -> Vec<f64> {
    let cdf = |x: f64| 0.5 + (x * (4.0 - x * x).max(0.0).sqrt()) / (4.0 * PI) + (x / 2.0).asin() / PI;
    (1..=n)
        .map(|i| {
            let q = (i as f64 - 0.5) / n as f64;
            let (mut lo, mut hi) = (-2.0, 2.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < q {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Random-walk Metropolis for exp(beta_log_density) on unordered
/// coordinates, one Gaussian single-site proposal at a time; recorded
/// states are sorted.
pub fn mcmc_sample(u: &dyn Potential, beta: f64, n: usize, n_samples: usize, seed: u64, opts: &McmcOptions) -> Result<McmcChain> {
    if n == 0 || n > MCMC_MAX_N {
        return Err(LabError::PreconditionViolated(format!("MCMC supports 1 <= N <= {MCMC_MAX_N}, got {n}")));
    }
    if !(beta > 0.0) {
        return Err(LabError::PreconditionViolated(format!("beta must be positive, got {beta}")));
    }
    if opts.thin == 0 || !(opts.target_acceptance > 0.0 && opts.target_acceptance < 1.0) {
        return Err(LabError::PreconditionViolated("thin >= 1 and target acceptance in (0, 1) required".into()));
    }
    let mut x = match &opts.init {
        Some(v) if v.len() != n => return Err(LabError::DimensionMismatch { expected: n, got: v.len() }),
        Some(v) => v.clone(),
        None => semicircle_locations(n),
    };
    let nf = n as f64;
    let one_body = |v: f64| 0.5 * u.value(v) + 0.25 * v * v;
    let mut ld = beta_log_density(&x, u, beta);
    if !ld.is_finite() {
        return Err(LabError::NonFiniteDensity(format!("initial configuration has log-density {ld}")));
    }
    let mut rng = seed::rng(seed);
    let mut scale = 1.0 / nf;
    let sweep = |x: &mut Vec<f64>, ld: &mut f64, scale: f64, rng: &mut seed::LabRng| -> Result<usize> {
        let mut accepted = 0;
        for i in 0..n {
            let old = x[i];
            let z: f64 = StandardNormal.sample(rng);
            let new = old + scale * z;
            let mut delta = -beta * nf * (one_body(new) - one_body(old));
            for (j, &xj) in x.iter().enumerate() {
                if j != i {
                    delta += beta * ((new - xj).abs().ln() - (old - xj).abs().ln());
                }
            }
            if delta.is_nan() || delta == f64::INFINITY {
                return Err(LabError::NonFiniteDensity(format!("proposal {new} from {old} gives log-ratio {delta}")));
            }
            let log_u: f64 = rng.random::<f64>().ln();
            if log_u < delta {
                x[i] = new;
                *ld += delta;
                accepted += 1;
            }
        }
        Ok(accepted)
    };
    const ADAPT_EVERY: usize = 20;
    let mut window = 0;
    for s in 0..opts.burn_in {
        window += sweep(&mut x, &mut ld, scale, &mut rng)?;
        if (s + 1) % ADAPT_EVERY == 0 {
            let rate = window as f64 / (ADAPT_EVERY * n) as f64;
            let gain = 1.0 / (1.0 + (s / ADAPT_EVERY) as f64).sqrt();
            scale *= (2.0 * gain * (rate - opts.target_acceptance)).exp();
            window = 0;
        }
    }
    let mut states = Vec::with_capacity(n_samples);
    let mut accepted = 0usize;
    for _ in 0..n_samples {
        for _ in 0..opts.thin {
            accepted += sweep(&mut x, &mut ld, scale, &mut rng)?;
        }
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        states.push(BetaEnsembleState { x: sorted, log_density: ld });
    }
    let proposals = (n_samples * opts.thin * n).max(1);
    let energy: Vec<f64> = states.iter().map(|s| s.x.iter().map(|v| v * v).sum()).collect();
    let ess = effective_sample_size(&energy);
    Ok(McmcChain {
        states,
        diagnostics: McmcDiagnostics {
            n,
            beta,
            seed,
            burn_in: opts.burn_in,
            thin: opts.thin,
            samples: n_samples,
            proposal_scale: scale,
            acceptance_rate: accepted as f64 / proposals as f64,
            ess,
        },
    })
}

/// Independent chains seeded derive(seed, c), run in parallel.
pub fn mcmc_chains(u: &dyn Potential, beta: f64, n: usize, n_samples: usize, chains: usize, seed: u64, opts: &McmcOptions) -> Result<Vec<McmcChain>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|c| mcmc_sample(u, beta, n, n_samples, seed::derive(seed, c), opts))
        .collect()
}

fn effective_sample_size(x: &[f64]) -> f64 {
    if x.len() < 40 {
        return x.len() as f64;
    }
    let var = stats::variance(x);
    let se = stats::batch_means_se(x, 20);
    if se > 0.0 {
        (var / (se * se)).min(x.len() as f64)
    } else {
        x.len() as f64
    }
}
