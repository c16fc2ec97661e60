//! Seeded Monte Carlo: Poisson sampling, coverage calibration of the fit,
//! and the chi-square versus maximum-likelihood slope comparison.
//!
//! Replicate `i` draws from `ChaCha8Rng` seeded with the run seed on stream
//! `i`, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::baselines::chi2_fit;
use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::solver::{solve, SolverConfig};
use crate::uncertainty::covariance_fisher;

/// Means below this use sequential inversion; at or above, PTRS.
pub const INVERSION_LIMIT: f64 = 30.0;

/// Draws one Poisson variate.
///
/// Inversion by sequential search for `mu < 30`; above that the transformed
/// rejection method with squeeze (PTRS, Hörmann 1993).
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u64 {
    if !(mu > 0.0) {
        return 0;
    }
    if mu < INVERSION_LIMIT {
        poisson_inversion(rng, mu)
    } else {
        poisson_ptrs(rng, mu)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u64 {
    let u: f64 = rng.random();
    let mut p = (-mu).exp();
    let mut cdf = p;
    let mut k = 0u64;
    // the cap only matters when u lands in the rounding gap below 1
    let cap = (mu + 40.0 * mu.sqrt() + 50.0) as u64;
    while u > cdf && k < cap {
        k += 1;
        p *= mu / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u64 {
    let ln_mu = mu.ln();
    let b = 0.931 + 2.53 * mu.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= -mu + k * ln_mu - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Parent model for synthetic data: `n_bins` unit bins starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParentModel {
    pub lambda: f64,
    pub a: f64,
    pub n_bins: usize,
}

impl ParentModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 3 {
            return Err(Error::InvalidParameters(format!(
                "need at least 3 bins, got {}",
                self.n_bins
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() || !self.a.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "lambda must be positive and finite, a finite (lambda = {}, a = {})",
                self.lambda, self.a
            )));
        }
        if 1.0 + self.a * (self.n_bins as f64) < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "model density goes negative inside [0, {}] for a = {}",
                self.n_bins, self.a
            )));
        }
        Ok(())
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n_bins)
            .map(|i| self.lambda * (1.0 + self.a * (i as f64 + 0.5)))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinnedDataset {
        let rows: Vec<(f64, f64, f64)> = self
            .means()
            .into_iter()
            .enumerate()
            .map(|(i, mu)| (i as f64, i as f64 + 1.0, poisson(rng, mu) as f64))
            .collect();
        BinnedDataset::from_edges(rows).expect("synthetic bins are valid")
    }

    pub fn slope(&self) -> f64 {
        self.lambda * self.a
    }
}

/// Fitted estimates and Fisher errors for one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Draw {
    a: f64,
    lambda: f64,
    sigma_a: f64,
    sigma_lambda: f64,
}

/// Summary statistics for one estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamSummary {
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    /// `(mean - truth) / (sd / sqrt(n))`.
    pub bias_z: f64,
    pub mean_sigma: f64,
    pub coverage_68: f64,
    pub coverage_90: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationSummary {
    pub parent: ParentModel,
    pub seed: u64,
    pub replicates: usize,
    /// Replicates whose fit or covariance failed; excluded from the summaries.
    pub failed: usize,
    pub a: ParamSummary,
    pub lambda: ParamSummary,
}

const Z_68: f64 = 1.0;
const Z_90: f64 = 1.6448536269514722;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(truth: f64, pairs: &[(f64, f64)]) -> ParamSummary {
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let covered = |z: f64| {
        pairs
            .iter()
            .filter(|(est, s)| (est - truth).abs() <= z * s)
            .count() as f64
            / n
    };
    let mut ests: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    ParamSummary {
        truth,
        mean,
        sd,
        median: median(&mut ests),
        bias_z: (mean - truth) / (sd / n.sqrt()),
        mean_sigma: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        coverage_68: covered(Z_68),
        coverage_90: covered(Z_90),
    }
}

/// Fits `replicates` synthetic datasets drawn from `parent` and compares the
/// spread of the estimates with the Fisher errors.
pub fn calibrate(parent: ParentModel, replicates: usize, seed: u64) -> Result<CalibrationSummary> {
    parent.validate()?;
    if replicates < 2 {
        return Err(Error::InvalidParameters(
            "need at least 2 replicates".into(),
        ));
    }
    let cfg = SolverConfig::default();
    let draws: Vec<Option<Draw>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let ds = parent.sample(&mut replicate_rng(seed, i));
            let fit = solve(&ds, &cfg).ok()?;
            let cov = covariance_fisher(&fit.params, &ds).ok()?;
            Some(Draw {
                a: fit.a_hat(),
                lambda: fit.lambda_hat(),
                sigma_a: cov.sigma_a(),
                sigma_lambda: cov.sigma_lambda(),
            })
        })
        .collect();
    let ok: Vec<Draw> = draws.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(Error::InvalidParameters(
            "fewer than 2 replicates could be fitted".into(),
        ));
    }
    let a_pairs: Vec<(f64, f64)> = ok.iter().map(|d| (d.a, d.sigma_a)).collect();
    let l_pairs: Vec<(f64, f64)> = ok.iter().map(|d| (d.lambda, d.sigma_lambda)).collect();
    Ok(CalibrationSummary {
        parent,
        seed,
        replicates,
        failed: replicates - ok.len(),
        a: summarize(parent.a, &a_pairs),
        lambda: summarize(parent.lambda, &l_pairs),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeComparison {
    pub parent: ParentModel,
    /// Replicates kept: every bin non-empty and both fits succeeded.
    pub kept: usize,
    /// Draws discarded before `kept` was reached.
    pub discarded: usize,
    pub median_ml_slope: f64,
    pub median_chi2_slope: f64,
    pub ml_slopes: Vec<f64>,
    pub chi2_slopes: Vec<f64>,
}

/// Slopes from the ML fit and the chi-square fit on the same synthetic data.
///
/// The chi-square fit needs every bin non-empty, so draws with an empty bin
/// are discarded and drawing continues until `replicates` are kept.
pub fn compare_slopes(
    parent: ParentModel,
    replicates: usize,
    seed: u64,
) -> Result<SlopeComparison> {
    parent.validate()?;
    if replicates == 0 {
        return Err(Error::InvalidParameters("need at least 1 replicate".into()));
    }
    let cfg = SolverConfig::default();
    let max_draws = 1000 * replicates as u64;
    let (mut ml, mut chi) = (
        Vec::with_capacity(replicates),
        Vec::with_capacity(replicates),
    );
    let mut next = 0u64;
    let mut discarded = 0usize;
    while ml.len() < replicates {
        if next >= max_draws {
            return Err(Error::InvalidParameters(format!(
                "only {} of {} draws had no empty bin",
                ml.len(),
                next
            )));
        }
        let batch: Vec<Option<(f64, f64)>> = (next..next + replicates as u64)
            .into_par_iter()
            .map(|i| {
                let ds = parent.sample(&mut replicate_rng(seed, i));
                let c = chi2_fit(&ds).ok()?;
                let f = solve(&ds, &cfg).ok()?;
                Some((f.params.slope(), c.params.1))
            })
            .collect();
        next += replicates as u64;
        for r in batch {
            if ml.len() == replicates {
                break;
            }
            match r {
                Some((m, c)) => {
                    ml.push(m);
                    chi.push(c);
                }
                None => discarded += 1,
            }
        }
    }
    Ok(SlopeComparison {
        parent,
        kept: ml.len(),
        discarded,
        median_ml_slope: median(&mut ml.clone()),
        median_chi2_slope: median(&mut chi.clone()),
        ml_slopes: ml,
        chi2_slopes: chi,
    })
}
