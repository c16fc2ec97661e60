//! Goodness-of-fit test on the minimum Cash statistic.
//!
//! With large expected counts `C_min` follows chi-square with `N - 2`
//! degrees of freedom. With small counts each bin's Cash term has its own
//! mean and variance; those are summed and a normal critical value built from
//! them.

use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::likelihood::{self, model_mean, ScargleParams};
use crate::special::{chi2_quantile, normal_quantile};
use statrs::function::gamma::ln_gamma;

/// Number of fitted parameters.
pub const N_PARAMS: usize = 2;

/// Below this expected count in any bin the normal approximation is used.
pub const LOW_COUNT_THRESHOLD: f64 = 10.0;

const TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CminMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GofMethod {
    Chi2,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GofReport {
    pub c_min: f64,
    pub dof: usize,
    pub critical_value: f64,
    pub confidence: f64,
    pub method: GofMethod,
    pub reject: bool,
}

fn cash_term(k: u64, mu: f64) -> f64 {
    // finite for every k when mu > 0
    likelihood::cash_term(k, mu).unwrap_or(f64::NAN)
}

fn ln_factorial(k: u64) -> f64 {
    if k < 256 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Mean and variance of `2(mu - y + y ln(y/mu))` for `y ~ Poisson(mu)`.
///
/// Exact series, truncated once the remaining Poisson mass is below 1e-12.
pub fn cash_term_moments(mu: f64) -> Result<CminMoments> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::NonPositiveMean { mu });
    }
    // pmf by recurrence outward from the mode; only the mode needs a log
    let mode = mu.floor() as u64;
    let p_mode = (mode as f64 * mu.ln() - mu - ln_factorial(mode)).exp();
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut add = |k: u64, pk: f64| {
        let c = cash_term(k, mu);
        s1 += pk * c;
        s2 += pk * c * c;
    };

    let mut pk = p_mode;
    for k in (0..mode).rev() {
        pk *= (k + 1) as f64 / mu;
        add(k, pk);
    }
    let mut k = mode;
    let mut pk = p_mode;
    loop {
        add(k, pk);
        let kf = k as f64;
        // past the mode the pmf ratios are below mu/(k+2), so the mass
        // beyond k is bounded by a geometric series
        let next = pk * mu / (kf + 1.0);
        let ratio = mu / (kf + 2.0);
        if ratio < 1.0 && next / (1.0 - ratio) < TAIL_MASS {
            break;
        }
        k += 1;
        pk = next;
    }
    Ok(CminMoments {
        mean: s1,
        variance: (s2 - s1 * s1).max(0.0),
    })
}

fn expected_counts(p: &ScargleParams, ds: &BinnedDataset) -> Vec<f64> {
    ds.bins().iter().map(|b| model_mean(p, b)).collect()
}

fn dof(ds: &BinnedDataset) -> Result<usize> {
    match ds.len().checked_sub(N_PARAMS) {
        Some(d) if d > 0 => Ok(d),
        _ => Err(Error::InvalidDof {
            dof: ds.len() as f64 - N_PARAMS as f64,
        }),
    }
}

/// Normal-approximation critical value of `C_min`.
///
/// The per-bin moment sums are scaled by `(N - 2)/N` to account for the two
/// fitted parameters, so that with large counts the mean and variance tend
/// to those of chi-square with `N - 2` degrees of freedom.
pub fn critical_value_normal(
    p: &ScargleParams,
    ds: &BinnedDataset,
    confidence: f64,
) -> Result<f64> {
    let z = normal_quantile(confidence)?;
    let nu = dof(ds)? as f64;
    let (mut mean, mut var) = (0.0, 0.0);
    for mu in expected_counts(p, ds) {
        if mu > 0.0 {
            let m = cash_term_moments(mu)?;
            mean += m.mean;
            var += m.variance;
        } else if mu < 0.0 {
            return Err(Error::NonPositiveMean { mu });
        }
    }
    let scale = nu / ds.len() as f64;
    // C_min is non-negative; a negative value here only arises at very low
    // confidence
    Ok((scale * mean + z * (scale * var).sqrt()).max(0.0))
}

/// Method picked when none is requested.
pub fn default_method(p: &ScargleParams, ds: &BinnedDataset) -> GofMethod {
    if expected_counts(p, ds)
        .iter()
        .any(|&mu| mu < LOW_COUNT_THRESHOLD)
    {
        GofMethod::NormalApprox
    } else {
        GofMethod::Chi2
    }
}

pub fn gof_test(
    p: &ScargleParams,
    ds: &BinnedDataset,
    confidence: f64,
    method: Option<GofMethod>,
) -> Result<GofReport> {
    let method = method.unwrap_or_else(|| default_method(p, ds));
    let dof = dof(ds)?;
    let critical_value = match method {
        GofMethod::Chi2 => chi2_quantile(dof as f64, confidence)?,
        GofMethod::NormalApprox => critical_value_normal(p, ds, confidence)?,
    };
    let c_min = likelihood::c_min(p, ds)?;
    Ok(GofReport {
        c_min,
        dof,
        critical_value,
        confidence,
        method,
        reject: c_min > critical_value,
    })
}
