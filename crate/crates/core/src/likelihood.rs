//! The factorized linear model `lambda * (1 + a (x - x_a))`, its Poisson
//! likelihood, and the scalar functions of `a` the estimating equations use.

use crate::dataset::{Bin, BinnedDataset};
use crate::error::{Error, Result};

/// Evaluations closer than this (relative to the pole location) are refused.
pub const POLE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScargleParams {
    /// Density at `x_a`, in counts per unit `x`.
    pub lambda: f64,
    /// Relative slope, in units of `1/x`.
    pub a: f64,
    pub x_a: f64,
}

impl ScargleParams {
    pub fn new(lambda: f64, a: f64, x_a: f64) -> Self {
        Self { lambda, a, x_a }
    }

    /// Slope of the line in the usual `intercept + slope * x` form.
    pub fn slope(&self) -> f64 {
        self.lambda * self.a
    }

    /// Value of the line at `x = 0`.
    pub fn intercept(&self) -> f64 {
        self.lambda * (1.0 - self.a * self.x_a)
    }

    /// True when the model mean is non-negative in every bin and positive
    /// wherever counts were observed.
    pub fn is_acceptable(&self, ds: &BinnedDataset) -> bool {
        ds.bins().iter().all(|b| {
            let s = model_density(self, b.midpoint());
            s >= 0.0 && (b.count == 0 || s > 0.0)
        })
    }
}

/// `g`, `G`, `H` and `g2` evaluated at one value of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxEval {
    pub g: f64,
    /// `G(a) = -dg/da`.
    pub big_g: f64,
    pub h: f64,
    pub g2: f64,
}

#[inline]
pub fn model_density(p: &ScargleParams, x: f64) -> f64 {
    p.lambda * (1.0 + p.a * (x - p.x_a))
}

/// Expected counts in a bin: the density at the midpoint times the width.
#[inline]
pub fn model_mean(p: &ScargleParams, b: &Bin) -> f64 {
    model_density(p, b.midpoint()) * b.width()
}

fn check_pole(ds: &BinnedDataset, a: f64) -> Result<()> {
    for (i, (b, d)) in ds.bins().iter().zip(ds.offsets()).enumerate() {
        // |a - pole| / |pole| == |1 + a d|
        if b.count > 0 && (1.0 + a * d).abs() <= POLE_TOLERANCE {
            return Err(Error::PoleProximity { bin: i, a });
        }
    }
    Ok(())
}

/// `g(a)` without pole checks. Used inside bracketing loops where the
/// endpoints are kept away from the poles by construction.
#[inline]
pub(crate) fn g_unchecked(ds: &BinnedDataset, a: f64) -> f64 {
    ds.bins()
        .iter()
        .zip(ds.offsets())
        .map(|(b, d)| b.y() * d / (1.0 + a * d))
        .sum()
}

pub fn aux_eval(ds: &BinnedDataset, a: f64) -> Result<AuxEval> {
    check_pole(ds, a)?;
    let mut out = AuxEval {
        g: 0.0,
        big_g: 0.0,
        h: 0.0,
        g2: 0.0,
    };
    for (b, d) in ds.bins().iter().zip(ds.offsets()) {
        let s = 1.0 + a * d;
        let y = b.y();
        out.g += y * d / s;
        out.big_g += y * d * d / (s * s);
        out.g2 += y * d / (s * s);
        out.h += d * d * b.width() / s;
    }
    Ok(out)
}

/// `h(a) = sum y / (1 + a d)` and `g(a)`, without pole checks.
///
/// Returns `None` when `a` sits exactly on a pole.
pub(crate) fn hg_unchecked(ds: &BinnedDataset, a: f64) -> Option<(f64, f64)> {
    let (mut h, mut g) = (0.0, 0.0);
    for (b, d) in ds.bins().iter().zip(ds.offsets()) {
        if b.count == 0 {
            continue;
        }
        let s = 1.0 + a * d;
        if s == 0.0 {
            return None;
        }
        h += b.y() / s;
        g += b.y() * d / s;
    }
    Some((h, g))
}

/// Right-hand side of the estimating equation for `a`, gap-corrected:
/// `F(a) = 1 + a R_m / 2 - M R_m / (2 g(a))`.
///
/// Evaluated as `1 - R_m h(a) / (2 g(a))`, which is the same function (since
/// `M = h + a g`) without the cancellation of two large terms at large `|a|`.
pub fn f_of_a(ds: &BinnedDataset, a: f64) -> Result<f64> {
    check_pole(ds, a)?;
    let geom = ds.geometry();
    let rm = geom.modified_range;
    if geom.m() == 0.0 {
        return Ok(1.0 + 0.5 * a * rm);
    }
    let (h, g) = hg_unchecked(ds, a).ok_or(Error::PoleProximity { bin: 0, a })?;
    let scale: f64 = ds
        .bins()
        .iter()
        .zip(ds.offsets())
        .map(|(b, d)| (b.y() * d / (1.0 + a * d)).abs())
        .sum();
    if !g.is_finite() || g.abs() <= 1e-15 * scale {
        return Err(Error::Singular { a });
    }
    Ok(1.0 - 0.5 * rm * h / g)
}

/// `F(a)` without checks, continuous across the poles of `g`, where it
/// equals `1 + a R_m / 2`.
pub(crate) fn f_unchecked(ds: &BinnedDataset, rm: f64, a: f64) -> f64 {
    match hg_unchecked(ds, a) {
        Some((h, g)) => 1.0 - 0.5 * rm * h / g,
        None => 1.0 + 0.5 * a * rm,
    }
}

/// `lambda(a) = M / (R (1 + a R / 2) - (R_G + a S_G))`.
pub fn lambda_of_a(ds: &BinnedDataset, a: f64) -> Result<f64> {
    let geom = ds.geometry();
    let r = geom.range;
    let den = r * (1.0 + 0.5 * a * r) - (geom.gap_range + a * geom.gap_moment);
    let scale = r + (0.5 * a * r * r).abs() + geom.gap_range + (a * geom.gap_moment).abs();
    if !den.is_finite() || den.abs() <= 1e-14 * scale {
        return Err(Error::ZeroDenominator { a });
    }
    Ok(geom.m() / den)
}

fn check_domain(p: &ScargleParams, ds: &BinnedDataset) -> Result<()> {
    for (i, b) in ds.bins().iter().enumerate() {
        let s = model_density(p, b.midpoint());
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Domain(format!(
                "negative model density {s} in bin {i}"
            )));
        }
        if b.count > 0 && s == 0.0 {
            return Err(Error::Domain(format!(
                "zero model density in bin {i} with {} counts",
                b.count
            )));
        }
    }
    Ok(())
}

/// Negative Poisson log-likelihood in factorized form,
/// `lambda (R - R_G) + lambda a S_1 - M ln lambda - sum y_i ln(1 + a (x_i - x_a))`,
/// dropping the parameter-free `sum (ln y_i! - y_i ln dx_i)`.
///
/// On the `lambda < 0` branch the logarithms are taken of `|lambda|` and
/// `|1 + a d_i|`, whose product is the (positive) model density.
pub fn neg_log_likelihood(p: &ScargleParams, ds: &BinnedDataset) -> Result<f64> {
    check_domain(p, ds)?;
    let m = ds.total_counts() as f64;
    if m > 0.0 && p.lambda == 0.0 {
        return Err(Error::Domain("lambda = 0 with non-zero counts".into()));
    }
    let mut linear = 0.0;
    let mut logs = 0.0;
    for b in ds.bins() {
        let s = 1.0 + p.a * (b.midpoint() - p.x_a);
        linear += s * b.width();
        if b.count > 0 {
            logs += b.y() * s.abs().ln();
        }
    }
    let log_lambda = if m > 0.0 {
        m * p.lambda.abs().ln()
    } else {
        0.0
    };
    Ok(p.lambda * linear - log_lambda - logs)
}

/// Partial derivatives of [`neg_log_likelihood`] with respect to
/// `(lambda, a)`: `(R - R_G) + a S_1 - M / lambda` and `lambda S_1 - g(a)`.
pub fn nll_gradient(p: &ScargleParams, ds: &BinnedDataset) -> Result<(f64, f64)> {
    check_domain(p, ds)?;
    let m = ds.total_counts() as f64;
    let mut linear = 0.0;
    let mut s1 = 0.0;
    let mut g = 0.0;
    for b in ds.bins() {
        let d = b.midpoint() - p.x_a;
        linear += (1.0 + p.a * d) * b.width();
        s1 += d * b.width();
        g += b.y() * d / (1.0 + p.a * d);
    }
    Ok((linear - m / p.lambda, p.lambda * s1 - g))
}

/// Minimum Cash statistic, `2 sum (mu_i - y_i + y_i ln(y_i / mu_i))`.
///
/// Zero-count bins contribute `2 mu_i`.
pub fn c_min(p: &ScargleParams, ds: &BinnedDataset) -> Result<f64> {
    let mut c = 0.0;
    for (i, b) in ds.bins().iter().enumerate() {
        let mu = model_mean(p, b);
        c += cash_term(b.count, mu).ok_or_else(|| {
            Error::Domain(format!(
                "model mean {mu} in bin {i} with {} counts",
                b.count
            ))
        })?;
    }
    // every term is non-negative; clear rounding residue at exact fits
    Ok(c.max(0.0))
}

/// One term of the Cash statistic; `None` when the mean is invalid for the count.
#[inline]
pub fn cash_term(count: u64, mu: f64) -> Option<f64> {
    if count == 0 {
        (mu >= 0.0).then_some(2.0 * mu)
    } else if mu > 0.0 {
        let y = count as f64;
        let t = 2.0 * (mu - y + y * (y / mu).ln());
        // the term is non-negative; anything within rounding of zero is zero
        Some(if t.abs() <= 8.0 * f64::EPSILON * (mu + y) {
            0.0
        } else {
            t
        })
    } else {
        None
    }
}
