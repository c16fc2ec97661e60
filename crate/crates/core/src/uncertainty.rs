//! Parameter covariance at the fitted point, two ways: inverse of the
//! expected information, and first-order propagation of the count errors
//! through the estimating equations. Also errors on derived quantities and
//! the pointwise confidence band.

use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::likelihood::{aux_eval, model_mean, ScargleParams};

/// Expected information in `(lambda, a)` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoMatrix {
    pub lambda_lambda: f64,
    pub lambda_a: f64,
    pub a_a: f64,
}

impl InfoMatrix {
    pub fn determinant(&self) -> f64 {
        self.lambda_lambda * self.a_a - self.lambda_a * self.lambda_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMethod {
    Fisher,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CovMatrix2 {
    pub var_a: f64,
    pub var_lambda: f64,
    pub cov_a_lambda: f64,
    /// Determinant of the information matrix at the fit.
    pub determinant_info: f64,
    pub method: CovMethod,
}

impl CovMatrix2 {
    pub fn sigma_a(&self) -> f64 {
        self.var_a.sqrt()
    }

    pub fn sigma_lambda(&self) -> f64 {
        self.var_lambda.sqrt()
    }

    pub fn correlation(&self) -> f64 {
        self.cov_a_lambda / (self.var_a * self.var_lambda).sqrt()
    }
}

/// Per-bin variance used when propagating count errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    /// Fitted expectation in each bin.
    #[default]
    ModelMean,
    /// Observed count in each bin.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derived {
    /// `a * lambda`.
    Slope,
    /// `lambda * (1 - a * x_a)`, the line at `x = 0`.
    Intercept,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandPoint {
    pub x: f64,
    /// Expected counts in an interval of width `dx` at `x`.
    pub y_hat: f64,
    pub sigma: f64,
}

fn check_boundary(p: &ScargleParams, ds: &BinnedDataset) -> Result<()> {
    if p.lambda == 0.0 || !p.lambda.is_finite() || !p.a.is_finite() {
        return Err(Error::Domain(format!("lambda = {}, a = {}", p.lambda, p.a)));
    }
    for (i, d) in ds.offsets().enumerate() {
        if (1.0 + p.a * d).abs() <= crate::likelihood::POLE_TOLERANCE {
            return Err(Error::BoundarySingular { bin: i });
        }
    }
    Ok(())
}

pub fn fisher_information(p: &ScargleParams, ds: &BinnedDataset) -> Result<InfoMatrix> {
    check_boundary(p, ds)?;
    let geom = ds.geometry();
    let h: f64 = ds
        .bins()
        .iter()
        .zip(ds.offsets())
        .map(|(b, d)| d * d * b.width() / (1.0 + p.a * d))
        .sum();
    Ok(InfoMatrix {
        lambda_lambda: geom.covered() / p.lambda + p.a * geom.s1 / p.lambda,
        lambda_a: geom.s1,
        a_a: p.lambda * h,
    })
}

/// Inverse of the expected information.
pub fn covariance_fisher(p: &ScargleParams, ds: &BinnedDataset) -> Result<CovMatrix2> {
    let info = fisher_information(p, ds)?;
    let det = info.determinant();
    if !(det > 0.0) {
        return Err(Error::NonPositiveDeterminant { det });
    }
    Ok(CovMatrix2 {
        var_a: info.lambda_lambda / det,
        var_lambda: info.a_a / det,
        cov_a_lambda: -info.lambda_a / det,
        determinant_info: det,
        method: CovMethod::Fisher,
    })
}

/// Partial derivatives of `(a_hat, lambda_hat)` with respect to each count.
pub fn estimate_partials(p: &ScargleParams, ds: &BinnedDataset) -> Result<Vec<(f64, f64)>> {
    check_boundary(p, ds)?;
    let geom = ds.geometry();
    let aux = aux_eval(ds, p.a)?;
    let k = 2.0 / geom.modified_range;
    let den_a = aux.g2 - k * aux.big_g;
    let scale = aux.g2.abs() + k * aux.big_g.abs();
    if !den_a.is_finite() || den_a.abs() <= 1e-14 * scale {
        return Err(Error::ZeroDenominator { a: p.a });
    }
    let covered = geom.covered();
    let dl = covered + p.a * geom.s1;
    let m = geom.m();
    Ok(ds
        .offsets()
        .map(|d| {
            let da = (1.0 - k * d) / (1.0 + p.a * d) / den_a;
            let dlam = (dl - m * geom.s1 * da) / (dl * dl);
            (da, dlam)
        })
        .collect())
}

/// First-order propagation of per-bin count variances.
pub fn covariance_delta(
    p: &ScargleParams,
    ds: &BinnedDataset,
    source: VarianceSource,
) -> Result<CovMatrix2> {
    let partials = estimate_partials(p, ds)?;
    let (mut var_a, mut var_lambda, mut cov) = (0.0, 0.0, 0.0);
    for (b, (da, dlam)) in ds.bins().iter().zip(partials) {
        let s2 = match source {
            VarianceSource::ModelMean => model_mean(p, b),
            VarianceSource::Observed => b.y(),
        };
        var_a += da * da * s2;
        var_lambda += dlam * dlam * s2;
        cov += da * dlam * s2;
    }
    let determinant_info = fisher_information(p, ds)?.determinant();
    Ok(CovMatrix2 {
        var_a,
        var_lambda,
        cov_a_lambda: cov,
        determinant_info,
        method: CovMethod::Delta,
    })
}

fn propagate(d_lambda: f64, d_a: f64, cov: &CovMatrix2) -> f64 {
    let v = d_lambda * d_lambda * cov.var_lambda
        + d_a * d_a * cov.var_a
        + 2.0 * d_lambda * d_a * cov.cov_a_lambda;
    v.max(0.0).sqrt()
}

/// Value and one-sigma error of the slope or intercept of the line.
pub fn derived_error(p: &ScargleParams, cov: &CovMatrix2, which: Derived) -> (f64, f64) {
    match which {
        Derived::Slope => (p.slope(), propagate(p.a, p.lambda, cov)),
        Derived::Intercept => (
            p.intercept(),
            propagate(1.0 - p.a * p.x_a, -p.lambda * p.x_a, cov),
        ),
    }
}

/// Expected counts in `[x - dx/2, x + dx/2)` with their propagated error.
pub fn confidence_band(p: &ScargleParams, cov: &CovMatrix2, xs: &[f64], dx: f64) -> Vec<BandPoint> {
    xs.iter()
        .map(|&x| {
            let u = x - p.x_a;
            let d_lambda = (1.0 + p.a * u) * dx;
            let d_a = p.lambda * u * dx;
            BandPoint {
                x,
                y_hat: p.lambda * d_lambda,
                sigma: propagate(d_lambda, d_a, cov),
            }
        })
        .collect()
}
