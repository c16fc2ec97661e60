//! Reference regressions: ordinary least squares with standard and
//! Poisson-based errors, the t test on the OLS slope, and the weighted
//! chi-square fit that treats counts as Gaussian with variance `y`.

use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::special::student_t_two_sided;

/// OLS fit of `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OlsFit {
    /// Intercept.
    pub a: f64,
    /// Slope.
    pub b: f64,
    /// Residual variance with `N - 2` in the denominator.
    pub sigma2_hat: f64,
    /// `N sum x^2 - (sum x)^2`.
    pub determinant: f64,
    /// Standard error matrix, `(a, b)` order.
    pub cov_standard: [[f64; 2]; 2],
    pub n: usize,
}

impl OlsFit {
    pub fn sigma_a(&self) -> f64 {
        self.cov_standard[0][0].sqrt()
    }

    pub fn sigma_b(&self) -> f64 {
        self.cov_standard[1][1].sqrt()
    }
}

/// OLS parameter errors under heteroskedastic (e.g. Poisson) measurement errors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoissonCov {
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaldReport {
    pub r2: f64,
    pub t: f64,
    /// Two-sided, `N - 2` degrees of freedom.
    pub p: f64,
    pub var_b_nonparam: f64,
    pub var_a_nonparam: f64,
}

/// Weighted least-squares line through densities `y/dx`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Chi2Fit {
    /// `(intercept, slope)` of the density line.
    pub params: (f64, f64),
    pub chi2_min: f64,
    pub cov: [[f64; 2]; 2],
    pub slope_error: f64,
}

/// OLS applied to a binned dataset, with both error estimates on the slope.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OlsReport {
    pub fit: OlsFit,
    pub poisson: PoissonCov,
    pub slope: f64,
    pub slope_sigma_standard: f64,
    pub slope_sigma_poisson: f64,
}

struct Sums {
    n: f64,
    sx: f64,
    sxx: f64,
    det: f64,
}

fn sums(points: &[(f64, f64)]) -> Result<Sums> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { n: points.len() });
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let det = n * sxx - sx * sx;
    // relative to the centered spread, which is what det measures
    let mean = sx / n;
    let spread: f64 = points.iter().map(|p| (p.0 - mean).powi(2)).sum();
    if !(spread > 0.0) || !(det > 0.0) {
        return Err(Error::DegenerateX);
    }
    Ok(Sums { n, sx, sxx, det })
}

pub fn ols_fit(points: &[(f64, f64)]) -> Result<OlsFit> {
    let s = sums(points)?;
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let a = (s.sxx * sy - s.sx * sxy) / s.det;
    let b = (s.n * sxy - s.sx * sy) / s.det;
    let ssr: f64 = points.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let sigma2_hat = ssr / (s.n - 2.0);
    let k = sigma2_hat / s.det;
    Ok(OlsFit {
        a,
        b,
        sigma2_hat,
        determinant: s.det,
        cov_standard: [[k * s.sxx, -k * s.sx], [-k * s.sx, k * s.n]],
        n: points.len(),
    })
}

/// OLS errors for given per-point variances.
pub fn ols_cov_with_variances(points: &[(f64, f64)], variances: &[f64]) -> Result<PoissonCov> {
    let s = sums(points)?;
    assert_eq!(points.len(), variances.len());
    let (mut va, mut vb, mut sv, mut sxv, mut sxxv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(x, _), &v) in points.iter().zip(variances) {
        va += (s.sxx - x * s.sx).powi(2) * v;
        vb += (s.n * x - s.sx).powi(2) * v;
        sv += v;
        sxv += x * v;
        sxxv += x * x * v;
    }
    let d2 = s.det * s.det;
    let cov = ((s.n * s.sxx + s.sx * s.sx) * sxv - s.sx * (s.sxx * sv + s.n * sxxv)) / d2;
    Ok(PoissonCov {
        var_a: va / d2,
        var_b: vb / d2,
        cov_ab: cov,
    })
}

/// OLS errors with each point's variance set to the fitted line, as for
/// Poisson counts.
pub fn ols_poisson_cov(fit: &OlsFit, points: &[(f64, f64)]) -> Result<PoissonCov> {
    let variances = points
        .iter()
        .enumerate()
        .map(|(i, &(x, _))| {
            let v = fit.a + fit.b * x;
            if v < 0.0 {
                Err(Error::NegativeVarianceProxy { index: i, value: v })
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ols_cov_with_variances(points, &variances)
}

/// t test of zero slope with the distribution-free slope variance.
pub fn wald_test(points: &[(f64, f64)]) -> Result<WaldReport> {
    let s = sums(points)?;
    let n = s.n;
    let mx = s.sx / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx_c, mut syy_c, mut sxy_c) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx_c += (x - mx).powi(2);
        syy_c += (y - my).powi(2);
        sxy_c += (x - mx) * (y - my);
    }
    if syy_c == 0.0 {
        // flat data: no slope and nothing to test
        return Ok(WaldReport {
            r2: 0.0,
            t: 0.0,
            p: 1.0,
            var_b_nonparam: 0.0,
            var_a_nonparam: 0.0,
        });
    }
    let b = sxy_c / sxx_c;
    let b_prime = sxy_c / syy_c;
    let r2 = (b * b_prime).clamp(0.0, 1.0);
    let var_b = (1.0 - r2) / (n - 2.0) * syy_c / sxx_c;
    if !(var_b > 0.0) {
        return Err(Error::ZeroVariance(
            "slope variance vanishes for collinear data",
        ));
    }
    let var_a = var_b * (sxx_c / n + mx * mx);
    let t = b / var_b.sqrt();
    let p = student_t_two_sided(t, n - 2.0)?;
    Ok(WaldReport {
        r2,
        t,
        p,
        var_b_nonparam: var_b,
        var_a_nonparam: var_a,
    })
}

/// Chi-square fit with variance `y_i` in each bin, done as weighted least
/// squares on densities `y_i/dx_i` with errors `sqrt(y_i)/dx_i`.
pub fn chi2_fit(ds: &BinnedDataset) -> Result<Chi2Fit> {
    if ds.len() < 3 {
        return Err(Error::InsufficientPoints { n: ds.len() });
    }
    let mut rows = Vec::with_capacity(ds.len());
    for (i, b) in ds.bins().iter().enumerate() {
        if b.count == 0 {
            return Err(Error::ZeroCountBin { index: i });
        }
        let dx = b.width();
        rows.push((b.midpoint(), b.y() / dx, dx * dx / b.y()));
    }
    let (mut sw, mut swx, mut swxx, mut swz, mut swxz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, z, w) in &rows {
        sw += w;
        swx += w * x;
        swxx += w * x * x;
        swz += w * z;
        swxz += w * x * z;
    }
    let det = sw * swxx - swx * swx;
    if !(det > 0.0) {
        return Err(Error::DegenerateX);
    }
    let c0 = (swxx * swz - swx * swxz) / det;
    let c1 = (sw * swxz - swx * swz) / det;
    let chi2_min = rows
        .iter()
        .map(|&(x, z, w)| w * (z - c0 - c1 * x).powi(2))
        .sum();
    let cov = [[swxx / det, -swx / det], [-swx / det, sw / det]];
    Ok(Chi2Fit {
        params: (c0, c1),
        chi2_min,
        cov,
        slope_error: cov[1][1].sqrt(),
    })
}

/// OLS on `(midpoint, count/width)` pairs.
///
/// The Poisson variance of a density point is the fitted density divided by
/// the bin width; with unit bins this is the fitted count.
pub fn ols_on_dataset(ds: &BinnedDataset) -> Result<OlsReport> {
    let points: Vec<(f64, f64)> = ds
        .bins()
        .iter()
        .map(|b| (b.midpoint(), b.y() / b.width()))
        .collect();
    let fit = ols_fit(&points)?;
    let variances = ds
        .bins()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let v = fit.a + fit.b * b.midpoint();
            if v < 0.0 {
                Err(Error::NegativeVarianceProxy { index: i, value: v })
            } else {
                Ok(v / b.width())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let poisson = ols_cov_with_variances(&points, &variances)?;
    Ok(OlsReport {
        fit,
        poisson,
        slope: fit.b,
        slope_sigma_standard: fit.sigma_b(),
        slope_sigma_poisson: poisson.var_b.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn days_0_9_points() -> Vec<(f64, f64)> {
        [0., 1., 2., 3., 4., 2., 0., 3., 4., 3.]
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as f64 + 0.5, c))
            .collect()
    }

    #[test]
    fn ols_days_0_9() {
        let f = ols_fit(&days_0_9_points()).unwrap();
        assert!((f.a - 0.93).abs() < 0.005 && (f.b - 0.25).abs() < 0.005);
        assert!((f.sigma_a() - 0.85).abs() < 0.005);
        assert!((f.sigma_b() - 0.15).abs() < 0.005);
        assert!((f.sigma2_hat - 1.78).abs() < 0.005);
    }

    #[test]
    fn ols_exact_line() {
        let f = ols_fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!(f.a.abs() < 1e-15 && (f.b - 1.0).abs() < 1e-15);
        assert!(f.sigma2_hat.abs() < 1e-30);
    }

    #[test]
    fn ols_degenerate() {
        assert!(matches!(
            ols_fit(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]),
            Err(Error::DegenerateX)
        ));
        assert!(matches!(
            ols_fit(&[(1.0, 0.0), (2.0, 1.0)]),
            Err(Error::InsufficientPoints { n: 2 })
        ));
    }

    #[test]
    fn poisson_cov_days_0_9() {
        let pts = days_0_9_points();
        let f = ols_fit(&pts).unwrap();
        let c = ols_poisson_cov(&f, &pts).unwrap();
        assert!((c.var_a.sqrt() - 0.80).abs() < 0.005);
        assert!((c.var_b.sqrt() - 0.16).abs() < 0.005);
        assert!((c.cov_ab + 0.11).abs() < 0.005);
    }

    #[test]
    fn constant_variance_reproduces_standard_matrix() {
        let pts = days_0_9_points();
        let f = ols_fit(&pts).unwrap();
        let c = ols_cov_with_variances(&pts, &vec![f.sigma2_hat; pts.len()]).unwrap();
        assert_relative_eq!(c.cov_ab, f.cov_standard[0][1], max_relative = 1e-10);
        assert_relative_eq!(c.var_a, f.cov_standard[0][0], max_relative = 1e-10);
        assert_relative_eq!(c.var_b, f.cov_standard[1][1], max_relative = 1e-10);
    }

    #[test]
    fn negative_proxy_is_refused() {
        let pts = [(0.0, 5.0), (1.0, 2.0), (2.0, 0.0), (3.0, 0.0)];
        let f = ols_fit(&pts).unwrap();
        assert!(matches!(
            ols_poisson_cov(&f, &pts),
            Err(Error::NegativeVarianceProxy { index: 3, .. })
        ));
    }

    #[test]
    fn wald_days_0_9() {
        let w = wald_test(&days_0_9_points()).unwrap();
        assert!((w.r2 - 0.273).abs() < 0.0005);
        assert!((w.t - 1.73).abs() < 0.005);
        assert!((w.p - 0.12).abs() < 0.005);
    }

    #[test]
    fn wald_degenerate_cases() {
        assert!(matches!(
            wald_test(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]),
            Err(Error::ZeroVariance(_))
        ));
        let w = wald_test(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]).unwrap();
        assert_eq!((w.t, w.p), (0.0, 1.0));
    }

    #[test]
    fn chi2_equal_counts_match_ols() {
        let ds =
            BinnedDataset::from_edges((0..6).map(|i| (i as f64, i as f64 + 1.0, 7.0))).unwrap();
        let c = chi2_fit(&ds).unwrap();
        let pts: Vec<_> = ds.bins().iter().map(|b| (b.midpoint(), b.y())).collect();
        let o = ols_fit(&pts).unwrap();
        assert!((c.params.0 - o.a).abs() < 1e-10 && (c.params.1 - o.b).abs() < 1e-10);
    }

    #[test]
    fn chi2_refuses_zero_bins() {
        let ds =
            BinnedDataset::from_edges([(0.0, 1.0, 1.0), (1.0, 2.0, 0.0), (2.0, 3.0, 2.0)]).unwrap();
        assert!(matches!(
            chi2_fit(&ds),
            Err(Error::ZeroCountBin { index: 1 })
        ));
    }

    #[test]
    fn ols_on_uniform_dataset_equals_count_ols() {
        let ds = BinnedDataset::from_edges(
            days_0_9_points()
                .iter()
                .map(|&(x, y)| (x - 0.5, x + 0.5, y)),
        )
        .unwrap();
        let r = ols_on_dataset(&ds).unwrap();
        let pts = days_0_9_points();
        let f = ols_fit(&pts).unwrap();
        let c = ols_poisson_cov(&f, &pts).unwrap();
        assert_relative_eq!(r.slope_sigma_poisson, c.var_b.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.slope, f.b, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn residuals_orthogonal(ys in prop::collection::vec(0.0f64..50.0, 3..30)) {
            let pts: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 0.7 + 1.0, y)).collect();
            let f = ols_fit(&pts).unwrap();
            let scale: f64 = pts.iter().map(|p| p.1.abs() * (1.0 + p.0)).sum::<f64>() + 1.0;
            let r: f64 = pts.iter().map(|p| p.1 - f.a - f.b * p.0).sum();
            let rx: f64 = pts.iter().map(|p| p.0 * (p.1 - f.a - f.b * p.0)).sum();
            prop_assert!(r.abs() < 1e-9 * scale && rx.abs() < 1e-9 * scale);
        }

        #[test]
        fn covariance_closed_form_matches_propagation(
            vs in prop::collection::vec(0.1f64..20.0, 3..20)
        ) {
            let pts: Vec<_> = vs.iter().enumerate().map(|(i, _)| (i as f64 + 0.5, 0.0)).collect();
            let c = ols_cov_with_variances(&pts, &vs).unwrap();
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let det = n * sxx - sx * sx;
            let direct: f64 = pts.iter().zip(&vs).map(|(p, v)| {
                (sxx - p.0 * sx) / det * (n * p.0 - sx) / det * v
            }).sum();
            prop_assert!((c.cov_ab - direct).abs() < 1e-10 * direct.abs().max(1e-3));
        }
    }
}
