//! Pole-aware root finding for the maximum-likelihood estimate of `a`.
//!
//! `g(a)` has one pole per distinct non-zero bin, at `-1/(x_i - x_a)`, and
//! decreases monotonically between consecutive poles, so each inter-pole
//! interval holds exactly one zero of `g`. Those zeros are the poles of
//! `F(a)`, which is also decreasing between them. The acceptable root of `F`
//! lies either right of the last zero of `g` (`lambda > 0`) or left of the
//! first one (`lambda < 0`); interior roots give models that go negative
//! somewhere in the data range and are never returned.

use crate::dataset::BinnedDataset;
use crate::error::{Branch, Error, Result};
use crate::likelihood::{self, f_unchecked, g_unchecked, ScargleParams};

/// Endpoints are kept this fraction of the pole spacing away from a pole.
const POLE_OFFSET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    poles: Vec<f64>,
}

impl PoleSet {
    /// Sorted, strictly increasing, all negative.
    pub fn as_slice(&self) -> &[f64] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Tolerance on `a`, in units of `1/R` so that rescaling `x` rescales
    /// the answer exactly.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Multiplier applied to the open bracket width on each expansion.
    pub bracket_growth: f64,
    /// Largest open-bracket width tried, as a multiple of `1/R`.
    pub max_bracket_span: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_iter: 200,
            bracket_growth: 2.0,
            max_bracket_span: 1e6,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config("abs_tol must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1"));
        }
        if !(self.bracket_growth > 1.0) {
            return Err(Error::Config("bracket_growth must exceed 1"));
        }
        if !(self.max_bracket_span > 0.0) {
            return Err(Error::Config("max_bracket_span must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScargleFit {
    pub params: ScargleParams,
    pub c_min: f64,
    /// Final bisection bracket around `a_hat`.
    pub a_bracket: (f64, f64),
    pub iterations: usize,
    pub branch: Branch,
}

impl ScargleFit {
    pub fn a_hat(&self) -> f64 {
        self.params.a
    }

    pub fn lambda_hat(&self) -> f64 {
        self.params.lambda
    }
}

pub fn poles(ds: &BinnedDataset) -> Result<PoleSet> {
    let mut poles: Vec<f64> = ds
        .bins()
        .iter()
        .zip(ds.offsets())
        .filter(|(b, _)| b.count > 0)
        .map(|(_, d)| -1.0 / d)
        .collect();
    if poles.is_empty() {
        return Err(Error::AllZeroCounts);
    }
    poles.sort_by(f64::total_cmp);
    poles.dedup();
    Ok(PoleSet { poles })
}

struct Bisection {
    root: f64,
    bracket: (f64, f64),
    iterations: usize,
}

/// Bisects a decreasing function with `f(lo) > 0 > f(hi)`.
fn bisect_decreasing(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<Bisection> {
    let mut iterations = 0;
    loop {
        let tol = abs_tol + 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
        if hi - lo <= tol {
            break;
        }
        if iterations == max_iter {
            return Err(Error::MaxIterations { max_iter });
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm > 0.0 {
            lo = mid;
        } else if fm < 0.0 {
            hi = mid;
        } else {
            return Ok(Bisection {
                root: mid,
                bracket: (mid, mid),
                iterations,
            });
        }
    }
    Ok(Bisection {
        root: lo + 0.5 * (hi - lo),
        bracket: (lo, hi),
        iterations,
    })
}

/// The zero of `g` between poles `lo` and `hi`, with its bracket.
fn zero_between(ds: &BinnedDataset, lo: f64, hi: f64, cfg: &SolverConfig) -> Result<Bisection> {
    let eps = POLE_OFFSET * (hi - lo);
    let tol = cfg.abs_tol / ds.geometry().range;
    bisect_decreasing(
        |a| g_unchecked(ds, a),
        lo + eps,
        hi - eps,
        tol,
        cfg.max_iter,
    )
}

/// All `n - 1` zeros of `g`, one between each pair of consecutive poles.
pub fn zeros_of_g(ds: &BinnedDataset, cfg: &SolverConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let p = poles(ds)?;
    if p.len() < 2 {
        return Err(Error::Identifiability { n_nonzero: p.len() });
    }
    p.poles
        .windows(2)
        .map(|w| zero_between(ds, w[0], w[1], cfg).map(|b| b.root))
        .collect()
}

struct Candidate {
    a: f64,
    bracket: (f64, f64),
    iterations: usize,
}

fn search_branch(
    ds: &BinnedDataset,
    poles: &[f64],
    branch: Branch,
    cfg: &SolverConfig,
) -> Result<Candidate> {
    let geom = ds.geometry();
    let rm = geom.modified_range;
    let f = |a: f64| f_unchecked(ds, rm, a);
    let n = poles.len();
    let unit = 1.0 / geom.range;
    let limit = cfg.max_bracket_span * unit;

    // Inner endpoint sits on the far side of the zero of g, where F is
    // effectively infinite with the sign that starts the bracket.
    let (mut inner, sign) = match branch {
        Branch::LastZero => (
            zero_between(ds, poles[n - 2], poles[n - 1], cfg)?.bracket.1,
            1.0,
        ),
        Branch::FirstZero => (zero_between(ds, poles[0], poles[1], cfg)?.bracket.0, -1.0),
    };
    // an exact zero of g leaves the endpoint on the singularity of F
    for _ in 0..16 {
        if sign * f(inner) > 0.0 {
            break;
        }
        inner = match branch {
            Branch::LastZero => inner.next_up(),
            Branch::FirstZero => inner.next_down(),
        };
    }
    let inner = inner;
    let no_change = |outer: f64| {
        let (lo, hi) = match branch {
            Branch::LastZero => (inner, outer),
            Branch::FirstZero => (outer, inner),
        };
        Error::NoSignChange { branch, lo, hi }
    };
    if !(sign * f(inner) > 0.0) {
        return Err(no_change(inner));
    }

    let direction = match branch {
        Branch::LastZero => 1.0,
        Branch::FirstZero => -1.0,
    };
    let mut step = unit;
    let mut outer = inner + direction * step;
    loop {
        let fo = f(outer);
        if fo.is_nan() {
            return Err(no_change(outer));
        }
        if sign * fo <= 0.0 {
            break;
        }
        step *= cfg.bracket_growth;
        if step > limit {
            return Err(no_change(outer));
        }
        outer = inner + direction * step;
    }

    let (lo, hi) = match branch {
        Branch::LastZero => (inner, outer),
        Branch::FirstZero => (outer, inner),
    };
    let b = bisect_decreasing(f, lo, hi, cfg.abs_tol * unit, cfg.max_iter)?;
    Ok(Candidate {
        a: b.root,
        bracket: b.bracket,
        iterations: b.iterations,
    })
}

fn finish(ds: &BinnedDataset, c: Candidate, branch: Branch) -> Result<ScargleFit> {
    let lambda = likelihood::lambda_of_a(ds, c.a)?;
    let params = ScargleParams::new(lambda, c.a, ds.x_a());
    if !params.is_acceptable(ds) {
        return Err(Error::NotAcceptable);
    }
    let c_min = likelihood::c_min(&params, ds)?;
    Ok(ScargleFit {
        params,
        c_min,
        a_bracket: c.bracket,
        iterations: c.iterations,
        branch,
    })
}

/// Maximum-likelihood fit of the factorized linear model.
///
/// Searches right of the last zero of `g` first; if that yields no root or
/// an unacceptable model, searches left of the first zero.
pub fn solve(ds: &BinnedDataset, cfg: &SolverConfig) -> Result<ScargleFit> {
    cfg.validate()?;
    if ds.total_counts() == 0 {
        return Err(Error::AllZeroCounts);
    }
    let p = poles(ds)?;
    if p.len() < 2 {
        return Err(Error::Identifiability { n_nonzero: p.len() });
    }

    let last = search_branch(ds, &p.poles, Branch::LastZero, cfg)
        .and_then(|c| finish(ds, c, Branch::LastZero));
    let last_err = match last {
        Ok(fit) => return Ok(fit),
        Err(e) => e,
    };
    let first = search_branch(ds, &p.poles, Branch::FirstZero, cfg)
        .and_then(|c| finish(ds, c, Branch::FirstZero));
    match (first, last_err) {
        (Ok(fit), _) => Ok(fit),
        (Err(Error::NoSignChange { .. }), e @ Error::NoSignChange { .. }) => Err(e),
        (Err(e @ Error::MaxIterations { .. }), _) | (_, e @ Error::MaxIterations { .. }) => Err(e),
        _ => Err(Error::NotAcceptable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn days_0_9() -> BinnedDataset {
        let counts = [0., 1., 2., 3., 4., 2., 0., 3., 4., 3.];
        BinnedDataset::from_edges(
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64, i as f64 + 1.0, c)),
        )
        .unwrap()
    }

    fn two_bins() -> BinnedDataset {
        BinnedDataset::from_edges([(0.0, 1.0, 1.0), (1.0, 2.0, 2.0)]).unwrap()
    }

    #[test]
    fn poles_days_0_9() {
        let p = poles(&days_0_9()).unwrap();
        let expected: Vec<f64> = [1.5, 2.5, 3.5, 4.5, 5.5, 7.5, 8.5, 9.5]
            .iter()
            .map(|d| -1.0 / d)
            .collect();
        assert_eq!(p.as_slice(), expected.as_slice());
    }

    #[test]
    fn poles_single_and_empty() {
        let ds = BinnedDataset::from_edges([(0.0, 1.0, 3.0)]).unwrap();
        assert_eq!(poles(&ds).unwrap().as_slice(), &[-2.0]);
        let zeros = BinnedDataset::from_edges([(0.0, 1.0, 0.0), (1.0, 2.0, 0.0)]).unwrap();
        assert!(matches!(poles(&zeros), Err(Error::AllZeroCounts)));
    }

    #[test]
    fn duplicate_midpoints_merge() {
        // the two bins share a midpoint only if they coincide, so build two
        // datasets whose nonzero bins are distinct but one has a zero bin
        let ds =
            BinnedDataset::from_edges([(0.0, 1.0, 0.0), (1.0, 2.0, 2.0), (2.0, 3.0, 1.0)]).unwrap();
        assert_eq!(poles(&ds).unwrap().len(), 2);
    }

    #[test]
    fn zeros_interleave_poles() {
        let ds = days_0_9();
        let cfg = SolverConfig::default();
        let z = zeros_of_g(&ds, &cfg).unwrap();
        let p = poles(&ds).unwrap();
        assert_eq!(z.len(), 7);
        for (k, zk) in z.iter().enumerate() {
            assert!(p.as_slice()[k] < *zk && *zk < p.as_slice()[k + 1]);
        }
    }

    #[test]
    fn zero_two_bins() {
        let z = zeros_of_g(&two_bins(), &SolverConfig::default()).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - (-3.5 / 2.25)).abs() < 1e-11, "{}", z[0]);
    }

    #[test]
    fn zeros_need_two_nonzero_bins() {
        let ds = BinnedDataset::from_edges([(0.0, 1.0, 0.0), (1.0, 2.0, 4.0)]).unwrap();
        assert!(matches!(
            zeros_of_g(&ds, &SolverConfig::default()),
            Err(Error::Identifiability { n_nonzero: 1 })
        ));
        assert!(matches!(
            solve(&ds, &SolverConfig::default()),
            Err(Error::Identifiability { n_nonzero: 1 })
        ));
    }

    #[test]
    fn solve_days_0_9() {
        let fit = solve(&days_0_9(), &SolverConfig::default()).unwrap();
        assert!((fit.a_hat() - 0.63).abs() < 0.01, "{}", fit.a_hat());
        assert!(
            (fit.lambda_hat() - 0.53).abs() < 0.01,
            "{}",
            fit.lambda_hat()
        );
        assert_eq!(fit.branch, Branch::LastZero);
        assert!(fit.a_bracket.0 <= fit.a_hat() && fit.a_hat() <= fit.a_bracket.1);
        assert!(fit.a_bracket.1 - fit.a_bracket.0 < 1e-11);
    }

    #[test]
    fn solve_two_bin_exact_fit() {
        let fit = solve(&two_bins(), &SolverConfig::default()).unwrap();
        assert_relative_eq!(fit.a_hat(), 2.0, max_relative = 1e-10);
        assert_relative_eq!(fit.lambda_hat(), 0.5, max_relative = 1e-10);
        assert!(fit.c_min.abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_empty_counts() {
        let ds = BinnedDataset::from_edges([(0.0, 1.0, 0.0), (1.0, 2.0, 0.0)]).unwrap();
        assert!(matches!(
            solve(&ds, &SolverConfig::default()),
            Err(Error::AllZeroCounts)
        ));
    }

    #[test]
    fn boundary_root_reports_no_sign_change() {
        // counts 0, 1, 2 on unit bins: the best line passes through zero at x_a,
        // pushing a to infinity
        let ds =
            BinnedDataset::from_edges([(0.0, 1.0, 1.0), (1.0, 2.0, 3.0), (2.0, 3.0, 5.0)]).unwrap();
        // intercept at x_a = 0 of the ML line is exactly zero: sum y/d = 2M/R
        let g = ds.geometry();
        let s: f64 = ds
            .bins()
            .iter()
            .zip(ds.offsets())
            .map(|(b, d)| b.y() / d)
            .sum();
        assert_relative_eq!(s, 2.0 * g.m() / g.modified_range, max_relative = 1e-12);
        assert!(matches!(
            solve(&ds, &SolverConfig::default()),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn steep_rise_uses_first_branch() {
        // collinear densities 1, 10, 19 cross zero between x_a and the first
        // midpoint, so lambda (the density at x_a) is negative
        let ds = BinnedDataset::from_edges([(0.0, 1.0, 1.0), (1.0, 2.0, 10.0), (2.0, 3.0, 19.0)])
            .unwrap();
        let fit = solve(&ds, &SolverConfig::default()).unwrap();
        assert_eq!(fit.branch, Branch::FirstZero);
        assert_relative_eq!(fit.lambda_hat(), -3.5, max_relative = 1e-9);
        assert_relative_eq!(fit.a_hat(), -18.0 / 7.0, max_relative = 1e-9);
        assert!(fit.c_min.abs() < 1e-9);
        assert!(fit.params.is_acceptable(&ds));
        let (dl, da) = likelihood::nll_gradient(&fit.params, &ds).unwrap();
        assert!(dl.abs() / 30.0 < 1e-9 && da.abs() / 30.0 < 1e-9);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            abs_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(solve(&two_bins(), &bad), Err(Error::Config(_))));
        let bad = SolverConfig {
            max_iter: 0,
            ..Default::default()
        };
        assert!(matches!(solve(&two_bins(), &bad), Err(Error::Config(_))));
    }
}
