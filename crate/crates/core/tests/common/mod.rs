#![allow(dead_code)]

use linpois::simulate::{poisson, replicate_rng};
use linpois::{BinnedDataset, Schema};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn load(name: &str, schema: Schema) -> BinnedDataset {
    let f = std::fs::File::open(data_path(name)).expect("data file");
    BinnedDataset::read_csv(f, schema).expect("valid data file")
}

/// Days 0-19 of the daily-deaths table.
pub fn daily_deaths() -> BinnedDataset {
    load("daily_deaths_cumulative.csv", Schema::Cumulative)
}

pub fn days_0_9() -> BinnedDataset {
    daily_deaths()
        .rebin(&(0..=9).map(|i| i..=i).collect::<Vec<_>>())
        .unwrap()
}

/// Days 2-16 with days 2-3 and 4-5 merged and day 6 dropped.
pub fn days_2_16() -> BinnedDataset {
    let mut groups = vec![2..=3, 4..=5];
    groups.extend((7..=16).map(|i| i..=i));
    daily_deaths().rebin(&groups).unwrap()
}

/// Bins with random widths, occasional gaps and Poisson counts from a
/// random non-negative line.
pub fn random_dataset(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> BinnedDataset {
    let n = rng.random_range(n_min..=n_max);
    let mut x = rng.random_range(-5.0..5.0);
    let mut edges = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random_bool(0.25) {
            x += rng.random_range(0.2..2.0);
        }
        let w = rng.random_range(0.3..2.5);
        edges.push((x, x + w));
        x += w;
    }
    let (x0, x1) = (edges[0].0, x);
    let level = rng.random_range(0.3..15.0);
    // density at the right end relative to the left
    let ratio: f64 = rng.random_range(0.02..8.0);
    let rows = edges.into_iter().map(|(lo, hi)| {
        let t = (0.5 * (lo + hi) - x0) / (x1 - x0);
        let mu = level * (1.0 + (ratio - 1.0) * t) * (hi - lo);
        (lo, hi, poisson(rng, mu) as f64)
    });
    BinnedDataset::from_edges(rows.collect::<Vec<_>>()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    replicate_rng(seed, 0)
}

/// Copy of `ds` with every edge mapped through `x -> scale * x + shift`.
pub fn transform(ds: &BinnedDataset, scale: f64, shift: f64) -> BinnedDataset {
    BinnedDataset::from_edges(
        ds.bins()
            .iter()
            .map(|b| (scale * b.x_lo + shift, scale * b.x_hi + shift, b.y()))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

/// Poisson NLL (without the `ln y!` term) for real-valued counts `y`.
pub fn nll(ds: &BinnedDataset, y: &[f64], lambda: f64, a: f64) -> f64 {
    ds.bins()
        .iter()
        .zip(y)
        .map(|(b, &yi)| {
            let mu = lambda * (1.0 + a * (b.midpoint() - ds.x_a())) * b.width();
            if yi == 0.0 {
                mu
            } else {
                mu - yi * mu.ln()
            }
        })
        .sum()
}

pub fn counts(ds: &BinnedDataset) -> Vec<f64> {
    ds.bins().iter().map(|b| b.y()).collect()
}

/// Central-difference Hessian of `nll(ds, y, ., .)` in `(lambda, a)` order.
pub fn numeric_hessian(ds: &BinnedDataset, y: &[f64], lambda: f64, a: f64) -> [[f64; 2]; 2] {
    let f = |l: f64, s: f64| nll(ds, y, l, s);
    let hl = 1e-4 * lambda.abs().max(1e-3);
    let ha = 1e-4 * a.abs().max(1e-3);
    let ll = (f(lambda + hl, a) - 2.0 * f(lambda, a) + f(lambda - hl, a)) / (hl * hl);
    let aa = (f(lambda, a + ha) - 2.0 * f(lambda, a) + f(lambda, a - ha)) / (ha * ha);
    let la = (f(lambda + hl, a + ha) - f(lambda + hl, a - ha) - f(lambda - hl, a + ha)
        + f(lambda - hl, a - ha))
        / (4.0 * hl * ha);
    [[ll, la], [la, aa]]
}

pub fn inverse2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

pub fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// NLL with `lambda` profiled out, or `None` outside the acceptable region.
pub fn profile_nll(ds: &BinnedDataset, a: f64) -> Option<f64> {
    let y = counts(ds);
    let m: f64 = y.iter().sum();
    let den: f64 = ds
        .bins()
        .iter()
        .map(|b| (1.0 + a * (b.midpoint() - ds.x_a())) * b.width())
        .sum();
    if den == 0.0 {
        return None;
    }
    let lambda = m / den;
    for (b, &yi) in ds.bins().iter().zip(&y) {
        let mu = lambda * (1.0 + a * (b.midpoint() - ds.x_a()));
        if mu < 0.0 || (yi > 0.0 && mu <= 0.0) {
            return None;
        }
    }
    Some(nll(ds, &y, lambda, a))
}

pub struct GridOptimum {
    pub a: f64,
    pub nll: f64,
    /// The optimum sits at an end of the parameterization (`a` unbounded or
    /// on the acceptability boundary).
    pub at_edge: bool,
}

/// Brute-force maximum likelihood over both acceptable branches:
/// `a = -1/d_max + s tan(t)` and `a = -1/d_min - s tan(t)`, `t` in `(0, pi/2)`,
/// scanned on a grid and polished by golden-section search.
pub fn grid_optimum(ds: &BinnedDataset) -> GridOptimum {
    let d: Vec<f64> = ds.bins().iter().map(|b| b.midpoint() - ds.x_a()).collect();
    let d_min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max = d.iter().cloned().fold(0.0, f64::max);
    let s = 1.0 / (ds.x_b() - ds.x_a());
    let half_pi = std::f64::consts::FRAC_PI_2;
    let branches = [(-1.0 / d_max, 1.0), (-1.0 / d_min, -1.0)];
    let n_grid = 4000;

    let mut best = GridOptimum {
        a: f64::NAN,
        nll: f64::INFINITY,
        at_edge: true,
    };
    for (base, dir) in branches {
        let a_of = |t: f64| base + dir * s * t.tan();
        let eval = |t: f64| profile_nll(ds, a_of(t)).unwrap_or(f64::INFINITY);
        let step = half_pi / n_grid as f64;
        let (mut k_best, mut v_best) = (0, f64::INFINITY);
        for k in 1..n_grid {
            let v = eval(k as f64 * step);
            if v < v_best {
                k_best = k;
                v_best = v;
            }
        }
        if !v_best.is_finite() {
            continue;
        }
        let (mut lo, mut hi) = ((k_best - 1) as f64 * step, (k_best + 1) as f64 * step);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = hi - gr * (hi - lo);
            let e = lo + gr * (hi - lo);
            if eval(c) < eval(e) {
                hi = e;
            } else {
                lo = c;
            }
        }
        let t = 0.5 * (lo + hi);
        let v = eval(t);
        if v < best.nll {
            best = GridOptimum {
                a: a_of(t),
                nll: v,
                at_edge: k_best == 1 || k_best == n_grid - 1,
            };
        }
    }
    best
}
