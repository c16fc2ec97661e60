//! Text, JSON and CSV output.
//!
//! JSON carries full precision so that it parses back to the same numbers;
//! CSV uses six significant digits, tables two or three decimals.

use crate::{Analysis, CovArg, Format, MethodRow};
use linpois::gof::GofMethod;
use linpois::simulate::{CalibrationSummary, ParamSummary};
use linpois::uncertainty::{BandPoint, CovMatrix2};
use std::fmt::Write;

/// Decimal rendering with six significant digits (trailing zeros kept).
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // round first so that e.g. 9.9999996 picks the exponent of 10
    let r: f64 = format!("{x:.5e}").parse().unwrap();
    if r == 0.0 {
        return "0".into();
    }
    let exp = r.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{r:.decimals$}")
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn method_name(m: CovArg) -> &'static str {
    match m {
        CovArg::Fisher => "fisher",
        CovArg::Delta => "delta",
    }
}

#[derive(serde::Serialize)]
struct FitJson {
    a_hat: f64,
    lambda_hat: f64,
    var_a: f64,
    var_lambda: f64,
    cov_a_lambda: f64,
    cov_method: &'static str,
    c_min: f64,
    dof: usize,
    critical_value: f64,
    reject: bool,
    slope: f64,
    slope_sigma: f64,
}

pub fn fit(an: &Analysis, format: Format) -> String {
    let cov = an.cov();
    let (slope, slope_sigma) = an.slope();
    let j = FitJson {
        a_hat: an.fit.a_hat(),
        lambda_hat: an.fit.lambda_hat(),
        var_a: cov.var_a,
        var_lambda: cov.var_lambda,
        cov_a_lambda: cov.cov_a_lambda,
        cov_method: method_name(an.chosen),
        c_min: an.gof.c_min,
        dof: an.gof.dof,
        critical_value: an.gof.critical_value,
        reject: an.gof.reject,
        slope,
        slope_sigma,
    };
    match format {
        Format::Json => json(&j),
        Format::Csv => {
            let mut s = String::from(
                "a_hat,lambda_hat,var_a,var_lambda,cov_a_lambda,cov_method,c_min,dof,critical_value,reject,slope,slope_sigma\n",
            );
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                sig6(j.a_hat),
                sig6(j.lambda_hat),
                sig6(j.var_a),
                sig6(j.var_lambda),
                sig6(j.cov_a_lambda),
                j.cov_method,
                sig6(j.c_min),
                j.dof,
                sig6(j.critical_value),
                j.reject,
                sig6(j.slope),
                sig6(j.slope_sigma)
            );
            s
        }
        Format::Table => fit_table(an, &j),
    }
}

fn cov_line(s: &mut String, label: &str, c: &CovMatrix2) {
    let _ = writeln!(
        s,
        "  {label:<8} var_a {:>8.3}  var_lambda {:>8.3}  cov {:>8.3}  corr {:>6.3}",
        c.var_a,
        c.var_lambda,
        c.cov_a_lambda,
        c.correlation()
    );
}

fn fit_table(an: &Analysis, j: &FitJson) -> String {
    let g = an.ds.geometry();
    let cov = an.cov();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "data         {} bins, {} counts, x_A = {}, x_B = {}",
        an.ds.len(),
        an.ds.total_counts(),
        an.ds.x_a(),
        an.ds.x_b()
    );
    if !an.ds.gaps().is_empty() {
        let _ = writeln!(
            s,
            "gaps         {} (total width {:.3})",
            an.ds.gaps().len(),
            g.gap_range
        );
    }
    let _ = writeln!(s, "a_hat        {:.3} ± {:.3}", j.a_hat, cov.sigma_a());
    let _ = writeln!(
        s,
        "lambda_hat   {:.3} ± {:.3}",
        j.lambda_hat,
        cov.sigma_lambda()
    );
    let _ = writeln!(s, "slope        {:.3} ± {:.3}", j.slope, j.slope_sigma);
    let _ = writeln!(s, "intercept    {:.3}", an.fit.params.intercept());
    let _ = writeln!(s, "covariance   (errors above use {})", j.cov_method);
    cov_line(&mut s, "fisher", &an.fisher);
    cov_line(&mut s, "delta", &an.delta);
    let method = match an.gof.method {
        GofMethod::Chi2 => "chi-square",
        GofMethod::NormalApprox => "normal approximation",
    };
    let _ = writeln!(s, "C_min        {:.2} with {} dof", j.c_min, j.dof);
    let _ = writeln!(
        s,
        "critical     {:.2} at {}% ({method})",
        j.critical_value,
        an.gof.confidence * 100.0
    );
    let _ = writeln!(
        s,
        "verdict      {}",
        if j.reject {
            "linear model rejected"
        } else {
            "consistent with a linear model"
        }
    );
    s
}

#[derive(serde::Serialize)]
struct CompareJson<'a> {
    rows: &'a [MethodRow],
    notices: &'a [String],
}

pub fn compare(rows: &[MethodRow], notices: &[String], format: Format) -> String {
    match format {
        Format::Json => json(&CompareJson { rows, notices }),
        Format::Csv => {
            let mut s = String::from("method,slope,slope_sigma\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", r.method, sig6(r.slope), sig6(r.slope_sigma));
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:<8} {:>8} {:>8}\n", "method", "slope", "sigma");
            for r in rows {
                let _ = writeln!(s, "{:<8} {:>8.3} {:>8.3}", r.method, r.slope, r.slope_sigma);
            }
            for n in notices {
                let _ = writeln!(s, "note: {n}");
            }
            s
        }
    }
}

pub fn band(points: &[BandPoint], format: Format) -> String {
    match format {
        Format::Json => json(&points),
        Format::Csv => {
            let mut s = String::from("x,y_hat,sigma\n");
            for p in points {
                let _ = writeln!(s, "{},{},{}", sig6(p.x), sig6(p.y_hat), sig6(p.sigma));
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:>10} {:>10} {:>10}\n", "x", "y_hat", "sigma");
            for p in points {
                let _ = writeln!(s, "{:>10.3} {:>10.3} {:>10.3}", p.x, p.y_hat, p.sigma);
            }
            s
        }
    }
}

fn param_csv(s: &mut String, name: &str, p: &ParamSummary) {
    let _ = writeln!(
        s,
        "{name},{},{},{},{},{},{},{},{}",
        sig6(p.truth),
        sig6(p.mean),
        sig6(p.sd),
        sig6(p.median),
        sig6(p.bias_z),
        sig6(p.mean_sigma),
        sig6(p.coverage_68),
        sig6(p.coverage_90)
    );
}

pub fn simulate(c: &CalibrationSummary, format: Format) -> String {
    match format {
        Format::Json => json(c),
        Format::Csv => {
            let mut s = String::from(
                "param,truth,mean,sd,median,bias_z,mean_sigma,coverage_68,coverage_90\n",
            );
            param_csv(&mut s, "a", &c.a);
            param_csv(&mut s, "lambda", &c.lambda);
            s
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "parent       lambda = {}, a = {}, {} unit bins",
                c.parent.lambda, c.parent.a, c.parent.n_bins
            );
            let _ = writeln!(
                s,
                "replicates   {} ({} failed), seed {}",
                c.replicates, c.failed, c.seed
            );
            let _ = writeln!(
                s,
                "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>7} {:>7}",
                "param", "truth", "mean", "sd", "median", "bias z", "mean sigma", "cov68", "cov90"
            );
            for (name, p) in [("a", &c.a), ("lambda", &c.lambda)] {
                let _ = writeln!(
                    s,
                    "{name:<8} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.2} {:>10.3} {:>7.3} {:>7.3}",
                    p.truth,
                    p.mean,
                    p.sd,
                    p.median,
                    p.bias_z,
                    p.mean_sigma,
                    p.coverage_68,
                    p.coverage_90
                );
            }
            s
        }
    }
}
