//! Fixed-effects panel regression and multiple-testing helpers.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::util::{mean, sample_sd};

/// Leverage at or above `1 - LEVERAGE_EPS` makes the HC3 weight blow up.
const LEVERAGE_EPS: f64 = 1e-12;
/// Relative pivot size below which a design column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("post indicator has no within-author variation")]
    Identification,
    #[error("design matrix is rank deficient (column {0})")]
    RankDeficient(String),
    #[error("row {0} has leverage 1; HC3 is undefined")]
    Leverage(usize),
    #[error("no residual degrees of freedom")]
    DegreesOfFreedom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub author_id: String,
    pub category: String,
    pub post_llm: u8,
    pub length: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub beta: f64,
    pub gamma: f64,
    pub se_beta_hc3: f64,
    pub se_gamma_hc3: f64,
    pub t_beta: f64,
    pub p_beta: f64,
    pub df: usize,
    pub n_obs: usize,
    pub n_authors: usize,
    pub r2_within: f64,
    /// Category dummies that are constant within every author and so are
    /// absorbed by the author effects.
    pub absorbed_categories: Vec<String>,
}

/// Least squares via column-pivoted QR, with an explicit rank check.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<DVector<f64>, StatsError> {
    let k = x.ncols();
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    // Undo the pivoting to name the offending column.
    let mut order = DVector::from_iterator(k, (0..k).map(|i| i as f64));
    qr.p().permute_rows(&mut order);
    for i in 0..k {
        let d = r[(i, i)].abs();
        if d.is_nan() || d <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(StatsError::RankDeficient(names[order[i] as usize].clone()));
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, k).into_owned();
    let mut z = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| StatsError::RankDeficient("unknown".into()))?;
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

fn two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive df");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

fn t_stat(coef: f64, se: f64) -> f64 {
    if se > 0.0 {
        coef / se
    } else if coef == 0.0 {
        0.0
    } else {
        coef.signum() * f64::INFINITY
    }
}

/// `y = β·post + γ·length + δ_category + α_author + ε`, with author effects
/// removed by within-author demeaning and categories as dummy columns
/// (reference = lexicographically first). Inference uses HC3 errors and
/// `n − k − n_authors` degrees of freedom.
pub fn fe_regress(rows: &[PanelRow]) -> Result<RegressionResult, StatsError> {
    for (i, r) in rows.iter().enumerate() {
        if r.post_llm > 1 {
            return Err(StatsError::Input(format!("row {i}: post_llm must be 0 or 1")));
        }
        if !r.y.is_finite() || !r.length.is_finite() {
            return Err(StatsError::Input(format!("row {i}: non-finite value")));
        }
    }
    let mut by_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_author.entry(r.author_id.as_str()).or_default().push(i);
    }
    if by_author.len() < 2 {
        return Err(StatsError::Input("at least two authors are required".into()));
    }
    let categories: Vec<&str> = rows
        .iter()
        .map(|r| r.category.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = rows.len();
    let demean = |col: Vec<f64>| -> Vec<f64> {
        let mut out = col.clone();
        for idx in by_author.values() {
            let m = idx.iter().map(|&i| col[i]).sum::<f64>() / idx.len() as f64;
            for &i in idx {
                out[i] = col[i] - m;
            }
        }
        out
    };
    let y = demean(rows.iter().map(|r| r.y).collect());
    let post = demean(rows.iter().map(|r| r.post_llm as f64).collect());
    if post.iter().all(|v| *v == 0.0) {
        return Err(StatsError::Identification);
    }
    let mut names = vec!["post_llm".to_string(), "length".to_string()];
    let mut columns = vec![post, demean(rows.iter().map(|r| r.length).collect())];
    let mut absorbed = Vec::new();
    for c in categories.iter().skip(1) {
        let col = demean(rows.iter().map(|r| f64::from(u8::from(r.category == *c))).collect());
        if col.iter().all(|v| v.abs() < 1e-12) {
            absorbed.push(c.to_string());
        } else {
            names.push(format!("category[{c}]"));
            columns.push(col);
        }
    }
    let k = columns.len();
    let df = n
        .checked_sub(k + by_author.len())
        .filter(|d| *d > 0)
        .ok_or(StatsError::DegreesOfFreedom)?;
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let yv = DVector::from_vec(y);
    let coef = least_squares(&x, &yv, &names)?;
    let resid = &yv - &x * &coef;
    let cov = hc3_covariance(&x, resid.as_slice())?;
    let se_beta = cov[(0, 0)].max(0.0).sqrt();
    let se_gamma = cov[(1, 1)].max(0.0).sqrt();
    let sst = yv.norm_squared();
    let ssr = resid.norm_squared();
    let t_beta = t_stat(coef[0], se_beta);
    Ok(RegressionResult {
        beta: coef[0],
        gamma: coef[1],
        se_beta_hc3: se_beta,
        se_gamma_hc3: se_gamma,
        t_beta,
        p_beta: two_sided_p(t_beta, df),
        df,
        n_obs: n,
        n_authors: by_author.len(),
        r2_within: if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 },
        absorbed_categories: absorbed,
    })
}

/// HC3 sandwich `(XᵀX)⁻¹ Xᵀ diag(eᵢ² / (1 − hᵢᵢ)²) X (XᵀX)⁻¹`.
pub fn hc3_covariance(x: &DMatrix<f64>, residuals: &[f64]) -> Result<DMatrix<f64>, StatsError> {
    if residuals.len() != x.nrows() {
        return Err(StatsError::Input(format!(
            "{} residuals for {} rows",
            residuals.len(),
            x.nrows()
        )));
    }
    let xtx_inv = (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| StatsError::RankDeficient("XᵀX is singular".into()))?;
    let k = x.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (i, e) in residuals.iter().enumerate() {
        let row = x.row(i).transpose();
        let h = (row.transpose() * &xtx_inv * &row)[(0, 0)];
        if h >= 1.0 - LEVERAGE_EPS {
            return Err(StatsError::Leverage(i));
        }
        let w = e * e / ((1.0 - h) * (1.0 - h));
        meat += w * &row * row.transpose();
    }
    Ok(&xtx_inv * meat * &xtx_inv)
}

pub fn hc3_se(x: &DMatrix<f64>, residuals: &[f64], index: usize) -> Result<f64, StatsError> {
    if index >= x.ncols() {
        return Err(StatsError::Input(format!("coefficient {index} out of range")));
    }
    let cov = hc3_covariance(x, residuals)?;
    Ok(cov[(index, index)].max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub reject: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Holm step-down procedure; results are in input order.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Result<HolmResult, StatsError> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::Input(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut reject = vec![false; m];
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    let mut stopped = false;
    for (rank, &i) in order.iter().enumerate() {
        let factor = (m - rank) as f64;
        running = running.max((factor * pvals[i]).min(1.0));
        adjusted[i] = running;
        if !stopped && pvals[i] <= alpha / factor {
            reject[i] = true;
        } else {
            stopped = true;
        }
    }
    Ok(HolmResult { reject, adjusted })
}

fn residualize(v: &[f64], controls: &[Vec<f64>]) -> Result<DVector<f64>, StatsError> {
    let n = v.len();
    let x = DMatrix::from_fn(
        n,
        controls.len() + 1,
        |i, j| if j == 0 { 1.0 } else { controls[j - 1][i] },
    );
    let names: Vec<String> = (0..=controls.len())
        .map(|j| {
            if j == 0 {
                "intercept".into()
            } else {
                format!("control {}", j - 1)
            }
        })
        .collect();
    let y = DVector::from_column_slice(v);
    let coef = least_squares(&x, &y, &names)?;
    Ok(&y - &x * coef)
}

/// Pearson correlation of `x` and `y` after regressing each on `controls`
/// (columns) plus an intercept. `None` when a residual vector is constant.
pub fn partial_correlation(x: &[f64], y: &[f64], controls: &[Vec<f64>]) -> Result<Option<(f64, f64)>, StatsError> {
    let n = x.len();
    let k = controls.len();
    if y.len() != n || controls.iter().any(|c| c.len() != n) {
        return Err(StatsError::Input("x, y and controls differ in length".into()));
    }
    if n < k + 3 {
        return Err(StatsError::Input(format!("{n} observations for {k} controls")));
    }
    let ex = residualize(x, controls)?;
    let ey = residualize(y, controls)?;
    let sxx = ex.norm_squared();
    let syy = ey.norm_squared();
    let scale = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale(x) || syy <= 1e-24 * scale(y) {
        return Ok(None);
    }
    let r = (ex.dot(&ey) / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n - k - 2;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        two_sided_p(r * (df as f64 / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Some((r, p)))
}

/// Cohen's d with pooled SD; `None` when either group has fewer than two
/// values or the pooled SD is zero.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Option<f64> {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (s1, s2) = (sample_sd(a)?, sample_sd(b)?);
    let pooled = (((n1 - 1.0) * s1 * s1 + (n2 - 1.0) * s2 * s2) / (n1 + n2 - 2.0)).sqrt();
    let diff = mean(a)? - mean(b)?;
    (pooled > 0.0).then(|| diff / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub feature: String,
    pub result: RegressionResult,
    pub p_holm: f64,
    pub reject: bool,
}

/// Applies Holm correction across the per-feature β p-values.
pub fn regression_table(
    results: Vec<(String, RegressionResult)>,
    alpha: f64,
) -> Result<Vec<RegressionRow>, StatsError> {
    let pvals: Vec<f64> = results.iter().map(|(_, r)| r.p_beta).collect();
    let holm = holm_bonferroni(&pvals, alpha)?;
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(i, (feature, result))| RegressionRow {
            feature,
            result,
            p_holm: holm.adjusted[i],
            reject: holm.reject[i],
        })
        .collect())
}

pub fn write_regression_csv<W: Write>(rows: &[RegressionRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "beta", "gamma", "se_hc3", "t", "p_raw", "p_holm", "reject"])?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.result.beta.to_string(),
            r.result.gamma.to_string(),
            r.result.se_beta_hc3.to_string(),
            r.result.t_beta.to_string(),
            r.result.p_beta.to_string(),
            r.p_holm.to_string(),
            r.reject.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
