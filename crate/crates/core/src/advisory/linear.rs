//! Ordinary least squares for the latency model, with the usual inference
//! statistics (SSE, s², standard errors, t-values, overall F).

use super::FeatureRow;
use crate::error::{Error, Result};

pub const P: usize = 8;

/// Design column names: intercept plus the seven regressors.
pub const LINEAR_COLUMNS: [&str; P] = [
    "constant",
    "time2",
    "avg_price",
    "proportion",
    "deliverymen",
    "tip",
    "distance",
    "cost",
];

fn design_row(row: &FeatureRow) -> [f64; P] {
    let f = row.features();
    [1.0, f[0], f[1], f[2], f[3], f[4], f[5], f[6]]
}

/// Fitted latency model.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LinearModel {
    /// Coefficients over (constant, x1..x7).
    pub beta: Vec<f64>,
    /// Residual sum of squares e'e.
    pub sse: f64,
    /// Unbiased residual variance SSE/(n-p).
    pub s2: f64,
    /// Per-coefficient standard errors s * sqrt(diag (X'X)^-1).
    pub se: Vec<f64>,
    /// beta / se, distributed t(n-p) under the null.
    #[serde(rename = "t")]
    pub t_values: Vec<f64>,
    /// Overall F statistic against the intercept-only model.
    #[serde(rename = "f")]
    pub f_statistic: f64,
    pub n: usize,
}

impl LinearModel {
    pub fn predict(&self, row: &FeatureRow) -> f64 {
        predict_latency(&self.beta, row)
    }
}

/// Dot of a coefficient vector with (1, x1..x7).
pub fn predict_latency(beta: &[f64], row: &FeatureRow) -> f64 {
    assert_eq!(beta.len(), P, "latency model carries 8 coefficients");
    design_row(row)
        .iter()
        .zip(beta)
        .map(|(x, b)| x * b)
        .sum()
}

/// Cholesky factor of a symmetric positive-definite matrix; a non-positive
/// pivot names the offending design column.
fn cholesky(a: &[[f64; P]; P]) -> Result<[[f64; P]; P]> {
    let mut l = [[0.0; P]; P];
    for j in 0..P {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= a[j][j].abs().max(1.0) * 1e-12 {
            return Err(Error::RankDeficient {
                column: LINEAR_COLUMNS[j].to_string(),
            });
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..P {
            let mut v = a[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / l[j][j];
        }
    }
    Ok(l)
}

/// Solves L L' x = b.
fn cholesky_solve(l: &[[f64; P]; P], b: &[f64; P]) -> [f64; P] {
    let mut y = [0.0; P];
    for i in 0..P {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i][k] * y[k];
        }
        y[i] = v / l[i][i];
    }
    let mut x = [0.0; P];
    for i in (0..P).rev() {
        let mut v = y[i];
        for k in (i + 1)..P {
            v -= l[k][i] * x[k];
        }
        x[i] = v / l[i][i];
    }
    x
}

/// Least squares through the normal equations: b = (X'X)^-1 X'Y, solved by
/// Cholesky factorization; inference follows from the factor.
pub fn ols_fit(rows: &[FeatureRow]) -> Result<LinearModel> {
    let n = rows.len();
    if n <= P {
        return Err(Error::DegenerateInput(format!(
            "need more than {P} rows to fit the latency model, got {n}"
        )));
    }
    let mut xtx = [[0.0; P]; P];
    let mut xty = [0.0; P];
    let mut sum_y = 0.0;
    let mut sum_yy = 0.0;
    for row in rows {
        let x = design_row(row);
        let y = row.y_latency;
        for i in 0..P {
            for j in i..P {
                xtx[i][j] += x[i] * x[j];
            }
            xty[i] += x[i] * y;
        }
        sum_y += y;
        sum_yy += y * y;
    }
    for i in 0..P {
        for j in 0..i {
            xtx[i][j] = xtx[j][i];
        }
    }

    let l = cholesky(&xtx)?;
    let beta = cholesky_solve(&l, &xty);

    // SSE = y'y - 2 b'X'y + b'X'Xb, accumulated without a second data pass
    let mut bxtxb = 0.0;
    for i in 0..P {
        for j in 0..P {
            bxtxb += beta[i] * xtx[i][j] * beta[j];
        }
    }
    let bxty: f64 = beta.iter().zip(&xty).map(|(b, v)| b * v).sum();
    let sse = (sum_yy - 2.0 * bxty + bxtxb).max(0.0);
    let s2 = sse / (n - P) as f64;

    // diag of (X'X)^-1 via unit solves against the factor
    let mut inv_diag = [0.0; P];
    for j in 0..P {
        let mut e = [0.0; P];
        e[j] = 1.0;
        inv_diag[j] = cholesky_solve(&l, &e)[j];
    }
    let se: Vec<f64> = inv_diag.iter().map(|&d| (s2 * d).sqrt()).collect();
    let t_values: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();

    // F against the intercept-only model
    let sst = sum_yy - sum_y * sum_y / n as f64;
    let f_statistic = ((sst - sse) / (P - 1) as f64) / (sse / (n - P) as f64);

    Ok(LinearModel {
        beta: beta.to_vec(),
        sse,
        s2,
        se,
        t_values,
        f_statistic,
        n,
    })
}

/// Residuals y - Xb for diagnostic checks.
pub fn residuals(model: &LinearModel, rows: &[FeatureRow]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.y_latency - model.predict(r))
        .collect()
}
