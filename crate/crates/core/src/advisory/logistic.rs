//! Logistic deliverability filter: gradient descent on the cross-entropy
//! cost over (x1..x5), plus ROC/AUC diagnostics.

use super::FeatureRow;
use crate::error::{Error, Result};

/// Numerically stable 1/(1+e^-z).
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_inputs(row: &FeatureRow) -> [f64; 5] {
    [row.x1, row.x2, row.x3, row.x4, row.x5]
}

/// Cross-entropy cost J(theta) over the raw (unstandardized) features.
pub fn logistic_loss(rows: &[FeatureRow], theta: &[f64], intercept: Option<f64>) -> f64 {
    assert_eq!(theta.len(), 5);
    let m = rows.len() as f64;
    let mut total = 0.0;
    for row in rows {
        let x = logistic_inputs(row);
        let z = intercept.unwrap_or(0.0) + dot(theta, &x);
        let p = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
        let y = f64::from(row.y_deliverable);
        total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    -total / m
}

/// Analytic gradient of [`logistic_loss`]: per-coefficient partials plus the
/// intercept partial when one is in play.
pub fn logistic_grad(
    rows: &[FeatureRow],
    theta: &[f64],
    intercept: Option<f64>,
) -> (Vec<f64>, f64) {
    assert_eq!(theta.len(), 5);
    let m = rows.len() as f64;
    let mut grad = vec![0.0; 5];
    let mut grad_b = 0.0;
    for row in rows {
        let x = logistic_inputs(row);
        let z = intercept.unwrap_or(0.0) + dot(theta, &x);
        let err = sigmoid(z) - f64::from(row.y_deliverable);
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += err * xi / m;
        }
        grad_b += err / m;
    }
    (grad, grad_b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-feature centering/scaling applied before descent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureScaling {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_iters: u32,
    /// Fit a free intercept. Off by default, matching the published
    /// coefficient table which shows none.
    pub intercept: bool,
    /// Stop when the cost improves by less than this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.5,
            max_iters: 5000,
            intercept: false,
            tol: 1e-9,
        }
    }
}

/// Fitted deliverability filter. Coefficients are reported in original
/// feature units; the standardization used during descent is kept for the
/// record.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LogisticModel {
    /// Coefficients over (x1, x2, x3, x4, x5), original units.
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    pub standardization: Vec<FeatureScaling>,
    /// Accepted cost per iteration; non-increasing.
    pub loss_trace: Vec<f64>,
}

pub struct Prediction {
    pub probability: f64,
    pub class: u8,
}

/// Gradient descent on J(theta) over standardized features. Features are
/// scaled (and centered only when an intercept is fitted, so that the
/// no-intercept model stays intercept-free in original units); each step is
/// halved until the cost does not rise, so the accepted trace never
/// increases.
pub fn logistic_fit(rows: &[FeatureRow], config: &LogisticConfig) -> Result<LogisticModel> {
    if rows.is_empty() {
        return Err(Error::DegenerateInput("no rows to fit".into()));
    }
    let positives = rows.iter().filter(|r| r.y_deliverable == 1).count();
    if positives == 0 || positives == rows.len() {
        return Err(Error::SingleClass);
    }
    let m = rows.len() as f64;

    let mut scaling = Vec::with_capacity(5);
    for j in 0..5 {
        let column = |r: &FeatureRow| logistic_inputs(r)[j];
        let mean = rows.iter().map(|r| column(r)).sum::<f64>() / m;
        let var = rows
            .iter()
            .map(|r| (column(r) - mean).powi(2))
            .sum::<f64>()
            / m;
        let scale = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
        scaling.push(FeatureScaling {
            mean: if config.intercept { mean } else { 0.0 },
            scale,
        });
    }
    let standardized: Vec<FeatureRow> = rows
        .iter()
        .map(|r| {
            let x = logistic_inputs(r);
            let mut z = [0.0; 5];
            for j in 0..5 {
                z[j] = (x[j] - scaling[j].mean) / scaling[j].scale;
            }
            FeatureRow {
                x1: z[0],
                x2: z[1],
                x3: z[2],
                x4: z[3],
                x5: z[4],
                ..*r
            }
        })
        .collect();

    let mut theta = vec![0.0; 5];
    let mut intercept = if config.intercept { Some(0.0) } else { None };
    let mut lr = config.learning_rate;
    let mut loss = logistic_loss(&standardized, &theta, intercept);
    let mut trace = vec![loss];
    for _ in 0..config.max_iters {
        let (grad, grad_b) = logistic_grad(&standardized, &theta, intercept);
        let mut halvings = 0;
        let (next_theta, next_intercept, next_loss) = loop {
            let cand_theta: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - lr * g).collect();
            let cand_intercept = intercept.map(|b| b - lr * grad_b);
            let cand_loss = logistic_loss(&standardized, &cand_theta, cand_intercept);
            if cand_loss <= loss || halvings >= 60 {
                break (cand_theta, cand_intercept, cand_loss);
            }
            lr /= 2.0;
            halvings += 1;
        };
        if next_loss > loss {
            break; // no descent direction left at any step size
        }
        let improvement = loss - next_loss;
        theta = next_theta;
        intercept = next_intercept;
        loss = next_loss;
        trace.push(loss);
        if improvement < config.tol {
            break;
        }
    }

    // undo the standardization so coefficients live in original units
    let mut theta_raw = vec![0.0; 5];
    let mut intercept_raw = intercept;
    for j in 0..5 {
        theta_raw[j] = theta[j] / scaling[j].scale;
    }
    if let Some(b) = intercept {
        let shift: f64 = (0..5)
            .map(|j| theta[j] * scaling[j].mean / scaling[j].scale)
            .sum();
        intercept_raw = Some(b - shift);
    }
    Ok(LogisticModel {
        theta: theta_raw,
        intercept: intercept_raw,
        standardization: scaling,
        loss_trace: trace,
    })
}

/// Probability and decision-boundary class (p >= 0.5 rates as deliverable).
pub fn logistic_predict(model: &LogisticModel, row: &FeatureRow) -> Prediction {
    let z = model.intercept.unwrap_or(0.0) + dot(&model.theta, &logistic_inputs(row));
    let probability = sigmoid(z);
    Prediction {
        probability,
        class: u8::from(probability >= 0.5),
    }
}

/// Area under the ROC curve: probability that a random positive outranks a
/// random negative, ties counted one half. Computed by the rank statistic.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DegenerateInput(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tied scores
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
