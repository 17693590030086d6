//! Regression stack over simulation records: a logistic filter drops orders
//! that cannot arrive within the two-hour window, an OLS model explains the
//! latency of the rest, and inverting that model yields the advisory tip.

mod linear;
mod logistic;
mod tip;

pub use linear::{ols_fit, predict_latency, residuals, LinearModel, LINEAR_COLUMNS};
pub use logistic::{
    logistic_fit, logistic_grad, logistic_loss, logistic_predict, roc_auc, sigmoid, LogisticConfig,
    LogisticModel,
};
pub use tip::{advise_tip, TipAdvice, TipContext};

use crate::sim::LatencyRecord;

/// An order counts as deliverable when it arrived within two hours.
pub const DELIVERABLE_WINDOW_MIN: f64 = 120.0;

/// One row of the regression design.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureRow {
    /// Ordering time squared, minutes² from noon.
    pub x1: f64,
    /// Scenario average tip price, RMB.
    pub x2: f64,
    /// Scenario tipped-order proportion.
    pub x3: f64,
    /// Courier count.
    pub x4: f64,
    /// This order's tip, RMB.
    pub x5: f64,
    /// Restaurant-to-destination distance, meters.
    pub x6: f64,
    /// Distance per RMB of tip, regularized as distance/(tip+1).
    pub x7: f64,
    /// Realized latency in minutes; -1 when undelivered.
    pub y_latency: f64,
    /// 1 when delivered within the two-hour window.
    pub y_deliverable: u8,
}

impl FeatureRow {
    pub fn from_record(r: &LatencyRecord) -> Self {
        let deliverable = r.latency >= 0.0 && r.latency <= DELIVERABLE_WINDOW_MIN;
        FeatureRow {
            x1: r.time * r.time,
            x2: r.avg_price,
            x3: r.proportion,
            x4: f64::from(r.deliverymen_number),
            x5: r.tip,
            x6: r.distance,
            x7: r.distance / (r.tip + 1.0),
            y_latency: r.latency,
            y_deliverable: u8::from(deliverable),
        }
    }

    /// All seven regressors in column order.
    pub fn features(&self) -> [f64; 7] {
        [
            self.x1, self.x2, self.x3, self.x4, self.x5, self.x6, self.x7,
        ]
    }
}

/// Keeps the rows the logistic filter predicts deliverable; rows that in
/// fact missed the window (or never arrived) are dropped regardless, since
/// their latencies cannot feed the linear model.
pub fn filter_deliverable(model: &LogisticModel, rows: &[FeatureRow]) -> Vec<FeatureRow> {
    rows.iter()
        .filter(|r| logistic_predict(model, r).class == 1)
        .filter(|r| r.y_latency >= 0.0 && r.y_latency <= DELIVERABLE_WINDOW_MIN)
        .copied()
        .collect()
}

/// Published logistic coefficients over (x1..x5), no intercept.
pub fn paper_logistic_theta() -> [f64; 5] {
    [0.0154, 0.0276, -0.8862, 0.0066, -0.0009]
}

/// Published latency coefficients over (const, x1..x7). The constant follows
/// the coefficient table; the prose equation's -0.1647 disagrees with it and
/// is not used.
pub fn paper_linear_beta() -> [f64; 8] {
    [
        -0.1687, -0.0025, -0.3371, -33.6719, -0.0167, -0.088, 0.0079, 0.0010,
    ]
}

/// Serialized model bundle (model.json).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelArtifact {
    pub logistic: LogisticModel,
    pub linear: LinearModel,
    pub metadata: ArtifactMetadata,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArtifactMetadata {
    pub seed: u64,
    pub record_count: usize,
    /// FNV-1a of the producing configuration, hex.
    pub config_hash: String,
}

/// Grid of model predictions along one feature, other features held at
/// their data means; backs the per-feature regression figures.
pub fn partial_dependence(
    model: &LinearModel,
    rows: &[FeatureRow],
    feature_index: usize,
    points: usize,
) -> Vec<(f64, f64)> {
    assert!(feature_index < 7, "feature index out of range");
    assert!(points >= 2);
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows.len() as f64;
    let mut means = [0.0; 7];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows {
        let f = r.features();
        for (m, v) in means.iter_mut().zip(f) {
            *m += v / n;
        }
        lo = lo.min(f[feature_index]);
        hi = hi.max(f[feature_index]);
    }
    if lo == hi {
        hi = lo + 1.0;
    }
    (0..points)
        .map(|i| {
            let value = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let mut f = means;
            f[feature_index] = value;
            let row = FeatureRow {
                x1: f[0],
                x2: f[1],
                x3: f[2],
                x4: f[3],
                x5: f[4],
                x6: f[5],
                x7: f[6],
                y_latency: 0.0,
                y_deliverable: 1,
            };
            (value, model.predict(&row))
        })
        .collect()
}
