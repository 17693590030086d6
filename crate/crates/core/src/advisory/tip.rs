//! Advisory tip: invert the latency model for the tip that hits a target
//! waiting time.
//!
//! With everything but the tip fixed, predicted latency is
//! K + b5*t + b7*x6/(t+1); multiplying the target equation through by (t+1)
//! makes it quadratic in t. The smallest admissible root wins, and the
//! answer is verified by back-substitution.

use super::FeatureRow;
use crate::error::{Error, Result};

/// Order context for the inversion: every regressor except the tip (x5) and
/// the derived cost feature (x7), both of which depend on the tip itself.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TipContext {
    /// Ordering time squared, minutes².
    pub x1: f64,
    /// Region average tip price, RMB.
    pub x2: f64,
    /// Tipped-order proportion.
    pub x3: f64,
    /// Courier count.
    pub x4: f64,
    /// Restaurant-to-destination distance, meters.
    pub x6: f64,
}

impl TipContext {
    pub fn row_with_tip(&self, tip: f64) -> FeatureRow {
        FeatureRow {
            x1: self.x1,
            x2: self.x2,
            x3: self.x3,
            x4: self.x4,
            x5: tip,
            x6: self.x6,
            x7: self.x6 / (tip + 1.0),
            y_latency: 0.0,
            y_deliverable: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipAdvice {
    pub tip_rmb: f64,
    /// Model latency at the advised tip.
    pub predicted_latency_min: f64,
}

fn predict_at(beta: &[f64], ctx: &TipContext, tip: f64) -> f64 {
    super::predict_latency(beta, &ctx.row_with_tip(tip))
}

/// Smallest tip in [0, max_tip] whose predicted latency meets the target.
/// Zero when the untipped prediction is already at or under the target;
/// otherwise the smallest root of the latency equation, polished by Newton
/// steps and checked by back-substitution to 1e-6 minutes.
pub fn advise_tip(
    beta: &[f64],
    ctx: &TipContext,
    target_latency_min: f64,
    max_tip: f64,
) -> Result<TipAdvice> {
    assert_eq!(beta.len(), 8, "latency model carries 8 coefficients");
    if target_latency_min <= 0.0 || !target_latency_min.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "target latency must be positive, got {target_latency_min}"
        )));
    }
    if max_tip <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "max_tip must be positive, got {max_tip}"
        )));
    }
    let b5 = beta[5];
    let b7 = beta[7];
    if b5 == 0.0 && b7 == 0.0 {
        return Err(Error::TipHasNoEffect);
    }
    let at_zero = predict_at(beta, ctx, 0.0);
    if at_zero <= target_latency_min {
        return Ok(TipAdvice {
            tip_rmb: 0.0,
            predicted_latency_min: at_zero,
        });
    }
    // K + b5 t + b7 x6 / (t+1) = target, times (t+1):
    //   b5 t^2 + (b5 + K - target) t + (K - target + b7 x6) = 0
    let k = beta[0] + beta[1] * ctx.x1 + beta[2] * ctx.x2 + beta[3] * ctx.x3 + beta[4] * ctx.x4
        + beta[6] * ctx.x6;
    let a = b5;
    let b = b5 + k - target_latency_min;
    let c = k - target_latency_min + b7 * ctx.x6;
    let mut roots: Vec<f64> = Vec::with_capacity(2);
    if a == 0.0 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            if q != 0.0 {
                roots.push(q / a);
                roots.push(c / q);
            } else {
                // b == 0 and disc == 0 -> double root at zero offset
                roots.push(0.0);
            }
        }
    }
    let mut best: Option<f64> = None;
    for root in roots {
        let mut t = root;
        if (-1e-9..0.0).contains(&t) {
            t = 0.0;
        }
        if !(0.0..=max_tip).contains(&t) || !t.is_finite() {
            continue;
        }
        // polish against the original (un-multiplied) equation
        for _ in 0..3 {
            let f = predict_at(beta, ctx, t) - target_latency_min;
            let fp = b5 - b7 * ctx.x6 / ((t + 1.0) * (t + 1.0));
            if fp.abs() < 1e-300 {
                break;
            }
            let next = t - f / fp;
            if (0.0..=max_tip).contains(&next) {
                t = next;
            } else {
                break;
            }
        }
        if (predict_at(beta, ctx, t) - target_latency_min).abs() <= 1e-6 {
            best = Some(match best {
                Some(prev) => prev.min(t),
                None => t,
            });
        }
    }
    match best {
        Some(tip_rmb) => Ok(TipAdvice {
            tip_rmb,
            predicted_latency_min: predict_at(beta, ctx, tip_rmb),
        }),
        None => Err(Error::TipInfeasible {
            target_min: target_latency_min,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advisory::paper_linear_beta;

    fn ctx_x6(x6: f64) -> TipContext {
        TipContext {
            x1: 0.0,
            x2: 0.0,
            x3: 0.0,
            x4: 0.0,
            x6,
        }
    }

    /// Bisection oracle: first sign change of predicted - target over a fine
    /// grid on [0, max_tip], bisected down to 1e-9.
    fn bisection_oracle(
        beta: &[f64],
        ctx: &TipContext,
        target: f64,
        max_tip: f64,
    ) -> Option<f64> {
        let g = |t: f64| predict_at(beta, ctx, t) - target;
        if g(0.0) <= 0.0 {
            return Some(0.0);
        }
        let steps = 4096;
        let mut prev = 0.0;
        for i in 1..=steps {
            let t = max_tip * i as f64 / steps as f64;
            if g(prev) > 0.0 && g(t) <= 0.0 {
                let (mut lo, mut hi) = (prev, t);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = t;
        }
        None
    }

    #[test]
    fn target_already_met_gives_zero_tip() {
        let beta = paper_linear_beta();
        let ctx = ctx_x6(1000.0);
        // untipped prediction is 7.7313 + 1.0 = 8.7313
        let advice = advise_tip(&beta, &ctx, 9.0, 100.0).unwrap();
        assert_eq!(advice.tip_rmb, 0.0);
        // exactly-at-target also returns zero
        let at_zero = predict_at(&beta, &ctx, 0.0);
        let advice = advise_tip(&beta, &ctx, at_zero, 100.0).unwrap();
        assert_eq!(advice.tip_rmb, 0.0);
    }

    #[test]
    fn published_model_five_minute_target() {
        // smallest positive root of
        //   -0.1687 - 0.088 t + 7.9 + 0.0010 * 1000/(t+1) = 5
        // hand-derived via the quadratic: t = 31.388...
        let beta = paper_linear_beta();
        let ctx = ctx_x6(1000.0);
        let advice = advise_tip(&beta, &ctx, 5.0, 100.0).unwrap();
        let oracle = bisection_oracle(&beta, &ctx, 5.0, 100.0).unwrap();
        assert!(
            (advice.tip_rmb - oracle).abs() < 1e-6,
            "{} vs oracle {oracle}",
            advice.tip_rmb
        );
        assert!((advice.predicted_latency_min - 5.0).abs() < 1e-6);
        assert!((advice.tip_rmb - 31.388).abs() < 1e-2);
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let beta = paper_linear_beta();
        let ctx = ctx_x6(1000.0);
        // even 100 RMB only buys ~ -0.1687 - 8.8 + 7.9 + 0.0099 ≈ -1.06;
        // ask for something no tip reaches
        let err = advise_tip(&beta, &ctx, 0.001, 1.0).unwrap_err();
        assert!(matches!(err, Error::TipInfeasible { .. }));
        assert!(bisection_oracle(&beta, &ctx, 0.001, 1.0).is_none());
    }

    #[test]
    fn tip_without_effect_reported_distinctly() {
        let mut beta = paper_linear_beta();
        beta[5] = 0.0;
        beta[7] = 0.0;
        let err = advise_tip(&beta, &ctx_x6(1000.0), 1.0, 100.0).unwrap_err();
        assert!(matches!(err, Error::TipHasNoEffect));
    }

    #[test]
    fn linear_case_when_tip_coefficient_vanishes() {
        // b5 = 0 but b7 > 0: latency falls with the tip only through the
        // cost feature; the equation degrades to linear
        let mut beta = [0.0; 8];
        beta[0] = 10.0;
        beta[7] = 0.01;
        let ctx = ctx_x6(2000.0);
        // prediction = 10 + 20/(t+1); target 15 -> t = 3
        let advice = advise_tip(&beta, &ctx, 15.0, 100.0).unwrap();
        assert!((advice.tip_rmb - 3.0).abs() < 1e-9, "tip {}", advice.tip_rmb);
        let oracle = bisection_oracle(&beta, &ctx, 15.0, 100.0).unwrap();
        assert!((advice.tip_rmb - oracle).abs() < 1e-6);
    }

    #[test]
    fn back_substitution_and_oracle_agreement_randomized() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut feasible = 0;
        for _ in 0..300 {
            let beta: [f64; 8] = [
                rng.random_range(-5.0..5.0),
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.5..0.5),
                rng.random_range(-5.0..5.0),
                rng.random_range(-0.02..0.02),
                rng.random_range(-0.3..0.1),
                rng.random_range(0.0..0.01),
                rng.random_range(-0.01..0.02),
            ];
            let ctx = TipContext {
                x1: rng.random_range(0.0..3600.0),
                x2: rng.random_range(0.0..30.0),
                x3: rng.random_range(0.0..1.0),
                x4: rng.random_range(100.0..900.0),
                x6: rng.random_range(200.0..7000.0),
            };
            let target = rng.random_range(1.0..40.0);
            let oracle = bisection_oracle(&beta, &ctx, target, 100.0);
            match advise_tip(&beta, &ctx, target, 100.0) {
                Ok(advice) => {
                    feasible += 1;
                    let o = oracle.expect("oracle disagrees: found no root");
                    assert!(
                        (advice.tip_rmb - o).abs() < 1e-6,
                        "tip {} vs oracle {o}",
                        advice.tip_rmb
                    );
                    if advice.tip_rmb > 0.0 {
                        assert!(
                            (advice.predicted_latency_min - target).abs() < 1e-6,
                            "back-substitution off: {} vs {target}",
                            advice.predicted_latency_min
                        );
                    } else {
                        assert!(advice.predicted_latency_min <= target + 1e-9);
                    }
                }
                Err(Error::TipInfeasible { .. }) => {
                    assert!(oracle.is_none(), "oracle found a root the solver missed");
                }
                Err(Error::TipHasNoEffect) => {}
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(feasible > 50, "too few feasible cases to be meaningful");
    }
}
