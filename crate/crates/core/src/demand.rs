//! Synthetic order population from survey marginals, plus the GDP-based
//! courier head-count calibration.
//!
//! Each order characteristic is sampled independently from its marginal,
//! exactly as the survey expansion procedure prescribes; correlations between
//! answers are deliberately not preserved. All draws go through an explicit
//! seeded generator, so expansion is reproducible.

use crate::error::{Error, Result};
use crate::graph::{travel_time, ShortestPathMatrix, VertexId};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

/// Discrete distribution over bucket values (minutes, RMB, ...).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BucketDist {
    /// (bucket value, probability) pairs.
    pub buckets: Vec<(f64, f64)>,
}

impl BucketDist {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.buckets.is_empty() {
            return Err(Error::InvalidDistribution(format!("{name} is empty")));
        }
        let mut sum = 0.0;
        for &(value, p) in &self.buckets {
            if !value.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "{name} has non-finite bucket value {value}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "{name} has probability {p} outside [0,1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "{name} probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    fn sampler(&self) -> Result<WeightedIndex<f64>> {
        WeightedIndex::new(self.buckets.iter().map(|&(_, p)| p))
            .map_err(|e| Error::InvalidDistribution(e.to_string()))
    }
}

/// Survey answer marginals driving the order expansion.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SurveyMarginals {
    /// Ordering time, minutes offset from 12:00 (negative before noon).
    pub ordering_time_dist: BucketDist,
    /// Acceptable waiting time, minutes.
    pub wait_time_dist: BucketDist,
    /// Probability that an order carries a tip at all.
    pub tip_willingness: f64,
    /// Tip amount in RMB, conditional on tipping.
    pub tip_amount_dist: BucketDist,
}

impl SurveyMarginals {
    pub fn validate(&self) -> Result<()> {
        self.ordering_time_dist.validate("ordering_time_dist")?;
        self.wait_time_dist.validate("wait_time_dist")?;
        self.tip_amount_dist.validate("tip_amount_dist")?;
        if !(0.0..=1.0).contains(&self.tip_willingness) {
            return Err(Error::InvalidDistribution(format!(
                "tip_willingness {} outside [0,1]",
                self.tip_willingness
            )));
        }
        Ok(())
    }
}

/// An order before a destination and restaurant are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderDraft {
    pub ordering_time_min: f64,
    pub max_wait_min: f64,
    pub tip_rmb: f64,
}

/// A fully specified delivery request.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderProfile {
    pub id: u32,
    /// Minutes offset from 12:00; negative before noon.
    pub ordering_time_min: f64,
    pub max_wait_min: f64,
    pub tip_rmb: f64,
    /// Restaurant vertex.
    pub source: VertexId,
    /// Destination building vertex.
    pub destination: VertexId,
    /// Set when no restaurant satisfied the wait bound and the nearest one
    /// was substituted.
    pub restaurant_fallback: bool,
}

impl OrderProfile {
    pub fn validate(&self, apsp: &ShortestPathMatrix, max_tip: f64) -> Result<()> {
        if self.source == self.destination {
            return Err(Error::DegenerateInput(format!(
                "order {} has source == destination",
                self.id
            )));
        }
        if self.tip_rmb < 0.0 || self.tip_rmb > max_tip {
            return Err(Error::DegenerateInput(format!(
                "order {} tip {} outside [0, {max_tip}]",
                self.id, self.tip_rmb
            )));
        }
        if !apsp.reachable(self.source, self.destination) {
            return Err(Error::DegenerateInput(format!(
                "order {} has unreachable source->destination pair",
                self.id
            )));
        }
        Ok(())
    }
}

/// Straight-line fit y = a + b x.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub a: f64,
    pub b: f64,
}

/// City-level GDP vs courier-count calibration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CityCalibration {
    /// (GDP in 100M RMB, couriers in thousands) per city.
    pub gdp_points: Vec<(f64, f64)>,
    pub fitted: LineFit,
    pub pearson_r: f64,
}

impl CityCalibration {
    pub fn fit(gdp_points: Vec<(f64, f64)>) -> Result<Self> {
        let x: Vec<f64> = gdp_points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = gdp_points.iter().map(|p| p.1).collect();
        let fitted = fit_line_1d(&x, &y)?;
        let pearson_r = pearson(&x, &y)?;
        Ok(CityCalibration {
            gdp_points,
            fitted,
            pearson_r,
        })
    }

    /// Calibration pinned to the published line y = 0.0029 GDP - 10.194.
    pub fn published() -> Self {
        CityCalibration {
            gdp_points: Vec::new(),
            fitted: LineFit {
                a: -10.194,
                b: 0.0029,
            },
            pearson_r: 0.94709,
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "sequence lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput(
            "need at least two points".to_string(),
        ));
    }
    Ok(())
}

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mean_x) * (yi - mean_y);
        sxx += (xi - mean_x).powi(2);
        syy += (yi - mean_y).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation undefined under zero variance".to_string(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One-dimensional least squares, y = a + b x.
pub fn fit_line_1d(x: &[f64], y: &[f64]) -> Result<LineFit> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sum_xy: f64 = x.iter().zip(y).map(|(&xi, &yi)| xi * yi).sum();
    let sum_xx: f64 = x.iter().map(|&xi| xi * xi).sum();
    let denom = sum_xx - n * mean_x * mean_x;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateInput(
            "slope undefined under zero x variance".to_string(),
        ));
    }
    let b = (sum_xy - n * mean_x * mean_y) / denom;
    let a = mean_y - b * mean_x;
    Ok(LineFit { a, b })
}

/// Courier head count for a region: fitted line output (thousands) scaled by
/// the covered fraction of the region, clamped at zero.
pub fn courier_count(gdp: f64, calibration: &CityCalibration, coverage: f64) -> Result<u32> {
    if gdp <= 0.0 {
        return Err(Error::InvalidConfig(format!("gdp must be positive, got {gdp}")));
    }
    if !(0.0..=1.0).contains(&coverage) || coverage == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "coverage must be in (0,1], got {coverage}"
        )));
    }
    let thousands = calibration.fitted.b * gdp + calibration.fitted.a;
    let raw = thousands * 1000.0;
    let clamped = if raw < 0.0 {
        log::warn!("calibration line predicts {raw:.1} couriers at gdp {gdp}; clamping to 0");
        0.0
    } else {
        raw
    };
    Ok((clamped * coverage).round() as u32)
}

/// Expands survey marginals into `n` order drafts, each characteristic drawn
/// independently from its marginal.
pub fn expand_orders(
    marginals: &SurveyMarginals,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<OrderDraft>> {
    if n == 0 {
        return Err(Error::InvalidConfig("order count must be at least 1".into()));
    }
    marginals.validate()?;
    let time_sampler = marginals.ordering_time_dist.sampler()?;
    let wait_sampler = marginals.wait_time_dist.sampler()?;
    let tip_sampler = marginals.tip_amount_dist.sampler()?;
    let mut drafts = Vec::with_capacity(n);
    for _ in 0..n {
        let ordering_time_min = marginals.ordering_time_dist.buckets[time_sampler.sample(rng)].0;
        let max_wait_min = marginals.wait_time_dist.buckets[wait_sampler.sample(rng)].0;
        let tip_rmb = if rng.random_bool(marginals.tip_willingness) {
            marginals.tip_amount_dist.buckets[tip_sampler.sample(rng)].0
        } else {
            0.0
        };
        drafts.push(OrderDraft {
            ordering_time_min,
            max_wait_min,
            tip_rmb,
        });
    }
    Ok(drafts)
}

fn weighted_sampler(weights: &[(VertexId, f64)], what: &str) -> Result<WeightedIndex<f64>> {
    if weights.iter().any(|&(_, w)| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "{what} weights must be finite and nonnegative"
        )));
    }
    WeightedIndex::new(weights.iter().map(|&(_, w)| w))
        .map_err(|_| Error::ZeroWeights(what.to_string()))
}

/// Draws one destination per draft, proportional to building population.
pub fn assign_destination(
    drafts: &[OrderDraft],
    populations: &[(VertexId, f64)],
    rng: &mut impl Rng,
) -> Result<Vec<VertexId>> {
    let sampler = weighted_sampler(populations, "destination populations")?;
    Ok(drafts
        .iter()
        .map(|_| populations[sampler.sample(rng)].0)
        .collect())
}

/// Draws a restaurant for one order: candidates are the restaurants whose
/// delivery travel time fits the order's wait bound, weighted by sales.
/// Falls back to the nearest reachable restaurant (flagged) when no candidate
/// qualifies.
pub fn assign_restaurant(
    destination: VertexId,
    max_wait_min: f64,
    sales: &[(VertexId, f64)],
    apsp: &ShortestPathMatrix,
    speed_kmh: f64,
    rng: &mut impl Rng,
) -> Result<(VertexId, bool)> {
    if sales.is_empty() {
        return Err(Error::DegenerateInput("no restaurants in graph".into()));
    }
    let mut candidates: Vec<(VertexId, f64)> = Vec::new();
    for &(r, amount) in sales {
        let d = apsp.dist_f64(r, destination);
        if d.is_finite() && travel_time(d, speed_kmh)? <= max_wait_min {
            candidates.push((r, amount));
        }
    }
    if candidates.is_empty() {
        // wait bound infeasible for this destination; take the nearest
        let nearest = sales
            .iter()
            .map(|&(r, _)| (r, apsp.dist_f64(r, destination)))
            .filter(|&(_, d)| d.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(r, _)| r)
            .ok_or_else(|| {
                Error::DegenerateInput(format!(
                    "no restaurant reachable from destination {destination}"
                ))
            })?;
        return Ok((nearest, true));
    }
    let sampler = weighted_sampler(&candidates, "restaurant sales")?;
    Ok((candidates[sampler.sample(rng)].0, false))
}

/// Initial courier locations: drawn from the destination vertices with
/// probability proportional to population.
pub fn place_couriers(
    count: usize,
    populations: &[(VertexId, f64)],
    rng: &mut impl Rng,
) -> Result<Vec<VertexId>> {
    if count == 0 {
        return Err(Error::InvalidConfig("courier count must be at least 1".into()));
    }
    let sampler = weighted_sampler(populations, "courier placement populations")?;
    Ok((0..count)
        .map(|_| populations[sampler.sample(rng)].0)
        .collect())
}

/// Full demand pipeline: expand marginals, attach destinations and
/// restaurants, and validate every resulting order.
pub fn generate_orders(
    marginals: &SurveyMarginals,
    n: usize,
    destinations: &[(VertexId, f64)],
    restaurants: &[(VertexId, f64)],
    apsp: &ShortestPathMatrix,
    speed_kmh: f64,
    max_tip: f64,
    rng: &mut impl Rng,
) -> Result<Vec<OrderProfile>> {
    let drafts = expand_orders(marginals, n, rng)?;
    let dests = assign_destination(&drafts, destinations, rng)?;
    let mut orders = Vec::with_capacity(n);
    for (i, (draft, destination)) in drafts.iter().zip(dests).enumerate() {
        let (source, restaurant_fallback) = assign_restaurant(
            destination,
            draft.max_wait_min,
            restaurants,
            apsp,
            speed_kmh,
            rng,
        )?;
        let order = OrderProfile {
            id: i as u32,
            ordering_time_min: draft.ordering_time_min,
            max_wait_min: draft.max_wait_min,
            tip_rmb: draft.tip_rmb.min(max_tip),
            source,
            destination,
            restaurant_fallback,
        };
        order.validate(apsp, max_tip)?;
        orders.push(order);
    }
    Ok(orders)
}
