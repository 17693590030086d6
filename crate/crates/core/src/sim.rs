//! Discrete-time courier simulation and scenario sweeps.
//!
//! The clock runs in fixed ticks over a lunch window starting at 11:00
//! (minute -60 relative to noon). Each tick injects newly due orders through
//! the dispatcher, advances every courier along reconstructed shortest
//! paths, and runs one inter-courier mutation round. Orders still undelivered
//! at the horizon are recorded with latency -1.

use crate::demand::{generate_orders, place_couriers, OrderProfile, SurveyMarginals};
use crate::dispatch::{
    assign_order, inter_courier_mutation, AnnealParams, AssignedOrder, FinishedOrder, StopKind,
};
use crate::error::{Error, Result};
use crate::graph::{
    meters_per_minute, position_to_vertex_distance, EdgePosition, RoadGraph, ShortestPathMatrix,
    VertexId, DEFAULT_SPEED_KMH,
};
use crate::seed::{derive_seed, stream_rng};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

pub use crate::dispatch::CourierState;

/// Simulation window opens at 11:00, sixty minutes before noon.
pub const WINDOW_START_MIN: f64 = -60.0;

/// One simulated scenario: tip regime, fleet size, and clock settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Fraction of orders that carry a tip (p).
    pub proportion: f64,
    /// Fleet size (c).
    pub courier_count: u32,
    /// Mean of the tip amount distribution, RMB (m).
    pub avg_tip: f64,
    /// Tip amount standard deviation; defaults to avg_tip / 3 when absent.
    pub tip_sigma: Option<f64>,
    pub seed: u64,
    /// Minutes simulated from the window start.
    pub horizon_min: u32,
    pub tick_min: u32,
    pub order_count: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            proportion: 0.3,
            courier_count: 600,
            avg_tip: 10.0,
            tip_sigma: None,
            seed: 0,
            horizon_min: 180,
            tick_min: 1,
            order_count: 2000,
        }
    }
}

impl ScenarioConfig {
    /// The published study's scale: 10257 orders against 1213 couriers.
    /// The head count is configuration, not the calibration line's output;
    /// see [`crate::demand::courier_count`] for the line itself.
    pub fn paper_scale() -> Self {
        ScenarioConfig {
            courier_count: 1213,
            order_count: 10257,
            ..ScenarioConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tick_min == 0 {
            return Err(Error::InvalidConfig("tick must be positive".into()));
        }
        if self.horizon_min == 0 || self.horizon_min % self.tick_min != 0 {
            return Err(Error::InvalidConfig(format!(
                "horizon ({} min) must be a positive multiple of the tick ({} min)",
                self.horizon_min, self.tick_min
            )));
        }
        if !(0.0..=1.0).contains(&self.proportion) {
            return Err(Error::InvalidConfig(format!(
                "tip proportion must be in [0,1], got {}",
                self.proportion
            )));
        }
        if self.avg_tip < 0.0 || !self.avg_tip.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "avg_tip must be nonnegative, got {}",
                self.avg_tip
            )));
        }
        if let Some(s) = self.tip_sigma {
            if s < 0.0 || !s.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "tip_sigma must be nonnegative, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// One simulation outcome row; latency is -1 for orders undelivered at the
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencyRecord {
    /// Ordering time, minutes from noon.
    pub time: f64,
    pub avg_price: f64,
    pub proportion: f64,
    pub deliverymen_number: u32,
    pub latency: f64,
    pub tip: f64,
    /// Restaurant-to-destination shortest distance, meters.
    pub distance: f64,
}

impl LatencyRecord {
    pub fn delivered(&self) -> bool {
        self.latency >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEventKind {
    Assigned,
    AssignedOverBound,
    Pickup,
    Dropoff,
    Stranded,
}

/// Per-courier event log entry, emitted when tracing is on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub courier_id: u32,
    pub order_id: u32,
    pub kind: TraceEventKind,
    pub vertex: VertexId,
}

/// Everything one scenario produced.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub records: Vec<LatencyRecord>,
    pub events: Vec<TraceEvent>,
}

/// A stop the courier reached during a tick.
#[derive(Debug, Clone)]
pub struct Completion {
    pub order: AssignedOrder,
    pub kind: StopKind,
    pub vertex: VertexId,
}

/// Immutable world shared by every scenario of a sweep.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub graph: &'a RoadGraph,
    pub apsp: &'a ShortestPathMatrix,
    pub marginals: &'a SurveyMarginals,
    pub anneal: AnnealParams,
    pub speed_kmh: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(
        graph: &'a RoadGraph,
        apsp: &'a ShortestPathMatrix,
        marginals: &'a SurveyMarginals,
    ) -> Self {
        Simulation {
            graph,
            apsp,
            marginals,
            anneal: AnnealParams::light(),
            speed_kmh: DEFAULT_SPEED_KMH,
        }
    }

    pub fn with_anneal(mut self, anneal: AnnealParams) -> Self {
        self.anneal = anneal;
        self
    }

    /// Generates demand for the scenario and runs it.
    pub fn run_scenario(&self, config: &ScenarioConfig) -> Result<ScenarioRun> {
        self.run_scenario_traced(config, false)
    }

    pub fn run_scenario_traced(&self, config: &ScenarioConfig, trace: bool) -> Result<ScenarioRun> {
        config.validate()?;
        self.anneal.validate()?;
        if config.order_count == 0 {
            return Ok(ScenarioRun {
                config: config.clone(),
                records: Vec::new(),
                events: Vec::new(),
            });
        }
        let mut rng_orders = stream_rng(config.seed, 1);
        let mut orders = generate_orders(
            self.marginals,
            config.order_count as usize,
            &self.graph.destinations(),
            &self.graph.restaurants(),
            self.apsp,
            self.speed_kmh,
            self.anneal.max_tip,
            &mut rng_orders,
        )?;
        // scenario tip regime replaces the survey tips: Bernoulli(p) tips an
        // order, the amount follows a normal around the scenario mean,
        // truncated to [0, max_tip]
        let mut rng_tips = stream_rng(config.seed, 2);
        let sigma = config.tip_sigma.unwrap_or(config.avg_tip / 3.0);
        for order in &mut orders {
            order.tip_rmb = draw_tip(
                config.proportion,
                config.avg_tip,
                sigma,
                self.anneal.max_tip,
                &mut rng_tips,
            );
        }
        self.run_with_orders(config, orders, trace)
    }

    /// Runs the clock over a fixed, pre-generated demand set.
    pub fn run_with_orders(
        &self,
        config: &ScenarioConfig,
        orders: Vec<OrderProfile>,
        trace: bool,
    ) -> Result<ScenarioRun> {
        config.validate()?;
        let mut events = Vec::new();
        let mut couriers: Vec<CourierState> = Vec::new();
        if config.courier_count > 0 {
            let mut rng_place = stream_rng(config.seed, 3);
            let starts = place_couriers(
                config.courier_count as usize,
                &self.graph.destinations(),
                &mut rng_place,
            )?;
            couriers = starts
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    Ok(CourierState::new(
                        i as u32,
                        EdgePosition::at_vertex(v, self.graph)?,
                        self.graph.vertex_count(),
                    ))
                })
                .collect::<Result<_>>()?;
        }

        // injection order: by due time, ties by order id
        let mut due: Vec<usize> = (0..orders.len()).collect();
        due.sort_by(|&a, &b| {
            orders[a]
                .ordering_time_min
                .total_cmp(&orders[b].ordering_time_min)
                .then(orders[a].id.cmp(&orders[b].id))
        });
        let mut next_due = 0usize;

        let mut rng_dispatch = stream_rng(config.seed, 4);
        let mut rng_mutation = stream_rng(config.seed, 5);
        let ticks = config.horizon_min / config.tick_min;
        let dt = f64::from(config.tick_min);

        let mut latencies: Vec<Option<f64>> = vec![None; orders.len()];
        if !couriers.is_empty() {
            for k in 0..ticks {
                let t0 = WINDOW_START_MIN + f64::from(k * config.tick_min);
                let t_end = t0 + dt;

                while next_due < due.len() && orders[due[next_due]].ordering_time_min <= t0 {
                    let profile = &orders[due[next_due]];
                    let incoming = AssignedOrder::from_profile(profile);
                    let out = assign_order(
                        &incoming,
                        &mut couriers,
                        self.graph,
                        self.apsp,
                        &self.anneal,
                        &mut rng_dispatch,
                    )?;
                    if trace {
                        events.push(TraceEvent {
                            time: t0,
                            courier_id: out.courier_id,
                            order_id: profile.id,
                            kind: if out.over_bound {
                                TraceEventKind::AssignedOverBound
                            } else {
                                TraceEventKind::Assigned
                            },
                            vertex: profile.source,
                        });
                    }
                    next_due += 1;
                }

                for courier in couriers.iter_mut() {
                    let was_stranded = courier.stranded;
                    let completions =
                        step_courier(courier, dt, self.graph, self.apsp, self.speed_kmh);
                    for c in completions {
                        match c.kind {
                            StopKind::Pickup => {
                                if trace {
                                    events.push(TraceEvent {
                                        time: t_end,
                                        courier_id: courier.id,
                                        order_id: c.order.order_id,
                                        kind: TraceEventKind::Pickup,
                                        vertex: c.vertex,
                                    });
                                }
                            }
                            StopKind::Dropoff => {
                                let latency = t_end - c.order.ordering_time_min;
                                courier.finished.push(FinishedOrder {
                                    order_id: c.order.order_id,
                                    latency_min: latency,
                                });
                                latencies[c.order.order_id as usize] = Some(latency);
                                if trace {
                                    events.push(TraceEvent {
                                        time: t_end,
                                        courier_id: courier.id,
                                        order_id: c.order.order_id,
                                        kind: TraceEventKind::Dropoff,
                                        vertex: c.vertex,
                                    });
                                }
                            }
                        }
                    }
                    if trace && courier.stranded && !was_stranded {
                        if let Some(stop) = courier.queue.first() {
                            events.push(TraceEvent {
                                time: t_end,
                                courier_id: courier.id,
                                order_id: stop.order_id,
                                kind: TraceEventKind::Stranded,
                                vertex: stop.vertex,
                            });
                        }
                    }
                }

                inter_courier_mutation(
                    &mut couriers,
                    self.graph,
                    self.apsp,
                    &self.anneal,
                    &mut rng_mutation,
                    1,
                );
            }
        }

        let records = orders
            .iter()
            .map(|o| LatencyRecord {
                time: o.ordering_time_min,
                avg_price: config.avg_tip,
                proportion: config.proportion,
                deliverymen_number: config.courier_count,
                latency: latencies[o.id as usize].unwrap_or(-1.0),
                tip: o.tip_rmb,
                distance: self.apsp.dist_f64(o.source, o.destination),
            })
            .collect();
        Ok(ScenarioRun {
            config: config.clone(),
            records,
            events,
        })
    }

    /// Runs every scenario of the grid, each seeded deterministically from
    /// (master seed, grid index). Scenarios execute in parallel; the output
    /// keeps grid order.
    pub fn sweep(
        &self,
        grid: &[ScenarioConfig],
        master_seed: u64,
        trace: bool,
    ) -> Result<Vec<ScenarioRun>> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        grid.par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let scenario = ScenarioConfig {
                    seed: derive_seed(master_seed, i as u64),
                    ..cfg.clone()
                };
                self.run_scenario_traced(&scenario, trace)
            })
            .collect()
    }
}

/// Concatenates sweep records in grid order.
pub fn flatten_records(runs: &[ScenarioRun]) -> Vec<LatencyRecord> {
    runs.iter().flat_map(|r| r.records.iter().copied()).collect()
}

fn draw_tip(p: f64, mean: f64, sigma: f64, max_tip: f64, rng: &mut impl Rng) -> f64 {
    if p <= 0.0 || !rng.random_bool(p.min(1.0)) {
        return 0.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return mean.clamp(0.0, max_tip);
    }
    let normal = Normal::new(mean, sigma).expect("validated sigma");
    for _ in 0..64 {
        let x = normal.sample(rng);
        if (0.0..=max_tip).contains(&x) {
            return x;
        }
    }
    mean.clamp(0.0, max_tip)
}

/// Advances one courier by `dt` minutes: walk the shortest path toward the
/// first queued stop, crossing vertices via next-hop pointers; completed
/// stops pop off and trigger pickup/dropoff bookkeeping. Idle couriers stay
/// put; an unreachable first stop strands the courier for the tick.
pub fn step_courier(
    courier: &mut CourierState,
    dt_min: f64,
    graph: &RoadGraph,
    apsp: &ShortestPathMatrix,
    speed_kmh: f64,
) -> Vec<Completion> {
    let mut budget_m = dt_min * meters_per_minute(speed_kmh);
    let mut completions = Vec::new();
    courier.stranded = false;
    loop {
        let Some(&stop) = courier.queue.first() else {
            break; // idle
        };
        if courier.pos.vertex_here() == Some(stop.vertex) {
            courier.queue.pop_front();
            match stop.kind {
                StopKind::Pickup => {
                    if let Some(o) = courier
                        .orders
                        .iter_mut()
                        .find(|o| o.order_id == stop.order_id)
                    {
                        o.picked_up = true;
                        completions.push(Completion {
                            order: o.clone(),
                            kind: StopKind::Pickup,
                            vertex: stop.vertex,
                        });
                    }
                }
                StopKind::Dropoff => {
                    if let Some(idx) = courier
                        .orders
                        .iter()
                        .position(|o| o.order_id == stop.order_id)
                    {
                        let order = courier.orders.remove(idx);
                        completions.push(Completion {
                            order,
                            kind: StopKind::Dropoff,
                            vertex: stop.vertex,
                        });
                    }
                }
            }
            let orders = std::mem::take(&mut courier.orders);
            courier.queue.rebuild_tips(&orders);
            courier.orders = orders;
            continue;
        }
        if budget_m <= 0.0 {
            break;
        }
        if let Some(here) = courier.pos.vertex_here() {
            let Some(next) = apsp.next_hop(here, stop.vertex) else {
                courier.stranded = true;
                break;
            };
            let len = f64::from(graph.edge_length(here, next).expect("next-hop edge exists"));
            if budget_m >= len {
                budget_m -= len;
                courier.pos = EdgePosition {
                    u: here,
                    v: next,
                    t: 1.0,
                };
            } else {
                courier.pos = EdgePosition {
                    u: here,
                    v: next,
                    t: budget_m / len,
                };
                budget_m = 0.0;
            }
        } else {
            let pd = position_to_vertex_distance(&courier.pos, stop.vertex, graph, apsp);
            if !pd.total_m.is_finite() {
                courier.stranded = true;
                break;
            }
            let len = f64::from(
                graph
                    .edge_length(courier.pos.u, courier.pos.v)
                    .expect("position edge exists"),
            );
            if budget_m >= pd.offset_m {
                budget_m -= pd.offset_m;
                courier.pos.t = if pd.anchor == courier.pos.u { 0.0 } else { 1.0 };
            } else {
                let delta = budget_m / len;
                courier.pos.t += if pd.anchor == courier.pos.u {
                    -delta
                } else {
                    delta
                };
                budget_m = 0.0;
            }
        }
    }
    completions
}
