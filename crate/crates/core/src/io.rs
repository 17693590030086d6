//! File formats: graph CSVs, survey and sweep JSON, latency records, the
//! binary shortest-path cache, and the model artifact.
//!
//! Everything here is deterministic: identical inputs produce byte-identical
//! outputs, and every artifact carries the seed/config hash that made it.

use crate::advisory::ModelArtifact;
use crate::demand::{CityCalibration, OrderProfile, SurveyMarginals};
use crate::dispatch::TracePoint;
use crate::error::{Error, Result};
use crate::graph::{EdgeDef, RoadGraph, ShortestPathMatrix, Vertex, VertexKind};
use crate::seed::config_hash;
use crate::sim::{LatencyRecord, ScenarioConfig, TraceEvent};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: Some(line),
        msg: msg.into(),
    }
}

fn file_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: None,
        msg: msg.into(),
    }
}

/// Column lookup that names the missing column in its error.
struct Columns {
    indices: Vec<usize>,
}

impl Columns {
    fn resolve(path: &Path, headers: &csv::StringRecord, required: &[&str]) -> Result<Self> {
        let mut indices = Vec::with_capacity(required.len());
        for name in required {
            let idx = headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.display().to_string(),
                    column: (*name).to_string(),
                })?;
            indices.push(idx);
        }
        Ok(Columns { indices })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, col: usize) -> &'r str {
        record.get(self.indices[col]).unwrap_or("").trim()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| file_err(path, e.to_string()))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Loads the road network from `nodes.csv` (id,kind,name,weight_attr) and
/// `edges.csv` (u,v,length_m).
pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<RoadGraph> {
    let mut reader = open_csv(nodes_path)?;
    let headers = reader
        .headers()
        .map_err(|e| file_err(nodes_path, e.to_string()))?
        .clone();
    let cols = Columns::resolve(nodes_path, &headers, &["id", "kind", "name", "weight_attr"])?;
    let mut vertices: Vec<Vertex> = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| file_err(nodes_path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let id: usize = cols
            .get(&record, 0)
            .parse()
            .map_err(|_| parse_err(nodes_path, line, format!("bad id '{}'", cols.get(&record, 0))))?;
        let kind_raw = cols.get(&record, 1);
        let kind = VertexKind::parse(kind_raw)
            .ok_or_else(|| parse_err(nodes_path, line, format!("unknown kind '{kind_raw}'")))?;
        let weight_attr: f64 = cols.get(&record, 3).parse().map_err(|_| {
            parse_err(
                nodes_path,
                line,
                format!("bad weight_attr '{}'", cols.get(&record, 3)),
            )
        })?;
        vertices.push(Vertex {
            id,
            kind,
            name: cols.get(&record, 2).to_string(),
            weight_attr,
        });
    }

    let mut reader = open_csv(edges_path)?;
    let headers = reader
        .headers()
        .map_err(|e| file_err(edges_path, e.to_string()))?
        .clone();
    let cols = Columns::resolve(edges_path, &headers, &["u", "v", "length_m"])?;
    let mut edges: Vec<EdgeDef> = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| file_err(edges_path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let u: usize = cols
            .get(&record, 0)
            .parse()
            .map_err(|_| parse_err(edges_path, line, format!("bad u '{}'", cols.get(&record, 0))))?;
        let v: usize = cols
            .get(&record, 1)
            .parse()
            .map_err(|_| parse_err(edges_path, line, format!("bad v '{}'", cols.get(&record, 1))))?;
        let raw_len = cols.get(&record, 2);
        let length: f64 = raw_len
            .parse()
            .map_err(|_| parse_err(edges_path, line, format!("bad length_m '{raw_len}'")))?;
        if !length.is_finite() || length < 0.5 {
            return Err(parse_err(
                edges_path,
                line,
                format!("length_m must be at least one meter, got {raw_len}"),
            ));
        }
        edges.push(EdgeDef {
            u,
            v,
            length_m: length.round() as u32,
        });
    }
    RoadGraph::new(vertices, edges)
}

const APSP_MAGIC: &[u8; 4] = b"APSP";
const APSP_VERSION: u32 = 1;

/// Shortest-path cache as read back from disk.
pub struct ApspFile {
    pub n: usize,
    pub dist: Vec<u32>,
    pub input_hash: u64,
}

/// Writes the distance matrix cache: magic, version, input hash, dimension,
/// then row-major u32 meters with u32::MAX as the infinity sentinel.
pub fn write_apsp(path: &Path, apsp: &ShortestPathMatrix, input_hash: u64) -> Result<()> {
    let mut out = Vec::with_capacity(20 + apsp.raw_dist().len() * 4);
    out.extend_from_slice(APSP_MAGIC);
    out.extend_from_slice(&APSP_VERSION.to_le_bytes());
    out.extend_from_slice(&input_hash.to_le_bytes());
    out.extend_from_slice(&(apsp.n() as u32).to_le_bytes());
    for &d in apsp.raw_dist() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_apsp(path: &Path) -> Result<ApspFile> {
    let mut file = fs::File::open(path).map_err(|e| file_err(path, e.to_string()))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    if buf.len() < 20 || &buf[0..4] != APSP_MAGIC {
        return Err(file_err(path, "not a shortest-path cache"));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != APSP_VERSION {
        return Err(file_err(path, format!("unsupported cache version {version}")));
    }
    let input_hash = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    let n = u32::from_le_bytes(buf[16..20].try_into().unwrap()) as usize;
    let expected = 20 + n * n * 4;
    if buf.len() != expected {
        return Err(file_err(
            path,
            format!("truncated cache: {} bytes, expected {expected}", buf.len()),
        ));
    }
    let dist = buf[20..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ApspFile {
        n,
        dist,
        input_hash,
    })
}

pub fn load_survey(path: &Path) -> Result<SurveyMarginals> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e.to_string()))?;
    let marginals: SurveyMarginals =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    marginals.validate()?;
    Ok(marginals)
}

/// Loads `calibration.csv` (gdp,couriers) and fits the head-count line.
pub fn load_calibration(path: &Path) -> Result<CityCalibration> {
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|e| file_err(path, e.to_string()))?
        .clone();
    let cols = Columns::resolve(path, &headers, &["gdp", "couriers"])?;
    let mut points = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| file_err(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let gdp: f64 = cols
            .get(&record, 0)
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad gdp '{}'", cols.get(&record, 0))))?;
        let couriers: f64 = cols.get(&record, 1).parse().map_err(|_| {
            parse_err(path, line, format!("bad couriers '{}'", cols.get(&record, 1)))
        })?;
        points.push((gdp, couriers));
    }
    CityCalibration::fit(points)
}

pub const RECORD_COLUMNS: [&str; 7] = [
    "time",
    "avg_price",
    "proportion",
    "deliverymen_number",
    "latency",
    "tip",
    "distance",
];

pub fn write_records(path: &Path, records: &[LatencyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| file_err(path, e.to_string()))?;
    w.write_record(RECORD_COLUMNS)
        .map_err(|e| file_err(path, e.to_string()))?;
    for r in records {
        w.write_record(&[
            r.time.to_string(),
            r.avg_price.to_string(),
            r.proportion.to_string(),
            r.deliverymen_number.to_string(),
            r.latency.to_string(),
            r.tip.to_string(),
            r.distance.to_string(),
        ])
        .map_err(|e| file_err(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<LatencyRecord>> {
    let mut reader = open_csv(path)?;
    let headers = reader
        .headers()
        .map_err(|e| file_err(path, e.to_string()))?
        .clone();
    let cols = Columns::resolve(path, &headers, &RECORD_COLUMNS)?;
    let mut records = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| file_err(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            cols.get(&record, i).parse().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!("bad {} '{}'", RECORD_COLUMNS[i], cols.get(&record, i)),
                )
            })
        };
        records.push(LatencyRecord {
            time: field(0)?,
            avg_price: field(1)?,
            proportion: field(2)?,
            deliverymen_number: field(3)? as u32,
            latency: field(4)?,
            tip: field(5)?,
            distance: field(6)?,
        });
    }
    Ok(records)
}

pub fn write_orders(path: &Path, orders: &[OrderProfile]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| file_err(path, e.to_string()))?;
    w.write_record([
        "id",
        "t_order_min",
        "max_wait_min",
        "tip_rmb",
        "source",
        "destination",
        "flags",
    ])
    .map_err(|e| file_err(path, e.to_string()))?;
    for o in orders {
        w.write_record(&[
            o.id.to_string(),
            o.ordering_time_min.to_string(),
            o.max_wait_min.to_string(),
            o.tip_rmb.to_string(),
            o.source.to_string(),
            o.destination.to_string(),
            if o.restaurant_fallback {
                "restaurant_fallback".to_string()
            } else {
                String::new()
            },
        ])
        .map_err(|e| file_err(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| file_err(path, e.to_string()))?;
    w.write_record(["time", "courier_id", "order_id", "kind", "vertex"])
        .map_err(|e| file_err(path, e.to_string()))?;
    for e in events {
        let kind = serde_json::to_value(e.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        w.write_record(&[
            e.time.to_string(),
            e.courier_id.to_string(),
            e.order_id.to_string(),
            kind,
            e.vertex.to_string(),
        ])
        .map_err(|e2| file_err(path, e2.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Loss trace export, one row per proposal.
pub fn write_anneal_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| file_err(path, e.to_string()))?;
    w.write_record(["iteration", "proposed_loss", "accepted_loss"])
        .map_err(|e| file_err(path, e.to_string()))?;
    for p in trace {
        w.write_record(&[
            p.iteration.to_string(),
            p.proposed_loss.to_string(),
            p.accepted_loss.to_string(),
        ])
        .map_err(|e| file_err(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_model(path: &Path, artifact: &ModelArtifact) -> Result<()> {
    let json = serde_json::to_string_pretty(artifact)
        .map_err(|e| Error::Io(format!("model serialization: {e}")))?;
    let mut file = fs::File::create(path).map_err(|e| file_err(path, e.to_string()))?;
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

/// Scenario grid description (sweep.json): a base scenario plus value lists
/// for the swept axes, expanded as a cartesian product with `replicates`
/// repetitions per cell.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SweepPlan {
    pub master_seed: u64,
    pub base: ScenarioConfig,
    pub proportion: Vec<f64>,
    pub avg_tip: Vec<f64>,
    pub courier_count: Vec<u32>,
    pub replicates: u32,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            master_seed: 0,
            base: ScenarioConfig::default(),
            proportion: Vec::new(),
            avg_tip: Vec::new(),
            courier_count: Vec::new(),
            replicates: 1,
        }
    }
}

impl SweepPlan {
    /// Expands to concrete scenarios in a fixed order: proportion, then
    /// average tip, then courier count, then replicate index. Seeds are
    /// assigned later from (master_seed, grid index).
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        let one = |v: &Vec<f64>, fallback: f64| {
            if v.is_empty() {
                vec![fallback]
            } else {
                v.clone()
            }
        };
        let proportions = one(&self.proportion, self.base.proportion);
        let avg_tips = one(&self.avg_tip, self.base.avg_tip);
        let couriers = if self.courier_count.is_empty() {
            vec![self.base.courier_count]
        } else {
            self.courier_count.clone()
        };
        let mut grid = Vec::new();
        for &p in &proportions {
            for &m in &avg_tips {
                for &c in &couriers {
                    for _ in 0..self.replicates {
                        grid.push(ScenarioConfig {
                            proportion: p,
                            avg_tip: m,
                            courier_count: c,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        Ok(grid)
    }
}

pub fn load_sweep(path: &Path) -> Result<SweepPlan> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

/// FNV-1a over a value's canonical JSON, hex-encoded; the config fingerprint
/// embedded in artifacts.
pub fn config_hash_hex<T: serde::Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).unwrap_or_default();
    format!("{:016x}", config_hash(json.as_bytes()))
}
