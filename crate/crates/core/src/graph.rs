//! Road network, all-pairs shortest paths, and mid-edge distance queries.
//!
//! Distances are kept in integer meters end to end so shortest-path results
//! compare exactly; unit conversions (km/h, minutes) happen only at the
//! query boundary. Disconnected pairs stay at infinity rather than erroring;
//! downstream consumers filter them.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Sentinel for "no path" in integer-meter matrices.
pub const INF_METERS: u32 = u32::MAX;

/// Average biking speed used for all travel-time conversions, km/h.
pub const DEFAULT_SPEED_KMH: f64 = 15.5;

pub type VertexId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Restaurant,
    Destination,
    Crossing,
}

impl VertexKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "restaurant" => Some(VertexKind::Restaurant),
            "destination" => Some(VertexKind::Destination),
            "crossing" => Some(VertexKind::Crossing),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VertexKind::Restaurant => "restaurant",
            VertexKind::Destination => "destination",
            VertexKind::Crossing => "crossing",
        }
    }
}

/// A map vertex. `weight_attr` is the building population for destinations
/// and the latest sales amount for restaurants; unused for crossings.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    pub name: String,
    pub weight_attr: f64,
}

/// Undirected road segment, usable in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeDef {
    pub u: VertexId,
    pub v: VertexId,
    pub length_m: u32,
}

#[derive(Debug, Clone)]
pub struct RoadGraph {
    vertices: Vec<Vertex>,
    edges: Vec<EdgeDef>,
    /// Per vertex: (neighbor, length) sorted by neighbor id.
    adjacency: Vec<Vec<(VertexId, u32)>>,
}

impl RoadGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<EdgeDef>) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidGraph(format!(
                    "vertex ids must be 0..n in order; found id {} at position {i}",
                    v.id
                )));
            }
            if !v.weight_attr.is_finite() || v.weight_attr < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "vertex {} has invalid weight_attr {}",
                    v.id, v.weight_attr
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen: HashMap<(VertexId, VertexId), u32> = HashMap::new();
        for e in &edges {
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.u)));
            }
            if e.u >= n {
                return Err(Error::UnknownVertex(e.u));
            }
            if e.v >= n {
                return Err(Error::UnknownVertex(e.v));
            }
            if e.length_m == 0 {
                return Err(Error::InvalidGraph(format!(
                    "edge {}-{} has non-positive length",
                    e.u, e.v
                )));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            match seen.get(&key) {
                Some(&len) if len != e.length_m => {
                    return Err(Error::ConflictingEdge {
                        u: key.0,
                        v: key.1,
                        first_m: len,
                        second_m: e.length_m,
                    })
                }
                Some(_) => continue, // exact duplicate, keep one
                None => {
                    seen.insert(key, e.length_m);
                    adjacency[e.u].push((e.v, e.length_m));
                    adjacency[e.v].push((e.u, e.length_m));
                }
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let mut dedup_edges: Vec<EdgeDef> = seen
            .into_iter()
            .map(|((u, v), length_m)| EdgeDef { u, v, length_m })
            .collect();
        dedup_edges.sort_unstable_by_key(|e| (e.u, e.v));
        Ok(RoadGraph {
            vertices,
            edges: dedup_edges,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeDef] {
        &self.edges
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    pub fn neighbors(&self, id: VertexId) -> &[(VertexId, u32)] {
        &self.adjacency[id]
    }

    /// Length of the direct edge u-v, if one exists.
    pub fn edge_length(&self, u: VertexId, v: VertexId) -> Option<u32> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, len)| len)
    }

    /// (vertex id, weight_attr) of every vertex of `kind`, in id order.
    pub fn of_kind(&self, kind: VertexKind) -> Vec<(VertexId, f64)> {
        self.vertices
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| (v.id, v.weight_attr))
            .collect()
    }

    pub fn restaurants(&self) -> Vec<(VertexId, f64)> {
        self.of_kind(VertexKind::Restaurant)
    }

    pub fn destinations(&self) -> Vec<(VertexId, f64)> {
        self.of_kind(VertexKind::Destination)
    }
}

/// Adjacency distance matrix S: direct edge weight, infinity where no direct
/// path exists, zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    cells: Vec<u32>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: VertexId, j: VertexId) -> u32 {
        self.cells[i * self.n + j]
    }

    fn set(&mut self, i: VertexId, j: VertexId, value: u32) {
        self.cells[i * self.n + j] = value;
    }
}

/// Shortest-path closure of the adjacency matrix, with next-hop pointers for
/// route playback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPathMatrix {
    n: usize,
    dist: Vec<u32>,
    /// next_hop[i*n+j] = first vertex after i on a shortest i->j path;
    /// NO_HOP when unreachable or i == j.
    next_hop: Vec<u32>,
}

const NO_HOP: u32 = u32::MAX;

impl ShortestPathMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Shortest distance in meters; `INF_METERS` when unreachable.
    pub fn dist(&self, i: VertexId, j: VertexId) -> u32 {
        self.dist[i * self.n + j]
    }

    pub fn dist_f64(&self, i: VertexId, j: VertexId) -> f64 {
        let d = self.dist(i, j);
        if d == INF_METERS {
            f64::INFINITY
        } else {
            f64::from(d)
        }
    }

    pub fn reachable(&self, i: VertexId, j: VertexId) -> bool {
        self.dist(i, j) != INF_METERS
    }

    /// First vertex after `i` on a shortest path to `j`.
    pub fn next_hop(&self, i: VertexId, j: VertexId) -> Option<VertexId> {
        let h = self.next_hop[i * self.n + j];
        if h == NO_HOP {
            None
        } else {
            Some(h as VertexId)
        }
    }

    /// Full vertex sequence i..=j of one shortest path, or None if unreachable.
    pub fn reconstruct_path(&self, i: VertexId, j: VertexId) -> Option<Vec<VertexId>> {
        if i == j {
            return Some(vec![i]);
        }
        if !self.reachable(i, j) {
            return None;
        }
        let mut path = vec![i];
        let mut cur = i;
        while cur != j {
            cur = self.next_hop(cur, j)?;
            path.push(cur);
        }
        Some(path)
    }

    /// Largest finite shortest-path distance.
    pub fn diameter_m(&self) -> u32 {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d != INF_METERS)
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn raw_dist(&self) -> &[u32] {
        &self.dist
    }
}

/// Initializes S: direct edge weight, infinity when no direct path, zero on
/// the diagonal. Rejects conflicting duplicate edges (via `RoadGraph::new`).
pub fn build_adjacency(graph: &RoadGraph) -> DistanceMatrix {
    let n = graph.vertex_count();
    let mut m = DistanceMatrix {
        n,
        cells: vec![INF_METERS; n * n],
    };
    for i in 0..n {
        m.set(i, i, 0);
    }
    for e in graph.edges() {
        m.set(e.u, e.v, e.length_m);
        m.set(e.v, e.u, e.length_m);
    }
    m
}

/// Floyd-Warshall closure. The input matrix is left untouched; disconnected
/// pairs stay at infinity.
pub fn floyd_warshall(s: &DistanceMatrix) -> ShortestPathMatrix {
    let n = s.n;
    let mut dist = s.cells.clone();
    let mut next_hop = vec![NO_HOP; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[i * n + j] != INF_METERS {
                next_hop[i * n + j] = j as u32;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let d_ik = dist[i * n + k];
            if d_ik == INF_METERS {
                continue;
            }
            for j in 0..n {
                let via = d_ik.saturating_add(dist[k * n + j]);
                if via < dist[i * n + j] {
                    dist[i * n + j] = via;
                    next_hop[i * n + j] = next_hop[i * n + k];
                }
            }
        }
    }
    ShortestPathMatrix { n, dist, next_hop }
}

/// A position on edge (u, v), fraction `t` of the way from u toward v.
/// `t` of 0 or 1 means exactly at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePosition {
    pub u: VertexId,
    pub v: VertexId,
    pub t: f64,
}

impl EdgePosition {
    /// Position exactly at `vertex`, anchored on its lowest-id incident edge.
    pub fn at_vertex(vertex: VertexId, graph: &RoadGraph) -> Result<Self> {
        let nbrs = graph.neighbors(vertex);
        let &(nbr, _) = nbrs.first().ok_or_else(|| {
            Error::InvalidGraph(format!("vertex {vertex} has no incident edge"))
        })?;
        Ok(EdgePosition {
            u: vertex,
            v: nbr,
            t: 0.0,
        })
    }

    pub fn validate(&self, graph: &RoadGraph) -> Result<()> {
        if graph.edge_length(self.u, self.v).is_none() {
            return Err(Error::InvalidGraph(format!(
                "position references missing edge {}-{}",
                self.u, self.v
            )));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::InvalidGraph(format!(
                "position fraction {} outside [0,1]",
                self.t
            )));
        }
        Ok(())
    }

    /// The vertex this position sits on exactly, if any.
    pub fn vertex_here(&self) -> Option<VertexId> {
        if self.t == 0.0 {
            Some(self.u)
        } else if self.t == 1.0 {
            Some(self.v)
        } else {
            None
        }
    }
}

/// Result of snapping a mid-edge position onto the shortest-path matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionDistance {
    /// The edge endpoint the shortest route leaves through.
    pub anchor: VertexId,
    /// Meters along the edge from the position to the anchor.
    pub offset_m: f64,
    /// Total meters position -> target; infinite when unreachable.
    pub total_m: f64,
}

/// Distance from a mid-edge position to a vertex: the cheaper of routing via
/// either edge endpoint. Ties break toward endpoint u.
pub fn position_to_vertex_distance(
    pos: &EdgePosition,
    target: VertexId,
    graph: &RoadGraph,
    apsp: &ShortestPathMatrix,
) -> PositionDistance {
    let len = f64::from(
        graph
            .edge_length(pos.u, pos.v)
            .expect("position lies on an existing edge"),
    );
    let to_u = len * pos.t;
    let to_v = len * (1.0 - pos.t);
    let via_u = to_u + apsp.dist_f64(pos.u, target);
    let via_v = to_v + apsp.dist_f64(pos.v, target);
    if via_u <= via_v {
        PositionDistance {
            anchor: pos.u,
            offset_m: to_u,
            total_m: via_u,
        }
    } else {
        PositionDistance {
            anchor: pos.v,
            offset_m: to_v,
            total_m: via_v,
        }
    }
}

/// Converts meters to minutes at the given speed. Default speed is
/// [`DEFAULT_SPEED_KMH`].
pub fn travel_time(distance_m: f64, speed_kmh: f64) -> Result<f64> {
    if speed_kmh <= 0.0 || !speed_kmh.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "speed must be positive, got {speed_kmh} km/h"
        )));
    }
    if distance_m < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "distance must be nonnegative, got {distance_m} m"
        )));
    }
    Ok(distance_m / (speed_kmh * 1000.0 / 60.0))
}

/// Meters per minute at the given speed.
pub fn meters_per_minute(speed_kmh: f64) -> f64 {
    speed_kmh * 1000.0 / 60.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn crossing(id: usize) -> Vertex {
        Vertex {
            id,
            kind: VertexKind::Crossing,
            name: format!("c{id}"),
            weight_attr: 0.0,
        }
    }

    fn graph_from_edges(n: usize, edges: &[(usize, usize, u32)]) -> RoadGraph {
        let vertices = (0..n).map(crossing).collect();
        let edges = edges
            .iter()
            .map(|&(u, v, length_m)| EdgeDef { u, v, length_m })
            .collect();
        RoadGraph::new(vertices, edges).unwrap()
    }

    fn triangle() -> RoadGraph {
        graph_from_edges(3, &[(0, 1, 1000), (1, 2, 2000), (0, 2, 5000)])
    }

    // Independent oracle: binary-heap Dijkstra from every source, written
    // against the edge list only. Kept separate from the Floyd-Warshall path.
    fn dijkstra_all_pairs(graph: &RoadGraph) -> Vec<Vec<u32>> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let n = graph.vertex_count();
        let mut all = Vec::with_capacity(n);
        for src in 0..n {
            let mut dist = vec![INF_METERS; n];
            dist[src] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0u32, src)));
            while let Some(Reverse((d, x))) = heap.pop() {
                if d > dist[x] {
                    continue;
                }
                for &(y, w) in graph.neighbors(x) {
                    let nd = d + w;
                    if nd < dist[y] {
                        dist[y] = nd;
                        heap.push(Reverse((nd, y)));
                    }
                }
            }
            all.push(dist);
        }
        all
    }

    fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> RoadGraph {
        let mut edges = Vec::new();
        // random spanning tree first, then extra chords
        for v in 1..n {
            let u = rng.random_range(0..v);
            edges.push((u, v, rng.random_range(1..=5000)));
        }
        let extra = rng.random_range(0..=n * 2);
        for _ in 0..extra {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u.min(v), u.max(v))) {
                edges.push((u.min(v), u.max(v), rng.random_range(1..=5000)));
            }
        }
        graph_from_edges(n, &edges)
    }

    #[test]
    fn adjacency_follows_the_three_rules() {
        let s = build_adjacency(&triangle());
        assert_eq!(s.get(0, 1), 1000);
        assert_eq!(s.get(0, 2), 5000);
        assert_eq!(s.get(1, 1), 0);
        assert_eq!(s.get(1, 0), 1000); // symmetric
    }

    #[test]
    fn adjacency_single_vertex() {
        let g = graph_from_edges(1, &[]);
        let s = build_adjacency(&g);
        assert_eq!(s.n(), 1);
        assert_eq!(s.get(0, 0), 0);
    }

    #[test]
    fn adjacency_disconnected_pair_is_infinite() {
        let g = graph_from_edges(3, &[(0, 1, 700)]);
        let s = build_adjacency(&g);
        assert_eq!(s.get(0, 2), INF_METERS);
        assert_eq!(s.get(2, 0), INF_METERS);
    }

    #[test]
    fn conflicting_duplicate_edge_rejected() {
        let vertices = (0..2).map(crossing).collect();
        let edges = vec![
            EdgeDef {
                u: 0,
                v: 1,
                length_m: 100,
            },
            EdgeDef {
                u: 1,
                v: 0,
                length_m: 200,
            },
        ];
        let err = RoadGraph::new(vertices, edges).unwrap_err();
        assert!(matches!(err, Error::ConflictingEdge { .. }));
    }

    #[test]
    fn exact_duplicate_edge_is_kept_once() {
        let g = graph_from_edges(2, &[(0, 1, 100), (1, 0, 100)]);
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn edge_referencing_unknown_vertex_rejected() {
        let vertices = (0..2).map(crossing).collect::<Vec<_>>();
        let edges = vec![EdgeDef {
            u: 0,
            v: 5,
            length_m: 100,
        }];
        assert_eq!(
            RoadGraph::new(vertices, edges).unwrap_err(),
            Error::UnknownVertex(5)
        );
    }

    #[test]
    fn floyd_warshall_takes_the_detour() {
        // Enumerated by hand: 0->2 direct 5000 vs 0->1->2 = 3000.
        let s = build_adjacency(&triangle());
        let apsp = floyd_warshall(&s);
        assert_eq!(apsp.dist(0, 2), 3000);
        assert_eq!(apsp.next_hop(0, 2), Some(1));
        // input not modified
        assert_eq!(s.get(0, 2), 5000);
    }

    #[test]
    fn floyd_warshall_zero_diagonal() {
        let apsp = floyd_warshall(&build_adjacency(&triangle()));
        for i in 0..3 {
            assert_eq!(apsp.dist(i, i), 0);
        }
    }

    #[test]
    fn floyd_warshall_matches_dijkstra_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA5A5);
        for trial in 0..40 {
            let n = rng.random_range(2..=12);
            let g = random_connected_graph(&mut rng, n);
            let apsp = floyd_warshall(&build_adjacency(&g));
            let oracle = dijkstra_all_pairs(&g);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(
                        apsp.dist(i, j),
                        oracle[i][j],
                        "trial {trial}, pair ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn triangle_inequality_holds_on_random_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.random_range(3..=20);
            let g = random_connected_graph(&mut rng, n);
            let apsp = floyd_warshall(&build_adjacency(&g));
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(apsp.dist(i, j), apsp.dist(j, i), "symmetry");
                    for k in 0..n {
                        let via = apsp.dist(i, k).saturating_add(apsp.dist(k, j));
                        assert!(apsp.dist(i, j) <= via, "triangle ({i},{j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn reconstructed_path_length_equals_shortest() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let n = rng.random_range(2..=12);
            let g = random_connected_graph(&mut rng, n);
            let apsp = floyd_warshall(&build_adjacency(&g));
            for i in 0..n {
                for j in 0..n {
                    let path = apsp.reconstruct_path(i, j).unwrap();
                    let total: u32 = path
                        .windows(2)
                        .map(|w| g.edge_length(w[0], w[1]).unwrap())
                        .sum();
                    assert_eq!(total, apsp.dist(i, j));
                }
            }
        }
    }

    #[test]
    fn position_at_vertex_zero_distance() {
        let g = triangle();
        let apsp = floyd_warshall(&build_adjacency(&g));
        let pos = EdgePosition { u: 0, v: 1, t: 0.0 };
        let d = position_to_vertex_distance(&pos, 0, &g, &apsp);
        assert_eq!(d.total_m, 0.0);
        assert_eq!(d.anchor, 0);
    }

    #[test]
    fn position_midpoint_straight_ahead() {
        let g = graph_from_edges(2, &[(0, 1, 1000)]);
        let apsp = floyd_warshall(&build_adjacency(&g));
        let pos = EdgePosition { u: 0, v: 1, t: 0.5 };
        let d = position_to_vertex_distance(&pos, 1, &g, &apsp);
        assert_eq!(d.total_m, 500.0);
        assert_eq!(d.anchor, 1);
    }

    #[test]
    fn position_takes_detour_when_cheaper() {
        // Edge 0-1 is 4000 m; courier sits at t=0.25 from 0.
        // Target 3 hangs off vertex 0. Enumerated by hand:
        //   via 0: 1000 + 500  = 1500
        //   via 1: 3000 + 3500 = 6500  (1 -> 2 -> 0 -> 3)
        let g = graph_from_edges(4, &[(0, 1, 4000), (1, 2, 1500), (0, 2, 1500), (0, 3, 500)]);
        let apsp = floyd_warshall(&build_adjacency(&g));
        let pos = EdgePosition {
            u: 0,
            v: 1,
            t: 0.25,
        };
        let d = position_to_vertex_distance(&pos, 3, &g, &apsp);
        assert_eq!(d.anchor, 0);
        assert_eq!(d.offset_m, 1000.0);
        assert_eq!(d.total_m, 1500.0);
    }

    #[test]
    fn position_tie_breaks_toward_u() {
        let g = graph_from_edges(2, &[(0, 1, 1000)]);
        let apsp = floyd_warshall(&build_adjacency(&g));
        // Midpoint, both endpoints equally far from target 1's... use target
        // that is symmetric: distance via 0 = 500 + 1000, via 1 = 500 + 0.
        // For a true tie, query the midpoint against each endpoint's side:
        let pos = EdgePosition { u: 0, v: 1, t: 0.5 };
        let d0 = position_to_vertex_distance(&pos, 0, &g, &apsp);
        assert_eq!(d0.anchor, 0);
        // symmetric two-edge fixture where both routes cost the same
        let g2 = graph_from_edges(3, &[(0, 1, 1000), (1, 2, 1000), (0, 2, 1000)]);
        let apsp2 = floyd_warshall(&build_adjacency(&g2));
        let mid = EdgePosition { u: 0, v: 1, t: 0.5 };
        let d = position_to_vertex_distance(&mid, 2, &g2, &apsp2);
        // via 0: 500 + 1000; via 1: 500 + 1000 -> tie, anchor u = 0
        assert_eq!(d.total_m, 1500.0);
        assert_eq!(d.anchor, 0);
    }

    #[test]
    fn unreachable_target_is_infinite() {
        let g = graph_from_edges(3, &[(0, 1, 1000)]);
        let apsp = floyd_warshall(&build_adjacency(&g));
        let pos = EdgePosition { u: 0, v: 1, t: 0.3 };
        let d = position_to_vertex_distance(&pos, 2, &g, &apsp);
        assert!(d.total_m.is_infinite());
    }

    #[test]
    fn travel_time_unit_cases() {
        assert!((travel_time(15_500.0, 15.5).unwrap() - 60.0).abs() < 1e-12);
        assert_eq!(travel_time(0.0, 15.5).unwrap(), 0.0);
        assert!((travel_time(7_750.0, 15.5).unwrap() - 30.0).abs() < 1e-12);
        assert!(travel_time(100.0, 0.0).is_err());
        assert!(travel_time(100.0, -3.0).is_err());
    }
}
