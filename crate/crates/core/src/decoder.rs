//! Minimum-weight perfect matching decoder.
//!
//! Per shot the fired detectors (defects) are matched to each other or to
//! the boundary along shortest paths of the matching graph. Shortest-path
//! rows are computed on first use and shared between shots. A defect pair is
//! only worth matching directly if its path is shorter than sending both
//! defects to the boundary; the remaining candidate pairs split the defects
//! into independent clusters, and only clusters of three or more defects go
//! to the blossom solver.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dem::DetectorErrorModel;
use crate::error::{Error, Result};
use crate::matching::min_weight_perfect_matching;
use crate::shots::ShotBatch;

/// Weights are scaled by this factor and rounded before exact matching.
const WEIGHT_SCALE: f64 = 1048576.0;
/// Largest detector count for which full shortest-path rows are cached.
const CACHE_LIMIT: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub to: u32,
    pub weight: f64,
    pub observable: bool,
}

/// Detectors plus one boundary node (index `detector_count`).
#[derive(Clone, Debug)]
pub struct MatchingGraph {
    detector_count: usize,
    adjacency: Vec<Vec<Edge>>,
}

impl MatchingGraph {
    /// One edge per mechanism, weight `ln((1 - p) / p)`. Parallel edges keep
    /// the lighter weight and that edge's observable bit.
    pub fn from_dem(dem: &DetectorErrorModel) -> Result<Self> {
        let n = dem.detector_count;
        let boundary = n as u32;
        let mut best: HashMap<(u32, u32), (f64, bool)> = HashMap::new();
        let mut order = Vec::new();
        for m in &dem.mechanisms {
            if !(m.probability < 0.5) {
                return Err(Error::InvalidWeight(m.probability));
            }
            if m.probability <= 0.0 {
                continue;
            }
            let (u, v) = match m.detectors[..] {
                [a] => (a, boundary),
                [a, b] => (a, b),
                _ => continue,
            };
            if u as usize >= n || (v != boundary && v as usize >= n) {
                return Err(Error::InvalidInput(format!("detector out of range in edge ({u}, {v})")));
            }
            let w = ((1.0 - m.probability) / m.probability).ln();
            match best.get_mut(&(u, v)) {
                Some(e) if w < e.0 => *e = (w, m.observable),
                Some(_) => {}
                None => {
                    best.insert((u, v), (w, m.observable));
                    order.push((u, v));
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n + 1];
        for (u, v) in order {
            let (weight, observable) = best[&(u, v)];
            adjacency[u as usize].push(Edge { to: v, weight, observable });
            adjacency[v as usize].push(Edge { to: u, weight, observable });
        }
        Ok(MatchingGraph {
            detector_count: n,
            adjacency,
        })
    }

    pub fn detector_count(&self) -> usize {
        self.detector_count
    }

    pub fn boundary(&self) -> u32 {
        self.detector_count as u32
    }

    pub fn edges(&self, node: u32) -> &[Edge] {
        &self.adjacency[node as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for e in g.adjacency.iter_mut().flatten() {
            e.weight *= factor;
        }
        g
    }

    /// Detectors with no path to the boundary.
    pub fn unreachable(&self) -> Vec<u32> {
        let mut seen = vec![false; self.detector_count + 1];
        let mut stack = vec![self.boundary()];
        seen[self.detector_count] = true;
        while let Some(u) = stack.pop() {
            for e in &self.adjacency[u as usize] {
                if !seen[e.to as usize] {
                    seen[e.to as usize] = true;
                    stack.push(e.to);
                }
            }
        }
        (0..self.detector_count as u32).filter(|&d| !seen[d as usize]).collect()
    }

    /// Fails with the first detector that cannot reach the boundary.
    pub fn check_connected(&self) -> Result<()> {
        match self.unreachable().first() {
            Some(&d) => Err(Error::Disconnected(d)),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances and path observable parities from one source.
#[derive(Clone, Debug)]
struct Row {
    dist: Vec<f64>,
    parity: Vec<u64>,
}

impl Row {
    fn parity(&self, node: u32) -> bool {
        self.parity[node as usize / 64] >> (node % 64) & 1 == 1
    }
}

/// Dijkstra from `source`. The boundary is a sink: paths never pass through it.
fn shortest_paths(graph: &MatchingGraph, source: u32) -> Row {
    let n = graph.detector_count + 1;
    let mut dist = vec![f64::INFINITY; n];
    let mut parity = vec![0u64; n.div_ceil(64)];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source as usize] = 0.0;
    heap.push(HeapItem(0.0, source));
    let boundary = graph.boundary();
    while let Some(HeapItem(d, u)) = heap.pop() {
        if done[u as usize] {
            continue;
        }
        done[u as usize] = true;
        if u == boundary {
            continue;
        }
        let pu = parity[u as usize / 64] >> (u % 64) & 1;
        for e in graph.edges(u) {
            let nd = d + e.weight;
            let v = e.to as usize;
            if nd < dist[v] {
                dist[v] = nd;
                let bit = 1u64 << (v % 64);
                if (pu == 1) ^ e.observable {
                    parity[v / 64] |= bit;
                } else {
                    parity[v / 64] &= !bit;
                }
                heap.push(HeapItem(nd, e.to));
            }
        }
    }
    Row { dist, parity }
}

/// Decoding result for one shot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoded {
    pub prediction: bool,
    /// Total weight of the chosen matching.
    pub weight: f64,
}

/// MWPM decoder over a matching graph.
pub struct Decoder {
    graph: MatchingGraph,
    rows: Vec<OnceLock<Row>>,
}

impl Decoder {
    pub fn new(graph: MatchingGraph) -> Self {
        let cached = if graph.detector_count <= CACHE_LIMIT {
            graph.detector_count
        } else {
            0
        };
        Decoder {
            rows: (0..cached).map(|_| OnceLock::new()).collect(),
            graph,
        }
    }

    pub fn from_dem(dem: &DetectorErrorModel) -> Result<Self> {
        Ok(Decoder::new(MatchingGraph::from_dem(dem)?))
    }

    pub fn graph(&self) -> &MatchingGraph {
        &self.graph
    }

    /// Decodes one shot given its fired detectors.
    pub fn decode(&self, defects: &[u32]) -> Result<Decoded> {
        let k = defects.len();
        if k == 0 {
            return Ok(Decoded {
                prediction: false,
                weight: 0.0,
            });
        }
        if let Some(&d) = defects.iter().find(|&&d| d as usize >= self.graph.detector_count) {
            return Err(Error::InvalidInput(format!("detector {d} out of range")));
        }
        let boundary = self.graph.boundary();

        let uncached: Vec<Row>;
        let rows: Vec<&Row> = if self.rows.is_empty() {
            uncached = defects.iter().map(|&d| shortest_paths(&self.graph, d)).collect();
            uncached.iter().collect()
        } else {
            defects
                .iter()
                .map(|&d| self.rows[d as usize].get_or_init(|| shortest_paths(&self.graph, d)))
                .collect()
        };

        let b: Vec<f64> = rows.iter().map(|r| r.dist[boundary as usize]).collect();
        let mut uf = UnionFind::new(k);
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let w = rows[i].dist[defects[j] as usize];
                if w.is_finite() && w < b[i] + b[j] {
                    pairs.push((i, j, w));
                    uf.union(i, j);
                }
            }
        }

        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut cluster_of = vec![usize::MAX; k];
        for i in 0..k {
            let root = uf.find(i);
            if cluster_of[root] == usize::MAX {
                cluster_of[root] = clusters.len();
                clusters.push(Vec::new());
            }
            clusters[cluster_of[root]].push(i);
        }

        let mut prediction = false;
        let mut weight = 0.0;
        let to_boundary = |i: usize, prediction: &mut bool, weight: &mut f64| -> Result<()> {
            if !b[i].is_finite() {
                return Err(Error::Disconnected(defects[i]));
            }
            *prediction ^= rows[i].parity(boundary);
            *weight += b[i];
            Ok(())
        };
        for cluster in &clusters {
            match cluster.len() {
                1 => to_boundary(cluster[0], &mut prediction, &mut weight)?,
                2 => {
                    let (i, j) = (cluster[0], cluster[1]);
                    prediction ^= rows[i].parity(defects[j]);
                    weight += rows[i].dist[defects[j] as usize];
                }
                m => {
                    let mut local = vec![usize::MAX; k];
                    for (a, &i) in cluster.iter().enumerate() {
                        local[i] = a;
                    }
                    // Nodes 0..m are defects, m..2m their boundary copies.
                    let mut edges = Vec::new();
                    for (a, &i) in cluster.iter().enumerate() {
                        if b[i].is_finite() {
                            edges.push((a as u32, (m + a) as u32, quantize(b[i])));
                        }
                    }
                    for &(i, j, w) in &pairs {
                        if local[i] == usize::MAX {
                            continue;
                        }
                        let (a, c) = (local[i], local[j]);
                        edges.push((a as u32, c as u32, quantize(w)));
                        edges.push(((m + a) as u32, (m + c) as u32, 0));
                    }
                    let mate = min_weight_perfect_matching(2 * m, &edges)
                        .ok_or(Error::Disconnected(defects[cluster[0]]))?;
                    for a in 0..m {
                        let partner = mate[a] as usize;
                        let i = cluster[a];
                        if partner == m + a {
                            to_boundary(i, &mut prediction, &mut weight)?;
                        } else if partner < a {
                            let j = cluster[partner];
                            prediction ^= rows[i].parity(defects[j]);
                            weight += rows[i].dist[defects[j] as usize];
                        }
                    }
                }
            }
        }
        Ok(Decoded { prediction, weight })
    }

    /// Decodes every shot of a batch, in parallel.
    pub fn decode_batch(&self, batch: &ShotBatch) -> Result<Vec<bool>> {
        batch
            .defects()
            .par_iter()
            .map(|d| self.decode(d).map(|r| r.prediction))
            .collect()
    }
}

fn quantize(w: f64) -> i64 {
    (w * WEIGHT_SCALE).round() as i64
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Number of shots whose prediction differs from the observable, and the
/// resulting logical error rate.
pub fn logical_error_rate(batch: &ShotBatch, predictions: &[bool]) -> Result<(u64, f64)> {
    if predictions.len() != batch.shot_count() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} shots",
            predictions.len(),
            batch.shot_count()
        )));
    }
    let failures = predictions
        .iter()
        .enumerate()
        .filter(|&(s, &p)| p != batch.observable(s))
        .count() as u64;
    let rate = if predictions.is_empty() {
        0.0
    } else {
        failures as f64 / predictions.len() as f64
    };
    Ok((failures, rate))
}
