use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{link_steps, Candidate, ProfilePoint, SimplifyConfig, TerrainError, TerrainSegment};

/// Directed edge. Vertex `2p` is the start role of profile point `p`, vertex
/// `2p + 1` its end role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: i64,
    pub reward: i64,
    /// Profile indices for segment edges; `None` for auxiliary edges.
    pub segment: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct CoverGraph {
    pub n_points: usize,
    pub edges: Vec<Edge>,
    /// Outgoing edge indices per vertex, in insertion order.
    adjacency: Vec<Vec<usize>>,
    /// Weight on segment count; exceeds any achievable reward difference.
    scale: i64,
    /// Uniform offset making every weight nonnegative.
    offset: i64,
    sparsity: Vec<f64>,
}

impl CoverGraph {
    pub fn n_vertices(&self) -> usize {
        2 * self.n_points
    }

    /// Nonnegative scalar weight whose path sums order paths first by
    /// segment count, then by (descending) reward.
    pub fn weight(&self, e: &Edge) -> i64 {
        self.scale * e.cost - e.reward + self.offset
    }

    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = &Edge> {
        self.adjacency[v].iter().map(move |&i| &self.edges[i])
    }
}

pub fn build_graph(
    points: &[ProfilePoint],
    candidates: &[Candidate],
    cfg: &SimplifyConfig,
) -> Result<CoverGraph, TerrainError> {
    let n = points.len();
    if n < 2 {
        return Err(TerrainError::TooShort(n));
    }
    let mut edges = Vec::new();
    for c in candidates {
        edges.push(Edge {
            from: 2 * c.s,
            to: 2 * c.e + 1,
            cost: 1,
            reward: c.pn as i64,
            segment: Some((c.s, c.e)),
        });
    }
    for i in 0..n {
        for j in 0..=cfg.n_ign {
            if i + j >= n {
                break;
            }
            edges.push(Edge {
                from: 2 * i + 1,
                to: 2 * (i + j),
                cost: 0,
                reward: if j == 0 { -1 } else { 0 },
                segment: None,
            });
        }
    }
    let mut adjacency = vec![Vec::new(); 2 * n];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.from].push(k);
    }
    let total: i64 = edges.iter().map(|e| e.reward.abs()).sum();
    let offset = edges.iter().map(|e| e.reward).max().unwrap_or(0).max(0);
    let mut sparsity = vec![0.0; edges.len()];
    for (k, c) in candidates.iter().enumerate() {
        sparsity[k] = c.sparsity;
    }
    let g = CoverGraph { n_points: n, edges, adjacency, scale: 1 + total, offset, sparsity };
    if distances_to_goal(&g)[0].is_none() {
        return Err(TerrainError::Disconnected);
    }
    Ok(g)
}

/// Shortest weighted distance from every vertex to the last end vertex.
fn distances_to_goal(g: &CoverGraph) -> Vec<Option<i64>> {
    let nv = g.n_vertices();
    let mut incoming = vec![Vec::new(); nv];
    for (k, e) in g.edges.iter().enumerate() {
        incoming[e.to].push(k);
    }
    let mut dist: Vec<Option<i64>> = vec![None; nv];
    let mut heap = BinaryHeap::new();
    dist[nv - 1] = Some(0);
    heap.push(Reverse((0i64, nv - 1)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].map_or(false, |best| d > best) {
            continue;
        }
        for &k in &incoming[v] {
            let e = &g.edges[k];
            let nd = d + g.weight(e);
            if dist[e.from].map_or(true, |cur| nd < cur) {
                dist[e.from] = Some(nd);
                heap.push(Reverse((nd, e.from)));
            }
        }
    }
    dist
}

/// Lexicographically optimal cover (fewest segments, then most in-band
/// points). Among equal optima the walk always takes the smallest next
/// vertex index, so ties resolve to the earliest endpoints.
pub fn optimal_coverage(
    g: &CoverGraph,
    points: &[ProfilePoint],
    _cfg: &SimplifyConfig,
) -> Result<Vec<TerrainSegment>, TerrainError> {
    let dist = distances_to_goal(g);
    let goal = g.n_vertices() - 1;
    let mut v = 0;
    let mut d = dist[0].ok_or(TerrainError::Disconnected)?;
    let mut out = Vec::new();
    while v != goal {
        let mut best: Option<(usize, usize)> = None;
        for &k in &g.adjacency[v] {
            let e = &g.edges[k];
            if let Some(du) = dist[e.to] {
                if du + g.weight(e) == d && best.map_or(true, |(to, _)| e.to < to) {
                    best = Some((e.to, k));
                }
            }
        }
        let (to, k) = best.ok_or(TerrainError::Disconnected)?;
        let e = &g.edges[k];
        if let Some((s, t)) = e.segment {
            let mut seg = TerrainSegment::between(points[s], points[t]);
            seg.sparsity = g.sparsity[k];
            out.push(seg);
        }
        d -= g.weight(e);
        v = to;
    }
    link_steps(&mut out);
    Ok(out)
}
