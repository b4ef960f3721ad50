//! kNN graphs with RBF edge weights.
//!
//! Vertex `j` is joined to vertex `i` when either is among the `k` nearest
//! neighbours of the other. Every edge carries `w = exp(-d² / σ²)`; by
//! default `σ²` is the largest squared edge length, which makes the weights
//! independent of the cloud's scale.

use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::{fmt_sig9, PointCloud};
use crate::error::{Error, Result};
use crate::knn::NeighborIndex;
use crate::sparse::SparseSymmetric;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub dist_sq: f64,
    pub weight: f64,
    /// Added to join otherwise disconnected components.
    pub augmented: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    k: Option<usize>,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
    sigma_sq: f64,
    augmented: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GraphOptions {
    pub sigma_sq: Option<f64>,
    /// Join components with their shortest connecting edges instead of failing.
    pub auto_connect: bool,
}

/// Union-symmetrized kNN edge set as sorted `(i, j)` pairs with `i < j`.
pub fn knn_edges(cloud: &PointCloud, k: usize) -> Result<Vec<(usize, usize)>> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::Precondition(format!("kNN graph needs at least 2 points, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(Error::Precondition(format!("k = {k} must satisfy 1 <= k < n = {n}")));
    }
    let index = NeighborIndex::new(&cloud.points);
    let mut pairs = Vec::with_capacity(n * k);
    for (i, p) in cloud.points.iter().enumerate() {
        for nb in index.knn(p, k, Some(i)) {
            pairs.push((i.min(nb.index), i.max(nb.index)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

pub fn build_graph(cloud: &PointCloud, k: usize, sigma_sq: Option<f64>) -> Result<WeightedGraph> {
    build_graph_with(
        cloud,
        k,
        &GraphOptions {
            sigma_sq,
            auto_connect: false,
        },
    )
}

pub fn build_graph_with(cloud: &PointCloud, k: usize, opts: &GraphOptions) -> Result<WeightedGraph> {
    cloud.validate()?;
    let pairs = knn_edges(cloud, k)?;
    let mut edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(i, j)| Edge {
            i,
            j,
            dist_sq: (cloud.points[i] - cloud.points[j]).norm_squared(),
            weight: 0.0,
            augmented: false,
        })
        .collect();

    let mut uf = UnionFind::new(cloud.len());
    for e in &edges {
        uf.union(e.i, e.j);
    }
    let components = uf.count();
    let mut augmented = false;
    if components > 1 {
        if !opts.auto_connect {
            return Err(Error::Disconnected { components });
        }
        edges.extend(connecting_edges(cloud, &mut uf));
        edges.sort_by_key(|e| (e.i, e.j));
        augmented = true;
        log::warn!("graph had {components} components; added {} connecting edges", components - 1);
    }

    let sigma_sq = match opts.sigma_sq {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidArgument(format!("sigma_sq must be positive, got {s}"))),
        None => edges.iter().map(|e| e.dist_sq).fold(0.0, f64::max),
    };
    if !(sigma_sq > 0.0) {
        return Err(Error::Degenerate("all edges have zero length; sigma² is undefined".into()));
    }
    let mut g = WeightedGraph {
        n: cloud.len(),
        k: Some(k),
        edges,
        degrees: Vec::new(),
        sigma_sq,
        augmented,
    };
    g.apply_weights();
    Ok(g)
}

/// Borůvka over components: each round every component takes its shortest
/// edge to any other component, until one component remains.
fn connecting_edges(cloud: &PointCloud, uf: &mut UnionFind) -> Vec<Edge> {
    let n = cloud.len();
    let mut added = Vec::new();
    while uf.count() > 1 {
        let labels: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let mut roots: Vec<usize> = labels.clone();
        roots.sort_unstable();
        roots.dedup();
        let mut best: Vec<(f64, usize, usize)> = Vec::new();
        for &root in &roots {
            let outside: Vec<usize> = (0..n).filter(|&i| labels[i] != root).collect();
            let pts: Vec<_> = outside.iter().map(|&i| cloud.points[i]).collect();
            let index = NeighborIndex::new(&pts);
            let mut cand: Option<(f64, usize, usize)> = None;
            for i in (0..n).filter(|&i| labels[i] == root) {
                let nb = index.nearest(&cloud.points[i]).expect("other components exist");
                let j = outside[nb.index];
                let c = (nb.dist_sq, i.min(j), i.max(j));
                if cand.is_none_or(|b| (c.0, c.1, c.2) < b) {
                    cand = Some(c);
                }
            }
            best.extend(cand);
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (d, i, j) in best {
            if uf.union(i, j) {
                added.push(Edge {
                    i,
                    j,
                    dist_sq: d,
                    weight: 0.0,
                    augmented: true,
                });
            }
        }
    }
    added
}

impl WeightedGraph {
    /// Graph with explicit edge weights in `(0, 1]`. Edge lengths are back
    /// computed as `d² = -ln w` under `σ² = 1`, so the RBF invariant holds.
    pub fn from_weights(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("bad edge ({a}, {b}) for n = {n}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!("edge weight {w} not in (0, 1]")));
            }
            list.push(Edge {
                i: a.min(b),
                j: a.max(b),
                dist_sq: -w.ln(),
                weight: w,
                augmented: false,
            });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if list.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidArgument("duplicate edge".into()));
        }
        let mut g = WeightedGraph {
            n,
            k: None,
            edges: list,
            degrees: Vec::new(),
            sigma_sq: 1.0,
            augmented: false,
        };
        g.degrees = g.recompute_degrees();
        Ok(g)
    }

    fn apply_weights(&mut self) {
        for e in &mut self.edges {
            e.weight = (-e.dist_sq / self.sigma_sq).exp();
        }
        self.degrees = self.recompute_degrees();
    }

    /// Same edges re-weighted with a different `σ²`.
    pub fn reweighted(&self, sigma_sq: f64) -> WeightedGraph {
        let mut g = self.clone();
        g.sigma_sq = sigma_sq;
        g.apply_weights();
        g
    }

    pub fn recompute_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.i] += e.weight;
            d[e.j] += e.weight;
        }
        d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn max_edge_dist_sq(&self) -> f64 {
        self.edges.iter().map(|e| e.dist_sq).fold(0.0, f64::max)
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.i, e.j);
        }
        uf.count()
    }

    /// `L = D - W` as a sparse symmetric matrix.
    pub fn laplacian(&self) -> SparseSymmetric {
        let entries: Vec<_> = self.edges.iter().map(|e| (e.i, e.j, -e.weight)).collect();
        SparseSymmetric::from_entries(self.degrees.clone(), &entries).expect("edges validated at construction")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let k = self.k.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(out, "n={},k={},sigma_sq={}", self.n, k, fmt_sig9(self.sigma_sq));
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{}", e.i, e.j, fmt_sig9(e.weight));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty graph file"))?;
        let mut n = None;
        let mut k = None;
        let mut sigma_sq = None;
        for field in header.split(',') {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("bad header field '{field}'")))?;
            match key.trim() {
                "n" => n = val.trim().parse::<usize>().ok(),
                "k" => k = val.trim().parse::<usize>().ok(),
                "sigma_sq" => sigma_sq = val.trim().parse::<f64>().ok(),
                _ => {}
            }
        }
        let n = n.ok_or_else(|| Error::parse(1, "header lacks n"))?;
        let sigma_sq = sigma_sq
            .filter(|s| *s > 0.0)
            .ok_or_else(|| Error::parse(1, "header lacks a positive sigma_sq"))?;
        let mut edges = Vec::new();
        for (idx, l) in lines {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let line = idx + 1;
            if f.len() != 3 {
                return Err(Error::parse(line, "expected i,j,weight"));
            }
            let i = f[0].parse::<usize>().map_err(|_| Error::parse(line, "bad i"))?;
            let j = f[1].parse::<usize>().map_err(|_| Error::parse(line, "bad j"))?;
            let w = f[2].parse::<f64>().map_err(|_| Error::parse(line, "bad weight"))?;
            edges.push((i, j, w));
        }
        let mut g = WeightedGraph::from_weights(n, &edges)?;
        for e in &mut g.edges {
            e.dist_sq *= sigma_sq;
        }
        g.sigma_sq = sigma_sq;
        g.k = k;
        Ok(g)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `(D - W) v`.
pub fn laplacian_apply(graph: &WeightedGraph, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != graph.n {
        return Err(Error::DimensionMismatch {
            expected: graph.n,
            got: v.len(),
        });
    }
    let mut out: Vec<f64> = graph.degrees.iter().zip(v).map(|(d, x)| d * x).collect();
    for e in &graph.edges {
        out[e.i] -= e.weight * v[e.j];
        out[e.j] -= e.weight * v[e.i];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sets: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two distinct sets were merged.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        self.sets -= 1;
        true
    }

    pub(crate) fn count(&self) -> usize {
        self.sets
    }
}
