//! Coupling a target shape with registered sources into one graph.
//!
//! Vertices are ordered `[target, source_1, …, source_N]`. Each sampled
//! target vertex gets one cross-edge to its nearest vertex in every source.
//! The coupled operator is `L^C = L^U + α L^+` with `L^U` the block-diagonal
//! per-shape Laplacians and `L^+` the Laplacian of the cross-edges alone,
//! while `B^C` keeps only the per-shape degrees.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{fmt_sig9, PointCloud};
use crate::eigensolve::{solve_smallest, SolverOptions, SpectralEmbedding};
use crate::error::{Error, Result};
use crate::graph::{build_graph_with, GraphOptions, WeightedGraph, DEFAULT_K};
use crate::knn::NeighborIndex;
use crate::sparse::SparseSymmetric;

/// How `σ²` is chosen for the coupled graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// One `σ²` for every edge: the largest squared length over all
    /// intra-shape and cross edges.
    #[default]
    Global,
    /// Each shape keeps its own `σ²`; cross-edges use the target's.
    PerShape,
}

impl FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "per-shape" => Ok(Self::PerShape),
            _ => Err(Error::InvalidArgument(format!("unknown sigma mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    /// Sampled target vertices `F^T`.
    pub target_subset: Vec<usize>,
    /// `source_matches[k][j]` is the partner of `target_subset[j]` in source `k`.
    pub source_matches: Vec<Vec<usize>>,
    pub fraction: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl CouplingPlan {
    /// A plan with no cross-edges, for checking the uncoupled limit.
    pub fn without_pairs(source_count: usize) -> Self {
        Self {
            target_subset: Vec::new(),
            source_matches: vec![Vec::new(); source_count],
            fraction: 0.0,
            alpha: 1.0,
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn pair_count(&self) -> usize {
        self.target_subset.len()
    }

    pub fn source_count(&self) -> usize {
        self.source_matches.len()
    }

    /// Checks index ranges against the target and source sizes.
    pub fn validate(&self, target_len: usize, source_lens: &[usize]) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if self.source_matches.len() != source_lens.len() {
            return Err(Error::DimensionMismatch {
                expected: source_lens.len(),
                got: self.source_matches.len(),
            });
        }
        if let Some(&t) = self.target_subset.iter().find(|&&t| t >= target_len) {
            return Err(Error::InvalidArgument(format!("target index {t} out of range {target_len}")));
        }
        let mut seen = self.target_subset.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("target subset has repeated indices".into()));
        }
        for (k, (matches, &len)) in self.source_matches.iter().zip(source_lens).enumerate() {
            if matches.len() != self.target_subset.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.target_subset.len(),
                    got: matches.len(),
                });
            }
            if let Some(&s) = matches.iter().find(|&&s| s >= len) {
                return Err(Error::InvalidArgument(format!("source {k} index {s} out of range {len}")));
            }
        }
        Ok(())
    }

    /// Header `l=…,alpha=…,seed=…`, then `target_index,source_id,source_index`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "l={},alpha={},seed={}", fmt_sig9(self.fraction), fmt_sig9(self.alpha), self.seed);
        for (k, matches) in self.source_matches.iter().enumerate() {
            for (t, s) in self.target_subset.iter().zip(matches) {
                let _ = writeln!(out, "{t},{k},{s}");
            }
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. `source_count` fixes the number
    /// of sources; every source must list the same target vertices in the
    /// same order.
    pub fn from_csv(text: &str, source_count: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty plan file"))?;
        let mut plan = CouplingPlan::without_pairs(source_count);
        for field in header.split(',') {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("bad header field '{field}'")))?;
            let val = val.trim();
            match key.trim() {
                "l" => plan.fraction = val.parse().map_err(|_| Error::parse(1, "bad l"))?,
                "alpha" => plan.alpha = val.parse().map_err(|_| Error::parse(1, "bad alpha"))?,
                "seed" => plan.seed = val.parse().map_err(|_| Error::parse(1, "bad seed"))?,
                _ => {}
            }
        }
        let mut per_source: Vec<Vec<(usize, usize)>> = vec![Vec::new(); source_count];
        for (idx, l) in lines {
            let line = idx + 1;
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(line, "expected target_index,source_id,source_index"));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(line, format!("bad integer '{s}'")));
            let (t, k, s) = (parse(f[0])?, parse(f[1])?, parse(f[2])?);
            if k >= source_count {
                return Err(Error::parse(line, format!("source id {k} but only {source_count} sources")));
            }
            per_source[k].push((t, s));
        }
        if let Some(first) = per_source.first() {
            plan.target_subset = first.iter().map(|p| p.0).collect();
        }
        for (k, pairs) in per_source.into_iter().enumerate() {
            let targets: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            if targets != plan.target_subset {
                return Err(Error::InvalidArgument(format!(
                    "source {k} does not pair the same target vertices as source 0"
                )));
            }
            plan.source_matches[k] = pairs.into_iter().map(|p| p.1).collect();
        }
        Ok(plan)
    }

    pub fn load_csv(path: impl AsRef<Path>, source_count: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, source_count)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Samples `round(l · n)` target vertices uniformly without replacement
/// (sorted ascending) and pairs each with its nearest vertex in every source.
pub fn plan_coupling(target: &PointCloud, sources: &[PointCloud], l: f64, seed: u64) -> Result<CouplingPlan> {
    if target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::InvalidArgument(format!("coupling fraction must be in (0, 1], got {l}")));
    }
    let n = target.len();
    let size = (l * n as f64).round() as usize;
    if size == 0 {
        return Err(Error::Precondition(format!("l = {l} selects no vertices of a {n}-point target")));
    }
    let target_subset = if size == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, size).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut source_matches = Vec::with_capacity(sources.len());
    for src in sources {
        if src.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let index = NeighborIndex::new(&src.points);
        source_matches.push(
            target_subset
                .iter()
                .map(|&t| index.nearest(&target.points[t]).expect("non-empty source").index)
                .collect(),
        );
    }
    Ok(CouplingPlan {
        target_subset,
        source_matches,
        fraction: l,
        alpha: 1.0,
        seed,
    })
}

/// `L^C = L^U + α L^+` and `B^C` over the stacked vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledLaplacian {
    /// Per-shape graphs as used in the assembly (re-weighted in global mode).
    pub graphs: Vec<WeightedGraph>,
    /// Cross-edges in global indices with their unscaled weights.
    pub cross_edges: Vec<(usize, usize, f64)>,
    pub alpha: f64,
    /// Vertex ranges: shape `s` owns `offsets[s]..offsets[s + 1]`.
    pub offsets: Vec<usize>,
    pub sigma_mode: SigmaMode,
    /// `σ²` used for the cross-edges.
    pub cross_sigma_sq: f64,
}

impl CoupledLaplacian {
    pub fn n(&self) -> usize {
        *self.offsets.last().expect("offsets non-empty")
    }

    /// Diagonal of `B^C`: the per-shape degrees, concatenated.
    pub fn b(&self) -> Vec<f64> {
        self.graphs.iter().flat_map(|g| g.degrees().iter().copied()).collect()
    }

    fn intra_entries(&self) -> Vec<(usize, usize, f64)> {
        self.graphs
            .iter()
            .zip(&self.offsets)
            .flat_map(|(g, &off)| g.edges().iter().map(move |e| (off + e.i, off + e.j, -e.weight)))
            .collect()
    }

    /// `L^U`, the block-diagonal uncoupled Laplacian.
    pub fn uncoupled_operator(&self) -> SparseSymmetric {
        SparseSymmetric::from_entries(self.b(), &self.intra_entries()).expect("validated indices")
    }

    /// `α L^+`, the Laplacian of the cross-edges scaled by `α`.
    pub fn cross_operator(&self) -> SparseSymmetric {
        let mut diag = vec![0.0; self.n()];
        let mut entries = Vec::with_capacity(self.cross_edges.len());
        for &(i, j, w) in &self.cross_edges {
            let aw = self.alpha * w;
            diag[i] += aw;
            diag[j] += aw;
            entries.push((i, j, -aw));
        }
        SparseSymmetric::from_entries(diag, &entries).expect("validated indices")
    }

    /// `L^C`.
    pub fn operator(&self) -> SparseSymmetric {
        let mut diag = self.b();
        let mut entries = self.intra_entries();
        for &(i, j, w) in &self.cross_edges {
            let aw = self.alpha * w;
            diag[i] += aw;
            diag[j] += aw;
            entries.push((i, j, -aw));
        }
        SparseSymmetric::from_entries(diag, &entries).expect("validated indices")
    }
}

/// Assembles the coupled operator. `clouds[0]` is the target and
/// `graphs[s]` must be built on `clouds[s]`.
pub fn coupled_laplacian(
    graphs: &[WeightedGraph],
    clouds: &[PointCloud],
    plan: &CouplingPlan,
    sigma_mode: SigmaMode,
) -> Result<CoupledLaplacian> {
    if graphs.is_empty() || graphs.len() != clouds.len() {
        return Err(Error::DimensionMismatch {
            expected: clouds.len(),
            got: graphs.len(),
        });
    }
    for (g, c) in graphs.iter().zip(clouds) {
        if g.n() != c.len() {
            return Err(Error::DimensionMismatch { expected: c.len(), got: g.n() });
        }
    }
    let source_lens: Vec<usize> = clouds[1..].iter().map(PointCloud::len).collect();
    plan.validate(clouds[0].len(), &source_lens)?;

    let mut offsets = vec![0usize];
    for c in clouds {
        offsets.push(offsets.last().unwrap() + c.len());
    }
    let mut cross = Vec::with_capacity(plan.pair_count() * plan.source_count());
    for (k, matches) in plan.source_matches.iter().enumerate() {
        let src = &clouds[k + 1];
        for (&t, &s) in plan.target_subset.iter().zip(matches) {
            let d2 = (clouds[0].points[t] - src.points[s]).norm_squared();
            if !d2.is_finite() {
                return Err(Error::InvalidArgument(format!("cross pair ({t}, {s}) has non-finite length")));
            }
            cross.push((t, offsets[k + 1] + s, d2));
        }
    }

    let (graphs, cross_sigma_sq) = match sigma_mode {
        SigmaMode::Global => {
            let sigma_sq = graphs
                .iter()
                .map(WeightedGraph::max_edge_dist_sq)
                .chain(cross.iter().map(|c| c.2))
                .fold(0.0, f64::max);
            if !(sigma_sq > 0.0) {
                return Err(Error::Degenerate("coupled graph has no edge of positive length".into()));
            }
            (graphs.iter().map(|g| g.reweighted(sigma_sq)).collect(), sigma_sq)
        }
        SigmaMode::PerShape => (graphs.to_vec(), graphs[0].sigma_sq()),
    };
    let cross_edges = cross
        .into_iter()
        .map(|(i, j, d2)| (i, j, (-d2 / cross_sigma_sq).exp()))
        .collect();
    Ok(CoupledLaplacian {
        graphs,
        cross_edges,
        alpha: plan.alpha,
        offsets,
        sigma_mode,
        cross_sigma_sq,
    })
}

/// Coupled eigenpairs split into per-shape slices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEmbedding {
    pub global: SpectralEmbedding,
    /// `slices[s]` holds rows of shape `s` and columns `φ_1 .. φ_m`.
    pub slices: Vec<DMatrix<f64>>,
    pub offsets: Vec<usize>,
    pub m: usize,
}

impl CoupledEmbedding {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.global.eigenvalues
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.slices[0]
    }

    /// Slice of source `k` (0-based among the sources).
    pub fn source(&self, k: usize) -> &DMatrix<f64> {
        &self.slices[k + 1]
    }
}

pub fn coupled_eigenmaps(lap: &CoupledLaplacian, m: usize, opts: &SolverOptions) -> Result<CoupledEmbedding> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let global = solve_smallest(&lap.operator(), &lap.b(), m + 1, opts)?;
    let slices = lap
        .offsets
        .windows(2)
        .map(|w| global.eigenvectors.view((w[0], 1), (w[1] - w[0], m)).into_owned())
        .collect();
    Ok(CoupledEmbedding {
        global,
        slices,
        offsets: lap.offsets.clone(),
        m,
    })
}

/// Parameters shared by every coupled workflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub k: usize,
    pub m: usize,
    pub sigma_mode: SigmaMode,
    pub auto_connect: bool,
    pub solver: SolverOptions,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            m: 20,
            sigma_mode: SigmaMode::Global,
            auto_connect: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Builds per-shape graphs, assembles the coupled operator for `plan` and
/// solves it.
pub fn couple_and_solve(
    target: &PointCloud,
    sources: &[PointCloud],
    plan: &CouplingPlan,
    params: &CouplingParams,
) -> Result<(CoupledLaplacian, CoupledEmbedding)> {
    let clouds: Vec<PointCloud> = std::iter::once(target).chain(sources).cloned().collect();
    let opts = GraphOptions {
        sigma_sq: None,
        auto_connect: params.auto_connect,
    };
    let graphs = clouds
        .iter()
        .map(|c| build_graph_with(c, params.k, &opts))
        .collect::<Result<Vec<_>>>()?;
    let lap = coupled_laplacian(&graphs, &clouds, plan, params.sigma_mode)?;
    let emb = coupled_eigenmaps(&lap, params.m, &params.solver)?;
    Ok((lap, emb))
}
