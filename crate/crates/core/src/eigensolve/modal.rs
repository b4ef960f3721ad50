use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{solve_smallest, SolverOptions, SpectralEmbedding};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Distance between the barycenters of the points at the two ends of the
/// Fiedler vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiedlerExtent {
    pub length: f64,
    pub x_min: Point3<f64>,
    pub x_max: Point3<f64>,
}

pub fn fiedler_extent(cloud: &PointCloud, graph: &WeightedGraph, barycenter_count: usize) -> Result<FiedlerExtent> {
    check_sizes(cloud, graph)?;
    let emb = solve_smallest(&graph.laplacian(), graph.degrees(), 2, &SolverOptions::default())?;
    let fiedler: Vec<f64> = emb.eigenvectors.column(1).iter().copied().collect();
    fiedler_extent_from_vector(cloud, &fiedler, barycenter_count)
}

pub fn fiedler_extent_from_vector(cloud: &PointCloud, fiedler: &[f64], barycenter_count: usize) -> Result<FiedlerExtent> {
    let n = cloud.len();
    if fiedler.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: fiedler.len() });
    }
    if barycenter_count == 0 || barycenter_count > n / 2 {
        return Err(Error::Precondition(format!(
            "barycenter count {barycenter_count} must be in 1..={}",
            n / 2
        )));
    }
    let mut asc: Vec<usize> = (0..n).collect();
    asc.sort_by(|&i, &j| fiedler[i].total_cmp(&fiedler[j]).then(i.cmp(&j)));
    let mut desc: Vec<usize> = (0..n).collect();
    desc.sort_by(|&i, &j| fiedler[j].total_cmp(&fiedler[i]).then(i.cmp(&j)));
    let bary = |idx: &[usize]| {
        let sum: Vector3<f64> = idx.iter().map(|&i| cloud.points[i].coords).sum();
        Point3::from(sum / idx.len() as f64)
    };
    let x_min = bary(&asc[..barycenter_count]);
    let x_max = bary(&desc[..barycenter_count]);
    Ok(FiedlerExtent {
        length: (x_max - x_min).norm(),
        x_min,
        x_max,
    })
}

/// `L_k = ‖φ_k‖ / ‖∇φ_k‖` with the graph gradient taken over edges and
/// divided by edge length. Entry 0 is `+∞`, as is any mode with zero
/// gradient.
pub fn modal_lengths(cloud: &PointCloud, graph: &WeightedGraph, emb: &SpectralEmbedding) -> Result<Vec<f64>> {
    check_sizes(cloud, graph)?;
    if emb.n() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: emb.n(),
        });
    }
    let mut out = Vec::with_capacity(emb.count());
    for k in 0..emb.count() {
        if k == 0 {
            out.push(f64::INFINITY);
            continue;
        }
        let phi = emb.eigenvectors.column(k);
        let mut grad = 0.0;
        for e in graph.edges() {
            let d = (cloud.points[e.i] - cloud.points[e.j]).norm();
            if d > 0.0 {
                grad += ((phi[e.i] - phi[e.j]) / d).powi(2);
            }
        }
        if grad > 0.0 {
            out.push(phi.norm() / grad.sqrt());
        } else {
            log::warn!("mode {k} has zero gradient; modal length reported as infinite");
            out.push(f64::INFINITY);
        }
    }
    Ok(out)
}

fn check_sizes(cloud: &PointCloud, graph: &WeightedGraph) -> Result<()> {
    if cloud.len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: cloud.len(),
        });
    }
    Ok(())
}
