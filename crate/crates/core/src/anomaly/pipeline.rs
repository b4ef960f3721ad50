//! Point cloud anomaly localization against a defect-free reference.

use serde::{Deserialize, Serialize};

use crate::cloud::{foreground_indices, subsample, PointCloud};
use crate::coupling::{couple_and_solve, plan_coupling, CouplingParams, SigmaMode};
use crate::eigensolve::SolverOptions;
use crate::error::{Error, Result};
use crate::graph::DEFAULT_K;
use crate::knn::NeighborIndex;
use crate::matching::{pointwise_scores, PointScore};
use crate::registration::{register, RegistrationMode, RegistrationOptions};

use super::image::{back_project, ScoreMap};

/// How raw point scores are mapped before back-projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "scale")]
pub enum Normalization {
    /// Affine map of the scene's scores onto `[0, 1]`.
    MinMax,
    /// Division by a fixed scale shared across scenes.
    Fixed(f64),
    /// Raw scores.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyParams {
    pub k: usize,
    pub m: usize,
    pub l: f64,
    pub alpha: f64,
    pub z_quantile: f64,
    pub max_points: usize,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    pub registration: RegistrationOptions,
    pub normalization: Normalization,
    /// Also strip the flat background from the reference cloud.
    pub source_background: bool,
    pub auto_connect: bool,
    pub solver: SolverOptions,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            m: 200,
            l: 1.0,
            alpha: 1.0,
            z_quantile: 0.05,
            max_points: 13_000,
            seed: 0,
            sigma_mode: SigmaMode::Global,
            registration: RegistrationOptions {
                mode: RegistrationMode::Icp,
                ..Default::default()
            },
            normalization: Normalization::MinMax,
            source_background: true,
            auto_connect: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyResult {
    pub map: ScoreMap,
    /// Map of the nearest-neighbor distance to the registered reference,
    /// normalized and projected the same way.
    pub baseline: ScoreMap,
    /// Raw spectral scores indexed into the scored target points.
    pub point_scores: Vec<PointScore>,
    /// Positions in the input target of the scored points.
    pub scored_indices: Vec<usize>,
    pub registration_rms: Option<f64>,
    pub params: AnomalyParams,
}

/// Image size implied by the largest grid index.
pub fn grid_shape(cloud: &PointCloud) -> Result<(usize, usize)> {
    let grid = cloud
        .grid_index
        .as_ref()
        .ok_or_else(|| Error::Precondition("target has no grid indices".into()))?;
    let h = grid.iter().map(|g| g.0 + 1).max().unwrap_or(0);
    let w = grid.iter().map(|g| g.1 + 1).max().unwrap_or(0);
    Ok((h, w))
}

pub fn normalize(scores: &mut [PointScore], mode: Normalization) -> Result<()> {
    match mode {
        Normalization::None => {}
        Normalization::Fixed(scale) => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!("normalization scale {scale} must be positive")));
            }
            scores.iter_mut().for_each(|s| s.score /= scale);
        }
        Normalization::MinMax => {
            let (lo, hi) = scores
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.score), b.max(s.score)));
            let span = hi - lo;
            scores
                .iter_mut()
                .for_each(|s| s.score = if span > 0.0 { (s.score - lo) / span } else { 0.0 });
        }
    }
    Ok(())
}

/// Distance from every target point to its nearest reference point.
pub fn nearest_distance_scores(target: &PointCloud, reference: &PointCloud) -> Vec<PointScore> {
    let index = NeighborIndex::new(&reference.points);
    target
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| PointScore {
            target_index: i,
            score: index.nearest(p).map_or(0.0, |n| n.dist_sq.sqrt()),
        })
        .collect()
}

/// Scores every foreground point of an organized target scene against a
/// defect-free reference and projects the scores onto the sensor grid.
///
/// `shape` defaults to the extent of the target's grid indices.
pub fn anomaly_pipeline(
    source: &PointCloud,
    target: &PointCloud,
    shape: Option<(usize, usize)>,
    params: &AnomalyParams,
) -> Result<AnomalyResult> {
    let shape = match shape {
        Some(s) => s,
        None => grid_shape(target)?,
    };
    if target.grid_index.is_none() {
        return Err(Error::Precondition("target has no grid indices".into()));
    }
    let fg = foreground_indices(target, params.z_quantile)?;
    let target_fg = target.select(&fg);
    let (target_sub, kept) = subsample(&target_fg, params.max_points, params.seed)?;
    let factor = target_fg.len() as f64 / target_sub.len() as f64;

    let source_fg = if params.source_background {
        source.select(&foreground_indices(source, params.z_quantile)?)
    } else {
        source.clone()
    };
    let (source_sub, _) = subsample(&source_fg, params.max_points, params.seed.wrapping_add(1))?;
    let reg = register(&source_sub, &target_sub, &params.registration)?;

    let plan = plan_coupling(&target_sub, std::slice::from_ref(&reg.cloud), params.l, params.seed)?
        .with_alpha(params.alpha);
    let cparams = CouplingParams {
        k: params.k,
        m: params.m,
        sigma_mode: params.sigma_mode,
        auto_connect: params.auto_connect,
        solver: params.solver,
    };
    let (_, emb) = couple_and_solve(&target_sub, std::slice::from_ref(&reg.cloud), &plan, &cparams)?;
    let point_scores = pointwise_scores(&emb, &plan, 0)?;

    let mut normalized = point_scores.clone();
    normalize(&mut normalized, params.normalization)?;
    let map = back_project(&normalized, &target_fg, &kept, shape, factor)?;

    let mut baseline_scores = nearest_distance_scores(&target_sub, &reg.cloud);
    normalize(&mut baseline_scores, params.normalization)?;
    let baseline = back_project(&baseline_scores, &target_fg, &kept, shape, factor)?;

    Ok(AnomalyResult {
        map,
        baseline,
        scored_indices: point_scores.iter().map(|s| fg[kept[s.target_index]]).collect(),
        point_scores,
        registration_rms: reg.rms,
        params: *params,
    })
}
