//! Anomaly maps from point-wise spectral scores and their PRO evaluation.

mod image;
mod pipeline;
mod pro;

pub use image::{back_project, parse_csv_grid, parse_pgm, GroundTruth, ScoreMap};
pub use pipeline::{
    anomaly_pipeline, grid_shape, nearest_distance_scores, normalize, AnomalyParams, AnomalyResult, Normalization,
};
pub use pro::{
    integrate, pooled_pro_auc, pro_auc, pro_curve, CurvePoint, DEFAULT_FPR_LIMIT, MAX_EXACT_THRESHOLDS,
    QUANTILE_THRESHOLDS,
};
