//! Per-Region Overlap curve and its normalized area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::image::{GroundTruth, ScoreMap};

/// Above this many distinct scores the sweep switches to quantile thresholds.
pub const MAX_EXACT_THRESHOLDS: usize = 100_000;
/// Number of quantile thresholds used for large maps.
pub const QUANTILE_THRESHOLDS: usize = 2_000;
pub const DEFAULT_FPR_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub fpr: f64,
    pub pro: f64,
}

/// Achieved (FPR, PRO) points of a descending threshold sweep, starting at
/// the origin. A pixel is detected when its score is at least the threshold.
pub fn pro_curve(pairs: &[(&ScoreMap, &GroundTruth)]) -> Result<Vec<CurvePoint>> {
    let mut pixels: Vec<(f64, Label)> = Vec::new();
    let mut region_sizes: Vec<usize> = Vec::new();
    let mut normal = 0usize;
    for (map, gt) in pairs {
        if (map.height, map.width) != (gt.height, gt.width) {
            return Err(Error::DimensionMismatch {
                expected: gt.height * gt.width,
                got: map.height * map.width,
            });
        }
        map.validate()?;
        let mut label = vec![Label::Normal; map.values.len()];
        for region in &gt.regions {
            let id = region_sizes.len();
            region_sizes.push(region.len());
            for &p in region {
                label[p] = Label::Region(id);
            }
        }
        normal += label.iter().filter(|l| **l == Label::Normal).count();
        pixels.extend(map.values.iter().copied().zip(label));
    }
    if region_sizes.is_empty() {
        return Err(Error::Precondition("PRO needs at least one anomalous region".into()));
    }
    if normal == 0 {
        return Err(Error::Precondition("PRO needs at least one anomaly-free pixel".into()));
    }
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0));

    let thresholds = thresholds(&pixels);
    let regions = region_sizes.len() as f64;
    let mut overlap_sum = 0.0;
    let mut false_pos = 0usize;
    let mut next = 0;
    let mut curve = vec![CurvePoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        pro: 0.0,
    }];
    for t in thresholds {
        while next < pixels.len() && pixels[next].0 >= t {
            match pixels[next].1 {
                Label::Normal => false_pos += 1,
                Label::Region(r) => overlap_sum += 1.0 / region_sizes[r] as f64,
            }
            next += 1;
        }
        // Exactly 1 once everything is detected, free of summation rounding.
        let pro = if next == pixels.len() { 1.0 } else { (overlap_sum / regions).min(1.0) };
        curve.push(CurvePoint {
            threshold: t,
            fpr: false_pos as f64 / normal as f64,
            pro,
        });
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Normal,
    Region(usize),
}

/// Descending thresholds: every distinct score, or quantiles of the
/// distinct scores when there are too many. The minimum is always last so
/// the sweep ends with every pixel detected.
fn thresholds(sorted_desc: &[(f64, Label)]) -> Vec<f64> {
    let mut unique: Vec<f64> = sorted_desc.iter().map(|p| p.0).collect();
    unique.dedup();
    if unique.len() <= MAX_EXACT_THRESHOLDS {
        return unique;
    }
    let last = unique.len() - 1;
    let mut out: Vec<f64> = (0..QUANTILE_THRESHOLDS)
        .map(|i| unique[(i * last + (QUANTILE_THRESHOLDS - 1) / 2) / (QUANTILE_THRESHOLDS - 1)])
        .collect();
    out.dedup();
    out
}

/// Area under the step-interpolated curve up to `fpr_limit`, divided by the
/// limit. Between two achieved points the PRO of the left point is held.
pub fn integrate(curve: &[CurvePoint], fpr_limit: f64) -> Result<f64> {
    if !(fpr_limit > 0.0 && fpr_limit <= 1.0) {
        return Err(Error::InvalidArgument(format!("FPR limit {fpr_limit} not in (0, 1]")));
    }
    let mut area = 0.0;
    for w in curve.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.fpr >= fpr_limit {
            break;
        }
        area += (b.fpr.min(fpr_limit) - a.fpr) * a.pro;
    }
    if let Some(last) = curve.last() {
        if last.fpr < fpr_limit {
            area += (fpr_limit - last.fpr) * last.pro;
        }
    }
    Ok((area / fpr_limit).clamp(0.0, 1.0))
}

/// Normalized area under the PRO curve of a single image.
pub fn pro_auc(map: &ScoreMap, gt: &GroundTruth, fpr_limit: f64) -> Result<f64> {
    if gt.defect_free {
        return Err(Error::Precondition(
            "a defect-free image has no PRO curve on its own; use the pooled evaluation".into(),
        ));
    }
    integrate(&pro_curve(&[(map, gt)])?, fpr_limit)
}

/// Normalized area under the PRO curve pooled over images: false positives
/// and regions from every image share one threshold sweep. Defect-free
/// images contribute only false positives.
pub fn pooled_pro_auc(pairs: &[(&ScoreMap, &GroundTruth)], fpr_limit: f64) -> Result<f64> {
    integrate(&pro_curve(pairs)?, fpr_limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt_from(h: usize, w: usize, cells: &[usize]) -> GroundTruth {
        let mut mask = vec![false; h * w];
        for &c in cells {
            mask[c] = true;
        }
        GroundTruth::from_mask(h, w, &mask).unwrap()
    }

    #[test]
    fn perfect_detector_scores_one() {
        let gt = gt_from(4, 4, &[5, 6, 9, 10]);
        let values = gt.mask().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let map = ScoreMap::from_values(4, 4, values).unwrap();
        assert_eq!(pro_auc(&map, &gt, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn constant_map_scores_zero() {
        let gt = gt_from(4, 4, &[0, 1]);
        let map = ScoreMap::from_values(4, 4, vec![0.5; 16]).unwrap();
        let curve = pro_curve(&[(&map, &gt)]).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[1].fpr, curve[1].pro), (1.0, 1.0));
        assert_eq!(pro_auc(&map, &gt, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_staircase() {
        // Region {0, 1}; normal pixels 2..8. Scores put one region pixel
        // first, then one normal pixel, then the other region pixel.
        let gt = gt_from(2, 4, &[0, 1]);
        let map = ScoreMap::from_values(2, 4, vec![0.9, 0.7, 0.8, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let curve = pro_curve(&[(&map, &gt)]).unwrap();
        let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.fpr, p.pro)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 0.5), (1.0 / 6.0, 0.5), (1.0 / 6.0, 1.0), (1.0, 1.0)]);
        let expected = (0.5 / 6.0 + (0.3 - 1.0 / 6.0)) / 0.3;
        assert!((pro_auc(&map, &gt, 0.3).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn defect_free_needs_pooling() {
        let clean = gt_from(2, 2, &[]);
        let map = ScoreMap::from_values(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(pro_auc(&map, &clean, 0.3).unwrap_err().kind(), "precondition");
        let bad = gt_from(2, 2, &[3]);
        let quiet = ScoreMap::from_values(2, 2, vec![0.1, 0.1, 0.2, 0.2]).unwrap();
        let pooled = pooled_pro_auc(&[(&quiet, &clean), (&map, &bad)], 0.3).unwrap();
        // The anomalous pixel has the top score; FPR stays 0 until it is found.
        assert_eq!(pooled, 1.0);
    }

    #[test]
    fn all_anomalous_is_rejected() {
        let gt = gt_from(1, 2, &[0, 1]);
        let map = ScoreMap::from_values(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(pro_auc(&map, &gt, 0.3).unwrap_err().kind(), "precondition");
    }
}
