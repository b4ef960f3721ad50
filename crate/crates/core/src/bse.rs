//! Bone side estimation: decide whether a target is the same side as a
//! labeled source or its contralateral, by coupling the target with the
//! source and with the source's PCA mirror image.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::{fmt_sig9, load_cloud, PointCloud};
use crate::coupling::{couple_and_solve, plan_coupling, CouplingParams, SigmaMode};
use crate::eigensolve::SolverOptions;
use crate::error::{Error, Result};
use crate::graph::{build_graph_with, GraphOptions, DEFAULT_K};
use crate::matching::global_match;
use crate::pca::PcaFrame;
use crate::registration::{register, spectral_scale_factor, PosePerturbation, RegistrationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(Error::InvalidArgument(format!("unknown side '{other}'"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BseParams {
    pub k: usize,
    pub m: usize,
    pub l: f64,
    pub alpha: f64,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    /// Mirror the target instead of the source.
    pub mirror_target: bool,
    pub registration: RegistrationOptions,
    /// Random pose error applied to both registered candidates.
    pub perturbation: Option<PosePerturbation>,
    /// A run is flagged when the better registration's RMS exceeds this
    /// fraction of the reference diameter.
    pub failure_rms_fraction: f64,
    pub auto_connect: bool,
    pub solver: SolverOptions,
}

impl Default for BseParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            m: 20,
            l: 0.5,
            alpha: 1.0,
            seed: 0,
            sigma_mode: SigmaMode::Global,
            mirror_target: false,
            registration: RegistrationOptions::default(),
            perturbation: None,
            failure_rms_fraction: 0.05,
            auto_connect: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidePrediction {
    pub side: Side,
    pub d_same: f64,
    pub d_mirror: f64,
    pub margin: f64,
    /// Factor applied to the target to equalize Fiedler lengths.
    pub scale_factor: f64,
    pub rms_same: Option<f64>,
    pub rms_mirror: Option<f64>,
    pub registration_failure: bool,
    pub rank_deficient: bool,
    pub params: BseParams,
}

/// Reflection about the plane through the centroid orthogonal to the second
/// principal axis.
pub fn mirror_pca(cloud: &PointCloud) -> Result<PointCloud> {
    let frame = PcaFrame::fit(&cloud.points)?;
    frame.require_full_rank()?;
    let a = frame.axes.column(1).into_owned();
    let c = frame.centroid;
    let mut out = cloud.map_points(|p| p - a * (2.0 * (p - c).dot(&a)));
    out.name = format!("{}_mirrored", cloud.name);
    Ok(out)
}

pub fn estimate_side(source: &PointCloud, source_side: Side, target: &PointCloud, params: &BseParams) -> Result<SidePrediction> {
    if params.m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let gopts = GraphOptions {
        sigma_sq: None,
        auto_connect: params.auto_connect,
    };
    let gs = build_graph_with(source, params.k, &gopts)?;
    let gt = build_graph_with(target, params.k, &gopts)?;
    let factor = spectral_scale_factor(source, &gs, target, &gt)?;
    let tc = target.centroid();
    let scaled = target.map_points(|p| tc + (p - tc) * factor);

    let (hub, same) = if params.mirror_target {
        (source.clone(), scaled)
    } else {
        (scaled, source.clone())
    };
    let mirrored = mirror_pca(&same)?;
    let reg_same = register(&same, &hub, &params.registration)?;
    let reg_mirror = register(&mirrored, &hub, &params.registration)?;
    let mut candidates = [reg_same.cloud, reg_mirror.cloud];
    if let Some(p) = &params.perturbation {
        for (i, c) in candidates.iter_mut().enumerate() {
            let seed = params.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1);
            *c = p.sample(&c.centroid(), seed)?.apply_cloud(c);
        }
    }

    let plan = plan_coupling(&hub, &candidates, params.l, params.seed)?.with_alpha(params.alpha);
    let cparams = CouplingParams {
        k: params.k,
        m: params.m,
        sigma_mode: params.sigma_mode,
        auto_connect: params.auto_connect,
        solver: params.solver,
    };
    let (_, emb) = couple_and_solve(&hub, &candidates, &plan, &cparams)?;
    let report = global_match(&emb, &plan)?;
    let d_same = report.per_candidate[0].distance;
    let d_mirror = report.per_candidate[1].distance;
    let side = if d_same <= d_mirror { source_side } else { source_side.opposite() };

    let limit = params.failure_rms_fraction * hub.diameter();
    let best_rms = match (reg_same.rms, reg_mirror.rms) {
        (Some(a), Some(b)) => Some(a.min(b)),
        _ => None,
    };
    Ok(SidePrediction {
        side,
        d_same,
        d_mirror,
        margin: d_mirror - d_same,
        scale_factor: factor,
        rms_same: reg_same.rms,
        rms_mirror: reg_mirror.rms,
        registration_failure: best_rms.is_some_and(|r| r > limit),
        rank_deficient: report.per_candidate.iter().any(|c| c.rank_deficient),
        params: *params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub side: Side,
}

/// `path,side` lines; relative paths resolve against the manifest's folder.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (p, s) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(line_no, "expected path,side"))?;
        if out.is_empty() && p.trim() == "path" {
            continue;
        }
        let side = s.parse::<Side>().map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(ManifestEntry {
            path: base.join(p.trim()),
            side,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub source: String,
    pub targets: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPrediction {
    pub source: String,
    pub target: String,
    pub truth: Side,
    pub predicted: Side,
    pub d_same: f64,
    pub d_mirror: f64,
    pub margin: f64,
    pub registration_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub mean_accuracy: f64,
    pub predictions: Vec<BenchPrediction>,
    pub params: BseParams,
}

impl BenchReport {
    /// `source,targets,correct,accuracy` per source, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,targets,correct,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.source, r.targets, r.correct, fmt_sig9(r.accuracy));
        }
        let targets: usize = self.rows.iter().map(|r| r.targets).sum();
        let correct: usize = self.rows.iter().map(|r| r.correct).sum();
        let _ = writeln!(out, "mean,{targets},{correct},{}", fmt_sig9(self.mean_accuracy));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// Every labeled cloud serves once as source against all others as targets.
pub fn bse_benchmark(entries: &[(PointCloud, Side)], params: &BseParams) -> Result<BenchReport> {
    if entries.len() < 2 {
        return Err(Error::Precondition("benchmark needs at least two clouds; the target set is empty".into()));
    }
    let mut rows = Vec::with_capacity(entries.len());
    let mut predictions = Vec::new();
    for (i, (src, src_side)) in entries.iter().enumerate() {
        let mut correct = 0;
        for (j, (tgt, tgt_side)) in entries.iter().enumerate() {
            if i == j {
                continue;
            }
            let pred = estimate_side(src, *src_side, tgt, params)?;
            if pred.side == *tgt_side {
                correct += 1;
            }
            predictions.push(BenchPrediction {
                source: src.name.clone(),
                target: tgt.name.clone(),
                truth: *tgt_side,
                predicted: pred.side,
                d_same: pred.d_same,
                d_mirror: pred.d_mirror,
                margin: pred.margin,
                registration_failure: pred.registration_failure,
            });
        }
        let targets = entries.len() - 1;
        rows.push(BenchRow {
            source: src.name.clone(),
            targets,
            correct,
            accuracy: correct as f64 / targets as f64,
        });
    }
    let mean_accuracy = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    Ok(BenchReport {
        rows,
        mean_accuracy,
        predictions,
        params: *params,
    })
}

/// Loads the clouds of a manifest and runs [`bse_benchmark`]. Cloud names
/// are the manifest paths' file names.
pub fn bse_benchmark_manifest(manifest: impl AsRef<Path>, params: &BseParams) -> Result<BenchReport> {
    let entries = load_manifest(manifest)?;
    let clouds = entries
        .iter()
        .map(|e| {
            let name = e.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((load_cloud(&e.path, None)?.named(name), e.side))
        })
        .collect::<Result<Vec<_>>>()?;
    bse_benchmark(&clouds, params)
}
