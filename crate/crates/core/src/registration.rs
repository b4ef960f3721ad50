//! Rigid alignment of a moving cloud onto a fixed one.
//!
//! Coarse alignment matches PCA frames; refinement is point-to-point ICP
//! with closed-form orthogonal Procrustes updates. Rotations are always
//! proper: reflections are never produced here.

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::eigensolve::fiedler_extent;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::knn::NeighborIndex;
use crate::pca::PcaFrame;

/// `x ↦ R (s x) + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRecord", try_from = "TransformRecord")]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

#[derive(Serialize, Deserialize)]
struct TransformRecord {
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    scale: f64,
}

impl From<RigidTransform> for TransformRecord {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        Self {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
            scale: t.scale,
        }
    }
}

impl TryFrom<TransformRecord> for RigidTransform {
    type Error = Error;

    fn try_from(rec: TransformRecord) -> Result<Self> {
        let t = RigidTransform {
            rotation: Matrix3::from_fn(|i, j| rec.rotation[i][j]),
            translation: Vector3::from(rec.translation),
            scale: rec.scale,
        };
        t.validate()?;
        Ok(t)
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        let det = self.rotation.determinant();
        if ortho > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not proper (orthogonality error {ortho:.2e}, det {det})"
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * (p.coords * self.scale) + self.translation)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.apply(p))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation * self.scale + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transform is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

/// Root mean square of the distances from each point of `a` to its nearest
/// neighbour in `b`, and vice versa, pooled.
pub fn symmetric_rms(a: &PointCloud, b: &PointCloud) -> f64 {
    let ia = NeighborIndex::new(&a.points);
    let ib = NeighborIndex::new(&b.points);
    let sum: f64 = a.points.iter().map(|p| ib.nearest(p).map_or(0.0, |n| n.dist_sq)).sum::<f64>()
        + b.points.iter().map(|p| ia.nearest(p).map_or(0.0, |n| n.dist_sq)).sum::<f64>();
    (sum / (a.len() + b.len()) as f64).sqrt()
}

fn right_handed(mut axes: Matrix3<f64>) -> Matrix3<f64> {
    if axes.determinant() < 0.0 {
        let c = -axes.column(2);
        axes.set_column(2, &c);
    }
    axes
}

/// Maps the PCA frame of `moving` onto that of `fixed`, choosing among the
/// four proper axis-sign combinations by symmetric nearest-neighbour RMS.
pub fn pca_align(moving: &PointCloud, fixed: &PointCloud) -> Result<RigidTransform> {
    let fm = PcaFrame::fit(&moving.points)?;
    let ff = PcaFrame::fit(&fixed.points)?;
    fm.require_full_rank()?;
    ff.require_full_rank()?;
    let am = right_handed(fm.axes);
    let af = right_handed(ff.axes);
    let mut best: Option<(f64, RigidTransform)> = None;
    for signs in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
        let d = Matrix3::from_diagonal(&Vector3::from(signs));
        let rotation = af * d * am.transpose();
        let t = RigidTransform {
            rotation,
            translation: ff.centroid.coords - rotation * fm.centroid.coords,
            scale: 1.0,
        };
        let rms = symmetric_rms(&t.apply_cloud(moving), fixed);
        if best.as_ref().is_none_or(|(b, _)| rms < *b) {
            best = Some((rms, t));
        }
    }
    Ok(best.expect("four candidates").1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpOptions {
    pub max_iters: usize,
    /// Stop when the RMS improves by less than this. Defaults to
    /// `1e-8 · diameter(fixed)`.
    pub conv_tol: Option<f64>,
    /// Fraction of worst correspondences ignored in each update.
    pub trim: Option<f64>,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            conv_tol: None,
            trim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RMS before each update, then the final RMS.
    pub rms_history: Vec<f64>,
}

/// Proper rotation and translation minimizing `Σ ‖R p + t − q‖²`.
pub fn procrustes(src: &[Point3<f64>], dst: &[Point3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let cs = src.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let cd = dst.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in src.iter().zip(dst) {
        h += (p.coords - cs) * (q.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    (r, cd - r * cs)
}

fn correspond(moved: &[Point3<f64>], index: &NeighborIndex) -> (Vec<usize>, Vec<f64>) {
    moved
        .iter()
        .map(|p| {
            let nb = index.nearest(p).expect("fixed cloud non-empty");
            (nb.index, nb.dist_sq)
        })
        .unzip()
}

pub fn icp_refine(moving: &PointCloud, fixed: &PointCloud, init: &RigidTransform, opts: &IcpOptions) -> Result<IcpResult> {
    init.validate()?;
    if moving.is_empty() || fixed.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(t) = opts.trim {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("trim fraction must be in [0, 1), got {t}")));
        }
    }
    let tol = opts.conv_tol.unwrap_or(1e-8 * fixed.diameter());
    let index = NeighborIndex::new(&fixed.points);
    let mut transform = *init;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let moved: Vec<Point3<f64>> = moving.points.iter().map(|p| transform.apply(p)).collect();
        let (idx, d2) = correspond(&moved, &index);
        let rms = (d2.iter().sum::<f64>() / d2.len() as f64).sqrt();
        let improvement = history.last().map(|prev: &f64| prev - rms);
        history.push(rms);
        if rms <= tol || improvement.is_some_and(|imp| imp < tol) {
            converged = true;
            break;
        }
        if iterations == opts.max_iters {
            break;
        }
        let mut keep: Vec<usize> = (0..moved.len()).collect();
        if let Some(trim) = opts.trim.filter(|t| *t > 0.0) {
            keep.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
            let n_keep = ((1.0 - trim) * keep.len() as f64).ceil().max(3.0) as usize;
            keep.truncate(n_keep.min(moved.len()));
        }
        let src: Vec<_> = keep.iter().map(|&i| moved[i]).collect();
        let dst: Vec<_> = keep.iter().map(|&i| fixed.points[idx[i]]).collect();
        let (r, t) = procrustes(&src, &dst);
        let step = RigidTransform {
            rotation: r,
            translation: t,
            scale: 1.0,
        };
        transform = step.compose(&transform);
        iterations += 1;
    }
    Ok(IcpResult {
        transform,
        rms: *history.last().expect("at least one evaluation"),
        iterations,
        converged,
        rms_history: history,
    })
}

/// Ratio `L^S / L^T` of Fiedler extents, the factor that brings the target
/// to the source's length.
pub fn spectral_scale_factor(
    source: &PointCloud,
    source_graph: &WeightedGraph,
    target: &PointCloud,
    target_graph: &WeightedGraph,
) -> Result<f64> {
    let bary = |n: usize| (n / 100).max(1);
    let ls = fiedler_extent(source, source_graph, bary(source.len()))?.length;
    let lt = fiedler_extent(target, target_graph, bary(target.len()))?.length;
    if !(lt > 0.0) {
        return Err(Error::Degenerate("target Fiedler extent is zero".into()));
    }
    Ok(ls / lt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegistrationMode {
    /// Inputs are already registered.
    None,
    /// ICP from the identity.
    Icp,
    /// PCA coarse alignment followed by ICP.
    #[default]
    PcaIcp,
}

impl std::str::FromStr for RegistrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "icp" => Ok(Self::Icp),
            "pca-icp" => Ok(Self::PcaIcp),
            _ => Err(Error::InvalidArgument(format!("unknown registration mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegistrationOptions {
    pub mode: RegistrationMode,
    /// Rescale the moving cloud along its principal axes to the fixed
    /// cloud's spreads before the rigid stages.
    pub anisotropic: bool,
    pub icp: IcpOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    /// The moving cloud mapped into the fixed frame.
    pub cloud: PointCloud,
    pub transform: RigidTransform,
    /// Final ICP RMS; absent for pass-through.
    pub rms: Option<f64>,
    pub converged: bool,
    /// Per-axis factors of the anisotropic stage.
    pub axis_scales: Option<Vector3<f64>>,
}

/// Scales `cloud` about its centroid along its principal axes so the
/// per-axis standard deviations match `reference`'s.
pub fn anisotropic_prescale(cloud: &PointCloud, reference: &PointCloud) -> Result<(PointCloud, Vector3<f64>)> {
    let fc = PcaFrame::fit(&cloud.points)?;
    let fr = PcaFrame::fit(&reference.points)?;
    fc.require_full_rank()?;
    fr.require_full_rank()?;
    let scales = fr.variances.zip_map(&fc.variances, |r, c| (r / c).sqrt());
    let m = fc.axes * Matrix3::from_diagonal(&scales) * fc.axes.transpose();
    Ok((cloud.map_points(|p| fc.centroid + m * (p - fc.centroid)), scales))
}

pub fn register(moving: &PointCloud, fixed: &PointCloud, opts: &RegistrationOptions) -> Result<Registration> {
    if opts.mode == RegistrationMode::None {
        return Ok(Registration {
            cloud: moving.clone(),
            transform: RigidTransform::identity(),
            rms: None,
            converged: true,
            axis_scales: None,
        });
    }
    let (input, axis_scales) = if opts.anisotropic {
        let (c, s) = anisotropic_prescale(moving, fixed)?;
        (c, Some(s))
    } else {
        (moving.clone(), None)
    };
    let init = match opts.mode {
        RegistrationMode::PcaIcp => pca_align(&input, fixed)?,
        _ => RigidTransform::identity(),
    };
    let icp = icp_refine(&input, fixed, &init, &opts.icp)?;
    Ok(Registration {
        cloud: icp.transform.apply_cloud(&input),
        transform: icp.transform,
        rms: Some(icp.rms),
        converged: icp.converged,
        axis_scales,
    })
}

/// Random rigid motion about the centroid: rotation angles per axis and
/// translation components drawn from zero-mean normals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosePerturbation {
    pub rotation_sd_deg: f64,
    pub translation_sd: f64,
}

impl PosePerturbation {
    pub fn sample(&self, centroid: &Point3<f64>, seed: u64) -> Result<RigidTransform> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rot = Normal::new(0.0, self.rotation_sd_deg.to_radians())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let tr = Normal::new(0.0, self.translation_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let r = Rotation3::from_euler_angles(rot.sample(&mut rng), rot.sample(&mut rng), rot.sample(&mut rng));
        let t = Vector3::new(tr.sample(&mut rng), tr.sample(&mut rng), tr.sample(&mut rng));
        let rotation = *r.matrix();
        Ok(RigidTransform {
            rotation,
            translation: centroid.coords - rotation * centroid.coords + t,
            scale: 1.0,
        })
    }
}
