//! Synthetic shapes and scenes with known ground truth.

use std::f64::consts::PI;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::anomaly::GroundTruth;
use crate::cloud::PointCloud;
use crate::registration::RigidTransform;

/// Control polyline of the chiral tube: a bent, twisted hook with no plane
/// of symmetry.
const HOOK: [[f64; 3]; 6] = [
    [0.0, 0.0, 0.0],
    [5.0, 0.0, 0.0],
    [7.5, 1.2, 0.3],
    [8.6, 3.0, 1.4],
    [8.4, 4.2, 3.2],
    [7.2, 4.6, 4.4],
];

/// Points on the surface of a closed tube of radius `0.6` around a chiral
/// space curve. The start tapers to a point and the end is a rounded cap, so
/// the two ends differ. Positions along the curve and around the tube are
/// uniform random under `seed`.
pub fn chiral_tube(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seg_len: Vec<f64> = HOOK.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let total: f64 = seg_len.iter().sum();
    let points = (0..n)
        .map(|_| {
            let s = rng.random_range(0.0..total);
            let theta = rng.random_range(0.0..2.0 * PI);
            let (c, tangent) = curve_at(&seg_len, s);
            let helper = if tangent.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let u = tangent.cross(&helper).normalize();
            let v = tangent.cross(&u);
            let radius = tube_radius(s, total);
            c + (u * theta.cos() + v * theta.sin()) * radius
        })
        .collect();
    PointCloud::new(points).named("chiral_tube")
}

fn tube_radius(s: f64, total: f64) -> f64 {
    const R: f64 = 0.6;
    const TAPER: f64 = 1.5;
    if s < TAPER {
        R * (s / TAPER).sqrt()
    } else if s > total - R {
        let u = (s - (total - R)) / R;
        R * (1.0 - u * u).max(0.0).sqrt()
    } else {
        R
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (Vector3::from(*a) - Vector3::from(*b)).norm()
}

fn curve_at(seg_len: &[f64], mut s: f64) -> (Point3<f64>, Vector3<f64>) {
    for (i, &len) in seg_len.iter().enumerate() {
        if s <= len || i + 1 == seg_len.len() {
            let a = Vector3::from(HOOK[i]);
            let b = Vector3::from(HOOK[i + 1]);
            let t = (s / len).clamp(0.0, 1.0);
            return (Point3::from(a + (b - a) * t), (b - a).normalize());
        }
        s -= len;
    }
    unreachable!("polyline has segments")
}

/// Evenly spaced points on a thin straight rod of the given length along x.
pub fn segment(length: f64, n: usize) -> PointCloud {
    let w = 0.01 * length;
    PointCloud::new(
        (0..n)
            .map(|i| {
                let t = i as f64 / (n.max(2) - 1) as f64;
                Point3::new(t * length, w * (i % 3) as f64, w * (i % 5) as f64)
            })
            .collect(),
    )
    .named("segment")
}

/// Uniformly random rotation and a translation with components in
/// `[-translation_range, translation_range]`.
pub fn random_pose(seed: u64, translation_range: f64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
    let rot = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    let t = Vector3::from_fn(|_, _| rng.random_range(-translation_range..=translation_range));
    RigidTransform {
        rotation: *rot.to_rotation_matrix().matrix(),
        translation: t,
        scale: 1.0,
    }
}

/// Adds independent zero-mean Gaussian noise of standard deviation `sd` to
/// every coordinate.
pub fn add_noise(cloud: &PointCloud, sd: f64, seed: u64) -> PointCloud {
    if sd == 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("finite sd");
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p += Vector3::from_fn(|_, _| normal.sample(&mut rng));
    }
    out
}

/// Irregular closed surface: an ellipsoid with distinct semi-axes whose
/// radius is modulated by a few random low-frequency lobes.
pub fn random_shape(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = Vector3::new(rng.random_range(3.0..4.0), rng.random_range(1.6..2.2), rng.random_range(0.8..1.2));
    let lobes: Vec<(Vector3<f64>, f64)> = (0..4)
        .map(|_| {
            let d = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng)).normalize();
            (d, rng.random_range(0.05..0.2))
        })
        .collect();
    let points = (0..n)
        .map(|_| {
            let d = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng)).normalize();
            let bump: f64 = lobes.iter().map(|(c, a)| a * d.dot(c).max(0.0).powi(3)).sum();
            Point3::from(d.component_mul(&axes) * (1.0 + bump))
        })
        .collect();
    PointCloud::new(points).named(format!("shape_{seed}"))
}

/// Organized scan of a sphere cap resting in a flat plane, seen from above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneOptions {
    /// Pixels per image side.
    pub grid: usize,
    pub radius: f64,
    /// Depth of the sphere center below the plane, relative to the radius.
    pub sink: f64,
    /// Whether to raise a bump on the cap.
    pub bump: bool,
    /// Bump area as a fraction of the visible cap area.
    pub bump_fraction: f64,
    /// Peak bump height relative to the radius.
    pub bump_height: f64,
    /// Per-axis stretch factors are drawn from `[1 - stretch, 1 + stretch]`.
    pub stretch: f64,
    /// Coordinate noise standard deviation relative to the radius.
    pub noise: f64,
    /// Maximum horizontal offset of the object, relative to the radius.
    pub offset: f64,
    pub seed: u64,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            grid: 128,
            radius: 1.0,
            sink: 0.5,
            bump: true,
            bump_fraction: 0.05,
            bump_height: 0.03,
            stretch: 0.03,
            noise: 0.005,
            offset: 0.02,
            seed: 0,
        }
    }
}

/// Fraction of scene pixels lying on the background plane before noise,
/// a convenient background-removal quantile for [`sphere_scene`].
pub fn scene_background_fraction(opts: &SceneOptions) -> f64 {
    let half = 1.3 * opts.radius;
    let disc = PI * (1.0 - opts.sink * opts.sink) * opts.radius * opts.radius;
    1.0 - disc / (4.0 * half * half)
}

/// Renders the scene on a square sensor grid together with the exact mask
/// of the bump. The object is a mildly stretched sphere whose center sits
/// `sink` radii below the plane; the bump is a dome displaced along the
/// surface normal over a spherical cap of the requested area.
pub fn sphere_scene(opts: &SceneOptions) -> (PointCloud, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = opts.radius;
    let axes = Vector3::from_fn(|_, _| r * (1.0 + rng.random_range(-opts.stretch..=opts.stretch)));
    let center = Vector3::new(
        rng.random_range(-opts.offset..=opts.offset) * r,
        rng.random_range(-opts.offset..=opts.offset) * r,
        -opts.sink * axes.z,
    );
    // Visible cap area is 2πR²(1 - sink); a cap of half-angle θ has 2πR²(1 - cos θ).
    let cap_cos = 1.0 - opts.bump_fraction * (1.0 - opts.sink);
    let cap_angle = cap_cos.clamp(-1.0, 1.0).acos();
    let polar = rng.random_range(0.0..0.6f64);
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let bump_dir = Vector3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos());
    let normal = Normal::new(0.0, opts.noise * r).expect("finite noise");

    let g = opts.grid;
    let half = 1.3 * r;
    let step = 2.0 * half / (g - 1) as f64;
    let mut points = Vec::with_capacity(g * g);
    let mut grid = Vec::with_capacity(g * g);
    let mut mask = vec![false; g * g];
    for row in 0..g {
        for col in 0..g {
            let x = -half + col as f64 * step;
            let y = half - row as f64 * step;
            let u = (x - center.x) / axes.x;
            let v = (y - center.y) / axes.y;
            let w2 = 1.0 - u * u - v * v;
            let mut p = Vector3::new(x, y, 0.0);
            if w2 > 0.0 {
                let dir = Vector3::new(u, v, w2.sqrt());
                let surface = center + dir.component_mul(&axes);
                if surface.z > 0.0 {
                    p = surface;
                    let angle = dir.dot(&bump_dir).clamp(-1.0, 1.0).acos();
                    if opts.bump && angle < cap_angle {
                        mask[row * g + col] = true;
                        let n = dir.component_div(&axes).normalize();
                        p += n * (opts.bump_height * r * (1.0 - (angle / cap_angle).powi(4)));
                    }
                }
            }
            p += Vector3::from_fn(|_, _| normal.sample(&mut rng));
            points.push(Point3::from(p));
            grid.push((row, col));
        }
    }
    let cloud = PointCloud::with_grid(points, grid)
        .expect("scene grid is consistent")
        .named(format!("scene_{}", opts.seed));
    let gt = GroundTruth::from_mask(g, g, &mask).expect("mask matches grid");
    (cloud, gt)
}
