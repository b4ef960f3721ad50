//! Point clouds and their plain-text formats.
//!
//! Three formats are supported:
//!
//! * `ply-ascii`: ASCII PLY 1.0 with `x`, `y`, `z` vertex properties. Other
//!   vertex properties are skipped, elements after `vertex` are ignored.
//! * `xyz-csv`: one `x,y,z` record per line.
//! * `organized-grid`: one `row,col,x,y,z` record per line. Records with a
//!   non-finite coordinate mark invalid sensor pixels and are dropped.
//!
//! Blank lines and lines starting with `#` are ignored by the CSV readers.
//! Writers emit LF line endings and 9 significant digits.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaFrame;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Sensor-grid `(row, col)` of every point, for organized scans.
    pub grid_index: Option<Vec<(usize, usize)>>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    PlyAscii,
    XyzCsv,
    OrganizedGrid,
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply-ascii" | "ply" => Ok(CloudFormat::PlyAscii),
            "xyz-csv" | "xyz" => Ok(CloudFormat::XyzCsv),
            "organized-grid" | "grid" => Ok(CloudFormat::OrganizedGrid),
            other => Err(Error::InvalidArgument(format!("unknown cloud format '{other}'"))),
        }
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            grid_index: None,
            name: String::new(),
        }
    }

    pub fn with_grid(points: Vec<Point3<f64>>, grid: Vec<(usize, usize)>) -> Result<Self> {
        let cloud = Self {
            points,
            grid_index: Some(grid),
            name: String::new(),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the type invariants: non-empty, finite, consistent grid.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(grid) = &self.grid_index {
            if grid.len() != self.points.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.points.len(),
                    got: grid.len(),
                });
            }
            let mut seen = HashSet::with_capacity(grid.len());
            for rc in grid {
                if !seen.insert(*rc) {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate grid index ({}, {})",
                        rc.0, rc.1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn centroid(&self) -> Point3<f64> {
        let n = self.points.len().max(1) as f64;
        Point3::from(self.points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n)
    }

    /// Length of the axis-aligned bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let Some(first) = self.points.first() else {
            return 0.0;
        };
        let (mut lo, mut hi) = (first.coords, first.coords);
        for p in &self.points {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        (hi - lo).norm()
    }

    /// Keeps the points at `indices`, in that order, with their grid entries.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            grid_index: self
                .grid_index
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i]).collect()),
            name: self.name.clone(),
        }
    }

    pub fn map_points(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(f).collect(),
            grid_index: self.grid_index.clone(),
            name: self.name.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> PointCloud {
        self.map_points(|p| Point3::from(p.coords * factor))
    }
}

/// Reads a cloud; `format = None` sniffs it from the extension and content.
pub fn load_cloud(path: impl AsRef<Path>, format: Option<CloudFormat>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format = match format {
        Some(f) => f,
        None => detect_format(path, &text),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_cloud(&text, format)?.named(name))
}

pub fn detect_format(path: &Path, text: &str) -> CloudFormat {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "ply" || text.starts_with("ply") {
        return CloudFormat::PlyAscii;
    }
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first.map(|l| split_fields(l).count()) {
        Some(5) => CloudFormat::OrganizedGrid,
        _ => CloudFormat::XyzCsv,
    }
}

pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<PointCloud> {
    let cloud = match format {
        CloudFormat::PlyAscii => parse_ply(text)?,
        CloudFormat::XyzCsv => parse_xyz(text)?,
        CloudFormat::OrganizedGrid => parse_grid(text)?,
    };
    cloud.validate()?;
    Ok(cloud)
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("'{field}' is not a number")))
}

fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = split_fields(l).collect();
        if fields.len() != 3 {
            return Err(Error::parse(line, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut c = [0.0; 3];
        for (slot, f) in c.iter_mut().zip(&fields) {
            *slot = parse_f64(f, line)?;
            if !slot.is_finite() {
                return Err(Error::parse(line, "non-finite coordinate"));
            }
        }
        points.push(Point3::new(c[0], c[1], c[2]));
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

fn parse_grid(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut grid = Vec::new();
    for (line, l) in data_lines(text) {
        let fields: Vec<&str> = split_fields(l).collect();
        if fields.len() != 5 {
            return Err(Error::parse(line, format!("expected 5 fields, found {}", fields.len())));
        }
        let row = fields[0]
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("bad row '{}'", fields[0])))?;
        let col = fields[1]
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("bad col '{}'", fields[1])))?;
        let x = parse_f64(fields[2], line)?;
        let y = parse_f64(fields[3], line)?;
        let z = parse_f64(fields[4], line)?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            continue;
        }
        points.push(Point3::new(x, y, z));
        grid.push((row, col));
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud {
        points,
        grid_index: Some(grid),
        name: String::new(),
    })
}

fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing 'ply' magic")),
    }

    let mut vertex_count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut header_end = None;
    for (line, l) in lines.by_ref() {
        let mut words = l.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(Error::parse(line, "only ascii PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words.next().unwrap_or_default();
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(line, "bad element declaration"))?;
                in_vertex = name == "vertex";
                if in_vertex {
                    if seen_vertex {
                        return Err(Error::parse(line, "duplicate vertex element"));
                    }
                    if vertex_count.is_none() && !props.is_empty() {
                        return Err(Error::parse(line, "vertex element must come first"));
                    }
                    seen_vertex = true;
                    vertex_count = Some(count);
                } else if !seen_vertex {
                    return Err(Error::parse(line, "vertex element must come first"));
                }
            }
            Some("property") => {
                if in_vertex {
                    let rest: Vec<&str> = words.collect();
                    if rest.first() == Some(&"list") {
                        return Err(Error::parse(line, "list properties on vertices are not supported"));
                    }
                    let name = rest
                        .last()
                        .ok_or_else(|| Error::parse(line, "bad property declaration"))?;
                    props.push((*name).to_string());
                }
            }
            Some("end_header") => {
                header_end = Some(line);
                break;
            }
            Some(other) => return Err(Error::parse(line, format!("unexpected header keyword '{other}'"))),
        }
    }
    let header_end = header_end.ok_or_else(|| Error::parse(0, "missing end_header"))?;
    let count = vertex_count.ok_or_else(|| Error::parse(header_end, "no vertex element"))?;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::parse(header_end, format!("vertex property '{name}' missing")))
    };
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);

    let mut points = Vec::with_capacity(count);
    for (line, l) in lines {
        if points.len() == count {
            break;
        }
        if l.is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() < props.len() {
            return Err(Error::parse(line, format!(
                "vertex record has {} fields, expected {}",
                fields.len(),
                props.len()
            )));
        }
        let x = parse_f64(fields[ix], line)?;
        let y = parse_f64(fields[iy], line)?;
        let z = parse_f64(fields[iz], line)?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::parse(line, "non-finite coordinate"));
        }
        points.push(Point3::new(x, y, z));
    }
    if points.len() != count {
        return Err(Error::parse(
            header_end,
            format!("header declares {count} vertices, found {}", points.len()),
        ));
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

/// Formats `x` as a plain decimal number with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_cloud(cloud: &PointCloud, format: CloudFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        CloudFormat::PlyAscii => {
            out.push_str("ply\nformat ascii 1.0\n");
            let _ = writeln!(out, "element vertex {}", cloud.len());
            out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
            for p in &cloud.points {
                let _ = writeln!(out, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
            }
        }
        CloudFormat::XyzCsv => {
            for p in &cloud.points {
                let _ = writeln!(out, "{},{},{}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
            }
        }
        CloudFormat::OrganizedGrid => {
            let grid = cloud.grid_index.as_ref().ok_or_else(|| {
                Error::InvalidArgument("organized-grid output needs grid indices".into())
            })?;
            for (p, (r, c)) in cloud.points.iter().zip(grid) {
                let _ = writeln!(out, "{r},{c},{},{},{}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z));
            }
        }
    }
    Ok(out)
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let text = write_cloud(cloud, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Type-7 (linear interpolation) quantile of an unsorted sample.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Indices of the points that survive [`remove_background`], ascending.
pub fn foreground_indices(cloud: &PointCloud, z_quantile: f64) -> Result<Vec<usize>> {
    if !(z_quantile > 0.0 && z_quantile < 1.0) {
        return Err(Error::InvalidArgument(format!("z_quantile {z_quantile} not in (0, 1)")));
    }
    if cloud.len() < 4 {
        return Err(Error::Precondition(format!(
            "background removal needs at least 4 points, got {}",
            cloud.len()
        )));
    }
    let frame = PcaFrame::fit(&cloud.points)?;
    let height: Vec<f64> = cloud.points.iter().map(|p| frame.project(p)[2]).collect();
    let (lo, hi) = height
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
    let scale = frame.variances[0].sqrt().max(f64::MIN_POSITIVE);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::Degenerate("all points lie at the same height".into()));
    }
    let threshold = quantile(&height, z_quantile);
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| height[i] > threshold).collect();
    if kept.is_empty() {
        return Err(Error::Degenerate("background threshold removed every point".into()));
    }
    Ok(kept)
}

/// Drops the flat background of a scan.
///
/// Heights are measured along the third principal axis; points at or below
/// the `z_quantile` quantile of the height distribution are removed. Survivors
/// keep their original coordinates, order and grid indices.
pub fn remove_background(cloud: &PointCloud, z_quantile: f64) -> Result<PointCloud> {
    let kept = foreground_indices(cloud, z_quantile)?;
    Ok(cloud.select(&kept))
}

/// Uniform random subsample without replacement; identity when the cloud
/// already fits. Returned indices are ascending positions in the input.
pub fn subsample(cloud: &PointCloud, max_points: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if max_points == 0 {
        return Err(Error::InvalidArgument("max_points must be positive".into()));
    }
    let n = cloud.len();
    if n <= max_points {
        return Ok((cloud.clone(), (0..n).collect()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = rand::seq::index::sample(&mut rng, n, max_points).into_vec();
    kept.sort_unstable();
    Ok((cloud.select(&kept), kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_csv_parses_three_points() {
        let c = parse_cloud("0,0,0\n1,0,0\n0,1,0\n", CloudFormat::XyzCsv).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points[1], Point3::new(1.0, 0.0, 0.0));
        assert!(c.grid_index.is_none());
    }

    #[test]
    fn organized_grid_single_record() {
        let c = parse_cloud("0,0,1.0,2.0,3.0\n", CloudFormat::OrganizedGrid).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.grid_index, Some(vec![(0, 0)]));
    }

    #[test]
    fn organized_grid_skips_invalid_pixels() {
        let c = parse_cloud("0,0,nan,0,0\n0,1,1,2,3\n1,0,inf,1,1\n", CloudFormat::OrganizedGrid).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.grid_index, Some(vec![(0, 1)]));
    }

    #[test]
    fn organized_grid_rejects_duplicate_pixels() {
        let err = parse_cloud("0,0,1,2,3\n0,0,4,5,6\n", CloudFormat::OrganizedGrid).unwrap_err();
        assert_eq!(err.kind(), "invalid_argument");
    }

    #[test]
    fn ply_with_short_body_is_a_parse_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n";
        assert!(matches!(parse_cloud(text, CloudFormat::PlyAscii), Err(Error::Parse { .. })));
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n3 0 1 2\n";
        let c = parse_cloud(text, CloudFormat::PlyAscii).unwrap();
        assert_eq!(c.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn binary_ply_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_cloud(text, CloudFormat::PlyAscii), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_finite_xyz_rejected() {
        assert!(matches!(parse_cloud("0,0,nan\n", CloudFormat::XyzCsv), Err(Error::Parse { .. })));
        assert!(matches!(parse_cloud("\n# nothing\n", CloudFormat::XyzCsv), Err(Error::EmptyCloud)));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1.00000000");
        assert_eq!(fmt_sig9(-123.456), "-123.456000");
        assert_eq!(fmt_sig9(1.5e-7), "0.000000150000000");
        let x = 3.14159265358979;
        assert!((fmt_sig9(x).parse::<f64>().unwrap() - x).abs() / x < 1e-8);
    }

    #[test]
    fn format_detection() {
        assert_eq!(detect_format(Path::new("a.ply"), ""), CloudFormat::PlyAscii);
        assert_eq!(detect_format(Path::new("a.csv"), "# c\n1,2,3,4,5\n"), CloudFormat::OrganizedGrid);
        assert_eq!(detect_format(Path::new("a.txt"), "1 2 3\n"), CloudFormat::XyzCsv);
    }

    /// Plane z = 0 on a `side`×`side` lattice plus raised points placed
    /// symmetrically about the plane centre, so the PCA height axis is z.
    fn plane_with_raised(raised: usize, side: usize) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..side {
            for j in 0..side {
                pts.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        let c = (side - 1) as f64 / 2.0;
        if raised == 1 {
            pts.push(Point3::new(c, c, 1.5));
        }
        for r in 0..raised / 4 {
            let t = r as f64 / (raised / 4) as f64;
            let (a, b, z) = (1.0 + 3.0 * t, 0.5 + (5.0 * t).sin().abs(), 1.0 + t);
            for (sa, sb) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                pts.push(Point3::new(c + sa * a, c + sb * b, z));
            }
        }
        PointCloud::new(pts)
    }

    /// Quantile whose type-7 interpolation falls halfway into the gap above
    /// the lowest `n_low` of `n` values.
    fn gap_quantile(n_low: usize, n: usize) -> f64 {
        (n_low as f64 - 0.5) / (n - 1) as f64
    }

    #[test]
    fn background_plane_is_removed() {
        let cloud = plane_with_raised(100, 30);
        let fg = remove_background(&cloud, gap_quantile(900, 1000)).unwrap();
        let oracle: Vec<_> = cloud.points.iter().filter(|p| p.z > 0.5).cloned().collect();
        assert_eq!(fg.points, oracle);
        assert_eq!(fg.len(), 100);
    }

    #[test]
    fn single_raised_point_survives() {
        let cloud = plane_with_raised(1, 100);
        let fg = remove_background(&cloud, gap_quantile(10_000, 10_001)).unwrap();
        assert_eq!(fg.len(), 1);
        assert_eq!(fg.points[0], *cloud.points.last().unwrap());
    }

    #[test]
    fn flat_cloud_is_degenerate() {
        let cloud = plane_with_raised(0, 10);
        assert!(matches!(remove_background(&cloud, 0.05), Err(Error::Degenerate(_))));
    }

    #[test]
    fn background_removal_keeps_grid_and_order() {
        let cloud = plane_with_raised(20, 10);
        let grid = (0..cloud.len()).map(|i| (i / 7, i % 7)).collect();
        let cloud = PointCloud::with_grid(cloud.points, grid).unwrap();
        let fg = remove_background(&cloud, gap_quantile(100, 120)).unwrap();
        let g = fg.grid_index.as_ref().unwrap();
        assert_eq!(g.len(), 20);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subsample_identity_when_small() {
        let cloud = plane_with_raised(0, 3);
        let (out, idx) = subsample(&cloud, 20, 1).unwrap();
        assert_eq!(out, cloud);
        assert_eq!(idx, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn subsample_is_deterministic_and_distinct() {
        let cloud = plane_with_raised(0, 10);
        let (a, ia) = subsample(&cloud, 50, 9).unwrap();
        let (_, ib) = subsample(&cloud, 50, 9).unwrap();
        assert_eq!(ia, ib);
        assert_eq!(a.len(), 50);
        assert!(ia.windows(2).all(|w| w[0] < w[1]));
        assert!(ia.iter().all(|&i| i < 100));
        let (_, ic) = subsample(&cloud, 50, 10).unwrap();
        assert_ne!(ia, ic);
    }

    #[test]
    fn subsample_large_cloud_reproducible() {
        let pts: Vec<_> = (0..20_000).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts);
        let (_, a) = subsample(&cloud, 13_000, 3).unwrap();
        let (_, b) = subsample(&cloud, 13_000, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 13_000);
    }
}
