//! Score maps, ground-truth masks and their image formats.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{fmt_sig9, PointCloud};
use crate::error::{Error, Result};
use crate::matching::PointScore;

/// Per-pixel anomaly scores in row-major order. Pixels without a point
/// carry 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    /// Ratio of foreground points to kept points; 1 without subsampling.
    pub subsample_factor: f64,
}

impl ScoreMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
            subsample_factor: 1.0,
        }
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let map = Self {
            height,
            width,
            values,
            subsample_factor: 1.0,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.height * self.width {
            return Err(Error::DimensionMismatch {
                expected: self.height * self.width,
                got: self.values.len(),
            });
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("score {v} is not finite and non-negative")));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Side of the square dilation element implied by the subsample factor.
    pub fn element_size(&self) -> usize {
        element_size(self.subsample_factor)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// One comma-separated line of scores per image row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|&v| fmt_sig9(v)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Binary 16-bit PGM with scores scaled so the maximum maps to 65535.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let max = self.max();
        let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &v in &self.values {
            let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = if has_extension(path, "pgm") {
            self.to_pgm16()
        } else {
            self.to_csv().into_bytes()
        };
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Reads a CSV grid or a PGM image (raw gray levels become scores).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (height, width, values) = read_grid(path.as_ref())?;
        Self::from_values(height, width, values)
    }
}

/// Binary anomaly mask split into 8-connected regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub height: usize,
    pub width: usize,
    /// Row-major pixel indices of every connected anomalous region.
    pub regions: Vec<Vec<usize>>,
    pub defect_free: bool,
}

impl GroundTruth {
    pub fn from_mask(height: usize, width: usize, mask: &[bool]) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                got: mask.len(),
            });
        }
        let mut label = vec![usize::MAX; mask.len()];
        let mut regions = Vec::new();
        for start in 0..mask.len() {
            if !mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = regions.len();
            let mut region = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < region.len() {
                let p = region[head];
                head += 1;
                let (r, c) = (p / width, p % width);
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let (nr, nc) = (r as isize + dr, c as isize + dc);
                        if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                            continue;
                        }
                        let q = nr as usize * width + nc as usize;
                        if mask[q] && label[q] == usize::MAX {
                            label[q] = id;
                            region.push(q);
                        }
                    }
                }
            }
            region.sort_unstable();
            regions.push(region);
        }
        Ok(Self {
            height,
            width,
            defect_free: regions.is_empty(),
            regions,
        })
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.height * self.width];
        for &p in self.regions.iter().flatten() {
            m[p] = true;
        }
        m
    }

    pub fn anomalous_pixels(&self) -> usize {
        self.regions.iter().map(Vec::len).sum()
    }

    /// Reads a CSV grid or PGM; any non-zero value marks an anomalous pixel.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (height, width, values) = read_grid(path.as_ref())?;
        let mask: Vec<bool> = values.iter().map(|&v| v != 0.0).collect();
        Self::from_mask(height, width, &mask)
    }

    /// CSV grid of 0/1 values.
    pub fn to_csv(&self) -> String {
        let mask = self.mask();
        let mut out = String::new();
        for row in mask.chunks(self.width.max(1)) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn element_size(subsample_factor: f64) -> usize {
    subsample_factor.round().max(1.0) as usize
}

/// Writes each scored point at its grid cell and dilates with a square
/// element whose side is the rounded subsample factor (foreground points
/// over kept points).
///
/// `scores` index the subsampled cloud; `kept` maps those indices back to
/// positions in `cloud`, the cloud that carries the grid indices.
pub fn back_project(
    scores: &[PointScore],
    cloud: &PointCloud,
    kept: &[usize],
    shape: (usize, usize),
    subsample_factor: f64,
) -> Result<ScoreMap> {
    let grid = cloud
        .grid_index
        .as_ref()
        .ok_or_else(|| Error::Precondition("back-projection needs grid indices".into()))?;
    if !(subsample_factor.is_finite() && subsample_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!("subsample factor {subsample_factor} must be at least 1")));
    }
    let (height, width) = shape;
    let mut raw = ScoreMap::zeros(height, width);
    let mut written = vec![false; height * width];
    for s in scores {
        let &pos = kept.get(s.target_index).ok_or_else(|| {
            Error::InvalidArgument(format!("score index {} outside kept indices", s.target_index))
        })?;
        let &(r, c) = grid
            .get(pos)
            .ok_or_else(|| Error::InvalidArgument(format!("kept index {pos} outside cloud")))?;
        if r >= height || c >= width {
            return Err(Error::InvalidArgument(format!(
                "grid cell ({r}, {c}) outside {height}x{width} image"
            )));
        }
        if !(s.score.is_finite() && s.score >= 0.0) {
            return Err(Error::InvalidArgument(format!("score {} is not finite and non-negative", s.score)));
        }
        let p = r * width + c;
        raw.values[p] = raw.values[p].max(s.score);
        written[p] = true;
    }
    let size = element_size(subsample_factor);
    let mut map = if size == 1 { raw } else { dilate(&raw, &written, size) };
    map.subsample_factor = subsample_factor;
    Ok(map)
}

/// Grayscale dilation of the written pixels with a `size`×`size` square.
/// Offsets run from `-(size-1)/2` to `size/2` so even sizes extend one
/// pixel further toward larger indices.
fn dilate(src: &ScoreMap, written: &[bool], size: usize) -> ScoreMap {
    let lo = (size as isize - 1) / 2;
    let hi = size as isize / 2;
    let (h, w) = (src.height as isize, src.width as isize);
    let mut out = ScoreMap::zeros(src.height, src.width);
    for r in 0..h {
        for c in 0..w {
            let p = (r * w + c) as usize;
            if !written[p] {
                continue;
            }
            let v = src.values[p];
            for rr in (r - lo).max(0)..=(r + hi).min(h - 1) {
                for cc in (c - lo).max(0)..=(c + hi).min(w - 1) {
                    let q = (rr * w + cc) as usize;
                    out.values[q] = out.values[q].max(v);
                }
            }
        }
    }
    out
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn read_grid(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(0, "grid file is not UTF-8"))?;
        parse_csv_grid(&text)
    }
}

/// Parses a comma- or whitespace-separated numeric grid.
pub fn parse_csv_grid(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("'{f}' is not a number"))))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(i + 1, format!("expected {w} columns, found {}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::parse(0, "empty grid"))?;
    Ok((height, width, values))
}

/// Parses ASCII (P2) or binary (P5) PGM with 8- or 16-bit samples.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(0, "truncated PGM header"));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(0, format!("bad PGM header field '{s}'")));
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(0, format!("PGM maxval {maxval} out of range")));
    }
    let count = width * height;
    let values: Vec<f64> = match header[0].as_str() {
        "P5" => {
            pos += 1;
            let bpp = if maxval > 255 { 2 } else { 1 };
            let data = bytes
                .get(pos..pos + count * bpp)
                .ok_or_else(|| Error::parse(0, "truncated PGM data"))?;
            if bpp == 2 {
                data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64).collect()
            } else {
                data.iter().map(|&b| b as f64).collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let v: Vec<f64> = text
                .split_ascii_whitespace()
                .take(count)
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(0, format!("bad PGM sample '{f}'"))))
                .collect::<Result<_>>()?;
            if v.len() != count {
                return Err(Error::parse(0, "truncated PGM data"));
            }
            v
        }
        other => return Err(Error::parse(0, format!("unsupported PGM magic '{other}'"))),
    };
    Ok((height, width, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn grid_cloud(cells: &[(usize, usize)]) -> PointCloud {
        let pts = cells.iter().map(|&(r, c)| Point3::new(c as f64, r as f64, 0.0)).collect();
        PointCloud::with_grid(pts, cells.to_vec()).unwrap()
    }

    #[test]
    fn single_point_without_subsampling() {
        let cloud = grid_cloud(&[(2, 3), (0, 0)]);
        let scores = [PointScore { target_index: 0, score: 0.7 }];
        let map = back_project(&scores, &cloud, &[0, 1], (5, 6), 1.0).unwrap();
        for r in 0..5 {
            for c in 0..6 {
                let expected = if (r, c) == (2, 3) { 0.7 } else { 0.0 };
                assert_eq!(map.get(r, c), expected);
            }
        }
    }

    #[test]
    fn quarter_subsample_spreads_to_four_by_four() {
        let cloud = grid_cloud(&[(5, 5)]);
        let scores = [PointScore { target_index: 0, score: 1.5 }];
        let map = back_project(&scores, &cloud, &[0], (12, 12), 4.0).unwrap();
        assert_eq!(map.element_size(), 4);
        let lit: Vec<(usize, usize)> = (0..12)
            .flat_map(|r| (0..12).map(move |c| (r, c)))
            .filter(|&(r, c)| map.get(r, c) > 0.0)
            .collect();
        assert_eq!(lit.len(), 16);
        assert!(lit.iter().all(|&(r, c)| (4..=7).contains(&r) && (4..=7).contains(&c)));
    }

    #[test]
    fn overlapping_dilations_take_the_max() {
        let cloud = grid_cloud(&[(3, 3), (3, 4)]);
        let scores = [
            PointScore { target_index: 0, score: 0.2 },
            PointScore { target_index: 1, score: 0.9 },
        ];
        let map = back_project(&scores, &cloud, &[0, 1], (8, 8), 3.0).unwrap();
        assert_eq!(map.get(3, 3), 0.9);
        assert_eq!(map.get(3, 2), 0.2);
        assert_eq!(map.get(2, 5), 0.9);
    }

    #[test]
    fn missing_grid_is_rejected() {
        let cloud = PointCloud::new(vec![Point3::origin()]);
        let err = back_project(&[], &cloud, &[0], (2, 2), 1.0).unwrap_err();
        assert_eq!(err.kind(), "precondition");
    }

    #[test]
    fn eight_connected_regions() {
        #[rustfmt::skip]
        let mask = [
            true,  false, false, false,
            false, true,  false, true,
            false, false, false, true,
        ];
        let gt = GroundTruth::from_mask(3, 4, &mask).unwrap();
        assert_eq!(gt.regions, vec![vec![0, 5], vec![7, 11]]);
        assert!(!gt.defect_free);
        assert!(GroundTruth::from_mask(2, 2, &[false; 4]).unwrap().defect_free);
    }

    #[test]
    fn pgm_and_csv_round_trips() {
        let map = ScoreMap::from_values(2, 3, vec![0.0, 1.0, 2.0, 0.5, 0.25, 2.0]).unwrap();
        let (h, w, v) = parse_pgm(&map.to_pgm16()).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(v[2], 65535.0);
        assert_eq!(v[3], (0.25f64 * 65535.0).round());
        let (h, w, v) = parse_csv_grid(&map.to_csv()).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(v, map.values);
        let (_, _, v) = parse_pgm(b"P2\n# c\n2 1\n255\n0 7\n").unwrap();
        assert_eq!(v, vec![0.0, 7.0]);
    }
}
