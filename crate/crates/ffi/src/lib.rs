//! C interface to the couplap library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`CouplapStatus`]; on failure the message of the last error on the
//! calling thread is available from [`couplap_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use couplap::anomaly::{pro_auc, GroundTruth, ScoreMap};
use couplap::bse::{estimate_side, BseParams, Side};
use couplap::cloud::{load_cloud, PointCloud};
use couplap::coupling::{couple_and_solve, plan_coupling, CouplingParams};
use couplap::eigensolve::{solve_smallest, SolverOptions, SpectralEmbedding};
use couplap::graph::build_graph;
use couplap::matching::{global_match, pointwise_scores};
use couplap::Error;
use nalgebra::Point3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplapStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Parse = 3,
    EmptyCloud = 4,
    DimensionMismatch = 5,
    Disconnected = 6,
    Degenerate = 7,
    NonConvergence = 8,
    InvalidArgument = 9,
    Precondition = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplapSide {
    Left = 0,
    Right = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CouplapSideResult {
    /// 0 for left, 1 for right.
    pub side: i32,
    pub d_same: f64,
    pub d_mirror: f64,
    pub margin: f64,
    pub registration_failure: bool,
}

/// Opaque point cloud.
pub struct CouplapCloud(PointCloud);

/// Opaque set of eigenpairs.
pub struct CouplapEmbedding(SpectralEmbedding);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CouplapStatus {
    match err {
        Error::Io { .. } => CouplapStatus::Io,
        Error::Parse { .. } => CouplapStatus::Parse,
        Error::EmptyCloud => CouplapStatus::EmptyCloud,
        Error::DimensionMismatch { .. } => CouplapStatus::DimensionMismatch,
        Error::Disconnected { .. } => CouplapStatus::Disconnected,
        Error::Degenerate(_) => CouplapStatus::Degenerate,
        Error::NonConvergence { .. } => CouplapStatus::NonConvergence,
        Error::InvalidArgument(_) => CouplapStatus::InvalidArgument,
        Error::Precondition(_) => CouplapStatus::Precondition,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Buffer { needed: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CouplapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CouplapStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as {name}"));
            CouplapStatus::NullPointer
        }
        Ok(Err(Failure::Buffer { needed, got })) => {
            set_error(format!("output buffer holds {got} values, {needed} needed"));
            CouplapStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".to_string());
            CouplapStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, name: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    if len < needed {
        return Err(Failure::Buffer { needed, got: len });
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn couplap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn couplap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a cloud from `n` interleaved `x, y, z` triples.
///
/// # Safety
/// `xyz` must point to `3 * n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn couplap_cloud_from_xyz(xyz: *const f64, n: usize, out: *mut *mut CouplapCloud) -> CouplapStatus {
    guard(|| {
        let data = in_slice(xyz, n * 3, "xyz")?;
        let points = data.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        let cloud = PointCloud::new(points);
        cloud.validate()?;
        store(out, CouplapCloud(cloud))
    })
}

/// Loads a cloud from a PLY, XYZ-CSV or organized-grid file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn couplap_cloud_load(path: *const c_char, out: *mut *mut CouplapCloud) -> CouplapStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
        store(out, CouplapCloud(load_cloud(path, None)?))
    })
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn couplap_cloud_len(cloud: *const CouplapCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn couplap_cloud_free(cloud: *mut CouplapCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Smallest `m + 1` eigenpairs of the cloud's kNN graph Laplacian.
///
/// # Safety
/// `cloud` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn couplap_eigenmaps(
    cloud: *const CouplapCloud,
    k: usize,
    m: usize,
    out: *mut *mut CouplapEmbedding,
) -> CouplapStatus {
    guard(|| {
        let cloud = as_ref(cloud, "cloud")?;
        let graph = build_graph(&cloud.0, k, None)?;
        let emb = solve_smallest(&graph.laplacian(), graph.degrees(), m + 1, &SolverOptions::default())?;
        store(out, CouplapEmbedding(emb))
    })
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn couplap_embedding_rows(emb: *const CouplapEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.0.n())
}

/// Number of eigenpairs, or 0 for a null handle.
///
/// # Safety
/// `emb` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn couplap_embedding_count(emb: *const CouplapEmbedding) -> usize {
    emb.as_ref().map_or(0, |e| e.0.count())
}

/// Copies the ascending eigenvalues into `out`.
///
/// # Safety
/// `emb` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn couplap_embedding_eigenvalues(emb: *const CouplapEmbedding, out: *mut f64, len: usize) -> CouplapStatus {
    guard(|| {
        let emb = &as_ref(emb, "emb")?.0;
        out_slice(out, len, emb.count(), "out")?.copy_from_slice(&emb.eigenvalues);
        Ok(())
    })
}

/// Copies the eigenvectors column-major (`rows * count` values) into `out`.
///
/// # Safety
/// `emb` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn couplap_embedding_vectors(emb: *const CouplapEmbedding, out: *mut f64, len: usize) -> CouplapStatus {
    guard(|| {
        let emb = &as_ref(emb, "emb")?.0;
        out_slice(out, len, emb.eigenvectors.len(), "out")?.copy_from_slice(emb.eigenvectors.as_slice());
        Ok(())
    })
}

/// # Safety
/// `emb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn couplap_embedding_free(emb: *mut CouplapEmbedding) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

unsafe fn collect_sources(sources: *const *const CouplapCloud, count: usize) -> Result<Vec<PointCloud>, Failure> {
    in_slice(sources, count, "sources")?
        .iter()
        .map(|&p| as_ref(p, "sources[i]").map(|c| c.0.clone()))
        .collect()
}

/// Grassmann distance between the target and each of `count` registered
/// sources, written to `distances`.
///
/// # Safety
/// Handles must be live, `sources` must hold `count` handles and
/// `distances` must hold `len` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn couplap_global_match(
    target: *const CouplapCloud,
    sources: *const *const CouplapCloud,
    count: usize,
    k: usize,
    m: usize,
    l: f64,
    seed: u64,
    distances: *mut f64,
    len: usize,
) -> CouplapStatus {
    guard(|| {
        let target = &as_ref(target, "target")?.0;
        let sources = collect_sources(sources, count)?;
        let out = out_slice(distances, len, sources.len(), "distances")?;
        let plan = plan_coupling(target, &sources, l, seed)?;
        let params = CouplingParams { k, m, ..Default::default() };
        let (_, emb) = couple_and_solve(target, &sources, &plan, &params)?;
        for c in global_match(&emb, &plan)?.per_candidate {
            out[c.source] = c.distance;
        }
        Ok(())
    })
}

/// Per-point dissimilarity in `[0, 2]` between the target and one
/// registered source. `scores` receives one value per target point; points
/// without a cross-connection get NaN.
///
/// # Safety
/// Handles must be live and `scores` must hold `len` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn couplap_pointwise(
    target: *const CouplapCloud,
    source: *const CouplapCloud,
    k: usize,
    m: usize,
    l: f64,
    seed: u64,
    scores: *mut f64,
    len: usize,
) -> CouplapStatus {
    guard(|| {
        let target = &as_ref(target, "target")?.0;
        let sources = [as_ref(source, "source")?.0.clone()];
        let out = out_slice(scores, len, target.len(), "scores")?;
        let plan = plan_coupling(target, &sources, l, seed)?;
        let params = CouplingParams { k, m, ..Default::default() };
        let (_, emb) = couple_and_solve(target, &sources, &plan, &params)?;
        out.fill(f64::NAN);
        for p in pointwise_scores(&emb, &plan, 0)? {
            out[p.target_index] = p.score;
        }
        Ok(())
    })
}

/// Side of `target` given a `source` of known side, with default parameters
/// and PCA+ICP registration.
///
/// # Safety
/// Handles must be live and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn couplap_estimate_side(
    source: *const CouplapCloud,
    source_side: CouplapSide,
    target: *const CouplapCloud,
    seed: u64,
    out: *mut CouplapSideResult,
) -> CouplapStatus {
    guard(|| {
        let source = &as_ref(source, "source")?.0;
        let target = &as_ref(target, "target")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let side = match source_side {
            CouplapSide::Left => Side::Left,
            CouplapSide::Right => Side::Right,
        };
        let params = BseParams { seed, ..Default::default() };
        let p = estimate_side(source, side, target, &params)?;
        *out = CouplapSideResult {
            side: match p.side {
                Side::Left => 0,
                Side::Right => 1,
            },
            d_same: p.d_same,
            d_mirror: p.d_mirror,
            margin: p.margin,
            registration_failure: p.registration_failure,
        };
        Ok(())
    })
}

/// Normalized area under the PRO curve up to `fpr_limit` for a row-major
/// `height * width` score map and mask (non-zero is anomalous).
///
/// # Safety
/// `scores` and `mask` must hold `height * width` values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn couplap_pro_auc(
    scores: *const f64,
    mask: *const u8,
    height: usize,
    width: usize,
    fpr_limit: f64,
    out: *mut f64,
) -> CouplapStatus {
    guard(|| {
        let n = height * width;
        let values = in_slice(scores, n, "scores")?.to_vec();
        let mask: Vec<bool> = in_slice(mask, n, "mask")?.iter().map(|&v| v != 0).collect();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let map = ScoreMap::from_values(height, width, values)?;
        let gt = GroundTruth::from_mask(height, width, &mask)?;
        *out = pro_auc(&map, &gt, fpr_limit)?;
        Ok(())
    })
}
