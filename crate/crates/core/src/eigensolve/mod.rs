//! Smallest eigenpairs of `L φ = λ B φ` for a symmetric sparse `L` and a
//! positive diagonal `B`.
//!
//! The problem is reduced to the standard symmetric problem
//! `B^{-1/2} L B^{-1/2} y = λ y` with `φ = B^{-1/2} y`. Small problems are
//! solved densely; larger ones by Chebyshev-filtered subspace iteration.

mod dense;
mod filtered;
mod modal;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cloud::fmt_sig9;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

pub use modal::{fiedler_extent, fiedler_extent_from_vector, modal_lengths, FiedlerExtent};

/// Below this size the dense solver is used under [`SolverMethod::Auto`].
pub const DENSE_LIMIT: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Seed of the random starting block of the iterative solver.
pub const STARTING_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Auto,
    Dense,
    Filtered,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "filtered" => Ok(Self::Filtered),
            _ => Err(Error::InvalidArgument(format!("unknown solver method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on `‖Lφ − λBφ‖ / ‖Bφ‖` for every returned pair.
    pub tol: f64,
    pub method: SolverMethod,
    /// Operator applications allowed before giving up. Defaults to
    /// `50 · count · √n`.
    pub max_matvecs: Option<usize>,
    /// Upper bound on the Chebyshev filter degree.
    pub max_filter_degree: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            method: SolverMethod::Auto,
            max_matvecs: None,
            max_filter_degree: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is `φ_i`.
    pub eigenvectors: DMatrix<f64>,
    /// Columns satisfy `φᵀ B φ = 1`.
    pub b_normalized: bool,
    /// Relative residual `‖Lφ − λBφ‖ / ‖Bφ‖` per pair.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub method: SolverMethod,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// First row: eigenvalues; then one row per vertex.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let row = |vals: &mut dyn Iterator<Item = f64>| vals.map(fmt_sig9).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", row(&mut self.eigenvalues.iter().copied()));
        for i in 0..self.n() {
            let _ = writeln!(out, "{}", row(&mut self.eigenvectors.row(i).iter().copied()));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Smallest `count` eigenpairs of `L φ = λ B φ`.
pub fn solve_smallest(l: &SparseSymmetric, b: &[f64], count: usize, opts: &SolverOptions) -> Result<SpectralEmbedding> {
    let n = l.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("B entry {i} is {v}; must be positive")));
    }
    if count == 0 || count > n {
        return Err(Error::Precondition(format!("requested {count} eigenpairs of a size-{n} problem")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let scale: Vec<f64> = b.iter().map(|v| 1.0 / v.sqrt()).collect();
    let reduced = l.scaled(&scale);

    let use_dense = match opts.method {
        SolverMethod::Dense => true,
        SolverMethod::Filtered => false,
        SolverMethod::Auto => n < DENSE_LIMIT || filtered::block_size(count) * 3 > n,
    };
    let (values, mut y, matvecs, method) = if use_dense {
        let (v, y) = dense::smallest(&reduced, count);
        (v, y, 0, SolverMethod::Dense)
    } else {
        let bmin = b.iter().copied().fold(f64::INFINITY, f64::min);
        let bmax = b.iter().copied().fold(0.0, f64::max);
        let budget = opts
            .max_matvecs
            .unwrap_or_else(|| (50.0 * count as f64 * (n as f64).sqrt()).ceil() as usize);
        let target = opts.tol * (bmin / bmax).sqrt();
        let (v, y, mv) = filtered::smallest(&reduced, count, target, budget, opts.max_filter_degree)?;
        (v, y, mv, SolverMethod::Filtered)
    };

    for c in 0..count {
        let mut col = y.column_mut(c);
        for (v, s) in col.iter_mut().zip(&scale) {
            *v *= s;
        }
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    let residuals = residuals(l, b, &values, &y);
    Ok(SpectralEmbedding {
        eigenvalues: values,
        eigenvectors: y,
        b_normalized: true,
        residuals,
        matvecs,
        method,
    })
}

fn residuals(l: &SparseSymmetric, b: &[f64], values: &[f64], phi: &DMatrix<f64>) -> Vec<f64> {
    let n = l.n();
    let mut lphi = vec![0.0; n];
    (0..values.len())
        .map(|c| {
            let col = phi.column(c);
            l.apply_into(col.as_slice(), &mut lphi);
            let mut r2 = 0.0;
            let mut b2 = 0.0;
            for i in 0..n {
                let bphi = b[i] * col[i];
                r2 += (lphi[i] - values[c] * bphi).powi(2);
                b2 += bphi * bphi;
            }
            (r2 / b2).sqrt()
        })
        .collect()
}

/// Columns `φ_1 .. φ_m` (the constant mode is dropped).
pub fn eigenmaps(emb: &SpectralEmbedding, m: usize) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if m + 1 > emb.count() {
        return Err(Error::Precondition(format!(
            "{m} eigenmaps need {} computed pairs, have {}",
            m + 1,
            emb.count()
        )));
    }
    Ok(emb.eigenvectors.columns(1, m).into_owned())
}

#[cfg(test)]
mod tests;
