//! Chebyshev-filtered subspace iteration for the lowest eigenpairs of a
//! symmetric positive semidefinite operator.
//!
//! Each sweep applies a Chebyshev polynomial that damps the interval
//! `[cut, upper]` and amplifies everything below `cut`, re-orthonormalizes,
//! and performs a Rayleigh–Ritz projection. `upper` is a Gershgorin bound and
//! `cut` is the largest Ritz value of the block, so the block contracts onto
//! the wanted invariant subspace.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::STARTING_SEED;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

/// Target amplification of the filter at the bottom of the spectrum relative
/// to the damped interval; keeps wanted directions well above round-off.
const AMPLIFICATION_LOG: f64 = 23.0;
const MIN_DEGREE: usize = 4;

pub(super) fn block_size(count: usize) -> usize {
    count + (count.div_ceil(5)).max(10)
}

pub(super) fn smallest(
    a: &SparseSymmetric,
    count: usize,
    tol: f64,
    budget: usize,
    max_degree: usize,
) -> Result<(Vec<f64>, DMatrix<f64>, usize)> {
    let n = a.n();
    let s = block_size(count).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(STARTING_SEED);
    let x0 = DMatrix::from_fn(n, s, |_, _| StandardNormal.sample(&mut rng));
    let mut x = x0.qr().q();
    let mut ax = DMatrix::zeros(n, s);
    a.apply_block(&x, &mut ax);
    let mut matvecs = s;
    let upper = a.gershgorin_upper() * (1.0 + 1e-6) + f64::MIN_POSITIVE;
    let max_degree = max_degree.max(MIN_DEGREE);

    loop {
        let theta = rayleigh_ritz(&mut x, &mut ax);
        let mut converged = 0;
        for i in 0..count {
            let r = (ax.column(i) - x.column(i) * theta[i]).norm();
            if r > tol {
                break;
            }
            converged += 1;
        }
        if converged == count {
            let vectors = x.columns(0, count).into_owned();
            return Ok((theta[..count].to_vec(), vectors, matvecs));
        }
        if matvecs >= budget {
            return Err(Error::NonConvergence {
                converged,
                requested: count,
                matvecs,
            });
        }

        let low = theta[0].min(0.0);
        let cut = theta[s - 1].min(0.5 * (theta[s - 1] + upper));
        let half_width = 0.5 * (upper - cut);
        let center = 0.5 * (upper + cut);
        let x_low = (center - low) / half_width;
        let degree = ((AMPLIFICATION_LOG / x_low.acosh()).ceil() as usize).clamp(MIN_DEGREE, max_degree);

        let y = chebyshev_filter(a, &x, degree, low, cut, upper);
        matvecs += degree * s;
        x = y.qr().q();
        a.apply_block(&x, &mut ax);
        matvecs += s;
    }
}

/// Rotates `x` (and `ax = A x`) onto Ritz vectors; returns ascending Ritz values.
fn rayleigh_ritz(x: &mut DMatrix<f64>, ax: &mut DMatrix<f64>) -> Vec<f64> {
    let mut h = x.transpose() * &*ax;
    let ht = h.transpose();
    h += ht;
    h *= 0.5;
    let eig = SymmetricEigen::new(h);
    let s = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let w = DMatrix::from_fn(s, s, |r, c| eig.eigenvectors[(r, order[c])]);
    *x = &*x * &w;
    *ax = &*ax * &w;
    order.iter().map(|&i| eig.eigenvalues[i]).collect()
}

/// Scaled Chebyshev filter of the given degree damping `[cut, upper]`,
/// normalized so the value at `low` stays near one.
fn chebyshev_filter(a: &SparseSymmetric, x: &DMatrix<f64>, degree: usize, low: f64, cut: f64, upper: f64) -> DMatrix<f64> {
    let e = 0.5 * (upper - cut);
    let c = 0.5 * (upper + cut);
    let mut sigma = e / (low - c);
    let tau = 2.0 / sigma;

    let (n, s) = x.shape();
    let mut tmp = DMatrix::zeros(n, s);
    a.apply_block(x, &mut tmp);
    let mut y = (&tmp - x * c) * (sigma / e);
    let mut prev = x.clone();
    for _ in 1..degree {
        let sigma_next = 1.0 / (tau - sigma);
        a.apply_block(&y, &mut tmp);
        let (f, g) = (2.0 * sigma_next / e, sigma * sigma_next);
        // prev <- (A y - c y) f - prev g, then becomes the newest iterate.
        prev.zip_zip_apply(&tmp, &y, |p, t, yv| *p = (t - c * yv) * f - *p * g);
        std::mem::swap(&mut prev, &mut y);
        sigma = sigma_next;
    }
    y
}
