//! Global and point-wise comparison of aligned embeddings.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cloud::fmt_sig9;
use crate::coupling::{CoupledEmbedding, CouplingPlan};
use crate::error::{Error, Result};

/// Columns whose residual after projection falls below this fraction of the
/// original norm are treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedBasis {
    /// Orthonormal columns spanning the restricted eigenmodes.
    pub q: DMatrix<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Orthonormal basis of `slice[rows, :]` by Gram–Schmidt with
/// re-orthogonalization; dependent columns are dropped.
pub fn restricted_basis(slice: &DMatrix<f64>, rows: &[usize]) -> Result<RestrictedBasis> {
    let m = slice.ncols();
    if m == 0 {
        return Err(Error::InvalidArgument("embedding has no columns".into()));
    }
    if rows.len() < m {
        return Err(Error::Precondition(format!(
            "{} restricted rows cannot span {m} modes; increase l or decrease m",
            rows.len()
        )));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= slice.nrows()) {
        return Err(Error::InvalidArgument(format!("row {r} out of range {}", slice.nrows())));
    }
    let a = slice.select_rows(rows);
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let orig = a.column(j).into_owned();
        let norm0 = orig.norm();
        let mut v = orig;
        for _ in 0..2 {
            for q in &cols {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 > 0.0 && norm > RANK_TOL * norm0 {
            cols.push(v / norm);
        }
    }
    let rank = cols.len();
    let q = if rank == 0 {
        DMatrix::zeros(rows.len(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(RestrictedBasis {
        q,
        rank,
        rank_deficient: rank < m,
    })
}

/// Principal angles between the column spaces of two orthonormal bases,
/// ascending. Small angles come from sines and large ones from cosines, so
/// both ends of the range are resolved to machine precision.
pub fn principal_angles(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Result<Vec<f64>> {
    if qa.nrows() != qb.nrows() {
        return Err(Error::DimensionMismatch {
            expected: qa.nrows(),
            got: qb.nrows(),
        });
    }
    let (big, small) = if qa.ncols() >= qb.ncols() { (qa, qb) } else { (qb, qa) };
    let r = small.ncols();
    if r == 0 {
        return Ok(Vec::new());
    }
    let m = big.transpose() * small;
    let mut cosines: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    let residual = small - big * &m;
    let mut sines: Vec<f64> = residual.svd(false, false).singular_values.iter().copied().collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    sines.sort_by(f64::total_cmp);
    sines.resize(r, 0.0);
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let (c, s) = (c.clamp(0.0, 1.0), s.clamp(0.0, 1.0));
            if s * s < 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

/// Geodesic distance `sqrt(Σ θ_i²)` on the Grassmannian.
pub fn grassmann_distance(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(qa, qb)?.iter().map(|t| t * t).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Global,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistance {
    pub source: usize,
    pub name: String,
    pub distance: f64,
    pub target_rank: usize,
    pub source_rank: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointScore {
    pub target_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMeta {
    pub m: usize,
    pub l: f64,
    pub k: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub mode: MatchMode,
    pub per_candidate: Vec<CandidateDistance>,
    pub per_point: Vec<PointScore>,
    /// Index of the closest source; the first one on ties.
    pub best: Option<usize>,
    pub meta: MatchMeta,
}

impl MatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// `target_index,score` rows of a point-wise report.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target_index,score\n");
        for p in &self.per_point {
            let _ = writeln!(out, "{},{}", p.target_index, fmt_sig9(p.score));
        }
        out
    }
}

fn meta(coupled: &CoupledEmbedding, plan: &CouplingPlan) -> MatchMeta {
    MatchMeta {
        m: coupled.m,
        l: plan.fraction,
        k: None,
        alpha: plan.alpha,
        seed: plan.seed,
    }
}

/// Grassmann distance between the target and every source, restricted to
/// the cross-connected vertices.
pub fn global_match(coupled: &CoupledEmbedding, plan: &CouplingPlan) -> Result<MatchReport> {
    if plan.source_count() + 1 != coupled.slices.len() {
        return Err(Error::DimensionMismatch {
            expected: coupled.slices.len() - 1,
            got: plan.source_count(),
        });
    }
    let qt = restricted_basis(coupled.target(), &plan.target_subset)?;
    let mut per_candidate = Vec::with_capacity(plan.source_count());
    for (k, matches) in plan.source_matches.iter().enumerate() {
        let qs = restricted_basis(coupled.source(k), matches)?;
        let distance = grassmann_distance(&qt.q, &qs.q)?;
        per_candidate.push(CandidateDistance {
            source: k,
            name: format!("source_{k}"),
            distance,
            target_rank: qt.rank,
            source_rank: qs.rank,
            rank_deficient: qt.rank_deficient || qs.rank_deficient || qt.rank != qs.rank,
        });
    }
    let mut best: Option<usize> = None;
    for c in &per_candidate {
        if best.is_none_or(|b| c.distance < per_candidate[b].distance) {
            best = Some(c.source);
        }
    }
    Ok(MatchReport {
        mode: MatchMode::Global,
        per_candidate,
        per_point: Vec::new(),
        best,
        meta: meta(coupled, plan),
    })
}

/// `1 − cos` between the embeddings of every cross-connected pair.
pub fn pointwise_scores(coupled: &CoupledEmbedding, plan: &CouplingPlan, source_index: usize) -> Result<Vec<PointScore>> {
    let matches = plan
        .source_matches
        .get(source_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no source {source_index}")))?;
    if source_index + 1 >= coupled.slices.len() {
        return Err(Error::InvalidArgument(format!("embedding has no source {source_index}")));
    }
    let t = coupled.target();
    let s = coupled.source(source_index);
    let mut zero_rows = 0usize;
    let scores = plan
        .target_subset
        .iter()
        .zip(matches)
        .map(|(&ti, &si)| {
            let u = t.row(ti);
            let v = s.row(si);
            let denom = u.norm() * v.norm();
            let score = if denom > 0.0 {
                (1.0 - u.dot(&v) / denom).clamp(0.0, 2.0)
            } else {
                zero_rows += 1;
                1.0
            };
            PointScore { target_index: ti, score }
        })
        .collect();
    if zero_rows > 0 {
        log::warn!("{zero_rows} point pairs had a zero-norm embedding row; scored 1");
    }
    Ok(scores)
}

pub fn pointwise_report(coupled: &CoupledEmbedding, plan: &CouplingPlan, source_index: usize) -> Result<MatchReport> {
    Ok(MatchReport {
        mode: MatchMode::Pointwise,
        per_candidate: Vec::new(),
        per_point: pointwise_scores(coupled, plan, source_index)?,
        best: None,
        meta: meta(coupled, plan),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn orthonormal_input_spans_same_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random(30, 4, &mut rng).qr().q();
        let rows: Vec<usize> = (0..30).collect();
        let b = restricted_basis(&q, &rows).unwrap();
        assert_eq!(b.rank, 4);
        assert!(grassmann_distance(&q, &b.q).unwrap() <= 1e-10);
    }

    #[test]
    fn duplicated_column_drops_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = random(20, 4, &mut rng);
        let c = a.column(1).into_owned();
        a.set_column(3, &c);
        let b = restricted_basis(&a, &(0..20).collect::<Vec<_>>()).unwrap();
        assert_eq!(b.rank, 3);
        assert!(b.rank_deficient);
        assert!(matches!(restricted_basis(&a, &[0, 1, 2]), Err(Error::Precondition(_))));
    }

    #[test]
    fn random_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(50, 5, &mut rng);
        let b = restricted_basis(&a, &(0..50).collect::<Vec<_>>()).unwrap();
        assert!((b.q.transpose() * &b.q - DMatrix::identity(5, 5)).amax() <= 1e-12);
    }

    #[test]
    fn distance_basics() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((grassmann_distance(&e1, &e2).unwrap() - FRAC_PI_2).abs() <= 1e-12);
        assert_eq!(grassmann_distance(&e1, &e1).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random(40, 6, &mut rng).qr().q();
        let r = random(6, 6, &mut rng).qr().q();
        assert!(grassmann_distance(&q, &(&q * r)).unwrap() <= 1e-10);
        assert!(grassmann_distance(&q, &random(39, 6, &mut rng)).is_err());
    }

    #[test]
    fn tiny_angle_is_resolved() {
        let t = 1e-9f64;
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let d = grassmann_distance(&a, &b).unwrap();
        assert!((d - t).abs() <= 1e-20, "{d}");
    }

    #[test]
    fn unequal_ranks_use_the_smaller() {
        let a = DMatrix::from_columns(&[DVector::from_vec(vec![1.0, 0.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, 0.0])]);
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert_eq!(principal_angles(&a, &b).unwrap().len(), 1);
        assert!(grassmann_distance(&a, &b).unwrap() < 1e-15);
    }

    fn embedding(t: DMatrix<f64>, s: DMatrix<f64>) -> CoupledEmbedding {
        use crate::eigensolve::{SolverMethod, SpectralEmbedding};
        let (nt, ns, m) = (t.nrows(), s.nrows(), t.ncols());
        CoupledEmbedding {
            global: SpectralEmbedding {
                eigenvalues: vec![0.0; m + 1],
                eigenvectors: DMatrix::zeros(nt + ns, m + 1),
                b_normalized: true,
                residuals: vec![0.0; m + 1],
                matvecs: 0,
                method: SolverMethod::Dense,
            },
            slices: vec![t, s],
            offsets: vec![0, nt, nt + ns],
            m,
        }
    }

    #[test]
    fn cosine_scores() {
        let t = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 0.0, 3.0, -1.0, 0.0, 0.0]);
        let s = DMatrix::from_row_slice(4, 2, &[2.0, 4.0, -1.0, 0.0, 1.0, 3.0, 1.0, 1.0]);
        let plan = CouplingPlan {
            target_subset: vec![0, 1, 2, 3],
            source_matches: vec![vec![0, 1, 2, 3]],
            fraction: 1.0,
            alpha: 1.0,
            seed: 0,
        };
        let sc = pointwise_scores(&embedding(t, s), &plan, 0).unwrap();
        let got: Vec<f64> = sc.iter().map(|p| p.score).collect();
        assert!(got[0].abs() < 1e-15);
        assert_eq!(got[1], 2.0);
        assert!((got[2] - 1.0).abs() < 1e-15);
        assert_eq!(got[3], 1.0);
        assert!(pointwise_scores(&embedding(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)), &plan, 1).is_err());
    }
}
