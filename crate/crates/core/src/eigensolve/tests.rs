use nalgebra::{DMatrix, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cloud::PointCloud;
use crate::graph::{build_graph, WeightedGraph};

/// Cyclic Jacobi eigenvalues of a dense symmetric matrix, ascending.
fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn oracle(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for e in g.edges() {
        m[(e.i, e.j)] -= e.weight;
        m[(e.j, e.i)] -= e.weight;
    }
    for i in 0..n {
        m[(i, i)] += g.degrees()[i];
    }
    let s: Vec<f64> = g.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    jacobi_eigenvalues(DMatrix::from_fn(n, n, |i, j| s[i] * m[(i, j)] * s[j]))
}

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..2.0), rng.random_range(0.0..1.0)))
            .collect(),
    )
}

fn solve(g: &WeightedGraph, count: usize, method: SolverMethod) -> SpectralEmbedding {
    let opts = SolverOptions { method, ..Default::default() };
    solve_smallest(&g.laplacian(), g.degrees(), count, &opts).unwrap()
}

fn check_invariants(g: &WeightedGraph, emb: &SpectralEmbedding) {
    let b = g.degrees();
    for w in emb.eigenvalues.windows(2) {
        assert!(w[0] <= w[1]);
    }
    assert!(emb.eigenvalues[0] >= -DEFAULT_TOL);
    assert!(emb.residuals.iter().all(|r| *r <= DEFAULT_TOL), "{:?}", emb.residuals);
    let phi = &emb.eigenvectors;
    for i in 0..emb.count() {
        for j in 0..emb.count() {
            let ip: f64 = (0..g.n()).map(|r| phi[(r, i)] * b[r] * phi[(r, j)]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((ip - expect).abs() <= 1e-8, "B-inner ({i},{j}) = {ip}");
        }
    }
}

#[test]
fn path_of_three() {
    let g = WeightedGraph::from_weights(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    for method in [SolverMethod::Dense, SolverMethod::Filtered] {
        let emb = solve(&g, 3, method);
        for (got, want) in emb.eigenvalues.iter().zip([0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{method:?}: {:?}", emb.eigenvalues);
        }
        check_invariants(&g, &emb);
        let maps = eigenmaps(&emb, 2).unwrap();
        assert_eq!(maps.ncols(), 2);
        assert_eq!(maps.column(0), emb.eigenvectors.column(1));
        assert!(matches!(eigenmaps(&emb, 3), Err(Error::Precondition(_))));
    }
}

#[test]
fn constant_kernel_vector() {
    let g = build_graph(&random_cloud(80, 3), 6, None).unwrap();
    let emb = solve(&g, 4, SolverMethod::Auto);
    assert!(emb.eigenvalues[0].abs() < 1e-10);
    let c = emb.eigenvectors.column(0);
    for v in c.iter() {
        assert!((v - c[0]).abs() < 1e-8);
    }
    assert_eq!(eigenmaps(&emb, 1).unwrap().column(0), emb.eigenvectors.column(1));
}

#[test]
fn matches_jacobi_oracle_on_both_paths() {
    for seed in 0..4 {
        let g = build_graph(&random_cloud(60, seed), 5, None).unwrap();
        let want = oracle(&g);
        for method in [SolverMethod::Dense, SolverMethod::Filtered] {
            let emb = solve(&g, 10, method);
            for (got, w) in emb.eigenvalues.iter().zip(&want) {
                assert!((got - w).abs() <= 1e-8, "{method:?} seed {seed}: {got} vs {w}");
            }
            check_invariants(&g, &emb);
        }
    }
}

#[test]
fn filtered_matches_dense_at_moderate_size() {
    let g = build_graph(&random_cloud(900, 11), 8, None).unwrap();
    let d = solve(&g, 25, SolverMethod::Dense);
    let f = solve(&g, 25, SolverMethod::Filtered);
    assert_eq!(f.method, SolverMethod::Filtered);
    for (a, b) in d.eigenvalues.iter().zip(&f.eigenvalues) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    check_invariants(&g, &f);
}

#[test]
fn deterministic_solves() {
    let g = build_graph(&random_cloud(700, 5), 8, None).unwrap();
    let a = solve(&g, 12, SolverMethod::Auto);
    let b = solve(&g, 12, SolverMethod::Auto);
    assert_eq!(a, b);
}

#[test]
fn budget_exhaustion_is_reported() {
    let g = build_graph(&random_cloud(700, 6), 8, None).unwrap();
    let opts = SolverOptions {
        method: SolverMethod::Filtered,
        max_matvecs: Some(10),
        ..Default::default()
    };
    let err = solve_smallest(&g.laplacian(), g.degrees(), 12, &opts).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { requested: 12, .. }));
}

#[test]
fn rejects_bad_inputs() {
    let g = WeightedGraph::from_weights(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let l = g.laplacian();
    let opts = SolverOptions::default();
    assert!(matches!(solve_smallest(&l, &[1.0, 0.0, 1.0], 2, &opts), Err(Error::InvalidArgument(_))));
    assert!(matches!(solve_smallest(&l, &[1.0, 2.0], 2, &opts), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(solve_smallest(&l, g.degrees(), 4, &opts), Err(Error::Precondition(_))));
}

fn segment(len: f64, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                Point3::new(t * len, 0.05 * (i % 3) as f64, 0.05 * (i % 5) as f64)
            })
            .collect(),
    )
}

#[test]
fn fiedler_extent_of_segment() {
    let c = segment(10.0, 400);
    let g = build_graph(&c, 10, None).unwrap();
    let ext = fiedler_extent(&c, &g, 1).unwrap();
    assert!((ext.length - 10.0).abs() < 0.2, "{}", ext.length);

    let r = Rotation3::from_euler_angles(0.4, 1.0, -0.3);
    let moved = c.map_points(|p| r * p + Vector3::new(1.0, 2.0, 3.0));
    let gm = build_graph(&moved, 10, None).unwrap();
    let em = fiedler_extent(&moved, &gm, 1).unwrap();
    assert!((em.length - ext.length).abs() < 1e-9);

    let emb = solve(&g, 2, SolverMethod::Auto);
    let f: Vec<f64> = emb.eigenvectors.column(1).iter().copied().collect();
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    let a = fiedler_extent_from_vector(&c, &f, 3).unwrap();
    let b = fiedler_extent_from_vector(&c, &neg, 3).unwrap();
    assert_eq!(a.length, b.length);
    assert_eq!(a.x_min, b.x_max);
    assert!(matches!(fiedler_extent_from_vector(&c, &f, 201), Err(Error::Precondition(_))));
}

#[test]
fn modal_lengths_scale_and_start_infinite() {
    let c = random_cloud(150, 9);
    let g = build_graph(&c, 8, None).unwrap();
    let emb = solve(&g, 8, SolverMethod::Auto);
    let l = modal_lengths(&c, &g, &emb).unwrap();
    assert!(l[0].is_infinite());

    let c2 = c.scaled(2.0);
    let g2 = build_graph(&c2, 8, None).unwrap();
    let e2 = solve(&g2, 8, SolverMethod::Auto);
    let l2 = modal_lengths(&c2, &g2, &e2).unwrap();
    for k in 1..l.len() {
        assert!((l2[k] - 2.0 * l[k]).abs() <= 1e-9 * l2[k]);
    }
}

#[test]
fn csv_layout() {
    let g = WeightedGraph::from_weights(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let emb = solve(&g, 3, SolverMethod::Dense);
    let csv = emb.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split(',').count(), 3);
}
