use std::ffi::CStr;
use std::ptr;

use couplap::cloud::PointCloud;
use couplap::coupling::{couple_and_solve, plan_coupling, CouplingParams};
use couplap::matching::{global_match, pointwise_scores};
use couplap_ffi::*;
use nalgebra::Point3;

fn grid_cloud(nx: usize, ny: usize, bend: f64) -> Vec<f64> {
    let mut xyz = Vec::with_capacity(nx * ny * 3);
    for i in 0..nx {
        for j in 0..ny {
            let x = i as f64 * 0.1;
            let y = j as f64 * 0.13;
            xyz.extend_from_slice(&[x, y, bend * x * x + 0.01 * ((i * 7 + j * 3) % 5) as f64]);
        }
    }
    xyz
}

unsafe fn make(xyz: &[f64]) -> *mut CouplapCloud {
    let mut c = ptr::null_mut();
    assert_eq!(couplap_cloud_from_xyz(xyz.as_ptr(), xyz.len() / 3, &mut c), CouplapStatus::Ok);
    c
}

fn last_error() -> String {
    let p = couplap_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn eigenmaps_round_trip() {
    unsafe {
        let cloud = make(&grid_cloud(12, 10, 0.2));
        assert_eq!(couplap_cloud_len(cloud), 120);
        let mut emb = ptr::null_mut();
        assert_eq!(couplap_eigenmaps(cloud, 8, 5, &mut emb), CouplapStatus::Ok);
        assert_eq!(couplap_embedding_rows(emb), 120);
        assert_eq!(couplap_embedding_count(emb), 6);
        let mut vals = [0.0; 6];
        assert_eq!(couplap_embedding_eigenvalues(emb, vals.as_mut_ptr(), 6), CouplapStatus::Ok);
        assert!(vals[0].abs() < 1e-8);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let mut vecs = vec![0.0; 120 * 6];
        assert_eq!(couplap_embedding_vectors(emb, vecs.as_mut_ptr(), vecs.len()), CouplapStatus::Ok);
        assert!(vecs.iter().all(|v| v.is_finite()));

        let mut short = [0.0; 3];
        assert_eq!(
            couplap_embedding_eigenvalues(emb, short.as_mut_ptr(), 3),
            CouplapStatus::BufferTooSmall
        );
        assert!(last_error().contains("6 needed"));

        couplap_embedding_free(emb);
        couplap_cloud_free(cloud);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(couplap_cloud_from_xyz(ptr::null(), 4, &mut c), CouplapStatus::NullPointer);
        assert_eq!(couplap_cloud_from_xyz(ptr::null(), 0, &mut c), CouplapStatus::EmptyCloud);
        let nan = [0.0, f64::NAN, 1.0];
        assert_eq!(couplap_cloud_from_xyz(nan.as_ptr(), 1, &mut c), CouplapStatus::InvalidArgument);
        assert!(c.is_null());

        let path = c"/nonexistent/cloud.xyz";
        assert_eq!(couplap_cloud_load(path.as_ptr(), &mut c), CouplapStatus::Io);
        assert!(last_error().contains("nonexistent"));

        // Two far-apart clusters give a disconnected graph.
        let mut xyz = grid_cloud(5, 5, 0.0);
        xyz.extend(grid_cloud(5, 5, 0.0).chunks(3).flat_map(|p| [p[0] + 100.0, p[1], p[2]]));
        let cloud = make(&xyz);
        let mut emb = ptr::null_mut();
        assert_eq!(couplap_eigenmaps(cloud, 4, 3, &mut emb), CouplapStatus::Disconnected);
        assert!(emb.is_null());
        couplap_cloud_free(cloud);

        couplap_cloud_free(ptr::null_mut());
        couplap_embedding_free(ptr::null_mut());
        assert_eq!(couplap_cloud_len(ptr::null()), 0);
    }
}

fn library_cloud(xyz: &[f64]) -> PointCloud {
    PointCloud::new(xyz.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect())
}

#[test]
fn matching_agrees_with_the_library() {
    let (txyz, sxyz, oxyz) = (grid_cloud(15, 12, 0.3), grid_cloud(15, 12, 0.3), grid_cloud(15, 12, -1.5));
    let (t, s, o) = (library_cloud(&txyz), library_cloud(&sxyz), library_cloud(&oxyz));
    let params = CouplingParams { k: 10, m: 8, ..Default::default() };
    unsafe {
        let target = make(&txyz);
        let same = make(&sxyz);
        let other = make(&oxyz);

        let sources = [same as *const _, other as *const _];
        let mut d = [0.0; 2];
        let st = couplap_global_match(target, sources.as_ptr(), 2, 10, 8, 0.5, 7, d.as_mut_ptr(), 2);
        assert_eq!(st, CouplapStatus::Ok, "{}", last_error());
        let lib_sources = [s.clone(), o.clone()];
        let plan = plan_coupling(&t, &lib_sources, 0.5, 7).unwrap();
        let (_, emb) = couple_and_solve(&t, &lib_sources, &plan, &params).unwrap();
        let report = global_match(&emb, &plan).unwrap();
        assert_eq!(d[0], report.per_candidate[0].distance);
        assert_eq!(d[1], report.per_candidate[1].distance);

        // A lone exact copy is an ideal match.
        let mut alone = [f64::NAN];
        let st = couplap_global_match(target, sources.as_ptr(), 1, 10, 8, 0.5, 7, alone.as_mut_ptr(), 1);
        assert_eq!(st, CouplapStatus::Ok);
        assert!(alone[0] < 1e-4, "{alone:?}");

        let mut scores = vec![0.0; 180];
        let st = couplap_pointwise(target, other, 10, 8, 0.5, 7, scores.as_mut_ptr(), scores.len());
        assert_eq!(st, CouplapStatus::Ok, "{}", last_error());
        let plan = plan_coupling(&t, std::slice::from_ref(&o), 0.5, 7).unwrap();
        let (_, emb) = couple_and_solve(&t, std::slice::from_ref(&o), &plan, &params).unwrap();
        let expected = pointwise_scores(&emb, &plan, 0).unwrap();
        assert_eq!(scores.iter().filter(|s| s.is_nan()).count(), 180 - expected.len());
        for p in expected {
            assert_eq!(scores[p.target_index], p.score);
        }

        let mut short = [0.0; 10];
        let st = couplap_pointwise(target, other, 10, 8, 0.5, 7, short.as_mut_ptr(), short.len());
        assert_eq!(st, CouplapStatus::BufferTooSmall);

        for c in [target, same, other] {
            couplap_cloud_free(c);
        }
    }
}

#[test]
fn pro_auc_of_a_perfect_detector() {
    let (h, w) = (8, 8);
    let mask: Vec<u8> = (0..h * w).map(|i| u8::from(i % w < 3 && i / w < 3)).collect();
    let scores: Vec<f64> = mask.iter().map(|&m| f64::from(m)).collect();
    let mut auc = f64::NAN;
    let st = unsafe { couplap_pro_auc(scores.as_ptr(), mask.as_ptr(), h, w, 0.3, &mut auc) };
    assert_eq!(st, CouplapStatus::Ok);
    assert_eq!(auc, 1.0);

    let clean = vec![0u8; h * w];
    let st = unsafe { couplap_pro_auc(scores.as_ptr(), clean.as_ptr(), h, w, 0.3, &mut auc) };
    assert_eq!(st, CouplapStatus::Precondition);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/couplap.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct CouplapCloud CouplapCloud;"));
    let v = unsafe { CStr::from_ptr(couplap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
