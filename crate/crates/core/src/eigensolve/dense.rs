use nalgebra::{DMatrix, SymmetricEigen};

use crate::sparse::SparseSymmetric;

/// Smallest `count` eigenpairs of a symmetric matrix by full dense
/// decomposition. Returns ascending eigenvalues and orthonormal vectors.
pub(super) fn smallest(a: &SparseSymmetric, count: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut m = a.to_dense();
    let mt = m.transpose();
    m += mt;
    m *= 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    order.truncate(count);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.n(), count, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
