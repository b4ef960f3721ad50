//! Principal axes of a point set.
//!
//! Axes are sorted by decreasing variance. Each axis is oriented so that the
//! coordinate distribution along it has non-negative skewness; a skewness of
//! (numerically) zero falls back to making the axis' largest component
//! positive. This makes frames reproducible across runs and rigid motions of
//! the input.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaFrame {
    pub centroid: Point3<f64>,
    /// Columns are the principal axes, largest variance first.
    pub axes: Matrix3<f64>,
    pub variances: Vector3<f64>,
}

impl PcaFrame {
    pub fn fit(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = points.len() as f64;
        let centroid = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n);
        let mut cov = Matrix3::zeros();
        for p in points {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        cov /= n;

        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut axes = Matrix3::zeros();
        let mut variances = Vector3::zeros();
        for (slot, &src) in order.iter().enumerate() {
            let mut axis: Vector3<f64> = eig.eigenvectors.column(src).normalize();
            let skew: f64 = points
                .iter()
                .map(|p| (p - centroid).dot(&axis).powi(3))
                .sum::<f64>()
                / n;
            let var = eig.eigenvalues[src].max(0.0);
            let skew_tol = 1e-12 * var.powf(1.5).max(f64::MIN_POSITIVE);
            let flip = if skew.abs() > skew_tol {
                skew < 0.0
            } else {
                let imax = axis.iamax();
                axis[imax] < 0.0
            };
            if flip {
                axis = -axis;
            }
            axes.set_column(slot, &axis);
            variances[slot] = var;
        }
        Ok(Self {
            centroid,
            axes,
            variances,
        })
    }

    /// Coordinates of `p` in this frame.
    pub fn project(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.axes.transpose() * (p - self.centroid)
    }

    pub fn unproject(&self, c: &Vector3<f64>) -> Point3<f64> {
        self.centroid + self.axes * c
    }

    /// Fails when the point set spans fewer than three dimensions.
    pub fn require_full_rank(&self) -> Result<()> {
        let largest = self.variances[0];
        if !(largest > 0.0) || self.variances[2] <= 1e-12 * largest {
            return Err(Error::Degenerate(format!(
                "covariance has rank < 3 (variances {:.3e}, {:.3e}, {:.3e})",
                self.variances[0], self.variances[1], self.variances[2]
            )));
        }
        Ok(())
    }
}
