use nalgebra::{Matrix3, SymmetricEigen};

use crate::Vec3;

/// Eigen-decomposition of a symmetric 3×3 matrix, eigenvalues descending.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Eigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

pub(crate) fn sym_eigen(m: &Matrix3<f64>) -> Eigen3 {
    let eig = SymmetricEigen::new(*m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.map(|i| eig.eigenvalues[i]);
    let vectors = idx.map(|i| eig.eigenvectors.column(i).into_owned());
    Eigen3 { values, vectors }
}

/// Scatter matrix `Σ wᵢ (pᵢ − c)(pᵢ − c)ᵀ / Σ wᵢ`.
pub(crate) fn weighted_scatter(points: impl Iterator<Item = (Vec3, f64)>, center: &Vec3) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    let mut total = 0.0;
    for (p, w) in points {
        let d = p - center;
        m += w * d * d.transpose();
        total += w;
    }
    if total > 0.0 {
        m / total
    } else {
        m
    }
}
