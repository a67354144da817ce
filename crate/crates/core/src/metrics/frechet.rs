//! Gaussian embedding statistics and the Fréchet distance between them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance below zero allowed for covariance eigenvalues.
pub const EIG_CLIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n: usize,
}

impl EmbeddingStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of `n x d` row-major embeddings.
pub fn embedding_stats(rows: usize, cols: usize, data: &[f64]) -> Result<EmbeddingStats> {
    if rows < 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding statistics need at least 2 rows, got {rows}"
        )));
    }
    if cols == 0 || data.len() != rows * cols {
        return Err(Error::Shape(format!(
            "{rows}x{cols} embeddings given {} values",
            data.len()
        )));
    }
    let m = DMatrix::from_row_slice(rows, cols, data);
    let mean = DVector::from_iterator(cols, m.column_iter().map(|c| c.mean()));
    let mut centered = m;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut covariance = centered.transpose() * &centered / (rows - 1) as f64;
    // Exact symmetry regardless of accumulation order.
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(EmbeddingStats {
        mean,
        covariance,
        n: rows,
    })
}

fn clipped_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut e = SymmetricEigen::new(m.clone());
    let top = e.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = EIG_CLIP_TOL * top.max(1.0);
    for v in e.eigenvalues.iter_mut() {
        if *v < -tol {
            return Err(Error::Numeric(format!(
                "{what} is not positive semidefinite (eigenvalue {v:e})"
            )));
        }
        *v = v.max(0.0);
    }
    Ok(e)
}

/// Square root of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = clipped_eigen(m, "matrix")?;
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt));
    Ok(&e.eigenvectors * d * e.eigenvectors.transpose())
}

/// `|mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2))`, with the trace term
/// computed as `Tr sqrt(sqrt(Sa) Sb sqrt(Sa))`.
pub fn frechet_distance(a: &EmbeddingStats, b: &EmbeddingStats) -> Result<f64> {
    if a.dim() != b.dim() || a.covariance.shape() != b.covariance.shape() {
        return Err(Error::Shape(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = &a.mean - &b.mean;
    let sa = sqrtm_psd(&a.covariance)?;
    let inner = &sa * &b.covariance * &sa;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = clipped_eigen(&inner, "covariance product")?
        .eigenvalues
        .iter()
        .map(|v| v.sqrt())
        .sum();
    let _ = clipped_eigen(&b.covariance, "covariance")?;
    let d = diff.norm_squared() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}
