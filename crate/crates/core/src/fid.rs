//! Fréchet distance between Gaussians fitted to two feature sets.
//!
//! ```text
//! FID = ‖μ_a − μ_b‖² + Tr(Σ_a) + Tr(Σ_b) − 2 · Tr((Σ_a Σ_b)^½)
//! ```
//!
//! `Σ_a Σ_b` is not symmetric, so the last trace is evaluated through the
//! similar symmetric matrix `Σ_a^½ Σ_b Σ_a^½`, which has the same eigenvalues.

pub use nalgebra::{DMatrix, DVector};
use nalgebra::SymmetricEigen;
use thiserror::Error;

/// Eigenvalues below `-NOT_PSD_TOLERANCE · ‖m‖_F` mean the input is not PSD.
pub const NOT_PSD_TOLERANCE: f64 = 1e-6;
/// Relative asymmetry allowed in [`matrix_sqrt_psd`] input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Negative FID results smaller than this (relative) are rounding noise.
pub const NEGATIVE_CLAMP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FidError {
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, norm {norm:e})")]
    NotPsd { min_eigenvalue: f64, norm: f64 },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// `rows` samples of `cols`-dimensional features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Row-major `data` of `rows × cols` finite values, `rows ≥ 2`.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, FidError> {
        if rows < 2 {
            return Err(FidError::InsufficientSamples(rows));
        }
        if cols == 0 || data.len() != rows * cols {
            return Err(FidError::Shape(format!(
                "{} values cannot form a {rows}x{cols} feature matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FidError::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self {
            data: DMatrix::from_row_slice(rows, cols, data),
        })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, FidError> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(FidError::Shape(format!(
                "mean of length {d} with {}x{} covariance",
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and unbiased (n − 1) covariance, symmetrized.
pub fn estimate_stats(f: &FeatureMatrix) -> Result<GaussianStats, FidError> {
    let x = &f.data;
    let n = x.nrows();
    if n < 2 {
        return Err(FidError::InsufficientSamples(n));
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Principal square root of a symmetric PSD matrix.
///
/// Eigenvalues in `[-1e-6·‖m‖_F, 0)` are treated as rounding noise and set to
/// zero; anything more negative is rejected.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FidError> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(FidError::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let norm = frobenius(m);
    let asym = frobenius(&(m - m.transpose()));
    if asym > SYMMETRY_TOLERANCE * norm {
        return Err(FidError::Shape(format!(
            "matrix is not symmetric (‖m − mᵀ‖ = {asym:e}, ‖m‖ = {norm:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < -NOT_PSD_TOLERANCE * norm {
        return Err(FidError::NotPsd { min_eigenvalue, norm });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Fréchet distance between two Gaussians.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64, FidError> {
    if a.dim() != b.dim() {
        return Err(FidError::Shape(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let root_a = matrix_sqrt_psd(&a.cov)?;
    // B must itself be PSD; checking it here keeps the error attributable.
    matrix_sqrt_psd(&b.cov)?;
    let inner = &root_a * &b.cov * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = matrix_sqrt_psd(&inner)?.trace();
    let traces = a.cov.trace() + b.cov.trace();
    let value = mean_term + traces - 2.0 * cross;
    let scale = 1.0f64.max(mean_term + traces);
    Ok(if value < 0.0 && value.abs() < NEGATIVE_CLAMP * scale {
        0.0
    } else {
        value
    })
}

/// Convenience: fit both feature sets and return their FID.
pub fn fid_from_features(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64, FidError> {
    if a.cols() != b.cols() {
        return Err(FidError::Shape(format!(
            "feature dimensions differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    fid(&estimate_stats(a)?, &estimate_stats(b)?)
}
