//! Gaussian statistics of embedding sets and the Frechet distance between
//! two fitted Gaussians.
//!
//! The cross-covariance term is computed through the symmetric similarity
//! form `tr((S Sigma_g S)^{1/2})` with `S = Sigma_r^{1/2}`, which equals
//! `tr((Sigma_r Sigma_g)^{1/2})` but only ever takes square roots of
//! symmetric PSD matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};

/// Mean vector and covariance matrix estimated from an embedding set.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    n: usize,
}

impl GaussianStats {
    /// Builds stats from precomputed values. The covariance is symmetrized
    /// on construction; asymmetry beyond 1e-8 is rejected.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, n: usize) -> Result<Self> {
        let dim = mean.len();
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "covariance is {}x{} but mean has dim {dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(
                "Gaussian statistics need at least 2 samples".into(),
            ));
        }
        check_symmetric(&cov, 1e-8)?;
        let cov = symmetrize(cov);
        Ok(GaussianStats { mean, cov, n })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Fits mean and unbiased covariance (n-1 denominator) to an embedding set.
pub fn fit_gaussian(embeddings: &EmbeddingSet) -> Result<GaussianStats> {
    let n = embeddings.len();
    let dim = embeddings.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance estimation needs >= 2 embeddings, got {n}"
        )));
    }
    let data = DMatrix::from_row_iterator(
        n,
        dim,
        embeddings.iter_rows().flat_map(|r| r.iter().copied()),
    );
    let mean = DVector::from_fn(dim, |j, _| data.column(j).sum() / n as f64);
    let mut centered = data;
    for j in 0..dim {
        let mu = mean[j];
        for i in 0..n {
            centered[(i, j)] -= mu;
        }
    }
    let cov = symmetrize(centered.tr_mul(&centered) / (n as f64 - 1.0));
    Ok(GaussianStats { mean, cov, n })
}

/// Clamped square roots of the eigenvalues of a symmetric PSD matrix,
/// together with the eigenvectors and the number of negative eigenvalues
/// floored to zero. Negative eigenvalues beyond `-1e-6 * max|lambda|` are
/// a hard error; anything smaller is numerical noise.
fn psd_eigen_sqrt(
    m: &DMatrix<f64>,
) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, Vec<f64>, usize)> {
    check_symmetric(m, 1e-8)?;
    let eigen = SymmetricEigen::new(m.clone());
    let max_abs = eigen
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let tolerance = -1e-6 * max_abs;
    let mut floor_hits = 0usize;
    let mut roots = Vec::with_capacity(eigen.eigenvalues.len());
    for &lambda in eigen.eigenvalues.iter() {
        if lambda < tolerance {
            return Err(Error::Numerical(format!(
                "matrix is not PSD: eigenvalue {lambda} below tolerance {tolerance}"
            )));
        }
        if lambda < 0.0 {
            floor_hits += 1;
            roots.push(0.0);
        } else {
            roots.push(lambda.sqrt());
        }
    }
    Ok((eigen, roots, floor_hits))
}

/// Square root of a symmetric PSD matrix via eigendecomposition
/// `Q diag(sqrt(lambda)) Q^T`, with small negative eigenvalues clamped
/// to zero.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (eigen, roots, _) = psd_eigen_sqrt(m)?;
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    Ok(symmetrize(
        &eigen.eigenvectors * d * eigen.eigenvectors.transpose(),
    ))
}

/// Frechet distance value plus numerical diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    /// Final value with the tiny-negative clamp applied.
    pub fd: f64,
    /// Raw value before clamping.
    pub raw: f64,
    /// Squared distance between the means.
    pub mean_term: f64,
    /// tr(Sigma_r) + tr(Sigma_g) - 2 tr((Sigma_r Sigma_g)^{1/2}).
    pub trace_term: f64,
    /// Jitter added to both covariance diagonals, when applied.
    pub jitter: Option<f64>,
    /// Eigenvalues floored to zero across the square roots taken.
    pub eigenvalue_floor_hits: usize,
    /// Whether the tiny-negative clamp fired.
    pub clamped: bool,
}

/// Frechet distance between two Gaussian fits.
pub fn frechet_distance(real: &GaussianStats, generated: &GaussianStats) -> Result<f64> {
    Ok(frechet_distance_report(real, generated)?.fd)
}

pub fn frechet_distance_report(
    real: &GaussianStats,
    generated: &GaussianStats,
) -> Result<FdReport> {
    if real.dim() != generated.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            real.dim(),
            generated.dim()
        )));
    }

    let mean_term = (real.mean() - generated.mean()).norm_squared();

    let eig_r = SymmetricEigen::new(real.cov().clone());
    let eig_g = SymmetricEigen::new(generated.cov().clone());
    let near_singular = |eigen: &SymmetricEigen<f64, nalgebra::Dyn>| {
        let max = eigen.eigenvalues.iter().fold(f64::MIN, |a, &b| a.max(b));
        let min = eigen.eigenvalues.iter().fold(f64::MAX, |a, &b| a.min(b));
        min < 1e-10 * max
    };

    let mut cov_r = real.cov().clone();
    let mut cov_g = generated.cov().clone();
    let mut jitter = None;
    if near_singular(&eig_r) || near_singular(&eig_g) {
        let dim = real.dim() as f64;
        let diag_mean = (cov_r.diagonal().sum() + cov_g.diagonal().sum()) / (2.0 * dim);
        let eps = 1e-6 * diag_mean;
        if eps > 0.0 {
            for i in 0..real.dim() {
                cov_r[(i, i)] += eps;
                cov_g[(i, i)] += eps;
            }
            jitter = Some(eps);
            log::warn!("near-singular covariance: added jitter {eps} to both diagonals");
        }
    }

    let (eigen_r, roots_r, hits_r) = psd_eigen_sqrt(&cov_r)?;
    let sqrt_r = symmetrize(
        &eigen_r.eigenvectors
            * DMatrix::from_diagonal(&DVector::from_vec(roots_r))
            * eigen_r.eigenvectors.transpose(),
    );
    let inner = symmetrize(&sqrt_r * &cov_g * &sqrt_r);
    let (_, roots_m, hits_m) = psd_eigen_sqrt(&inner)?;
    let trace_cross: f64 = roots_m.iter().sum();

    let trace_term = cov_r.trace() + cov_g.trace() - 2.0 * trace_cross;
    let raw = mean_term + trace_term;
    let (fd, clamped) = if raw < 0.0 {
        if raw < -1e-8 {
            return Err(Error::Numerical(format!(
                "Frechet distance evaluated to {raw}, beyond the rounding clamp"
            )));
        }
        (0.0, true)
    } else {
        (raw, false)
    };
    Ok(FdReport {
        fd,
        raw,
        mean_term,
        trace_term,
        jitter,
        eigenvalue_floor_hits: hits_r + hits_m,
        clamped,
    })
}
