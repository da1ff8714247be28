//! Kernel functions, kernel matrices and the two kernel-PCA flavours.
//!
//! [`akpca`] eigendecomposes the sample kernel matrix and projects the raw
//! data onto its leading eigenvectors (`Z = Vₖᵀ X`, one row per component).
//! [`kpca_transform`] is the classical variant that returns per-sample scores
//! `K vⱼ / (n λⱼ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, power_iteration, top_k_eigen_oracle, DenseMatrix, EigenPair, ORACLE_MAX_ITERS, ORACLE_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Plain inner product.
    Linear,
    /// `exp(−γ‖x − y‖²)`.
    Rbf { gamma: f64 },
    /// `tanh(−γ xᵀy + c)`. Note the negated inner product.
    Sigmoid { gamma: f64, c: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sigmoid(gamma: f64, c: f64) -> Result<Self> {
        let spec = KernelSpec::Sigmoid { gamma, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } | KernelSpec::Sigmoid { gamma, .. }
                if !(gamma > 0.0) || !gamma.is_finite() =>
            {
                Err(Error::InvalidKernel(format!(
                    "gamma must be positive, got {gamma}"
                )))
            }
            KernelSpec::Sigmoid { c, .. } if !c.is_finite() => Err(Error::InvalidKernel(format!(
                "offset c must be finite, got {c}"
            ))),
            _ => Ok(()),
        }
    }

    /// Whether the kernel matrix is guaranteed positive semidefinite.
    pub fn is_psd(&self) -> bool {
        !matches!(self, KernelSpec::Sigmoid { .. })
    }
}

pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    spec.validate()?;
    Ok(eval(spec, x, y))
}

fn eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Linear => dot(x, y),
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        KernelSpec::Sigmoid { gamma, c } => (-gamma * dot(x, y) + c).tanh(),
    }
}

/// `n x n` matrix of kernel values between the rows of `x`. Exactly
/// symmetric: each off-diagonal value is computed once and mirrored.
pub fn kernel_matrix(spec: &KernelSpec, x: &DenseMatrix) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyBlock);
    }
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval(spec, x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if !k.all_finite() {
        return Err(Error::NonFinite);
    }
    Ok(k)
}

/// Double centering `K − 1K/n − K1/n + 1K1/n²`.
pub fn center_kernel(k: &DenseMatrix) -> Result<DenseMatrix> {
    if !k.is_square() {
        return Err(Error::Shape(format!(
            "kernel matrix must be square, got {}x{}",
            k.rows(),
            k.cols()
        )));
    }
    let n = k.rows();
    if n == 0 {
        return Err(Error::EmptyBlock);
    }
    let nf = n as f64;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let mut col_means = vec![0.0; n];
    for row in k.row_iter() {
        col_means.iter_mut().zip(row).for_each(|(c, v)| *c += v);
    }
    col_means.iter_mut().for_each(|c| *c /= nf);
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = k[(i, j)] - col_means[j] - row_means[i] + grand;
        }
    }
    Ok(out)
}

/// Median heuristic `γ = 1 / (2·median²)` over pairwise row distances of the
/// first (at most) 100 rows. Falls back to 1 when the median is zero.
pub fn median_heuristic_gamma(x: &DenseMatrix) -> f64 {
    let rows = x.rows().min(100);
    let mut dists = Vec::with_capacity(rows * rows.saturating_sub(1) / 2);
    for i in 0..rows {
        for j in i + 1..rows {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median > 0.0 {
        1.0 / (2.0 * median * median)
    } else {
        1.0
    }
}

/// Top-`k` eigenpairs of a kernel matrix, ordered by signed value.
///
/// Indefinite matrices are shifted by `σ = max(0, −λ_min)` before deflation
/// so that magnitude-driven power iteration returns the algebraically largest
/// eigenvalues; the shift is removed from the reported values.
pub fn kernel_eigenpairs(k_mat: &DenseMatrix, k: usize, psd: bool) -> Result<Vec<EigenPair>> {
    if psd {
        return top_k_eigen_oracle(k_mat, k, ORACLE_MAX_ITERS, ORACLE_TOL);
    }
    let shift = (-min_eigenvalue_estimate(k_mat)?).max(0.0);
    if shift == 0.0 {
        return top_k_eigen_oracle(k_mat, k, ORACLE_MAX_ITERS, ORACLE_TOL);
    }
    let mut shifted = k_mat.clone();
    shifted.add_diagonal(shift);
    let mut pairs = top_k_eigen_oracle(&shifted, k, ORACLE_MAX_ITERS, ORACLE_TOL)?;
    pairs.iter_mut().for_each(|p| p.value -= shift);
    Ok(pairs)
}

// Power iteration on ρI − K, with ρ a Gershgorin bound, converges to the
// bottom of K's spectrum.
fn min_eigenvalue_estimate(k_mat: &DenseMatrix) -> Result<f64> {
    let n = k_mat.rows();
    let rho = k_mat
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if rho == 0.0 {
        return Ok(0.0);
    }
    let mut flipped = k_mat.scaled(-1.0);
    flipped.add_diagonal(rho);
    let init: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    match power_iteration(&flipped, &init, ORACLE_MAX_ITERS, ORACLE_TOL) {
        Ok((pair, _)) => Ok(rho - pair.value),
        // ρI − K vanishes on the start vector: K = ρI there
        Err(Error::ZeroImage) => Ok(rho),
        Err(e) => Err(e),
    }
}

/// Result of [`akpca_fit`]: the projection plus the eigenpairs behind it.
#[derive(Debug, Clone)]
pub struct AkpcaFit {
    pub projection: DenseMatrix,
    pub eigenpairs: Vec<EigenPair>,
}

pub fn akpca_fit(x: &DenseMatrix, spec: &KernelSpec, k: usize, center: bool) -> Result<AkpcaFit> {
    check_rank(k, x.rows())?;
    let mut k_mat = kernel_matrix(spec, x)?;
    if center {
        k_mat = center_kernel(&k_mat)?;
    }
    let eigenpairs = kernel_eigenpairs(&k_mat, k, spec.is_psd())?;
    let m = x.cols();
    let mut z = DenseMatrix::zeros(k, m);
    for (r, pair) in eigenpairs.iter().enumerate() {
        for (i, &w) in pair.vector.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, &xv) in x.row(i).iter().enumerate() {
                z[(r, j)] += w * xv;
            }
        }
    }
    Ok(AkpcaFit {
        projection: z,
        eigenpairs,
    })
}

/// `Z = Vₖᵀ X` (`k x m`), rows ordered by descending eigenvalue.
pub fn akpca(x: &DenseMatrix, spec: &KernelSpec, k: usize, center: bool) -> Result<DenseMatrix> {
    Ok(akpca_fit(x, spec, k, center)?.projection)
}

#[derive(Debug, Clone)]
pub struct KpcaFit {
    pub scores: DenseMatrix,
    pub eigenpairs: Vec<EigenPair>,
}

pub fn kpca_fit(x: &DenseMatrix, spec: &KernelSpec, k: usize) -> Result<KpcaFit> {
    let n = x.rows();
    check_rank(k, n)?;
    let k_mat = kernel_matrix(spec, x)?;
    let eigenpairs = kernel_eigenpairs(&k_mat, k, spec.is_psd())?;
    if eigenpairs.iter().any(|p| !(p.value > 0.0)) {
        return Err(Error::IndefiniteKernel);
    }
    let mut scores = DenseMatrix::zeros(n, k);
    for (j, pair) in eigenpairs.iter().enumerate() {
        let image = k_mat.mul_vec(&pair.vector)?;
        let denom = n as f64 * pair.value;
        for (i, v) in image.into_iter().enumerate() {
            scores[(i, j)] = v / denom;
        }
    }
    Ok(KpcaFit { scores, eigenpairs })
}

/// Classical kernel-PCA scores `K vⱼ / (n λⱼ)` as an `n x k` matrix.
pub fn kpca_transform(x: &DenseMatrix, spec: &KernelSpec, k: usize) -> Result<DenseMatrix> {
    Ok(kpca_fit(x, spec, k)?.scores)
}

fn check_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::RankExceeded {
            requested: k,
            available: n,
        });
    }
    Ok(())
}
