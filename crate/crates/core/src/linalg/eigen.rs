use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::matrix::{aligned_distance, canonicalize_sign, dot, norm, normalize, DenseMatrix};
use crate::error::{Error, Result};

/// Iteration cap used wherever a "converged" eigenpair is needed.
pub const ORACLE_MAX_ITERS: usize = 20_000;
/// Convergence threshold paired with [`ORACLE_MAX_ITERS`].
pub const ORACLE_TOL: f64 = 1e-13;
/// Default stopping threshold for local power iteration.
pub const DEFAULT_TOL: f64 = 1e-9;

const ORACLE_SEED: u64 = 0x0A11_CE5E_ED00;

/// A unit eigenvector together with its Rayleigh value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub vector: Vec<f64>,
    pub value: f64,
}

/// `scale · X Xᵀ`, the sample-space Gram matrix of a feature block.
pub fn gram_matrix(block: &DenseMatrix, scale: f64) -> Result<DenseMatrix> {
    if block.is_empty() {
        return Err(Error::EmptyBlock);
    }
    if !block.all_finite() {
        return Err(Error::NonFinite);
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gram scale must be positive, got {scale}"
        )));
    }
    let n = block.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = scale * dot(block.row(i), block.row(j));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// `(aᵀ A a) / (aᵀ a)`.
pub fn rayleigh_quotient(matrix: &DenseMatrix, a: &[f64]) -> Result<f64> {
    check_square(matrix, a.len())?;
    let denom = dot(a, a);
    if !(denom > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(dot(a, &matrix.mul_vec(a)?) / denom)
}

/// Iterator over the normalized power-method iterates `a⁽¹⁾, a⁽²⁾, …`.
///
/// No sign canonicalization is applied, so consecutive items are the raw
/// `A a / ‖A a‖` sequence.
pub struct PowerIterates<'a> {
    matrix: &'a DenseMatrix,
    current: Vec<f64>,
    failed: bool,
}

impl<'a> PowerIterates<'a> {
    pub fn new(matrix: &'a DenseMatrix, init: &[f64]) -> Result<Self> {
        check_square(matrix, init.len())?;
        Ok(Self {
            matrix,
            current: normalize(init)?,
            failed: false,
        })
    }

    /// The most recent iterate (the normalized start vector before the first
    /// call to `next`).
    pub fn current(&self) -> &[f64] {
        &self.current
    }
}

impl Iterator for PowerIterates<'_> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let image = self
            .matrix
            .mul_vec(&self.current)
            .expect("dimensions checked at construction");
        let len = norm(&image);
        if !(len > 0.0) || !len.is_finite() {
            self.failed = true;
            return Some(Err(Error::ZeroImage));
        }
        self.current = image.into_iter().map(|x| x / len).collect();
        Some(Ok(self.current.clone()))
    }
}

/// Runs at most `max_iters` power steps from `init`, stopping once two
/// sign-aligned consecutive iterates are within `tol`. Returns the
/// sign-canonical eigenvector, its Rayleigh value and the number of steps
/// taken.
pub fn power_iteration(
    matrix: &DenseMatrix,
    init: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<(EigenPair, usize)> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be >= 0, got {tol}"
        )));
    }
    let mut iterates = PowerIterates::new(matrix, init)?;
    let mut used = 0;
    for step in 1..=max_iters {
        let previous = iterates.current().to_vec();
        let next = iterates.next().expect("power iterates never end")?;
        used = step;
        if aligned_distance(&next, &previous) <= tol {
            break;
        }
    }
    let mut vector = iterates.current;
    canonicalize_sign(&mut vector);
    let value = rayleigh_quotient(matrix, &vector)?;
    Ok((EigenPair { vector, value }, used))
}

/// Top-`k` eigenpairs of a symmetric matrix by power iteration with
/// Hotelling deflation, sorted by descending value.
///
/// Every iterate is projected off the vectors already found, so the output is
/// orthonormal even when deflation leaves round-off behind.
pub fn top_k_eigen_oracle(
    matrix: &DenseMatrix,
    k: usize,
    max_iters: usize,
    tol: f64,
) -> Result<Vec<EigenPair>> {
    let n = matrix.rows();
    if !matrix.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::RankExceeded {
            requested: k,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut work = matrix.clone();
    let mut found: Vec<EigenPair> = Vec::with_capacity(k);
    let floor = 1e-12 * matrix.frobenius_norm();
    for _ in 0..k {
        let mut init: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        orthogonalize(&mut init, &found);
        orthogonalize(&mut init, &found);
        let mut vector = normalize(&init)?;
        for _ in 0..max_iters {
            let mut next = work.mul_vec(&vector)?;
            orthogonalize(&mut next, &found);
            orthogonalize(&mut next, &found);
            // nothing but round-off left on the complement of `found`
            if norm(&next) <= floor {
                break;
            }
            let next = normalize(&next)?;
            let done = aligned_distance(&next, &vector) <= tol;
            vector = next;
            if done {
                break;
            }
        }
        canonicalize_sign(&mut vector);
        let value = rayleigh_quotient(matrix, &vector)?;
        work.add_outer(-value, &vector)?;
        found.push(EigenPair { vector, value });
    }
    found.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(found)
}

/// `√(1 − (aᵀb)²)` for unit vectors; symmetric and sign-invariant.
pub fn sin_angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if (norm(a) - 1.0).abs() > 1e-6 || (norm(b) - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized);
    }
    let c = dot(a, b).clamp(-1.0, 1.0);
    Ok((1.0 - c * c).max(0.0).sqrt())
}

fn orthogonalize(v: &mut [f64], basis: &[EigenPair]) {
    for b in basis {
        let c = dot(v, &b.vector);
        v.iter_mut().zip(&b.vector).for_each(|(x, y)| *x -= c * y);
    }
}

fn check_square(matrix: &DenseMatrix, len: usize) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    if matrix.rows() != len {
        return Err(Error::DimensionMismatch {
            left: matrix.rows(),
            right: len,
        });
    }
    Ok(())
}
