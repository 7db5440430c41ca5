//! Diagnostics of low-rank and sparse tensors: incoherence, condition
//! numbers, fiber sparsity, factor alignment and error norms.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_1norm, invert, left_singular, op_norm, orthonormality_defect, spd_inverse};
use crate::tensor::{l1inf_norm, l2inf_norm, matricize, matrix_fro_norm, matrix_inf_norm, multilinear_mul, DenseMatrix, DenseTensor};
use crate::tucker::{hosvd, TuckerFactors};

const ORTHONORMAL_TOL: f64 = 1e-8;
const ALIGN_CONDITION_LIMIT: f64 = 1e12;

/// Summary statistics of a (low-rank, sparse) pair.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Diagnostics {
    pub mu: f64,
    pub kappa: f64,
    pub kappa_s: f64,
    pub sigma_min: f64,
    /// Per-fiber sparsity fraction of the sparse part.
    pub alpha: f64,
    /// Fraction of nonzero entries of the sparse part.
    pub entry_fraction: f64,
    /// Leading `r_k` singular values of each matricization.
    pub singular_values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionNumbers {
    pub kappa: f64,
    pub kappa_s: f64,
    pub sigma_min: f64,
    pub singular_values: Vec<Vec<f64>>,
}

/// `μ = max_k (n_k / r_k) ‖U^(k)‖²_{2,∞}` for orthonormal factors.
pub fn incoherence(f: &TuckerFactors) -> Result<f64> {
    let mut mu: f64 = 0.0;
    for (k, u) in f.factors.iter().enumerate() {
        let deviation = orthonormality_defect(u);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { mode: k, deviation });
        }
        let row = l2inf_norm(u);
        mu = mu.max(u.nrows() as f64 / u.ncols() as f64 * row * row);
    }
    Ok(mu)
}

/// Condition numbers from the top-`r_k` singular values of each matricization.
///
/// `κ = min_k σ_max(M_k) / min_k σ_{r_k}(M_k)`, `κ_s = max_k σ_max / min_k σ_{r_k}`,
/// and `σ_min = min_k σ_{r_k}(M_k)`. The smallest nonzero singular value is
/// read at the declared rank index.
pub fn condition_numbers(x: &DenseTensor, ranks: &[usize]) -> Result<ConditionNumbers> {
    if ranks.len() != x.order() {
        return Err(Error::ShapeMismatch(format!(
            "rank vector of length {} for an order-{} tensor",
            ranks.len(),
            x.order()
        )));
    }
    if x.inf_norm() == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let mut singular_values = Vec::with_capacity(x.order());
    for (k, &r) in ranks.iter().enumerate() {
        let m = matricize(x, k)?;
        let (_, s) = left_singular(&m, r)?;
        singular_values.push(s.to_vec());
    }
    let max_per_mode: Vec<f64> = singular_values.iter().map(|s| s[0]).collect();
    let min_per_mode: Vec<f64> = singular_values.iter().map(|s| *s.last().expect("r >= 1")).collect();
    let sigma_min = min_per_mode.iter().copied().fold(f64::INFINITY, f64::min);
    let min_of_max = max_per_mode.iter().copied().fold(f64::INFINITY, f64::min);
    let max_of_max = max_per_mode.iter().copied().fold(0.0, f64::max);
    Ok(ConditionNumbers {
        kappa: min_of_max / sigma_min,
        kappa_s: max_of_max / sigma_min,
        sigma_min,
        singular_values,
    })
}

/// Smallest `α` with `s ∈ S_α`: the largest fraction of nonzeros in any fiber.
pub fn sparsity_fraction(s: &DenseTensor) -> f64 {
    let mut alpha: f64 = 0.0;
    for k in 0..s.order() {
        // Columns of M_k are exactly the mode-k fibers.
        let m = matricize(s, k).expect("mode in range");
        let n = m.nrows() as f64;
        for col in m.columns() {
            let nnz = col.iter().filter(|v| **v != 0.0).count();
            alpha = alpha.max(nnz as f64 / n);
        }
    }
    alpha
}

/// Fraction of nonzero entries.
pub fn entry_fraction(s: &DenseTensor) -> f64 {
    s.nnz() as f64 / s.len() as f64
}

/// Slack ratios (left side / right side) of the three α-sparse matrix norm bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseNormReport {
    /// `‖S‖_op / (α √(mn) ‖S‖_∞)`
    pub op_ratio: f64,
    /// `‖S‖_{2,∞} / (√(αn) ‖S‖_∞)`
    pub l2inf_ratio: f64,
    /// `‖S‖_{1,∞} / (αn ‖S‖_∞)`
    pub l1inf_ratio: f64,
}

impl SparseNormReport {
    pub fn holds(&self) -> bool {
        self.op_ratio <= 1.0 + 1e-12 && self.l2inf_ratio <= 1.0 + 1e-12 && self.l1inf_ratio <= 1.0 + 1e-12
    }
}

/// Smallest `α` for which a matrix is α-sparse (row and column fractions).
pub fn matrix_sparsity_fraction(m: &DenseMatrix) -> f64 {
    let (rows, cols) = m.dim();
    let row_frac = m
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|v| **v != 0.0).count() as f64 / cols as f64)
        .fold(0.0, f64::max);
    let col_frac = m
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|v| **v != 0.0).count() as f64 / rows as f64)
        .fold(0.0, f64::max);
    row_frac.max(col_frac)
}

/// Evaluates the operator, ℓ2,∞ and ℓ1,∞ bounds for an α-sparse matrix.
pub fn sparse_norm_bounds_check(m: &DenseMatrix, alpha: f64) -> Result<SparseNormReport> {
    let measured = matrix_sparsity_fraction(m);
    if measured > alpha * (1.0 + 1e-12) {
        return Err(Error::NotSparse { alpha, measured });
    }
    let (rows, cols) = m.dim();
    let inf = matrix_inf_norm(m);
    let ratio = |lhs: f64, rhs: f64| if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(SparseNormReport {
        op_ratio: ratio(op_norm(m)?, alpha * ((rows * cols) as f64).sqrt() * inf),
        l2inf_ratio: ratio(l2inf_norm(m), (alpha * cols as f64).sqrt() * inf),
        l1inf_ratio: ratio(l1inf_norm(m), alpha * cols as f64 * inf),
    })
}

/// Per-factor alignment and the resulting upper bound on the scaled distance.
#[derive(Clone, Debug)]
pub struct AlignmentResult {
    pub q: Vec<DenseMatrix>,
    pub dist_upper: f64,
}

/// Aligns `f` to `f_star` one factor at a time.
///
/// Each `Q^(k) = (U^(k)ᵀU^(k))⁻¹U^(k)ᵀU⋆^(k)` minimizes
/// `‖(U^(k)Q − U⋆^(k))Σ⋆^(k)‖_F` on its own; the returned distance uses these
/// decoupled alignments and therefore bounds the joint infimum from above.
/// `f_star` must be in HOSVD normal form (orthonormal factors, all-orthogonal
/// core) so that `Σ⋆^(k)` can be read off the core.
pub fn align_factors(f: &TuckerFactors, f_star: &TuckerFactors) -> Result<AlignmentResult> {
    f.validate()?;
    f_star.validate()?;
    if f.dims() != f_star.dims() || f.ranks() != f_star.ranks() {
        return Err(Error::ShapeMismatch(format!(
            "cannot align factors of dims {:?}/ranks {:?} with {:?}/{:?}",
            f.dims(),
            f.ranks(),
            f_star.dims(),
            f_star.ranks()
        )));
    }
    let order = f.order();
    let mut q = Vec::with_capacity(order);
    let mut q_inv = Vec::with_capacity(order);
    let mut total = 0.0;
    for k in 0..order {
        let u = &f.factors[k];
        let u_star = &f_star.factors[k];
        let gram_inv = spd_inverse(&u.t().dot(u), k)?;
        let qk = gram_inv.dot(&u.t().dot(u_star));
        let condition = condition_1norm(&qk);
        if condition > ALIGN_CONDITION_LIMIT {
            return Err(Error::SingularGram { mode: k, condition });
        }
        let sigma = star_singular_values(f_star, k)?;
        let mut diff = u.dot(&qk) - u_star;
        for (j, s) in sigma.iter().enumerate() {
            diff.column_mut(j).mapv_inplace(|v| v * s);
        }
        total += matrix_fro_norm(&diff).powi(2);
        q_inv.push(invert(&qk).ok_or(Error::SingularGram {
            mode: k,
            condition: f64::INFINITY,
        })?);
        q.push(qk);
    }
    let aligned_core = multilinear_mul(&q_inv.iter().map(Some).collect::<Vec<_>>(), &f.core)?;
    total += (&aligned_core - &f_star.core).fro_norm().powi(2);
    Ok(AlignmentResult {
        q,
        dist_upper: total.sqrt(),
    })
}

/// Singular values of `M_k(X⋆)` read from an all-orthogonal core.
fn star_singular_values(f_star: &TuckerFactors, mode: usize) -> Result<Vec<f64>> {
    let m = matricize(&f_star.core, mode)?;
    let gram: Array2<f64> = m.dot(&m.t());
    Ok((0..gram.nrows()).map(|i| gram[[i, i]].max(0.0).sqrt()).collect())
}

/// `sqrt(μ^N Π r_k / Π n_k) · σ_min`: the entrywise error scale of an incoherent truth.
pub fn entrywise_scale(mu: f64, ranks: &[usize], dims: &[usize], sigma_min: f64) -> f64 {
    let r: f64 = ranks.iter().map(|&v| v as f64).product();
    let n: f64 = dims.iter().map(|&v| v as f64).product();
    (mu.powi(ranks.len() as i32) * r / n).sqrt() * sigma_min
}

/// Errors of an estimate against the true low-rank tensor.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ErrorReport {
    pub rel_fro: f64,
    pub inf_err: f64,
    /// `inf_err / (sqrt(μ^N Π r / Π n) σ_min)`.
    pub inf_envelope_ratio: f64,
}

/// Relative Frobenius, entrywise and envelope-normalized errors of `x_hat`.
pub fn error_report(x_hat: &DenseTensor, x_star: &DenseTensor, diag: &Diagnostics, ranks: &[usize]) -> Result<ErrorReport> {
    if x_hat.dims() != x_star.dims() {
        return Err(Error::ShapeMismatch(format!(
            "estimate {:?} vs truth {:?}",
            x_hat.dims(),
            x_star.dims()
        )));
    }
    let norm = x_star.fro_norm();
    if norm == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let diff = x_hat - x_star;
    let inf_err = diff.inf_norm();
    let scale = entrywise_scale(diag.mu, ranks, x_star.dims(), diag.sigma_min);
    Ok(ErrorReport {
        rel_fro: diff.fro_norm() / norm,
        inf_err,
        inf_envelope_ratio: if inf_err == 0.0 { 0.0 } else { inf_err / scale },
    })
}

/// Full diagnostics of a low-rank tensor `x` (and optional sparse part) at rank `ranks`.
pub fn diagnostics(x: &DenseTensor, s: Option<&DenseTensor>, ranks: &[usize]) -> Result<Diagnostics> {
    let factors = hosvd(x, ranks)?;
    diagnostics_with_factors(x, &factors, s, ranks)
}

pub(crate) fn diagnostics_with_factors(
    x: &DenseTensor,
    factors: &TuckerFactors,
    s: Option<&DenseTensor>,
    ranks: &[usize],
) -> Result<Diagnostics> {
    let cond = condition_numbers(x, ranks)?;
    Ok(Diagnostics {
        mu: incoherence(factors)?,
        kappa: cond.kappa,
        kappa_s: cond.kappa_s,
        sigma_min: cond.sigma_min,
        alpha: s.map(sparsity_fraction).unwrap_or(0.0),
        entry_fraction: s.map(entry_fraction).unwrap_or(0.0),
        singular_values: cond.singular_values,
    })
}
