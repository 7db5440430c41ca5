//! Tucker factor containers and the truncated higher-order SVD.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::left_singular;
use crate::tensor::{matricize, multilinear_mul, DenseMatrix, DenseTensor};

/// Factor matrices `U^(k)` (`n_k x r_k`) and core `G` (`r_1 x ... x r_N`).
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerFactors {
    pub factors: Vec<DenseMatrix>,
    pub core: DenseTensor,
}

impl TuckerFactors {
    pub fn new(factors: Vec<DenseMatrix>, core: DenseTensor) -> Result<Self> {
        let f = Self { factors, core };
        f.validate()?;
        Ok(f)
    }

    pub fn order(&self) -> usize {
        self.core.order()
    }

    /// Multilinear rank `(r_1, ..., r_N)`.
    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    /// Outer dims `(n_1, ..., n_N)`.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.len() != self.core.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for an order-{} core",
                self.factors.len(),
                self.core.order()
            )));
        }
        for (k, (u, &r)) in self.factors.iter().zip(self.core.dims()).enumerate() {
            if u.ncols() != r || u.nrows() < r {
                return Err(Error::ShapeMismatch(format!(
                    "factor {} is {}x{}, core extent {}",
                    k,
                    u.nrows(),
                    u.ncols(),
                    r
                )));
            }
        }
        Ok(())
    }

    /// `(U^(1), ..., U^(N)) . G`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        self.validate()?;
        multilinear_mul(&self.factors.iter().map(Some).collect::<Vec<_>>(), &self.core)
    }

    /// Companion factor `Ŭ^(k) = (U^(N) ⊗ … ⊗ U^(k+1) ⊗ U^(k-1) ⊗ … ⊗ U^(1)) M_k(G)^T`,
    /// so that `M_k(reconstruct()) = U^(k) Ŭ^(k)^T`.
    pub fn breve_factor(&self, mode: usize) -> Result<DenseMatrix> {
        self.validate()?;
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        // Ŭ^(k)^T = M_k(G ×_{j≠k} U^(j)), which avoids forming the Kronecker product.
        let mats: Vec<Option<&DenseMatrix>> = self
            .factors
            .iter()
            .enumerate()
            .map(|(j, u)| (j != mode).then_some(u))
            .collect();
        let partial = multilinear_mul(&mats, &self.core)?;
        Ok(matricize(&partial, mode)?.reversed_axes().as_standard_layout().into_owned())
    }
}

/// Companion factor of mode `mode`; see [`TuckerFactors::breve_factor`].
pub fn breve_factor(f: &TuckerFactors, mode: usize) -> Result<DenseMatrix> {
    f.breve_factor(mode)
}

/// Reconstructs the full tensor from its Tucker factors.
pub fn reconstruct(f: &TuckerFactors) -> Result<DenseTensor> {
    f.reconstruct()
}

/// Rank-`ranks` truncated HOSVD.
///
/// `U^(k)` holds the top `r_k` left singular vectors of `M_k(t)` and the core
/// is `(U^(1)^T, ..., U^(N)^T) . t`. For rank-deficient modes the missing
/// directions are completed with canonical basis columns.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerFactors> {
    if ranks.len() != t.order() {
        return Err(Error::ShapeMismatch(format!(
            "rank vector of length {} for an order-{} tensor",
            ranks.len(),
            t.order()
        )));
    }
    for (&r, &n) in ranks.iter().zip(t.dims()) {
        if r == 0 || r > n {
            return Err(Error::RankOutOfRange { rank: r, max: n });
        }
    }
    let factors: Vec<DenseMatrix> = (0..t.order())
        .into_par_iter()
        .map(|k| mode_factor(t, k, ranks[k]))
        .collect::<Result<_>>()?;
    let transposed: Vec<DenseMatrix> = factors.iter().map(|u| u.t().to_owned()).collect();
    let core = multilinear_mul(&transposed.iter().map(Some).collect::<Vec<_>>(), t)?;
    Ok(TuckerFactors { factors, core })
}

fn mode_factor(t: &DenseTensor, mode: usize, r: usize) -> Result<DenseMatrix> {
    let m = matricize(t, mode)?;
    if r > m.ncols() {
        // Fewer columns than the requested rank: take every available
        // direction, then complete with canonical vectors.
        let (u, _) = left_singular(&m, m.ncols().min(m.nrows()))?;
        return Ok(complete_basis(&u, r));
    }
    Ok(left_singular(&m, r)?.0)
}

/// Extends an orthonormal `n x c` basis to `n x r` with canonical directions.
fn complete_basis(u: &DenseMatrix, r: usize) -> DenseMatrix {
    let n = u.nrows();
    let mut cols: Vec<ndarray::Array1<f64>> = u.columns().into_iter().map(|c| c.to_owned()).collect();
    while cols.len() < r {
        let mut best: Option<(f64, ndarray::Array1<f64>)> = None;
        for i in 0..n {
            let mut cand = ndarray::Array1::zeros(n);
            cand[i] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let p = c.dot(&cand);
                    cand.scaled_add(-p, c);
                }
            }
            let norm = cand.dot(&cand).sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b + 1e-12) {
                best = Some((norm, cand));
            }
        }
        let (norm, cand) = best.expect("n >= 1");
        cols.push(cand / norm);
    }
    let mut out = Array2::zeros((n, r));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}
