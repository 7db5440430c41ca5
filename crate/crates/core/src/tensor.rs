//! Dense tensor storage and multilinear algebra.
//!
//! Tensors are stored row-major (last index fastest). Modes are 0-based in
//! this API: mode `k` of an order-`N` tensor is `k in 0..N`.
//!
//! The mode-`k` matricization `M_k(T)` has `n_k` rows. Its columns enumerate
//! the remaining modes with the *lowest* remaining mode varying fastest, so
//! that for `X = (U1, U2, U3) . G`
//!
//! ```text
//! M_1(X) = U1 M_1(G) (U3 ⊗ U2)^T
//! M_2(X) = U2 M_2(G) (U3 ⊗ U1)^T
//! M_3(X) = U3 M_3(G) (U2 ⊗ U1)^T
//! ```
//!
//! and in general the Kronecker factors appear in descending mode order.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array2, ArrayD, ArrayViewD, Dimension, IxDyn};

use crate::error::{Error, Result};

/// Real matrix with row-major storage.
pub type DenseMatrix = Array2<f64>;

/// Order-`N` dense real tensor. Storage is always in standard (row-major) layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<f64>,
}

impl DenseTensor {
    /// Builds a tensor from its row-major values, validating the shape and finiteness.
    pub fn new(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let expected = checked_product(dims)?;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dims {:?} (expected {})",
                values.len(),
                dims,
                expected
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let data = ArrayD::from_shape_vec(IxDyn(dims), values)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Self { data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            data: ArrayD::zeros(IxDyn(dims)),
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = ArrayD::from_shape_fn(IxDyn(dims), |idx| f(idx.slice()));
        Self { data }
    }

    pub fn from_array(data: ArrayD<f64>) -> Result<Self> {
        check_dims(data.shape())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self::from_array_unchecked(data))
    }

    pub(crate) fn from_array_unchecked(data: ArrayD<f64>) -> Self {
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Self { data }
    }

    pub fn dims(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn order(&self) -> usize {
        self.data.ndim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("tensor storage is always standard layout")
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.data
            .as_slice_mut()
            .expect("tensor storage is always standard layout")
    }

    pub fn view(&self) -> ArrayViewD<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &ArrayD<f64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[IxDyn(index)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.mapv(f),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.values().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn inf_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.values().iter().filter(|v| **v != 0.0).count()
    }

    /// Returns the tensor with its modes reordered: mode `j` of the result is mode `perm[j]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let order = self.order();
        let mut seen = vec![false; order];
        if perm.len() != order || perm.iter().any(|&p| p >= order || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::ShapeMismatch(format!(
                "{perm:?} is not a permutation of 0..{order}"
            )));
        }
        Ok(Self::from_array_unchecked(
            self.data.view().permuted_axes(IxDyn(perm)).to_owned(),
        ))
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::ShapeMismatch("tensor order must be at least 1".into()));
    }
    if dims.contains(&0) {
        return Err(Error::ShapeMismatch(format!("zero extent in dims {dims:?}")));
    }
    Ok(())
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::ShapeMismatch(format!("dims {dims:?} overflow")))
}

fn assert_same_dims(a: &DenseTensor, b: &DenseTensor) {
    assert_eq!(a.dims(), b.dims(), "tensor shape mismatch");
}

impl Add for &DenseTensor {
    type Output = DenseTensor;

    fn add(self, rhs: &DenseTensor) -> DenseTensor {
        assert_same_dims(self, rhs);
        DenseTensor {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &DenseTensor {
    type Output = DenseTensor;

    fn sub(self, rhs: &DenseTensor) -> DenseTensor {
        assert_same_dims(self, rhs);
        DenseTensor {
            data: &self.data - &rhs.data,
        }
    }
}

impl Mul<f64> for &DenseTensor {
    type Output = DenseTensor;

    fn mul(self, rhs: f64) -> DenseTensor {
        self.scaled(rhs)
    }
}

fn check_mode(order: usize, mode: usize) -> Result<()> {
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    Ok(())
}

/// Axis order used to lay out `M_k`: mode `k` first, then the rest descending.
fn unfolding_axes(order: usize, mode: usize) -> Vec<usize> {
    std::iter::once(mode)
        .chain((0..order).rev().filter(|&j| j != mode))
        .collect()
}

/// Mode-`mode` matricization `M_k(t)` (`n_k` rows, `Π_{j≠k} n_j` columns).
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    check_mode(t.order(), mode)?;
    let axes = unfolding_axes(t.order(), mode);
    let rows = t.dims()[mode];
    let cols = t.len() / rows;
    let flat: Vec<f64> = t.view().permuted_axes(IxDyn(&axes)).iter().copied().collect();
    Ok(Array2::from_shape_vec((rows, cols), flat).expect("unfolding size is consistent"))
}

/// Inverse of [`matricize`]: folds `m` back into a tensor of shape `dims`.
pub fn tensorize(m: &DenseMatrix, dims: &[usize], mode: usize) -> Result<DenseTensor> {
    check_dims(dims)?;
    check_mode(dims.len(), mode)?;
    let total = checked_product(dims)?;
    if m.nrows() != dims[mode] || m.nrows() * m.ncols() != total {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot fold into dims {:?} along mode {}",
            m.nrows(),
            m.ncols(),
            dims,
            mode
        )));
    }
    let axes = unfolding_axes(dims.len(), mode);
    let permuted_dims: Vec<usize> = axes.iter().map(|&a| dims[a]).collect();
    let mut inverse = vec![0; axes.len()];
    for (pos, &axis) in axes.iter().enumerate() {
        inverse[axis] = pos;
    }
    let folded = ArrayD::from_shape_vec(IxDyn(&permuted_dims), m.iter().copied().collect())
        .expect("fold size is consistent");
    Ok(DenseTensor::from_array_unchecked(
        folded.permuted_axes(IxDyn(&inverse)),
    ))
}

/// Mode-`k` product `t ×_k b`: replaces mode `k` by `b · M_k(t)`.
pub fn mode_product(t: &DenseTensor, b: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
    check_mode(t.order(), mode)?;
    if b.ncols() != t.dims()[mode] {
        return Err(Error::ShapeMismatch(format!(
            "mode-{} product: matrix has {} columns, tensor extent is {}",
            mode,
            b.ncols(),
            t.dims()[mode]
        )));
    }
    let product = b.dot(&matricize(t, mode)?);
    let mut dims = t.dims().to_vec();
    dims[mode] = b.nrows();
    tensorize(&product, &dims, mode)
}

/// Multilinear multiplication `(B1, ..., BN) . g`. A `None` entry is the identity on that mode.
pub fn multilinear_mul(mats: &[Option<&DenseMatrix>], g: &DenseTensor) -> Result<DenseTensor> {
    if mats.len() != g.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} matrices for an order-{} tensor",
            mats.len(),
            g.order()
        )));
    }
    for (k, m) in mats.iter().enumerate() {
        if let Some(m) = m {
            if m.ncols() != g.dims()[k] {
                return Err(Error::ShapeMismatch(format!(
                    "mode {}: matrix has {} columns, tensor extent is {}",
                    k,
                    m.ncols(),
                    g.dims()[k]
                )));
            }
        }
    }
    let mut out: Option<DenseTensor> = None;
    for (k, m) in mats.iter().enumerate() {
        if let Some(m) = m {
            let next = mode_product(out.as_ref().unwrap_or(g), m, k)?;
            out = Some(next);
        }
    }
    Ok(out.unwrap_or_else(|| g.clone()))
}

/// Kronecker product; block `(i, j)` of the result is `a[i, j] * b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    ndarray::linalg::kron(a, b)
}

/// Entrywise inner product `Σ a·b`.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(format!(
            "inner product of {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum())
}

/// Largest row ℓ2 norm.
pub fn l2inf_norm(m: &DenseMatrix) -> f64 {
    m.rows()
        .into_iter()
        .map(|row| row.dot(&row).sqrt())
        .fold(0.0, f64::max)
}

/// Largest row ℓ1 norm.
pub fn l1inf_norm(m: &DenseMatrix) -> f64 {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude of a matrix.
pub fn matrix_inf_norm(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn matrix_fro_norm(m: &DenseMatrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
