//! Dense linear algebra kernels: thin SVD, SPD inversion and orthonormalization.
//!
//! The SVD uses one-sided Jacobi rotations when the smaller dimension is at
//! most [`JACOBI_MAX_DIM`], and Householder bidiagonalization followed by
//! implicit-shift QR (Golub–Kahan–Reinsch) otherwise. Both paths are
//! deterministic for fixed input.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Largest min-dimension handled by the Jacobi path.
pub const JACOBI_MAX_DIM: usize = 64;

/// Column-orthogonality tolerance for one-sided Jacobi, per row of the input.
/// A pair is left alone once `|c_pᵀc_q| ≤ m ε ‖c_p‖ ‖c_q‖`; anything tighter
/// sits below the rounding noise of the dot product and may never settle.
const JACOBI_TOL: f64 = f64::EPSILON;

/// Condition number above which a Gram matrix is treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Leading singular triplets of a matrix.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Left singular vectors, `m x r`.
    pub u: DenseMatrix,
    /// Singular values, nonincreasing.
    pub s: Array1<f64>,
    /// Right singular vectors, `n x r`.
    pub v: DenseMatrix,
}

impl SvdResult {
    /// `U diag(s) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = &self.u * &self.s.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

/// Top-`r` singular triplets of `m`.
///
/// Sign convention: the largest-magnitude entry of every left singular vector
/// is positive (lowest index wins ties). Directions belonging to exactly zero
/// singular values are completed with canonical basis vectors.
pub fn thin_svd(m: &DenseMatrix, r: usize) -> Result<SvdResult> {
    let (rows, cols) = m.dim();
    let k = rows.min(cols);
    if r == 0 || r > k {
        return Err(Error::RankOutOfRange { rank: r, max: k });
    }
    let mut full = if rows >= cols {
        svd_tall(m.view())?
    } else {
        let t = svd_tall(m.t())?;
        SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    };
    complete_null_columns(&mut full);
    fix_signs(&mut full);
    Ok(SvdResult {
        u: full.u.slice(s![.., ..r]).to_owned(),
        s: full.s.slice(s![..r]).to_owned(),
        v: full.v.slice(s![.., ..r]).to_owned(),
    })
}

/// All `min(m, n)` singular values, nonincreasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Array1<f64>> {
    let k = m.nrows().min(m.ncols());
    Ok(thin_svd(m, k)?.s)
}

/// Spectral norm.
pub fn op_norm(m: &DenseMatrix) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(thin_svd(m, 1)?.s[0])
}

/// Top-`r` left singular vectors and values of `m`.
///
/// When `m` is much wider than tall the `rows x rows` Gram matrix `m m^T` is
/// decomposed instead; only the left factor is produced either way.
pub fn left_singular(m: &DenseMatrix, r: usize) -> Result<(DenseMatrix, Array1<f64>)> {
    let (rows, cols) = m.dim();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::RankOutOfRange {
            rank: r,
            max: rows.min(cols),
        });
    }
    if cols > 4 * rows {
        let gram = m.dot(&m.t());
        let eig = thin_svd(&gram, r)?;
        let s = eig.s.mapv(|v| v.max(0.0).sqrt());
        Ok((eig.u, s))
    } else {
        let svd = thin_svd(m, r)?;
        Ok((svd.u, svd.s))
    }
}

/// Full SVD of a matrix with `rows >= cols`.
fn svd_tall(a: ArrayView2<f64>) -> Result<SvdResult> {
    debug_assert!(a.nrows() >= a.ncols());
    if a.ncols() <= JACOBI_MAX_DIM {
        jacobi_svd(a)
    } else {
        golub_kahan_svd(a)
    }
}

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix.
pub(crate) fn jacobi_svd(a: ArrayView2<f64>) -> Result<SvdResult> {
    let (m, n) = a.dim();
    // Column-major working copies so each column is contiguous.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    // Columns below this squared norm are numerically zero and never rotated.
    let fro2: f64 = a.iter().map(|v| v * v).sum();
    let negligible = fro2 * f64::EPSILON * f64::EPSILON;
    let max_sweeps = 100 * n.max(1);
    let mut converged = n < 2;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        alpha += cp[i] * cp[i];
                        beta += cq[i] * cq[i];
                        gamma += cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= JACOBI_TOL * m as f64 * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate_pair(&mut cols, p, q, c, sn);
                rotate_pair(&mut vcols, p, q, c, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: max_sweeps });
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| {
            let sq: f64 = c.iter().map(|v| v * v).sum();
            if sq <= negligible {
                0.0
            } else {
                sq.sqrt()
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = Array2::zeros((m, n));
    let mut v = Array2::zeros((n, n));
    let mut s = Array1::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s[dst] = sigma;
        if sigma > 0.0 {
            for i in 0..m {
                u[[i, dst]] = cols[src][i] / sigma;
            }
        }
        for i in 0..n {
            v[[i, dst]] = vcols[src][i];
        }
    }
    Ok(SvdResult { u, s, v })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Golub–Kahan–Reinsch SVD of a tall matrix: Householder bidiagonalization
/// followed by implicit-shift QR sweeps on the bidiagonal.
pub(crate) fn golub_kahan_svd(a_in: ArrayView2<f64>) -> Result<SvdResult> {
    let (m, n) = a_in.dim();
    debug_assert!(m >= n);
    let mut a = a_in.to_owned();
    let nu = n;
    let mut sv = vec![0.0; n.min(m + 1)];
    let mut u = Array2::<f64>::zeros((m, nu));
    let mut v = Array2::<f64>::zeros((n, n));
    let mut e = vec![0.0; n];
    let mut work = vec![0.0; m];

    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            // Householder for column k; diagonal goes to sv[k].
            let mut norm = 0.0f64;
            for i in k..m {
                norm = norm.hypot(a[[i, k]]);
            }
            sv[k] = norm;
            if sv[k] != 0.0 {
                if a[[k, k]] < 0.0 {
                    sv[k] = -sv[k];
                }
                for i in k..m {
                    a[[i, k]] /= sv[k];
                }
                a[[k, k]] += 1.0;
            }
            sv[k] = -sv[k];
        }
        for j in k + 1..n {
            if k < nct && sv[k] != 0.0 {
                let mut t = 0.0;
                for i in k..m {
                    t += a[[i, k]] * a[[i, j]];
                }
                t = -t / a[[k, k]];
                for i in k..m {
                    a[[i, j]] += t * a[[i, k]];
                }
            }
            e[j] = a[[k, j]];
        }
        if k < nct {
            for i in k..m {
                u[[i, k]] = a[[i, k]];
            }
        }
        if k < nrt {
            // Householder for row k; superdiagonal goes to e[k].
            let mut norm = 0.0f64;
            for &ei in &e[k + 1..n] {
                norm = norm.hypot(ei);
            }
            e[k] = norm;
            if e[k] != 0.0 {
                if e[k + 1] < 0.0 {
                    e[k] = -e[k];
                }
                let ek = e[k];
                for ei in &mut e[k + 1..n] {
                    *ei /= ek;
                }
                e[k + 1] += 1.0;
            }
            e[k] = -e[k];
            if k + 1 < m && e[k] != 0.0 {
                for w in &mut work[k + 1..m] {
                    *w = 0.0;
                }
                for j in k + 1..n {
                    for i in k + 1..m {
                        work[i] += e[j] * a[[i, j]];
                    }
                }
                for j in k + 1..n {
                    let t = -e[j] / e[k + 1];
                    for i in k + 1..m {
                        a[[i, j]] += t * work[i];
                    }
                }
            }
            for i in k + 1..n {
                v[[i, k]] = e[i];
            }
        }
    }

    let mut p = n.min(m + 1);
    if nct < n {
        sv[nct] = a[[nct, nct]];
    }
    if m < p {
        sv[p - 1] = 0.0;
    }
    if nrt + 1 < p {
        e[nrt] = a[[nrt, p - 1]];
    }
    e[p - 1] = 0.0;

    // Accumulate U.
    for j in nct..nu {
        for i in 0..m {
            u[[i, j]] = 0.0;
        }
        u[[j, j]] = 1.0;
    }
    for k in (0..nct).rev() {
        if sv[k] != 0.0 {
            for j in k + 1..nu {
                let mut t = 0.0;
                for i in k..m {
                    t += u[[i, k]] * u[[i, j]];
                }
                t = -t / u[[k, k]];
                for i in k..m {
                    u[[i, j]] += t * u[[i, k]];
                }
            }
            for i in k..m {
                u[[i, k]] = -u[[i, k]];
            }
            u[[k, k]] += 1.0;
            for i in 0..k {
                u[[i, k]] = 0.0;
            }
        } else {
            for i in 0..m {
                u[[i, k]] = 0.0;
            }
            u[[k, k]] = 1.0;
        }
    }

    // Accumulate V.
    for k in (0..n).rev() {
        if k < nrt && e[k] != 0.0 {
            for j in k + 1..nu {
                let mut t = 0.0;
                for i in k + 1..n {
                    t += v[[i, k]] * v[[i, j]];
                }
                t = -t / v[[k + 1, k]];
                for i in k + 1..n {
                    v[[i, j]] += t * v[[i, k]];
                }
            }
        }
        for i in 0..n {
            v[[i, k]] = 0.0;
        }
        v[[k, k]] = 1.0;
    }

    // Implicit-shift QR on the bidiagonal (sv, e).
    let pp = p - 1;
    let eps = f64::EPSILON;
    let tiny = 2f64.powi(-966);
    let max_steps = 100 * n.max(1) * n.max(1);
    let mut steps = 0usize;
    while p > 0 {
        // Find the largest k < p-1 with negligible e[k]; k = None means none.
        let mut k: isize = p as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if e[ku].abs() <= tiny + eps * (sv[ku].abs() + sv[ku + 1].abs()) {
                e[ku] = 0.0;
                break;
            }
            k -= 1;
        }
        let kase;
        if k == p as isize - 2 {
            kase = 4;
        } else {
            let mut ks: isize = p as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = (if ksu != p { e[ksu].abs() } else { 0.0 })
                    + (if ks != k + 1 { e[ksu - 1].abs() } else { 0.0 });
                if sv[ksu].abs() <= tiny + eps * t {
                    sv[ksu] = 0.0;
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                kase = 3;
            } else if ks == p as isize - 1 {
                kase = 1;
            } else {
                kase = 2;
                k = ks;
            }
        }
        let k = (k + 1) as usize;

        match kase {
            // Deflate negligible sv[p-1].
            1 => {
                let mut f = e[p - 2];
                e[p - 2] = 0.0;
                for j in (k..=p - 2).rev() {
                    let t = sv[j].hypot(f);
                    let cs = sv[j] / t;
                    let sn = f / t;
                    sv[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] *= cs;
                    }
                    rotate_columns(&mut v, j, p - 1, cs, sn);
                }
            }
            // Split at negligible sv[k-1].
            2 => {
                let mut f = e[k - 1];
                e[k - 1] = 0.0;
                for j in k..p {
                    let t = sv[j].hypot(f);
                    let cs = sv[j] / t;
                    let sn = f / t;
                    sv[j] = t;
                    f = -sn * e[j];
                    e[j] *= cs;
                    rotate_columns(&mut u, j, k - 1, cs, sn);
                }
            }
            // One QR step with Wilkinson-style shift.
            3 => {
                steps += 1;
                if steps > max_steps {
                    return Err(Error::SvdNoConvergence { sweeps: steps });
                }
                let scale = sv[p - 1]
                    .abs()
                    .max(sv[p - 2].abs())
                    .max(e[p - 2].abs())
                    .max(sv[k].abs())
                    .max(e[k].abs());
                let sp = sv[p - 1] / scale;
                let spm1 = sv[p - 2] / scale;
                let epm1 = e[p - 2] / scale;
                let sk = sv[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = 0.0;
                if b != 0.0 || c != 0.0 {
                    shift = (b * b + c).sqrt();
                    if b < 0.0 {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..p - 1 {
                    let mut t = f.hypot(g);
                    let mut cs = f / t;
                    let mut sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * sv[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * sv[j];
                    g = sn * sv[j + 1];
                    sv[j + 1] *= cs;
                    rotate_columns(&mut v, j, j + 1, cs, sn);
                    t = f.hypot(g);
                    cs = f / t;
                    sn = g / t;
                    sv[j] = t;
                    f = cs * e[j] + sn * sv[j + 1];
                    sv[j + 1] = -sn * e[j] + cs * sv[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] *= cs;
                    if j < m - 1 {
                        rotate_columns(&mut u, j, j + 1, cs, sn);
                    }
                }
                e[p - 2] = f;
            }
            // Converged: make sv[k] nonnegative and bubble it into place.
            _ => {
                let mut k = k;
                if sv[k] <= 0.0 {
                    sv[k] = if sv[k] < 0.0 { -sv[k] } else { 0.0 };
                    for i in 0..=pp {
                        v[[i, k]] = -v[[i, k]];
                    }
                }
                while k < pp {
                    if sv[k] >= sv[k + 1] {
                        break;
                    }
                    sv.swap(k, k + 1);
                    if k < n - 1 {
                        swap_columns(&mut v, k, k + 1);
                    }
                    if k < m - 1 {
                        swap_columns(&mut u, k, k + 1);
                    }
                    k += 1;
                }
                p -= 1;
            }
        }
    }

    Ok(SvdResult {
        u,
        s: Array1::from_vec(sv[..n].to_vec()),
        v,
    })
}

/// `(col_j, col_k) <- (cs*col_j + sn*col_k, -sn*col_j + cs*col_k)`.
fn rotate_columns(m: &mut DenseMatrix, j: usize, k: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let a = m[[i, j]];
        let b = m[[i, k]];
        m[[i, j]] = cs * a + sn * b;
        m[[i, k]] = -sn * a + cs * b;
    }
}

fn swap_columns(m: &mut DenseMatrix, j: usize, k: usize) {
    for i in 0..m.nrows() {
        m.swap([i, j], [i, k]);
    }
}

/// Replaces left vectors of exactly-zero singular values with canonical basis
/// completions orthogonal to the vectors already accepted.
fn complete_null_columns(svd: &mut SvdResult) {
    let (m, k) = svd.u.dim();
    for j in 0..k {
        let norm = svd.u.column(j).dot(&svd.u.column(j)).sqrt();
        if svd.s[j] > 0.0 && (norm - 1.0).abs() < 1e-6 {
            continue;
        }
        let accepted = svd.u.slice(s![.., ..j]).to_owned();
        let mut best: Option<(f64, Array1<f64>)> = None;
        for i in 0..m {
            let mut cand = Array1::zeros(m);
            cand[i] = 1.0;
            for _ in 0..2 {
                let coeffs = accepted.t().dot(&cand);
                cand = &cand - &accepted.dot(&coeffs);
            }
            let r = cand.dot(&cand).sqrt();
            if best.as_ref().is_none_or(|(b, _)| r > *b + 1e-12) {
                best = Some((r, cand));
            }
        }
        let (r, cand) = best.expect("m >= 1");
        svd.u.column_mut(j).assign(&(cand / r));
    }
}

fn fix_signs(svd: &mut SvdResult) {
    for j in 0..svd.u.ncols() {
        let col = svd.u.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            svd.u.column_mut(j).mapv_inplace(|x| -x);
            svd.v.column_mut(j).mapv_inplace(|x| -x);
        }
    }
}

/// Cholesky factor `L` (lower) of a symmetric positive-definite matrix.
fn cholesky(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.nrows();
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d.is_nan() || d <= 0.0 {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in j + 1..n {
            let mut x = a[[i, j]];
            for k in 0..j {
                x -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = x / djj;
        }
    }
    Some(l)
}

fn norm1(a: &DenseMatrix) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a symmetric positive-definite Gram matrix.
///
/// Fails with [`Error::SingularGram`] (tagged with `mode`) when the Cholesky
/// factorization breaks down or the 1-norm condition estimate exceeds
/// [`GRAM_CONDITION_LIMIT`].
pub fn spd_inverse(a: &DenseMatrix, mode: usize) -> Result<DenseMatrix> {
    let n = a.nrows();
    let l = cholesky(a).ok_or(Error::SingularGram {
        mode,
        condition: f64::INFINITY,
    })?;
    // Solve L L^T X = I column by column.
    let mut inv = Array2::zeros((n, n));
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut x = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                x -= l[[i, k]] * y[k];
            }
            y[i] = x / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut x = y[i];
            for k in i + 1..n {
                x -= l[[k, i]] * inv[[k, c]];
            }
            inv[[i, c]] = x / l[[i, i]];
        }
    }
    let condition = norm1(a) * norm1(&inv);
    if !condition.is_finite() || condition > GRAM_CONDITION_LIMIT {
        return Err(Error::SingularGram { mode, condition });
    }
    Ok(inv)
}

/// Inverse of a general square matrix by Gauss–Jordan elimination with
/// partial pivoting. `None` when a pivot vanishes.
pub fn invert(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "invert needs a square matrix");
    let mut work = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| work[[i, col]].abs().total_cmp(&work[[j, col]].abs()))?;
        if work[[pivot, col]] == 0.0 || !work[[pivot, col]].is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                work.swap([pivot, j], [col, j]);
                inv.swap([pivot, j], [col, j]);
            }
        }
        let d = work[[col, col]];
        for j in 0..n {
            work[[col, j]] /= d;
            inv[[col, j]] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[[i, col]];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work[[i, j]] -= f * work[[col, j]];
                inv[[i, j]] -= f * inv[[col, j]];
            }
        }
    }
    Some(inv)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁` (infinite when singular).
pub fn condition_1norm(a: &DenseMatrix) -> f64 {
    match invert(a) {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// Orthonormal basis for the columns of a full-column-rank matrix (thin QR,
/// `R` with positive diagonal). Uses modified Gram–Schmidt with one
/// reorthogonalization pass.
pub fn orthonormalize(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n) = a.dim();
    if n > m {
        return Err(Error::ShapeMismatch(format!(
            "cannot orthonormalize {n} columns in dimension {m}"
        )));
    }
    let mut q = a.clone();
    for j in 0..n {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm <= f64::EPSILON * (m as f64) {
            return Err(Error::ShapeMismatch("rank-deficient input to orthonormalize".into()));
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(q)
}

/// `‖A^T A − I‖_F`.
pub fn orthonormality_defect(a: &DenseMatrix) -> f64 {
    let g = a.t().dot(a);
    let n = g.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = g[[i, j]] - if i == j { 1.0 } else { 0.0 };
            acc += d * d;
        }
    }
    acc.sqrt()
}
