//! SVD-backed numerical rank, pseudoinverse, minimum-norm least squares and
//! null-space bases.
//!
//! Every rank decision in the crate goes through [`RankPolicy`]: a singular
//! value counts when `σ_i > tol · σ_max`, where `tol` defaults to
//! `max(rows, cols) · ε` and can be replaced process-wide with
//! [`set_rank_tolerance`].

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Scalar};

static RANK_TOL_BITS: AtomicU64 = AtomicU64::new(0);

/// Overrides the relative rank tolerance for the whole process.
///
/// `None` (or a non-positive value) restores the dimension-scaled default.
pub fn set_rank_tolerance(tol: Option<f64>) {
    let bits = match tol {
        Some(t) if t > 0.0 && t.is_finite() => t.to_bits(),
        _ => 0,
    };
    RANK_TOL_BITS.store(bits, Ordering::Relaxed);
}

/// Current process-wide override, if any.
pub fn rank_tolerance_override() -> Option<f64> {
    match RANK_TOL_BITS.load(Ordering::Relaxed) {
        0 => None,
        bits => Some(f64::from_bits(bits)),
    }
}

/// Relative threshold applied to singular values of a `rows × cols` matrix.
#[derive(Debug, Clone, Copy)]
pub struct RankPolicy<T> {
    pub relative: T,
}

impl<T: Scalar> RankPolicy<T> {
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        let relative = match rank_tolerance_override() {
            Some(t) => lit(t),
            None => lit::<T>(rows.max(cols) as f64) * T::default_epsilon(),
        };
        RankPolicy { relative }
    }

    /// Absolute cutoff given the largest singular value.
    pub fn cutoff(&self, sigma_max: T) -> T {
        self.relative * sigma_max
    }
}

/// Thin SVD `m = u · diag(s) · vᵀ` with `s` sorted largest first.
///
/// A Householder QR of the tall orientation reduces the problem to its
/// square triangular factor, which is diagonalised by one-sided Jacobi
/// rotations. nalgebra's bidiagonal SVD can return factors that do not
/// reproduce rank-deficient triangular inputs, so it is not used here.
struct ThinSvd<T: Scalar> {
    u: DMatrix<T>,
    s: Vec<T>,
    v: DMatrix<T>,
}

const MAX_SWEEPS: usize = 80;

fn thin_svd<T: Scalar>(m: &DMatrix<T>) -> ThinSvd<T> {
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose());
        return ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let qr = m.clone().qr();
    let (q, mut g) = (qr.q(), qr.r());
    let k = g.ncols();
    let mut v = DMatrix::<T>::identity(k, k);
    let eps = T::default_epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dot(&g.column(j));
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..k).map(|i| g.column(i).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u_r = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > T::zero() {
            u_r.set_column(dst, &(g.column(src) / norms[src]));
        }
    }
    ThinSvd {
        u: q * u_r,
        s: order.iter().map(|&i| norms[i]).collect(),
        v: v.select_columns(&order),
    }
}

/// Applies the plane rotation `[c s; −s c]` to columns `i` and `j`.
fn rotate<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, c: T, s: T) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * a - s * b;
        m[(r, j)] = s * a + c * b;
    }
}

fn rank_of<T: Scalar>(s: &[T], rows: usize, cols: usize) -> usize {
    let Some(&smax) = s.first() else {
        return 0;
    };
    if smax <= T::zero() {
        return 0;
    }
    let cutoff = RankPolicy::for_shape(rows, cols).cutoff(smax);
    s.iter().filter(|&&x| x > cutoff).count()
}

/// Singular values of `m`, largest first. Empty for degenerate shapes.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    thin_svd(m).s
}

/// Numerical rank of `m`.
pub fn rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    rank_of(&singular_values(m), m.nrows(), m.ncols())
}

/// Moore-Penrose pseudoinverse with the shared rank policy.
pub fn pinv<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(cols, rows);
    if m.is_empty() {
        return out;
    }
    let svd = thin_svd(m);
    for i in 0..rank_of(&svd.s, rows, cols) {
        // out += v_i * u_i^T / s_i
        out.ger(
            T::one() / svd.s[i],
            &svd.v.column(i),
            &svd.u.column(i),
            T::one(),
        );
    }
    out
}

/// Minimum-norm least-squares solution of `a · x = b` and the Euclidean
/// norm of the defect `a · x − b`.
pub fn lstsq_min_norm<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> (DVector<T>, T) {
    assert_eq!(a.nrows(), b.len(), "lstsq: row mismatch");
    let x = pinv(a) * b;
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Orthonormal basis of the null space of `m`, one basis vector per column.
pub fn null_space<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let svd = thin_svd(m);
    let r = rank_of(&svd.s, rows, cols);
    if svd.v.ncols() == cols {
        return svd.v.columns(r, cols - r).into_owned();
    }
    if r == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Complete the row-space basis to an orthonormal basis of the whole
    // space; the trailing Householder columns span its complement.
    let mut padded = DMatrix::zeros(cols, cols);
    padded.columns_mut(0, r).copy_from(&svd.v.columns(0, r));
    let q = padded.qr().q();
    q.columns(r, cols - r).into_owned()
}

/// Vertically stacks blocks that share a column count.
pub fn vstack<T: Scalar>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Concatenates vectors end to end.
pub fn vconcat<T: Scalar>(parts: &[&DVector<T>]) -> DVector<T> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(*p);
        r += p.len();
    }
    out
}
