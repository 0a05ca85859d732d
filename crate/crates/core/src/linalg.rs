//! Dense complex matrices and the handful of factorizations the secrecy
//! machinery needs: SVD (one-sided Jacobi), nullspace extraction, Hermitian
//! log-determinants via Cholesky, and the complex-to-real block embedding
//! used by the learning modules.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Dense complex matrix, row-major. All entries are finite.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    data: Array2<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{}", self.rows(), self.cols())?;
        for row in self.data.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        let data = Array2::from_shape_vec((rows, cols), entries)
            .map_err(|e| Error::Argument(e.to_string()))?;
        Ok(Self { data })
    }

    /// Real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            data: Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex64::ONE } else { Complex64::ZERO })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Column vector from complex entries.
    pub fn column_vector(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), 1, |i, _| entries[i])
    }


    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<Complex64> {
        self.data.iter().copied().collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.t().to_owned(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            data: self.data.mapv(|z| z * k),
        }
    }

    pub fn scale_complex(&self, k: Complex64) -> Self {
        Self {
            data: self.data.mapv(|z| z * k),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows().min(self.cols())).map(|i| self.data[(i, i)]).sum()
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        self.data.column(j).to_vec()
    }

    /// Matrix formed by the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows(), cols.len(), |i, k| self.data[(i, cols[k])])
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols() {
            return Err(Error::Argument(format!(
                "vector of length {} against matrix with {} columns",
                x.len(),
                self.cols()
            )));
        }
        Ok(self
            .data
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Product `self * rhs`, checking the inner dimension.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::Argument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(self * rhs)
    }

    /// `(self + self†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        Self {
            data: (&self.data + &adj.data).mapv(|z| z * 0.5),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.data[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.data[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    /// Panics on an inner-dimension mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "inner dimension mismatch");
        let (m, k) = self.shape();
        let n = rhs.cols();
        let mut out = Array2::<Complex64>::zeros((m, n));
        for i in 0..m {
            for p in 0..k {
                let a = self.data[(i, p)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs.data[(p, j)];
                }
            }
        }
        ComplexMatrix { data: out }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

/// Thin-sigma SVD `A = U · diag(σ) · V†` with full unitary `U` (m×m) and `V` (n×n).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    /// Descending, length `min(m, n)`.
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    /// Number of singular values above `tol · σ₁`.
    pub fn rank(&self, tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > tol * top).count()
    }

    /// `U · diag(σ) · V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let k = self.sigma.len();
        ComplexMatrix::from_fn(m, n, |i, j| {
            (0..k)
                .map(|p| self.u[(i, p)] * self.sigma[p] * self.v[(j, p)].conj())
                .sum()
        })
    }
}

fn col_dot(a: &Array2<Complex64>, p: usize, q: usize) -> Complex64 {
    // p† q
    a.column(p)
        .iter()
        .zip(a.column(q).iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

fn col_norm_sqr(a: &Array2<Complex64>, p: usize) -> f64 {
    a.column(p).iter().map(|z| z.norm_sqr()).sum()
}

/// Applies the real rotation `[c -s; s c]` to columns (p, q) after rotating
/// column q by `phase`.
fn rotate_columns(a: &mut Array2<Complex64>, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for i in 0..a.nrows() {
        let xp = a[(i, p)];
        let xq = a[(i, q)] * phase;
        a[(i, p)] = xp * c - xq * s;
        a[(i, q)] = xp * s + xq * c;
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations on the
/// columns of `a`. Accurate to working precision, including for rank-deficient
/// inputs; `V` is always a product of unitary rotations.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Argument("svd of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::Argument("svd input has non-finite entries".into()));
    }
    let mut w = a.data.clone();
    let mut v = Array2::<Complex64>::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex64::ONE
        } else {
            Complex64::ZERO
        }
    });
    let scale = a.frobenius_norm();
    let negligible = (scale * f64::EPSILON).powi(2) * 1e-4;
    let orth_tol = (m as f64) * f64::EPSILON;
    let mut converged = scale == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = col_norm_sqr(&w, p);
                let beta = col_norm_sqr(&w, q);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = col_dot(&w, p, q);
                let g = gamma.norm();
                if g <= orth_tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s, phase);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "jacobi svd did not converge after {JACOBI_MAX_SWEEPS} sweeps on a {m}x{n} input \
             (frobenius norm {scale:.3e})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| col_norm_sqr(&w, j).sqrt()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let k = m.min(n);
    let sigma: Vec<f64> = order.iter().take(k).map(|&j| norms[j]).collect();
    let v_sorted = Array2::from_shape_fn((n, n), |(i, j)| v[(i, order[j])]);

    // Left vectors from the leading columns, re-orthogonalized in order so that
    // tiny singular values cannot spoil unitarity, then completed to a basis.
    let mut u_cols: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for (slot, &j) in order.iter().take(k).enumerate() {
        let s = sigma[slot];
        if s > 0.0 {
            let col: Vec<Complex64> = w.column(j).iter().map(|z| z / s).collect();
            if let Some(q) = orthonormalize_against(&u_cols, col) {
                u_cols.push(q);
                continue;
            }
        }
        u_cols.push(next_basis_vector(&u_cols, m));
    }
    while u_cols.len() < m {
        u_cols.push(next_basis_vector(&u_cols, m));
    }
    let u = Array2::from_shape_fn((m, m), |(i, j)| u_cols[j][i]);

    Ok(SvdResult {
        u: ComplexMatrix { data: u },
        sigma,
        v: ComplexMatrix { data: v_sorted },
    })
}

/// Two passes of modified Gram-Schmidt; `None` if `col` is (numerically) in the span.
fn orthonormalize_against(basis: &[Vec<Complex64>], mut col: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let start: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let proj: Complex64 = b.iter().zip(&col).map(|(x, y)| x.conj() * y).sum();
            for (c, x) in col.iter_mut().zip(b) {
                *c -= proj * x;
            }
        }
    }
    let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 0.5 * start {
        return None;
    }
    Some(col.into_iter().map(|z| z / norm).collect())
}

fn next_basis_vector(basis: &[Vec<Complex64>], dim: usize) -> Vec<Complex64> {
    // The standard vector with the smallest overlap with the current basis
    // always survives projection.
    let mut best = (0, f64::INFINITY);
    for e in 0..dim {
        let overlap: f64 = basis.iter().map(|b| b[e].norm_sqr()).sum();
        if overlap < best.1 {
            best = (e, overlap);
        }
    }
    let mut unit = vec![Complex64::ZERO; dim];
    unit[best.0] = Complex64::ONE;
    orthonormalize_against(basis, unit).expect("standard vector outside a proper subspace")
}

/// Orthonormal basis (as columns) of the nullspace of `a`. Singular values at
/// or below `tol · σ₁` count as zero. Returns an `n × 0` matrix when `a` has
/// full column rank.
pub fn nullspace_basis(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("rank tolerance must be positive, got {tol}")));
    }
    let dec = svd(a)?;
    let rank = dec.rank(tol);
    let cols: Vec<usize> = (rank..a.cols()).collect();
    Ok(dec.v.select_columns(&cols))
}

/// Orthonormal basis of the column space of `a` (numerical rank by `tol`).
pub fn range_basis(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let dec = svd(a)?;
    let rank = dec.rank(tol);
    let cols: Vec<usize> = (0..rank).collect();
    Ok(dec.u.select_columns(&cols))
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
/// The input is symmetrized first.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, c) = a.shape();
    if n != c {
        return Err(Error::Argument(format!("cholesky of non-square {n}x{c} matrix")));
    }
    let h = a.hermitian_part();
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!(
                "matrix is not positive definite (pivot {j} = {d:.3e})"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(ComplexMatrix { data: l })
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn logdet_hpd(a: &ComplexMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok((0..l.rows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let l = cholesky(a)?;
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Argument(format!(
            "right-hand side has {} rows, system has {n}",
            b.rows()
        )));
    }
    let mut x = b.data.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(ComplexMatrix { data: x })
}

pub fn inverse_hpd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_hpd(a, &ComplexMatrix::identity(a.rows()))
}

/// Left pseudo-inverse `(A†A)⁻¹A†` of a full-column-rank matrix.
pub fn left_pinv(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let adj = a.adjoint();
    solve_hpd(&(&adj * a), &adj)
}

/// Nats to bits, for display.
/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `tol·σ_max` are treated as zero.
pub fn pinv(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let dec = svd(a)?;
    let rank = dec.rank(tol);
    let (m, n) = a.shape();
    let mut out = ComplexMatrix::zeros(n, m);
    for k in 0..rank {
        let inv = 1.0 / dec.sigma[k];
        for i in 0..n {
            let vik = dec.v[(i, k)] * inv;
            for j in 0..m {
                out[(i, j)] += vik * dec.u[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Real block embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealifiedMatrix(pub Array2<f64>);

impl RealifiedMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// `true` when the block structure is exact.
    pub fn has_block_structure(&self) -> bool {
        let (r, c) = self.0.dim();
        if r % 2 != 0 || c % 2 != 0 {
            return false;
        }
        let (m, n) = (r / 2, c / 2);
        (0..m).all(|i| {
            (0..n).all(|j| {
                self.0[(i, j)] == self.0[(i + m, j + n)] && self.0[(i, j + n)] == -self.0[(i + m, j)]
            })
        })
    }
}

pub fn realify(a: &ComplexMatrix) -> RealifiedMatrix {
    let (m, n) = a.shape();
    let mut out = Array2::<f64>::zeros((2 * m, 2 * n));
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + m, j)] = z.im;
            out[(i + m, j + n)] = z.re;
        }
    }
    RealifiedMatrix(out)
}

/// Stacks `[Re(x); Im(x)]`.
pub fn realify_vec(x: &[Complex64]) -> Array1<f64> {
    let n = x.len();
    Array1::from_shape_fn(2 * n, |i| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`realify_vec`].
pub fn complexify_vec(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[i + n])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        assert!(ComplexMatrix::new(2, 2, vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn svd_of_identity() {
        let dec = svd(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(dec.sigma, vec![1.0, 1.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dec.u[(i, j)].norm() - expected).abs() < 1e-15);
                assert!((dec.v[(i, j)].norm() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn svd_of_real_diagonal() {
        let a = ComplexMatrix::from_real(2, 2, &[3.0, 0.0, 0.0, 2.0]).unwrap();
        let dec = svd(&a).unwrap();
        assert_eq!(dec.sigma, vec![3.0, 2.0]);
        let a = ComplexMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 3.0]).unwrap();
        assert_eq!(svd(&a).unwrap().sigma, vec![3.0, 2.0]);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let dec = svd(&ComplexMatrix::zeros(2, 3)).unwrap();
        assert_eq!(dec.sigma, vec![0.0, 0.0]);
        assert_eq!(dec.rank(DEFAULT_RANK_TOL), 0);
        assert_eq!(nullspace_basis(&ComplexMatrix::zeros(2, 3), 1e-10).unwrap().cols(), 3);
    }

    #[test]
    fn svd_rejects_empty() {
        assert!(svd(&ComplexMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn nullspace_axis_aligned() {
        let a = ComplexMatrix::from_real(1, 3, &[1.0, 0.0, 0.0]).unwrap();
        let z = nullspace_basis(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(z.shape(), (3, 2));
        assert_eq!((&a * &z).frobenius_norm(), 0.0);
        for j in 0..2 {
            assert_eq!(z[(0, j)], Complex64::ZERO);
        }
    }

    #[test]
    fn nullspace_of_full_rank_square_is_empty() {
        let a = ComplexMatrix::new(
            3,
            3,
            vec![
                c(2.0, 1.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, -1.0),
                c(3.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.5, 0.5),
                c(4.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(nullspace_basis(&a, DEFAULT_RANK_TOL).unwrap().cols(), 0);
    }

    #[test]
    fn nullspace_rejects_bad_tolerance() {
        assert!(nullspace_basis(&ComplexMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn logdet_identity_and_diagonal() {
        for n in 1..5 {
            assert_eq!(logdet_hpd(&ComplexMatrix::identity(n)).unwrap(), 0.0);
        }
        let d = ComplexMatrix::diag_real(&[2.0, 3.0]);
        assert!((logdet_hpd(&d).unwrap() - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let d = ComplexMatrix::diag_real(&[1.0, -1.0]);
        assert!(matches!(logdet_hpd(&d), Err(Error::Domain(_))));
        let z = ComplexMatrix::zeros(2, 2);
        assert!(matches!(logdet_hpd(&z), Err(Error::Domain(_))));
    }

    #[test]
    fn logdet_symmetrizes_small_asymmetry() {
        let mut a = ComplexMatrix::diag_real(&[2.0, 2.0]);
        a[(0, 1)] = c(1e-14, 0.0);
        assert!((logdet_hpd(&a).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn realify_units() {
        let one = realify(&ComplexMatrix::new(1, 1, vec![c(1.0, 0.0)]).unwrap());
        assert_eq!(one.0, ndarray::array![[1.0, 0.0], [0.0, 1.0]]);
        let i = realify(&ComplexMatrix::new(1, 1, vec![c(0.0, 1.0)]).unwrap());
        assert_eq!(i.0, ndarray::array![[0.0, -1.0], [1.0, 0.0]]);
        assert!(i.has_block_structure());
    }

    #[test]
    fn realify_vec_round_trip() {
        let x = vec![c(1.0, 2.0), c(-3.0, 0.5)];
        let r = realify_vec(&x);
        assert_eq!(r.to_vec(), vec![1.0, -3.0, 2.0, 0.5]);
        assert_eq!(complexify_vec(r.as_slice().unwrap()), x);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        // An orthogonal projector is its own pseudo-inverse.
        let p = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let pi = pinv(&p, DEFAULT_RANK_TOL).unwrap();
        assert!((&pi - &p).frobenius_norm() < 1e-12);
        let wide = ComplexMatrix::from_real(1, 2, &[3.0, 4.0]).unwrap();
        let wi = pinv(&wide, DEFAULT_RANK_TOL).unwrap();
        assert!((&(&wide * &wi) - &ComplexMatrix::identity(1)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn solve_and_pinv() {
        let a = ComplexMatrix::new(2, 2, vec![c(4.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]).unwrap();
        let inv = inverse_hpd(&a).unwrap();
        let prod = &a * &inv;
        assert!((&prod - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-14);

        let tall = ComplexMatrix::new(3, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, -1.0)]).unwrap();
        let p = left_pinv(&tall).unwrap();
        assert!((&(&p * &tall) - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-13);
    }

    #[test]
    fn checked_matmul_reports_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(a.matmul(&ComplexMatrix::zeros(2, 3)).is_err());
        assert!(a.mul_vec(&[Complex64::ONE; 2]).is_err());
    }
}
