//! Dense small-matrix kernels.
//!
//! Everything here works on [`Matrix`], a plain row-major `f64` buffer. The
//! sizes involved are small (a handful of variables up to a few hundred), so
//! the routines favour clarity and determinism over blocking tricks.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative symmetry tolerance used by [`Matrix::is_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Matrices up to this order are diagonalized with cyclic Jacobi rotations;
/// larger ones go through Householder tridiagonalization and implicit QL.
pub const JACOBI_MAX_DIM: usize = 32;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::validation("ragged rows"));
        }
        Matrix::from_row_major(r, c, rows.concat())
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Matrix::zeros(a.len(), b.len());
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                m[(i, j)] = ai * bj;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Symmetry test: `max|A_ij - A_ji| <= 1e-12 * max(1, max|A_ij|)`.
    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = SYMMETRY_TOL * self.max_abs().max(1.0);
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::validation(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::validation(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `xᵀ A x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.mul_vec(x)?))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::validation(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Column-stacking vectorization.
pub fn vec(a: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.rows * a.cols);
    for j in 0..a.cols {
        for i in 0..a.rows {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::validation(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    let mut m = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = v[j * rows + i];
        }
    }
    Ok(m)
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (br, bc) = (b.rows, b.cols);
    let mut out = Matrix::zeros(a.rows * br, a.cols * bc);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The commutation matrix `K_p`, i.e. the `p² x p²` permutation with
/// `K_p vec(A) = vec(Aᵀ)` for every `p x p` matrix `A`.
pub fn commutation_matrix(p: usize) -> Matrix {
    let mut k = Matrix::zeros(p * p, p * p);
    // vec(A)[j*p + i] = A_ij and vec(Aᵀ)[i*p + j] = A_ij.
    for i in 0..p {
        for j in 0..p {
            k[(i * p + j, j * p + i)] = 1.0;
        }
    }
    k
}

/// Eigenvalues in non-increasing order and the matching unit eigenvectors as
/// the columns of `vectors`.
///
/// Each column is sign-normalized so that its entry of largest magnitude is
/// positive (the lowest row index wins ties). Under exactly repeated
/// eigenvalues the eigenvectors are not unique; the solver's own ordering is
/// kept in that case.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }

    /// `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let p = self.dim();
        let mut out = Matrix::zeros(p, p);
        for k in 0..p {
            let lam = self.values[k];
            for i in 0..p {
                let vik = self.vectors[(i, k)] * lam;
                for j in 0..p {
                    out[(i, j)] += vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn sym_eigen(a: &Matrix) -> Result<EigenSystem> {
    if !a.is_square() || a.rows == 0 {
        return Err(Error::validation(format!(
            "sym_eigen needs a non-empty square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if !a.is_finite() {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    if !a.is_symmetric() {
        return Err(Error::validation("matrix is not symmetric"));
    }
    let (values, vectors) = if a.rows <= JACOBI_MAX_DIM {
        jacobi(a)
    } else {
        tridiagonal_ql(a)
    };
    Ok(finish(values, vectors))
}

fn finish(values: Vec<f64>, vectors: Matrix) -> EigenSystem {
    let p = values.len();
    let mut order: Vec<usize> = (0..p).collect();
    // Stable: equal eigenvalues keep the solver's order.
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut out = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut best = 0;
        for i in 1..p {
            if vectors[(i, src)].abs() > vectors[(best, src)].abs() {
                best = i;
            }
        }
        let sign = if vectors[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            out[(i, dst)] = sign * vectors[(i, src)];
        }
    }
    EigenSystem {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: out,
    }
}

/// Cyclic Jacobi; stops once the off-diagonal Frobenius norm drops below
/// `1e-13 * ||A||_F`.
fn jacobi(input: &Matrix) -> (Vec<f64>, Matrix) {
    const MAX_SWEEPS: usize = 100;
    let n = input.rows;
    let mut a = input.clone();
    // Symmetrize exactly so that row and column updates stay consistent.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let total = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 1e-13 * total;

    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Householder reduction to tridiagonal form followed by the implicit QL
/// iteration (the EISPACK `tred2`/`tql2` pair).
fn tridiagonal_ql(input: &Matrix) -> (Vec<f64>, Matrix) {
    let n = input.rows;
    // `input` is symmetric, so it is its own transpose.
    let mut w = input.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut w, &mut d, &mut e);
    tql2(&mut w, &mut d, &mut e);
    (d, w.transpose())
}

/// Operates on the transpose `w = Vᵀ` of EISPACK's accumulator so that the
/// O(p³) inner loops walk rows.
fn tred2(w: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = w[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[(j, i - 1)];
                w[(j, i)] = 0.0;
                w[(i, j)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                w[(i, j)] = f;
                g = e[j] + w[(j, j)] * f;
                for k in j + 1..i {
                    g += w[(j, k)] * d[k];
                    e[k] += w[(j, k)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    w[(j, k)] -= f * e[k] + g * d[k];
                }
                d[j] = w[(j, i - 1)];
                w[(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        w[(i, n - 1)] = w[(i, i)];
        w[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = w[(i + 1, k)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += w[(i + 1, k)] * w[(j, k)];
                }
                for k in 0..=i {
                    w[(j, k)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            w[(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[(j, n - 1)];
        w[(j, n - 1)] = 0.0;
    }
    w[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// `vt` holds the eigenvectors as rows.
fn tql2(vt: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = vt.data.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..];
                    let row_next = &mut tail[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::validation("Cholesky needs a square matrix"));
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) {
                return Err(Error::degenerate(format!(
                    "matrix is not positive definite (pivot {j} = {diag:e})"
                )));
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        self.forward_in_place(&mut y);
        y
    }

    /// [`Cholesky::forward`] overwriting `y`, which holds `b` on entry.
    pub fn forward_in_place(&self, y: &mut [f64]) {
        for i in 0..self.lower.rows {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &y[..i]);
            y[i] = (y[i] - s) / row[i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lower.rows;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        let y = self.forward(b);
        dot(&y, &y)
    }
}

/// Modified Gram-Schmidt on `vectors`, in order.
///
/// A vector whose residual norm falls below `1e-12` yields
/// [`Error::GramSchmidt`] carrying its 1-based position.
pub fn gram_schmidt(vectors: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let p = first.len();
    if vectors.len() > p {
        return Err(Error::validation("too many vectors for the ambient dimension"));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (idx, v) in vectors.iter().enumerate() {
        if v.len() != p {
            return Err(Error::validation(format!(
                "vector {} has length {}, expected {p}",
                idx + 1,
                v.len()
            )));
        }
        let mut x = v.to_vec();
        for b in &out {
            let c = dot(b, &x);
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= c * bi;
            }
        }
        let nx = norm(&x);
        if nx < 1e-12 {
            return Err(Error::GramSchmidt {
                index: idx + 1,
                norm: nx,
            });
        }
        x.iter_mut().for_each(|xi| *xi /= nx);
        out.push(x);
    }
    Ok(out)
}

/// Gram-Schmidt completion of `theta0` by the vectors in `vectors`.
///
/// Returns `t_1, ..., t_m` where `t_i` is `vectors[i]` projected onto the
/// orthogonal complement of `span{theta0, t_1, ..., t_{i-1}}` and normalized.
/// Degeneracy errors name the position within `vectors`.
pub fn gram_schmidt_complement(theta0: &[f64], vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if (norm(theta0) - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!(
            "theta0 must be a unit vector (norm {})",
            norm(theta0)
        )));
    }
    let mut seq: Vec<&[f64]> = Vec::with_capacity(vectors.len() + 1);
    seq.push(theta0);
    seq.extend(vectors.iter().map(Vec::as_slice));
    let mut out = gram_schmidt(&seq).map_err(|e| match e {
        Error::GramSchmidt { index, norm } => Error::GramSchmidt { index: index - 1, norm },
        other => other,
    })?;
    out.remove(0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut a = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    fn check_invariants(a: &Matrix, es: &EigenSystem) {
        let p = a.rows();
        for w in es.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let vtv = es.vectors.transpose().matmul(&es.vectors).unwrap();
        let orth = vtv.sub(&Matrix::identity(p)).unwrap().max_abs();
        assert!(orth <= 1e-10, "orthonormality residual {orth}");
        let rec = es.reconstruct().sub(a).unwrap().max_abs();
        assert!(rec <= 1e-9 * a.max_abs().max(1.0), "reconstruction residual {rec}");
        for j in 0..p {
            let col = es.vector(j);
            let mut best = 0;
            for i in 1..p {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] > 0.0);
        }
    }

    #[test]
    fn diagonal_matrix() {
        let es = sym_eigen(&Matrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(es.values, vec![3.0, 1.0]);
        assert_eq!(es.vectors, Matrix::identity(2));
    }

    #[test]
    fn swap_matrix() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let es = sym_eigen(&a).unwrap();
        assert!((es.values[0] - 1.0).abs() < 1e-15);
        assert!((es.values[1] + 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = es.vector(0);
        let v1 = es.vector(1);
        assert!((v0[0] - h).abs() < 1e-15 && (v0[1] - h).abs() < 1e-15);
        // Tie in magnitude: the lowest row index carries the positive sign.
        assert!((v1[0] - h).abs() < 1e-15 && (v1[1] + h).abs() < 1e-15);
    }

    #[test]
    fn random_five_by_five_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_symmetric(5, &mut rng);
        let es = sym_eigen(&a).unwrap();
        let residual = es.reconstruct().sub(&a).unwrap().max_abs();
        assert!(residual < 1e-9);
    }

    #[test]
    fn jacobi_invariants_on_many_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let p = 2 + trial % 11;
            let a = random_symmetric(p, &mut rng);
            check_invariants(&a, &sym_eigen(&a).unwrap());
        }
    }

    #[test]
    fn ql_path_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in [JACOBI_MAX_DIM + 1, 50, 97] {
            let a = random_symmetric(p, &mut rng);
            let es = sym_eigen(&a).unwrap();
            check_invariants(&a, &es);
            // Agrees with Jacobi on the spectrum.
            let (mut jv, _) = jacobi(&a);
            jv.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in jv.iter().zip(&es.values) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_by_two_matches_characteristic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: f64 = rng.random_range(-5.0..5.0);
            let b: f64 = rng.random_range(-5.0..5.0);
            let c: f64 = rng.random_range(-5.0..5.0);
            let m = Matrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let es = sym_eigen(&m).unwrap();
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            assert!((es.values[0] - (mid + rad)).abs() < 1e-12);
            assert!((es.values[1] - (mid - rad)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&a), Err(Error::Validation(_))));
        let b = Matrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&b), Err(Error::Validation(_))));
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_symmetric(7, &mut rng);
        assert_eq!(sym_eigen(&a).unwrap(), sym_eigen(&a).unwrap());
    }

    fn e(p: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v[i] = 1.0;
        v
    }

    #[test]
    fn gram_schmidt_already_orthogonal() {
        let out = gram_schmidt_complement(&e(3, 0), &[e(3, 1), e(3, 2)]).unwrap();
        assert_eq!(out, vec![e(3, 1), e(3, 2)]);
    }

    #[test]
    fn gram_schmidt_removes_theta0_component() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let out = gram_schmidt_complement(&e(3, 0), &[vec![h, h, 0.0], e(3, 2)]).unwrap();
        for (got, want) in out.iter().zip([e(3, 1), e(3, 2)]) {
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_schmidt_degeneracy_names_index() {
        let err = gram_schmidt_complement(&e(3, 0), &[e(3, 1), e(3, 0)]).unwrap_err();
        assert!(matches!(err, Error::GramSchmidt { index: 2, .. }));
        let err = gram_schmidt_complement(&[1.0, 1.0, 0.0], &[e(3, 1)]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn gram_schmidt_projector_identity() {
        // Random orthonormal frame (eigenvectors of a random symmetric matrix),
        // rotated theta0: sum t tᵀ must equal I - theta0 theta0ᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in 2..9 {
            let frame = sym_eigen(&random_symmetric(p, &mut rng)).unwrap();
            let mut theta0 = frame.vector(0);
            for x in theta0.iter_mut() {
                *x += rng.random_range(-0.3..0.3);
            }
            let n0 = norm(&theta0);
            theta0.iter_mut().for_each(|x| *x /= n0);
            let rest: Vec<Vec<f64>> = (1..p).map(|j| frame.vector(j)).collect();
            let out = gram_schmidt_complement(&theta0, &rest).unwrap();
            let mut proj = Matrix::zeros(p, p);
            for t in &out {
                proj = proj.add(&Matrix::outer(t, t)).unwrap();
            }
            let target = Matrix::identity(p)
                .sub(&Matrix::outer(&theta0, &theta0))
                .unwrap();
            assert!(proj.sub(&target).unwrap().max_abs() <= 1e-9);

            let mut q = Matrix::zeros(p, p);
            q.set_column(0, &theta0);
            for (j, t) in out.iter().enumerate() {
                q.set_column(j + 1, t);
            }
            let gram = q.transpose().matmul(&q).unwrap();
            assert!(gram.sub(&Matrix::identity(p)).unwrap().max_abs() <= 1e-10);
        }
    }

    #[test]
    fn commutation_small_cases() {
        assert_eq!(commutation_matrix(1), Matrix::identity(1));
        let k2 = commutation_matrix(2);
        let expected = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(k2, expected);
    }

    #[test]
    fn commutation_transposes_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let lhs = commutation_matrix(3).mul_vec(&vec(&a)).unwrap();
        assert_eq!(lhs, vec(&a.transpose()));
    }

    #[test]
    fn vec_and_kron_basics() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(vec(&a), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&a), 2, 2).unwrap(), a);
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(2)), Matrix::identity(4));
        assert!(unvec(&[1.0, 2.0, 3.0], 2, 2).is_err());
        assert!(a.matmul(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn vec_of_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rand_mat = |r: usize, c: usize| {
            let mut m = Matrix::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    m[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
            m
        };
        for _ in 0..50 {
            let (a, b, c) = (rand_mat(2, 2), rand_mat(2, 2), rand_mat(2, 2));
            let lhs = vec(&a.matmul(&b).unwrap().matmul(&c).unwrap());
            // Elementwise oracle: vec(ABC)[j*2+i] = sum_kl A_ik B_kl C_lj.
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            s += a[(i, k)] * b[(k, l)] * c[(l, j)];
                        }
                    }
                    assert!((lhs[j * 2 + i] - s).abs() < 1e-12);
                }
            }
            let rhs = kron(&c.transpose(), &a).mul_vec(&vec(&b)).unwrap();
            for (x, y) in lhs.iter().zip(&rhs) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = Matrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ])
        .unwrap();
        let ch = Cholesky::new(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        let back = a.mul_vec(&x).unwrap();
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!((ch.inv_quad_form(&b) - dot(&b, &x)).abs() < 1e-12);
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::new(&singular), Err(Error::Degenerate(_))));
    }
}
