//! Small dense complex linear algebra: Cholesky, LU determinants and a cyclic
//! Jacobi Hermitian eigensolver. This backs the exact small-scale oracle and
//! the desk-scale direct solves; the sparse production path never routes
//! through it, so the two sides cross-check each other.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Index, IndexMut};

type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [C64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::ZERO {
                    continue;
                }
                let (orow, brow) = (i, k);
                for j in 0..other.cols {
                    out.data[orow * other.cols + j] += a * other.data[brow * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn add_diag(&mut self, s: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += s;
        }
    }

    pub fn trace_real(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).sum()
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    pub l: CMat,
}

pub fn cholesky(a: &CMat) -> Result<DenseCholesky> {
    let n = a.rows;
    assert_eq!(a.rows, a.cols);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)].re;
        s -= l.row(j)[..j].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Singular(format!(
                "pivot {s:.3e} at column {j} of dense Cholesky"
            )));
        }
        let d = s.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            // acc -= dot(L[i, :j], conj(L[j, :j]))
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                acc -= l.data[ri + k] * l.data[rj + k].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(DenseCholesky { l })
}

impl DenseCholesky {
    pub fn n(&self) -> usize {
        self.l.rows
    }

    /// Solves L y = b in place.
    pub fn forward(&self, b: &mut [C64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.l[(i, k)] * b[k];
            }
            b[i] = acc / self.l[(i, i)];
        }
    }

    /// Solves L* x = y in place.
    pub fn backward(&self, b: &mut [C64]) {
        let n = self.n();
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..n {
                acc -= self.l[(k, i)].conj() * b[k];
            }
            b[i] = acc / self.l[(i, i)];
        }
    }

    /// Solves (LL*) x = b in place.
    pub fn solve(&self, b: &mut [C64]) {
        self.forward(b);
        self.backward(b);
    }

    /// Solves against every column of `b`.
    pub fn solve_matrix(&self, b: &CMat) -> CMat {
        let mut out = b.clone();
        let mut col = vec![C64::ZERO; b.rows];
        for j in 0..b.cols {
            for i in 0..b.rows {
                col[i] = b[(i, j)];
            }
            self.solve(&mut col);
            for i in 0..b.rows {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n()).map(|i| self.l[(i, i)].re.ln()).sum::<f64>()
    }
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    let ch = cholesky(a)?;
    Ok(ch.solve_matrix(&CMat::identity(a.rows)))
}

/// Determinant via LU with partial pivoting; tolerates singular input.
pub fn determinant(a: &CMat) -> C64 {
    let n = a.rows;
    let mut m = a.clone();
    let mut det = C64::ONE;
    for k in 0..n {
        let (mut piv, mut best) = (k, m[(k, k)].norm());
        for i in k + 1..n {
            let v = m[(i, k)].norm();
            if v > best {
                piv = i;
                best = v;
            }
        }
        if best == 0.0 {
            return C64::ZERO;
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            det = -det;
        }
        let d = m[(k, k)];
        det *= d;
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            if f == C64::ZERO {
                continue;
            }
            for j in k + 1..n {
                let s = m[(k, j)];
                m[(i, j)] -= f * s;
            }
        }
    }
    det
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the unitary matrix of
/// eigenvectors in matching columns, so that A V = V diag(vals).
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = a.rows;
    assert_eq!(a.rows, a.cols);
    let mut m = a.clone();
    // Symmetrize to wash out assembly roundoff.
    for i in 0..n {
        for j in i + 1..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        let d = m[(i, i)].re;
        m[(i, i)] = C64::new(d, 0.0);
    }
    let mut v = CMat::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= tol {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m[(i, i)].re, i)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let vecs = CMat::from_fn(n, n, |r, c| v[(r, pairs[c].1)]);
            return Ok((vals, vecs));
        }
        for p in 0..n {
            for q in p + 1..n {
                let z = m[(p, q)];
                let az = z.norm();
                if az <= tol / (n as f64) {
                    continue;
                }
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                let tau = (alpha - beta) / (2.0 * az);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let phase = z / az;
                // Columns: [p', q'] = [c·p + s·conj(phase)·q, −s·phase·p + c·q]
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = c * mp + s * phase.conj() * mq;
                    m[(r, q)] = -s * phase * mp + c * mq;
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = c * vp + s * phase.conj() * vq;
                    v[(r, q)] = -s * phase * vp + c * vq;
                }
                // Rows with the conjugate rotation.
                for cidx in 0..n {
                    let mp = m[(p, cidx)];
                    let mq = m[(q, cidx)];
                    m[(p, cidx)] = c * mp + s * phase * mq;
                    m[(q, cidx)] = -s * phase.conj() * mp + c * mq;
                }
                m[(p, q)] = C64::ZERO;
                m[(q, p)] = C64::ZERO;
                let dp = m[(p, p)].re;
                let dq = m[(q, q)].re;
                m[(p, p)] = C64::new(dp, 0.0);
                m[(q, q)] = C64::new(dq, 0.0);
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "Jacobi eigensolver did not converge in {max_sweeps} sweeps"
    )))
}

/// Eigenvalues of the Hermitian-definite pencil (A, B): solutions of
/// A v = λ B v with B positive definite, through a Cholesky reduction.
pub fn eigh_generalized(a: &CMat, b: &CMat) -> Result<Vec<f64>> {
    let ch = cholesky(b)?;
    let n = a.rows;
    // W = L⁻¹ A, then C = L⁻¹ (L⁻¹ A)* = L⁻¹ A L⁻*.
    let mut w = a.clone();
    let mut col = vec![C64::ZERO; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = w[(i, j)];
        }
        ch.forward(&mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let wh = w.adjoint();
    let mut c = wh.clone();
    for j in 0..n {
        for i in 0..n {
            col[i] = wh[(i, j)];
        }
        ch.forward(&mut col);
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    let (vals, _) = eigh(&c)?;
    Ok(vals)
}
