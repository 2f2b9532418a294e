//! Small dense complex matrices and a cyclic Jacobi eigensolver for
//! Hermitian input.
//!
//! Everything here is sized for desk-scale quantum states (d ≤ 16), so the
//! storage is a flat row-major `Vec` and every operation allocates freely.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Hermiticity tolerance accepted by [`hermitian_eig`].
pub const EIG_HERMITIAN_TOL: f64 = 1e-10;
/// Relative off-diagonal mass at which a Jacobi sweep counts as converged.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Malformed(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Outer product `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    /// `|i⟩⟨j|` in an `rows x cols` space.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `a·self + b·other`, entrywise.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation `|m_ij - conj(m_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(m + m†)/2`.
    pub fn hermitize(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                C64::new(self[(i, i)].re, 0.0)
            } else {
                (self[(i, j)] + self[(j, i)].conj()) * 0.5
            }
        })
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Self::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// `self · x · self†`.
    pub fn sandwich(&self, x: &Self) -> Self {
        &(self * x) * &self.adjoint()
    }

    /// `Re Tr(self† · other)`, the real Frobenius inner product.
    pub fn inner_re(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.lin_comb(1.0, rhs, 1.0)
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.lin_comb(1.0, rhs, -1.0)
    }
}

/// Spectral decomposition `m = V diag(values) V†` with eigenvalues sorted in
/// descending order. Column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> CMatrix {
        let fvals: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.reconstruct_with(&fvals)
    }

    pub fn reconstruct_with(&self, vals: &[f64]) -> CMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            let mut acc = ZERO;
            for (k, &lam) in vals.iter().enumerate() {
                if lam != 0.0 {
                    acc += v[(i, k)] * v[(j, k)].conj() * lam;
                }
            }
            acc
        })
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
pub fn hermitian_eig(m: &CMatrix) -> Result<Eigen> {
    crate::coverage::touch("hermitian_eig");
    if !m.is_square() {
        return Err(Error::NotSquare(m.rows(), m.cols()));
    }
    let dev = m.hermitian_deviation();
    if !(dev <= EIG_HERMITIAN_TOL) {
        return Err(Error::NotHermitian(dev));
    }
    jacobi(m.hermitize())
}

/// Same as [`hermitian_eig`] for matrices that are Hermitian by
/// construction; only the upper triangle is trusted.
pub(crate) fn eigh(m: &CMatrix) -> Eigen {
    jacobi(m.hermitize()).expect("Jacobi sweep limit reached on a small Hermitian matrix")
}

fn off_diagonal_mass(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi(mut a: CMatrix) -> Result<Eigen> {
    let n = a.rows();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut off = off_diagonal_mass(&a);
    let mut sweeps = 0;
    while off > 1e-15 * scale && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let pc = phase.conj();
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]] restricted to (p, q).
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = pc * (-s);
                let g_qq = pc * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
        off = off_diagonal_mass(&a);
    }
    if off > JACOBI_TOL * scale.max(1.0) {
        return Err(Error::EigenNoConvergence { sweeps, off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(Eigen { values, vectors })
}

/// Orthonormal (Frobenius) basis of the traceless Hermitian `d x d`
/// matrices: symmetric and antisymmetric off-diagonal generators followed by
/// the diagonal ones. A density matrix is `I/d + Σ x_a B_a`.
#[derive(Clone, Debug)]
pub struct TracelessBasis {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl TracelessBasis {
    pub fn new(d: usize) -> Self {
        let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
        for j in 0..d {
            for k in (j + 1)..d {
                pairs.push((j, k));
            }
        }
        Self { d, pairs }
    }

    pub fn dim(&self) -> usize {
        self.d * self.d - 1
    }

    /// Coordinates `Tr(m B_a)` of a Hermitian matrix; the trace part is
    /// discarded.
    pub fn coords(&self, m: &CMatrix) -> Vec<f64> {
        let d = self.d;
        let mut x = Vec::with_capacity(self.dim());
        let s2 = std::f64::consts::SQRT_2;
        for &(j, k) in &self.pairs {
            x.push(s2 * m[(j, k)].re);
        }
        for &(j, k) in &self.pairs {
            x.push(-s2 * m[(j, k)].im);
        }
        for l in 1..d {
            let norm = ((l * (l + 1)) as f64).sqrt();
            let mut acc = 0.0;
            for mm in 0..l {
                acc += m[(mm, mm)].re;
            }
            acc -= l as f64 * m[(l, l)].re;
            x.push(acc / norm);
        }
        x
    }

    /// `I/d + Σ x_a B_a`.
    pub fn matrix(&self, x: &[f64]) -> CMatrix {
        let d = self.d;
        let np = self.pairs.len();
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::from_real_diag(&vec![1.0 / d as f64; d]);
        for (a, &(j, k)) in self.pairs.iter().enumerate() {
            let z = C64::new(x[a] * s2, -x[np + a] * s2);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
        for l in 1..d {
            let c = x[2 * np + l - 1] / ((l * (l + 1)) as f64).sqrt();
            for mm in 0..l {
                m[(mm, mm)].re += c;
            }
            m[(l, l)].re -= l as f64 * c;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(d: usize, seed: u64) -> CMatrix {
        // small LCG keeps this module free of rand
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        (&m + &m.adjoint()).scale(0.5)
    }

    #[test]
    fn identity_spectrum() {
        let e = hermitian_eig(&CMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_sorted() {
        let e = hermitian_eig(&CMatrix::from_real_diag(&[0.3, 0.7])).unwrap();
        assert_eq!(e.values, vec![0.7, 0.3]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_and_unitarity() {
        for d in 1..=8 {
            for seed in 0..5 {
                let m = herm(d, seed * 31 + d as u64);
                let e = hermitian_eig(&m).unwrap();
                let rec = e.reconstruct_with(&e.values);
                assert!((&rec - &m).frobenius_norm() <= 1e-9);
                let vv = &e.vectors.adjoint() * &e.vectors;
                assert!((&vv - &CMatrix::identity(d)).frobenius_norm() <= 1e-9);
                assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
        assert!(matches!(
            hermitian_eig(&CMatrix::zeros(2, 3)),
            Err(Error::NotSquare(2, 3))
        ));
    }

    #[test]
    fn traceless_basis_round_trip() {
        for d in 2..=5 {
            let b = TracelessBasis::new(d);
            let m = herm(d, 7);
            let tr = m.trace().re;
            let shifted = &m - &CMatrix::identity(d).scale(tr / d as f64 - 1.0 / d as f64);
            let x = b.coords(&shifted);
            assert_eq!(x.len(), d * d - 1);
            let back = b.matrix(&x);
            assert!(back.max_abs_diff(&shifted) < 1e-13);
            // orthonormality: coordinates preserve the Frobenius norm of the traceless part
            let traceless = &shifted - &CMatrix::identity(d).scale(1.0 / d as f64);
            let n2: f64 = x.iter().map(|v| v * v).sum();
            assert!((n2.sqrt() - traceless.frobenius_norm()).abs() < 1e-12);
        }
    }
}
