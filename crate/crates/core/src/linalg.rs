//! Small symmetric matrices (d ≤ 3) and a dense LU solver.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;
use crate::scalar::Scalar;

/// Symmetric `d x d` matrix, `d ≤ 3`, stored densely.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat<T> {
    d: usize,
    a: [[T; MAX_DIM]; MAX_DIM],
}

impl<T: Scalar> SymMat<T> {
    pub fn zeros(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "matrix dimension out of range");
        Self {
            d,
            a: [[T::zero(); MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::scalar(d, T::one())
    }

    pub fn scalar(d: usize, s: T) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = s;
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    /// Builds from row-major entries; fails unless the rows form a symmetric matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.len();
        if !(1..=MAX_DIM).contains(&d) || rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix of size 1..={MAX_DIM}"
            )));
        }
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
                m.a[i][j] = rows[i][j];
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i][j]
    }

    /// Sets entries `(i,j)` and `(j,i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.d).map(|i| self.a[i][..self.d].to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = *self;
        for i in 0..self.d {
            for j in 0..self.d {
                out.a[i][j] = f(self.a[i][j]);
            }
        }
        out
    }

    pub fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.d, other.d);
        let mut out = *self;
        for i in 0..self.d {
            for j in 0..self.d {
                out.a[i][j] = f(self.a[i][j], other.a[i][j]);
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn trace(&self) -> T {
        (0..self.d).fold(T::zero(), |acc, i| acc + self.a[i][i])
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.d {
            for j in 0..self.d {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    /// `s^T A s`.
    pub fn quad(&self, s: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.d {
            for j in 0..self.d {
                acc += s[i] * self.a[i][j] * s[j];
            }
        }
        acc
    }

    pub fn det(&self) -> T {
        let a = &self.a;
        match self.d {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Adjugate (transposed cofactor matrix); symmetric for symmetric input.
    pub fn adjugate(&self) -> Self {
        let a = &self.a;
        let mut out = Self::zeros(self.d);
        match self.d {
            1 => out.a[0][0] = T::one(),
            2 => {
                out.a[0][0] = a[1][1];
                out.a[1][1] = a[0][0];
                out.a[0][1] = -a[0][1];
                out.a[1][0] = -a[1][0];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor C_ji
                        let (r0, r1) = others(j);
                        let (c0, c1) = others(i);
                        let minor = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                        let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
                        out.a[i][j] = sign * minor;
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue with a unit eigenvector.
    pub fn min_eigen(&self) -> (T, [T; MAX_DIM]) {
        let mut v = [T::zero(); MAX_DIM];
        match self.d {
            1 => {
                v[0] = T::one();
                (self.a[0][0], v)
            }
            2 => {
                let (a, b, c) = (self.a[0][0], self.a[0][1], self.a[1][1]);
                let half = T::of(0.5);
                let mean = (a + c) * half;
                let rad = ((a - c) * half).hypot(b);
                let lam = mean - rad;
                if b == T::zero() {
                    if a <= c {
                        v[0] = T::one();
                    } else {
                        v[1] = T::one();
                    }
                    return (lam, v);
                }
                let (p, q) = (b, lam - a);
                let (r, s) = (lam - c, b);
                let (x, y) = if p.hypot(q) >= r.hypot(s) { (p, q) } else { (r, s) };
                let n = x.hypot(y);
                v[0] = x / n;
                v[1] = y / n;
                (lam, v)
            }
            _ => jacobi_min_eigen3(self),
        }
    }

    pub fn min_eigenvalue(&self) -> T {
        self.min_eigen().0
    }

    /// Lexicographic total order on the entries, used to canonicalize slot order.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        for i in 0..self.d {
            for j in i..self.d {
                match self.a[i][j].total_cmp_s(&other.a[i][j]) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
        }
        Ordering::Equal
    }
}

impl<T: Scalar> std::ops::Add for SymMat<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(&rhs, |x, y| x + y)
    }
}

impl<T: Scalar> std::ops::Sub for SymMat<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(&rhs, |x, y| x - y)
    }
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn jacobi_min_eigen3<T: Scalar>(m: &SymMat<T>) -> (T, [T; MAX_DIM]) {
    let mut a = m.a;
    let mut v = [[T::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let scale = m.max_abs().max(T::min_positive_value());
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= T::epsilon() * scale * T::of(1e-3) {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::of(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut k = 0;
    for i in 1..3 {
        if a[i][i] < a[k][k] {
            k = i;
        }
    }
    (a[k][k], [v[0][k], v[1][k], v[2][k]])
}

/// Dense row-major square matrix used for Newton systems.
#[derive(Clone, Debug)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting,
    /// consuming the matrix.
    pub fn solve(mut self, mut b: Vec<T>) -> Result<Vec<T>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch("rhs length".into()));
        }
        let a = &mut self.data;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return Err(Error::InvalidArgument("singular linear system".into()));
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col * n + c, piv * n + c);
                }
                b.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f == T::zero() {
                    continue;
                }
                a[r * n + col] = T::zero();
                for c in col + 1..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= f * v;
                }
                let bc = b[col];
                b[r] -= f * bc;
            }
        }
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= a[r * n + c] * b[c];
            }
            b[r] = acc / a[r * n + r];
        }
        Ok(b)
    }
}
