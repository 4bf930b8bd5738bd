//! Small dense linear algebra: row-major matrices, partial-pivot LU over real
//! and complex scalars, and a nonsymmetric eigenvalue solver.

use std::fmt;
use std::ops::{Index, IndexMut, Neg};

use num_complex::Complex;
use num_traits::{Num, NumAssign, Zero};
use thiserror::Error;

use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Copy + Num> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_diag(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(S::zero(), |acc, k| acc + self[(i, k)] * other[(k, j)])
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copies the block `rows x cols` selected by the index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn map<R: Copy + Num>(&self, f: impl Fn(S) -> R) -> Matrix<R> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: fmt::Debug> fmt::Debug for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Element types usable in [`Lu`]: real scalars and complex numbers over them.
pub trait Pivot: Copy + Num + NumAssign + Neg<Output = Self> + Send + Sync {
    type Mag: Real;
    fn magnitude(&self) -> Self::Mag;
    fn is_finite_value(&self) -> bool;
}

impl<T: Real> Pivot for Complex<T> {
    type Mag = T;
    #[inline]
    fn magnitude(&self) -> T {
        self.norm()
    }
    #[inline]
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

macro_rules! real_pivot {
    ($t:ty) => {
        impl Pivot for $t {
            type Mag = $t;
            #[inline]
            fn magnitude(&self) -> $t {
                self.abs()
            }
            #[inline]
            fn is_finite_value(&self) -> bool {
                self.is_finite()
            }
        }
    };
}
real_pivot!(f32);
real_pivot!(f64);

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<S> {
    n: usize,
    lu: Vec<S>,
    perm: Vec<usize>,
    odd_swaps: bool,
}

impl<S: Pivot> Lu<S> {
    /// Factorizes a square matrix. Fails with [`LinalgError::Singular`] when a
    /// pivot is zero or negligible relative to the largest input entry.
    pub fn new(a: &Matrix<S>) -> Result<Self, LinalgError> {
        let lu = Self::factor(a);
        let scale = a
            .as_slice()
            .iter()
            .fold(S::Mag::zero(), |m, v| num_traits::Float::max(m, v.magnitude()));
        let tiny = scale * S::Mag::eps() * S::Mag::lit(a.rows().max(1) as f64);
        for i in 0..lu.n {
            let p = lu.lu[i * lu.n + i];
            if !p.is_finite_value() || p.magnitude() <= tiny {
                return Err(LinalgError::Singular);
            }
        }
        Ok(lu)
    }

    fn factor(a: &Matrix<S>) -> Self {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].magnitude();
            for i in (k + 1)..n {
                let m = lu[i * n + k].magnitude();
                if m > best {
                    best = m;
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                odd = !odd;
            }
            let p = lu[k * n + k];
            if p.magnitude() == S::Mag::zero() {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[i * n + k] / p;
                lu[i * n + k] = f;
                if f.magnitude() == S::Mag::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            odd_swaps: odd,
        }
    }

    pub fn det(&self) -> S {
        let mut d = if self.odd_swaps { -S::one() } else { S::one() };
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Determinant by partial-pivot LU; exactly singular input yields zero.
pub fn det<S: Pivot>(a: &Matrix<S>) -> S {
    if a.rows() == 0 {
        return S::one();
    }
    Lu::factor(a).det()
}

pub fn solve<S: Pivot>(a: &Matrix<S>, b: &[S]) -> Result<Vec<S>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::Dimension {
            expected: a.rows(),
            got: b.len(),
        });
    }
    Ok(Lu::new(a)?.solve(b))
}

pub fn to_complex<T: Real>(a: &Matrix<T>) -> Matrix<Cplx<T>> {
    a.map(|v| Complex::new(v, T::zero()))
}

/// All eigenvalues of a real square matrix, sorted by real part descending
/// (ties broken by imaginary part descending).
///
/// Balancing, reduction to upper Hessenberg form by stabilized elementary
/// similarity transforms, then Francis double-shift QR.
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<Cplx<T>>, LinalgError> {
    assert!(a.is_square(), "eigenvalues of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut ev = hqr(&mut h)?;
    ev.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(ev)
}

fn balance<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for m in 1..(n - 1) {
        let mut x = T::zero();
        let mut piv = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let t = a[(piv, j)];
                a[(piv, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, piv)];
                a[(j, piv)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != T::zero() {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != T::zero() {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        let v = a[(m, j)];
                        a[(i, j)] -= y * v;
                    }
                    for j in 0..n {
                        let v = a[(j, i)];
                        a[(j, m)] += y * v;
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[(i, j)] = T::zero();
        }
    }
}

const HQR_MAX_ITS: usize = 60;

#[allow(clippy::many_single_char_names)]
fn hqr<T: Real>(a: &mut Matrix<T>) -> Result<Vec<Cplx<T>>, LinalgError> {
    let n = a.rows() as isize;
    let mut wr = vec![T::zero(); n as usize];
    let mut wi = vec![T::zero(); n as usize];
    let at = |a: &Matrix<T>, i: isize, j: isize| a[(i as usize, j as usize)];

    let mut anorm = T::zero();
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += at(a, i, j).abs();
        }
    }
    let half = T::lit(0.5);
    let mut nn = n - 1;
    let mut t = T::zero();
    let (mut p, mut q, mut r) = (T::zero(), T::zero(), T::zero());
    let (mut x, mut y, mut z, mut w, mut s);
    let mut total_its = 0usize;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 1 {
                s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == T::zero() {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() + s == s {
                    a[(l as usize, (l - 1) as usize)] = T::zero();
                    break;
                }
                l -= 1;
            }
            x = at(a, nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = T::zero();
                nn -= 1;
            } else {
                y = at(a, nn - 1, nn - 1);
                w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
                if l == nn - 1 {
                    p = half * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    let (i1, i0) = ((nn - 1) as usize, nn as usize);
                    if q >= T::zero() {
                        z = p + z.copysign(p);
                        wr[i1] = x + z;
                        wr[i0] = x + z;
                        if z != T::zero() {
                            wr[i0] = x - w / z;
                        }
                        wi[i1] = T::zero();
                        wi[i0] = T::zero();
                    } else {
                        wr[i1] = x + p;
                        wr[i0] = x + p;
                        wi[i1] = -z;
                        wi[i0] = z;
                    }
                    nn -= 2;
                } else {
                    if its >= HQR_MAX_ITS {
                        return Err(LinalgError::NoConvergence {
                            iterations: total_its,
                        });
                    }
                    if its > 0 && its.is_multiple_of(10) {
                        t += x;
                        for i in 0..=nn {
                            a[(i as usize, i as usize)] -= x;
                        }
                        s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    total_its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = at(a, m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / at(a, m + 1, m) + at(a, m, m + 1);
                        q = at(a, m + 1, m + 1) - z - r - s;
                        r = at(a, m + 2, m + 1);
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[(i as usize, (i - 2) as usize)] = T::zero();
                        if i != m + 2 {
                            a[(i as usize, (i - 3) as usize)] = T::zero();
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = at(a, k, k - 1);
                            q = at(a, k + 1, k - 1);
                            r = T::zero();
                            if k != nn - 1 {
                                r = at(a, k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != T::zero() {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != T::zero() {
                            let (ku, km1) = (k as usize, (k - 1).max(0) as usize);
                            if k == m {
                                if l != m {
                                    a[(ku, km1)] = -a[(ku, km1)];
                                }
                            } else {
                                a[(ku, km1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let j = j as usize;
                                p = a[(ku, j)] + q * a[(ku + 1, j)];
                                if k != nn - 1 {
                                    p += r * a[(ku + 2, j)];
                                    a[(ku + 2, j)] -= p * z;
                                }
                                a[(ku + 1, j)] -= p * y;
                                a[(ku, j)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                let i = i as usize;
                                p = x * a[(i, ku)] + y * a[(i, ku + 1)];
                                if k != nn - 1 {
                                    p += z * a[(i, ku + 2)];
                                    a[(i, ku + 2)] -= p * r;
                                }
                                a[(i, ku + 1)] -= p * q;
                                a[(i, ku)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex::new(re, im))
        .collect())
}
