//! Small dense linear algebra: 2x2 symmetric matrices, tiny LU inverses and
//! Householder least squares. Sizes here never exceed ~10, so everything is
//! row-major `Vec`/array code without a BLAS dependency.

use crate::scalar::Real;

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::one())
    }

    pub fn scaled_identity(s: T) -> Self {
        Self::new(s, T::zero(), s)
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn det(&self) -> T {
        self.a * self.c - self.b * self.b
    }

    pub fn trace(&self) -> T {
        self.a + self.c
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    /// `x^T M x`.
    pub fn quad_form(&self, x: [T; 2]) -> T {
        self.a * x[0] * x[0] + lit2::<T>() * self.b * x[0] * x[1] + self.c * x[1] * x[1]
    }

    pub fn apply(&self, x: [T; 2]) -> [T; 2] {
        [self.a * x[0] + self.b * x[1], self.b * x[0] + self.c * x[1]]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        Some(Self::new(self.c / d, -self.b / d, self.a / d))
    }

    /// Eigen-decomposition `M = Q diag(l) Q^T`. Returns eigenvalues (ascending)
    /// and the unit eigenvector of the first one; the second is its rotation.
    pub fn eigen(&self) -> ([T; 2], [T; 2]) {
        let half = T::lit(0.5);
        let mean = half * (self.a + self.c);
        let diff = half * (self.a - self.c);
        let r = (diff * diff + self.b * self.b).sqrt();
        let l0 = mean - r;
        let l1 = mean + r;
        if r == T::zero() {
            return ([l0, l1], [T::one(), T::zero()]);
        }
        // Angle of the eigenvector of the larger eigenvalue.
        let phi = half * self.b.atan2(diff);
        let v1 = [phi.cos(), phi.sin()];
        let v0 = [-v1[1], v1[0]];
        ([l0, l1], v0)
    }

    /// Builds `Q diag(l) Q^T` from eigenvalues and the first eigenvector.
    pub fn from_eigen(l: [T; 2], v0: [T; 2]) -> Self {
        let v1 = [-v0[1], v0[0]];
        Self::new(
            l[0] * v0[0] * v0[0] + l[1] * v1[0] * v1[0],
            l[0] * v0[0] * v0[1] + l[1] * v1[0] * v1[1],
            l[0] * v0[1] * v0[1] + l[1] * v1[1] * v1[1],
        )
    }

    /// Applies `f` to the eigenvalues.
    pub fn map_eigen(&self, f: impl Fn(T) -> T) -> Self {
        let (l, v) = self.eigen();
        Self::from_eigen([f(l[0]), f(l[1])], v)
    }

    pub fn abs(&self) -> Self {
        self.map_eigen(|x| x.abs())
    }

    pub fn is_spd(&self) -> bool {
        self.a > T::zero() && self.det() > T::zero() && self.a.is_finite() && self.c.is_finite()
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        (self.a - o.a).abs().max((self.b - o.b).abs()).max((self.c - o.c).abs())
    }
}

#[inline]
fn lit2<T: Real>() -> T {
    T::one() + T::one()
}

/// General 2x2 matrix, row-major.
pub type Mat2<T> = [[T; 2]; 2];

pub fn mat2_det<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat2_inv<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let d = mat2_det(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

pub fn mat2_mul<T: Real>(x: &Mat2<T>, y: &Mat2<T>) -> Mat2<T> {
    let mut r = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

pub fn mat2_transpose<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

pub fn mat2_vec<T: Real>(m: &Mat2<T>, v: [T; 2]) -> [T; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Inverts a dense `n x n` row-major matrix by Gauss-Jordan elimination with
/// partial pivoting. Returns `None` when a pivot underflows `tol * max|a|`.
pub fn invert<T: Real>(a: &[T], n: usize, tol: T) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        let p = m[piv * n + col];
        if p.abs() <= tol * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        for j in 0..n {
            m[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let mv = m[col * n + j];
                let iv = inv[col * n + j];
                m[r * n + j] -= f * mv;
                inv[r * n + j] -= f * iv;
            }
        }
    }
    Some(inv)
}

/// Least-squares solution of `A x ~ b` for row-major `A` (`rows x cols`),
/// via Householder QR. Returns `None` if `A` is numerically rank deficient.
pub fn lstsq<T: Real>(a: &[T], b: &[T], rows: usize, cols: usize) -> Option<Vec<T>> {
    if rows < cols {
        return None;
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    let tol = T::epsilon() * T::lit(1.0e3) * scale * T::from_usize_lossy(rows);
    for k in 0..cols {
        let mut norm = T::zero();
        for i in k..rows {
            norm += r[i * cols + k] * r[i * cols + k];
        }
        let norm = norm.sqrt();
        if norm <= tol {
            return None;
        }
        let alpha = if r[k * cols + k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for j in k..cols {
            let mut dot = T::zero();
            for (t, i) in (k..rows).enumerate() {
                dot += v[t] * r[i * cols + j];
            }
            let f = two * dot / vnorm2;
            for (t, i) in (k..rows).enumerate() {
                r[i * cols + j] -= f * v[t];
            }
        }
        let mut dot = T::zero();
        for (t, i) in (k..rows).enumerate() {
            dot += v[t] * y[i];
        }
        let f = two * dot / vnorm2;
        for (t, i) in (k..rows).enumerate() {
            y[i] -= f * v[t];
        }
    }
    let mut x = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut s = y[k];
        for j in k + 1..cols {
            s -= r[k * cols + j] * x[j];
        }
        let d = r[k * cols + k];
        if d.abs() <= tol {
            return None;
        }
        x[k] = s / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym2_eigen_roundtrip() {
        let m = Sym2::new(3.0_f64, 1.2, -0.5);
        let (l, v) = m.eigen();
        assert!(l[0] <= l[1]);
        let back = Sym2::from_eigen(l, v);
        assert!(back.max_abs_diff(&m) < 1e-14);
        assert!((l[0] * l[1] - m.det()).abs() < 1e-13);
    }

    #[test]
    fn sym2_abs_of_indefinite() {
        let m = Sym2::new(1.0_f64, 0.0, -4.0);
        let a = m.abs();
        assert!(a.max_abs_diff(&Sym2::new(1.0, 0.0, 4.0)) < 1e-14);
    }

    #[test]
    fn invert_4x4() {
        let a = [
            4.0_f64, 1.0, 0.0, 2.0, 1.0, 3.0, 1.0, 0.0, 0.0, 1.0, 5.0, 1.0, 2.0, 0.0, 1.0, 6.0,
        ];
        let inv = invert(&a, 4, 1e-14).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| a[i * 4 + k] * inv[k * 4 + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0_f64, 2.0, 2.0, 4.0], 2, 1e-14).is_none());
    }

    #[test]
    fn lstsq_exact_fit() {
        // Fit y = 1 + 2x + 3x^2 from 5 samples.
        let xs = [-1.0_f64, -0.5, 0.0, 0.7, 1.3];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for x in xs {
            a.extend_from_slice(&[1.0, x, x * x]);
            b.push(1.0 + 2.0 * x + 3.0 * x * x);
        }
        let c = lstsq(&a, &b, 5, 3).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[1] - 2.0).abs() < 1e-12);
        assert!((c[2] - 3.0).abs() < 1e-12);
        assert!(lstsq(&[1.0_f64, 1.0, 2.0, 2.0], &[1.0, 2.0], 2, 2).is_none());
    }
}
