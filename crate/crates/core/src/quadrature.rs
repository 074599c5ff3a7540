//! Quadrature rules on the unit interval and the unit right triangle.
//!
//! All weights are normalized to sum to one, so a rule approximates the
//! *average* of a function over the reference element.

use crate::scalar::Real;

/// Points and normalized weights of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Rule<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
}

impl<T: Real> Rule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Average of `f` over the reference element.
    pub fn average(&self, f: impl Fn([T; 2]) -> T) -> T {
        self.points.iter().zip(&self.weights).map(|(p, w)| *w * f(*p)).sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-14 {
        let s = if x > 0.0 { 1.0 } else if n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes on `[-1, 1]` with weights summing to 2.
fn gauss_legendre_raw(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre_raw(n);
    (
        x.iter().map(|&z| T::lit(0.5 * (z + 1.0))).collect(),
        w.iter().map(|&v| T::lit(0.5 * v)).collect(),
    )
}

/// Gauss-Lobatto rule with `n >= 2` points on `[0, 1]`, exact to degree `2n - 3`.
pub fn gauss_lobatto<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 2, "Gauss-Lobatto needs at least two points");
    let m = n - 1;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    x[0] = -1.0;
    x[m] = 1.0;
    // Interior nodes are the roots of P'_m.
    for i in 1..m {
        let mut z = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            // Newton on P'_m using P''_m = (2z P'_m - m(m+1) P_m) / (1 - z^2).
            let d2 = (2.0 * z * dp - (m * (m + 1)) as f64 * p) / (1.0 - z * z);
            let dz = dp / d2;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    for i in 0..n {
        let (p, _) = legendre(m, x[i]);
        w[i] = 2.0 / ((m * (m + 1)) as f64 * p * p);
    }
    (
        x.iter().map(|&z| T::lit(0.5 * (z + 1.0))).collect(),
        w.iter().map(|&v| T::lit(0.5 * v)).collect(),
    )
}

/// Gauss rule on `[0, 1]` packaged as a [`Rule`] with `y = 0`.
pub fn interval_rule<T: Real>(n: usize) -> Rule<T> {
    let (x, w) = gauss_legendre::<T>(n);
    Rule {
        points: x.into_iter().map(|p| [p, T::zero()]).collect(),
        weights: w,
    }
}

/// Collapsed (Duffy) Gauss rule on the unit right triangle with `n x n`
/// points, exact for polynomials of total degree `2n - 2`.
pub fn triangle_rule<T: Real>(n: usize) -> Rule<T> {
    let (x, w) = gauss_legendre_raw(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        let wu = 0.5 * w[i];
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let wv = 0.5 * w[j];
            points.push([T::lit(u), T::lit(v * (1.0 - u))]);
            // Jacobian (1 - u) over the reference area 1/2.
            weights.push(T::lit(2.0 * wu * wv * (1.0 - u)));
        }
    }
    Rule { points, weights }
}

/// Smallest collapsed-rule size that integrates total degree `deg` exactly.
pub fn triangle_points_for_degree(deg: usize) -> usize {
    (deg + 2).div_ceil(2)
}

/// Exact average of `x^a y^b` over the unit right triangle: `2 a! b! / (a+b+2)!`.
pub fn triangle_monomial_average(a: usize, b: usize) -> f64 {
    let fact = |n: usize| (1..=n).fold(1.0, |acc, k| acc * k as f64);
    2.0 * fact(a) * fact(b) / fact(a + b + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..8 {
            let (x, w) = gauss_legendre::<f64>(n);
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(p, w)| w * p.powi(d as i32)).sum();
                assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn gauss_lobatto_exactness() {
        for n in 2..8 {
            let (x, w) = gauss_lobatto::<f64>(n);
            assert_eq!(x[0], 0.0);
            assert_eq!(x[n - 1], 1.0);
            for d in 0..=2 * n - 3 {
                let q: f64 = x.iter().zip(&w).map(|(p, w)| w * p.powi(d as i32)).sum();
                assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
        let (x, w) = gauss_lobatto::<f64>(3);
        assert!((x[1] - 0.5).abs() < 1e-15);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_exactness() {
        for n in 1..7 {
            let r = triangle_rule::<f64>(n);
            let deg = 2 * n - 2;
            assert_eq!(triangle_points_for_degree(deg), n.max(1));
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let q = r.average(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    let exact = triangle_monomial_average(a, b);
                    assert!((q - exact).abs() < 1e-14, "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn x2y_over_triangle() {
        // Integral is 1/60; the rule gives the average (area 1/2).
        let r = triangle_rule::<f64>(3);
        let q = 0.5 * r.average(|p| p[0] * p[0] * p[1]);
        assert!((q - 1.0 / 60.0).abs() < 1e-15);
    }
}
