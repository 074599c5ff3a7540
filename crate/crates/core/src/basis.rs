//! Orthonormal modal bases on the reference element with cached tables.
//!
//! The inner product is the *average* over the reference element, so the
//! constant mode is `phi_0 = 1`, the cell average of a field equals its first
//! coefficient and the physical mass matrix of element `K` is `|K| I`.
//!
//! Reference elements: `[0, 1]` in 1D and the unit right triangle with
//! vertices `(0,0), (1,0), (0,1)` in 2D.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_lobatto, interval_rule, legendre, triangle_monomial_average, triangle_rule, Rule};
use crate::scalar::Real;

/// Reference vertices of the unit right triangle.
pub const TRIANGLE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Debug)]
pub struct ReferenceBasis<T> {
    dim: usize,
    degree: usize,
    n_b: usize,
    /// Monomial exponents (2D only).
    exps: Vec<(usize, usize)>,
    /// Row `j` holds the monomial coefficients of `phi_j` (2D only).
    coef: Vec<f64>,
    pub vol: Rule<T>,
    vol_phi: Vec<T>,
    vol_grad: Vec<[T; 2]>,
    /// Edge rule parameters in `[0, 1]` and normalized weights.
    edge_s: Vec<T>,
    edge_w: Vec<T>,
    /// `[face][orientation]` -> basis values at the edge points.
    face_phi: Vec<Vec<T>>,
    face_pts: Vec<Vec<[T; 2]>>,
    pp_points: Vec<[T; 2]>,
    pp_phi: Vec<T>,
    /// Projection of the P1 nodal basis (barycentric coordinates) onto the modes.
    p1_modes: Vec<T>,
}

impl<T: Real> ReferenceBasis<T> {
    /// Builds the degree-`k` basis on the `dim`-dimensional reference element.
    pub fn new(dim: usize, k: usize) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::UnsupportedDegree(k));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("unsupported dimension {dim}")));
        }
        let n_b = if dim == 1 { k + 1 } else { (k + 1) * (k + 2) / 2 };
        let mut exps = Vec::new();
        let mut coef = Vec::new();
        if dim == 2 {
            for d in 0..=k {
                for b in 0..=d {
                    exps.push((d - b, b));
                }
            }
            coef = gram_schmidt(&exps);
        }
        let mut basis = Self {
            dim,
            degree: k,
            n_b,
            exps,
            coef,
            vol: Rule { points: Vec::new(), weights: Vec::new() },
            vol_phi: Vec::new(),
            vol_grad: Vec::new(),
            edge_s: Vec::new(),
            edge_w: Vec::new(),
            face_phi: Vec::new(),
            face_pts: Vec::new(),
            pp_points: Vec::new(),
            pp_phi: Vec::new(),
            p1_modes: Vec::new(),
        };

        // Volume rule exact to degree 3k (well-balance needs 3k - 1).
        basis.vol = if dim == 1 {
            interval_rule(2 * k + 1)
        } else {
            triangle_rule((3 * k + 2).div_ceil(2))
        };
        let nq = basis.vol.len();
        basis.vol_phi = vec![T::zero(); nq * n_b];
        basis.vol_grad = vec![[T::zero(); 2]; nq * n_b];
        for q in 0..nq {
            let p = basis.vol.points[q];
            let mut v = vec![T::zero(); n_b];
            let mut g = vec![[T::zero(); 2]; n_b];
            basis.eval(p, &mut v);
            basis.grad(p, &mut g);
            basis.vol_phi[q * n_b..(q + 1) * n_b].copy_from_slice(&v);
            basis.vol_grad[q * n_b..(q + 1) * n_b].copy_from_slice(&g);
        }

        // Edge rule: Gauss with 2k+1 points; a single point in 1D.
        if dim == 1 {
            basis.edge_s = vec![T::zero()];
            basis.edge_w = vec![T::one()];
        } else {
            let (s, w) = gauss_legendre::<T>(2 * k + 1);
            basis.edge_s = s;
            basis.edge_w = w;
        }
        let n_faces = dim + 1;
        for f in 0..n_faces {
            for rev in [false, true] {
                let pts: Vec<[T; 2]> = basis.edge_s.iter().map(|&s| basis.face_point(f, if rev { T::one() - s } else { s })).collect();
                let mut vals = vec![T::zero(); pts.len() * n_b];
                for (q, p) in pts.iter().enumerate() {
                    basis.eval(*p, &mut vals[q * n_b..(q + 1) * n_b]);
                }
                basis.face_phi.push(vals);
                basis.face_pts.push(pts);
            }
        }

        basis.pp_points = pp_point_set(dim, k, &basis.edge_s);
        basis.pp_phi = vec![T::zero(); basis.pp_points.len() * n_b];
        for (i, p) in basis.pp_points.clone().iter().enumerate() {
            let mut v = vec![T::zero(); n_b];
            basis.eval(*p, &mut v);
            basis.pp_phi[i * n_b..(i + 1) * n_b].copy_from_slice(&v);
        }

        let nv = dim + 1;
        basis.p1_modes = vec![T::zero(); n_b * nv];
        for q in 0..nq {
            let p = basis.vol.points[q];
            let w = basis.vol.weights[q];
            let lam = barycentric(dim, p);
            for j in 0..n_b {
                for v in 0..nv {
                    basis.p1_modes[j * nv + v] += w * lam[v] * basis.vol_phi[q * n_b + j];
                }
            }
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn n_vol(&self) -> usize {
        self.vol.len()
    }

    pub fn n_edge(&self) -> usize {
        self.edge_w.len()
    }

    pub fn n_faces(&self) -> usize {
        self.dim + 1
    }

    /// Basis values at volume point `q`.
    pub fn vol_phi(&self, q: usize) -> &[T] {
        &self.vol_phi[q * self.n_b..(q + 1) * self.n_b]
    }

    /// Reference gradients at volume point `q`.
    pub fn vol_grad(&self, q: usize) -> &[[T; 2]] {
        &self.vol_grad[q * self.n_b..(q + 1) * self.n_b]
    }

    pub fn edge_weights(&self) -> &[T] {
        &self.edge_w
    }

    pub fn edge_params(&self) -> &[T] {
        &self.edge_s
    }

    /// Basis values at edge point `q` of face `f`; `reversed` walks the face
    /// backwards (the view from the neighbor across the edge).
    pub fn face_phi(&self, f: usize, reversed: bool, q: usize) -> &[T] {
        let t = &self.face_phi[2 * f + reversed as usize];
        &t[q * self.n_b..(q + 1) * self.n_b]
    }

    pub fn face_points(&self, f: usize, reversed: bool) -> &[[T; 2]] {
        &self.face_pts[2 * f + reversed as usize]
    }

    pub fn pp_points(&self) -> &[[T; 2]] {
        &self.pp_points
    }

    pub fn n_pp(&self) -> usize {
        self.pp_points.len()
    }

    pub fn pp_phi(&self, i: usize) -> &[T] {
        &self.pp_phi[i * self.n_b..(i + 1) * self.n_b]
    }

    /// Modal coefficients of the linear function with vertex values `v`.
    pub fn p1_to_modes(&self, v: &[T], out: &mut [T]) {
        let nv = self.dim + 1;
        for j in 0..self.n_b {
            out[j] = (0..nv).map(|i| self.p1_modes[j * nv + i] * v[i]).sum();
        }
    }

    /// Reference point on face `f` at parameter `s` (start to end).
    pub fn face_point(&self, f: usize, s: T) -> [T; 2] {
        if self.dim == 1 {
            return [if f == 0 { T::zero() } else { T::one() }, T::zero()];
        }
        let a = TRIANGLE_VERTICES[(f + 1) % 3];
        let b = TRIANGLE_VERTICES[(f + 2) % 3];
        [
            T::lit(a[0]) + s * T::lit(b[0] - a[0]),
            T::lit(a[1]) + s * T::lit(b[1] - a[1]),
        ]
    }

    /// Basis values at an arbitrary reference point.
    pub fn eval(&self, p: [T; 2], out: &mut [T]) {
        if self.dim == 1 {
            let z = 2.0 * p[0].to_f64_lossy() - 1.0;
            for (j, o) in out.iter_mut().enumerate().take(self.n_b) {
                let (pj, _) = legendre(j, z);
                *o = T::lit(((2 * j + 1) as f64).sqrt() * pj);
            }
            return;
        }
        let x = p[0].to_f64_lossy();
        let y = p[1].to_f64_lossy();
        let m: Vec<f64> = self.exps.iter().map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)).collect();
        let nm = m.len();
        for (j, o) in out.iter_mut().enumerate().take(self.n_b) {
            let row = &self.coef[j * nm..(j + 1) * nm];
            *o = T::lit(row.iter().zip(&m).map(|(c, v)| c * v).sum());
        }
    }

    /// Reference gradients at an arbitrary reference point.
    pub fn grad(&self, p: [T; 2], out: &mut [[T; 2]]) {
        if self.dim == 1 {
            let z = 2.0 * p[0].to_f64_lossy() - 1.0;
            for (j, o) in out.iter_mut().enumerate().take(self.n_b) {
                let (_, dp) = legendre(j, z);
                *o = [T::lit(2.0 * ((2 * j + 1) as f64).sqrt() * dp), T::zero()];
            }
            return;
        }
        let x = p[0].to_f64_lossy();
        let y = p[1].to_f64_lossy();
        let pw = |v: f64, e: usize| if e == 0 { 0.0 } else { e as f64 * v.powi(e as i32 - 1) };
        let dx: Vec<f64> = self.exps.iter().map(|&(a, b)| pw(x, a) * y.powi(b as i32)).collect();
        let dy: Vec<f64> = self.exps.iter().map(|&(a, b)| x.powi(a as i32) * pw(y, b)).collect();
        let nm = dx.len();
        for (j, o) in out.iter_mut().enumerate().take(self.n_b) {
            let row = &self.coef[j * nm..(j + 1) * nm];
            let gx: f64 = row.iter().zip(&dx).map(|(c, v)| c * v).sum();
            let gy: f64 = row.iter().zip(&dy).map(|(c, v)| c * v).sum();
            *o = [T::lit(gx), T::lit(gy)];
        }
    }

    /// Evaluates the expansion `sum_j c_j phi_j` from a cached value row.
    #[inline]
    pub fn combine(phi: &[T], c: &[T]) -> T {
        phi.iter().zip(c).map(|(a, b)| *a * *b).sum()
    }
}

/// Barycentric coordinates of a reference point.
pub fn barycentric<T: Real>(dim: usize, p: [T; 2]) -> [T; 3] {
    if dim == 1 {
        [T::one() - p[0], p[0], T::zero()]
    } else {
        [T::one() - p[0] - p[1], p[0], p[1]]
    }
}

/// Orthonormalizes monomials on the triangle (average inner product), twice
/// for stability. Returns row-major coefficients.
fn gram_schmidt(exps: &[(usize, usize)]) -> Vec<f64> {
    let n = exps.len();
    let gram = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if v[j] == 0.0 {
                    continue;
                }
                s += u[i] * v[j] * triangle_monomial_average(exps[i].0 + exps[j].0, exps[i].1 + exps[j].1);
            }
        }
        s
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for _ in 0..2 {
            for r in &rows {
                let d = gram(&v, r);
                for t in 0..n {
                    v[t] -= d * r[t];
                }
            }
        }
        let nrm = gram(&v, &v).sqrt();
        for x in v.iter_mut() {
            *x /= nrm;
        }
        rows.push(v);
    }
    rows.concat()
}

/// Special points at which positivity is enforced.
///
/// 1D: Gauss-Lobatto points. 2D: for each vertex, the lines joining it to the
/// Gauss points of the opposite edge, sampled at Gauss-Lobatto parameters.
fn pp_point_set<T: Real>(dim: usize, k: usize, edge_s: &[T]) -> Vec<[T; 2]> {
    if dim == 1 {
        let (x, _) = gauss_lobatto::<T>((k + 3).div_ceil(2).max(2));
        return x.into_iter().map(|p| [p, T::zero()]).collect();
    }
    let (t, _) = gauss_lobatto::<T>((k + 4).div_ceil(2));
    let mut pts: Vec<[T; 2]> = Vec::new();
    let tol = T::lit(1e-13);
    for apex in 0..3 {
        let v = TRIANGLE_VERTICES[apex];
        let a = TRIANGLE_VERTICES[(apex + 1) % 3];
        let b = TRIANGLE_VERTICES[(apex + 2) % 3];
        for &s in edge_s {
            let e = [T::lit(a[0]) + s * T::lit(b[0] - a[0]), T::lit(a[1]) + s * T::lit(b[1] - a[1])];
            for &tt in &t {
                let p = [T::lit(v[0]) + tt * (e[0] - T::lit(v[0])), T::lit(v[1]) + tt * (e[1] - T::lit(v[1]))];
                if !pts.iter().any(|q| (q[0] - p[0]).abs() < tol && (q[1] - p[1]).abs() < tol) {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(ReferenceBasis::<f64>::new(1, 2).unwrap().n_b(), 3);
        assert_eq!(ReferenceBasis::<f64>::new(2, 2).unwrap().n_b(), 6);
        assert!(matches!(ReferenceBasis::<f64>::new(1, 4), Err(Error::UnsupportedDegree(4))));
        assert!(matches!(ReferenceBasis::<f64>::new(2, 0), Err(Error::UnsupportedDegree(0))));
    }

    #[test]
    fn orthonormal_under_fine_rule() {
        for dim in [1, 2] {
            for k in 1..=3 {
                let b = ReferenceBasis::<f64>::new(dim, k).unwrap();
                let fine: Rule<f64> = if dim == 1 { interval_rule(12) } else { triangle_rule(12) };
                let n = b.n_b();
                let mut v = vec![0.0; n];
                let mut g = vec![0.0; n * n];
                for (p, w) in fine.points.iter().zip(&fine.weights) {
                    b.eval(*p, &mut v);
                    for i in 0..n {
                        for j in 0..n {
                            g[i * n + j] += w * v[i] * v[j];
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let e = if i == j { 1.0 } else { 0.0 };
                        assert!((g[i * n + j] - e).abs() < 1e-12, "dim={dim} k={k} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = ReferenceBasis::<f64>::new(2, 3).unwrap();
        let n = b.n_b();
        let p = [0.21, 0.37];
        let mut g = vec![[0.0; 2]; n];
        b.grad(p, &mut g);
        let eps = 1e-6;
        let (mut a, mut c) = (vec![0.0; n], vec![0.0; n]);
        for d in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += eps;
            pm[d] -= eps;
            b.eval(pp, &mut a);
            b.eval(pm, &mut c);
            for j in 0..n {
                assert!(((a[j] - c[j]) / (2.0 * eps) - g[j][d]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cached_face_values_match_fresh_evaluation() {
        let b = ReferenceBasis::<f64>::new(2, 2).unwrap();
        let mut v = vec![0.0; b.n_b()];
        for f in 0..3 {
            for rev in [false, true] {
                for (q, p) in b.face_points(f, rev).iter().enumerate() {
                    b.eval(*p, &mut v);
                    for j in 0..b.n_b() {
                        assert!((v[j] - b.face_phi(f, rev, q)[j]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn pp_points_cover_edge_gauss_points() {
        let b = ReferenceBasis::<f64>::new(2, 2).unwrap();
        for f in 0..3 {
            for p in b.face_points(f, false) {
                assert!(b.pp_points().iter().any(|q| (q[0] - p[0]).abs() < 1e-13 && (q[1] - p[1]).abs() < 1e-13));
            }
        }
        let b1 = ReferenceBasis::<f64>::new(1, 2).unwrap();
        assert_eq!(b1.n_pp(), 3);
    }

    #[test]
    fn p1_modes_reproduce_linear_function() {
        let b = ReferenceBasis::<f64>::new(2, 2).unwrap();
        let mut c = vec![0.0; 6];
        b.p1_to_modes(&[1.0, 3.0, -2.0], &mut c);
        let mut v = vec![0.0; 6];
        let p = [0.3, 0.2];
        b.eval(p, &mut v);
        let val: f64 = v.iter().zip(&c).map(|(a, b)| a * b).sum();
        let exact = 1.0 * (1.0 - 0.5) + 3.0 * 0.3 - 2.0 * 0.2;
        assert!((val - exact).abs() < 1e-14);
    }
}
