//! Piecewise-polynomial fields stored as per-element modal coefficients.

use std::fmt::Write as _;

use crate::basis::ReferenceBasis;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::scalar::Real;

/// Modal coefficients laid out as `[element][component][mode]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DgField<T> {
    n_elem: usize,
    n_comp: usize,
    n_b: usize,
    data: Vec<T>,
}

impl<T: Real> DgField<T> {
    pub fn zeros(n_elem: usize, n_comp: usize, n_b: usize) -> Self {
        Self {
            n_elem,
            n_comp,
            n_b,
            data: vec![T::zero(); n_elem * n_comp * n_b],
        }
    }

    pub fn from_data(n_elem: usize, n_comp: usize, n_b: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_elem * n_comp * n_b {
            return Err(Error::Config(format!(
                "coefficient array of length {} does not match {n_elem}x{n_comp}x{n_b}",
                data.len()
            )));
        }
        Ok(Self { n_elem, n_comp, n_b, data })
    }

    /// Same-shape field with every value zero.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_elem, self.n_comp, self.n_b)
    }

    pub fn n_elements(&self) -> usize {
        self.n_elem
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn coeffs(&self, e: usize, c: usize) -> &[T] {
        let o = (e * self.n_comp + c) * self.n_b;
        &self.data[o..o + self.n_b]
    }

    #[inline]
    pub fn coeffs_mut(&mut self, e: usize, c: usize) -> &mut [T] {
        let o = (e * self.n_comp + c) * self.n_b;
        &mut self.data[o..o + self.n_b]
    }

    /// All components of element `e`, contiguous.
    pub fn element(&self, e: usize) -> &[T] {
        let s = self.n_comp * self.n_b;
        &self.data[e * s..(e + 1) * s]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [T] {
        let s = self.n_comp * self.n_b;
        &mut self.data[e * s..(e + 1) * s]
    }

    /// Cell average of component `c` (the constant mode).
    #[inline]
    pub fn cell_average(&self, e: usize, c: usize) -> T {
        self.coeffs(e, c)[0]
    }

    /// Copies component `c` into a scalar field.
    pub fn component(&self, c: usize) -> DgField<T> {
        let mut out = DgField::zeros(self.n_elem, 1, self.n_b);
        for e in 0..self.n_elem {
            out.coeffs_mut(e, 0).copy_from_slice(self.coeffs(e, c));
        }
        out
    }

    pub fn set_component(&mut self, c: usize, src: &DgField<T>) {
        for e in 0..self.n_elem {
            let v = src.coeffs(e, 0).to_vec();
            self.coeffs_mut(e, c).copy_from_slice(&v);
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &DgField<T>) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * *y;
        }
    }

    /// `a * x + b * y`, elementwise.
    pub fn lincomb(a: T, x: &DgField<T>, b: T, y: &DgField<T>) -> DgField<T> {
        let data = x.data.iter().zip(&y.data).map(|(u, v)| a * *u + b * *v).collect();
        DgField { data, ..*x }
    }

    pub fn scale(&mut self, a: T) {
        for x in self.data.iter_mut() {
            *x *= a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// First element containing a non-finite coefficient.
    pub fn first_non_finite(&self) -> Option<usize> {
        let s = self.n_comp * self.n_b;
        self.data.iter().position(|x| !x.is_finite()).map(|i| i / s)
    }

    /// Value of component `c` at reference point `xi` of element `e`.
    pub fn evaluate(&self, basis: &ReferenceBasis<T>, e: usize, c: usize, xi: Point<T>) -> T {
        let mut phi = vec![T::zero(); self.n_b];
        basis.eval(xi, &mut phi);
        ReferenceBasis::combine(&phi, self.coeffs(e, c))
    }

    /// Values of component `c` at the cached volume points.
    pub fn values_at_vol(&self, basis: &ReferenceBasis<T>, e: usize, c: usize, out: &mut [T]) {
        let cf = self.coeffs(e, c);
        for (q, o) in out.iter_mut().enumerate().take(basis.n_vol()) {
            *o = ReferenceBasis::combine(basis.vol_phi(q), cf);
        }
    }

    /// Values of component `c` at the positivity point set.
    pub fn values_at_pp(&self, basis: &ReferenceBasis<T>, e: usize, c: usize, out: &mut [T]) {
        let cf = self.coeffs(e, c);
        for (i, o) in out.iter_mut().enumerate().take(basis.n_pp()) {
            *o = ReferenceBasis::combine(basis.pp_phi(i), cf);
        }
    }

    /// Minimum of component `c` over the positivity point set of every element.
    pub fn min_at_pp(&self, basis: &ReferenceBasis<T>, c: usize) -> T {
        let mut buf = vec![T::zero(); basis.n_pp()];
        let mut m = T::infinity();
        for e in 0..self.n_elem {
            self.values_at_pp(basis, e, c, &mut buf);
            for v in &buf {
                m = m.min(*v);
            }
        }
        m
    }

    /// Integral of component `c` over element `e`.
    pub fn integrate(&self, mesh: &Mesh<T>, e: usize, c: usize) -> T {
        mesh.measure(e) * self.cell_average(e, c)
    }

    /// Integral of component `c` over the whole mesh.
    pub fn total(&self, mesh: &Mesh<T>, c: usize) -> T {
        (0..self.n_elem).map(|e| self.integrate(mesh, e, c)).sum()
    }

    /// Plain-text snapshot: one row per element and component.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# elements {} components {} modes {}", self.n_elem, self.n_comp, self.n_b);
        for e in 0..self.n_elem {
            for c in 0..self.n_comp {
                let row: Vec<String> = self.coeffs(e, c).iter().map(|x| format!("{x:.17e}")).collect();
                let _ = writeln!(s, "{e} {c} {}", row.join(" "));
            }
        }
        s
    }
}

/// Per-element L2 projection of a pointwise function with `n_comp` outputs.
pub fn l2_project<T: Real>(
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    n_comp: usize,
    f: impl Fn(Point<T>, &mut [T]),
) -> Result<DgField<T>> {
    let n_b = basis.n_b();
    let mut out = DgField::zeros(mesh.n_elements(), n_comp, n_b);
    let mut val = vec![T::zero(); n_comp];
    for e in 0..mesh.n_elements() {
        for q in 0..basis.n_vol() {
            let x = mesh.to_physical(e, basis.vol.points[q]);
            f(x, &mut val);
            if val.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: "projection", elem: e });
            }
            let w = basis.vol.weights[q];
            let phi = basis.vol_phi(q);
            for c in 0..n_comp {
                let cf = out.coeffs_mut(e, c);
                for j in 0..n_b {
                    cf[j] += w * val[c] * phi[j];
                }
            }
        }
    }
    Ok(out)
}

/// Scalar convenience wrapper around [`l2_project`].
pub fn l2_project_scalar<T: Real>(mesh: &Mesh<T>, basis: &ReferenceBasis<T>, f: impl Fn(Point<T>) -> T) -> Result<DgField<T>> {
    l2_project(mesh, basis, 1, |x, out| out[0] = f(x))
}

/// Integral of a pointwise function over element `e` with the volume rule.
pub fn integrate_fn<T: Real>(mesh: &Mesh<T>, basis: &ReferenceBasis<T>, e: usize, f: impl Fn(Point<T>) -> T) -> T {
    let avg: T = (0..basis.n_vol())
        .map(|q| basis.vol.weights[q] * f(mesh.to_physical(e, basis.vol.points[q])))
        .sum();
    avg * mesh.measure(e)
}

/// Integral of a pointwise function over edge `i` with the edge rule.
pub fn integrate_edge_fn<T: Real>(mesh: &Mesh<T>, basis: &ReferenceBasis<T>, i: usize, f: impl Fn(Point<T>) -> T) -> T {
    let edge = &mesh.edges()[i];
    let len = mesh.edge_geometry(i).length;
    let avg: T = basis
        .edge_params()
        .iter()
        .zip(basis.edge_weights())
        .map(|(&s, &w)| w * f(mesh.to_physical(edge.left, basis.face_point(edge.left_face, s))))
        .sum();
    avg * len
}
