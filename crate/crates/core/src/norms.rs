//! Error norms against exact functions or reference solutions on other meshes.

use std::fmt::Write as _;

use log::warn;

use crate::basis::{barycentric, ReferenceBasis};
use crate::field::DgField;
use crate::mesh::{Mesh, Point};
use crate::ripa::{ETA, H, M, W};
use crate::scalar::Real;

/// Derived pointwise quantity of a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Depth,
    Surface,
    MomX,
    MomY,
    HTheta,
    Theta,
    Bottom,
}

impl Var {
    pub fn name(&self) -> &'static str {
        match self {
            Var::Depth => "h",
            Var::Surface => "h+b",
            Var::MomX => "hu",
            Var::MomY => "hv",
            Var::HTheta => "htheta",
            Var::Theta => "theta",
            Var::Bottom => "b",
        }
    }

    /// Value from conserved variables `u` and bottom `b`.
    pub fn eval(&self, u: [f64; 4], b: f64, dry_tol: f64) -> f64 {
        match self {
            Var::Depth => u[H],
            Var::Surface => u[H] + b,
            Var::MomX => u[M],
            Var::MomY => u[W],
            Var::HTheta => u[ETA],
            Var::Theta => {
                if u[H] > dry_tol {
                    u[ETA] / u[H]
                } else {
                    0.0
                }
            }
            Var::Bottom => b,
        }
    }
}

/// Per-variable L1 (normalized by the domain measure) and max errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub vars: Vec<Var>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
}

impl ErrorReport {
    pub fn max_l1(&self) -> f64 {
        self.l1.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_linf(&self) -> f64 {
        self.linf.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn get(&self, v: Var) -> Option<(f64, f64)> {
        self.vars.iter().position(|x| *x == v).map(|i| (self.l1[i], self.linf[i]))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variable,l1,linf\n");
        for i in 0..self.vars.len() {
            let _ = writeln!(s, "{},{:.17e},{:.17e}", self.vars[i].name(), self.l1[i], self.linf[i]);
        }
        s
    }
}

/// `log2(e_coarse / e_fine)` for each successive pair of a refinement sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Conserved state and bottom of a DG solution at a physical point.
pub fn sample_solution<T: Real>(
    basis: &ReferenceBasis<T>,
    state: &DgField<T>,
    bottom: &DgField<T>,
    e: usize,
    xi: Point<T>,
) -> ([f64; 4], f64) {
    let mut phi = vec![T::zero(); basis.n_b()];
    basis.eval(xi, &mut phi);
    let mut u = [0.0; 4];
    for (c, v) in u.iter_mut().enumerate() {
        *v = ReferenceBasis::combine(&phi, state.coeffs(e, c)).to_f64_lossy();
    }
    (u, ReferenceBasis::combine(&phi, bottom.coeffs(e, 0)).to_f64_lossy())
}

/// Point location on a mesh: sorted intervals in 1D, a bucket grid in 2D.
pub struct PointLocator<'a, T> {
    mesh: &'a Mesh<T>,
    order: Vec<(f64, usize)>,
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Real> PointLocator<'a, T> {
    pub fn new(mesh: &'a Mesh<T>) -> Self {
        let n = mesh.n_elements();
        let bbox = |e: usize| {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for &v in mesh.element(e) {
                let p = mesh.coords()[v];
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d].to_f64_lossy());
                    hi[d] = hi[d].max(p[d].to_f64_lossy());
                }
            }
            (lo, hi)
        };
        if mesh.dim() == 1 {
            let mut order: Vec<(f64, usize)> = (0..n).map(|e| (bbox(e).0[0], e)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            return Self { mesh, order, lo: [0.0; 2], cell: [1.0; 2], dims: [0; 2], buckets: Vec::new() };
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in mesh.coords() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d].to_f64_lossy());
                hi[d] = hi[d].max(p[d].to_f64_lossy());
            }
        }
        let side = ((n as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [((hi[0] - lo[0]) / side as f64).max(1e-300), ((hi[1] - lo[1]) / side as f64).max(1e-300)];
        let mut buckets = vec![Vec::new(); side * side];
        for e in 0..n {
            let (a, b) = bbox(e);
            let i0 = (((a[0] - lo[0]) / cell[0]).floor().max(0.0) as usize).min(side - 1);
            let i1 = (((b[0] - lo[0]) / cell[0]).floor().max(0.0) as usize).min(side - 1);
            let j0 = (((a[1] - lo[1]) / cell[1]).floor().max(0.0) as usize).min(side - 1);
            let j1 = (((b[1] - lo[1]) / cell[1]).floor().max(0.0) as usize).min(side - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(e);
                }
            }
        }
        Self { mesh, order: Vec::new(), lo, cell, dims, buckets }
    }

    fn inside(&self, e: usize, p: Point<T>) -> Option<Point<T>> {
        let xi = self.mesh.to_reference(e, p);
        let l = barycentric(self.mesh.dim(), xi);
        let tol = T::lit(-1e-10);
        let ok = l.iter().take(self.mesh.dim() + 1).all(|x| *x >= tol);
        ok.then_some(xi)
    }

    /// Element containing `p` and the reference coordinates of `p`. Falls
    /// back to the element with the nearest centroid.
    pub fn locate(&self, p: Point<T>) -> (usize, Point<T>) {
        if self.mesh.dim() == 1 {
            let x = p[0].to_f64_lossy();
            let k = self.order.partition_point(|(a, _)| *a <= x).max(1) - 1;
            for kk in [k, k.saturating_sub(1), (k + 1).min(self.order.len() - 1)] {
                let e = self.order[kk].1;
                if let Some(xi) = self.inside(e, p) {
                    return (e, xi);
                }
            }
        } else {
            let x = [p[0].to_f64_lossy(), p[1].to_f64_lossy()];
            let i = (((x[0] - self.lo[0]) / self.cell[0]).floor().max(0.0) as usize).min(self.dims[0] - 1);
            let j = (((x[1] - self.lo[1]) / self.cell[1]).floor().max(0.0) as usize).min(self.dims[1] - 1);
            for &e in &self.buckets[j * self.dims[0] + i] {
                if let Some(xi) = self.inside(e, p) {
                    return (e, xi);
                }
            }
        }
        warn!("point location failed; using the nearest element");
        let mut best = (0, T::infinity());
        for e in 0..self.mesh.n_elements() {
            let c = self.mesh.geometry(e).centroid;
            let d = (c[0] - p[0]).hypot(c[1] - p[1]);
            if d < best.1 {
                best = (e, d);
            }
        }
        (best.0, self.mesh.to_reference(best.0, p))
    }
}

/// Errors of `vars` with respect to `reference(x) -> values in vars order`.
/// L1 uses the volume rule; the max is taken over volume and positivity points.
pub fn compute_errors<T: Real>(
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    state: &DgField<T>,
    bottom: &DgField<T>,
    vars: &[Var],
    dry_tol: f64,
    reference: &dyn Fn(Point<f64>, &mut [f64]),
) -> ErrorReport {
    compute_errors_local(mesh, basis, state, bottom, vars, dry_tol, &|x, _, _, out| reference(x, out))
}

/// Like [`compute_errors`], but the reference also sees the computed state
/// and bottom at the sample point.
pub fn compute_errors_local<T: Real>(
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    state: &DgField<T>,
    bottom: &DgField<T>,
    vars: &[Var],
    dry_tol: f64,
    reference: &dyn Fn(Point<f64>, &[f64; 4], f64, &mut [f64]),
) -> ErrorReport {
    let nv = vars.len();
    let mut l1 = vec![0.0; nv];
    let mut linf = vec![0.0_f64; nv];
    let mut refv = vec![0.0; nv];
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let meas = mesh.measure(e).to_f64_lossy();
        total += meas;
        let pts = basis.vol.points.iter().map(|p| (*p, true)).chain(basis.pp_points().iter().map(|p| (*p, false)));
        for (q, (xi, is_vol)) in pts.enumerate() {
            let x = mesh.to_physical(e, xi);
            let xf = [x[0].to_f64_lossy(), x[1].to_f64_lossy()];
            let (u, b) = sample_solution(basis, state, bottom, e, xi);
            reference(xf, &u, b, &mut refv);
            for (i, v) in vars.iter().enumerate() {
                let err = (v.eval(u, b, dry_tol) - refv[i]).abs();
                linf[i] = linf[i].max(err);
                if is_vol {
                    l1[i] += meas * basis.vol.weights[q].to_f64_lossy() * err;
                }
            }
        }
    }
    for x in l1.iter_mut() {
        *x /= total;
    }
    ErrorReport { vars: vars.to_vec(), l1, linf }
}

/// Errors against another DG solution (possibly on a different mesh),
/// sampled by point location.
#[allow(clippy::too_many_arguments)]
pub fn compute_errors_vs_solution<T: Real>(
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    state: &DgField<T>,
    bottom: &DgField<T>,
    ref_mesh: &Mesh<T>,
    ref_basis: &ReferenceBasis<T>,
    ref_state: &DgField<T>,
    ref_bottom: &DgField<T>,
    vars: &[Var],
    dry_tol: f64,
) -> ErrorReport {
    let loc = PointLocator::new(ref_mesh);
    let f = |x: Point<f64>, out: &mut [f64]| {
        let (e, xi) = loc.locate([T::lit(x[0]), T::lit(x[1])]);
        let (u, b) = sample_solution(ref_basis, ref_state, ref_bottom, e, xi);
        for (o, v) in out.iter_mut().zip(vars) {
            *o = v.eval(u, b, dry_tol);
        }
    };
    compute_errors(mesh, basis, state, bottom, vars, dry_tol, &f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_project;
    use crate::mesh::{interval_mesh, rectangle_mesh, BoundaryKind, QuadSplit};

    #[test]
    fn offsets_and_self_comparison() {
        let m = interval_mesh(0.0_f64, 1.0, 7, BoundaryKind::Outflow).unwrap();
        let b = ReferenceBasis::new(1, 2).unwrap();
        let s = l2_project(&m, &b, 4, |x, o| o.copy_from_slice(&[1.0 + x[0], 0.5, 0.0, 2.0])).unwrap();
        let bot = l2_project(&m, &b, 1, |_, o| o[0] = 0.0).unwrap();
        let r = compute_errors(&m, &b, &s, &bot, &[Var::Depth, Var::MomX], 1e-6, &|x, o| {
            o[0] = 1.0 + x[0] + 0.25;
            o[1] = 0.5;
        });
        assert!((r.l1[0] - 0.25).abs() < 1e-14 && (r.linf[0] - 0.25).abs() < 1e-14);
        assert!(r.l1[1] < 1e-15);
        let same = compute_errors_vs_solution(&m, &b, &s, &bot, &m, &b, &s, &bot, &[Var::Depth], 1e-6);
        assert!(same.max_linf() < 1e-14);
    }

    #[test]
    fn locator_2d() {
        let m = rectangle_mesh([0.0_f64, 0.0], [2.0, 1.0], 6, 3, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow)
            .unwrap();
        let loc = PointLocator::new(&m);
        for p in [[0.1, 0.1], [1.9, 0.95], [1.0, 0.5], [0.333, 0.777]] {
            let (e, xi) = loc.locate(p);
            let back = m.to_physical(e, xi);
            assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
            let l = barycentric(2, xi);
            assert!(l.iter().all(|x| *x > -1e-10));
        }
    }

    #[test]
    fn orders() {
        let o = observed_orders(&[8.0, 1.0, 0.125]);
        assert!((o[0] - 3.0).abs() < 1e-15 && (o[1] - 3.0).abs() < 1e-15);
    }
}
