//! Ripa-model physics and the well-balanced DG spatial operator.
//!
//! States are always four-component `(h, m, w, eta)` with `m = hu`,
//! `w = hv`, `eta = h theta`. One-dimensional runs keep `w = 0` and use
//! normals `(+-1, 0)`, which makes every y-term vanish.

use crate::basis::ReferenceBasis;
use crate::error::{Error, Result};
use crate::field::DgField;
use crate::linalg::{invert, mat2_transpose, mat2_vec};
use crate::mesh::{BoundaryKind, Mesh, Neighbor, Point};
use crate::scalar::Real;

pub const N_COMP: usize = 4;
pub const H: usize = 0;
pub const M: usize = 1;
pub const W: usize = 2;
pub const ETA: usize = 3;

pub type State<T> = [T; 4];

/// Constant `C1` (temperature) and `C2` (free surface) of a lake at rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LakeAtRest<T> {
    pub c1: T,
    pub c2: T,
}

impl<T: Real> LakeAtRest<T> {
    pub fn new(c1: T, c2: T) -> Result<Self> {
        if !(c1 > T::zero()) {
            return Err(Error::Config(format!("lake-at-rest temperature must be positive, got {c1}")));
        }
        Ok(Self { c1, c2 })
    }

    /// The rest state over bottom height `b`.
    pub fn state(&self, b: T) -> State<T> {
        let h = (self.c2 - b).max(T::zero());
        [h, T::zero(), T::zero(), self.c1 * h]
    }
}

/// Gravity and the depth below which a state counts as dry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physics<T> {
    pub g: T,
    pub dry_tol: T,
}

impl<T: Real> Default for Physics<T> {
    fn default() -> Self {
        Self {
            g: T::one(),
            dry_tol: T::lit(1e-6),
        }
    }
}

impl<T: Real> Physics<T> {
    /// Velocity `(u, v)`, zero in dry states.
    #[inline]
    pub fn velocity(&self, u: &State<T>) -> (T, T) {
        if u[H] > self.dry_tol {
            (u[M] / u[H], u[W] / u[H])
        } else {
            (T::zero(), T::zero())
        }
    }

    /// Sound speed `sqrt(g h theta) = sqrt(g eta)`.
    #[inline]
    pub fn celerity(&self, u: &State<T>) -> T {
        if u[H] > T::zero() {
            (self.g * u[ETA].max(T::zero())).sqrt()
        } else {
            T::zero()
        }
    }

    /// Normal flux `F(U) . n`.
    #[inline]
    pub fn flux(&self, u: &State<T>, n: Point<T>) -> State<T> {
        let (vx, vy) = self.velocity(u);
        let un = vx * n[0] + vy * n[1];
        let p = T::lit(0.5) * self.g * u[ETA] * u[H];
        [
            u[M] * n[0] + u[W] * n[1],
            u[M] * un + p * n[0],
            u[W] * un + p * n[1],
            u[ETA] * un,
        ]
    }

    /// x- and y-fluxes.
    pub fn flux_xy(&self, u: &State<T>) -> (State<T>, State<T>) {
        (
            self.flux(u, [T::one(), T::zero()]),
            self.flux(u, [T::zero(), T::one()]),
        )
    }

    /// Bottom source `(0, -g eta b_x, -g eta b_y, 0)`.
    #[inline]
    pub fn source(&self, u: &State<T>, grad_b: Point<T>) -> State<T> {
        [
            T::zero(),
            -self.g * u[ETA] * grad_b[0],
            -self.g * u[ETA] * grad_b[1],
            T::zero(),
        ]
    }

    /// `|u . n| + c`; zero for dry states.
    #[inline]
    pub fn max_wave_speed(&self, u: &State<T>, n: Point<T>) -> T {
        let (vx, vy) = self.velocity(u);
        (vx * n[0] + vy * n[1]).abs() + self.celerity(u)
    }

    /// Lax-Friedrichs flux with dissipation `alpha`.
    pub fn lax_friedrichs(&self, ui: &State<T>, ue: &State<T>, n: Point<T>, alpha: T) -> State<T> {
        let fi = self.flux(ui, n);
        let fe = self.flux(ue, n);
        let half = T::lit(0.5);
        let mut out = [T::zero(); 4];
        for c in 0..4 {
            out[c] = half * (fi[c] + fe[c] - alpha * (ue[c] - ui[c]));
        }
        out
    }

    /// Hydrostatic reconstruction of both traces at `b* = max(b_int, b_ext)`.
    pub fn hydrostatic_reconstruct(&self, ui: &State<T>, ue: &State<T>, bi: T, be: T) -> (State<T>, State<T>) {
        let bs = bi.max(be);
        (self.rescale(ui, bi, bs), self.rescale(ue, be, bs))
    }

    fn rescale(&self, u: &State<T>, b: T, bs: T) -> State<T> {
        if b == bs {
            return *u;
        }
        let hs = (u[H] + b - bs).max(T::zero());
        let r = if u[H] >= self.dry_tol { hs / u[H] } else { T::zero() };
        [hs, u[M] * r, u[W] * r, u[ETA] * r]
    }

    /// Well-balanced flux `F^(U*_int, U*_ext) + (F(U_int) - F(U*_int)) . n`
    /// with dissipation `alpha`.
    pub fn well_balanced_flux_with(&self, ui: &State<T>, ue: &State<T>, bi: T, be: T, n: Point<T>, alpha: T) -> State<T> {
        let (si, se) = self.hydrostatic_reconstruct(ui, ue, bi, be);
        let mut f = self.lax_friedrichs(&si, &se, n, alpha);
        if bi != be {
            let fi = self.flux(ui, n);
            let fs = self.flux(&si, n);
            for c in 0..4 {
                f[c] += fi[c] - fs[c];
            }
        }
        f
    }

    /// Edge-local dissipation: the larger wave speed of the two traces.
    #[inline]
    pub fn edge_alpha(&self, ui: &State<T>, ue: &State<T>, n: Point<T>) -> T {
        self.max_wave_speed(ui, n).max(self.max_wave_speed(ue, n))
    }

    pub fn well_balanced_flux(&self, ui: &State<T>, ue: &State<T>, bi: T, be: T, n: Point<T>) -> State<T> {
        self.well_balanced_flux_with(ui, ue, bi, be, n, self.edge_alpha(ui, ue, n))
    }

    /// Right and left eigenvectors (row-major 4x4, columns of `R` are the
    /// eigenvectors) of `F'(U) . n`. `None` for dry or sonic-degenerate states.
    pub fn eigenvectors(&self, u: &State<T>, n: Point<T>) -> Option<([T; 16], [T; 16])> {
        if !(u[H] > self.dry_tol) {
            return None;
        }
        let c = self.celerity(u);
        if !(c > T::lit(1e-12)) {
            return None;
        }
        let (vx, vy) = self.velocity(u);
        let th = u[ETA] / u[H];
        let o = T::one();
        let z = T::zero();
        let cols = [
            [o, vx - c * n[0], vy - c * n[1], th],
            [z, -n[1], n[0], z],
            [o, vx, vy, -th],
            [o, vx + c * n[0], vy + c * n[1], th],
        ];
        let mut r = [z; 16];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..4 {
                r[i * 4 + j] = col[i];
            }
        }
        let l = invert(&r, 4, T::lit(1e-13))?;
        let mut la = [z; 16];
        la.copy_from_slice(&l);
        Some((r, la))
    }
}

/// `y = A x` for a row-major 4x4 matrix.
#[inline]
pub fn mat4_vec<T: Real>(a: &[T; 16], x: &State<T>) -> State<T> {
    let mut y = [T::zero(); 4];
    for i in 0..4 {
        y[i] = a[i * 4] * x[0] + a[i * 4 + 1] * x[1] + a[i * 4 + 2] * x[2] + a[i * 4 + 3] * x[3];
    }
    y
}

/// State at a cached evaluation row.
#[inline]
pub fn state_at<T: Real>(field: &DgField<T>, e: usize, phi: &[T]) -> State<T> {
    let mut s = [T::zero(); 4];
    for (c, v) in s.iter_mut().enumerate() {
        *v = ReferenceBasis::combine(phi, field.coeffs(e, c));
    }
    s
}

/// Cell-average state of element `e`.
#[inline]
pub fn average_state<T: Real>(field: &DgField<T>, e: usize) -> State<T> {
    [
        field.cell_average(e, H),
        field.cell_average(e, M),
        field.cell_average(e, W),
        field.cell_average(e, ETA),
    ]
}

/// Ghost state for a physical boundary.
#[inline]
pub fn ghost_state<T: Real>(u: &State<T>, n: Point<T>, kind: BoundaryKind) -> State<T> {
    match kind {
        BoundaryKind::Reflective => {
            let un = u[M] * n[0] + u[W] * n[1];
            let two = T::lit(2.0);
            [u[H], u[M] - two * un * n[0], u[W] - two * un * n[1], u[ETA]]
        }
        _ => *u,
    }
}

/// Time derivative of the modal coefficients: the well-balanced residual
/// divided by the element measure (the mass matrix is `|K| I`).
pub fn residual<T: Real>(
    state: &DgField<T>,
    bottom: &DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
) -> Result<DgField<T>> {
    let n_b = basis.n_b();
    let dim = mesh.dim();
    let mut rhs: DgField<T> = DgField::zeros(state.n_elements(), N_COMP, n_b);

    // Volume terms.
    let mut gphys = vec![[T::zero(); 2]; n_b];
    for e in 0..mesh.n_elements() {
        let geo = mesh.geometry(e);
        let jit = mat2_transpose(&geo.jac_inv);
        let bcf = bottom.coeffs(e, 0);
        let out: &mut [T] = rhs.element_mut(e);
        for q in 0..basis.n_vol() {
            let w = basis.vol.weights[q];
            let phi = basis.vol_phi(q);
            let grads = basis.vol_grad(q);
            for j in 0..n_b {
                gphys[j] = if dim == 1 {
                    [grads[j][0] * geo.jac_inv[0][0], T::zero()]
                } else {
                    mat2_vec(&jit, grads[j])
                };
            }
            let u = state_at(state, e, phi);
            let mut gb = [T::zero(); 2];
            for j in 0..n_b {
                gb[0] += bcf[j] * gphys[j][0];
                gb[1] += bcf[j] * gphys[j][1];
            }
            let (fx, fy) = phys.flux_xy(&u);
            let s = phys.source(&u, gb);
            for c in 0..N_COMP {
                let o = &mut out[c * n_b..(c + 1) * n_b];
                for j in 0..n_b {
                    o[j] += w * (s[c] * phi[j] + fx[c] * gphys[j][0] + fy[c] * gphys[j][1]);
                }
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "residual volume term", elem: e });
        }
    }

    // Edge terms, each edge visited once.
    let nq = basis.n_edge();
    let ew = basis.edge_weights();
    for (i, edge) in mesh.edges().iter().enumerate() {
        let eg = mesh.edge_geometry(i);
        let n = eg.normal;
        let nn = [-n[0], -n[1]];
        let l = edge.left;
        let fl = edge.left_face;
        // Edge length relative to |K| converts averages into modal rates.
        let sl = eg.length / mesh.measure(l);
        match edge.right {
            Neighbor::Element { elem: r, face: fr, reversed, .. } => {
                let sr = eg.length / mesh.measure(r);
                for q in 0..nq {
                    let pl = basis.face_phi(fl, false, q);
                    let pr = basis.face_phi(fr, reversed, q);
                    let ul = state_at(state, l, pl);
                    let ur = state_at(state, r, pr);
                    let bl = ReferenceBasis::combine(pl, bottom.coeffs(l, 0));
                    let br = ReferenceBasis::combine(pr, bottom.coeffs(r, 0));
                    let alpha = phys.edge_alpha(&ul, &ur, n);
                    let f_l = phys.well_balanced_flux_with(&ul, &ur, bl, br, n, alpha);
                    let f_r = phys.well_balanced_flux_with(&ur, &ul, br, bl, nn, alpha);
                    for c in 0..N_COMP {
                        let ol = rhs.coeffs_mut(l, c);
                        for j in 0..n_b {
                            ol[j] -= sl * ew[q] * f_l[c] * pl[j];
                        }
                        let or = rhs.coeffs_mut(r, c);
                        for j in 0..n_b {
                            or[j] -= sr * ew[q] * f_r[c] * pr[j];
                        }
                    }
                }
                if !f_finite(&rhs, r) {
                    return Err(Error::NonFinite { context: "residual edge flux", elem: r });
                }
            }
            Neighbor::Boundary(kind) => {
                for q in 0..nq {
                    let pl = basis.face_phi(fl, false, q);
                    let ul = state_at(state, l, pl);
                    let bl = ReferenceBasis::combine(pl, bottom.coeffs(l, 0));
                    let ug = ghost_state(&ul, n, kind);
                    let f = phys.well_balanced_flux(&ul, &ug, bl, bl, n);
                    for c in 0..N_COMP {
                        let ol = rhs.coeffs_mut(l, c);
                        for j in 0..n_b {
                            ol[j] -= sl * ew[q] * f[c] * pl[j];
                        }
                    }
                }
            }
        }
        if !f_finite(&rhs, l) {
            return Err(Error::NonFinite { context: "residual edge flux", elem: l });
        }
    }
    Ok(rhs)
}

fn f_finite<T: Real>(f: &DgField<T>, e: usize) -> bool {
    f.element(e).iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Physics<f64> {
        Physics::default()
    }

    #[test]
    fn flux_examples() {
        let f = p().flux(&[2.0, 0.0, 0.0, 20.0], [1.0, 0.0]);
        assert_eq!(f, [0.0, 20.0, 0.0, 0.0]);
        let f = p().flux(&[1.0, 1.0, 0.0, 1.0], [1.0, 0.0]);
        assert_eq!(f, [1.0, 1.5, 0.0, 1.0]);
    }

    #[test]
    fn source_examples() {
        assert_eq!(p().source(&[1.0, 0.0, 0.0, 2.0], [0.0, 0.0]), [0.0, -0.0, -0.0, 0.0]);
        assert_eq!(p().source(&[1.0, 0.0, 0.0, 2.0], [0.5, 0.0])[1], -1.0);
    }

    #[test]
    fn wave_speed_examples() {
        assert_eq!(p().max_wave_speed(&[1.0, 0.0, 0.0, 1.0], [1.0, 0.0]), 1.0);
        assert_eq!(p().max_wave_speed(&[1.0, 1.0, 0.0, 1.0], [1.0, 0.0]), 2.0);
        assert_eq!(p().max_wave_speed(&[0.0, 0.0, 0.0, 0.0], [1.0, 0.0]), 0.0);
    }

    #[test]
    fn lf_consistency_and_rest() {
        let u = [1.3, 0.4, -0.2, 2.0];
        let n = [0.6, 0.8];
        let f = p().lax_friedrichs(&u, &u, n, 3.0);
        assert_eq!(f, p().flux(&u, n));
        let r = [2.0, 0.0, 0.0, 6.0];
        let f = p().lax_friedrichs(&r, &r, n, 5.0);
        assert!((f[1] - 0.5 * 6.0 * 2.0 * 0.6).abs() < 1e-15 && (f[2] - 0.5 * 6.0 * 2.0 * 0.8).abs() < 1e-15);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn hydrostatic_examples() {
        let ui = [2.0, 0.0, 0.0, 20.0];
        let ue = [1.0, 0.0, 0.0, 10.0];
        let (a, b) = p().hydrostatic_reconstruct(&ui, &ue, 0.0, 1.0);
        assert_eq!(a, [1.0, 0.0, 0.0, 10.0]);
        assert_eq!(b, [1.0, 0.0, 0.0, 10.0]);
        let (a, b) = p().hydrostatic_reconstruct(&ui, &ue, 0.5, 0.5);
        assert_eq!((a, b), (ui, ue));
        let (_, b) = p().hydrostatic_reconstruct(&[3.0, 1.0, 0.0, 3.0], &[0.5, 0.1, 0.0, 0.5], 2.0, 1.0);
        assert_eq!(b, [0.0; 4]);
    }

    #[test]
    fn well_balanced_flux_at_rest_across_step() {
        let ui = [2.0, 0.0, 0.0, 20.0];
        let ue = [1.0, 0.0, 0.0, 10.0];
        let n = [1.0, 0.0];
        let f = p().well_balanced_flux(&ui, &ue, 0.0, 1.0, n);
        assert_eq!(f, p().flux(&ui, n));
        let g = p().well_balanced_flux(&ue, &ui, 1.0, 0.0, [-1.0, 0.0]);
        assert_eq!(g, p().flux(&ue, [-1.0, 0.0]));
    }

    #[test]
    fn eigenvectors_diagonalize_jacobian() {
        let ph = p();
        let u = [1.7, 0.9, -0.4, 3.1];
        let n = [0.6, -0.8];
        let (r, l) = ph.eigenvectors(&u, n).unwrap();
        // Numerical Jacobian.
        let eps = 1e-7;
        let mut a = [0.0; 16];
        for j in 0..4 {
            let mut up = u;
            let mut um = u;
            up[j] += eps;
            um[j] -= eps;
            let fp = ph.flux(&up, n);
            let fm = ph.flux(&um, n);
            for i in 0..4 {
                a[i * 4 + j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        let c = ph.celerity(&u);
        let un = (u[1] * n[0] + u[2] * n[1]) / u[0];
        let lam = [un - c, un, un, un + c];
        for j in 0..4 {
            let col = [r[j], r[4 + j], r[8 + j], r[12 + j]];
            let ac = mat4_vec(&a, &col);
            for i in 0..4 {
                assert!((ac[i] - lam[j] * col[i]).abs() < 1e-6);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| l[i * 4 + k] * r[k * 4 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(ph.eigenvectors(&[1e-9, 0.0, 0.0, 1e-9], n).is_none());
    }
}
