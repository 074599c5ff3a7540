//! Metric construction from recovered Hessians and metric-conforming node
//! movement by minimizing the Huang equidistribution and alignment
//! functional over computational coordinates.

use log::warn;

use crate::error::{Error, Result};
use crate::field::DgField;
use crate::linalg::{lstsq, Sym2};
use crate::mesh::{Mesh, Point, VertexConstraint};
use crate::ripa::{Physics, ETA, H, M, W};
use crate::scalar::Real;

/// One SPD matrix per element. In 1D the scalar metric `m` is stored as `m I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField<T> {
    pub m: Vec<Sym2<T>>,
    pub beta: T,
}

impl<T: Real> MetricField<T> {
    pub fn uniform(n: usize, value: T) -> Self {
        Self { m: vec![Sym2::scaled_identity(value); n], beta: T::zero() }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Per-element metric density `sqrt(det M)` (in 1D, `sqrt(m)`).
    pub fn density(&self, dim: usize) -> Vec<T> {
        self.m
            .iter()
            .map(|m| if dim == 1 { m.a.sqrt() } else { m.det().sqrt() })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig<T> {
    /// Weight of the depth metric in the intersection.
    pub delta: T,
    /// Floor inside `ln(h)`.
    pub h_floor: T,
    /// Floor inside `ln(E)`.
    pub e_floor: T,
    pub smoothing_sweeps: usize,
    pub mover_iters: usize,
    /// Recovered Hessians with max entry below this are treated as zero.
    pub hessian_tol: T,
    /// Largest vertex step as a fraction of the local element height.
    pub max_step: T,
    /// Moves whose largest vertex displacement is below this fraction of
    /// the smallest element height are discarded as roundoff noise.
    pub min_move: T,
    /// Largest ratio between metric eigenvalues anywhere in the mesh. Bounds
    /// the concentration at discontinuities, where the recovered Hessian
    /// grows like the inverse square of the local element size.
    pub max_ratio: T,
    pub theta: T,
    pub p: T,
}

impl<T: Real> AdaptConfig<T> {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            delta: if dim == 1 { T::lit(0.1) } else { T::one() },
            h_floor: T::lit(1e-6),
            e_floor: T::lit(1e-12),
            smoothing_sweeps: 2,
            mover_iters: 5,
            hessian_tol: T::lit(1e-8),
            max_step: T::lit(0.2),
            min_move: T::lit(1e-3),
            max_ratio: T::lit(1e3),
            theta: T::one() / T::lit(3.0),
            p: T::lit(1.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero()) || !(self.h_floor > T::zero()) || !(self.e_floor > T::zero()) {
            return Err(Error::Config("adaptation delta and floors must be positive".into()));
        }
        if !(self.max_ratio >= T::one()) {
            return Err(Error::Config("metric eigenvalue ratio bound must be at least 1".into()));
        }
        if !(self.max_step > T::zero()) || !(self.p > T::one()) {
            return Err(Error::Config("mover step cap and p > 1 required".into()));
        }
        Ok(())
    }
}

/// Element patch for Hessian fitting: the element and its edge neighbors up
/// to `rings` layers, with periodic translations into the frame of `e`.
fn patch<T: Real>(mesh: &Mesh<T>, e: usize, rings: usize) -> Vec<(usize, Point<T>)> {
    let topo = mesh.topology();
    let mut out = vec![(e, [T::zero(); 2])];
    let mut frontier = 0;
    for _ in 0..rings {
        let end = out.len();
        for i in frontier..end {
            let (k, s) = out[i];
            for f in 0..mesh.dim() + 1 {
                if let Some((nb, _, sh)) = topo.neighbor(k, f) {
                    if !out.iter().any(|(x, _)| *x == nb) {
                        out.push((nb, [s[0] + sh[0], s[1] + sh[1]]));
                    }
                }
            }
        }
        frontier = end;
    }
    out
}

/// Averages of the scaled monomials over element `j`, translated by `shift`,
/// in coordinates centred at `c` and scaled by `l`. Exact for quadratics.
fn monomial_averages<T: Real>(mesh: &Mesh<T>, j: usize, shift: Point<T>, c: Point<T>, l: T, row: &mut [T]) {
    let pts: Vec<Point<T>> = mesh
        .element(j)
        .iter()
        .map(|&v| {
            let p = mesh.coords()[v];
            [(p[0] + shift[0] - c[0]) / l, (p[1] + shift[1] - c[1]) / l]
        })
        .collect();
    let half = T::lit(0.5);
    for r in row.iter_mut() {
        *r = T::zero();
    }
    if mesh.dim() == 1 {
        let (a, b) = (pts[0][0], pts[1][0]);
        let m = half * (a + b);
        let w = [T::one() / T::lit(6.0), T::lit(4.0) / T::lit(6.0), T::one() / T::lit(6.0)];
        for (x, wt) in [a, m, b].iter().zip(w) {
            row[0] += wt;
            row[1] += wt * *x;
            row[2] += wt * *x * *x;
        }
    } else {
        let third = T::one() / T::lit(3.0);
        for i in 0..3 {
            let p = pts[(i + 1) % 3];
            let q = pts[(i + 2) % 3];
            let (x, y) = (half * (p[0] + q[0]), half * (p[1] + q[1]));
            row[0] += third;
            row[1] += third * x;
            row[2] += third * y;
            row[3] += third * x * x;
            row[4] += third * x * y;
            row[5] += third * y * y;
        }
    }
}

/// Least-squares Hessian recovery from per-element averages: a quadratic
/// matching the averages over a two-ring patch (three rings if the patch is
/// small). Rank-deficient patches give a zero Hessian.
pub fn recover_hessian<T: Real>(averages: &[T], mesh: &Mesh<T>) -> Vec<Sym2<T>> {
    let dim = mesh.dim();
    let cols = if dim == 1 { 3 } else { 6 };
    let mut out = Vec::with_capacity(mesh.n_elements());
    let mut row = vec![T::zero(); cols];
    for e in 0..mesh.n_elements() {
        let geo = mesh.geometry(e);
        let c = geo.centroid;
        let l = if dim == 1 { geo.measure } else { geo.measure.sqrt() };
        let mut pt = patch(mesh, e, 2);
        if pt.len() < 2 * cols {
            pt = patch(mesh, e, 3);
        }
        let mut a = Vec::with_capacity(pt.len() * cols);
        let mut b = Vec::with_capacity(pt.len());
        for (j, s) in &pt {
            monomial_averages(mesh, *j, *s, c, l, &mut row);
            a.extend_from_slice(&row);
            b.push(averages[*j]);
        }
        let l2 = l * l;
        let two = T::lit(2.0);
        let h = match lstsq(&a, &b, pt.len(), cols) {
            Some(x) if dim == 1 => Sym2::scaled_identity(two * x[2] / l2),
            Some(x) => Sym2::new(two * x[3] / l2, x[4] / l2, two * x[5] / l2),
            None => Sym2::zero(),
        };
        out.push(h);
    }
    out
}

/// Per-element term of the regularization equation and the metric itself.
fn metric_parts<T: Real>(dim: usize, habs: &Sym2<T>, beta: T) -> (T, Sym2<T>) {
    if dim == 1 {
        let s = beta + habs.a;
        (s.powf(T::lit(0.4)), Sym2::scaled_identity(s.powf(T::lit(0.8))))
    } else {
        let r = habs.add(&Sym2::scaled_identity(beta));
        let d = r.det().max(T::zero());
        (d.powf(T::one() / T::lit(3.0)), r.scale(d.powf(-T::one() / T::lit(6.0))))
    }
}

/// Residual of the regularization equation divided by its right side.
pub fn beta_residual<T: Real>(hess: &[Sym2<T>], mesh: &Mesh<T>, beta: T) -> T {
    let dim = mesh.dim();
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for (e, h) in hess.iter().enumerate() {
        let a = h.abs();
        let k = mesh.measure(e);
        lhs += k * metric_parts(dim, &a, beta).0;
        rhs += k * metric_parts(dim, &a, T::zero()).0;
    }
    let rhs = T::lit(2.0) * rhs;
    (lhs - rhs) / rhs
}

/// Optimal interpolation metric `det(beta I + |H|)^(-1/6) (beta I + |H|)`
/// (1D: `(beta + |H|)^(4/5)`) with `beta` from the regularization equation.
pub fn metric_from_hessian<T: Real>(hess: &[Sym2<T>], mesh: &Mesh<T>) -> MetricField<T> {
    let dim = mesh.dim();
    let habs: Vec<Sym2<T>> = hess.iter().map(|h| h.abs()).collect();
    let mut total = T::zero();
    let mut rhs = T::zero();
    let mut trace = T::zero();
    for (e, a) in habs.iter().enumerate() {
        let k = mesh.measure(e);
        total += k;
        rhs += k * metric_parts(dim, a, T::zero()).0;
        trace += k * if dim == 1 { a.a } else { a.trace() };
    }
    let rhs = T::lit(2.0) * rhs;
    let floor = T::lit(1e-12);
    let beta = if rhs > T::zero() && rhs.is_finite() {
        let f = |b: T| -> T { habs.iter().enumerate().map(|(e, a)| mesh.measure(e) * metric_parts(dim, a, b).0).sum::<T>() - rhs };
        let mut lo = T::zero();
        let mut hi = (trace / total).max(floor);
        while f(hi) < T::zero() {
            hi = hi * T::lit(2.0);
        }
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if f(mid) < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        T::lit(0.5) * (lo + hi)
    } else {
        // Every element is degenerate (e.g. rank one): fall back to the
        // mean trace, floored so the metric stays positive.
        let d = T::from_usize_lossy(dim);
        (trace / (total * d)).max(floor)
    };
    let m = habs.iter().map(|a| metric_parts(dim, a, beta).1).collect();
    MetricField { m, beta }
}

/// Metric intersection by simultaneous diagonalization of `m1` and `delta m2`.
pub fn intersect<T: Real>(m1: &Sym2<T>, m2: &Sym2<T>, delta: T) -> Result<Sym2<T>> {
    if !m1.is_spd() || !m2.is_spd() || !(delta > T::zero()) {
        return Err(Error::InvalidMetric("intersection requires SPD inputs and delta > 0".into()));
    }
    let m2 = m2.scale(delta);
    let (l, v) = m1.eigen();
    let s = [l[0].sqrt(), l[1].sqrt()];
    let half = Sym2::from_eigen(s, v);
    let ihalf = Sym2::from_eigen([T::one() / s[0], T::one() / s[1]], v);
    let a = congruence(&ihalf, &m2);
    let b = a.map_eigen(|x| x.max(T::one()));
    Ok(congruence(&half, &b))
}

/// `S A S` for symmetric `S`.
fn congruence<T: Real>(s: &Sym2<T>, a: &Sym2<T>) -> Sym2<T> {
    let c0 = s.apply(a.apply([s.a, s.b]));
    let c1 = s.apply(a.apply([s.b, s.c]));
    Sym2::new(c0[0], T::lit(0.5) * (c0[1] + c1[0]), c1[1])
}

/// Replaces every metric by the mean over itself and its edge neighbors.
pub fn smooth_metric<T: Real>(metric: &mut MetricField<T>, mesh: &Mesh<T>, sweeps: usize) {
    let topo = mesh.topology();
    for _ in 0..sweeps {
        let old = metric.m.clone();
        for (e, out) in metric.m.iter_mut().enumerate() {
            let mut acc = old[e];
            let mut n = T::one();
            for f in 0..mesh.dim() + 1 {
                if let Some((nb, _, _)) = topo.neighbor(e, f) {
                    acc = acc.add(&old[nb]);
                    n += T::one();
                }
            }
            *out = acc.scale(T::one() / n);
        }
    }
}

/// Cell values of the equilibrium variable `E = (u^2 + v^2)/2 + g theta (h + b)`.
pub fn equilibrium_variable<T: Real>(state: &DgField<T>, bottom: &DgField<T>, phys: &Physics<T>) -> Vec<T> {
    (0..state.n_elements())
        .map(|e| {
            let h = state.cell_average(e, H);
            if h <= phys.dry_tol {
                return T::zero();
            }
            let u = state.cell_average(e, M) / h;
            let v = state.cell_average(e, W) / h;
            let th = state.cell_average(e, ETA) / h;
            T::lit(0.5) * (u * u + v * v) + phys.g * th * (h + bottom.cell_average(e, 0))
        })
        .collect()
}

fn clipped_metric<T: Real>(values: &[T], mesh: &Mesh<T>, tol: T) -> MetricField<T> {
    let mut hess = recover_hessian(values, mesh);
    for h in hess.iter_mut() {
        if h.a.abs().max(h.b.abs()).max(h.c.abs()) < tol {
            *h = Sym2::zero();
        }
    }
    metric_from_hessian(&hess, mesh)
}

/// Metric driven by `ln E` and `ln h`, intersected and smoothed.
pub fn adaptation_metric<T: Real>(
    state: &DgField<T>,
    bottom: &DgField<T>,
    mesh: &Mesh<T>,
    phys: &Physics<T>,
    cfg: &AdaptConfig<T>,
) -> Result<MetricField<T>> {
    let le: Vec<T> = equilibrium_variable(state, bottom, phys)
        .into_iter()
        .map(|x| x.max(cfg.e_floor).ln())
        .collect();
    let lh: Vec<T> = (0..state.n_elements())
        .map(|e| state.cell_average(e, H).max(cfg.h_floor).ln())
        .collect();
    let me = clipped_metric(&le, mesh, cfg.hessian_tol);
    let mh = clipped_metric(&lh, mesh, cfg.hessian_tol);
    let m = me
        .m
        .iter()
        .zip(&mh.m)
        .map(|(a, b)| intersect(a, b, cfg.delta))
        .collect::<Result<Vec<_>>>()?;
    let mut out = MetricField { m, beta: me.beta };
    smooth_metric(&mut out, mesh, cfg.smoothing_sweeps);
    cap_ratio(&mut out, cfg.max_ratio);
    Ok(out)
}

/// Clamps every eigenvalue to at most `ratio` times the smallest one.
pub fn cap_ratio<T: Real>(metric: &mut MetricField<T>, ratio: T) {
    let lo = metric
        .m
        .iter()
        .map(|m| {
            let (l, _) = m.eigen();
            l[0].min(l[1])
        })
        .fold(T::infinity(), T::min);
    let cap = lo * ratio;
    for m in &mut metric.m {
        if m.eigen().0[1] > cap {
            *m = m.map_eigen(|l| l.min(cap));
        }
    }
}

/// Huang functional contribution of one element with physical vertices `x`,
/// computational vertices `r` and metric `m`. Infinite for inverted elements.
pub fn element_energy<T: Real>(dim: usize, x: &[Point<T>], r: &[Point<T>], m: &Sym2<T>, theta: T, p: T) -> T {
    element_energy_grad(dim, x, r, m, theta, p, None)
}

/// [`element_energy`] plus, when `grad` is given, its gradient with respect
/// to the computational vertices `r`.
pub fn element_energy_grad<T: Real>(
    dim: usize,
    x: &[Point<T>],
    r: &[Point<T>],
    m: &Sym2<T>,
    theta: T,
    p: T,
    grad: Option<&mut [Point<T>; 3]>,
) -> T {
    let w2 = T::one() - T::lit(2.0) * theta;
    if dim == 1 {
        let dx = x[1][0] - x[0][0];
        let dr = r[1][0] - r[0][0];
        if !(dx > T::zero()) || !(dr > T::zero()) {
            return T::infinity();
        }
        let sm = m.a.sqrt();
        let t = dr / dx / sm;
        if let Some(g) = grad {
            let d = (theta + w2) * p * t.powf(p - T::one());
            g[0] = [-d, T::zero()];
            g[1] = [d, T::zero()];
        }
        return dx * sm * (theta + w2) * t.powf(p);
    }
    let e = [[x[1][0] - x[0][0], x[2][0] - x[0][0]], [x[1][1] - x[0][1], x[2][1] - x[0][1]]];
    let de = e[0][0] * e[1][1] - e[0][1] * e[1][0];
    let eh = [[r[1][0] - r[0][0], r[2][0] - r[0][0]], [r[1][1] - r[0][1], r[2][1] - r[0][1]]];
    let deh = eh[0][0] * eh[1][1] - eh[0][1] * eh[1][0];
    if !(de > T::zero()) || !(deh > T::zero()) {
        return T::infinity();
    }
    let Some(minv) = m.inverse() else { return T::infinity() };
    let ei = [[e[1][1] / de, -e[0][1] / de], [-e[1][0] / de, e[0][0] / de]];
    let j = [
        [eh[0][0] * ei[0][0] + eh[0][1] * ei[1][0], eh[0][0] * ei[0][1] + eh[0][1] * ei[1][1]],
        [eh[1][0] * ei[0][0] + eh[1][1] * ei[1][0], eh[1][0] * ei[0][1] + eh[1][1] * ei[1][1]],
    ];
    let tr = minv.quad_form(j[0]) + minv.quad_form(j[1]);
    let sm = m.det().sqrt();
    let dj = deh / de;
    let two_p = T::lit(2.0).powf(p);
    let half = T::lit(0.5);
    if let Some(g) = grad {
        // dG/dJ = 2 p theta sm tr^(p-1) J M^-1 + p w2 2^p (dj/sm)^(p-1) cof(J)
        let a = T::lit(2.0) * p * theta * sm * tr.powf(p - T::one());
        let b = p * w2 * two_p * (dj / sm).powf(p - T::one());
        let jm = [minv.apply(j[0]), minv.apply(j[1])];
        let cof = [[j[1][1], -j[1][0]], [-j[0][1], j[0][0]]];
        let mut dg = [[T::zero(); 2]; 2];
        for (row, dgr) in dg.iter_mut().enumerate() {
            for (col, v) in dgr.iter_mut().enumerate() {
                *v = a * jm[row][col] + b * cof[row][col];
            }
        }
        // dI/dEh = de/2 dG/dJ E^-T; column k belongs to vertex k + 1.
        for k in 0..2 {
            let gx = half * de * (dg[0][0] * ei[k][0] + dg[0][1] * ei[k][1]);
            let gy = half * de * (dg[1][0] * ei[k][0] + dg[1][1] * ei[k][1]);
            g[k + 1] = [gx, gy];
        }
        g[0] = [-(g[1][0] + g[2][0]), -(g[1][1] + g[2][1])];
    }
    half * de * (theta * sm * tr.powf(p) + w2 * two_p * sm * (dj / sm).powf(p))
}

/// Total Huang functional of a mesh configuration.
pub fn mesh_energy<T: Real>(mesh: &Mesh<T>, coords: &[Point<T>], reference: &[Point<T>], metric: &MetricField<T>, cfg: &AdaptConfig<T>) -> T {
    energy_and_gradient(mesh, coords, reference, metric, cfg, None)
}

/// Functional over `mesh` (physical `coords`, computational `xi`) and,
/// optionally, its gradient with respect to `xi`.
fn energy_and_gradient<T: Real>(
    mesh: &Mesh<T>,
    coords: &[Point<T>],
    xi: &[Point<T>],
    metric: &MetricField<T>,
    cfg: &AdaptConfig<T>,
    mut grad: Option<&mut Vec<Point<T>>>,
) -> T {
    let dim = mesh.dim();
    let mut x = [[T::zero(); 2]; 3];
    let mut r = [[T::zero(); 2]; 3];
    let mut g = [[T::zero(); 2]; 3];
    if let Some(gr) = grad.as_deref_mut() {
        gr.clear();
        gr.resize(xi.len(), [T::zero(); 2]);
    }
    let mut s = T::zero();
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        for (i, &v) in el.iter().enumerate() {
            x[i] = coords[v];
            r[i] = xi[v];
        }
        let want = grad.is_some().then_some(&mut g);
        let en = element_energy_grad(dim, &x[..dim + 1], &r[..dim + 1], &metric.m[e], cfg.theta, cfg.p, want);
        if !en.is_finite() {
            return T::infinity();
        }
        s += en;
        if let Some(gr) = grad.as_deref_mut() {
            for (i, &v) in el.iter().enumerate() {
                gr[v][0] += g[i][0];
                gr[v][1] += g[i][1];
            }
        }
    }
    s
}

/// Vertices that move together (periodic images) and how they may move.
struct Group<T> {
    members: Vec<usize>,
    dir: GroupDir<T>,
    h_loc: T,
}

enum GroupDir<T> {
    Free,
    Line(Point<T>),
}

impl<T: Real> Group<T> {
    fn n_dof(&self) -> usize {
        match self.dir {
            GroupDir::Free => 2,
            GroupDir::Line(_) => 1,
        }
    }

    fn displacement(&self, z: &[T]) -> Point<T> {
        match self.dir {
            GroupDir::Free => [z[0], z[1]],
            GroupDir::Line(t) => [z[0] * t[0], z[0] * t[1]],
        }
    }

    fn project(&self, g: Point<T>, out: &mut [T]) {
        match self.dir {
            GroupDir::Free => {
                out[0] = g[0];
                out[1] = g[1];
            }
            GroupDir::Line(t) => out[0] = g[0] * t[0] + g[1] * t[1],
        }
    }
}

fn vertex_groups<T: Real>(mesh: &Mesh<T>) -> Vec<Group<T>> {
    let topo = mesh.topology();
    let n = mesh.n_vertices();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for v in 0..n {
        if seen[v] {
            continue;
        }
        let mut members = vec![v];
        seen[v] = true;
        let mut i = 0;
        while i < members.len() {
            for (u, _) in topo.periodic_partners(members[i]) {
                if !seen[*u] {
                    seen[*u] = true;
                    members.push(*u);
                }
            }
            i += 1;
        }
        let mut dir = Some(GroupDir::Free);
        for &u in &members {
            match topo.constraint(u) {
                VertexConstraint::Fixed => dir = None,
                VertexConstraint::Slide(t) => {
                    if let Some(GroupDir::Free) = dir {
                        dir = Some(GroupDir::Line(t));
                    }
                }
                VertexConstraint::Free => {}
            }
        }
        if mesh.dim() == 1 {
            if let Some(GroupDir::Free) = dir {
                dir = Some(GroupDir::Line([T::one(), T::zero()]));
            }
        }
        let Some(dir) = dir else { continue };
        let h_loc = members
            .iter()
            .flat_map(|&u| topo.vertex_elements(u).iter().copied())
            .fold(T::infinity(), |a, e| a.min(mesh.geometry(e).height));
        out.push(Group { members, dir, h_loc });
    }
    out
}

/// Outcome of one call to [`move_mesh`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveReport<T> {
    pub iterations: usize,
    pub energy_before: T,
    pub energy_after: T,
    /// Fraction of the computed displacement that was applied.
    pub relaxation: T,
    /// True when the mesh was left unchanged.
    pub skipped: bool,
}

/// Limited-memory BFGS over the free computational coordinates with the
/// physical mesh frozen. Steps are capped at `max_step` local heights and
/// backtracked until the functional decreases (inverted trial meshes have
/// infinite energy). Returns the iterations taken and the final energy.
fn minimize_xi<T: Real>(
    mesh: &Mesh<T>,
    groups: &[Group<T>],
    xi: &mut Vec<Point<T>>,
    metric: &MetricField<T>,
    cfg: &AdaptConfig<T>,
) -> (usize, T) {
    const MEMORY: usize = 6;
    let coords = mesh.coords();
    let offsets: Vec<usize> = groups
        .iter()
        .scan(0, |acc, g| {
            let o = *acc;
            *acc += g.n_dof();
            Some(o)
        })
        .collect();
    let n = groups.iter().map(|g| g.n_dof()).sum::<usize>();
    let base = xi.clone();
    let place = |z: &[T], out: &mut Vec<Point<T>>| {
        out.clone_from(&base);
        for (g, &o) in groups.iter().zip(&offsets) {
            let d = g.displacement(&z[o..o + g.n_dof()]);
            for &v in &g.members {
                out[v] = [base[v][0] + d[0], base[v][1] + d[1]];
            }
        }
    };
    let mut vgrad = Vec::new();
    let reduce = |vg: &[Point<T>], out: &mut [T]| {
        for (g, &o) in groups.iter().zip(&offsets) {
            let mut s = [T::zero(); 2];
            for &v in &g.members {
                s[0] += vg[v][0];
                s[1] += vg[v][1];
            }
            g.project(s, &mut out[o..o + g.n_dof()]);
        }
    };
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| *x * *y).sum::<T>();

    let mut z = vec![T::zero(); n];
    let mut f = energy_and_gradient(mesh, coords, xi, metric, cfg, Some(&mut vgrad));
    if n == 0 || !f.is_finite() {
        return (0, f);
    }
    let mut g = vec![T::zero(); n];
    reduce(&vgrad, &mut g);
    let mut hist: Vec<(Vec<T>, Vec<T>, T)> = Vec::new();
    let mut trial_xi = xi.clone();
    let mut iters = 0;
    for _ in 0..cfg.mover_iters {
        // Two-loop recursion for the search direction.
        let mut d: Vec<T> = g.iter().map(|v| -*v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = *rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * *yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (*a - b) * *si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            hist.clear();
            d = g.iter().map(|v| -*v).collect();
            slope = -dot(&g, &g);
            if !(slope < T::zero()) {
                break;
            }
        }
        // Cap the largest group displacement.
        let mut scale = T::one();
        for (gr, &o) in groups.iter().zip(&offsets) {
            let dd = gr.displacement(&d[o..o + gr.n_dof()]);
            let len = dd[0].hypot(dd[1]);
            let cap = cfg.max_step * gr.h_loc;
            if len * scale > cap {
                scale = cap / len;
            }
        }
        if hist.is_empty() && scale == T::one() {
            // First step along the raw gradient: scale it to the cap.
            let big = groups.iter().zip(&offsets).fold(T::zero(), |a, (gr, &o)| {
                let dd = gr.displacement(&d[o..o + gr.n_dof()]);
                a.max(dd[0].hypot(dd[1]) / (cfg.max_step * gr.h_loc))
            });
            if big > T::zero() {
                scale = T::one() / big;
            }
        }
        let mut step = scale;
        let mut accepted = None;
        for _ in 0..30 {
            let zt: Vec<T> = z.iter().zip(&d).map(|(a, b)| *a + step * *b).collect();
            place(&zt, &mut trial_xi);
            let ft = energy_and_gradient(mesh, coords, &trial_xi, metric, cfg, Some(&mut vgrad));
            if ft.is_finite() && ft <= f + T::lit(1e-4) * step * slope {
                accepted = Some((zt, ft));
                break;
            }
            step = step * T::lit(0.5);
        }
        let Some((zt, ft)) = accepted else { break };
        let mut gt = vec![T::zero(); n];
        reduce(&vgrad, &mut gt);
        let s: Vec<T> = zt.iter().zip(&z).map(|(a, b)| *a - *b).collect();
        let y: Vec<T> = gt.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&s, &y);
        if sy > T::zero() {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, T::one() / sy));
        }
        let done = !(f - ft > T::epsilon() * f.abs());
        z = zt;
        f = ft;
        g = gt;
        iters += 1;
        if done {
            break;
        }
    }
    place(&z, xi);
    (iters, f)
}

/// Barycentric coordinates of `p` in element `e` of `mesh`, translated by `shift`.
fn locate_weights<T: Real>(mesh: &Mesh<T>, e: usize, shift: Point<T>, p: Point<T>) -> [T; 3] {
    let q = [p[0] - shift[0], p[1] - shift[1]];
    let xi = mesh.to_reference(e, q);
    if mesh.dim() == 1 {
        [T::one() - xi[0], xi[0], T::zero()]
    } else {
        [T::one() - xi[0] - xi[1], xi[0], xi[1]]
    }
}

/// Physical image of the computational point `p` under the piecewise-linear
/// map from `xi_mesh` to `mesh`, found by walking from element `start`.
fn map_point<T: Real>(mesh: &Mesh<T>, xi_mesh: &Mesh<T>, start: usize, p: Point<T>) -> Point<T> {
    let topo = mesh.topology();
    let nv = mesh.dim() + 1;
    let mut e = start;
    let mut shift = [T::zero(); 2];
    let tol = T::lit(-1e-12);
    let mut lam = locate_weights(xi_mesh, e, shift, p);
    for _ in 0..mesh.n_elements() {
        let (i, worst) = (0..nv).fold((0, T::infinity()), |acc, i| if lam[i] < acc.1 { (i, lam[i]) } else { acc });
        if worst >= tol {
            break;
        }
        let face = if nv == 2 { 1 - i } else { i };
        match topo.neighbor(e, face) {
            Some((nb, _, sh)) => {
                e = nb;
                shift = [shift[0] + sh[0], shift[1] + sh[1]];
                lam = locate_weights(xi_mesh, e, shift, p);
            }
            None => break,
        }
    }
    // Clamp roundoff excursions across the domain boundary.
    let mut sum = T::zero();
    for l in lam.iter_mut().take(nv) {
        *l = l.max(T::zero());
        sum += *l;
    }
    let el = mesh.element(e);
    let mut out = [shift[0], shift[1]];
    for i in 0..nv {
        let x = mesh.coords()[el[i]];
        out[0] += lam[i] / sum * x[0];
        out[1] += lam[i] / sum * x[1];
    }
    if mesh.dim() == 1 {
        out[1] = T::zero();
    }
    out
}

/// Moves the vertices of `mesh` toward equidistribution and alignment with
/// `metric`. The Huang functional is minimized over computational
/// coordinates (starting from `reference`) with the physical mesh frozen;
/// each vertex then moves to the physical image of its reference position.
/// The displacement is halved until every element stays positive; if that
/// fails the input mesh is returned.
pub fn move_mesh<T: Real>(
    mesh: &Mesh<T>,
    reference: &[Point<T>],
    metric: &MetricField<T>,
    cfg: &AdaptConfig<T>,
) -> (Mesh<T>, MoveReport<T>) {
    let topo = mesh.topology();
    let groups = vertex_groups(mesh);
    let mut xi = reference.to_vec();
    let e0 = mesh_energy(mesh, mesh.coords(), &xi, metric, cfg);
    let mut report = MoveReport { iterations: 0, energy_before: e0, energy_after: e0, relaxation: T::zero(), skipped: true };
    if !e0.is_finite() {
        warn!("mesh energy is not finite; skipping adaptation");
        return (mesh.clone(), report);
    }
    let (iterations, energy) = minimize_xi(mesh, &groups, &mut xi, metric, cfg);
    report.iterations = iterations;
    report.energy_after = energy;
    if report.iterations == 0 {
        report.skipped = false;
        report.relaxation = T::one();
        return (mesh.clone(), report);
    }
    let Ok(xi_mesh) = mesh.with_coords(xi) else {
        warn!("computational mesh inverted; skipping adaptation");
        return (mesh.clone(), report);
    };
    let old = mesh.coords();
    let mut target = old.to_vec();
    for g in &groups {
        let v = g.members[0];
        let start = topo.vertex_elements(v)[0];
        let x = map_point(mesh, &xi_mesh, start, reference[v]);
        let mut d = [x[0] - old[v][0], x[1] - old[v][1]];
        if let GroupDir::Line(t) = g.dir {
            let s = d[0] * t[0] + d[1] * t[1];
            d = [s * t[0], s * t[1]];
        }
        for &u in &g.members {
            target[u] = [old[u][0] + d[0], old[u][1] + d[1]];
        }
    }
    let mut alpha = T::one();
    for _ in 0..10 {
        let trial: Vec<Point<T>> = old
            .iter()
            .zip(&target)
            .map(|(a, b)| [a[0] + alpha * (b[0] - a[0]), a[1] + alpha * (b[1] - a[1])])
            .collect();
        if let Ok(m) = mesh.with_coords(trial) {
            report.relaxation = alpha;
            report.skipped = false;
            return (m, report);
        }
        alpha = alpha * T::lit(0.5);
    }
    warn!("moved mesh kept inverting after backtracking; keeping the previous mesh");
    (mesh.clone(), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{interval_mesh, rectangle_mesh, BoundaryKind, QuadSplit};

    #[test]
    fn quadratic_hessian_1d_and_2d() {
        let m = interval_mesh(0.0_f64, 1.0, 9, BoundaryKind::Outflow).unwrap();
        // Exact averages of x^2.
        let avg: Vec<f64> = (0..9)
            .map(|e| {
                let g = m.geometry(e);
                let (a, b) = (g.centroid[0] - g.measure / 2.0, g.centroid[0] + g.measure / 2.0);
                (b * b * b - a * a * a) / (3.0 * (b - a))
            })
            .collect();
        let h = recover_hessian(&avg, &m);
        assert!((h[4].a - 2.0).abs() < 1e-10);

        let m2 = rectangle_mesh([0.0_f64, 0.0], [1.0, 1.0], 6, 6, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow)
            .unwrap();
        let q = |x: f64, y: f64| x * x + 3.0 * x * y + y * y;
        let avg2: Vec<f64> = (0..m2.n_elements())
            .map(|e| {
                let el = m2.element(e);
                let p: Vec<_> = el.iter().map(|&v| m2.coords()[v]).collect();
                (0..3)
                    .map(|i| {
                        let a = p[(i + 1) % 3];
                        let b = p[(i + 2) % 3];
                        q(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])) / 3.0
                    })
                    .sum()
            })
            .collect();
        let h2 = recover_hessian(&avg2, &m2);
        let e = m2.n_elements() / 2;
        assert!((h2[e].a - 2.0).abs() < 1e-8 && (h2[e].b - 3.0).abs() < 1e-8 && (h2[e].c - 2.0).abs() < 1e-8);
    }

    #[test]
    fn constant_hessian_metric() {
        let m = rectangle_mesh([0.0_f64, 0.0], [1.0, 1.0], 2, 2, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow)
            .unwrap();
        let lam = 3.0;
        let hess = vec![Sym2::scaled_identity(lam); m.n_elements()];
        let mf = metric_from_hessian(&hess, &m);
        let beta = (2f64.powf(1.5) - 1.0) * lam;
        assert!((mf.beta - beta).abs() < 1e-10 * beta);
        let expect = (beta + lam).powf(2.0 / 3.0);
        assert!((mf.m[0].a - expect).abs() < 1e-10 && mf.m[0].b.abs() < 1e-12);
    }

    #[test]
    fn intersection_examples() {
        let i = Sym2::<f64>::identity();
        assert!(intersect(&i, &i, 1.0).unwrap().max_abs_diff(&i) < 1e-15);
        let r = intersect(&i, &Sym2::new(4.0, 0.0, 0.25), 1.0).unwrap();
        assert!(r.max_abs_diff(&Sym2::new(4.0, 0.0, 1.0)) < 1e-14);
        assert!(intersect(&i, &Sym2::new(1.0, 2.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn two_cell_equidistribution() {
        let mesh = interval_mesh(0.0_f64, 1.0, 2, BoundaryKind::Outflow).unwrap();
        let reference = mesh.coords().to_vec();
        let metric = MetricField { m: vec![Sym2::scaled_identity(1.0), Sym2::scaled_identity(16.0)], beta: 0.0 };
        let cfg = AdaptConfig::for_dim(1);
        let mut cur = mesh;
        for _ in 0..20 {
            cur = move_mesh(&cur, &reference, &metric, &cfg).0;
        }
        assert!((cur.coords()[1][0] - 0.8).abs() < 1e-6, "{}", cur.coords()[1][0]);
    }

    #[test]
    fn uniform_metric_is_stationary() {
        let m = rectangle_mesh([0.0_f64, 0.0], [1.0, 1.0], 4, 4, QuadSplit::Cross, BoundaryKind::Periodic, BoundaryKind::Periodic)
            .unwrap();
        let reference = m.coords().to_vec();
        let metric = MetricField::uniform(m.n_elements(), 2.0);
        let (out, _) = move_mesh(&m, &reference, &metric, &AdaptConfig::for_dim(2));
        for (a, b) in out.coords().iter().zip(m.coords()) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_gradient_matches_differences() {
        let x = [[0.1_f64, 0.0], [1.0, 0.2], [0.3, 0.9]];
        let r0 = [[0.0_f64, 0.1], [0.8, -0.1], [0.2, 0.7]];
        let m = Sym2::new(3.0, 0.7, 1.5);
        for dim in [1, 2] {
            let mut g = [[0.0; 2]; 3];
            element_energy_grad(dim, &x[..dim + 1], &r0[..dim + 1], &m, 1.0 / 3.0, 1.5, Some(&mut g));
            for v in 0..=dim {
                for c in 0..dim {
                    let eps = 1e-6;
                    let (mut rp, mut rm) = (r0, r0);
                    rp[v][c] += eps;
                    rm[v][c] -= eps;
                    let fd = (element_energy(dim, &x[..dim + 1], &rp[..dim + 1], &m, 1.0 / 3.0, 1.5)
                        - element_energy(dim, &x[..dim + 1], &rm[..dim + 1], &m, 1.0 / 3.0, 1.5))
                        / (2.0 * eps);
                    assert!((fd - g[v][c]).abs() < 1e-7 * (1.0 + fd.abs()), "dim {dim} v {v} c {c}: {fd} vs {}", g[v][c]);
                }
            }
        }
    }
}
