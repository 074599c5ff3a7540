//! Post-stage limiting: characteristic TVB limiting in well-balanced
//! variables, linear-scaling positivity limiting, bottom correction and
//! the dry-cell momentum cutoff.

use crate::basis::ReferenceBasis;
use crate::error::{Error, Result};
use crate::field::DgField;
use crate::mesh::{BoundaryKind, Mesh, Neighbor, Point};
use crate::ripa::{average_state, mat4_vec, Physics, State, ETA, H, M, N_COMP, W};
use crate::scalar::{minmod3, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimiterConfig<T> {
    /// TVB constant; zero gives the plain minmod limiter.
    pub m_tvb: T,
    pub dry_tol: T,
    /// Detect troubled cells on `h + b`, then limit `(h, m, w, eta)`.
    pub dry_mode: bool,
    /// Disable to run without any TVB limiting.
    pub tvb: bool,
    /// Scaling of neighbor differences on triangles.
    pub nu: T,
}

impl<T: Real> Default for LimiterConfig<T> {
    fn default() -> Self {
        Self {
            m_tvb: T::zero(),
            dry_tol: T::lit(1e-6),
            dry_mode: false,
            tvb: true,
            nu: T::lit(1.5),
        }
    }
}

/// TVB-modified minmod: keeps `a1` when `|a1| <= M dx^2`.
#[inline]
pub fn tvb_minmod<T: Real>(a1: T, a2: T, a3: T, m: T, dx: T) -> T {
    if a1.abs() <= m * dx * dx {
        a1
    } else {
        minmod3(a1, a2, a3)
    }
}

/// Per-element ratio `eta_bar / h_bar` (zero in dry cells).
pub fn btheta_ratio<T: Real>(state: &DgField<T>, e: usize, dry_tol: T) -> T {
    let h = state.cell_average(e, H);
    if h < dry_tol {
        T::zero()
    } else {
        state.cell_average(e, ETA) / h
    }
}

/// `(b theta)_h = (eta_bar / h_bar) b_h`, elementwise.
pub fn reconstruct_btheta<T: Real>(state: &DgField<T>, bottom: &DgField<T>, dry_tol: T) -> DgField<T> {
    let mut out = bottom.clone();
    for e in 0..state.n_elements() {
        let r = btheta_ratio(state, e, dry_tol);
        for c in out.coeffs_mut(e, 0) {
            *c *= r;
        }
    }
    out
}

/// Limiting variables of element `e` as 4 modal rows.
fn limiting_vars<T: Real>(state: &DgField<T>, bottom: &DgField<T>, e: usize, wet: bool, dry_tol: T) -> Vec<T> {
    let n_b = state.n_b();
    let mut v = state.element(e).to_vec();
    if wet {
        let r = btheta_ratio(state, e, dry_tol);
        let b = bottom.coeffs(e, 0);
        for j in 0..n_b {
            v[H * n_b + j] += b[j];
            v[ETA * n_b + j] += r * b[j];
        }
    }
    v
}

fn ghost_average<T: Real>(avg: &State<T>, n: Point<T>, kind: BoundaryKind) -> State<T> {
    match kind {
        BoundaryKind::Reflective => {
            let un = avg[M] * n[0] + avg[W] * n[1];
            let two = T::lit(2.0);
            [avg[0], avg[M] - two * un * n[0], avg[W] - two * un * n[1], avg[3]]
        }
        _ => *avg,
    }
}

/// Characteristic projectors at the cell-average state, or identity.
fn projectors<T: Real>(phys: &Physics<T>, ubar: &State<T>, n: Point<T>) -> Option<([T; 16], [T; 16])> {
    phys.eigenvectors(ubar, n)
}

/// Limits characteristic components; returns the limited vector (in the
/// original variables) and whether anything changed.
fn limit_char<T: Real>(
    proj: &Option<([T; 16], [T; 16])>,
    a1: &State<T>,
    a2: &State<T>,
    a3: &State<T>,
    m: T,
    dx: T,
) -> (State<T>, bool) {
    match proj {
        Some((r, l)) => {
            let w1 = mat4_vec(l, a1);
            let w2 = mat4_vec(l, a2);
            let w3 = mat4_vec(l, a3);
            let mut out = [T::zero(); 4];
            let mut changed = false;
            for c in 0..4 {
                out[c] = tvb_minmod(w1[c], w2[c], w3[c], m, dx);
                changed |= out[c] != w1[c];
            }
            if changed {
                (mat4_vec(r, &out), true)
            } else {
                (*a1, false)
            }
        }
        None => {
            let mut out = [T::zero(); 4];
            let mut changed = false;
            for c in 0..4 {
                out[c] = tvb_minmod(a1[c], a2[c], a3[c], m, dx);
                changed |= out[c] != a1[c];
            }
            (out, changed)
        }
    }
}

/// Characteristic-wise TVB limiter. Returns the number of modified cells.
pub fn tvb_limit<T: Real>(
    state: &mut DgField<T>,
    bottom: &DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    cfg: &LimiterConfig<T>,
) -> usize {
    if !cfg.tvb || basis.degree() == 0 {
        return 0;
    }
    if mesh.dim() == 1 {
        tvb_1d(state, bottom, mesh, basis, phys, cfg)
    } else {
        tvb_2d(state, bottom, mesh, basis, phys, cfg)
    }
}

fn surface_avg<T: Real>(state: &DgField<T>, bottom: &DgField<T>, e: usize) -> T {
    state.cell_average(e, H) + bottom.cell_average(e, 0)
}

fn tvb_1d<T: Real>(
    state: &mut DgField<T>,
    bottom: &DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    cfg: &LimiterConfig<T>,
) -> usize {
    let n_e = mesh.n_elements();
    let n_b = basis.n_b();
    let topo = mesh.topology();
    let wet = !cfg.dry_mode;
    let mut phi_r = vec![T::zero(); n_b];
    basis.eval([T::one(), T::zero()], &mut phi_r);
    let mut phi_l = vec![T::zero(); n_b];
    basis.eval([T::zero(), T::zero()], &mut phi_l);

    let vars: Vec<Vec<T>> = (0..n_e).map(|e| limiting_vars(state, bottom, e, wet, cfg.dry_tol)).collect();
    let vavg: Vec<State<T>> = vars.iter().map(|v| [v[0], v[n_b], v[2 * n_b], v[3 * n_b]]).collect();
    let surf: Vec<T> = (0..n_e).map(|e| surface_avg(state, bottom, e)).collect();
    let neighbor_avg = |e: usize, f: usize| -> (State<T>, T) {
        match topo.neighbor(e, f) {
            Some((nb, _, _)) => (vavg[nb], surf[nb]),
            None => {
                let edge = &mesh.edges()[topo.face_edge(e, f)];
                let kind = match edge.right {
                    Neighbor::Boundary(k) => k,
                    _ => BoundaryKind::Outflow,
                };
                (ghost_average(&vavg[e], mesh.outward_normal(e, f), kind), surf[e])
            }
        }
    };

    let mut count = 0;
    for e in 0..n_e {
        let dx = mesh.measure(e);
        let v = &vars[e];
        let val = |phi: &[T], c: usize| ReferenceBasis::combine(phi, &v[c * n_b..(c + 1) * n_b]);
        let avg = vavg[e];
        let (la, ls) = neighbor_avg(e, 0);
        let (ra, rs) = neighbor_avg(e, 1);
        if cfg.dry_mode {
            let hb: Vec<T> = (0..n_b).map(|j| state.coeffs(e, H)[j] + bottom.coeffs(e, 0)[j]).collect();
            let s = surf[e];
            let t1 = ReferenceBasis::combine(&phi_r, &hb) - s;
            let t2 = s - ReferenceBasis::combine(&phi_l, &hb);
            let troubled = tvb_minmod(t1, rs - s, s - ls, cfg.m_tvb, dx) != t1
                || tvb_minmod(t2, rs - s, s - ls, cfg.m_tvb, dx) != t2;
            if !troubled {
                continue;
            }
        }
        let mut ut = [T::zero(); 4];
        let mut utt = [T::zero(); 4];
        let mut dp = [T::zero(); 4];
        let mut dm = [T::zero(); 4];
        for c in 0..4 {
            ut[c] = val(&phi_r, c) - avg[c];
            utt[c] = avg[c] - val(&phi_l, c);
            dp[c] = ra[c] - avg[c];
            dm[c] = avg[c] - la[c];
        }
        let proj = projectors(phys, &average_state(state, e), [T::one(), T::zero()]);
        let (um, c1) = limit_char(&proj, &ut, &dp, &dm, cfg.m_tvb, dx);
        let (umm, c2) = limit_char(&proj, &utt, &dp, &dm, cfg.m_tvb, dx);
        if !(c1 || c2) {
            continue;
        }
        count += 1;
        let two = T::lit(2.0);
        let mut newv = v.clone();
        for c in 0..4 {
            let row = &mut newv[c * n_b..(c + 1) * n_b];
            for x in row.iter_mut().skip(1) {
                *x = T::zero();
            }
            row[1] = (um[c] + umm[c]) / (two * phi_r[1]);
            if n_b > 2 {
                row[2] = (um[c] - umm[c]) / (two * phi_r[2]);
            }
        }
        write_back(state, bottom, e, &newv, wet, cfg.dry_tol);
    }
    count
}

/// Converts limited variables back to the conserved state of element `e`.
fn write_back<T: Real>(state: &mut DgField<T>, bottom: &DgField<T>, e: usize, v: &[T], wet: bool, dry_tol: T) {
    let n_b = state.n_b();
    let r = btheta_ratio(state, e, dry_tol);
    let b = bottom.coeffs(e, 0).to_vec();
    let out = state.element_mut(e);
    let avg: Vec<T> = (0..N_COMP).map(|c| out[c * n_b]).collect();
    out.copy_from_slice(v);
    if wet {
        for j in 0..n_b {
            out[H * n_b + j] -= b[j];
            out[ETA * n_b + j] -= r * b[j];
        }
    }
    // Cell averages are untouched by construction; restore them bitwise.
    for c in 0..N_COMP {
        out[c * n_b] = avg[c];
    }
}

fn tvb_2d<T: Real>(
    state: &mut DgField<T>,
    bottom: &DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    cfg: &LimiterConfig<T>,
) -> usize {
    let n_e = mesh.n_elements();
    let n_b = basis.n_b();
    let topo = mesh.topology();
    let wet = !cfg.dry_mode;
    let half = T::lit(0.5);
    let mid_phi: Vec<Vec<T>> = (0..3)
        .map(|f| {
            let mut v = vec![T::zero(); n_b];
            basis.eval(basis.face_point(f, half), &mut v);
            v
        })
        .collect();

    let vars: Vec<Vec<T>> = (0..n_e).map(|e| limiting_vars(state, bottom, e, wet, cfg.dry_tol)).collect();
    let vavg: Vec<State<T>> = vars.iter().map(|v| [v[0], v[n_b], v[2 * n_b], v[3 * n_b]]).collect();
    let surf: Vec<T> = (0..n_e).map(|e| surface_avg(state, bottom, e)).collect();

    let mut count = 0;
    for e in 0..n_e {
        let geo = mesh.geometry(e);
        let b0 = geo.centroid;
        // Neighbor centroids and averages (mirrored ghosts at boundaries).
        let mut nc = [[T::zero(); 2]; 3];
        let mut na = [[T::zero(); 4]; 3];
        let mut ns = [T::zero(); 3];
        let mut mids = [[T::zero(); 2]; 3];
        for f in 0..3 {
            let [a, b] = mesh.face_points(e, f);
            mids[f] = [half * (a[0] + b[0]), half * (a[1] + b[1])];
            match topo.neighbor(e, f) {
                Some((nb, _, shift)) => {
                    let c = mesh.geometry(nb).centroid;
                    nc[f] = [c[0] + shift[0], c[1] + shift[1]];
                    na[f] = vavg[nb];
                    ns[f] = surf[nb];
                }
                None => {
                    let n = mesh.outward_normal(e, f);
                    let d = (mids[f][0] - b0[0]) * n[0] + (mids[f][1] - b0[1]) * n[1];
                    let two = T::lit(2.0);
                    nc[f] = [b0[0] + two * d * n[0], b0[1] + two * d * n[1]];
                    let edge = &mesh.edges()[topo.face_edge(e, f)];
                    let kind = match edge.right {
                        Neighbor::Boundary(k) => k,
                        _ => BoundaryKind::Outflow,
                    };
                    na[f] = ghost_average(&vavg[e], n, kind);
                    ns[f] = surf[e];
                }
            }
        }
        let mut decomp = [(0usize, 0usize, T::zero(), T::zero()); 3];
        for f in 0..3 {
            let d = [mids[f][0] - b0[0], mids[f][1] - b0[1]];
            decomp[f] = decompose(d, b0, &nc, f);
        }
        let dist: Vec<T> = (0..3).map(|f| (mids[f][0] - b0[0]).hypot(mids[f][1] - b0[1])).collect();

        if cfg.dry_mode {
            let hb: Vec<T> = (0..n_b).map(|j| state.coeffs(e, H)[j] + bottom.coeffs(e, 0)[j]).collect();
            let s = surf[e];
            let mut troubled = false;
            for f in 0..3 {
                let (j1, j2, a1, a2) = decomp[f];
                let ut = ReferenceBasis::combine(&mid_phi[f], &hb) - s;
                let du = a1 * (ns[j1] - s) + a2 * (ns[j2] - s);
                if tvb_minmod(ut, cfg.nu * du, cfg.nu * du, cfg.m_tvb, dist[f]) != ut {
                    troubled = true;
                }
            }
            if !troubled {
                continue;
            }
        }

        let v = &vars[e];
        let avg = vavg[e];
        let ubar = average_state(state, e);
        let mut deltas = [[T::zero(); 4]; 3];
        let mut changed = false;
        for f in 0..3 {
            let (j1, j2, a1, a2) = decomp[f];
            let mut ut = [T::zero(); 4];
            let mut du = [T::zero(); 4];
            for c in 0..4 {
                ut[c] = ReferenceBasis::combine(&mid_phi[f], &v[c * n_b..(c + 1) * n_b]) - avg[c];
                du[c] = cfg.nu * (a1 * (na[j1][c] - avg[c]) + a2 * (na[j2][c] - avg[c]));
            }
            let n = [(mids[f][0] - b0[0]) / dist[f], (mids[f][1] - b0[1]) / dist[f]];
            let proj = projectors(phys, &ubar, n);
            let (lim, ch) = limit_char(&proj, &ut, &du, &du, cfg.m_tvb, dist[f]);
            deltas[f] = lim;
            changed |= ch;
        }
        if !changed {
            continue;
        }
        count += 1;
        let mut newv = v.clone();
        let mut modes = vec![T::zero(); n_b];
        for c in 0..4 {
            let mut d = [deltas[0][c], deltas[1][c], deltas[2][c]];
            let sum = d[0] + d[1] + d[2];
            if sum != T::zero() {
                let pos: T = d.iter().map(|x| x.max(T::zero())).sum();
                let neg: T = d.iter().map(|x| (-*x).max(T::zero())).sum();
                let tp = if pos > T::zero() { T::one().min(neg / pos) } else { T::zero() };
                let tn = if neg > T::zero() { T::one().min(pos / neg) } else { T::zero() };
                for x in d.iter_mut() {
                    *x = tp * x.max(T::zero()) - tn * (-*x).max(T::zero());
                }
            }
            let two = T::lit(2.0);
            basis.p1_to_modes(&[-two * d[0], -two * d[1], -two * d[2]], &mut modes);
            let row = &mut newv[c * n_b..(c + 1) * n_b];
            for j in 1..n_b {
                row[j] = modes[j];
            }
        }
        write_back(state, bottom, e, &newv, wet, cfg.dry_tol);
    }
    count
}

/// Writes `d = a1 (c_j1 - b0) + a2 (c_j2 - b0)` with nonnegative weights,
/// preferring the pair that includes neighbor `f`.
fn decompose<T: Real>(d: Point<T>, b0: Point<T>, nc: &[Point<T>; 3], f: usize) -> (usize, usize, T, T) {
    let tol = T::lit(-1e-12);
    let r = |j: usize| [nc[j][0] - b0[0], nc[j][1] - b0[1]];
    for other in [(f + 1) % 3, (f + 2) % 3] {
        let p = r(f);
        let q = r(other);
        let det = p[0] * q[1] - p[1] * q[0];
        if det.abs() <= T::epsilon() * (p[0].hypot(p[1]) * q[0].hypot(q[1])) {
            continue;
        }
        let a1 = (d[0] * q[1] - d[1] * q[0]) / det;
        let a2 = (p[0] * d[1] - p[1] * d[0]) / det;
        if a1 >= tol && a2 >= tol {
            return (f, other, a1.max(T::zero()), a2.max(T::zero()));
        }
    }
    let p = r(f);
    let pp = p[0] * p[0] + p[1] * p[1];
    let a1 = ((d[0] * p[0] + d[1] * p[1]) / pp).max(T::zero());
    (f, f, a1, T::zero())
}

/// Linear scaling toward the cell average so that the values at the
/// positivity points are nonnegative. Returns the scaling factor.
pub fn scale_to_nonnegative<T: Real>(coeffs: &mut [T], basis: &ReferenceBasis<T>, elem: usize) -> Result<T> {
    let avg = coeffs[0];
    if avg < T::zero() {
        if avg < -T::lit(1e-13) {
            return Err(Error::PositivityPrecondition { elem, average: avg.to_f64_lossy() });
        }
        for c in coeffs.iter_mut() {
            *c = T::zero();
        }
        return Ok(T::zero());
    }
    let mut min = T::infinity();
    for i in 0..basis.n_pp() {
        min = min.min(ReferenceBasis::combine(basis.pp_phi(i), coeffs));
    }
    if min >= T::zero() {
        return Ok(T::one());
    }
    let lambda = (avg / (avg - min)).min(T::one()).max(T::zero());
    for c in coeffs.iter_mut().skip(1) {
        *c *= lambda;
    }
    Ok(lambda)
}

/// Scaling factors applied by [`pp_limit`].
#[derive(Clone, Debug, Default)]
pub struct PpReport<T> {
    pub lambda_h: Vec<T>,
    pub lambda_eta: Vec<T>,
}

/// Positivity limiter on `h` and `eta` of a state field.
pub fn pp_limit<T: Real>(state: &mut DgField<T>, basis: &ReferenceBasis<T>) -> Result<PpReport<T>> {
    let n = state.n_elements();
    let mut rep = PpReport {
        lambda_h: Vec::with_capacity(n),
        lambda_eta: Vec::with_capacity(n),
    };
    for e in 0..n {
        rep.lambda_h.push(scale_to_nonnegative(state.coeffs_mut(e, H), basis, e)?);
        rep.lambda_eta.push(scale_to_nonnegative(state.coeffs_mut(e, ETA), basis, e)?);
    }
    Ok(rep)
}

/// `b <- b - (h_after - h_before)`, which keeps `h + b` unchanged.
pub fn bottom_correction<T: Real>(bottom: &mut DgField<T>, h_before: &DgField<T>, h_after: &DgField<T>) {
    for e in 0..bottom.n_elements() {
        let before = h_before.coeffs(e, 0);
        let after = h_after.coeffs(e, 0);
        if before == after {
            continue;
        }
        let b = bottom.coeffs_mut(e, 0);
        for j in 0..b.len() {
            b[j] -= after[j] - before[j];
        }
    }
}

/// Zeroes the momenta of cells whose mean depth is below `dry_tol`.
pub fn dry_fix<T: Real>(state: &mut DgField<T>, dry_tol: T) -> usize {
    let mut n = 0;
    for e in 0..state.n_elements() {
        if state.cell_average(e, H) < dry_tol {
            for c in [M, W] {
                for x in state.coeffs_mut(e, c) {
                    *x = T::zero();
                }
            }
            n += 1;
        }
    }
    n
}

/// Summary of one application of the limiter pipeline.
#[derive(Clone, Copy, Debug, Default)]
pub struct LimitStats {
    pub tvb_cells: usize,
    pub pp_cells: usize,
    pub dry_cells: usize,
    /// Minimum of `h` and `eta` over every positivity point after limiting.
    pub min_h: f64,
    pub min_eta: f64,
}

/// TVB, then PP with bottom correction, then the dry fix.
pub fn apply_limiters<T: Real>(
    state: &mut DgField<T>,
    bottom: &mut DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    cfg: &LimiterConfig<T>,
) -> Result<LimitStats> {
    let tvb_cells = tvb_limit(state, bottom, mesh, basis, phys, cfg);
    let h_before = state.component(H);
    let rep = pp_limit(state, basis)?;
    let pp_cells = rep
        .lambda_h
        .iter()
        .chain(&rep.lambda_eta)
        .filter(|l| **l < T::one())
        .count();
    if pp_cells > 0 {
        let h_after = state.component(H);
        bottom_correction(bottom, &h_before, &h_after);
    }
    let dry_cells = dry_fix(state, cfg.dry_tol);
    Ok(LimitStats {
        tvb_cells,
        pp_cells,
        dry_cells,
        min_h: state.min_at_pp(basis, H).to_f64_lossy(),
        min_eta: state.min_at_pp(basis, ETA).to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{l2_project, l2_project_scalar};
    use crate::mesh::interval_mesh;

    #[test]
    fn tvb_minmod_branches() {
        assert_eq!(tvb_minmod(0.1, -1.0, 1.0, 100.0, 0.1), 0.1);
        assert_eq!(tvb_minmod(0.5, 0.2, 0.3, 0.0, 0.1), 0.2);
        assert_eq!(tvb_minmod(0.5, -0.2, 0.3, 0.0, 0.1), 0.0);
    }

    #[test]
    fn pp_scaling_example() {
        let b = ReferenceBasis::<f64>::new(1, 1).unwrap();
        // avg 1, linear with endpoint values -1 and 3.
        let s3 = 3.0_f64.sqrt();
        let mut c = vec![1.0, 2.0 / s3];
        let lam = scale_to_nonnegative(&mut c, &b, 0).unwrap();
        assert!((lam - 0.5).abs() < 1e-15);
        let v0 = c[0] - s3 * c[1];
        assert!(v0.abs() < 1e-15);
        let mut neg = vec![-1.0, 0.0];
        assert!(matches!(scale_to_nonnegative(&mut neg, &b, 3), Err(Error::PositivityPrecondition { elem: 3, .. })));
    }

    #[test]
    fn btheta_is_scaled_bottom() {
        let m = interval_mesh(0.0_f64, 1.0, 4, BoundaryKind::Outflow).unwrap();
        let b = ReferenceBasis::new(1, 2).unwrap();
        let bottom = l2_project_scalar(&m, &b, |x| (3.0 * x[0]).sin()).unwrap();
        let st = l2_project(&m, &b, 4, |x, o| {
            o[0] = 2.0 + x[0];
            o[1] = 0.0;
            o[2] = 0.0;
            o[3] = 4.0 * (2.0 + x[0]);
        })
        .unwrap();
        let bt = reconstruct_btheta(&st, &bottom, 1e-6);
        for e in 0..4 {
            for j in 0..3 {
                assert!((bt.coeffs(e, 0)[j] - 4.0 * bottom.coeffs(e, 0)[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dry_fix_examples() {
        let mut f = DgField::<f64>::zeros(2, 4, 3);
        f.coeffs_mut(0, H)[0] = 1e-7;
        f.coeffs_mut(0, M)[0] = 1e-8;
        f.coeffs_mut(1, H)[0] = 0.5;
        f.coeffs_mut(1, M)[0] = 0.2;
        assert_eq!(dry_fix(&mut f, 1e-6), 1);
        assert_eq!(f.coeffs(0, M), &[0.0, 0.0, 0.0]);
        assert_eq!(f.coeffs(1, M)[0], 0.2);
    }
}
