//! Conservative DG interpolation between two meshes with one connectivity.
//!
//! The field is transported in pseudo-time `sigma` over the linearly blended
//! mesh. Unknowns are the element integrals `Q_j = |K| c_j`; element volumes
//! are integrated by the same Runge-Kutta scheme from the boundary flux of
//! the mesh velocity, so constants are reproduced exactly.

use crate::basis::ReferenceBasis;
use crate::error::Result;
use crate::field::DgField;
use crate::limiters::scale_to_nonnegative;
use crate::mesh::{Mesh, MeshBlend, Neighbor};
use crate::ripa::{ETA, H, M, N_COMP, W};
use crate::scalar::Real;

/// Pseudo-time stepping plan for one blend.
#[derive(Clone, Debug)]
pub struct RemapPlan<T> {
    pub blend: MeshBlend<T>,
    pub dsigma: T,
    pub n_steps: usize,
    pub cp: T,
}

impl<T: Real> RemapPlan<T> {
    pub fn is_identity(&self) -> bool {
        self.n_steps == 0
    }
}

/// Diagnostics from one interpolation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemapStats<T> {
    pub substeps: usize,
    /// Smallest element measure over every stage mesh.
    pub min_measure: T,
}

/// Largest `|Xdot . n|` over edge end points on both blend end meshes.
pub fn max_normal_speed<T: Real>(blend: &MeshBlend<T>) -> T {
    let d = blend.displacement();
    let mut s = T::zero();
    for mesh in [blend.old(), blend.new_mesh()] {
        for (i, edge) in mesh.edges().iter().enumerate() {
            let n = mesh.edge_geometry(i).normal;
            for v in edge.vertices {
                s = s.max((d[v][0] * n[0] + d[v][1] * n[1]).abs());
            }
        }
    }
    s
}

/// `dsigma = C_p min(a_min_old, a_min_new) / max |Xdot . n|`, capped at 1.
pub fn plan_remap<T: Real>(blend: MeshBlend<T>, cp: T) -> RemapPlan<T> {
    let speed = max_normal_speed(&blend);
    if blend.is_identity() || !(speed > T::zero()) {
        return RemapPlan { blend, dsigma: T::one(), n_steps: 0, cp };
    }
    let a_min = blend.old().min_element_height().min(blend.new_mesh().min_element_height());
    let dsigma = (cp * a_min / speed).min(T::one());
    let n_steps = (T::one() / dsigma).ceil().to_usize().unwrap_or(1).max(1);
    RemapPlan { blend, dsigma, n_steps, cp }
}

/// Rates `dQ/dsigma` and `dV/dsigma` on the stage mesh.
fn remap_rhs<T: Real>(
    q: &DgField<T>,
    vol: &[T],
    mesh: &Mesh<T>,
    blend: &MeshBlend<T>,
    basis: &ReferenceBasis<T>,
) -> (DgField<T>, Vec<T>) {
    let n_b = basis.n_b();
    let nc = q.n_comp();
    let mut dq = q.zeros_like();
    let mut dv = vec![T::zero(); vol.len()];
    let dim = mesh.dim();
    let mut vals = vec![T::zero(); nc];
    let mut gphys = vec![[T::zero(); 2]; n_b];

    for e in 0..mesh.n_elements() {
        let geo = mesh.geometry(e);
        let inv_v = T::one() / vol[e];
        for qp in 0..basis.n_vol() {
            let w = basis.vol.weights[qp] * geo.measure;
            let xi = basis.vol.points[qp];
            let xd = blend.mesh_velocity(e, xi);
            let phi = basis.vol_phi(qp);
            let grads = basis.vol_grad(qp);
            for j in 0..n_b {
                let g = grads[j];
                gphys[j] = if dim == 1 {
                    [g[0] * geo.jac_inv[0][0], T::zero()]
                } else {
                    [
                        geo.jac_inv[0][0] * g[0] + geo.jac_inv[1][0] * g[1],
                        geo.jac_inv[0][1] * g[0] + geo.jac_inv[1][1] * g[1],
                    ]
                };
            }
            for c in 0..nc {
                vals[c] = ReferenceBasis::combine(phi, q.coeffs(e, c)) * inv_v;
            }
            let out = dq.element_mut(e);
            for c in 0..nc {
                for j in 0..n_b {
                    out[c * n_b + j] -= w * vals[c] * (xd[0] * gphys[j][0] + xd[1] * gphys[j][1]);
                }
            }
        }
    }

    let ew = basis.edge_weights();
    let es = basis.edge_params();
    let half = T::lit(0.5);
    let mut ql = vec![T::zero(); nc];
    let mut qr = vec![T::zero(); nc];
    for (i, edge) in mesh.edges().iter().enumerate() {
        let eg = mesh.edge_geometry(i);
        let n = eg.normal;
        let l = edge.left;
        let fl = edge.left_face;
        for k in 0..basis.n_edge() {
            let w = ew[k] * eg.length;
            let xd = blend.mesh_velocity(l, basis.face_point(fl, es[k]));
            let vn = xd[0] * n[0] + xd[1] * n[1];
            let pl = basis.face_phi(fl, false, k);
            for c in 0..nc {
                ql[c] = ReferenceBasis::combine(pl, q.coeffs(l, c)) / vol[l];
            }
            dv[l] += w * vn;
            match edge.right {
                Neighbor::Element { elem: r, face: fr, reversed, .. } => {
                    dv[r] -= w * vn;
                    let pr = basis.face_phi(fr, reversed, k);
                    for c in 0..nc {
                        qr[c] = ReferenceBasis::combine(pr, q.coeffs(r, c)) / vol[r];
                    }
                    for c in 0..nc {
                        let f = half * (vn * (ql[c] + qr[c]) + vn.abs() * (qr[c] - ql[c]));
                        let o = dq.coeffs_mut(l, c);
                        for j in 0..n_b {
                            o[j] += w * f * pl[j];
                        }
                        let o = dq.coeffs_mut(r, c);
                        for j in 0..n_b {
                            o[j] -= w * f * pr[j];
                        }
                    }
                }
                Neighbor::Boundary(_) => {
                    for c in 0..nc {
                        let f = vn * ql[c];
                        let o = dq.coeffs_mut(l, c);
                        for j in 0..n_b {
                            o[j] += w * f * pl[j];
                        }
                    }
                }
            }
        }
    }
    (dq, dv)
}

/// Applies the positivity scaling to flagged components of `Q = V c`.
fn pp_stage<T: Real>(q: &mut DgField<T>, vol: &[T], basis: &ReferenceBasis<T>, pp: &[bool]) -> Result<()> {
    if !pp.iter().any(|x| *x) {
        return Ok(());
    }
    let n_b = basis.n_b();
    let mut c = vec![T::zero(); n_b];
    for e in 0..q.n_elements() {
        for (comp, flag) in pp.iter().enumerate() {
            if !*flag {
                continue;
            }
            let v = vol[e];
            for (dst, src) in c.iter_mut().zip(q.coeffs(e, comp)) {
                *dst = *src / v;
            }
            let lambda = scale_to_nonnegative(&mut c, basis, e)?;
            if lambda < T::one() {
                for (dst, src) in q.coeffs_mut(e, comp).iter_mut().zip(&c) {
                    *dst = *src * v;
                }
            }
        }
    }
    Ok(())
}

/// DG interpolation of a (multi-component) field from the old to the new
/// mesh of `plan`. Components flagged in `pp` use the positivity limiter.
pub fn dg_interpolate_with_stats<T: Real>(
    field: &DgField<T>,
    plan: &RemapPlan<T>,
    basis: &ReferenceBasis<T>,
    pp: &[bool],
) -> Result<(DgField<T>, RemapStats<T>)> {
    let blend = &plan.blend;
    let mut stats = RemapStats {
        substeps: plan.n_steps,
        min_measure: blend.old().min_measure().min(blend.new_mesh().min_measure()),
    };
    if plan.is_identity() {
        return Ok((field.clone(), stats));
    }
    let old = blend.old();
    let mut vol: Vec<T> = (0..old.n_elements()).map(|e| old.measure(e)).collect();
    let mut q = field.clone();
    for e in 0..q.n_elements() {
        let v = vol[e];
        for x in q.element_mut(e) {
            *x *= v;
        }
    }

    let quarter = T::lit(0.25);
    let three_q = T::lit(0.75);
    let third = T::one() / T::lit(3.0);
    let two_third = T::lit(2.0) * third;
    let mut sigma = T::zero();
    for step in 0..plan.n_steps {
        let ds = if step + 1 == plan.n_steps { T::one() - sigma } else { plan.dsigma };
        let s1 = sigma + ds;
        let s2 = sigma + T::lit(0.5) * ds;
        let m0 = blend.mesh_at(sigma)?;
        let m1 = blend.mesh_at(s1)?;
        let m2 = blend.mesh_at(s2)?;
        stats.min_measure = stats.min_measure.min(m0.min_measure()).min(m1.min_measure()).min(m2.min_measure());

        let (k, kv) = remap_rhs(&q, &vol, &m0, blend, basis);
        let mut q1 = q.clone();
        q1.axpy(ds, &k);
        let v1: Vec<T> = vol.iter().zip(&kv).map(|(a, b)| *a + ds * *b).collect();
        pp_stage(&mut q1, &v1, basis, pp)?;

        let (k, kv) = remap_rhs(&q1, &v1, &m1, blend, basis);
        let mut q2 = q1.clone();
        q2.axpy(ds, &k);
        let q2 = DgField::lincomb(three_q, &q, quarter, &q2);
        let v2: Vec<T> = (0..vol.len()).map(|e| three_q * vol[e] + quarter * (v1[e] + ds * kv[e])).collect();
        let mut q2 = q2;
        pp_stage(&mut q2, &v2, basis, pp)?;

        let (k, kv) = remap_rhs(&q2, &v2, &m2, blend, basis);
        let mut q3 = q2.clone();
        q3.axpy(ds, &k);
        let mut q3 = DgField::lincomb(third, &q, two_third, &q3);
        let v3: Vec<T> = (0..vol.len()).map(|e| third * vol[e] + two_third * (v2[e] + ds * kv[e])).collect();
        pp_stage(&mut q3, &v3, basis, pp)?;
        q = q3;
        vol = v3;
        sigma = if step + 1 == plan.n_steps { T::one() } else { s1 };
    }
    for e in 0..q.n_elements() {
        let v = vol[e];
        for x in q.element_mut(e) {
            *x /= v;
        }
    }
    Ok((q, stats))
}

/// DG interpolation of every component, with or without positivity limiting.
pub fn dg_interpolate<T: Real>(field: &DgField<T>, plan: &RemapPlan<T>, basis: &ReferenceBasis<T>, use_pp: bool) -> Result<DgField<T>> {
    let pp = vec![use_pp; field.n_comp()];
    Ok(dg_interpolate_with_stats(field, plan, basis, &pp)?.0)
}

/// Remaps the state and bottom: `h`, `eta` with positivity limiting, the
/// momenta without, and the bottom as `DGInterp(h + b) - h~`.
pub fn remap_state<T: Real>(
    state: &DgField<T>,
    bottom: &DgField<T>,
    plan: &RemapPlan<T>,
    basis: &ReferenceBasis<T>,
) -> Result<(DgField<T>, DgField<T>, RemapStats<T>)> {
    let n_b = basis.n_b();
    let n_e = state.n_elements();
    let mut all = DgField::zeros(n_e, N_COMP + 1, n_b);
    for e in 0..n_e {
        for c in 0..N_COMP {
            all.coeffs_mut(e, c).copy_from_slice(state.coeffs(e, c));
        }
        let hb: Vec<T> = state.coeffs(e, H).iter().zip(bottom.coeffs(e, 0)).map(|(a, b)| *a + *b).collect();
        all.coeffs_mut(e, N_COMP).copy_from_slice(&hb);
    }
    let mut pp = [false; N_COMP + 1];
    pp[H] = true;
    pp[ETA] = true;
    let _ = (M, W);
    let (out, stats) = dg_interpolate_with_stats(&all, plan, basis, &pp)?;
    let mut new_state = DgField::zeros(n_e, N_COMP, n_b);
    let mut new_bottom = DgField::zeros(n_e, 1, n_b);
    for e in 0..n_e {
        for c in 0..N_COMP {
            new_state.coeffs_mut(e, c).copy_from_slice(out.coeffs(e, c));
        }
        let b: Vec<T> = out.coeffs(e, N_COMP).iter().zip(out.coeffs(e, H)).map(|(s, h)| *s - *h).collect();
        new_bottom.coeffs_mut(e, 0).copy_from_slice(&b);
    }
    Ok((new_state, new_bottom, stats))
}
