//! CFL time-step selection and the three-stage SSP Runge-Kutta update.

use crate::basis::ReferenceBasis;
use crate::error::Result;
use crate::field::DgField;
use crate::limiters::{apply_limiters, LimitStats, LimiterConfig};
use crate::mesh::Mesh;
use crate::ripa::{residual, state_at, Physics};
use crate::scalar::Real;

/// Largest `|u| + c` over the positivity points of every element.
pub fn max_signal_speed<T: Real>(state: &DgField<T>, mesh: &Mesh<T>, basis: &ReferenceBasis<T>, phys: &Physics<T>) -> T {
    let mut s = T::zero();
    for e in 0..mesh.n_elements() {
        for i in 0..basis.n_pp() {
            let u = state_at(state, e, basis.pp_phi(i));
            let (vx, vy) = phys.velocity(&u);
            s = s.max(vx.hypot(vy) + phys.celerity(&u));
        }
    }
    s
}

/// `dt = cfl * min height / max speed`, clipped to `t_stop - t`.
pub fn compute_dt<T: Real>(
    state: &DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    cfl: T,
    t: T,
    t_stop: T,
) -> T {
    let remaining = (t_stop - t).max(T::zero());
    let speed = max_signal_speed(state, mesh, basis, phys);
    if !(speed > T::zero()) {
        return remaining;
    }
    (cfl * mesh.min_element_height() / speed).min(remaining)
}

/// One SSP-RK3 step with the full limiter pipeline after every stage.
/// `bottom` receives the positivity corrections.
#[allow(clippy::too_many_arguments)]
pub fn ssp_rk3_step<T: Real>(
    state: &DgField<T>,
    bottom: &mut DgField<T>,
    mesh: &Mesh<T>,
    basis: &ReferenceBasis<T>,
    phys: &Physics<T>,
    lim: &LimiterConfig<T>,
    dt: T,
    stats: &mut Vec<LimitStats>,
) -> Result<DgField<T>> {
    let quarter = T::lit(0.25);
    let third = T::one() / T::lit(3.0);
    let two_thirds = T::lit(2.0) * third;

    let mut u1 = state.clone();
    u1.axpy(dt, &residual(state, bottom, mesh, basis, phys)?);
    stats.push(apply_limiters(&mut u1, bottom, mesh, basis, phys, lim)?);

    let mut u2 = u1.clone();
    u2.axpy(dt, &residual(&u1, bottom, mesh, basis, phys)?);
    let mut u2 = DgField::lincomb(T::lit(0.75), state, quarter, &u2);
    stats.push(apply_limiters(&mut u2, bottom, mesh, basis, phys, lim)?);

    let mut u3 = u2.clone();
    u3.axpy(dt, &residual(&u2, bottom, mesh, basis, phys)?);
    let mut u3 = DgField::lincomb(third, state, two_thirds, &u3);
    stats.push(apply_limiters(&mut u3, bottom, mesh, basis, phys, lim)?);
    Ok(u3)
}

/// Generic SSP-RK3 step for `y' = f(y)` on plain vectors.
pub fn ssp_rk3_vec<T: Real>(y: &[T], dt: T, f: impl Fn(&[T]) -> Vec<T>) -> Vec<T> {
    let k1 = f(y);
    let y1: Vec<T> = y.iter().zip(&k1).map(|(a, b)| *a + dt * *b).collect();
    let k2 = f(&y1);
    let y2: Vec<T> = (0..y.len())
        .map(|i| T::lit(0.75) * y[i] + T::lit(0.25) * (y1[i] + dt * k2[i]))
        .collect();
    let k3 = f(&y2);
    (0..y.len())
        .map(|i| y[i] / T::lit(3.0) + T::lit(2.0) / T::lit(3.0) * (y2[i] + dt * k3[i]))
        .collect()
}
