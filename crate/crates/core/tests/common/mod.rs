#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ripa::basis::ReferenceBasis;
use ripa::field::DgField;
use ripa::limiters::scale_to_nonnegative;
use ripa::mesh::{interval_mesh, rectangle_mesh, BoundaryKind, Mesh, MeshBlend, QuadSplit};

/// Random interior displacement of up to `frac` of the local spacing.
pub fn random_blend(dim: usize, n: usize, frac: f64, rng: &mut ChaCha8Rng) -> MeshBlend<f64> {
    let (old, h) = if dim == 1 {
        (interval_mesh(0.0, 1.0, n, BoundaryKind::Outflow).unwrap(), 1.0 / n as f64)
    } else {
        let m = rectangle_mesh([0.0, 0.0], [1.0, 1.0], n, n, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow).unwrap();
        (m, 0.5 / n as f64)
    };
    let on_boundary = |x: f64| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12;
    let coords = old
        .coords()
        .iter()
        .map(|p| {
            let mut q = *p;
            for d in 0..dim {
                if !on_boundary(p[0]) && (dim == 1 || !on_boundary(p[1])) {
                    q[d] += frac * h * rng.gen_range(-1.0..1.0);
                }
            }
            q
        })
        .collect();
    let new = old.with_coords(coords).unwrap();
    MeshBlend::new(old, new).unwrap()
}

/// Random modal coefficients with the cell averages in `avg`.
pub fn random_field(mesh: &Mesh<f64>, basis: &ReferenceBasis<f64>, avg: (f64, f64), spread: f64, rng: &mut ChaCha8Rng) -> DgField<f64> {
    let mut f = DgField::zeros(mesh.n_elements(), 1, basis.n_b());
    for e in 0..mesh.n_elements() {
        let c = f.coeffs_mut(e, 0);
        c[0] = rng.gen_range(avg.0..avg.1);
        for x in c.iter_mut().skip(1) {
            *x = spread * rng.gen_range(-1.0..1.0);
        }
    }
    f
}

/// Random field that is nonnegative at the positivity points.
pub fn random_nonnegative(mesh: &Mesh<f64>, basis: &ReferenceBasis<f64>, rng: &mut ChaCha8Rng) -> DgField<f64> {
    let mut f = random_field(mesh, basis, (0.0, 1.0), 1.0, rng);
    for e in 0..mesh.n_elements() {
        scale_to_nonnegative(f.coeffs_mut(e, 0), basis, e).unwrap();
    }
    f
}

pub fn max_diff(a: &DgField<f64>, b: &DgField<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &DgField<f64>) -> f64 {
    a.data().iter().map(|x| x.abs()).fold(0.0, f64::max)
}
