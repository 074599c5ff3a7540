use proptest::prelude::*;
use ripa::adapt::{adaptation_metric, beta_residual, cap_ratio, intersect, metric_from_hessian, MetricField};
use ripa::linalg::Sym2;
use ripa::mesh::{interval_mesh, rectangle_mesh, BoundaryKind, QuadSplit};
use ripa::ripa::ETA;
use ripa::{ProblemConfig, ProblemId, Simulation};

#[test]
fn constant_hessian_regularization_has_closed_form() {
    // Uniform |H| = lambda: the regularization equation reduces to
    // (beta + lambda)^(2/5) = 2 lambda^(2/5) in 1D and
    // (beta + lambda)^(2/3) = 2 lambda^(2/3) in 2D.
    let lambda = 3.7;
    let m1 = interval_mesh(0.0, 2.0, 16, BoundaryKind::Outflow).unwrap();
    let f1 = metric_from_hessian(&vec![Sym2::scaled_identity(lambda); 16], &m1);
    let want1 = (2f64.powf(2.5) - 1.0) * lambda;
    assert!((f1.beta - want1).abs() <= 1e-12 * want1, "{} vs {want1}", f1.beta);

    let m2 = rectangle_mesh([0.0, 0.0], [1.0, 1.0], 4, 4, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow).unwrap();
    let n = m2.n_elements();
    let f2 = metric_from_hessian(&vec![Sym2::new(-lambda, 0.0, lambda); n], &m2);
    let want2 = (2f64.powf(1.5) - 1.0) * lambda;
    assert!((f2.beta - want2).abs() <= 1e-12 * want2, "{} vs {want2}", f2.beta);
    // det(beta I + |H|)^(-1/6) (beta I + |H|) with beta + lambda = 2^(3/2) lambda.
    let s = 2f64.powf(1.5) * lambda;
    let diag = s.powf(2.0 / 3.0);
    for m in &f2.m {
        assert!(m.max_abs_diff(&Sym2::scaled_identity(diag)) <= 1e-12 * diag);
    }
}

#[test]
fn adaptation_metric_ignores_temperature_scale() {
    let mut cfg = ProblemConfig::new(ProblemId::Perturb2d);
    cfg.n = 400;
    let sim = Simulation::<f64>::new(cfg).unwrap();
    let base = adaptation_metric(&sim.state, &sim.bottom, &sim.mesh, &sim.phys, &sim.adapt).unwrap();
    for c in [0.25, 7.0] {
        let mut state = sim.state.clone();
        for e in 0..state.n_elements() {
            for x in state.coeffs_mut(e, ETA) {
                *x *= c;
            }
        }
        let scaled = adaptation_metric(&state, &sim.bottom, &sim.mesh, &sim.phys, &sim.adapt).unwrap();
        for (a, b) in base.m.iter().zip(&scaled.m) {
            let scale = a.a.abs().max(a.c.abs());
            assert!(a.max_abs_diff(b) <= 1e-12 * scale, "c = {c}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn eigenvalue_cap_only_touches_outliers() {
    let mut f = MetricField { m: vec![Sym2::identity(), Sym2::new(5.0, 1.0, 3.0), Sym2::new(4000.0, 0.0, 2.0)], beta: 0.0 };
    let before = f.clone();
    cap_ratio(&mut f, 1e3);
    assert_eq!(f.m[..2], before.m[..2]);
    assert!(f.m[2].max_abs_diff(&Sym2::new(1000.0, 0.0, 2.0)) <= 1e-12);
}

fn sym() -> impl Strategy<Value = Sym2<f64>> {
    (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0).prop_map(|(a, b, c)| Sym2::new(a, b, c))
}

fn spd() -> impl Strategy<Value = Sym2<f64>> {
    (0.05f64..20.0, 0.05f64..20.0, 0.0f64..std::f64::consts::PI)
        .prop_map(|(l0, l1, t)| Sym2::from_eigen([l0, l1], [t.cos(), t.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularization_equation_is_solved(h in prop::collection::vec(sym(), 36)) {
        let mesh = rectangle_mesh([0.0, 0.0], [1.0, 0.5], 3, 3, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow).unwrap();
        let f = metric_from_hessian(&h, &mesh);
        prop_assume!(h.iter().any(|x| x.abs().det() > 1e-6));
        prop_assert!(beta_residual(&h, &mesh, f.beta).abs() <= 1e-10);
        prop_assert!(f.m.iter().all(|m| m.is_spd()));
    }

    #[test]
    fn regularization_in_one_dimension(h in prop::collection::vec(-50.0f64..50.0, 12)) {
        let mesh = interval_mesh(-1.0, 1.0, 12, BoundaryKind::Outflow).unwrap();
        let hess: Vec<Sym2<f64>> = h.iter().map(|&a| Sym2::scaled_identity(a)).collect();
        let f = metric_from_hessian(&hess, &mesh);
        prop_assume!(h.iter().any(|x| x.abs() > 1e-6));
        prop_assert!(beta_residual(&hess, &mesh, f.beta).abs() <= 1e-10);
    }

    #[test]
    fn intersection_dominates_both(a in spd(), b in spd(), delta in 0.1f64..2.0, t in 0.0f64..6.3) {
        let m = intersect(&a, &b, delta).unwrap();
        let x = [t.cos(), t.sin()];
        let q = m.quad_form(x);
        let tol = 1e-10 * q;
        prop_assert!(q >= a.quad_form(x) - tol);
        prop_assert!(q >= delta * b.quad_form(x) - tol);
        // Equal to the larger one when one dominates.
        let big = Sym2::scaled_identity(100.0);
        prop_assert!(intersect(&a, &big, 1.0).unwrap().max_abs_diff(&big) <= 1e-10);
    }
}
