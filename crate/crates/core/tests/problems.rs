use std::f64::consts::PI;

use ripa::driver::{initial_mesh, project_initial};
use ripa::{run, ProblemConfig, ProblemId, Simulation};

fn close(a: [f64; 4], b: [f64; 4]) -> bool {
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-14 * (1.0 + y.abs()))
}

#[test]
fn initial_data_matches_formulas() {
    let acc = ProblemId::Accuracy.spec();
    for x in [0.0, 0.13, 0.5, 0.77] {
        let h = 5.0 + (2.0 * PI * x).sin().exp();
        let want = [h, (2.0 * PI * x).cos().sin(), 0.0, h * ((2.0 * PI * x).sin() + 2.0)];
        assert!(close(acc.initial_conserved([x, 0.0]), want));
        assert!((acc.bottom([x, 0.0]) - (PI * x).sin().powi(2)).abs() <= 1e-15);
    }

    let step = ProblemId::LakeStep.spec();
    assert!(close(step.initial([0.5, 0.0]), [1.0, 0.0, 0.0, 10.0]));
    assert!(close(step.initial([0.1, 0.0]), [2.0, 0.0, 0.0, 10.0]));

    let bumps = ProblemId::LakeBumps.spec();
    let b = 1.25 * ((10.0 * PI * (0.42 - 0.4)).cos() + 1.0);
    assert!((bumps.bottom([0.42, 0.0]) - b).abs() <= 1e-15);
    assert!(close(bumps.initial([0.42, 0.0]), [6.0 - b, 0.0, 0.0, 4.0]));

    let temp = ProblemId::PerturbTemperature.spec();
    let [h, _, _, th] = temp.initial([-1.45, 0.0]);
    assert!((h - 6.01).abs() <= 1e-14);
    assert!((h * th - 24.0).abs() <= 1e-13, "pressure balance");

    let dry = ProblemId::DryDamBreak.spec();
    let b = 0.5 * ((10.0 * PI * (0.31 - 0.3)).cos() + 1.0);
    assert!(close(dry.initial([0.31, 0.0]), [(1.0 - b).max(0.0), 0.0, 0.0, 5.0]));
    assert!(close(dry.initial([-0.6, 0.0]), [5.0, 0.0, 0.0, 1.0]));

    let lake = ProblemId::Lake2d.spec();
    let p = [-0.45, -0.52];
    let b = 0.5 * (-100.0 * (0.05f64.powi(2) + 0.02f64.powi(2))).exp();
    assert!((lake.bottom(p) - b).abs() <= 1e-15);
    assert!(close(lake.initial(p), [3.0 - b, 0.0, 0.0, 4.0 / 3.0]));

    let p2 = ProblemId::Perturb2d.spec();
    let b = 3.0 * (-5.0 * (0.1f64 - 0.9).powi(2) - 50.0 * (0.6f64 - 0.5).powi(2)).exp();
    assert!((p2.bottom([0.1, 0.6]) - b).abs() <= 1e-14);
    assert!(close(p2.initial([0.1, 0.6]), [6.1 - b, 0.0, 0.0, 24.0 / 6.1]));
}

#[test]
fn zero_final_time_returns_projected_data() {
    for id in [ProblemId::DamBreak, ProblemId::Lake2d] {
        let mut cfg = ProblemConfig::new(id);
        cfg.n = if id == ProblemId::Lake2d { 100 } else { 40 };
        cfg.t_final = 0.0;
        let problem = cfg.problem_spec();
        let mut sim = Simulation::<f64>::new(cfg.clone()).unwrap();
        sim.run().unwrap();
        assert_eq!(sim.steps, 0);
        let mesh = initial_mesh::<f64>(&problem, cfg.n).unwrap();
        let (state, bottom) = project_initial(&problem, &mesh, &sim.basis).unwrap();
        assert_eq!(sim.mesh.coords(), mesh.coords());
        assert_eq!(sim.bottom.data(), bottom.data());
        let diff = sim.state.data().iter().zip(state.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-14, "{id:?}: {diff}");
    }
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = ProblemConfig::new(ProblemId::LakeBumps);
    cfg.n = 30;
    cfg.t_final = 0.1;
    let a = run::<f64>(cfg.clone()).unwrap();
    let b = run::<f64>(cfg).unwrap();
    assert_eq!(a.errors.unwrap().to_csv(), b.errors.unwrap().to_csv());
    assert_eq!(a.sim.state.data(), b.sim.state.data());
    assert_eq!(a.sim.mesh.coords(), b.sim.mesh.coords());
}

#[test]
fn single_precision_runs() {
    let mut cfg = ProblemConfig::new(ProblemId::LakeBumps);
    cfg.n = 20;
    cfg.t_final = 0.02;
    let sim = ripa::run::<f32>(cfg).unwrap();
    let e = sim.errors.unwrap();
    assert!(e.max_linf() <= 1e-3, "{}", e.to_csv());
}
