//! The time loop: adapt the mesh, remap, then advance one SSP-RK3 step.

use log::{debug, info};

use crate::adapt::{adaptation_metric, move_mesh, AdaptConfig};
use crate::basis::ReferenceBasis;
use crate::config::{MeshMode, ProblemConfig};
use crate::error::{Error, Result};
use crate::field::{l2_project, DgField};
use crate::limiters::{bottom_correction, dry_fix, pp_limit, LimiterConfig};
use crate::mesh::{interval_mesh, rectangle_mesh, Mesh, MeshBlend, Point, QuadSplit};
use crate::norms::{compute_errors_local, compute_errors_vs_solution, ErrorReport, Var};
use crate::output::{trajectory_line, OutputDir};
use crate::problems::Problem;
use crate::remap::{plan_remap, remap_state};
use crate::ripa::{Physics, H, M, W};
use crate::scalar::Real;
use crate::time::{compute_dt, ssp_rk3_step};

/// Running invariants and counters of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Smallest element measure over every mesh and blend stage.
    pub min_measure: f64,
    pub initial_total_measure: f64,
    /// Largest relative change of the total measure.
    pub max_measure_drift: f64,
    /// Minimum of `h` and `eta` at positivity points after every stage.
    pub min_stage_h: f64,
    pub min_stage_eta: f64,
    /// Largest momentum coefficient in any dry cell after a step.
    pub max_dry_momentum: f64,
    pub remap_substeps: usize,
    pub adapt_calls: usize,
    pub adapt_skipped: usize,
    pub tvb_cells: usize,
    pub pp_cells: usize,
}

pub struct Simulation<T: Real> {
    pub cfg: ProblemConfig,
    pub problem: Problem,
    pub mesh: Mesh<T>,
    /// Computational mesh coordinates for the mover.
    pub reference: Vec<Point<T>>,
    pub basis: ReferenceBasis<T>,
    pub state: DgField<T>,
    pub bottom: DgField<T>,
    pub phys: Physics<T>,
    pub limiter: LimiterConfig<T>,
    pub adapt: AdaptConfig<T>,
    pub t: T,
    pub steps: usize,
    pub diag: Diagnostics,
}

/// Initial mesh of a problem with `n` elements.
pub fn initial_mesh<T: Real>(problem: &Problem, n: usize) -> Result<Mesh<T>> {
    let grid = problem
        .grid(n)
        .ok_or_else(|| Error::Config(format!("element count {n} is not valid for {}", problem.id.name())))?;
    if problem.dim() == 1 {
        interval_mesh(T::lit(problem.lo[0]), T::lit(problem.hi[0]), grid.0, problem.x_kind)
    } else {
        rectangle_mesh(
            [T::lit(problem.lo[0]), T::lit(problem.lo[1])],
            [T::lit(problem.hi[0]), T::lit(problem.hi[1])],
            grid.0,
            grid.1,
            QuadSplit::Cross,
            problem.x_kind,
            problem.y_kind,
        )
    }
}

/// Projects the bottom and the conserved initial data. Depth and `h theta`
/// are made nonnegative at the positivity points.
pub fn project_initial<T: Real>(problem: &Problem, mesh: &Mesh<T>, basis: &ReferenceBasis<T>) -> Result<(DgField<T>, DgField<T>)> {
    let f64p = |x: Point<T>| [x[0].to_f64_lossy(), x[1].to_f64_lossy()];
    let bottom = l2_project(mesh, basis, 1, |x, o| o[0] = T::lit(problem.bottom(f64p(x))))?;
    let state = l2_project(mesh, basis, 4, |x, o| {
        let u = problem.initial_conserved(f64p(x));
        for c in 0..4 {
            o[c] = T::lit(u[c]);
        }
    })?;
    Ok((state, bottom))
}

impl<T: Real> Simulation<T> {
    pub fn new(cfg: ProblemConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = cfg.problem_spec();
        let mesh = initial_mesh::<T>(&problem, cfg.n)?;
        let basis = ReferenceBasis::new(problem.dim(), cfg.degree)?;
        let (mut state, mut bottom) = project_initial(&problem, &mesh, &basis)?;
        let phys = Physics { g: T::one(), dry_tol: T::lit(cfg.dry_tol) };
        let limiter = LimiterConfig {
            m_tvb: T::lit(cfg.m_tvb),
            dry_tol: T::lit(cfg.dry_tol),
            dry_mode: problem.dry_mode,
            ..LimiterConfig::default()
        };
        let mut adapt = AdaptConfig::for_dim(problem.dim());
        adapt.delta = T::lit(cfg.delta);
        adapt.h_floor = T::lit(cfg.dry_tol);
        adapt.mover_iters = cfg.mover_iters;
        adapt.smoothing_sweeps = cfg.smoothing_sweeps;
        adapt.validate()?;
        // Projected data may dip below zero at positivity points near dry
        // fronts.
        let h_before = state.component(H);
        pp_limit(&mut state, &basis)?;
        bottom_correction(&mut bottom, &h_before, &state.component(H));
        dry_fix(&mut state, limiter.dry_tol);
        let total = mesh.total_measure().to_f64_lossy();
        let diag = Diagnostics {
            min_measure: mesh.min_measure().to_f64_lossy(),
            initial_total_measure: total,
            max_measure_drift: 0.0,
            min_stage_h: state.min_at_pp(&basis, H).to_f64_lossy(),
            min_stage_eta: state.min_at_pp(&basis, crate::ripa::ETA).to_f64_lossy(),
            max_dry_momentum: 0.0,
            remap_substeps: 0,
            adapt_calls: 0,
            adapt_skipped: 0,
            tvb_cells: 0,
            pp_cells: 0,
        };
        Ok(Self {
            reference: mesh.coords().to_vec(),
            cfg,
            problem,
            mesh,
            basis,
            state,
            bottom,
            phys,
            limiter,
            adapt,
            t: T::zero(),
            steps: 0,
            diag,
        })
    }

    pub fn t_final(&self) -> T {
        T::lit(self.cfg.t_final)
    }

    pub fn is_done(&self) -> bool {
        !(self.t < self.t_final())
    }

    fn note_mesh(&mut self, mesh_min: f64) {
        self.diag.min_measure = self.diag.min_measure.min(mesh_min);
        let total = self.mesh.total_measure().to_f64_lossy();
        let drift = ((total - self.diag.initial_total_measure) / self.diag.initial_total_measure).abs();
        self.diag.max_measure_drift = self.diag.max_measure_drift.max(drift);
    }

    /// Moves the mesh toward the current solution's metric and remaps.
    pub fn adapt_and_remap(&mut self) -> Result<()> {
        let metric = adaptation_metric(&self.state, &self.bottom, &self.mesh, &self.phys, &self.adapt)?;
        let (new_mesh, report) = move_mesh(&self.mesh, &self.reference, &metric, &self.adapt);
        self.diag.adapt_calls += 1;
        if report.skipped {
            self.diag.adapt_skipped += 1;
        }
        debug!(
            "adapt: {} iterations, energy {:e} -> {:e}, relaxation {:?}",
            report.iterations,
            report.energy_before.to_f64_lossy(),
            report.energy_after.to_f64_lossy(),
            report.relaxation.to_f64_lossy()
        );
        let blend = MeshBlend::new(self.mesh.clone(), new_mesh)?;
        let moved = blend.displacement().iter().map(|d| d[0].abs().max(d[1].abs())).fold(T::zero(), T::max);
        if !(moved > self.adapt.min_move * self.mesh.min_element_height()) {
            return Ok(());
        }
        let plan = plan_remap(blend, T::lit(self.cfg.remap_cp));
        let (state, bottom, stats) = remap_state(&self.state, &self.bottom, &plan, &self.basis)?;
        self.diag.remap_substeps += stats.substeps;
        self.state = state;
        self.bottom = bottom;
        dry_fix(&mut self.state, self.limiter.dry_tol);
        self.mesh = plan.blend.new_mesh().clone();
        self.note_mesh(stats.min_measure.to_f64_lossy());
        Ok(())
    }

    fn step_inner(&mut self) -> Result<()> {
        if self.cfg.mesh == MeshMode::Moving && self.steps % self.cfg.adapt_every == 0 {
            self.adapt_and_remap()?;
        }
        let dt = compute_dt(&self.state, &self.mesh, &self.basis, &self.phys, T::lit(self.problem.cfl), self.t, self.t_final());
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::NonFinite { context: "time step", elem: 0 });
        }
        let mut stats = Vec::with_capacity(3);
        let new = ssp_rk3_step(&self.state, &mut self.bottom, &self.mesh, &self.basis, &self.phys, &self.limiter, dt, &mut stats)?;
        if let Some(e) = new.first_non_finite() {
            return Err(Error::NonFinite { context: "solution", elem: e });
        }
        for s in &stats {
            self.diag.min_stage_h = self.diag.min_stage_h.min(s.min_h);
            self.diag.min_stage_eta = self.diag.min_stage_eta.min(s.min_eta);
            self.diag.tvb_cells += s.tvb_cells;
            self.diag.pp_cells += s.pp_cells;
        }
        self.state = new;
        for e in 0..self.state.n_elements() {
            if self.state.cell_average(e, H) < self.limiter.dry_tol {
                for c in [M, W] {
                    for x in self.state.coeffs(e, c) {
                        self.diag.max_dry_momentum = self.diag.max_dry_momentum.max(x.to_f64_lossy().abs());
                    }
                }
            }
        }
        self.t += dt;
        if self.t_final() - self.t <= T::epsilon() * T::lit(16.0) * self.t_final().max(T::one()) {
            self.t = self.t_final();
        }
        self.steps += 1;
        Ok(())
    }

    /// One full step of the outer loop; errors carry the step and time.
    pub fn step(&mut self) -> Result<()> {
        let (step, time) = (self.steps, self.t.to_f64_lossy());
        self.step_inner().map_err(|e| Error::Step { step, time, source: Box::new(e) })
    }

    /// Runs to the final time, calling `each` after every step.
    pub fn run_with(&mut self, mut each: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        while !self.is_done() {
            if self.cfg.max_steps > 0 && self.steps >= self.cfg.max_steps {
                return Err(Error::Config(format!("max_steps = {} reached at t = {}", self.cfg.max_steps, self.t.to_f64_lossy())));
            }
            self.step()?;
            each(self)?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| Ok(()))
    }

    /// Variables reported by the error tables.
    pub fn error_vars(&self) -> Vec<Var> {
        let first = if self.problem.lake_at_rest().is_some() { Var::Surface } else { Var::Depth };
        if self.problem.dim() == 1 {
            vec![first, Var::MomX, Var::HTheta]
        } else {
            vec![first, Var::MomX, Var::MomY, Var::HTheta]
        }
    }

    /// Errors against the lake-at-rest state `(h + b, hu, hv, h theta) =
    /// (C2, 0, 0, theta h)`, for problems that start from one.
    pub fn well_balance_errors(&self) -> Option<ErrorReport> {
        let (theta, c2) = self.problem.lake_at_rest()?;
        let vars = self.error_vars();
        let dry = self.cfg.dry_tol;
        // h theta is compared with theta times the computed depth.
        let f = |_: Point<f64>, u: &[f64; 4], _: f64, out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(&vars) {
                *o = match v {
                    Var::Surface => c2,
                    Var::HTheta => theta * u[H],
                    _ => 0.0,
                };
            }
        };
        Some(compute_errors_local(&self.mesh, &self.basis, &self.state, &self.bottom, &vars, dry, &f))
    }

    /// Errors against a reference simulation at the same time.
    pub fn errors_against(&self, reference: &Simulation<T>) -> ErrorReport {
        compute_errors_vs_solution(
            &self.mesh,
            &self.basis,
            &self.state,
            &self.bottom,
            &reference.mesh,
            &reference.basis,
            &reference.state,
            &reference.bottom,
            &self.error_vars(),
            self.cfg.dry_tol,
        )
    }
}

/// Summary returned by [`run`].
pub struct RunOutcome<T: Real> {
    pub sim: Simulation<T>,
    pub errors: Option<ErrorReport>,
}

/// Runs a configuration to completion and writes its outputs when `cfg.out`
/// is set: solution snapshots, `mesh_trajectory.txt`, `errors.csv` (for
/// problems with a known steady state) and `manifest.txt`.
pub fn run<T: Real>(cfg: ProblemConfig) -> Result<RunOutcome<T>> {
    let mut sim = Simulation::<T>::new(cfg.clone())?;
    let out = match &cfg.out {
        Some(dir) => Some(OutputDir::create(dir)?),
        None => None,
    };
    let dry = cfg.dry_tol;
    if let Some(o) = &out {
        o.write("mesh_trajectory.txt", &trajectory_line(0.0, &sim.mesh))?;
        o.snapshot("0000", 0.0, &sim.mesh, &sim.basis, &sim.state, &sim.bottom, dry)?;
    }
    let every = cfg.output_every;
    sim.run_with(|s| {
        if let Some(o) = &out {
            o.append("mesh_trajectory.txt", &trajectory_line(s.t.to_f64_lossy(), &s.mesh))?;
            if every > 0 && s.steps % every == 0 && !s.is_done() {
                o.snapshot(&format!("{:04}", s.steps / every), s.t.to_f64_lossy(), &s.mesh, &s.basis, &s.state, &s.bottom, dry)?;
            }
        }
        Ok(())
    })?;
    info!(
        "{}: reached t = {} in {} steps, min measure {:e}",
        cfg.problem.name(),
        sim.t.to_f64_lossy(),
        sim.steps,
        sim.diag.min_measure
    );
    let errors = sim.well_balance_errors();
    if let Some(o) = &out {
        o.snapshot("final", sim.t.to_f64_lossy(), &sim.mesh, &sim.basis, &sim.state, &sim.bottom, dry)?;
        if let Some(e) = &errors {
            o.write("errors.csv", &e.to_csv())?;
        }
        let mut manifest = cfg.to_text();
        manifest.push_str(&format!(
            "# steps = {}\n# t = {:.17e}\n# min_measure = {:.17e}\n# max_measure_drift = {:.17e}\n",
            sim.steps,
            sim.t.to_f64_lossy(),
            sim.diag.min_measure,
            sim.diag.max_measure_drift
        ));
        o.write("manifest.txt", &manifest)?;
    }
    Ok(RunOutcome { sim, errors })
}
