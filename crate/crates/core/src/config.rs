//! Run configuration: plain-text `key = value` files with per-problem
//! defaults.
//!
//! Keys: `problem`, `n`, `degree`, `t_final`, `cfl`, `m_tvb`, `delta`,
//! `mesh` (`fixed` | `moving`), `epsilon`, `dry_tol`, `remap_cp`,
//! `adapt_every`, `mover_iters`, `smoothing_sweeps`, `output_every`,
//! `max_steps`, `out`. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::problems::{Problem, ProblemId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshMode {
    Fixed,
    Moving,
}

impl MeshMode {
    pub fn name(&self) -> &'static str {
        match self {
            MeshMode::Fixed => "fixed",
            MeshMode::Moving => "moving",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Some(MeshMode::Fixed),
            "moving" => Some(MeshMode::Moving),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub problem: ProblemId,
    pub n: usize,
    pub degree: usize,
    pub t_final: f64,
    pub cfl: f64,
    pub m_tvb: f64,
    pub delta: f64,
    pub mesh: MeshMode,
    pub epsilon: f64,
    pub dry_tol: f64,
    pub remap_cp: f64,
    pub adapt_every: usize,
    pub mover_iters: usize,
    pub smoothing_sweeps: usize,
    /// Snapshot cadence in steps; 0 writes only the initial and final states.
    pub output_every: usize,
    /// Abort after this many steps; 0 means unlimited.
    pub max_steps: usize,
    pub out: Option<PathBuf>,
}

impl ProblemConfig {
    /// Defaults for `problem` on a moving mesh with P2 elements.
    pub fn new(problem: ProblemId) -> Self {
        let p = problem.spec();
        Self {
            problem,
            n: p.n,
            degree: 2,
            t_final: p.t_final,
            cfl: p.cfl,
            m_tvb: p.m_tvb,
            delta: if p.dim() == 1 { 0.1 } else { 1.0 },
            mesh: MeshMode::Moving,
            epsilon: p.epsilon,
            dry_tol: 1e-6,
            remap_cp: 0.18,
            adapt_every: 1,
            mover_iters: 5,
            smoothing_sweeps: 2,
            output_every: 0,
            max_steps: 0,
            out: None,
        }
    }

    /// Problem instance with the configured overrides applied.
    pub fn problem_spec(&self) -> Problem {
        let mut p = self.problem.spec();
        p.n = self.n;
        p.t_final = self.t_final;
        p.cfl = self.cfl;
        p.m_tvb = self.m_tvb;
        p.epsilon = self.epsilon;
        p
    }

    /// Sets one key. Changing `problem` resets every other value to that
    /// problem's defaults, so it should come first.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("invalid value {value:?} for {what}"));
        let float = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
        let int = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
        match key.as_str() {
            "problem" => {
                let id = ProblemId::parse(value).ok_or_else(|| Error::Config(format!("unknown problem {value:?}")))?;
                let out = self.out.take();
                *self = Self::new(id);
                self.out = out;
            }
            "n" => self.n = int("n")?,
            "degree" | "k" => self.degree = int("degree")?,
            "t_final" | "tfinal" => self.t_final = float("t_final")?,
            "cfl" => self.cfl = float("cfl")?,
            "m_tvb" | "mtvb" => self.m_tvb = float("m_tvb")?,
            "delta" => self.delta = float("delta")?,
            "mesh" => self.mesh = MeshMode::parse(value).ok_or_else(|| bad("mesh"))?,
            "epsilon" => self.epsilon = float("epsilon")?,
            "dry_tol" => self.dry_tol = float("dry_tol")?,
            "remap_cp" => self.remap_cp = float("remap_cp")?,
            "adapt_every" => self.adapt_every = int("adapt_every")?,
            "mover_iters" => self.mover_iters = int("mover_iters")?,
            "smoothing_sweeps" => self.smoothing_sweeps = int("smoothing_sweeps")?,
            "output_every" => self.output_every = int("output_every")?,
            "max_steps" => self.max_steps = int("max_steps")?,
            "out" => self.out = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a config file. `problem` is applied first wherever it appears.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            pairs.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let problem = pairs
            .iter()
            .find(|(_, k, _)| k == "problem")
            .ok_or_else(|| Error::Config("config has no problem key".into()))?;
        let id = ProblemId::parse(&problem.2).ok_or_else(|| Error::Config(format!("unknown problem {:?}", problem.2)))?;
        let mut cfg = Self::new(id);
        for (line, k, v) in &pairs {
            if k == "problem" {
                continue;
            }
            cfg.set(k, v).map_err(|e| Error::Parse { line: *line, msg: e.to_string() })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully resolved configuration in the same format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        let _ = writeln!(s, "cfl = {:?}", self.cfl);
        let _ = writeln!(s, "m_tvb = {:?}", self.m_tvb);
        let _ = writeln!(s, "delta = {:?}", self.delta);
        let _ = writeln!(s, "mesh = {}", self.mesh.name());
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "dry_tol = {:?}", self.dry_tol);
        let _ = writeln!(s, "remap_cp = {:?}", self.remap_cp);
        let _ = writeln!(s, "adapt_every = {}", self.adapt_every);
        let _ = writeln!(s, "mover_iters = {}", self.mover_iters);
        let _ = writeln!(s, "smoothing_sweeps = {}", self.smoothing_sweeps);
        let _ = writeln!(s, "output_every = {}", self.output_every);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {}", o.display());
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {x}")))
            }
        };
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.problem.spec().grid(self.n).is_none() {
            return Err(Error::Config(format!(
                "n = {} does not give a square-cell cross-split grid for {}",
                self.n,
                self.problem.name()
            )));
        }
        if !(1..=3).contains(&self.degree) {
            return Err(Error::UnsupportedDegree(self.degree));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config("t_final must be nonnegative".into()));
        }
        pos(self.cfl, "cfl")?;
        pos(self.delta, "delta")?;
        pos(self.dry_tol, "dry_tol")?;
        pos(self.remap_cp, "remap_cp")?;
        if !(self.m_tvb >= 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::Config("m_tvb and epsilon must be nonnegative".into()));
        }
        if self.adapt_every == 0 {
            return Err(Error::Config("adapt_every must be at least 1".into()));
        }
        Ok(())
    }
}
