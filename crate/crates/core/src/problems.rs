//! Registry of the benchmark problems: domains, bottoms, initial data and
//! per-problem numerical defaults.

use std::f64::consts::PI;

use crate::mesh::{BoundaryKind, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// 1D lake at rest over a step bottom.
    LakeStep,
    /// 1D lake at rest over two cosine bumps.
    LakeBumps,
    /// 1D smooth periodic accuracy test.
    Accuracy,
    /// 1D surface perturbation over two bumps.
    PerturbSurface,
    /// 1D surface and temperature perturbation over two bumps.
    PerturbTemperature,
    /// 1D dam break over two bumps.
    DamBreak,
    /// 1D dam break with a dry region.
    DryDamBreak,
    /// 2D lake at rest over two Gaussian bumps, periodic.
    Lake2d,
    /// 2D surface and temperature perturbation over an elliptical hump.
    Perturb2d,
}

impl ProblemId {
    pub const ALL: [ProblemId; 9] = [
        ProblemId::LakeStep,
        ProblemId::LakeBumps,
        ProblemId::Accuracy,
        ProblemId::PerturbSurface,
        ProblemId::PerturbTemperature,
        ProblemId::DamBreak,
        ProblemId::DryDamBreak,
        ProblemId::Lake2d,
        ProblemId::Perturb2d,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::LakeStep => "lake-step",
            ProblemId::LakeBumps => "lake-bumps",
            ProblemId::Accuracy => "accuracy",
            ProblemId::PerturbSurface => "perturb-surface",
            ProblemId::PerturbTemperature => "perturb-temperature",
            ProblemId::DamBreak => "dam-break",
            ProblemId::DryDamBreak => "dry-dam-break",
            ProblemId::Lake2d => "lake-2d",
            ProblemId::Perturb2d => "perturb-2d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL.iter().copied().find(|p| p.name() == s)
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemId::Lake2d | ProblemId::Perturb2d => 2,
            _ => 1,
        }
    }

    /// Default problem parameters.
    pub fn spec(&self) -> Problem {
        let one_d = |lo: f64, hi: f64, kind: BoundaryKind| ([lo, 0.0], [hi, 0.0], kind, kind);
        let (lo, hi, x_kind, y_kind) = match self {
            ProblemId::LakeStep => one_d(0.0, 1.0, BoundaryKind::Reflective),
            ProblemId::LakeBumps => one_d(-2.0, 2.0, BoundaryKind::Reflective),
            ProblemId::Accuracy => one_d(0.0, 1.0, BoundaryKind::Periodic),
            ProblemId::PerturbSurface | ProblemId::PerturbTemperature => one_d(-4.0, 2.0, BoundaryKind::Outflow),
            ProblemId::DamBreak | ProblemId::DryDamBreak => one_d(-1.0, 1.0, BoundaryKind::Outflow),
            ProblemId::Lake2d => ([-1.0, -1.0], [1.0, 1.0], BoundaryKind::Periodic, BoundaryKind::Periodic),
            ProblemId::Perturb2d => ([-2.0, 0.0], [2.0, 1.0], BoundaryKind::Reflective, BoundaryKind::Reflective),
        };
        let (n, t_final) = match self {
            ProblemId::LakeStep | ProblemId::LakeBumps => (50, 1.0),
            ProblemId::Accuracy => (40, 0.04),
            ProblemId::PerturbSurface | ProblemId::PerturbTemperature => (300, 0.4),
            ProblemId::DamBreak => (200, 0.14),
            ProblemId::DryDamBreak => (200, 0.3),
            ProblemId::Lake2d => (400, 0.12),
            ProblemId::Perturb2d => (3600, 0.16),
        };
        let cfl = match self {
            ProblemId::DryDamBreak => 0.15,
            ProblemId::Lake2d | ProblemId::Perturb2d => 0.1,
            _ => 0.18,
        };
        let epsilon = match self {
            ProblemId::PerturbSurface | ProblemId::PerturbTemperature => 0.01,
            ProblemId::Perturb2d => 0.1,
            _ => 0.0,
        };
        Problem {
            id: *self,
            lo,
            hi,
            x_kind,
            y_kind,
            n,
            t_final,
            cfl,
            m_tvb: if *self == ProblemId::Accuracy { 1e4 } else { 0.0 },
            dry_mode: *self == ProblemId::DryDamBreak,
            epsilon,
        }
    }
}

/// A problem instance with its numerical defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub id: ProblemId,
    pub lo: Point<f64>,
    pub hi: Point<f64>,
    pub x_kind: BoundaryKind,
    pub y_kind: BoundaryKind,
    pub n: usize,
    pub t_final: f64,
    pub cfl: f64,
    pub m_tvb: f64,
    pub dry_mode: bool,
    pub epsilon: f64,
}

/// Two raised-cosine bumps centred at -0.9 and 0.4.
pub fn two_bumps(x: f64) -> f64 {
    if x > -1.0 && x < -0.8 {
        0.85 * ((10.0 * PI * (x + 0.9)).cos() + 1.0)
    } else if x > 0.3 && x < 0.5 {
        1.25 * ((10.0 * PI * (x - 0.4)).cos() + 1.0)
    } else {
        0.0
    }
}

fn dam_bumps(x: f64, a: f64, b: f64) -> f64 {
    if x > -0.4 && x < -0.2 {
        a * ((10.0 * PI * (x + 0.3)).cos() + 1.0)
    } else if x > 0.2 && x < 0.4 {
        b * ((10.0 * PI * (x - 0.3)).cos() + 1.0)
    } else {
        0.0
    }
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    /// Total measure of the domain.
    pub fn domain_measure(&self) -> f64 {
        if self.dim() == 1 {
            self.hi[0] - self.lo[0]
        } else {
            (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
        }
    }

    pub fn bottom(&self, p: Point<f64>) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self.id {
            ProblemId::LakeStep => {
                if x > 0.3 && x < 0.7 {
                    1.0
                } else {
                    0.0
                }
            }
            ProblemId::LakeBumps | ProblemId::PerturbSurface | ProblemId::PerturbTemperature => two_bumps(x),
            ProblemId::Accuracy => (PI * x).sin().powi(2),
            ProblemId::DamBreak => dam_bumps(x, 0.5, 0.75),
            ProblemId::DryDamBreak => dam_bumps(x, 2.0, 0.5),
            ProblemId::Lake2d => {
                if x < 0.0 {
                    0.5 * (-100.0 * ((x + 0.5).powi(2) + (y + 0.5).powi(2))).exp()
                } else {
                    0.6 * (-100.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp()
                }
            }
            ProblemId::Perturb2d => 3.0 * (-5.0 * (x - 0.9).powi(2) - 50.0 * (y - 0.5).powi(2)).exp(),
        }
    }

    /// Primitive initial data `(h, u, v, theta)`.
    pub fn initial(&self, p: Point<f64>) -> [f64; 4] {
        let x = p[0];
        let b = self.bottom(p);
        let eps = self.epsilon;
        match self.id {
            ProblemId::LakeStep => [2.0 - b, 0.0, 0.0, 10.0],
            ProblemId::LakeBumps => [6.0 - b, 0.0, 0.0, 4.0],
            ProblemId::Accuracy => {
                let h = 5.0 + (2.0 * PI * x).sin().exp();
                [h, (2.0 * PI * x).cos().sin() / h, 0.0, (2.0 * PI * x).sin() + 2.0]
            }
            ProblemId::PerturbSurface => {
                if x > -1.5 && x < -1.4 {
                    [6.0 - b + eps, 0.0, 0.0, 4.0]
                } else {
                    [6.0 - b, 0.0, 0.0, 4.0]
                }
            }
            ProblemId::PerturbTemperature => {
                if x > -1.5 && x < -1.4 {
                    [6.0 - b + eps, 0.0, 0.0, 24.0 / (6.0 + eps)]
                } else {
                    [6.0 - b, 0.0, 0.0, 4.0]
                }
            }
            ProblemId::DamBreak => {
                if x < 0.0 {
                    [5.0 - b, 0.0, 0.0, 3.0]
                } else {
                    [2.0 - b, 0.0, 0.0, 5.0]
                }
            }
            ProblemId::DryDamBreak => {
                if x < 0.0 {
                    [5.0 - b, 0.0, 0.0, 1.0]
                } else {
                    [(1.0 - b).max(0.0), 0.0, 0.0, 5.0]
                }
            }
            ProblemId::Lake2d => [3.0 - b, 0.0, 0.0, 4.0 / 3.0],
            ProblemId::Perturb2d => {
                if x > 0.05 && x < 0.15 {
                    [6.0 - b + eps, 0.0, 0.0, 24.0 / (6.0 + eps)]
                } else {
                    [6.0 - b, 0.0, 0.0, 4.0]
                }
            }
        }
    }

    /// Conserved initial data `(h, hu, hv, h theta)`.
    pub fn initial_conserved(&self, p: Point<f64>) -> [f64; 4] {
        let [h, u, v, th] = self.initial(p);
        [h, h * u, h * v, h * th]
    }

    /// `(theta, h + b)` of the lake-at-rest state the problem starts from,
    /// when it is one.
    pub fn lake_at_rest(&self) -> Option<(f64, f64)> {
        match self.id {
            ProblemId::LakeStep => Some((10.0, 2.0)),
            ProblemId::LakeBumps => Some((4.0, 6.0)),
            ProblemId::Lake2d => Some((4.0 / 3.0, 3.0)),
            _ => None,
        }
    }

    /// Number of cells along x and y for an element count `n`. In 2D each
    /// rectangle is split into four triangles and the cells are square.
    pub fn grid(&self, n: usize) -> Option<(usize, usize)> {
        if self.dim() == 1 {
            return (n > 0).then_some((n, 1));
        }
        if n == 0 || n % 4 != 0 {
            return None;
        }
        let cells = n / 4;
        let aspect = (self.hi[0] - self.lo[0]) / (self.hi[1] - self.lo[1]);
        let ny = ((cells as f64 / aspect).sqrt()).round() as usize;
        if ny == 0 {
            return None;
        }
        let nx = cells / ny;
        (nx * ny == cells && ((nx as f64) / (ny as f64) - aspect).abs() < 1e-9).then_some((nx, ny))
    }
}
