//! Text output: 1D columns, legacy ASCII VTK, mesh trajectories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::basis::ReferenceBasis;
use crate::error::Result;
use crate::field::DgField;
use crate::mesh::Mesh;
use crate::norms::{sample_solution, Var};
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;

const COLUMNS: [Var; 6] = [Var::Depth, Var::Bottom, Var::Surface, Var::MomX, Var::HTheta, Var::Theta];

/// Columns `x h b h+b hu htheta theta` at `k + 1` Gauss points per element.
pub fn columns_1d<T: Real>(mesh: &Mesh<T>, basis: &ReferenceBasis<T>, state: &DgField<T>, bottom: &DgField<T>, dry_tol: f64) -> String {
    let (pts, _) = gauss_legendre::<T>(basis.degree() + 1);
    let mut s = String::from("# x h b h+b hu htheta theta\n");
    let mut order: Vec<usize> = (0..mesh.n_elements()).collect();
    order.sort_by(|a, b| mesh.geometry(*a).centroid[0].partial_cmp(&mesh.geometry(*b).centroid[0]).unwrap());
    for e in order {
        for &p in &pts {
            let xi = [p, T::zero()];
            let x = mesh.to_physical(e, xi)[0].to_f64_lossy();
            let (u, b) = sample_solution(basis, state, bottom, e, xi);
            let _ = write!(s, "{x:.15e}");
            for v in COLUMNS {
                let _ = write!(s, " {:.15e}", v.eval(u, b, dry_tol));
            }
            s.push('\n');
        }
    }
    s
}

/// Legacy ASCII VTK unstructured grid with cell-averaged fields.
pub fn vtk_2d<T: Real>(mesh: &Mesh<T>, state: &DgField<T>, bottom: &DgField<T>, dry_tol: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in mesh.coords() {
        let _ = writeln!(s, "{:.15e} {:.15e} 0", p[0].to_f64_lossy(), p[1].to_f64_lossy());
    }
    let ne = mesh.n_elements();
    let _ = writeln!(s, "CELLS {} {}", ne, ne * 4);
    for e in 0..ne {
        let el = mesh.element(e);
        let _ = writeln!(s, "3 {} {} {}", el[0], el[1], el[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    for v in [Var::Depth, Var::Bottom, Var::Surface, Var::MomX, Var::MomY, Var::HTheta, Var::Theta] {
        let name = v.name().replace('+', "_plus_");
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for e in 0..ne {
            let u = [0, 1, 2, 3].map(|c| state.cell_average(e, c).to_f64_lossy());
            let b = bottom.cell_average(e, 0).to_f64_lossy();
            let _ = writeln!(s, "{:.15e}", v.eval(u, b, dry_tol));
        }
    }
    s
}

/// One trajectory frame: the time followed by every vertex coordinate
/// (x only in 1D, x y pairs in 2D).
pub fn trajectory_line<T: Real>(t: f64, mesh: &Mesh<T>) -> String {
    let mut s = format!("{t:.15e}");
    for p in mesh.coords() {
        if mesh.dim() == 1 {
            let _ = write!(s, " {:.15e}", p[0].to_f64_lossy());
        } else {
            let _ = write!(s, " {:.15e} {:.15e}", p[0].to_f64_lossy(), p[1].to_f64_lossy());
        }
    }
    s.push('\n');
    s
}

/// Writes files into one output directory.
#[derive(Clone, Debug)]
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        Ok(())
    }

    pub fn append(&self, name: &str, contents: &str) -> Result<()> {
        use std::io::Write;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.dir.join(name))?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }

    /// Writes the solution snapshot named by `tag` in the format of the mesh dimension.
    pub fn snapshot<T: Real>(
        &self,
        tag: &str,
        t: f64,
        mesh: &Mesh<T>,
        basis: &ReferenceBasis<T>,
        state: &DgField<T>,
        bottom: &DgField<T>,
        dry_tol: f64,
    ) -> Result<()> {
        if mesh.dim() == 1 {
            let body = format!("# t = {t:.15e}\n{}", columns_1d(mesh, basis, state, bottom, dry_tol));
            self.write(&format!("solution_{tag}.dat"), &body)
        } else {
            self.write(&format!("solution_{tag}.vtk"), &vtk_2d(mesh, state, bottom, dry_tol, &format!("t = {t:.15e}")))
        }
    }
}
