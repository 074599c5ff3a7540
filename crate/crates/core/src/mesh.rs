//! Unstructured simplicial meshes (segments in 1D, triangles in 2D).
//!
//! A [`Mesh`] is an immutable pair of a shared [`Topology`] (connectivity,
//! edge table, boundary markers) and a coordinate array with its geometric
//! caches. Moving the mesh means building a new `Mesh` on the same topology
//! via [`Mesh::with_coords`].
//!
//! Local conventions: triangle vertices are counter-clockwise; local face `f`
//! joins local vertices `(f+1)%3 -> (f+2)%3` (it is opposite vertex `f`). In
//! 1D, face 0 is the left end point and face 1 the right one. Each edge is
//! stored once; its normal points out of the lower-indexed element `left`.
//! Periodic boundary faces are glued into ordinary two-sided edges whose
//! right element is seen through a translation `shift`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{mat2_det, mat2_inv, mat2_vec, Mat2};
use crate::scalar::Real;

pub type Point<T> = [T; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Periodic,
    Reflective,
    Outflow,
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::Reflective => "reflective",
            BoundaryKind::Outflow => "outflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "periodic" => Some(BoundaryKind::Periodic),
            "reflective" | "wall" => Some(BoundaryKind::Reflective),
            "outflow" | "transmissive" => Some(BoundaryKind::Outflow),
            _ => None,
        }
    }
}

/// Boundary description: a classifier from (face midpoint, outward normal) to
/// a marker, plus the translation vectors that pair periodic faces.
pub struct BoundarySpec<T> {
    classify: Box<dyn Fn(Point<T>, Point<T>) -> BoundaryKind + Send + Sync>,
    periods: Vec<Point<T>>,
}

impl<T: Real> BoundarySpec<T> {
    pub fn new(
        classify: impl Fn(Point<T>, Point<T>) -> BoundaryKind + Send + Sync + 'static,
        periods: Vec<Point<T>>,
    ) -> Self {
        Self {
            classify: Box::new(classify),
            periods,
        }
    }

    pub fn uniform(kind: BoundaryKind) -> Self {
        Self::new(move |_, _| kind, Vec::new())
    }

    /// Axis-aligned box `[lo, hi]` with one marker for the x-faces and one
    /// for the y-faces. Periodic markers register the matching period.
    pub fn box_domain(lo: Point<T>, hi: Point<T>, x_kind: BoundaryKind, y_kind: BoundaryKind) -> Self {
        let mut periods = Vec::new();
        if x_kind == BoundaryKind::Periodic {
            periods.push([hi[0] - lo[0], T::zero()]);
        }
        if y_kind == BoundaryKind::Periodic {
            periods.push([T::zero(), hi[1] - lo[1]]);
        }
        Self::new(
            move |_, n| {
                if n[0].abs() >= n[1].abs() {
                    x_kind
                } else {
                    y_kind
                }
            },
            periods,
        )
    }

    /// Interval `[a, b]` in 1D.
    pub fn interval(kind: BoundaryKind, a: T, b: T) -> Self {
        Self::box_domain([a, T::zero()], [b, T::zero()], kind, BoundaryKind::Outflow)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor<T> {
    /// Right element, its local face, and the translation mapping its
    /// coordinates into the frame of the left element.
    Element {
        elem: usize,
        face: usize,
        shift: Point<T>,
        reversed: bool,
    },
    Boundary(BoundaryKind),
}

#[derive(Clone, Debug)]
pub struct Edge<T> {
    /// End points as traversed by the left element (equal in 1D).
    pub vertices: [usize; 2],
    pub left: usize,
    pub left_face: usize,
    pub right: Neighbor<T>,
}

impl<T: Real> Edge<T> {
    pub fn is_boundary(&self) -> bool {
        matches!(self.right, Neighbor::Boundary(_))
    }

    pub fn right_elem(&self) -> Option<usize> {
        match self.right {
            Neighbor::Element { elem, .. } => Some(elem),
            Neighbor::Boundary(_) => None,
        }
    }
}

/// How a vertex may move during mesh adaptation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexConstraint<T> {
    Free,
    /// Vertex lies on a straight boundary segment with this unit tangent.
    Slide(Point<T>),
    Fixed,
}

/// Connectivity shared by every mesh in a moving-mesh run.
#[derive(Debug)]
pub struct Topology<T> {
    dim: usize,
    n_vertices: usize,
    conn: Vec<usize>,
    edges: Vec<Edge<T>>,
    elem_edges: Vec<usize>,
    vertex_elems: Vec<Vec<usize>>,
    constraints: Vec<VertexConstraint<T>>,
    periodic_partners: Vec<Vec<(usize, Point<T>)>>,
}

impl<T: Real> Topology<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn verts_per_elem(&self) -> usize {
        self.dim + 1
    }

    pub fn n_elements(&self) -> usize {
        self.conn.len() / (self.dim + 1)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.conn[e * s..(e + 1) * s]
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Edge index of local face `f` of element `e`.
    pub fn face_edge(&self, e: usize, f: usize) -> usize {
        self.elem_edges[e * (self.dim + 1) + f]
    }

    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elems[v]
    }

    pub fn constraint(&self, v: usize) -> VertexConstraint<T> {
        self.constraints[v]
    }

    pub fn periodic_partners(&self, v: usize) -> &[(usize, Point<T>)] {
        &self.periodic_partners[v]
    }

    /// The element across local face `f` of `e`, with the translation that
    /// brings its coordinates into the frame of `e`.
    pub fn neighbor(&self, e: usize, f: usize) -> Option<(usize, usize, Point<T>)> {
        let edge = &self.edges[self.face_edge(e, f)];
        match edge.right {
            Neighbor::Element { elem, face, shift, .. } => {
                if edge.left == e && edge.left_face == f {
                    Some((elem, face, shift))
                } else {
                    Some((edge.left, edge.left_face, [-shift[0], -shift[1]]))
                }
            }
            Neighbor::Boundary(_) => None,
        }
    }

    /// Local vertex indices (start, end) of face `f`.
    pub fn face_local_vertices(&self, f: usize) -> [usize; 2] {
        if self.dim == 1 {
            [f, f]
        } else {
            [(f + 1) % 3, (f + 2) % 3]
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry<T> {
    pub origin: Point<T>,
    /// Columns are the images of the reference axes.
    pub jac: Mat2<T>,
    pub jac_inv: Mat2<T>,
    pub measure: T,
    pub centroid: Point<T>,
    pub height: T,
}

#[derive(Clone, Copy, Debug)]
pub struct EdgeGeometry<T> {
    /// Unit normal pointing out of the left element.
    pub normal: Point<T>,
    pub length: T,
    pub midpoint: Point<T>,
}

/// A mesh: topology plus coordinates and geometric caches.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    topo: Arc<Topology<T>>,
    coords: Vec<Point<T>>,
    elems: Vec<ElementGeometry<T>>,
    edge_geo: Vec<EdgeGeometry<T>>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from vertex coordinates and a flat connectivity list
    /// (`dim + 1` indices per element). 1D meshes pass `[x, 0]` coordinates.
    pub fn build(dim: usize, vertices: Vec<Point<T>>, connectivity: Vec<usize>, boundary: &BoundarySpec<T>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Connectivity(format!("unsupported dimension {dim}")));
        }
        let nv = dim + 1;
        if connectivity.len() % nv != 0 || connectivity.is_empty() {
            return Err(Error::Connectivity(format!(
                "connectivity length {} is not a positive multiple of {nv}",
                connectivity.len()
            )));
        }
        let n_elem = connectivity.len() / nv;
        let n_vertices = vertices.len();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in 0..n_elem {
            let el = &connectivity[e * nv..(e + 1) * nv];
            for &v in el {
                if v >= n_vertices {
                    return Err(Error::VertexOutOfRange { elem: e, vertex: v, n_vertices });
                }
            }
            let mut key = el.to_vec();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::DegenerateElement { elem: e });
            }
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicateElement { first, second: e });
            }
            seen.insert(key, e);
        }

        let mut vertex_elems = vec![Vec::new(); n_vertices];
        for e in 0..n_elem {
            for &v in &connectivity[e * nv..(e + 1) * nv] {
                vertex_elems[v].push(e);
            }
        }

        // Preliminary geometry, needed for boundary classification.
        let elems = compute_element_geometry(dim, &vertices, &connectivity)?;

        let face_verts = |e: usize, f: usize| -> [usize; 2] {
            let el = &connectivity[e * nv..(e + 1) * nv];
            if dim == 1 {
                [el[f], el[f]]
            } else {
                [el[(f + 1) % 3], el[(f + 2) % 3]]
            }
        };

        let mut faces: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        let mut order: Vec<(usize, usize)> = Vec::new();
        for e in 0..n_elem {
            for f in 0..nv {
                let [a, b] = face_verts(e, f);
                let key = (a.min(b), a.max(b));
                let entry = faces.entry(key).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push((e, f));
                if entry.len() > 2 {
                    return Err(Error::NonManifoldEdge { a: key.0, b: key.1 });
                }
            }
        }

        let mut edges: Vec<Edge<T>> = Vec::new();
        let mut elem_edges = vec![usize::MAX; n_elem * nv];
        let mut boundary_faces: Vec<(usize, usize)> = Vec::new();
        for key in &order {
            let sides = &faces[key];
            if sides.len() == 2 {
                let (mut l, mut r) = (sides[0], sides[1]);
                if r.0 < l.0 {
                    std::mem::swap(&mut l, &mut r);
                }
                let lv = face_verts(l.0, l.1);
                let rv = face_verts(r.0, r.1);
                let idx = edges.len();
                edges.push(Edge {
                    vertices: lv,
                    left: l.0,
                    left_face: l.1,
                    right: Neighbor::Element {
                        elem: r.0,
                        face: r.1,
                        shift: [T::zero(), T::zero()],
                        reversed: dim == 2 && rv[0] != lv[0],
                    },
                });
                elem_edges[l.0 * nv + l.1] = idx;
                elem_edges[r.0 * nv + r.1] = idx;
            } else {
                boundary_faces.push(sides[0]);
            }
        }

        // Classify boundary faces.
        let face_geo = |e: usize, f: usize| -> (Point<T>, Point<T>, T) {
            let [a, b] = face_verts(e, f);
            face_geometry(dim, &vertices[a], &vertices[b], f)
        };
        let mut constraints_normals: Vec<Vec<Point<T>>> = vec![Vec::new(); n_vertices];
        let mut periodic: Vec<(usize, usize)> = Vec::new();
        for &(e, f) in &boundary_faces {
            let (mid, normal, _) = face_geo(e, f);
            let [a, b] = face_verts(e, f);
            constraints_normals[a].push(normal);
            if b != a {
                constraints_normals[b].push(normal);
            }
            let kind = (boundary.classify)(mid, normal);
            if kind == BoundaryKind::Periodic {
                periodic.push((e, f));
            } else {
                let idx = edges.len();
                edges.push(Edge {
                    vertices: face_verts(e, f),
                    left: e,
                    left_face: f,
                    right: Neighbor::Boundary(kind),
                });
                elem_edges[e * nv + f] = idx;
            }
        }

        // Glue periodic faces pairwise.
        let mut periodic_partners: Vec<Vec<(usize, Point<T>)>> = vec![Vec::new(); n_vertices];
        let scale = domain_scale(&vertices);
        let tol = T::lit(1e-9) * scale;
        let close = |p: &Point<T>, q: &Point<T>| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol;
        let mut used = vec![false; periodic.len()];
        for i in 0..periodic.len() {
            if used[i] {
                continue;
            }
            let (e, f) = periodic[i];
            let [a0, a1] = face_verts(e, f);
            let pa0 = vertices[a0];
            let pa1 = vertices[a1];
            let mut found = None;
            'search: for j in 0..periodic.len() {
                if j == i || used[j] {
                    continue;
                }
                let (e2, f2) = periodic[j];
                let [b0, b1] = face_verts(e2, f2);
                for p in &boundary.periods {
                    for sign in [T::one(), -T::one()] {
                        let t = [p[0] * sign, p[1] * sign];
                        let ta0 = [pa0[0] + t[0], pa0[1] + t[1]];
                        let ta1 = [pa1[0] + t[0], pa1[1] + t[1]];
                        let pb0 = vertices[b0];
                        let pb1 = vertices[b1];
                        if close(&ta0, &pb0) && close(&ta1, &pb1) {
                            found = Some((j, t, false));
                            break 'search;
                        }
                        if close(&ta0, &pb1) && close(&ta1, &pb0) {
                            found = Some((j, t, true));
                            break 'search;
                        }
                    }
                }
            }
            let Some((j, t, reversed)) = found else {
                let (mid, _, _) = face_geo(e, f);
                return Err(Error::UnmatchedPeriodic {
                    elem: e,
                    x: mid[0].to_f64_lossy(),
                    y: mid[1].to_f64_lossy(),
                });
            };
            used[i] = true;
            used[j] = true;
            let (e2, f2) = periodic[j];
            let [b0, b1] = face_verts(e2, f2);
            // Partner coordinates are pa + t; shift maps partner -> this frame.
            let (l, lf, r, rf, shift) = if e <= e2 {
                (e, f, e2, f2, [-t[0], -t[1]])
            } else {
                (e2, f2, e, f, t)
            };
            let idx = edges.len();
            edges.push(Edge {
                vertices: face_verts(l, lf),
                left: l,
                left_face: lf,
                right: Neighbor::Element {
                    elem: r,
                    face: rf,
                    shift,
                    reversed: false,
                },
            });
            // Recompute `reversed` robustly: same traversal direction when the
            // right face starts at the image of the left face start.
            if let Neighbor::Element { ref mut reversed, .. } = edges[idx].right {
                if dim == 2 {
                    let [l0, _] = face_verts(l, lf);
                    let [r0, _] = face_verts(r, rf);
                    let pr0 = vertices[r0];
                    let img = [pr0[0] + shift[0], pr0[1] + shift[1]];
                    *reversed = !close(&img, &vertices[l0]);
                } else {
                    *reversed = false;
                }
            }
            elem_edges[l * nv + lf] = idx;
            elem_edges[r * nv + rf] = idx;
            let pairs: &[(usize, usize)] = if reversed { &[(a0, b1), (a1, b0)] } else { &[(a0, b0), (a1, b1)] };
            for &(va, vb) in pairs {
                if !periodic_partners[va].iter().any(|(p, _)| *p == vb) {
                    periodic_partners[va].push((vb, t));
                    periodic_partners[vb].push((va, [-t[0], -t[1]]));
                }
                if dim == 1 {
                    break;
                }
            }
        }

        let constraints = constraints_normals
            .iter()
            .map(|ns| vertex_constraint(dim, ns))
            .collect();

        let topo = Topology {
            dim,
            n_vertices,
            conn: connectivity,
            edges,
            elem_edges,
            vertex_elems,
            constraints,
            periodic_partners,
        };
        let edge_geo = compute_edge_geometry(&topo, &vertices);
        Ok(Self {
            topo: Arc::new(topo),
            coords: vertices,
            elems,
            edge_geo,
        })
    }

    /// Same topology, new coordinates. Fails if any element is inverted.
    pub fn with_coords(&self, coords: Vec<Point<T>>) -> Result<Self> {
        if coords.len() != self.topo.n_vertices {
            return Err(Error::Connectivity(format!(
                "expected {} coordinates, got {}",
                self.topo.n_vertices,
                coords.len()
            )));
        }
        let elems = compute_element_geometry(self.topo.dim, &coords, &self.topo.conn)?;
        let edge_geo = compute_edge_geometry(&self.topo, &coords);
        Ok(Self {
            topo: Arc::clone(&self.topo),
            coords,
            elems,
            edge_geo,
        })
    }

    pub fn topology(&self) -> &Arc<Topology<T>> {
        &self.topo
    }

    pub fn shares_topology(&self, other: &Mesh<T>) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo)
    }

    pub fn dim(&self) -> usize {
        self.topo.dim
    }

    pub fn n_elements(&self) -> usize {
        self.elems.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point<T>] {
        &self.coords
    }

    pub fn element(&self, e: usize) -> &[usize] {
        self.topo.element(e)
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry<T> {
        &self.elems[e]
    }

    pub fn measure(&self, e: usize) -> T {
        self.elems[e].measure
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.topo.edges
    }

    pub fn edge_geometry(&self, i: usize) -> &EdgeGeometry<T> {
        &self.edge_geo[i]
    }

    pub fn total_measure(&self) -> T {
        self.elems.iter().map(|g| g.measure).sum()
    }

    pub fn min_measure(&self) -> T {
        self.elems.iter().fold(T::infinity(), |m, g| m.min(g.measure))
    }

    /// Reference coordinates -> physical coordinates.
    pub fn to_physical(&self, e: usize, xi: Point<T>) -> Point<T> {
        let g = &self.elems[e];
        let d = mat2_vec(&g.jac, xi);
        if self.topo.dim == 1 {
            [g.origin[0] + d[0], T::zero()]
        } else {
            [g.origin[0] + d[0], g.origin[1] + d[1]]
        }
    }

    /// Physical coordinates -> reference coordinates.
    pub fn to_reference(&self, e: usize, x: Point<T>) -> Point<T> {
        let g = &self.elems[e];
        let d = [x[0] - g.origin[0], x[1] - g.origin[1]];
        let r = mat2_vec(&g.jac_inv, d);
        if self.topo.dim == 1 {
            [r[0], T::zero()]
        } else {
            r
        }
    }

    /// Outward unit normal of local face `f` of element `e`.
    pub fn outward_normal(&self, e: usize, f: usize) -> Point<T> {
        let ei = self.topo.face_edge(e, f);
        let n = self.edge_geo[ei].normal;
        let edge = &self.topo.edges[ei];
        if edge.left == e && edge.left_face == f {
            n
        } else {
            [-n[0], -n[1]]
        }
    }

    /// Smallest element height: segment length in 1D, `2 |K| / longest edge` in 2D.
    pub fn min_element_height(&self) -> T {
        self.elems.iter().fold(T::infinity(), |m, g| m.min(g.height))
    }

    /// Physical end points of local face `f` of element `e`.
    pub fn face_points(&self, e: usize, f: usize) -> [Point<T>; 2] {
        let [a, b] = self.topo.face_local_vertices(f);
        let el = self.topo.element(e);
        [self.coords[el[a]], self.coords[el[b]]]
    }

    /// Writes the plain-text mesh format: header, vertex list, element list.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.dim());
        let _ = writeln!(s, "vertices {}", self.n_vertices());
        for p in &self.coords {
            if self.dim() == 1 {
                let _ = writeln!(s, "{:.17e}", p[0]);
            } else {
                let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
            }
        }
        let _ = writeln!(s, "elements {}", self.n_elements());
        for e in 0..self.n_elements() {
            let el: Vec<String> = self.element(e).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", el.join(" "));
        }
        s
    }

    /// Parses the format written by [`Mesh::to_text`].
    pub fn from_text(text: &str, boundary: &BoundarySpec<T>) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<usize> {
            let (ln, l) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing '{key}'") })?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse { line: ln, msg: format!("expected '{key}'") });
            }
            it.next()
                .and_then(|x| x.parse().ok())
                .ok_or(Error::Parse { line: ln, msg: format!("bad count after '{key}'") })
        };
        let dim = header("dim")?;
        let nv = header("vertices")?;
        drop(header);
        let mut rest: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .skip(2)
            .collect();
        if rest.len() < nv + 1 {
            return Err(Error::Parse { line: 0, msg: "truncated vertex list".into() });
        }
        let mut verts = Vec::with_capacity(nv);
        for &(ln, l) in &rest[..nv] {
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
            if vals.len() < dim {
                return Err(Error::Parse { line: ln, msg: "too few coordinates".into() });
            }
            let y = if dim == 2 { vals[1] } else { 0.0 };
            verts.push([T::lit(vals[0]), T::lit(y)]);
        }
        rest.drain(..nv);
        let (ln, l) = rest[0];
        let ne: usize = l
            .strip_prefix("elements")
            .and_then(|x| x.trim().parse().ok())
            .ok_or(Error::Parse { line: ln, msg: "expected 'elements <n>'".into() })?;
        let mut conn = Vec::with_capacity(ne * (dim + 1));
        for &(ln, l) in rest.iter().skip(1).take(ne) {
            for x in l.split_whitespace() {
                conn.push(x.parse::<usize>().map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?);
            }
        }
        Self::build(dim, verts, conn, boundary)
    }
}

fn domain_scale<T: Real>(vertices: &[Point<T>]) -> T {
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for p in vertices {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1]).max(T::min_positive_value())
}

/// (midpoint, outward normal, length) of a face given its oriented end points.
fn face_geometry<T: Real>(dim: usize, a: &Point<T>, b: &Point<T>, f: usize) -> (Point<T>, Point<T>, T) {
    if dim == 1 {
        let n = if f == 0 { -T::one() } else { T::one() };
        return (*a, [n, T::zero()], T::one());
    }
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = t[0].hypot(t[1]);
    let half = T::lit(0.5);
    (
        [half * (a[0] + b[0]), half * (a[1] + b[1])],
        [t[1] / len, -t[0] / len],
        len,
    )
}

fn vertex_constraint<T: Real>(dim: usize, normals: &[Point<T>]) -> VertexConstraint<T> {
    if normals.is_empty() {
        return VertexConstraint::Free;
    }
    if dim == 1 {
        return VertexConstraint::Fixed;
    }
    let n0 = normals[0];
    let tol = T::lit(1e-10);
    for n in &normals[1..] {
        let cross = n0[0] * n[1] - n0[1] * n[0];
        if cross.abs() > tol {
            return VertexConstraint::Fixed;
        }
    }
    VertexConstraint::Slide([-n0[1], n0[0]])
}

fn compute_element_geometry<T: Real>(dim: usize, coords: &[Point<T>], conn: &[usize]) -> Result<Vec<ElementGeometry<T>>> {
    let nv = dim + 1;
    let n_elem = conn.len() / nv;
    let mut out = Vec::with_capacity(n_elem);
    for e in 0..n_elem {
        let el = &conn[e * nv..(e + 1) * nv];
        let g = if dim == 1 {
            let x0 = coords[el[0]][0];
            let x1 = coords[el[1]][0];
            let len = x1 - x0;
            if !(len > T::zero()) {
                return Err(Error::InvertedElement { elem: e, measure: len.to_f64_lossy() });
            }
            ElementGeometry {
                origin: [x0, T::zero()],
                jac: [[len, T::zero()], [T::zero(), T::one()]],
                jac_inv: [[T::one() / len, T::zero()], [T::zero(), T::one()]],
                measure: len,
                centroid: [T::lit(0.5) * (x0 + x1), T::zero()],
                height: len,
            }
        } else {
            let p0 = coords[el[0]];
            let p1 = coords[el[1]];
            let p2 = coords[el[2]];
            let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
            let det = mat2_det(&jac);
            let area = T::lit(0.5) * det;
            if !(area > T::zero()) {
                return Err(Error::InvertedElement { elem: e, measure: area.to_f64_lossy() });
            }
            let jac_inv = mat2_inv(&jac).ok_or(Error::InvertedElement { elem: e, measure: 0.0 })?;
            let l01 = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
            let l12 = (p2[0] - p1[0]).hypot(p2[1] - p1[1]);
            let l20 = (p0[0] - p2[0]).hypot(p0[1] - p2[1]);
            let third = T::one() / T::lit(3.0);
            ElementGeometry {
                origin: p0,
                jac,
                jac_inv,
                measure: area,
                centroid: [(p0[0] + p1[0] + p2[0]) * third, (p0[1] + p1[1] + p2[1]) * third],
                height: T::lit(2.0) * area / l01.max(l12).max(l20),
            }
        };
        out.push(g);
    }
    Ok(out)
}

fn compute_edge_geometry<T: Real>(topo: &Topology<T>, coords: &[Point<T>]) -> Vec<EdgeGeometry<T>> {
    topo.edges
        .iter()
        .map(|edge| {
            let [a, b] = edge.vertices;
            let (midpoint, normal, length) = face_geometry(topo.dim, &coords[a], &coords[b], edge.left_face);
            EdgeGeometry { normal, length, midpoint }
        })
        .collect()
}

/// How to split each rectangle cell of a structured triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadSplit {
    /// Two triangles per cell along the lower-left to upper-right diagonal.
    Diagonal,
    /// Four triangles per cell around an added center vertex.
    Cross,
}

/// Uniform 1D mesh of `n` segments on `[a, b]`.
pub fn interval_mesh<T: Real>(a: T, b: T, n: usize, kind: BoundaryKind) -> Result<Mesh<T>> {
    let h = (b - a) / T::from_usize_lossy(n);
    let mut verts: Vec<Point<T>> = (0..=n).map(|i| [a + h * T::from_usize_lossy(i), T::zero()]).collect();
    verts[n][0] = b;
    let conn: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
    Mesh::build(1, verts, conn, &BoundarySpec::interval(kind, a, b))
}

/// Structured triangulation of the rectangle `[lo, hi]` with `nx x ny` cells.
pub fn rectangle_mesh<T: Real>(
    lo: Point<T>,
    hi: Point<T>,
    nx: usize,
    ny: usize,
    split: QuadSplit,
    x_kind: BoundaryKind,
    y_kind: BoundaryKind,
) -> Result<Mesh<T>> {
    let dx = (hi[0] - lo[0]) / T::from_usize_lossy(nx);
    let dy = (hi[1] - lo[1]) / T::from_usize_lossy(ny);
    let grid = |i: usize, j: usize| -> Point<T> {
        let x = if i == nx { hi[0] } else { lo[0] + dx * T::from_usize_lossy(i) };
        let y = if j == ny { hi[1] } else { lo[1] + dy * T::from_usize_lossy(j) };
        [x, y]
    };
    let mut verts = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push(grid(i, j));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut conn = Vec::new();
    let half = T::lit(0.5);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            match split {
                QuadSplit::Diagonal => {
                    conn.extend_from_slice(&[v00, v10, v11]);
                    conn.extend_from_slice(&[v00, v11, v01]);
                }
                QuadSplit::Cross => {
                    let c = verts.len();
                    let p0 = grid(i, j);
                    let p1 = grid(i + 1, j + 1);
                    verts.push([half * (p0[0] + p1[0]), half * (p0[1] + p1[1])]);
                    conn.extend_from_slice(&[v00, v10, c]);
                    conn.extend_from_slice(&[v10, v11, c]);
                    conn.extend_from_slice(&[v11, v01, c]);
                    conn.extend_from_slice(&[v01, v00, c]);
                }
            }
        }
    }
    Mesh::build(2, verts, conn, &BoundarySpec::box_domain(lo, hi, x_kind, y_kind))
}

/// Two meshes on identical connectivity, linearly blended in `sigma`.
#[derive(Clone, Debug)]
pub struct MeshBlend<T> {
    old: Mesh<T>,
    new: Mesh<T>,
    displacement: Vec<Point<T>>,
}

impl<T: Real> MeshBlend<T> {
    pub fn new(old: Mesh<T>, new: Mesh<T>) -> Result<Self> {
        if !old.shares_topology(&new) && old.topo.conn != new.topo.conn {
            return Err(Error::Connectivity("blend endpoints have different connectivity".into()));
        }
        if old.n_vertices() != new.n_vertices() {
            return Err(Error::Connectivity("blend endpoints have different vertex counts".into()));
        }
        let displacement = old
            .coords
            .iter()
            .zip(&new.coords)
            .map(|(a, b)| [b[0] - a[0], b[1] - a[1]])
            .collect();
        Ok(Self { old, new, displacement })
    }

    pub fn identity(mesh: Mesh<T>) -> Self {
        let new = mesh.clone();
        Self::new(mesh, new).expect("identical meshes blend")
    }

    pub fn old(&self) -> &Mesh<T> {
        &self.old
    }

    pub fn new_mesh(&self) -> &Mesh<T> {
        &self.new
    }

    /// Nodal displacements `x_new - x_old`.
    pub fn displacement(&self) -> &[Point<T>] {
        &self.displacement
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.iter().all(|d| d[0] == T::zero() && d[1] == T::zero())
    }

    /// Nodal coordinates `(1 - s) x_old + s x_new`; exact at both end points.
    pub fn blend(&self, sigma: T) -> Vec<Point<T>> {
        if sigma == T::zero() {
            return self.old.coords.clone();
        }
        if sigma == T::one() {
            return self.new.coords.clone();
        }
        let a = T::one() - sigma;
        self.old
            .coords
            .iter()
            .zip(&self.new.coords)
            .map(|(p, q)| [a * p[0] + sigma * q[0], a * p[1] + sigma * q[1]])
            .collect()
    }

    /// The blended mesh at `sigma`; inversion is reported with its location.
    pub fn mesh_at(&self, sigma: T) -> Result<Mesh<T>> {
        if sigma == T::zero() {
            return Ok(self.old.clone());
        }
        if sigma == T::one() {
            return Ok(self.new.clone());
        }
        self.old.with_coords(self.blend(sigma)).map_err(|e| match e {
            Error::InvertedElement { elem, .. } => Error::BlendInversion { sigma: sigma.to_f64_lossy(), elem },
            other => other,
        })
    }

    /// Mesh velocity at reference point `xi` of element `e`: barycentric
    /// interpolation of the vertex displacements (independent of sigma).
    pub fn mesh_velocity(&self, e: usize, xi: Point<T>) -> Point<T> {
        let el = self.old.element(e);
        if self.old.dim() == 1 {
            let d0 = self.displacement[el[0]][0];
            let d1 = self.displacement[el[1]][0];
            return [d0 + (d1 - d0) * xi[0], T::zero()];
        }
        let l0 = T::one() - xi[0] - xi[1];
        let (d0, d1, d2) = (self.displacement[el[0]], self.displacement[el[1]], self.displacement[el[2]]);
        [
            l0 * d0[0] + xi[0] * d1[0] + xi[1] * d2[0],
            l0 * d0[1] + xi[0] * d1[1] + xi[1] * d2[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_two_triangles() -> Mesh<f64> {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        Mesh::build(2, verts, vec![0, 1, 2, 0, 2, 3], &BoundarySpec::uniform(BoundaryKind::Reflective)).unwrap()
    }

    #[test]
    fn unit_interval_two_segments() {
        let m = interval_mesh(0.0_f64, 1.0, 2, BoundaryKind::Outflow).unwrap();
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.n_vertices(), 3);
        let boundary: Vec<f64> = m
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_boundary())
            .map(|(i, _)| m.edge_geometry(i).midpoint[0])
            .collect();
        assert_eq!(boundary.len(), 2);
        assert!(boundary.contains(&0.0) && boundary.contains(&1.0));
    }

    #[test]
    fn unit_square_diagonal_split() {
        let m = unit_square_two_triangles();
        let interior = m.edges().iter().filter(|e| !e.is_boundary()).count();
        let boundary = m.edges().iter().filter(|e| e.is_boundary()).count();
        assert_eq!((interior, boundary), (1, 4));
        assert!((m.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn repeated_vertex_is_degenerate() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::build(2, verts, vec![0, 1, 1], &BoundarySpec::uniform(BoundaryKind::Outflow)).unwrap_err();
        assert!(err.to_string().contains("degenerate element"), "{err}");
    }

    #[test]
    fn inverted_element_is_named() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::build(2, verts, vec![0, 2, 1], &BoundarySpec::uniform(BoundaryKind::Outflow)).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { elem: 0, .. }));
    }

    #[test]
    fn duplicate_and_out_of_range_rejected() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let spec = BoundarySpec::uniform(BoundaryKind::Outflow);
        assert!(matches!(
            Mesh::build(2, verts.clone(), vec![0, 1, 2, 1, 2, 0], &spec),
            Err(Error::DuplicateElement { .. })
        ));
        assert!(matches!(
            Mesh::build(2, verts, vec![0, 1, 7], &spec),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn unmatched_periodic_rejected() {
        // A lone triangle cannot pair its periodic faces.
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let spec = BoundarySpec::new(|_, _| BoundaryKind::Periodic, vec![[1.0, 0.0]]);
        assert!(matches!(
            Mesh::build(2, verts, vec![0, 1, 2], &spec),
            Err(Error::UnmatchedPeriodic { .. })
        ));
    }

    #[test]
    fn min_heights() {
        let m = interval_mesh(0.0_f64, 1.0, 4, BoundaryKind::Outflow).unwrap();
        assert!((m.min_element_height() - 0.25).abs() < 1e-15);

        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let t = Mesh::build(2, verts, vec![0, 1, 2], &BoundarySpec::uniform(BoundaryKind::Outflow)).unwrap();
        assert!((t.min_element_height() - 0.5_f64.sqrt()).abs() < 1e-15);

        let verts = vec![[0.0_f64, 0.0], [0.1, 0.0], [0.3, 0.0]];
        let m = Mesh::build(1, verts, vec![0, 1, 1, 2], &BoundarySpec::uniform(BoundaryKind::Outflow)).unwrap();
        assert!((m.min_element_height() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn periodic_rectangle_glues_all_boundary_faces() {
        for split in [QuadSplit::Diagonal, QuadSplit::Cross] {
            let m = rectangle_mesh::<f64>([-1.0, -1.0], [1.0, 1.0], 4, 3, split, BoundaryKind::Periodic, BoundaryKind::Periodic)
                .unwrap();
            assert!(m.edges().iter().all(|e| !e.is_boundary()));
            for (i, edge) in m.edges().iter().enumerate() {
                let Neighbor::Element { elem, face, shift, .. } = edge.right else { unreachable!() };
                // Partner face length matches.
                let [a, b] = m.face_points(elem, face);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                assert!((len - m.edge_geometry(i).length).abs() < 1e-14);
                // Outward normals opposite.
                let n0 = m.outward_normal(edge.left, edge.left_face);
                let n1 = m.outward_normal(elem, face);
                assert!((n0[0] + n1[0]).abs() < 1e-15 && (n0[1] + n1[1]).abs() < 1e-15);
                // Shifted right face coincides with the left face.
                let [la, _] = m.face_points(edge.left, edge.left_face);
                let sa = [a[0] + shift[0], a[1] + shift[1]];
                let sb = [b[0] + shift[0], b[1] + shift[1]];
                let same = (sa[0] - la[0]).abs() < 1e-12 && (sa[1] - la[1]).abs() < 1e-12;
                let swapped = (sb[0] - la[0]).abs() < 1e-12 && (sb[1] - la[1]).abs() < 1e-12;
                assert!(same || swapped);
                let Neighbor::Element { reversed, .. } = edge.right else { unreachable!() };
                assert_eq!(reversed, swapped);
            }
        }
    }

    #[test]
    fn cross_split_counts() {
        let m = rectangle_mesh::<f64>([0.0, 0.0], [1.0, 1.0], 10, 10, QuadSplit::Cross, BoundaryKind::Outflow, BoundaryKind::Outflow)
            .unwrap();
        assert_eq!(m.n_elements(), 400);
        assert!((m.total_measure() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn vertex_constraints_on_rectangle() {
        let m = rectangle_mesh([0.0, 0.0], [1.0, 1.0], 2, 2, QuadSplit::Diagonal, BoundaryKind::Reflective, BoundaryKind::Reflective)
            .unwrap();
        let topo = m.topology();
        assert_eq!(topo.constraint(0), VertexConstraint::Fixed);
        assert!(matches!(topo.constraint(1), VertexConstraint::Slide(_)));
        assert_eq!(topo.constraint(4), VertexConstraint::Free);
    }

    #[test]
    fn blend_endpoints_and_velocity() {
        let m0 = interval_mesh(0.0_f64, 1.0, 1, BoundaryKind::Outflow).unwrap();
        let m1 = m0.with_coords(vec![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let b = MeshBlend::new(m0.clone(), m1.clone()).unwrap();
        assert_eq!(b.blend(0.0), m0.coords().to_vec());
        assert_eq!(b.blend(1.0), m1.coords().to_vec());
        assert!((b.blend(0.5)[1][0] - 1.5).abs() < 1e-15);
        assert!((b.mesh_velocity(0, [0.5, 0.0])[0] - 0.5).abs() < 1e-15);

        let s = unit_square_two_triangles();
        let shifted: Vec<_> = s.coords().iter().map(|p| [p[0] + 1.0, p[1]]).collect();
        let b = MeshBlend::new(s.clone(), s.with_coords(shifted).unwrap()).unwrap();
        let v = b.mesh_velocity(1, [0.2, 0.3]);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let id = MeshBlend::identity(s);
        assert_eq!(id.mesh_velocity(0, [0.3, 0.3]), [0.0, 0.0]);
    }

    #[test]
    fn text_roundtrip() {
        let m = rectangle_mesh([0.0, 0.0], [2.0, 1.0], 3, 2, QuadSplit::Diagonal, BoundaryKind::Outflow, BoundaryKind::Outflow)
            .unwrap();
        let text = m.to_text();
        let back = Mesh::<f64>::from_text(&text, &BoundarySpec::uniform(BoundaryKind::Outflow)).unwrap();
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.n_elements(), m.n_elements());
    }
}
