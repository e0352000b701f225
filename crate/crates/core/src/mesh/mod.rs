//! Two-dimensional polytopal meshes whose boundary faces may be circular arcs.
//!
//! Interior faces are always straight segments. Every face carries a fixed unit
//! normal `n_F`: the outward normal of the domain on boundary faces, and the
//! outward normal of the lower-numbered owner cell on interior faces. A cell
//! stores, for each of its faces, the sign `n_F . n_K`.

mod generate;
mod io;
mod snap;

pub use generate::build_rect_mesh;
pub use io::{load_mesh, parse_mesh, write_mesh};
pub use snap::{default_snap_tolerance, snap_boundary_to_arcs};

use std::collections::HashMap;

use crate::error::{HhoError, Result};
use crate::geometry::{ArcGeometry, Point2};
use crate::quadrature::gauss_legendre;

/// Points sampled in the interior of each arc when measuring cell diameters.
const ARC_DIAMETER_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceKind {
    Straight,
    /// Arc of `geometry` running from the first to the second face vertex;
    /// `theta0` is the angle of the first vertex and `sweep` is signed.
    Arc {
        geometry_id: usize,
        geometry: ArcGeometry,
        theta0: f64,
        sweep: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceClass {
    Interior,
    Boundary,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub id: usize,
    /// Endpoints in the canonical direction: the traversal direction of the
    /// first owner cell's counter-clockwise loop.
    pub vertices: [usize; 2],
    pub endpoints: [Point2; 2],
    pub kind: FaceKind,
    pub class: FaceClass,
    /// Owner cells; the second entry is present for interior faces only.
    pub cells: (usize, Option<usize>),
    /// Arc length.
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.class == FaceClass::Boundary
    }

    pub fn is_straight(&self) -> bool {
        matches!(self.kind, FaceKind::Straight)
    }

    pub fn midpoint(&self) -> Point2 {
        match self.kind {
            FaceKind::Straight => self.endpoints[0].lerp(self.endpoints[1], 0.5),
            FaceKind::Arc { geometry, theta0, sweep, .. } => geometry.point_at(theta0 + 0.5 * sweep),
        }
    }

    /// Unit vector from the first to the second endpoint (straight faces).
    pub fn direction(&self) -> Point2 {
        (self.endpoints[1] - self.endpoints[0]).normalized()
    }

    /// The fixed normal `n_F` at a point of the face.
    pub fn normal_at(&self, p: Point2) -> Point2 {
        match self.kind {
            FaceKind::Straight => -self.direction().rot90(),
            FaceKind::Arc { geometry, sweep, .. } => {
                // Traversing counter-clockwise around the center keeps the
                // owner cell inside the circle.
                let radial = (p - geometry.center).normalized();
                if sweep > 0.0 {
                    radial
                } else {
                    -radial
                }
            }
        }
    }

    /// `(n, t)` at `p`: the stored normal `n_F` and the tangent obtained by
    /// rotating it counter-clockwise by 90 degrees.
    pub fn frame(&self, p: Point2) -> (Point2, Point2) {
        let n = self.normal_at(p);
        (n, n.rot90())
    }

    /// Scaled arc-length coordinate in [-1/2, 1/2] of a point on a straight face.
    pub fn local_coordinate(&self, p: Point2) -> f64 {
        (p - self.midpoint()).dot(self.direction()) / self.length
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub id: usize,
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    /// Faces in loop order: face `i` joins `vertices[i]` and `vertices[i + 1]`.
    pub faces: Vec<usize>,
    /// `n_F . n_K` for each face in `faces`.
    pub signs: Vec<f64>,
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
    pub boundary: bool,
}

impl Cell {
    pub fn local_faces(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.faces.iter().copied().zip(self.signs.iter().copied())
    }
}

/// Raw mesh description: vertex coordinates, circles, counter-clockwise
/// vertex loops, and the edges that are arcs.
#[derive(Clone, Debug, Default)]
pub struct MeshDescription {
    pub vertices: Vec<Point2>,
    pub geometries: Vec<ArcGeometry>,
    pub cells: Vec<Vec<usize>>,
    /// `(va, vb, geometry)`: the edge `va -> vb` is the minor arc of the circle.
    pub arcs: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub vertices: Vec<Point2>,
    pub geometries: Vec<ArcGeometry>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
}

/// A piece of a cell boundary, oriented along the counter-clockwise loop.
#[derive(Clone, Copy, Debug)]
pub enum BoundaryPiece {
    Segment(Point2, Point2),
    Arc { geometry: ArcGeometry, theta0: f64, theta1: f64 },
}

impl BoundaryPiece {
    pub fn start(&self) -> Point2 {
        match *self {
            BoundaryPiece::Segment(a, _) => a,
            BoundaryPiece::Arc { geometry, theta0, .. } => geometry.point_at(theta0),
        }
    }

    pub fn end(&self) -> Point2 {
        match *self {
            BoundaryPiece::Segment(_, b) => b,
            BoundaryPiece::Arc { geometry, theta1, .. } => geometry.point_at(theta1),
        }
    }

    /// Point and derivative with respect to the unit parameter `s` in [0, 1].
    pub fn eval(&self, s: f64) -> (Point2, Point2) {
        match *self {
            BoundaryPiece::Segment(a, b) => (a.lerp(b, s), b - a),
            BoundaryPiece::Arc { geometry, theta0, theta1 } => {
                let th = theta0 + s * (theta1 - theta0);
                (geometry.point_at(th), geometry.tangent_at(th) * (theta1 - theta0))
            }
        }
    }
}

impl Mesh2D {
    pub fn build(desc: MeshDescription) -> Result<Self> {
        let MeshDescription { vertices, geometries, cells: loops, arcs } = desc;
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(HhoError::Geometry(format!("vertex {i} has non-finite coordinates")));
        }
        for (g, geo) in geometries.iter().enumerate() {
            if !(geo.radius > 0.0) || !geo.center.is_finite() {
                return Err(HhoError::Geometry(format!("circle {g} must have a positive radius")));
            }
        }

        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut cells: Vec<Cell> = Vec::with_capacity(loops.len());

        for (c, lp) in loops.iter().enumerate() {
            let m = lp.len();
            if m < 3 {
                return Err(HhoError::Topology(format!("cell {c} has fewer than three vertices")));
            }
            for (i, &v) in lp.iter().enumerate() {
                if v >= vertices.len() {
                    return Err(HhoError::Topology(format!("cell {c} references unknown vertex {v}")));
                }
                if lp[..i].contains(&v) {
                    return Err(HhoError::Topology(format!(
                        "cell {c} has an open or non-simple vertex loop (vertex {v} repeats)"
                    )));
                }
            }
            let mut cell_faces = Vec::with_capacity(m);
            let mut signs = Vec::with_capacity(m);
            for i in 0..m {
                let (va, vb) = (lp[i], lp[(i + 1) % m]);
                let key = (va.min(vb), va.max(vb));
                match edge_map.get(&key) {
                    None => {
                        let id = faces.len();
                        edge_map.insert(key, id);
                        let (a, b) = (vertices[va], vertices[vb]);
                        faces.push(Face {
                            id,
                            vertices: [va, vb],
                            endpoints: [a, b],
                            kind: FaceKind::Straight,
                            class: FaceClass::Boundary,
                            cells: (c, None),
                            length: a.dist(b),
                        });
                        cell_faces.push(id);
                        signs.push(1.0);
                    }
                    Some(&id) => {
                        let f = &mut faces[id];
                        if f.cells.1.is_some() {
                            return Err(HhoError::Topology(format!(
                                "edge {va}-{vb} is shared by more than two cells"
                            )));
                        }
                        if f.vertices != [vb, va] {
                            return Err(HhoError::Topology(format!(
                                "cells {} and {c} traverse edge {va}-{vb} in the same direction",
                                f.cells.0
                            )));
                        }
                        if f.cells.0 == c {
                            return Err(HhoError::Topology(format!("cell {c} uses edge {va}-{vb} twice")));
                        }
                        f.cells.1 = Some(c);
                        f.class = FaceClass::Interior;
                        cell_faces.push(id);
                        signs.push(-1.0);
                    }
                }
            }
            cells.push(Cell {
                id: c,
                vertices: lp.clone(),
                faces: cell_faces,
                signs,
                area: 0.0,
                centroid: Point2::default(),
                diameter: 0.0,
                boundary: false,
            });
        }

        // Boundary edges must close up into loops.
        let mut bdeg = vec![0usize; vertices.len()];
        for f in faces.iter().filter(|f| f.is_boundary()) {
            bdeg[f.vertices[0]] += 1;
            bdeg[f.vertices[1]] += 1;
        }
        if let Some(v) = bdeg.iter().position(|d| d % 2 == 1) {
            return Err(HhoError::Topology(format!("dangling boundary edge at vertex {v}")));
        }

        for &(va, vb, g) in &arcs {
            let key = (va.min(vb), va.max(vb));
            let Some(&id) = edge_map.get(&key) else {
                return Err(HhoError::Topology(format!("arc {va}->{vb} is not an edge of any cell")));
            };
            let geometry = *geometries
                .get(g)
                .ok_or_else(|| HhoError::Topology(format!("arc {va}->{vb} references unknown circle {g}")))?;
            let f = &mut faces[id];
            if !f.is_boundary() {
                return Err(HhoError::Topology(format!(
                    "arc {va}->{vb} lies on an interior face; interior faces must be straight"
                )));
            }
            for p in f.endpoints {
                if geometry.distance(p).abs() > 1e-12 * geometry.radius {
                    return Err(HhoError::Geometry(format!(
                        "arc {va}->{vb}: endpoint ({}, {}) is off circle {g}",
                        p.x, p.y
                    )));
                }
            }
            let [a, b] = f.endpoints;
            let sweep = geometry.minor_sweep(a, b);
            f.kind = FaceKind::Arc { geometry_id: g, geometry, theta0: geometry.angle_of(a), sweep };
            f.length = geometry.radius * sweep.abs();
        }

        let mut mesh = Mesh2D { vertices, geometries, faces, cells };
        mesh.compute_metrics()?;
        Ok(mesh)
    }

    fn compute_metrics(&mut self) -> Result<()> {
        let (gx, gw) = gauss_legendre(16);
        for c in 0..self.cells.len() {
            let pieces = self.boundary_pieces(c, 1);
            let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
            for piece in &pieces {
                for (&s, &w) in gx.iter().zip(gw) {
                    let (p, d) = piece.eval(s);
                    a += w * p.x * d.y;
                    mx += w * 0.5 * p.x * p.x * d.y;
                    my -= w * 0.5 * p.y * p.y * d.x;
                }
            }
            if !(a > 0.0) {
                return Err(HhoError::Topology(format!(
                    "cell {c} has non-positive area {a:e}; loops must be counter-clockwise"
                )));
            }
            if !self.loop_is_simple(c) {
                return Err(HhoError::Topology(format!("cell {c} boundary self-intersects")));
            }
            let mut samples: Vec<Point2> = Vec::new();
            for piece in &pieces {
                samples.push(piece.start());
                if let BoundaryPiece::Arc { .. } = piece {
                    let n = ARC_DIAMETER_SAMPLES;
                    samples.extend((1..=n).map(|j| piece.eval(j as f64 / (n + 1) as f64).0));
                }
            }
            let mut diam: f64 = 0.0;
            for i in 0..samples.len() {
                for j in i + 1..samples.len() {
                    diam = diam.max(samples[i].dist(samples[j]));
                }
            }
            let boundary = self.cells[c].faces.iter().any(|&f| self.faces[f].is_boundary());
            let cell = &mut self.cells[c];
            cell.area = a;
            cell.centroid = Point2::new(mx / a, my / a);
            cell.diameter = diam;
            cell.boundary = boundary;
        }
        Ok(())
    }

    fn loop_is_simple(&self, c: usize) -> bool {
        let pts: Vec<Point2> = self.cells[c].vertices.iter().map(|&v| self.vertices[v]).collect();
        let m = pts.len();
        let seg = |i: usize| (pts[i], pts[(i + 1) % m]);
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let (p, q) = seg(i);
                let (r, s) = seg(j);
                let d1 = (q - p).cross(r - p);
                let d2 = (q - p).cross(s - p);
                let d3 = (s - r).cross(p - r);
                let d4 = (s - r).cross(q - r);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    /// `max_K h_K`.
    pub fn h_max(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Boundary of a cell as oriented pieces; each arc is split into
    /// `arc_splits` equal sub-arcs.
    pub fn boundary_pieces(&self, c: usize, arc_splits: usize) -> Vec<BoundaryPiece> {
        (0..self.cells[c].faces.len()).flat_map(|i| self.local_face_pieces(c, i, arc_splits)).collect()
    }

    /// Pieces of the `i`-th face of cell `c`, oriented along the cell loop.
    pub fn local_face_pieces(&self, c: usize, i: usize, arc_splits: usize) -> Vec<BoundaryPiece> {
        let cell = &self.cells[c];
        let (face, s) = (&self.faces[cell.faces[i]], cell.signs[i]);
        match face.kind {
            FaceKind::Straight => {
                let [a, b] = face.endpoints;
                vec![if s > 0.0 { BoundaryPiece::Segment(a, b) } else { BoundaryPiece::Segment(b, a) }]
            }
            FaceKind::Arc { geometry, theta0, sweep, .. } => {
                let (t0, t1) = if s > 0.0 { (theta0, theta0 + sweep) } else { (theta0 + sweep, theta0) };
                let n = arc_splits.max(1);
                (0..n)
                    .map(|j| BoundaryPiece::Arc {
                        geometry,
                        theta0: t0 + (t1 - t0) * j as f64 / n as f64,
                        theta1: t0 + (t1 - t0) * (j + 1) as f64 / n as f64,
                    })
                    .collect()
            }
        }
    }

    /// Cells sharing a face with `c`.
    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[c].faces.iter().filter_map(move |&f| {
            let (a, b) = self.faces[f].cells;
            b.map(|b| if a == c { b } else { a })
        })
    }
}

/// `(n, t)` at a point of a face; see [`Face::frame`].
pub fn face_frame(face: &Face, p: Point2) -> (Point2, Point2) {
    face.frame(p)
}
