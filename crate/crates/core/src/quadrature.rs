//! Gauss rules on cells (fan sub-triangulation with exact curved edges) and
//! on straight or circular faces.

use std::sync::OnceLock;

use crate::error::{HhoError, Result};
use crate::geometry::Point2;
use crate::mesh::{BoundaryPiece, Face, FaceKind, Mesh2D};

const MAX_GAUSS_NODES: usize = 64;

/// Default number of sub-arcs used for each curved face in cell rules.
pub const DEFAULT_SUBEDGES: usize = 30;

/// Gauss-Legendre nodes and weights on [0, 1] with `n` points (1 <= n <= 64).
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    assert!((1..=MAX_GAUSS_NODES).contains(&n), "unsupported Gauss rule size {n}");
    let table = TABLE.get_or_init(|| (1..=MAX_GAUSS_NODES).map(compute_gauss_legendre).collect());
    let (x, w) = &table[n - 1];
    (x, w)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Points with measure-weighted weights.
///
/// For face rules `params` holds the scaled arc-length coordinate in
/// [-1/2, 1/2] (straight faces) or the polar angle (arcs); cell rules leave it
/// empty.
#[derive(Clone, Debug, Default)]
pub struct QuadRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub params: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

fn nodes_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Collapsed fan rule over the region swept by `apex + rho (piece(s) - apex)`.
/// Returns `false` if the Jacobian is not positive at every node.
fn push_fan(rule: &mut QuadRule, apex: Point2, piece: &BoundaryPiece, degree: usize) -> bool {
    let (n_rho, n_s) = match piece {
        BoundaryPiece::Segment(..) => (nodes_for(degree + 1), nodes_for(degree)),
        BoundaryPiece::Arc { .. } => (nodes_for(degree + 1), (degree + 7) / 2),
    };
    let (xr, wr) = gauss_legendre(n_rho);
    let (xs, ws) = gauss_legendre(n_s);
    for (&s, &w_s) in xs.iter().zip(ws) {
        let (g, dg) = piece.eval(s);
        let jac = (g - apex).cross(dg);
        if !(jac > 0.0) {
            return false;
        }
        for (&r, &w_r) in xr.iter().zip(wr) {
            rule.points.push(apex + (g - apex) * r);
            rule.weights.push(w_s * w_r * r * jac);
        }
    }
    true
}

fn fan_rule(apex: Point2, pieces: &[BoundaryPiece], degree: usize, rule: &mut QuadRule) -> bool {
    let mark = rule.len();
    for piece in pieces {
        if !push_fan(rule, apex, piece, degree) {
            rule.points.truncate(mark);
            rule.weights.truncate(mark);
            return false;
        }
    }
    true
}

fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let m = pts.len();
    let (mut a, mut c) = (0.0, Point2::default());
    for i in 0..m {
        let (p, q) = (pts[i], pts[(i + 1) % m]);
        let cr = p.cross(q);
        a += cr;
        c += (p + q) * cr;
    }
    if a.abs() > 0.0 {
        c * (1.0 / (3.0 * a))
    } else {
        pts.iter().fold(Point2::default(), |s, &p| s + p) * (1.0 / m as f64)
    }
}

/// Cell rule exact for polynomials of total degree `degree` on straight-edged
/// cells. Every boundary piece is fanned to the cell centroid; arcs are cut into
/// `n_subedges` sub-arcs and kept exactly curved. When the centroid fan is not
/// valid the chord polygon is ear-clipped and each ear is fanned from its own
/// centroid.
pub fn cell_quadrature(mesh: &Mesh2D, c: usize, degree: usize, n_subedges: usize) -> Result<QuadRule> {
    let mut rule = QuadRule { degree, ..Default::default() };
    let pieces = mesh.boundary_pieces(c, n_subedges);
    if fan_rule(mesh.cells[c].centroid, &pieces, degree, &mut rule) {
        return Ok(rule);
    }
    let cell = &mesh.cells[c];
    let m = cell.vertices.len();
    let loc: Vec<Point2> = cell.vertices.iter().map(|&v| mesh.vertices[v]).collect();
    let mut remaining: Vec<usize> = (0..m).collect();
    // Pieces between loop positions `a` and `b`: the face itself when they are
    // consecutive, otherwise a straight diagonal.
    let side = |a: usize, b: usize| -> Vec<BoundaryPiece> {
        if b == (a + 1) % m {
            mesh.local_face_pieces(c, a, n_subedges)
        } else {
            vec![BoundaryPiece::Segment(loc[a], loc[b])]
        }
    };
    while remaining.len() >= 3 {
        let r = remaining.len();
        let mut clipped = false;
        for j in 0..r {
            let (a, b, d) = (remaining[(j + r - 1) % r], remaining[j], remaining[(j + 1) % r]);
            let tri = [loc[a], loc[b], loc[d]];
            if (tri[1] - tri[0]).cross(tri[2] - tri[0]) <= 0.0 {
                continue;
            }
            let contains_other = remaining.iter().any(|&o| {
                o != a && o != b && o != d && {
                    let p = loc[o];
                    (0..3).all(|e| (tri[(e + 1) % 3] - tri[e]).cross(p - tri[e]) >= 0.0)
                }
            });
            if contains_other && r > 3 {
                continue;
            }
            let mut ear = side(a, b);
            ear.extend(side(b, d));
            ear.extend(side(d, a));
            if !fan_rule(polygon_centroid(&tri), &ear, degree, &mut rule) {
                continue;
            }
            remaining.remove(j);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(HhoError::Geometry(format!(
                "cell {c}: no valid sub-triangulation (fan has a non-positive Jacobian)"
            )));
        }
        if remaining.len() == 2 {
            break;
        }
    }
    Ok(rule)
}

/// Face rule exact for polynomials of degree `degree` in arc length on
/// straight faces; arcs use Gauss nodes in the angle with weight `r dθ`,
/// `ceil((degree + 6) / 2)` nodes per piece of at most a quarter of pi.
pub fn face_quadrature(face: &Face, degree: usize) -> QuadRule {
    let mut rule = QuadRule { degree, ..Default::default() };
    match face.kind {
        FaceKind::Straight => {
            let (x, w) = gauss_legendre(nodes_for(degree));
            let [a, b] = face.endpoints;
            for (&s, &ws) in x.iter().zip(w) {
                rule.points.push(a.lerp(b, s));
                rule.weights.push(ws * face.length);
                rule.params.push(s - 0.5);
            }
        }
        FaceKind::Arc { geometry, theta0, sweep, .. } => {
            let pieces = (sweep.abs() / std::f64::consts::FRAC_PI_4).ceil().max(1.0) as usize;
            let (x, w) = gauss_legendre((degree + 7) / 2);
            let h = sweep / pieces as f64;
            for p in 0..pieces {
                for (&s, &ws) in x.iter().zip(w) {
                    let th = theta0 + h * (p as f64 + s);
                    rule.points.push(geometry.point_at(th));
                    rule.weights.push(ws * geometry.radius * h.abs());
                    rule.params.push(th);
                }
            }
        }
    }
    rule
}
