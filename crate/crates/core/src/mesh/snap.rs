use super::{Mesh2D, MeshDescription};
use crate::error::{HhoError, Result};
use crate::geometry::ArcGeometry;

/// Projects every boundary vertex radially onto the unique circle within
/// `tol` of it, and turns every boundary face whose endpoints land on the
/// same circle into an arc of that circle.
///
/// The returned mesh carries `geoms` as its geometry list. Interior vertices
/// are left untouched.
pub fn snap_boundary_to_arcs(mesh: &Mesh2D, geoms: &[ArcGeometry], tol: f64) -> Result<Mesh2D> {
    let mut vertices = mesh.vertices.clone();
    let mut owner: Vec<Option<usize>> = vec![None; vertices.len()];
    let boundary_vertices = mesh
        .faces
        .iter()
        .filter(|f| f.is_boundary())
        .flat_map(|f| f.vertices)
        .collect::<std::collections::BTreeSet<_>>();

    for &v in &boundary_vertices {
        let p = mesh.vertices[v];
        let near: Vec<usize> = (0..geoms.len()).filter(|&g| geoms[g].distance(p).abs() <= tol).collect();
        match near.as_slice() {
            [g] => {
                let geo = &geoms[*g];
                vertices[v] = geo.center + (p - geo.center).normalized() * geo.radius;
                owner[v] = Some(*g);
            }
            [] => {
                return Err(HhoError::Geometry(format!(
                    "boundary vertex {v} at ({}, {}) is not within {tol:e} of any circle",
                    p.x, p.y
                )))
            }
            _ => {
                return Err(HhoError::Geometry(format!(
                    "boundary vertex {v} is within {tol:e} of circles {near:?}; snapping is ambiguous"
                )))
            }
        }
    }

    let mut arcs = Vec::new();
    for f in mesh.faces.iter().filter(|f| f.is_boundary()) {
        let [a, b] = f.vertices;
        match (owner[a], owner[b]) {
            (Some(ga), Some(gb)) if ga == gb => arcs.push((a, b, ga)),
            _ => {
                return Err(HhoError::Geometry(format!(
                    "boundary face {} joins vertices on different circles",
                    f.id
                )))
            }
        }
    }

    Mesh2D::build(MeshDescription {
        vertices,
        geometries: geoms.to_vec(),
        cells: mesh.cells.iter().map(|c| c.vertices.clone()).collect(),
        arcs,
    })
}

/// Default snapping tolerance: `1e-8` times the diameter of the vertex cloud.
pub fn default_snap_tolerance(mesh: &Mesh2D) -> f64 {
    let (mut lo, mut hi) = (mesh.vertices[0], mesh.vertices[0]);
    for p in &mesh.vertices {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    1e-8 * lo.dist(hi)
}
