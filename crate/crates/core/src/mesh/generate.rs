use super::{Mesh2D, MeshDescription};
use crate::geometry::Point2;

/// Uniform `n x n` mesh of the unit square made of square cells.
///
/// Cell `(i, j)` (column `i`, row `j`) has id `j * n + i`.
pub fn build_rect_mesh(n: usize) -> Mesh2D {
    assert!(n >= 1, "a rectangular mesh needs at least one cell per side");
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    Mesh2D::build(MeshDescription { vertices, cells, ..Default::default() })
        .expect("structured square mesh is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts edges by brute-force enumeration of all cell sides.
    fn count_edges(n: usize) -> (usize, usize) {
        let mut seen = std::collections::HashMap::new();
        for j in 0..n {
            for i in 0..n {
                let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                for k in 0..4 {
                    let (a, b) = (c[k], c[(k + 1) % 4]);
                    *seen.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
            }
        }
        let interior = seen.values().filter(|&&v| v == 2).count();
        (seen.len(), interior)
    }

    #[test]
    fn counts_match_enumeration() {
        for n in [1, 2, 4, 7] {
            let m = build_rect_mesh(n);
            let (total, interior) = count_edges(n);
            assert_eq!(m.num_cells(), n * n);
            assert_eq!(m.faces.len(), total);
            assert_eq!(m.num_interior_faces(), interior);
        }
        let m = build_rect_mesh(4);
        assert_eq!((m.faces.len(), m.num_interior_faces()), (40, 24));
        assert_eq!(build_rect_mesh(16).num_cells(), 256);
        let one = build_rect_mesh(1);
        assert_eq!((one.num_cells(), one.faces.len(), one.num_interior_faces()), (1, 4, 0));
    }

    #[test]
    fn interior_faces_carry_opposite_signs() {
        let m = build_rect_mesh(3);
        for f in m.faces.iter().filter(|f| !f.is_boundary()) {
            let (a, b) = (f.cells.0, f.cells.1.unwrap());
            assert!(a < b);
            let sa = m.cells[a].local_faces().find(|&(g, _)| g == f.id).unwrap().1;
            let sb = m.cells[b].local_faces().find(|&(g, _)| g == f.id).unwrap().1;
            assert_eq!(sa, 1.0);
            assert_eq!(sb, -1.0);
        }
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }
}
