use std::path::PathBuf;

use hho_core::assembly::{assemble, solve, AssemblyOptions, SolveOptions};
use hho_core::cases::{Domain, ManufacturedCase};
use hho_core::mesh::{load_mesh, Mesh2D};

fn shipped(name: &str) -> Mesh2D {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../meshes").join(name);
    load_mesh(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn annulus_family_is_curved_on_the_boundary_only() {
    let mut prev_h = f64::INFINITY;
    for level in 0..3 {
        let mesh = shipped(&format!("annulus_{level}.msh"));
        for f in &mesh.faces {
            assert_eq!(f.is_boundary(), !f.is_straight(), "face {}", f.id);
        }
        let rel = (mesh.total_area() - Domain::Annulus.area()).abs() / Domain::Annulus.area();
        assert!(rel < 1e-8, "level {level}: area error {rel:.2e}");
        assert!(mesh.h_max() < prev_h);
        prev_h = mesh.h_max();
    }
}

#[test]
fn voronoi_fixtures_tile_the_unit_square() {
    for n in [64, 256] {
        let mesh = shipped(&format!("voronoi_{n}.msh"));
        assert_eq!(mesh.cells.len(), n);
        assert!((mesh.total_area() - 1.0).abs() < 1e-8);
        assert!(mesh.faces.iter().all(|f| f.is_straight()));
        assert!(mesh.cells.iter().any(|c| c.faces.len() > 4));
    }
}

#[test]
fn smooth_annulus_solution_is_accurate_on_the_coarsest_mesh() {
    let mesh = shipped("annulus_0.msh");
    let case = ManufacturedCase::by_name("smooth-annulus", 1).unwrap();
    for eps in [0.0, 1.0] {
        let sys = assemble(&mesh, 1, eps, &case, &AssemblyOptions::default()).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        let e = hho_core::analysis::solution_errors(&mesh, &sol, &case, Default::default()).unwrap();
        assert!(e.energy() < 0.1, "eps={eps}: {}", e.energy());
    }
}
