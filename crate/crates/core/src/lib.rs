pub mod error;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod basis;
pub mod cases;
pub mod jet;
pub mod local;
pub mod linalg;
pub mod assembly;
pub mod analysis;
pub mod poisson;
pub mod checks;

pub use error::{HhoError, Result};
pub use geometry::{ArcGeometry, Point2};
pub use mesh::Mesh2D;

/// Keeps factorizations and cell loops on a single thread. Takes full effect
/// only when called before any parallel work has started.
pub fn use_serial_execution() {
    faer::set_global_parallelism(faer::Par::Seq);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
}
