//! Global numbering, cellwise assembly with static condensation of the cell
//! unknowns, the condensed solve, and recovery of the full discrete solution.

use std::ops::Range;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::basis::{dim2, CellBasis};
use crate::cases::ManufacturedCase;
use crate::error::{HhoError, Result};
use crate::geometry::Point2;
use crate::linalg::{self, CondMethod, LanczosOptions, SparseMatrix};
use crate::local::{CellData, LocalOperatorSet, LocalOptions};
use crate::mesh::Mesh2D;

/// Numbering of the face unknowns (condensed system) followed by the cell
/// unknowns (used only by the uncondensed system).
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub k: usize,
    face_offset: Vec<Option<usize>>,
    pub n_face_dofs: usize,
    pub n_cell_dofs: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, k: usize) -> Self {
        let mut next = 0;
        let face_offset = mesh
            .faces
            .iter()
            .map(|f| {
                (!f.is_boundary()).then(|| {
                    let o = next;
                    next += Self::face_block(k);
                    o
                })
            })
            .collect();
        Self { k, face_offset, n_face_dofs: next, n_cell_dofs: mesh.cells.len() * dim2(k + 2) }
    }

    /// Unknowns per interior face: `k + 3` trace and `k + 1` normal coefficients.
    pub const fn face_block(k: usize) -> usize {
        2 * k + 4
    }

    pub fn n_cell_block(&self) -> usize {
        dim2(self.k + 2)
    }

    pub fn trace_range(&self, f: usize) -> Option<Range<usize>> {
        self.face_offset[f].map(|o| o..o + self.k + 3)
    }

    pub fn normal_range(&self, f: usize) -> Option<Range<usize>> {
        self.face_offset[f].map(|o| o + self.k + 3..o + Self::face_block(self.k))
    }

    /// Offset of the cell block in the uncondensed numbering.
    pub fn cell_range(&self, c: usize) -> Range<usize> {
        let o = self.n_face_dofs + c * self.n_cell_block();
        o..o + self.n_cell_block()
    }

    /// Global index of every face unknown of a cell, in local order.
    pub fn local_face_indices(&self, cd: &CellData) -> Vec<usize> {
        let mut g = Vec::with_capacity(cd.size - cd.n_cell);
        for f in cd.faces.iter().filter(|f| f.dofs.is_some()) {
            let o = self.face_offset[f.face].expect("interior face without global unknowns");
            g.extend(o..o + Self::face_block(self.k));
        }
        g
    }
}

#[derive(Clone, Debug, Default)]
pub struct AssemblyOptions {
    pub local: LocalOptions,
    /// Build local operators on the calling thread only.
    pub serial: bool,
}

/// A cell polynomial on its own basis: `R^i_K(û_K) + L_K` after a solve.
#[derive(Clone, Debug)]
pub struct CellField {
    pub basis: CellBasis,
    pub coeffs: DVector<f64>,
}

impl CellField {
    pub fn value(&self, p: Point2) -> f64 {
        self.basis.evaluate(&self.coeffs, p)
    }

    /// Rows: value, derivatives in the basis derivative order up to `max_deriv`.
    pub fn derivatives(&self, p: Point2, max_deriv: usize) -> DVector<f64> {
        self.basis.eval(p, max_deriv) * &self.coeffs
    }
}

/// Data kept per cell to recover the eliminated cell unknowns.
#[derive(Clone, Debug)]
struct CellRecovery {
    a_tt: Cholesky<f64, Dyn>,
    a_tf: DMatrix<f64>,
    b_t: DVector<f64>,
    global: Vec<usize>,
    basis: CellBasis,
    r: DMatrix<f64>,
    lift: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub k: usize,
    pub eps: f64,
    pub dofmap: DofMap,
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    cells: Vec<CellRecovery>,
    pub assembly_ms: f64,
}

struct CellOutput {
    schur: DMatrix<f64>,
    g: DVector<f64>,
    recovery: CellRecovery,
}

fn for_each_cell<T: Send>(n: usize, serial: bool, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if serial {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect::<Vec<_>>().into_iter().collect()
    }
}

fn condense(ops: &LocalOperatorSet, case: &ManufacturedCase, dofmap: &DofMap) -> Result<CellOutput> {
    let cd = &ops.data;
    let (nt, nf) = (cd.n_cell, cd.size - cd.n_cell);
    let b = ops.rhs(case);
    let a_tt = ops.a.view((0, 0), (nt, nt)).into_owned();
    let a_tt = Cholesky::new(a_tt).ok_or_else(|| HhoError::LocalSolve {
        cell: cd.cell,
        msg: "cell block is not positive definite".into(),
    })?;
    let a_tf = ops.a.view((0, nt), (nt, nf)).into_owned();
    let b_t = b.rows(0, nt).into_owned();
    let x = a_tt.solve(&a_tf);
    let y = a_tt.solve(&b_t);
    let a_ft = ops.a.view((nt, 0), (nf, nt));
    let mut schur = ops.a.view((nt, nt), (nf, nf)) - a_ft * &x;
    schur = (&schur + schur.transpose()) * 0.5;
    let g = b.rows(nt, nf) - a_ft * &y;
    let recovery = CellRecovery {
        a_tt,
        a_tf,
        b_t,
        global: dofmap.local_face_indices(cd),
        basis: cd.basis.clone(),
        r: ops.r.clone(),
        lift: ops.lifting(case)?,
    };
    Ok(CellOutput { schur, g, recovery })
}

/// Assembles the condensed system over the face unknowns.
pub fn assemble(
    mesh: &Mesh2D,
    k: usize,
    eps: f64,
    case: &ManufacturedCase,
    opts: &AssemblyOptions,
) -> Result<CondensedSystem> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(HhoError::InvalidInput(format!("eps must be finite and non-negative, got {eps}")));
    }
    let start = Instant::now();
    let dofmap = DofMap::new(mesh, k);
    let outputs = for_each_cell(mesh.cells.len(), opts.serial, |c| {
        let ops = LocalOperatorSet::build(mesh, c, k, eps, &opts.local)?;
        condense(&ops, case, &dofmap)
    })?;
    let n = dofmap.n_face_dofs;
    let mut triplets = Vec::with_capacity(outputs.iter().map(|o| o.schur.len()).sum());
    let mut rhs = vec![0.0; n];
    for o in &outputs {
        let gl = &o.recovery.global;
        for (j, &gj) in gl.iter().enumerate() {
            rhs[gj] += o.g[j];
            for (i, &gi) in gl.iter().enumerate() {
                triplets.push((gi, gj, o.schur[(i, j)]));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(n, &triplets)?;
    let cells = outputs.into_iter().map(|o| o.recovery).collect();
    let assembly_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(CondensedSystem { k, eps, dofmap, matrix, rhs, cells, assembly_ms })
}

/// Assembles the full system over face and cell unknowns without
/// condensation, numbered as in [`DofMap`].
pub fn assemble_uncondensed(
    mesh: &Mesh2D,
    k: usize,
    eps: f64,
    case: &ManufacturedCase,
    opts: &AssemblyOptions,
) -> Result<(SparseMatrix, Vec<f64>, DofMap)> {
    let dofmap = DofMap::new(mesh, k);
    let locals = for_each_cell(mesh.cells.len(), opts.serial, |c| {
        let ops = LocalOperatorSet::build(mesh, c, k, eps, &opts.local)?;
        let b = ops.rhs(case);
        let mut gl: Vec<usize> = dofmap.cell_range(c).collect();
        gl.extend(dofmap.local_face_indices(&ops.data));
        Ok((ops.a, b, gl))
    })?;
    let n = dofmap.n_face_dofs + dofmap.n_cell_dofs;
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n];
    for (a, b, gl) in &locals {
        for (j, &gj) in gl.iter().enumerate() {
            rhs[gj] += b[j];
            for (i, &gi) in gl.iter().enumerate() {
                triplets.push((gi, gj, a[(i, j)]));
            }
        }
    }
    Ok((SparseMatrix::from_triplets(n, &triplets)?, rhs, dofmap))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub solver: SolverKind,
    /// Bound on `‖A x - b‖ / ‖b‖` for the condensed system.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { solver: SolverKind::Direct, tol: 1e-10, max_iter: 100_000 }
    }
}

/// Discrete solution: cell and face coefficients plus the post-processed
/// field on every cell.
#[derive(Clone, Debug)]
pub struct HhoSolution {
    pub k: usize,
    pub eps: f64,
    pub dofmap: DofMap,
    pub cell: Vec<DVector<f64>>,
    pub face: Vec<f64>,
    pub reconstructed: Vec<CellField>,
    pub residual: f64,
    pub solve_ms: f64,
}

impl HhoSolution {
    pub fn trace(&self, f: usize) -> Option<&[f64]> {
        self.dofmap.trace_range(f).map(|r| &self.face[r])
    }

    pub fn normal(&self, f: usize) -> Option<&[f64]> {
        self.dofmap.normal_range(f).map(|r| &self.face[r])
    }

    pub fn num_dofs(&self) -> usize {
        self.face.len()
    }
}

impl CondensedSystem {
    pub fn size(&self) -> usize {
        self.dofmap.n_face_dofs
    }

    /// Recovers the full solution from given face unknowns.
    pub fn recover(&self, face: Vec<f64>, residual: f64, solve_ms: f64) -> HhoSolution {
        let mut cell = Vec::with_capacity(self.cells.len());
        let mut reconstructed = Vec::with_capacity(self.cells.len());
        for rc in &self.cells {
            let xf = DVector::from_iterator(rc.global.len(), rc.global.iter().map(|&g| face[g]));
            let xt = rc.a_tt.solve(&(&rc.b_t - &rc.a_tf * &xf));
            let mut local = DVector::zeros(xt.len() + xf.len());
            local.rows_mut(0, xt.len()).copy_from(&xt);
            local.rows_mut(xt.len(), xf.len()).copy_from(&xf);
            let coeffs = &rc.r * local + &rc.lift;
            reconstructed.push(CellField { basis: rc.basis.clone(), coeffs });
            cell.push(xt);
        }
        HhoSolution { k: self.k, eps: self.eps, dofmap: self.dofmap.clone(), cell, face, reconstructed, residual, solve_ms }
    }

    pub fn condition_number(&self, method: CondMethod) -> Result<f64> {
        linalg::condition_number(&self.matrix, method, &LanczosOptions::default())
    }
}

/// Solves the condensed system and recovers the cell unknowns.
pub fn solve(system: &CondensedSystem, opts: &SolveOptions) -> Result<HhoSolution> {
    let start = Instant::now();
    let (x, residual) = match opts.solver {
        SolverKind::Direct => linalg::solve_direct(&system.matrix, &system.rhs, opts.tol)?,
        SolverKind::Cg => {
            let (x, _) = linalg::solve_pcg(&system.matrix, &system.rhs, opts.tol * 0.1, opts.max_iter)?;
            let res = linalg::relative_residual(&system.matrix, &x, &system.rhs);
            if res > opts.tol {
                return Err(HhoError::Convergence(format!("conjugate gradients stopped at relative residual {res:.3e}")));
            }
            (x, res)
        }
    };
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(system.recover(x, residual, solve_ms))
}
