//! Reference solver for the pure second-order problem `-Δu = f`.
//!
//! Builds the same discretization with every `eps` contribution removed and
//! solves the full cell-plus-face system without condensation. Only geometry,
//! quadrature and bases are shared with the main local operators, so
//! agreement at `eps = 0` checks that the fourth-order blocks vanish cleanly.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{CellField, DofMap};
use crate::basis::{d, CellBasis, FaceBasis};
use crate::cases::ManufacturedCase;
use crate::error::{HhoError, Result};
use crate::linalg::{self, SparseMatrix};
use crate::local::{CellData, LocalOptions};
use crate::mesh::Mesh2D;
use crate::quadrature::{cell_quadrature, DEFAULT_SUBEDGES};

/// Reconstructed fields of the reference solution, one per cell.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub fields: Vec<CellField>,
    pub residual: f64,
}

struct PoissonCell {
    a: DMatrix<f64>,
    b: DVector<f64>,
    r: DMatrix<f64>,
    lift: DVector<f64>,
    global: Vec<usize>,
    basis: CellBasis,
}

fn mean_free_solve(cd: &CellData, g: &DMatrix<f64>, rhs: &DMatrix<f64>, mean: &DVector<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cd.n_cell;
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(g);
    k.view_mut((0, n), (n, 1)).copy_from(mean);
    k.view_mut((n, 0), (1, n)).copy_from(&mean.transpose());
    let mut full = DMatrix::zeros(n + 1, rhs.ncols());
    full.view_mut((0, 0), (n, rhs.ncols())).copy_from(rhs);
    full.view_mut((n, 0), (1, rhs.ncols())).copy_from(target);
    let x = k.lu().solve(&full).ok_or_else(|| HhoError::LocalSolve {
        cell: cd.cell,
        msg: "singular Poisson reconstruction system".into(),
    })?;
    Ok(x.rows(0, n).into_owned())
}

fn poisson_cell(mesh: &Mesh2D, c: usize, k: usize, case: &ManufacturedCase, opts: &LocalOptions, dofmap: &DofMap) -> Result<PoissonCell> {
    let cd = CellData::new(mesh, c, k, opts)?;
    let (n, size, h) = (cd.n_cell, cd.size, cd.h);
    let (finv, flin) = opts.hp.factors(k);

    let mut g = DMatrix::zeros(n, n);
    let mut mean = DVector::zeros(n);
    let mut load = DVector::zeros(n);
    for (&p, &w) in cd.quad.points.iter().zip(&cd.quad.weights) {
        let t = cd.basis.eval(p, 1);
        let (v, gx, gy) = (t.row(d::VAL).transpose(), t.row(d::X).transpose(), t.row(d::Y).transpose());
        g += (&gx * gx.transpose() + &gy * gy.transpose()) * w;
        mean += &v * w;
        load += &v * (w * case.f(p, 0.0));
    }

    // (∇R v, ∇w) = (∇v_K, ∇w) + Σ_F (v_F - v_K, ∂_n w)_F with v_F = 0 on the boundary.
    let mut rhs = DMatrix::zeros(n, size);
    rhs.columns_mut(0, n).copy_from(&g);
    let mut s = DMatrix::zeros(size, size);
    let mut data = DVector::zeros(n);
    for f in &cd.faces {
        let face_dofs = f.dofs;
        let tb = FaceBasis::new(k + 2, f.length);
        let nb = FaceBasis::new(k, f.length);
        let mut mk = DMatrix::zeros(nb.dim(), nb.dim());
        let mut moments = DMatrix::zeros(nb.dim(), n);
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let t = cd.basis.eval(p, 1);
            let nk = f.normals[q];
            let v = t.row(d::VAL).transpose();
            let dn = t.row(d::X).transpose() * nk.x + t.row(d::Y).transpose() * nk.y;
            rhs.columns_mut(0, n).ger(-w, &dn, &v, 1.0);
            match face_dofs {
                Some((ot, _)) => {
                    let psi = tb.values(f.rule.params[q]);
                    rhs.columns_mut(ot, tb.dim()).ger(w, &dn, &psi, 1.0);
                    let mut jump = DVector::zeros(size);
                    jump.rows_mut(0, n).copy_from(&(-&v));
                    jump.rows_mut(ot, tb.dim()).copy_from(&psi);
                    s.ger(w * finv / h, &jump, &jump, 1.0);
                    let chi = nb.values(f.rule.params[q]);
                    mk.ger(w, &chi, &chi, 1.0);
                    moments.ger(w * f.sign, &chi, &dn, 1.0);
                }
                None => {
                    s.view_mut((0, 0), (n, n)).ger(w * finv / h, &v, &v, 1.0);
                    let gd = case.g_d(p);
                    load.axpy(w * finv / h * gd, &v, 1.0);
                    data.axpy(w * gd, &dn, 1.0);
                }
            }
        }
        if let Some((_, on)) = face_dofs {
            // h ‖γ - Π^k(n_F . ∇v_K)‖²_F on the face-local normal basis.
            let proj = mk.clone().lu().solve(&moments).ok_or_else(|| HhoError::LocalSolve {
                cell: c,
                msg: format!("singular mass matrix on face {}", f.face),
            })?;
            let mut map = DMatrix::zeros(nb.dim(), size);
            map.columns_mut(0, n).copy_from(&(-proj));
            map.columns_mut(on, nb.dim()).fill_with_identity();
            s += map.transpose() * &mk * &map * (h * flin);
        }
    }

    let mut target = DMatrix::zeros(1, size);
    target.view_mut((0, 0), (1, n)).copy_from(&mean.transpose());
    let r = mean_free_solve(&cd, &g, &rhs, &mean, &target)?;
    let lift = mean_free_solve(&cd, &g, &DMatrix::from_column_slice(n, 1, data.as_slice()), &mean, &DMatrix::zeros(1, 1))?
        .column(0)
        .into_owned();

    let a = r.transpose() * &g * &r + s;
    let mut b = -(r.transpose() * &data);
    b.rows_mut(0, n).axpy(1.0, &load, 1.0);
    let mut global: Vec<usize> = dofmap.cell_range(c).collect();
    global.extend(dofmap.local_face_indices(&cd));
    Ok(PoissonCell { a: (&a + a.transpose()) * 0.5, b, r, lift, global, basis: cd.basis })
}

/// Solves `-Δu = f` with Nitsche boundary conditions by the scheme restricted
/// to its second-order part, without static condensation.
pub fn solve_poisson_reference(mesh: &Mesh2D, k: usize, case: &ManufacturedCase, opts: &LocalOptions) -> Result<PoissonSolution> {
    let dofmap = DofMap::new(mesh, k);
    let cells = (0..mesh.cells.len())
        .map(|c| poisson_cell(mesh, c, k, case, opts, &dofmap))
        .collect::<Result<Vec<_>>>()?;
    let n = dofmap.n_face_dofs + dofmap.n_cell_dofs;
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n];
    for pc in &cells {
        for (j, &gj) in pc.global.iter().enumerate() {
            rhs[gj] += pc.b[j];
            for (i, &gi) in pc.global.iter().enumerate() {
                triplets.push((gi, gj, pc.a[(i, j)]));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(n, &triplets)?;
    let (x, residual) = linalg::solve_direct(&matrix, &rhs, 1e-10)?;
    let fields = cells
        .into_iter()
        .map(|pc| {
            let local = DVector::from_iterator(pc.global.len(), pc.global.iter().map(|&g| x[g]));
            CellField { coeffs: &pc.r * local + &pc.lift, basis: pc.basis }
        })
        .collect();
    Ok(PoissonSolution { fields, residual })
}

/// `‖∇(a - b)‖ / ‖∇b‖` summed over cells, for two cellwise fields.
pub fn relative_gradient_difference(mesh: &Mesh2D, k: usize, a: &[CellField], b: &[CellField]) -> Result<f64> {
    let (mut diff, mut reference) = (0.0, 0.0);
    for c in 0..mesh.cells.len() {
        let quad = cell_quadrature(mesh, c, 2 * (k + 2), DEFAULT_SUBEDGES)?;
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            let (da, db) = (a[c].derivatives(p, 1), b[c].derivatives(p, 1));
            let (ex, ey) = (da[d::X] - db[d::X], da[d::Y] - db[d::Y]);
            diff += w * (ex * ex + ey * ey);
            reference += w * (db[d::X] * db[d::X] + db[d::Y] * db[d::Y]);
        }
    }
    Ok(if reference > 0.0 { (diff / reference).sqrt() } else { diff.sqrt() })
}
