//! Error norms of the post-processed solution, convergence rates, the local
//! stability probe, and boundary-layer flagging.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{CellField, HhoSolution};
use crate::basis::d;
use crate::cases::ManufacturedCase;
use crate::error::{HhoError, Result};
use crate::local::{energy_matrix, reduce, LocalOperatorSet, LocalOptions};
use crate::mesh::Mesh2D;
use crate::quadrature::{cell_quadrature, DEFAULT_SUBEDGES};

/// Quadrature exactness used for error integrals.
pub fn error_degree(k: usize) -> usize {
    2 * (k + 2) + 4
}

/// Field measured by the L² error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum L2Field {
    /// `R^i_K(û_K) + L_K`.
    #[default]
    Reconstruction,
    /// The cell unknown `u_K`.
    Cell,
}

/// Squared absolute errors and squared norms of the exact solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub energy_sq: f64,
    pub energy_ref_sq: f64,
    pub l2_sq: f64,
    pub l2_ref_sq: f64,
}

impl ErrorNorms {
    pub fn energy(&self) -> f64 {
        relative(self.energy_sq, self.energy_ref_sq)
    }

    pub fn l2(&self) -> f64 {
        relative(self.l2_sq, self.l2_ref_sq)
    }
}

fn relative(err_sq: f64, ref_sq: f64) -> f64 {
    if ref_sq > 0.0 { (err_sq / ref_sq).sqrt() } else { err_sq.sqrt() }
}

/// Error of cellwise polynomials against the exact solution. `energy` fields
/// enter the ε-weighted gradient seminorm, `l2` fields the L² norm.
pub fn field_errors(
    mesh: &Mesh2D,
    k: usize,
    eps: f64,
    energy: &[CellField],
    l2: &[CellField],
    case: &ManufacturedCase,
) -> Result<ErrorNorms> {
    if !case.has_exact() {
        return Err(HhoError::InvalidInput(format!("case '{}' has no exact solution", case.name)));
    }
    let per_cell: Vec<Result<ErrorNorms>> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let quad = cell_quadrature(mesh, c, error_degree(k), DEFAULT_SUBEDGES)?;
            let mut e = ErrorNorms::default();
            for (&p, &w) in quad.points.iter().zip(&quad.weights) {
                let jet = case.jet(p).expect("exact case");
                let [ux, uy] = jet.grad();
                let [[uxx, uxy], [_, uyy]] = jet.hessian();
                let r = energy[c].derivatives(p, 2);
                let (ex, ey) = (ux - r[d::X], uy - r[d::Y]);
                let (exx, exy, eyy) = (uxx - r[d::XX], uxy - r[d::XY], uyy - r[d::YY]);
                e.energy_sq += w * (ex * ex + ey * ey + eps * (exx * exx + 2.0 * exy * exy + eyy * eyy));
                e.energy_ref_sq += w * (ux * ux + uy * uy + eps * (uxx * uxx + 2.0 * uxy * uxy + uyy * uyy));
                let u = jet.value();
                let el = u - l2[c].value(p);
                e.l2_sq += w * el * el;
                e.l2_ref_sq += w * u * u;
            }
            Ok(e)
        })
        .collect();
    let mut total = ErrorNorms::default();
    for e in per_cell {
        let e = e?;
        total.energy_sq += e.energy_sq;
        total.energy_ref_sq += e.energy_ref_sq;
        total.l2_sq += e.l2_sq;
        total.l2_ref_sq += e.l2_ref_sq;
    }
    Ok(total)
}

/// The cell unknowns as fields on the reconstruction bases.
pub fn cell_fields(sol: &HhoSolution) -> Vec<CellField> {
    sol.reconstructed
        .iter()
        .zip(&sol.cell)
        .map(|(r, u)| CellField { basis: r.basis.clone(), coeffs: u.clone() })
        .collect()
}

/// Energy and L² errors of a discrete solution.
pub fn solution_errors(mesh: &Mesh2D, sol: &HhoSolution, case: &ManufacturedCase, l2_field: L2Field) -> Result<ErrorNorms> {
    let cells;
    let l2 = match l2_field {
        L2Field::Reconstruction => &sol.reconstructed,
        L2Field::Cell => {
            cells = cell_fields(sol);
            &cells
        }
    };
    field_errors(mesh, sol.k, sol.eps, &sol.reconstructed, l2, case)
}

/// Relative error `‖∇(u - R_K(û_K))‖_{ε}` over all cells.
pub fn energy_error(mesh: &Mesh2D, sol: &HhoSolution, case: &ManufacturedCase) -> Result<f64> {
    Ok(solution_errors(mesh, sol, case, L2Field::Reconstruction)?.energy())
}

pub fn l2_error(mesh: &Mesh2D, sol: &HhoSolution, case: &ManufacturedCase, field: L2Field) -> Result<f64> {
    Ok(solution_errors(mesh, sol, case, field)?.l2())
}

/// `R^i_K(Î_K u) + L_K(u)` on every cell: the post-processed interpolant of
/// the exact solution.
pub fn interpolant_fields(
    mesh: &Mesh2D,
    k: usize,
    eps: f64,
    case: &ManufacturedCase,
    opts: &LocalOptions,
) -> Result<Vec<CellField>> {
    (0..mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let ops = LocalOperatorSet::build(mesh, c, k, eps, opts)?;
            let v = reduce(mesh, &ops.data, |p| case.u(p), |p| case.grad(p))?;
            let coeffs = &ops.r * v + ops.lifting(case)?;
            Ok(CellField { basis: ops.data.basis.clone(), coeffs })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `log(e_c / e_f) / log(h_c / h_f)` between consecutive entries; `None`
/// where an error is zero or not finite.
pub fn convergence_rates(h: &[f64], err: &[f64]) -> Vec<Option<f64>> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| {
            let ok = e.iter().chain(h).all(|v| v.is_finite() && *v > 0.0) && h[0] != h[1];
            ok.then(|| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One line of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub cells: usize,
    pub h: f64,
    pub k: usize,
    pub eps: f64,
    pub dofs: usize,
    pub energy_err: f64,
    pub l2_err: f64,
    pub cond: Option<f64>,
    pub runtime_ms: f64,
}

/// Extremes of `â_K(v̂, v̂) / |v̂|²_{V̂_K}` over random local vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioProbe {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

pub fn stability_ratio_probe(
    mesh: &Mesh2D,
    k: usize,
    eps: f64,
    n_samples: usize,
    seed: u64,
    opts: &LocalOptions,
) -> Result<RatioProbe> {
    if n_samples == 0 {
        return Err(HhoError::InvalidInput("n_samples must be at least 1".into()));
    }
    let per_cell: Vec<Result<RatioProbe>> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let ops = LocalOperatorSet::build(mesh, c, k, eps, opts)?;
            let e = energy_matrix(&ops.data, eps);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let mut probe = RatioProbe { min: f64::INFINITY, max: 0.0, samples: 0 };
            for _ in 0..n_samples {
                let v = DVector::from_fn(ops.size(), |_, _| rng.random_range(-1.0..1.0));
                let den = v.dot(&(&e * &v));
                if den <= 1e-28 {
                    continue;
                }
                let ratio = v.dot(&(&ops.a * &v)) / den;
                probe.min = probe.min.min(ratio);
                probe.max = probe.max.max(ratio);
                probe.samples += 1;
            }
            Ok(probe)
        })
        .collect();
    let mut out = RatioProbe { min: f64::INFINITY, max: 0.0, samples: 0 };
    for p in per_cell {
        let p = p?;
        out.min = out.min.min(p.min);
        out.max = out.max.max(p.max);
        out.samples += p.samples;
    }
    Ok(out)
}

/// Cells where the estimated `‖∇²R_K(û_K)‖_{L∞(K)}` reaches `θ` times its
/// maximum over the mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFlagReport {
    pub theta: f64,
    pub flagged: Vec<usize>,
    pub max_hessian: f64,
    pub flagged_area: f64,
    /// Per-cell estimate: mean Frobenius norm of the Hessian at the vertices.
    pub cell_values: Vec<f64>,
}

/// Mean over the cell vertices of the Frobenius norm of the Hessian.
pub fn vertex_hessian_estimate(mesh: &Mesh2D, c: usize, field: &CellField) -> f64 {
    let verts = &mesh.cells[c].vertices;
    let sum: f64 = verts
        .iter()
        .map(|&v| {
            let r = field.derivatives(mesh.vertices[v], 2);
            (r[d::XX].powi(2) + 2.0 * r[d::XY].powi(2) + r[d::YY].powi(2)).sqrt()
        })
        .sum();
    sum / verts.len() as f64
}

pub fn flag_boundary_layer(mesh: &Mesh2D, sol: &HhoSolution, theta: f64) -> Result<LayerFlagReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(HhoError::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    let cell_values: Vec<f64> = (0..mesh.cells.len())
        .map(|c| vertex_hessian_estimate(mesh, c, &sol.reconstructed[c]))
        .collect();
    let max_hessian = cell_values.iter().copied().fold(0.0, f64::max);
    let flagged: Vec<usize> = if max_hessian <= 1e-14 {
        Vec::new()
    } else {
        (0..mesh.cells.len()).filter(|&c| cell_values[c] >= theta * max_hessian).collect()
    };
    let flagged_area = flagged.iter().map(|&c| mesh.cells[c].area).sum();
    Ok(LayerFlagReport { theta, flagged, max_hessian, flagged_area, cell_values })
}

/// True when every flagged cell touches the boundary or is joined to such a
/// cell through a chain of flagged neighbours.
pub fn flagged_region_reaches_boundary(mesh: &Mesh2D, flagged: &[usize]) -> bool {
    let mut is_flagged = vec![false; mesh.cells.len()];
    flagged.iter().for_each(|&c| is_flagged[c] = true);
    let mut seen = vec![false; mesh.cells.len()];
    let mut queue: VecDeque<usize> = flagged.iter().copied().filter(|&c| mesh.cells[c].boundary).collect();
    queue.iter().for_each(|&c| seen[c] = true);
    while let Some(c) = queue.pop_front() {
        for n in mesh.neighbors(c) {
            if is_flagged[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    flagged.iter().all(|&c| seen[c])
}
