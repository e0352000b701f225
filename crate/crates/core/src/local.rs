//! Cell-local HHO operators: reconstruction, stabilizations, local bilinear
//! form, boundary lifting, reduction, and the local load vector.
//!
//! Local unknowns are ordered as the cell block (P^{k+2}(K)) followed, for
//! each interior face of the cell in loop order, by the trace block
//! (P^{k+2}(F)) and the normal-derivative block (P^k(F)). Normal-derivative
//! unknowns are stored in the orientation of the face normal `n_F`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{d, dim2, CellBasis, FaceBasis};
use crate::cases::ManufacturedCase;
use crate::error::{HhoError, Result};
use crate::geometry::Point2;
use crate::mesh::Mesh2D;
use crate::quadrature::{cell_quadrature, face_quadrature, QuadRule, DEFAULT_SUBEDGES};

/// `max{1, eps h^-2}`.
pub fn sigma_k(eps: f64, h: f64) -> f64 {
    (eps / (h * h)).max(1.0)
}

/// How penalty weights react to the polynomial degree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HpScaling {
    /// Plain `h^-1` and `h` weights.
    #[default]
    None,
    /// Every `h^-1` weight becomes `(k+1)^2 h^-1`; `h` weights are unchanged.
    Literal,
    /// As `Literal`, and every `h` weight also becomes `h / (k+1)^2`.
    Symmetric,
}

impl HpScaling {
    /// Multipliers for the `h^-1` and `h` weighted terms.
    pub fn factors(self, k: usize) -> (f64, f64) {
        let p = ((k + 1) * (k + 1)) as f64;
        match self {
            HpScaling::None => (1.0, 1.0),
            HpScaling::Literal => (p, 1.0),
            HpScaling::Symmetric => (p, 1.0 / p),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalOptions {
    pub hp: HpScaling,
    pub n_subedges: usize,
    /// Orthonormalize the cell basis against the cell mass matrix.
    pub orthonormal: bool,
    /// Test hook: flip the orientation sign of the first interior face of
    /// this cell when building its local operators.
    pub flip_sign_in_cell: Option<usize>,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { hp: HpScaling::None, n_subedges: DEFAULT_SUBEDGES, orthonormal: true, flip_sign_in_cell: None }
    }
}

/// Quadrature exactness used for cell and face operator integrals.
pub fn operator_degree(k: usize) -> usize {
    2 * (k + 2) + 2
}

#[derive(Clone, Debug)]
pub struct FaceData {
    pub face: usize,
    /// `n_F . n_K`.
    pub sign: f64,
    pub boundary: bool,
    pub length: f64,
    pub rule: QuadRule,
    /// Outward cell normal `n_K` at each node.
    pub normals: Vec<Point2>,
    /// `t_K`: `n_K` rotated by +90 degrees.
    pub tangents: Vec<Point2>,
    /// Offsets of the trace and normal blocks for interior faces.
    pub dofs: Option<(usize, usize)>,
}

/// Geometry, basis, and quadrature of one cell, shared by all local builders.
#[derive(Clone, Debug)]
pub struct CellData {
    pub cell: usize,
    pub k: usize,
    pub h: f64,
    pub area: f64,
    pub basis: CellBasis,
    pub quad: QuadRule,
    pub faces: Vec<FaceData>,
    pub n_cell: usize,
    pub size: usize,
    pub n_subedges: usize,
}

impl CellData {
    pub fn new(mesh: &Mesh2D, c: usize, k: usize, opts: &LocalOptions) -> Result<Self> {
        let cell = &mesh.cells[c];
        let deg = operator_degree(k);
        let quad = cell_quadrature(mesh, c, deg, opts.n_subedges)?;
        let mut basis = CellBasis::for_cell(k + 2, cell);
        if opts.orthonormal {
            basis.orthonormalize(&quad).map_err(|e| HhoError::LocalSolve { cell: c, msg: e.to_string() })?;
        }
        let n_cell = dim2(k + 2);
        let mut offset = n_cell;
        let mut faces = Vec::with_capacity(cell.faces.len());
        let mut flipped = false;
        for (f, mut s) in cell.local_faces() {
            let face = &mesh.faces[f];
            let boundary = face.is_boundary();
            if !boundary && opts.flip_sign_in_cell == Some(c) && !flipped {
                s = -s;
                flipped = true;
            }
            let rule = face_quadrature(face, deg);
            let normals: Vec<Point2> = rule.points.iter().map(|&p| face.normal_at(p) * s).collect();
            let tangents = normals.iter().map(|n| n.rot90()).collect();
            let dofs = (!boundary).then(|| {
                let o = (offset, offset + k + 3);
                offset += 2 * k + 4;
                o
            });
            faces.push(FaceData { face: f, sign: s, boundary, length: face.length, rule, normals, tangents, dofs });
        }
        Ok(Self { cell: c, k, h: cell.diameter, area: cell.area, basis, quad, faces, n_cell, size: offset, n_subedges: opts.n_subedges })
    }

    pub fn is_boundary(&self) -> bool {
        self.faces.iter().any(|f| f.boundary)
    }

    pub fn has_curved_face(&self, mesh: &Mesh2D) -> bool {
        self.faces.iter().any(|f| !mesh.faces[f.face].is_straight())
    }

    fn trace_basis(&self, f: &FaceData) -> FaceBasis {
        FaceBasis::new(self.k + 2, f.length)
    }

    fn normal_basis(&self, f: &FaceData) -> FaceBasis {
        FaceBasis::new(self.k, f.length)
    }

    fn mean_vector(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.n_cell);
        for (&p, &w) in self.quad.points.iter().zip(&self.quad.weights) {
            m.axpy(w, &self.basis.values(p), 1.0);
        }
        m
    }
}

/// Directional derivatives of every basis function from a derivative table.
struct Directional {
    val: DVector<f64>,
    dn: DVector<f64>,
    dt: DVector<f64>,
    nn: DVector<f64>,
    nt: DVector<f64>,
    n_lap: DVector<f64>,
}

fn directional(t: &DMatrix<f64>, n: Point2, tg: Point2) -> Directional {
    let row = |r: usize| t.row(r).transpose();
    let zero = || DVector::zeros(t.ncols());
    let (x, y) = (row(d::X), row(d::Y));
    let (nn, nt) = if t.nrows() > d::YY {
        let (xx, xy, yy) = (row(d::XX), row(d::XY), row(d::YY));
        (
            &xx * (n.x * n.x) + &xy * (2.0 * n.x * n.y) + &yy * (n.y * n.y),
            &xx * (n.x * tg.x) + &xy * (n.x * tg.y + n.y * tg.x) + &yy * (n.y * tg.y),
        )
    } else {
        (zero(), zero())
    };
    let n_lap = if t.nrows() > d::YYY {
        (row(d::XXX) + row(d::XYY)) * n.x + (row(d::XXY) + row(d::YYY)) * n.y
    } else {
        zero()
    };
    Directional { val: row(d::VAL), dn: &x * n.x + &y * n.y, dt: &x * tg.x + &y * tg.y, nn, nt, n_lap }
}

/// `(∇v, ∇w)_{K,eps} = eps (∇²v, ∇²w)_K + (∇v, ∇w)_K` on the cell basis.
pub fn gram_matrix(cd: &CellData, eps: f64) -> DMatrix<f64> {
    let n = cd.n_cell;
    let mut g = DMatrix::zeros(n, n);
    for (&p, &w) in cd.quad.points.iter().zip(&cd.quad.weights) {
        let t = cd.basis.eval(p, 2);
        for r in [d::X, d::Y] {
            let v = t.row(r).transpose();
            g.ger(w, &v, &v, 1.0);
        }
        if eps != 0.0 {
            for (r, c) in [(d::XX, 1.0), (d::XY, 2.0), (d::YY, 1.0)] {
                let v = t.row(r).transpose();
                g.ger(w * eps * c, &v, &v, 1.0);
            }
        }
    }
    g
}

/// Solves the bordered system `[G m; m^T 0] [X; λ] = [B; c^T]` for `X`.
fn bordered_solve(cd: &CellData, g: &DMatrix<f64>, b: &DMatrix<f64>, c: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = cd.n_cell;
    let m = cd.mean_vector();
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(g);
    k.view_mut((0, n), (n, 1)).copy_from(&m);
    k.view_mut((n, 0), (1, n)).copy_from(&m.transpose());
    let mut rhs = DMatrix::zeros(n + 1, b.ncols());
    rhs.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    rhs.view_mut((n, 0), (1, b.ncols())).copy_from(&c.transpose());
    let lu = k.lu();
    let x = lu.solve(&rhs).ok_or_else(|| HhoError::LocalSolve {
        cell: cd.cell,
        msg: "singular reconstruction system".into(),
    })?;
    Ok(x.rows(0, n).into_owned())
}

fn mean_row(cd: &CellData) -> DVector<f64> {
    let mut c = DVector::zeros(cd.size);
    c.rows_mut(0, cd.n_cell).copy_from(&cd.mean_vector());
    c
}

/// Face columns shared by both forms of the reconstruction right-hand side:
/// `(v_F, ∂_n w)_F - eps (v_F, ∂_nΔw)_F + eps (∂_t v_F, ∂_nt w)_F + eps (γ, ∂_nn w)_F`.
fn add_face_columns(cd: &CellData, eps: f64, b: &mut DMatrix<f64>) {
    for f in &cd.faces {
        let Some((ot, on)) = f.dofs else { continue };
        let (tb, nb) = (cd.trace_basis(f), cd.normal_basis(f));
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let tau = f.rule.params[q];
            let dd = directional(&cd.basis.eval(p, 3), f.normals[q], f.tangents[q]);
            let psi = tb.values(tau);
            let dpsi = tb.derivatives(tau) * f.sign;
            let chi = nb.values(tau) * f.sign;
            let mut tr = b.columns_mut(ot, tb.dim());
            tr.ger(w, &dd.dn, &psi, 1.0);
            if eps != 0.0 {
                tr.ger(-w * eps, &dd.n_lap, &psi, 1.0);
                tr.ger(w * eps, &dd.nt, &dpsi, 1.0);
                b.columns_mut(on, nb.dim()).ger(w * eps, &dd.nn, &chi, 1.0);
            }
        }
    }
}

/// Reconstruction matrix: column `j` holds the cell-basis coefficients of
/// `R(e_j)` for the local unit vector `e_j`. Built from the integrated-by-parts
/// form in which cell unknowns enter through gradients.
pub fn build_reconstruction(cd: &CellData, eps: f64) -> Result<DMatrix<f64>> {
    let g = gram_matrix(cd, eps);
    let n = cd.n_cell;
    let mut b = DMatrix::zeros(n, cd.size);
    b.columns_mut(0, n).copy_from(&g);
    for f in &cd.faces {
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let dd = directional(&cd.basis.eval(p, 3), f.normals[q], f.tangents[q]);
            let mut bc = b.columns_mut(0, n);
            // -(v_K, ∂_n w) + eps [(v_K, ∂_nΔw) - (∂_n v_K, ∂_nn w) - (∂_t v_K, ∂_nt w)]
            bc.ger(-w, &dd.dn, &dd.val, 1.0);
            if eps != 0.0 {
                bc.ger(w * eps, &dd.n_lap, &dd.val, 1.0);
                bc.ger(-w * eps, &dd.nn, &dd.dn, 1.0);
                bc.ger(-w * eps, &dd.nt, &dd.dt, 1.0);
            }
        }
    }
    add_face_columns(cd, eps, &mut b);
    bordered_solve(cd, &g, &b, &mean_row(cd))
}

/// Reconstruction from the form in which cell unknowns are tested against
/// `eps Δ²w - Δw`. Only defined on cells whose faces are all straight.
pub fn build_reconstruction_dual(mesh: &Mesh2D, cd: &CellData, eps: f64) -> Result<DMatrix<f64>> {
    if let Some(f) = cd.faces.iter().find(|f| !mesh.faces[f.face].is_straight()) {
        return Err(HhoError::UnsupportedFace {
            face: f.face,
            msg: "the pre-integration form is only assembled on straight-faced cells".into(),
        });
    }
    let g = gram_matrix(cd, eps);
    let n = cd.n_cell;
    let mut b = DMatrix::zeros(n, cd.size);
    for (&p, &w) in cd.quad.points.iter().zip(&cd.quad.weights) {
        let t = cd.basis.eval(p, 4);
        let row = |r: usize| t.row(r).transpose();
        let lap = row(d::XX) + row(d::YY);
        let bilap = row(d::XXXX) + row(d::XXYY) * 2.0 + row(d::YYYY);
        let op = bilap * eps - lap;
        b.columns_mut(0, n).ger(w, &op, &row(d::VAL), 1.0);
    }
    add_face_columns(cd, eps, &mut b);
    bordered_solve(cd, &g, &b, &mean_row(cd))
}

/// Interior stabilization
/// `σ h^-1 (v_∂K - v_K, w_∂K - w_K) + σ h (Π^k(γ - ∂_n v_K), χ - ∂_n w_K)` on
/// interior faces.
pub fn build_stab_interior(cd: &CellData, eps: f64, hp: HpScaling) -> Result<DMatrix<f64>> {
    let sigma = sigma_k(eps, cd.h);
    let (finv, flin) = hp.factors(cd.k);
    let (a_jump, a_normal) = (sigma * finv / cd.h, sigma * cd.h * flin);
    let n = cd.n_cell;
    let mut s = DMatrix::zeros(cd.size, cd.size);
    for f in &cd.faces {
        let Some((ot, on)) = f.dofs else { continue };
        let (tb, nb) = (cd.trace_basis(f), cd.normal_basis(f));
        let mk = nb.mass_matrix(&f.rule);
        let mut dn_moments = DMatrix::zeros(nb.dim(), n);
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let tau = f.rule.params[q];
            let dd = directional(&cd.basis.eval(p, 1), f.normals[q] * f.sign, f.tangents[q]);
            let mut row = DVector::zeros(cd.size);
            row.rows_mut(0, n).copy_from(&(-&dd.val));
            row.rows_mut(ot, tb.dim()).copy_from(&tb.values(tau));
            s.ger(a_jump * w, &row, &row, 1.0);
            dn_moments.ger(w, &nb.values(tau), &dd.dn, 1.0);
        }
        // Coefficients of γ_F - Π^k(n_F . ∇v_K).
        let chol = mk.clone().cholesky().ok_or_else(|| HhoError::LocalSolve {
            cell: cd.cell,
            msg: format!("face {} mass matrix is not positive definite", f.face),
        })?;
        let mut cmap = DMatrix::zeros(nb.dim(), cd.size);
        cmap.columns_mut(0, n).copy_from(&(-chol.solve(&dn_moments)));
        cmap.columns_mut(on, nb.dim()).fill_with_identity();
        s += (cmap.transpose() * &mk * &cmap) * a_normal;
    }
    Ok(s)
}

/// Boundary stabilization `σ h^-1 (v_K, w_K) + eps h^-1 (∇v_K, ∇w_K)` on
/// boundary faces, acting on the cell block.
pub fn build_stab_boundary(cd: &CellData, eps: f64, hp: HpScaling) -> DMatrix<f64> {
    let sigma = sigma_k(eps, cd.h);
    let (finv, _) = hp.factors(cd.k);
    let n = cd.n_cell;
    let mut s = DMatrix::zeros(n, n);
    for f in cd.faces.iter().filter(|f| f.boundary) {
        for (&p, &w) in f.rule.points.iter().zip(&f.rule.weights) {
            let t = cd.basis.eval(p, 1);
            let v = t.row(d::VAL).transpose();
            s.ger(w * sigma * finv / cd.h, &v, &v, 1.0);
            if eps != 0.0 {
                for r in [d::X, d::Y] {
                    let g = t.row(r).transpose();
                    s.ger(w * eps * finv / cd.h, &g, &g, 1.0);
                }
            }
        }
    }
    s
}

/// Everything needed to assemble and post-process one cell.
#[derive(Clone, Debug)]
pub struct LocalOperatorSet {
    pub data: CellData,
    pub eps: f64,
    pub sigma: f64,
    pub hp: HpScaling,
    pub g: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub si: DMatrix<f64>,
    /// Acts on the cell block only.
    pub sb: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl LocalOperatorSet {
    pub fn build(mesh: &Mesh2D, c: usize, k: usize, eps: f64, opts: &LocalOptions) -> Result<Self> {
        let data = CellData::new(mesh, c, k, opts)?;
        Self::from_data(data, eps, opts.hp)
    }

    pub fn from_data(data: CellData, eps: f64, hp: HpScaling) -> Result<Self> {
        let g = gram_matrix(&data, eps);
        let r = build_reconstruction(&data, eps)?;
        let si = build_stab_interior(&data, eps, hp)?;
        let sb = build_stab_boundary(&data, eps, hp);
        let mut a = r.transpose() * &g * &r + &si;
        let n = data.n_cell;
        let mut cell_block = a.view_mut((0, 0), (n, n));
        cell_block += &sb;
        a = (&a + a.transpose()) * 0.5;
        let sigma = sigma_k(eps, data.h);
        Ok(Self { data, eps, sigma, hp, g, r, si, sb, a })
    }

    pub fn size(&self) -> usize {
        self.data.size
    }

    /// Local load vector.
    pub fn rhs(&self, case: &ManufacturedCase) -> DVector<f64> {
        local_rhs(&self.data, self.eps, self.hp, case, &self.r)
    }

    /// Coefficients of the lifting `L_K` of the boundary data.
    pub fn lifting(&self, case: &ManufacturedCase) -> Result<DVector<f64>> {
        build_lifting(&self.data, self.eps, case, &self.g)
    }
}

/// Boundary-data functional
/// `-eps [(g_D, ∂_nΔw) - (g_N, ∂_nn w) - (∂_t g_D, ∂_nt w)] + (g_D, ∂_n w)` over
/// the boundary faces of the cell, on the cell basis.
fn boundary_data_functional(cd: &CellData, eps: f64, case: &ManufacturedCase) -> DVector<f64> {
    let mut b = DVector::zeros(cd.n_cell);
    for f in cd.faces.iter().filter(|f| f.boundary) {
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let (n, t) = (f.normals[q], f.tangents[q]);
            let dd = directional(&cd.basis.eval(p, 3), n, t);
            let gd = case.g_d(p);
            b.axpy(w * gd, &dd.dn, 1.0);
            if eps != 0.0 {
                b.axpy(-w * eps * gd, &dd.n_lap, 1.0);
                b.axpy(w * eps * case.g_n(p, n), &dd.nn, 1.0);
                b.axpy(w * eps * case.dt_g_d(p, t), &dd.nt, 1.0);
            }
        }
    }
    b
}

/// Mean-free `L_K` with `(∇L_K, ∇w)_{K,eps}` equal to the boundary-data
/// functional for every `w`. Zero on interior cells.
pub fn build_lifting(cd: &CellData, eps: f64, case: &ManufacturedCase, g: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !cd.is_boundary() {
        return Ok(DVector::zeros(cd.n_cell));
    }
    let b = boundary_data_functional(cd, eps, case);
    let x = bordered_solve(cd, g, &DMatrix::from_column_slice(cd.n_cell, 1, b.as_slice()), &DVector::zeros(1))?;
    Ok(x.column(0).into_owned())
}

/// Local load vector:
/// `(f, w_K) + (g_D, σ h^-1 w_K + eps ∂_nΔ(R ŵ) - ∂_n(R ŵ))_b
///  + eps (g_N n + ∂_t g_D t, h^-1 ∇w_K - ∇²(R ŵ) n)_b`.
pub fn local_rhs(cd: &CellData, eps: f64, hp: HpScaling, case: &ManufacturedCase, r: &DMatrix<f64>) -> DVector<f64> {
    let n = cd.n_cell;
    let mut cell = DVector::zeros(n);
    for (&p, &w) in cd.quad.points.iter().zip(&cd.quad.weights) {
        cell.axpy(w * case.f(p, eps), &cd.basis.values(p), 1.0);
    }
    let mut out = DVector::zeros(cd.size);
    if cd.is_boundary() {
        let sigma = sigma_k(eps, cd.h);
        let (finv, _) = hp.factors(cd.k);
        for f in cd.faces.iter().filter(|f| f.boundary) {
            for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
                let (nn, t) = (f.normals[q], f.tangents[q]);
                let dd = directional(&cd.basis.eval(p, 1), nn, t);
                cell.axpy(w * sigma * finv / cd.h * case.g_d(p), &dd.val, 1.0);
                if eps != 0.0 {
                    cell.axpy(w * eps * finv / cd.h * case.g_n(p, nn), &dd.dn, 1.0);
                    cell.axpy(w * eps * finv / cd.h * case.dt_g_d(p, t), &dd.dt, 1.0);
                }
            }
        }
        // The reconstruction-dependent terms are minus the lifting functional.
        let lr = boundary_data_functional(cd, eps, case);
        out -= r.transpose() * lr;
    }
    out.rows_mut(0, n).axpy(1.0, &cell, 1.0);
    out
}

/// Extra quadrature exactness used when projecting non-polynomial data.
const DATA_DEGREE_MARGIN: usize = 8;

/// Reduction `(Π^{k+2}_K u, Π^{k+2}_F u, Π^k_F (n_F . ∇u))`.
pub fn reduce(
    mesh: &Mesh2D,
    cd: &CellData,
    u: impl Fn(Point2) -> f64,
    grad: impl Fn(Point2) -> Point2,
) -> Result<DVector<f64>> {
    let deg = operator_degree(cd.k) + DATA_DEGREE_MARGIN;
    let quad = cell_quadrature(mesh, cd.cell, deg, cd.n_subedges)?;
    let mut v = DVector::zeros(cd.size);
    v.rows_mut(0, cd.n_cell).copy_from(&cd.basis.project(&quad, &u)?);
    for f in &cd.faces {
        let Some((ot, on)) = f.dofs else { continue };
        let face = &mesh.faces[f.face];
        let rule = face_quadrature(face, deg);
        let tr = cd.trace_basis(f).project(&rule, |p, _| u(p))?;
        v.rows_mut(ot, tr.len()).copy_from(&tr);
        let gam = cd.normal_basis(f).project(&rule, |p, _| grad(p).dot(face.normal_at(p)))?;
        v.rows_mut(on, gam.len()).copy_from(&gam);
    }
    Ok(v)
}

/// Matrix of the local energy seminorm
/// `‖∇v_K‖²_eps + σ h^-1 ‖v_∂K - v_K‖²_i + σ h ‖γ - ∂_n v_K‖²_i
///  + σ h^-1 ‖v_K‖²_b + eps h^-1 ‖∇v_K‖²_b`.
pub fn energy_matrix(cd: &CellData, eps: f64) -> DMatrix<f64> {
    let sigma = sigma_k(eps, cd.h);
    let n = cd.n_cell;
    let mut e = DMatrix::zeros(cd.size, cd.size);
    e.view_mut((0, 0), (n, n)).copy_from(&gram_matrix(cd, eps));
    for f in &cd.faces {
        for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
            let nf = f.normals[q] * f.sign;
            let dd = directional(&cd.basis.eval(p, 1), nf, nf.rot90());
            if let Some((ot, on)) = f.dofs {
                let tau = f.rule.params[q];
                let mut jump = DVector::zeros(cd.size);
                jump.rows_mut(0, n).copy_from(&(-&dd.val));
                jump.rows_mut(ot, cd.k + 3).copy_from(&cd.trace_basis(f).values(tau));
                e.ger(w * sigma / cd.h, &jump, &jump, 1.0);
                let mut normal = DVector::zeros(cd.size);
                normal.rows_mut(0, n).copy_from(&(-&dd.dn));
                normal.rows_mut(on, cd.k + 1).copy_from(&cd.normal_basis(f).values(tau));
                e.ger(w * sigma * cd.h, &normal, &normal, 1.0);
            } else {
                let mut block = e.view_mut((0, 0), (n, n));
                block.ger(w * sigma / cd.h, &dd.val, &dd.val, 1.0);
                if eps != 0.0 {
                    block.ger(w * eps / cd.h, &dd.dn, &dd.dn, 1.0);
                    block.ger(w * eps / cd.h, &dd.dt, &dd.dt, 1.0);
                }
            }
        }
    }
    e
}

pub fn energy_seminorm(cd: &CellData, eps: f64, v: &DVector<f64>) -> f64 {
    v.dot(&(energy_matrix(cd, eps) * v)).max(0.0).sqrt()
}
