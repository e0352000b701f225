//! Scaled monomial bases on cells and faces, derivative tables up to fourth
//! order, mass matrices, and L2 projections.

use nalgebra::{DMatrix, DVector};

use crate::error::{HhoError, Result};
use crate::geometry::Point2;
use crate::mesh::{Cell, Face, FaceKind};
use crate::quadrature::QuadRule;

/// Highest derivative order available from [`CellBasis::eval`].
pub const MAX_DERIV: usize = 4;

/// Dimension of P^l in two variables.
pub const fn dim2(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Number of multi-indices of order at most `order`.
pub const fn num_derivs(order: usize) -> usize {
    dim2(order)
}

/// Row of `∂x^(o-j) ∂y^j` in a derivative table, with `o = i + j`.
pub const fn deriv_index(i: usize, j: usize) -> usize {
    let o = i + j;
    o * (o + 1) / 2 + j
}

/// Common rows of the derivative tables.
pub mod d {
    use super::deriv_index;
    pub const VAL: usize = deriv_index(0, 0);
    pub const X: usize = deriv_index(1, 0);
    pub const Y: usize = deriv_index(0, 1);
    pub const XX: usize = deriv_index(2, 0);
    pub const XY: usize = deriv_index(1, 1);
    pub const YY: usize = deriv_index(0, 2);
    pub const XXX: usize = deriv_index(3, 0);
    pub const XXY: usize = deriv_index(2, 1);
    pub const XYY: usize = deriv_index(1, 2);
    pub const YYY: usize = deriv_index(0, 3);
    pub const XXXX: usize = deriv_index(4, 0);
    pub const XXYY: usize = deriv_index(2, 2);
    pub const YYYY: usize = deriv_index(0, 4);
}

/// Exponents `(a, b)` of the `i`-th monomial, ordered by total degree and then
/// by the power of `y`.
pub fn exponents(i: usize) -> (usize, usize) {
    let mut o = 0;
    while dim2(o) <= i {
        o += 1;
    }
    let b = i + o + 1 - dim2(o);
    (o - b, b)
}

fn falling(a: usize, i: usize) -> f64 {
    (0..i).map(|m| (a - m) as f64).product()
}

/// `((x - x_K) / h)^a ((y - y_K) / h)^b` for `a + b <= degree`, optionally
/// followed by a lower-triangular change of basis making the cell mass matrix
/// the identity.
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point2,
    pub scale: f64,
    transform: Option<DMatrix<f64>>,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point2, scale: f64) -> Self {
        Self { degree, center, scale, transform: None }
    }

    pub fn for_cell(degree: usize, cell: &Cell) -> Self {
        Self::new(degree, cell.centroid, cell.diameter)
    }

    pub fn dim(&self) -> usize {
        dim2(self.degree)
    }

    /// Replaces the basis by its Gram-Schmidt orthogonalization in the L2
    /// inner product given by `quad`, normalized so that the mass matrix is
    /// `|K|` times the identity (basis values stay of order one).
    pub fn orthonormalize(&mut self, quad: &QuadRule) -> Result<()> {
        self.transform = None;
        let m = self.mass_matrix(quad);
        let area = m[(0, 0)];
        let chol = m.cholesky().ok_or_else(|| HhoError::Conditioning("cell mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let n = self.dim();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| HhoError::Conditioning("singular cell mass factor".into()))?;
        self.transform = Some(linv * area.sqrt());
        Ok(())
    }

    pub fn is_orthonormal(&self) -> bool {
        self.transform.is_some()
    }

    /// Derivative table at `p`: entry `(r, i)` is derivative `r` (see
    /// [`deriv_index`]) of basis function `i`, for all orders `<= max_deriv`.
    pub fn eval(&self, p: Point2, max_deriv: usize) -> DMatrix<f64> {
        assert!(max_deriv <= MAX_DERIV);
        let n = self.dim();
        let nd = num_derivs(max_deriv);
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let top = self.degree + 1;
        let px: Vec<f64> = (0..top).scan(1.0, |s, _| { let v = *s; *s *= xi; Some(v) }).collect();
        let py: Vec<f64> = (0..top).scan(1.0, |s, _| { let v = *s; *s *= eta; Some(v) }).collect();
        let hinv: Vec<f64> = (0..=max_deriv).map(|o| self.scale.powi(-(o as i32))).collect();
        let mut t = DMatrix::zeros(nd, n);
        for col in 0..n {
            let (a, b) = exponents(col);
            for o in 0..=max_deriv {
                for j in 0..=o {
                    let i = o - j;
                    if i > a || j > b {
                        continue;
                    }
                    t[(deriv_index(i, j), col)] = falling(a, i) * falling(b, j) * px[a - i] * py[b - j] * hinv[o];
                }
            }
        }
        match &self.transform {
            Some(tr) => t * tr.transpose(),
            None => t,
        }
    }

    /// Values of all basis functions at `p`.
    pub fn values(&self, p: Point2) -> DVector<f64> {
        self.eval(p, 0).row(0).transpose()
    }

    pub fn mass_matrix(&self, quad: &QuadRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            let v = self.values(p);
            m.ger(w, &v, &v, 1.0);
        }
        m
    }

    /// Coefficients of the L2 projection of `f` onto the span of the basis.
    pub fn project(&self, quad: &QuadRule, f: impl Fn(Point2) -> f64) -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(self.dim());
        for (&p, &w) in quad.points.iter().zip(&quad.weights) {
            rhs.axpy(w * f(p), &self.values(p), 1.0);
        }
        solve_spd(self.mass_matrix(quad), rhs)
    }

    /// Value of the expansion with coefficients `c` at `p`.
    pub fn evaluate(&self, c: &DVector<f64>, p: Point2) -> f64 {
        self.values(p).dot(c)
    }
}

fn solve_spd(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let chol = m.cholesky().ok_or_else(|| HhoError::Conditioning("mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// One-dimensional polynomials of degree `<= degree` in the face coordinate
/// `tau` in [-1/2, 1/2] (arc length from the midpoint divided by the face
/// length, increasing along the face direction). The `j`-th function is the
/// Legendre polynomial `sqrt(2j + 1) P_j(2 tau)`, so the face mass matrix is the
/// face length times the identity.
#[derive(Clone, Debug)]
pub struct FaceBasis {
    pub degree: usize,
    pub length: f64,
}

impl FaceBasis {
    pub fn new(degree: usize, length: f64) -> Self {
        Self { degree, length }
    }

    /// Basis on a face; arcs carry no unknowns and are rejected.
    pub fn for_face(degree: usize, face: &Face) -> Result<Self> {
        match face.kind {
            FaceKind::Straight => Ok(Self::new(degree, face.length)),
            FaceKind::Arc { .. } => Err(HhoError::UnsupportedFace {
                face: face.id,
                msg: "polynomial face spaces are defined on straight faces only".into(),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    /// Legendre values `P_j(x)` and derivatives `P_j'(x)` at `x = 2 tau`.
    fn legendre(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let x = 2.0 * tau;
        let n = self.dim();
        let mut p = vec![1.0; n];
        let mut dp = vec![0.0; n];
        if n > 1 {
            p[1] = x;
            dp[1] = 1.0;
        }
        for j in 1..n.saturating_sub(1) {
            let jf = j as f64;
            p[j + 1] = ((2.0 * jf + 1.0) * x * p[j] - jf * p[j - 1]) / (jf + 1.0);
            dp[j + 1] = dp[j - 1] + (2.0 * jf + 1.0) * p[j];
        }
        (p, dp)
    }

    pub fn values(&self, tau: f64) -> DVector<f64> {
        let (p, _) = self.legendre(tau);
        DVector::from_iterator(self.dim(), p.iter().enumerate().map(|(j, v)| v * (2.0 * j as f64 + 1.0).sqrt()))
    }

    /// Derivatives with respect to arc length.
    pub fn derivatives(&self, tau: f64) -> DVector<f64> {
        let (_, dp) = self.legendre(tau);
        let scale = 2.0 / self.length;
        DVector::from_iterator(
            self.dim(),
            dp.iter().enumerate().map(|(j, v)| v * (2.0 * j as f64 + 1.0).sqrt() * scale),
        )
    }

    /// Mass matrix from a face rule whose `params` are face coordinates.
    pub fn mass_matrix(&self, quad: &QuadRule) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (&t, &w) in quad.params.iter().zip(&quad.weights) {
            let v = self.values(t);
            m.ger(w, &v, &v, 1.0);
        }
        m
    }

    /// L2 projection of `f(point, tau)` on the face.
    pub fn project(&self, quad: &QuadRule, f: impl Fn(Point2, f64) -> f64) -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(self.dim());
        for ((&p, &t), &w) in quad.points.iter().zip(&quad.params).zip(&quad.weights) {
            rhs.axpy(w * f(p, t), &self.values(t), 1.0);
        }
        solve_spd(self.mass_matrix(quad), rhs)
    }

    pub fn evaluate(&self, c: &DVector<f64>, tau: f64) -> f64 {
        self.values(tau).dot(c)
    }
}

/// L2 projection onto P^l(F) of a face function.
pub fn project_face(
    face: &Face,
    degree: usize,
    quad: &QuadRule,
    f: impl Fn(Point2, f64) -> f64,
) -> Result<DVector<f64>> {
    FaceBasis::for_face(degree, face)?.project(quad, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::quadrature::{cell_quadrature, face_quadrature};
    use proptest::prelude::*;

    #[test]
    fn exponent_ordering() {
        let e: Vec<_> = (0..6).map(exponents).collect();
        assert_eq!(e, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for i in 0..dim2(6) {
            let (a, b) = exponents(i);
            assert_eq!(deriv_index(a, b), i);
        }
    }

    #[test]
    fn analytic_derivative_examples() {
        let b = CellBasis::new(4, Point2::new(0.3, -0.2), 0.5);
        let p = Point2::new(0.7, 0.4);
        let t = b.eval(p, 4);
        for r in 1..num_derivs(4) {
            assert_eq!(t[(r, 0)], 0.0);
        }
        let i2 = deriv_index(2, 0);
        assert!((t[(d::XX, i2)] - 2.0 / 0.25).abs() < 1e-12);
        let i4 = deriv_index(4, 0);
        let bilap = t[(d::XXXX, i4)] + 2.0 * t[(d::XXYY, i4)] + t[(d::YYYY, i4)];
        assert!((bilap - 24.0 / 0.5f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn square_mass_matrix_matches_closed_form() {
        let m = build_rect_mesh(1);
        let q = cell_quadrature(&m, 0, 8, 1).unwrap();
        let b = CellBasis::new(4, Point2::new(0.0, 0.0), 1.0);
        let mm = b.mass_matrix(&q);
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let (a1, b1) = exponents(i);
                let (a2, b2) = exponents(j);
                let exact = 1.0 / (((a1 + a2 + 1) * (b1 + b2 + 1)) as f64);
                assert!((mm[(i, j)] - exact).abs() < 1e-12);
            }
        }
        let b0 = CellBasis::for_cell(0, &m.cells[0]);
        assert!((b0.mass_matrix(&q)[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthonormalized_mass_is_identity() {
        let m = build_rect_mesh(3);
        let q = cell_quadrature(&m, 4, 10, 1).unwrap();
        let mut b = CellBasis::for_cell(5, &m.cells[4]);
        b.orthonormalize(&q).unwrap();
        let area = m.cells[4].area;
        let mm = b.mass_matrix(&q) / area;
        assert!((mm - DMatrix::identity(b.dim(), b.dim())).amax() < 1e-10);
    }

    #[test]
    fn cell_projection_reproduces_polynomials() {
        let m = build_rect_mesh(1);
        let q = cell_quadrature(&m, 0, 8, 1).unwrap();
        let b = CellBasis::for_cell(3, &m.cells[0]);
        let one = b.project(&q, |_| 1.0).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-13 && one.rows(1, one.len() - 1).amax() < 1e-13);
        let c = b.project(&q, |p| p.x * p.x * p.y).unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.9, 0.3), (0.5, 0.77)] {
            let p = Point2::new(x, y);
            assert!((b.evaluate(&c, p) - x * x * y).abs() < 1e-11);
        }
    }

    #[test]
    fn cell_projection_matches_least_squares_oracle() {
        // Weighted least squares on a tensor Gauss grid, solved by SVD.
        let m = build_rect_mesh(1);
        let q = cell_quadrature(&m, 0, 20, 1).unwrap();
        let b = CellBasis::for_cell(2, &m.cells[0]);
        let f = |p: Point2| (std::f64::consts::PI * p.x).sin();
        let c = b.project(&q, f).unwrap();
        let err = q.integrate(|p| (f(p) - b.evaluate(&c, p)).powi(2)).sqrt();
        let (x, w) = crate::quadrature::gauss_legendre(30);
        let n = x.len();
        let mut a = DMatrix::zeros(n * n, b.dim());
        let mut rhs = DVector::zeros(n * n);
        for i in 0..n {
            for j in 0..n {
                let p = Point2::new(x[i], x[j]);
                let sw = (w[i] * w[j]).sqrt();
                a.set_row(i * n + j, &(b.values(p).transpose() * sw));
                rhs[i * n + j] = sw * f(p);
            }
        }
        let ls = a.clone().svd(true, true).solve(&rhs, 1e-14).unwrap();
        let err_ls = (&a * &ls - &rhs).norm();
        assert!((err - err_ls).abs() < 1e-8, "{err} vs {err_ls}");
        assert!((&ls - &c).amax() < 1e-8);
    }

    #[test]
    fn face_projection_examples() {
        let m = build_rect_mesh(1);
        let f = &m.faces[0];
        let q = face_quadrature(f, 8);
        let c = project_face(f, 0, &q, |_, _| 3.5).unwrap();
        assert!((c[0] - 3.5).abs() < 1e-14);
        let c = project_face(f, 2, &q, |_, t| t * t).unwrap();
        let fb = FaceBasis::for_face(2, f).unwrap();
        for t in [-0.5, -0.1, 0.3, 0.5] {
            assert!((fb.evaluate(&c, t) - t * t).abs() < 1e-13);
        }
        let mm = fb.mass_matrix(&q) / f.length;
        assert!((mm - DMatrix::identity(3, 3)).amax() < 1e-13);
        // Best line for |tau| on [-1/2, 1/2]: slope 0, intercept 1/4. The
        // kink needs a rule that resolves each half separately.
        let b = FaceBasis::new(1, 1.0);
        let (x, w) = crate::quadrature::gauss_legendre(8);
        let mut half = QuadRule::default();
        for (&s, &ws) in x.iter().zip(w) {
            for t in [-0.5 * s, 0.5 * s] {
                half.points.push(Point2::default());
                half.params.push(t);
                half.weights.push(0.5 * ws);
            }
        }
        let c = b.project(&half, |_, t| t.abs()).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-14 && c[1].abs() < 1e-14);
    }

    #[test]
    fn face_derivatives_match_finite_differences() {
        let b = FaceBasis::new(5, 0.3);
        for &t in &[-0.4, 0.0, 0.17, 0.5] {
            let d = b.derivatives(t);
            let step = 1e-6;
            let fd = (b.values(t + step) - b.values(t - step)) / (2.0 * step * 0.3);
            assert!((d - fd).amax() < 1e-6);
        }
    }

    #[test]
    fn arc_face_has_no_basis() {
        let m = crate::mesh::parse_mesh(
            "vertices 3\n0 0\n1 0\n0 1\ngeometries 1\ncircle 0 0 1\ncells 1\n3 0 1 2\narcs 1\n1 2 0\n",
        )
        .and_then(crate::mesh::Mesh2D::build)
        .unwrap();
        let arc = m.faces.iter().find(|f| !f.is_straight()).unwrap();
        assert!(matches!(FaceBasis::for_face(1, arc), Err(HhoError::UnsupportedFace { .. })));
    }

    #[test]
    fn mass_conditioning_is_scale_invariant() {
        let conds: Vec<f64> = [1.0, 1e-2, 1e-4]
            .iter()
            .map(|&h| {
                let mesh = crate::mesh::Mesh2D::build(crate::mesh::MeshDescription {
                    vertices: vec![
                        Point2::new(0.0, 0.0),
                        Point2::new(h, 0.0),
                        Point2::new(h, h),
                        Point2::new(0.0, h),
                    ],
                    cells: vec![vec![0, 1, 2, 3]],
                    ..Default::default()
                })
                .unwrap();
                let q = cell_quadrature(&mesh, 0, 8, 1).unwrap();
                let b = CellBasis::for_cell(4, &mesh.cells[0]);
                let ev = b.mass_matrix(&q).symmetric_eigenvalues();
                ev.max() / ev.min()
            })
            .collect();
        for c in &conds {
            assert!((c / conds[0] - 1.0).abs() < 0.01);
        }
    }

    proptest! {
        #[test]
        fn first_derivatives_match_finite_differences(
            x in 0.0f64..1.0, y in 0.0f64..1.0, i in 0usize..dim2(4)
        ) {
            let b = CellBasis::new(4, Point2::new(0.5, 0.5), 0.7);
            let p = Point2::new(x, y);
            let t = b.eval(p, 1);
            let step = 1e-6 * b.scale;
            let fd = |dp: Point2| (b.values(p + dp)[i] - b.values(p - dp)[i]) / (2.0 * step);
            let gx = fd(Point2::new(step, 0.0));
            let gy = fd(Point2::new(0.0, step));
            let scale = 1.0 + t[(d::X, i)].abs().max(t[(d::Y, i)].abs());
            prop_assert!((gx - t[(d::X, i)]).abs() <= 1e-6 * scale);
            prop_assert!((gy - t[(d::Y, i)]).abs() <= 1e-6 * scale);
        }

        #[test]
        fn projection_is_idempotent_and_orthogonal(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.1f64..3.0) {
            let m = build_rect_mesh(2);
            let q = cell_quadrature(&m, 3, 2 * 3 + 4, 1).unwrap();
            let basis = CellBasis::for_cell(3, &m.cells[3]);
            let f = |p: Point2| (a * p.x + b * p.y).sin() * (c * p.y).exp();
            let coef = basis.project(&q, f).unwrap();
            let again = basis.project(&q, |p| basis.evaluate(&coef, p)).unwrap();
            prop_assert!((&again - &coef).amax() <= 1e-12 * (1.0 + coef.amax()));
            for j in 0..basis.dim() {
                let r = q.integrate(|p| (f(p) - basis.evaluate(&coef, p)) * basis.values(p)[j]);
                let s = q.integrate(|p| f(p).abs() * basis.values(p)[j].abs());
                prop_assert!(r.abs() <= 1e-10 * s);
            }
        }
    }
}
