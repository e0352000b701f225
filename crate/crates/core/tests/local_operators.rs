use hho_core::cases::ManufacturedCase;
use hho_core::jet::Jet;
use hho_core::local::{
    build_lifting, build_reconstruction, build_reconstruction_dual, build_stab_boundary, build_stab_interior,
    energy_matrix, energy_seminorm, gram_matrix, local_rhs, reduce, sigma_k, CellData, HpScaling, LocalOperatorSet,
    LocalOptions,
};
use hho_core::mesh::{build_rect_mesh, Mesh2D, MeshDescription};
use hho_core::quadrature::gauss_legendre;
use hho_core::Point2;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Polynomial with explicit coefficients `c x^a y^b`.
struct Poly(Vec<(i32, i32, f64)>);

impl Poly {
    fn random(degree: i32, rng: &mut ChaCha8Rng) -> Self {
        let mut t = Vec::new();
        for a in 0..=degree {
            for b in 0..=degree - a {
                t.push((a, b, rng.random_range(-1.0..1.0)));
            }
        }
        Poly(t)
    }
    fn as_case(&self) -> ManufacturedCase {
        let terms = self.0.clone();
        ManufacturedCase::with_solution("poly", hho_core::cases::Domain::UnitSquare, move |x, y| {
            terms.iter().fold(Jet::constant(0.0), |acc, &(a, b, c)| acc + x.powi(a as u32) * y.powi(b as u32) * c)
        })
    }
    fn eval(&self, p: Point2) -> f64 {
        self.0.iter().map(|&(a, b, c)| c * p.x.powi(a) * p.y.powi(b)).sum()
    }
    fn grad(&self, p: Point2) -> Point2 {
        let mut g = Point2::default();
        for &(a, b, c) in &self.0 {
            if a > 0 {
                g.x += c * a as f64 * p.x.powi(a - 1) * p.y.powi(b);
            }
            if b > 0 {
                g.y += c * b as f64 * p.x.powi(a) * p.y.powi(b - 1);
            }
        }
        g
    }
    fn hess(&self, p: Point2) -> [f64; 3] {
        let mut h = [0.0; 3];
        for &(a, b, c) in &self.0 {
            let (af, bf) = (a as f64, b as f64);
            if a > 1 {
                h[0] += c * af * (af - 1.0) * p.x.powi(a - 2) * p.y.powi(b);
            }
            if a > 0 && b > 0 {
                h[1] += c * af * bf * p.x.powi(a - 1) * p.y.powi(b - 1);
            }
            if b > 1 {
                h[2] += c * bf * (bf - 1.0) * p.x.powi(a) * p.y.powi(b - 2);
            }
        }
        h
    }
}

/// `sqrt(2j + 1) P_j(2 tau)` from the explicit Legendre polynomials.
fn legendre(j: usize, tau: f64) -> f64 {
    let x = 2.0 * tau;
    let p = match j {
        0 => 1.0,
        1 => x,
        2 => 0.5 * (3.0 * x * x - 1.0),
        3 => 0.5 * (5.0 * x.powi(3) - 3.0 * x),
        4 => (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
        _ => unimplemented!(),
    };
    p * (2.0 * j as f64 + 1.0).sqrt()
}

fn pentagon() -> Mesh2D {
    let pts = [(0.0, 0.0), (1.0, -0.1), (1.3, 0.7), (0.6, 1.2), (-0.2, 0.8)];
    Mesh2D::build(MeshDescription {
        vertices: pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        cells: vec![(0..5).collect()],
        ..Default::default()
    })
    .unwrap()
}

fn sample_points(cd: &CellData, mesh: &Mesh2D) -> Vec<Point2> {
    let c = mesh.cells[cd.cell].centroid;
    let mut pts = vec![c];
    for &v in &mesh.cells[cd.cell].vertices {
        pts.push(c.lerp(mesh.vertices[v], 0.7));
    }
    pts
}

#[test]
fn sigma_examples() {
    assert_eq!(sigma_k(0.0, 0.1), 1.0);
    assert!((sigma_k(1.0, 0.1) - 100.0).abs() < 1e-10);
    assert_eq!(sigma_k(1e-4, 0.1), 1.0);
}

#[test]
fn reconstruction_reproduces_polynomials_of_degree_k_plus_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rect = build_rect_mesh(4);
    for (mesh, cells) in [(rect, vec![5usize, 0, 3]), (pentagon(), vec![0])] {
        for k in 0..=2 {
            for eps in [0.0, 1e-3, 1.0] {
                for &c in &cells {
                    let cd = CellData::new(&mesh, c, k, &LocalOptions::default()).unwrap();
                    let p = Poly::random(k as i32 + 2, &mut rng);
                    let v = reduce(&mesh, &cd, |x| p.eval(x), |x| p.grad(x)).unwrap();
                    // Boundary faces carry no unknowns; their data enters through the lifting.
                    let case = p.as_case();
                    let lift = build_lifting(&cd, eps, &case, &gram_matrix(&cd, eps)).unwrap();
                    let r = build_reconstruction(&cd, eps).unwrap() * &v + lift;
                    for x in sample_points(&cd, &mesh) {
                        let err = (cd.basis.evaluate(&r, x) - p.eval(x)).abs();
                        assert!(err < 1e-9 * (1.0 + p.eval(x).abs()), "k={k} eps={eps} cell={c}: {err}");
                    }
                    let si = build_stab_interior(&cd, eps, HpScaling::None).unwrap();
                    let scale = si.norm() * v.norm_squared();
                    assert!(v.dot(&(&si * &v)) <= 1e-18 * scale.max(1.0) + 1e-20);
                }
            }
        }
    }
}

#[test]
fn reconstruction_of_constants_and_linears() {
    let mesh = build_rect_mesh(3);
    for k in 0..=2 {
        let cd = CellData::new(&mesh, 4, k, &LocalOptions::default()).unwrap();
        let r = build_reconstruction(&cd, 1.0).unwrap();
        let one = reduce(&mesh, &cd, |_| 1.0, |_| Point2::default()).unwrap();
        let x = reduce(&mesh, &cd, |p| p.x, |_| Point2::new(1.0, 0.0)).unwrap();
        for p in sample_points(&cd, &mesh) {
            assert!((cd.basis.evaluate(&(&r * &one), p) - 1.0).abs() < 1e-12);
            assert!((cd.basis.evaluate(&(&r * &x), p) - p.x).abs() < 1e-10);
        }
    }
}

#[test]
fn reconstruction_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rect = build_rect_mesh(4);
    for (mesh, cells) in [(rect, vec![5usize, 0]), (pentagon(), vec![0])] {
        for k in 0..=2 {
            for eps in [0.0, 1e-3, 1.0] {
                for &c in &cells {
                    let cd = CellData::new(&mesh, c, k, &LocalOptions::default()).unwrap();
                    let r1 = build_reconstruction(&cd, eps).unwrap();
                    let r2 = build_reconstruction_dual(&mesh, &cd, eps).unwrap();
                    let rel = (&r1 - &r2).norm() / r1.norm();
                    assert!(rel < 1e-9, "k={k} eps={eps} cell={c}: {rel}");
                    let v = DVector::from_fn(cd.size, |_, _| rng.random_range(-1.0..1.0));
                    let (a, b) = (&r1 * &v, &r2 * &v);
                    assert!((&a - &b).norm() <= 1e-9 * a.norm());
                }
            }
        }
    }
}

#[test]
fn dual_form_rejects_curved_cells() {
    let mesh = hho_core::mesh::parse_mesh("vertices 3\n0 0\n1 0\n0 1\ngeometries 1\ncircle 0 0 1\ncells 1\n3 0 1 2\narcs 1\n1 2 0\n")
        .and_then(Mesh2D::build)
        .unwrap();
    let cd = CellData::new(&mesh, 0, 1, &LocalOptions::default()).unwrap();
    assert!(build_reconstruction_dual(&mesh, &cd, 1.0).is_err());
    assert!(build_reconstruction(&cd, 1.0).is_ok());
}

#[test]
fn stabilization_examples() {
    let mesh = build_rect_mesh(4);
    let (k, eps) = (1, 1.0);
    let cd = CellData::new(&mesh, 5, k, &LocalOptions::default()).unwrap();
    let si = build_stab_interior(&cd, eps, HpScaling::None).unwrap();
    let f = &cd.faces[1];
    let (ot, _) = f.dofs.unwrap();
    let mut v = DVector::zeros(cd.size);
    v[ot] = 1.0;
    let expected = sigma_k(eps, cd.h) / cd.h * f.length;
    assert!((v.dot(&(&si * &v)) - expected).abs() < 1e-12 * expected);
    assert!((&si - si.transpose()).amax() < 1e-12 * si.amax());
    let ev = si.clone().symmetric_eigenvalues();
    assert!(ev.min() >= -1e-10 * si.norm());
    // Energy seminorm of the same vector.
    assert!((energy_seminorm(&cd, eps, &v).powi(2) - expected).abs() < 1e-12 * expected);

    let bcell = CellData::new(&mesh, 0, k, &LocalOptions::default()).unwrap();
    let sb = build_stab_boundary(&bcell, eps, HpScaling::None);
    let one = reduce(&mesh, &bcell, |_| 1.0, |_| Point2::default()).unwrap();
    let vk = one.rows(0, bcell.n_cell).into_owned();
    let lb: f64 = bcell.faces.iter().filter(|f| f.boundary).map(|f| f.length).sum();
    let expected = sigma_k(eps, bcell.h) / bcell.h * lb;
    assert!((vk.dot(&(&sb * &vk)) - expected).abs() < 1e-12 * expected);
    assert_eq!(build_stab_boundary(&cd, eps, HpScaling::None).amax(), 0.0);
}

#[test]
fn hp_scaling_multiplies_inverse_h_weights() {
    let mesh = build_rect_mesh(4);
    let k = 2;
    let cd = CellData::new(&mesh, 0, k, &LocalOptions::default()).unwrap();
    let s0 = build_stab_boundary(&cd, 0.5, HpScaling::None);
    let s1 = build_stab_boundary(&cd, 0.5, HpScaling::Literal);
    assert!((&s1 - &s0 * 9.0).amax() < 1e-12 * s1.amax());
}

#[test]
fn local_form_on_polynomials_and_its_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = build_rect_mesh(4);
    for k in 0..=2 {
        for eps in [0.0, 1.0] {
            let ops = LocalOperatorSet::build(&mesh, 5, k, eps, &LocalOptions::default()).unwrap();
            let a = &ops.a;
            assert!((a - a.transpose()).amax() <= 1e-12 * a.amax());
            let p = Poly::random(k as i32 + 2, &mut rng);
            let v = reduce(&mesh, &ops.data, |x| p.eval(x), |x| p.grad(x)).unwrap();
            let lhs = v.dot(&(a * &v));
            // ‖∇p‖²_eps by quadrature on the cell.
            let q = &ops.data.quad;
            let rhs = q.integrate(|x| {
                let g = p.grad(x);
                let h = p.hess(x);
                g.dot(g) + eps * (h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2])
            });
            assert!((lhs - rhs).abs() < 1e-10 * rhs, "k={k} eps={eps}: {lhs} vs {rhs}");

            let ev = a.clone().symmetric_eigen();
            let mut order: Vec<usize> = (0..ev.eigenvalues.len()).collect();
            order.sort_by(|&i, &j| ev.eigenvalues[i].partial_cmp(&ev.eigenvalues[j]).unwrap());
            let (l0, l1) = (ev.eigenvalues[order[0]], ev.eigenvalues[order[1]]);
            // One-dimensional kernel, separated from the rest of the spectrum.
            assert!(l0.abs() < 1e-6 * l1, "k={k} eps={eps}: {l0} {l1}");
            let z = ev.eigenvectors.column(order[0]).into_owned();
            let one = reduce(&mesh, &ops.data, |_| 1.0, |_| Point2::default()).unwrap();
            let cos = z.dot(&one).abs() / one.norm();
            assert!((cos - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn eps_zero_operator_is_definite_off_constants() {
    let mesh = pentagon();
    let ops = LocalOperatorSet::build(&mesh, 0, 1, 0.0, &LocalOptions::default()).unwrap();
    // Boundary cell: the boundary penalty controls constants too.
    let ev = ops.a.clone().symmetric_eigenvalues();
    assert!(ev.min() > 1e-10 * ev.max());
    let sb = build_stab_boundary(&ops.data, 0.0, HpScaling::None);
    let sb1 = build_stab_boundary(&ops.data, 1.0, HpScaling::None);
    assert!((sb1 - sb).amax() > 0.0);
}

#[test]
fn projected_normal_term_is_symmetric() {
    let mesh = build_rect_mesh(2);
    let cd = CellData::new(&mesh, 3, 2, &LocalOptions::default()).unwrap();
    let si = build_stab_interior(&cd, 0.3, HpScaling::Symmetric).unwrap();
    assert!((&si - si.transpose()).amax() <= 1e-12 * si.amax());
}

/// Tensor Gauss rule on an axis-aligned rectangle.
fn rect_rule(x0: f64, x1: f64, y0: f64, y1: f64, n: usize) -> Vec<(Point2, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            out.push((
                Point2::new(x0 + (x1 - x0) * x[i], y0 + (y1 - y0) * x[j]),
                w[i] * w[j] * (x1 - x0) * (y1 - y0),
            ));
        }
    }
    out
}

#[test]
fn lifting_matches_dense_oracle_for_linear_data() {
    // Cell [0, 1/4]^2 touches the boundary along x = 0 and y = 0. Plain
    // monomials, a tensor rule, and a pseudo-inverse give the oracle.
    let mesh = build_rect_mesh(4);
    let case = ManufacturedCase::with_solution("x", hho_core::cases::Domain::UnitSquare, |x, _| x);
    let k = 1;
    let cd = CellData::new(&mesh, 0, k, &LocalOptions::default()).unwrap();
    let g = gram_matrix(&cd, 0.0);
    let lift = build_lifting(&cd, 0.0, &case, &g).unwrap();

    let h = 0.25;
    let mons: Vec<(i32, i32)> = (0..=3).flat_map(|o| (0..=o).map(move |b| (o - b, b))).collect();
    let grad = |p: Point2, (a, b): (i32, i32)| {
        let gx = if a > 0 { a as f64 * p.x.powi(a - 1) * p.y.powi(b) } else { 0.0 };
        let gy = if b > 0 { b as f64 * p.x.powi(a) * p.y.powi(b - 1) } else { 0.0 };
        Point2::new(gx, gy)
    };
    let n = mons.len();
    let mut kmat = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (p, w) in rect_rule(0.0, h, 0.0, h, 8) {
        for i in 0..n {
            for j in 0..n {
                kmat[(i, j)] += w * grad(p, mons[i]).dot(grad(p, mons[j]));
            }
            kmat[(i, n)] += w * p.x.powi(mons[i].0) * p.y.powi(mons[i].1);
        }
    }
    for i in 0..n {
        kmat[(n, i)] = kmat[(i, n)];
    }
    // Boundary edges: bottom y = 0 with n = (0, -1), left x = 0 with n = (-1, 0).
    let (x, w) = gauss_legendre(8);
    for q in 0..8 {
        let s = h * x[q];
        let wq = h * w[q];
        let bottom = Point2::new(s, 0.0);
        let left = Point2::new(0.0, s);
        for i in 0..n {
            rhs[i] += wq * bottom.x * -grad(bottom, mons[i]).y;
            rhs[i] += wq * left.x * -grad(left, mons[i]).x;
        }
    }
    let sol = kmat.svd(true, true).solve(&rhs, 1e-13).unwrap();
    for p in [Point2::new(0.1, 0.1), Point2::new(0.2, 0.03), Point2::new(0.01, 0.24)] {
        let oracle: f64 = (0..n).map(|i| sol[i] * p.x.powi(mons[i].0) * p.y.powi(mons[i].1)).sum();
        let got = cd.basis.evaluate(&lift, p);
        assert!((oracle - got).abs() < 1e-10, "{oracle} vs {got}");
    }
}

#[test]
fn lifting_vanishes_without_boundary_data() {
    let mesh = build_rect_mesh(4);
    let case = ManufacturedCase::with_source("zero", hho_core::cases::Domain::UnitSquare, |_| 0.0);
    let smooth = ManufacturedCase::by_name("smooth-square", 1).unwrap();
    let cd0 = CellData::new(&mesh, 0, 1, &LocalOptions::default()).unwrap();
    let cd5 = CellData::new(&mesh, 5, 1, &LocalOptions::default()).unwrap();
    let g0 = gram_matrix(&cd0, 1.0);
    assert_eq!(build_lifting(&cd0, 1.0, &case, &g0).unwrap().amax(), 0.0);
    let g5 = gram_matrix(&cd5, 1.0);
    assert_eq!(build_lifting(&cd5, 1.0, &smooth, &g5).unwrap().amax(), 0.0);
}

#[test]
fn load_vector_structure() {
    let mesh = build_rect_mesh(4);
    let smooth = ManufacturedCase::by_name("smooth-square", 1).unwrap();
    let ops = LocalOperatorSet::build(&mesh, 5, 1, 1.0, &LocalOptions::default()).unwrap();
    let b = ops.rhs(&smooth);
    assert!(b.rows(0, ops.data.n_cell).amax() > 0.0);
    assert_eq!(b.rows(ops.data.n_cell, ops.size() - ops.data.n_cell).amax(), 0.0);
    let zero = ManufacturedCase::with_source("zero", hho_core::cases::Domain::UnitSquare, |_| 0.0);
    let b0 = LocalOperatorSet::build(&mesh, 0, 1, 1.0, &LocalOptions::default()).unwrap().rhs(&zero);
    assert_eq!(b0.amax(), 0.0);
}

#[test]
fn one_cell_problem_is_exact_for_polynomials() {
    let mesh = build_rect_mesh(1);
    for k in 0..=2 {
        for eps in [0.0, 1e-2, 1.0] {
            for hp in [HpScaling::None, HpScaling::Literal] {
                let case = ManufacturedCase::polynomial(k + 2);
                let opts = LocalOptions { hp, ..Default::default() };
                let ops = LocalOperatorSet::build(&mesh, 0, k, eps, &opts).unwrap();
                let b = local_rhs(&ops.data, eps, hp, &case, &ops.r);
                let x = ops.a.clone().cholesky().unwrap().solve(&b);
                let exact = reduce(&mesh, &ops.data, |p| case.u(p), |p| case.grad(p)).unwrap();
                let e = &x - &exact;
                let em = energy_matrix(&ops.data, eps);
                let err = e.dot(&(&em * &e)).sqrt() / exact.dot(&(&em * &exact)).sqrt();
                assert!(err < 1e-9, "k={k} eps={eps} hp={hp:?}: {err}");
            }
        }
    }
}

#[test]
fn seminorm_matches_term_by_term_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mesh = build_rect_mesh(4);
    let (k, eps) = (1, 0.37);
    for c in [0usize, 5] {
        let cd = CellData::new(&mesh, c, k, &LocalOptions::default()).unwrap();
        let v = DVector::from_fn(cd.size, |_, _| rng.random_range(-1.0..1.0));
        let got = energy_seminorm(&cd, eps, &v).powi(2);

        let cell = &mesh.cells[c];
        let (lo, hi) = (mesh.vertices[cell.vertices[0]], mesh.vertices[cell.vertices[2]]);
        let vk = v.rows(0, cd.n_cell).into_owned();
        let sigma = sigma_k(eps, cd.h);
        let mut oracle = 0.0;
        for (p, w) in rect_rule(lo.x, hi.x, lo.y, hi.y, 8) {
            let t = cd.basis.eval(p, 2);
            let val = |r: usize| t.row(r).transpose().dot(&vk);
            oracle += w * (val(1).powi(2) + val(2).powi(2) + eps * (val(3).powi(2) + 2.0 * val(4).powi(2) + val(5).powi(2)));
        }
        let (gx, gw) = gauss_legendre(8);
        for f in &cd.faces {
            let face = &mesh.faces[f.face];
            let [a, b] = face.endpoints;
            let nf = face.normal_at(a);
            for q in 0..8 {
                let p = a.lerp(b, gx[q]);
                let w = gw[q] * face.length;
                let tau = gx[q] - 0.5;
                let t = cd.basis.eval(p, 1);
                let val = t.row(0).transpose().dot(&vk);
                let dn = nf.x * t.row(1).transpose().dot(&vk) + nf.y * t.row(2).transpose().dot(&vk);
                match f.dofs {
                    Some((ot, on)) => {
                        let vf: f64 = (0..k + 3).map(|j| v[ot + j] * legendre(j, tau)).sum();
                        let gam: f64 = (0..k + 1).map(|j| v[on + j] * legendre(j, tau)).sum();
                        oracle += w * sigma / cd.h * (vf - val).powi(2);
                        oracle += w * sigma * cd.h * (gam - dn).powi(2);
                    }
                    None => {
                        let gx_ = t.row(1).transpose().dot(&vk);
                        let gy_ = t.row(2).transpose().dot(&vk);
                        oracle += w * sigma / cd.h * val * val;
                        oracle += w * eps / cd.h * (gx_ * gx_ + gy_ * gy_);
                    }
                }
            }
        }
        assert!((got - oracle).abs() < 1e-11 * oracle, "cell {c}: {got} vs {oracle}");
    }
}

#[test]
fn reduction_examples() {
    let mesh = build_rect_mesh(4);
    let cd = CellData::new(&mesh, 5, 1, &LocalOptions::default()).unwrap();
    let one = reduce(&mesh, &cd, |_| 1.0, |_| Point2::default()).unwrap();
    for p in sample_points(&cd, &mesh) {
        assert!((cd.basis.evaluate(&one.rows(0, cd.n_cell).into_owned(), p) - 1.0).abs() < 1e-13);
    }
    for f in &cd.faces {
        let (ot, on) = f.dofs.unwrap();
        assert!((one[ot] - 1.0).abs() < 1e-13);
        assert!(one.rows(ot + 1, 3).amax() < 1e-13);
        assert!(one.rows(on, 2).amax() < 1e-13);
    }

    // sin(pi x) sin(pi y) against per-face least squares on a fine Gauss rule.
    let pi = std::f64::consts::PI;
    let u = |p: Point2| (pi * p.x).sin() * (pi * p.y).sin();
    let grad = |p: Point2| Point2::new(pi * (pi * p.x).cos() * (pi * p.y).sin(), pi * (pi * p.x).sin() * (pi * p.y).cos());
    let v = reduce(&mesh, &cd, u, grad).unwrap();
    let (gx, gw) = gauss_legendre(20);
    for f in &cd.faces {
        let face = &mesh.faces[f.face];
        let [a, b] = face.endpoints;
        let nf = face.normal_at(a);
        let (ot, on) = f.dofs.unwrap();
        for (deg, off, fun) in [
            (3usize, ot, &(|p: Point2| u(p)) as &dyn Fn(Point2) -> f64),
            (1, on, &(|p: Point2| grad(p).dot(nf)) as &dyn Fn(Point2) -> f64),
        ] {
            let mut am = DMatrix::zeros(20, deg + 1);
            let mut rhs = DVector::zeros(20);
            for q in 0..20 {
                let sw = gw[q].sqrt();
                for j in 0..=deg {
                    am[(q, j)] = sw * legendre(j, gx[q] - 0.5);
                }
                rhs[q] = sw * fun(a.lerp(b, gx[q]));
            }
            let ls = am.svd(true, true).solve(&rhs, 1e-15).unwrap();
            assert!((&ls - v.rows(off, deg + 1)).amax() < 1e-9, "{} vs {}", ls.transpose(), v.rows(off, deg + 1).transpose());
        }
    }
}

/// For smooth non-polynomial `v`, `E_K(v) = R(Î v) + L(v)` satisfies
/// `(∇E_K v, ∇w)_eps = eps[(v, Δ²w) - (v, ∂_nΔw)_∂K + (∂_n v, ∂_nn w)_∂K
/// + (∂_t v, ∂_nt w)_∂K + (∂_t(Π v - v), ∂_nt w)_∂K^i] - (v, Δw) + (v, ∂_n w)_∂K`.
#[test]
fn reduction_reconstruction_identity_for_smooth_functions() {
    use hho_core::basis::{d, FaceBasis};
    let case = ManufacturedCase::with_solution("smooth", hho_core::cases::Domain::UnitSquare, |x, y| {
        (x * 2.0 + y * 1.3).sin() + (x * y * 3.0).exp()
    });
    let mesh = build_rect_mesh(3);
    for k in 0..=2 {
        for eps in [0.0, 1e-3, 1.0] {
            for c in [0usize, 1, 4] {
                let ops = LocalOperatorSet::build(&mesh, c, k, eps, &LocalOptions::default()).unwrap();
                let cd = &ops.data;
                let v = reduce(&mesh, cd, |p| case.u(p), |p| case.grad(p)).unwrap();
                let e = &ops.r * &v + ops.lifting(&case).unwrap();
                let lhs = &ops.g * &e;
                let mut rhs = DVector::zeros(cd.n_cell);
                for (&p, &w) in cd.quad.points.iter().zip(&cd.quad.weights) {
                    let t = cd.basis.eval(p, 4);
                    let row = |r: usize| t.row(r).transpose();
                    let op = (row(d::XXXX) + row(d::XXYY) * 2.0 + row(d::YYYY)) * eps - row(d::XX) - row(d::YY);
                    rhs.axpy(w * case.u(p), &op, 1.0);
                }
                for f in &cd.faces {
                    let fb = FaceBasis::new(k + 2, f.length);
                    for (q, (&p, &w)) in f.rule.points.iter().zip(&f.rule.weights).enumerate() {
                        let (n, t) = (f.normals[q], f.tangents[q]);
                        let tab = cd.basis.eval(p, 3);
                        let row = |r: usize| tab.row(r).transpose();
                        let dn = row(d::X) * n.x + row(d::Y) * n.y;
                        let nn = row(d::XX) * (n.x * n.x) + row(d::XY) * (2.0 * n.x * n.y) + row(d::YY) * (n.y * n.y);
                        let nt = row(d::XX) * (n.x * t.x) + row(d::XY) * (n.x * t.y + n.y * t.x) + row(d::YY) * (n.y * t.y);
                        let nlap = (row(d::XXX) + row(d::XYY)) * n.x + (row(d::XXY) + row(d::YYY)) * n.y;
                        let g = case.grad(p);
                        let u = case.u(p);
                        let mut ut = g.dot(t);
                        if let Some((ot, _)) = f.dofs {
                            ut = fb.derivatives(f.rule.params[q]).dot(&v.rows(ot, k + 3)) * f.sign;
                        }
                        rhs.axpy(w * u, &dn, 1.0);
                        rhs.axpy(w * eps, &(nn * g.dot(n) + nt * ut - nlap * u), 1.0);
                    }
                }
                let rel = (&lhs - &rhs).norm() / rhs.norm();
                assert!(rel < 1e-8, "k={k} eps={eps} cell={c}: {rel:.3e}");
            }
        }
    }
}
