//! Built-in manufactured problems and the boundary data they induce.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{HhoError, Result};
use crate::geometry::{ArcGeometry, Point2};
use crate::jet::Jet;

/// Names accepted by [`ManufacturedCase::by_name`].
pub const CASE_NAMES: [&str; 4] = ["smooth-square", "smooth-annulus", "layer-annulus", "poly-exact"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// Unit disc centred at the origin minus the disc of radius 0.4 centred at
    /// (0.25, 0.25).
    Annulus,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::Annulus => PI * (1.0 - 0.16),
        }
    }

    /// Circles carrying curved boundary faces: outer circle first, then the hole.
    pub fn circles(self) -> Vec<ArcGeometry> {
        match self {
            Domain::UnitSquare => Vec::new(),
            Domain::Annulus => vec![
                ArcGeometry::new(Point2::new(0.0, 0.0), 1.0),
                ArcGeometry::new(Point2::new(0.25, 0.25), 0.4),
            ],
        }
    }
}

type SolutionFn = dyn Fn(Jet, Jet) -> Jet + Send + Sync;
type SourceFn = dyn Fn(Point2) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Exact(Arc<SolutionFn>),
    /// Known source, homogeneous Dirichlet and Neumann data, unknown solution.
    Source(Arc<SourceFn>),
}

/// A right-hand side together with Dirichlet data `g_D`, its tangential
/// derivative, and Neumann data `g_N`. Cases built from an exact solution `u`
/// derive `f = eps Δ²u - Δu` and all boundary data from it.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub domain: Domain,
    kind: Kind,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact", &self.has_exact())
            .finish()
    }
}

impl ManufacturedCase {
    pub fn with_solution(
        name: impl Into<String>,
        domain: Domain,
        u: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), domain, kind: Kind::Exact(Arc::new(u)) }
    }

    pub fn with_source(
        name: impl Into<String>,
        domain: Domain,
        f: impl Fn(Point2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), domain, kind: Kind::Source(Arc::new(f)) }
    }

    /// Built-in cases. `k` fixes the degree `k + 2` of `poly-exact`.
    pub fn by_name(name: &str, k: usize) -> Result<Self> {
        match name {
            "smooth-square" => Ok(Self::with_solution(name, Domain::UnitSquare, |x, y| {
                let s = (x * PI).sin() * (y * PI).sin();
                s * s + (-((x + -0.5) * (x + -0.5)) - (y + -0.5) * (y + -0.5)).exp()
            })),
            "smooth-annulus" => Ok(Self::with_solution(name, Domain::Annulus, |x, y| {
                let r2 = x * x + y * y;
                (((r2 + -1.0) * PI).sin() + 1.0) * (-r2).exp()
            })),
            "layer-annulus" => Ok(Self::with_source(name, Domain::Annulus, |_| 10.0)),
            "poly-exact" => Ok(Self::polynomial(k + 2)),
            _ => Err(HhoError::InvalidInput(format!(
                "unknown case '{name}' (expected one of {})",
                CASE_NAMES.join(", ")
            ))),
        }
    }

    /// A fixed polynomial of total degree `degree` on the unit square with
    /// every monomial present.
    pub fn polynomial(degree: usize) -> Self {
        Self::with_solution("poly-exact", Domain::UnitSquare, move |x, y| {
            let mut u = Jet::constant(0.0);
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let c = if (a + b) % 2 == 0 { 1.0 } else { -1.0 } / (1.0 + a as f64 + 2.0 * b as f64);
                    u = u + x.powi(a as u32) * y.powi(b as u32) * c;
                }
            }
            u
        })
    }

    pub fn has_exact(&self) -> bool {
        matches!(self.kind, Kind::Exact(_))
    }

    /// Jet of the exact solution at `p`, if known.
    pub fn jet(&self, p: Point2) -> Option<Jet> {
        match &self.kind {
            Kind::Exact(u) => Some(u(Jet::x(p.x), Jet::y(p.y))),
            Kind::Source(_) => None,
        }
    }

    pub fn u(&self, p: Point2) -> f64 {
        self.jet(p).map_or(0.0, |j| j.value())
    }

    pub fn grad(&self, p: Point2) -> Point2 {
        self.jet(p).map_or(Point2::default(), |j| {
            let g = j.grad();
            Point2::new(g[0], g[1])
        })
    }

    pub fn hessian(&self, p: Point2) -> [[f64; 2]; 2] {
        self.jet(p).map_or([[0.0; 2]; 2], |j| j.hessian())
    }

    pub fn f(&self, p: Point2, eps: f64) -> f64 {
        match &self.kind {
            Kind::Exact(u) => {
                let j = u(Jet::x(p.x), Jet::y(p.y));
                eps * j.bilaplacian() - j.laplacian()
            }
            Kind::Source(f) => f(p),
        }
    }

    pub fn g_d(&self, p: Point2) -> f64 {
        self.u(p)
    }

    /// `n . ∇u` for the unit normal `n`.
    pub fn g_n(&self, p: Point2, n: Point2) -> f64 {
        self.grad(p).dot(n)
    }

    /// Tangential derivative `t . ∇g_D` for the unit tangent `t`.
    pub fn dt_g_d(&self, p: Point2, t: Point2) -> f64 {
        self.grad(p).dot(t)
    }
}
