//! Bivariate Taylor jets truncated at total order four. Manufactured solutions
//! are written once as jet expressions and every derivative needed by the
//! right-hand side and boundary data falls out exactly.

use std::ops::{Add, Mul, Neg, Sub};

use crate::basis::{deriv_index, num_derivs};

const ORDER: usize = 4;
const N: usize = num_derivs(ORDER);

fn factorial(n: usize) -> f64 {
    (1..=n).map(|m| m as f64).product()
}

/// Taylor coefficients `c[(i, j)] = ∂x^i ∂y^j f / (i! j!)` at a base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; N],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The coordinate function `x` at base value `x0`.
    pub fn x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[deriv_index(1, 0)] = 1.0;
        j
    }

    /// The coordinate function `y` at base value `y0`.
    pub fn y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[deriv_index(0, 1)] = 1.0;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `∂x^i ∂y^j` at the base point, `i + j <= 4`.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        self.c[deriv_index(i, j)] * factorial(i) * factorial(j)
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.deriv(1, 0), self.deriv(0, 1)]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        let xy = self.deriv(1, 1);
        [[self.deriv(2, 0), xy], [xy, self.deriv(0, 2)]]
    }

    pub fn laplacian(&self) -> f64 {
        self.deriv(2, 0) + self.deriv(0, 2)
    }

    pub fn bilaplacian(&self) -> f64 {
        self.deriv(4, 0) + 2.0 * self.deriv(2, 2) + self.deriv(0, 4)
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| acc * self)
    }

    /// `g(self)` for a scalar function given its derivatives `g^(m)` at the
    /// base value, `m = 0..=4`.
    pub fn compose(self, g: [f64; ORDER + 1]) -> Self {
        let mut delta = self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(g[0]);
        let mut pow = Self::constant(1.0);
        for (m, gm) in g.iter().enumerate().skip(1) {
            pow = pow * delta;
            out = out + pow.scale(gm / factorial(m));
        }
        out
    }

    pub fn exp(self) -> Self {
        let e = self.value().exp();
        self.compose([e; 5])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s, c])
    }
}

impl Add for Jet {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.c.iter_mut().zip(o.c).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Self;
    fn add(mut self, v: f64) -> Self {
        self.c[0] += v;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for o1 in 0..=ORDER {
            for j1 in 0..=o1 {
                let a = self.c[deriv_index(o1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for o2 in 0..=ORDER - o1 {
                    for j2 in 0..=o2 {
                        c[deriv_index(o1 - j1 + o2 - j2, j1 + j2)] += a * o.c[deriv_index(o2 - j2, j2)];
                    }
                }
            }
        }
        Self { c }
    }
}
