use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn rot90(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A circle carrying curved boundary faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcGeometry {
    pub center: Point2,
    pub radius: f64,
}

impl ArcGeometry {
    pub fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn point_at(&self, theta: f64) -> Point2 {
        self.center + Point2::new(theta.cos(), theta.sin()) * self.radius
    }

    /// Derivative of `point_at` with respect to the angle.
    pub fn tangent_at(&self, theta: f64) -> Point2 {
        Point2::new(-theta.sin(), theta.cos()) * self.radius
    }

    pub fn angle_of(&self, p: Point2) -> f64 {
        (p.y - self.center.y).atan2(p.x - self.center.x)
    }

    /// Signed distance of `p` from the circle (positive outside).
    pub fn distance(&self, p: Point2) -> f64 {
        p.dist(self.center) - self.radius
    }

    /// Signed angle in (-pi, pi] of the minor arc running from `a` to `b`.
    pub fn minor_sweep(&self, a: Point2, b: Point2) -> f64 {
        let mut d = self.angle_of(b) - self.angle_of(a);
        let two_pi = 2.0 * std::f64::consts::PI;
        while d > std::f64::consts::PI {
            d -= two_pi;
        }
        while d <= -std::f64::consts::PI {
            d += two_pi;
        }
        d
    }
}
