//! Planar vectors and the periodic chart domain.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by 90 degrees.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Radial projection onto the closed ball of the given radius.
    pub fn clamp_norm(self, radius: f64) -> Vec2 {
        let n = self.norm();
        if n > radius {
            if radius <= 0.0 {
                Vec2::ZERO
            } else {
                self * (radius / n)
            }
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rectangular domain `[0, x_max) x [0, y_max)` with periodic boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_max: f64,
    pub y_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            x_max: 10.0,
            y_max: 10.0,
        }
    }
}

#[inline]
fn wrap_coord(v: f64, period: f64) -> f64 {
    let r = v.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

impl Domain {
    pub fn new(x_max: f64, y_max: f64) -> Self {
        Domain { x_max, y_max }
    }

    pub fn is_valid(&self) -> bool {
        self.x_max.is_finite() && self.y_max.is_finite() && self.x_max > 0.0 && self.y_max > 0.0
    }

    /// Maps `p` into the fundamental domain.
    #[inline]
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        Vec2::new(wrap_coord(p.x, self.x_max), wrap_coord(p.y, self.y_max))
    }

    /// Minimal-image displacement `a - b`.
    #[inline]
    pub fn delta(&self, a: Vec2, b: Vec2) -> Vec2 {
        let mut d = a - b;
        d.x -= self.x_max * (d.x / self.x_max).round();
        d.y -= self.y_max * (d.y / self.y_max).round();
        d
    }

    #[inline]
    pub fn distance(&self, a: Vec2, b: Vec2) -> f64 {
        self.delta(a, b).norm()
    }
}
