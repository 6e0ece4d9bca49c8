//! 2×2 symmetric matrices, the pointwise values of conductivities and metrics.

use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn scalar(c: f64) -> Self {
        Sym2 { xx: c, xy: 0.0, yy: c }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Sym2 { xx: a, xy: 0.0, yy: b }
    }

    /// `R(angle) diag(a, b) R(angle)^T`.
    pub fn rotated_diag(a: f64, b: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Sym2 {
            xx: a * c * c + b * s * s,
            xy: (a - b) * c * s,
            yy: a * s * s + b * c * c,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Sym2 {
            xx: self.yy / det,
            xy: -self.xy / det,
            yy: self.xx / det,
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let half_gap = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - half_gap, mean + half_gap)
    }

    pub fn is_spd(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2 {
            xx: c * self.xx,
            xy: c * self.xy,
            yy: c * self.yy,
        }
    }

    pub fn add(&self, other: &Sym2) -> Sym2 {
        Sym2 {
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    pub fn apply(&self, v: Point) -> Point {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `v^T M w`.
    pub fn form(&self, v: Point, w: Point) -> f64 {
        let mw = self.apply(w);
        v[0] * mw[0] + v[1] * mw[1]
    }

    /// Symmetric part of the product `self * other`.
    pub fn sym_product(&self, other: &Sym2) -> Sym2 {
        let xx = self.xx * other.xx + self.xy * other.xy;
        let xy = self.xx * other.xy + self.xy * other.yy;
        let yx = self.xy * other.xx + self.yy * other.xy;
        let yy = self.xy * other.xy + self.yy * other.yy;
        Sym2 {
            xx,
            xy: 0.5 * (xy + yx),
            yy,
        }
    }

    pub fn frobenius(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Sym2) -> f64 {
        (self.xx - other.xx)
            .abs()
            .max((self.xy - other.xy).abs())
            .max((self.yy - other.yy).abs())
    }
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn axpy(a: Point, s: f64, b: Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1]]
}
