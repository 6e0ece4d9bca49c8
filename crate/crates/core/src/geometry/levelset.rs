//! Slicing of a mesh by the level sets of the piecewise-linear distance
//! function: exact clipped polygons for `{phi > d}` and chord segments for
//! `{phi = d}`.
//!
//! A vertex counts as above the level when `phi - d > 0`; vertices exactly on
//! the level count as below, so an edge lying on the level is reported once.

use crate::geometry::Mesh;
use crate::Point;

const GAUSS_OFFSET: f64 = 0.211_324_865_405_187_1; // (1 - 1/sqrt(3)) / 2

/// Polygon `T ∩ {phi_h > d}` with up to four vertices, each carried with its
/// barycentric coordinates in the parent triangle.
#[derive(Clone, Debug)]
pub struct ClippedPolygon {
    pub triangle: usize,
    pub points: Vec<Point>,
    pub bary: Vec<[f64; 3]>,
}

impl ClippedPolygon {
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        let mut twice = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            twice += a[0] * b[1] - a[1] * b[0];
        }
        0.5 * twice
    }

    /// Exact integral of `u v` over the polygon for P1 fields given at the
    /// parent triangle's vertices.
    pub fn integrate_product(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        let eval = |b: &[f64; 3], f: [f64; 3]| b[0] * f[0] + b[1] * f[1] + b[2] * f[2];
        let uv: Vec<(f64, f64)> = self.bary.iter().map(|b| (eval(b, u), eval(b, v))).collect();
        let mut total = 0.0;
        for k in 1..self.points.len().saturating_sub(1) {
            let (p0, p1, p2) = (self.points[0], self.points[k], self.points[k + 1]);
            let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]));
            let (a, b, c) = (uv[0], uv[k], uv[k + 1]);
            let diag = a.0 * a.1 + b.0 * b.1 + c.0 * c.1;
            let cross = a.0 * (b.1 + c.1) + b.0 * (a.1 + c.1) + c.0 * (a.1 + b.1);
            total += area * (2.0 * diag + cross) / 12.0;
        }
        total
    }
}

/// Chord `T ∩ {phi_h = d}` with the outward normal of `{phi_h > d}`.
#[derive(Clone, Copy, Debug)]
pub struct Chord {
    pub triangle: usize,
    pub ends: [Point; 2],
    pub bary: [[f64; 3]; 2],
    /// `-grad phi_h / |grad phi_h|`, constant on the triangle.
    pub normal: Point,
    pub grad_phi_norm: f64,
}

impl Chord {
    pub fn length(&self) -> f64 {
        (self.ends[1][0] - self.ends[0][0]).hypot(self.ends[1][1] - self.ends[0][1])
    }
}

/// One quadrature node on a chord.
#[derive(Clone, Copy, Debug)]
pub struct ChordSample {
    pub triangle: usize,
    pub point: Point,
    pub bary: [f64; 3],
    pub normal: Point,
    pub grad_phi_norm: f64,
}

impl ChordSample {
    /// Value at this node of the P1 field with vertex values `f`.
    pub fn interpolate(&self, f: [f64; 3]) -> f64 {
        self.bary[0] * f[0] + self.bary[1] * f[1] + self.bary[2] * f[2]
    }
}

fn levels(mesh: &Mesh, t: usize, d: f64) -> [f64; 3] {
    let tri = mesh.triangles()[t];
    let phi = mesh.phi();
    [phi[tri[0]] - d, phi[tri[1]] - d, phi[tri[2]] - d]
}

const UNIT: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn edge_point(pts: &[Point; 3], s: &[f64; 3], i: usize, j: usize) -> (Point, [f64; 3]) {
    let w = s[i] / (s[i] - s[j]);
    let p = [pts[i][0] + w * (pts[j][0] - pts[i][0]), pts[i][1] + w * (pts[j][1] - pts[i][1])];
    let mut b = [0.0; 3];
    b[i] = 1.0 - w;
    b[j] = w;
    (p, b)
}

/// The part of triangle `t` where the interpolated distance exceeds `d`.
pub fn clip_above(mesh: &Mesh, t: usize, d: f64) -> Option<ClippedPolygon> {
    let s = levels(mesh, t, d);
    let above = s.map(|v| v > 0.0);
    if !above.iter().any(|&a| a) {
        return None;
    }
    let pts = mesh.triangle_points(t);
    let mut points = Vec::with_capacity(4);
    let mut bary = Vec::with_capacity(4);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if above[i] {
            points.push(pts[i]);
            bary.push(UNIT[i]);
        }
        if above[i] != above[j] {
            let (p, b) = edge_point(&pts, &s, i, j);
            points.push(p);
            bary.push(b);
        }
    }
    Some(ClippedPolygon { triangle: t, points, bary })
}

/// The segment of triangle `t` on the level `phi_h = d`, if any.
pub fn chord(mesh: &Mesh, t: usize, d: f64) -> Option<Chord> {
    let s = levels(mesh, t, d);
    let above = s.map(|v| v > 0.0);
    let count = above.iter().filter(|&&a| a).count();
    if count == 0 || count == 3 {
        return None;
    }
    let pts = mesh.triangle_points(t);
    let mut ends = [[0.0; 2]; 2];
    let mut bary = [[0.0; 3]; 2];
    let mut found = 0;
    for i in 0..3 {
        let j = (i + 1) % 3;
        if above[i] != above[j] {
            let (p, b) = edge_point(&pts, &s, i, j);
            ends[found] = p;
            bary[found] = b;
            found += 1;
        }
    }
    let grad = mesh.gradient(t, mesh.phi());
    let g = grad[0].hypot(grad[1]);
    if g == 0.0 {
        return None;
    }
    Some(Chord {
        triangle: t,
        ends,
        bary,
        normal: [-grad[0] / g, -grad[1] / g],
        grad_phi_norm: g,
    })
}

/// `sum_T density[T] * area(T ∩ {phi_h > d})`, summed in triangle order.
pub fn region_integral(mesh: &Mesh, density: &[f64], d: f64) -> f64 {
    region_integral_with(mesh, d, |poly| density[poly.triangle] * poly.area())
}

/// Sum of `integrand` over the clipped polygons of all triangles, in triangle order.
pub fn region_integral_with(mesh: &Mesh, d: f64, mut integrand: impl FnMut(&ClippedPolygon) -> f64) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        if let Some(poly) = clip_above(mesh, t, d) {
            total += integrand(&poly);
        }
    }
    total
}

/// Integral of `density` along the level curve `{phi_h = d}` with two-point
/// Gauss quadrature on every chord (exact for quadratics along the chord).
pub fn levelset_integral(mesh: &Mesh, d: f64, mut density: impl FnMut(&ChordSample) -> f64) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        let Some(c) = chord(mesh, t, d) else { continue };
        let len = c.length();
        if len == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for w in [GAUSS_OFFSET, 1.0 - GAUSS_OFFSET] {
            let point = [
                c.ends[0][0] + w * (c.ends[1][0] - c.ends[0][0]),
                c.ends[0][1] + w * (c.ends[1][1] - c.ends[0][1]),
            ];
            let mut bary = [0.0; 3];
            for k in 0..3 {
                bary[k] = (1.0 - w) * c.bary[0][k] + w * c.bary[1][k];
            }
            acc += density(&ChordSample {
                triangle: t,
                point,
                bary,
                normal: c.normal,
                grad_phi_norm: c.grad_phi_norm,
            });
        }
        total += 0.5 * len * acc;
    }
    total
}
