use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::mat2::{norm, sub};
use crate::Point;

/// Dense parameter samples used to measure and resample each ring.
const RING_SAMPLES: usize = 4096;
/// Ring spacing relative to the target edge length (equilateral height).
const RING_SPACING: f64 = 0.866;
/// Smallest mean along-ring spacing, relative to `h`, before a ring is resampled.
const MIN_SPACING: f64 = 0.4;

/// Conforming triangulation with per-vertex distance to the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_cycle: Vec<usize>,
    boundary_param: Vec<f64>,
    phi: Vec<f64>,
    h: f64,
}

impl Mesh {
    /// Assembles a mesh from raw parts, reorienting triangles counterclockwise
    /// and rejecting degenerate ones.
    ///
    /// `boundary_param` holds the curve parameter of each boundary vertex in
    /// cycle order; when empty, the polar angle is used.
    pub fn from_parts(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary_cycle: Vec<usize>,
        boundary_param: Vec<f64>,
        phi: Vec<f64>,
        h: f64,
    ) -> Result<Self> {
        if phi.len() != vertices.len() {
            return Err(Error::InvalidInput(format!(
                "phi has {} entries for {} vertices",
                phi.len(),
                vertices.len()
            )));
        }
        if triangles.iter().flatten().chain(boundary_cycle.iter()).any(|&i| i >= vertices.len()) {
            return Err(Error::InvalidInput("vertex index out of range".into()));
        }
        let min_area = 1e-14 * h * h;
        for (index, tri) in triangles.iter_mut().enumerate() {
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.abs() <= min_area {
                return Err(Error::DegenerateTriangle { index, area });
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let boundary_param = if boundary_param.is_empty() {
            boundary_cycle
                .iter()
                .map(|&i| vertices[i][1].atan2(vertices[i][0]).rem_euclid(TAU))
                .collect()
        } else if boundary_param.len() == boundary_cycle.len() {
            boundary_param
        } else {
            return Err(Error::InvalidInput("boundary_param length mismatch".into()));
        };
        Ok(Mesh {
            vertices,
            triangles,
            boundary_cycle,
            boundary_param,
            phi,
            h,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_cycle(&self) -> &[usize] {
        &self.boundary_cycle
    }

    /// Curve parameter of each boundary vertex, in cycle order.
    pub fn boundary_param(&self) -> &[f64] {
        &self.boundary_param
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Length of the boundary polygon.
    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges().map(|(a, b)| norm(sub(self.vertices[b], self.vertices[a]))).sum()
    }

    /// Consecutive boundary vertex pairs, closing the cycle.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.boundary_cycle.len();
        (0..k).map(move |i| (self.boundary_cycle[i], self.boundary_cycle[(i + 1) % k]))
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| norm(sub(self.vertices[a], self.vertices[b])))
            .fold(0.0, f64::max)
    }

    /// Constant gradient of the P1 interpolant of `values` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> Point {
        let [i, j, k] = self.triangles[t];
        let grads = self.barycentric_gradients(t);
        let (a, b, c) = (values[i], values[j], values[k]);
        [
            a * grads[0][0] + b * grads[1][0] + c * grads[2][0],
            a * grads[0][1] + b * grads[1][1] + c * grads[2][1],
        ]
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Point; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let twice_area = 2.0 * signed_area(p0, p1, p2);
        let g = |pj: Point, pk: Point| [(pj[1] - pk[1]) / twice_area, (pk[0] - pj[0]) / twice_area];
        [g(p1, p2), g(p2, p0), g(p0, p1)]
    }

    /// Text export: header line, `x y phi` per vertex, `i j k` per triangle,
    /// then the boundary cycle, one index per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "vertices {} triangles {} boundary {} h {:.16e}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_cycle.len(),
            self.h
        );
        for (p, phi) in self.vertices.iter().zip(&self.phi) {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], phi);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        for b in &self.boundary_cycle {
            let _ = writeln!(out, "{b}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("mesh text: {msg}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 8 || header[0] != "vertices" || header[2] != "triangles" || header[4] != "boundary" || header[6] != "h" {
            return Err(bad("malformed header"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| bad("bad real"));
        let n = parse_usize(header[1])?;
        let m = parse_usize(header[3])?;
        let k = parse_usize(header[5])?;
        let h = parse_f64(header[7])?;
        let mut vertices = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        for _ in 0..n {
            let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated vertices"))?.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("vertex line needs 3 fields"));
            }
            vertices.push([parse_f64(f[0])?, parse_f64(f[1])?]);
            phi.push(parse_f64(f[2])?);
        }
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated triangles"))?.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("triangle line needs 3 fields"));
            }
            triangles.push([parse_usize(f[0])?, parse_usize(f[1])?, parse_usize(f[2])?]);
        }
        let mut boundary = Vec::with_capacity(k);
        for _ in 0..k {
            boundary.push(parse_usize(lines.next().ok_or_else(|| bad("truncated boundary"))?.trim())?);
        }
        Mesh::from_parts(vertices, triangles, boundary, Vec::new(), phi, h)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn polygon_length(points: &[Point]) -> f64 {
    let k = points.len();
    (0..k).map(|i| norm(sub(points[(i + 1) % k], points[i]))).sum()
}

/// A closed ring of vertices tagged with the boundary parameter they descend from.
struct Ring {
    points: Vec<Point>,
    params: Vec<f64>,
}

/// Dense closed curve `theta -> point` with cumulative arclength.
struct DenseCurve {
    params: Vec<f64>,
    points: Vec<Point>,
    cumulative: Vec<f64>,
}

impl DenseCurve {
    fn new(f: impl Fn(f64) -> Point) -> Self {
        let params: Vec<f64> = (0..=RING_SAMPLES).map(|i| TAU * i as f64 / RING_SAMPLES as f64).collect();
        let points: Vec<Point> = params.iter().map(|&t| f(t)).collect();
        let mut cumulative = vec![0.0; points.len()];
        for i in 1..points.len() {
            cumulative[i] = cumulative[i - 1] + norm(sub(points[i], points[i - 1]));
        }
        DenseCurve { params, points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Parameters of `count` points equally spaced in arclength, starting at theta = 0.
    fn resample_params(&self, count: usize) -> Vec<f64> {
        let total = self.length();
        let mut seg = 0;
        (0..count)
            .map(|j| {
                let s = total * j as f64 / count as f64;
                while self.cumulative[seg + 1] < s {
                    seg += 1;
                }
                let span = self.cumulative[seg + 1] - self.cumulative[seg];
                let w = if span > 0.0 { (s - self.cumulative[seg]) / span } else { 0.0 };
                self.params[seg] + w * (self.params[seg + 1] - self.params[seg])
            })
            .collect()
    }

    fn has_monotone_angle(&self) -> bool {
        let mut prev = self.points[0][1].atan2(self.points[0][0]);
        let mut total = 0.0;
        for p in &self.points[1..] {
            let a = p[1].atan2(p[0]);
            let mut step = a - prev;
            if step > std::f64::consts::PI {
                step -= TAU;
            } else if step < -std::f64::consts::PI {
                step += TAU;
            }
            if step <= 0.0 {
                return false;
            }
            total += step;
            prev = a;
        }
        (total - TAU).abs() < 1e-6
    }
}

/// Structured polar-type mesh: offset rings of the boundary curve inside the
/// tube, then rings scaled toward the center, closed by a central fan.
///
/// Boundary vertices come first, in cycle order, with `phi = 0` exactly.
pub fn build_mesh(domain: &Domain, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h < domain.d0()) {
        return Err(Error::InvalidInput(format!("h must be in (0, d0) = (0, {})", domain.d0())));
    }

    let offset_depth = domain.d0().min(0.75 * domain.min_center_distance());
    let offset_count = ((offset_depth / (RING_SPACING * h)).ceil() as usize).max(1);
    let offset_step = offset_depth / offset_count as f64;

    let offset_point = |t: f64, depth: f64| {
        let c = domain.point(t);
        let n = domain.outward_normal(t);
        [c[0] - depth * n[0], c[1] - depth * n[1]]
    };
    let ring_size = |length: f64| (length / h).ceil() as usize;

    // Rings in a block share their curve parameters, so vertices line up
    // along the normals (the gradient lines of phi) and the interpolated
    // distance has nearly unit gradient. A new block starts, resampled
    // uniformly in arclength, once the spacing falls below MIN_SPACING h.
    let mut rings: Vec<Ring> = Vec::new();
    let mut block: Vec<f64> = Vec::new();
    for j in 0..=offset_count {
        let depth = offset_step * j as f64;
        let aligned: Vec<Point> = block.iter().map(|&t| offset_point(t, depth)).collect();
        if block.is_empty() || polygon_length(&aligned) < MIN_SPACING * h * block.len() as f64 {
            let curve = DenseCurve::new(|t| offset_point(t, depth));
            let count = ring_size(curve.length());
            if count < 3 {
                return Err(Error::MeshGeneration("offset ring collapsed".into()));
            }
            block = curve.resample_params(count);
            let points = block.iter().map(|&t| offset_point(t, depth)).collect();
            rings.push(Ring { points, params: block.clone() });
        } else {
            rings.push(Ring { points: aligned, params: block.clone() });
        }
    }

    let innermost = DenseCurve::new(|t| offset_point(t, offset_depth));
    if !innermost.has_monotone_angle() {
        return Err(Error::MeshGeneration("innermost offset ring is not star-shaped about the origin".into()));
    }
    let max_radius = innermost.points.iter().map(|p| norm(*p)).fold(0.0, f64::max);
    let scaled_count = ((max_radius / (RING_SPACING * h)).ceil() as usize).max(1);
    let scaled = |t: f64, s: f64| {
        let p = offset_point(t, offset_depth);
        [s * p[0], s * p[1]]
    };
    block = rings.last().expect("at least one ring").params.clone();
    for k in 1..scaled_count {
        let s = 1.0 - k as f64 / scaled_count as f64;
        let aligned: Vec<Point> = block.iter().map(|&t| scaled(t, s)).collect();
        if polygon_length(&aligned) < MIN_SPACING * h * block.len() as f64 && block.len() > 6 {
            let count = ring_size(s * innermost.length()).max(6);
            block = innermost.resample_params(count);
            let points = block.iter().map(|&t| scaled(t, s)).collect();
            rings.push(Ring { points, params: block.clone() });
        } else {
            rings.push(Ring { points: aligned, params: block.clone() });
        }
    }

    let mut vertices: Vec<Point> = Vec::new();
    let mut starts = Vec::with_capacity(rings.len());
    for ring in &rings {
        starts.push(vertices.len());
        vertices.extend_from_slice(&ring.points);
    }
    let center = vertices.len();
    vertices.push([0.0, 0.0]);

    let mut triangles = Vec::new();
    for r in 0..rings.len() - 1 {
        zip_rings(&rings[r], starts[r], &rings[r + 1], starts[r + 1], &mut triangles);
    }
    let last = rings.len() - 1;
    let k = rings[last].points.len();
    for j in 0..k {
        triangles.push([center, starts[last] + j, starts[last] + (j + 1) % k]);
    }

    let boundary_count = rings[0].points.len();
    let mut phi = vec![0.0; vertices.len()];
    for (i, p) in vertices.iter().enumerate().skip(boundary_count) {
        phi[i] = domain.signed_distance(*p)?.phi;
        if !(phi[i] > 0.0) {
            return Err(Error::MeshGeneration(format!("interior vertex {i} has phi = {}", phi[i])));
        }
    }

    let boundary_cycle: Vec<usize> = (0..boundary_count).collect();
    let boundary_param = rings[0].params.clone();
    Mesh::from_parts(vertices, triangles, boundary_cycle, boundary_param, phi, h)
}

/// Triangulates the strip between an outer and an inner ring, always taking
/// the shorter of the two candidate diagonals.
fn zip_rings(outer: &Ring, outer_start: usize, inner: &Ring, inner_start: usize, out: &mut Vec<[usize; 3]>) {
    let m = outer.points.len();
    let k = inner.points.len();
    let o = |i: usize| outer.points[i % m];
    let n = |j: usize| inner.points[j % k];
    let (mut i, mut j) = (0, 0);
    while i < m || j < k {
        let advance_outer = if i == m {
            false
        } else if j == k {
            true
        } else {
            norm(sub(o(i + 1), n(j))) <= norm(sub(o(i), n(j + 1)))
        };
        if advance_outer {
            out.push([outer_start + i % m, outer_start + (i + 1) % m, inner_start + j % k]);
            i += 1;
        } else {
            out.push([outer_start + i % m, inner_start + (j + 1) % k, inner_start + j % k]);
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn edge_use(mesh: &Mesh) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::new();
        for t in mesh.triangles() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    #[test]
    fn disk_mesh_contract() {
        let domain = Domain::disk(1.0).unwrap();
        let mesh = build_mesh(&domain, 0.2).unwrap();
        for &b in mesh.boundary_cycle() {
            let p = mesh.vertices()[b];
            assert!((norm(p) - 1.0).abs() < 1e-12);
            assert!(mesh.phi()[b] <= 1e-12);
        }
        for t in 0..mesh.triangles().len() {
            assert!(mesh.triangle_area(t) > 0.0);
        }
        assert!(mesh.max_edge_length() <= 1.5 * 0.2);
        let interior: Vec<usize> = (mesh.boundary_cycle().len()..mesh.vertex_count()).collect();
        assert!(interior.iter().all(|&i| mesh.phi()[i] > 0.0));
    }

    #[test]
    fn mesh_is_conforming_with_boundary_edges_used_once() {
        let domain = Domain::ellipse(2.0, 1.0).unwrap();
        let mesh = build_mesh(&domain, 0.1).unwrap();
        let uses = edge_use(&mesh);
        assert!(uses.values().all(|&c| c == 1 || c == 2));
        let boundary: Vec<(usize, usize)> = mesh.boundary_edges().map(|(a, b)| (a.min(b), a.max(b))).collect();
        for e in &boundary {
            assert_eq!(uses[e], 1);
        }
        assert_eq!(uses.values().filter(|&&c| c == 1).count(), boundary.len());
        assert!(mesh.max_edge_length() <= 1.5 * 0.1);
    }

    #[test]
    fn disk_area_converges() {
        let domain = Domain::disk(1.0).unwrap();
        let mesh = build_mesh(&domain, 0.02).unwrap();
        let rel = (mesh.total_area() - std::f64::consts::PI).abs() / std::f64::consts::PI;
        assert!(rel < 1e-3, "rel {rel}");
    }

    #[test]
    fn ellipse_area_converges() {
        let domain = Domain::ellipse(2.0, 1.0).unwrap();
        let mesh = build_mesh(&domain, 0.05).unwrap();
        let exact = TAU;
        assert!((mesh.total_area() - exact).abs() / exact < 5e-3);
        for &b in mesh.boundary_cycle() {
            let p = mesh.vertices()[b];
            assert!(((p[0] / 2.0).powi(2) + p[1].powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn star_mesh_builds() {
        let domain = Domain::smooth_star(1.0, &[0.0, 0.04, 0.02]).unwrap();
        let mesh = build_mesh(&domain, 0.05).unwrap();
        assert!(mesh.max_edge_length() <= 1.5 * 0.05);
        let uses = edge_use(&mesh);
        assert!(uses.values().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn rejects_out_of_range_h() {
        let domain = Domain::disk(1.0).unwrap();
        assert!(build_mesh(&domain, -0.1).is_err());
        assert!(build_mesh(&domain, 0.95).is_err());
    }

    #[test]
    fn deterministic_and_text_round_trip() {
        let domain = Domain::disk(1.0).unwrap();
        let a = build_mesh(&domain, 0.1).unwrap();
        let b = build_mesh(&domain, 0.1).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let back = Mesh::from_text(&a.to_text()).unwrap();
        assert_eq!(back.vertices(), a.vertices());
        assert_eq!(back.phi(), a.phi());
        assert_eq!(back.triangles(), a.triangles());
        assert!(a.to_text().starts_with("vertices "));
    }
}
