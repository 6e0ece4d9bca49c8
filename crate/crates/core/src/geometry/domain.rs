use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::mat2::{dot, norm, sub};
use crate::Point;

const CURVATURE_SAMPLES: usize = 4096;
const PROJECTION_SEEDS: usize = 64;
const PROJECTION_TOL: f64 = 1e-13;
const PROJECTION_MAX_ITER: usize = 50;

/// Fraction of the reach bound `1 / kappa_max` used as the tube width.
pub const TUBE_SAFETY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainFamily {
    Disk,
    Ellipse,
    SmoothStar,
}

impl DomainFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DomainFamily::Disk => "disk",
            DomainFamily::Ellipse => "ellipse",
            DomainFamily::SmoothStar => "smooth_star",
        }
    }
}

impl fmt::Display for DomainFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DomainFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(DomainFamily::Disk),
            "ellipse" => Ok(DomainFamily::Ellipse),
            "smooth_star" => Ok(DomainFamily::SmoothStar),
            other => Err(Error::InvalidInput(format!("unknown domain family `{other}`"))),
        }
    }
}

/// A bounded star-shaped planar domain with a closed, counterclockwise,
/// C^{1,1} boundary curve parametrized by `theta` in `[0, 2pi)`.
///
/// Parameters by family:
/// - disk: `[R]`
/// - ellipse: `[a, b]` (semi-axes along x and y)
/// - smooth_star: `[R0, eps_1, eps_2, ...]` for `r(theta) = R0 (1 + sum eps_k cos(k theta))`
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    family: DomainFamily,
    params: Vec<f64>,
    kappa_max: f64,
    d0: f64,
}

/// Distance to the boundary together with its gradient and the nearest
/// boundary point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceInfo {
    /// Distance to the boundary, negative outside the domain.
    pub phi: f64,
    /// Gradient of `phi`, a unit vector; equals `-nu(foot)`.
    pub grad: Point,
    pub foot: Point,
    /// Curve parameter of the foot point.
    pub foot_param: f64,
    /// Whether the nearest point is certified unique (`|phi| < d0`).
    pub unique: bool,
}

impl Domain {
    pub fn new(family: DomainFamily, params: &[f64]) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match family {
            DomainFamily::Disk => {
                if params.len() != 1 {
                    return bad(format!("disk takes 1 parameter, got {}", params.len()));
                }
                if !(params[0] > 0.0 && params[0].is_finite()) {
                    return bad(format!("disk radius must be positive, got {}", params[0]));
                }
            }
            DomainFamily::Ellipse => {
                if params.len() != 2 {
                    return bad(format!("ellipse takes 2 parameters, got {}", params.len()));
                }
                if !params.iter().all(|a| *a > 0.0 && a.is_finite()) {
                    return bad("ellipse semi-axes must be positive".into());
                }
            }
            DomainFamily::SmoothStar => {
                if params.is_empty() {
                    return bad("smooth_star needs a base radius".into());
                }
                if !(params[0] > 0.0 && params[0].is_finite()) {
                    return bad(format!("star base radius must be positive, got {}", params[0]));
                }
                let weighted: f64 = params[1..]
                    .iter()
                    .enumerate()
                    .map(|(i, e)| ((i + 1) as f64).powi(2) * e.abs())
                    .sum();
                if !(weighted < 0.5) {
                    return bad(format!(
                        "star perturbation violates sum k^2 |eps_k| < 0.5 (got {weighted})"
                    ));
                }
            }
        }

        let mut domain = Domain {
            family,
            params: params.to_vec(),
            kappa_max: 0.0,
            d0: 0.0,
        };
        domain.kappa_max = (0..CURVATURE_SAMPLES)
            .map(|i| domain.curvature(TAU * i as f64 / CURVATURE_SAMPLES as f64).abs())
            .fold(0.0, f64::max);
        domain.d0 = match family {
            DomainFamily::Disk => TUBE_SAFETY * params[0],
            _ => TUBE_SAFETY / domain.kappa_max,
        };
        Ok(domain)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainFamily::Disk, &[radius])
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainFamily::Ellipse, &[a, b])
    }

    pub fn smooth_star(base_radius: f64, eps: &[f64]) -> Result<Self> {
        let mut params = vec![base_radius];
        params.extend_from_slice(eps);
        Self::new(DomainFamily::SmoothStar, &params)
    }

    pub fn family(&self) -> DomainFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// Tube width within which the nearest boundary point is unique.
    pub fn d0(&self) -> f64 {
        self.d0
    }

    /// Radial profile of the star family and its first two derivatives.
    fn star_radius(&self, t: f64) -> (f64, f64, f64) {
        let r0 = self.params[0];
        let (mut r, mut dr, mut ddr) = (1.0, 0.0, 0.0);
        for (i, eps) in self.params[1..].iter().enumerate() {
            let k = (i + 1) as f64;
            let (s, c) = (k * t).sin_cos();
            r += eps * c;
            dr -= k * eps * s;
            ddr -= k * k * eps * c;
        }
        (r0 * r, r0 * dr, r0 * ddr)
    }

    /// Boundary point `c(theta)`.
    pub fn point(&self, t: f64) -> Point {
        let (s, c) = t.sin_cos();
        match self.family {
            DomainFamily::Disk => [self.params[0] * c, self.params[0] * s],
            DomainFamily::Ellipse => [self.params[0] * c, self.params[1] * s],
            DomainFamily::SmoothStar => {
                let (r, _, _) = self.star_radius(t);
                [r * c, r * s]
            }
        }
    }

    /// `c'(theta)`.
    pub fn tangent(&self, t: f64) -> Point {
        let (s, c) = t.sin_cos();
        match self.family {
            DomainFamily::Disk => [-self.params[0] * s, self.params[0] * c],
            DomainFamily::Ellipse => [-self.params[0] * s, self.params[1] * c],
            DomainFamily::SmoothStar => {
                let (r, dr, _) = self.star_radius(t);
                [dr * c - r * s, dr * s + r * c]
            }
        }
    }

    /// `c''(theta)`.
    pub fn second_derivative(&self, t: f64) -> Point {
        let (s, c) = t.sin_cos();
        match self.family {
            DomainFamily::Disk => [-self.params[0] * c, -self.params[0] * s],
            DomainFamily::Ellipse => [-self.params[0] * c, -self.params[1] * s],
            DomainFamily::SmoothStar => {
                let (r, dr, ddr) = self.star_radius(t);
                [
                    (ddr - r) * c - 2.0 * dr * s,
                    (ddr - r) * s + 2.0 * dr * c,
                ]
            }
        }
    }

    /// Signed curvature, positive where the boundary is convex.
    pub fn curvature(&self, t: f64) -> f64 {
        let d1 = self.tangent(t);
        let d2 = self.second_derivative(t);
        (d1[0] * d2[1] - d1[1] * d2[0]) / norm(d1).powi(3)
    }

    /// Outward unit normal at `c(theta)`.
    pub fn outward_normal(&self, t: f64) -> Point {
        let d1 = self.tangent(t);
        let len = norm(d1);
        [d1[1] / len, -d1[0] / len]
    }

    /// Smallest distance from the origin (the star center) to the boundary.
    pub fn min_center_distance(&self) -> f64 {
        match self.family {
            DomainFamily::Disk => self.params[0],
            DomainFamily::Ellipse => self.params[0].min(self.params[1]),
            DomainFamily::SmoothStar => (0..CURVATURE_SAMPLES)
                .map(|i| norm(self.point(TAU * i as f64 / CURVATURE_SAMPLES as f64)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for i in 0..CURVATURE_SAMPLES {
            let p = self.point(TAU * i as f64 / CURVATURE_SAMPLES as f64);
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Point) -> bool {
        match self.family {
            DomainFamily::Disk => norm(p) < self.params[0],
            DomainFamily::Ellipse => {
                (p[0] / self.params[0]).powi(2) + (p[1] / self.params[1]).powi(2) < 1.0
            }
            DomainFamily::SmoothStar => {
                let r = norm(p);
                r == 0.0 || r < self.star_radius(p[1].atan2(p[0])).0
            }
        }
    }

    /// Nearest boundary point by Newton iteration on
    /// `theta -> <p - c(theta), c'(theta)>` from uniformly spread seeds.
    fn project(&self, p: Point) -> Result<(f64, f64)> {
        if self.family == DomainFamily::Disk {
            let r = norm(p);
            let t = if r == 0.0 { 0.0 } else { p[1].atan2(p[0]) };
            return Ok(((r - self.params[0]).abs(), t.rem_euclid(TAU)));
        }

        let mut best: Option<(f64, f64)> = None;
        for seed in 0..PROJECTION_SEEDS {
            let mut t = TAU * seed as f64 / PROJECTION_SEEDS as f64;
            let mut converged = false;
            for _ in 0..PROJECTION_MAX_ITER {
                let diff = sub(p, self.point(t));
                let d1 = self.tangent(t);
                let d2 = self.second_derivative(t);
                let g = dot(diff, d1);
                let dg = dot(diff, d2) - dot(d1, d1);
                if g.abs() <= PROJECTION_TOL * norm(d1) * (1.0 + norm(diff)) {
                    converged = true;
                    break;
                }
                if dg == 0.0 {
                    break;
                }
                let step = (g / dg).clamp(-PI / 16.0, PI / 16.0);
                t -= step;
                if step.abs() < PROJECTION_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                continue;
            }
            let dist = norm(sub(p, self.point(t)));
            if best.map_or(true, |(d, _)| dist < d) {
                best = Some((dist, t.rem_euclid(TAU)));
            }
        }
        best.ok_or(Error::ProjectionFailed(p))
    }

    /// Distance to the boundary, its gradient and the foot point.
    ///
    /// `phi` is valid everywhere; the gradient and foot are certified unique
    /// only when `|phi| < d0`.
    pub fn signed_distance(&self, p: Point) -> Result<DistanceInfo> {
        let (dist, t) = self.project(p)?;
        let foot = self.point(t);
        let inside = self.contains(p);
        let phi = if inside { dist } else { -dist };
        let scale = norm(foot).max(1.0);
        let grad = if dist > 1e-12 * scale {
            let sign = if inside { 1.0 } else { -1.0 };
            let v = sub(p, foot);
            [sign * v[0] / dist, sign * v[1] / dist]
        } else {
            let n = self.outward_normal(t);
            [-n[0], -n[1]]
        };
        Ok(DistanceInfo {
            phi,
            grad,
            foot,
            foot_param: t,
            unique: dist < self.d0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_curvature_and_tube() {
        let d = Domain::disk(1.0).unwrap();
        assert!((d.kappa_max() - 1.0).abs() < 1e-12);
        assert!((d.d0() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ellipse_curvature_matches_closed_form_and_finite_differences() {
        let d = Domain::ellipse(2.0, 1.0).unwrap();
        // kappa = a / b^2 at the ends of the major axis
        assert!((d.kappa_max() - 2.0).abs() < 1e-9);
        assert!((d.d0() - 0.45).abs() < 1e-9);

        // finite-difference curvature of the parametrization
        let hstep = 1e-4;
        for &t in &[0.0, 0.3, 1.1, 2.5] {
            let c = |s: f64| d.point(s);
            let d1 = [
                (c(t + hstep)[0] - c(t - hstep)[0]) / (2.0 * hstep),
                (c(t + hstep)[1] - c(t - hstep)[1]) / (2.0 * hstep),
            ];
            let d2 = [
                (c(t + hstep)[0] - 2.0 * c(t)[0] + c(t - hstep)[0]) / (hstep * hstep),
                (c(t + hstep)[1] - 2.0 * c(t)[1] + c(t - hstep)[1]) / (hstep * hstep),
            ];
            let kfd = (d1[0] * d2[1] - d1[1] * d2[0]) / norm(d1).powi(3);
            assert!((kfd - d.curvature(t)).abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Domain::disk(0.0).is_err());
        assert!(Domain::disk(-1.0).is_err());
        assert!(Domain::ellipse(2.0, -1.0).is_err());
        assert!(Domain::smooth_star(1.0, &[0.0, 0.6]).is_err());
        assert!(Domain::smooth_star(1.0, &[0.0, 0.05]).is_ok());
    }

    #[test]
    fn disk_distance_is_radial() {
        let d = Domain::disk(1.0).unwrap();
        let info = d.signed_distance([0.5, 0.0]).unwrap();
        assert!((info.phi - 0.5).abs() < 1e-15);
        assert!((info.grad[0] + 1.0).abs() < 1e-15 && info.grad[1].abs() < 1e-15);
        assert!((info.foot[0] - 1.0).abs() < 1e-15 && info.foot[1].abs() < 1e-15);
        assert!(info.unique);

        let center = d.signed_distance([0.0, 0.0]).unwrap();
        assert!((center.phi - 1.0).abs() < 1e-15);
        assert!(!center.unique);
    }

    #[test]
    fn ellipse_distance_matches_dense_search() {
        let d = Domain::ellipse(2.0, 1.0).unwrap();
        for &p in &[[0.0, 0.5], [1.2, 0.3], [-0.7, -0.6], [1.85, 0.0]] {
            let info = d.signed_distance(p).unwrap();
            let brute = (0..200_000)
                .map(|i| norm(sub(p, d.point(TAU * i as f64 / 200_000.0))))
                .fold(f64::INFINITY, f64::min);
            assert!((info.phi - brute).abs() < 1e-9, "p={p:?}");
        }
        let info = d.signed_distance([0.0, 0.5]).unwrap();
        assert!((info.phi - 0.5).abs() < 1e-12);
        assert!(info.foot[0].abs() < 1e-9 && (info.foot[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_unit_and_foot_on_curve() {
        let d = Domain::smooth_star(1.0, &[0.0, 0.03, 0.02]).unwrap();
        for i in 0..40 {
            let t = 0.157 * i as f64;
            let s = 0.02 + 0.005 * i as f64;
            let b = d.point(t);
            let n = d.outward_normal(t);
            let p = [b[0] - s * n[0], b[1] - s * n[1]];
            let info = d.signed_distance(p).unwrap();
            if info.phi < d.d0() {
                assert!((norm(info.grad) - 1.0).abs() < 1e-10);
                let foot_info = d.signed_distance(info.foot).unwrap();
                assert!(foot_info.phi.abs() < 1e-12);
            }
        }
    }
}
