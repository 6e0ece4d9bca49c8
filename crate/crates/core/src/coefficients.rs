//! Conductivity and metric fields, pointwise Riemannian quantities, the
//! tensor-to-scalar reduction, conformal rescaling and the near-boundary
//! metric modification that turns the Euclidean distance into the
//! Riemannian one.
//!
//! Every field evaluates to a 2×2 symmetric matrix; scalar fields evaluate to
//! `gamma * I`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Mesh};
use crate::mat2::{dot, norm};
use crate::{Point, Sym2};

/// Floor below which the reduced scalar conductivity counts as degenerate.
const DEGENERATE_CONDUCTIVITY: f64 = 1e-8;
/// Grid resolution used to estimate Lipschitz constants of derived fields.
const LIPSCHITZ_GRID: usize = 127;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Tensor,
}

#[derive(Clone, Debug)]
pub enum FieldSource {
    Constant(Sym2),
    /// `1 + beta * exp(-|x - center|^2 / width^2)`.
    RadialBump { beta: f64, center: Point, width: f64 },
    /// `1 + beta * x`, clamped to `[floor, 1 / floor]`.
    LinearRamp { beta: f64, floor: f64 },
    /// `R(angle) diag(major, minor) R(angle)^T`, angle in degrees.
    RotatedAnisotropic { major: f64, minor: f64, angle_deg: f64 },
    /// Convex combination of fields.
    Blended(Vec<(f64, Arc<CoefficientField>)>),
    /// Pointwise product of a scalar factor with a base field.
    Product { factor: Arc<CoefficientField>, base: Arc<CoefficientField> },
    /// `(det A1)^{1/2}` with `A1 = sqrt(g) A G^{-1}`.
    ReducedConductivity { a: Arc<CoefficientField>, g: Arc<CoefficientField> },
    /// `(A1 / gamma1)^{-1}`, the unimodular metric of the reduction.
    ReducedMetric { a: Arc<CoefficientField>, g: Arc<CoefficientField> },
    /// The conformal factor making `|grad phi|_{eta G} = 1` near the boundary.
    AksFactor { domain: Arc<Domain>, metric: Arc<CoefficientField> },
}

/// An evaluable conductivity or metric with its ellipticity constant and a
/// Lipschitz bound (absolute difference for scalars, Frobenius for tensors).
#[derive(Clone, Debug)]
pub struct CoefficientField {
    kind: FieldKind,
    source: FieldSource,
    lambda: f64,
    lipschitz_bound: f64,
}

impl CoefficientField {
    fn build(kind: FieldKind, source: FieldSource, lambda: f64, lipschitz_bound: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Ellipticity(format!("ellipticity constant {lambda} outside (0, 1]")));
        }
        Ok(CoefficientField { kind, source, lambda, lipschitz_bound })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Ellipticity(format!("constant {value} is not positive")));
        }
        Self::build(FieldKind::Scalar, FieldSource::Constant(Sym2::scalar(value)), value.min(1.0 / value), 0.0)
    }

    pub fn constant_tensor(value: Sym2) -> Result<Self> {
        if !value.is_spd() {
            return Err(Error::Ellipticity(format!("tensor {value:?} is not positive definite")));
        }
        let (lo, hi) = value.eigenvalues();
        Self::build(FieldKind::Tensor, FieldSource::Constant(value), lo.min(1.0 / hi), 0.0)
    }

    pub fn identity() -> Self {
        Self::constant_tensor(Sym2::IDENTITY).expect("identity is SPD")
    }

    pub fn radial_bump(beta: f64, center: Point, width: f64) -> Result<Self> {
        if !(beta > -1.0 && width > 0.0) {
            return Err(Error::Ellipticity("radial_bump needs beta > -1 and width > 0".into()));
        }
        let (lo, hi) = if beta >= 0.0 { (1.0, 1.0 + beta) } else { (1.0 + beta, 1.0) };
        let lip = beta.abs() * std::f64::consts::SQRT_2 / width * (-0.5f64).exp();
        Self::build(FieldKind::Scalar, FieldSource::RadialBump { beta, center, width }, lo.min(1.0 / hi), lip)
    }

    pub fn linear_ramp(beta: f64, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::Ellipticity("linear_ramp floor must lie in (0, 1)".into()));
        }
        Self::build(FieldKind::Scalar, FieldSource::LinearRamp { beta, floor }, floor, beta.abs())
    }

    pub fn rotated_anisotropic(major: f64, minor: f64, angle_deg: f64) -> Result<Self> {
        if !(major > 0.0 && minor > 0.0) {
            return Err(Error::Ellipticity("rotated_anisotropic needs positive axes".into()));
        }
        let lambda = major.min(minor).min(1.0 / major).min(1.0 / minor);
        Self::build(
            FieldKind::Tensor,
            FieldSource::RotatedAnisotropic { major, minor, angle_deg },
            lambda,
            0.0,
        )
    }

    pub fn blended(parts: Vec<(f64, CoefficientField)>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("blended needs non-negative weights".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("blended weights sum to {total}, expected 1")));
        }
        let kind = if parts.iter().all(|(_, f)| f.kind == FieldKind::Scalar) {
            FieldKind::Scalar
        } else {
            FieldKind::Tensor
        };
        let lambda = parts.iter().map(|(_, f)| f.lambda).fold(1.0, f64::min);
        let lip = parts.iter().map(|(w, f)| w * f.lipschitz_bound).sum::<f64>()
            * if kind == FieldKind::Tensor { std::f64::consts::SQRT_2 } else { 1.0 };
        let parts = parts.into_iter().map(|(w, f)| (w, Arc::new(f))).collect();
        Self::build(kind, FieldSource::Blended(parts), lambda, lip)
    }

    /// Pointwise `factor * base` for a scalar `factor`.
    pub fn product(factor: &CoefficientField, base: &CoefficientField) -> Result<Self> {
        if factor.kind != FieldKind::Scalar {
            return Err(Error::InvalidInput("product factor must be scalar".into()));
        }
        let base_sup = base.sup_norm_bound();
        let lip = factor.lipschitz_bound * base_sup + factor.sup_norm_bound() * base.lipschitz_bound;
        Self::build(
            base.kind,
            FieldSource::Product { factor: Arc::new(factor.clone()), base: Arc::new(base.clone()) },
            factor.lambda * base.lambda,
            lip,
        )
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn catalog_name(&self) -> &'static str {
        match &self.source {
            FieldSource::Constant(_) => "constant",
            FieldSource::RadialBump { .. } => "radial_bump",
            FieldSource::LinearRamp { .. } => "linear_ramp",
            FieldSource::RotatedAnisotropic { .. } => "rotated_anisotropic",
            FieldSource::Blended(_) => "blended",
            FieldSource::Product { .. } => "product",
            FieldSource::ReducedConductivity { .. } => "reduced_conductivity",
            FieldSource::ReducedMetric { .. } => "reduced_metric",
            FieldSource::AksFactor { .. } => "aks_factor",
        }
    }

    /// Upper bound of the field's norm implied by its ellipticity constant.
    fn sup_norm_bound(&self) -> f64 {
        match self.kind {
            FieldKind::Scalar => 1.0 / self.lambda,
            FieldKind::Tensor => std::f64::consts::SQRT_2 / self.lambda,
        }
    }

    pub fn eval(&self, p: Point) -> Result<Sym2> {
        Ok(match &self.source {
            FieldSource::Constant(m) => *m,
            FieldSource::RadialBump { beta, center, width } => {
                let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                Sym2::scalar(1.0 + beta * (-r2 / (width * width)).exp())
            }
            FieldSource::LinearRamp { beta, floor } => {
                Sym2::scalar((1.0 + beta * p[0]).clamp(*floor, 1.0 / floor))
            }
            FieldSource::RotatedAnisotropic { major, minor, angle_deg } => {
                Sym2::rotated_diag(*major, *minor, angle_deg.to_radians())
            }
            FieldSource::Blended(parts) => {
                let mut acc = Sym2::scalar(0.0);
                for (w, f) in parts {
                    acc = acc.add(&f.eval(p)?.scale(*w));
                }
                acc
            }
            FieldSource::Product { factor, base } => base.eval(p)?.scale(factor.eval(p)?.xx),
            FieldSource::ReducedConductivity { a, g } => {
                Sym2::scalar(reduced_parts(&a.eval(p)?, &g.eval(p)?)?.0)
            }
            FieldSource::ReducedMetric { a, g } => reduced_parts(&a.eval(p)?, &g.eval(p)?)?.1,
            FieldSource::AksFactor { domain, metric } => Sym2::scalar(aks_factor(domain, metric, p)?),
        })
    }

    /// Scalar value (the `xx` entry for tensor fields).
    pub fn eval_scalar(&self, p: Point) -> Result<f64> {
        Ok(self.eval(p)?.xx)
    }
}

/// `(gamma1, G_tilde)` of the tensor-to-scalar reduction at one point.
fn reduced_parts(a: &Sym2, g: &Sym2) -> Result<(f64, Sym2)> {
    let g_inv = g.inverse().ok_or_else(|| Error::Ellipticity("singular metric".into()))?;
    let a1 = a.sym_product(&g_inv).scale(g.det().sqrt());
    let gamma1 = a1.det().sqrt();
    if !(gamma1 >= DEGENERATE_CONDUCTIVITY) {
        return Err(Error::Ellipticity(format!("reduced conductivity {gamma1:e} is degenerate")));
    }
    let g_tilde = a1
        .scale(1.0 / gamma1)
        .inverse()
        .ok_or_else(|| Error::Ellipticity("singular reduced metric".into()))?;
    Ok((gamma1, g_tilde))
}

/// Quintic smoothstep cutoff: 1 below `d0/2`, 0 above `3 d0/4`.
pub fn cutoff(t: f64, d0: f64) -> f64 {
    let s = (t - 0.5 * d0) / (0.25 * d0);
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)).clamp(0.0, 1.0)
    }
}

fn aks_factor(domain: &Domain, metric: &CoefficientField, p: Point) -> Result<f64> {
    let info = domain.signed_distance(p)?;
    let chi = cutoff(info.phi.max(0.0), domain.d0());
    if chi == 0.0 {
        return Ok(1.0);
    }
    let g_inv = metric
        .eval(p)?
        .inverse()
        .ok_or_else(|| Error::Ellipticity("singular metric".into()))?;
    let eta_hat = g_inv.form(info.grad, info.grad);
    Ok(chi * eta_hat + 1.0 - chi)
}

/// Finite-difference Lipschitz estimate over an `n × n` grid covering the
/// domain's bounding box, using neighbouring pairs that both lie inside.
pub fn estimate_lipschitz(field: &CoefficientField, domain: &Domain, n: usize) -> Result<f64> {
    let (lo, hi) = domain.bounding_box();
    let coord = |i: usize, k: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64;
    let mut values: Vec<Option<Sym2>> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let p = [coord(i, 0), coord(j, 1)];
            values.push(if domain.contains(p) { Some(field.eval(p)?) } else { None });
        }
    }
    let diff = |a: &Sym2, b: &Sym2| match field.kind {
        FieldKind::Scalar => (a.xx - b.xx).abs(),
        FieldKind::Tensor => Sym2::new(a.xx - b.xx, a.xy - b.xy, a.yy - b.yy).frobenius(),
    };
    let dx = (hi[0] - lo[0]) / (n - 1) as f64;
    let dy = (hi[1] - lo[1]) / (n - 1) as f64;
    let mut best: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let Some(v) = &values[j * n + i] else { continue };
            if i + 1 < n {
                if let Some(w) = &values[j * n + i + 1] {
                    best = best.max(diff(v, w) / dx);
                }
            }
            if j + 1 < n {
                if let Some(w) = &values[(j + 1) * n + i] {
                    best = best.max(diff(v, w) / dy);
                }
            }
        }
    }
    Ok(best)
}

/// Pointwise Riemannian quantities for a metric value and a Euclidean unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricQuantities {
    pub sqrt_g: f64,
    pub g_inv: Sym2,
    /// `1 / sqrt(<G^{-1} nu, nu>)`
    pub alpha: f64,
    /// `alpha G^{-1} nu`, the Riemannian unit normal.
    pub nu_m: Point,
}

pub fn metric_quantities(g: &Sym2, nu: Point) -> Result<MetricQuantities> {
    if !g.is_spd() {
        return Err(Error::Ellipticity(format!("metric {g:?} is not positive definite")));
    }
    if (norm(nu) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput("normal must be a unit vector".into()));
    }
    let g_inv = g.inverse().expect("SPD matrices are invertible");
    let alpha = 1.0 / g_inv.form(nu, nu).sqrt();
    let w = g_inv.apply(nu);
    Ok(MetricQuantities {
        sqrt_g: g.det().sqrt(),
        g_inv,
        alpha,
        nu_m: [alpha * w[0], alpha * w[1]],
    })
}

/// `|v|_M = sqrt(v^T G v)`.
pub fn metric_norm(g: &Sym2, v: Point) -> f64 {
    g.form(v, v).sqrt()
}

/// Rewrites `(A, G)` as a scalar conductivity `gamma1` with the unimodular
/// metric `G_tilde = (A1 / gamma1)^{-1}`, `A1 = sqrt(g) A G^{-1}`; the weighted
/// Dirichlet form is unchanged pointwise.
pub fn reduce_to_scalar(
    domain: &Domain,
    a: &CoefficientField,
    g: &CoefficientField,
) -> Result<(CoefficientField, CoefficientField)> {
    let (a, g) = (Arc::new(a.clone()), Arc::new(g.clone()));
    let mut gamma = CoefficientField::build(
        FieldKind::Scalar,
        FieldSource::ReducedConductivity { a: a.clone(), g: g.clone() },
        a.lambda,
        0.0,
    )?;
    let mut metric = CoefficientField::build(
        FieldKind::Tensor,
        FieldSource::ReducedMetric { a: a.clone(), g: g.clone() },
        a.lambda * g.lambda,
        0.0,
    )?;
    gamma.lipschitz_bound = estimate_lipschitz(&gamma, domain, LIPSCHITZ_GRID)?;
    metric.lipschitz_bound = estimate_lipschitz(&metric, domain, LIPSCHITZ_GRID)?;
    Ok((gamma, metric))
}

/// Conformal change `G_tilde = eta1 G`; in two dimensions the conductivity is
/// unchanged and the weighted Dirichlet form is invariant.
pub fn conformal_rescale(
    a: &CoefficientField,
    g: &CoefficientField,
    eta1: &CoefficientField,
) -> Result<(CoefficientField, CoefficientField)> {
    if eta1.kind != FieldKind::Scalar {
        return Err(Error::InvalidInput("conformal factor must be scalar".into()));
    }
    Ok((a.clone(), CoefficientField::product(eta1, g)?))
}

/// Multiplies `G` by `eta = chi(phi) eta_hat + 1 - chi(phi)` with
/// `eta_hat = <grad phi, G^{-1} grad phi>`, so that `|grad phi|_{eta G} = 1`
/// wherever `phi <= d0 / 2`.
pub fn aks_modify(domain: &Domain, g: &CoefficientField) -> Result<CoefficientField> {
    let g_arc = Arc::new(g.clone());
    let mut factor = CoefficientField::build(
        FieldKind::Scalar,
        FieldSource::AksFactor { domain: Arc::new(domain.clone()), metric: g_arc },
        g.lambda,
        0.0,
    )?;
    factor.lipschitz_bound = estimate_lipschitz(&factor, domain, LIPSCHITZ_GRID)?;
    CoefficientField::product(&factor, g)
}

/// A conductivity paired with a metric.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub conductivity: CoefficientField,
    pub metric: CoefficientField,
}

/// Coefficient values frozen at one point.
#[derive(Clone, Copy, Debug)]
pub struct LocalCoefficients {
    pub conductivity: Sym2,
    pub metric: Sym2,
    pub g_inv: Sym2,
    pub sqrt_g: f64,
}

impl LocalCoefficients {
    /// `sqrt(g) * sym(A G^{-1})`, the matrix of the weighted Dirichlet form.
    pub fn form_matrix(&self) -> Sym2 {
        self.conductivity.sym_product(&self.g_inv).scale(self.sqrt_g)
    }

    /// Scalar conductivity (meaningful for scalar fields only).
    pub fn gamma(&self) -> f64 {
        self.conductivity.xx
    }

    /// `(alpha, sqrt(g) / alpha)` for a Euclidean unit normal.
    pub fn boundary_weight(&self, nu: Point) -> (f64, f64) {
        let alpha = 1.0 / self.g_inv.form(nu, nu).sqrt();
        (alpha, self.sqrt_g / alpha)
    }

    /// Conormal derivative `alpha grad(u)^T G^{-1} nu`.
    pub fn normal_derivative(&self, grad_u: Point, nu: Point) -> f64 {
        let (alpha, _) = self.boundary_weight(nu);
        alpha * dot(grad_u, self.g_inv.apply(nu))
    }
}

impl Coefficients {
    pub fn new(conductivity: CoefficientField, metric: CoefficientField) -> Self {
        Coefficients { conductivity, metric }
    }

    /// `gamma = 1`, `G = I`.
    pub fn euclidean() -> Self {
        Coefficients {
            conductivity: CoefficientField::constant(1.0).expect("1 is positive"),
            metric: CoefficientField::identity(),
        }
    }

    pub fn has_scalar_conductivity(&self) -> bool {
        self.conductivity.kind == FieldKind::Scalar
    }

    /// Energy-equivalence constant `lambda_A * lambda_G^2`.
    pub fn energy_constant(&self) -> f64 {
        self.conductivity.lambda * self.metric.lambda * self.metric.lambda
    }

    pub fn at(&self, p: Point) -> Result<LocalCoefficients> {
        let conductivity = self.conductivity.eval(p)?;
        let metric = self.metric.eval(p)?;
        if !metric.is_spd() {
            return Err(Error::Ellipticity(format!("metric not SPD at ({}, {})", p[0], p[1])));
        }
        Ok(LocalCoefficients {
            conductivity,
            metric,
            g_inv: metric.inverse().expect("SPD"),
            sqrt_g: metric.det().sqrt(),
        })
    }

    /// Values at every triangle centroid, in triangle order.
    pub fn sample_centroids(&self, mesh: &Mesh) -> Result<Vec<LocalCoefficients>> {
        (0..mesh.triangles().len()).map(|t| self.at(mesh.centroid(t))).collect()
    }
}
