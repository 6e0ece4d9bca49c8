//! Stiffness and boundary mass assembly, plus the nodal field types.

use crate::coefficients::Coefficients;
use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::geometry::Mesh;
use crate::mat2::{norm, sub};

/// Per-vertex values of a P1 function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFieldP1 {
    values: Vec<f64>,
}

impl ScalarFieldP1 {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite nodal value".into()));
        }
        Ok(ScalarFieldP1 { values })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(crate::Point) -> f64) -> Self {
        ScalarFieldP1 { values: mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values on the boundary cycle, in cycle order.
    pub fn boundary_trace(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.boundary_cycle().iter().map(|&i| self.values[i]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarFieldP1 { values: self.values.iter().map(|v| v * c).collect() }
    }
}

/// Analytic origin of a boundary datum: `cos(n t - phase)` in the curve
/// parameter `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierDescriptor {
    pub mode: usize,
    pub phase: f64,
}

/// Boundary values in boundary-cycle order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDatum {
    values: Vec<f64>,
    descriptor: Option<FourierDescriptor>,
    mean_zero: bool,
}

impl BoundaryDatum {
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.boundary_cycle().len() {
            return Err(Error::InvalidInput(format!(
                "datum has {} values for {} boundary vertices",
                values.len(),
                mesh.boundary_cycle().len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite boundary value".into()));
        }
        let mean_zero = is_mean_zero(mesh, &values);
        Ok(BoundaryDatum { values, descriptor: None, mean_zero })
    }

    /// `cos(n t - phase)` sampled at the curve parameter of each boundary vertex.
    pub fn fourier(mesh: &Mesh, mode: usize, phase: f64) -> Self {
        let values: Vec<f64> = mesh.boundary_param().iter().map(|&t| (mode as f64 * t - phase).cos()).collect();
        let mean_zero = is_mean_zero(mesh, &values);
        BoundaryDatum { values, descriptor: Some(FourierDescriptor { mode, phase }), mean_zero }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        let values = vec![c; mesh.boundary_cycle().len()];
        BoundaryDatum { mean_zero: c == 0.0, values, descriptor: None }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn descriptor(&self) -> Option<FourierDescriptor> {
        self.descriptor
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Boundary integral of the datum along the boundary polyline.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        boundary_integral(mesh, &self.values)
    }

    /// Subtracts the `d sigma` mean; the result is flagged mean-zero.
    pub fn project_mean_zero(&self, mesh: &Mesh) -> Self {
        let mean = self.integral(mesh) / mesh.boundary_length();
        let values = self.values.iter().map(|v| v - mean).collect();
        BoundaryDatum { values, descriptor: self.descriptor, mean_zero: true }
    }
}

/// Trapezoid weights of the boundary vertices (half the adjacent edge lengths).
pub(crate) fn boundary_weights(mesh: &Mesh) -> Vec<f64> {
    let cycle = mesh.boundary_cycle();
    let k = cycle.len();
    let v = mesh.vertices();
    let mut w = vec![0.0; k];
    for i in 0..k {
        let len = norm(sub(v[cycle[(i + 1) % k]], v[cycle[i]]));
        w[i] += 0.5 * len;
        w[(i + 1) % k] += 0.5 * len;
    }
    w
}

pub(crate) fn boundary_integral(mesh: &Mesh, values: &[f64]) -> f64 {
    boundary_weights(mesh).iter().zip(values).map(|(w, f)| w * f).sum()
}

fn is_mean_zero(mesh: &Mesh, values: &[f64]) -> bool {
    let l2 = crate::fem::sparse::dot(&boundary_weights(mesh), &values.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    boundary_integral(mesh, values).abs() <= 1e-10 * l2 * mesh.boundary_length().sqrt()
}

/// Stiffness and boundary mass matrices over all vertices.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    /// `a(u, psi) = int sqrt(g) (grad u)^T sym(A G^{-1}) grad psi dx`.
    pub k: CsrMatrix,
    /// `int u psi d sigma` (Euclidean).
    pub b_euclid: CsrMatrix,
    /// `int gamma u psi sqrt(g)/alpha d sigma`; only defined for scalar conductivity.
    pub b_metric: Option<CsrMatrix>,
}

impl SystemMatrices {
    pub fn energy(&self, u: &[f64]) -> f64 {
        crate::fem::sparse::dot(u, &self.k.mul_vec(u))
    }

    pub fn vertex_count(&self) -> usize {
        self.k.rows()
    }
}

/// P1 assembly with coefficients frozen at triangle centroids.
pub fn assemble(mesh: &Mesh, coefficients: &Coefficients) -> Result<SystemMatrices> {
    let n = mesh.vertex_count();
    let local = coefficients.sample_centroids(mesh)?;
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let m = local[t].form_matrix();
        let grads = mesh.barycentric_gradients(t);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], area * m.form(grads[a], grads[b])));
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, n, triplets);

    let scalar = coefficients.has_scalar_conductivity();
    let mut be = Vec::new();
    let mut bm = Vec::new();
    let v = mesh.vertices();
    for (i, j) in mesh.boundary_edges() {
        let e = sub(v[j], v[i]);
        let len = norm(e);
        edge_mass(&mut be, i, j, len);
        if scalar {
            let mid = [0.5 * (v[i][0] + v[j][0]), 0.5 * (v[i][1] + v[j][1])];
            let c = coefficients.at(mid)?;
            let nu = [e[1] / len, -e[0] / len];
            let (_, weight) = c.boundary_weight(nu);
            edge_mass(&mut bm, i, j, len * c.gamma() * weight);
        }
    }
    Ok(SystemMatrices {
        k,
        b_euclid: CsrMatrix::from_triplets(n, n, be),
        b_metric: scalar.then(|| CsrMatrix::from_triplets(n, n, bm)),
    })
}

fn edge_mass(out: &mut Vec<(usize, usize, f64)>, i: usize, j: usize, scale: f64) {
    let diag = scale / 3.0;
    let off = scale / 6.0;
    out.extend([(i, i, diag), (j, j, diag), (i, j, off), (j, i, off)]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::geometry::{build_mesh, Domain};

    #[test]
    fn single_right_triangle_element() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![0, 1, 2],
            vec![],
            vec![0.0; 3],
            1.0,
        )
        .unwrap();
        let m = assemble(&mesh, &Coefficients::euclidean()).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.k.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constants_in_kernel_and_gamma_linearity() {
        let domain = Domain::ellipse(1.5, 1.0).unwrap();
        let mesh = build_mesh(&domain, 0.15).unwrap();
        let one = Coefficients::new(
            CoefficientField::radial_bump(0.5, [0.2, 0.1], 0.4).unwrap(),
            CoefficientField::constant_tensor(crate::Sym2::new(1.5, 0.2, 0.8)).unwrap(),
        );
        let two = Coefficients::new(
            CoefficientField::product(&CoefficientField::constant(2.0).unwrap(), &one.conductivity).unwrap(),
            one.metric.clone(),
        );
        let m1 = assemble(&mesh, &one).unwrap();
        let m2 = assemble(&mesh, &two).unwrap();
        let ones = vec![1.0; mesh.vertex_count()];
        let scale = m1.k.max_abs();
        assert!(m1.k.mul_vec(&ones).iter().all(|r| r.abs() <= 1e-12 * scale));
        let (bm1, bm2) = (m1.b_metric.as_ref().unwrap(), m2.b_metric.as_ref().unwrap());
        for r in 0..mesh.vertex_count() {
            for (c, v) in m1.k.row(r) {
                assert!((m2.k.get(r, c) - 2.0 * v).abs() <= 1e-14 * scale);
            }
            for (c, v) in bm1.row(r) {
                assert!((bm2.get(r, c) - 2.0 * v).abs() <= 1e-14);
            }
            for (c, v) in m1.b_euclid.row(r) {
                assert_eq!(m2.b_euclid.get(r, c), v);
            }
        }
    }

    #[test]
    fn boundary_mass_integrates_length() {
        let domain = Domain::disk(1.0).unwrap();
        let mesh = build_mesh(&domain, 0.1).unwrap();
        let m = assemble(&mesh, &Coefficients::euclidean()).unwrap();
        let ones = vec![1.0; mesh.vertex_count()];
        let total = crate::fem::sparse::dot(&ones, &m.b_euclid.mul_vec(&ones));
        assert!((total - mesh.boundary_length()).abs() < 1e-12);
        let bm = m.b_metric.unwrap();
        let metric_total = crate::fem::sparse::dot(&ones, &bm.mul_vec(&ones));
        assert!((metric_total - total).abs() < 1e-12);
        // support only on boundary vertices
        let on_boundary: std::collections::HashSet<usize> = mesh.boundary_cycle().iter().copied().collect();
        for r in 0..mesh.vertex_count() {
            if !on_boundary.contains(&r) {
                assert_eq!(m.b_euclid.row(r).count(), 0);
            }
        }
    }

    #[test]
    fn fourier_data_is_mean_zero() {
        let mesh = build_mesh(&Domain::disk(1.0).unwrap(), 0.1).unwrap();
        assert!(BoundaryDatum::fourier(&mesh, 3, 0.4).is_mean_zero());
        let shifted = BoundaryDatum::from_values(&mesh, vec![1.0 + 1e-3; mesh.boundary_cycle().len()]).unwrap();
        assert!(!shifted.is_mean_zero());
        assert!(shifted.project_mean_zero(&mesh).integral(&mesh).abs() < 1e-14);
    }
}
