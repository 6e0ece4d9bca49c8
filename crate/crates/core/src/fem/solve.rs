//! Dirichlet and mean-zero Neumann solvers.

use crate::error::{Error, Result};
use crate::fem::assemble::{boundary_weights, BoundaryDatum, ScalarFieldP1, SystemMatrices};
use crate::fem::sparse::{conjugate_gradient, dot, norm2, CsrMatrix, EnvelopeCholesky};
use crate::geometry::Mesh;

const CG_TOLERANCE: f64 = 1e-12;

fn iteration_cap(unknowns: usize) -> usize {
    ((20.0 * (unknowns as f64).sqrt()).ceil() as usize).max(50)
}

/// Interior block system `K_II u_I = -K_IB f` for repeated Dirichlet solves.
#[derive(Clone, Debug)]
pub struct DirichletSolver {
    vertex_count: usize,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    k_ii: CsrMatrix,
    k_ib: CsrMatrix,
    diagonal: Vec<f64>,
    factor: Option<EnvelopeCholesky>,
}

impl DirichletSolver {
    pub fn new(matrices: &SystemMatrices, mesh: &Mesh) -> Result<Self> {
        let n = mesh.vertex_count();
        if matrices.vertex_count() != n {
            return Err(Error::InvalidInput("matrices do not match mesh".into()));
        }
        let boundary = mesh.boundary_cycle().to_vec();
        let mut on_boundary = vec![false; n];
        for &b in &boundary {
            on_boundary[b] = true;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| !on_boundary[i]).collect();
        let k_ii = matrices.k.submatrix(&interior, &interior);
        let k_ib = matrices.k.submatrix(&interior, &boundary);
        let diagonal = k_ii.diagonal();
        Ok(DirichletSolver { vertex_count: n, boundary, interior, k_ii, k_ib, diagonal, factor: None })
    }

    /// Switches interior solves to a sparse Cholesky factorization, which pays
    /// off when many right-hand sides share the operator.
    pub fn factorized(mut self) -> Result<Self> {
        self.factor = Some(EnvelopeCholesky::factor(&self.k_ii)?);
        Ok(self)
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn k_ii(&self) -> &CsrMatrix {
        &self.k_ii
    }

    pub fn k_ib(&self) -> &CsrMatrix {
        &self.k_ib
    }

    /// Solves `K_II x = rhs`.
    pub fn solve_interior(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if let Some(factor) = &self.factor {
            return Ok(factor.solve(rhs));
        }
        let mut x = vec![0.0; rhs.len()];
        conjugate_gradient(
            |v, out| self.k_ii.mul_vec_into(v, out),
            &self.diagonal,
            rhs,
            &mut x,
            CG_TOLERANCE,
            iteration_cap(rhs.len()),
        )?;
        Ok(x)
    }

    /// Discrete harmonic extension of boundary values given in cycle order.
    pub fn extend(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.boundary.len() {
            return Err(Error::InvalidInput("boundary data length mismatch".into()));
        }
        let rhs: Vec<f64> = self.k_ib.mul_vec(f).iter().map(|v| -v).collect();
        let ui = self.solve_interior(&rhs)?;
        let mut u = vec![0.0; self.vertex_count];
        for (&b, &v) in self.boundary.iter().zip(f) {
            u[b] = v;
        }
        for (&i, &v) in self.interior.iter().zip(&ui) {
            u[i] = v;
        }
        Ok(u)
    }

    pub fn solve(&self, mesh: &Mesh, f: &BoundaryDatum) -> Result<ScalarFieldP1> {
        ScalarFieldP1::new(mesh, self.extend(f.values())?)
    }
}

/// Solution of the Dirichlet problem with boundary values `f`.
pub fn solve_dirichlet(matrices: &SystemMatrices, mesh: &Mesh, f: &BoundaryDatum) -> Result<ScalarFieldP1> {
    DirichletSolver::new(matrices, mesh)?.solve(mesh, f)
}

/// Mean-zero solution of `K v = B_e eta`.
///
/// The constraint `c^T v = 0` with `c = B_e 1` is imposed through the
/// augmented operator `K + c c^T`, which is SPD on connected meshes and whose
/// solution coincides with the bordered system's because the multiplier
/// vanishes for compatible data.
pub fn solve_neumann(matrices: &SystemMatrices, mesh: &Mesh, eta: &BoundaryDatum) -> Result<ScalarFieldP1> {
    let n = mesh.vertex_count();
    let mut load = vec![0.0; n];
    for (&b, &v) in mesh.boundary_cycle().iter().zip(eta.values()) {
        load[b] = v;
    }
    let rhs = matrices.b_euclid.mul_vec(&load);
    let c = matrices.b_euclid.mul_vec(&vec![1.0; n]);
    let integral: f64 = rhs.iter().sum();
    let scale = norm2(&rhs).max(f64::MIN_POSITIVE) * (n as f64).sqrt();
    if integral.abs() > 1e-9 * scale {
        return Err(Error::Compatibility { integral });
    }
    let mut diagonal = matrices.k.diagonal();
    for (d, ci) in diagonal.iter_mut().zip(&c) {
        *d += ci * ci;
    }
    let mut v = vec![0.0; n];
    conjugate_gradient(
        |x, out| {
            matrices.k.mul_vec_into(x, out);
            let s = dot(&c, x);
            for (o, ci) in out.iter_mut().zip(&c) {
                *o += s * ci;
            }
        },
        &diagonal,
        &rhs,
        &mut v,
        CG_TOLERANCE,
        iteration_cap(n),
    )?;
    ScalarFieldP1::new(mesh, v)
}

/// Discrete conormal derivative `eta` of `u`, defined by `B_e eta = (K u)|_B`
/// on the boundary cycle.
pub fn neumann_trace(matrices: &SystemMatrices, mesh: &Mesh, u: &ScalarFieldP1) -> Result<BoundaryDatum> {
    let cycle = mesh.boundary_cycle();
    let ku = matrices.k.mul_vec(u.values());
    let rhs: Vec<f64> = cycle.iter().map(|&b| ku[b]).collect();
    let mass = matrices.b_euclid.submatrix(cycle, cycle);
    let diagonal = mass.diagonal();
    let mut eta: Vec<f64> = rhs.iter().zip(boundary_weights(mesh)).map(|(r, w)| r / w).collect();
    conjugate_gradient(|x, out| mass.mul_vec_into(x, out), &diagonal, &rhs, &mut eta, 1e-14, 10 * cycle.len())?;
    BoundaryDatum::from_values(mesh, eta)
}
