//! Discrete Dirichlet-to-Neumann operator, Steklov eigenpairs, and the
//! frequency and lower frequency of boundary data.

use crate::error::{Error, Result};
use crate::fem::{dense_sym_eig, DenseMatrix, DirichletSolver, SystemMatrices};
use crate::geometry::Mesh;

/// Boundary Schur complement `S = K_BB - K_BI K_II^{-1} K_IB`, indexed by
/// boundary-cycle position.
pub fn dtn_matrix(matrices: &SystemMatrices, mesh: &Mesh) -> Result<DenseMatrix> {
    let solver = DirichletSolver::new(matrices, mesh)?.factorized()?;
    dtn_from_parts(matrices, &solver)
}

pub fn dtn_from_parts(matrices: &SystemMatrices, solver: &DirichletSolver) -> Result<DenseMatrix> {
    let boundary = solver.boundary();
    let k = boundary.len();
    let k_bb = matrices.k.submatrix(boundary, boundary);
    let k_ib = solver.k_ib();
    // K_BI = K_IB^T, so column j of K_BI K_II^{-1} K_IB is K_IB^T x_j.
    let mut s = DenseMatrix::zeros(k);
    let mut rhs = vec![0.0; solver.interior().len()];
    let mut col_ib: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for r in 0..k_ib.rows() {
        for (c, v) in k_ib.row(r) {
            col_ib[c].push((r, v));
        }
    }
    for j in 0..k {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for &(r, v) in &col_ib[j] {
            rhs[r] = v;
        }
        let x = solver.solve_interior(&rhs)?;
        for i in 0..k {
            let coupling: f64 = col_ib[i].iter().map(|&(r, v)| v * x[r]).sum();
            s[(i, j)] = k_bb.get(i, j) - coupling;
        }
    }
    Ok(s.symmetrized())
}

/// Euclidean boundary mass matrix restricted to the boundary cycle.
pub fn boundary_mass(matrices: &SystemMatrices, mesh: &Mesh) -> DenseMatrix {
    let cycle = mesh.boundary_cycle();
    DenseMatrix::from_fn(cycle.len(), |i, j| matrices.b_euclid.get(cycle[i], cycle[j]))
}

/// Default number of Steklov pairs kept.
pub fn default_mode_count(boundary_vertices: usize) -> usize {
    boundary_vertices.min(120)
}

/// Smallest Steklov pairs with `B_e`-orthonormal boundary modes.
#[derive(Clone, Debug)]
pub struct SteklovBasis {
    mu: Vec<f64>,
    modes: Vec<Vec<f64>>,
    tag: String,
}

impl SteklovBasis {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn count(&self) -> usize {
        self.mu.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Coefficients `a_n = phi_n^T B f`.
    pub fn coefficients(&self, b: &DenseMatrix, f: &[f64]) -> Vec<f64> {
        let bf = b.mul_vec(f);
        self.modes.iter().map(|phi| dot(phi, &bf)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `S x = mu B x` and keeps the `m` smallest pairs.
pub fn steklov_basis(s: &DenseMatrix, b: &DenseMatrix, m: usize) -> Result<SteklovBasis> {
    let k = s.dim();
    if m == 0 || m > k {
        return Err(Error::InvalidInput(format!("mode count {m} outside 1..={k}")));
    }
    let eig = dense_sym_eig(s, b)?;
    let top = eig.values.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let kernel = eig.values.iter().filter(|&&mu| mu.abs() <= 1e-9 * top).count();
    if kernel > 1 {
        return Err(Error::KernelDimension(kernel));
    }
    let mut mu = Vec::with_capacity(m);
    let mut modes = Vec::with_capacity(m);
    for p in 0..m {
        let mut x = eig.vector(p);
        let pivot = x.iter().fold(0.0f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        mu.push(eig.values[p]);
        modes.push(x);
    }
    Ok(SteklovBasis { mu, modes, tag: String::new() })
}

/// `f^T S0 f / f^T B f` with the Euclidean DtN matrix `S0`.
pub fn frequency(s0: &DenseMatrix, b: &DenseMatrix, f: &[f64]) -> Result<f64> {
    let l2 = b.form(f, f);
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(l2 > 1e-14 * sup * sup) || sup == 0.0 {
        return Err(Error::InvalidInput("boundary datum has no L2 mass".into()));
    }
    Ok(s0.form(f, f) / l2)
}

/// Largest admissible unresolved fraction of `||f||^2` in spectral sums.
pub const TAIL_TOLERANCE: f64 = 1e-4;

/// Spectral sums of a mean-zero datum against the Euclidean Steklov basis:
/// `(sum a_n^2, sum a_n^2 / mu_n)` over `n >= 1`.
fn spectral_sums(basis: &SteklovBasis, b: &DenseMatrix, f: &[f64]) -> Result<(f64, f64)> {
    let total = b.form(f, f);
    if !(total > 0.0) {
        return Err(Error::InvalidInput("boundary datum has no L2 mass".into()));
    }
    let a = basis.coefficients(b, f);
    let captured: f64 = a.iter().map(|x| x * x).sum();
    let fraction = ((total - captured) / total).max(0.0);
    if fraction > TAIL_TOLERANCE {
        return Err(Error::TailTooLarge { fraction });
    }
    let mut l2 = 0.0;
    let mut dual = 0.0;
    for (an, mu) in a.iter().zip(basis.mu()).skip(1) {
        l2 += an * an;
        dual += an * an / mu;
    }
    Ok((l2, dual))
}

/// `sum a_n^2 / sum (a_n^2 / mu_n)`, the ratio of the `L2` norm to the
/// `H^{-1/2}_*` norm of a mean-zero datum.
pub fn low_frequency(basis: &SteklovBasis, b: &DenseMatrix, f: &[f64]) -> Result<f64> {
    let (l2, dual) = spectral_sums(basis, b, f)?;
    if !(dual > 0.0) {
        return Err(Error::InvalidInput("datum has no component on non-constant modes".into()));
    }
    Ok(l2 / dual)
}

/// Frequency data of one boundary datum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyReport {
    pub phi: f64,
    pub phi1: f64,
    pub l2: f64,
    pub semi_h12: f64,
    pub dual: f64,
}

pub fn frequency_report(s0: &DenseMatrix, b: &DenseMatrix, basis: &SteklovBasis, f: &[f64]) -> Result<FrequencyReport> {
    let phi = frequency(s0, b, f)?;
    let (captured, dual) = spectral_sums(basis, b, f)?;
    if !(dual > 0.0) {
        return Err(Error::InvalidInput("datum has no component on non-constant modes".into()));
    }
    Ok(FrequencyReport { phi, phi1: captured / dual, l2: b.form(f, f), semi_h12: s0.form(f, f), dual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientField, Coefficients};
    use crate::fem::{assemble, BoundaryDatum};
    use crate::geometry::{build_mesh, Domain};

    fn setup(h: f64, coefficients: &Coefficients) -> (Mesh, DenseMatrix, DenseMatrix) {
        let mesh = build_mesh(&Domain::disk(1.0).unwrap(), h).unwrap();
        let m = assemble(&mesh, coefficients).unwrap();
        let s = dtn_matrix(&m, &mesh).unwrap();
        let b = boundary_mass(&m, &mesh);
        (mesh, s, b)
    }

    #[test]
    fn dtn_structure() {
        let (mesh, s, b) = setup(0.05, &Coefficients::euclidean());
        let scale = s.max_abs();
        assert!(s.asymmetry() <= 1e-9 * scale);
        let ones = vec![1.0; s.dim()];
        assert!(s.mul_vec(&ones).iter().all(|v| v.abs() <= 1e-9 * scale));
        let f = BoundaryDatum::fourier(&mesh, 1, 0.0);
        let energy = s.form(f.values(), f.values());
        assert!((energy - std::f64::consts::PI).abs() < 0.02 * std::f64::consts::PI);
        assert!(frequency(&s, &b, &ones).unwrap() <= 1e-6);
    }

    #[test]
    fn disk_spectrum_and_scaling() {
        let (_, s, b) = setup(0.05, &Coefficients::euclidean());
        let basis = steklov_basis(&s, &b, 9).unwrap();
        let expect = [0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        assert!(basis.mu()[0].abs() <= 1e-6 * basis.mu()[1]);
        for k in 1..9 {
            assert!((basis.mu()[k] - expect[k]).abs() < 0.03 * expect[k], "mu_{k} = {}", basis.mu()[k]);
        }
        let c = basis.mode(0);
        let spread = c.iter().fold(f64::MIN, |m, v| m.max(*v)) - c.iter().fold(f64::MAX, |m, v| m.min(*v));
        assert!(spread <= 1e-6 * c[0].abs());
        for p in 0..9 {
            for q in 0..9 {
                let g = b.form(basis.mode(p), basis.mode(q));
                assert!((g - if p == q { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        let doubled = steklov_basis(&s.scaled(2.0), &b, 9).unwrap();
        for k in 1..9 {
            assert!((doubled.mu()[k] - 2.0 * basis.mu()[k]).abs() < 1e-10 * basis.mu()[k]);
        }
    }

    #[test]
    fn frequencies_of_mixed_data() {
        let (mesh, s, b) = setup(0.05, &Coefficients::euclidean());
        let basis = steklov_basis(&s, &b, default_mode_count(s.dim())).unwrap();
        let f1 = BoundaryDatum::fourier(&mesh, 1, 0.0);
        let f4 = BoundaryDatum::fourier(&mesh, 4, 0.0);
        let f: Vec<f64> = f1.values().iter().zip(f4.values()).map(|(a, c)| a + c).collect();
        let r = frequency_report(&s, &b, &basis, &f).unwrap();
        assert!((r.phi - 2.5).abs() < 0.05 * 2.5, "{r:?}");
        assert!((r.phi1 - 1.6).abs() < 0.05 * 1.6, "{r:?}");
        assert!(r.phi1 <= r.phi * (1.0 + 1e-6));
        // an eigenfunction has equal low frequency and eigenvalue
        let k = 5;
        let phi1 = low_frequency(&basis, &b, basis.mode(k)).unwrap();
        assert!((phi1 - basis.mu()[k]).abs() < 0.01 * basis.mu()[k]);
    }

    #[test]
    fn eigenvalues_bracketed_by_frequencies() {
        let coefficients = Coefficients::new(
            CoefficientField::radial_bump(0.8, [0.2, 0.0], 0.5).unwrap(),
            CoefficientField::constant_tensor(crate::Sym2::new(1.3, 0.2, 0.9)).unwrap(),
        );
        let (mesh, s, b) = setup(0.08, &coefficients);
        let (_, s0, _) = setup(0.08, &Coefficients::euclidean());
        let basis = steklov_basis(&s, &b, 12).unwrap();
        let c1 = coefficients.energy_constant() * 0.9;
        for k in 1..12 {
            let ratio = basis.mu()[k] / frequency(&s0, &b, basis.mode(k)).unwrap();
            assert!(ratio >= c1 && ratio <= 1.0 / c1, "k {k}: {ratio}");
        }
        let _ = mesh;
    }
}
