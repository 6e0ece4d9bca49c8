//! P1 finite elements for the weighted Riemannian Dirichlet form, boundary
//! mass matrices, Dirichlet and mean-zero Neumann solvers, and the dense
//! symmetric kernels used by the spectral code.

mod assemble;
pub mod dense;
mod solve;
pub mod sparse;

pub use assemble::{assemble, BoundaryDatum, ScalarFieldP1, SystemMatrices};
pub use dense::{dense_sym_eig, DenseMatrix, SymEigen};
pub use solve::{neumann_trace, solve_dirichlet, solve_neumann, DirichletSolver};
pub use sparse::CsrMatrix;
