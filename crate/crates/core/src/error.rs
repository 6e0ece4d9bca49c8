use thiserror::Error;

use crate::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("boundary projection did not converge for point ({}, {})", .0[0], .0[1])]
    ProjectionFailed(Point),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("conjugate gradients stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("symmetric eigensolver did not converge after {0} iterations")]
    EigenNoConvergence(usize),

    #[error("normal flow left the tube phi < d0 at t = {t}")]
    OutOfTube { t: f64 },

    #[error("profile column {column} is not positive at d = {d} (value {value:e})")]
    NonPositiveProfile { column: &'static str, d: f64, value: f64 },

    #[error("Steklov basis misses {fraction:e} of the datum's L2 mass")]
    TailTooLarge { fraction: f64 },

    #[error("Neumann datum is not mean-zero (boundary integral {integral:e})")]
    Compatibility { integral: f64 },

    #[error("Steklov kernel has dimension {0} (expected 1)")]
    KernelDimension(usize),

    #[error("coefficient field violates its bounds: {0}")]
    Ellipticity(String),

    #[error("{}", format_config_errors(.0))]
    Config(Vec<crate::cli::config::ConfigError>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn format_config_errors(errors: &[crate::cli::config::ConfigError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}
