//! Higher-order Galerkin variational integrators.
//!
//! On each macro step `[kh, (k+1)h]` the trajectory is a polynomial of degree
//! `s` through `s + 1` control configurations, and the action integral is
//! approximated by a Gauss or Lobatto quadrature rule with `r` points. The
//! stationarity conditions of the resulting discrete action give a one-step
//! scheme (named `PsNrQu`, with `u` the quadrature order) that is symplectic
//! and momentum-preserving, and time-reversible whenever the quadrature rule
//! and the control points are symmetric.
//!
//! The crate is organised as follows:
//!
//! - [`quadrature`]: Gauss-Legendre and Gauss-Lobatto rules on `[0, 1]`
//! - [`basis`]: Lagrange interpolation basis and precomputed node tables
//! - [`models`]: test systems (harmonic oscillator, Kepler) with analytic
//!   derivatives and conserved quantities
//! - [`solver`]: damped Newton method for the nonlinear stage systems
//! - [`galerkin`]: discrete Lagrangian, discrete Euler-Lagrange residuals,
//!   discrete Legendre transforms and trajectory stepping
//! - [`analysis`]: convergence order estimation, conservation diagnostics,
//!   reversibility defect and linear stability
//! - [`cli`]: configuration and experiment driver behind the `galvi` binary

pub mod analysis;
pub mod basis;
pub mod cli;
pub mod galerkin;
pub mod models;
pub mod quadrature;
pub mod solver;

use galerkin::Trajectory;
use solver::SolveReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A call was made with arguments outside the supported domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An integrator specification or run configuration failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A model was evaluated at a singular configuration (e.g. Kepler at the
    /// origin).
    #[error("singularity: {0}")]
    Singularity(String),

    /// The Newton iteration did not reach the residual tolerance.
    #[error(
        "solver did not converge: {} iterations, residual {:.3e}, \
         Jacobian condition estimate {:.3e}",
        report.iterations,
        report.final_residual,
        report.jacobian_condition_estimate
    )]
    NonConvergence { report: SolveReport },

    /// Integration aborted; the trajectory computed so far is attached.
    #[error("integration failed at step {step}: {source}")]
    StepFailed {
        step: usize,
        partial: Box<Trajectory>,
        #[source]
        source: Box<Error>,
    },

    /// A linear stage system (stability analysis) was singular.
    #[error("singular linear stage system: {0}")]
    SingularSystem(String),

    /// Configuration file or flag parsing failed.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 for validation-type errors, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Validation(_) | Error::Config(_) | Error::Io(_) => {
                1
            }
            Error::Singularity(_)
            | Error::NonConvergence { .. }
            | Error::StepFailed { .. }
            | Error::SingularSystem(_) => 2,
        }
    }
}
