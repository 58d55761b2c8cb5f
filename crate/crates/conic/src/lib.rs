//! Small dense conic solvers used by the resource-allocation subproblems.
//!
//! Three pieces live here:
//!
//! * [`solve_sdp`]: complex Hermitian semidefinite programs with linear
//!   trace constraints, solved by a primal-dual interior-point method on the
//!   real embedding `[Re -Im; Im Re]`.
//! * [`solve_quad_feasibility`]: feasibility of systems of separable convex
//!   quadratic inequalities with box and budget constraints (log-barrier
//!   phase-I method).
//! * [`gaussian_randomization`]: rank-one recovery from a PSD matrix by
//!   sampling `CN(0, X)` and projecting onto a feasible manifold.
//!
//! Problems are expected to be small (matrix dimension up to a few dozen) and
//! reasonably scaled; callers normalize powers by the noise floor before
//! building programs.

mod error;
pub mod hermitian;
mod ipm;
pub mod quad;
pub mod randomization;
pub mod sdp;

pub use error::ConicError;
pub use hermitian::{CMat, CVec};
pub use quad::{solve_quad_feasibility, QuadConstraint, QuadFeasibility, QuadSolution, QuadStatus};
pub use randomization::{gaussian_randomization, Projector, Randomized};
pub use sdp::{solve_sdp, ConeProgram, Constraint, SdpSolution, SdpStatus, Sense, SolverOptions};

pub use num_complex::Complex64;
