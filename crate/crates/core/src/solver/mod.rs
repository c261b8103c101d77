//! Semidefinite programming: problem form, backends, and builders.
//!
//! Problems are stated over a two-block variable `Z`: a dense positive
//! semidefinite block and a nonnegative diagonal block. The problem reads
//!
//! > maximize `tr(G Z)` subject to `tr(F_k Z) = c_k` and `Z >= 0`.
//!
//! The built-in backend is a primal-dual interior-point method that solves
//! this jointly with its dual, `minimize c^T x` subject to
//! `sum_k x_k F_k - G >= 0`, so every answer carries both a matrix and a
//! multiplier vector.

pub mod ipm;
pub mod membership;
pub mod sdpa;
pub mod sparse;

use crate::error::{Error, Result};
use faer::Mat;
pub use membership::{
    bell_max_problem, bell_maximum, constraint_multipliers, membership, membership_problem,
    BellMaxReport, CertificateKind, MembershipOptions, MembershipOutcome, MembershipReport,
    RejectionCertificate,
};
pub use sparse::{BlockMatrix, SparseSym};

/// Environment variable naming the backend to use.
pub const BACKEND_ENV: &str = "QMOMENT_SDP_BACKEND";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    /// Converged to the requested tolerances.
    Optimal,
    /// No `Z` satisfies the constraints; a Farkas ray is attached.
    Infeasible,
    /// The objective grows without bound along an attached ray.
    Unbounded,
    /// Iteration budget exhausted; results carry the reached accuracy.
    MaxIterations,
    /// Linear algebra broke down before reaching the tolerances.
    IllConditioned,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::MaxIterations => "max-iterations",
            SolverStatus::IllConditioned => "ill-conditioned",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Relative duality-gap target.
    pub tol_gap: f64,
    /// Relative feasibility target for both residuals.
    pub tol_feas: f64,
    pub max_iterations: usize,
    /// Fraction of the step to the positivity boundary, in (0, 1).
    pub step_fraction: f64,
    /// Objective magnitude treated as divergence.
    pub unbounded_threshold: f64,
    /// Per-iteration progress lines on stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> SolverOptions {
        SolverOptions {
            tol_gap: 1e-9,
            tol_feas: 1e-9,
            max_iterations: 150,
            step_fraction: 0.98,
            unbounded_threshold: 1e9,
            verbose: false,
        }
    }
}

/// `maximize tr(G Z)` with `tr(F_k Z) = c_k`, `Z >= 0`, over the two-block
/// variable.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub sdp_dim: usize,
    pub lp_dim: usize,
    /// `G`.
    pub objective: BlockMatrix,
    /// `(F_k, c_k)` pairs.
    pub constraints: Vec<(BlockMatrix, f64)>,
}

impl SdpProblem {
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::Solver("a problem needs at least one constraint".into()));
        }
        let check = |b: &BlockMatrix| -> Result<()> {
            if b.sdp.dim() != self.sdp_dim {
                return Err(Error::Dimension {
                    what: "matrix block dimension",
                    expected: self.sdp_dim,
                    got: b.sdp.dim(),
                });
            }
            if let Some(&(k, _)) = b.lp.last() {
                if k as usize >= self.lp_dim {
                    return Err(Error::Dimension {
                        what: "diagonal block index",
                        expected: self.lp_dim,
                        got: k as usize,
                    });
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for (f, v) in &self.constraints {
            check(f)?;
            if !v.is_finite() {
                return Err(Error::Solver("constraint value not finite".into()));
            }
        }
        Ok(())
    }
}

/// Joint primal-dual answer for an [`SdpProblem`].
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolverStatus,
    /// `Z`: the dense block of the maximizing variable.
    pub primal_matrix: Mat<f64>,
    /// `Z`: the diagonal block.
    pub primal_lp: Vec<f64>,
    /// `x`: multipliers of the equality constraints.
    pub dual_vector: Vec<f64>,
    /// `tr(G Z)`.
    pub primal_value: f64,
    /// `c^T x`.
    pub dual_value: f64,
    /// Relative duality gap at exit.
    pub gap: f64,
    /// Relative residual of `tr(F_k Z) = c_k`.
    pub primal_residual: f64,
    /// Relative residual of the dual slack equation.
    pub dual_residual: f64,
    /// `S = sum_k x_k F_k - G`, kept positive semidefinite by the line
    /// search, so it can serve directly as a certificate matrix.
    pub slack_matrix: Mat<f64>,
    /// Diagonal block of the slack.
    pub slack_lp: Vec<f64>,
    pub iterations: usize,
    /// On [`SolverStatus::Infeasible`]: `x` direction with
    /// `sum x_k F_k >= 0` and `c^T x < 0`, proving emptiness.
    pub infeasibility_ray: Option<Vec<f64>>,
    /// On [`SolverStatus::Unbounded`]: normalized feasible direction with
    /// positive objective gain (dense block; the diagonal block follows).
    pub unbounded_ray: Option<(Mat<f64>, Vec<f64>)>,
}

impl SdpSolution {
    /// True when the answer is numerically trustworthy at `tol`, whatever
    /// the formal status says.
    pub fn reached(&self, tol: f64) -> bool {
        self.status == SolverStatus::Optimal
            || (self.gap <= tol && self.primal_residual <= tol && self.dual_residual <= tol)
    }
}

pub trait SdpBackend {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution>;
}

/// The built-in interior-point backend.
pub struct BuiltinIpm;

impl SdpBackend for BuiltinIpm {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn solve(&self, problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
        ipm::solve(problem, options)
    }
}

/// Backend named by the `QMOMENT_SDP_BACKEND` environment variable;
/// defaults to the built-in one.
pub fn backend_from_env() -> Result<Box<dyn SdpBackend>> {
    match std::env::var(BACKEND_ENV) {
        Err(_) => Ok(Box::new(BuiltinIpm)),
        Ok(name) if name.is_empty() || name == "builtin" => Ok(Box::new(BuiltinIpm)),
        Ok(name) => Err(Error::Solver(format!(
            "unknown backend {name:?} in {BACKEND_ENV}; available: builtin"
        ))),
    }
}
