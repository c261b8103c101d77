//! Closed-form first-level membership for two-input binary correlators.
//!
//! In the scenario with two sign-valued measurements per side, the first
//! relaxation level admits a scalar characterization: after normalizing
//! each pair correlator against the single-party marginals, membership is
//! equivalent to four arcsine inequalities. This module implements that
//! test, the weaker variant on the raw correlators, the two-entry matrix
//! completion decision both rest on, and the Schur-complement positivity
//! reduction used to derive them.

use std::f64::consts::PI;

use faer::prelude::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::scenario::CorrelatorData;
use crate::solver::ipm::min_eigenvalue;

/// Band around `C_i^2 = 1` that routes to the deterministic branch of
/// [`q1_membership`], keeping the normalization away from a zero divisor.
pub const DEGENERATE_GUARD: f64 = 1e-10;

/// Eigenvalue slack below which a matrix still counts as positive
/// semidefinite, relative to its largest diagonal entry.
pub const PSD_TOLERANCE: f64 = 1e-7;

/// Range slack accepted on raw correlators before taking an arcsine. Matches
/// the slack [`CorrelatorData::new`] grants on its inputs.
const RAW_RANGE_SLACK: f64 = 1e-9;

/// Outcome of an arcsine membership test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcsinVerdict {
    /// The correlators pass the test.
    Member,
    /// The correlators are certified outside the tested set.
    NotMember,
    /// Some marginal is deterministic; one side is left with at most one
    /// effective measurement, so a classical model always exists.
    DegenerateDeterministic,
}

impl ArcsinVerdict {
    /// Both `Member` and `DegenerateDeterministic` accept the point.
    pub fn is_member(self) -> bool {
        !matches!(self, ArcsinVerdict::NotMember)
    }
}

/// Result of an arcsine membership test.
///
/// `values[m]` is the arcsine sum with the sign flipped on the `m`-th pair
/// correlator, ordered as in [`CorrelatorData::joints`]; the test accepts
/// when all four magnitudes stay within `pi`. The degenerate branch skips
/// the sums and reports zeros; an out-of-range normalized correlator
/// reports infinities, as no completion of its 2x2 minor exists.
#[derive(Clone, Debug)]
pub struct ArcsinReport {
    pub values: [f64; 4],
    pub max_abs: f64,
    pub verdict: ArcsinVerdict,
}

impl ArcsinReport {
    pub fn is_member(&self) -> bool {
        self.verdict.is_member()
    }
}

/// The four signed sums `sum_m asin(x_m) - 2 asin(x_k)` and their largest
/// magnitude. Inputs must already sit in `[-1, 1]`.
fn arcsin_sweep(x: [f64; 4]) -> ([f64; 4], f64) {
    let a = x.map(f64::asin);
    let total: f64 = a.iter().sum();
    let values = a.map(|v| total - 2.0 * v);
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (values, max_abs)
}

fn report(values: [f64; 4], max_abs: f64, band: f64) -> ArcsinReport {
    let verdict = if max_abs <= PI + band {
        ArcsinVerdict::Member
    } else {
        ArcsinVerdict::NotMember
    };
    ArcsinReport {
        values,
        max_abs,
        verdict,
    }
}

/// Exact first-level membership test for two-input binary correlator data.
///
/// Each pair correlator is normalized to
/// `D_ij = (C_ij - C_i C_j) / sqrt((1 - C_i^2)(1 - C_j^2))` and the point is
/// a member iff every signed arcsine sum of the `D_ij` stays within `pi`.
/// A normalized value beyond `1 + tolerance` means the corresponding 2x2
/// minor has no positive completion and rejects outright; values within
/// `tolerance` of the range are clamped, never silently beyond that. A
/// marginal with `C_i^2 = 1` (within [`DEGENERATE_GUARD`]) short-circuits to
/// [`ArcsinVerdict::DegenerateDeterministic`].
pub fn q1_membership(data: &CorrelatorData, tolerance: f64) -> ArcsinReport {
    if data
        .singles
        .iter()
        .any(|c| c * c > 1.0 - DEGENERATE_GUARD)
    {
        return ArcsinReport {
            values: [0.0; 4],
            max_abs: 0.0,
            verdict: ArcsinVerdict::DegenerateDeterministic,
        };
    }
    let mut d = [0.0f64; 4];
    for (m, slot) in d.iter_mut().enumerate() {
        let ci = data.singles[m / 2];
        let cj = data.singles[2 + m % 2];
        let denom = ((1.0 - ci * ci) * (1.0 - cj * cj)).sqrt();
        let raw = (data.joints[m] - ci * cj) / denom;
        if raw.abs() > 1.0 + tolerance {
            return ArcsinReport {
                values: [f64::INFINITY; 4],
                max_abs: f64::INFINITY,
                verdict: ArcsinVerdict::NotMember,
            };
        }
        *slot = raw.clamp(-1.0, 1.0);
    }
    let (values, max_abs) = arcsin_sweep(d);
    report(values, max_abs, tolerance)
}

/// The weaker membership test on raw pair correlators, ignoring marginals.
///
/// Accepts iff every signed arcsine sum of the `C_ij` themselves stays
/// within `pi`. Whenever the non-degenerate branch of [`q1_membership`]
/// accepts, so does this test; the converse fails once the marginals carry
/// information, so a rejection here is a coarser certificate.
pub fn correlator_only_condition(data: &CorrelatorData) -> ArcsinReport {
    let mut x = [0.0f64; 4];
    for (m, slot) in x.iter_mut().enumerate() {
        let c = data.joints[m];
        if c.abs() > 1.0 + RAW_RANGE_SLACK {
            return ArcsinReport {
                values: [f64::INFINITY; 4],
                max_abs: f64::INFINITY,
                verdict: ArcsinVerdict::NotMember,
            };
        }
        *slot = c.clamp(-1.0, 1.0);
    }
    let (values, max_abs) = arcsin_sweep(x);
    report(values, max_abs, RAW_RANGE_SLACK)
}

/// Feasible range for the inner product of two unit vectors whose
/// projections on a common unit vector are `a` and `b`.
fn chord(a: f64, b: f64) -> (f64, f64) {
    let s = ((1.0 - a * a).max(0.0) * (1.0 - b * b).max(0.0)).sqrt();
    (a * b - s, a * b + s)
}

/// Decides whether the partially specified symmetric matrix
///
/// ```text
/// [ 1  z  x1 x2 ]
/// [ .  1  x3 x4 ]
/// [ .  .  1  t  ]
/// [ .  .  .  1  ]
/// ```
///
/// admits values of the free entries `z`, `t` making it positive
/// semidefinite. Row one confines `t` to `[a1, a2]` with
/// `a_{1,2} = x1 x2 -+ sqrt((1 - x1^2)(1 - x2^2))`, row two to the interval
/// `[b1, b2]` built the same way from `x3, x4`, and a completion exists iff
/// `a1 <= b2` and `b1 <= a2`. Equivalently, every signed arcsine sum of the
/// `x_i` stays within `pi`.
pub fn pairwise_completion_exists(x1: f64, x2: f64, x3: f64, x4: f64) -> Result<bool> {
    let mut x = [x1, x2, x3, x4];
    for v in &mut x {
        if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
            return Err(Error::Constraint(format!(
                "completion entry {v} outside [-1, 1]"
            )));
        }
        *v = v.clamp(-1.0, 1.0);
    }
    let alpha = chord(x[0], x[1]);
    let beta = chord(x[2], x[3]);
    Ok(alpha.0 <= beta.1 && beta.0 <= alpha.1)
}

/// Positive semidefiniteness via the Schur complement.
///
/// Splits `m` as `[[P, Q], [Q^T, R]]` with `P` the leading `p_dim` block.
/// When `P` is strictly positive definite the decision reduces to the
/// positivity of `R - Q^T P^{-1} Q`; when it is not, the test falls back to
/// a direct eigenvalue check of the full matrix. Eigenvalues above
/// `-`[`PSD_TOLERANCE`] times the largest diagonal magnitude count as
/// nonnegative. Only the lower triangle of `m` is read.
pub fn schur_psd(m: &Mat<f64>, p_dim: usize) -> Result<bool> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension {
            what: "schur complement matrix columns",
            expected: n,
            got: m.ncols(),
        });
    }
    if p_dim == 0 || p_dim >= n {
        return Err(Error::Dimension {
            what: "schur complement split",
            expected: n.saturating_sub(1),
            got: p_dim,
        });
    }
    let mut scale = 1.0f64;
    for k in 0..n {
        scale = scale.max(m[(k, k)].abs());
    }
    let tol = PSD_TOLERANCE * scale;
    let p = m.as_ref().submatrix(0, 0, p_dim, p_dim).to_owned();
    let Ok(chol) = p.llt(Side::Lower) else {
        return Ok(min_eigenvalue(m)? >= -tol);
    };
    // read Q from the lower-left block so an asymmetric upper triangle is
    // never consulted
    let q = m
        .as_ref()
        .submatrix(p_dim, 0, n - p_dim, p_dim)
        .transpose()
        .to_owned();
    let r = m
        .as_ref()
        .submatrix(p_dim, p_dim, n - p_dim, n - p_dim)
        .to_owned();
    let solved = chol.solve(&q);
    let qt = q.transpose().to_owned();
    let s = &r - &(&qt * &solved);
    Ok(min_eigenvalue(&s)? >= -tol)
}
