//! Queries against a moment relaxation: membership of a behavior and
//! extremal values of affine functionals.
//!
//! Membership asks for the largest `lambda` such that some completion of
//! the data-pinned moment matrix satisfies `Gamma >= lambda I`. The known
//! entries come from the behavior, the free classes are variables, and the
//! answer is nonnegative exactly when the behavior passes the relaxation.
//! The dual solution of the same program is a separating functional when
//! the answer is negative: a weighting of the known moments that is
//! nonnegative on every behavior passing the relaxation but negative here.
//!
//! The extremal-value query drops the data and instead maximizes an affine
//! functional of the behavior over all positive semidefinite moment
//! matrices, yielding an upper bound on the functional over the behaviors
//! the relaxation accepts. Output-probability rows that positivity of the
//! matrix does not already imply are carried as diagonal cuts.

use super::sparse::{BlockMatrix, SparseSym};
use super::{backend_from_env, SdpProblem, SolverOptions, SolverStatus};
use crate::error::{Error, Result};
use crate::moment::RelaxationStructure;
use crate::scenario::{Affine, Behavior, DEFAULT_NS_TOLERANCE};
use faer::Mat;

/// How a membership run decides and how hard the solver tries.
#[derive(Clone, Debug)]
pub struct MembershipOptions {
    pub solver: SolverOptions,
    /// Slack below zero that still counts as member, absorbing solver
    /// error. Also the tolerance of the output-probability prechecks.
    pub margin: f64,
}

impl Default for MembershipOptions {
    fn default() -> MembershipOptions {
        MembershipOptions {
            solver: SolverOptions::default(),
            margin: 1e-6,
        }
    }
}

/// Outcome of a membership query, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct MembershipReport {
    /// Largest `lambda` with `Gamma >= lambda I` over completions.
    pub lambda_max: f64,
    pub outcome: MembershipOutcome,
    pub status: SolverStatus,
    pub iterations: usize,
    pub gap: f64,
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        matches!(self.outcome, MembershipOutcome::Member { .. })
    }
}

#[derive(Clone, Debug)]
pub enum MembershipOutcome {
    /// The behavior passes; the witness is a completed moment matrix.
    Member { witness: Mat<f64> },
    /// The behavior fails; the certificate separates it.
    Excluded { certificate: RejectionCertificate },
}

/// A functional on behaviors that is nonnegative on everything the
/// relaxation accepts and negative on the rejected behavior.
#[derive(Clone, Debug)]
pub struct RejectionCertificate {
    pub functional: Affine,
    /// The functional evaluated on the rejected behavior.
    pub value: f64,
    pub kind: CertificateKind,
}

#[derive(Clone, Debug)]
pub enum CertificateKind {
    /// Dual matrix certificate: `functional(P) = tr(K(P) Z)` with `Z`
    /// positive semidefinite, unit trace, orthogonal to the free classes.
    /// The multipliers line up with the constraints of
    /// [`RelaxationStructure::instantiate`].
    SpectralDual { matrix: Mat<f64>, multipliers: Vec<f64> },
    /// A single output probability, labeled `(input, output)` per party,
    /// is negative in the data.
    OutputProbability { alice: (usize, usize), bob: (usize, usize) },
}

/// Indicator matrix of a class: ones at its positions, mirrors implied.
fn class_indicator(structure: &RelaxationStructure, id: usize) -> SparseSym {
    SparseSym::from_upper(
        structure.n(),
        structure.class(id)
            .positions
            .iter()
            .map(|&(i, j)| (i, j, 1.0))
            .collect(),
    )
}

/// The membership program in solver form.
///
/// Variables are the free-class moments plus a bound `t`; the program is
/// `min t` subject to `K + sum_c y_c A_c + t I >= 0`, whose optimum is
/// `-lambda_max`. The constraint list holds the free classes in
/// [`RelaxationStructure::free_ids`] order, then the identity.
pub fn membership_problem(
    structure: &RelaxationStructure,
    behavior: &Behavior,
) -> Result<SdpProblem> {
    let n = structure.n();
    let mut g_entries = Vec::new();
    for &id in structure.known_ids() {
        let class = structure.class(id);
        let g = class.known.as_ref().expect("known class has a functional");
        let v = g.eval(behavior);
        for &(i, j) in &class.positions {
            g_entries.push((i, j, -v));
        }
    }
    let mut constraints: Vec<(BlockMatrix, f64)> = structure
        .free_ids()
        .iter()
        .map(|&id| (BlockMatrix::sdp_only(class_indicator(structure, id)), 0.0))
        .collect();
    constraints.push((BlockMatrix::sdp_only(SparseSym::identity(n)), 1.0));
    Ok(SdpProblem {
        sdp_dim: n,
        lp_dim: 0,
        objective: BlockMatrix::sdp_only(SparseSym::from_upper(n, g_entries)),
        constraints,
    })
}

/// Decides whether a behavior passes the relaxation.
///
/// Normalization or signalling defects in the data are errors; negative
/// probabilities are legal inputs and lead to exclusion, caught either by
/// an output-probability precheck or by the program itself.
pub fn membership(
    structure: &RelaxationStructure,
    behavior: &Behavior,
    options: &MembershipOptions,
) -> Result<MembershipReport> {
    if behavior.scenario() != structure.scenario() {
        return Err(Error::Scenario(format!(
            "behavior scenario {} does not match structure scenario {}",
            behavior.scenario(),
            structure.scenario()
        )));
    }
    let report = behavior.validate(DEFAULT_NS_TOLERANCE);
    if let Some(d) = report.normalization.first() {
        return Err(Error::Constraint(format!(
            "behavior is not normalized at inputs ({}, {}): sum {}",
            d.x, d.y, d.sum
        )));
    }
    if let Some(d) = report.no_signalling.first() {
        return Err(Error::Constraint(format!(
            "behavior signals: {:?} output {} differs across inputs {} and {} by {:e}",
            d.party, d.output, d.input_a, d.input_b, d.difference
        )));
    }
    for cut in &structure.cuts()?.cuts {
        let v = cut.indicator.eval(behavior);
        if v < -options.margin {
            return Ok(MembershipReport {
                lambda_max: v,
                outcome: MembershipOutcome::Excluded {
                    certificate: RejectionCertificate {
                        functional: cut.indicator.clone(),
                        value: v,
                        kind: CertificateKind::OutputProbability {
                            alice: cut.alice,
                            bob: cut.bob,
                        },
                    },
                },
                status: SolverStatus::Optimal,
                iterations: 0,
                gap: 0.0,
            });
        }
    }
    let problem = membership_problem(structure, behavior)?;
    let sol = backend_from_env()?.solve(&problem, &options.solver)?;
    if !sol.reached(1e-6) {
        return Err(Error::Solver(format!(
            "membership solve unreliable: {} after {} iterations, gap {:.2e}",
            sol.status, sol.iterations, sol.gap
        )));
    }
    let lambda_max = -sol.dual_value;
    let outcome = if lambda_max >= -options.margin {
        let mut witness = Mat::zeros(structure.n(), structure.n());
        for (k, &id) in structure.free_ids().iter().enumerate() {
            set_class(&mut witness, structure, id, sol.dual_vector[k]);
        }
        for &id in structure.known_ids() {
            let g = structure.class(id).known.as_ref().expect("known class");
            set_class(&mut witness, structure, id, g.eval(behavior));
        }
        MembershipOutcome::Member { witness }
    } else {
        let z = sol.primal_matrix;
        let mut functional = Affine::default();
        for &id in structure.known_ids() {
            let g = structure.class(id).known.as_ref().expect("known class");
            functional = functional.add_scaled(g, structure.class_sum(&z, id));
        }
        let value = functional.eval(behavior);
        let multipliers = constraint_multipliers(structure, &z);
        MembershipOutcome::Excluded {
            certificate: RejectionCertificate {
                functional,
                value,
                kind: CertificateKind::SpectralDual { matrix: z, multipliers },
            },
        }
    };
    Ok(MembershipReport {
        lambda_max,
        outcome,
        status: sol.status,
        iterations: sol.iterations,
        gap: sol.gap,
    })
}

fn set_class(m: &mut Mat<f64>, structure: &RelaxationStructure, id: usize, v: f64) {
    for &(i, j) in &structure.class(id).positions {
        m[(i as usize, j as usize)] = v;
        m[(j as usize, i as usize)] = v;
    }
}

/// Multipliers of the [`RelaxationStructure::instantiate`] constraints,
/// in the same order, that rebuild a dual matrix: summing
/// `multiplier * (entry form of the constraint)` over all constraints
/// recovers `weight(p) * Z[p]` at every upper position `p`, where the
/// weight doubles off-diagonal positions. Exact when `Z` is orthogonal to
/// the free classes, which is what the membership dual enforces.
pub fn constraint_multipliers(structure: &RelaxationStructure, z: &Mat<f64>) -> Vec<f64> {
    let weight = |i: u32, j: u32| {
        let v = z[(i as usize, j as usize)];
        if i == j {
            v
        } else {
            2.0 * v
        }
    };
    let mut out = Vec::new();
    for class in structure.classes() {
        let zs: Vec<f64> = class.positions.iter().map(|&(i, j)| weight(i, j)).collect();
        // Chain multiplier i covers positions i+1.. with a minus sign; the
        // anchor then absorbs the full class sum.
        let mut suffix = 0.0;
        let mut chain = vec![0.0; zs.len().saturating_sub(1)];
        for i in (0..zs.len().saturating_sub(1)).rev() {
            suffix += zs[i + 1];
            chain[i] = -suffix;
        }
        out.extend(chain);
        if class.known.is_some() {
            out.push(zs.iter().sum());
        }
    }
    for &(i, j) in structure.zero_positions() {
        out.push(weight(i, j));
    }
    out
}

/// Result of maximizing an affine functional over the relaxation.
#[derive(Clone, Debug)]
pub struct BellMaxReport {
    /// The maximum, an upper bound for the functional on every behavior
    /// the relaxation accepts.
    pub value: f64,
    /// Moment matrix attaining the maximum.
    pub optimizer: Mat<f64>,
    pub status: SolverStatus,
    pub iterations: usize,
    pub gap: f64,
}

/// The extremal-value program in solver form, plus the constant term of
/// the expanded functional.
///
/// Every class except the identity is a variable; the moment matrix is
/// `Gamma(x) = E_00 + sum_c x_c A_c`. Output-probability cuts become rows
/// of a diagonal block.
pub fn bell_max_problem(
    structure: &RelaxationStructure,
    objective: &Affine,
) -> Result<(SdpProblem, f64)> {
    let beta = structure.class_expansion(objective)?;
    let cuts = structure.cuts()?.cuts;
    let n = structure.n();
    let ncls = structure.classes().len();
    let mut lp_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); ncls];
    let mut g_lp = vec![0.0; cuts.len()];
    for (row, cut) in cuts.iter().enumerate() {
        for &(cid, w) in &cut.coeffs {
            if cid == 0 {
                g_lp[row] = -w;
            } else {
                lp_rows[cid].push((row as u32, w));
            }
        }
    }
    let constraints: Vec<(BlockMatrix, f64)> = (1..ncls)
        .map(|id| {
            let f = BlockMatrix::new(class_indicator(structure, id), lp_rows[id].clone());
            (f, -beta[id])
        })
        .collect();
    let objective_block = BlockMatrix::new(
        SparseSym::from_upper(n, vec![(0, 0, -1.0)]),
        g_lp.iter()
            .enumerate()
            .map(|(k, &v)| (k as u32, v))
            .collect(),
    );
    Ok((
        SdpProblem {
            sdp_dim: n,
            lp_dim: cuts.len(),
            objective: objective_block,
            constraints,
        },
        beta[0],
    ))
}

/// Maximizes an affine functional of the behavior over the relaxation.
pub fn bell_maximum(
    structure: &RelaxationStructure,
    objective: &Affine,
    options: &SolverOptions,
) -> Result<BellMaxReport> {
    let (problem, beta0) = bell_max_problem(structure, objective)?;
    let sol = backend_from_env()?.solve(&problem, options)?;
    if !sol.reached(1e-6) {
        return Err(Error::Solver(format!(
            "extremal solve unreliable: {} after {} iterations, gap {:.2e}",
            sol.status, sol.iterations, sol.gap
        )));
    }
    Ok(BellMaxReport {
        value: beta0 - sol.dual_value,
        optimizer: sol.slack_matrix,
        status: sol.status,
        iterations: sol.iterations,
        gap: sol.gap,
    })
}
