//! Moment-matrix relaxations for quantum correlations.
//!
//! The crate builds a hierarchy of semidefinite tests deciding whether a
//! bipartite behavior admits a quantum model, computes extremal values of
//! Bell functionals over those relaxations, and extracts explicit quantum
//! models from converged relaxations.
//!
//! Module layout:
//! - [`scenario`]: input/output structure, behaviors, correlators.
//! - [`algebra`]: projector words, canonicalization, level sets.
//! - [`moment`]: symbolic moment-matrix structure over a level set.
//! - [`solver`]: interior-point semidefinite solver and problem builders.
//! - [`bell`]: Bell functional catalog and evaluation.
//! - [`analytic`]: closed-form membership test for two-input binary
//!   correlators at the first level.
//! - [`extract`]: rank loop detection and model reconstruction.

pub mod algebra;
pub mod analytic;
pub mod bell;
pub mod error;
pub mod extract;
pub mod moment;
pub mod scenario;
pub mod solver;

pub use algebra::{Level, Letter, Product, Word, WordSet};
pub use analytic::{
    correlator_only_condition, pairwise_completion_exists, q1_membership, schur_psd,
    ArcsinReport, ArcsinVerdict,
};
pub use bell::BellInequality;
pub use error::{Error, Result};
pub use extract::{
    gram_vectors, minimum_trace_certificate, GramVectors, ModelDefects, NumericCertificate,
    QuantumModel, RankLoopOutcome, RankLoopReport, Reconstruction,
};
pub use moment::RelaxationStructure;
pub use scenario::{Affine, Behavior, CorrelatorData, Party, Scenario};
pub use solver::{
    bell_maximum, membership, BellMaxReport, CertificateKind, MembershipOptions,
    MembershipOutcome, MembershipReport, RejectionCertificate, SdpProblem, SdpSolution,
    SolverOptions, SolverStatus,
};
