//! Rank analysis of solved moment matrices and model reconstruction.
//!
//! A solved relaxation whose matrix passes a rank stopping rule certifies
//! that the behavior has a finite-dimensional quantum model. This module
//! detects that rule, factors the matrix into Gram vectors, and rebuilds an
//! explicit state and commuting projective measurements reproducing the
//! behavior, together with the defect norms of every invariant the rebuilt
//! model is supposed to satisfy.

use faer::{Mat, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{reduced_letters, Letter, Level, Word};
use crate::analytic::PSD_TOLERANCE;
use crate::error::{Error, Result};
use crate::moment::RelaxationStructure;
use crate::scenario::{Behavior, Party, Scenario};
use crate::solver::{backend_from_env, membership_problem, SolverOptions};

/// Relative singular-value cutoff under which a direction counts as null.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-6;

/// Relative band around the cutoff in which a singular value makes the rank
/// call unreliable; anything inside it turns the verdict inconclusive.
pub const DEFAULT_INCONCLUSIVE_BAND: (f64, f64) = (1e-8, 1e-4);

/// Per-dimension budget for the invariant defects of a rebuilt model.
pub const MODEL_TOLERANCE_PER_DIM: f64 = 1e-6;

/// Largest accepted gap between rebuilt-model moments and the certificate.
pub const REPRODUCTION_TOLERANCE: f64 = 1e-4;

/// A solved moment matrix tied to the structure it was solved over.
#[derive(Clone, Debug)]
pub struct NumericCertificate<'a> {
    structure: &'a RelaxationStructure,
    matrix: &'a Mat<f64>,
    rank_tolerance: f64,
    inconclusive_band: (f64, f64),
}

/// Verdict of the rank stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankLoopOutcome {
    /// Every input-pair submatrix already carries the full rank; the
    /// behavior has a quantum model of that dimension.
    Loop { rank: usize },
    NoLoop,
    /// Some singular value sits inside the inconclusive band, so the rank
    /// comparison cannot be trusted either way.
    Inconclusive,
}

/// Rank of the stopping-rule submatrix for one input pair.
#[derive(Clone, Debug)]
pub struct PairRank {
    pub alice_input: usize,
    pub bob_input: usize,
    pub rank: usize,
    pub size: usize,
    pub uncertain: bool,
}

#[derive(Clone, Debug)]
pub struct RankLoopReport {
    pub outcome: RankLoopOutcome,
    /// Rank of the reference submatrix every pair is compared against.
    pub reference_rank: usize,
    pub reference_size: usize,
    pub reference_uncertain: bool,
    pub pairs: Vec<PairRank>,
}

/// Factorization of a certificate as a Gram matrix of real vectors.
#[derive(Clone, Debug)]
pub struct GramVectors {
    pub rank: usize,
    /// One row per basis word, `rank` columns.
    pub vectors: Mat<f64>,
    /// Largest entrywise gap between the matrix and the factorization.
    pub max_defect: f64,
    /// A singular value fell inside the inconclusive band.
    pub uncertain: bool,
}

/// Defect norms of a quantum model, one per invariant. All matrix norms are
/// Frobenius norms; a faithful model keeps every field near zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDefects {
    /// max over projectors of `|E^2 - E|`.
    pub idempotence: f64,
    /// max over same-input pairs of `|E E'|`.
    pub orthogonality: f64,
    /// max over inputs of `|sum_a E_a - identity|`.
    pub completeness: f64,
    /// max over cross-party pairs of `|E_a E_b - E_b E_a|`.
    pub commutator: f64,
    /// `||state| - 1|`.
    pub state_norm: f64,
}

impl ModelDefects {
    pub fn max(&self) -> f64 {
        self.idempotence
            .max(self.orthogonality)
            .max(self.completeness)
            .max(self.commutator)
            .max(self.state_norm)
    }
}

/// An explicit finite-dimensional quantum model: a real unit state and one
/// symmetric projector per output, Alice's commuting with Bob's.
#[derive(Clone, Debug)]
pub struct QuantumModel {
    pub scenario: Scenario,
    pub dim: usize,
    pub state: Vec<f64>,
    /// `alice[input][output]`, every output included.
    pub alice: Vec<Vec<Mat<f64>>>,
    pub bob: Vec<Vec<Mat<f64>>>,
}

/// Result of rebuilding a model from a certificate. `accepted` is false
/// when any defect norm exceeds its budget; the model and the norms are
/// still returned so the failure is inspectable.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub model: QuantumModel,
    pub defects: ModelDefects,
    /// Largest gap between rebuilt moments and certificate entries over the
    /// identity, single-projector, and cross-party product words.
    pub reproduction: f64,
    pub accepted: bool,
}

/// Absolute values of the eigenvalues of a symmetric matrix.
fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    Ok((0..m.nrows()).map(|k| s[k].abs()).collect())
}

/// Counts values at or above `cutoff` relative to the largest one and flags
/// any value inside the relative `band`.
fn numeric_rank(values: &[f64], cutoff: f64, band: (f64, f64)) -> (usize, bool) {
    let sigma = values.iter().fold(0.0f64, |m, v| m.max(*v));
    if sigma <= 0.0 {
        return (0, false);
    }
    let rank = values.iter().filter(|v| **v >= cutoff * sigma).count();
    let uncertain = values
        .iter()
        .any(|v| *v > band.0 * sigma && *v < band.1 * sigma);
    (rank, uncertain)
}

/// Index sets feeding the stopping rule: the shared core, the product
/// extras per input pair, and the reference set the pairs are compared to.
struct StoppingSets {
    core: Vec<usize>,
    extras: Vec<Vec<usize>>,
    reference: Vec<usize>,
    inputs_bob: usize,
}

fn stopping_sets(structure: &RelaxationStructure) -> Result<StoppingSets> {
    let scenario = structure.scenario();
    let basis = structure.basis();
    // integer level n compares against the whole matrix, with a core of all
    // words shorter than n; a hybrid level keeps its base words as the core
    // and restricts both sides to the base plus one extra product length
    let (core_len, exact_extra) = match structure.level() {
        Level::Integer(n) if *n >= 2 => (*n as usize - 1, false),
        Level::Integer(_) => {
            return Err(Error::Structure(
                "the rank stopping rule needs cross-party product rows; \
                 a first-order basis has none"
                    .into(),
            ))
        }
        Level::Intermediate { base, .. } => (*base as usize, true),
    };
    let na = scenario.inputs(Party::Alice);
    let nb = scenario.inputs(Party::Bob);
    let mut core = Vec::new();
    let mut extras: Vec<Vec<usize>> = vec![Vec::new(); na * nb];
    let mut reference = Vec::new();
    for (i, w) in basis.words().iter().enumerate() {
        let cross = !w.alice_part().is_empty() && !w.bob_part().is_empty();
        let is_extra = if exact_extra {
            cross && w.len() == core_len + 1
        } else {
            cross
        };
        if w.len() <= core_len {
            core.push(i);
        } else if is_extra {
            let x = w.first_input(Party::Alice, scenario).expect("cross word");
            let y = w.first_input(Party::Bob, scenario).expect("cross word");
            extras[x * nb + y].push(i);
        }
        if !exact_extra || w.len() <= core_len || is_extra {
            reference.push(i);
        }
    }
    for x in 0..na {
        for y in 0..nb {
            if extras[x * nb + y].is_empty() {
                return Err(Error::Structure(format!(
                    "basis has no product row for input pair ({x}, {y})"
                )));
            }
        }
    }
    Ok(StoppingSets {
        core,
        extras,
        reference,
        inputs_bob: nb,
    })
}

impl<'a> NumericCertificate<'a> {
    /// Wraps a solved matrix with default rank tolerances.
    pub fn new(structure: &'a RelaxationStructure, matrix: &'a Mat<f64>) -> Result<Self> {
        if matrix.nrows() != structure.n() || matrix.ncols() != structure.n() {
            return Err(Error::Dimension {
                what: "certificate matrix",
                expected: structure.n(),
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(NumericCertificate {
            structure,
            matrix,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            inconclusive_band: DEFAULT_INCONCLUSIVE_BAND,
        })
    }

    pub fn with_rank_tolerance(mut self, rank_tolerance: f64) -> Self {
        self.rank_tolerance = rank_tolerance;
        self
    }

    pub fn with_inconclusive_band(mut self, band: (f64, f64)) -> Self {
        self.inconclusive_band = band;
        self
    }

    /// Shrinks the inconclusive band, for retrying an inconclusive verdict.
    pub fn tightened(self, factor: f64) -> Self {
        let band = (
            self.inconclusive_band.0 / factor,
            self.inconclusive_band.1 / factor,
        );
        self.with_inconclusive_band(band)
    }

    pub fn structure(&self) -> &RelaxationStructure {
        self.structure
    }

    pub fn matrix(&self) -> &Mat<f64> {
        self.matrix
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    fn rank_of(&self, idx: &[usize]) -> Result<(usize, bool)> {
        let sub = Mat::from_fn(idx.len(), idx.len(), |i, j| {
            self.matrix[(idx[i], idx[j])]
        });
        let values = singular_values(&sub)?;
        Ok(numeric_rank(
            &values,
            self.rank_tolerance,
            self.inconclusive_band,
        ))
    }

    /// Decides the rank stopping rule: the certificate loops when, for
    /// every input pair, the submatrix on the core words plus that pair's
    /// products already has the rank of the reference matrix.
    pub fn detect_rank_loop(&self) -> Result<RankLoopReport> {
        let sets = stopping_sets(self.structure)?;
        let (reference_rank, reference_uncertain) = self.rank_of(&sets.reference)?;
        let mut pairs = Vec::with_capacity(sets.extras.len());
        let mut uncertain = reference_uncertain;
        let mut looped = true;
        for (slot, extra) in sets.extras.iter().enumerate() {
            let mut idx = sets.core.clone();
            idx.extend_from_slice(extra);
            idx.sort_unstable();
            let (rank, pair_uncertain) = self.rank_of(&idx)?;
            uncertain |= pair_uncertain;
            looped &= rank == reference_rank;
            pairs.push(PairRank {
                alice_input: slot / sets.inputs_bob,
                bob_input: slot % sets.inputs_bob,
                rank,
                size: idx.len(),
                uncertain: pair_uncertain,
            });
        }
        let outcome = if uncertain {
            RankLoopOutcome::Inconclusive
        } else if looped {
            RankLoopOutcome::Loop {
                rank: reference_rank,
            }
        } else {
            RankLoopOutcome::NoLoop
        };
        Ok(RankLoopReport {
            outcome,
            reference_rank,
            reference_size: sets.reference.len(),
            reference_uncertain,
            pairs,
        })
    }

    /// Factors the certificate into Gram vectors at this rank tolerance.
    pub fn gram_vectors(&self) -> Result<GramVectors> {
        gram_vectors(self.matrix, self.rank_tolerance, self.inconclusive_band)
    }

    /// Rebuilds an explicit model from a certificate.
    ///
    /// Sound when [`NumericCertificate::detect_rank_loop`] returned a loop;
    /// without one the projectors need not commute, which the returned
    /// defect norms then show. Every invariant violation lands in the
    /// report rather than erroring, so a failed rebuild stays inspectable.
    pub fn reconstruct_model(&self) -> Result<Reconstruction> {
        let structure = self.structure;
        let scenario = structure.scenario();
        let basis = structure.basis();
        let gram = self.gram_vectors()?;
        let dim = gram.rank;
        if dim == 0 {
            return Err(Error::Structure(
                "certificate has numeric rank zero; nothing to rebuild".into(),
            ));
        }
        let identity_row = basis
            .index_of(&Word::identity())
            .ok_or_else(|| Error::Structure("basis lacks the identity word".into()))?;
        let state: Vec<f64> = (0..dim).map(|k| gram.vectors[(identity_row, k)]).collect();
        // columns come out strongest first, so the first carries the
        // certificate's largest eigenvalue: the scale null directions are
        // measured against
        let scale_sq: f64 = (0..basis.len())
            .map(|i| gram.vectors[(i, 0)] * gram.vectors[(i, 0)])
            .sum();

        let mut alice: Vec<Vec<Mat<f64>>> = Vec::new();
        let mut bob: Vec<Vec<Mat<f64>>> = Vec::new();
        for party in [Party::Alice, Party::Bob] {
            let side = if party == Party::Alice {
                &mut alice
            } else {
                &mut bob
            };
            for input in 0..scenario.inputs(party) {
                let mut family = Vec::new();
                let mut sum = Mat::<f64>::zeros(dim, dim);
                for output in 0..scenario.outputs_of(party, input) - 1 {
                    let letter = Letter::new(party, scenario.offset(party, input) + output);
                    let rows = letter_rows(structure, letter);
                    let proj =
                        span_projector(&gram.vectors, &rows, self.rank_tolerance, scale_sq);
                    sum = &sum + &proj;
                    family.push(proj);
                }
                // the dropped output picks up whatever the family leaves over
                let mut residual = Mat::<f64>::identity(dim, dim);
                residual = &residual - &sum;
                family.push(residual);
                side.push(family);
            }
        }
        let model = QuantumModel {
            scenario: scenario.clone(),
            dim,
            state,
            alice,
            bob,
        };
        let defects = model.validate();
        let reproduction = self.reproduction_gap(&model)?;
        let accepted = defects.max() <= MODEL_TOLERANCE_PER_DIM * dim as f64
            && reproduction <= REPRODUCTION_TOLERANCE;
        Ok(Reconstruction {
            model,
            defects,
            reproduction,
            accepted,
        })
    }

    /// Largest gap between the model's moments and the certificate over the
    /// identity, single-letter, and letter-pair words.
    fn reproduction_gap(&self, model: &QuantumModel) -> Result<f64> {
        let structure = self.structure;
        let scenario = structure.scenario();
        let basis = structure.basis();
        let psi = Mat::from_fn(model.dim, 1, |i, _| model.state[i]);
        let moment = |ops: &[&Mat<f64>]| -> f64 {
            let mut v = psi.clone();
            for op in ops.iter().rev() {
                v = *op * &v;
            }
            (0..model.dim).map(|i| psi[(i, 0)] * v[(i, 0)]).sum()
        };
        let index = |letter: Letter| -> Result<usize> {
            basis
                .index_of(&Word::single(letter))
                .ok_or_else(|| Error::Structure("basis lacks a single-letter word".into()))
        };
        let identity_row = basis
            .index_of(&Word::identity())
            .ok_or_else(|| Error::Structure("basis lacks the identity word".into()))?;
        let mut gap: f64 = (moment(&[]) - self.matrix[(identity_row, identity_row)]).abs();
        let letters = reduced_letters(scenario);
        for &a in letters.iter().filter(|l| l.party == Party::Alice) {
            let ia = index(a)?;
            let ea = model.letter_projector(a);
            gap = gap.max((moment(&[ea]) - self.matrix[(identity_row, ia)]).abs());
            for &b in letters.iter().filter(|l| l.party == Party::Bob) {
                let ib = index(b)?;
                let eb = model.letter_projector(b);
                gap = gap.max((moment(&[ea, eb]) - self.matrix[(ia, ib)]).abs());
            }
        }
        for &b in letters.iter().filter(|l| l.party == Party::Bob) {
            let ib = index(b)?;
            let eb = model.letter_projector(b);
            gap = gap.max((moment(&[eb]) - self.matrix[(identity_row, ib)]).abs());
        }
        Ok(gap)
    }
}

/// Rows of the Gram matrix spanning the image of one projector: the words
/// that absorb the letter on the left without leaving the basis.
fn letter_rows(structure: &RelaxationStructure, letter: Letter) -> Vec<usize> {
    let basis = structure.basis();
    let single = Word::single(letter);
    let mut rows: Vec<usize> = basis
        .words()
        .iter()
        .filter_map(|w| {
            single
                .mul(w, structure.scenario())
                .word()
                .and_then(|prod| basis.index_of(&prod))
        })
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Orthogonal projector onto the row span of the selected Gram vectors.
///
/// Directions are kept against `scale_sq`, the squared overall scale of the
/// certificate, never against the submatrix's own largest value: a letter
/// whose vectors all vanish must yield the zero projector instead of a span
/// of eigensolver noise.
fn span_projector(
    vectors: &Mat<f64>,
    rows: &[usize],
    rank_tolerance: f64,
    scale_sq: f64,
) -> Mat<f64> {
    let dim = vectors.ncols();
    if rows.is_empty() {
        return Mat::zeros(dim, dim);
    }
    let m = Mat::from_fn(rows.len(), dim, |i, j| vectors[(rows[i], j)]);
    let mt = m.transpose().to_owned();
    let normal = &mt * &m;
    let Ok(evd) = normal.self_adjoint_eigen(Side::Lower) else {
        return Mat::zeros(dim, dim);
    };
    let s = evd.S();
    let u = evd.U();
    // eigenvalues of the normal matrix are squared singular values
    let keep = rank_tolerance * rank_tolerance * scale_sq.max(f64::MIN_POSITIVE);
    let mut proj = Mat::<f64>::zeros(dim, dim);
    for k in 0..dim {
        if s[k] >= keep {
            for i in 0..dim {
                for j in 0..dim {
                    proj[(i, j)] += u[(i, k)] * u[(j, k)];
                }
            }
        }
    }
    proj
}

/// Factors a symmetric positive semidefinite matrix as a Gram matrix of
/// real vectors, truncating directions below the relative rank tolerance.
/// A negative eigenvalue beyond the positivity slack is an error carrying
/// the eigenvalue.
pub fn gram_vectors(
    matrix: &Mat<f64>,
    rank_tolerance: f64,
    band: (f64, f64),
) -> Result<GramVectors> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Dimension {
            what: "gram factorization input columns",
            expected: n,
            got: matrix.ncols(),
        });
    }
    let evd = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let sigma = (0..n).fold(0.0f64, |acc, k| acc.max(s[k].abs()));
    let mut kept = Vec::new();
    let mut uncertain = false;
    for k in 0..n {
        if s[k] < -PSD_TOLERANCE * sigma.max(1.0) {
            return Err(Error::Constraint(format!(
                "matrix is not positive semidefinite: eigenvalue {:e}",
                s[k]
            )));
        }
        let mag = s[k].abs();
        if mag >= rank_tolerance * sigma {
            kept.push(k);
        }
        if mag > band.0 * sigma && mag < band.1 * sigma {
            uncertain = true;
        }
    }
    // deterministic column order: strongest direction first
    kept.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let rank = kept.len();
    let vectors = Mat::from_fn(n, rank, |i, c| u[(i, kept[c])] * s[kept[c]].max(0.0).sqrt());
    let vt = vectors.transpose().to_owned();
    let rebuilt = &vectors * &vt;
    let mut max_defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            max_defect = max_defect.max((matrix[(i, j)] - rebuilt[(i, j)]).abs());
        }
    }
    Ok(GramVectors {
        rank,
        vectors,
        max_defect,
        uncertain,
    })
}

/// Searches for a low-rank certificate of membership by minimizing the
/// trace of the moment matrix over all matrices compatible with the
/// behavior. A heuristic: small trace favors but does not guarantee small
/// rank, so callers should re-run the stopping rule on the result.
pub fn minimum_trace_certificate(
    structure: &RelaxationStructure,
    behavior: &Behavior,
    options: &SolverOptions,
) -> Result<Mat<f64>> {
    let mut problem = membership_problem(structure, behavior)?;
    // drop the slack-bound variable; keep one trace cost per free class
    problem.constraints.pop();
    let free = structure.free_ids();
    debug_assert_eq!(problem.constraints.len(), free.len());
    for (slot, &id) in problem.constraints.iter_mut().zip(free) {
        slot.1 = structure
            .class(id)
            .positions
            .iter()
            .filter(|(i, j)| i == j)
            .count() as f64;
    }
    let sol = backend_from_env()?.solve(&problem, options)?;
    if !sol.reached(1e-6) {
        return Err(Error::Solver(format!(
            "trace minimization unreliable: {} after {} iterations, gap {:.2e}",
            sol.status, sol.iterations, sol.gap
        )));
    }
    Ok(sol.slack_matrix)
}

fn frob(m: &Mat<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            sum += m[(i, j)] * m[(i, j)];
        }
    }
    sum.sqrt()
}

fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

impl QuantumModel {
    /// The projector of one output, outputs indexed globally per party.
    pub fn projector(&self, party: Party, output: usize) -> &Mat<f64> {
        let (input, local) = self.scenario.input_of(party, output);
        match party {
            Party::Alice => &self.alice[input][local],
            Party::Bob => &self.bob[input][local],
        }
    }

    fn letter_projector(&self, letter: Letter) -> &Mat<f64> {
        self.projector(letter.party, letter.output)
    }

    /// Defect norms of every model invariant.
    pub fn validate(&self) -> ModelDefects {
        let mut idempotence = 0.0f64;
        let mut orthogonality = 0.0f64;
        let mut completeness = 0.0f64;
        let mut commutator = 0.0f64;
        for (party, families) in [(Party::Alice, &self.alice), (Party::Bob, &self.bob)] {
            debug_assert_eq!(families.len(), self.scenario.inputs(party));
            for family in families.iter() {
                let mut sum = Mat::<f64>::zeros(self.dim, self.dim);
                for (o, e) in family.iter().enumerate() {
                    let ee = e * e;
                    idempotence = idempotence.max(frob(&(&ee - e)));
                    sum = &sum + e;
                    for other in family.iter().skip(o + 1) {
                        orthogonality = orthogonality.max(frob(&(e * other)));
                    }
                }
                let eye = Mat::<f64>::identity(self.dim, self.dim);
                completeness = completeness.max(frob(&(&sum - &eye)));
            }
        }
        for fa in &self.alice {
            for ea in fa {
                for fb in &self.bob {
                    for eb in fb {
                        let ab = ea * eb;
                        let ba = eb * ea;
                        commutator = commutator.max(frob(&(&ab - &ba)));
                    }
                }
            }
        }
        let norm: f64 = self.state.iter().map(|v| v * v).sum::<f64>().sqrt();
        ModelDefects {
            idempotence,
            orthogonality,
            completeness,
            commutator,
            state_norm: (norm - 1.0).abs(),
        }
    }

    /// The behavior of the model under the Born rule. Unvalidated: defects
    /// of an imperfect model surface as tiny signalling or normalization
    /// residues in the result.
    pub fn behavior(&self) -> Behavior {
        let na = self.scenario.total_outputs(Party::Alice);
        let nb = self.scenario.total_outputs(Party::Bob);
        let psi = Mat::from_fn(self.dim, 1, |i, _| self.state[i]);
        let mut joint = vec![0.0; na * nb];
        for a in 0..na {
            let ea = self.projector(Party::Alice, a);
            for b in 0..nb {
                let eb = self.projector(Party::Bob, b);
                let v = ea * &(eb * &psi);
                joint[a * nb + b] = (0..self.dim).map(|i| psi[(i, 0)] * v[(i, 0)]).sum();
            }
        }
        Behavior::new_unchecked(self.scenario.clone(), joint)
    }

    /// The exact moment matrix of the model over a basis, the reference
    /// point for every numeric certificate of the same behavior.
    pub fn moment_matrix(&self, structure: &RelaxationStructure) -> Result<Mat<f64>> {
        if structure.scenario() != &self.scenario {
            return Err(Error::Scenario(format!(
                "model scenario {} does not match structure scenario {}",
                self.scenario,
                structure.scenario()
            )));
        }
        let psi = Mat::from_fn(self.dim, 1, |i, _| self.state[i]);
        let n = structure.n();
        let mut applied = Vec::with_capacity(n);
        for w in structure.basis().words() {
            let mut v = psi.clone();
            for letter in w.letters().iter().rev() {
                v = self.letter_projector(*letter) * &v;
            }
            applied.push(v);
        }
        Ok(Mat::from_fn(n, n, |i, j| {
            (0..self.dim)
                .map(|k| applied[i][(k, 0)] * applied[j][(k, 0)])
                .sum()
        }))
    }

    /// A random model with a tensor-product split: Alice's projectors act
    /// on a `dim_alice`-dimensional factor, Bob's on a `dim_bob` one, so
    /// the commutation invariant holds exactly. Outputs partition a random
    /// orthogonal basis of the party's factor, and some outputs may receive
    /// an empty block when the factor is smaller than the output count.
    pub fn random<R: Rng>(
        scenario: &Scenario,
        dim_alice: usize,
        dim_bob: usize,
        rng: &mut R,
    ) -> QuantumModel {
        assert!(dim_alice > 0 && dim_bob > 0, "factors must be nonempty");
        let dim = dim_alice * dim_bob;
        let mut families = |party: Party, local: usize, other: usize| -> Vec<Vec<Mat<f64>>> {
            let mut out = Vec::new();
            for input in 0..scenario.inputs(party) {
                let outputs = scenario.outputs_of(party, input);
                let g = Mat::from_fn(local, local, |_, _| rng.random_range(-1.0..1.0));
                let q = g.qr().compute_thin_Q();
                // split the columns of a random orthogonal basis
                let mut counts = vec![0usize; outputs];
                let mut left = local;
                for slot in counts.iter_mut().take(outputs - 1) {
                    *slot = rng.random_range(0..=left);
                    left -= *slot;
                }
                counts[outputs - 1] = left;
                let mut start = 0;
                let mut family = Vec::new();
                for &c in &counts {
                    let mut p = Mat::<f64>::zeros(local, local);
                    for k in start..start + c {
                        for i in 0..local {
                            for j in 0..local {
                                p[(i, j)] += q[(i, k)] * q[(j, k)];
                            }
                        }
                    }
                    start += c;
                    let eye = Mat::<f64>::identity(other, other);
                    family.push(if party == Party::Alice {
                        kron(&p, &eye)
                    } else {
                        kron(&eye, &p)
                    });
                }
                out.push(family);
            }
            out
        };
        let alice = families(Party::Alice, dim_alice, dim_bob);
        let bob = families(Party::Bob, dim_bob, dim_alice);
        let mut state: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = state.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut state {
            *v /= norm.max(1e-12);
        }
        QuantumModel {
            scenario: scenario.clone(),
            dim,
            state,
            alice,
            bob,
        }
    }

    /// Serializes the model with a manifest of its verified defect norms.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            scenario: self.scenario.clone(),
            dim: self.dim,
            state: self.state.clone(),
            alice: self.alice.iter().map(|f| f.iter().map(mat_rows).collect()).collect(),
            bob: self.bob.iter().map(|f| f.iter().map(mat_rows).collect()).collect(),
            defects: self.validate(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<QuantumModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported model format {:?}, expected {:?}",
                file.format, MODEL_FORMAT
            )));
        }
        if file.state.len() != file.dim {
            return Err(Error::Dimension {
                what: "model state length",
                expected: file.dim,
                got: file.state.len(),
            });
        }
        let unpack = |party: Party, side: &[Vec<Vec<Vec<f64>>>]| -> Result<Vec<Vec<Mat<f64>>>> {
            if side.len() != file.scenario.inputs(party) {
                return Err(Error::Dimension {
                    what: "model input count",
                    expected: file.scenario.inputs(party),
                    got: side.len(),
                });
            }
            let mut out = Vec::new();
            for (input, family) in side.iter().enumerate() {
                if family.len() != file.scenario.outputs_of(party, input) {
                    return Err(Error::Dimension {
                        what: "model output count",
                        expected: file.scenario.outputs_of(party, input),
                        got: family.len(),
                    });
                }
                let mut mats = Vec::new();
                for rows in family {
                    mats.push(rows_mat(rows, file.dim)?);
                }
                out.push(mats);
            }
            Ok(out)
        };
        Ok(QuantumModel {
            alice: unpack(Party::Alice, &file.alice)?,
            bob: unpack(Party::Bob, &file.bob)?,
            scenario: file.scenario,
            dim: file.dim,
            state: file.state,
        })
    }
}

const MODEL_FORMAT: &str = "quantum-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    scenario: Scenario,
    dim: usize,
    state: Vec<f64>,
    alice: Vec<Vec<Vec<Vec<f64>>>>,
    bob: Vec<Vec<Vec<Vec<f64>>>>,
    defects: ModelDefects,
}

fn mat_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_mat(rows: &[Vec<f64>], dim: usize) -> Result<Mat<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension {
            what: "projector rows",
            expected: dim,
            got: rows.len(),
        });
    }
    Ok(Mat::from_fn(dim, dim, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::DEFAULT_NS_TOLERANCE;
    use crate::solver::ipm::min_eigenvalue;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn structure(scenario: &Scenario, level: &str) -> RelaxationStructure {
        let level: Level = level.parse().unwrap();
        RelaxationStructure::build(scenario, &level).unwrap()
    }

    /// The two-qubit model meeting the largest cross-correlator sum: shared
    /// maximally entangled state, conjugate measurement bases on one side.
    fn optimal_binary_model() -> QuantumModel {
        let scenario = Scenario::chsh();
        let half = 0.5f64;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = |m: [[f64; 2]; 2]| Mat::from_fn(2, 2, |i, j| m[i][j]);
        // projectors onto the +1 eigenspaces of z, x, (z+x)/sqrt2, (z-x)/sqrt2
        let az = plus([[1.0, 0.0], [0.0, 0.0]]);
        let ax = plus([[half, half], [half, half]]);
        let bp = plus([[half * (1.0 + s), half * s], [half * s, half * (1.0 - s)]]);
        let bm = plus([[half * (1.0 + s), -half * s], [-half * s, half * (1.0 - s)]]);
        let eye = Mat::<f64>::identity(2, 2);
        let family = |p: &Mat<f64>, alice: bool| -> Vec<Mat<f64>> {
            let full = if alice { kron(p, &eye) } else { kron(&eye, p) };
            let rest = &Mat::<f64>::identity(4, 4) - &full;
            vec![full, rest]
        };
        let mut state = vec![0.0; 4];
        state[0] = s;
        state[3] = s;
        QuantumModel {
            scenario,
            dim: 4,
            state,
            alice: vec![family(&az, true), family(&ax, true)],
            bob: vec![family(&bp, false), family(&bm, false)],
        }
    }

    #[test]
    fn the_optimal_binary_model_is_exact() {
        let model = optimal_binary_model();
        let defects = model.validate();
        assert!(defects.max() < 1e-12, "defects {defects:?}");
        let b = model.behavior();
        assert!(Behavior::new(b.scenario().clone(),
            (0..4).flat_map(|a| (0..4).map(move |b2| (a, b2)))
                .map(|(a, b2)| b.p(a, b2)).collect(), DEFAULT_NS_TOLERANCE).is_ok());
        let c = crate::scenario::CorrelatorData::from_behavior(&b).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in c.joints.iter().zip([s, s, s, -s]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn the_optimal_certificate_loops_at_rank_four() {
        let model = optimal_binary_model();
        let st = structure(&model.scenario, "1+AB");
        let gamma = model.moment_matrix(&st).unwrap();
        assert_eq!(gamma.nrows(), 9);
        let cert = NumericCertificate::new(&st, &gamma).unwrap();
        let report = cert.detect_rank_loop().unwrap();
        assert_eq!(report.outcome, RankLoopOutcome::Loop { rank: 4 });
        for pair in &report.pairs {
            assert_eq!(pair.size, 6);
            assert!(!pair.uncertain);
        }
        let gram = cert.gram_vectors().unwrap();
        assert_eq!(gram.rank, 4);
        assert!(gram.max_defect < 1e-10);
    }

    #[test]
    fn reconstruction_reproduces_the_optimal_behavior() {
        let model = optimal_binary_model();
        let st = structure(&model.scenario, "1+AB");
        let gamma = model.moment_matrix(&st).unwrap();
        let cert = NumericCertificate::new(&st, &gamma).unwrap();
        let rebuilt = cert.reconstruct_model().unwrap();
        assert!(rebuilt.accepted, "defects {:?}", rebuilt.defects);
        assert_eq!(rebuilt.model.dim, 4);
        assert!(rebuilt.reproduction < 1e-9);
        let original = model.behavior();
        let copy = rebuilt.model.behavior();
        for a in 0..4 {
            for b in 0..4 {
                assert!(
                    (original.p(a, b) - copy.p(a, b)).abs() < 1e-9,
                    "probability ({a}, {b})"
                );
            }
        }
    }

    #[test]
    fn a_deterministic_model_loops_trivially() {
        let scenario = Scenario::chsh();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = QuantumModel::random(&scenario, 1, 1, &mut rng);
        let st = structure(&scenario, "2");
        let gamma = model.moment_matrix(&st).unwrap();
        let cert = NumericCertificate::new(&st, &gamma).unwrap();
        let report = cert.detect_rank_loop().unwrap();
        assert_eq!(report.outcome, RankLoopOutcome::Loop { rank: 1 });
        let rebuilt = cert.reconstruct_model().unwrap();
        assert!(rebuilt.accepted);
        assert_eq!(rebuilt.model.dim, 1);
        for family in rebuilt.model.alice.iter().chain(&rebuilt.model.bob) {
            for p in family {
                let v = p[(0, 0)];
                assert!(v.abs() < 1e-9 || (v - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn first_order_bases_cannot_run_the_stopping_rule() {
        let scenario = Scenario::chsh();
        let st = structure(&scenario, "1");
        let gamma = Mat::<f64>::identity(st.n(), st.n());
        let cert = NumericCertificate::new(&st, &gamma).unwrap();
        assert!(matches!(
            cert.detect_rank_loop(),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn gram_factorization_handles_the_plain_cases() {
        let id = Mat::<f64>::identity(5, 5);
        let g = gram_vectors(&id, 1e-6, DEFAULT_INCONCLUSIVE_BAND).unwrap();
        assert_eq!(g.rank, 5);
        assert!(g.max_defect < 1e-12);

        // rank one: every vector is a multiple of the first
        let v: Vec<f64> = vec![1.0, -0.5, 2.0, 0.25];
        let outer = Mat::from_fn(4, 4, |i, j| v[i] * v[j]);
        let g = gram_vectors(&outer, 1e-6, DEFAULT_INCONCLUSIVE_BAND).unwrap();
        assert_eq!(g.rank, 1);
        for i in 0..4 {
            assert!((g.vectors[(i, 0)] * v[0] - g.vectors[(0, 0)] * v[i]).abs() < 1e-10);
        }

        let mut neg = Mat::<f64>::identity(3, 3);
        neg[(2, 2)] = -1.0;
        let err = gram_vectors(&neg, 1e-6, DEFAULT_INCONCLUSIVE_BAND).unwrap_err();
        assert!(matches!(err, Error::Constraint(_)), "{err}");
    }

    #[test]
    fn ranks_grow_with_the_basis() {
        let scenario = Scenario::chsh();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let model = QuantumModel::random(&scenario, 2, 2, &mut rng);
            let mut previous = 0;
            for level in ["1", "1+AB", "2"] {
                let st = structure(&scenario, level);
                let gamma = model.moment_matrix(&st).unwrap();
                let values = singular_values(&gamma).unwrap();
                let (rank, _) = numeric_rank(&values, 1e-6, DEFAULT_INCONCLUSIVE_BAND);
                assert!(rank >= previous, "rank dropped at {level}");
                assert!(rank <= model.dim);
                previous = rank;
            }
        }
    }

    #[test]
    fn random_models_round_trip_through_their_certificates() {
        // seeds chosen so the exact certificates pass the stopping rule,
        // two of them at full rank four; random models are free not to
        // loop at a fixed order, so non-looping draws would test nothing
        let scenario = Scenario::chsh();
        let mut loops = 0;
        for seed in [2u64, 6, 8, 13, 23] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = QuantumModel::random(&scenario, 2, 2, &mut rng);
            let st = structure(&scenario, "2");
            let gamma = model.moment_matrix(&st).unwrap();
            let cert = NumericCertificate::new(&st, &gamma).unwrap();
            let report = cert.detect_rank_loop().unwrap();
            let RankLoopOutcome::Loop { rank } = report.outcome else {
                continue;
            };
            loops += 1;
            assert!(rank <= 4);
            let rebuilt = cert.reconstruct_model().unwrap();
            assert!(
                rebuilt.accepted,
                "seed {seed}: defects {:?} reproduction {}",
                rebuilt.defects, rebuilt.reproduction
            );
            let original = model.behavior();
            let copy = rebuilt.model.behavior();
            for a in 0..4 {
                for b in 0..4 {
                    assert!(
                        (original.p(a, b) - copy.p(a, b)).abs() < 1e-6,
                        "seed {seed} probability ({a}, {b})"
                    );
                }
            }
        }
        assert!(loops >= 4, "only {loops} of 5 seeds produced a rank loop");
    }

    /// A model whose behavior is uniform: state `|00>`, every projector
    /// `|+><+|` on its own factor.
    fn uniform_model() -> QuantumModel {
        let scenario = Scenario::chsh();
        let plus = Mat::from_fn(2, 2, |_, _| 0.5f64);
        let eye = Mat::<f64>::identity(2, 2);
        let family = |alice: bool| -> Vec<Mat<f64>> {
            let full = if alice { kron(&plus, &eye) } else { kron(&eye, &plus) };
            let rest = &Mat::<f64>::identity(4, 4) - &full;
            vec![full, rest]
        };
        let mut state = vec![0.0; 4];
        state[0] = 1.0;
        QuantumModel {
            scenario,
            dim: 4,
            state,
            alice: vec![family(true), family(true)],
            bob: vec![family(false), family(false)],
        }
    }

    #[test]
    fn trace_minimization_finds_a_feasible_low_trace_matrix() {
        // mix the boundary behavior toward uniform so the feasible set has
        // an interior the solver can converge in
        let sharp = optimal_binary_model();
        let flat = uniform_model();
        let (bs, bf) = (sharp.behavior(), flat.behavior());
        let behavior = Behavior::new(
            bs.scenario().clone(),
            (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .map(|(a, b)| 0.9 * bs.p(a, b) + 0.1 * bf.p(a, b))
                .collect(),
            DEFAULT_NS_TOLERANCE,
        )
        .unwrap();
        let st = structure(&Scenario::chsh(), "1+AB");
        let gamma = minimum_trace_certificate(&st, &behavior, &SolverOptions::default()).unwrap();
        assert!(st.constraint_violation(&gamma, &behavior).unwrap() < 1e-6);
        assert!(min_eigenvalue(&gamma).unwrap() > -1e-7);
        // the matching mixture of the exact moment matrices is feasible, so
        // the minimizer cannot sit above its trace
        let mix_a = sharp.moment_matrix(&st).unwrap();
        let mix_b = flat.moment_matrix(&st).unwrap();
        let trace = |m: &Mat<f64>| (0..m.nrows()).map(|k| m[(k, k)]).sum::<f64>();
        let bound = 0.9 * trace(&mix_a) + 0.1 * trace(&mix_b);
        assert!(trace(&gamma) <= bound + 1e-4);
    }

    #[test]
    fn models_survive_the_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let scenario = Scenario::square(2, 3).unwrap();
        let model = QuantumModel::random(&scenario, 3, 2, &mut rng);
        let text = model.to_json().unwrap();
        let back = QuantumModel::from_json(&text).unwrap();
        assert_eq!(back.dim, model.dim);
        let a = model.behavior();
        let b = back.behavior();
        for x in 0..6 {
            for y in 0..6 {
                assert!((a.p(x, y) - b.p(x, y)).abs() < 1e-12);
            }
        }
        assert!(QuantumModel::from_json("{\"format\":\"nope\"}").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_models_satisfy_every_structure_constraint(
            seed in 0u64..1000,
            d_alice in 1usize..3,
            d_bob in 1usize..3,
            square in 2usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scenario = Scenario::square(2, square).unwrap();
            let model = QuantumModel::random(&scenario, d_alice, d_bob, &mut rng);
            prop_assert!(model.validate().max() < 1e-10);
            let behavior = model.behavior();
            let joint: Vec<f64> = (0..scenario.total_outputs(Party::Alice))
                .flat_map(|a| {
                    (0..scenario.total_outputs(Party::Bob)).map(move |b| (a, b))
                })
                .map(|(a, b)| behavior.p(a, b))
                .collect();
            prop_assert!(Behavior::new(scenario.clone(), joint, 1e-9).is_ok());
            let st = structure(&scenario, "1+AB");
            let gamma = model.moment_matrix(&st).unwrap();
            prop_assert!((gamma[(0, 0)] - 1.0).abs() < 1e-12);
            prop_assert!(st.constraint_violation(&gamma, &behavior).unwrap() < 1e-9);
            prop_assert!(min_eigenvalue(&gamma).unwrap() > -1e-10);
        }
    }
}
