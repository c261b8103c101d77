//! Symbolic structure of moment matrices.
//!
//! For a word basis `u_1, .., u_n` the moment matrix of a state assigns
//! entry `(i, j)` the moment of `canon(adjoint(u_i) u_j)`. Entries whose
//! word annihilates are pinned to zero; the remaining entries partition
//! into classes carrying a single real value each, because transposition
//! maps an entry word to its adjoint and moments of real symmetric matrices
//! identify a word with its adjoint.
//!
//! Classes split into known classes, whose value is an affine function of
//! the behavior (identity, single projectors, and one projector per party),
//! and free classes, which become variables of the semidefinite programs.

use crate::algebra::{Level, Product, Word, WordSet};
use crate::error::{Error, Result};
use crate::scenario::{Affine, Behavior, Party, Scenario};
use std::collections::HashMap;

/// What one moment-matrix entry holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entry {
    /// The entry word annihilates; the entry is identically zero.
    Zero,
    /// Index into [`RelaxationStructure::classes`].
    Class(u32),
}

/// One value class of entries: all positions whose word lies in the same
/// adjoint orbit.
#[derive(Clone, Debug)]
pub struct MomentClass {
    /// Orbit representative: the smaller of the entry word and its adjoint.
    pub word: Word,
    /// Upper-triangle positions `(i, j)` with `i <= j`, in row-major order.
    /// The mirrored positions hold the same value.
    pub positions: Vec<(u32, u32)>,
    /// For known classes, the moment as a function of the behavior.
    pub known: Option<Affine>,
}

/// An equality constraint a numeric moment matrix must satisfy.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentConstraint {
    /// Two entries agree.
    EntryEqual { a: (usize, usize), b: (usize, usize) },
    /// An entry equals a value computed from the behavior.
    EntryValue { pos: (usize, usize), value: f64 },
    /// An entry is pinned to zero.
    EntryZero { pos: (usize, usize) },
}

/// One output-probability nonnegativity constraint, written over classes.
#[derive(Clone, Debug)]
pub struct Cut {
    /// `(input, output)` labels, full output range.
    pub alice: (usize, usize),
    pub bob: (usize, usize),
    /// Sparse class weights; the identity class carries the constant.
    pub coeffs: Vec<(usize, f64)>,
    /// The probability the cut bounds, as a functional on behaviors.
    pub indicator: Affine,
}

/// The cuts that strengthen a level, or the reason none are needed.
#[derive(Clone, Debug)]
pub struct CutReport {
    pub cuts: Vec<Cut>,
    /// Set when the level needs no cuts.
    pub note: Option<String>,
}

/// The symbolic moment matrix of a scenario at a level.
#[derive(Clone, Debug)]
pub struct RelaxationStructure {
    scenario: Scenario,
    level: Level,
    basis: WordSet,
    /// Row-major `n x n`.
    entries: Vec<Entry>,
    classes: Vec<MomentClass>,
    class_index: HashMap<Word, u32>,
    /// Zero-pinned positions, `i <= j`, row-major.
    zeros: Vec<(u32, u32)>,
    known_ids: Vec<usize>,
    free_ids: Vec<usize>,
}

impl RelaxationStructure {
    pub fn build(scenario: &Scenario, level: &Level) -> Result<RelaxationStructure> {
        let basis = level.generate(scenario);
        let n = basis.len();
        let mut entries = vec![Entry::Zero; n * n];
        let mut classes: Vec<MomentClass> = Vec::new();
        let mut class_index: HashMap<Word, u32> = HashMap::new();
        let mut zeros = Vec::new();
        for i in 0..n {
            for j in i..n {
                match basis.word(i).adjoint_mul(basis.word(j), scenario) {
                    Product::Zero => zeros.push((i as u32, j as u32)),
                    Product::Word(w) => {
                        let key = w.adjoint_orbit_key();
                        let id = *class_index.entry(key.clone()).or_insert_with(|| {
                            classes.push(MomentClass {
                                word: key,
                                positions: Vec::new(),
                                known: None,
                            });
                            (classes.len() - 1) as u32
                        });
                        classes[id as usize].positions.push((i as u32, j as u32));
                        entries[i * n + j] = Entry::Class(id);
                        entries[j * n + i] = Entry::Class(id);
                    }
                }
            }
        }
        debug_assert!(classes[0].word.is_identity(), "identity is found first");
        let mut known_ids = Vec::new();
        let mut free_ids = Vec::new();
        for (id, class) in classes.iter_mut().enumerate() {
            class.known = known_functional(scenario, &class.word);
            if class.known.is_some() {
                known_ids.push(id);
            } else {
                free_ids.push(id);
            }
        }
        Ok(RelaxationStructure {
            scenario: scenario.clone(),
            level: level.clone(),
            basis,
            entries,
            classes,
            class_index,
            zeros,
            known_ids,
            free_ids,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn level(&self) -> &Level {
        &self.level
    }

    pub fn basis(&self) -> &WordSet {
        &self.basis
    }

    /// Side length of the moment matrix.
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Entry {
        self.entries[i * self.n() + j]
    }

    pub fn classes(&self) -> &[MomentClass] {
        &self.classes
    }

    pub fn class(&self, id: usize) -> &MomentClass {
        &self.classes[id]
    }

    /// Class of a canonical word, if it appears in the matrix.
    pub fn class_of_word(&self, w: &Word) -> Option<usize> {
        self.class_index
            .get(&w.adjoint_orbit_key())
            .map(|&id| id as usize)
    }

    pub fn known_ids(&self) -> &[usize] {
        &self.known_ids
    }

    pub fn free_ids(&self) -> &[usize] {
        &self.free_ids
    }

    pub fn zero_positions(&self) -> &[(u32, u32)] {
        &self.zeros
    }

    /// Count of distinct entry words: each class contributes its
    /// representative and, unless self-adjoint, the adjoint as well.
    pub fn distinct_moment_words(&self) -> usize {
        self.classes
            .iter()
            .map(|c| if c.word.is_self_adjoint() { 1 } else { 2 })
            .sum()
    }

    /// Sum of a matrix over all positions of a class, mirrors included.
    /// For an indicator matrix of the class this is its inner product.
    pub fn class_sum(&self, m: &faer::Mat<f64>, id: usize) -> f64 {
        let mut sum = 0.0;
        for &(i, j) in &self.classes[id].positions {
            sum += m[(i as usize, j as usize)];
            if i != j {
                sum += m[(j as usize, i as usize)];
            }
        }
        sum
    }

    /// Expands a behavior functional into per-class weights: evaluating the
    /// functional on any behavior equals the weighted sum of the behavior's
    /// moment-class values. Probabilities of last outputs are rewritten
    /// through normalization and no-signalling.
    pub fn class_expansion(&self, f: &Affine) -> Result<Vec<f64>> {
        f.validate(&self.scenario)?;
        let mut out = vec![0.0; self.classes.len()];
        out[0] += f.constant;
        for &(a, w) in &f.alice {
            self.expand_single(Party::Alice, a, w, &mut out)?;
        }
        for &(b, w) in &f.bob {
            self.expand_single(Party::Bob, b, w, &mut out)?;
        }
        for &(a, b, w) in &f.joint {
            self.expand_joint(a, b, w, &mut out)?;
        }
        Ok(out)
    }

    fn single_class(&self, party: Party, id: usize) -> Result<usize> {
        let w = Word::single(crate::algebra::Letter::new(party, id));
        self.class_of_word(&w).ok_or_else(|| {
            Error::Structure(format!(
                "single-projector moment {} missing from the matrix",
                w.display(&self.scenario)
            ))
        })
    }

    fn pair_class(&self, a: usize, b: usize) -> Result<usize> {
        let w = Word::product(
            &[
                crate::algebra::Letter::new(Party::Alice, a),
                crate::algebra::Letter::new(Party::Bob, b),
            ],
            &self.scenario,
        )
        .word()
        .expect("cross-party pairs never annihilate");
        self.class_of_word(&w).ok_or_else(|| {
            Error::Structure(format!(
                "pair moment {} missing from the matrix",
                w.display(&self.scenario)
            ))
        })
    }

    fn expand_single(&self, party: Party, id: usize, w: f64, out: &mut [f64]) -> Result<()> {
        if self.scenario.is_reduced(party, id) {
            out[self.single_class(party, id)?] += w;
        } else {
            // Last output of its input: one minus the reduced ones.
            let (x, _) = self.scenario.input_of(party, id);
            out[0] += w;
            for r in self.scenario.reduced_of_input(party, x) {
                out[self.single_class(party, r)?] -= w;
            }
        }
        Ok(())
    }

    fn expand_joint(&self, a: usize, b: usize, w: f64, out: &mut [f64]) -> Result<()> {
        let s = &self.scenario;
        let ra = s.is_reduced(Party::Alice, a);
        let rb = s.is_reduced(Party::Bob, b);
        match (ra, rb) {
            (true, true) => out[self.pair_class(a, b)?] += w,
            (false, true) => {
                let (x, _) = s.input_of(Party::Alice, a);
                out[self.single_class(Party::Bob, b)?] += w;
                for ar in s.reduced_of_input(Party::Alice, x) {
                    out[self.pair_class(ar, b)?] -= w;
                }
            }
            (true, false) => {
                let (y, _) = s.input_of(Party::Bob, b);
                out[self.single_class(Party::Alice, a)?] += w;
                for br in s.reduced_of_input(Party::Bob, y) {
                    out[self.pair_class(a, br)?] -= w;
                }
            }
            (false, false) => {
                let (x, _) = s.input_of(Party::Alice, a);
                let (y, _) = s.input_of(Party::Bob, b);
                out[0] += w;
                for ar in s.reduced_of_input(Party::Alice, x) {
                    out[self.single_class(Party::Alice, ar)?] -= w;
                }
                for br in s.reduced_of_input(Party::Bob, y) {
                    out[self.single_class(Party::Bob, br)?] -= w;
                }
                for ar in s.reduced_of_input(Party::Alice, x) {
                    for br in s.reduced_of_input(Party::Bob, y) {
                        out[self.pair_class(ar, br)?] += w;
                    }
                }
            }
        }
        Ok(())
    }

    /// Output-probability cuts for this level. Levels whose basis contains
    /// every cross-party pair word need none: for such bases, positive
    /// semidefiniteness already forces every output probability, including
    /// the reconstructed last-output ones, to be nonnegative.
    pub fn cuts(&self) -> Result<CutReport> {
        let s = &self.scenario;
        let mut pairs_present = true;
        'outer: for a in s.reduced_outputs(Party::Alice) {
            for b in s.reduced_outputs(Party::Bob) {
                let w = Word::product(
                    &[
                        crate::algebra::Letter::new(Party::Alice, a),
                        crate::algebra::Letter::new(Party::Bob, b),
                    ],
                    s,
                )
                .word()
                .expect("cross-party pairs never annihilate");
                if !self.basis.contains(&w) {
                    pairs_present = false;
                    break 'outer;
                }
            }
        }
        if pairs_present {
            return Ok(CutReport {
                cuts: Vec::new(),
                note: Some(
                    "no cuts added: the basis contains every cross-party pair, so positive \
                     semidefiniteness already implies nonnegative output probabilities"
                        .into(),
                ),
            });
        }
        let mut cuts = Vec::new();
        for x in 0..s.inputs(Party::Alice) {
            for ka in 0..s.outputs_of(Party::Alice, x) {
                let a = s.output_id(Party::Alice, x, ka);
                for y in 0..s.inputs(Party::Bob) {
                    for kb in 0..s.outputs_of(Party::Bob, y) {
                        let b = s.output_id(Party::Bob, y, kb);
                        let indicator = Affine::joint_term(a, b);
                        let dense = self.class_expansion(&indicator)?;
                        let coeffs = dense
                            .into_iter()
                            .enumerate()
                            .filter(|&(_, v)| v != 0.0)
                            .collect();
                        cuts.push(Cut {
                            alice: (x, ka),
                            bob: (y, kb),
                            coeffs,
                            indicator,
                        });
                    }
                }
            }
        }
        Ok(CutReport { cuts, note: None })
    }

    /// The full constraint list pinning a moment matrix to a behavior:
    /// per class in class order, equalities chaining its positions followed
    /// by the value anchor when the class is known, then the zero pins in
    /// row-major order.
    pub fn instantiate(&self, behavior: &Behavior) -> Result<Vec<MomentConstraint>> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::Scenario(format!(
                "behavior scenario {} does not match structure scenario {}",
                behavior.scenario(),
                self.scenario
            )));
        }
        let mut out = Vec::new();
        for class in &self.classes {
            for w in class.positions.windows(2) {
                out.push(MomentConstraint::EntryEqual {
                    a: (w[0].0 as usize, w[0].1 as usize),
                    b: (w[1].0 as usize, w[1].1 as usize),
                });
            }
            if let Some(g) = &class.known {
                let p = class.positions[0];
                out.push(MomentConstraint::EntryValue {
                    pos: (p.0 as usize, p.1 as usize),
                    value: g.eval(behavior),
                });
            }
        }
        for &(i, j) in &self.zeros {
            out.push(MomentConstraint::EntryZero {
                pos: (i as usize, j as usize),
            });
        }
        Ok(out)
    }

    /// Largest absolute violation of [`RelaxationStructure::instantiate`]
    /// by a numeric matrix.
    pub fn constraint_violation(&self, m: &faer::Mat<f64>, behavior: &Behavior) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in self.instantiate(behavior)? {
            let v = match c {
                MomentConstraint::EntryEqual { a, b } => m[a] - m[b],
                MomentConstraint::EntryValue { pos, value } => m[pos] - value,
                MomentConstraint::EntryZero { pos } => m[pos],
            };
            worst = worst.max(v.abs());
        }
        Ok(worst)
    }
}

/// The moment of words made of at most one projector per party is fixed by
/// the behavior; longer words are free.
fn known_functional(scenario: &Scenario, w: &Word) -> Option<Affine> {
    let a = w.alice_part();
    let b = w.bob_part();
    match (a.len(), b.len()) {
        (0, 0) => Some(Affine::constant(1.0)),
        (1, 0) => Some(Affine::alice_term(a[0].output)),
        (0, 1) => Some(Affine::bob_term(b[0].output)),
        (1, 1) => Some(Affine::joint_term(a[0].output, b[0].output)),
        _ => None,
    }
    .map(|f| {
        debug_assert!(f.validate(scenario).is_ok());
        f
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{deterministic_behaviors, pr_box};
    use proptest::prelude::*;

    fn structure(scenario: &Scenario, level: &str) -> RelaxationStructure {
        RelaxationStructure::build(scenario, &level.parse().unwrap()).unwrap()
    }

    #[test]
    fn chsh_first_level_structure() {
        let s = Scenario::chsh();
        let r = structure(&s, "1");
        assert_eq!(r.n(), 5);
        // Identity, four singles, four cross pairs are known; the two
        // ordered same-party products are free.
        assert_eq!(r.known_ids().len(), 9);
        assert_eq!(r.free_ids().len(), 2);
        assert!(r.zero_positions().is_empty());
        assert_eq!(r.instantiate(&Behavior::uniform(s.clone())).unwrap().len(), 13);
        // Each single-projector class sits at both (0, i) and (i, i).
        let single = r.entry(1, 1);
        assert_eq!(single, r.entry(0, 1));
        match single {
            Entry::Class(id) => assert_eq!(r.class(id as usize).positions.len(), 2),
            Entry::Zero => panic!("diagonal entry cannot be zero"),
        }
    }

    #[test]
    fn same_input_entries_are_pinned_zero() {
        let s = Scenario::square(2, 3).unwrap();
        let r = structure(&s, "1");
        assert_eq!(r.n(), 9);
        // Two reduced outputs per input: one annihilating pair per input.
        assert_eq!(r.zero_positions().len(), 4);
        for &(i, j) in r.zero_positions() {
            assert_eq!(r.entry(i as usize, j as usize), Entry::Zero);
            assert_ne!(i, j);
        }
    }

    #[test]
    fn high_dimension_class_counts() {
        let s = Scenario::square(2, 8).unwrap();
        let r = structure(&s, "1+AB");
        assert_eq!(r.n(), 225);
        assert_eq!(r.known_ids().len(), 225);
        assert_eq!(r.free_ids().len(), 6272);
        assert_eq!(r.distinct_moment_words(), 12769);
        // Known classes are exactly the self-adjoint entry words here.
        for &id in r.known_ids() {
            assert!(r.class(id).word.is_self_adjoint());
        }
        for &id in r.free_ids() {
            assert!(!r.class(id).word.is_self_adjoint());
        }
    }

    #[test]
    fn known_values_on_uniform_noise() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        let r = structure(&s, "1+AB");
        let u = Behavior::uniform(s.clone());
        for &id in r.known_ids() {
            let g = r.class(id).known.as_ref().unwrap();
            let w = &r.class(id).word;
            let expected = match (w.alice_part().len(), w.bob_part().len()) {
                (0, 0) => 1.0,
                (1, 0) => {
                    let (x, _) = s.input_of(Party::Alice, w.alice_part()[0].output);
                    1.0 / s.outputs_of(Party::Alice, x) as f64
                }
                (0, 1) => {
                    let (y, _) = s.input_of(Party::Bob, w.bob_part()[0].output);
                    1.0 / s.outputs_of(Party::Bob, y) as f64
                }
                (1, 1) => {
                    let (x, _) = s.input_of(Party::Alice, w.alice_part()[0].output);
                    let (y, _) = s.input_of(Party::Bob, w.bob_part()[0].output);
                    1.0 / (s.outputs_of(Party::Alice, x) * s.outputs_of(Party::Bob, y)) as f64
                }
                _ => unreachable!(),
            };
            assert!((g.eval(&u) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_of_full_input_pair_sums_to_one() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        let r = structure(&s, "1");
        for x in 0..s.inputs(Party::Alice) {
            for y in 0..s.inputs(Party::Bob) {
                let mut f = Affine::default();
                for ka in 0..s.outputs_of(Party::Alice, x) {
                    for kb in 0..s.outputs_of(Party::Bob, y) {
                        f.joint.push((
                            s.output_id(Party::Alice, x, ka),
                            s.output_id(Party::Bob, y, kb),
                            1.0,
                        ));
                    }
                }
                let dense = r.class_expansion(&f).unwrap();
                assert!((dense[0] - 1.0).abs() < 1e-12);
                for v in &dense[1..] {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn expansion_matches_eval_on_behaviors() {
        let s = Scenario::chsh();
        let r = structure(&s, "1");
        // A functional touching all term kinds, last outputs included.
        let f = Affine {
            constant: 0.25,
            joint: vec![(1, 3, 2.0), (0, 0, -1.0), (3, 1, 0.5)],
            alice: vec![(1, 1.5), (2, -0.5)],
            bob: vec![(3, 1.0)],
        };
        let dense = r.class_expansion(&f).unwrap();
        for b in [pr_box(), Behavior::uniform(s.clone())] {
            let direct = f.eval(&b);
            let via_classes: f64 = r
                .known_ids()
                .iter()
                .map(|&id| dense[id] * r.class(id).known.as_ref().unwrap().eval(&b))
                .sum();
            let free_weight: f64 = r.free_ids().iter().map(|&id| dense[id].abs()).sum();
            assert!(free_weight < 1e-12, "expansion must stay on known classes");
            assert!((direct - via_classes).abs() < 1e-12);
        }
    }

    #[test]
    fn first_level_cuts() {
        let s = Scenario::chsh();
        let r = structure(&s, "1");
        let report = r.cuts().unwrap();
        assert!(report.note.is_none());
        assert_eq!(report.cuts.len(), 16);
        let u = Behavior::uniform(s.clone());
        let pr = pr_box();
        for cut in &report.cuts {
            let dense_eval: f64 = cut
                .coeffs
                .iter()
                .map(|&(id, w)| w * r.class(id).known.as_ref().unwrap().eval(&pr))
                .sum();
            assert!((dense_eval - cut.indicator.eval(&pr)).abs() < 1e-12);
            assert!((cut.indicator.eval(&u) - 0.25).abs() < 1e-12);
        }
        // The anti-correlated input pair of the box zeroes equal outputs.
        let same = report
            .cuts
            .iter()
            .find(|c| c.alice == (1, 0) && c.bob == (1, 0))
            .unwrap();
        assert!(same.indicator.eval(&pr).abs() < 1e-12);
    }

    #[test]
    fn pair_complete_levels_need_no_cuts() {
        let s = Scenario::chsh();
        for level in ["1+AB", "2"] {
            let report = structure(&s, level).cuts().unwrap();
            assert!(report.cuts.is_empty());
            assert!(report.note.is_some());
        }
    }

    #[test]
    fn deterministic_point_satisfies_all_constraints() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        let r = structure(&s, "1+AB+AA'B");
        for b in deterministic_behaviors(&s) {
            let gamma = deterministic_moment_matrix(&r, &b);
            assert_eq!(r.constraint_violation(&gamma, &b).unwrap(), 0.0);
        }
    }

    /// For a deterministic behavior the moment of a word is 1 exactly when
    /// every letter projects onto the selected output, so the moment matrix
    /// is the rank-one 0/1 outer product of the basis-word values. This
    /// rebuilds it independently of the class machinery.
    fn deterministic_moment_matrix(
        r: &RelaxationStructure,
        b: &Behavior,
    ) -> faer::Mat<f64> {
        let selects = |w: &Word| -> f64 {
            let ok = w.letters().iter().all(|l| match l.party {
                Party::Alice => b.alice_marginal(l.output) > 0.5,
                Party::Bob => b.bob_marginal(l.output) > 0.5,
            });
            if ok {
                1.0
            } else {
                0.0
            }
        };
        let v: Vec<f64> = r.basis().iter().map(selects).collect();
        faer::Mat::from_fn(r.n(), r.n(), |i, j| v[i] * v[j])
    }

    proptest! {
        #[test]
        fn entry_words_respect_classes(
            (alice, bob, level) in (
                proptest::collection::vec(2usize..4, 1..3),
                proptest::collection::vec(2usize..4, 1..3),
                prop_oneof![Just("1"), Just("1+AB"), Just("2")],
            )
        ) {
            let s = Scenario::new(alice, bob).unwrap();
            let r = structure(&s, level);
            let n = r.n();
            for i in 0..n {
                for j in 0..n {
                    match r.basis().word(i).adjoint_mul(r.basis().word(j), &s) {
                        Product::Zero => prop_assert_eq!(r.entry(i, j), Entry::Zero),
                        Product::Word(w) => {
                            let id = match r.entry(i, j) {
                                Entry::Class(id) => id as usize,
                                Entry::Zero => return Err(TestCaseError::fail("zero for live word")),
                            };
                            prop_assert_eq!(&r.class(id).word, &w.adjoint_orbit_key());
                            prop_assert_eq!(r.class_of_word(&w), Some(id));
                        }
                    }
                }
            }
        }
    }
}
