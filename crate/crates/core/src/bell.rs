//! Catalog of Bell functionals with construction-verified local bounds.
//!
//! Each inequality is loaded from an embedded data file (format
//! `bell-inequality/1`) holding per-input coefficient lists, a constant,
//! and the local bound. Construction converts the lists to an [`Affine`]
//! functional over global output ids and then verifies the stated local
//! bound exhaustively over every deterministic behavior of the scenario,
//! so a transcription slip in a data file cannot load quietly.
//!
//! The file format, documented by example:
//!
//! ```json
//! {
//!   "format": "bell-inequality/1",
//!   "name": "chsh",
//!   "scenario": {"alice": [2, 2], "bob": [2, 2]},
//!   "constant": 0.0,
//!   "alice": [[0, 0, -1.0]],
//!   "bob": [],
//!   "joint": [[0, 0, 1, 1, 1.0]],
//!   "local_bound": 2.0,
//!   "reference_quantum": 2.8284271247461903,
//!   "note": "free-text provenance and normalization remarks"
//! }
//! ```
//!
//! `alice` rows are `[input, output, coefficient]` on `P(output | input)`,
//! `bob` likewise, and `joint` rows are `[x, a, y, b, coefficient]` on
//! `P(a, b | x, y)`, all with per-input output indices.

use crate::error::{Error, Result};
use crate::moment::RelaxationStructure;
use crate::scenario::{deterministic_behaviors, Affine, Behavior, Party, Scenario};
use crate::solver::SparseSym;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InequalityFile {
    format: String,
    name: String,
    scenario: Scenario,
    constant: f64,
    alice: Vec<(usize, usize, f64)>,
    bob: Vec<(usize, usize, f64)>,
    joint: Vec<(usize, usize, usize, usize, f64)>,
    local_bound: f64,
    reference_quantum: Option<f64>,
    note: Option<String>,
}

/// An affine functional of behaviors together with its exact maximum over
/// local deterministic strategies.
#[derive(Clone, Debug)]
pub struct BellInequality {
    name: String,
    scenario: Scenario,
    functional: Affine,
    local_bound: f64,
    reference_quantum: Option<f64>,
    note: String,
}

const FORMAT: &str = "bell-inequality/1";

/// Tolerance for the construction-time local-bound audit. Coefficients are
/// small rationals, so deterministic evaluations are exact to roundoff.
const BOUND_TOLERANCE: f64 = 1e-9;

impl BellInequality {
    /// Parses a data file and audits its local bound exhaustively.
    pub fn from_json(text: &str) -> Result<BellInequality> {
        let file: InequalityFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::Parse(format!(
                "inequality format {:?} is not {FORMAT:?}",
                file.format
            )));
        }
        let scenario = file.scenario;
        let check = |party: Party, x: usize, a: usize| -> Result<()> {
            if x >= scenario.inputs(party) || a >= scenario.outputs_of(party, x) {
                return Err(Error::Parse(format!(
                    "{party:?} term ({x}, {a}) outside scenario {scenario}"
                )));
            }
            Ok(())
        };
        let mut functional = Affine {
            constant: file.constant,
            ..Affine::default()
        };
        for &(x, a, c) in &file.alice {
            check(Party::Alice, x, a)?;
            functional.alice.push((scenario.offset(Party::Alice, x) + a, c));
        }
        for &(y, b, c) in &file.bob {
            check(Party::Bob, y, b)?;
            functional.bob.push((scenario.offset(Party::Bob, y) + b, c));
        }
        for &(x, a, y, b, c) in &file.joint {
            check(Party::Alice, x, a)?;
            check(Party::Bob, y, b)?;
            functional.joint.push((
                scenario.offset(Party::Alice, x) + a,
                scenario.offset(Party::Bob, y) + b,
                c,
            ));
        }
        functional.validate(&scenario)?;
        let ineq = BellInequality {
            name: file.name,
            scenario,
            functional,
            local_bound: file.local_bound,
            reference_quantum: file.reference_quantum,
            note: file.note.unwrap_or_default(),
        };
        let audited = ineq.local_maximum();
        if (audited - ineq.local_bound).abs() > BOUND_TOLERANCE {
            return Err(Error::Constraint(format!(
                "inequality {:?} states local bound {} but deterministic \
                 enumeration gives {}",
                ineq.name, ineq.local_bound, audited
            )));
        }
        Ok(ineq)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// The functional over global output ids, marginal terms kept separate
    /// from joint terms.
    pub fn functional(&self) -> &Affine {
        &self.functional
    }

    pub fn local_bound(&self) -> f64 {
        self.local_bound
    }

    /// A known quantum value for context, when the catalog records one.
    pub fn reference_quantum(&self) -> Option<f64> {
        self.reference_quantum
    }

    pub fn note(&self) -> &str {
        &self.note
    }

    /// Evaluates the functional on a behavior of the same scenario.
    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::Scenario(format!(
                "behavior scenario {} does not match inequality scenario {}",
                behavior.scenario(),
                self.scenario
            )));
        }
        Ok(self.functional.eval(behavior))
    }

    /// Exact maximum over all local deterministic behaviors, by exhaustive
    /// enumeration. Equals `local_bound` for every constructed inequality.
    pub fn local_maximum(&self) -> f64 {
        deterministic_behaviors(&self.scenario)
            .map(|b| self.functional.eval(&b))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The symmetric matrix `beta` with `tr(beta Gamma) = I(P)` for every
    /// moment matrix `Gamma` whose known entries are instantiated from `P`.
    ///
    /// The functional's weight on each moment class is spread uniformly
    /// over the class's entries, off-diagonal entries counting twice for
    /// their mirror, so the trace pairing reproduces the class value.
    pub fn objective_matrix(&self, structure: &RelaxationStructure) -> Result<SparseSym> {
        if structure.scenario() != &self.scenario {
            return Err(Error::Scenario(format!(
                "relaxation scenario {} does not match inequality scenario {}",
                structure.scenario(),
                self.scenario
            )));
        }
        let beta = structure.class_expansion(&self.functional)?;
        let mut entries = Vec::new();
        for (id, &w) in beta.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let positions = &structure.class(id).positions;
            let total: f64 = positions
                .iter()
                .map(|&(i, j)| if i == j { 1.0 } else { 2.0 })
                .sum();
            for &(i, j) in positions {
                entries.push((i, j, w / total));
            }
        }
        Ok(SparseSym::from_upper(structure.n(), entries))
    }
}

macro_rules! embedded {
    ($name:literal) => {
        include_str!(concat!("../data/", $name, ".json"))
    };
}

/// The two-input two-output correlator inequality, local bound 2.
pub fn chsh() -> BellInequality {
    BellInequality::from_json(embedded!("chsh")).expect("embedded chsh data is audited")
}

/// The d-outcome family on two inputs per party, local bound 2. Supported
/// for `2 <= d <= 8`; `d = 2` coincides with [`chsh`].
pub fn cglmp(d: usize) -> Result<BellInequality> {
    let text = match d {
        2 => embedded!("cglmp_d2"),
        3 => embedded!("cglmp_d3"),
        4 => embedded!("cglmp_d4"),
        5 => embedded!("cglmp_d5"),
        6 => embedded!("cglmp_d6"),
        7 => embedded!("cglmp_d7"),
        8 => embedded!("cglmp_d8"),
        _ => {
            return Err(Error::Scenario(format!(
                "no catalog entry for {d} outcomes; supported range is 2..=8"
            )))
        }
    };
    Ok(BellInequality::from_json(text).expect("embedded cglmp data is audited"))
}

/// The hybrid-scenario inequality (Alice one 2-outcome and one 3-outcome
/// input, Bob three 2-outcome inputs), local bound 0.
pub fn i_s() -> BellInequality {
    BellInequality::from_json(embedded!("i_s")).expect("embedded i_s data is audited")
}

/// The three-input two-outcome inequality with marginal terms, local
/// bound 0.
pub fn i3322() -> BellInequality {
    BellInequality::from_json(embedded!("i3322")).expect("embedded i3322 data is audited")
}

/// Every catalog inequality: chsh, cglmp for d = 2..8, i_s, i3322.
pub fn catalog() -> Vec<BellInequality> {
    let mut out = vec![chsh()];
    for d in 2..=8 {
        out.push(cglmp(d).expect("in supported range"));
    }
    out.push(i_s());
    out.push(i3322());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Level;
    use crate::scenario::pr_box;
    use faer::Mat;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalog_loads_with_audited_bounds() {
        let all = catalog();
        let names: Vec<&str> = all.iter().map(|q| q.name()).collect();
        assert_eq!(
            names,
            [
                "chsh", "cglmp_d2", "cglmp_d3", "cglmp_d4", "cglmp_d5", "cglmp_d6",
                "cglmp_d7", "cglmp_d8", "i_s", "i3322"
            ]
        );
        for q in &all {
            assert!((q.local_maximum() - q.local_bound()).abs() < 1e-9, "{}", q.name());
            if let Some(v) = q.reference_quantum() {
                assert!(v > q.local_bound(), "{}", q.name());
            }
        }
    }

    #[test]
    fn chsh_reaches_four_on_the_pr_box() {
        let q = chsh();
        assert!((q.evaluate(&pr_box()).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cglmp_two_is_the_chsh_functional() {
        // Equality as functionals on behaviors, checked on a spanning set
        // of the no-signalling polytope: all deterministic points plus
        // correlator boxes with extremal joints.
        let a = chsh();
        let b = cglmp(2).unwrap();
        let scenario = Scenario::chsh();
        for bits in 0..16usize {
            let det = Behavior::deterministic(
                scenario.clone(),
                &[bits & 1, (bits >> 1) & 1],
                &[(bits >> 2) & 1, (bits >> 3) & 1],
            );
            assert!((a.evaluate(&det).unwrap() - b.evaluate(&det).unwrap()).abs() < 1e-12);
        }
        assert!((b.evaluate(&pr_box()).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_outcome_counts_are_rejected() {
        assert!(cglmp(1).is_err());
        assert!(cglmp(9).is_err());
    }

    #[test]
    fn i3322_is_negative_on_uniform_noise() {
        let q = i3322();
        let v = q.evaluate(&Behavior::uniform(q.scenario().clone())).unwrap();
        assert!((v - -1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn scenario_mismatch_is_an_error() {
        let q = i3322();
        assert!(q.evaluate(&pr_box()).is_err());
        let s = RelaxationStructure::build(&Scenario::chsh(), &Level::Integer(1)).unwrap();
        assert!(q.objective_matrix(&s).is_err());
    }

    #[test]
    fn malformed_files_are_rejected() {
        // Wrong version string.
        let bad = r#"{"format": "bell-inequality/0", "name": "x",
            "scenario": {"alice": [2,2], "bob": [2,2]}, "constant": 0.0,
            "alice": [], "bob": [], "joint": [], "local_bound": 0.0,
            "reference_quantum": null, "note": null}"#;
        assert!(BellInequality::from_json(bad).is_err());
        // Output index outside its input's range.
        let bad = r#"{"format": "bell-inequality/1", "name": "x",
            "scenario": {"alice": [2,2], "bob": [2,2]}, "constant": 0.0,
            "alice": [[0, 2, 1.0]], "bob": [], "joint": [], "local_bound": 1.0,
            "reference_quantum": null, "note": null}"#;
        assert!(BellInequality::from_json(bad).is_err());
        // Stated local bound disagrees with enumeration.
        let bad = r#"{"format": "bell-inequality/1", "name": "x",
            "scenario": {"alice": [2,2], "bob": [2,2]}, "constant": 0.0,
            "alice": [[0, 0, 1.0]], "bob": [], "joint": [], "local_bound": 0.5,
            "reference_quantum": null, "note": null}"#;
        assert!(BellInequality::from_json(bad).is_err());
    }

    /// A random local behavior: a mixture of deterministic points.
    fn random_local(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Behavior {
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        let mut joint = vec![0.0; na * nb];
        let mut weight_left: f64 = 1.0;
        for k in 0..6 {
            let w = if k == 5 || weight_left <= 0.0 {
                weight_left.max(0.0)
            } else {
                rng.random_range(0.0..weight_left)
            };
            weight_left -= w;
            let alice: Vec<usize> = (0..scenario.inputs(Party::Alice))
                .map(|x| rng.random_range(0..scenario.outputs_of(Party::Alice, x)))
                .collect();
            let bob: Vec<usize> = (0..scenario.inputs(Party::Bob))
                .map(|y| rng.random_range(0..scenario.outputs_of(Party::Bob, y)))
                .collect();
            let det = Behavior::deterministic(scenario.clone(), &alice, &bob);
            for a in 0..na {
                for b in 0..nb {
                    joint[a * nb + b] += w * det.p(a, b);
                }
            }
        }
        Behavior::new_unchecked(scenario.clone(), joint)
    }

    #[test]
    fn objective_matrix_matches_evaluate_on_instantiated_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cases: Vec<(BellInequality, Level)> = vec![
            (chsh(), "1".parse().unwrap()),
            (chsh(), "2".parse().unwrap()),
            (cglmp(3).unwrap(), "1+AB".parse().unwrap()),
            (i_s(), "1+AB+AA'B".parse().unwrap()),
            (i3322(), "1+AB".parse().unwrap()),
        ];
        for (ineq, level) in &cases {
            let s = RelaxationStructure::build(ineq.scenario(), level).unwrap();
            let beta = ineq.objective_matrix(&s).unwrap();
            for _ in 0..20 {
                let behavior = random_local(ineq.scenario(), &mut rng);
                // Any completion with the right known entries must pair to
                // the evaluation, whatever the free classes hold.
                let mut gamma = Mat::<f64>::zeros(s.n(), s.n());
                for id in 0..s.classes().len() {
                    let class = s.class(id);
                    let v = match &class.known {
                        Some(g) => g.eval(&behavior),
                        None => rng.random_range(-1.0..1.0),
                    };
                    for &(i, j) in &class.positions {
                        gamma[(i as usize, j as usize)] = v;
                        gamma[(j as usize, i as usize)] = v;
                    }
                }
                let paired = beta.inner(&gamma);
                let direct = ineq.evaluate(&behavior).unwrap();
                assert!(
                    (paired - direct).abs() < 1e-9,
                    "{} at {level}: {paired} vs {direct}",
                    ineq.name()
                );
            }
        }
    }
}
