//! Measurement scenarios and behaviors.
//!
//! A [`Scenario`] fixes the number of inputs per party and the number of
//! outputs per input. A [`Behavior`] is a full joint probability table over
//! that scenario, validated for normalization and no-signalling at
//! construction. [`CorrelatorData`] covers the two-input two-output case in
//! its correlator parameterization.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default tolerance for the normalization and no-signalling checks.
pub const DEFAULT_NS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Party::Alice => 'A',
            Party::Bob => 'B',
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRaw {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl TryFrom<ScenarioRaw> for Scenario {
    type Error = Error;
    fn try_from(raw: ScenarioRaw) -> Result<Scenario> {
        Scenario::new(raw.alice, raw.bob)
    }
}

/// Numbers of outputs per input for each party.
///
/// Outputs carry global per-party indices: input `x` with `d_x` outputs
/// occupies the contiguous id range `offset(x) .. offset(x) + d_x`, in input
/// order. The "reduced" outputs of an input are all but its last one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRaw")]
pub struct Scenario {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl Scenario {
    pub fn new(alice: Vec<usize>, bob: Vec<usize>) -> Result<Scenario> {
        for (name, outputs) in [("alice", &alice), ("bob", &bob)] {
            if outputs.is_empty() {
                return Err(Error::Scenario(format!("{name} has no inputs")));
            }
            for (x, &d) in outputs.iter().enumerate() {
                if d < 2 {
                    return Err(Error::Scenario(format!(
                        "{name} input {x} has {d} outputs; every input needs at least 2"
                    )));
                }
            }
            if outputs.iter().sum::<usize>() > 4096 {
                return Err(Error::Scenario(format!("{name} output space too large")));
            }
        }
        Ok(Scenario { alice, bob })
    }

    /// Scenario with `inputs` inputs of `d` outputs each, per party.
    pub fn square(inputs: usize, d: usize) -> Result<Scenario> {
        Scenario::new(vec![d; inputs], vec![d; inputs])
    }

    /// The two-input two-output scenario.
    pub fn chsh() -> Scenario {
        Scenario::square(2, 2).expect("valid")
    }

    pub fn outputs(&self, party: Party) -> &[usize] {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn inputs(&self, party: Party) -> usize {
        self.outputs(party).len()
    }

    pub fn outputs_of(&self, party: Party, input: usize) -> usize {
        self.outputs(party)[input]
    }

    pub fn total_outputs(&self, party: Party) -> usize {
        self.outputs(party).iter().sum()
    }

    /// Global id of output 0 of `input`.
    pub fn offset(&self, party: Party, input: usize) -> usize {
        self.outputs(party)[..input].iter().sum()
    }

    pub fn output_id(&self, party: Party, input: usize, output: usize) -> usize {
        debug_assert!(output < self.outputs_of(party, input));
        self.offset(party, input) + output
    }

    /// Maps a global output id back to `(input, output-within-input)`.
    pub fn input_of(&self, party: Party, id: usize) -> (usize, usize) {
        let mut rest = id;
        for (x, &d) in self.outputs(party).iter().enumerate() {
            if rest < d {
                return (x, rest);
            }
            rest -= d;
        }
        panic!("output id {id} out of range");
    }

    /// True unless `id` is the last output of its input.
    pub fn is_reduced(&self, party: Party, id: usize) -> bool {
        let (x, k) = self.input_of(party, id);
        k + 1 < self.outputs_of(party, x)
    }

    /// Global ids of the reduced outputs, in id order.
    pub fn reduced_outputs(&self, party: Party) -> Vec<usize> {
        (0..self.total_outputs(party))
            .filter(|&id| self.is_reduced(party, id))
            .collect()
    }

    pub fn reduced_count(&self, party: Party) -> usize {
        self.total_outputs(party) - self.inputs(party)
    }

    /// Global ids of the reduced outputs of one input.
    pub fn reduced_of_input(&self, party: Party, input: usize) -> Vec<usize> {
        let off = self.offset(party, input);
        (off..off + self.outputs_of(party, input) - 1).collect()
    }

    pub fn last_output(&self, party: Party, input: usize) -> usize {
        self.offset(party, input) + self.outputs_of(party, input) - 1
    }

    pub fn is_two_input_binary(&self) -> bool {
        self.alice == [2, 2] && self.bob == [2, 2]
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |v: &[usize]| {
            v.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "A[{}] x B[{}]", list(&self.alice), list(&self.bob))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorFile {
    scenario: Scenario,
    /// One row per Alice output (global id order), one column per Bob output.
    joint: Vec<Vec<f64>>,
}

/// A joint probability table `P(a, b)` over all output pairs of a scenario.
///
/// Construction checks normalization per input pair and no-signalling within
/// a tolerance. Entries are not constrained to be nonnegative; tables with
/// negative entries are representable so that membership tests can reject
/// them rather than the parser.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    /// Row-major, `total_outputs(Alice) x total_outputs(Bob)`.
    joint: Vec<f64>,
}

impl Behavior {
    pub fn new(scenario: Scenario, joint: Vec<f64>, tol: f64) -> Result<Behavior> {
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        if joint.len() != na * nb {
            return Err(Error::Dimension {
                what: "behavior table",
                expected: na * nb,
                got: joint.len(),
            });
        }
        let b = Behavior { scenario, joint };
        let report = b.validate(tol);
        if !report.passed() {
            return Err(Error::Constraint(report.first_failure()));
        }
        Ok(b)
    }

    /// Skips the constraint checks. Table dimensions must match.
    pub fn new_unchecked(scenario: Scenario, joint: Vec<f64>) -> Behavior {
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        assert_eq!(joint.len(), na * nb, "behavior table dimensions");
        Behavior { scenario, joint }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// `P(a, b)` by global output ids.
    pub fn p(&self, a: usize, b: usize) -> f64 {
        let nb = self.scenario.total_outputs(Party::Bob);
        self.joint[a * nb + b]
    }

    /// `P(a)` via Bob's input 0 (well-defined by no-signalling).
    pub fn alice_marginal(&self, a: usize) -> f64 {
        (0..self.scenario.outputs_of(Party::Bob, 0))
            .map(|k| self.p(a, k))
            .sum()
    }

    /// `P(b)` via Alice's input 0.
    pub fn bob_marginal(&self, b: usize) -> f64 {
        (0..self.scenario.outputs_of(Party::Alice, 0))
            .map(|k| self.p(k, b))
            .sum()
    }

    /// Uniform noise: `P(a, b) = 1 / (d_X d_Y)` for `a` in `X`, `b` in `Y`.
    pub fn uniform(scenario: Scenario) -> Behavior {
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        let mut joint = vec![0.0; na * nb];
        for a in 0..na {
            let (x, _) = scenario.input_of(Party::Alice, a);
            for b in 0..nb {
                let (y, _) = scenario.input_of(Party::Bob, b);
                let dx = scenario.outputs_of(Party::Alice, x) as f64;
                let dy = scenario.outputs_of(Party::Bob, y) as f64;
                joint[a * nb + b] = 1.0 / (dx * dy);
            }
        }
        Behavior {
            scenario,
            joint,
        }
    }

    /// Deterministic behavior: per input, the assigned output occurs with
    /// probability one. `alice[x]` and `bob[y]` are within-input indices.
    pub fn deterministic(scenario: Scenario, alice: &[usize], bob: &[usize]) -> Behavior {
        assert_eq!(alice.len(), scenario.inputs(Party::Alice));
        assert_eq!(bob.len(), scenario.inputs(Party::Bob));
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        let mut joint = vec![0.0; na * nb];
        for a in 0..na {
            let (x, i) = scenario.input_of(Party::Alice, a);
            if i != alice[x] {
                continue;
            }
            for b in 0..nb {
                let (y, j) = scenario.input_of(Party::Bob, b);
                if j == bob[y] {
                    joint[a * nb + b] = 1.0;
                }
            }
        }
        Behavior {
            scenario,
            joint,
        }
    }

    /// Checks normalization, no-signalling, and entry range. Range defects
    /// are informational; the other two families decide `passed`.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let mut report = ValidationReport {
            normalization: Vec::new(),
            no_signalling: Vec::new(),
            range: Vec::new(),
            tolerance: tol,
        };
        for x in 0..s.inputs(Party::Alice) {
            for y in 0..s.inputs(Party::Bob) {
                let mut sum = 0.0;
                for a in s.offset(Party::Alice, x)..=s.last_output(Party::Alice, x) {
                    for b in s.offset(Party::Bob, y)..=s.last_output(Party::Bob, y) {
                        sum += self.p(a, b);
                    }
                }
                if (sum - 1.0).abs() > tol {
                    report.normalization.push(NormalizationDefect { x, y, sum });
                }
            }
        }
        // Marginal of each Alice output must not depend on Bob's input.
        for a in 0..s.total_outputs(Party::Alice) {
            for y in 1..s.inputs(Party::Bob) {
                let m0: f64 = (s.offset(Party::Bob, 0)..=s.last_output(Party::Bob, 0))
                    .map(|b| self.p(a, b))
                    .sum();
                let my: f64 = (s.offset(Party::Bob, y)..=s.last_output(Party::Bob, y))
                    .map(|b| self.p(a, b))
                    .sum();
                if (m0 - my).abs() > tol {
                    report.no_signalling.push(SignallingDefect {
                        party: Party::Alice,
                        output: a,
                        input_a: 0,
                        input_b: y,
                        difference: m0 - my,
                    });
                }
            }
        }
        for b in 0..s.total_outputs(Party::Bob) {
            for x in 1..s.inputs(Party::Alice) {
                let m0: f64 = (s.offset(Party::Alice, 0)..=s.last_output(Party::Alice, 0))
                    .map(|a| self.p(a, b))
                    .sum();
                let mx: f64 = (s.offset(Party::Alice, x)..=s.last_output(Party::Alice, x))
                    .map(|a| self.p(a, b))
                    .sum();
                if (m0 - mx).abs() > tol {
                    report.no_signalling.push(SignallingDefect {
                        party: Party::Bob,
                        output: b,
                        input_a: 0,
                        input_b: x,
                        difference: m0 - mx,
                    });
                }
            }
        }
        for (i, &v) in self.joint.iter().enumerate() {
            if !(-tol..=1.0 + tol).contains(&v) {
                let nb = s.total_outputs(Party::Bob);
                report.range.push(RangeNote {
                    a: i / nb,
                    b: i % nb,
                    value: v,
                });
            }
        }
        report
    }

    pub fn from_json(text: &str, tol: f64) -> Result<Behavior> {
        let file: BehaviorFile = serde_json::from_str(text)?;
        let na = file.scenario.total_outputs(Party::Alice);
        let nb = file.scenario.total_outputs(Party::Bob);
        if file.joint.len() != na {
            return Err(Error::Dimension {
                what: "behavior rows",
                expected: na,
                got: file.joint.len(),
            });
        }
        let mut joint = Vec::with_capacity(na * nb);
        for row in &file.joint {
            if row.len() != nb {
                return Err(Error::Dimension {
                    what: "behavior columns",
                    expected: nb,
                    got: row.len(),
                });
            }
            joint.extend_from_slice(row);
        }
        Behavior::new(file.scenario, joint, tol)
    }

    pub fn to_json(&self) -> String {
        let nb = self.scenario.total_outputs(Party::Bob);
        let rows: Vec<Vec<f64>> = self.joint.chunks(nb).map(|r| r.to_vec()).collect();
        let file = BehaviorFile {
            scenario: self.scenario.clone(),
            joint: rows,
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

#[derive(Clone, Debug)]
pub struct NormalizationDefect {
    pub x: usize,
    pub y: usize,
    pub sum: f64,
}

#[derive(Clone, Debug)]
pub struct SignallingDefect {
    /// Party whose output marginal shifts.
    pub party: Party,
    /// Global output id of that party.
    pub output: usize,
    /// The two inputs of the other party whose marginals disagree.
    pub input_a: usize,
    pub input_b: usize,
    pub difference: f64,
}

#[derive(Clone, Debug)]
pub struct RangeNote {
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub normalization: Vec<NormalizationDefect>,
    pub no_signalling: Vec<SignallingDefect>,
    /// Entries outside `[0, 1]`. Informational only.
    pub range: Vec<RangeNote>,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.normalization.is_empty() && self.no_signalling.is_empty()
    }

    fn first_failure(&self) -> String {
        if let Some(d) = self.normalization.first() {
            return format!(
                "normalization for inputs (x={}, y={}): sum {} != 1",
                d.x, d.y, d.sum
            );
        }
        if let Some(d) = self.no_signalling.first() {
            return format!(
                "no-signalling for {:?} output {}: marginal depends on the other party's input ({} vs {}), difference {:e}",
                d.party, d.output, d.input_a, d.input_b, d.difference
            );
        }
        "no failure".into()
    }
}

/// An affine functional on behaviors: a constant plus weighted joint
/// probabilities and single-party marginals. Outputs are global ids and may
/// include the last output of an input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    #[serde(default)]
    pub constant: f64,
    /// `(alice output, bob output, weight)` terms.
    #[serde(default)]
    pub joint: Vec<(usize, usize, f64)>,
    /// `(alice output, weight)` marginal terms.
    #[serde(default)]
    pub alice: Vec<(usize, f64)>,
    /// `(bob output, weight)` marginal terms.
    #[serde(default)]
    pub bob: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Affine {
        Affine {
            constant: c,
            ..Affine::default()
        }
    }

    pub fn joint_term(a: usize, b: usize) -> Affine {
        Affine {
            joint: vec![(a, b, 1.0)],
            ..Affine::default()
        }
    }

    pub fn alice_term(a: usize) -> Affine {
        Affine {
            alice: vec![(a, 1.0)],
            ..Affine::default()
        }
    }

    pub fn bob_term(b: usize) -> Affine {
        Affine {
            bob: vec![(b, 1.0)],
            ..Affine::default()
        }
    }

    pub fn eval(&self, behavior: &Behavior) -> f64 {
        let mut v = self.constant;
        for &(a, b, w) in &self.joint {
            v += w * behavior.p(a, b);
        }
        for &(a, w) in &self.alice {
            v += w * behavior.alice_marginal(a);
        }
        for &(b, w) in &self.bob {
            v += w * behavior.bob_marginal(b);
        }
        v
    }

    /// Checks that every referenced output id exists in the scenario.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let na = scenario.total_outputs(Party::Alice);
        let nb = scenario.total_outputs(Party::Bob);
        let bad = |what: &'static str, expected: usize, got: usize| Error::Dimension {
            what,
            expected,
            got,
        };
        for &(a, b, _) in &self.joint {
            if a >= na {
                return Err(bad("alice output id", na, a));
            }
            if b >= nb {
                return Err(bad("bob output id", nb, b));
            }
        }
        for &(a, _) in &self.alice {
            if a >= na {
                return Err(bad("alice output id", na, a));
            }
        }
        for &(b, _) in &self.bob {
            if b >= nb {
                return Err(bad("bob output id", nb, b));
            }
        }
        Ok(())
    }

    /// Sum of `self` and `scale * other`.
    pub fn add_scaled(&self, other: &Affine, scale: f64) -> Affine {
        let mut out = self.clone();
        out.constant += scale * other.constant;
        out.joint
            .extend(other.joint.iter().map(|&(a, b, w)| (a, b, scale * w)));
        out.alice
            .extend(other.alice.iter().map(|&(a, w)| (a, scale * w)));
        out.bob
            .extend(other.bob.iter().map(|&(b, w)| (b, scale * w)));
        out
    }
}

/// Correlators of a two-input two-output behavior. Alice's inputs are
/// labeled 1, 2 and Bob's 3, 4; outputs are read as +1 (output 0) and -1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatorData {
    /// `C_1, C_2` (Alice) and `C_3, C_4` (Bob).
    pub singles: [f64; 4],
    /// `C_13, C_14, C_23, C_24`.
    pub joints: [f64; 4],
}

impl CorrelatorData {
    pub fn new(singles: [f64; 4], joints: [f64; 4]) -> Result<CorrelatorData> {
        for v in singles.iter().chain(joints.iter()) {
            if v.abs() > 1.0 + 1e-9 {
                return Err(Error::Constraint(format!(
                    "correlator {v} outside [-1, 1]"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Constraint("correlator not finite".into()));
            }
        }
        Ok(CorrelatorData { singles, joints })
    }

    /// `C_ij` with `i` in {1, 2}, `j` in {3, 4}.
    pub fn joint(&self, i: usize, j: usize) -> f64 {
        assert!((1..=2).contains(&i) && (3..=4).contains(&j));
        self.joints[(i - 1) * 2 + (j - 3)]
    }

    /// `C_i` with `i` in {1, .., 4}.
    pub fn single(&self, i: usize) -> f64 {
        assert!((1..=4).contains(&i));
        self.singles[i - 1]
    }

    /// Expands the correlators into the full probability table via
    /// `P(a, b) = (1 + s_a C_X + s_b C_Y + s_a s_b C_XY) / 4`.
    pub fn to_behavior(&self) -> Behavior {
        let scenario = Scenario::chsh();
        let mut joint = vec![0.0; 16];
        for x in 0..2 {
            for a in 0..2 {
                let sa = if a == 0 { 1.0 } else { -1.0 };
                for y in 0..2 {
                    for b in 0..2 {
                        let sb = if b == 0 { 1.0 } else { -1.0 };
                        let p = (1.0
                            + sa * self.single(x + 1)
                            + sb * self.single(y + 3)
                            + sa * sb * self.joint(x + 1, y + 3))
                            / 4.0;
                        joint[(2 * x + a) * 4 + (2 * y + b)] = p;
                    }
                }
            }
        }
        Behavior {
            scenario,
            joint,
        }
    }

    /// Inverse of [`CorrelatorData::to_behavior`]. The behavior must live on
    /// the two-input two-output scenario.
    pub fn from_behavior(b: &Behavior) -> Result<CorrelatorData> {
        if !b.scenario().is_two_input_binary() {
            return Err(Error::Scenario(format!(
                "correlators need a 2-input binary scenario, got {}",
                b.scenario()
            )));
        }
        let mut singles = [0.0; 4];
        let mut joints = [0.0; 4];
        for x in 0..2 {
            singles[x] = b.alice_marginal(2 * x) - b.alice_marginal(2 * x + 1);
            singles[2 + x] = b.bob_marginal(2 * x) - b.bob_marginal(2 * x + 1);
        }
        for x in 0..2 {
            for y in 0..2 {
                joints[2 * x + y] = b.p(2 * x, 2 * y) - b.p(2 * x, 2 * y + 1)
                    - b.p(2 * x + 1, 2 * y)
                    + b.p(2 * x + 1, 2 * y + 1);
            }
        }
        Ok(CorrelatorData { singles, joints })
    }
}

/// The Popescu-Rohrlich box: perfect correlation except anti-correlation on
/// the (2, 4) input pair.
pub fn pr_box() -> Behavior {
    CorrelatorData::new([0.0; 4], [1.0, 1.0, 1.0, -1.0])
        .expect("valid")
        .to_behavior()
}

/// Iterates over all local deterministic behaviors of a scenario.
pub fn deterministic_behaviors(scenario: &Scenario) -> impl Iterator<Item = Behavior> + '_ {
    let alice_counts: Vec<usize> = scenario.outputs(Party::Alice).to_vec();
    let bob_counts: Vec<usize> = scenario.outputs(Party::Bob).to_vec();
    let total: usize = alice_counts.iter().product::<usize>() * bob_counts.iter().product::<usize>();
    (0..total).map(move |mut idx| {
        let mut alice = vec![0; alice_counts.len()];
        for (x, &d) in alice_counts.iter().enumerate() {
            alice[x] = idx % d;
            idx /= d;
        }
        let mut bob = vec![0; bob_counts.len()];
        for (y, &d) in bob_counts.iter().enumerate() {
            bob[y] = idx % d;
            idx /= d;
        }
        Behavior::deterministic(scenario.clone(), &alice, &bob)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_noise_is_valid() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        let b = Behavior::uniform(s);
        assert!(b.validate(DEFAULT_NS_TOLERANCE).passed());
    }

    #[test]
    fn pr_box_is_no_signalling() {
        let b = pr_box();
        // Direct summation over every input pair and marginal.
        for x in 0..2 {
            for y in 0..2 {
                let mut sum = 0.0;
                for a in 0..2 {
                    for bo in 0..2 {
                        sum += b.p(2 * x + a, 2 * y + bo);
                    }
                }
                assert!((sum - 1.0).abs() < 1e-15);
            }
        }
        for a in 0..4 {
            let m0 = b.p(a, 0) + b.p(a, 1);
            let m1 = b.p(a, 2) + b.p(a, 3);
            assert!((m0 - m1).abs() < 1e-15);
        }
        assert!(b.validate(DEFAULT_NS_TOLERANCE).passed());
        // The table itself: uniform on correlated pairs, zero elsewhere.
        assert_eq!(b.p(0, 0), 0.5);
        assert_eq!(b.p(0, 1), 0.0);
        // Input pair (2, 4): anti-correlated.
        assert_eq!(b.p(2, 2), 0.0);
        assert_eq!(b.p(2, 3), 0.5);
    }

    #[test]
    fn perturbed_entry_fails_with_location() {
        let s = Scenario::chsh();
        let mut table = vec![0.25; 16];
        table[0] += 1e-3;
        let b = Behavior::new_unchecked(s, table);
        let report = b.validate(DEFAULT_NS_TOLERANCE);
        assert!(!report.passed());
        assert!(!report.normalization.is_empty());
        assert_eq!(report.normalization[0].x, 0);
        assert_eq!(report.normalization[0].y, 0);
        // The shifted marginal of Alice output 0 is flagged against (y=0, y=1).
        let sig = report
            .no_signalling
            .iter()
            .find(|d| d.party == Party::Alice && d.output == 0)
            .expect("signalling defect identified");
        assert_eq!((sig.input_a, sig.input_b), (0, 1));
    }

    #[test]
    fn mismatched_dimensions_are_structural() {
        let s = Scenario::chsh();
        let err = Behavior::new(s, vec![0.25; 15], DEFAULT_NS_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn zero_correlators_give_uniform_table() {
        let c = CorrelatorData::new([0.0; 4], [0.0; 4]).unwrap();
        let b = c.to_behavior();
        for a in 0..4 {
            for bo in 0..4 {
                assert!((b.p(a, bo) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pr_correlators_give_pr_box() {
        let c = CorrelatorData::new([0.0; 4], [1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(c.to_behavior(), pr_box());
    }

    #[test]
    fn correlator_round_trip() {
        let c = CorrelatorData::new([0.1, -0.3, 0.2, 0.05], [0.4, -0.2, 0.6, 0.1]).unwrap();
        let back = CorrelatorData::from_behavior(&c.to_behavior()).unwrap();
        for i in 0..4 {
            assert!((c.singles[i] - back.singles[i]).abs() < 1e-12);
            assert!((c.joints[i] - back.joints[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_behavior_table() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        let b = Behavior::deterministic(s.clone(), &[1, 2], &[0, 1, 0]);
        assert!(b.validate(0.0).passed());
        // Alice input 1 output 2 has global id offset(1) + 2 = 4.
        assert_eq!(b.p(4, 0), 1.0);
        assert_eq!(b.p(4, 1), 0.0);
        assert_eq!(b.alice_marginal(4), 1.0);
        assert_eq!(deterministic_behaviors(&s).count(), 6 * 8);
    }

    #[test]
    fn single_output_input_rejected() {
        assert!(Scenario::new(vec![2, 1], vec![2]).is_err());
        assert!(Scenario::new(vec![], vec![2]).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let b = pr_box();
        let text = b.to_json();
        let back = Behavior::from_json(&text, DEFAULT_NS_TOLERANCE).unwrap();
        assert_eq!(b, back);
        let bad = text.replace("\"joint\"", "\"extra\": 1, \"joint\"");
        assert!(matches!(
            Behavior::from_json(&bad, DEFAULT_NS_TOLERANCE),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn global_output_indexing() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        assert_eq!(s.total_outputs(Party::Alice), 5);
        assert_eq!(s.offset(Party::Alice, 1), 2);
        assert_eq!(s.input_of(Party::Alice, 4), (1, 2));
        assert!(s.is_reduced(Party::Alice, 3));
        assert!(!s.is_reduced(Party::Alice, 4));
        assert_eq!(s.reduced_outputs(Party::Alice), vec![0, 2, 3]);
        assert_eq!(s.reduced_count(Party::Bob), 3);
        assert_eq!(s.last_output(Party::Bob, 2), 5);
    }
}
