//! Words of measurement projectors and their canonical forms.
//!
//! A [`Letter`] is a projector onto one output of one input of one party,
//! identified by the output's global id. Only reduced outputs (all but the
//! last of each input) appear as letters; the dropped projector of each
//! input is recovered from completeness when needed.
//!
//! Products of letters obey four rules: projectors are self-adjoint,
//! idempotent, two outputs of the same input annihilate each other, and
//! letters of different parties commute. [`Word`] holds the unique normal
//! form under these rules: Alice letters first, then Bob letters, with no
//! adjacent pair sharing an input. [`Product`] is the result of a
//! multiplication, which may collapse to zero.

use crate::error::{Error, Result};
use crate::scenario::{Party, Scenario};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

/// One projector: a party and a global output id of that party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub party: Party,
    pub output: usize,
}

impl Letter {
    pub fn new(party: Party, output: usize) -> Letter {
        Letter { party, output }
    }
}

/// All reduced-output letters of a scenario: Alice's in global id order,
/// then Bob's.
pub fn reduced_letters(scenario: &Scenario) -> Vec<Letter> {
    let mut out = Vec::new();
    for party in [Party::Alice, Party::Bob] {
        for id in scenario.reduced_outputs(party) {
            out.push(Letter::new(party, id));
        }
    }
    out
}

/// A canonical word of projectors.
///
/// Invariant: all Alice letters precede all Bob letters, and no two adjacent
/// letters share a party and an input. The empty word is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word(Vec<Letter>);

/// Result of multiplying words: zero, or another canonical word.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Product {
    Zero,
    Word(Word),
}

impl Product {
    pub fn word(self) -> Option<Word> {
        match self {
            Product::Zero => None,
            Product::Word(w) => Some(w),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Product::Zero)
    }
}

/// Appends a letter to a reduced same-party section, keeping it reduced.
/// Returns false when the product annihilates.
fn push_reduced(section: &mut Vec<Letter>, letter: Letter, scenario: &Scenario) -> bool {
    if let Some(&top) = section.last() {
        if top == letter {
            return true;
        }
        let (x_top, _) = scenario.input_of(letter.party, top.output);
        let (x_new, _) = scenario.input_of(letter.party, letter.output);
        if x_top == x_new {
            return false;
        }
    }
    section.push(letter);
    true
}

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    pub fn single(letter: Letter) -> Word {
        Word(vec![letter])
    }

    /// Canonicalizes an arbitrary letter sequence.
    pub fn product(letters: &[Letter], scenario: &Scenario) -> Product {
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        for &l in letters {
            let section = match l.party {
                Party::Alice => &mut alice,
                Party::Bob => &mut bob,
            };
            if !push_reduced(section, l, scenario) {
                return Product::Zero;
            }
        }
        alice.extend(bob);
        Product::Word(Word(alice))
    }

    pub fn mul(&self, other: &Word, scenario: &Scenario) -> Product {
        let mut seq = Vec::with_capacity(self.0.len() + other.0.len());
        seq.extend_from_slice(&self.0);
        seq.extend_from_slice(&other.0);
        Word::product(&seq, scenario)
    }

    /// Reverses each party's section. Self-inverse; the adjoint of a
    /// canonical word is canonical.
    pub fn adjoint(&self) -> Word {
        let split = self.alice_len();
        let mut letters = Vec::with_capacity(self.0.len());
        letters.extend(self.0[..split].iter().rev());
        letters.extend(self.0[split..].iter().rev());
        Word(letters)
    }

    /// `canon(self† · other)`, the moment-matrix entry word.
    pub fn adjoint_mul(&self, other: &Word, scenario: &Scenario) -> Product {
        self.adjoint().mul(other, scenario)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    fn alice_len(&self) -> usize {
        self.0.iter().take_while(|l| l.party == Party::Alice).count()
    }

    pub fn alice_part(&self) -> &[Letter] {
        &self.0[..self.alice_len()]
    }

    pub fn bob_part(&self) -> &[Letter] {
        &self.0[self.alice_len()..]
    }

    /// Input of the leading letter of the party's section, if any.
    pub fn first_input(&self, party: Party, scenario: &Scenario) -> Option<usize> {
        let part = match party {
            Party::Alice => self.alice_part(),
            Party::Bob => self.bob_part(),
        };
        part.first().map(|l| scenario.input_of(party, l.output).0)
    }

    /// Self-adjoint words are those fixed by section reversal.
    pub fn is_self_adjoint(&self) -> bool {
        *self == self.adjoint()
    }

    /// The word or its adjoint, whichever is smaller. Two words index the
    /// same real moment exactly when their keys agree.
    pub fn adjoint_orbit_key(&self) -> Word {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    /// Renders like `A(x=0,a=1)·B(y=1,b=0)`; the identity renders as `1`.
    pub fn display(&self, scenario: &Scenario) -> String {
        if self.is_identity() {
            return "1".into();
        }
        self.0
            .iter()
            .map(|l| {
                let (x, a) = scenario.input_of(l.party, l.output);
                match l.party {
                    Party::Alice => format!("A(x={x},a={a})"),
                    Party::Bob => format!("B(y={x},b={a})"),
                }
            })
            .collect::<Vec<_>>()
            .join("\u{b7}")
    }
}

/// Shorter words first, then letter-by-letter. The identity is least.
impl Ord for Word {
    fn cmp(&self, other: &Word) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Word) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One symbol of a pattern token: a party and a prime count, e.g. `A'`
/// is Alice with one prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TokenLetter {
    pub party: Party,
    pub primes: u32,
}

/// A product pattern such as `AB` or `AA'B`. Within a party, later symbols
/// must carry strictly larger inputs, so `AA'B` ranges over pairs of Alice
/// projectors with the first input below the second.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token(Vec<TokenLetter>);

impl Token {
    pub fn letters(&self) -> &[TokenLetter] {
        &self.0
    }

    /// All canonical words matching the pattern.
    fn expand(&self, scenario: &Scenario) -> Vec<Word> {
        let mut words = Vec::new();
        let mut chosen: Vec<Letter> = Vec::with_capacity(self.0.len());
        self.expand_rec(scenario, &mut chosen, &mut words);
        words
    }

    fn expand_rec(&self, scenario: &Scenario, chosen: &mut Vec<Letter>, out: &mut Vec<Word>) {
        if chosen.len() == self.0.len() {
            if let Product::Word(w) = Word::product(chosen, scenario) {
                out.push(w);
            }
            return;
        }
        let sym = self.0[chosen.len()];
        // Inputs must strictly increase along each party's symbols.
        let min_input = chosen
            .iter()
            .filter(|l| l.party == sym.party)
            .last()
            .map(|l| scenario.input_of(sym.party, l.output).0 + 1)
            .unwrap_or(0);
        for id in scenario.reduced_outputs(sym.party) {
            if scenario.input_of(sym.party, id).0 >= min_input {
                chosen.push(Letter::new(sym.party, id));
                self.expand_rec(scenario, chosen, out);
                chosen.pop();
            }
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.party.letter())?;
            for _ in 0..l.primes {
                write!(f, "'")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Token> {
        let mut letters: Vec<TokenLetter> = Vec::new();
        for c in s.chars() {
            match c {
                'A' => letters.push(TokenLetter { party: Party::Alice, primes: 0 }),
                'B' => letters.push(TokenLetter { party: Party::Bob, primes: 0 }),
                '\'' => match letters.last_mut() {
                    Some(l) => l.primes += 1,
                    None => {
                        return Err(Error::Level(format!(
                            "token {s:?} starts with a prime"
                        )))
                    }
                },
                _ => {
                    return Err(Error::Level(format!(
                        "token {s:?} contains {c:?}; expected A, B, or '"
                    )))
                }
            }
        }
        if letters.is_empty() {
            return Err(Error::Level("empty pattern token".into()));
        }
        // Primes disambiguate inputs, so each party's primes must climb.
        for party in [Party::Alice, Party::Bob] {
            let primes: Vec<u32> = letters
                .iter()
                .filter(|l| l.party == party)
                .map(|l| l.primes)
                .collect();
            if primes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Level(format!(
                    "token {s:?} repeats a {} symbol without adding a prime",
                    party.letter()
                )));
            }
        }
        Ok(Token(letters))
    }
}

/// A point in the relaxation hierarchy: an integer level, or an integer
/// level extended by extra product patterns, such as `1+AB`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Integer(u32),
    Intermediate { base: u32, tokens: Vec<Token> },
}

impl Level {
    /// The words spanning this level's moment matrix: identity first, then
    /// by length, then lexicographically.
    pub fn generate(&self, scenario: &Scenario) -> WordSet {
        let mut set: HashSet<Word> = match self {
            Level::Integer(n) => bfs_words(scenario, *n),
            Level::Intermediate { base, tokens } => {
                let mut set = bfs_words(scenario, *base);
                for token in tokens {
                    set.extend(token.expand(scenario));
                }
                set
            }
        };
        set.insert(Word::identity());
        let mut words: Vec<Word> = set.into_iter().collect();
        words.sort();
        WordSet::from_sorted(words)
    }

    /// Longest letter count a member word can have.
    pub fn max_word_len(&self) -> usize {
        match self {
            Level::Integer(n) => *n as usize,
            Level::Intermediate { base, tokens } => tokens
                .iter()
                .map(|t| t.letters().len())
                .max()
                .unwrap_or(0)
                .max(*base as usize),
        }
    }

    pub fn base(&self) -> u32 {
        match self {
            Level::Integer(n) => *n,
            Level::Intermediate { base, .. } => *base,
        }
    }

    pub fn is_first_level(&self) -> bool {
        matches!(self, Level::Integer(1))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Integer(n) => write!(f, "{n}"),
            Level::Intermediate { base, tokens } => {
                write!(f, "{base}")?;
                for t in tokens {
                    write!(f, "+{t}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Level> {
        let mut pieces = s.split('+').map(str::trim);
        let head = pieces.next().expect("split yields at least one piece");
        let base: u32 = head
            .parse()
            .map_err(|_| Error::Level(format!("level {s:?} must start with an integer")))?;
        if base == 0 {
            return Err(Error::Level("level must be at least 1".into()));
        }
        let tokens: Vec<Token> = pieces.map(Token::from_str).collect::<Result<_>>()?;
        if tokens.is_empty() {
            Ok(Level::Integer(base))
        } else {
            Ok(Level::Intermediate { base, tokens })
        }
    }
}

/// Canonical words of length at most `n`. Every canonical word is reachable
/// through its own prefixes, which are themselves canonical, so a breadth
/// first search over right multiplication by single letters is exhaustive.
fn bfs_words(scenario: &Scenario, n: u32) -> HashSet<Word> {
    let letters = reduced_letters(scenario);
    let mut seen: HashSet<Word> = HashSet::new();
    seen.insert(Word::identity());
    let mut frontier = vec![Word::identity()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                if let Product::Word(p) = w.mul(&Word::single(l), scenario) {
                    if seen.insert(p.clone()) {
                        next.push(p);
                    }
                }
            }
        }
        frontier = next;
    }
    seen
}

/// An ordered, indexed set of canonical words.
#[derive(Clone, Debug)]
pub struct WordSet {
    words: Vec<Word>,
    index: std::collections::HashMap<Word, usize>,
}

impl WordSet {
    fn from_sorted(words: Vec<Word>) -> WordSet {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordSet { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &Word {
        &self.words[i]
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.index.contains_key(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Word> {
        self.words.iter()
    }

    /// True when every word of `other` appears here.
    pub fn contains_set(&self, other: &WordSet) -> bool {
        other.iter().all(|w| self.contains(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chsh() -> Scenario {
        Scenario::chsh()
    }

    fn a(id: usize) -> Letter {
        Letter::new(Party::Alice, id)
    }

    fn b(id: usize) -> Letter {
        Letter::new(Party::Bob, id)
    }

    #[test]
    fn idempotence_and_orthogonality() {
        let s = Scenario::square(2, 3).unwrap();
        // Outputs 0, 1 are the reduced outputs of Alice input 0.
        assert_eq!(
            Word::product(&[a(0), a(0)], &s),
            Product::Word(Word::single(a(0)))
        );
        assert_eq!(Word::product(&[a(0), a(1)], &s), Product::Zero);
        assert_eq!(Word::product(&[a(0), a(1), a(0)], &s), Product::Zero);
    }

    #[test]
    fn parties_commute() {
        let s = chsh();
        let ab = Word::product(&[a(0), b(1)], &s);
        let ba = Word::product(&[b(1), a(0)], &s);
        assert_eq!(ab, ba);
        // A projector sandwiched by the other party's collapses.
        let aba = Word::product(&[a(0), b(1), a(0)], &s).word().unwrap();
        assert_eq!(aba.len(), 2);
        assert_eq!(aba, Word::product(&[a(0), b(1)], &s).word().unwrap());
    }

    #[test]
    fn same_party_different_inputs_do_not_commute() {
        let s = chsh();
        // Outputs 0 and 2 are the reduced outputs of Alice inputs 0 and 1.
        let xy = Word::product(&[a(0), a(2)], &s).word().unwrap();
        let yx = Word::product(&[a(2), a(0)], &s).word().unwrap();
        assert_ne!(xy, yx);
        assert_eq!(xy.len(), 2);
        let xyx = Word::product(&[a(0), a(2), a(0)], &s).word().unwrap();
        assert_eq!(xyx.len(), 3);
    }

    #[test]
    fn adjoint_reverses_sections() {
        let s = Scenario::square(3, 2).unwrap();
        let w = Word::product(&[a(0), a(2), b(4), b(0)], &s).word().unwrap();
        let adj = w.adjoint();
        assert_eq!(adj.alice_part(), &[a(2), a(0)]);
        assert_eq!(adj.bob_part(), &[b(0), b(4)]);
        assert_eq!(adj.adjoint(), w);
        assert!(!w.is_self_adjoint());
        assert!(Word::product(&[a(0), b(2)], &s)
            .word()
            .unwrap()
            .is_self_adjoint());
    }

    #[test]
    fn display_format() {
        let s = Scenario::square(2, 3).unwrap();
        let w = Word::product(&[a(3), b(0)], &s).word().unwrap();
        assert_eq!(w.display(&s), "A(x=1,a=0)\u{b7}B(y=0,b=0)");
        assert_eq!(Word::identity().display(&s), "1");
    }

    #[test]
    fn word_ordering() {
        let s = chsh();
        let id = Word::identity();
        let a0 = Word::single(a(0));
        let b0 = Word::single(b(0));
        let ab = Word::product(&[a(0), b(0)], &s).word().unwrap();
        assert!(id < a0);
        assert!(a0 < b0);
        assert!(b0 < ab);
        assert_eq!(ab.adjoint_orbit_key(), ab);
        let xy = Word::product(&[a(0), a(2)], &s).word().unwrap();
        let yx = Word::product(&[a(2), a(0)], &s).word().unwrap();
        assert_eq!(xy.adjoint_orbit_key(), xy);
        assert_eq!(yx.adjoint_orbit_key(), xy);
    }

    #[test]
    fn level_parsing_round_trip() {
        for text in ["1", "2", "1+AB", "1+AB+AA'B", "2+ABB'"] {
            let level: Level = text.parse().unwrap();
            assert_eq!(level.to_string(), text);
        }
        assert_eq!("1 + AB".parse::<Level>().unwrap().to_string(), "1+AB");
        assert!("0".parse::<Level>().is_err());
        assert!("".parse::<Level>().is_err());
        assert!("AB".parse::<Level>().is_err());
        assert!("1+".parse::<Level>().is_err());
        assert!("1+AA".parse::<Level>().is_err());
        assert!("1+A'A".parse::<Level>().is_err());
        assert!("1+AC".parse::<Level>().is_err());
        assert!("1+'A".parse::<Level>().is_err());
    }

    #[test]
    fn two_input_binary_level_sizes() {
        let s = chsh();
        assert_eq!("1".parse::<Level>().unwrap().generate(&s).len(), 5);
        assert_eq!("1+AB".parse::<Level>().unwrap().generate(&s).len(), 9);
        // Length 2: four ordered same-party pairs across inputs per party,
        // four mixed pairs.
        assert_eq!("2".parse::<Level>().unwrap().generate(&s).len(), 13);
    }

    #[test]
    fn three_input_binary_level_sizes() {
        let s = Scenario::square(3, 2).unwrap();
        assert_eq!("1".parse::<Level>().unwrap().generate(&s).len(), 7);
        assert_eq!("1+AB".parse::<Level>().unwrap().generate(&s).len(), 16);
        assert_eq!("2".parse::<Level>().unwrap().generate(&s).len(), 28);
        assert_eq!("3".parse::<Level>().unwrap().generate(&s).len(), 88);
    }

    #[test]
    fn asymmetric_scenario_level_sizes() {
        let s = Scenario::new(vec![2, 3], vec![2, 2, 2]).unwrap();
        assert_eq!("1".parse::<Level>().unwrap().generate(&s).len(), 7);
        assert_eq!("1+AB".parse::<Level>().unwrap().generate(&s).len(), 16);
        let l = "1+AB+AA'B".parse::<Level>().unwrap();
        assert_eq!(l.generate(&s).len(), 22);
        assert_eq!(l.max_word_len(), 3);
    }

    #[test]
    fn high_dimension_level_sizes() {
        for d in 2..=8 {
            let s = Scenario::square(2, d).unwrap();
            let s1 = "1".parse::<Level>().unwrap().generate(&s);
            assert_eq!(s1.len(), 1 + 4 * (d - 1));
            let s1ab = "1+AB".parse::<Level>().unwrap().generate(&s);
            assert_eq!(s1ab.len(), 1 + 4 * (d - 1) + 4 * (d - 1) * (d - 1));
            assert!(s1ab.contains_set(&s1));
        }
    }

    #[test]
    fn word_set_ordering_and_lookup() {
        let s = chsh();
        let set = "1+AB".parse::<Level>().unwrap().generate(&s);
        assert!(set.word(0).is_identity());
        for i in 1..set.len() {
            assert!(set.word(i - 1) < set.word(i));
            assert_eq!(set.index_of(set.word(i)), Some(i));
        }
        // Levels nest: S_1 words come first in sorted order.
        for i in 1..=4 {
            assert_eq!(set.word(i).len(), 1);
        }
        for i in 5..9 {
            assert_eq!(set.word(i).len(), 2);
        }
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        (
            proptest::collection::vec(2usize..4, 1..3),
            proptest::collection::vec(2usize..4, 1..3),
        )
            .prop_map(|(a, b)| Scenario::new(a, b).unwrap())
    }

    fn arb_sequence(s: &Scenario) -> impl Strategy<Value = Vec<Letter>> {
        let letters = reduced_letters(s);
        proptest::collection::vec(0..letters.len(), 0..8)
            .prop_map(move |ids| ids.into_iter().map(|i| letters[i]).collect())
    }

    proptest! {
        #[test]
        fn canonicalization_is_associative(
            (s, seq, cut) in arb_scenario().prop_flat_map(|s| {
                let seq = arb_sequence(&s);
                (Just(s), seq).prop_flat_map(|(s, seq)| {
                    let n = seq.len();
                    (Just(s), Just(seq), 0..=n)
                })
            })
        ) {
            let whole = Word::product(&seq, &s);
            let left = Word::product(&seq[..cut], &s);
            let right = Word::product(&seq[cut..], &s);
            let split = match (left, right) {
                (Product::Word(l), Product::Word(r)) => l.mul(&r, &s),
                _ => Product::Zero,
            };
            prop_assert_eq!(whole, split);
        }

        #[test]
        fn canonical_form_is_stable(
            (s, seq) in arb_scenario().prop_flat_map(|s| {
                let seq = arb_sequence(&s);
                (Just(s), seq)
            })
        ) {
            if let Product::Word(w) = Word::product(&seq, &s) {
                // Re-canonicalizing a canonical word changes nothing.
                prop_assert_eq!(Word::product(w.letters(), &s), Product::Word(w.clone()));
                // Adjoint is an involution and an anti-homomorphism.
                prop_assert_eq!(w.adjoint().adjoint(), w.clone());
                prop_assert!(w.len() <= seq.len());
            }
        }

        #[test]
        fn adjoint_reverses_products(
            (s, u, v) in arb_scenario().prop_flat_map(|s| {
                let u = arb_sequence(&s);
                let v = arb_sequence(&s);
                (Just(s), u, v)
            })
        ) {
            let (u, v) = match (Word::product(&u, &s), Word::product(&v, &s)) {
                (Product::Word(u), Product::Word(v)) => (u, v),
                _ => return Ok(()),
            };
            let lhs = match u.mul(&v, &s) {
                Product::Word(w) => Product::Word(w.adjoint()),
                Product::Zero => Product::Zero,
            };
            let rhs = v.adjoint().mul(&u.adjoint(), &s);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
