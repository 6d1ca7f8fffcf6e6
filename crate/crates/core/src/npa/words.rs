//! Word rewriting for monomial bases.
//!
//! Alphabets are either group letters (unitary generators and their inverses,
//! written as adjoints) or projective measurement symbols. Rewrite rules all
//! have two-letter left-hand sides; normal forms are computed by leftmost
//! reduction and the rule set is checked for local confluence by an
//! exhaustive overlap test when a basis is built. Together with termination
//! (every rule drops the pair (length, inversion count) lexicographically)
//! this gives unique normal forms.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::poly::{Letter, Word};

use super::NpaError;

/// Result of canonicalization: projective orthogonality can kill a word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Canon {
    Zero,
    Word(Word),
}

impl Canon {
    pub fn word(self) -> Option<Word> {
        match self {
            Canon::Zero => None,
            Canon::Word(w) => Some(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RuleRhs {
    Zero,
    Replace(Vec<Letter>),
}

#[derive(Debug, Clone)]
struct Rule {
    lhs: (Letter, Letter),
    rhs: RuleRhs,
}

/// The two alphabet flavours used by the relaxations.
#[derive(Debug, Clone, PartialEq)]
pub enum Alphabet {
    /// Unitary group generators; letters are generators or their adjoints.
    /// `commuting_split = Some(s)` makes generators `< s` commute with
    /// generators `>= s` (direct-product relations).
    Group { gens: Vec<u32>, commuting_split: Option<u32> },
    /// Projective measurement symbols `E^x_a` for two parties; `gen` encodes
    /// `(party, question, answer)` and every symbol is self-adjoint.
    Projective { questions: usize, answers_kept: usize },
}

impl Alphabet {
    /// All letters available for basis extension.
    pub fn letters(&self) -> Vec<Letter> {
        match self {
            Alphabet::Group { gens, .. } => gens
                .iter()
                .flat_map(|&g| [Letter::plain(g), Letter::star(g)])
                .collect(),
            Alphabet::Projective { questions, answers_kept } => (0..2 * questions * answers_kept)
                .map(|s| Letter::plain(s as u32))
                .collect(),
        }
    }

    /// Formal adjoint before canonicalization.
    pub fn adjoint(&self, w: &Word) -> Word {
        match self {
            Alphabet::Group { .. } => w.adjoint(),
            // Self-adjoint symbols: reverse only.
            Alphabet::Projective { .. } => Word(w.0.iter().rev().copied().collect()),
        }
    }
}

/// Symbol encoding for the projective alphabet.
pub fn projective_symbol(party: usize, question: usize, answer: usize, questions: usize, answers_kept: usize) -> u32 {
    (party * questions * answers_kept + question * answers_kept + answer) as u32
}

pub fn projective_decode(sym: u32, questions: usize, answers_kept: usize) -> (usize, usize, usize) {
    let s = sym as usize;
    let per_party = questions * answers_kept;
    (s / per_party, (s % per_party) / answers_kept, s % answers_kept)
}

/// A confluent rewrite system over an alphabet.
#[derive(Debug, Clone)]
pub struct RewriteSystem {
    pub alphabet: Alphabet,
    rules: Vec<Rule>,
    rule_index: HashMap<(Letter, Letter), usize>,
}

impl RewriteSystem {
    /// Free group on the given generators.
    pub fn free_group(n: usize) -> Self {
        let gens: Vec<u32> = (0..n as u32).collect();
        Self::group(gens, None)
    }

    /// Direct product `F_n × F_n`: generators `0..n` commute with `n..2n`.
    pub fn product_group(n: usize) -> Self {
        let gens: Vec<u32> = (0..2 * n as u32).collect();
        Self::group(gens, Some(n as u32))
    }

    /// Free group on `2n` generators (softened relations live in the
    /// localizing constraints, not the word problem).
    pub fn soft_group(n: usize) -> Self {
        Self::free_group(2 * n)
    }

    fn group(gens: Vec<u32>, commuting_split: Option<u32>) -> Self {
        let mut rules = Vec::new();
        for &g in &gens {
            for adj in [false, true] {
                let l = Letter { gen: g, adjoint: adj };
                rules.push(Rule { lhs: (l, l.inverse()), rhs: RuleRhs::Replace(vec![]) });
            }
        }
        if let Some(split) = commuting_split {
            for &hi in gens.iter().filter(|&&g| g >= split) {
                for &lo in gens.iter().filter(|&&g| g < split) {
                    for a1 in [false, true] {
                        for a2 in [false, true] {
                            let v = Letter { gen: hi, adjoint: a1 };
                            let u = Letter { gen: lo, adjoint: a2 };
                            rules.push(Rule { lhs: (v, u), rhs: RuleRhs::Replace(vec![u, v]) });
                        }
                    }
                }
            }
        }
        Self::from_rules(Alphabet::Group { gens, commuting_split }, rules)
    }

    /// Two-party projective measurements: per question, kept effects are
    /// idempotent and mutually orthogonal; party-B symbols commute past
    /// party-A symbols.
    pub fn projective(questions: usize, answers_kept: usize) -> Self {
        let alphabet = Alphabet::Projective { questions, answers_kept };
        let mut rules = Vec::new();
        for party in 0..2 {
            for x in 0..questions {
                for a in 0..answers_kept {
                    let s = Letter::plain(projective_symbol(party, x, a, questions, answers_kept));
                    rules.push(Rule { lhs: (s, s), rhs: RuleRhs::Replace(vec![s]) });
                    for a2 in 0..answers_kept {
                        if a2 != a {
                            let s2 = Letter::plain(projective_symbol(party, x, a2, questions, answers_kept));
                            rules.push(Rule { lhs: (s, s2), rhs: RuleRhs::Zero });
                        }
                    }
                }
            }
        }
        let per_party = questions * answers_kept;
        for b_sym in 0..per_party {
            for a_sym in 0..per_party {
                let b = Letter::plain((per_party + b_sym) as u32);
                let a = Letter::plain(a_sym as u32);
                rules.push(Rule { lhs: (b, a), rhs: RuleRhs::Replace(vec![a, b]) });
            }
        }
        Self::from_rules(alphabet, rules)
    }

    fn from_rules(alphabet: Alphabet, rules: Vec<Rule>) -> Self {
        let rule_index = rules
            .iter()
            .enumerate()
            .map(|(i, r)| (r.lhs, i))
            .collect();
        RewriteSystem { alphabet, rules, rule_index }
    }

    /// Leftmost reduction to normal form.
    pub fn canon(&self, w: &Word) -> Canon {
        let mut letters: VecDeque<Letter> = match &self.alphabet {
            Alphabet::Group { .. } => w.0.iter().copied().collect(),
            // Self-adjoint symbols: clear adjoint flags up front.
            Alphabet::Projective { .. } => w.0.iter().map(|l| Letter::plain(l.gen)).collect(),
        };
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        while let Some(next) = letters.pop_front() {
            out.push(next);
            // Reduce at the new boundary as long as a rule applies.
            while out.len() >= 2 {
                let pair = (out[out.len() - 2], out[out.len() - 1]);
                match self.rule_index.get(&pair) {
                    None => break,
                    Some(&ri) => match &self.rules[ri].rhs {
                        RuleRhs::Zero => return Canon::Zero,
                        RuleRhs::Replace(rhs) => {
                            out.truncate(out.len() - 2);
                            // Push replacement back onto the input so earlier
                            // letters can interact with it.
                            for l in rhs.iter().rev() {
                                letters.push_front(*l);
                            }
                            break;
                        }
                    },
                }
            }
        }
        Canon::Word(Word(out))
    }

    /// Canonical form of the formal adjoint.
    pub fn canon_adjoint(&self, w: &Word) -> Canon {
        self.canon(&self.alphabet.adjoint(w))
    }

    /// Exhaustive critical-pair test for local confluence: every one-letter
    /// overlap `abc` of two rule left-hand sides must reduce to the same
    /// normal form along both rule applications.
    pub fn check_confluence(&self) -> Result<(), NpaError> {
        for r1 in &self.rules {
            for r2 in &self.rules {
                if r1.lhs.1 != r2.lhs.0 {
                    continue;
                }
                let (a, b) = r1.lhs;
                let c = r2.lhs.1;
                // Route 1: apply r1 to ab, keep c.
                let w1 = match &r1.rhs {
                    RuleRhs::Zero => Canon::Zero,
                    RuleRhs::Replace(rhs) => {
                        let mut v = rhs.clone();
                        v.push(c);
                        self.canon(&Word(v))
                    }
                };
                // Route 2: keep a, apply r2 to bc.
                let w2 = match &r2.rhs {
                    RuleRhs::Zero => Canon::Zero,
                    RuleRhs::Replace(rhs) => {
                        let mut v = vec![a];
                        v.extend_from_slice(rhs);
                        self.canon(&Word(v))
                    }
                };
                // Zero only absorbs against zero once both routes finish.
                let resolved = match (&w1, &w2) {
                    (Canon::Zero, Canon::Zero) => true,
                    (Canon::Word(x), Canon::Word(y)) => x == y,
                    // One route died, the other did not: only confluent if
                    // the survivor also reduces to zero, which it cannot.
                    _ => false,
                };
                if !resolved {
                    return Err(NpaError::NotConfluent {
                        overlap: format!("{:?}{:?}{:?}", a, b, c),
                    });
                }
            }
        }
        Ok(())
    }

    /// All canonical words of length `<= max_len` over the given letters, in
    /// length-lexicographic order. Prefixes of normal forms are normal for
    /// two-letter rules, so breadth-first extension enumerates exactly the
    /// canonical words.
    pub fn enumerate_basis(&self, letters: &[Letter], max_len: usize, cap: usize) -> Result<Vec<Word>, NpaError> {
        let mut words = vec![Word::empty()];
        let mut seen: HashSet<Word> = words.iter().cloned().collect();
        let mut frontier = words.clone();
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in letters {
                    let mut v = w.0.clone();
                    v.push(l);
                    let cand = Word(v);
                    if let Canon::Word(c) = self.canon(&cand) {
                        if c == cand && seen.insert(c.clone()) {
                            next.push(c);
                        }
                    }
                }
            }
            words.extend(next.iter().cloned());
            if words.len() > cap {
                return Err(NpaError::SizeCap { size: words.len(), cap });
            }
            frontier = next;
        }
        words.sort();
        Ok(words)
    }
}

/// Brute-force free reduction used as an independent oracle in tests: scan
/// for adjacent inverse pairs and remove them until none remain.
#[cfg(test)]
pub fn naive_free_reduce(w: &Word) -> Word {
    let mut v = w.0.clone();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < v.len() {
            if v[i].gen == v[i + 1].gen && v[i].adjoint != v[i + 1].adjoint {
                v.drain(i..i + 2);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            return Word(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn all_rule_sets_are_confluent() {
        RewriteSystem::free_group(3).check_confluence().unwrap();
        RewriteSystem::product_group(2).check_confluence().unwrap();
        RewriteSystem::soft_group(2).check_confluence().unwrap();
        RewriteSystem::projective(2, 1).check_confluence().unwrap();
        RewriteSystem::projective(3, 3).check_confluence().unwrap();
    }

    #[test]
    fn free_reduction_matches_naive_oracle() {
        let rs = RewriteSystem::free_group(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let len = rng.gen_range(0..12);
            let w = Word(
                (0..len)
                    .map(|_| Letter { gen: rng.gen_range(0..3), adjoint: rng.gen_bool(0.5) })
                    .collect(),
            );
            let via_rules = rs.canon(&w).word().unwrap();
            assert_eq!(via_rules, naive_free_reduce(&w));
        }
    }

    #[test]
    fn product_normal_form_sorts_parts() {
        let rs = RewriteSystem::product_group(2);
        // v1 u1 v2 u2 -> u1 u2 v1 v2  (letters: u=0,1; v=2,3)
        let w = Word(vec![
            Letter::plain(2),
            Letter::plain(0),
            Letter::plain(3),
            Letter::plain(1),
        ]);
        let c = rs.canon(&w).word().unwrap();
        assert_eq!(
            c,
            Word(vec![Letter::plain(0), Letter::plain(1), Letter::plain(2), Letter::plain(3)])
        );
    }

    #[test]
    fn product_canon_matches_split_oracle() {
        let rs = RewriteSystem::product_group(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let len = rng.gen_range(0..10);
            let w = Word(
                (0..len)
                    .map(|_| Letter { gen: rng.gen_range(0..4), adjoint: rng.gen_bool(0.5) })
                    .collect(),
            );
            let canon = rs.canon(&w).word().unwrap();
            // Oracle: stable-split into u/v parts, reduce each freely.
            let u_part: Vec<Letter> = w.0.iter().filter(|l| l.gen < 2).copied().collect();
            let v_part: Vec<Letter> = w.0.iter().filter(|l| l.gen >= 2).copied().collect();
            let mut expect = naive_free_reduce(&Word(u_part)).0;
            expect.extend(naive_free_reduce(&Word(v_part)).0);
            assert_eq!(canon, Word(expect));
        }
    }

    #[test]
    fn projective_orthogonality_kills_words() {
        let rs = RewriteSystem::projective(2, 2);
        let e11 = Letter::plain(projective_symbol(0, 0, 0, 2, 2));
        let e12 = Letter::plain(projective_symbol(0, 0, 1, 2, 2));
        assert_eq!(rs.canon(&Word(vec![e11, e12])), Canon::Zero);
        assert_eq!(rs.canon(&Word(vec![e11, e11])).word().unwrap(), Word(vec![e11]));
    }

    #[test]
    fn projective_commutes_parties() {
        let rs = RewriteSystem::projective(2, 1);
        let a = Letter::plain(projective_symbol(0, 1, 0, 2, 1));
        let b = Letter::plain(projective_symbol(1, 0, 0, 2, 1));
        assert_eq!(rs.canon(&Word(vec![b, a])).word().unwrap(), Word(vec![a, b]));
    }

    #[test]
    fn basis_counts_for_free_group() {
        let rs = RewriteSystem::free_group(2);
        let letters = rs.alphabet.letters();
        let basis = rs.enumerate_basis(&letters, 2, 1000).unwrap();
        // 1 + 4 + 12 reduced words
        assert_eq!(basis.len(), 17);
    }

    #[test]
    fn basis_counts_for_chsh_level_one() {
        let rs = RewriteSystem::projective(2, 1);
        let letters = rs.alphabet.letters();
        let basis = rs.enumerate_basis(&letters, 1, 1000).unwrap();
        assert_eq!(basis.len(), 5);
    }

    #[test]
    fn basis_cap_is_enforced() {
        let rs = RewriteSystem::free_group(3);
        let letters = rs.alphabet.letters();
        assert!(matches!(
            rs.enumerate_basis(&letters, 4, 50),
            Err(NpaError::SizeCap { .. })
        ));
    }

    #[test]
    fn canon_entry_depends_only_on_canonical_form() {
        // Randomized spot check: canon(u* w) for random u,w equals canon of
        // the naive reduction of the concatenation.
        let rs = RewriteSystem::free_group(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let len1 = rng.gen_range(0..6);
            let len2 = rng.gen_range(0..6);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| {
                Word(
                    (0..len)
                        .map(|_| Letter { gen: rng.gen_range(0..2), adjoint: rng.gen_bool(0.5) })
                        .collect(),
                )
            };
            let u = mk(&mut rng, len1);
            let w = mk(&mut rng, len2);
            let prod = u.adjoint().concat(&w);
            let direct = rs.canon(&prod).word().unwrap();
            let via_naive = naive_free_reduce(&prod);
            assert_eq!(direct, via_naive);
        }
    }
}
