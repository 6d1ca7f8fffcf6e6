//! Rational *-polynomials over named generators.
//!
//! A polynomial is a finite sum of terms `c · w` where `c` is a Gaussian
//! rational (exact `ℚ(i)` arithmetic) and `w` a word over generator symbols
//! and their adjoints. Polynomials are kept in a canonical map form (distinct
//! words, nonzero coefficients), so equality is syntactic equality of the
//! canonical form.
//!
//! Text grammar (shared by the CLI and the formula language):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('\'')*              -- postfix adjoint
//! base   := rational | 'i' | ident | '(' expr ')'
//! rational := int ('/' int)?
//! ident  := letter (letter | digit | '_')*
//! ```
//!
//! Example: `u1 + u1' + (1/2+3/4*i)*u2*v1'`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, Signature};

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown generator symbol `{0}`")]
    UnknownGenerator(String),
    #[error("variable {0} has no assignment")]
    Unassigned(usize),
    #[error("division by zero in rational literal")]
    DivisionByZero,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Exact Gaussian rational coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn zero() -> Self {
        GaussianRational { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        GaussianRational { re: BigRational::one(), im: BigRational::zero() }
    }

    pub fn i() -> Self {
        GaussianRational { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn from_int(n: i64) -> Self {
        GaussianRational { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        GaussianRational {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussianRational { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn add(&self, other: &Self) -> Self {
        GaussianRational { re: &self.re + &other.re, im: &self.im + &other.im }
    }

    pub fn mul(&self, other: &Self) -> Self {
        GaussianRational {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    pub fn neg(&self) -> Self {
        GaussianRational { re: -self.re.clone(), im: -self.im.clone() }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    /// `|re| + |im|`, an upper bound on the modulus.
    pub fn abs_bound(&self) -> f64 {
        self.re.abs().to_f64().unwrap_or(f64::INFINITY) + self.im.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}*i", self.im)
        } else {
            write!(f, "({}+{}*i)", self.re, self.im)
        }
    }
}

/// A single letter of a word: a generator index, possibly adjointed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: u32,
    pub adjoint: bool,
}

impl Letter {
    pub fn plain(gen: u32) -> Self {
        Letter { gen, adjoint: false }
    }

    pub fn star(gen: u32) -> Self {
        Letter { gen, adjoint: true }
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, adjoint: !self.adjoint }
    }
}

/// A word over generator letters; the empty word is the unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn single(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Formal adjoint: reverse the word and flip each letter.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }
}

/// Length-lexicographic order: shorter first, then lexicographic by letters.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A *-polynomial in canonical form: distinct words, nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StarPoly {
    terms: BTreeMap<Word, GaussianRational>,
}

impl StarPoly {
    pub fn zero() -> Self {
        StarPoly::default()
    }

    pub fn one() -> Self {
        StarPoly::constant(GaussianRational::one())
    }

    pub fn constant(c: GaussianRational) -> Self {
        let mut p = StarPoly::default();
        if !c.is_zero() {
            p.terms.insert(Word::empty(), c);
        }
        p
    }

    pub fn generator(gen: u32) -> Self {
        StarPoly::monomial(Word::single(Letter::plain(gen)), GaussianRational::one())
    }

    pub fn monomial(w: Word, c: GaussianRational) -> Self {
        let mut p = StarPoly::default();
        if !c.is_zero() {
            p.terms.insert(w, c);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: &Word) -> GaussianRational {
        self.terms.get(w).cloned().unwrap_or_else(GaussianRational::zero)
    }

    pub fn add_term(&mut self, w: Word, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(w);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(w, c)| (w.clone(), c.neg())).collect();
        StarPoly { terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return StarPoly::zero();
        }
        let terms = self.terms.iter().map(|(w, k)| (w.clone(), k.mul(c))).collect();
        StarPoly { terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = StarPoly::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), c1.mul(c2));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = StarPoly::zero();
        for (w, c) in &self.terms {
            out.add_term(w.adjoint(), c.conj());
        }
        out
    }

    /// Max word length over the terms (0 for constants and the zero poly).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Largest generator index mentioned, if any.
    pub fn max_generator(&self) -> Option<u32> {
        self.terms
            .keys()
            .flat_map(|w| w.0.iter().map(|l| l.gen))
            .max()
    }

    /// `Σ |c_w|`: bounds the norm of the evaluation at contractions.
    pub fn coefficient_norm_bound(&self) -> f64 {
        self.terms.values().map(|c| c.abs_bound()).sum()
    }

    /// Substitutes `assignment[gen]` for each generator, with adjoints mapped
    /// to adjoints. Every mentioned generator must be assigned.
    pub fn substitute(&self, assignment: &dyn Fn(u32) -> Option<StarPoly>) -> Result<StarPoly, PolyError> {
        let mut out = StarPoly::zero();
        for (w, c) in &self.terms {
            let mut acc = StarPoly::constant(c.clone());
            for l in &w.0 {
                let img = assignment(l.gen).ok_or(PolyError::Unassigned(l.gen as usize))?;
                let factor = if l.adjoint { img.adjoint() } else { img };
                acc = acc.mul(&factor);
            }
            out = out.add(&acc);
        }
        Ok(out)
    }

    /// Evaluates the polynomial on algebra elements (one per generator index).
    pub fn eval(&self, assignment: &dyn Fn(u32) -> Option<AlgebraElement>, sig: &Signature) -> Result<AlgebraElement, PolyError> {
        let mut out = AlgebraElement::zero(sig);
        for (w, c) in &self.terms {
            let mut acc = AlgebraElement::identity(sig).scale(c.to_complex());
            for l in &w.0 {
                let x = assignment(l.gen).ok_or(PolyError::Unassigned(l.gen as usize))?;
                let factor = if l.adjoint { x.adjoint() } else { x };
                acc = acc.mul(&factor)?;
            }
            out = out.add(&acc)?;
        }
        Ok(out)
    }

    /// Renders the polynomial using the supplied generator names.
    pub fn display(&self, names: &dyn Fn(u32) -> String) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (w, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                out.push_str(" + ");
            }
            let coef = format!("{c}");
            if w.is_empty() {
                out.push_str(&coef);
                continue;
            }
            if coef != "1" {
                out.push_str(&coef);
                out.push('*');
            }
            for (j, l) in w.0.iter().enumerate() {
                if j > 0 {
                    out.push('*');
                }
                out.push_str(&names(l.gen));
                if l.adjoint {
                    out.push('\'');
                }
            }
        }
        out
    }
}

/// Ordered table of generator names used by the parser and printer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    names: Vec<String>,
}

impl GeneratorSet {
    pub fn new(names: Vec<String>) -> Self {
        GeneratorSet { names }
    }

    /// `u1..un` for the free group on `n` generators.
    pub fn free(n: usize) -> Self {
        GeneratorSet { names: (1..=n).map(|i| format!("u{i}")).collect() }
    }

    /// `u1..un, v1..vn` for direct-product and softened relation sets.
    pub fn product(n: usize) -> Self {
        let mut names: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        names.extend((1..=n).map(|i| format!("v{i}")));
        GeneratorSet { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn name_of(&self, gen: u32) -> String {
        self.names
            .get(gen as usize)
            .cloned()
            .unwrap_or_else(|| format!("g{gen}"))
    }
}

/// Parses a *-polynomial against a generator table.
pub fn parse_poly(src: &str, gens: &GeneratorSet) -> Result<StarPoly, PolyError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, gens };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(PolyError::Parse { pos: p.pos, msg: "trailing input".into() });
    }
    Ok(poly)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    gens: &'a GeneratorSet,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expr(&mut self) -> Result<StarPoly, PolyError> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.bump();
                self.term()?.neg()
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<StarPoly, PolyError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.bump();
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<StarPoly, PolyError> {
        let mut base = self.base()?;
        while self.peek() == Some(b'\'') {
            self.bump();
            base = base.adjoint();
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<StarPoly, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(PolyError::Parse { pos: self.pos, msg: "expected `)`".into() });
                }
                self.bump();
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.integer()?;
                if self.peek() == Some(b'/') {
                    self.bump();
                    let den = self.integer()?;
                    if den.is_zero() {
                        return Err(PolyError::DivisionByZero);
                    }
                    Ok(StarPoly::constant(GaussianRational::new(BigRational::new(num, den), BigRational::zero())))
                } else {
                    Ok(StarPoly::constant(GaussianRational::new(BigRational::from_integer(num), BigRational::zero())))
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let ident = self.ident();
                if ident == "i" {
                    return Ok(StarPoly::constant(GaussianRational::i()));
                }
                match self.gens.index_of(&ident) {
                    Some(g) => Ok(StarPoly::generator(g)),
                    None => {
                        self.pos = start;
                        Err(PolyError::UnknownGenerator(ident))
                    }
                }
            }
            _ => Err(PolyError::Parse { pos: self.pos, msg: "expected factor".into() }),
        }
    }

    fn integer(&mut self) -> Result<BigInt, PolyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PolyError::Parse { pos: self.pos, msg: "expected integer".into() });
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        s.parse::<BigInt>()
            .map_err(|e| PolyError::Parse { pos: start, msg: e.to_string() })
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free2() -> GeneratorSet {
        GeneratorSet::free(2)
    }

    #[test]
    fn parses_hermitian_sum() {
        let p = parse_poly("u1+u1'+u2+u2'", &free2()).unwrap();
        assert_eq!(p.term_count(), 4);
        assert_eq!(p, p.adjoint());
    }

    #[test]
    fn parses_rational_complex_coefficients() {
        let p = parse_poly("(1/2+3/4*i)*u1", &free2()).unwrap();
        let w = Word::single(Letter::plain(0));
        let c = p.coefficient(&w);
        assert_eq!(c.re, BigRational::new(BigInt::from(1), BigInt::from(2)));
        assert_eq!(c.im, BigRational::new(BigInt::from(3), BigInt::from(4)));
    }

    #[test]
    fn adjoint_reverses_words_and_conjugates() {
        let p = parse_poly("i*u1*u2", &free2()).unwrap();
        let q = p.adjoint();
        let w = Word(vec![Letter::star(1), Letter::star(0)]);
        assert_eq!(q.coefficient(&w), GaussianRational::i().neg());
    }

    #[test]
    fn cancellation_yields_zero() {
        let p = parse_poly("u1-u1", &free2()).unwrap();
        assert!(p.is_zero());
        assert_eq!(p, StarPoly::zero());
    }

    #[test]
    fn unknown_generator_is_reported() {
        assert!(matches!(parse_poly("u3", &free2()), Err(PolyError::UnknownGenerator(_))));
    }

    #[test]
    fn product_expansion() {
        let p = parse_poly("(u1+u2)*(u1-u2)", &free2()).unwrap();
        // u1u1 - u1u2 + u2u1 - u2u2
        assert_eq!(p.term_count(), 4);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn display_round_trips_through_parser() {
        let g = free2();
        let p = parse_poly("u1*u2' + 2*u2 - 1/3", &g).unwrap();
        let rendered = p.display(&|i| g.name_of(i));
        let q = parse_poly(&rendered, &g).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn eval_on_scalars() {
        use num_complex::Complex64;
        let g = free2();
        let p = parse_poly("u1*u1' + u2", &g).unwrap();
        let sig = Signature::new(vec![1]).unwrap();
        let vals = [Complex64::new(0.0, 2.0), Complex64::new(-1.0, 0.0)];
        let out = p
            .eval(&|i| Some(AlgebraElement::scalar(vals[i as usize])), &sig)
            .unwrap();
        // |2i|^2 + (-1) = 4 - 1 = 3
        assert!((out.blocks()[0][(0, 0)] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }
}
