//! Nonlocal games, correlation tables, and exact classical values.
//!
//! A game is a pair `(π, D)`: a question distribution on `[k] × [k]` stored as
//! exact rationals, and a binary decision predicate on
//! `[k] × [k] × [n] × [n]`. The value of a game at a correlation `p` is
//! `Σ π(x,y) Σ D(x,y,a,b) p(a,b|x,y)`.
//!
//! Game file format (JSON): `{"k": 2, "n": 2, "pi": [["1/4", ...], ...],
//! "D": [[x, y, a, b, bit], ...]}` with 1-based indices; omitted `D` entries
//! default to 0.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("question and answer counts must be at least 2 (got k={k}, n={n})")]
    TooSmall { k: usize, n: usize },
    #[error("pi table must be {k}x{k}")]
    PiShape { k: usize },
    #[error("pi entries must be nonnegative rationals")]
    PiNegative,
    #[error("pi must sum to 1 exactly, got {sum}")]
    PiNotNormalized { sum: String },
    #[error("D index out of range: ({x},{y},{a},{b}) for k={k}, n={n}")]
    DIndex { x: usize, y: usize, a: usize, b: usize, k: usize, n: usize },
    #[error("D entries must be 0 or 1, got {0}")]
    DNotBinary(i64),
    #[error("correlation has negative entry {value:.3e} at (a={a},b={b},x={x},y={y})")]
    CorrelationNegative { a: usize, b: usize, x: usize, y: usize, value: f64 },
    #[error("correlation at (x={x},y={y}) sums to {sum} (must be 1 within 1e-9)")]
    CorrelationNotNormalized { x: usize, y: usize, sum: f64 },
    #[error("shape mismatch: game is ({k},{n}), correlation is ({ck},{cn})")]
    ShapeMismatch { k: usize, n: usize, ck: usize, cn: usize },
    #[error("enumeration cap exceeded: {strategies} deterministic strategies > cap {cap}")]
    EnumerationCap { strategies: u128, cap: u128 },
    #[error("malformed rational `{0}`")]
    BadRational(String),
    #[error("game file error: {0}")]
    File(String),
}

/// A two-player nonlocal game with `k` questions and `n` answers per player.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalGame {
    k: usize,
    n: usize,
    /// Row-major `k × k` question distribution, exact rationals.
    pi: Vec<BigRational>,
    /// `D[((x·k + y)·n + a)·n + b] ∈ {0, 1}`, 0-based indices.
    decision: Vec<u8>,
}

impl NonlocalGame {
    pub fn new(k: usize, n: usize, pi: Vec<BigRational>, decision: Vec<u8>) -> Result<Self, GameError> {
        if k < 2 || n < 2 {
            return Err(GameError::TooSmall { k, n });
        }
        if pi.len() != k * k {
            return Err(GameError::PiShape { k });
        }
        if pi.iter().any(|q| q.is_negative()) {
            return Err(GameError::PiNegative);
        }
        let sum: BigRational = pi.iter().sum();
        if !sum.is_one() {
            return Err(GameError::PiNotNormalized { sum: sum.to_string() });
        }
        assert_eq!(decision.len(), k * k * n * n, "decision table size");
        if let Some(&bad) = decision.iter().find(|&&b| b > 1) {
            return Err(GameError::DNotBinary(bad as i64));
        }
        Ok(NonlocalGame { k, n, pi, decision })
    }

    pub fn questions(&self) -> usize {
        self.k
    }

    pub fn answers(&self) -> usize {
        self.n
    }

    pub fn pi(&self, x: usize, y: usize) -> &BigRational {
        &self.pi[x * self.k + y]
    }

    pub fn pi_f64(&self, x: usize, y: usize) -> f64 {
        self.pi[x * self.k + y].to_f64().unwrap_or(f64::NAN)
    }

    pub fn decision(&self, x: usize, y: usize, a: usize, b: usize) -> u8 {
        self.decision[((x * self.k + y) * self.n + a) * self.n + b]
    }

    /// Parses the JSON game file format.
    pub fn from_json(src: &str) -> Result<Self, GameError> {
        let file: GameFile = serde_json::from_str(src).map_err(|e| GameError::File(e.to_string()))?;
        file.into_game()
    }

    /// Emits the JSON game file format (only the nonzero `D` entries).
    pub fn to_json(&self) -> String {
        let pi: Vec<Vec<String>> = (0..self.k)
            .map(|x| (0..self.k).map(|y| self.pi(x, y).to_string()).collect())
            .collect();
        let mut d = Vec::new();
        for x in 0..self.k {
            for y in 0..self.k {
                for a in 0..self.n {
                    for b in 0..self.n {
                        if self.decision(x, y, a, b) == 1 {
                            d.push([x + 1, y + 1, a + 1, b + 1, 1]);
                        }
                    }
                }
            }
        }
        let file = GameFile { k: self.k, n: self.n, pi, d: Some(d) };
        serde_json::to_string_pretty(&file).expect("game file serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GameFile {
    k: usize,
    n: usize,
    pi: Vec<Vec<String>>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    d: Option<Vec<[usize; 5]>>,
}

impl GameFile {
    fn into_game(self) -> Result<NonlocalGame, GameError> {
        let k = self.k;
        let n = self.n;
        if self.pi.len() != k || self.pi.iter().any(|row| row.len() != k) {
            return Err(GameError::PiShape { k });
        }
        let mut pi = Vec::with_capacity(k * k);
        for row in &self.pi {
            for cell in row {
                pi.push(parse_rational(cell)?);
            }
        }
        let mut decision = vec![0u8; k * k * n * n];
        for quint in self.d.unwrap_or_default() {
            let [x, y, a, b, bit] = quint;
            if x == 0 || y == 0 || a == 0 || b == 0 || x > k || y > k || a > n || b > n {
                return Err(GameError::DIndex { x, y, a, b, k, n });
            }
            if bit > 1 {
                return Err(GameError::DNotBinary(bit as i64));
            }
            decision[(((x - 1) * k + (y - 1)) * n + (a - 1)) * n + (b - 1)] = bit as u8;
        }
        NonlocalGame::new(k, n, pi, decision)
    }
}

fn parse_rational(s: &str) -> Result<BigRational, GameError> {
    let s = s.trim();
    let parts: Vec<&str> = s.split('/').collect();
    let bad = || GameError::BadRational(s.to_string());
    match parts.as_slice() {
        [num] => num
            .parse::<BigInt>()
            .map(BigRational::from_integer)
            .map_err(|_| bad()),
        [num, den] => {
            let num = num.parse::<BigInt>().map_err(|_| bad())?;
            let den = den.parse::<BigInt>().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(num, den))
        }
        _ => Err(bad()),
    }
}

/// A correlation table `p(a,b|x,y)` with per-question-pair normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    k: usize,
    n: usize,
    /// `p[((a·n + b)·k + x)·k + y]`, 0-based.
    p: Vec<f64>,
}

impl Correlation {
    pub const NEG_TOL: f64 = 1e-12;
    pub const NORM_TOL: f64 = 1e-9;

    pub fn new(k: usize, n: usize, p: Vec<f64>) -> Result<Self, GameError> {
        assert_eq!(p.len(), k * k * n * n, "correlation table size");
        let c = Correlation { k, n, p };
        for x in 0..k {
            for y in 0..k {
                let mut sum = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let v = c.prob(a, b, x, y);
                        if v < -Self::NEG_TOL {
                            return Err(GameError::CorrelationNegative { a, b, x, y, value: v });
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > Self::NORM_TOL {
                    return Err(GameError::CorrelationNotNormalized { x, y, sum });
                }
            }
        }
        Ok(c)
    }

    pub fn questions(&self) -> usize {
        self.k
    }

    pub fn answers(&self) -> usize {
        self.n
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[((a * self.n + b) * self.k + x) * self.k + y]
    }

    /// The deterministic correlation induced by answer functions `f`, `g`.
    pub fn deterministic(k: usize, n: usize, f: &[usize], g: &[usize]) -> Result<Self, GameError> {
        let mut p = vec![0.0; k * k * n * n];
        for x in 0..k {
            for y in 0..k {
                p[((f[x] * n + g[y]) * k + x) * k + y] = 1.0;
            }
        }
        Correlation::new(k, n, p)
    }
}

/// Kahan compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// `val(𝔊, p) = Σ_{x,y} π(x,y) Σ_{a,b} D(x,y,a,b) p(a,b|x,y)`.
pub fn game_value(g: &NonlocalGame, p: &Correlation) -> Result<f64, GameError> {
    if g.questions() != p.questions() || g.answers() != p.answers() {
        return Err(GameError::ShapeMismatch {
            k: g.questions(),
            n: g.answers(),
            ck: p.questions(),
            cn: p.answers(),
        });
    }
    let mut acc = Kahan::default();
    for x in 0..g.k {
        for y in 0..g.k {
            let weight = g.pi_f64(x, y);
            if weight == 0.0 {
                continue;
            }
            for a in 0..g.n {
                for b in 0..g.n {
                    if g.decision(x, y, a, b) == 1 {
                        acc.add(weight * p.prob(a, b, x, y));
                    }
                }
            }
        }
    }
    Ok(acc.value())
}

/// Default cap on the number of deterministic strategies enumerated.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Exact classical value: the max of `game_value` over deterministic
/// strategy pairs, as a rational.
///
/// Alice's answer functions are enumerated (there are `n^k`); for each, Bob's
/// best response decomposes per question, so the joint enumeration stays at
/// `n^k · k · k · n` work while ranging over all `n^(2k)` pairs.
pub fn classical_value(g: &NonlocalGame, cap: u128) -> Result<BigRational, GameError> {
    let k = g.questions();
    let n = g.answers();
    let strategies = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if strategies > cap {
        return Err(GameError::EnumerationCap { strategies, cap });
    }
    let mut best = BigRational::zero();
    let mut f = vec![0usize; k];
    loop {
        // Optimal g decomposes: pick g(y) maximizing Σ_x π(x,y) D(x,y,f(x),b).
        let mut total = BigRational::zero();
        for y in 0..k {
            let mut best_b: Option<BigRational> = None;
            for b in 0..n {
                let mut s = BigRational::zero();
                for x in 0..k {
                    if g.decision(x, y, f[x], b) == 1 {
                        s += g.pi(x, y);
                    }
                }
                if best_b.as_ref().is_none_or(|cur| &s > cur) {
                    best_b = Some(s);
                }
            }
            total += best_b.expect("n >= 2");
        }
        if total > best {
            best = total;
        }
        // Next Alice strategy in odometer order.
        let mut i = 0;
        loop {
            if i == k {
                return Ok(best);
            }
            f[i] += 1;
            if f[i] < n {
                break;
            }
            f[i] = 0;
            i += 1;
        }
    }
}

/// Validation diagnostics for human-authored game files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameDiagnostics {
    /// `|Σ π − 1|` as a decimal string of the exact rational defect.
    pub normalization_defect: Option<String>,
    /// Indices `(x, y, a, b)` of non-binary decision entries (1-based).
    pub binarity_violations: Vec<[usize; 4]>,
}

impl GameDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.normalization_defect.is_none() && self.binarity_violations.is_empty()
    }
}

/// Reports the normalization defect of `pi` and binarity of `D` for raw
/// (unvalidated) tables, mirroring the checks `NonlocalGame::new` enforces.
pub fn validate_game(k: usize, n: usize, pi: &[BigRational], decision: &[i64]) -> GameDiagnostics {
    let mut diag = GameDiagnostics::default();
    let sum: BigRational = pi.iter().sum();
    if !sum.is_one() {
        diag.normalization_defect = Some((sum - BigRational::one()).abs().to_string());
    }
    for x in 0..k {
        for y in 0..k {
            for a in 0..n {
                for b in 0..n {
                    let v = decision[((x * k + y) * n + a) * n + b];
                    if v != 0 && v != 1 {
                        diag.binarity_violations.push([x + 1, y + 1, a + 1, b + 1]);
                    }
                }
            }
        }
    }
    diag
}

/// Built-in benchmark games addressable by name.
pub mod fixtures {
    use super::*;

    /// Names accepted by [`by_name`].
    pub const NAMES: [&str; 4] = ["chsh", "magic-square", "all-win", "no-win"];

    pub fn by_name(name: &str) -> Option<NonlocalGame> {
        match name {
            "chsh" => Some(chsh()),
            "magic-square" => Some(magic_square()),
            "all-win" => Some(all_win()),
            "no-win" => Some(no_win()),
            _ => None,
        }
    }

    /// CHSH: k = n = 2, uniform questions, win iff `a ⊕ b = x ∧ y`.
    pub fn chsh() -> NonlocalGame {
        let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
        let pi = vec![quarter; 4];
        let mut decision = vec![0u8; 16];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if (a ^ b) == (x & y) {
                            decision[((x * 2 + y) * 2 + a) * 2 + b] = 1;
                        }
                    }
                }
            }
        }
        NonlocalGame::new(2, 2, pi, decision).expect("chsh fixture is valid")
    }

    /// Trivial game with `D ≡ 1` (k = n = 2).
    pub fn all_win() -> NonlocalGame {
        let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
        NonlocalGame::new(2, 2, vec![quarter; 4], vec![1u8; 16]).expect("valid")
    }

    /// Trivial game with `D ≡ 0` (k = n = 2).
    pub fn no_win() -> NonlocalGame {
        let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
        NonlocalGame::new(2, 2, vec![quarter; 4], vec![0u8; 16]).expect("valid")
    }

    /// The parity constraints of the 3×3 magic square: Alice fills row `r`
    /// with ±1 entries of even parity (4 choices), Bob fills column `c` with
    /// odd parity (4 choices); they win iff the shared cell agrees.
    ///
    /// Questions 1–3 are rows, 4–6 are columns; π is uniform on row×column
    /// pairs. The fixture's entangled value is 1, its classical value 8/9.
    pub fn magic_square() -> NonlocalGame {
        let k = 6;
        let n = 4;
        let ninth = BigRational::new(BigInt::from(1), BigInt::from(9));
        let mut pi = vec![BigRational::zero(); k * k];
        for r in 0..3 {
            for c in 3..6 {
                pi[r * k + c] = ninth.clone();
            }
        }
        let mut decision = vec![0u8; k * k * n * n];
        let rows = row_assignments();
        let cols = col_assignments();
        for r in 0..3 {
            for c in 3..6 {
                for (a, row_vals) in rows.iter().enumerate() {
                    for (b, col_vals) in cols.iter().enumerate() {
                        // Alice's value for column c-3 vs Bob's value for row r.
                        if row_vals[c - 3] == col_vals[r] {
                            decision[((r * k + c) * n + a) * n + b] = 1;
                        }
                    }
                }
            }
        }
        NonlocalGame::new(k, n, pi, decision).expect("magic square fixture is valid")
    }

    /// The four ±1 triples with even parity (product +1), in a fixed order.
    pub fn row_assignments() -> [[i8; 3]; 4] {
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
    }

    /// The four ±1 triples with odd parity (product −1), in a fixed order.
    pub fn col_assignments() -> [[i8; 3]; 4] {
        [[-1, -1, -1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]]
    }
}
