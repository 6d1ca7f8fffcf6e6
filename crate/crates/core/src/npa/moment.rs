//! Moment-matrix relaxations over a monomial basis.
//!
//! Given a canonical word basis `W`, the moment matrix is `M[u,w] = y(u* w)`
//! where `y` is an unknown linear functional with `y(1) = 1` and
//! `y(w*) = conj(y(w))`. Words related by the rewrite system share one moment
//! variable, split into real and imaginary parts; the Hermitian PSD
//! constraint is lowered to a real symmetric one through the standard 2×2
//! embedding `[[A, −B], [B, A]]`. Localizing blocks impose
//! `M_q[g,h] = y(g* q h) ⪰ 0` for relation polynomials `q`.
//!
//! Every variable is a moment of a product of contractions, so `|y| ≤ 1`;
//! `certified_max` exploits this to inflate the solver's dual bound into a
//! bound valid regardless of how accurately the SDP was solved: for any
//! feasible moment vector, `obj(y) ≤ ⟨F_0, Y⁺⟩ + Σ_i |c_i + ⟨F_i, Y⁺⟩|` with
//! `Y⁺` the eigenvalue-clipped PSD projection of the returned dual matrix.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::poly::Word;
use crate::sdp::{self, BlockShape, CertReport, SdpInstance, SdpSolution, SdpStatus, Sense, SparseSymMatrix};

use super::words::{Canon, RewriteSystem};
use super::NpaError;

/// One moment class: a canonical word equivalent to its adjoint class rep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentClass {
    pub rep: Word,
    pub hermitian: bool,
    pub re_var: Option<usize>,
    pub im_var: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    pub basis: Vec<Word>,
    pub classes: Vec<MomentClass>,
    pub instance: SdpInstance,
    pub objective_constant: f64,
}

/// A complex linear form in moment values: `constant + Σ coef_w · y(w)` over
/// canonical words.
#[derive(Debug, Clone, Default)]
pub struct MomentForm {
    pub constant: Complex64,
    pub terms: HashMap<Word, Complex64>,
}

impl MomentForm {
    pub fn add_word(&mut self, rs: &RewriteSystem, w: &Word, coef: Complex64) {
        match rs.canon(w) {
            Canon::Zero => {}
            Canon::Word(c) => {
                if c.is_empty() {
                    self.constant += coef;
                } else {
                    *self.terms.entry(c).or_insert(Complex64::new(0.0, 0.0)) += coef;
                }
            }
        }
    }
}

struct ClassRegistry<'a> {
    rs: &'a RewriteSystem,
    classes: Vec<MomentClass>,
    by_word: HashMap<Word, (usize, bool)>,
}

impl<'a> ClassRegistry<'a> {
    fn new(rs: &'a RewriteSystem) -> Self {
        ClassRegistry { rs, classes: Vec::new(), by_word: HashMap::new() }
    }

    /// Returns (class id, conjugated) for a canonical nonunit word.
    fn intern(&mut self, w: &Word) -> (usize, bool) {
        if let Some(&hit) = self.by_word.get(w) {
            return hit;
        }
        let adj = match self.rs.canon_adjoint(w) {
            Canon::Word(a) => a,
            Canon::Zero => unreachable!("adjoint of a nonzero canonical word is nonzero"),
        };
        let hermitian = adj == *w;
        let rep = if adj < *w { adj.clone() } else { w.clone() };
        let id = self.classes.len();
        self.classes.push(MomentClass { rep: rep.clone(), hermitian, re_var: None, im_var: None });
        self.by_word.insert(rep.clone(), (id, false));
        if !hermitian {
            self.by_word.insert(if rep == *w { adj } else { w.clone() }, (id, true));
        }
        *self.by_word.get(w).expect("just inserted")
    }
}

/// Accumulates per-variable sparse symmetric coefficient matrices.
struct FBuilder {
    entries: Vec<HashMap<(usize, usize, usize), f64>>,
}

impl FBuilder {
    fn new(num_vars: usize) -> Self {
        FBuilder { entries: (0..=num_vars).map(|_| HashMap::new()).collect() }
    }

    fn add(&mut self, var: usize, block: usize, r: usize, c: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let key = if r <= c { (block, r, c) } else { (block, c, r) };
        *self.entries[var].entry(key).or_insert(0.0) += v;
    }

    fn finish(self) -> Vec<SparseSymMatrix> {
        self.entries
            .into_iter()
            .map(|m| {
                let mut sm = SparseSymMatrix::new();
                let mut keys: Vec<_> = m.into_iter().collect();
                keys.sort_by_key(|&((b, r, c), _)| (b, r, c));
                for ((b, r, c), v) in keys {
                    if v != 0.0 {
                        sm.push(b, r, c, v);
                    }
                }
                sm
            })
            .collect()
    }
}

/// Builds the relaxation for `max objective(y)` over the moment cone.
///
/// `localizers` are pairs `(q, loc_basis)`: for each, the block
/// `[y(g* q h)]_{g,h ∈ loc_basis}` is constrained PSD, with `q` given as
/// canonical word/coefficient pairs.
pub fn build_moment_relaxation(
    rs: &RewriteSystem,
    basis: &[Word],
    objective: &MomentForm,
    localizers: &[(Vec<(Word, Complex64)>, Vec<Word>)],
) -> Result<MomentRelaxation, NpaError> {
    rs.check_confluence()?;
    let mut registry = ClassRegistry::new(rs);

    // Entry cache: (block, i, j) -> complex linear form over class vars.
    // Collect all entries first so the class set (and thus variable count)
    // is known before coefficient matrices are laid out.
    struct Entry {
        block: usize,
        i: usize,
        j: usize,
        constant: Complex64,
        terms: Vec<(usize, bool, Complex64)>,
    }
    let mut entries: Vec<Entry> = Vec::new();

    let mut push_pair = |registry: &mut ClassRegistry,
                         entries: &mut Vec<Entry>,
                         block: usize,
                         i: usize,
                         j: usize,
                         form_terms: &HashMap<Word, Complex64>,
                         constant: Complex64| {
        let mut terms = Vec::with_capacity(form_terms.len());
        for (w, coef) in form_terms {
            let (cid, conj) = registry.intern(w);
            terms.push((cid, conj, *coef));
        }
        entries.push(Entry { block, i, j, constant, terms });
    };

    // Main moment block.
    let s = basis.len();
    for i in 0..s {
        for j in i..s {
            let prod = rs.alphabet.adjoint(&basis[i]).concat(&basis[j]);
            let mut form = MomentForm::default();
            form.add_word(rs, &prod, Complex64::new(1.0, 0.0));
            push_pair(&mut registry, &mut entries, 0, i, j, &form.terms, form.constant);
        }
    }

    // Localizing blocks.
    for (bi, (q_terms, loc_basis)) in localizers.iter().enumerate() {
        let t = loc_basis.len();
        for i in 0..t {
            for j in i..t {
                let gi_star = rs.alphabet.adjoint(&loc_basis[i]);
                let mut form = MomentForm::default();
                for (qw, qc) in q_terms {
                    let w = gi_star.concat(qw).concat(&loc_basis[j]);
                    form.add_word(rs, &w, *qc);
                }
                push_pair(&mut registry, &mut entries, 1 + bi, i, j, &form.terms, form.constant);
            }
        }
    }

    // Objective classes must exist too.
    let mut obj_terms: Vec<(usize, bool, Complex64)> = Vec::new();
    for (w, coef) in &objective.terms {
        let (cid, conj) = registry.intern(w);
        obj_terms.push((cid, conj, *coef));
    }

    // Assign variables: one Re per class, one Im per non-Hermitian class.
    let mut num_vars = 0usize;
    for class in &mut registry.classes {
        class.re_var = Some(num_vars);
        num_vars += 1;
        if !class.hermitian {
            class.im_var = Some(num_vars);
            num_vars += 1;
        }
    }
    let classes = registry.classes;

    // Every variable must be constrained by some PSD block; a moment class
    // appearing only in the objective would make the relaxation unbounded.
    {
        let mut seen = vec![false; num_vars];
        for e in &entries {
            for &(cid, _, _) in &e.terms {
                seen[classes[cid].re_var.unwrap()] = true;
                if let Some(iv) = classes[cid].im_var {
                    seen[iv] = true;
                }
            }
        }
        for &(cid, _, _) in &obj_terms {
            if !seen[classes[cid].re_var.unwrap()] {
                return Err(NpaError::InsufficientDegree { word: format!("{:?}", classes[cid].rep) });
            }
        }
    }

    // Block shape: each complex block of size s becomes real 2s.
    let mut sizes = vec![2 * s];
    for (_, loc_basis) in localizers {
        sizes.push(2 * loc_basis.len());
    }
    let shape = BlockShape(sizes);

    let mut fb = FBuilder::new(num_vars);
    let emit = |fb: &mut FBuilder, var: usize, block: usize, bs: usize, i: usize, j: usize, alpha: f64, beta: f64| {
        // Complex entry alpha + i beta at (i, j), i <= j, of a Hermitian
        // block of size bs, into the 2bs real embedding.
        fb.add(var, block, i, j, alpha);
        fb.add(var, block, i + bs, j + bs, alpha);
        if i != j || beta != 0.0 {
            fb.add(var, block, i, j + bs, -beta);
            fb.add(var, block, j, i + bs, beta);
        }
    };

    let block_size = |block: usize| -> usize { shape.0[block] / 2 };

    for e in &entries {
        let bs = block_size(e.block);
        // Constant part (F_0 is var index 0 in the builder).
        emit(&mut fb, 0, e.block, bs, e.i, e.j, e.constant.re, e.constant.im);
        for &(cid, conj, coef) in &e.terms {
            let class = &classes[cid];
            let re_var = class.re_var.unwrap() + 1;
            // y = a + ib; entry contribution coef·y or coef·conj(y):
            //   Re = coef.re·a ∓ coef.im·b, Im = coef.im·a ± coef.re·b.
            emit(&mut fb, re_var, e.block, bs, e.i, e.j, coef.re, coef.im);
            if let Some(iv) = class.im_var {
                let sign = if conj { -1.0 } else { 1.0 };
                emit(&mut fb, iv + 1, e.block, bs, e.i, e.j, -coef.im * sign, coef.re * sign);
            }
        }
    }

    // Objective vector: real part of constant + Σ coef·y.
    let mut c_vec = vec![0.0; num_vars];
    for &(cid, conj, coef) in &obj_terms {
        let class = &classes[cid];
        c_vec[class.re_var.unwrap()] += coef.re;
        if let Some(iv) = class.im_var {
            let sign = if conj { -1.0 } else { 1.0 };
            c_vec[iv] += -coef.im * sign;
        }
    }

    let f = fb.finish();
    let instance = SdpInstance::new(Sense::Max, shape, c_vec, f)?;
    Ok(MomentRelaxation {
        basis: basis.to_vec(),
        classes,
        instance,
        objective_constant: objective.constant.re,
    })
}

/// Serializable SDP certificate: the instance, the solution, and the
/// independent certification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpCertificate {
    pub instance: SdpInstance,
    pub solution: SdpSolution,
    pub report: CertReport,
}

impl SdpCertificate {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("certificate serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        hex::encode(h.finalize())
    }
}

/// A bound together with its certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifiedBound {
    /// Rigorous bound (already inflated by the certificate residuals).
    pub value: f64,
    /// Raw solver objective before inflation.
    pub raw: f64,
    /// Duality gap reported by the solver.
    pub gap: f64,
    pub certificate: SdpCertificate,
}

/// Solves the relaxation and returns a rigorous upper bound on
/// `constant + max objective`.
pub fn certified_max(relaxation: &MomentRelaxation, tol: f64, max_iter: usize) -> Result<CertifiedBound, NpaError> {
    let inst = &relaxation.instance;
    let solution = sdp::solve(inst, tol, max_iter)?;
    if solution.status != SdpStatus::Optimal {
        return Err(NpaError::SdpNotOptimal(solution.status));
    }
    let report = sdp::certify(inst, &solution, tol.max(1e-7) * 10.0);
    if !report.ok {
        return Err(NpaError::CertificationFailed(format!("{report:?}")));
    }
    // Rigorous inflation: project the dual matrix to PSD, then
    //   c·x ≤ ⟨F_0, Y⁺⟩ + Σ_i |c_i + ⟨F_i, Y⁺⟩| · 1
    // for every feasible x with |x_i| ≤ 1 (moment variables are bounded by 1
    // because all basis letters are contractions).
    let y_plus = solution.dual_matrix.psd_projection();
    let f0_dot = {
        let mut acc = 0.0;
        acc += inst.f[0].dot(&y_plus);
        acc
    };
    let mut inflation = 0.0;
    for i in 0..inst.num_vars() {
        inflation += (inst.objective[i] + inst.f[i + 1].dot(&y_plus)).abs();
    }
    let value = relaxation.objective_constant + f0_dot + inflation;
    let raw = relaxation.objective_constant + solution.objective;
    let gap = solution.gap;
    let certificate = SdpCertificate { instance: inst.clone(), solution, report };
    Ok(CertifiedBound { value, raw, gap, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Letter, Word};

    #[test]
    fn unit_objective_gives_one() {
        // max y(u1* u1) = y(1) = 1 over the free group.
        let rs = RewriteSystem::free_group(2);
        let letters = rs.alphabet.letters();
        let basis = rs.enumerate_basis(&letters, 1, 100).unwrap();
        let mut obj = MomentForm::default();
        obj.add_word(&rs, &Word(vec![Letter::star(0), Letter::plain(0)]), Complex64::new(1.0, 0.0));
        assert!((obj.constant.re - 1.0).abs() < 1e-15, "u1*u1 reduces to 1");
        let relax = build_moment_relaxation(&rs, &basis, &obj, &[]).unwrap();
        let bound = certified_max(&relax, 1e-8, 100).unwrap();
        assert!((bound.value - 1.0).abs() < 1e-6, "value {}", bound.value);
    }

    #[test]
    fn hermitian_sum_reaches_sixteen() {
        // p = u1 + u1* + u2 + u2*: max y(p*p) = 16 at degree 2 (t = 1).
        let rs = RewriteSystem::free_group(2);
        let letters = rs.alphabet.letters();
        let basis = rs.enumerate_basis(&letters, 1, 100).unwrap();
        let mut obj = MomentForm::default();
        let p_letters = [Letter::plain(0), Letter::star(0), Letter::plain(1), Letter::star(1)];
        for a in p_letters {
            for b in p_letters {
                obj.add_word(&rs, &Word(vec![a.inverse(), b]), Complex64::new(1.0, 0.0));
            }
        }
        assert!((obj.constant.re - 4.0).abs() < 1e-15);
        let relax = build_moment_relaxation(&rs, &basis, &obj, &[]).unwrap();
        let bound = certified_max(&relax, 1e-8, 100).unwrap();
        assert!((bound.raw - 16.0).abs() < 1e-5, "raw {}", bound.raw);
        assert!(bound.value >= 16.0 - 1e-9, "rigorous bound must dominate the optimum");
        assert!(bound.value <= 16.0 + 1e-4);
    }

    #[test]
    fn localizer_caps_commutator_moment() {
        // Localizer eps^2 - c*c with c = [u, v] forces y(c*c) <= eps^2 even
        // though the main block alone would allow 4.
        let rs = RewriteSystem::soft_group(1);
        let letters = rs.alphabet.letters();
        let basis = rs.enumerate_basis(&letters, 2, 1000).unwrap();
        let eps = 0.5;
        // c = uv - vu over generators u=0, v=1.
        let u = Letter::plain(0);
        let v = Letter::plain(1);
        let mut cstar_c: Vec<(Word, Complex64)> = Vec::new();
        // (uv - vu)*(uv - vu) expanded formally.
        let terms: [(Vec<Letter>, f64); 2] = [(vec![u, v], 1.0), (vec![v, u], -1.0)];
        for (w1, c1) in &terms {
            for (w2, c2) in &terms {
                let mut w = Word(w1.clone()).adjoint();
                w = w.concat(&Word(w2.clone()));
                cstar_c.push((w, Complex64::new(c1 * c2, 0.0)));
            }
        }
        let mut q: Vec<(Word, Complex64)> = vec![(Word::empty(), Complex64::new(eps * eps, 0.0))];
        for (w, c) in &cstar_c {
            q.push((w.clone(), -c));
        }
        let mut obj = MomentForm::default();
        for (w, c) in &cstar_c {
            obj.add_word(&rs, w, *c);
        }
        let relax = build_moment_relaxation(&rs, &basis, &obj, &[(q, vec![Word::empty()])]).unwrap();
        let bound = certified_max(&relax, 1e-8, 200).unwrap();
        assert!(bound.value <= eps * eps + 1e-5, "value {}", bound.value);
        assert!(bound.value >= -1e-9);
    }

    #[test]
    fn insufficient_degree_is_detected() {
        // Objective over length-4 words with a length-1 basis cannot be
        // constrained by the moment matrix.
        let rs = RewriteSystem::free_group(1);
        let basis = vec![Word::empty()];
        let mut obj = MomentForm::default();
        obj.add_word(
            &rs,
            &Word(vec![Letter::plain(0), Letter::plain(0)]),
            Complex64::new(1.0, 0.0),
        );
        assert!(matches!(
            build_moment_relaxation(&rs, &basis, &obj, &[]),
            Err(NpaError::InsufficientDegree { .. })
        ));
    }
}
