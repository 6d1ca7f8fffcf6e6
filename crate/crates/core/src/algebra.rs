//! Exact finite-dimensional C*-algebra arithmetic.
//!
//! Elements live in a direct sum of complex matrix algebras `⊕_i M_{d_i}(ℂ)`,
//! represented block by block. The operator norm is the max over blocks of the
//! largest singular value; the minimal tensor product of two block algebras is
//! the block-wise Kronecker product. POVM candidates can be measured for their
//! defect (`povm_residual`) and normalized back onto the POVM set
//! (`povm_repair`).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used by norm and residual computations.
pub const NORM_TOL: f64 = 1e-12;

/// Smallest admissible eigenvalue of the normalizer `S = Σ P_i` in
/// [`povm_repair`]; below this the candidate is rejected as unrepairable.
pub const REPAIR_MIN_EIG: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("signature must contain at least one block, each of dimension >= 1")]
    EmptySignature,
    #[error("block {index} has dimension {got}, signature declares {want}")]
    BlockShape { index: usize, want: usize, got: usize },
    #[error("signature mismatch: {left} vs {right}")]
    SignatureMismatch { left: String, right: String },
    #[error("tensor sum arity mismatch: left has {left} terms, right has {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("POVM candidate must contain at least one element")]
    EmptyPovm,
    #[error("residual too large to repair: min eigenvalue of normalizer is {min_eig:.3e}")]
    ResidualTooLarge { min_eig: f64 },
}

/// Block-dimension signature of a direct sum `⊕_i M_{d_i}(ℂ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(Vec<usize>);

impl Signature {
    pub fn new(dims: Vec<usize>) -> Result<Self, AlgebraError> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(AlgebraError::EmptySignature);
        }
        Ok(Signature(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn block_count(&self) -> usize {
        self.0.len()
    }

    /// Signature of the tensor algebra `(⊕_i M_{d_i}) ⊗ (⊕_j M_{e_j})`,
    /// blocks ordered row-major over `(i, j)`.
    pub fn tensor(&self, other: &Signature) -> Signature {
        let mut dims = Vec::with_capacity(self.0.len() * other.0.len());
        for &d in &self.0 {
            for &e in &other.0 {
                dims.push(d * e);
            }
        }
        Signature(dims)
    }

    /// Total dimension `Σ d_i²` of the algebra as a complex vector space.
    pub fn ambient_dim(&self) -> usize {
        self.0.iter().map(|d| d * d).sum()
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

/// An element of a block-matrix C*-algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    sig: Signature,
    blocks: Vec<DMatrix<Complex64>>,
}

impl AlgebraElement {
    pub fn new(sig: Signature, blocks: Vec<DMatrix<Complex64>>) -> Result<Self, AlgebraError> {
        if blocks.len() != sig.block_count() {
            return Err(AlgebraError::BlockShape {
                index: blocks.len().min(sig.block_count()),
                want: sig.block_count(),
                got: blocks.len(),
            });
        }
        for (i, (b, &d)) in blocks.iter().zip(sig.dims()).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(AlgebraError::BlockShape { index: i, want: d, got: b.nrows().max(b.ncols()) });
            }
        }
        Ok(AlgebraElement { sig, blocks })
    }

    pub fn zero(sig: &Signature) -> Self {
        let blocks = sig.dims().iter().map(|&d| DMatrix::zeros(d, d)).collect();
        AlgebraElement { sig: sig.clone(), blocks }
    }

    pub fn identity(sig: &Signature) -> Self {
        let blocks = sig.dims().iter().map(|&d| DMatrix::identity(d, d)).collect();
        AlgebraElement { sig: sig.clone(), blocks }
    }

    /// Single-block element from a square complex matrix.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self, AlgebraError> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d {
            return Err(AlgebraError::EmptySignature);
        }
        let sig = Signature::new(vec![d])?;
        Ok(AlgebraElement { sig, blocks: vec![m] })
    }

    /// Single-block scalar element (dimension-1 algebra).
    pub fn scalar(z: Complex64) -> Self {
        AlgebraElement {
            sig: Signature(vec![1]),
            blocks: vec![DMatrix::from_element(1, 1, z)],
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    fn check_same_sig(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.sig != other.sig {
            return Err(AlgebraError::SignatureMismatch {
                left: self.sig.to_string(),
                right: other.sig.to_string(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_sig(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a + b)
            .collect();
        Ok(AlgebraElement { sig: self.sig.clone(), blocks })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_sig(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a - b)
            .collect();
        Ok(AlgebraElement { sig: self.sig.clone(), blocks })
    }

    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_sig(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * b)
            .collect();
        Ok(AlgebraElement { sig: self.sig.clone(), blocks })
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let blocks = self.blocks.iter().map(|b| b.map(|x| x * z)).collect();
        AlgebraElement { sig: self.sig.clone(), blocks }
    }

    pub fn adjoint(&self) -> Self {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        AlgebraElement { sig: self.sig.clone(), blocks }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.blocks
            .iter()
            .all(|b| (b - b.adjoint()).iter().all(|z| z.norm() <= tol))
    }

    /// Hermitian part `(x + x*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| (b + b.adjoint()).map(|z| z * Complex64::new(0.5, 0.0)))
            .collect();
        AlgebraElement { sig: self.sig.clone(), blocks }
    }

    /// Applies `f` to the (real) eigenvalues of a Hermitian element; the
    /// non-Hermitian residue is discarded by first taking the Hermitian part.
    fn hermitian_calculus(&self, f: impl Fn(f64) -> f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let h = (b + b.adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
                let eig = SymmetricEigen::new(h);
                let q = &eig.eigenvectors;
                let mut diag = DMatrix::zeros(b.nrows(), b.ncols());
                for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                    diag[(i, i)] = Complex64::new(f(ev), 0.0);
                }
                q * diag * q.adjoint()
            })
            .collect();
        AlgebraElement { sig: self.sig.clone(), blocks }
    }

    /// Positive part of the Hermitian part: negative eigenvalues clipped to 0.
    pub fn positive_part(&self) -> Self {
        self.hermitian_calculus(|t| t.max(0.0))
    }

    /// Principal square root of the positive part.
    pub fn sqrt_positive(&self) -> Self {
        self.hermitian_calculus(|t| t.max(0.0).sqrt())
    }

    /// Inverse square root of a positive element; rejected when any eigenvalue
    /// sits below `floor`.
    fn inv_sqrt_checked(&self, floor: f64) -> Result<Self, AlgebraError> {
        let min_eig = self.min_eigenvalue();
        if min_eig < floor {
            return Err(AlgebraError::ResidualTooLarge { min_eig });
        }
        Ok(self.hermitian_calculus(|t| 1.0 / t.sqrt()))
    }

    /// Smallest eigenvalue of the Hermitian part across all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut min_eig = f64::INFINITY;
        for b in &self.blocks {
            let h = (b + b.adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
            let eig = SymmetricEigen::new(h);
            for &ev in eig.eigenvalues.iter() {
                min_eig = min_eig.min(ev);
            }
        }
        min_eig
    }
}

/// Operator norm: max over blocks of the largest singular value.
pub fn op_norm(x: &AlgebraElement) -> f64 {
    x.blocks()
        .iter()
        .map(|b| {
            // Largest singular value via the Hermitian eigenproblem of b*b.
            let g = b.adjoint() * b;
            let eig = SymmetricEigen::new(g);
            eig.eigenvalues
                .iter()
                .fold(0.0_f64, |acc, &ev| acc.max(ev.max(0.0)))
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// `Σ_k a_k ⊗ b_k` in the minimal tensor product of the two block algebras.
///
/// For direct sums of matrix algebras the minimal tensor product is realized
/// block-wise: block `(i, j)` of the result is `Σ_k a_k[i] ⊗ b_k[j]`.
pub fn min_tensor(a: &[AlgebraElement], b: &[AlgebraElement]) -> Result<AlgebraElement, AlgebraError> {
    if a.len() != b.len() {
        return Err(AlgebraError::ArityMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(AlgebraError::EmptyPovm);
    }
    for x in &a[1..] {
        a[0].check_same_sig(x)?;
    }
    for y in &b[1..] {
        b[0].check_same_sig(y)?;
    }
    let sig = a[0].signature().tensor(b[0].signature());
    let mut blocks = Vec::with_capacity(sig.block_count());
    for (i, &d) in a[0].signature().dims().iter().enumerate() {
        for (j, &e) in b[0].signature().dims().iter().enumerate() {
            let mut acc = DMatrix::<Complex64>::zeros(d * e, d * e);
            for k in 0..a.len() {
                acc += a[k].blocks()[i].kronecker(&b[k].blocks()[j]);
            }
            blocks.push(acc);
        }
    }
    AlgebraElement::new(sig, blocks)
}

/// The minimal-tensor-norm predicate `‖Σ_k a_k ⊗ b_k‖`.
///
/// Finite-dimensional algebras are nuclear, so this value is simultaneously
/// the maximal tensor norm of the same sum.
pub fn p_min(a: &[AlgebraElement], b: &[AlgebraElement]) -> Result<f64, AlgebraError> {
    Ok(op_norm(&min_tensor(a, b)?))
}

/// A tuple of algebra elements proposed as a POVM.
#[derive(Debug, Clone)]
pub struct PovmCandidate {
    elements: Vec<AlgebraElement>,
}

impl PovmCandidate {
    pub fn new(elements: Vec<AlgebraElement>) -> Result<Self, AlgebraError> {
        if elements.is_empty() {
            return Err(AlgebraError::EmptyPovm);
        }
        for x in &elements[1..] {
            elements[0].check_same_sig(x)?;
        }
        Ok(PovmCandidate { elements })
    }

    pub fn elements(&self) -> &[AlgebraElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn signature(&self) -> &Signature {
        self.elements[0].signature()
    }

    /// Sum of all elements.
    pub fn sum(&self) -> AlgebraElement {
        let mut acc = self.elements[0].clone();
        for x in &self.elements[1..] {
            acc = acc.add(x).expect("same signature by construction");
        }
        acc
    }
}

/// Defect of a POVM candidate, evaluated at the canonical square-root
/// witnesses `y_i = √((x_i)₊)`.
///
/// Returns `max( max_i ‖x_i − y_i y_i*‖, ‖Σ_i x_i − 1‖ )`. This upper-bounds
/// the infimum over all witness tuples and vanishes exactly on POVMs.
pub fn povm_residual(c: &PovmCandidate) -> f64 {
    let sig = c.signature();
    let mut worst = 0.0_f64;
    for x in c.elements() {
        let y = x.sqrt_positive();
        let yy = y.mul(&y.adjoint()).expect("same signature");
        worst = worst.max(op_norm(&x.sub(&yy).expect("same signature")));
    }
    let defect = c.sum().sub(&AlgebraElement::identity(sig)).expect("same signature");
    worst.max(op_norm(&defect))
}

/// Repairs an almost-POVM into an exact one.
///
/// Each element is clipped to its positive part `P_i`; with `S = Σ P_i` the
/// output is `S^{-1/2} P_i S^{-1/2}`, which is positive and sums to the
/// identity exactly. Fails when `S` is near-singular (residual too large).
pub fn povm_repair(c: &PovmCandidate) -> Result<PovmCandidate, AlgebraError> {
    let clipped: Vec<AlgebraElement> = c.elements().iter().map(|x| x.positive_part()).collect();
    let mut s = clipped[0].clone();
    for p in &clipped[1..] {
        s = s.add(p)?;
    }
    let s_inv_sqrt = s.inv_sqrt_checked(REPAIR_MIN_EIG)?;
    let repaired = clipped
        .into_iter()
        .map(|p| {
            s_inv_sqrt
                .mul(&p)
                .and_then(|m| m.mul(&s_inv_sqrt))
                // Conjugation keeps hermiticity up to rounding; resymmetrize.
                .map(|m| m.hermitian_part())
        })
        .collect::<Result<Vec<_>, _>>()?;
    PovmCandidate::new(repaired)
}

/// Max distance `max_i ‖a_i − b_i‖` between two candidates of equal length.
pub fn povm_distance(a: &PovmCandidate, b: &PovmCandidate) -> Result<f64, AlgebraError> {
    if a.len() != b.len() {
        return Err(AlgebraError::ArityMismatch { left: a.len(), right: b.len() });
    }
    let mut worst = 0.0_f64;
    for (x, y) in a.elements().iter().zip(b.elements()) {
        worst = worst.max(op_norm(&x.sub(y)?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cm(rows: usize, cols: usize, data: &[(f64, f64)]) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            rows,
            cols,
            &data.iter().map(|&(re, im)| Complex64::new(re, im)).collect::<Vec<_>>(),
        )
    }

    fn pauli_x() -> AlgebraElement {
        AlgebraElement::from_matrix(cm(2, 2, &[(0., 0.), (1., 0.), (1., 0.), (0., 0.)])).unwrap()
    }

    fn pauli_z() -> AlgebraElement {
        AlgebraElement::from_matrix(cm(2, 2, &[(1., 0.), (0., 0.), (0., 0.), (-1., 0.)])).unwrap()
    }

    #[test]
    fn op_norm_identity_is_one() {
        let sig = Signature::new(vec![2, 3]).unwrap();
        assert_abs_diff_eq!(op_norm(&AlgebraElement::identity(&sig)), 1.0, epsilon = NORM_TOL);
    }

    #[test]
    fn op_norm_zero_is_zero() {
        let sig = Signature::new(vec![4]).unwrap();
        assert_eq!(op_norm(&AlgebraElement::zero(&sig)), 0.0);
    }

    #[test]
    fn op_norm_nilpotent_block() {
        // x = [[0,2],[0,0]]: x*x = diag(0,4), so the norm is 2.
        let x = AlgebraElement::from_matrix(cm(2, 2, &[(0., 0.), (2., 0.), (0., 0.), (0., 0.)])).unwrap();
        assert_abs_diff_eq!(op_norm(&x), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn min_tensor_identities() {
        let one = AlgebraElement::scalar(Complex64::new(1.0, 0.0));
        let t = min_tensor(&[one.clone()], &[one]).unwrap();
        assert_abs_diff_eq!(op_norm(&t), 1.0, epsilon = NORM_TOL);
    }

    #[test]
    fn min_tensor_is_kronecker_for_single_term() {
        let x = pauli_x();
        let z = pauli_z();
        let t = min_tensor(std::slice::from_ref(&x), std::slice::from_ref(&z)).unwrap();
        let expect = x.blocks()[0].kronecker(&z.blocks()[0]);
        assert_eq!(t.blocks()[0], expect);
    }

    #[test]
    fn min_tensor_pauli_sum_assembles() {
        let t = min_tensor(&[pauli_x(), pauli_z()], &[pauli_x(), pauli_z()]).unwrap();
        let expect = pauli_x().blocks()[0].kronecker(&pauli_x().blocks()[0])
            + pauli_z().blocks()[0].kronecker(&pauli_z().blocks()[0]);
        assert_eq!(t.blocks()[0], expect);
    }

    #[test]
    fn p_min_pauli_sum_is_two() {
        // Eigenvalues of X⊗X + Z⊗Z are {2, 0, 0, -2}.
        let v = p_min(&[pauli_x(), pauli_z()], &[pauli_x(), pauli_z()]).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn p_min_elementary_tensor_multiplicative() {
        let x = AlgebraElement::from_matrix(cm(2, 2, &[(0.3, 0.1), (0., 0.5), (1., 0.), (0., 0.)])).unwrap();
        let y = AlgebraElement::from_matrix(cm(2, 2, &[(0., 0.), (2., 0.), (0., 0.), (0., 0.)])).unwrap();
        let v = p_min(std::slice::from_ref(&x), std::slice::from_ref(&y)).unwrap();
        assert_abs_diff_eq!(v, op_norm(&x) * op_norm(&y), epsilon = 1e-10);
    }

    #[test]
    fn residual_zero_on_exact_povm() {
        let sig = Signature::new(vec![2]).unwrap();
        let e0 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(1., 0.), (0., 0.), (0., 0.), (0., 0.)])]).unwrap();
        let e1 = AlgebraElement::new(sig, vec![cm(2, 2, &[(0., 0.), (0., 0.), (0., 0.), (1., 0.)])]).unwrap();
        let c = PovmCandidate::new(vec![e0, e1]).unwrap();
        assert!(povm_residual(&c) <= NORM_TOL);
    }

    #[test]
    fn residual_detects_sum_defect() {
        // {diag(1.1, 0), diag(0, 0.9)}: the square-root term vanishes and the
        // sum defect is ‖diag(0.1, -0.1)‖ = 0.1.
        let sig = Signature::new(vec![2]).unwrap();
        let e0 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(1.1, 0.), (0., 0.), (0., 0.), (0., 0.)])]).unwrap();
        let e1 = AlgebraElement::new(sig, vec![cm(2, 2, &[(0., 0.), (0., 0.), (0., 0.), (0.9, 0.)])]).unwrap();
        let c = PovmCandidate::new(vec![e0, e1]).unwrap();
        assert_abs_diff_eq!(povm_residual(&c), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn residual_of_all_zero_is_one() {
        let sig = Signature::new(vec![3]).unwrap();
        let c = PovmCandidate::new(vec![AlgebraElement::zero(&sig); 4]).unwrap();
        assert_abs_diff_eq!(povm_residual(&c), 1.0, epsilon = NORM_TOL);
    }

    #[test]
    fn repair_fixes_diagonal_example() {
        let sig = Signature::new(vec![2]).unwrap();
        let e0 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(1.1, 0.), (0., 0.), (0., 0.), (0., 0.)])]).unwrap();
        let e1 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(0., 0.), (0., 0.), (0., 0.), (0.9, 0.)])]).unwrap();
        let c = PovmCandidate::new(vec![e0, e1]).unwrap();
        let fixed = povm_repair(&c).unwrap();
        assert!(povm_residual(&fixed) <= NORM_TOL);
        // S = diag(1.1, 0.9), so the conjugation recovers diag(1,0), diag(0,1).
        let want0 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(1., 0.), (0., 0.), (0., 0.), (0., 0.)])]).unwrap();
        let want1 = AlgebraElement::new(sig, vec![cm(2, 2, &[(0., 0.), (0., 0.), (0., 0.), (1., 0.)])]).unwrap();
        assert!(op_norm(&fixed.elements()[0].sub(&want0).unwrap()) <= 1e-12);
        assert!(op_norm(&fixed.elements()[1].sub(&want1).unwrap()) <= 1e-12);
    }

    #[test]
    fn repair_scalar_example() {
        // n=2 scalars {-0.05, 1.05}: positive parts {0, 1.05}, S = 1.05.
        let c = PovmCandidate::new(vec![
            AlgebraElement::scalar(Complex64::new(-0.05, 0.0)),
            AlgebraElement::scalar(Complex64::new(1.05, 0.0)),
        ])
        .unwrap();
        let fixed = povm_repair(&c).unwrap();
        assert_abs_diff_eq!(fixed.elements()[0].blocks()[0][(0, 0)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fixed.elements()[1].blocks()[0][(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn repair_is_fixed_point_on_exact_povm() {
        let sig = Signature::new(vec![2]).unwrap();
        let e0 = AlgebraElement::new(sig.clone(), vec![cm(2, 2, &[(0.5, 0.), (0.5, 0.), (0.5, 0.), (0.5, 0.)])]).unwrap();
        let e1 = AlgebraElement::new(sig, vec![cm(2, 2, &[(0.5, 0.), (-0.5, 0.), (-0.5, 0.), (0.5, 0.)])]).unwrap();
        let c = PovmCandidate::new(vec![e0, e1]).unwrap();
        assert!(povm_residual(&c) <= 1e-12);
        let fixed = povm_repair(&c).unwrap();
        assert!(povm_distance(&c, &fixed).unwrap() <= 1e-12);
    }

    #[test]
    fn repair_rejects_unrepairable() {
        let sig = Signature::new(vec![2]).unwrap();
        let c = PovmCandidate::new(vec![AlgebraElement::zero(&sig); 2]).unwrap();
        assert!(matches!(povm_repair(&c), Err(AlgebraError::ResidualTooLarge { .. })));
    }

    #[test]
    fn signature_rejects_zero_dims() {
        assert!(Signature::new(vec![2, 0]).is_err());
        assert!(Signature::new(vec![]).is_err());
    }

    #[test]
    fn arithmetic_rejects_signature_mismatch() {
        let a = AlgebraElement::identity(&Signature::new(vec![2]).unwrap());
        let b = AlgebraElement::identity(&Signature::new(vec![3]).unwrap());
        assert!(a.add(&b).is_err());
        assert!(min_tensor(&[a.clone(), b.clone()], &[a, b]).is_err());
    }
}
