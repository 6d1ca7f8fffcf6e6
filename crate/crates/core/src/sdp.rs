//! Dense semidefinite programming over block-diagonal symmetric matrices.
//!
//! Instances are stated in linear-matrix-inequality form: optimize `c·x`
//! subject to `S(x) = F_0 + Σ_i x_i F_i ⪰ 0`, where every `F` is a real
//! symmetric block-diagonal matrix over one shared block signature. Complex
//! Hermitian constraints are expected to be pre-lowered by the caller through
//! the standard 2×2 real embedding.
//!
//! The solver is a primal-dual path-following method with Nesterov–Todd
//! scaling and a Mehrotra predictor-corrector, using dense Cholesky on the
//! Schur complement. `certify` recomputes every residual through a separate
//! arithmetic path so published bounds never rest on solver internals alone.
//!
//! Text serialization (one instance per file):
//!
//! ```text
//! sense max
//! vars 2
//! blocks 1
//! blocksizes 2
//! c 2 0
//! F 0 0 0 1 1.0        # F idx block row col value, 0-based, row <= col
//! F 1 0 0 0 1.0
//! ...
//! ```

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("instance needs at least one variable and one block")]
    Empty,
    #[error("matrix index {idx} out of range (m = {m})")]
    MatrixIndex { idx: usize, m: usize },
    #[error("entry ({row},{col}) outside block {block} of size {size}")]
    EntryRange { block: usize, row: usize, col: usize, size: usize },
    #[error("block {idx} out of range ({count} blocks)")]
    BlockRange { idx: usize, count: usize },
    #[error("tolerance {0} outside [1e-10, 1e-4]")]
    BadTolerance(f64),
    #[error("objective length {got} does not match variable count {want}")]
    ObjectiveLength { want: usize, got: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

/// Shared block signature: the sizes of the diagonal blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape(pub Vec<usize>);

impl BlockShape {
    pub fn total_dim(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }
}

/// Sparse symmetric block-diagonal matrix: entries `(block, row, col, value)`
/// with `row <= col`; the mirrored entry is implied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSymMatrix {
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl SparseSymMatrix {
    pub fn new() -> Self {
        SparseSymMatrix { entries: Vec::new() }
    }

    pub fn push(&mut self, block: usize, row: usize, col: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push((block, r, c, value));
    }

    fn validate(&self, shape: &BlockShape) -> Result<(), SdpError> {
        for &(b, r, c, _) in &self.entries {
            if b >= shape.count() {
                return Err(SdpError::BlockRange { idx: b, count: shape.count() });
            }
            let size = shape.0[b];
            if r > c || c >= size {
                return Err(SdpError::EntryRange { block: b, row: r, col: c, size });
            }
        }
        Ok(())
    }

    /// Frobenius inner product with a dense symmetric block matrix.
    pub fn dot(&self, x: &BlockMatrix) -> f64 {
        let mut acc = 0.0;
        for &(b, r, c, v) in &self.entries {
            let w = x.blocks[b][(r, c)];
            acc += if r == c { v * w } else { 2.0 * v * w };
        }
        acc
    }

    /// Adds `scale ·` this matrix into a dense accumulator.
    pub fn add_into(&self, out: &mut BlockMatrix, scale: f64) {
        for &(b, r, c, v) in &self.entries {
            out.blocks[b][(r, c)] += scale * v;
            if r != c {
                out.blocks[b][(c, r)] += scale * v;
            }
        }
    }

    /// Dense materialization.
    pub fn to_dense(&self, shape: &BlockShape) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(shape);
        self.add_into(&mut out, 1.0);
        out
    }

    /// `W · A · W` for symmetric `W`, exploiting sparsity of `A`.
    fn sandwich(&self, w: &BlockMatrix) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(&w.shape);
        for &(b, r, c, v) in &self.entries {
            let wb = &w.blocks[b];
            let ob = &mut out.blocks[b];
            let n = wb.nrows();
            // A contributes v at (r,c) and (c,r): out += v (w_col_r w_row_c + w_col_c w_row_r)
            for i in 0..n {
                let wir = wb[(i, r)];
                let wic = wb[(i, c)];
                for j in 0..n {
                    let t = if r == c {
                        v * wir * wb[(c, j)]
                    } else {
                        v * (wir * wb[(c, j)] + wic * wb[(r, j)])
                    };
                    ob[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn frob_norm(&self, shape: &BlockShape) -> f64 {
        // Accumulate through the dense form so duplicate entries fold first.
        self.to_dense(shape).frob_norm()
    }
}

/// Dense symmetric block-diagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    pub shape: BlockShape,
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockMatrix {
    pub fn zeros(shape: &BlockShape) -> Self {
        let blocks = shape.0.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        BlockMatrix { shape: shape.clone(), blocks }
    }

    pub fn identity_scaled(shape: &BlockShape, s: f64) -> Self {
        let blocks = shape
            .0
            .iter()
            .map(|&n| DMatrix::from_diagonal_element(n, n, s))
            .collect();
        BlockMatrix { shape: shape.clone(), blocks }
    }

    pub fn dot(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> BlockMatrix {
        BlockMatrix {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().map(|b| b * s).collect(),
        }
    }

    pub fn add(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            shape: self.shape.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            shape: self.shape.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            let t = b.transpose();
            *b = (&*b + t) * 0.5;
        }
    }

    /// Blockwise `A · B` (symmetry of the result is the caller's business).
    fn mul(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            shape: self.shape.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    fn transpose(&self) -> BlockMatrix {
        BlockMatrix {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().map(|b| b.transpose()).collect(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let eig = SymmetricEigen::new(b.clone());
                eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Clamps eigenvalues below zero, returning an exactly PSD matrix.
    pub fn psd_projection(&self) -> BlockMatrix {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let eig = SymmetricEigen::new(b.clone());
                let q = &eig.eigenvectors;
                let mut d = DMatrix::zeros(b.nrows(), b.ncols());
                for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                    d[(i, i)] = ev.max(0.0);
                }
                q * d * q.transpose()
            })
            .collect();
        BlockMatrix { shape: self.shape.clone(), blocks }
    }

    /// Applies a spectral function blockwise (input must be symmetric).
    fn spectral_map(&self, f: impl Fn(f64) -> f64 + Copy) -> BlockMatrix {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let eig = SymmetricEigen::new(b.clone());
                let q = &eig.eigenvectors;
                let mut d = DMatrix::zeros(b.nrows(), b.ncols());
                for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                    d[(i, i)] = f(ev);
                }
                q * d * q.transpose()
            })
            .collect();
        BlockMatrix { shape: self.shape.clone(), blocks }
    }

    /// Largest `α` with `self + α·dir ⪰ 0`, assuming `self ≻ 0`.
    fn max_step(&self, dir: &BlockMatrix) -> f64 {
        let mut step = f64::INFINITY;
        for (x, d) in self.blocks.iter().zip(&dir.blocks) {
            let chol = match Cholesky::new(x.clone()) {
                Some(c) => c,
                // Not strictly PD numerically: take no step on this block.
                None => return 0.0,
            };
            let l = chol.l();
            let b = l.solve_lower_triangular(d).expect("triangular solve");
            let m = l
                .solve_lower_triangular(&b.transpose())
                .expect("triangular solve")
                .transpose();
            let msym = (&m + m.transpose()) * 0.5;
            let eig = SymmetricEigen::new(msym);
            let lam_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if lam_min < 0.0 {
                step = step.min(-1.0 / lam_min);
            }
        }
        step
    }
}

/// An SDP in LMI form: optimize `c·x` s.t. `F_0 + Σ x_i F_i ⪰ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpInstance {
    pub sense: Sense,
    pub shape: BlockShape,
    pub objective: Vec<f64>,
    /// `f[0]` is the constant term `F_0`; `f[i]` multiplies `x_i`.
    pub f: Vec<SparseSymMatrix>,
}

impl SdpInstance {
    pub fn new(
        sense: Sense,
        shape: BlockShape,
        objective: Vec<f64>,
        f: Vec<SparseSymMatrix>,
    ) -> Result<Self, SdpError> {
        if shape.count() == 0 || objective.is_empty() {
            return Err(SdpError::Empty);
        }
        if f.len() != objective.len() + 1 {
            return Err(SdpError::ObjectiveLength { want: f.len().saturating_sub(1), got: objective.len() });
        }
        for m in &f {
            m.validate(&shape)?;
        }
        Ok(SdpInstance { sense, shape, objective, f })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// `S(x) = F_0 + Σ x_i F_i` as a dense block matrix.
    pub fn slack_at(&self, x: &[f64]) -> BlockMatrix {
        let mut s = BlockMatrix::zeros(&self.shape);
        self.f[0].add_into(&mut s, 1.0);
        for (i, xi) in x.iter().enumerate() {
            self.f[i + 1].add_into(&mut s, *xi);
        }
        s
    }

    /// Emits the sparse triplet text format.
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "sense {}\n",
            match self.sense {
                Sense::Min => "min",
                Sense::Max => "max",
            }
        ));
        out.push_str(&format!("vars {}\n", self.num_vars()));
        out.push_str(&format!("blocks {}\n", self.shape.count()));
        out.push_str("blocksizes");
        for s in &self.shape.0 {
            out.push_str(&format!(" {s}"));
        }
        out.push('\n');
        out.push_str("c");
        for v in &self.objective {
            out.push_str(&format!(" {v:e}"));
        }
        out.push('\n');
        for (idx, m) in self.f.iter().enumerate() {
            for &(b, r, c, v) in &m.entries {
                out.push_str(&format!("F {idx} {b} {r} {c} {v:e}\n"));
            }
        }
        out
    }

    /// Parses the sparse triplet text format.
    pub fn from_triplet_text(src: &str) -> Result<Self, SdpError> {
        let mut sense = None;
        let mut vars = None;
        let mut sizes: Option<Vec<usize>> = None;
        let mut c: Option<Vec<f64>> = None;
        let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| SdpError::Parse { line: lineno + 1, msg: msg.to_string() };
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("sense") => {
                    sense = Some(match tok.next() {
                        Some("min") => Sense::Min,
                        Some("max") => Sense::Max,
                        _ => return Err(err("expected `min` or `max`")),
                    });
                }
                Some("vars") => {
                    vars = Some(
                        tok.next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err("expected variable count"))?,
                    );
                }
                Some("blocks") => {
                    // Count is implied by blocksizes; accepted for readability.
                    tok.next();
                }
                Some("blocksizes") => {
                    let mut v = Vec::new();
                    for t in tok {
                        v.push(t.parse().map_err(|_| err("bad block size"))?);
                    }
                    sizes = Some(v);
                }
                Some("c") => {
                    let mut v = Vec::new();
                    for t in tok {
                        v.push(t.parse().map_err(|_| err("bad objective entry"))?);
                    }
                    c = Some(v);
                }
                Some("F") => {
                    let mut next = |name: &str| -> Result<String, SdpError> {
                        tok.next().map(|s| s.to_string()).ok_or_else(|| err(&format!("missing {name}")))
                    };
                    let idx: usize = next("matrix index")?.parse().map_err(|_| err("bad matrix index"))?;
                    let b: usize = next("block")?.parse().map_err(|_| err("bad block"))?;
                    let r: usize = next("row")?.parse().map_err(|_| err("bad row"))?;
                    let cc: usize = next("col")?.parse().map_err(|_| err("bad col"))?;
                    let v: f64 = next("value")?.parse().map_err(|_| err("bad value"))?;
                    entries.push((idx, b, r, cc, v));
                }
                _ => return Err(err("unknown directive")),
            }
        }
        let sense = sense.ok_or(SdpError::Parse { line: 0, msg: "missing sense".into() })?;
        let m = vars.ok_or(SdpError::Parse { line: 0, msg: "missing vars".into() })?;
        let sizes = sizes.ok_or(SdpError::Parse { line: 0, msg: "missing blocksizes".into() })?;
        let c = c.ok_or(SdpError::Parse { line: 0, msg: "missing c".into() })?;
        let mut f = vec![SparseSymMatrix::new(); m + 1];
        for (idx, b, r, cc, v) in entries {
            if idx > m {
                return Err(SdpError::MatrixIndex { idx, m });
            }
            f[idx].push(b, r, cc, v);
        }
        SdpInstance::new(sense, BlockShape(sizes), c, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspect,
}

/// Solver output: the variable vector, both objectives, and the dual matrix
/// certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    /// `c·x` at the returned point.
    pub objective: f64,
    /// Dual bound: an upper bound for `max` problems, lower for `min`,
    /// certified by `dual_matrix` up to the reported residuals.
    pub bound: f64,
    /// PSD dual multiplier `Y`; for `max` problems `⟨F_0, Y⟩ ≥ c·x*` whenever
    /// `⟨F_i, Y⟩ = −c_i`.
    pub dual_matrix: BlockMatrix,
    pub gap: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Count of weak-duality violations observed across iterates (must be 0).
    pub weak_duality_violations: usize,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
const FRACTION_TO_BOUNDARY: f64 = 0.98;

/// Solves the instance by primal-dual path following.
///
/// Internally the problem is normalized to `max b·y s.t. C − Σ y_i A_i ⪰ 0`
/// and paired with `min ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0`.
pub fn solve(inst: &SdpInstance, tol: f64, max_iter: usize) -> Result<SdpSolution, SdpError> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(SdpError::BadTolerance(tol));
    }
    let m = inst.num_vars();
    let shape = &inst.shape;
    let n_total = shape.total_dim() as f64;

    // Normalize to max form: b·y with C = F_0, A_i = −F_i.
    let flip = match inst.sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let b: Vec<f64> = inst.objective.iter().map(|v| v * flip).collect();
    let c_mat = inst.f[0].to_dense(shape);
    let a_dot = |x: &BlockMatrix| -> Vec<f64> {
        (0..m).map(|i| -inst.f[i + 1].dot(x)).collect()
    };
    let a_star = |y: &[f64]| -> BlockMatrix {
        let mut out = BlockMatrix::zeros(shape);
        for (i, yi) in y.iter().enumerate() {
            inst.f[i + 1].add_into(&mut out, -yi);
        }
        out
    };
    let a_sandwich_dot = |w: &BlockMatrix, out: &mut Vec<BlockMatrix>| {
        out.clear();
        for i in 0..m {
            out.push(inst.f[i + 1].sandwich(w).scale(-1.0));
        }
    };

    let data_scale = {
        let mut s: f64 = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        s = s.max(c_mat.frob_norm());
        for i in 0..m {
            s = s.max(inst.f[i + 1].frob_norm(shape));
        }
        s
    };

    let mut x = BlockMatrix::identity_scaled(shape, data_scale);
    let mut z = BlockMatrix::identity_scaled(shape, data_scale);
    let mut y = vec![0.0; m];
    let mut weak_duality_violations = 0usize;
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0usize;

    let b_norm = 1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_norm = 1.0 + c_mat.frob_norm();

    for iter in 0..max_iter {
        iterations = iter + 1;
        let mu = x.dot(&z) / n_total;
        let rp: Vec<f64> = {
            let ax = a_dot(&x);
            b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect()
        };
        let rd = c_mat.sub(&a_star(&y)).sub(&z);
        let pobj = c_mat.dot(&x);
        let dobj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();

        // Weak duality on the internal pair, corrected by measured
        // infeasibility: pobj − dobj ≥ ⟨Rd, X⟩ − y·rp exactly.
        let slack = rd.dot(&x).abs()
            + y.iter().zip(&rp).map(|(a, b)| a * b).sum::<f64>().abs()
            + 1e-9 * data_scale * (1.0 + pobj.abs() + dobj.abs());
        if pobj - dobj < -slack {
            weak_duality_violations += 1;
        }

        let rp_norm = rp.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rd_norm = rd.frob_norm();
        let gap_rel = (x.dot(&z)).abs() / (1.0 + pobj.abs() + dobj.abs());
        if gap_rel <= tol && rp_norm / b_norm <= tol && rd_norm / c_norm <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            status = SdpStatus::InfeasibleSuspect;
            break;
        }

        // Nesterov–Todd scaling point: W Z W = X.
        let z_half = z.spectral_map(|t| t.max(1e-300).sqrt());
        let z_inv_half = z.spectral_map(|t| 1.0 / t.max(1e-300).sqrt());
        let mut t_mat = z_half.mul(&x).mul(&z_half);
        t_mat.symmetrize();
        let t_half = t_mat.spectral_map(|t| t.max(0.0).sqrt());
        let mut w = z_inv_half.mul(&t_half).mul(&z_inv_half);
        w.symmetrize();
        let r_fact = match w
            .blocks
            .iter()
            .map(|blk| Cholesky::new(blk.clone()).map(|c| c.l().clone_owned()))
            .collect::<Option<Vec<_>>>()
        {
            Some(ls) => BlockMatrix { shape: shape.clone(), blocks: ls },
            None => {
                status = SdpStatus::MaxIter;
                break;
            }
        };
        // V = Rᵀ Z R (= R⁻¹ X R⁻ᵀ by the NT property).
        let mut v_mat = r_fact.transpose().mul(&z).mul(&r_fact);
        v_mat.symmetrize();
        let v_eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = v_mat
            .blocks
            .iter()
            .map(|blk| SymmetricEigen::new(blk.clone()))
            .collect();

        // Schur complement H_ij = ⟨A_i, W A_j W⟩ (SPD for independent A_i).
        let mut sandwiches: Vec<BlockMatrix> = Vec::with_capacity(m);
        a_sandwich_dot(&w, &mut sandwiches);
        let mut h = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let hij = -inst.f[i + 1].dot(&sandwiches[j]);
                h[(i, j)] = hij;
                h[(j, i)] = hij;
            }
        }
        let h_chol = {
            let mut ridge = 0.0;
            let base_ridge = 1e-14 * (1.0 + h.diagonal().amax());
            let mut attempt = None;
            for _ in 0..4 {
                let mut hr = h.clone();
                for i in 0..m {
                    hr[(i, i)] += ridge;
                }
                if let Some(ch) = Cholesky::new(hr) {
                    attempt = Some(ch);
                    break;
                }
                ridge = if ridge == 0.0 { base_ridge } else { ridge * 100.0 };
            }
            match attempt {
                Some(ch) => ch,
                None => {
                    status = SdpStatus::MaxIter;
                    break;
                }
            }
        };

        // Solves the direction equations for a given complementarity target
        // R·Y·Rᵀ (in original coordinates).
        let solve_direction = |rhs_mat: &BlockMatrix| -> (BlockMatrix, Vec<f64>, BlockMatrix) {
            let w_rd_w = {
                let mut t = w.mul(&rd).mul(&w);
                t.symmetrize();
                t
            };
            let mut rhs = DMatrix::<f64>::zeros(m, 1);
            for i in 0..m {
                rhs[(i, 0)] = rp[i] - (-inst.f[i + 1].dot(rhs_mat)) + (-inst.f[i + 1].dot(&w_rd_w));
            }
            let dy_mat = h_chol.solve(&rhs);
            let dy: Vec<f64> = (0..m).map(|i| dy_mat[(i, 0)]).collect();
            let dz = rd.sub(&a_star(&dy));
            let mut w_dz_w = w.mul(&dz).mul(&w);
            w_dz_w.symmetrize();
            let mut dx = rhs_mat.sub(&w_dz_w);
            dx.symmetrize();
            (dx, dy, dz)
        };

        // Lyapunov solve in the scaled space: (V Y + Y V)/2 = RHS.
        let lyap = |rhs_v: &BlockMatrix| -> BlockMatrix {
            let blocks = rhs_v
                .blocks
                .iter()
                .zip(&v_eigs)
                .map(|(rhs, eig)| {
                    let q = &eig.eigenvectors;
                    let tilde = q.transpose() * rhs * q;
                    let n = rhs.nrows();
                    let mut out = DMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            let denom = (eig.eigenvalues[i] + eig.eigenvalues[j]).max(1e-300);
                            out[(i, j)] = 2.0 * tilde[(i, j)] / denom;
                        }
                    }
                    q * out * q.transpose()
                })
                .collect();
            BlockMatrix { shape: shape.clone(), blocks }
        };

        // Predictor (affine scaling, target 0): RHS_mat = −X.
        let (dx_aff, _dy_aff, dz_aff) = solve_direction(&x.scale(-1.0));
        let alpha_p_aff = x.max_step(&dx_aff).min(1.0 / FRACTION_TO_BOUNDARY) * FRACTION_TO_BOUNDARY;
        let alpha_d_aff = z.max_step(&dz_aff).min(1.0 / FRACTION_TO_BOUNDARY) * FRACTION_TO_BOUNDARY;
        let x_aff = x.add(&dx_aff.scale(alpha_p_aff.min(1.0)));
        let z_aff = z.add(&dz_aff.scale(alpha_d_aff.min(1.0)));
        let mu_aff = x_aff.dot(&z_aff) / n_total;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-8, 1.0);

        // Corrector: V∘Y = σμ I − V∘V − ΔX̃_aff ∘ ΔZ̃_aff.
        let r_inv: Vec<DMatrix<f64>> = r_fact
            .blocks
            .iter()
            .map(|l| {
                l.clone()
                    .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
                    .expect("R is nonsingular")
            })
            .collect();
        let dx_tilde = BlockMatrix {
            shape: shape.clone(),
            blocks: dx_aff
                .blocks
                .iter()
                .zip(&r_inv)
                .map(|(d, ri)| ri * d * ri.transpose())
                .collect(),
        };
        let dz_tilde = BlockMatrix {
            shape: shape.clone(),
            blocks: dz_aff
                .blocks
                .iter()
                .zip(&r_fact.blocks)
                .map(|(d, r)| r.transpose() * d * r)
                .collect(),
        };
        let rhs_v = {
            let mut acc = BlockMatrix::identity_scaled(shape, sigma * mu);
            let vv = v_mat.mul(&v_mat);
            acc = acc.sub(&vv);
            let cross = dx_tilde.mul(&dz_tilde);
            let mut cross_sym = cross.clone();
            cross_sym.symmetrize();
            acc = acc.sub(&cross_sym);
            let mut a = acc;
            a.symmetrize();
            a
        };
        let y_corr = lyap(&rhs_v);
        let rhs_mat = {
            let mut t = r_fact.mul(&y_corr).mul(&r_fact.transpose());
            t.symmetrize();
            t
        };

        let (dx, dy, dz) = solve_direction(&rhs_mat);
        let alpha_p = (x.max_step(&dx) * FRACTION_TO_BOUNDARY).min(1.0);
        let alpha_d = (z.max_step(&dz) * FRACTION_TO_BOUNDARY).min(1.0);
        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            status = SdpStatus::MaxIter;
            break;
        }
        x = x.add(&dx.scale(alpha_p));
        for (yi, dyi) in y.iter_mut().zip(&dy) {
            *yi += alpha_d * dyi;
        }
        z = z.add(&dz.scale(alpha_d));
    }

    let pobj_final = c_mat.dot(&x);
    let dobj_final: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
    Ok(SdpSolution {
        x: y.iter().map(|v| v * flip).collect::<Vec<f64>>(),
        objective: flip * dobj_final,
        bound: flip * pobj_final,
        dual_matrix: x,
        gap: (pobj_final - dobj_final).abs(),
        status,
        iterations,
        weak_duality_violations,
    })
}

/// Independent certification of a solution against its instance.
///
/// All residuals are recomputed from scratch: the slack matrix `S(x)` is
/// reassembled entry by entry, the dual linear conditions `⟨F_i, Y⟩ = −c_i·σ`
/// are re-evaluated, and eigenvalue floors are measured on fresh copies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertReport {
    /// `max(0, −λ_min(S(x)))`: how far the point is from primal feasibility.
    pub primal_psd_defect: f64,
    /// `max(0, −λ_min(Y))`.
    pub dual_psd_defect: f64,
    /// `max_i |⟨F_i, Y⟩ + σ·c_i|` where σ = +1 for max, −1 for min.
    pub dual_linear_residual: f64,
    /// `|objective − bound|`.
    pub gap: f64,
    pub tolerance: f64,
    pub ok: bool,
}

pub fn certify(inst: &SdpInstance, sol: &SdpSolution, tol: f64) -> CertReport {
    let s = inst.slack_at(&sol.x);
    let primal_psd_defect = (-s.min_eigenvalue()).max(0.0);
    let dual_psd_defect = (-sol.dual_matrix.min_eigenvalue()).max(0.0);
    let sign = match inst.sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let mut dual_linear_residual = 0.0_f64;
    for i in 0..inst.num_vars() {
        let fi_dot = inst.f[i + 1].dot(&sol.dual_matrix);
        dual_linear_residual = dual_linear_residual.max((fi_dot + sign * inst.objective[i]).abs());
    }
    let gap = (sol.objective - sol.bound).abs();
    let scale = 1.0 + sol.objective.abs() + sol.bound.abs();
    let ok = primal_psd_defect <= tol * scale
        && dual_psd_defect <= tol * scale
        && dual_linear_residual <= tol * scale * 10.0
        && gap <= tol * scale * 10.0
        && sol.weak_duality_violations == 0;
    CertReport {
        primal_psd_defect,
        dual_psd_defect,
        dual_linear_residual,
        gap,
        tolerance: tol,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_default(inst: &SdpInstance) -> SdpSolution {
        solve(inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
    }

    /// min x s.t. [[x]] >= 0.
    fn trivial_min() -> SdpInstance {
        let mut f1 = SparseSymMatrix::new();
        f1.push(0, 0, 0, 1.0);
        SdpInstance::new(Sense::Min, BlockShape(vec![1]), vec![1.0], vec![SparseSymMatrix::new(), f1]).unwrap()
    }

    /// max t s.t. I − t·I >= 0 on a 2×2 block.
    fn identity_scaling() -> SdpInstance {
        let mut f0 = SparseSymMatrix::new();
        f0.push(0, 0, 0, 1.0);
        f0.push(0, 1, 1, 1.0);
        let mut f1 = SparseSymMatrix::new();
        f1.push(0, 0, 0, -1.0);
        f1.push(0, 1, 1, -1.0);
        SdpInstance::new(Sense::Max, BlockShape(vec![2]), vec![1.0], vec![f0, f1]).unwrap()
    }

    /// max <diag(1,-1), X> s.t. tr X = 1, X >= 0, via X = [[x1, x2],[x2, 1-x1]]:
    /// objective 2·x1 − 1, so the solver should return 2 (and 1 after offset).
    fn density_extreme() -> SdpInstance {
        let mut f0 = SparseSymMatrix::new();
        f0.push(0, 1, 1, 1.0);
        let mut f1 = SparseSymMatrix::new();
        f1.push(0, 0, 0, 1.0);
        f1.push(0, 1, 1, -1.0);
        let mut f2 = SparseSymMatrix::new();
        f2.push(0, 0, 1, 1.0);
        SdpInstance::new(Sense::Max, BlockShape(vec![2]), vec![2.0, 0.0], vec![f0, f1, f2]).unwrap()
    }

    #[test]
    fn solves_trivial_min() {
        let sol = solve_default(&trivial_min());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-6, "objective {}", sol.objective);
        assert_eq!(sol.weak_duality_violations, 0);
    }

    #[test]
    fn solves_identity_scaling() {
        let sol = solve_default(&identity_scaling());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6, "objective {}", sol.objective);
    }

    #[test]
    fn solves_density_extreme() {
        let sol = solve_default(&density_extreme());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-6, "objective {}", sol.objective);
        // After the affine offset the original optimum is 1.
        assert!(((sol.objective - 1.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn certify_passes_on_hand_examples() {
        for inst in [trivial_min(), identity_scaling(), density_extreme()] {
            let sol = solve_default(&inst);
            let report = certify(&inst, &sol, 1e-6);
            assert!(report.ok, "{report:?}");
        }
    }

    #[test]
    fn certify_flags_corrupted_x() {
        let inst = identity_scaling();
        let mut sol = solve_default(&inst);
        sol.x[0] = 2.0; // S(x) = I - 2I < 0
        let report = certify(&inst, &sol, 1e-6);
        assert!(!report.ok);
        assert!(report.primal_psd_defect > 0.5);
    }

    #[test]
    fn certify_flags_indefinite_dual() {
        let inst = identity_scaling();
        let mut sol = solve_default(&inst);
        sol.dual_matrix.blocks[0][(0, 0)] = -1.0;
        let report = certify(&inst, &sol, 1e-6);
        assert!(!report.ok);
        assert!(report.dual_psd_defect >= 1.0);
    }

    #[test]
    fn deterministic_repeat_runs() {
        let inst = density_extreme();
        let a = solve_default(&inst);
        let b = solve_default(&inst);
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn triplet_text_round_trips() {
        let inst = density_extreme();
        let text = inst.to_triplet_text();
        let back = SdpInstance::from_triplet_text(&text).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(matches!(solve(&trivial_min(), 1e-2, 10), Err(SdpError::BadTolerance(_))));
    }

    #[test]
    fn rejects_entry_out_of_range() {
        let mut f1 = SparseSymMatrix::new();
        f1.push(0, 0, 5, 1.0);
        assert!(SdpInstance::new(
            Sense::Min,
            BlockShape(vec![2]),
            vec![1.0],
            vec![SparseSymMatrix::new(), f1]
        )
        .is_err());
    }

    #[test]
    fn random_strictly_feasible_instances_certify() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..8 {
            let m = 2 + (trial % 3);
            let n = 2 + (trial % 2);
            // Random F_i, then F_0 = S0 − Σ x0_i F_i keeps x0 strictly feasible;
            // c_i = −<F_i, X0> with X0 ≻ 0 bounds the max.
            let mut fs = Vec::new();
            let mut mats = Vec::new();
            for _ in 0..m {
                let mut f = SparseSymMatrix::new();
                let mut dense = DMatrix::<f64>::zeros(n, n);
                for r in 0..n {
                    for c in r..n {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        f.push(0, r, c, v);
                        dense[(r, c)] = v;
                        dense[(c, r)] = v;
                    }
                }
                fs.push(f);
                mats.push(dense);
            }
            let x0: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut s0 = DMatrix::<f64>::identity(n, n);
            for r in 0..n {
                for c in 0..n {
                    if r != c {
                        s0[(r, c)] = 0.1 * rng.gen_range(-1.0..1.0);
                    }
                }
            }
            let s0 = (&s0 + s0.transpose()) * 0.5;
            let mut f0_dense = s0.clone();
            for (xi, fm) in x0.iter().zip(&mats) {
                f0_dense -= fm * *xi;
            }
            let mut f0 = SparseSymMatrix::new();
            for r in 0..n {
                for c in r..n {
                    f0.push(0, r, c, f0_dense[(r, c)]);
                }
            }
            let mut g0 = DMatrix::<f64>::identity(n, n) * 0.7;
            g0[(0, 0)] = 1.3;
            let c_vec: Vec<f64> = mats.iter().map(|fm| -(fm.dot(&g0))).collect();
            let mut f_all = vec![f0];
            f_all.extend(fs);
            let inst = SdpInstance::new(Sense::Max, BlockShape(vec![n]), c_vec, f_all).unwrap();
            let sol = solve_default(&inst);
            assert_eq!(sol.status, SdpStatus::Optimal, "trial {trial}");
            let report = certify(&inst, &sol, 1e-6);
            assert!(report.ok, "trial {trial}: {report:?}");
            assert_eq!(sol.weak_duality_violations, 0);
        }
    }
}
