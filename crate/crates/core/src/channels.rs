//! Hermitian-preserving maps, quantum channels, and the Schmidt-rank
//! constrained extremization that powers both k-positivity tests and
//! ancilla-assisted channel discrimination.
//!
//! # Conventions
//!
//! Operators are vectorized row-major, `vec(x)[i·n + j] = x[i, j]`, so the
//! superoperator of `x ↦ A x B` is `A ⊗ Bᵀ`. The Choi matrix is
//!
//! ```text
//! C = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)        (input copy first, unnormalized)
//! C[(i, a), (j, b)] = S[(a, b), (i, j)]
//! ```
//!
//! which makes `C ⪰ 0 ⇔ Φ CP` and `Tr_out C = I ⇔ Φ TP` exact.

use serde::{Deserialize, Serialize};

use crate::discrimination::{self, DiscriminationInstance};
use crate::error::{Error, Result};
use crate::linops::{
    c, eig_hermitian, gaussian_matrix, kron, normalize, partial_trace, pauli, seeded_rng, svd,
    thin_qr, trace_norm, ComplexMatrix, DensityOperator, Factor, HermitianOperator,
    PureState, C64,
};

/// Eigenvalue floor for certifying complete positivity.
pub const CP_TOL: f64 = 1e-9;
/// Max-entry tolerance on `Tr_out C − I` for certifying trace preservation.
pub const TP_TOL: f64 = 1e-8;
/// A block-positivity minimum below `−CERTIFICATE_TOL` is a certified violation.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Default condition-number ceiling for inverting a superoperator.
pub const DEFAULT_COND_THRESHOLD: f64 = 1e10;
/// Singular values above this count toward the Schmidt rank.
pub const RANK_TOL: f64 = 1e-9;

fn superop_to_choi(dim_in: usize, dim_out: usize, s: &ComplexMatrix) -> ComplexMatrix {
    let n = dim_in * dim_out;
    let mut choi = ComplexMatrix::zeros(n, n);
    for i in 0..dim_in {
        for j in 0..dim_in {
            for a in 0..dim_out {
                for b in 0..dim_out {
                    choi[(i * dim_out + a, j * dim_out + b)] = s[(a * dim_out + b, i * dim_in + j)];
                }
            }
        }
    }
    choi
}

fn choi_to_superop(dim_in: usize, dim_out: usize, choi: &ComplexMatrix) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
    for i in 0..dim_in {
        for j in 0..dim_in {
            for a in 0..dim_out {
                for b in 0..dim_out {
                    s[(a * dim_out + b, i * dim_in + j)] = choi[(i * dim_out + a, j * dim_out + b)];
                }
            }
        }
    }
    s
}

/// Linear map on operators that preserves Hermiticity, kept both as a
/// superoperator and as its Choi matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMap {
    dim_in: usize,
    dim_out: usize,
    superop: ComplexMatrix,
    choi: HermitianOperator,
}

impl HermitianMap {
    pub fn from_superop(dim_in: usize, dim_out: usize, superop: ComplexMatrix) -> Result<Self> {
        if superop.rows() != dim_out * dim_out || superop.cols() != dim_in * dim_in {
            return Err(Error::DimensionMismatch(format!(
                "superoperator {}x{} for a map {dim_in} -> {dim_out}",
                superop.rows(),
                superop.cols()
            )));
        }
        let choi = HermitianOperator::new_relative(superop_to_choi(dim_in, dim_out, &superop))?;
        // Re-derive the superop from the symmetrized Choi so the two agree exactly.
        let superop = choi_to_superop(dim_in, dim_out, choi.matrix());
        Ok(Self {
            dim_in,
            dim_out,
            superop,
            choi,
        })
    }

    pub fn from_choi(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self> {
        if choi.dim() != dim_in * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of dimension {} for a map {dim_in} -> {dim_out}",
                choi.dim()
            )));
        }
        let superop = choi_to_superop(dim_in, dim_out, choi.matrix());
        Ok(Self {
            dim_in,
            dim_out,
            superop,
            choi,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_superop(d, d, ComplexMatrix::identity(d * d)).expect("identity is Hermitian-preserving")
    }

    /// Transposition `x ↦ xᵀ`; positive but not 2-positive. Its Choi matrix is SWAP.
    pub fn transpose(d: usize) -> Self {
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                s[(a * d + b, b * d + a)] = c(1.0, 0.0);
            }
        }
        Self::from_superop(d, d, s).expect("transpose is Hermitian-preserving")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn superop(&self) -> &ComplexMatrix {
        &self.superop
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        HermitianOperator::new_relative(self.apply_matrix(x.matrix())?)
    }

    pub fn apply_matrix(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.dim_in || x.cols() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "input {}x{} for a map on dimension {}",
                x.rows(),
                x.cols(),
                self.dim_in
            )));
        }
        let out = self.superop.matvec(x.as_slice())?;
        ComplexMatrix::unvectorize(self.dim_out, self.dim_out, &out)
    }

    /// `(id_k ⊗ m)(x)` for `x` on `C^k ⊗ C^{dim_in}`, computed blockwise.
    pub fn apply_extended(&self, k: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (din, dout) = (self.dim_in, self.dim_out);
        if x.rows() != k * din || x.cols() != k * din {
            return Err(Error::DimensionMismatch(format!(
                "input {}x{} for id_{k} ⊗ map on dimension {din}",
                x.rows(),
                x.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(k * dout, k * dout);
        let mut block = vec![C64::new(0.0, 0.0); din * din];
        for i in 0..k {
            for j in 0..k {
                for c_ in 0..din {
                    for e in 0..din {
                        block[c_ * din + e] = x[(i * din + c_, j * din + e)];
                    }
                }
                let y = self.superop.matvec(&block)?;
                for a in 0..dout {
                    for b in 0..dout {
                        out[(i * dout + a, j * dout + b)] = y[a * dout + b];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Hilbert-Schmidt adjoint, a map `dim_out → dim_in`.
    pub fn adjoint(&self) -> Self {
        Self::from_superop(self.dim_out, self.dim_in, self.superop.adjoint())
            .expect("adjoint of a Hermitian-preserving map is Hermitian-preserving")
    }

    /// `Σ w_i m_i` over maps of equal dimensions.
    pub fn linear_combination(terms: &[(f64, &HermitianMap)]) -> Result<Self> {
        let (w0, m0) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut s = m0.superop.scale_real(*w0);
        for (w, m) in &terms[1..] {
            if (m.dim_in, m.dim_out) != (m0.dim_in, m0.dim_out) {
                return Err(Error::DimensionMismatch("maps of different dimensions".into()));
            }
            s = &s + &m.superop.scale_real(*w);
        }
        Self::from_superop(m0.dim_in, m0.dim_out, s)
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &HermitianMap, inner: &HermitianMap) -> Result<Self> {
        if inner.dim_out != outer.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "composing a map on {} after one into {}",
                outer.dim_in, inner.dim_out
            )));
        }
        Self::from_superop(inner.dim_in, outer.dim_out, &outer.superop * &inner.superop)
    }

    /// Superoperator condition number `s_max / s_min`.
    pub fn condition_number(&self) -> Result<f64> {
        let s = svd(&self.superop)?;
        let smax = s.singular_values[0];
        let smin = *s.singular_values.last().expect("nonempty");
        Ok(if smin > 0.0 { smax / smin } else { f64::INFINITY })
    }

    /// Inverse map; generally not CP. Fails when the condition number exceeds
    /// `cond_threshold`.
    pub fn invert(&self, cond_threshold: f64) -> Result<Self> {
        if self.dim_in != self.dim_out {
            return Err(Error::DimensionMismatch("cannot invert a non-square map".into()));
        }
        let cond = self.condition_number()?;
        if !(cond <= cond_threshold) {
            return Err(Error::IllConditioned(cond));
        }
        let inv = self.superop.inverse()?;
        Self::from_superop(self.dim_in, self.dim_in, inv)
    }

    /// `id_k ⊗ m` on the ancilla-first composite space.
    pub fn tensor_with_identity(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("ancilla dimension must be positive".into()));
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let (nin, nout) = (k * din, k * dout);
        let mut s = ComplexMatrix::zeros(nout * nout, nin * nin);
        for i in 0..k {
            for j in 0..k {
                for a in 0..dout {
                    for b in 0..dout {
                        let row = (i * dout + a) * nout + (j * dout + b);
                        for c_ in 0..din {
                            for e in 0..din {
                                let col = (i * din + c_) * nin + (j * din + e);
                                s[(row, col)] = self.superop[(a * dout + b, c_ * din + e)];
                            }
                        }
                    }
                }
            }
        }
        Self::from_superop(nin, nout, s)
    }
}

/// A Hermitian map together with its CP / TP certification flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    map: HermitianMap,
    cp_certified: bool,
    tp_certified: bool,
}

impl Channel {
    /// Wraps a map and certifies it. Does not require CPTP; callers that need
    /// a legitimate channel check the flags.
    pub fn new(map: HermitianMap) -> Result<Self> {
        let cp_certified = eig_hermitian(map.choi())?.values[0] >= -CP_TOL;
        let reduced = partial_trace(map.choi().matrix(), map.dim_in, map.dim_out, Factor::Second)?;
        let tp_certified = reduced.max_abs_diff(&ComplexMatrix::identity(map.dim_in)) <= TP_TOL;
        Ok(Self {
            map,
            cp_certified,
            tp_certified,
        })
    }

    /// Like [`Channel::new`] but fails unless the map is CPTP.
    pub fn cptp(map: HermitianMap) -> Result<Self> {
        let ch = Self::new(map)?;
        if !ch.cp_certified {
            let min = eig_hermitian(ch.map.choi())?.values[0];
            return Err(Error::NotCompletelyPositive(min));
        }
        if !ch.tp_certified {
            return Err(Error::InvalidArgument("map is not trace preserving".into()));
        }
        Ok(ch)
    }

    pub fn from_kraus(operators: &[ComplexMatrix]) -> Result<Self> {
        let first = operators.first().ok_or(Error::EmptyKraus)?;
        let (dout, din) = (first.rows(), first.cols());
        let mut s = ComplexMatrix::zeros(dout * dout, din * din);
        for k in operators {
            if (k.rows(), k.cols()) != (dout, din) {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {}x{} among {dout}x{din}",
                    k.rows(),
                    k.cols()
                )));
            }
            s = &s + &kron(k, &k.conj());
        }
        let map = HermitianMap::from_superop(din, dout, s)?;
        let mut ch = Self::new(map)?;
        ch.cp_certified = true;
        Ok(ch)
    }

    pub fn from_choi(dim_in: usize, dim_out: usize, choi: HermitianOperator) -> Result<Self> {
        Self::new(HermitianMap::from_choi(dim_in, dim_out, choi)?)
    }

    /// Kraus operators from the Choi eigendecomposition.
    pub fn to_kraus(&self) -> Result<Vec<ComplexMatrix>> {
        let e = eig_hermitian(self.map.choi())?;
        if !self.cp_certified {
            return Err(Error::NotCompletelyPositive(e.values[0]));
        }
        let (din, dout) = (self.map.dim_in, self.map.dim_out);
        let mut out = Vec::new();
        for (j, &lam) in e.values.iter().enumerate().rev() {
            if lam < CP_TOL {
                continue;
            }
            let v = e.vector(j);
            let s = lam.sqrt();
            out.push(ComplexMatrix::from_fn(dout, din, |a, i| v[i * dout + a] * s));
        }
        Ok(out)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(&[ComplexMatrix::identity(d)]).expect("identity channel")
    }

    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// `x ↦ tr(x) I/d`.
    pub fn completely_depolarizing(d: usize) -> Self {
        let choi = HermitianOperator::new(ComplexMatrix::identity(d * d).scale_real(1.0 / d as f64))
            .expect("scaled identity");
        Self::from_choi(d, d, choi).expect("valid Choi")
    }

    /// `x ↦ λ x + (1 − λ) tr(x) I/d`.
    pub fn depolarizing(d: usize, lambda: f64) -> Result<Self> {
        let id = HermitianMap::identity(d);
        let dep = Self::completely_depolarizing(d);
        Self::new(HermitianMap::linear_combination(&[(lambda, &id), (1.0 - lambda, dep.map())])?)
    }

    /// Qubit Pauli channel with probabilities `[p_I, p_X, p_Y, p_Z]`.
    pub fn pauli(probs: [f64; 4]) -> Result<Self> {
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("Pauli probabilities {probs:?}")));
        }
        let ops: Vec<ComplexMatrix> = pauli::all()
            .iter()
            .zip(probs)
            .map(|(s, p)| s.scale_real(p.sqrt()))
            .collect();
        Self::from_kraus(&ops)
    }

    /// Qubit dephasing with Kraus operators `{√p I, √(1−p) σz}`.
    pub fn dephasing(p: f64) -> Result<Self> {
        Self::pauli([p, 0.0, 0.0, 1.0 - p])
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidProbability(gamma));
        }
        let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - gamma).sqrt()]]);
        let k1 = ComplexMatrix::from_real_rows(&[&[0.0, gamma.sqrt()], &[0.0, 0.0]]);
        Self::from_kraus(&[k0, k1])
    }

    /// Random channel with Kraus rank `rank`, from a random isometry.
    pub fn random<R: rand::Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("Kraus rank must be positive".into()));
        }
        let (v, _) = thin_qr(&gaussian_matrix(rank * d, d, rng));
        let ops: Vec<ComplexMatrix> = (0..rank)
            .map(|alpha| ComplexMatrix::from_fn(d, d, |a, i| v[(alpha * d + a, i)]))
            .collect();
        Self::from_kraus(&ops)
    }

    pub fn map(&self) -> &HermitianMap {
        &self.map
    }

    pub fn into_map(self) -> HermitianMap {
        self.map
    }

    pub fn dim(&self) -> usize {
        self.map.dim_in
    }

    pub fn cp_certified(&self) -> bool {
        self.cp_certified
    }

    pub fn tp_certified(&self) -> bool {
        self.tp_certified
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        self.map.apply(x)
    }

    /// `outer ∘ inner`, re-certified.
    pub fn compose(outer: &Channel, inner: &Channel) -> Result<Self> {
        Self::new(HermitianMap::compose(&outer.map, &inner.map)?)
    }
}

/// Unit vector `vec(L R†) / ‖L R†‖` on `C^{dim_a} ⊗ C^{dim_b}` with Schmidt
/// rank at most `rank_bound` (the shared column count of `L` and `R`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchmidtVectorRepr", into = "SchmidtVectorRepr")]
pub struct SchmidtVector {
    left: ComplexMatrix,
    right: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct SchmidtVectorRepr {
    rank_bound: usize,
    left_factor: ComplexMatrix,
    right_factor: ComplexMatrix,
}

impl TryFrom<SchmidtVectorRepr> for SchmidtVector {
    type Error = Error;
    fn try_from(r: SchmidtVectorRepr) -> Result<Self> {
        if r.left_factor.cols() != r.rank_bound {
            return Err(Error::DimensionMismatch("left factor width differs from rank bound".into()));
        }
        let norm = (&r.left_factor * &r.right_factor.adjoint()).frobenius_norm();
        if (norm - 1.0).abs() <= 1e-12 && r.left_factor.cols() == r.right_factor.cols() {
            // Already normalized; keep the stored bits.
            return Ok(SchmidtVector {
                left: r.left_factor,
                right: r.right_factor,
            });
        }
        SchmidtVector::new(r.left_factor, r.right_factor)
    }
}

impl From<SchmidtVector> for SchmidtVectorRepr {
    fn from(s: SchmidtVector) -> Self {
        SchmidtVectorRepr {
            rank_bound: s.rank_bound(),
            left_factor: s.left,
            right_factor: s.right,
        }
    }
}

impl SchmidtVector {
    /// Normalizes `L R†` to unit norm.
    pub fn new(left: ComplexMatrix, right: ComplexMatrix) -> Result<Self> {
        if left.cols() != right.cols() {
            return Err(Error::DimensionMismatch(format!(
                "factor widths {} and {}",
                left.cols(),
                right.cols()
            )));
        }
        let n = (&left * &right.adjoint()).frobenius_norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::InvalidArgument("zero Schmidt vector".into()));
        }
        Ok(Self {
            left: left.scale_real(1.0 / n),
            right,
        })
    }

    /// Product state `|a⟩ ⊗ |b⟩`.
    pub fn product(a: &[C64], b: &[C64]) -> Result<Self> {
        let left = ComplexMatrix::column(a);
        let right = ComplexMatrix::column(&b.iter().map(|z| z.conj()).collect::<Vec<_>>());
        Self::new(left, right)
    }

    pub fn rank_bound(&self) -> usize {
        self.left.cols()
    }

    pub fn dim_a(&self) -> usize {
        self.left.rows()
    }

    pub fn dim_b(&self) -> usize {
        self.right.rows()
    }

    pub fn left_factor(&self) -> &ComplexMatrix {
        &self.left
    }

    pub fn right_factor(&self) -> &ComplexMatrix {
        &self.right
    }

    /// Amplitudes `ψ[a·dim_b + b] = (L R†)[a, b]`.
    pub fn state(&self) -> Vec<C64> {
        let m = &self.left * &self.right.adjoint();
        normalize(m.as_slice()).expect("nonzero by construction")
    }

    pub fn pure_state(&self) -> PureState {
        PureState::normalized(&self.state()).expect("nonzero by construction")
    }

    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let m = ComplexMatrix::unvectorize(self.dim_a(), self.dim_b(), &self.state()).expect("shape");
        svd(&m).map(|s| s.singular_values).unwrap_or_default()
    }

    /// Number of Schmidt coefficients above [`RANK_TOL`].
    pub fn numerical_rank(&self) -> usize {
        self.schmidt_coefficients().iter().filter(|&&s| s > RANK_TOL).count()
    }

    /// Embeds into a larger ancilla and rank bound by zero padding; the state
    /// is unchanged up to the inclusion `C^{dim_a} ⊂ C^{dim_a'}`.
    pub fn padded(&self, dim_a: usize, rank_bound: usize) -> Self {
        let left = ComplexMatrix::from_fn(dim_a, rank_bound, |a, r| {
            if a < self.dim_a() && r < self.rank_bound() {
                self.left[(a, r)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let right = ComplexMatrix::from_fn(self.dim_b(), rank_bound, |b, r| {
            if r < self.rank_bound() {
                self.right[(b, r)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { left, right }
    }
}

/// Schmidt decomposition `ψ = Σ_i λ_i |a_i⟩|b_i⟩`.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Nonincreasing, nonnegative, squares summing to one.
    pub coefficients: Vec<f64>,
    /// `|a_i⟩` as columns (`dim_a × r`).
    pub left_vectors: ComplexMatrix,
    /// `|b_i⟩` as columns (`dim_b × r`).
    pub right_vectors: ComplexMatrix,
    pub vector: SchmidtVector,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.iter().filter(|&&s| s > RANK_TOL).count()
    }
}

pub fn schmidt_decompose(psi: &PureState, dim_a: usize, dim_b: usize) -> Result<SchmidtDecomposition> {
    if dim_a * dim_b != psi.dim() || dim_a == 0 {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} split as {dim_a}x{dim_b}",
            psi.dim()
        )));
    }
    let m = ComplexMatrix::unvectorize(dim_a, dim_b, psi.amplitudes())?;
    let s = svd(&m)?;
    let r = dim_a.min(dim_b);
    let coefficients = s.singular_values[..r].to_vec();
    let left_vectors = ComplexMatrix::from_fn(dim_a, r, |i, j| s.u[(i, j)]);
    // ψ = U Σ V†, so |b_i⟩ = conj(V[:, i]).
    let right_vectors = ComplexMatrix::from_fn(dim_b, r, |i, j| s.v[(i, j)].conj());
    let left = ComplexMatrix::from_fn(dim_a, r, |i, j| s.u[(i, j)] * coefficients[j]);
    let right = ComplexMatrix::from_fn(dim_b, r, |i, j| s.v[(i, j)]);
    Ok(SchmidtDecomposition {
        coefficients,
        left_vectors,
        right_vectors,
        vector: SchmidtVector::new(left, right)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

/// Seesaw settings. `restarts` counts random starts; a warm start, when
/// given, runs in addition to them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// When the rank bound is vacuous, solve the eigenproblem directly.
    pub exact_when_unconstrained: bool,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            max_iterations: 500,
            tolerance: 1e-10,
            exact_when_unconstrained: true,
        }
    }
}

impl SeesawOptions {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Achieved extremum of `⟨φ|h|φ⟩` and the vector that attains it.
#[derive(Clone, Debug)]
pub struct Extremum {
    pub value: f64,
    pub witness: SchmidtVector,
    pub restarts_used: usize,
    pub iterations: usize,
    /// Whether every seesaw run stayed monotone.
    pub monotone: bool,
}

struct RunResult {
    value: f64,
    witness: SchmidtVector,
    iterations: usize,
    monotone: bool,
}

/// Index of the extremal eigenvalue in an ascending list; ties resolve to the
/// smallest index.
fn extremal_index(values: &[f64], direction: Direction) -> usize {
    match direction {
        Direction::Min => 0,
        Direction::Max => {
            let top = *values.last().expect("nonempty");
            let tol = 1e-14 * top.abs().max(1.0);
            values.iter().position(|&v| v >= top - tol).expect("top exists")
        }
    }
}

/// Extremizes `⟨φ|h|φ⟩` over unit vectors of Schmidt rank `≤ k` on
/// `C^{dim_a} ⊗ C^{dim_b}` by alternating exact eigen-solves over the two
/// factors of `φ = vec(L R†)`. The returned value is always achieved by the
/// returned witness.
pub fn extremize_schmidt_k(
    h: &HermitianOperator,
    dim_a: usize,
    dim_b: usize,
    k: usize,
    direction: Direction,
    opts: &SeesawOptions,
    warm: Option<&SchmidtVector>,
) -> Result<Extremum> {
    if h.dim() != dim_a * dim_b {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} on {dim_a}x{dim_b}",
            h.dim()
        )));
    }
    if k == 0 || k > dim_a.min(dim_b) {
        return Err(Error::InvalidArgument(format!(
            "rank bound {k} outside [1, {}]",
            dim_a.min(dim_b)
        )));
    }
    if let Some(w) = warm {
        if w.dim_a() != dim_a || w.dim_b() != dim_b || w.rank_bound() > k {
            return Err(Error::DimensionMismatch("warm start has the wrong shape".into()));
        }
    }

    if opts.exact_when_unconstrained && k == dim_a.min(dim_b) {
        let e = eig_hermitian(h)?;
        let j = extremal_index(&e.values, direction);
        let psi = PureState::normalized(&e.vector(j))?;
        let witness = schmidt_decompose(&psi, dim_a, dim_b)?.vector;
        return Ok(Extremum {
            value: h.expectation(&witness.state()),
            witness,
            restarts_used: 1,
            iterations: 0,
            monotone: true,
        });
    }

    let sign = match direction {
        Direction::Max => 1.0,
        Direction::Min => -1.0,
    };
    let g = h.matrix().scale_real(sign);

    let n_runs = opts.restarts + usize::from(warm.is_some());
    let run = |idx: usize| -> Result<RunResult> {
        let start = match (warm, idx) {
            (Some(w), 0) => w.padded(dim_a, k),
            _ => {
                let mut rng = seeded_rng(opts.seed, idx as u64);
                let left = gaussian_matrix(dim_a, k, &mut rng);
                let right = gaussian_matrix(dim_b, k, &mut rng);
                SchmidtVector::new(left, right)?
            }
        };
        seesaw_run(&g, dim_a, dim_b, k, start, opts)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<RunResult>> = {
        use rayon::prelude::*;
        (0..n_runs).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<RunResult>> = (0..n_runs).map(run).collect();

    let mut best: Option<RunResult> = None;
    let mut monotone = true;
    let mut iterations = 0;
    for r in results {
        let r = r?;
        monotone &= r.monotone;
        iterations += r.iterations;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::InvalidArgument("at least one restart is required".into()))?;
    Ok(Extremum {
        value: h.expectation(&best.witness.state()),
        witness: best.witness,
        restarts_used: n_runs,
        iterations,
        monotone,
    })
}

/// One seesaw run maximizing `⟨φ|g|φ⟩`.
fn seesaw_run(
    g: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    k: usize,
    start: SchmidtVector,
    opts: &SeesawOptions,
) -> Result<RunResult> {
    let mut left = start.left;
    let mut right = start.right;
    let mut value = g.quadratic_form(&(&left * &right.adjoint()).into_vec()).re
        / (&left * &right.adjoint()).frobenius_norm().powi(2);
    let mut monotone = true;
    let mut iterations = 0;
    let slack = |v: f64| 1e-12 * v.abs().max(1.0);

    for _ in 0..opts.max_iterations {
        iterations += 1;
        let before = value;

        // Fix R as an isometry with the same column span, solve for L.
        right = thin_qr(&right).0;
        // φ = B l with B[(a,b),(a,r)] = conj(R[b,r]).
        let mut bmat = ComplexMatrix::zeros(dim_a * dim_b, dim_a * k);
        for a in 0..dim_a {
            for b in 0..dim_b {
                for r in 0..k {
                    bmat[(a * dim_b + b, a * k + r)] = right[(b, r)].conj();
                }
            }
        }
        let reduced = HermitianOperator::new_relative(&(&bmat.adjoint() * g) * &bmat)?;
        let e = eig_hermitian(&reduced)?;
        let j = extremal_index(&e.values, Direction::Max);
        let l = e.vector(j);
        left = ComplexMatrix::from_fn(dim_a, k, |a, r| l[a * k + r]);
        let v_half = e.values[j];
        if v_half < value - slack(value) {
            monotone = false;
        }
        value = value.max(v_half);

        // Fix L, solve for R.
        left = thin_qr(&left).0;
        // φ = C m with C[(a,b),(b,r)] = L[a,r] and m[b·k + r] = conj(R[b,r]).
        let mut cmat = ComplexMatrix::zeros(dim_a * dim_b, dim_b * k);
        for a in 0..dim_a {
            for b in 0..dim_b {
                for r in 0..k {
                    cmat[(a * dim_b + b, b * k + r)] = left[(a, r)];
                }
            }
        }
        let reduced = HermitianOperator::new_relative(&(&cmat.adjoint() * g) * &cmat)?;
        let e = eig_hermitian(&reduced)?;
        let j = extremal_index(&e.values, Direction::Max);
        let m = e.vector(j);
        right = ComplexMatrix::from_fn(dim_b, k, |b, r| m[b * k + r].conj());
        let v_full = e.values[j];
        if v_full < v_half - slack(v_half) {
            monotone = false;
        }
        value = value.max(v_full);

        if (value - before).abs() <= opts.tolerance * value.abs().max(1.0) {
            break;
        }
    }
    let witness = SchmidtVector::new(left, right)?;
    let achieved = g.quadratic_form(&witness.state()).re;
    Ok(RunResult {
        value: achieved,
        witness,
        iterations,
        monotone,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPositivity {
    /// A Schmidt-rank-`≤k` vector with negative Choi expectation was found.
    CertifiedNegative,
    /// No violation found over all restarts; heuristic.
    PresumedPositive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KPositivityVerdict {
    pub k: usize,
    pub outcome: KPositivity,
    pub min_value: f64,
    pub witness: SchmidtVector,
    pub restarts_used: usize,
    /// `min_value` lies within `±CERTIFICATE_TOL`.
    pub marginal: bool,
}

impl KPositivityVerdict {
    pub fn is_violation(&self) -> bool {
        self.outcome == KPositivity::CertifiedNegative
    }

    /// Recomputes `⟨witness|C|witness⟩` for the given map.
    pub fn reevaluate(&self, m: &HermitianMap) -> f64 {
        m.choi().expectation(&self.witness.state())
    }

    /// For `k = 1` violations of a map: a pure input state `x` such that
    /// `m(x)` has a negative eigenvalue, hence `‖m(x)‖_tr > 1` when `m` is TP.
    pub fn violating_input(&self) -> Option<DensityOperator> {
        if !self.is_violation() || self.k != 1 {
            return None;
        }
        // φ = l ⊗ conj(r), and ⟨φ|C|φ⟩ = ⟨r̄|m(|l̄⟩⟨l̄|)|r̄⟩ with l̄ = conj(l).
        let l: Vec<C64> = self.witness.left_factor().col(0).iter().map(|z| z.conj()).collect();
        PureState::normalized(&l).ok().map(|s| DensityOperator::from_pure(&s))
    }
}

/// Tests k-positivity of a square map through block positivity of its Choi
/// matrix over Schmidt-rank-`≤k` vectors.
pub fn k_positivity(m: &HermitianMap, k: usize, opts: &SeesawOptions) -> Result<KPositivityVerdict> {
    let d = m.dim_in();
    if m.dim_out() != d {
        return Err(Error::DimensionMismatch("k-positivity needs a square map".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {d}]")));
    }
    let ext = extremize_schmidt_k(m.choi(), d, d, k, Direction::Min, opts, None)?;
    let outcome = if ext.value < -CERTIFICATE_TOL {
        KPositivity::CertifiedNegative
    } else {
        KPositivity::PresumedPositive
    };
    Ok(KPositivityVerdict {
        k,
        outcome,
        min_value: ext.value,
        marginal: ext.value.abs() <= CERTIFICATE_TOL,
        witness: ext.witness,
        restarts_used: ext.restarts_used,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdvantageCertificate {
    /// `‖(1−p)(id⊗Φ₁)[ρ] − p(id⊗Φ₂)[ρ]‖_tr`.
    pub lhs: f64,
    /// Single-system distinguishability `D₁ᵖ[Φ₁, Φ₂]`.
    pub d1: f64,
    /// `lhs > d1 + tolerance`; certifies that `ρ` is entangled.
    pub advantage: bool,
}

/// Compares the ancilla-assisted trace distance at `rho` (on `C^d ⊗ C^d`)
/// with the best unassisted distance.
pub fn advantage_certificate(
    rho: &DensityOperator,
    phi1: &Channel,
    phi2: &Channel,
    p: f64,
    opts: &SeesawOptions,
) -> Result<AdvantageCertificate> {
    discrimination::check_probability(p)?;
    let d = phi1.dim();
    if rho.dim() != d * d || phi2.dim() != d {
        return Err(Error::DimensionMismatch("state and channels disagree on dimension".into()));
    }
    let delta = HermitianMap::linear_combination(&[(1.0 - p, phi1.map()), (-p, phi2.map())])?;
    let out = HermitianOperator::new_relative(delta.apply_extended(d, rho.matrix())?)?;
    let lhs = trace_norm(&out)?;
    let inst = DiscriminationInstance::new(phi1.clone(), phi2.clone(), p, 1)?;
    let d1 = discrimination::channel_distinguishability(&inst, opts, None)?.value;
    Ok(AdvantageCertificate {
        lhs,
        d1,
        advantage: lhs > d1 + CERTIFICATE_TOL,
    })
}
