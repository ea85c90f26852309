//! p-distinguishability of states, classical channels and ancilla-assisted
//! quantum channels; min-entropy; monotonicity traces and witness search.
//!
//! Channel distinguishability values are achieved objectives, so they are
//! lower bounds on the true optimum. A flagged increase in a monotonicity
//! trace is therefore a genuine witness of indivisibility, while the absence
//! of increases is evidence only.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::channels::{
    extremize_schmidt_k, schmidt_decompose, Channel, Direction, HermitianMap, SchmidtVector, SeesawOptions,
};
use crate::dynamics::classical::{RealMatrix, StochasticTrajectory};
use crate::dynamics::{derive_seed, MapTrajectory};
use crate::error::{Error, Result};
use crate::linops::{
    complex_gaussian, eig_hermitian, seeded_rng, trace_norm, ComplexMatrix, DensityOperator,
    HermitianOperator, PureState, C64,
};

/// Default absolute increase that counts as a violation.
pub const VIOLATION_THRESHOLD: f64 = 1e-7;
/// Increases above this but below the violation threshold are inconclusive.
pub const INCONCLUSIVE_FLOOR: f64 = 1e-10;
/// Classical traces are exact; only rounding needs absorbing.
pub const CLASSICAL_THRESHOLD: f64 = 1e-9;
/// Relative gap under which two achieved values count as tied.
pub const TIE_TOL: f64 = 1e-12;

pub fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// `‖(1−p)ρ₁ − pρ₂‖_tr`.
pub fn state_distinguishability(rho1: &DensityOperator, rho2: &DensityOperator, p: f64) -> Result<f64> {
    check_probability(p)?;
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch("states differ in dimension".into()));
    }
    let diff = rho1.operator().scale(1.0 - p).sub(&rho2.operator().scale(p));
    trace_norm(&diff)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HelstromMeasurement {
    /// Projector `M` onto the nonnegative eigenspace; outcome `M` guesses branch one.
    pub projector: HermitianOperator,
    pub guessing_probability: f64,
    pub distinguishability: f64,
}

pub fn helstrom_measurement(rho1: &DensityOperator, rho2: &DensityOperator, p: f64) -> Result<HelstromMeasurement> {
    check_probability(p)?;
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch("states differ in dimension".into()));
    }
    helstrom_weighted(&rho1.operator().scale(1.0 - p), &rho2.operator().scale(p))
}

/// Helstrom measurement for already weighted branches `a = q₁ρ₁`, `b = q₂ρ₂`.
pub fn helstrom_weighted(a: &HermitianOperator, b: &HermitianOperator) -> Result<HelstromMeasurement> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("branches differ in dimension".into()));
    }
    let diff = a.sub(b);
    let e = eig_hermitian(&diff)?;
    let projector = HermitianOperator::new_relative(e.spectral_projector(|l| l >= 0.0))?;
    let complement = &ComplexMatrix::identity(a.dim()) - projector.matrix();
    let guess = (projector.matrix() * a.matrix()).trace().re + (&complement * b.matrix()).trace().re;
    Ok(HelstromMeasurement {
        projector,
        guessing_probability: guess,
        distinguishability: e.values.iter().map(|l| l.abs()).sum(),
    })
}

fn classical_vertex_max(s1: &RealMatrix, s2: &RealMatrix, p: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for j in 0..s1.cols() {
        let v: f64 = (0..s1.rows())
            .map(|x| ((1.0 - p) * s1.get(x, j) - p * s2.get(x, j)).abs())
            .sum();
        if v > best.0 {
            best = (v, j);
        }
    }
    best
}

/// `max_𝐩 Σ_x |(1−p)(S₁𝐩)(x) − p(S₂𝐩)(x)|`, attained at a vertex of the
/// simplex since the objective is convex. Returns the value and the vertex.
pub fn classical_channel_distinguishability(s1: &RealMatrix, s2: &RealMatrix, p: f64) -> Result<(f64, usize)> {
    check_probability(p)?;
    s1.check_stochastic()?;
    s2.check_stochastic()?;
    if s1.rows() != s2.rows() || s1.cols() != s2.cols() {
        return Err(Error::DimensionMismatch("classical channels differ in shape".into()));
    }
    Ok(classical_vertex_max(s1, s2, p))
}

/// Two channels, a prior `(1−p, p)` and an ancilla of dimension `k`.
#[derive(Clone, Debug)]
pub struct DiscriminationInstance {
    phi1: Channel,
    phi2: Channel,
    p: f64,
    k: usize,
    delta: HermitianMap,
    delta_adjoint: HermitianMap,
}

impl DiscriminationInstance {
    pub fn new(phi1: Channel, phi2: Channel, p: f64, k: usize) -> Result<Self> {
        check_probability(p)?;
        let d = phi1.dim();
        if phi2.dim() != d || phi1.map().dim_out() != d || phi2.map().dim_out() != d {
            return Err(Error::DimensionMismatch("channels must share one square dimension".into()));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("k = {k} outside [1, {d}]")));
        }
        let delta = HermitianMap::linear_combination(&[(1.0 - p, phi1.map()), (-p, phi2.map())])?;
        let delta_adjoint = delta.adjoint();
        Ok(Self {
            phi1,
            phi2,
            p,
            k,
            delta,
            delta_adjoint,
        })
    }

    pub fn phi1(&self) -> &Channel {
        &self.phi1
    }

    pub fn phi2(&self) -> &Channel {
        &self.phi2
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.phi1.dim()
    }

    /// `(1−p)Φ₁ − pΦ₂`.
    pub fn difference_map(&self) -> &HermitianMap {
        &self.delta
    }

    /// Same instance with both channels followed by `lambda`.
    pub fn precomposed(&self, lambda: &Channel) -> Result<Self> {
        Self::new(
            Channel::compose(lambda, &self.phi1)?,
            Channel::compose(lambda, &self.phi2)?,
            self.p,
            self.k,
        )
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.phi1.clone(), self.phi2.clone(), self.p, k)
    }

    fn output(&self, psi: &[C64]) -> Result<HermitianOperator> {
        let rho = ComplexMatrix::outer(psi);
        HermitianOperator::new_relative(self.delta.apply_extended(self.k, &rho)?)
    }

    /// Objective at a (possibly mixed) input on `C^k ⊗ C^d`.
    pub fn objective_mixed(&self, rho: &DensityOperator) -> Result<f64> {
        if rho.dim() != self.k * self.dim() {
            return Err(Error::DimensionMismatch("input lives on the wrong space".into()));
        }
        let out = HermitianOperator::new_relative(self.delta.apply_extended(self.k, rho.matrix())?)?;
        trace_norm(&out)
    }

    /// Objective at a pure input on `C^k ⊗ C^d`.
    pub fn objective(&self, psi: &PureState) -> Result<f64> {
        if psi.dim() != self.k * self.dim() {
            return Err(Error::DimensionMismatch("input lives on the wrong space".into()));
        }
        trace_norm(&self.output(psi.amplitudes())?)
    }

    /// Re-evaluates a stored witness.
    pub fn evaluate_input(&self, input: &SchmidtVector) -> Result<f64> {
        self.objective(&input.pure_state())
    }
}

/// Achieved value of `D_k^p` with its witness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistinguishabilityResult {
    pub k: usize,
    pub p: f64,
    pub value: f64,
    pub optimal_input: SchmidtVector,
    /// Numerical Schmidt rank of the optimal input (may be below `k`).
    pub input_rank: usize,
    pub helstrom_projector: HermitianOperator,
    pub guessing_probability: f64,
    pub restarts: usize,
    pub seed: u64,
    pub iterations: usize,
    pub monotone: bool,
}

struct Run {
    value: f64,
    state: Vec<C64>,
    iterations: usize,
    monotone: bool,
}

fn sign_operator(x: &HermitianOperator) -> Result<(f64, ComplexMatrix)> {
    let e = eig_hermitian(x)?;
    let value = e.values.iter().map(|l| l.abs()).sum();
    let proj = e.spectral_projector(|l| l >= 0.0);
    let s = &proj.scale_real(2.0) - &ComplexMatrix::identity(x.dim());
    Ok((value, s))
}

fn seesaw(inst: &DiscriminationInstance, start: Vec<C64>, opts: &SeesawOptions) -> Result<Run> {
    let (k, d) = (inst.k, inst.dim());
    let inner = SeesawOptions {
        restarts: 1,
        exact_when_unconstrained: true,
        ..*opts
    };
    let mut state = start;
    let (mut value, mut sign) = sign_operator(&inst.output(&state)?)?;
    let mut monotone = true;
    let mut iterations = 0;
    for _ in 0..opts.max_iterations {
        iterations += 1;
        // ⟨φ|W|φ⟩ = tr(S X(φ)) ≤ ‖X(φ)‖_tr, with equality at the current φ.
        let w = HermitianOperator::new_relative(inst.delta_adjoint.apply_extended(k, &sign)?)?;
        let ext = extremize_schmidt_k(&w, k, d, k, Direction::Max, &inner, None)?;
        let next = ext.witness.state();
        let (next_value, next_sign) = sign_operator(&inst.output(&next)?)?;
        if next_value < value - 1e-12 * value.max(1.0) {
            monotone = false;
            break;
        }
        let change = next_value - value;
        state = next;
        value = next_value;
        sign = next_sign;
        if change <= opts.tolerance * value.max(1.0) {
            break;
        }
    }
    Ok(Run {
        value,
        state,
        iterations,
        monotone,
    })
}

/// Maximizes `‖(id_k ⊗ Δ)[|φ⟩⟨φ|]‖_tr` over pure `φ ∈ C^k ⊗ C^d` by
/// alternating the Helstrom projector and the pulled-back eigenproblem.
/// `warm`, when given, runs in addition to `opts.restarts` random starts.
pub fn channel_distinguishability(
    inst: &DiscriminationInstance,
    opts: &SeesawOptions,
    warm: Option<&SchmidtVector>,
) -> Result<DistinguishabilityResult> {
    let (k, d) = (inst.k, inst.dim());
    if let Some(w) = warm {
        if w.dim_a() != k || w.dim_b() != d {
            return Err(Error::DimensionMismatch("warm start has the wrong shape".into()));
        }
    }
    let n_runs = opts.restarts + usize::from(warm.is_some());
    if n_runs == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let run = |idx: usize| -> Result<Run> {
        let start = match (warm, idx) {
            (Some(w), 0) => w.state(),
            _ => {
                let mut rng = seeded_rng(opts.seed, idx as u64);
                (0..k * d).map(|_| complex_gaussian(&mut rng)).collect()
            }
        };
        let start = PureState::normalized(&start)?.amplitudes().to_vec();
        seesaw(inst, start, opts)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<Run>> = {
        use rayon::prelude::*;
        (0..n_runs).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Run>> = (0..n_runs).map(run).collect();

    let mut best: Option<Run> = None;
    let mut iterations = 0;
    let mut monotone = true;
    for r in results {
        let r = r?;
        iterations += r.iterations;
        monotone &= r.monotone;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    let mut best = best.expect("n_runs > 0");
    // Covariant pairs (Pauli, depolarizing) have flat optimal sets that reach
    // from product states to the maximally entangled input; report the latter
    // when it is optimal.
    if k == d {
        let me = PureState::maximally_entangled(d);
        let v = inst.objective(&me)?;
        if v >= best.value - TIE_TOL * best.value.abs().max(1.0) {
            best = Run {
                value: v,
                state: me.amplitudes().to_vec(),
                iterations: 0,
                monotone: true,
            };
        }
    }
    let psi = PureState::normalized(&best.state)?;
    let decomposition = schmidt_decompose(&psi, k, d)?;
    let optimal_input = decomposition.vector;
    let out = inst.output(&optimal_input.state())?;
    let e = eig_hermitian(&out)?;
    let value: f64 = e.values.iter().map(|l| l.abs()).sum();
    let helstrom_projector = HermitianOperator::new_relative(e.spectral_projector(|l| l >= 0.0))?;
    Ok(DistinguishabilityResult {
        k,
        p: inst.p,
        value,
        input_rank: decomposition.coefficients.iter().filter(|&&s| s > crate::channels::RANK_TOL).count(),
        optimal_input,
        helstrom_projector,
        guessing_probability: 0.5 * (1.0 + value),
        restarts: n_runs,
        seed: opts.seed,
        iterations,
        monotone,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hierarchy {
    pub p: f64,
    /// `values[k−1] = D_k`.
    pub values: Vec<f64>,
    pub results: Vec<DistinguishabilityResult>,
    pub monotone: bool,
}

/// `D_1 ≤ … ≤ D_d`, each level warm-started from the previous witness.
pub fn hierarchy_check(phi1: &Channel, phi2: &Channel, p: f64, opts: &SeesawOptions) -> Result<Hierarchy> {
    let d = phi1.dim();
    let mut results: Vec<DistinguishabilityResult> = Vec::with_capacity(d);
    for k in 1..=d {
        let inst = DiscriminationInstance::new(phi1.clone(), phi2.clone(), p, k)?;
        let warm = results.last().map(|r| r.optimal_input.padded(k, k));
        let o = SeesawOptions {
            seed: derive_seed(opts.seed, k as u64),
            ..*opts
        };
        results.push(channel_distinguishability(&inst, &o, warm.as_ref())?);
    }
    let values: Vec<f64> = results.iter().map(|r| r.value).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    Ok(Hierarchy {
        p,
        values,
        results,
        monotone,
    })
}

/// `Σ_i q_i |i⟩⟨i| ⊗ (id_k ⊗ Λ∘Φ_i)[ρ]` with `q = (1−p, p)`.
pub fn cq_state_for(inst: &DiscriminationInstance, lambda: &Channel, input: &DensityOperator) -> Result<DensityOperator> {
    let (k, d) = (inst.k, inst.dim());
    if input.dim() != k * d || lambda.dim() != d {
        return Err(Error::DimensionMismatch("cq input or evolution has the wrong dimension".into()));
    }
    let b1 = Channel::compose(lambda, &inst.phi1)?.map().apply_extended(k, input.matrix())?;
    let b2 = Channel::compose(lambda, &inst.phi2)?.map().apply_extended(k, input.matrix())?;
    let n = k * d;
    let q = [1.0 - inst.p, inst.p];
    let m = ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| {
        match (r / n, c / n) {
            (0, 0) => b1[(r, c)] * q[0],
            (1, 1) => b2[(r - n, c - n)] * q[1],
            _ => C64::new(0.0, 0.0),
        }
    });
    DensityOperator::from_matrix(m)
}

/// cq state at grid time `t`. Without an explicit input the optimal
/// witness of `D_k` at that time is used.
pub fn cq_state(
    inst: &DiscriminationInstance,
    traj: &MapTrajectory,
    t: f64,
    input: Option<&DensityOperator>,
    opts: &SeesawOptions,
) -> Result<DensityOperator> {
    let lambda = traj.map_at(traj.grid().index_of(t)?);
    match input {
        Some(rho) => cq_state_for(inst, lambda, rho),
        None => {
            let r = channel_distinguishability(&inst.precomposed(lambda)?, opts, None)?;
            cq_state_for(inst, lambda, &DensityOperator::from_pure(&r.optimal_input.pure_state()))
        }
    }
}

/// Optimal guessing probability of the register of a cq state whose
/// conditional blocks have dimension `branch_dim`.
pub fn cq_guessing_probability(cq: &DensityOperator, branch_dim: usize) -> Result<f64> {
    if cq.dim() != 2 * branch_dim {
        return Err(Error::DimensionMismatch("cq state is not a two-branch register".into()));
    }
    let n = branch_dim;
    let m = cq.matrix();
    let a = HermitianOperator::new_relative(ComplexMatrix::from_fn(n, n, |r, c| m[(r, c)]))?;
    let b = HermitianOperator::new_relative(ComplexMatrix::from_fn(n, n, |r, c| m[(r + n, c + n)]))?;
    Ok(helstrom_weighted(&a, &b)?.guessing_probability)
}

/// `−log₂ p_guess`.
pub fn min_entropy_from_guess(p_guess: f64) -> f64 {
    -p_guess.log2()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinEntropy {
    pub time: f64,
    pub distinguishability: f64,
    pub guessing_probability: f64,
    pub h_min: f64,
    /// Guessing probability from a direct Helstrom measurement on the cq state.
    pub cq_guessing_probability: f64,
    pub input: SchmidtVector,
}

/// `H_min(A|B) = −log₂((1 + D_k^p[Λ_t∘Φ₁, Λ_t∘Φ₂]) / 2)` with the direct cq
/// cross-check at the optimal input.
pub fn min_entropy(
    inst: &DiscriminationInstance,
    traj: &MapTrajectory,
    t: f64,
    opts: &SeesawOptions,
) -> Result<MinEntropy> {
    let lambda = traj.map_at(traj.grid().index_of(t)?);
    let r = channel_distinguishability(&inst.precomposed(lambda)?, opts, None)?;
    let cq = cq_state_for(inst, lambda, &DensityOperator::from_pure(&r.optimal_input.pure_state()))?;
    Ok(MinEntropy {
        time: t,
        distinguishability: r.value,
        guessing_probability: r.guessing_probability,
        h_min: min_entropy_from_guess(r.guessing_probability),
        cq_guessing_probability: cq_guessing_probability(&cq, inst.k * inst.dim())?,
        input: r.optimal_input,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityOptions {
    pub seesaw: SeesawOptions,
    /// Random restarts added to the warm start after the first time step.
    pub warm_restarts: usize,
    /// Re-randomize at every step instead of warm-starting.
    pub cold_start: bool,
    pub violation_threshold: f64,
    /// Backward pass that re-optimizes each time from the next time's witness.
    pub refine: bool,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            seesaw: SeesawOptions::default(),
            warm_restarts: 2,
            cold_start: false,
            violation_threshold: VIOLATION_THRESHOLD,
            refine: true,
        }
    }
}

/// An increase of `D` between consecutive grid times `from < time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub from: f64,
    pub time: f64,
    pub increase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityTrace {
    pub k: usize,
    pub p: f64,
    pub seed: u64,
    pub cold_start: bool,
    pub violation_threshold: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub h_min: Vec<f64>,
    pub witnesses: Vec<SchmidtVector>,
    pub violations: Vec<Violation>,
    pub inconclusive: Vec<Violation>,
    /// Largest `D(t_{i+1}) − D(t_i)`; negative when strictly decreasing.
    pub max_increase: f64,
    /// Seesaw runs summed over all times and both passes.
    pub restarts: usize,
}

impl MonotonicityTrace {
    /// Whether an increase was flagged at grid index `i` (arrival time).
    pub fn flagged(&self, i: usize) -> bool {
        i > 0 && self.violations.iter().any(|v| v.time == self.times[i])
    }
}

fn finite_differences(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    (0..n)
        .map(|i| match n {
            0 | 1 => 0.0,
            _ if i + 1 < n => (values[i + 1] - values[i]) / (times[i + 1] - times[i]),
            _ => (values[i] - values[i - 1]) / (times[i] - times[i - 1]),
        })
        .collect()
}

fn classify_increases(
    times: &[f64],
    values: &[f64],
    threshold: f64,
) -> (Vec<Violation>, Vec<Violation>, f64) {
    let mut violations = Vec::new();
    let mut inconclusive = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    for i in 1..values.len() {
        let v = Violation {
            from: times[i - 1],
            time: times[i],
            increase: values[i] - values[i - 1],
        };
        max_increase = max_increase.max(v.increase);
        if v.increase > threshold {
            violations.push(v);
        } else if v.increase > INCONCLUSIVE_FLOOR {
            inconclusive.push(v);
        }
    }
    if values.len() < 2 {
        max_increase = 0.0;
    }
    (violations, inconclusive, max_increase)
}

/// `D_k^p[Λ_t∘Φ₁, Λ_t∘Φ₂]` along a trajectory.
///
/// The forward pass warm-starts each time from the previous witness. The
/// backward pass then lifts `D(t_i)` to at least the objective of the witness
/// at `t_{i+1}`, so every flagged increase is an increase at one fixed input
/// and hence a genuine witness.
pub fn monotonicity_trace(
    traj: &MapTrajectory,
    phi1: &Channel,
    phi2: &Channel,
    p: f64,
    k: usize,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityTrace> {
    let base = DiscriminationInstance::new(phi1.clone(), phi2.clone(), p, k)?;
    let instances = traj
        .maps()
        .iter()
        .map(|lambda| base.precomposed(lambda))
        .collect::<Result<Vec<_>>>()?;
    trace_over(traj.times(), &instances, opts)
}

fn trace_over(
    times: &[f64],
    instances: &[DiscriminationInstance],
    opts: &MonotonicityOptions,
) -> Result<MonotonicityTrace> {
    let (k, p) = (instances[0].k, instances[0].p);
    let mut results: Vec<DistinguishabilityResult> = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let warm = if opts.cold_start { None } else { results.last().map(|r| &r.optimal_input) };
        let restarts = if warm.is_some() { opts.warm_restarts } else { opts.seesaw.restarts.max(1) };
        let o = SeesawOptions {
            restarts,
            seed: derive_seed(opts.seesaw.seed, i as u64),
            ..opts.seesaw
        };
        let r = channel_distinguishability(inst, &o, warm)?;
        results.push(r);
    }
    if opts.refine {
        let o = SeesawOptions {
            restarts: 0,
            ..opts.seesaw
        };
        for i in (0..instances.len().saturating_sub(1)).rev() {
            let lifted = channel_distinguishability(&instances[i], &o, Some(&results[i + 1].optimal_input))?;
            if lifted.value > results[i].value {
                let restarts = results[i].restarts + lifted.restarts;
                results[i] = DistinguishabilityResult { restarts, ..lifted };
            }
        }
    }
    let values: Vec<f64> = results.iter().map(|r| r.value).collect();
    let (violations, inconclusive, max_increase) = classify_increases(times, &values, opts.violation_threshold);
    let restarts = results.iter().map(|r| r.restarts).sum();
    Ok(MonotonicityTrace {
        k,
        p,
        seed: opts.seesaw.seed,
        cold_start: opts.cold_start,
        violation_threshold: opts.violation_threshold,
        times: times.to_vec(),
        derivatives: finite_differences(times, &values),
        h_min: results.iter().map(|r| min_entropy_from_guess(r.guessing_probability)).collect(),
        witnesses: results.into_iter().map(|r| r.optimal_input).collect(),
        values,
        violations,
        inconclusive,
        max_increase,
        restarts,
    })
}

/// Re-evaluates every witness of a trace; returns the largest deviation
/// from the recorded values.
pub fn revalidate_trace(
    traj: &MapTrajectory,
    phi1: &Channel,
    phi2: &Channel,
    trace: &MonotonicityTrace,
) -> Result<f64> {
    let base = DiscriminationInstance::new(phi1.clone(), phi2.clone(), trace.p, trace.k)?;
    let mut worst: f64 = 0.0;
    for (i, w) in trace.witnesses.iter().enumerate() {
        let idx = traj.grid().index_of(trace.times[i])?;
        let v = base.precomposed(traj.map_at(idx))?.evaluate_input(w)?;
        worst = worst.max((v - trace.values[i]).abs());
    }
    Ok(worst)
}

/// Candidate channel families for witness search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFamily {
    /// Qubit Pauli channels with Dirichlet(½) weights.
    Pauli,
    /// Unitary channels, Haar distributed.
    Unitary,
    /// Random channels of fixed Kraus rank.
    RandomKraus { rank: usize },
    /// Cycles through the other families.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearchOptions {
    pub family: ChannelFamily,
    /// Number of candidate pairs screened.
    pub budget: usize,
    pub seed: u64,
    /// Fixed prior; sampled from `[0.05, 0.95]` per candidate when absent.
    pub p: Option<f64>,
    /// Consecutive time pairs examined per candidate during screening.
    pub screen_points: usize,
    /// Random restarts per screening evaluation.
    pub screen_restarts: usize,
    /// Candidates drawn at random before local refinement starts.
    pub explore: usize,
    /// Best screened candidates re-checked with a full trace.
    pub verify: usize,
    pub trace: MonotonicityOptions,
}

impl Default for WitnessSearchOptions {
    fn default() -> Self {
        Self {
            family: ChannelFamily::Mixed,
            budget: 200,
            seed: 0,
            p: None,
            screen_points: 12,
            screen_restarts: 3,
            explore: 60,
            verify: 3,
            trace: MonotonicityOptions {
                seesaw: SeesawOptions::default().with_restarts(8),
                ..MonotonicityOptions::default()
            },
        }
    }
}

/// A channel pair with its prior, stored through Choi matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelPair {
    pub label: String,
    pub p: f64,
    pub phi1_choi: HermitianOperator,
    pub phi2_choi: HermitianOperator,
}

impl ChannelPair {
    pub fn channels(&self) -> Result<(Channel, Channel)> {
        let d = (self.phi1_choi.dim() as f64).sqrt().round() as usize;
        Ok((
            Channel::from_choi(d, d, self.phi1_choi.clone())?,
            Channel::from_choi(d, d, self.phi2_choi.clone())?,
        ))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub pair: ChannelPair,
    pub from: f64,
    pub time: f64,
    pub increase: f64,
    pub trace: MonotonicityTrace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessSearchResult {
    pub k: usize,
    pub budget: usize,
    pub seed: u64,
    pub candidates_screened: usize,
    /// Largest one-step increase seen while screening; `None` when every
    /// screened trace was flat.
    pub best_screen_increase: Option<f64>,
    /// Largest increase in the verified full traces.
    pub best_increase: f64,
    pub witness: Option<Witness>,
}

impl WitnessSearchResult {
    pub fn found(&self) -> bool {
        self.witness.is_some()
    }
}

/// Parameters of one candidate pair; every family decodes from i.i.d.
/// standard normals, so local moves are Gaussian perturbations.
#[derive(Clone, Debug)]
struct Genome {
    family: ChannelFamily,
    z: Vec<f64>,
}

const ELITE: usize = 4;
const BATCH: usize = 8;
const SIGMA0: f64 = 0.5;
const SIGMA_DECAY: f64 = 0.9;

fn channel_params(family: ChannelFamily, d: usize) -> usize {
    match family {
        ChannelFamily::Pauli => 4,
        ChannelFamily::Unitary => 2 * d * d,
        ChannelFamily::RandomKraus { rank } => 2 * rank * d * d,
        ChannelFamily::Mixed => unreachable!("resolved before decoding"),
    }
}

fn family_label(family: ChannelFamily) -> &'static str {
    match family {
        ChannelFamily::Pauli => "pauli",
        ChannelFamily::Unitary => "unitary",
        ChannelFamily::RandomKraus { .. } => "random_kraus",
        ChannelFamily::Mixed => "mixed",
    }
}

/// Squared normals normalize to Dirichlet(½) weights; a Gaussian matrix
/// orthonormalizes to a Haar isometry.
fn decode_channel(family: ChannelFamily, d: usize, z: &[f64]) -> Result<Channel> {
    match family {
        ChannelFamily::Pauli => {
            let sq: Vec<f64> = z.iter().map(|x| x * x).collect();
            let total: f64 = sq.iter().sum();
            if !(total > 0.0) {
                return Channel::pauli([1.0, 0.0, 0.0, 0.0]);
            }
            Channel::pauli([sq[0] / total, sq[1] / total, sq[2] / total, sq[3] / total])
        }
        ChannelFamily::Unitary | ChannelFamily::RandomKraus { .. } => {
            let rank = match family {
                ChannelFamily::RandomKraus { rank } => rank,
                _ => 1,
            };
            let g = ComplexMatrix::from_fn(rank * d, d, |r, c| {
                let i = 2 * (r * d + c);
                C64::new(z[i], z[i + 1])
            });
            let (v, _) = crate::linops::thin_qr(&g);
            let ops: Vec<ComplexMatrix> = (0..rank)
                .map(|alpha| ComplexMatrix::from_fn(d, d, |a, i| v[(alpha * d + a, i)]))
                .collect();
            Channel::from_kraus(&ops)
        }
        ChannelFamily::Mixed => unreachable!("resolved before decoding"),
    }
}

fn resolve_family(family: ChannelFamily, d: usize, index: usize) -> ChannelFamily {
    match family {
        ChannelFamily::Mixed => {
            let choices: &[ChannelFamily] = if d == 2 {
                &[ChannelFamily::Pauli, ChannelFamily::Unitary, ChannelFamily::RandomKraus { rank: 2 }]
            } else {
                &[ChannelFamily::Unitary, ChannelFamily::RandomKraus { rank: 2 }]
            };
            choices[index % choices.len()]
        }
        f => f,
    }
}

fn random_genome(family: ChannelFamily, d: usize, rng: &mut impl Rng) -> Genome {
    let n = 2 * channel_params(family, d) + 1;
    let normal = rand_distr::StandardNormal;
    Genome {
        family,
        z: (0..n).map(|_| normal.sample(rng)).collect(),
    }
}

impl Genome {
    fn decode(&self, d: usize, fixed_p: Option<f64>) -> Result<(Channel, Channel, f64, String)> {
        let n = channel_params(self.family, d);
        let a = decode_channel(self.family, d, &self.z[..n])?;
        let b = decode_channel(self.family, d, &self.z[n..2 * n])?;
        let p = fixed_p.unwrap_or_else(|| 0.05 + 0.9 / (1.0 + (-self.z[2 * n]).exp()));
        let l = family_label(self.family);
        Ok((a, b, p, format!("{l}/{l}")))
    }

    fn mutated(&self, sigma: f64, rng: &mut impl Rng) -> Genome {
        let normal = rand_distr::StandardNormal;
        Genome {
            family: self.family,
            z: self
                .z
                .iter()
                .map(|x| {
                    let e: f64 = normal.sample(rng);
                    x + sigma * e
                })
                .collect(),
        }
    }
}

fn par_map<T: Send, U: Send>(items: Vec<T>, f: impl Fn(T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Randomized search for a channel pair whose distinguishability increases
/// along the trajectory.
///
/// Candidates are screened on a few consecutive time pairs, where the earlier
/// value is lifted by the later witness so that any positive screen score is
/// a genuine increase. A random exploration phase is followed by Gaussian
/// perturbations of the best candidates; traces that stay flat score lowest.
/// The top candidates are then verified with full monotonicity traces.
/// Deterministic per seed.
pub fn witness_search(traj: &MapTrajectory, k: usize, opts: &WitnessSearchOptions) -> Result<WitnessSearchResult> {
    if opts.budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    if traj.len() < 2 {
        return Err(Error::InvalidArgument("trajectory needs at least two times".into()));
    }
    if let Some(p) = opts.p {
        check_probability(p)?;
    }
    let d = traj.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {d}]")));
    }
    let pairs = traj.len() - 1;
    let points = opts.screen_points.clamp(1, pairs);
    let sample_idx: Vec<usize> = (0..points).map(|j| (j * pairs) / points + (pairs / points) / 2).collect();

    let screen = |(index, genome): (usize, Genome)| -> Result<(Genome, f64)> {
        let (a, b, p, _) = genome.decode(d, opts.p)?;
        let base = DiscriminationInstance::new(a, b, p, k)?;
        let mut best = f64::NEG_INFINITY;
        for (j, &i) in sample_idx.iter().enumerate() {
            let so = SeesawOptions {
                restarts: opts.screen_restarts.max(1),
                seed: derive_seed(derive_seed(opts.seed, index as u64), j as u64),
                ..opts.trace.seesaw
            };
            let later = channel_distinguishability(&base.precomposed(traj.map_at(i + 1))?, &so, None)?;
            let now = channel_distinguishability(&base.precomposed(traj.map_at(i))?, &so, Some(&later.optimal_input))?;
            let inc = later.value - now.value;
            if inc.abs() > 1e-12 {
                best = best.max(inc);
            }
        }
        Ok((genome, best))
    };

    let explore = opts.explore.clamp(1, opts.budget);
    let initial: Vec<(usize, Genome)> = (0..explore)
        .map(|i| {
            let mut rng = seeded_rng(opts.seed, i as u64);
            (i, random_genome(resolve_family(opts.family, d, i), d, &mut rng))
        })
        .collect();
    let mut population = par_map(initial, screen).into_iter().collect::<Result<Vec<_>>>()?;

    let mut round = 0;
    while population.len() < opts.budget {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&x, &y| population[y].1.total_cmp(&population[x].1).then(x.cmp(&y)));
        let sigma = SIGMA0 * SIGMA_DECAY.powi(round);
        let batch: Vec<(usize, Genome)> = (0..BATCH.min(opts.budget - population.len()))
            .map(|m| {
                let index = population.len() + m;
                let parent = &population[ranked[m % ELITE.min(ranked.len())]].0;
                let mut rng = seeded_rng(opts.seed, index as u64);
                (index, parent.mutated(sigma, &mut rng))
            })
            .collect();
        let scored = par_map(batch, screen).into_iter().collect::<Result<Vec<_>>>()?;
        population.extend(scored);
        round += 1;
    }

    let mut ranked: Vec<usize> = (0..population.len()).collect();
    ranked.sort_by(|&x, &y| population[y].1.total_cmp(&population[x].1).then(x.cmp(&y)));
    let top_score = population[ranked[0]].1;

    let mut best_increase = f64::NEG_INFINITY;
    let mut witness: Option<Witness> = None;
    for &index in ranked.iter().take(opts.verify.max(1)) {
        let (a, b, p, label) = population[index].0.decode(d, opts.p)?;
        let trace = monotonicity_trace(traj, &a, &b, p, k, &opts.trace)?;
        best_increase = best_increase.max(trace.max_increase);
        let top = trace
            .violations
            .iter()
            .copied()
            .fold(None::<Violation>, |m, v| match m {
                Some(b) if b.increase >= v.increase => Some(b),
                _ => Some(v),
            });
        if let Some(v) = top {
            if witness.as_ref().is_none_or(|w| v.increase > w.increase) {
                witness = Some(Witness {
                    pair: ChannelPair {
                        label,
                        p,
                        phi1_choi: a.map().choi().clone(),
                        phi2_choi: b.map().choi().clone(),
                    },
                    from: v.from,
                    time: v.time,
                    increase: v.increase,
                    trace,
                });
            }
        }
    }
    Ok(WitnessSearchResult {
        k,
        budget: opts.budget,
        seed: opts.seed,
        candidates_screened: population.len(),
        best_screen_increase: top_score.is_finite().then_some(top_score),
        best_increase,
        witness,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalTrace {
    pub p: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub vertices: Vec<usize>,
    pub derivatives: Vec<f64>,
    pub violations: Vec<Violation>,
    pub max_increase: f64,
}

/// `D_c^p[T(t)S₁, T(t)S₂]` along a stochastic trajectory, exact at every time.
pub fn classical_monotonicity_trace(
    traj: &StochasticTrajectory,
    s1: &RealMatrix,
    s2: &RealMatrix,
    p: f64,
) -> Result<ClassicalTrace> {
    check_probability(p)?;
    s1.check_stochastic()?;
    s2.check_stochastic()?;
    let mut values = Vec::with_capacity(traj.len());
    let mut vertices = Vec::with_capacity(traj.len());
    for t in traj.maps() {
        let (v, j) = classical_vertex_max(&t.matmul(s1)?, &t.matmul(s2)?, p);
        values.push(v);
        vertices.push(j);
    }
    let times = traj.times().to_vec();
    let (violations, _, max_increase) = classify_increases(&times, &values, CLASSICAL_THRESHOLD);
    Ok(ClassicalTrace {
        p,
        derivatives: finite_differences(&times, &values),
        times,
        values,
        vertices,
        violations,
        max_increase,
    })
}

/// Deterministic maps `j ↦ f(j)` on `n` states, `n^n` of them.
pub fn vertex_channels(n: usize) -> Vec<RealMatrix> {
    let count = n.pow(n as u32);
    (0..count)
        .map(|mut code| {
            let mut m = RealMatrix::zeros(n, n);
            for j in 0..n {
                m.set(code % n, j, 1.0);
                code /= n;
            }
            m
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalWitness {
    pub s1: RealMatrix,
    pub s2: RealMatrix,
    pub p: f64,
    pub from: f64,
    pub time: f64,
    pub increase: f64,
}

/// Exhaustive search over pairs of deterministic channels and the given
/// priors; returns the largest increase found, if any exceeds the threshold.
pub fn classical_witness_search(traj: &StochasticTrajectory, priors: &[f64]) -> Result<Option<ClassicalWitness>> {
    let n = traj.source().dim;
    let vertices = vertex_channels(n);
    let mut best: Option<ClassicalWitness> = None;
    for &p in priors {
        for s1 in &vertices {
            for s2 in &vertices {
                let tr = classical_monotonicity_trace(traj, s1, s2, p)?;
                for v in &tr.violations {
                    if best.as_ref().is_none_or(|b| v.increase > b.increase) {
                        best = Some(ClassicalWitness {
                            s1: s1.clone(),
                            s2: s2.clone(),
                            p,
                            from: v.from,
                            time: v.time,
                            increase: v.increase,
                        });
                    }
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, presets, TimeGrid};
    use crate::linops::{pauli, random_density_with, random_pure_state_with};

    fn opts() -> SeesawOptions {
        SeesawOptions::default().with_restarts(8).with_seed(11)
    }

    fn id_vs_dep(p: f64, k: usize) -> DiscriminationInstance {
        DiscriminationInstance::new(Channel::identity(2), Channel::completely_depolarizing(2), p, k).unwrap()
    }

    #[test]
    fn state_distinguishability_cases() {
        let r = random_density_with(2, 2, &mut seeded_rng(1, 0)).unwrap();
        assert!(state_distinguishability(&r, &r, 0.5).unwrap() < 1e-12);
        let a = DensityOperator::from_pure(&PureState::basis(2, 0));
        let b = DensityOperator::from_pure(&PureState::basis(2, 1));
        assert!((state_distinguishability(&a, &b, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(state_distinguishability(&a, &b, 1.5), Err(Error::InvalidProbability(_))));
    }

    fn bloch(rho: &DensityOperator) -> [f64; 3] {
        let m = rho.matrix();
        [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re]
    }

    #[test]
    fn qubit_distinguishability_closed_form() {
        // (1−p)ρ₁ − pρ₂ = ½[(1−2p) I + v·σ], eigenvalues ½((1−2p) ± |v|).
        let mut rng = seeded_rng(2, 0);
        for _ in 0..50 {
            let r1 = random_density_with(2, 2, &mut rng).unwrap();
            let r2 = random_density_with(2, 2, &mut rng).unwrap();
            let p: f64 = rng.random();
            let (b1, b2) = (bloch(&r1), bloch(&r2));
            let v: f64 = (0..3).map(|i| ((1.0 - p) * b1[i] - p * b2[i]).powi(2)).sum::<f64>().sqrt();
            let a = 1.0 - 2.0 * p;
            let expected = 0.5 * ((a + v).abs() + (a - v).abs());
            assert!((state_distinguishability(&r1, &r2, p).unwrap() - expected).abs() < 1e-12);
            let swapped = state_distinguishability(&r2, &r1, 1.0 - p).unwrap();
            assert!((swapped - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn helstrom_cases() {
        let r = random_density_with(2, 2, &mut seeded_rng(3, 0)).unwrap();
        let h = helstrom_measurement(&r, &r, 0.3).unwrap();
        assert!((h.guessing_probability - 0.7).abs() < 1e-12);
        let a = DensityOperator::from_pure(&PureState::basis(2, 0));
        let b = DensityOperator::from_pure(&PureState::basis(2, 1));
        assert!((helstrom_measurement(&a, &b, 0.5).unwrap().guessing_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn helstrom_beats_measurement_grid() {
        let mut rng = seeded_rng(4, 0);
        let r1 = random_density_with(2, 2, &mut rng).unwrap();
        let r2 = random_density_with(2, 2, &mut rng).unwrap();
        let p = 0.4;
        let h = helstrom_measurement(&r1, &r2, p).unwrap();
        let d = state_distinguishability(&r1, &r2, p).unwrap();
        assert!((h.guessing_probability - 0.5 * (1.0 + d)).abs() < 1e-9);
        for i in 0..100 {
            for j in 0..100 {
                let theta = std::f64::consts::PI * i as f64 / 99.0;
                let phi = 2.0 * std::f64::consts::PI * j as f64 / 100.0;
                let v = [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)];
                let m = ComplexMatrix::outer(&v);
                let comp = &ComplexMatrix::identity(2) - &m;
                let g = (1.0 - p) * (&m * r1.matrix()).trace().re + p * (&comp * r2.matrix()).trace().re;
                assert!(g <= h.guessing_probability + 1e-12);
            }
        }
    }

    #[test]
    fn classical_cases() {
        let i3 = RealMatrix::identity(3);
        let (v, _) = classical_channel_distinguishability(&i3, &i3, 0.3).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
        let shift = RealMatrix::from_fn(3, 3, |i, j| if i == (j + 1) % 3 { 1.0 } else { 0.0 });
        let (v, _) = classical_channel_distinguishability(&i3, &shift, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let bad = RealMatrix::from_fn(3, 3, |_, _| 0.5);
        assert!(matches!(classical_channel_distinguishability(&bad, &i3, 0.5), Err(Error::NotStochastic(_))));
    }

    #[test]
    fn id_vs_depolarizing_levels() {
        let d1 = channel_distinguishability(&id_vs_dep(0.5, 1), &opts(), None).unwrap();
        let d2 = channel_distinguishability(&id_vs_dep(0.5, 2), &opts(), None).unwrap();
        assert!((d1.value - 0.5).abs() < 1e-9, "{}", d1.value);
        assert!((d2.value - 0.75).abs() < 1e-9, "{}", d2.value);
        assert!((d2.guessing_probability - 0.875).abs() < 1e-12);
        assert!(d2.monotone && d1.monotone);
        let re = id_vs_dep(0.5, 2).evaluate_input(&d2.optimal_input).unwrap();
        assert!((re - d2.value).abs() < 1e-12);
    }

    #[test]
    fn random_inputs_never_exceed_optimum() {
        let inst = id_vs_dep(0.5, 2);
        let mut rng = seeded_rng(5, 0);
        for _ in 0..200 {
            let psi = random_pure_state_with(4, &mut rng);
            assert!(inst.objective(&psi).unwrap() <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn identical_channels_give_prior_bias() {
        let ch = Channel::amplitude_damping(0.3).unwrap();
        for k in 1..=2 {
            for p in [0.0, 0.2, 0.5, 0.9] {
                let inst = DiscriminationInstance::new(ch.clone(), ch.clone(), p, k).unwrap();
                let r = channel_distinguishability(&inst, &opts(), None).unwrap();
                assert!((r.value - (1.0 - 2.0 * p).abs()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pauli_pair_bell_oracle() {
        let a = [0.7, 0.1, 0.15, 0.05];
        let b = [0.2, 0.3, 0.1, 0.4];
        let inst = DiscriminationInstance::new(Channel::pauli(a).unwrap(), Channel::pauli(b).unwrap(), 0.5, 2).unwrap();
        let r = channel_distinguishability(&inst, &opts(), None).unwrap();
        let expected: f64 = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        assert!((r.value - expected).abs() < 1e-9);
    }

    #[test]
    fn hierarchy_is_monotone() {
        let h = hierarchy_check(&Channel::identity(2), &Channel::completely_depolarizing(2), 0.5, &opts()).unwrap();
        assert!(h.monotone);
        assert!((h.values[0] - 0.5).abs() < 1e-9 && (h.values[1] - 0.75).abs() < 1e-9);
        let ch = Channel::dephasing(0.2).unwrap();
        let flat = hierarchy_check(&ch, &ch, 0.3, &opts()).unwrap();
        assert!(flat.values.iter().all(|v| (v - 0.4).abs() < 1e-9));
    }

    #[test]
    fn cq_state_cases() {
        let inst = id_vs_dep(0.5, 2);
        let id = Channel::identity(2);
        let rho = DensityOperator::from_pure(&PureState::maximally_entangled(2));
        let cq = cq_state_for(&inst, &id, &rho).unwrap();
        assert!((cq.matrix().trace().re - 1.0).abs() < 1e-12);
        let g = cq_guessing_probability(&cq, 4).unwrap();
        assert!((g - 0.875).abs() < 1e-12);

        let one_sided = DiscriminationInstance::new(id.clone(), Channel::completely_depolarizing(2), 0.0, 2).unwrap();
        let cq = cq_state_for(&one_sided, &id, &rho).unwrap();
        let lower = ComplexMatrix::from_fn(4, 4, |r, c| cq.matrix()[(r + 4, c + 4)]);
        assert_eq!(lower.max_abs(), 0.0);
        let upper = ComplexMatrix::from_fn(4, 4, |r, c| cq.matrix()[(r, c)]);
        assert!(upper.max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn min_entropy_cases() {
        let traj = integrate(&presets::dephasing(0.0), &TimeGrid::uniform(0.2, 0.1).unwrap()).unwrap();
        let me = min_entropy(&id_vs_dep(0.5, 2), &traj, 0.1, &opts()).unwrap();
        assert!((me.h_min + (7.0f64 / 8.0).log2()).abs() < 1e-9);
        assert!((me.cq_guessing_probability - me.guessing_probability).abs() < 1e-9);
        let ch = Channel::dephasing(0.4).unwrap();
        let same = DiscriminationInstance::new(ch.clone(), ch, 0.5, 2).unwrap();
        assert!((min_entropy(&same, &traj, 0.0, &opts()).unwrap().h_min - 1.0).abs() < 1e-9);
        let perfect = DiscriminationInstance::new(
            Channel::identity(2),
            Channel::unitary(&pauli::x()).unwrap(),
            0.5,
            2,
        )
        .unwrap();
        assert!(min_entropy(&perfect, &traj, 0.0, &opts()).unwrap().h_min.abs() < 1e-9);
    }

    #[test]
    fn identical_channels_trace_is_flat() {
        let traj = integrate(&presets::eternal(), &TimeGrid::uniform(0.5, 0.05).unwrap()).unwrap();
        let ch = Channel::dephasing(0.3).unwrap();
        let mo = MonotonicityOptions {
            seesaw: opts(),
            ..Default::default()
        };
        let tr = monotonicity_trace(&traj, &ch, &ch, 0.3, 2, &mo).unwrap();
        assert!(tr.values.iter().all(|v| (v - 0.4).abs() < 1e-9));
        assert!(tr.violations.is_empty());
        assert!(revalidate_trace(&traj, &ch, &ch, &tr).unwrap() < 1e-12);
    }

    #[test]
    fn vertex_channel_enumeration() {
        let v = vertex_channels(3);
        assert_eq!(v.len(), 27);
        assert!(v.iter().all(|m| m.check_stochastic().is_ok()));
    }
}
