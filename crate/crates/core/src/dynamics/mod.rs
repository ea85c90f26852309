//! Time-local generators, trajectory integration, propagators and
//! per-time k-divisibility scans.

pub mod classical;

use serde::{Deserialize, Serialize};

use crate::channels::{k_positivity, Channel, HermitianMap, KPositivityVerdict, SeesawOptions, DEFAULT_COND_THRESHOLD};
use crate::error::{Error, Result};
use crate::linops::{c, kron, pauli, ComplexMatrix, C64};

/// Largest RK4 substep used by default.
pub const DEFAULT_MAX_SUBSTEP: f64 = 1e-3;
/// Trace drift that aborts integration.
pub const DRIFT_ABORT: f64 = 1e-6;
/// Trace-preservation bound for propagators.
pub const PROPAGATOR_TP_TOL: f64 = 1e-7;

/// Scalar function of time built from a small closed family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RateFunction {
    Constant {
        value: f64,
    },
    /// `Σ_i c_i t^i`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `amplitude · tanh(scale · t)`.
    Tanh {
        amplitude: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `amplitude · sin(frequency · t + phase)`.
    Sin {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · cos(frequency · t + phase)`.
    Cos {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `pieces[i]` applies on `[breakpoints[i-1], breakpoints[i])`.
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<RateFunction>,
    },
}

fn one() -> f64 {
    1.0
}

impl RateFunction {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Self::Tanh { amplitude, scale } => amplitude * (scale * t).tanh(),
            Self::Sin {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            Self::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            Self::Piecewise { breakpoints, pieces } => {
                let idx = breakpoints.iter().take_while(|&&b| t >= b).count();
                pieces[idx].eval(t)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        let ok = match self {
            Self::Constant { value } => finite(*value),
            Self::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
            Self::Tanh { amplitude, scale } => finite(*amplitude) && finite(*scale),
            Self::Sin {
                amplitude,
                frequency,
                phase,
            }
            | Self::Cos {
                amplitude,
                frequency,
                phase,
            } => finite(*amplitude) && finite(*frequency) && finite(*phase),
            Self::Piecewise { breakpoints, pieces } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(Error::Config(format!(
                        "piecewise rate needs {} pieces for {} breakpoints",
                        breakpoints.len() + 1,
                        breakpoints.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("piecewise breakpoints must increase".into()));
                }
                for p in pieces {
                    p.validate()?;
                }
                breakpoints.iter().all(|b| b.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("rate function has a non-finite parameter".into()))
        }
    }
}

impl Default for RateFunction {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub matrix: ComplexMatrix,
    #[serde(default)]
    pub coefficient: RateFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipator {
    pub matrix: ComplexMatrix,
    pub rate: RateFunction,
}

/// `L_t[ρ] = −i[H(t), ρ] + Σ_α γ_α(t) (A_α ρ A_α† − ½{A_α†A_α, ρ})` with
/// `H(t) = Σ_j f_j(t) H_j` and fixed noise operators `A_α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GKSLGenerator {
    pub dim: usize,
    #[serde(default)]
    pub hamiltonian: Vec<HamiltonianTerm>,
    #[serde(default)]
    pub dissipators: Vec<Dissipator>,
    /// Noise operators are traceless and mutually orthogonal, so rate signs
    /// decide complete positivity.
    #[serde(default)]
    pub canonical: bool,
}

impl GKSLGenerator {
    pub fn new(
        dim: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        dissipators: Vec<Dissipator>,
        canonical: bool,
    ) -> Result<Self> {
        let g = Self {
            dim,
            hamiltonian,
            dissipators,
            canonical,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            hamiltonian: Vec::new(),
            dissipators: Vec::new(),
            canonical: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("generator dimension must be positive".into()));
        }
        let d = self.dim;
        for h in &self.hamiltonian {
            if (h.matrix.rows(), h.matrix.cols()) != (d, d) {
                return Err(Error::DimensionMismatch(format!("Hamiltonian term is not {d}x{d}")));
            }
            let dev = h.matrix.hermiticity_deviation();
            if dev > 1e-10 {
                return Err(Error::NotHermitian(dev));
            }
            h.coefficient.validate()?;
        }
        for a in &self.dissipators {
            if (a.matrix.rows(), a.matrix.cols()) != (d, d) {
                return Err(Error::DimensionMismatch(format!("noise operator is not {d}x{d}")));
            }
            a.rate.validate()?;
        }
        if self.canonical {
            self.check_canonical()?;
        }
        Ok(())
    }

    fn check_canonical(&self) -> Result<()> {
        for (i, a) in self.dissipators.iter().enumerate() {
            if a.matrix.trace().norm() > 1e-10 {
                return Err(Error::NonCanonical(format!("noise operator {i} has nonzero trace")));
            }
            if a.matrix.frobenius_norm() < 1e-12 {
                return Err(Error::NonCanonical(format!("noise operator {i} vanishes")));
            }
            for (j, b) in self.dissipators.iter().enumerate().skip(i + 1) {
                let overlap = (&a.matrix.adjoint() * &b.matrix).trace().norm();
                if overlap > 1e-10 {
                    return Err(Error::NonCanonical(format!("noise operators {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn hamiltonian_at(&self, t: f64) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.dim, self.dim);
        for term in &self.hamiltonian {
            h = &h + &term.matrix.scale_real(term.coefficient.eval(t));
        }
        h
    }

    pub fn rates_at(&self, t: f64) -> Vec<f64> {
        self.dissipators.iter().map(|a| a.rate.eval(t)).collect()
    }

    /// Superoperator of `L_t` in the row-major vectorization.
    pub fn superop(&self, t: f64) -> ComplexMatrix {
        let d = self.dim;
        let id = ComplexMatrix::identity(d);
        let h = self.hamiltonian_at(t);
        let minus_i = c(0.0, -1.0);
        let mut s = (&kron(&h, &id) - &kron(&id, &h.transpose())).scale(minus_i);
        for a in &self.dissipators {
            let gamma = a.rate.eval(t);
            if gamma == 0.0 {
                continue;
            }
            let ada = &a.matrix.adjoint() * &a.matrix;
            let jump = kron(&a.matrix, &a.matrix.conj());
            let anti = &kron(&ada, &id) + &kron(&id, &ada.transpose());
            let term = &jump - &anti.scale_real(0.5);
            s = &s + &term.scale_real(gamma);
        }
        s
    }

    /// Per-rate nonnegativity at each time. Only meaningful in canonical form.
    pub fn rates_cp_check(&self, times: &[f64]) -> Result<Vec<bool>> {
        if !self.canonical {
            return Err(Error::NonCanonical(
                "rates are not basis-invariant unless the canonical flag is set".into(),
            ));
        }
        self.check_canonical()?;
        Ok(times
            .iter()
            .map(|&t| self.rates_at(t).iter().all(|&g| g >= -1e-12))
            .collect())
    }
}

/// Named generator families.
pub mod presets {
    use super::*;

    fn pauli_dissipators(rates: [RateFunction; 3]) -> Vec<Dissipator> {
        [pauli::x(), pauli::y(), pauli::z()]
            .into_iter()
            .zip(rates)
            .map(|(matrix, rate)| Dissipator { matrix, rate })
            .collect()
    }

    /// Qubit Pauli dynamics `L[ρ] = Σ_i γ_i(t)(σ_i ρ σ_i − ρ)`.
    pub fn pauli_dynamics(rates: [RateFunction; 3]) -> GKSLGenerator {
        GKSLGenerator {
            dim: 2,
            hamiltonian: Vec::new(),
            dissipators: pauli_dissipators(rates),
            canonical: true,
        }
    }

    /// Rates `(1, 1, −tanh t)`: P-divisible at all times, never CP-divisible for `t > 0`.
    pub fn eternal() -> GKSLGenerator {
        pauli_dynamics([
            RateFunction::constant(1.0),
            RateFunction::constant(1.0),
            RateFunction::Tanh {
                amplitude: -1.0,
                scale: 1.0,
            },
        ])
    }

    /// Constant nonnegative Pauli rates plus a `σz` drift; a quantum dynamical semigroup.
    pub fn semigroup(rates: [f64; 3], omega: f64) -> GKSLGenerator {
        let mut g = pauli_dynamics(rates.map(RateFunction::constant));
        if omega != 0.0 {
            g.hamiltonian.push(HamiltonianTerm {
                matrix: pauli::z().scale_real(0.5 * omega),
                coefficient: RateFunction::constant(1.0),
            });
        }
        g
    }

    /// Decay `|1⟩ → |0⟩` through `σ₋` at rate `γ(t)`.
    pub fn amplitude_damping(rate: RateFunction) -> GKSLGenerator {
        GKSLGenerator {
            dim: 2,
            hamiltonian: Vec::new(),
            dissipators: vec![Dissipator {
                matrix: pauli::lowering(),
                rate,
            }],
            canonical: true,
        }
    }

    /// Pure Hamiltonian drift `H = ω σz / 2`.
    pub fn hamiltonian_drift(omega: f64) -> GKSLGenerator {
        GKSLGenerator {
            dim: 2,
            hamiltonian: vec![HamiltonianTerm {
                matrix: pauli::z().scale_real(0.5 * omega),
                coefficient: RateFunction::constant(1.0),
            }],
            dissipators: Vec::new(),
            canonical: true,
        }
    }

    /// Pure dephasing `γ (σz ρ σz − ρ)`.
    pub fn dephasing(gamma: f64) -> GKSLGenerator {
        GKSLGenerator {
            dim: 2,
            hamiltonian: Vec::new(),
            dissipators: vec![Dissipator {
                matrix: pauli::z(),
                rate: RateFunction::constant(gamma),
            }],
            canonical: true,
        }
    }
}

/// Strictly increasing times starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(times: Vec<f64>) -> Result<Self> {
        Self::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.times
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        match times.first() {
            Some(&0.0) => {}
            _ => return Err(Error::InvalidArgument("time grid must start at 0".into())),
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `0, step, 2·step, …` up to `t_max` inclusive (within rounding).
    pub fn uniform(t_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(t_max >= 0.0) {
            return Err(Error::InvalidArgument("uniform grid needs step > 0 and t_max ≥ 0".into()));
        }
        let n = (t_max / step + 1e-9).floor() as usize;
        Self::new((0..=n).map(|i| i as f64 * step).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Grid index of `t`, matched within `1e-9`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= 1e-9)
            .ok_or(Error::NotOnGrid(t))
    }
}

/// Fixed-step RK4 for `dY/dt = F(t) Y`, starting from the identity.
/// `on_step` sees every grid point and may abort.
pub(crate) fn rk4_identity_flow(
    dim: usize,
    grid: &TimeGrid,
    max_substep: f64,
    generator: impl Fn(f64) -> ComplexMatrix,
    mut on_step: impl FnMut(usize, &ComplexMatrix, f64) -> Result<()>,
) -> Result<Vec<ComplexMatrix>> {
    if !(max_substep > 0.0) {
        return Err(Error::InvalidArgument("substep must be positive".into()));
    }
    let mut y = ComplexMatrix::identity(dim);
    let mut out = Vec::with_capacity(grid.len());
    on_step(0, &y, max_substep)?;
    out.push(y.clone());
    for (i, w) in grid.times().windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        let n = ((t1 - t0) / max_substep - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let mut l_start = generator(t0);
        for s in 0..n {
            let t = t0 + s as f64 * h;
            let l_mid = generator(t + 0.5 * h);
            let l_end = generator(if s + 1 == n { t1 } else { t + h });
            let k1 = &l_start * &y;
            let k2 = &l_mid * &(&y + &k1.scale_real(0.5 * h));
            let k3 = &l_mid * &(&y + &k2.scale_real(0.5 * h));
            let k4 = &l_end * &(&y + &k3.scale_real(h));
            let incr = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
            y = &y + &incr.scale_real(h / 6.0);
            l_start = l_end;
        }
        on_step(i + 1, &y, h)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// `max |τᵀS − τᵀ|` for the trace functional `τ` in row-major vectorization.
fn trace_drift(d: usize, s: &ComplexMatrix) -> f64 {
    let mut drift: f64 = 0.0;
    for col in 0..d * d {
        let sum: C64 = (0..d).map(|a| s[(a * d + a, col)]).sum();
        let target = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
        drift = drift.max((sum - c(target, 0.0)).norm());
    }
    drift
}

/// `{Λ_t}` on a time grid.
#[derive(Clone, Debug)]
pub struct MapTrajectory {
    grid: TimeGrid,
    maps: Vec<Channel>,
    source: GKSLGenerator,
    max_substep: f64,
}

impl MapTrajectory {
    /// Builds a trajectory from explicit maps, e.g. closed-form solutions.
    pub fn from_maps(grid: TimeGrid, maps: Vec<Channel>, source: GKSLGenerator) -> Result<Self> {
        if grid.len() != maps.len() {
            return Err(Error::DimensionMismatch("one map per grid point is required".into()));
        }
        Ok(Self {
            grid,
            maps,
            source,
            max_substep: 0.0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn maps(&self) -> &[Channel] {
        &self.maps
    }

    pub fn map_at(&self, index: usize) -> &Channel {
        &self.maps[index]
    }

    pub fn source(&self) -> &GKSLGenerator {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.dim
    }

    pub fn max_substep(&self) -> f64 {
        self.max_substep
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `Λ_t ∘ Λ_s⁻¹` between grid indices `s ≤ t`.
    pub fn propagator(&self, s: usize, t: usize) -> Result<Propagator> {
        self.propagator_with(s, t, DEFAULT_COND_THRESHOLD)
    }

    pub fn propagator_with(&self, s: usize, t: usize, cond_threshold: f64) -> Result<Propagator> {
        if s > t || t >= self.len() {
            return Err(Error::InvalidArgument(format!("propagator indices s = {s}, t = {t}")));
        }
        let (ts, tt) = (self.grid.times[s], self.grid.times[t]);
        let map = if s == t {
            HermitianMap::identity(self.dim())
        } else {
            let inv = self.maps[s].map().invert(cond_threshold).map_err(|e| match e {
                Error::IllConditioned(condition) => Error::Singular { time: ts, condition },
                other => other,
            })?;
            HermitianMap::compose(self.maps[t].map(), &inv)?
        };
        let drift = trace_drift(self.dim(), map.superop());
        if drift > PROPAGATOR_TP_TOL {
            return Err(Error::IntegrationDrift {
                time: tt,
                drift,
                substep: self.max_substep,
            });
        }
        Ok(Propagator { s: ts, t: tt, map })
    }

    /// Propagator between two grid times.
    pub fn propagator_at_times(&self, s: f64, t: f64) -> Result<Propagator> {
        self.propagator(self.grid.index_of(s)?, self.grid.index_of(t)?)
    }

    /// `(time, superop)` pairs for archiving.
    pub fn export(&self) -> Vec<TrajectoryPoint> {
        self.grid
            .times()
            .iter()
            .zip(&self.maps)
            .map(|(&time, m)| TrajectoryPoint {
                time,
                superop: m.map().superop().clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub superop: ComplexMatrix,
}

/// `Λ_{t,s}` with `Λ_t = Λ_{t,s} ∘ Λ_s`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub s: f64,
    pub t: f64,
    pub map: HermitianMap,
}

/// Integrates `dΛ/dt = L_t Λ` with `Λ_0 = id` by fixed-step RK4.
pub fn integrate(g: &GKSLGenerator, grid: &TimeGrid) -> Result<MapTrajectory> {
    integrate_with(g, grid, DEFAULT_MAX_SUBSTEP)
}

pub fn integrate_with(g: &GKSLGenerator, grid: &TimeGrid, max_substep: f64) -> Result<MapTrajectory> {
    g.validate()?;
    let d = g.dim;
    let times = grid.times().to_vec();
    let superops = rk4_identity_flow(d * d, grid, max_substep, |t| g.superop(t), |i, y, h| {
        let drift = trace_drift(d, y);
        if drift > DRIFT_ABORT {
            return Err(Error::IntegrationDrift {
                time: times[i],
                drift,
                substep: h,
            });
        }
        Ok(())
    })?;
    let maps = superops
        .into_iter()
        .map(|s| Channel::new(HermitianMap::from_superop(d, d, s)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(MapTrajectory {
        grid: grid.clone(),
        maps,
        source: g.clone(),
        max_substep,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanEntry {
    pub time: f64,
    pub verdict: KPositivityVerdict,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Halt {
    pub time: f64,
    pub condition: f64,
}

/// Per-time k-positivity of `Λ_{t+ε, t}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisibilityReport {
    pub k: usize,
    pub epsilon: f64,
    pub entries: Vec<ScanEntry>,
    pub first_violation: Option<f64>,
    /// Set when `Λ_s` became non-invertible; the scan stops there.
    pub halted: Option<Halt>,
}

impl DivisibilityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ScanEntry> {
        self.entries.iter().filter(|e| e.verdict.is_violation())
    }
}

/// Deterministic child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Grid offset corresponding to `epsilon`; it must be a multiple of the
/// spacing between the first two grid points.
pub fn epsilon_steps(grid: &TimeGrid, epsilon: f64) -> Result<usize> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    let h = grid.times()[1] - grid.times()[0];
    let steps = (epsilon / h).round();
    if steps < 1.0 || (steps * h - epsilon).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} is not a positive multiple of the grid step {h}"
        )));
    }
    Ok(steps as usize)
}

pub fn divisibility_scan(
    traj: &MapTrajectory,
    k: usize,
    epsilon: f64,
    opts: &SeesawOptions,
) -> Result<DivisibilityReport> {
    let steps = epsilon_steps(traj.grid(), epsilon)?;
    let d = traj.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {d}]")));
    }
    let mut entries = Vec::new();
    let mut halted = None;
    for i in 0..traj.len().saturating_sub(steps) {
        let prop = match traj.propagator(i, i + steps) {
            Ok(p) => p,
            Err(Error::Singular { time, condition }) => {
                halted = Some(Halt { time, condition });
                break;
            }
            Err(e) => return Err(e),
        };
        let o = SeesawOptions {
            seed: derive_seed(opts.seed, i as u64),
            ..*opts
        };
        let verdict = k_positivity(&prop.map, k, &o)?;
        entries.push(ScanEntry {
            time: traj.times()[i],
            verdict,
        });
    }
    let first_violation = entries.iter().find(|e| e.verdict.is_violation()).map(|e| e.time);
    Ok(DivisibilityReport {
        k,
        epsilon,
        entries,
        first_violation,
        halted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{HermitianOperator, trace_norm};

    fn opts() -> SeesawOptions {
        SeesawOptions::default().with_restarts(8).with_seed(3)
    }

    #[test]
    fn zero_generator_has_zero_superop_and_identity_flow() {
        let g = GKSLGenerator::zero(2);
        assert_eq!(g.superop(0.3).max_abs(), 0.0);
        let traj = integrate(&g, &TimeGrid::uniform(1.0, 0.25).unwrap()).unwrap();
        for m in traj.maps() {
            assert!(m.map().superop().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
        }
        let rep = divisibility_scan(&traj, 2, 0.25, &opts()).unwrap();
        assert!(rep.first_violation.is_none());
    }

    #[test]
    fn dephasing_generator_action() {
        let gamma = 0.7;
        let g = presets::dephasing(gamma);
        let s = g.superop(0.0);
        let out = s.matvec(pauli::x().as_slice()).unwrap();
        let out = ComplexMatrix::unvectorize(2, 2, &out).unwrap();
        assert!(out.max_abs_diff(&pauli::x().scale_real(-2.0 * gamma)) < 1e-15);
    }

    #[test]
    fn hamiltonian_superop_is_anti_hermitian() {
        let s = presets::hamiltonian_drift(1.3).superop(0.0);
        assert!((&s + &s.adjoint()).max_abs() < 1e-15);
    }

    #[test]
    fn generator_is_trace_annihilating() {
        let mut g = presets::semigroup([0.3, 0.2, 0.5], 1.0);
        g.dissipators.push(Dissipator {
            matrix: pauli::lowering(),
            rate: RateFunction::Sin {
                amplitude: 0.4,
                frequency: 2.0,
                phase: 0.0,
            },
        });
        g.canonical = false;
        for t in [0.0, 0.4, 1.7] {
            let s = g.superop(t);
            for col in 0..4 {
                let tr: C64 = (0..2).map(|a| s[(a * 2 + a, col)]).sum();
                assert!(tr.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dephasing_trajectory_matches_closed_form() {
        let gamma = 0.8;
        let traj = integrate(&presets::dephasing(gamma), &TimeGrid::uniform(1.0, 0.1).unwrap()).unwrap();
        let s = traj.map_at(10).map().superop();
        let expected = (-2.0 * gamma).exp();
        assert!((s[(1, 1)].re - expected).abs() < 1e-8);
        assert!((s[(2, 2)].re - expected).abs() < 1e-8);

        let prop = traj.propagator(3, 8).unwrap();
        let expected = (-2.0 * gamma * 0.5).exp();
        assert!((prop.map.superop()[(1, 1)].re - expected).abs() < 1e-8);
    }

    #[test]
    fn constant_generator_is_a_semigroup() {
        let g = presets::semigroup([0.3, 0.2, 0.5], 0.9);
        let traj = integrate(&g, &TimeGrid::uniform(1.0, 0.5).unwrap()).unwrap();
        let half = traj.map_at(1).map();
        let twice = HermitianMap::compose(half, half).unwrap();
        assert!(twice.superop().max_abs_diff(traj.map_at(2).map().superop()) < 1e-7);
        assert!(traj.maps().iter().all(|m| m.tp_certified() && m.cp_certified()));
    }

    #[test]
    fn unitary_propagator() {
        let omega = 1.1;
        let traj = integrate(&presets::hamiltonian_drift(omega), &TimeGrid::uniform(1.0, 0.2).unwrap()).unwrap();
        let p = traj.propagator(1, 4).unwrap();
        let dt = traj.times()[4] - traj.times()[1];
        let u = ComplexMatrix::diag(&[
            C64::from_polar(1.0, -0.5 * omega * dt),
            C64::from_polar(1.0, 0.5 * omega * dt),
        ]);
        let expected = Channel::unitary(&u).unwrap();
        assert!(p.map.superop().max_abs_diff(expected.map().superop()) < 1e-9);
        let same = traj.propagator(2, 2).unwrap();
        assert!(same.map.superop().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn chapman_kolmogorov_for_propagators() {
        let traj = integrate(&presets::eternal(), &TimeGrid::uniform(1.0, 0.1).unwrap()).unwrap();
        for s in 0..traj.len() {
            for u in s..traj.len() {
                for t in u..traj.len() {
                    let psu = traj.propagator(s, u).unwrap();
                    let put = traj.propagator(u, t).unwrap();
                    let pst = traj.propagator(s, t).unwrap();
                    let comp = HermitianMap::compose(&put.map, &psu.map).unwrap();
                    assert!(comp.superop().max_abs_diff(pst.map.superop()) < 1e-7);
                }
            }
        }
    }

    #[test]
    fn singular_map_halts_scan() {
        // Complete dephasing kills coherences: Λ_t is singular once the rate is huge.
        let g = presets::dephasing(60.0);
        let traj = integrate(&g, &TimeGrid::uniform(0.5, 0.05).unwrap()).unwrap();
        let rep = divisibility_scan(&traj, 1, 0.05, &opts()).unwrap();
        let halt = rep.halted.expect("must halt");
        assert!(halt.time > 0.0);
        assert!(matches!(traj.propagator(9, 10), Err(Error::Singular { .. })));
    }

    #[test]
    fn rates_check_cases() {
        let times = [0.0, 0.5, 1.0, 4.0];
        let sg = presets::semigroup([0.3, 0.2, 0.5], 0.0);
        assert!(sg.rates_cp_check(&times).unwrap().iter().all(|&b| b));
        let et = presets::eternal().rates_cp_check(&times).unwrap();
        assert_eq!(et, vec![true, false, false, false]);
        let osc = presets::amplitude_damping(RateFunction::Sin {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        });
        let pi = std::f64::consts::PI;
        assert_eq!(osc.rates_cp_check(&[0.5, pi + 0.5, 2.0 * pi + 0.5]).unwrap(), vec![true, false, true]);
        let mut nc = presets::eternal();
        nc.canonical = false;
        assert!(matches!(nc.rates_cp_check(&times), Err(Error::NonCanonical(_))));
        nc.canonical = true;
        nc.dissipators.push(Dissipator {
            matrix: pauli::x(),
            rate: RateFunction::constant(1.0),
        });
        assert!(matches!(nc.validate(), Err(Error::NonCanonical(_))));
    }

    #[test]
    fn semigroup_scan_is_positive_everywhere() {
        let g = presets::semigroup([0.3, 0.2, 0.5], 0.7);
        let traj = integrate(&g, &TimeGrid::uniform(1.0, 0.05).unwrap()).unwrap();
        for k in 1..=2 {
            let rep = divisibility_scan(&traj, k, 0.05, &opts()).unwrap();
            assert!(rep.first_violation.is_none(), "k = {k}");
            assert_eq!(rep.entries.len(), traj.len() - 1);
        }
    }

    #[test]
    fn eternal_scan_splits_p_and_cp_divisibility() {
        let traj = integrate(&presets::eternal(), &TimeGrid::uniform(0.5, 0.05).unwrap()).unwrap();
        let cp = divisibility_scan(&traj, 2, 0.05, &opts()).unwrap();
        assert!(cp.entries.iter().filter(|e| e.time > 0.0).all(|e| e.verdict.is_violation()));
        let p = divisibility_scan(&traj, 1, 0.05, &opts()).unwrap();
        assert!(p.first_violation.is_none());
    }

    #[test]
    fn epsilon_must_be_grid_multiple() {
        let grid = TimeGrid::uniform(1.0, 0.1).unwrap();
        assert_eq!(epsilon_steps(&grid, 0.2).unwrap(), 2);
        assert!(epsilon_steps(&grid, 0.15).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.2, 0.2]).is_err());
    }

    #[test]
    fn rate_functions_evaluate() {
        let p = RateFunction::Polynomial {
            coefficients: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(p.eval(2.0), 17.0);
        let pw = RateFunction::Piecewise {
            breakpoints: vec![1.0],
            pieces: vec![RateFunction::constant(1.0), RateFunction::constant(-1.0)],
        };
        assert_eq!((pw.eval(0.5), pw.eval(1.0)), (1.0, -1.0));
        let bad = RateFunction::Piecewise {
            breakpoints: vec![1.0],
            pieces: vec![],
        };
        assert!(bad.validate().is_err());
        let json = r#"{"kind":"tanh","params":{"amplitude":-1.0}}"#;
        let f: RateFunction = serde_json::from_str(json).unwrap();
        assert!((f.eval(1.0) + 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn trajectory_maps_contract_trace_norm() {
        let traj = integrate(&presets::eternal(), &TimeGrid::uniform(1.0, 0.25).unwrap()).unwrap();
        let x = HermitianOperator::new(pauli::x()).unwrap();
        let mut prev = trace_norm(&x).unwrap();
        for m in traj.maps() {
            let n = trace_norm(&m.apply(&x).unwrap()).unwrap();
            assert!(n <= prev + 1e-12);
            prev = n;
        }
    }
}
