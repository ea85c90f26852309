//! Scenario files (TOML) and reports (JSON): validation, the task pipeline,
//! report re-validation and CSV export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channels::{Channel, SeesawOptions};
use crate::discrimination::{
    self, channel_distinguishability, hierarchy_check, min_entropy, monotonicity_trace, revalidate_trace,
    witness_search, ChannelFamily, DiscriminationInstance, DistinguishabilityResult, Hierarchy, MinEntropy,
    MonotonicityOptions, MonotonicityTrace, WitnessSearchOptions, WitnessSearchResult,
};
use crate::dynamics::{
    divisibility_scan, epsilon_steps, integrate, presets, DivisibilityReport, Dissipator, GKSLGenerator, Halt,
    HamiltonianTerm, MapTrajectory, RateFunction, TimeGrid, TrajectoryPoint,
};
use crate::error::{Error, Result};
use crate::linops::{ComplexMatrix, HermitianOperator};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Re-evaluated witnesses must reproduce their values to this accuracy.
pub const REVALIDATION_TOL: f64 = 1e-8;
const MAX_GRID_POINTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Divisibility,
    Discriminate,
    Hierarchy,
    Monotonicity,
    Minentropy,
    WitnessSearch,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Divisibility => "divisibility",
            Task::Discriminate => "discriminate",
            Task::Hierarchy => "hierarchy",
            Task::Monotonicity => "monotonicity",
            Task::Minentropy => "minentropy",
            Task::WitnessSearch => "witness-search",
        }
    }

    fn needs_channels(self) -> bool {
        matches!(
            self,
            Task::Discriminate | Task::Hierarchy | Task::Monotonicity | Task::Minentropy
        )
    }
}

fn default_semigroup_rates() -> [f64; 3] {
    [0.3, 0.2, 0.5]
}

/// Generator block: a named preset or an explicit GKSL specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Pauli rates `(1, 1, −tanh t)`.
    Eternal,
    /// Constant Pauli rates with an optional `σz` drift of frequency `omega`.
    Semigroup {
        #[serde(default = "default_semigroup_rates")]
        rates: [f64; 3],
        #[serde(default)]
        omega: f64,
    },
    /// Pauli dynamics with arbitrary rate functions.
    Pauli { rates: [RateFunction; 3] },
    AmplitudeDamping { rate: RateFunction },
    HamiltonianDrift { omega: f64 },
    Dephasing { gamma: f64 },
    Explicit {
        dim: usize,
        #[serde(default)]
        hamiltonian: Vec<HamiltonianTerm>,
        #[serde(default)]
        dissipators: Vec<Dissipator>,
        #[serde(default)]
        canonical: bool,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<GKSLGenerator> {
        let g = match self {
            GeneratorSpec::Eternal => presets::eternal(),
            GeneratorSpec::Semigroup { rates, omega } => {
                if rates.iter().any(|&r| r < 0.0) {
                    return Err(Error::Config("semigroup rates must be nonnegative".into()));
                }
                presets::semigroup(*rates, *omega)
            }
            GeneratorSpec::Pauli { rates } => presets::pauli_dynamics(rates.clone()),
            GeneratorSpec::AmplitudeDamping { rate } => presets::amplitude_damping(rate.clone()),
            GeneratorSpec::HamiltonianDrift { omega } => presets::hamiltonian_drift(*omega),
            GeneratorSpec::Dephasing { gamma } => presets::dephasing(*gamma),
            GeneratorSpec::Explicit {
                dim,
                hamiltonian,
                dissipators,
                canonical,
            } => GKSLGenerator {
                dim: *dim,
                hamiltonian: hamiltonian.clone(),
                dissipators: dissipators.clone(),
                canonical: *canonical,
            },
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        if !(self.step > 0.0) || !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config("grid needs t_max > 0 and step > 0".into()));
        }
        if self.t_max / self.step > MAX_GRID_POINTS as f64 {
            return Err(Error::Config(format!("grid exceeds {MAX_GRID_POINTS} points")));
        }
        TimeGrid::uniform(self.t_max, self.step).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelPreset {
    Identity {
        #[serde(default = "two")]
        dim: usize,
    },
    CompletelyDepolarizing {
        #[serde(default = "two")]
        dim: usize,
    },
    /// `λ ρ + (1−λ) tr(ρ) I/d`.
    Depolarizing {
        #[serde(default = "two")]
        dim: usize,
        lambda: f64,
    },
    /// Weights on `(I, σx, σy, σz)`.
    Pauli { probabilities: [f64; 4] },
    Dephasing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    Unitary { matrix: ComplexMatrix },
}

fn two() -> usize {
    2
}

/// Channel block: Kraus operators, a Choi matrix, or a preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    Kraus { dims: [usize; 2], matrices: Vec<ComplexMatrix> },
    /// `matrices` holds exactly one Choi matrix.
    Choi { dims: [usize; 2], matrices: Vec<ComplexMatrix> },
    Preset(ChannelPreset),
}

impl ChannelSpec {
    pub fn build(&self) -> Result<Channel> {
        let ch = match self {
            ChannelSpec::Kraus { dims, matrices } => {
                if matrices.iter().any(|m| (m.rows(), m.cols()) != (dims[1], dims[0])) {
                    return Err(Error::Config(format!(
                        "Kraus operators must be {}x{} for dims [{}, {}]",
                        dims[1], dims[0], dims[0], dims[1]
                    )));
                }
                Channel::from_kraus(matrices)?
            }
            ChannelSpec::Choi { dims, matrices } => {
                let [m] = matrices.as_slice() else {
                    return Err(Error::Config("a Choi block holds exactly one matrix".into()));
                };
                Channel::from_choi(dims[0], dims[1], HermitianOperator::new(m.clone())?)?
            }
            ChannelSpec::Preset(p) => match p {
                ChannelPreset::Identity { dim } => Channel::identity(*dim),
                ChannelPreset::CompletelyDepolarizing { dim } => Channel::completely_depolarizing(*dim),
                ChannelPreset::Depolarizing { dim, lambda } => Channel::depolarizing(*dim, *lambda)?,
                ChannelPreset::Pauli { probabilities } => Channel::pauli(*probabilities)?,
                ChannelPreset::Dephasing { p } => Channel::dephasing(*p)?,
                ChannelPreset::AmplitudeDamping { gamma } => Channel::amplitude_damping(*gamma)?,
                ChannelPreset::Unitary { matrix } => Channel::unitary(matrix)?,
            },
        };
        if !ch.cp_certified() || !ch.tp_certified() {
            return Err(Error::Config("channel block is not CPTP".into()));
        }
        Ok(ch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSpec {
    pub phi1: ChannelSpec,
    pub phi2: ChannelSpec,
}

/// Task parameters; absent values take the documented defaults. Counts are
/// signed so that negative values get a named error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    /// Ancilla dimension / positivity level; defaults to the system dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    /// Prior on the second channel; defaults to 0.5 (witness search samples it).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Propagator span for divisibility scans; defaults to one grid step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Seesaw random restarts; default 32.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<i64>,
    /// Witness-search candidates; default 200.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cold_start: Option<bool>,
    /// Witness-search family; default mixed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<ChannelFamily>,
    /// Sample times for `minentropy`; default every grid time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for `report.json` and CSV files.
    pub dir: String,
}

/// Parameters after defaults, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub task: Task,
    pub seed: u64,
    pub dim: usize,
    pub grid_points: usize,
    pub k: usize,
    pub p: Option<f64>,
    pub epsilon: f64,
    pub restarts: usize,
    pub budget: usize,
    pub cold_start: bool,
    pub family: ChannelFamily,
    pub violation_threshold: f64,
}

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_BUDGET: usize = 200;
pub const DEFAULT_P: f64 = 0.5;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Parses with `task` forced, so a file may omit it.
    pub fn from_toml_with_task(text: &str, task: Task) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        table.insert("task".into(), toml::Value::String(task.name().into()));
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Semantic checks and defaults; no computation beyond building inputs.
    pub fn resolve(&self) -> Result<Resolved> {
        let g = self.generator.build()?;
        let grid = self.grid.build()?;
        let d = g.dim;
        let k = match self.params.k {
            None => d,
            Some(k) if k < 1 => return Err(Error::Config(format!("k must be at least 1, got {k}"))),
            Some(k) if k as usize > d => {
                return Err(Error::Config(format!("k = {k} exceeds the system dimension {d}")))
            }
            Some(k) => k as usize,
        };
        let restarts = match self.params.restarts {
            None => DEFAULT_RESTARTS,
            Some(r) if r < 0 => return Err(Error::Config(format!("restarts must be nonnegative, got {r}"))),
            Some(0) => return Err(Error::Config("restarts must be at least 1".into())),
            Some(r) => r as usize,
        };
        let budget = match self.params.budget {
            None => DEFAULT_BUDGET,
            Some(b) if b < 1 => return Err(Error::Config(format!("budget must be at least 1, got {b}"))),
            Some(b) => b as usize,
        };
        if let Some(p) = self.params.p {
            discrimination::check_probability(p).map_err(|e| Error::Config(e.to_string()))?;
        }
        let p = match (self.task, self.params.p) {
            (Task::WitnessSearch, p) => p,
            (_, p) => Some(p.unwrap_or(DEFAULT_P)),
        };
        let epsilon = self.params.epsilon.unwrap_or(self.grid.step);
        epsilon_steps(&grid, epsilon).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(times) = &self.params.times {
            for &t in times {
                grid.index_of(t).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if let Some(ChannelFamily::RandomKraus { rank }) = self.params.family {
            if rank == 0 || rank > d * d {
                return Err(Error::Config(format!("Kraus rank {rank} outside [1, {}]", d * d)));
            }
        }
        if self.params.family == Some(ChannelFamily::Pauli) && d != 2 {
            return Err(Error::Config("the Pauli family needs a qubit generator".into()));
        }
        match (&self.channels, self.task.needs_channels()) {
            (None, true) => {
                return Err(Error::Config(format!("task {} needs a [channels] block", self.task.name())))
            }
            (Some(ch), _) => {
                for (name, spec) in [("phi1", &ch.phi1), ("phi2", &ch.phi2)] {
                    let c = spec.build().map_err(|e| Error::Config(format!("channel {name}: {e}")))?;
                    if c.dim() != d || c.map().dim_out() != d {
                        return Err(Error::Config(format!(
                            "channel {name} acts on dimension {} but the generator on {d}",
                            c.dim()
                        )));
                    }
                }
            }
            (None, false) => {}
        }
        Ok(Resolved {
            task: self.task,
            seed: self.seed,
            dim: d,
            grid_points: grid.len(),
            k,
            p,
            epsilon,
            restarts,
            budget,
            cold_start: self.params.cold_start.unwrap_or(false),
            family: self.params.family.unwrap_or(ChannelFamily::Mixed),
            violation_threshold: discrimination::VIOLATION_THRESHOLD,
        })
    }

    fn channels_built(&self) -> Result<(Channel, Channel)> {
        let ch = self
            .channels
            .as_ref()
            .ok_or_else(|| Error::Config(format!("task {} needs a [channels] block", self.task.name())))?;
        Ok((ch.phi1.build()?, ch.phi2.build()?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskResult {
    Simulate {
        trajectory: Vec<TrajectoryPoint>,
        cp_certified: Vec<bool>,
        /// Per-time rate signs; absent for non-canonical generators.
        rates_cp: Option<Vec<bool>>,
    },
    Divisibility {
        scan: DivisibilityReport,
        rates_cp: Option<Vec<bool>>,
    },
    Discriminate {
        result: DistinguishabilityResult,
    },
    Hierarchy {
        hierarchy: Hierarchy,
    },
    Monotonicity {
        trace: MonotonicityTrace,
    },
    Minentropy {
        k: usize,
        p: f64,
        entries: Vec<MinEntropy>,
        nondecreasing: bool,
    },
    WitnessSearch {
        search: WitnessSearchResult,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Flags {
    /// A violation was certified (divisibility, monotonicity or witness search).
    pub certified_violation: bool,
    /// The scan stopped at a non-invertible dynamical map.
    pub halted: Option<Halt>,
    /// Verdicts whose minimum lies within the certificate tolerance.
    pub marginal: usize,
    /// Increases below the violation threshold but above rounding.
    pub inconclusive: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub resolved: Resolved,
    pub result: TaskResult,
    pub flags: Flags,
    /// Seesaw runs behind the reported values.
    pub restarts_total: usize,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Exit status contract: 4 on a certified violation, 3 when the scan
    /// halted at a singular map, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.flags.certified_violation {
            4
        } else if self.flags.halted.is_some() {
            3
        } else {
            0
        }
    }
}

/// 2 for input and validation problems, 3 for numerical failures.
pub fn exit_code_for_error(e: &Error) -> i32 {
    match e {
        Error::IntegrationDrift { .. }
        | Error::Singular { .. }
        | Error::NoConvergence { .. }
        | Error::IllConditioned(_)
        | Error::NonFinite => 3,
        _ => 2,
    }
}

fn seesaw_options(r: &Resolved) -> SeesawOptions {
    SeesawOptions::default().with_restarts(r.restarts).with_seed(r.seed)
}

fn monotonicity_options(r: &Resolved) -> MonotonicityOptions {
    MonotonicityOptions {
        seesaw: seesaw_options(r),
        cold_start: r.cold_start,
        ..MonotonicityOptions::default()
    }
}

fn trajectory(s: &Scenario) -> Result<(GKSLGenerator, MapTrajectory)> {
    let g = s.generator.build()?;
    let traj = integrate(&g, &s.grid.build()?)?;
    Ok((g, traj))
}

/// Executes the scenario's task. Output is a pure function of the scenario.
pub fn run(s: &Scenario) -> Result<Report> {
    let r = s.resolve()?;
    let mut flags = Flags::default();
    let mut restarts_total = 0;
    let result = match s.task {
        Task::Simulate => {
            let (g, traj) = trajectory(s)?;
            TaskResult::Simulate {
                cp_certified: traj.maps().iter().map(|m| m.cp_certified()).collect(),
                rates_cp: g.canonical.then(|| g.rates_cp_check(traj.times())).transpose()?,
                trajectory: traj.export(),
            }
        }
        Task::Divisibility => {
            let (g, traj) = trajectory(s)?;
            let scan = divisibility_scan(&traj, r.k, r.epsilon, &seesaw_options(&r))?;
            flags.certified_violation = scan.first_violation.is_some();
            flags.halted = scan.halted;
            flags.marginal = scan.entries.iter().filter(|e| e.verdict.marginal).count();
            restarts_total = scan.entries.iter().map(|e| e.verdict.restarts_used).sum();
            let times: Vec<f64> = scan.entries.iter().map(|e| e.time).collect();
            TaskResult::Divisibility {
                rates_cp: g.canonical.then(|| g.rates_cp_check(&times)).transpose()?,
                scan,
            }
        }
        Task::Discriminate => {
            let (a, b) = s.channels_built()?;
            let inst = DiscriminationInstance::new(a, b, r.p.unwrap_or(DEFAULT_P), r.k)?;
            let result = channel_distinguishability(&inst, &seesaw_options(&r), None)?;
            restarts_total = result.restarts;
            TaskResult::Discriminate { result }
        }
        Task::Hierarchy => {
            let (a, b) = s.channels_built()?;
            let hierarchy = hierarchy_check(&a, &b, r.p.unwrap_or(DEFAULT_P), &seesaw_options(&r))?;
            restarts_total = hierarchy.results.iter().map(|x| x.restarts).sum();
            TaskResult::Hierarchy { hierarchy }
        }
        Task::Monotonicity => {
            let (_, traj) = trajectory(s)?;
            let (a, b) = s.channels_built()?;
            let trace = monotonicity_trace(&traj, &a, &b, r.p.unwrap_or(DEFAULT_P), r.k, &monotonicity_options(&r))?;
            flags.certified_violation = !trace.violations.is_empty();
            flags.inconclusive = trace.inconclusive.len();
            restarts_total = trace.restarts;
            TaskResult::Monotonicity { trace }
        }
        Task::Minentropy => {
            let (_, traj) = trajectory(s)?;
            let (a, b) = s.channels_built()?;
            let p = r.p.unwrap_or(DEFAULT_P);
            let inst = DiscriminationInstance::new(a, b, p, r.k)?;
            let times = s.params.times.clone().unwrap_or_else(|| traj.times().to_vec());
            let entries = times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let o = seesaw_options(&r).with_seed(crate::dynamics::derive_seed(r.seed, i as u64));
                    min_entropy(&inst, &traj, t, &o)
                })
                .collect::<Result<Vec<_>>>()?;
            restarts_total = entries.len() * r.restarts;
            let nondecreasing = entries
                .windows(2)
                .all(|w| w[1].h_min >= w[0].h_min - discrimination::VIOLATION_THRESHOLD);
            TaskResult::Minentropy {
                k: r.k,
                p,
                entries,
                nondecreasing,
            }
        }
        Task::WitnessSearch => {
            let (_, traj) = trajectory(s)?;
            let opts = WitnessSearchOptions {
                family: r.family,
                budget: r.budget,
                seed: r.seed,
                p: r.p,
                trace: MonotonicityOptions {
                    cold_start: r.cold_start,
                    ..WitnessSearchOptions::default().trace
                },
                ..WitnessSearchOptions::default()
            };
            let search = witness_search(&traj, r.k, &opts)?;
            flags.certified_violation = search.found();
            restarts_total = search.witness.as_ref().map_or(0, |w| w.trace.restarts);
            TaskResult::WitnessSearch { search }
        }
    };
    Ok(Report {
        tool: "kdiv".into(),
        version: VERSION.into(),
        scenario: s.clone(),
        resolved: r,
        result,
        flags,
        restarts_total,
    })
}

/// Re-evaluates every witness embedded in a report against the scenario it
/// echoes; returns the largest deviation from the recorded values.
pub fn revalidate_report(report: &Report) -> Result<f64> {
    let s = &report.scenario;
    let mut worst: f64 = 0.0;
    let mut track = |claimed: f64, actual: f64| worst = worst.max((claimed - actual).abs());
    match &report.result {
        TaskResult::Simulate { .. } => {}
        TaskResult::Divisibility { scan, .. } => {
            let (_, traj) = trajectory(s)?;
            let steps = epsilon_steps(traj.grid(), scan.epsilon)?;
            for e in &scan.entries {
                let i = traj.grid().index_of(e.time)?;
                let prop = traj.propagator(i, i + steps)?;
                track(e.verdict.min_value, e.verdict.reevaluate(&prop.map));
            }
        }
        TaskResult::Discriminate { result } => {
            let (a, b) = s.channels_built()?;
            let inst = DiscriminationInstance::new(a, b, result.p, result.k)?;
            track(result.value, inst.evaluate_input(&result.optimal_input)?);
        }
        TaskResult::Hierarchy { hierarchy } => {
            let (a, b) = s.channels_built()?;
            for res in &hierarchy.results {
                let inst = DiscriminationInstance::new(a.clone(), b.clone(), res.p, res.k)?;
                track(res.value, inst.evaluate_input(&res.optimal_input)?);
            }
        }
        TaskResult::Monotonicity { trace } => {
            let (_, traj) = trajectory(s)?;
            let (a, b) = s.channels_built()?;
            worst = worst.max(revalidate_trace(&traj, &a, &b, trace)?);
        }
        TaskResult::Minentropy { k, p, entries, .. } => {
            let (_, traj) = trajectory(s)?;
            let (a, b) = s.channels_built()?;
            let base = DiscriminationInstance::new(a, b, *p, *k)?;
            for e in entries {
                let lambda = traj.map_at(traj.grid().index_of(e.time)?);
                track(e.distinguishability, base.precomposed(lambda)?.evaluate_input(&e.input)?);
            }
        }
        TaskResult::WitnessSearch { search } => {
            if let Some(w) = &search.witness {
                let (_, traj) = trajectory(s)?;
                let (a, b) = w.pair.channels()?;
                worst = worst.max(revalidate_trace(&traj, &a, &b, &w.trace)?);
            }
        }
    }
    Ok(worst)
}

/// `time,D,dD_dt,H_min,violation_flag`; header only for an empty trace.
pub fn trace_csv(trace: Option<&MonotonicityTrace>) -> String {
    let mut out = String::from("time,D,dD_dt,H_min,violation_flag\n");
    if let Some(tr) = trace {
        for i in 0..tr.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                tr.times[i],
                tr.values[i],
                tr.derivatives[i],
                tr.h_min[i],
                u8::from(tr.flagged(i))
            );
        }
    }
    out
}

/// `k,D_k`.
pub fn hierarchy_csv(h: &Hierarchy) -> String {
    let mut out = String::from("k,D_k\n");
    for (i, v) in h.values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

/// Plot-ready CSV files for a report, as `(file name, contents)`.
pub fn export_csv(report: &Report) -> Vec<(String, String)> {
    match &report.result {
        TaskResult::Simulate { trajectory, cp_certified, .. } => {
            let mut out = String::from("time,cp_certified\n");
            for (p, cp) in trajectory.iter().zip(cp_certified) {
                let _ = writeln!(out, "{},{}", p.time, u8::from(*cp));
            }
            vec![("trajectory.csv".into(), out)]
        }
        TaskResult::Divisibility { scan, .. } => {
            let mut out = String::from("time,min_value,certified_negative,marginal\n");
            for e in &scan.entries {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    e.time,
                    e.verdict.min_value,
                    u8::from(e.verdict.is_violation()),
                    u8::from(e.verdict.marginal)
                );
            }
            vec![("divisibility.csv".into(), out)]
        }
        TaskResult::Discriminate { result } => {
            vec![("discriminate.csv".into(), format!("k,D_k\n{},{}\n", result.k, result.value))]
        }
        TaskResult::Hierarchy { hierarchy } => vec![("hierarchy.csv".into(), hierarchy_csv(hierarchy))],
        TaskResult::Monotonicity { trace } => vec![("trace.csv".into(), trace_csv(Some(trace)))],
        TaskResult::Minentropy { entries, .. } => {
            let mut out = String::from("time,D,H_min,p_guess_cq\n");
            for e in entries {
                let _ = writeln!(out, "{},{},{},{}", e.time, e.distinguishability, e.h_min, e.cq_guessing_probability);
            }
            vec![("minentropy.csv".into(), out)]
        }
        TaskResult::WitnessSearch { search } => {
            vec![("trace.csv".into(), trace_csv(search.witness.as_ref().map(|w| &w.trace)))]
        }
    }
}
