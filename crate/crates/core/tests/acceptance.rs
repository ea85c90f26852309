//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. The suite runs twice; criterion 12
//! compares the two serialized reports byte for byte.

use std::time::Instant;

use kdiv::channels::{k_positivity, Channel, HermitianMap, KPositivity, SeesawOptions};
use kdiv::discrimination::{
    channel_distinguishability, classical_channel_distinguishability, classical_monotonicity_trace,
    classical_witness_search, hierarchy_check, min_entropy, monotonicity_trace, vertex_channels, witness_search,
    DiscriminationInstance, MonotonicityOptions, MonotonicityTrace, Witness, WitnessSearchOptions,
};
use kdiv::dynamics::classical::{classical_integrate, KolmogorovGenerator, RealMatrix};
use kdiv::dynamics::{derive_seed, divisibility_scan, integrate, integrate_with, presets, MapTrajectory, TimeGrid};
use kdiv::linops::{
    pauli, random_density_with, random_hermitian, random_pure_state_with, random_unitary, seeded_rng, trace_norm,
    DensityOperator, PureState,
};
use rand::Rng;
use serde_json::{json, Value};

const MASTER_SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
    report: Value,
}

fn seed(criterion: u64) -> u64 {
    derive_seed(MASTER_SEED, criterion)
}

fn opts(restarts: usize, seed: u64) -> SeesawOptions {
    SeesawOptions::default().with_restarts(restarts).with_seed(seed)
}

fn random_channel<R: Rng>(d: usize, rng: &mut R) -> Channel {
    let rank = rng.random_range(1..=d * d);
    Channel::random(d, rank, rng).unwrap()
}

fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn c1_distinguishability_gap() -> Outcome {
    let h = hierarchy_check(
        &Channel::identity(2),
        &Channel::completely_depolarizing(2),
        0.5,
        &opts(32, seed(1)),
    )
    .unwrap();
    let (d1, d2) = (h.values[0], h.values[1]);
    let pass = (d1 - 0.5).abs() <= 1e-6 && (d2 - 0.75).abs() <= 1e-6 && h.monotone;
    Outcome {
        pass,
        detail: format!("D1 = {d1:.9}, D2 = {d2:.9}, monotone chain = {}", h.monotone),
        report: json!({ "values": h.values, "monotone": h.monotone }),
    }
}

fn c2_pauli_oracle() -> Outcome {
    let mut rng = seeded_rng(seed(2), 0);
    let mut worst_value: f64 = 0.0;
    let mut worst_schmidt: f64 = 0.0;
    let mut values = Vec::new();
    for i in 0..20 {
        let (a, b) = (random_simplex(4, &mut rng), random_simplex(4, &mut rng));
        let oracle = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        let inst = DiscriminationInstance::new(
            Channel::pauli([a[0], a[1], a[2], a[3]]).unwrap(),
            Channel::pauli([b[0], b[1], b[2], b[3]]).unwrap(),
            0.5,
            2,
        )
        .unwrap();
        let r = channel_distinguishability(&inst, &opts(32, derive_seed(seed(2), i)), None).unwrap();
        let s = r.optimal_input.schmidt_coefficients();
        worst_value = worst_value.max((r.value - oracle).abs());
        worst_schmidt = worst_schmidt.max((s[0] - s[1]).abs());
        values.push(r.value);
    }
    Outcome {
        pass: worst_value <= 1e-6 && worst_schmidt <= 1e-4,
        detail: format!("max |D2 - oracle| = {worst_value:.2e}, max Schmidt gap = {worst_schmidt:.2e} over 20 pairs"),
        report: json!({ "values": values }),
    }
}

fn c3_transpose() -> Outcome {
    let t = HermitianMap::transpose(2);
    let v1 = k_positivity(&t, 1, &opts(32, seed(3))).unwrap();
    let v2 = k_positivity(&t, 2, &opts(32, seed(3))).unwrap();
    let rank = v2.witness.numerical_rank();
    let pass = v1.outcome == KPositivity::PresumedPositive
        && v1.min_value >= -1e-8
        && v2.outcome == KPositivity::CertifiedNegative
        && (v2.min_value + 1.0).abs() <= 1e-6
        && rank == 2;
    Outcome {
        pass,
        detail: format!(
            "k=1 min {:.3e} ({:?}), k=2 min {:.9} ({:?}), witness rank {rank}",
            v1.min_value, v1.outcome, v2.min_value, v2.outcome
        ),
        report: json!({ "k1": v1.min_value, "k2": v2.min_value, "rank": rank }),
    }
}

fn c4_eternal_scan() -> Outcome {
    let grid = TimeGrid::uniform(2.0, 0.01).unwrap();
    let g = presets::eternal();
    let traj = integrate(&g, &grid).unwrap();
    let o = opts(32, seed(4));
    let s2 = divisibility_scan(&traj, 2, 0.01, &o).unwrap();
    let s1 = divisibility_scan(&traj, 1, 0.01, &o).unwrap();
    let late: Vec<_> = s2.entries.iter().filter(|e| e.time >= 0.05 - 1e-12).collect();
    let all_violate = !late.is_empty() && late.iter().all(|e| e.verdict.is_violation());
    let k1_positive = s1.entries.iter().all(|e| e.verdict.outcome == KPositivity::PresumedPositive);
    let rates = g.rates_cp_check(grid.times()).unwrap();
    let rates_false = grid.times().iter().zip(&rates).all(|(&t, &ok)| t == 0.0 || !ok);
    let halted = s1.halted.is_some() || s2.halted.is_some();
    Outcome {
        pass: all_violate && k1_positive && rates_false && !halted,
        detail: format!(
            "k=2 violations at {}/{} times t >= 0.05, k=1 presumed positive at all {} times = {k1_positive}, rates_cp false for t > 0 = {rates_false}",
            late.iter().filter(|e| e.verdict.is_violation()).count(),
            late.len(),
            s1.entries.len()
        ),
        report: json!({
            "k2_min": s2.entries.iter().map(|e| e.verdict.min_value).collect::<Vec<_>>(),
            "k1_min": s1.entries.iter().map(|e| e.verdict.min_value).collect::<Vec<_>>(),
        }),
    }
}

fn c5_semigroup_traces() -> (Outcome, Vec<MonotonicityTrace>) {
    let traj = integrate(&presets::semigroup([0.3, 0.2, 0.5], 1.0), &TimeGrid::uniform(2.0, 0.05).unwrap()).unwrap();
    let mut rng = seeded_rng(seed(5), 0);
    let mut traces = Vec::new();
    for i in 0..25u64 {
        let (a, b) = (random_channel(2, &mut rng), random_channel(2, &mut rng));
        let p = rng.random_range(0.1..0.9);
        for k in 1..=2 {
            let o = MonotonicityOptions {
                seesaw: opts(32, derive_seed(seed(5), 2 * i + k as u64)),
                ..MonotonicityOptions::default()
            };
            traces.push(monotonicity_trace(&traj, &a, &b, p, k, &o).unwrap());
        }
    }
    let violations: usize = traces.iter().map(|t| t.violations.len()).sum();
    let max_inc = traces.iter().map(|t| t.max_increase).fold(f64::MIN, f64::max);
    let outcome = Outcome {
        pass: violations == 0 && max_inc < 1e-7,
        detail: format!("{} traces, {violations} violations, max increase {max_inc:.2e}", traces.len()),
        report: json!({ "values": traces.iter().map(|t| &t.values).collect::<Vec<_>>() }),
    };
    (outcome, traces)
}

fn c6_witness_search() -> (Outcome, Option<(Witness, MapTrajectory)>) {
    let traj = integrate(&presets::eternal(), &TimeGrid::uniform(1.0, 0.01).unwrap()).unwrap();
    let o = WitnessSearchOptions {
        budget: 200,
        seed: seed(6),
        ..WitnessSearchOptions::default()
    };
    let r2 = witness_search(&traj, 2, &o).unwrap();
    let r1 = witness_search(&traj, 1, &o).unwrap();
    let found = r2.witness.as_ref().is_some_and(|w| w.increase > 1e-4);
    let detail = match &r2.witness {
        Some(w) => format!(
            "k=2: increase {:.3e} from t = {} to {} ({}, p = {:.4}); k=1: found = {}, best {:.2e}",
            w.increase,
            w.from,
            w.time,
            w.pair.label,
            w.pair.p,
            r1.found(),
            r1.best_increase
        ),
        None => format!("k=2: none found within budget (best {:.2e})", r2.best_increase),
    };
    let outcome = Outcome {
        pass: found && !r1.found(),
        detail,
        report: json!({
            "k2_best": r2.best_increase,
            "k1_best": r1.best_increase,
            "k2_values": r2.witness.as_ref().map(|w| w.trace.values.clone()),
        }),
    };
    (outcome, r2.witness.map(|w| (w, traj)))
}

fn c7_min_entropy(semigroup: &[MonotonicityTrace], witness: Option<&(Witness, MapTrajectory)>) -> Outcome {
    let min_step = semigroup
        .iter()
        .flat_map(|t| t.h_min.windows(2).map(|w| w[1] - w[0]))
        .fold(f64::INFINITY, f64::min);
    let Some((w, traj)) = witness else {
        return Outcome {
            pass: false,
            detail: format!("semigroup min H_min step {min_step:.2e}; no violating trace available"),
            report: json!({ "min_step": min_step }),
        };
    };
    let tr = &w.trace;
    let drops = tr.violations.iter().all(|v| {
        let (i, j) = (traj.grid().index_of(v.from).unwrap(), traj.grid().index_of(v.time).unwrap());
        tr.h_min[j] < tr.h_min[i]
    });
    let (a, b) = w.pair.channels().unwrap();
    let inst = DiscriminationInstance::new(a, b, w.pair.p, tr.k).unwrap();
    let n = traj.len();
    let mut worst: f64 = 0.0;
    let mut h = Vec::new();
    for s in 0..10 {
        let t = traj.times()[s * (n - 1) / 9];
        let m = min_entropy(&inst, traj, t, &opts(8, derive_seed(seed(7), s as u64))).unwrap();
        worst = worst.max((m.h_min + m.cq_guessing_probability.log2()).abs());
        h.push(m.h_min);
    }
    Outcome {
        pass: min_step >= -1e-7 && drops && !tr.violations.is_empty() && worst <= 1e-8,
        detail: format!(
            "semigroup min H_min step {min_step:.2e}; H_min drops at all {} flagged times = {drops}; max |H_min + log2 p_guess(cq)| = {worst:.2e}",
            tr.violations.len()
        ),
        report: json!({ "min_step": min_step, "h_min": h }),
    }
}

/// Pauli-diagonal map with Bloch scalings `lambda`, between random unitaries.
fn pauli_diagonal_map<R: Rng>(lambda: [f64; 3], rng: &mut R) -> HermitianMap {
    let [l1, l2, l3] = lambda;
    let q = [
        (1.0 + l1 + l2 + l3) / 4.0,
        (1.0 + l1 - l2 - l3) / 4.0,
        (1.0 - l1 + l2 - l3) / 4.0,
        (1.0 - l1 - l2 + l3) / 4.0,
    ];
    let units: Vec<Channel> = pauli::all().iter().map(|s| Channel::unitary(s).unwrap()).collect();
    let terms: Vec<(f64, &HermitianMap)> = q.iter().zip(&units).map(|(&w, u)| (w, u.map())).collect();
    let core = HermitianMap::linear_combination(&terms).unwrap();
    let u = Channel::unitary(&random_unitary(2, rng)).unwrap();
    let v = Channel::unitary(&random_unitary(2, rng)).unwrap();
    HermitianMap::compose(u.map(), &HermitianMap::compose(&core, v.map()).unwrap()).unwrap()
}

fn c8_contraction() -> Outcome {
    let mut rng = seeded_rng(seed(8), 0);
    let mut failures = 0;
    let mut worst: f64 = f64::MIN;
    for i in 0..100 {
        let d = 2 + i % 2;
        let ch = random_channel(d, &mut rng);
        for _ in 0..100 {
            let h = random_hermitian(d, &mut rng);
            let gap = trace_norm(&ch.apply(&h).unwrap()).unwrap() - trace_norm(&h).unwrap();
            worst = worst.max(gap);
            if gap > 1e-9 {
                failures += 1;
            }
        }
    }
    let mut sampled = 0;
    let mut certified = 0;
    let mut mins = Vec::new();
    for i in 0..20u64 {
        let big = rng.random_range(1.05..1.6);
        let lambda = [big, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let m = pauli_diagonal_map(lambda, &mut rng);
        let expands = |x: &DensityOperator| trace_norm(&m.apply(x.operator()).unwrap()).unwrap() > 1.0 + 1e-9;
        if (0..2000).any(|_| expands(&DensityOperator::from_pure(&random_pure_state_with(2, &mut rng)))) {
            sampled += 1;
        }
        let v = k_positivity(&m, 1, &opts(64, derive_seed(seed(8), i))).unwrap();
        if v.is_violation() && v.violating_input().as_ref().is_some_and(expands) {
            certified += 1;
        }
        mins.push(v.min_value);
    }
    Outcome {
        pass: failures == 0 && sampled == 20 && certified >= 18,
        detail: format!(
            "10^4 CPTP contractions, {failures} failures (max gap {worst:.2e}); non-positive maps: {sampled}/20 sampled expansions, {certified}/20 certified"
        ),
        report: json!({ "worst_gap": worst, "mins": mins }),
    }
}

fn c9_pure_inputs() -> Outcome {
    let mut rng = seeded_rng(seed(9), 0);
    let mut worst = f64::MIN;
    for i in 0..100u64 {
        let k = 1 + (i % 2) as usize;
        let (a, b) = (random_channel(2, &mut rng), random_channel(2, &mut rng));
        let p = rng.random_range(0.05..0.95);
        let inst = DiscriminationInstance::new(a, b, p, k).unwrap();
        let rho = random_density_with(2 * k, 2 * k, &mut rng).unwrap();
        let mixed = inst.objective_mixed(&rho).unwrap();
        let e = kdiv::linops::eig_hermitian(rho.operator()).unwrap();
        let best_eig = (0..2 * k)
            .map(|j| inst.objective(&PureState::normalized(&e.vector(j)).unwrap()).unwrap())
            .fold(f64::MIN, f64::max);
        let opt = channel_distinguishability(&inst, &opts(8, derive_seed(seed(9), i)), None).unwrap();
        worst = worst.max(mixed - best_eig.max(opt.value));
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max (mixed - best pure) = {worst:.2e} over 100 instances"),
        report: json!({ "worst": worst }),
    }
}

fn random_kolmogorov<R: Rng>(n: usize, rng: &mut R) -> RealMatrix {
    let mut k = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut out = 0.0;
        for i in (0..n).filter(|&i| i != j) {
            let r = rng.random_range(0.0..1.5);
            k.set(i, j, r);
            out += r;
        }
        k.set(j, j, -out);
    }
    k
}

fn random_stochastic<R: Rng>(n: usize, rng: &mut R) -> RealMatrix {
    let cols: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(n, rng)).collect();
    RealMatrix::from_fn(n, n, |i, j| cols[j][i])
}

fn c10_classical() -> Outcome {
    let mut rng = seeded_rng(seed(10), 0);
    let grid = TimeGrid::uniform(1.0, 0.05).unwrap();
    let priors = [0.3, 0.5, 0.7];
    let mut monotone = 0;
    let mut max_inc = f64::MIN;
    let mut generators = Vec::new();
    for _ in 0..4 {
        let k = random_kolmogorov(3, &mut rng);
        let traj = classical_integrate(&KolmogorovGenerator::constant(k.clone()).unwrap(), &grid).unwrap();
        let vs = vertex_channels(3);
        let mut ok = true;
        for &p in &priors {
            for s1 in &vs {
                for s2 in &vs {
                    let tr = classical_monotonicity_trace(&traj, s1, s2, p).unwrap();
                    max_inc = max_inc.max(tr.max_increase);
                    ok &= tr.violations.is_empty();
                }
            }
        }
        monotone += usize::from(ok);
        generators.push(k);
    }
    let mut bad = generators[0].clone();
    let (i, j) = (0, 1);
    let shift = bad.get(i, j) + 0.5;
    bad.set(i, j, -0.5);
    bad.set(j, j, bad.get(j, j) + shift);
    let bad_traj = classical_integrate(&KolmogorovGenerator::constant(bad).unwrap(), &grid).unwrap();
    let detected = classical_witness_search(&bad_traj, &priors).unwrap();

    let mut worst_grid: f64 = 0.0;
    for _ in 0..20 {
        let (s1, s2) = (random_stochastic(3, &mut rng), random_stochastic(3, &mut rng));
        let p = rng.random_range(0.0..1.0);
        let (v, _) = classical_channel_distinguishability(&s1, &s2, p).unwrap();
        let mut grid_max = f64::MIN;
        for a in 0..=100 {
            for b in 0..=(100 - a) {
                let x = [a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0];
                let (y1, y2) = (s1.matvec(&x).unwrap(), s2.matvec(&x).unwrap());
                let val: f64 = y1.iter().zip(&y2).map(|(u, w)| ((1.0 - p) * u - p * w).abs()).sum();
                grid_max = grid_max.max(val);
            }
        }
        worst_grid = worst_grid.max((v - grid_max).abs());
    }
    Outcome {
        pass: monotone == 4 && detected.is_some() && worst_grid <= 1e-12,
        detail: format!(
            "{monotone}/4 valid generators monotone over all vertex pairs (max increase {max_inc:.2e}); negative rate detected = {} (increase {:.3e}); vertex vs grid max gap {worst_grid:.1e}",
            detected.is_some(),
            detected.as_ref().map_or(0.0, |w| w.increase)
        ),
        report: json!({ "max_inc": max_inc, "detected": detected.map(|w| w.increase), "grid_gap": worst_grid }),
    }
}

fn c11_numerics() -> Outcome {
    let gamma = 2.0;
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let exact = (-2.0 * gamma * 1.0f64).exp();
    let err = |h: f64| {
        let traj = integrate_with(&presets::dephasing(gamma), &grid, h).unwrap();
        (traj.map_at(1).map().superop()[(1, 1)].re - exact).abs()
    };
    let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| err(h)).collect();
    let orders: Vec<f64> = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| (o - 4.0).abs() <= 0.3);

    let traj = integrate(&presets::eternal(), &TimeGrid::uniform(0.99, 0.01).unwrap()).unwrap();
    let n = traj.len();
    let props: Vec<Vec<HermitianMap>> = (0..n)
        .map(|s| (s..n).map(|t| traj.propagator(s, t).unwrap().map).collect())
        .collect();
    let prop = |s: usize, t: usize| &props[s][t - s];
    let mut residual: f64 = 0.0;
    for s in 0..n {
        for u in s..n {
            for t in u..n {
                let chained = prop(u, t).superop() * prop(s, u).superop();
                residual = residual.max(chained.max_abs_diff(prop(s, t).superop()));
            }
        }
    }
    Outcome {
        pass: order_ok && residual < 1e-7 && n == 100,
        detail: format!("RK4 orders {orders:.3?}; Chapman-Kolmogorov residual {residual:.2e} over all triples of {n} points"),
        report: json!({ "errors": e, "residual": residual }),
    }
}

fn run_suite() -> Vec<(String, Outcome, f64)> {
    let mut out = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        out.push((name.to_string(), o, start.elapsed().as_secs_f64()));
    };
    timed("distinguishability gap", &mut c1_distinguishability_gap);
    timed("Pauli diamond-distance oracle", &mut c2_pauli_oracle);
    timed("transpose-map k-positivity", &mut c3_transpose);
    timed("eternal-model divisibility scan", &mut c4_eternal_scan);
    let mut traces = Vec::new();
    timed("semigroup traces are monotone", &mut || {
        let (o, t) = c5_semigroup_traces();
        traces = t;
        o
    });
    let mut witness = None;
    timed("operational witness search", &mut || {
        let (o, w) = c6_witness_search();
        witness = w;
        o
    });
    timed("min-entropy characterization", &mut || c7_min_entropy(&traces, witness.as_ref()));
    timed("trace-norm contraction suite", &mut c8_contraction);
    timed("pure-input sufficiency", &mut c9_pure_inputs);
    timed("classical suite", &mut c10_classical);
    timed("integrator numerics", &mut c11_numerics);
    out
}

fn serialize(results: &[(String, Outcome, f64)]) -> String {
    let v: Vec<Value> = results
        .iter()
        .map(|(name, o, _)| json!({ "criterion": name, "pass": o.pass, "report": o.report }))
        .collect();
    serde_json::to_string(&v).unwrap()
}

fn main() {
    let first = run_suite();
    let second = run_suite();
    let (a, b) = (serialize(&first), serialize(&second));

    let mut failed = 0;
    for (i, (name, o, secs)) in first.iter().enumerate() {
        let mark = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{mark}] {name} ({secs:.1}s): {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    let same = a == b;
    println!(
        "criterion 12 [{}] determinism: two runs with master seed {MASTER_SEED} give {} reports ({} bytes)",
        if same { "PASS" } else { "FAIL" },
        if same { "byte-identical" } else { "different" },
        a.len()
    );
    failed += usize::from(!same);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
