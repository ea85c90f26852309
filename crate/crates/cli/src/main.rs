use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use kdiv::scenario::{self, Report, Scenario, Task};

/// Decide and witness k-divisibility of quantum dynamical maps.
///
/// Every subcommand reads a TOML scenario file; command-line flags override
/// the corresponding scenario values. Exit status: 0 success, 2 invalid
/// input, 3 numerical failure or singular dynamics, 4 certified violation.
#[derive(Parser, Debug)]
#[command(name = "kdiv", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check a scenario without computing anything.
    Validate(Common),
    /// Integrate the generator and export the dynamical maps.
    Simulate(Common),
    /// Scan k-positivity of the intermediate maps Λ(t+ε, t).
    Divisibility(Common),
    /// Ancilla-assisted distinguishability D_k of the two channels.
    Discriminate(Common),
    /// D_k for every k = 1..d.
    Hierarchy(Common),
    /// D_k of the evolved channel pair along the time grid.
    Monotonicity(Common),
    /// Conditional min-entropy along the time grid.
    Minentropy(Common),
    /// Search for a channel pair whose D_k increases in time.
    WitnessSearch(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed [scenario default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Seesaw random restarts [scenario default: 32].
    #[arg(long, allow_negative_numbers = true)]
    restarts: Option<i64>,
    /// Propagator span for divisibility scans [default: one grid step].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Ancilla dimension / positivity level [default: system dimension].
    #[arg(long, allow_negative_numbers = true)]
    k: Option<i64>,
    /// Prior of the second channel [default: 0.5; sampled by witness-search].
    #[arg(long)]
    p: Option<f64>,
    /// Worker thread cap; 0 uses all cores.
    #[arg(long, env = "KDIV_THREADS", default_value_t = 0)]
    threads: usize,
    /// Re-randomize the optimizer at every time step instead of warm-starting.
    #[arg(long)]
    cold_start: bool,
    /// Output directory [default: scenario [output] dir, else "kdiv-out"].
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (Option<Task>, &Common) {
        match self {
            Command::Validate(c) => (None, c),
            Command::Simulate(c) => (Some(Task::Simulate), c),
            Command::Divisibility(c) => (Some(Task::Divisibility), c),
            Command::Discriminate(c) => (Some(Task::Discriminate), c),
            Command::Hierarchy(c) => (Some(Task::Hierarchy), c),
            Command::Monotonicity(c) => (Some(Task::Monotonicity), c),
            Command::Minentropy(c) => (Some(Task::Minentropy), c),
            Command::WitnessSearch(c) => (Some(Task::WitnessSearch), c),
        }
    }
}

fn load(path: &Path, task: Option<Task>, c: &Common) -> kdiv::Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| kdiv::Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut s = match task {
        Some(t) => Scenario::from_toml_with_task(&text, t)?,
        None => Scenario::from_toml(&text)?,
    };
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    let p = &mut s.params;
    p.restarts = c.restarts.or(p.restarts);
    p.epsilon = c.epsilon.or(p.epsilon);
    p.k = c.k.or(p.k);
    p.p = c.p.or(p.p);
    if c.cold_start {
        p.cold_start = Some(true);
    }
    Ok(s)
}

fn write_outputs(dir: &Path, report: &Report) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = report.to_json().map_err(std::io::Error::other)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    for (name, body) in scenario::export_csv(report) {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn fail(e: &kdiv::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(scenario::exit_code_for_error(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, c) = cli.command.parts();
    if c.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(c.threads).build_global() {
            eprintln!("warning: thread cap not applied: {e}");
        }
    }
    let s = match load(&c.config, task, c) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let resolved = match s.resolve() {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if task.is_none() {
        println!("ok: task {} on dimension {}, {} grid points", s.task.name(), resolved.dim, resolved.grid_points);
        return ExitCode::SUCCESS;
    }

    let start = Instant::now();
    let report = match scenario::run(&s) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let elapsed = start.elapsed().as_secs_f64();
    match scenario::revalidate_report(&report) {
        Ok(dev) if dev <= scenario::REVALIDATION_TOL => {}
        Ok(dev) => {
            eprintln!("error: report witnesses reproduce only to {dev:.3e}");
            return ExitCode::from(3);
        }
        Err(e) => return fail(&e),
    }

    let dir = c
        .out_dir
        .clone()
        .or_else(|| s.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("kdiv-out"));
    if let Err(e) = write_outputs(&dir, &report) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(2);
    }

    let f = &report.flags;
    eprintln!(
        "{}: {:.2}s, {} restarts, {} marginal, {} inconclusive -> {}",
        s.task.name(),
        elapsed,
        report.restarts_total,
        f.marginal,
        f.inconclusive,
        dir.display()
    );
    if let Some(h) = &f.halted {
        eprintln!("halted: dynamical map singular at t = {} (condition {:.3e})", h.time, h.condition);
    }
    if f.certified_violation {
        eprintln!("violation certified");
    }
    ExitCode::from(report.exit_code() as u8)
}
