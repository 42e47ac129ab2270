//! Command-line front end: single adaptive runs (`run`) and batch
//! comparison studies (`study`).
//!
//! `run` executes one adaptive computation and writes its per-level
//! history as CSV (stdout or `--out`), optionally dumping VTK snapshots.
//! `study` reads a flat `key = value` config file with one `[run]`
//! section per run, executes all runs on a bounded worker pool, and
//! writes per-run CSVs plus a summary CSV of final values and fitted
//! convergence rates.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure (the
//! partial history CSV is still written).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Args, Parser, Subcommand};

use crate::driver::{
    adaptive_solve_with, eoc, history_csv_string, AdaptiveHistory, LevelView, RunConfig, StopRule,
};
use crate::marking::Strategy;
use crate::problem::{by_name, problem_names};
use crate::solvers::NewtonConfig;
use crate::vtk::write_vtk;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Goal-oriented adaptive finite elements for semilinear elliptic problems.
#[derive(Parser)]
#[command(name = "goafem", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one adaptive computation and write its history as CSV.
    Run(RunArgs),
    /// Execute a batch of runs described by a config file.
    Study(StudyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem name: arctan1d or cubic2d.
    #[arg(long)]
    problem: String,
    /// Polynomial degree of the ansatz space.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Dörfler marking parameter in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Marking strategy: goafem, afem, or afem-plus.
    #[arg(long, default_value = "goafem")]
    strategy: String,
    /// Stop once a level reaches this many degrees of freedom
    /// (default stop rule: 100000).
    #[arg(long, group = "stop")]
    max_dofs: Option<usize>,
    /// Stop after this many levels.
    #[arg(long, group = "stop")]
    max_levels: Option<usize>,
    /// Stop once eta*sqrt(eta^2+zeta^2) falls to this value or below.
    #[arg(long, group = "stop")]
    product_tol: Option<f64>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a VTK snapshot of mesh and indicators every K levels.
    #[arg(long, value_name = "K")]
    vtk_every: Option<usize>,
    /// Directory for VTK snapshots.
    #[arg(long, default_value = "vtk")]
    vtk_dir: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// Path to the study config file.
    config: PathBuf,
    /// Number of parallel workers (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// Parse `std::env::args` and execute; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Study(args) => cmd_study(&args),
    }
}

fn build_run_config(
    problem_name: &str,
    degree: usize,
    theta: f64,
    strategy: Strategy,
    stop: StopRule,
) -> Result<RunConfig, String> {
    let problem = by_name(problem_name).ok_or_else(|| {
        format!(
            "unknown problem '{problem_name}'; available: {}",
            problem_names().join(", ")
        )
    })?;
    let config = RunConfig {
        problem,
        degree,
        theta,
        strategy,
        stop,
        newton: NewtonConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> i32 {
    let strategy: Strategy = match args.strategy.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let stop = match (args.max_dofs, args.max_levels, args.product_tol) {
        (Some(n), None, None) => StopRule::MaxDofs(n),
        (None, Some(n), None) => StopRule::MaxLevels(n),
        (None, None, Some(t)) => StopRule::ProductTol(t),
        (None, None, None) => StopRule::MaxDofs(100_000),
        _ => unreachable!("clap rejects multiple stop flags"),
    };
    let config = match build_run_config(&args.problem, args.degree, args.theta, strategy, stop) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };

    if args.vtk_every.is_some() {
        if let Err(e) = fs::create_dir_all(&args.vtk_dir) {
            eprintln!("cannot create {}: {e}", args.vtk_dir.display());
            return EXIT_CONFIG;
        }
    }
    let vtk_errors = Mutex::new(Vec::<String>::new());
    let observer = |view: &LevelView| {
        let Some(k) = args.vtk_every else { return };
        if k == 0 || !view.record.level.is_multiple_of(k) {
            return;
        }
        let path = args
            .vtk_dir
            .join(format!("{}_{:04}.vtk", config.problem.name, view.record.level));
        if let Err(e) = fs::File::create(&path).and_then(|mut f| {
            write_vtk(
                &view.space.mesh,
                &[("eta_sq", &view.eta.values), ("zeta_sq", &view.zeta.values)],
                &mut f,
            )
        }) {
            vtk_errors.lock().unwrap().push(format!("{}: {e}", path.display()));
        }
    };

    let (history, code) = match adaptive_solve_with(&config, observer) {
        Ok(h) => (h, EXIT_OK),
        Err(e) => {
            eprintln!("{e}");
            (e.partial, EXIT_SOLVER)
        }
    };
    let csv = history_csv_string(&history);
    let written = match &args.out {
        Some(path) => fs::write(path, &csv).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("cannot write history CSV: {e}");
        return EXIT_SOLVER;
    }
    let vtk_errors = vtk_errors.into_inner().unwrap();
    if !vtk_errors.is_empty() {
        for e in &vtk_errors {
            eprintln!("vtk export failed: {e}");
        }
        return EXIT_SOLVER;
    }
    code
}

/// One named run inside a study.
struct StudyRun {
    name: String,
    config: RunConfig,
}

/// A parsed study config: global keys plus the run list.
struct StudyConfig {
    output_dir: PathBuf,
    jobs: Option<usize>,
    emit_vtk: bool,
    emit_summary: bool,
    runs: Vec<StudyRun>,
}

#[derive(Default)]
struct RunBuilder {
    start_line: usize,
    name: Option<String>,
    problem: Option<String>,
    degree: Option<usize>,
    theta: Option<f64>,
    strategy: Option<Strategy>,
    stop: Option<StopRule>,
}

impl RunBuilder {
    fn finish(self, index: usize) -> Result<StudyRun, String> {
        let problem = self.problem.ok_or_else(|| {
            format!("run section at line {}: missing 'problem'", self.start_line)
        })?;
        let name = self.name.unwrap_or_else(|| format!("run{:02}", index + 1));
        let config = build_run_config(
            &problem,
            self.degree.unwrap_or(1),
            self.theta.unwrap_or(0.5),
            self.strategy.unwrap_or(Strategy::Goafem),
            self.stop.unwrap_or(StopRule::MaxDofs(100_000)),
        )
        .map_err(|e| format!("run section at line {} ('{name}'): {e}", self.start_line))?;
        Ok(StudyRun { name, config })
    }
}

fn parse_study_config(text: &str) -> Result<StudyConfig, String> {
    let mut study = StudyConfig {
        output_dir: PathBuf::from("study_out"),
        jobs: None,
        emit_vtk: false,
        emit_summary: true,
        runs: Vec::new(),
    };
    let mut current: Option<RunBuilder> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            if line != "[run]" {
                return Err(format!("line {lineno}: unknown section '{line}'"));
            }
            if let Some(builder) = current.take() {
                let run = builder.finish(study.runs.len())?;
                study.runs.push(run);
            }
            current = Some(RunBuilder {
                start_line: lineno,
                ..RunBuilder::default()
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {lineno}: expected 'key = value', got '{line}'"))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| format!("line {lineno}: invalid integer for '{key}': '{v}'"))
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| format!("line {lineno}: invalid number for '{key}': '{v}'"))
        };
        let parse_bool = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("line {lineno}: invalid bool for '{key}': '{v}'")),
        };
        match &mut current {
            None => match key {
                "output_dir" => study.output_dir = PathBuf::from(value),
                "jobs" => study.jobs = Some(parse_usize(value)?),
                "emit_vtk" => study.emit_vtk = parse_bool(value)?,
                "emit_summary" => study.emit_summary = parse_bool(value)?,
                _ => return Err(format!("line {lineno}: unknown global key '{key}'")),
            },
            Some(builder) => match key {
                "name" => builder.name = Some(value.to_string()),
                "problem" => builder.problem = Some(value.to_string()),
                "degree" => builder.degree = Some(parse_usize(value)?),
                "theta" => builder.theta = Some(parse_f64(value)?),
                "strategy" => {
                    builder.strategy =
                        Some(value.parse().map_err(|e| format!("line {lineno}: {e}"))?)
                }
                "max_dofs" => builder.stop = Some(StopRule::MaxDofs(parse_usize(value)?)),
                "max_levels" => builder.stop = Some(StopRule::MaxLevels(parse_usize(value)?)),
                "product_tol" => builder.stop = Some(StopRule::ProductTol(parse_f64(value)?)),
                _ => return Err(format!("line {lineno}: unknown run key '{key}'")),
            },
        }
    }
    if let Some(builder) = current.take() {
        let run = builder.finish(study.runs.len())?;
        study.runs.push(run);
    }
    if study.runs.is_empty() {
        return Err("config defines no [run] sections".into());
    }
    let mut names: Vec<&str> = study.runs.iter().map(|r| r.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(format!("duplicate run name '{}'", w[0]));
    }
    Ok(StudyConfig {
        runs: study.runs,
        ..study
    })
}

/// Mean of the last (up to) five available rates; `None` when no pair of
/// levels yields a rate.
fn fitted_rate(history: &AdaptiveHistory, column: &str) -> Option<f64> {
    let rates: Vec<f64> = eoc(history, column).into_iter().flatten().collect();
    if rates.is_empty() {
        return None;
    }
    let tail = &rates[rates.len().saturating_sub(5)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn summary_csv(runs: &[StudyRun], results: &[Option<AdaptiveHistory>]) -> String {
    let mut out = String::from(
        "name,problem,degree,theta,strategy,levels,final_n_elements,final_n_dofs,\
         final_eta,final_zeta,final_product,final_goal_value,final_goal_error,\
         product_rate,goal_error_rate\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for (run, result) in runs.iter().zip(results) {
        let Some(history) = result else { continue };
        let last = history
            .records
            .last()
            .expect("a successful run records at least one level");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            run.name,
            history.problem_name,
            history.degree,
            history.theta,
            history.strategy,
            history.records.len(),
            last.n_elements,
            last.n_dofs,
            last.eta,
            last.zeta,
            last.product,
            last.goal_value,
            opt(last.goal_error),
            opt(fitted_rate(history, "product")),
            opt(fitted_rate(history, "goal_error")),
        )
        .expect("writing to String cannot fail");
    }
    out
}

fn cmd_study(args: &StudyArgs) -> i32 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let study = match parse_study_config(&text) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("{}: {msg}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = fs::create_dir_all(&study.output_dir) {
        eprintln!("cannot create {}: {e}", study.output_dir.display());
        return EXIT_CONFIG;
    }

    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    let jobs = args
        .jobs
        .or(study.jobs)
        .unwrap_or(cores)
        .clamp(1, study.runs.len().max(1));

    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<AdaptiveHistory>>> =
        study.runs.iter().map(|_| Mutex::new(None)).collect();
    let failures = Mutex::new(Vec::<String>::new());

    thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(run) = study.runs.get(i) else { break };
                let outcome = execute_study_run(run, &study);
                match outcome {
                    Ok(history) => *results[i].lock().unwrap() = Some(history),
                    Err(msg) => failures.lock().unwrap().push(msg),
                }
            });
        }
    });

    let results: Vec<Option<AdaptiveHistory>> =
        results.into_iter().map(|m| m.into_inner().unwrap()).collect();
    if study.emit_summary {
        let path = study.output_dir.join("summary.csv");
        if let Err(e) = fs::write(&path, summary_csv(&study.runs, &results)) {
            eprintln!("cannot write {}: {e}", path.display());
            return EXIT_SOLVER;
        }
    }
    let failures = failures.into_inner().unwrap();
    if failures.is_empty() {
        EXIT_OK
    } else {
        let mut failures = failures;
        failures.sort_unstable();
        for f in &failures {
            eprintln!("{f}");
        }
        EXIT_SOLVER
    }
}

/// Execute one study run: per-run CSV always written (partial on solver
/// failure), plus an optional final-level VTK snapshot.
fn execute_study_run(run: &StudyRun, study: &StudyConfig) -> Result<AdaptiveHistory, String> {
    let csv_path = study.output_dir.join(format!("{}.csv", run.name));
    let vtk_path = study.output_dir.join(format!("{}.vtk", run.name));
    // Keep a copy of the latest level so the final mesh can be exported
    // after the loop ends.
    let last_level = Mutex::new(None);
    let result = adaptive_solve_with(&run.config, |view| {
        if study.emit_vtk {
            *last_level.lock().unwrap() = Some((
                view.space.mesh.clone(),
                view.eta.values.clone(),
                view.zeta.values.clone(),
            ));
        }
    });
    let (history, run_error) = match result {
        Ok(h) => (h, None),
        Err(e) => {
            let msg = format!("{}: {e}", run.name);
            (e.partial.clone(), Some(msg))
        }
    };
    write_file(&csv_path, history_csv_string(&history).as_bytes())?;
    if let Some((mesh, eta, zeta)) = last_level.into_inner().unwrap() {
        let mut buf = Vec::new();
        write_vtk(&mesh, &[("eta_sq", &eta), ("zeta_sq", &zeta)], &mut buf)
            .map_err(|e| format!("{}: {e}", run.name))?;
        write_file(&vtk_path, &buf)?;
    }
    match run_error {
        None => Ok(history),
        Some(msg) => Err(msg),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}
