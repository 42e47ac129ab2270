//! The adaptive loop — solve, estimate, mark, refine — with per-level
//! history recording, goal evaluation, empirical convergence orders, and
//! CSV export.
//!
//! Each level runs the damped Newton primal solve (warm-started by
//! prolongating the previous solution), the linear dual solve, both
//! indicator fields, the marking step, and finally the mesh refinement.
//! If marking selects nothing while the stop rule is not yet satisfied
//! (possible when a coarse mesh cannot see the data at all and every
//! indicator is zero), the driver refines uniformly so the loop cannot
//! stall.

use std::io::{self, Write};
use std::time::Instant;

use thiserror::Error;

use crate::assembly::assemble_goal_load;
use crate::estimator::{eta_local, zeta_local, IndicatorField};
use crate::marking::{mark, MarkConfig, Strategy};
use crate::problem::ProblemSpec;
use crate::solvers::{newton_primal, solve_dual, NewtonConfig, SolutionPair, SolveError};
use crate::space::{build_space, prolongate, FeSpace};

/// Hard safety cap on the number of levels, so an unreachable stop rule
/// terminates instead of looping forever.
const MAX_LEVELS_GUARD: usize = 10_000;

/// When to end the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once a level reaches at least this many degrees of freedom.
    MaxDofs(usize),
    /// Stop after exactly this many recorded levels.
    MaxLevels(usize),
    /// Stop once the estimator product drops to this value or below.
    ProductTol(f64),
}

impl StopRule {
    fn validate(&self) -> Result<(), String> {
        match *self {
            StopRule::MaxDofs(0) => Err("max dofs must be positive".into()),
            StopRule::MaxLevels(0) => Err("max levels must be positive".into()),
            StopRule::ProductTol(t) if t <= 0.0 || t.is_nan() => {
                Err("product tolerance must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// Full configuration of one adaptive run.
#[derive(Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub degree: usize,
    pub theta: f64,
    pub strategy: Strategy,
    pub stop: StopRule,
    pub newton: NewtonConfig,
}

impl RunConfig {
    /// Validate parameter ranges, including that the polynomial degree is
    /// supported for the problem's dimension.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        self.stop.validate()?;
        build_space(self.problem.initial_mesh(), self.degree)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

/// One row of the adaptive history.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub n_elements: usize,
    pub n_dofs: usize,
    /// Total primal estimator `η_ℓ`.
    pub eta: f64,
    /// Total dual estimator `ζ_ℓ`.
    pub zeta: f64,
    /// The driving quantity `η_ℓ·√(η_ℓ² + ζ_ℓ²)`.
    pub product: f64,
    pub goal_value: f64,
    /// `|G(u) − G(u_ℓ)|` when a reference value is known.
    pub goal_error: Option<f64>,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub n_marked: usize,
    /// Wall-clock milliseconds for this level (solve through marking);
    /// informational only, never asserted on.
    pub wall_ms: f64,
    pub set_u_size: usize,
    pub set_uz_size: usize,
    pub selected_u_size: usize,
    pub selected_uz_size: usize,
}

/// The per-level records of one adaptive run plus its identifying
/// parameters.
#[derive(Debug, Clone)]
pub struct AdaptiveHistory {
    pub problem_name: String,
    pub degree: usize,
    pub theta: f64,
    pub strategy: Strategy,
    pub records: Vec<LevelRecord>,
}

/// A failed run carrying the history recorded before the failure.
#[derive(Debug, Error)]
#[error("adaptive run failed at level {level}: {source}")]
pub struct DriverError {
    pub level: usize,
    #[source]
    pub source: SolveError,
    pub partial: AdaptiveHistory,
}

/// Everything an observer may inspect about a finished level.
pub struct LevelView<'a> {
    pub space: &'a FeSpace,
    pub record: &'a LevelRecord,
    pub eta: &'a IndicatorField,
    pub zeta: &'a IndicatorField,
    pub solution: &'a SolutionPair,
    pub marked: &'a [usize],
}

/// `G(u_H)` evaluated exactly on the discrete space as the dot product of
/// the goal load with the coefficients (compensated summation).
pub fn goal_value(space: &FeSpace, problem: &ProblemSpec, u_coeffs: &[f64]) -> f64 {
    let load = assemble_goal_load(space, problem);
    kahan_dot(&load, u_coeffs)
}

fn kahan_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for (x, y) in a.iter().zip(b) {
        let term = x * y - carry;
        let next = sum + term;
        carry = (next - sum) - term;
        sum = next;
    }
    sum
}

/// Run the adaptive loop to completion.
pub fn adaptive_solve(config: &RunConfig) -> Result<AdaptiveHistory, Box<DriverError>> {
    adaptive_solve_with(config, |_| {})
}

/// As [`adaptive_solve`], invoking `observer` after every completed level
/// (used for VTK export and by tests that inspect meshes mid-run).
pub fn adaptive_solve_with(
    config: &RunConfig,
    mut observer: impl FnMut(&LevelView),
) -> Result<AdaptiveHistory, Box<DriverError>> {
    let problem = &config.problem;
    let mut history = AdaptiveHistory {
        problem_name: problem.name.to_string(),
        degree: config.degree,
        theta: config.theta,
        strategy: config.strategy,
        records: Vec::new(),
    };
    let fail = |level: usize, source: SolveError, partial: &AdaptiveHistory| {
        Box::new(DriverError {
            level,
            source,
            partial: partial.clone(),
        })
    };

    // Invalid degrees and parameter ranges are programming/configuration
    // errors, caught by `RunConfig::validate`; panicking here keeps solver
    // failures as the only runtime error channel.
    let mesh = problem.initial_mesh();
    let mut space = build_space(mesh, config.degree)
        .unwrap_or_else(|e| panic!("invalid run configuration: {e}"));
    let mut guess = vec![0.0; space.n_dofs()];

    for level in 0..MAX_LEVELS_GUARD {
        let clock = Instant::now();
        let newton = match newton_primal(&space, problem, &guess, &config.newton) {
            Ok(n) => n,
            Err(e) => return Err(fail(level, e, &history)),
        };
        let goal_load = assemble_goal_load(&space, problem);
        let z = match solve_dual(&space, problem, &newton.u_coeffs, &goal_load) {
            Ok(z) => z,
            Err(e) => return Err(fail(level, e, &history)),
        };
        let solution = SolutionPair {
            u_coeffs: newton.u_coeffs,
            z_coeffs: z,
            newton_iters: newton.newton_iters,
            residual_norm: newton.residual_norm,
        };
        let eta = eta_local(&space, problem, &solution.u_coeffs);
        let zeta = zeta_local(&space, problem, &solution.u_coeffs, &solution.z_coeffs);
        let eta_total = eta.total();
        let zeta_total = zeta.total();
        let product = eta_total * (eta_total * eta_total + zeta_total * zeta_total).sqrt();
        let goal = kahan_dot(&goal_load, &solution.u_coeffs);

        let mark_result = mark(
            &eta,
            &zeta,
            &MarkConfig {
                theta: config.theta,
                strategy: config.strategy,
            },
        )
        .expect("estimator fields come from one mesh");

        let record = LevelRecord {
            level,
            n_elements: space.mesh.n_elements(),
            n_dofs: space.n_dofs(),
            eta: eta_total,
            zeta: zeta_total,
            product,
            goal_value: goal,
            goal_error: problem.reference_goal.map(|r| (r - goal).abs()),
            newton_iters: solution.newton_iters,
            newton_residual: solution.residual_norm,
            n_marked: mark_result.marked.len(),
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            set_u_size: mark_result.set_u.len(),
            set_uz_size: mark_result.set_uz.len(),
            selected_u_size: mark_result.selected_u.len(),
            selected_uz_size: mark_result.selected_uz.len(),
        };
        observer(&LevelView {
            space: &space,
            record: &record,
            eta: &eta,
            zeta: &zeta,
            solution: &solution,
            marked: &mark_result.marked,
        });
        history.records.push(record);

        let stop = match config.stop {
            StopRule::MaxDofs(n) => space.n_dofs() >= n,
            StopRule::MaxLevels(n) => history.records.len() >= n,
            StopRule::ProductTol(tol) => product <= tol,
        };
        if stop {
            break;
        }

        // Refine; fall back to uniform refinement when nothing was marked
        // but the loop must continue.
        let (fine_mesh, relation) = if mark_result.marked.is_empty() {
            space.mesh.uniform_refine()
        } else {
            space
                .mesh
                .refine(&mark_result.marked)
                .expect("marked indices come from this mesh")
        };
        let fine_space = build_space(fine_mesh, config.degree)
            .expect("degree already validated on the initial mesh");
        guess = prolongate(&space, &fine_space, &relation, &solution.u_coeffs);
        space = fine_space;
    }
    Ok(history)
}

fn column_value(record: &LevelRecord, column: &str) -> Option<f64> {
    match column {
        "eta" => Some(record.eta),
        "zeta" => Some(record.zeta),
        "product" => Some(record.product),
        "goal_value" => Some(record.goal_value),
        "goal_error" => record.goal_error,
        other => panic!("unknown history column '{other}'"),
    }
}

/// Empirical orders of convergence of a history column against
/// `n_elements`: `rate_k = log(v_k / v_{k+1}) / log(N_{k+1} / N_k)`.
/// Pairs with nonpositive values yield `None`. Valid columns: `eta`,
/// `zeta`, `product`, `goal_value`, `goal_error`.
pub fn eoc(history: &AdaptiveHistory, column: &str) -> Vec<Option<f64>> {
    let rec = &history.records;
    let mut rates = Vec::new();
    for k in 0..rec.len().saturating_sub(1) {
        let (n0, n1) = (rec[k].n_elements as f64, rec[k + 1].n_elements as f64);
        let rate = match (column_value(&rec[k], column), column_value(&rec[k + 1], column)) {
            (Some(v0), Some(v1)) if v0 > 0.0 && v1 > 0.0 && n1 > n0 => {
                Some((v0 / v1).ln() / (n1 / n0).ln())
            }
            _ => None,
        };
        rates.push(rate);
    }
    rates
}

/// Mean of the last `k` rates; `None` unless all of them exist.
pub fn mean_last_rates(rates: &[Option<f64>], k: usize) -> Option<f64> {
    if rates.len() < k || k == 0 {
        return None;
    }
    let tail = &rates[rates.len() - k..];
    let mut sum = 0.0;
    for r in tail {
        sum += (*r)?;
    }
    Some(sum / k as f64)
}

/// Order of convergence across the last `window` refinement steps: the
/// rate between the record `window` steps before the end and the final
/// record. This equals the element-count-weighted mean of the stepwise
/// rates over that window, so a single short refinement step cannot
/// dominate the estimate. `None` when fewer than `window + 1` records
/// exist or an endpoint value is nonpositive or unknown.
pub fn windowed_eoc(history: &AdaptiveHistory, column: &str, window: usize) -> Option<f64> {
    let rec = &history.records;
    if window == 0 || rec.len() <= window {
        return None;
    }
    let (first, last) = (&rec[rec.len() - 1 - window], &rec[rec.len() - 1]);
    let (n0, n1) = (first.n_elements as f64, last.n_elements as f64);
    match (column_value(first, column), column_value(last, column)) {
        (Some(v0), Some(v1)) if v0 > 0.0 && v1 > 0.0 && n1 > n0 => {
            Some((v0 / v1).ln() / (n1 / n0).ln())
        }
        _ => None,
    }
}

/// CSV header written by [`write_history_csv`].
pub const CSV_HEADER: &str =
    "level,n_elements,n_dofs,eta,zeta,product,goal_value,goal_error,newton_iters,n_marked,wall_ms";

/// Write the history as CSV: one row per level, 17-significant-digit
/// scientific floats, `\n` line endings, empty `goal_error` when unknown.
pub fn write_history_csv(history: &AdaptiveHistory, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &history.records {
        let goal_error = match r.goal_error {
            Some(e) => format!("{e:.16e}"),
            None => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{:.3}",
            r.level,
            r.n_elements,
            r.n_dofs,
            r.eta,
            r.zeta,
            r.product,
            r.goal_value,
            goal_error,
            r.newton_iters,
            r.n_marked,
            r.wall_ms
        )?;
    }
    Ok(())
}

/// The history CSV as a string.
pub fn history_csv_string(history: &AdaptiveHistory) -> String {
    let mut buf = Vec::new();
    write_history_csv(history, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}
