//! End-to-end acceptance checks for the goal-oriented adaptive solver.
//!
//! Each test verifies one release criterion on the built-in examples and
//! prints a single summary line when it passes (visible with
//! `cargo test -- --nocapture`). Expensive adaptive runs are shared
//! between the tests through `OnceLock`.

use std::sync::{Arc, OnceLock};

use goafem::assembly::{assemble_reaction_jacobian, assemble_stiffness, nonlinear_residual};
use goafem::driver::{
    adaptive_solve, adaptive_solve_with, windowed_eoc, AdaptiveHistory, RunConfig, StopRule,
};
use goafem::estimator::{eta_local, zeta_local};
use goafem::marking::{doerfler_min, Strategy};
use goafem::mesh::Mesh;
use goafem::problem::{example_1d_arctan, example_2d_cubic, ProblemSpec};
use goafem::quadrature::gauss_jacobi_rule;
use goafem::solvers::NewtonConfig;
use goafem::space::{build_space, prolongate, FeSpace};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Reference goal value of the 1D example (exact solution known).
const GOAL_1D: f64 = 0.959_253_039_327_788_4;
/// Reference goal value of the 2D example (high-accuracy extrapolation).
const GOAL_2D: f64 = -0.001_584_951_808_832;

fn config(problem: ProblemSpec, degree: usize, strategy: Strategy, stop: StopRule) -> RunConfig {
    RunConfig {
        problem,
        degree,
        theta: 0.5,
        strategy,
        stop,
        newton: NewtonConfig::default(),
    }
}

/// 1D runs, one per degree m = 1..4, each to at least 10^4 dofs.
fn arctan_history(m: usize) -> &'static AdaptiveHistory {
    static RUNS: [OnceLock<AdaptiveHistory>; 4] = [const { OnceLock::new() }; 4];
    RUNS[m - 1].get_or_init(|| {
        let cfg = config(
            example_1d_arctan(),
            m,
            Strategy::Goafem,
            StopRule::MaxDofs(10_000),
        );
        adaptive_solve(&cfg).expect("1d adaptive run")
    })
}

/// 2D run to >= 3*10^4 elements. For a triangulated polygon
/// #T = 2*#interior_vertices + #boundary_vertices - 2, so 15000 interior
/// dofs guarantee the element count.
fn cubic_history(strategy: Strategy) -> &'static AdaptiveHistory {
    static GOAFEM: OnceLock<AdaptiveHistory> = OnceLock::new();
    static AFEM: OnceLock<AdaptiveHistory> = OnceLock::new();
    let cell = match strategy {
        Strategy::Goafem => &GOAFEM,
        Strategy::Afem => &AFEM,
        Strategy::AfemPlus => unreachable!("not used by the acceptance suite"),
    };
    cell.get_or_init(|| {
        let cfg = config(example_2d_cubic(), 1, strategy, StopRule::MaxDofs(15_000));
        adaptive_solve(&cfg).expect("2d adaptive run")
    })
}

/// Mesh, solution pair and degree captured at one level of a run.
struct LevelState {
    problem: ProblemSpec,
    degree: usize,
    mesh: Mesh,
    u: Vec<f64>,
    z: Vec<f64>,
}

impl LevelState {
    fn space(&self) -> FeSpace {
        build_space(self.mesh.clone(), self.degree).expect("degree is valid")
    }
}

fn capture_level(problem: ProblemSpec, degree: usize, level: usize) -> LevelState {
    let cfg = config(
        problem.clone(),
        degree,
        Strategy::Goafem,
        StopRule::MaxLevels(level + 1),
    );
    let mut captured = None;
    adaptive_solve_with(&cfg, |view| {
        captured = Some((
            view.space.mesh.clone(),
            view.solution.u_coeffs.clone(),
            view.solution.z_coeffs.clone(),
        ));
    })
    .expect("capture run");
    let (mesh, u, z) = captured.expect("at least one level runs");
    LevelState {
        problem,
        degree,
        mesh,
        u,
        z,
    }
}

/// Level-3 state of the 1D example (quadratic elements).
fn state_1d() -> &'static LevelState {
    static STATE: OnceLock<LevelState> = OnceLock::new();
    STATE.get_or_init(|| capture_level(example_1d_arctan(), 2, 3))
}

/// Level-3 state of the 2D example (linear elements).
fn state_2d() -> &'static LevelState {
    static STATE: OnceLock<LevelState> = OnceLock::new();
    STATE.get_or_init(|| capture_level(example_2d_cubic(), 1, 3))
}

/// A random nonempty ascending subset of `0..n`.
fn random_marked(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = rng.random_range(1..=n.div_ceil(3));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

// --- criterion 1 -----------------------------------------------------------

#[test]
fn acceptance_01_rates_1d() {
    let mut report = Vec::new();
    let mut violations = Vec::new();
    for m in 1..=4 {
        let h = arctan_history(m);
        let last = h.records.last().unwrap();
        assert!(last.n_dofs >= 10_000, "m={m}: run too short");
        let expected = 2.0 * m as f64;
        let (lo, hi) = (0.9 * expected, 1.1 * expected);
        for column in ["product", "goal_error"] {
            match windowed_eoc(h, column, 5) {
                Some(rate) if (lo..=hi).contains(&rate) => {
                    report.push(format!("m={m} {column} {rate:.2}"));
                }
                Some(rate) => violations.push(format!(
                    "m={m}: {column} EOC {rate:.3} outside [{lo:.1}, {hi:.1}]"
                )),
                None => violations.push(format!("m={m}: {column} rate unavailable")),
            }
        }
    }
    if !violations.is_empty() {
        println!(
            "acceptance 01 1d-rates: FAIL ({}; passing: {})",
            violations.join("; "),
            report.join("; ")
        );
        panic!("\n{}", violations.join("\n"));
    }
    println!("acceptance 01 1d-rates: PASS ({})", report.join("; "));
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn acceptance_02_exact_goal_1d() {
    let h = arctan_history(4);
    let goal = h.records.last().unwrap().goal_value;
    let err = (goal - GOAL_1D).abs();
    assert!(err <= 1e-9, "final m=4 goal {goal:.17e} misses reference by {err:.3e}");
    println!("acceptance 02 1d-goal: PASS (|G - G_ref| = {err:.3e} <= 1e-9)");
}

// --- criterion 3 -----------------------------------------------------------

#[test]
fn acceptance_03_goal_convergence_2d() {
    let go = cubic_history(Strategy::Goafem);
    let af = cubic_history(Strategy::Afem);
    let last = go.records.last().unwrap();
    assert!(last.n_elements >= 30_000, "2d run too short: {}", last.n_elements);
    let err = (last.goal_value - GOAL_2D).abs();
    assert!(err <= 1e-5, "2d goal {:.17e} misses reference by {err:.3e}", last.goal_value);

    // Goal error ordering against the element-count-matched afem level.
    let n = go.records.len();
    let mut pairs = Vec::new();
    for rec in &go.records[n - 3..] {
        let closest = af
            .records
            .iter()
            .min_by(|a, b| {
                let da = (a.n_elements as f64 / rec.n_elements as f64).ln().abs();
                let db = (b.n_elements as f64 / rec.n_elements as f64).ln().abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let (ge, ae) = (rec.goal_error.unwrap(), closest.goal_error.unwrap());
        assert!(
            ge <= ae,
            "goal error {ge:.3e} at #T={} exceeds afem {ae:.3e} at #T={}",
            rec.n_elements,
            closest.n_elements
        );
        pairs.push(format!("{:.1e}<={:.1e}", ge, ae));
    }
    println!(
        "acceptance 03 2d-goal: PASS (|G - G_ref| = {err:.3e} <= 1e-5; last 3 vs afem: {})",
        pairs.join(", ")
    );
}

// --- criterion 4 -----------------------------------------------------------

#[test]
fn acceptance_04_goal_error_bounded_by_product() {
    let h = arctan_history(1);
    let ratio = |level: usize| -> f64 {
        let r = &h.records[level];
        r.goal_error.unwrap() / r.product
    };
    // Fit on early levels, with headroom for pre-asymptotic fluctuation of
    // the effectivity ratio; what matters is that one frozen constant holds
    // for every later level.
    let c_fit = 1.5 * (2..=5).map(ratio).fold(0.0, f64::max);
    for r in &h.records[2..] {
        let (ge, bound) = (r.goal_error.unwrap(), c_fit * r.product);
        assert!(
            ge <= bound,
            "level {}: goal error {ge:.3e} exceeds {c_fit:.3} * product = {bound:.3e}",
            r.level
        );
    }
    println!(
        "acceptance 04 goal-bound: PASS (C' = {c_fit:.3} from levels 2-5 holds for {} levels)",
        h.records.len() - 2
    );
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn acceptance_05_estimator_reduction() {
    let mut worst: f64 = f64::NEG_INFINITY;
    for state in [state_1d(), state_2d()] {
        let dim = state.mesh.dim();
        let q_red = 2f64.powf(-1.0 / (2.0 * dim as f64));
        let space = state.space();
        let eta_coarse = eta_local(&space, &state.problem, &state.u);
        let zeta_coarse = zeta_local(&space, &state.problem, &state.u, &state.z);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + dim as u64);
        for _ in 0..10 {
            let marked = random_marked(state.mesh.n_elements(), &mut rng);
            let (fine_mesh, relation) = state.mesh.refine(&marked).unwrap();
            let fine_space = build_space(fine_mesh, state.degree).unwrap();
            let u_f = prolongate(&space, &fine_space, &relation, &state.u);
            let z_f = prolongate(&space, &fine_space, &relation, &state.z);
            let mut refined = vec![false; state.mesh.n_elements()];
            for &t in &relation.refined {
                refined[t] = true;
            }
            for (coarse, fine) in [
                (&eta_coarse, eta_local(&fine_space, &state.problem, &u_f)),
                (
                    &zeta_coarse,
                    zeta_local(&fine_space, &state.problem, &u_f, &z_f),
                ),
            ] {
                let old: f64 = relation
                    .refined
                    .iter()
                    .map(|&t| coarse.values[t])
                    .sum::<f64>()
                    .sqrt();
                let new: f64 = fine
                    .values
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| refined[relation.parent_of[t]])
                    .map(|(_, v)| v)
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    new <= q_red * old + 1e-10,
                    "dim {dim}: refined-set estimator {new:.6e} exceeds {q_red:.4} * {old:.6e}",
                );
                worst = worst.max(new - q_red * old);
            }
        }
    }
    println!("acceptance 05 reduction: PASS (max excess over q_red bound = {worst:.2e} <= 1e-10)");
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn acceptance_06_unrefined_identity() {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for state in [state_1d(), state_2d()] {
        let space = state.space();
        let eta_coarse = eta_local(&space, &state.problem, &state.u);
        let zeta_coarse = zeta_local(&space, &state.problem, &state.u, &state.z);
        let mut rng = ChaCha8Rng::seed_from_u64(600 + state.mesh.dim() as u64);
        let marked = random_marked(state.mesh.n_elements(), &mut rng);
        let (fine_mesh, relation) = state.mesh.refine(&marked).unwrap();
        let fine_space = build_space(fine_mesh, state.degree).unwrap();
        let u_f = prolongate(&space, &fine_space, &relation, &state.u);
        let z_f = prolongate(&space, &fine_space, &relation, &state.z);
        let mut refined = vec![false; state.mesh.n_elements()];
        for &t in &relation.refined {
            refined[t] = true;
        }
        for (coarse, fine) in [
            (&eta_coarse, eta_local(&fine_space, &state.problem, &u_f)),
            (
                &zeta_coarse,
                zeta_local(&fine_space, &state.problem, &u_f, &z_f),
            ),
        ] {
            for (t, &v) in fine.values.iter().enumerate() {
                let parent = relation.parent_of[t];
                if refined[parent] {
                    continue;
                }
                let diff = (v.sqrt() - coarse.values[parent].sqrt()).abs();
                assert!(
                    diff <= 1e-12,
                    "unrefined element {parent}: indicator moved by {diff:.3e}"
                );
                worst = worst.max(diff);
                checked += 1;
            }
        }
    }
    assert!(checked > 0, "refinements left no element untouched");
    println!(
        "acceptance 06 identity: PASS ({checked} unrefined indicators, max drift {worst:.2e} <= 1e-12)"
    );
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn acceptance_07_marking_minimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nontrivial = 0usize;
    for _ in 0..200 {
        let n = rng.random_range(1..=15);
        let v: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_range(0.0..1.0) < 0.15 {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let theta = rng.random_range(0.05..=1.0);
        let marked = doerfler_min(&v, theta);
        let total: f64 = v.iter().sum();
        let target = theta * total;

        // Exhaustive minimum cardinality over all 2^n subsets.
        let mut best = usize::MAX;
        for mask in 0..(1u32 << n) {
            let sum: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
            if sum >= target {
                best = best.min(mask.count_ones() as usize);
            }
        }
        if total == 0.0 {
            assert!(marked.is_empty());
            continue;
        }
        assert_eq!(marked.len(), best, "cardinality not minimal for {v:?}, theta {theta}");

        // Replay the greedy accumulation order to keep float semantics.
        let mut by_value = marked.clone();
        by_value.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
        let sum: f64 = by_value.iter().map(|&i| v[i]).sum();
        assert!(sum >= target, "marked sum {sum} misses target {target}");
        if let Some(&smallest) = by_value.last() {
            if marked.len() > 1 {
                assert!(
                    sum - v[smallest] < target,
                    "dropping element {smallest} keeps the criterion: not minimal"
                );
                nontrivial += 1;
            }
        }
    }
    println!(
        "acceptance 07 minimality: PASS (200 random vectors, {nontrivial} strict-minimality witnesses)"
    );
}

// --- criterion 8 -----------------------------------------------------------

#[test]
fn acceptance_08_selection_cardinality() {
    let mut levels = 0usize;
    for h in [arctan_history(1), cubic_history(Strategy::Goafem)] {
        for r in &h.records {
            let k = r.set_u_size.min(r.set_uz_size);
            assert_eq!(
                (r.selected_u_size, r.selected_uz_size),
                (k, k),
                "level {}: selections {}/{} do not match min(|set_u|, |set_uz|) = {k}",
                r.level,
                r.selected_u_size,
                r.selected_uz_size
            );
            levels += 1;
        }
    }
    println!("acceptance 08 selection: PASS (min-cardinality rule on {levels} levels)");
}

// --- criterion 9 -----------------------------------------------------------

#[test]
fn acceptance_09_mesh_invariants() {
    struct Facts {
        valid: bool,
        min_area: f64,
        min_angle: f64,
    }
    let cfg = config(
        example_2d_cubic(),
        1,
        Strategy::Goafem,
        StopRule::MaxLevels(25),
    );
    let mut facts: Vec<Facts> = Vec::new();
    adaptive_solve_with(&cfg, |view| {
        let mesh = &view.space.mesh;
        let min_area = (0..mesh.n_elements())
            .map(|t| mesh.element_measure(t))
            .fold(f64::INFINITY, f64::min);
        facts.push(Facts {
            valid: mesh.validate().is_ok(),
            min_area,
            min_angle: mesh.quality().min_angle.expect("2d mesh has angles"),
        });
    })
    .expect("25-level 2d run");
    assert_eq!(facts.len(), 25);
    for (level, f) in facts.iter().enumerate() {
        assert!(f.valid, "level {level}: mesh invalid");
        assert!(f.min_area > 0.0, "level {level}: nonpositive element area");
    }
    let settled = facts[3].min_angle;
    for (level, f) in facts.iter().enumerate().skip(3) {
        assert!(
            (f.min_angle - settled).abs() <= 1e-12,
            "level {level}: min angle {} drifted from {settled}",
            f.min_angle
        );
    }
    println!(
        "acceptance 09 mesh: PASS (25 levels conforming, min angle {settled:.6} rad from level 3)"
    );
}

// --- criterion 10 ----------------------------------------------------------

#[test]
fn acceptance_10_newton() {
    let mut levels = 0usize;
    let mut max_iters = 0usize;
    for h in [arctan_history(1), cubic_history(Strategy::Goafem)] {
        for r in &h.records {
            assert!(
                r.newton_residual <= 1e-10,
                "level {}: newton residual {:.3e}",
                r.level,
                r.newton_residual
            );
            assert!(r.newton_iters <= 15, "level {}: {} iterations", r.level, r.newton_iters);
            max_iters = max_iters.max(r.newton_iters);
            levels += 1;
        }
    }

    // Linear degeneracy: with b = 0 every level converges in one step.
    let mut linear_iters = 0usize;
    for (problem, degree) in [(example_1d_arctan(), 2), (example_2d_cubic(), 1)] {
        let mut linear = problem;
        linear.name = "linear";
        linear.reaction = Arc::new(|_, _| 0.0);
        linear.reaction_derivative = Arc::new(|_, _| 0.0);
        linear.reference_goal = None;
        let cfg = config(linear, degree, Strategy::Goafem, StopRule::MaxLevels(4));
        let h = adaptive_solve(&cfg).expect("linear run");
        for r in &h.records {
            assert!(
                r.newton_iters <= 1,
                "linear problem took {} iterations at level {}",
                r.newton_iters,
                r.level
            );
            linear_iters = linear_iters.max(r.newton_iters);
        }
    }
    println!(
        "acceptance 10 newton: PASS ({levels} levels, residuals <= 1e-10, max {max_iters} iters; linear max {linear_iters})"
    );
}

// --- criterion 11 ----------------------------------------------------------

#[test]
fn acceptance_11_jacobian_consistency() {
    let mut all = Vec::new();
    for state in [state_1d(), state_2d()] {
        let space = state.space();
        let jacobian = assemble_stiffness(&space, &state.problem).add(
            &assemble_reaction_jacobian(&space, &state.problem, &state.u),
        );
        let r0 = nonlinear_residual(&space, &state.problem, &state.u);
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + state.mesh.dim() as u64);
        for _ in 0..5 {
            let mut delta: Vec<f64> =
                (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for &b in &space.boundary_dofs {
                delta[b] = 0.0;
            }
            let jd = jacobian.matvec(&delta);
            // The residual is load-minus-operator, so its derivative along
            // delta is -(K + M)delta.
            let taylor_error = |t: f64| -> f64 {
                let ut: Vec<f64> =
                    state.u.iter().zip(&delta).map(|(u, d)| u + t * d).collect();
                let rt = nonlinear_residual(&space, &state.problem, &ut);
                space
                    .interior_dofs
                    .iter()
                    .map(|&i| (rt[i] - r0[i] + t * jd[i]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let ratio = taylor_error(1e-3) / taylor_error(5e-4);
            assert!(
                (3.5..=4.5).contains(&ratio),
                "dim {}: Taylor remainder ratio {ratio:.3} outside [3.5, 4.5]",
                state.mesh.dim()
            );
            all.push(ratio);
        }
    }
    let (lo, hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    println!("acceptance 11 jacobian: PASS (10 directions, remainder ratios in [{lo:.2}, {hi:.2}])");
}

// --- criterion 12 ----------------------------------------------------------

#[test]
fn acceptance_12_linear_convergence() {
    // Width 14 absorbs the pre-asymptotic plateau of the 2d run (coarse
    // meshes have not yet resolved the localized data, so the estimator
    // climbs through level ~7 before contracting step by step).
    const WINDOW: usize = 14;
    let mut worst: f64 = 0.0;
    let mut windows = 0usize;
    for h in [arctan_history(1), cubic_history(Strategy::Goafem)] {
        let p: Vec<f64> = h.records.iter().map(|r| r.product).collect();
        for start in 3..p.len().saturating_sub(WINDOW) {
            let ratio = (p[start + WINDOW] / p[start]).powf(1.0 / WINDOW as f64);
            assert!(
                ratio <= 0.95,
                "{}: windowed ratio {ratio:.4} at level {start} exceeds 0.95",
                h.problem_name
            );
            worst = worst.max(ratio);
            windows += 1;
        }
    }
    assert!(windows > 0, "runs too short for a length-{WINDOW} window");
    println!(
        "acceptance 12 contraction: PASS ({windows} windows of width {WINDOW}, worst ratio {worst:.4} <= 0.95)"
    );
}

// --- criterion 13 ----------------------------------------------------------

#[test]
fn acceptance_13_singular_quadrature() {
    let alpha = -9.0 / 20.0;
    let rule = gauss_jacobi_rule(alpha, 8);
    let mass: f64 = rule.weights.iter().sum();
    let mass_err = (mass - 20.0 / 11.0).abs();
    assert!(mass_err <= 1e-13, "weight sum misses 20/11 by {mass_err:.3e}");

    let sin_integral: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| w * (std::f64::consts::PI * x[0]).sin())
        .sum();
    let sin_err = (sin_integral - GOAL_1D).abs();
    assert!(sin_err <= 1e-12, "sine integral misses reference by {sin_err:.3e}");
    println!(
        "acceptance 13 quadrature: PASS (moment error {mass_err:.2e} <= 1e-13, sine error {sin_err:.2e} <= 1e-12)"
    );
}
