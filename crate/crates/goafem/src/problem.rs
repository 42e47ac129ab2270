//! Declarative problem data for the semilinear model problem
//! `−div(A∇u) + b(u) = f − div 𝒇` with homogeneous Dirichlet conditions,
//! together with the linear goal functional `G(v) = ∫ g v + ∫ 𝒈·∇v`.
//!
//! Two built-in problems are provided: a one-dimensional problem with an
//! arctangent nonlinearity, a manufactured smooth solution and a singular
//! goal weight, and a two-dimensional problem on the unit square with a
//! cubic nonlinearity and characteristic-function flux data.

use std::sync::Arc;

use crate::mesh::{initial_mesh_1d, initial_mesh_unit_square, Mesh};

/// Scalar field on physical coordinates.
pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// Vector field on physical coordinates.
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Reaction-type function of position and state, `(x, ξ) ↦ b(x, ξ)`.
pub type ReactionField = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// The diffusion coefficient `A`, a symmetric positive definite matrix field.
#[derive(Clone)]
pub enum Diffusion {
    /// `A = I`; used by both built-in problems.
    Identity,
    /// A constant coefficient matrix (1D problems use the `[0][0]` entry).
    Constant([[f64; 2]; 2]),
    /// A smoothly varying coefficient, with its row-wise divergence
    /// `(Σ_j ∂_j A_ij)_i` supplied for the strong-form residual.
    Variable {
        value: Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>,
        divergence: VectorField,
    },
}

impl Diffusion {
    /// Evaluate `A(x)`.
    pub fn eval(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            Diffusion::Identity => [[1.0, 0.0], [0.0, 1.0]],
            Diffusion::Constant(a) => *a,
            Diffusion::Variable { value, .. } => value(x),
        }
    }

    /// `A(x) g` for a gradient vector `g`.
    pub fn apply(&self, x: [f64; 2], g: [f64; 2]) -> [f64; 2] {
        match self {
            Diffusion::Identity => g,
            _ => {
                let a = self.eval(x);
                [
                    a[0][0] * g[0] + a[0][1] * g[1],
                    a[1][0] * g[0] + a[1][1] * g[1],
                ]
            }
        }
    }

    /// Row-wise divergence `(Σ_j ∂_j A_ij)_i`; zero for constant coefficients.
    pub fn row_divergence(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Diffusion::Variable { divergence, .. } => divergence(x),
            _ => [0.0, 0.0],
        }
    }
}

/// All data of one problem instance. Function fields must be reentrant;
/// everything is shared by `Arc` so specs clone cheaply.
#[derive(Clone)]
pub struct ProblemSpec {
    /// Short identifier, also used for CLI selection.
    pub name: &'static str,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Diffusion coefficient `A`.
    pub diffusion: Diffusion,
    /// Monotone reaction `b(x, ξ)` with `b(x, 0) = 0`.
    pub reaction: ReactionField,
    /// Derivative `b′(x, ξ) = ∂_ξ b(x, ξ) ≥ 0`.
    pub reaction_derivative: ReactionField,
    /// Volume source `f`.
    pub source: ScalarField,
    /// Flux source `𝒇` (`None` means zero).
    pub source_flux: Option<VectorField>,
    /// Pointwise divergence of `𝒇` where smooth (`None` means zero, the
    /// correct value for piecewise-constant fluxes away from their jump set).
    pub source_flux_div: Option<ScalarField>,
    /// Goal weight `g`.
    pub goal_weight: ScalarField,
    /// Goal flux `𝒈` (`None` means zero).
    pub goal_flux: Option<VectorField>,
    /// Pointwise divergence of `𝒈` where smooth (`None` means zero).
    pub goal_flux_div: Option<ScalarField>,
    /// Exponent `α > −1` such that `g(x) ~ x^α` at the left endpoint of a 1D
    /// domain; enables Gauss–Jacobi quadrature on the first element.
    pub singular_goal_exponent: Option<f64>,
    /// High-accuracy reference value of `G(u)`, when known.
    pub reference_goal: Option<f64>,
    /// Where the reference value comes from.
    pub reference_goal_provenance: Option<&'static str>,
}

impl ProblemSpec {
    /// The coarsest mesh the adaptive loop starts from.
    pub fn initial_mesh(&self) -> Mesh {
        match self.dim {
            1 => initial_mesh_1d(0.0, 1.0, 4).expect("valid built-in interval"),
            _ => initial_mesh_unit_square(),
        }
    }
}

/// 1D problem on `(0, 1)`: `−u'' + arctan(u) = f` with `f` manufactured so
/// that `u(x) = sin(πx)` solves the problem exactly, and the singular goal
/// weight `g(x) = x^{−9/20}`.
pub fn example_1d_arctan() -> ProblemSpec {
    use std::f64::consts::PI;
    ProblemSpec {
        name: "arctan1d",
        dim: 1,
        diffusion: Diffusion::Identity,
        reaction: Arc::new(|_x, xi: f64| xi.atan()),
        reaction_derivative: Arc::new(|_x, xi: f64| 1.0 / (1.0 + xi * xi)),
        source: Arc::new(move |x: [f64; 2]| {
            let s = (PI * x[0]).sin();
            PI * PI * s + s.atan()
        }),
        source_flux: None,
        source_flux_div: None,
        goal_weight: Arc::new(|x: [f64; 2]| x[0].powf(-0.45)),
        goal_flux: None,
        goal_flux_div: None,
        singular_goal_exponent: Some(-0.45),
        reference_goal: Some(0.959_253_039_327_788_4),
        reference_goal_provenance: Some(
            "analytic: G(u) = ∫₀¹ x^{-9/20} sin(πx) dx for the exact solution u = sin(πx)",
        ),
    }
}

/// 2D problem on the unit square: `−Δu + u³ = −div 𝒇` with
/// `𝒇 = χ_{x₁+x₂ ≤ 1/2}·(−1, 0)` and goal flux `𝒈 = χ_{x₁+x₂ ≥ 3/2}·(−1, 0)`,
/// so both the primal and the dual solution have data-induced singularities
/// along diagonal lines.
pub fn example_2d_cubic() -> ProblemSpec {
    ProblemSpec {
        name: "cubic2d",
        dim: 2,
        diffusion: Diffusion::Identity,
        reaction: Arc::new(|_x, xi: f64| xi * xi * xi),
        reaction_derivative: Arc::new(|_x, xi: f64| 3.0 * xi * xi),
        source: Arc::new(|_x| 0.0),
        source_flux: Some(Arc::new(|x: [f64; 2]| {
            if x[0] + x[1] <= 0.5 {
                [-1.0, 0.0]
            } else {
                [0.0, 0.0]
            }
        })),
        source_flux_div: None,
        goal_weight: Arc::new(|_x| 0.0),
        goal_flux: Some(Arc::new(|x: [f64; 2]| {
            if x[0] + x[1] >= 1.5 {
                [-1.0, 0.0]
            } else {
                [0.0, 0.0]
            }
        })),
        goal_flux_div: None,
        singular_goal_exponent: None,
        reference_goal: Some(-0.001_584_951_808_832),
        reference_goal_provenance: Some("extrapolated from high-resolution adaptive runs"),
    }
}

/// Look up a built-in problem by its CLI name.
pub fn by_name(name: &str) -> Option<ProblemSpec> {
    match name {
        "arctan1d" => Some(example_1d_arctan()),
        "cubic2d" => Some(example_2d_cubic()),
        _ => None,
    }
}

/// Names of all built-in problems.
pub fn problem_names() -> &'static [&'static str] {
    &["arctan1d", "cubic2d"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn builtin_reactions_vanish_at_zero_and_are_monotone() {
        for p in [example_1d_arctan(), example_2d_cubic()] {
            let x = [0.3, 0.4];
            assert_eq!((p.reaction)(x, 0.0), 0.0);
            let mut xi = -100.0;
            while xi <= 100.0 {
                assert!(
                    (p.reaction_derivative)(x, xi) >= 0.0,
                    "{}: b' < 0 at {xi}",
                    p.name
                );
                xi += 7.3;
            }
        }
    }

    #[test]
    fn reaction_derivative_matches_finite_differences() {
        let h = 1e-5;
        for p in [example_1d_arctan(), example_2d_cubic()] {
            let x = [0.5, 0.25];
            for xi in [-3.0, -0.7, 0.0, 0.4, 1.9] {
                let fd = ((p.reaction)(x, xi + h) - (p.reaction)(x, xi - h)) / (2.0 * h);
                let d = (p.reaction_derivative)(x, xi);
                assert!((fd - d).abs() < 1e-6, "{}: {fd} vs {d} at {xi}", p.name);
            }
        }
    }

    #[test]
    fn arctan_source_at_midpoint() {
        // Substituting the exact solution sin(πx) at x = 1/2 gives
        // f(1/2) = π² + arctan(1) = π² + π/4.
        let p = example_1d_arctan();
        let expect = PI * PI + PI / 4.0;
        assert!(((p.source)([0.5, 0.0]) - expect).abs() < 1e-14);
        assert!(((p.reaction_derivative)([0.0, 0.0], 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_flux_indicator_regions() {
        let p = example_2d_cubic();
        let f = p.source_flux.as_ref().unwrap();
        let g = p.goal_flux.as_ref().unwrap();
        assert_eq!(f([0.1, 0.1]), [-1.0, 0.0]);
        assert_eq!(f([0.9, 0.9]), [0.0, 0.0]);
        assert_eq!(g([0.9, 0.9]), [-1.0, 0.0]);
        assert_eq!(g([0.1, 0.1]), [0.0, 0.0]);
        // Boundary-inclusive convention on both lines.
        assert_eq!(f([0.25, 0.25]), [-1.0, 0.0]);
        assert_eq!(g([0.75, 0.75]), [-1.0, 0.0]);
        assert_eq!((p.reaction)([0.0, 0.0], 2.0), 8.0);
        assert_eq!((p.reaction_derivative)([0.0, 0.0], 2.0), 12.0);
    }

    #[test]
    fn reference_goal_values_are_pinned() {
        assert_eq!(
            example_1d_arctan().reference_goal,
            Some(0.959_253_039_327_788_4)
        );
        assert_eq!(
            example_2d_cubic().reference_goal,
            Some(-0.001584951808832)
        );
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(by_name("arctan1d").unwrap().dim, 1);
        assert_eq!(by_name("cubic2d").unwrap().dim, 2);
        assert!(by_name("nosuch").is_none());
        assert_eq!(problem_names().len(), 2);
    }

    #[test]
    fn singular_quadrature_reproduces_the_reference_goal_integral() {
        // The goal weight of the 1D problem against the exact solution:
        // ∫₀¹ x^{-9/20} sin(πx) dx, computed with the matching Jacobi rule.
        let p = example_1d_arctan();
        let alpha = p.singular_goal_exponent.unwrap();
        let rule = crate::quadrature::gauss_jacobi_rule(alpha, 8);
        let mut s = 0.0;
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            // The weight x^α is absorbed into the rule; integrate the smooth
            // remainder g(x)·x^{-α}·sin(πx) = sin(πx).
            let x = q[0];
            s += w * (p.goal_weight)([x, 0.0]) * x.powf(-alpha) * (PI * x).sin();
        }
        assert!((s - p.reference_goal.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn initial_meshes_match_dimensions() {
        let m1 = example_1d_arctan().initial_mesh();
        assert_eq!(m1.dim(), 1);
        assert_eq!(m1.n_elements(), 4);
        let m2 = example_2d_cubic().initial_mesh();
        assert_eq!(m2.dim(), 2);
        assert_eq!(m2.n_elements(), 2);
    }
}
