//! Assembly of the discrete operators and load vectors: the stiffness form
//! `∫ A∇φ_j·∇φ_i`, the state-weighted reaction mass `∫ b′(w_H) φ_j φ_i`,
//! the primal load `F(φ_i) = ∫ f φ_i + ∫ 𝒇·∇φ_i`, the goal load
//! `G(φ_i) = ∫ g φ_i + ∫ 𝒈·∇φ_i`, and the nonlinear residual of the primal
//! problem.
//!
//! All volume integrals use a rule of exactness order `2m + 2`; data and the
//! reaction nonlinearity are evaluated pointwise at the quadrature nodes.
//! When the goal weight is singular at the left endpoint of a 1D domain
//! (`g ~ x^α`), the element touching `x = 0` integrates its `g`-term with a
//! Gauss–Jacobi rule whose weight absorbs the singularity.
//!
//! Boundary conditions are *not* applied to matrices here; solvers restrict
//! to interior degrees of freedom. The nonlinear residual zeroes boundary
//! entries, since test functions vanish on the boundary.

use crate::problem::ProblemSpec;
use crate::quadrature::{gauss_jacobi_rule, quad_rule, QuadRule};
use crate::space::{BasisEval, FeSpace};
use crate::sparse::CsrMatrix;

/// Quadrature points per Gauss–Jacobi rule on singular goal elements;
/// exact for smooth parts of degree ≤ 15, far beyond any supported basis.
const JACOBI_POINTS: usize = 8;

/// A volume quadrature rule with the reference basis pretabulated at its
/// points; built once per assembly pass.
pub(crate) struct VolumeTables {
    pub rule: QuadRule,
    pub evals: Vec<BasisEval>,
}

pub(crate) fn volume_tables(space: &FeSpace) -> VolumeTables {
    let rule = quad_rule(space.mesh.dim(), 2 * space.degree + 2);
    let evals = rule.points.iter().map(|&p| space.basis.eval(p)).collect();
    VolumeTables { rule, evals }
}

/// Stiffness matrix `∫ A∇φ_j·∇φ_i` over all dofs; symmetric positive
/// semidefinite (constants lie in the kernel before boundary restriction).
pub fn assemble_stiffness(space: &FeSpace, problem: &ProblemSpec) -> CsrMatrix {
    let tab = volume_tables(space);
    let nl = space.n_local();
    let n = space.n_dofs();
    let mut trip = Vec::with_capacity(space.mesh.n_elements() * nl * nl);
    let mut grads = vec![[0.0f64; 2]; nl];
    let mut local = vec![0.0f64; nl * nl];
    for t in 0..space.mesh.n_elements() {
        let map = space.element_map(t);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.rule.points[q]);
            let scale = map.det * w;
            for j in 0..nl {
                grads[j] = map.grad_to_physical(tab.evals[q].grads[j]);
            }
            // Fill the upper triangle and mirror: exact value symmetry.
            for i in 0..nl {
                let agi = problem.diffusion.apply(x, grads[i]);
                for j in i..nl {
                    let v = scale * (agi[0] * grads[j][0] + agi[1] * grads[j][1]);
                    local[i * nl + j] += v;
                    if i != j {
                        local[j * nl + i] += v;
                    }
                }
            }
        }
        let dofs = space.element_dofs(t);
        for i in 0..nl {
            for j in 0..nl {
                trip.push((dofs[i], dofs[j], local[i * nl + j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Weighted mass matrix `∫ b′(x, w_H(x)) φ_j φ_i` over all dofs, where `w_H`
/// is the finite element function with coefficients `w_coeffs`.
pub fn assemble_reaction_jacobian(
    space: &FeSpace,
    problem: &ProblemSpec,
    w_coeffs: &[f64],
) -> CsrMatrix {
    assert_eq!(w_coeffs.len(), space.n_dofs(), "coefficient length mismatch");
    let tab = volume_tables(space);
    let nl = space.n_local();
    let n = space.n_dofs();
    let mut trip = Vec::with_capacity(space.mesh.n_elements() * nl * nl);
    let mut local = vec![0.0f64; nl * nl];
    for t in 0..space.mesh.n_elements() {
        let map = space.element_map(t);
        let dofs = space.element_dofs(t);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.rule.points[q]);
            let vals = &tab.evals[q].values;
            let wh: f64 = (0..nl).map(|j| w_coeffs[dofs[j]] * vals[j]).sum();
            let scale = map.det * w * (problem.reaction_derivative)(x, wh);
            for i in 0..nl {
                for j in i..nl {
                    let v = scale * vals[i] * vals[j];
                    local[i * nl + j] += v;
                    if i != j {
                        local[j * nl + i] += v;
                    }
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                trip.push((dofs[i], dofs[j], local[i * nl + j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Primal load vector `F(φ_i) = ∫ f φ_i + ∫ 𝒇·∇φ_i` over all dofs.
pub fn assemble_primal_load(space: &FeSpace, problem: &ProblemSpec) -> Vec<f64> {
    let tab = volume_tables(space);
    let nl = space.n_local();
    let mut load = vec![0.0; space.n_dofs()];
    for t in 0..space.mesh.n_elements() {
        let map = space.element_map(t);
        let dofs = space.element_dofs(t);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.rule.points[q]);
            let scale = map.det * w;
            let fv = (problem.source)(x);
            let flux = problem.source_flux.as_ref().map(|f| f(x));
            for i in 0..nl {
                let mut v = fv * tab.evals[q].values[i];
                if let Some(fl) = flux {
                    let g = map.grad_to_physical(tab.evals[q].grads[i]);
                    v += fl[0] * g[0] + fl[1] * g[1];
                }
                load[dofs[i]] += scale * v;
            }
        }
    }
    load
}

/// Goal load vector `G(φ_i) = ∫ g φ_i + ∫ 𝒈·∇φ_i` over all dofs. With a
/// singular goal exponent set, the `g`-term of the 1D element whose left
/// endpoint is `x = 0` uses the matching Gauss–Jacobi rule.
pub fn assemble_goal_load(space: &FeSpace, problem: &ProblemSpec) -> Vec<f64> {
    let tab = volume_tables(space);
    let nl = space.n_local();
    let mut load = vec![0.0; space.n_dofs()];
    for t in 0..space.mesh.n_elements() {
        let map = space.element_map(t);
        let dofs = space.element_dofs(t);
        let singular = space.mesh.dim() == 1
            && problem.singular_goal_exponent.is_some()
            && map.origin[0] == 0.0;
        if singular {
            let alpha = problem.singular_goal_exponent.unwrap();
            let jrule = gauss_jacobi_rule(alpha, JACOBI_POINTS);
            let h = map.det;
            for (q, &w) in jrule.weights.iter().enumerate() {
                let s = jrule.points[q][0];
                let x = map.to_physical([s, 0.0]);
                // The rule integrates ∫₀¹ s^α ψ(s) ds; the smooth remainder
                // of the scaled integrand is ψ(s) = s^{-α} g(h s) φ̂(s).
                let gv = (problem.goal_weight)(x) * s.powf(-alpha);
                let evals = space.basis.eval([s, 0.0]);
                for i in 0..nl {
                    load[dofs[i]] += h * w * gv * evals.values[i];
                }
            }
        }
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.rule.points[q]);
            let scale = map.det * w;
            let gv = if singular { 0.0 } else { (problem.goal_weight)(x) };
            let flux = problem.goal_flux.as_ref().map(|g| g(x));
            for i in 0..nl {
                let mut v = gv * tab.evals[q].values[i];
                if let Some(fl) = flux {
                    let g = map.grad_to_physical(tab.evals[q].grads[i]);
                    v += fl[0] * g[0] + fl[1] * g[1];
                }
                load[dofs[i]] += scale * v;
            }
        }
    }
    load
}

/// Residual of the discrete semilinear problem at coefficients `u`:
/// `r_i = F(φ_i) − ∫ A∇u_H·∇φ_i − ∫ b(u_H) φ_i` for interior dofs,
/// `r_i = 0` for boundary dofs.
pub fn nonlinear_residual(space: &FeSpace, problem: &ProblemSpec, u: &[f64]) -> Vec<f64> {
    let load = assemble_primal_load(space, problem);
    nonlinear_residual_with_load(space, problem, u, &load)
}

/// As [`nonlinear_residual`], reusing a precomputed primal load vector
/// (the load does not change between Newton iterations).
pub fn nonlinear_residual_with_load(
    space: &FeSpace,
    problem: &ProblemSpec,
    u: &[f64],
    load: &[f64],
) -> Vec<f64> {
    assert_eq!(u.len(), space.n_dofs(), "coefficient length mismatch");
    assert_eq!(load.len(), space.n_dofs(), "load length mismatch");
    let tab = volume_tables(space);
    let nl = space.n_local();
    let mut r = load.to_vec();
    for t in 0..space.mesh.n_elements() {
        let map = space.element_map(t);
        let dofs = space.element_dofs(t);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.rule.points[q]);
            let scale = map.det * w;
            let ev = &tab.evals[q];
            let mut uval = 0.0;
            let mut ugrad_ref = [0.0, 0.0];
            for j in 0..nl {
                let c = u[dofs[j]];
                uval += c * ev.values[j];
                ugrad_ref[0] += c * ev.grads[j][0];
                ugrad_ref[1] += c * ev.grads[j][1];
            }
            let ugrad = map.grad_to_physical(ugrad_ref);
            let flux = problem.diffusion.apply(x, ugrad);
            let bval = (problem.reaction)(x, uval);
            for i in 0..nl {
                let gi = map.grad_to_physical(ev.grads[i]);
                r[dofs[i]] -=
                    scale * (flux[0] * gi[0] + flux[1] * gi[1] + bval * ev.values[i]);
            }
        }
    }
    for &b in &space.boundary_dofs {
        r[b] = 0.0;
    }
    r
}
