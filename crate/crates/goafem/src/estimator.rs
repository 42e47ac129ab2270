//! Residual a-posteriori error indicators for the primal and dual problems.
//!
//! For the function `v_H` with data `(d, 𝐃, r)` — volume source `d`, flux
//! source `𝐃`, and pointwise reaction term `r(x)` — the squared indicator of
//! element `T` is
//!
//! ```text
//! h_T² ∫_T (d + div(A∇v_H − 𝐃) − r)²  +  h_T Σ_{e ⊂ ∂T∩Ω} ∫_e ⟦(A∇v_H − 𝐃)·n⟧²
//! ```
//!
//! with `h_T = |T|^{1/dim}`. The primal indicator `η` uses `(f, 𝒇, b(u_H))`;
//! the dual indicator `ζ` uses `(g, 𝒈, b′(u_H)·z_H)` with the reaction
//! linearized at the current primal solution. Every interior edge integral
//! is computed once and added to *both* adjacent elements, each scaled by
//! its own `h_T`. In one dimension the flux of a conforming solution has no
//! interior facet jumps to first order and the facet terms vanish.
//!
//! `div(A∇v_H)` is evaluated analytically from the basis second derivatives;
//! discontinuous flux data is evaluated pointwise at quadrature nodes (both
//! sides of an edge see the same data value, so pure data discontinuities
//! cancel in the jump).

use crate::problem::{ProblemSpec, ScalarField, VectorField};
use crate::quadrature::gauss_legendre;
use crate::space::FeSpace;

/// Which problem an indicator field belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    Primal,
    Dual,
}

/// Per-element squared indicators bound to a specific mesh.
#[derive(Debug, Clone)]
pub struct IndicatorField {
    /// Squared indicator per element, all ≥ 0.
    pub values: Vec<f64>,
    pub kind: IndicatorKind,
    /// Fingerprint of the mesh the field was computed on.
    pub mesh_id: u64,
}

impl IndicatorField {
    /// `sqrt(Σ_T values_T)`, the total estimator.
    pub fn total(&self) -> f64 {
        total(self)
    }
}

/// `sqrt(Σ_T values_T)` of a field of squared indicators.
pub fn total(field: &IndicatorField) -> f64 {
    field.values.iter().sum::<f64>().sqrt()
}

struct EstimatorData<'a> {
    /// Coefficients of the estimated function (`u_H` or `z_H`).
    v: &'a [f64],
    /// Linearization point for the dual reaction weight; `None` for primal.
    u: Option<&'a [f64]>,
    source: &'a ScalarField,
    flux: Option<&'a VectorField>,
    flux_div: Option<&'a ScalarField>,
}

fn indicator_core(space: &FeSpace, problem: &ProblemSpec, data: &EstimatorData) -> Vec<f64> {
    let mesh = &space.mesh;
    let dim = mesh.dim();
    let nl = space.n_local();
    let tab = crate::assembly::volume_tables(space);
    let mut values = vec![0.0f64; mesh.n_elements()];

    // Volume terms.
    for t in 0..mesh.n_elements() {
        let map = space.element_map(t);
        let dofs = space.element_dofs(t);
        let h = mesh.element_h(t);
        let mut acc = 0.0;
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let ev = &tab.evals[q];
            let x = map.to_physical(tab.rule.points[q]);
            let mut vval = 0.0;
            let mut vgrad_ref = [0.0, 0.0];
            let mut vhess_ref = [0.0, 0.0, 0.0];
            let mut uval = 0.0;
            for j in 0..nl {
                let c = data.v[dofs[j]];
                vval += c * ev.values[j];
                vgrad_ref[0] += c * ev.grads[j][0];
                vgrad_ref[1] += c * ev.grads[j][1];
                vhess_ref[0] += c * ev.hessians[j][0];
                vhess_ref[1] += c * ev.hessians[j][1];
                vhess_ref[2] += c * ev.hessians[j][2];
            }
            if let Some(u) = data.u {
                for j in 0..nl {
                    uval += u[dofs[j]] * ev.values[j];
                }
            }
            let vgrad = map.grad_to_physical(vgrad_ref);
            let vhess = map.hessian_to_physical(vhess_ref);
            // div(A∇v) = (div A)·∇v + A : H(v).
            let a = problem.diffusion.eval(x);
            let adiv = problem.diffusion.row_divergence(x);
            let div_flux = adiv[0] * vgrad[0]
                + adiv[1] * vgrad[1]
                + a[0][0] * vhess[0]
                + (a[0][1] + a[1][0]) * vhess[1]
                + a[1][1] * vhess[2];
            let data_div = data.flux_div.map_or(0.0, |d| d(x));
            let react = match data.u {
                Some(_) => (problem.reaction_derivative)(x, uval) * vval,
                None => (problem.reaction)(x, vval),
            };
            let residual = (data.source)(x) + div_flux - data_div - react;
            acc += map.det * w * residual * residual;
        }
        values[t] = h * h * acc;
    }

    // Facet jump terms (2D only).
    if dim == 2 {
        let (pts, wts) = gauss_legendre(space.degree + 1);
        for edge in mesh.edge_adjacency() {
            let right = match edge.right {
                Some(r) => r,
                None => continue,
            };
            let left = edge.left;
            let pa = mesh.vertices[edge.vertices[0]];
            let pb = mesh.vertices[edge.vertices[1]];
            let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
            let normal = [tangent[1] / len, -tangent[0] / len];
            let mut acc = 0.0;
            for (q, &w) in wts.iter().enumerate() {
                let x = [
                    pa[0] + pts[q] * tangent[0],
                    pa[1] + pts[q] * tangent[1],
                ];
                let fl = data.flux.map_or([0.0, 0.0], |f| f(x));
                let side = |t: usize| -> f64 {
                    let (_, grad) = space.eval_at(data.v, t, x);
                    let ag = problem.diffusion.apply(x, grad);
                    (ag[0] - fl[0]) * normal[0] + (ag[1] - fl[1]) * normal[1]
                };
                let jump = side(left) - side(right);
                acc += w * jump * jump;
            }
            let integral = len * acc;
            values[left] += mesh.element_h(left) * integral;
            values[right] += mesh.element_h(right) * integral;
        }
    }
    values
}

/// Primal indicator field: squared `η_T` for the discrete solution `u_H`.
pub fn eta_local(space: &FeSpace, problem: &ProblemSpec, u_coeffs: &[f64]) -> IndicatorField {
    assert_eq!(u_coeffs.len(), space.n_dofs(), "coefficient length mismatch");
    let values = indicator_core(
        space,
        problem,
        &EstimatorData {
            v: u_coeffs,
            u: None,
            source: &problem.source,
            flux: problem.source_flux.as_ref(),
            flux_div: problem.source_flux_div.as_ref(),
        },
    );
    IndicatorField {
        values,
        kind: IndicatorKind::Primal,
        mesh_id: space.mesh.fingerprint(),
    }
}

/// Dual indicator field: squared `ζ_T` for the dual solution `z_H`,
/// linearized at the primal solution `u_H`.
pub fn zeta_local(
    space: &FeSpace,
    problem: &ProblemSpec,
    u_coeffs: &[f64],
    z_coeffs: &[f64],
) -> IndicatorField {
    assert_eq!(u_coeffs.len(), space.n_dofs(), "coefficient length mismatch");
    assert_eq!(z_coeffs.len(), space.n_dofs(), "coefficient length mismatch");
    let values = indicator_core(
        space,
        problem,
        &EstimatorData {
            v: z_coeffs,
            u: Some(u_coeffs),
            source: &problem.goal_weight,
            flux: problem.goal_flux.as_ref(),
            flux_div: problem.goal_flux_div.as_ref(),
        },
    );
    IndicatorField {
        values,
        kind: IndicatorKind::Dual,
        mesh_id: space.mesh.fingerprint(),
    }
}
