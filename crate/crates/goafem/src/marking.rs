//! Dörfler marking with exact minimal cardinality and the goal-oriented
//! combination rule, plus the plain and combined single-estimator variants.
//!
//! `doerfler_min` sorts the squared indicators descending (ties broken by
//! ascending element index) and takes the shortest prefix whose sum reaches
//! `θ` times the total. Sorting gives the exactly minimal cardinality, so no
//! relaxation constant is needed.
//!
//! The goal-oriented strategy computes two Dörfler sets — one for the primal
//! indicators `η²` and one for the combined indicators `η² + ζ²` — then
//! keeps the `k = min(#set_u, #set_uz)` largest-indicator members of each
//! and marks their union.

use thiserror::Error;

use crate::estimator::IndicatorField;

/// Marking strategy selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Two-set goal-oriented marking (primal and combined criteria).
    Goafem,
    /// Plain marking on the primal indicators.
    Afem,
    /// Marking on the combined indicators `η² + ζ²`.
    AfemPlus,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "goafem" => Ok(Strategy::Goafem),
            "afem" => Ok(Strategy::Afem),
            "afem-plus" | "afem_plus" => Ok(Strategy::AfemPlus),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Goafem => "goafem",
            Strategy::Afem => "afem",
            Strategy::AfemPlus => "afem-plus",
        })
    }
}

/// Marking parameters.
#[derive(Debug, Clone, Copy)]
pub struct MarkConfig {
    /// Dörfler parameter in `(0, 1]`.
    pub theta: f64,
    pub strategy: Strategy,
}

/// Outcome of one marking step. All sets are ascending element-index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkResult {
    /// Elements to refine.
    pub marked: Vec<usize>,
    /// Dörfler set for the primal indicators.
    pub set_u: Vec<usize>,
    /// Dörfler set for the combined indicators.
    pub set_uz: Vec<usize>,
    /// The `k` largest-indicator members of `set_u`.
    pub selected_u: Vec<usize>,
    /// The `k` largest-indicator members of `set_uz`.
    pub selected_uz: Vec<usize>,
}

/// Marking failures.
#[derive(Debug, Error)]
pub enum MarkError {
    #[error("indicator fields live on different meshes")]
    MeshMismatch,
}

/// Indices sorted by (value descending, index ascending), zeros excluded.
fn descending_order(squared: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..squared.len()).filter(|&i| squared[i] > 0.0).collect();
    idx.sort_by(|&a, &b| {
        squared[b]
            .partial_cmp(&squared[a])
            .expect("indicators must not be NaN")
            .then(a.cmp(&b))
    });
    idx
}

/// Shortest descending-order prefix reaching the Dörfler criterion,
/// still in descending indicator order.
fn doerfler_prefix(squared: &[f64], theta: f64) -> Vec<usize> {
    assert!(
        theta > 0.0 && theta <= 1.0,
        "theta must lie in (0, 1], got {theta}"
    );
    assert!(
        squared.iter().all(|&v| v >= 0.0),
        "squared indicators must be nonnegative"
    );
    // All entries are nonnegative (asserted above), so a zero sum means
    // every indicator vanishes and there is nothing to mark.
    let total: f64 = squared.iter().sum();
    if total == 0.0 {
        return Vec::new();
    }
    let target = theta * total;
    let mut out = Vec::new();
    let mut acc = 0.0;
    for i in descending_order(squared) {
        out.push(i);
        acc += squared[i];
        if acc >= target {
            break;
        }
    }
    out
}

/// The minimal-cardinality element set `M` with
/// `Σ_{T∈M} v_T ≥ θ·Σ_T v_T`, ascending. All-zero input yields the empty
/// set; ties are broken by smaller element index.
pub fn doerfler_min(squared_indicators: &[f64], theta: f64) -> Vec<usize> {
    let mut m = doerfler_prefix(squared_indicators, theta);
    m.sort_unstable();
    m
}

/// Apply the configured marking strategy to the primal field `eta_sq` and
/// dual field `zeta_sq` (both holding squared indicators on one mesh).
pub fn mark(
    eta_sq: &IndicatorField,
    zeta_sq: &IndicatorField,
    config: &MarkConfig,
) -> Result<MarkResult, MarkError> {
    if eta_sq.mesh_id != zeta_sq.mesh_id || eta_sq.values.len() != zeta_sq.values.len() {
        return Err(MarkError::MeshMismatch);
    }
    let eta = &eta_sq.values;
    let combined: Vec<f64> = eta
        .iter()
        .zip(&zeta_sq.values)
        .map(|(a, b)| a + b)
        .collect();
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    match config.strategy {
        Strategy::Afem => {
            let set_u = doerfler_min(eta, config.theta);
            Ok(MarkResult {
                marked: set_u.clone(),
                selected_u: set_u.clone(),
                set_u,
                set_uz: Vec::new(),
                selected_uz: Vec::new(),
            })
        }
        Strategy::AfemPlus => {
            let set_uz = doerfler_min(&combined, config.theta);
            Ok(MarkResult {
                marked: set_uz.clone(),
                selected_uz: set_uz.clone(),
                set_uz,
                set_u: Vec::new(),
                selected_u: Vec::new(),
            })
        }
        Strategy::Goafem => {
            let prefix_u = doerfler_prefix(eta, config.theta);
            let prefix_uz = doerfler_prefix(&combined, config.theta);
            let k = prefix_u.len().min(prefix_uz.len());
            let (selected_u, selected_uz);
            let mut marked;
            if k == 0 && (prefix_u.len() + prefix_uz.len()) > 0 {
                // Degenerate case: one estimator vanishes identically. Fall
                // back to the nonempty criterion so refinement proceeds
                // whenever any indicator is positive.
                selected_u = sorted(prefix_u.clone());
                selected_uz = sorted(prefix_uz.clone());
                marked = if prefix_u.is_empty() {
                    selected_uz.clone()
                } else {
                    selected_u.clone()
                };
            } else {
                selected_u = sorted(prefix_u[..k].to_vec());
                selected_uz = sorted(prefix_uz[..k].to_vec());
                marked = selected_u
                    .iter()
                    .chain(&selected_uz)
                    .copied()
                    .collect::<Vec<_>>();
                marked.sort_unstable();
                marked.dedup();
            }
            Ok(MarkResult {
                marked,
                set_u: sorted(prefix_u),
                set_uz: sorted(prefix_uz),
                selected_u,
                selected_uz,
            })
        }
    }
}
