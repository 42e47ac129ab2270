//! Quadrature rules on reference elements.
//!
//! Volume rules live on the reference interval `[0, 1]` (1D) and on the
//! reference triangle with vertices `(0,0)`, `(1,0)`, `(0,1)` (2D). Points are
//! stored as local coordinates `[f64; 2]`; one-dimensional rules keep the
//! second coordinate at zero.
//!
//! Three constructions are provided:
//!
//! * [`gauss_legendre`] — classical Gauss–Legendre nodes/weights on `[0, 1]`,
//!   computed by Newton iteration on the Legendre recurrence,
//! * [`quad_rule`] — a volume rule of requested polynomial exactness; the
//!   triangle rule is a Duffy-collapsed tensor Gauss rule, so all weights are
//!   positive,
//! * [`gauss_jacobi_rule`] — a rule for weighted integrals
//!   `int_0^1 x^alpha p(x) dx` with `alpha > -1`, built via the Golub–Welsch
//!   eigenvalue method. This integrates singular goal weights such as
//!   `x^{-9/20}` exactly against polynomials.

use nalgebra::DMatrix;

/// A quadrature rule on a reference element.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Evaluation points in local (reference-element) coordinates.
    pub points: Vec<[f64; 2]>,
    /// Quadrature weights. Positive for every rule constructed here.
    pub weights: Vec<f64>,
    /// Largest polynomial degree integrated exactly. For [`gauss_jacobi_rule`]
    /// exactness refers to the weighted integral with weight `x^alpha`.
    pub exactness_degree: usize,
}

impl QuadRule {
    /// Number of quadrature points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the rule has no points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
///
/// Exact for polynomials of degree `2n - 1`. Nodes are returned in ascending
/// order. Panics if `n == 0`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre requires at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Work on [-1, 1]; only the lower half is computed, the rest follows by
    // symmetry. Newton iteration with the usual Chebyshev-flavoured guess.
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n, p0 = P_{n-1}.
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                // One more sweep for full precision, then stop.
                let mut q0 = 1.0;
                let mut q1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let q2 = ((2.0 * kf - 1.0) * x * q1 - (kf - 1.0) * q0) / kf;
                    q0 = q1;
                    q1 = q2;
                }
                dp = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                x -= q1 / dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th node from the top in descending order on [-1, 1];
        // store ascending.
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // Map from [-1, 1] to [0, 1].
    for i in 0..n {
        nodes[i] = 0.5 * (nodes[i] + 1.0);
        weights[i] *= 0.5;
    }
    (nodes, weights)
}

/// A volume rule on the reference element of dimension `dim` (1 or 2), exact
/// for all polynomials of total degree `order`.
///
/// 1D uses Gauss–Legendre on `[0, 1]`; 2D uses a Duffy-collapsed tensor Gauss
/// rule on the reference triangle. Weights are positive and sum to the
/// reference-element measure (1 and 1/2 respectively).
pub fn quad_rule(dim: usize, order: usize) -> QuadRule {
    match dim {
        1 => {
            let n = order / 2 + 1;
            let (nodes, weights) = gauss_legendre(n);
            QuadRule {
                points: nodes.iter().map(|&x| [x, 0.0]).collect(),
                weights,
                exactness_degree: 2 * n - 1,
            }
        }
        2 => {
            // Duffy map (u, v) -> (u, v (1 - u)) with Jacobian (1 - u). A
            // polynomial of total degree p becomes degree <= p + 1 in u
            // (including the Jacobian) and <= p in v.
            let nu = (order + 3) / 2;
            let nv = (order + 2) / 2;
            let (xu, wu) = gauss_legendre(nu);
            let (xv, wv) = gauss_legendre(nv.max(1));
            let mut points = Vec::with_capacity(nu * nv.max(1));
            let mut weights = Vec::with_capacity(nu * nv.max(1));
            for (u, cu) in xu.iter().zip(&wu) {
                for (v, cv) in xv.iter().zip(&wv) {
                    points.push([*u, v * (1.0 - u)]);
                    weights.push(cu * cv * (1.0 - u));
                }
            }
            QuadRule {
                points,
                weights,
                exactness_degree: order,
            }
        }
        other => panic!("quad_rule supports dim 1 or 2, got {other}"),
    }
}

/// An `n`-point rule for the weighted integral `int_0^1 x^alpha p(x) dx`.
///
/// Requires `alpha > -1` (integrability) and `n >= 1`. The returned points lie
/// strictly inside `(0, 1)` and the weights absorb the singular factor
/// `x^alpha`, so the rule applies to the *smooth* remainder of the integrand:
/// `sum_q w_q p(x_q) = int_0^1 x^alpha p(x) dx` exactly for all polynomials
/// `p` of degree `<= 2n - 1`. For `alpha = 0` the rule coincides with
/// Gauss–Legendre on `[0, 1]`.
///
/// Construction: the substitution `x = (1 + t) / 2` turns the weight into the
/// Jacobi weight `(1 + t)^alpha` on `[-1, 1]`; the symmetric tridiagonal
/// Jacobi matrix of the associated orthogonal polynomials is diagonalised and
/// weights follow from the first eigenvector components (Golub–Welsch).
pub fn gauss_jacobi_rule(alpha: f64, n: usize) -> QuadRule {
    assert!(alpha > -1.0, "gauss_jacobi_rule requires alpha > -1");
    assert!(n > 0, "gauss_jacobi_rule requires at least one point");
    // Recurrence coefficients of the Jacobi polynomials with parameters
    // (a, b) = (0, alpha): weight (1 - t)^0 (1 + t)^alpha on [-1, 1].
    let b = alpha;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    mat[(0, 0)] = b / (b + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let denom = (2.0 * kf + b) * (2.0 * kf + b + 2.0);
        mat[(k, k)] = b * b / denom;
    }
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + b;
        let num = 4.0 * kf * kf * (kf + b) * (kf + b);
        let off = (num / (s * s * (s * s - 1.0))).sqrt();
        mat[(k - 1, k)] = off;
        mat[(k, k - 1)] = off;
    }
    let eig = mat.symmetric_eigen();
    // Zeroth moment of the Jacobi weight: int_{-1}^{1} (1 + t)^alpha dt.
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    // Overall scale from the substitution x = (1 + t) / 2.
    let scale = 2f64.powf(-alpha - 1.0);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let t = eig.eigenvalues[j];
            let q = eig.eigenvectors[(0, j)];
            (0.5 * (t + 1.0), scale * mu0 * q * q)
        })
        .collect();
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    QuadRule {
        points: rule.iter().map(|&(x, _)| [x, 0.0]).collect(),
        weights: rule.iter().map(|&(_, w)| w).collect(),
        exactness_degree: 2 * n - 1,
    }
}
