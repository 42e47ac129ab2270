//! Lagrange finite element spaces on the meshes of [`crate::mesh`].
//!
//! Supported families: continuous Lagrange elements of degree 1–4 on
//! intervals and degree 1–2 on triangles, with homogeneous Dirichlet
//! conditions imposed by splitting degrees of freedom into boundary and
//! interior sets.
//!
//! Degrees of freedom are nodal values. Vertex dofs come first and reuse the
//! vertex numbering; higher-order dofs follow (per element in 1D, per edge in
//! 2D, in the deterministic order of [`crate::mesh::Mesh::edge_adjacency`]).
//! All evaluations go through the affine [`ElementMap`], which also provides
//! the exact inverse map used to transfer coefficient vectors to refined
//! meshes by point evaluation.

use thiserror::Error;

use crate::mesh::{BoundaryFacets, Cells, Mesh, RefinementRelation};

/// Errors from space construction.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("unsupported polynomial degree {degree} in dimension {dim}")]
    UnsupportedDegree { dim: usize, degree: usize },
}

/// Values, gradients and second derivatives of all local basis functions at
/// one reference point. Gradients use the first component only in 1D;
/// Hessians are stored as `[d_xx, d_xy, d_yy]`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

/// The reference Lagrange basis for a given dimension and degree.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub dim: usize,
    pub degree: usize,
    /// Reference coordinates of the nodal points, in local dof order.
    pub nodes: Vec<[f64; 2]>,
}

impl ReferenceBasis {
    /// Build the basis; degree 1–4 in 1D, 1–2 in 2D.
    pub fn new(dim: usize, degree: usize) -> Result<Self, SpaceError> {
        let nodes = match (dim, degree) {
            (1, 1..=4) => {
                let mut nodes = vec![[0.0, 0.0], [1.0, 0.0]];
                for k in 1..degree {
                    nodes.push([k as f64 / degree as f64, 0.0]);
                }
                nodes
            }
            (2, 1) => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            (2, 2) => vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [0.0, 0.5],
            ],
            _ => return Err(SpaceError::UnsupportedDegree { dim, degree }),
        };
        Ok(ReferenceBasis { dim, degree, nodes })
    }

    /// Number of local basis functions.
    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }

    /// Evaluate all basis functions at the reference point `p`.
    pub fn eval(&self, p: [f64; 2]) -> BasisEval {
        match self.dim {
            1 => self.eval_1d(p[0]),
            _ => self.eval_2d(p),
        }
    }

    fn eval_1d(&self, x: f64) -> BasisEval {
        let xs: Vec<f64> = self.nodes.iter().map(|n| n[0]).collect();
        let n = xs.len();
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; n];
        let mut hessians = vec![[0.0; 3]; n];
        for j in 0..n {
            // Lagrange product formula and its first two derivatives.
            let mut val = 1.0;
            for k in 0..n {
                if k != j {
                    val *= (x - xs[k]) / (xs[j] - xs[k]);
                }
            }
            values[j] = val;
            let mut d1 = 0.0;
            for i in 0..n {
                if i == j {
                    continue;
                }
                let mut term = 1.0 / (xs[j] - xs[i]);
                for k in 0..n {
                    if k != j && k != i {
                        term *= (x - xs[k]) / (xs[j] - xs[k]);
                    }
                }
                d1 += term;
            }
            grads[j][0] = d1;
            let mut d2 = 0.0;
            for i in 0..n {
                if i == j {
                    continue;
                }
                for l in 0..n {
                    if l == j || l == i {
                        continue;
                    }
                    let mut term = 1.0 / ((xs[j] - xs[i]) * (xs[j] - xs[l]));
                    for k in 0..n {
                        if k != j && k != i && k != l {
                            term *= (x - xs[k]) / (xs[j] - xs[k]);
                        }
                    }
                    d2 += term;
                }
            }
            hessians[j][0] = d2;
        }
        BasisEval {
            values,
            grads,
            hessians,
        }
    }

    fn eval_2d(&self, p: [f64; 2]) -> BasisEval {
        let (x, y) = (p[0], p[1]);
        // Barycentric coordinates and their constant gradients.
        let lam = [1.0 - x - y, x, y];
        let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        match self.degree {
            1 => BasisEval {
                values: lam.to_vec(),
                grads: dl.to_vec(),
                hessians: vec![[0.0; 3]; 3],
            },
            _ => {
                let mut values = Vec::with_capacity(6);
                let mut grads = Vec::with_capacity(6);
                let mut hessians = Vec::with_capacity(6);
                for i in 0..3 {
                    values.push(lam[i] * (2.0 * lam[i] - 1.0));
                    let f = 4.0 * lam[i] - 1.0;
                    grads.push([f * dl[i][0], f * dl[i][1]]);
                    hessians.push([
                        4.0 * dl[i][0] * dl[i][0],
                        4.0 * dl[i][0] * dl[i][1],
                        4.0 * dl[i][1] * dl[i][1],
                    ]);
                }
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    values.push(4.0 * lam[i] * lam[j]);
                    grads.push([
                        4.0 * (dl[i][0] * lam[j] + lam[i] * dl[j][0]),
                        4.0 * (dl[i][1] * lam[j] + lam[i] * dl[j][1]),
                    ]);
                    hessians.push([
                        8.0 * dl[i][0] * dl[j][0],
                        4.0 * (dl[i][0] * dl[j][1] + dl[i][1] * dl[j][0]),
                        8.0 * dl[i][1] * dl[j][1],
                    ]);
                }
                BasisEval {
                    values,
                    grads,
                    hessians,
                }
            }
        }
    }
}

/// The affine map from the reference simplex to a physical element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: [f64; 2],
    jac: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    /// Jacobian determinant: element length in 1D, twice the area in 2D.
    pub det: f64,
}

impl ElementMap {
    /// Map a reference point to physical coordinates.
    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    /// Map a physical point to reference coordinates (exact affine inverse).
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Push a reference gradient to physical coordinates.
    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Push a reference Hessian `[d_xx, d_xy, d_yy]` to physical coordinates.
    pub fn hessian_to_physical(&self, h: [f64; 3]) -> [f64; 3] {
        let href = [[h[0], h[1]], [h[1], h[2]]];
        // H_phys = J^{-T} H_ref J^{-1} for an affine map.
        let mut tmp = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                tmp[i][j] = self.inv[0][i] * href[0][j] + self.inv[1][i] * href[1][j];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = tmp[i][0] * self.inv[0][j] + tmp[i][1] * self.inv[1][j];
            }
        }
        [out[0][0], out[0][1], out[1][1]]
    }
}

/// A continuous Lagrange finite element space with homogeneous Dirichlet
/// boundary conditions on the whole boundary.
#[derive(Debug, Clone)]
pub struct FeSpace {
    /// The mesh the space lives on (owned so refinement chains stay simple).
    pub mesh: Mesh,
    pub degree: usize,
    /// Reference basis shared by all elements.
    pub basis: ReferenceBasis,
    /// Flat element-to-dof table, `n_elements * n_local` entries.
    element_dofs: Vec<usize>,
    /// Physical coordinates of every dof.
    pub dof_coords: Vec<[f64; 2]>,
    /// Dofs on the Dirichlet boundary, ascending.
    pub boundary_dofs: Vec<usize>,
    /// Complement of `boundary_dofs`, ascending.
    pub interior_dofs: Vec<usize>,
}

impl FeSpace {
    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_local(&self) -> usize {
        self.basis.n_local()
    }

    /// Global dof indices of element `t`, in local dof order.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.element_dofs[t * n..(t + 1) * n]
    }

    /// Affine map of element `t`.
    pub fn element_map(&self, t: usize) -> ElementMap {
        let verts = self.mesh.element_vertices(t);
        let a = self.mesh.vertices[verts[0]];
        match self.mesh.dim() {
            1 => {
                let h = self.mesh.vertices[verts[1]][0] - a[0];
                ElementMap {
                    origin: a,
                    jac: [[h, 0.0], [0.0, 1.0]],
                    inv: [[1.0 / h, 0.0], [0.0, 1.0]],
                    det: h,
                }
            }
            _ => {
                let b = self.mesh.vertices[verts[1]];
                let c = self.mesh.vertices[verts[2]];
                let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                let inv = [
                    [jac[1][1] / det, -jac[0][1] / det],
                    [-jac[1][0] / det, jac[0][0] / det],
                ];
                ElementMap {
                    origin: a,
                    jac,
                    inv,
                    det,
                }
            }
        }
    }

    /// Evaluate the finite element function with coefficients `u` on element
    /// `t` at the physical point `x`; returns the value and physical gradient.
    pub fn eval_at(&self, u: &[f64], t: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
        let map = self.element_map(t);
        let eval = self.basis.eval(map.to_reference(x));
        let dofs = self.element_dofs(t);
        let mut val = 0.0;
        let mut grad = [0.0, 0.0];
        for (j, &dof) in dofs.iter().enumerate() {
            val += u[dof] * eval.values[j];
            let g = map.grad_to_physical(eval.grads[j]);
            grad[0] += u[dof] * g[0];
            grad[1] += u[dof] * g[1];
        }
        (val, grad)
    }
}

/// Build the Lagrange space of the given degree on `mesh`.
pub fn build_space(mesh: Mesh, degree: usize) -> Result<FeSpace, SpaceError> {
    let dim = mesh.dim();
    let basis = ReferenceBasis::new(dim, degree)?;
    let n_local = basis.n_local();
    let nv = mesh.n_vertices();
    let ne = mesh.n_elements();
    let mut element_dofs = Vec::with_capacity(ne * n_local);
    let mut dof_coords: Vec<[f64; 2]> = mesh.vertices.clone();
    let mut boundary_dofs: Vec<usize> = mesh.boundary_vertices();

    match (&mesh.cells, degree) {
        (Cells::Intervals(els), m) => {
            for (t, e) in els.iter().enumerate() {
                element_dofs.push(e[0]);
                element_dofs.push(e[1]);
                let (x0, x1) = (mesh.vertices[e[0]][0], mesh.vertices[e[1]][0]);
                for k in 1..m {
                    element_dofs.push(nv + t * (m - 1) + k - 1);
                    let s = k as f64 / m as f64;
                    dof_coords.push([x0 + s * (x1 - x0), 0.0]);
                }
            }
        }
        (Cells::Triangles(els), 1) => {
            for e in els {
                element_dofs.extend_from_slice(e);
            }
        }
        (Cells::Triangles(els), _) => {
            let edges = mesh.edge_adjacency();
            let mut edge_dof = std::collections::HashMap::with_capacity(edges.len());
            for (i, e) in edges.iter().enumerate() {
                edge_dof.insert((e.vertices[0], e.vertices[1]), nv + i);
                let (a, b) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
                dof_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                if e.right.is_none() {
                    boundary_dofs.push(nv + i);
                }
            }
            let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
            for e in els {
                element_dofs.extend_from_slice(e);
                for (a, b) in [(e[0], e[1]), (e[1], e[2]), (e[2], e[0])] {
                    element_dofs.push(edge_dof[&key(a, b)]);
                }
            }
        }
    }
    // 1D boundary dofs are exactly the boundary vertices (interior element
    // nodes never sit on the boundary); nothing to add.
    if let BoundaryFacets::Vertices(_) = &mesh.boundary {}
    boundary_dofs.sort_unstable();
    boundary_dofs.dedup();
    let mut on_boundary = vec![false; dof_coords.len()];
    for &d in &boundary_dofs {
        on_boundary[d] = true;
    }
    let interior_dofs = (0..dof_coords.len()).filter(|&d| !on_boundary[d]).collect();
    Ok(FeSpace {
        mesh,
        degree,
        basis,
        element_dofs,
        dof_coords,
        boundary_dofs,
        interior_dofs,
    })
}

/// Transfer coefficients from a coarse space to the space built on one
/// refinement of its mesh, by evaluating the coarse function at the fine
/// nodal points. Exact for nested refinements.
pub fn prolongate(
    coarse: &FeSpace,
    fine: &FeSpace,
    relation: &RefinementRelation,
    u: &[f64],
) -> Vec<f64> {
    assert_eq!(u.len(), coarse.n_dofs(), "coefficient length mismatch");
    let mut out = vec![0.0; fine.n_dofs()];
    let mut done = vec![false; fine.n_dofs()];
    for t in 0..fine.mesh.n_elements() {
        let parent = relation.parent_of[t];
        for &dof in fine.element_dofs(t) {
            if !done[dof] {
                done[dof] = true;
                let (val, _) = coarse.eval_at(u, parent, fine.dof_coords[dof]);
                out[dof] = val;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{initial_mesh_1d, initial_mesh_unit_square};
    use rand::{Rng, SeedableRng};

    #[test]
    fn bases_are_nodal_and_partition_unity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (dim, degrees) in [(1usize, 1..=4), (2usize, 1..=2)] {
            for degree in degrees {
                let basis = ReferenceBasis::new(dim, degree).unwrap();
                let nodes = basis.nodes.clone();
                for (j, &node) in nodes.iter().enumerate() {
                    let e = basis.eval(node);
                    for (i, &v) in e.values.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (v - expect).abs() < 1e-12,
                            "dim {dim} degree {degree}: phi_{i} at node {j}"
                        );
                    }
                }
                for _ in 0..20 {
                    let p = if dim == 1 {
                        [rng.random_range(0.0..1.0), 0.0]
                    } else {
                        let x: f64 = rng.random_range(0.0..1.0);
                        let y: f64 = rng.random_range(0.0..(1.0 - x));
                        [x, y]
                    };
                    let e = basis.eval(p);
                    let sum: f64 = e.values.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    let gx: f64 = e.grads.iter().map(|g| g[0]).sum();
                    let gy: f64 = e.grads.iter().map(|g| g[1]).sum();
                    assert!(gx.abs() < 1e-11 && gy.abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn degree_validation() {
        assert!(ReferenceBasis::new(1, 5).is_err());
        assert!(ReferenceBasis::new(2, 3).is_err());
        assert!(ReferenceBasis::new(3, 1).is_err());
        assert!(ReferenceBasis::new(1, 0).is_err());
    }

    #[test]
    fn cubic_basis_reproduces_cubics() {
        // Interpolating x^3 at the degree-3 nodes must reproduce it exactly,
        // including first and second derivatives.
        let basis = ReferenceBasis::new(1, 3).unwrap();
        let coeffs: Vec<f64> = basis.nodes.iter().map(|n| n[0].powi(3)).collect();
        for &x in &[0.1, 0.35, 0.62, 0.97] {
            let e = basis.eval([x, 0.0]);
            let v: f64 = (0..coeffs.len()).map(|j| coeffs[j] * e.values[j]).sum();
            let d: f64 = (0..coeffs.len()).map(|j| coeffs[j] * e.grads[j][0]).sum();
            let dd: f64 = (0..coeffs.len()).map(|j| coeffs[j] * e.hessians[j][0]).sum();
            assert!((v - x.powi(3)).abs() < 1e-13);
            assert!((d - 3.0 * x * x).abs() < 1e-12);
            assert!((dd - 6.0 * x).abs() < 1e-11);
        }
    }

    #[test]
    fn quadratic_triangle_basis_reproduces_quadratics() {
        let basis = ReferenceBasis::new(2, 2).unwrap();
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1] + p[0] * p[1] + 3.0 * p[0] * p[0];
        let coeffs: Vec<f64> = basis.nodes.iter().map(|&n| f(n)).collect();
        for &p in &[[0.2, 0.3], [0.1, 0.05], [0.6, 0.35]] {
            let e = basis.eval(p);
            let v: f64 = (0..6).map(|j| coeffs[j] * e.values[j]).sum();
            assert!((v - f(p)).abs() < 1e-13);
            let dx: f64 = (0..6).map(|j| coeffs[j] * e.grads[j][0]).sum();
            let dy: f64 = (0..6).map(|j| coeffs[j] * e.grads[j][1]).sum();
            assert!((dx - (2.0 + p[1] + 6.0 * p[0])).abs() < 1e-12);
            assert!((dy - (-1.0 + p[0])).abs() < 1e-12);
            // Hessian of f is constant: [6, 1, 0].
            let hxx: f64 = (0..6).map(|j| coeffs[j] * e.hessians[j][0]).sum();
            let hxy: f64 = (0..6).map(|j| coeffs[j] * e.hessians[j][1]).sum();
            let hyy: f64 = (0..6).map(|j| coeffs[j] * e.hessians[j][2]).sum();
            assert!((hxx - 6.0).abs() < 1e-12);
            assert!((hxy - 1.0).abs() < 1e-12);
            assert!(hyy.abs() < 1e-12);
        }
    }

    #[test]
    fn dof_counts_on_small_meshes() {
        let mesh = initial_mesh_1d(0.0, 1.0, 2).unwrap();
        let sp = build_space(mesh, 3).unwrap();
        assert_eq!(sp.n_dofs(), 3 + 2 * 2);
        assert_eq!(sp.boundary_dofs, vec![0, 2]);
        assert_eq!(sp.interior_dofs.len(), 5);

        let square = initial_mesh_unit_square();
        let p1 = build_space(square.clone(), 1).unwrap();
        assert_eq!(p1.n_dofs(), 4);
        assert_eq!(p1.interior_dofs.len(), 0);

        let p2 = build_space(square, 2).unwrap();
        // 4 vertices + 5 edges; only the diagonal midpoint is interior.
        assert_eq!(p2.n_dofs(), 9);
        assert_eq!(p2.interior_dofs.len(), 1);
        let c = p2.dof_coords[p2.interior_dofs[0]];
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn element_map_round_trip() {
        let mesh = initial_mesh_unit_square().uniform_refine().0;
        let sp = build_space(mesh, 1).unwrap();
        for t in 0..sp.mesh.n_elements() {
            let map = sp.element_map(t);
            for r in [[0.25, 0.25], [0.1, 0.7], [0.0, 0.0], [1.0, 0.0]] {
                let x = map.to_physical(r);
                let back = map.to_reference(x);
                assert!((back[0] - r[0]).abs() < 1e-14);
                assert!((back[1] - r[1]).abs() < 1e-14);
            }
            assert!((map.det - 2.0 * sp.mesh.element_measure(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn physical_gradient_of_linear_function() {
        let mesh = initial_mesh_unit_square();
        let sp = build_space(mesh, 1).unwrap();
        // u(x, y) = 2x + 3y interpolated at the vertices.
        let u: Vec<f64> = sp
            .dof_coords
            .iter()
            .map(|c| 2.0 * c[0] + 3.0 * c[1])
            .collect();
        for t in 0..sp.mesh.n_elements() {
            let (val, grad) = sp.eval_at(&u, t, [0.5, 0.5]);
            assert!((val - 2.5).abs() < 1e-14);
            assert!((grad[0] - 2.0).abs() < 1e-13 && (grad[1] - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn prolongation_is_exact_for_space_functions() {
        // A quadratic lies in every P2 space; its interpolant must transfer
        // exactly through refinement.
        let f = |c: [f64; 2]| 1.0 + c[0] - 2.0 * c[1] + 0.5 * c[0] * c[1] + c[1] * c[1];
        let mesh = initial_mesh_unit_square().uniform_refine().0;
        let coarse = build_space(mesh, 2).unwrap();
        let u: Vec<f64> = coarse.dof_coords.iter().map(|&c| f(c)).collect();
        let (fine_mesh, rel) = coarse.mesh.refine(&[0, 3]).unwrap();
        let fine = build_space(fine_mesh, 2).unwrap();
        let up = prolongate(&coarse, &fine, &rel, &u);
        for (d, &c) in fine.dof_coords.iter().enumerate() {
            assert!(
                (up[d] - f(c)).abs() < 1e-12,
                "fine dof {d} at {c:?}: {} vs {}",
                up[d],
                f(c)
            );
        }
    }

    #[test]
    fn prolongation_1d_high_order() {
        let f = |x: f64| 0.3 + x - x.powi(3) + 2.0 * x.powi(4);
        let coarse = build_space(initial_mesh_1d(0.0, 1.0, 3).unwrap(), 4).unwrap();
        let u: Vec<f64> = coarse.dof_coords.iter().map(|c| f(c[0])).collect();
        let (fine_mesh, rel) = coarse.mesh.refine(&[1]).unwrap();
        let fine = build_space(fine_mesh, 4).unwrap();
        let up = prolongate(&coarse, &fine, &rel, &u);
        for (d, c) in fine.dof_coords.iter().enumerate() {
            assert!((up[d] - f(c[0])).abs() < 1e-12);
        }
    }
}
