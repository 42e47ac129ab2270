//! Simplicial meshes on intervals and on the unit square, with conforming
//! newest-vertex bisection (NVB) refinement.
//!
//! # Conventions
//!
//! Vertices are stored as `[f64; 2]`; one-dimensional meshes keep the second
//! coordinate at zero. Interval elements store their endpoints in ascending
//! coordinate order. Triangles are stored counterclockwise with the
//! *reference edge* between local vertices 0 and 1; the newest vertex is local
//! vertex 2, so the reference edge is always the edge opposite the newest
//! vertex. Bisecting a triangle `(a, b, c)` at the midpoint `z` of its
//! reference edge produces the children `(c, a, z)` and `(b, c, z)`, which
//! again satisfy the convention.
//!
//! [`Mesh::refine`] bisects every marked element once and restores conformity
//! by the minimal closure: an element is additionally bisected exactly when
//! one of its edges must be split. New vertices are created per *edge* (never
//! deduplicated by geometric tolerance), so conformity is structural.
//! Refining never moves or removes existing vertices; children partition
//! their parent exactly.

use std::collections::HashMap;

use thiserror::Error;

/// Errors from mesh construction and refinement.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("interval bounds must satisfy a < b, got [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("mesh must contain at least one element")]
    Empty,
    #[error("marked element {index} out of range ({n_elements} elements)")]
    ElementOutOfRange { index: usize, n_elements: usize },
    #[error("mesh validation failed: {0}")]
    Invalid(String),
}

/// Element connectivity; the variant fixes the mesh dimension.
#[derive(Debug, Clone)]
pub enum Cells {
    /// Interval elements `[left, right]` with ascending endpoint coordinates.
    Intervals(Vec<[usize; 2]>),
    /// Counterclockwise triangles with the reference edge between the first
    /// two local vertices.
    Triangles(Vec<[usize; 3]>),
}

/// Boundary facets: endpoint vertices in 1D, edges in 2D.
#[derive(Debug, Clone)]
pub enum BoundaryFacets {
    Vertices(Vec<usize>),
    /// Edges as sorted vertex index pairs.
    Edges(Vec<[usize; 2]>),
}

/// A conforming simplicial mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    /// Vertex coordinates; 1D meshes use only the first component.
    pub vertices: Vec<[f64; 2]>,
    /// Element connectivity.
    pub cells: Cells,
    /// Bisection generation per element (0 on initial meshes).
    pub generations: Vec<u32>,
    /// Boundary facets.
    pub boundary: BoundaryFacets,
}

/// How a refined mesh relates to the mesh it came from.
#[derive(Debug, Clone)]
pub struct RefinementRelation {
    /// For every fine element, the index of the coarse element containing it
    /// (the element itself when it was not refined).
    pub parent_of: Vec<usize>,
    /// Coarse elements that were bisected (marked or forced by closure),
    /// ascending.
    pub refined: Vec<usize>,
}

/// Mesh quality summary; `h` is `measure^(1/dim)`.
#[derive(Debug, Clone, Copy)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    /// Smallest interior angle in radians (2D only).
    pub min_angle: Option<f64>,
}

/// An edge of a 2D mesh together with its adjacent elements.
#[derive(Debug, Clone, Copy)]
pub struct MeshEdge {
    /// Endpoint vertex indices, ascending.
    pub vertices: [usize; 2],
    /// First element discovered along this edge.
    pub left: usize,
    /// Second adjacent element; `None` on the boundary.
    pub right: Option<usize>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Spatial dimension (1 or 2).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A cheap structural fingerprint (FNV-1a over coordinates and
    /// connectivity), used to bind derived data to the mesh it came from.
    pub fn fingerprint(&self) -> u64 {
        fn eat(h: &mut u64, bytes: &[u8]) {
            for &b in bytes {
                *h ^= b as u64;
                *h = h.wrapping_mul(0x100_0000_01b3);
            }
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        eat(&mut h, &(self.dim as u64).to_le_bytes());
        for v in &self.vertices {
            eat(&mut h, &v[0].to_le_bytes());
            eat(&mut h, &v[1].to_le_bytes());
        }
        for t in 0..self.n_elements() {
            for &v in self.element_vertices(t) {
                eat(&mut h, &(v as u64).to_le_bytes());
            }
        }
        h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        match &self.cells {
            Cells::Intervals(e) => e.len(),
            Cells::Triangles(e) => e.len(),
        }
    }

    /// Vertex indices of element `t`.
    pub fn element_vertices(&self, t: usize) -> &[usize] {
        match &self.cells {
            Cells::Intervals(e) => &e[t][..],
            Cells::Triangles(e) => &e[t][..],
        }
    }

    /// Length (1D) or area (2D) of element `t`; positive on valid meshes.
    pub fn element_measure(&self, t: usize) -> f64 {
        match &self.cells {
            Cells::Intervals(e) => {
                let [a, b] = e[t];
                self.vertices[b][0] - self.vertices[a][0]
            }
            Cells::Triangles(e) => {
                let [a, b, c] = e[t];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
            }
        }
    }

    /// Local mesh size `h_T = |T|^(1/dim)` of element `t`.
    pub fn element_h(&self, t: usize) -> f64 {
        let m = self.element_measure(t);
        match self.dim {
            1 => m,
            _ => m.sqrt(),
        }
    }

    /// Boundary vertex indices (unique, ascending).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v = match &self.boundary {
            BoundaryFacets::Vertices(list) => list.clone(),
            BoundaryFacets::Edges(list) => list.iter().flatten().copied().collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }

    /// All edges of a 2D mesh with element adjacency, in deterministic
    /// first-discovery order (elements ascending, local edges in order
    /// `(0,1), (1,2), (2,0)`).
    pub fn edge_adjacency(&self) -> Vec<MeshEdge> {
        let tris = match &self.cells {
            Cells::Triangles(t) => t,
            Cells::Intervals(_) => return Vec::new(),
        };
        let mut edges: Vec<MeshEdge> = Vec::with_capacity(3 * tris.len() / 2 + 2);
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * tris.len());
        for (t, tri) in tris.iter().enumerate() {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = edge_key(a, b);
                match index.get(&key) {
                    Some(&e) => edges[e].right = Some(t),
                    None => {
                        index.insert(key, edges.len());
                        edges.push(MeshEdge {
                            vertices: [key.0, key.1],
                            left: t,
                            right: None,
                        });
                    }
                }
            }
        }
        edges
    }

    /// Quality measures of the current mesh.
    pub fn quality(&self) -> MeshQuality {
        let n = self.n_elements();
        let mut h_max = f64::MIN;
        let mut h_min = f64::MAX;
        for t in 0..n {
            let h = self.element_h(t);
            h_max = h_max.max(h);
            h_min = h_min.min(h);
        }
        let min_angle = match &self.cells {
            Cells::Intervals(_) => None,
            Cells::Triangles(tris) => {
                let mut best = f64::MAX;
                for tri in tris {
                    for k in 0..3 {
                        let p = self.vertices[tri[k]];
                        let q = self.vertices[tri[(k + 1) % 3]];
                        let r = self.vertices[tri[(k + 2) % 3]];
                        let u = [q[0] - p[0], q[1] - p[1]];
                        let v = [r[0] - p[0], r[1] - p[1]];
                        let dot = u[0] * v[0] + u[1] * v[1];
                        let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                        let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                        let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
                        best = best.min(cos.acos());
                    }
                }
                Some(best)
            }
        };
        MeshQuality {
            h_max,
            h_min,
            min_angle,
        }
    }

    /// Structural validation: index ranges, positive measures, conformity
    /// (interior facets shared by exactly two elements, boundary facets by
    /// exactly one and listed as such).
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.n_vertices();
        let fail = |msg: String| Err(MeshError::Invalid(msg));
        for (i, v) in self.vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return fail(format!("vertex {i} has non-finite coordinates"));
            }
        }
        for t in 0..self.n_elements() {
            if self.element_vertices(t).iter().any(|&v| v >= nv) {
                return fail(format!("element {t} references a missing vertex"));
            }
            if self.element_measure(t) <= 0.0 {
                return fail(format!("element {t} has non-positive measure"));
            }
        }
        match (&self.cells, &self.boundary) {
            (Cells::Intervals(els), BoundaryFacets::Vertices(bnd)) => {
                let mut count = vec![0usize; nv];
                for e in els {
                    count[e[0]] += 1;
                    count[e[1]] += 1;
                }
                let mut expected: Vec<usize> = (0..nv).filter(|&v| count[v] == 1).collect();
                if count.iter().any(|&c| c == 0 || c > 2) {
                    return fail("1D vertex shared by zero or more than two elements".into());
                }
                let mut listed = bnd.clone();
                listed.sort_unstable();
                expected.sort_unstable();
                if listed != expected {
                    return fail("boundary vertex list does not match element incidence".into());
                }
            }
            (Cells::Triangles(_), BoundaryFacets::Edges(bnd)) => {
                let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
                for e in self.edge_adjacency() {
                    let n = if e.right.is_some() { 2 } else { 1 };
                    counts.insert((e.vertices[0], e.vertices[1]), n);
                }
                let mut boundary_edges: Vec<(usize, usize)> = counts
                    .iter()
                    .filter(|(_, &c)| c == 1)
                    .map(|(&k, _)| k)
                    .collect();
                boundary_edges.sort_unstable();
                let mut listed: Vec<(usize, usize)> =
                    bnd.iter().map(|e| edge_key(e[0], e[1])).collect();
                listed.sort_unstable();
                if listed != boundary_edges {
                    return fail("boundary edge list does not match element incidence".into());
                }
            }
            _ => return fail("cell/boundary dimension mismatch".into()),
        }
        Ok(())
    }

    /// Bisect all `marked` elements and restore conformity by minimal
    /// closure. Returns the refined mesh together with the parent map.
    ///
    /// Marked indices may repeat and come in any order; out-of-range indices
    /// are an error. With `marked` empty, the mesh is returned unchanged.
    pub fn refine(&self, marked: &[usize]) -> Result<(Mesh, RefinementRelation), MeshError> {
        let n = self.n_elements();
        for &t in marked {
            if t >= n {
                return Err(MeshError::ElementOutOfRange {
                    index: t,
                    n_elements: n,
                });
            }
        }
        let mut is_marked = vec![false; n];
        for &t in marked {
            is_marked[t] = true;
        }
        match &self.cells {
            Cells::Intervals(_) => Ok(self.refine_1d(&is_marked)),
            Cells::Triangles(_) => Ok(self.refine_2d(&is_marked)),
        }
    }

    /// Bisect every element (refine with all elements marked).
    pub fn uniform_refine(&self) -> (Mesh, RefinementRelation) {
        let all: Vec<usize> = (0..self.n_elements()).collect();
        self.refine(&all).expect("uniform marking is always valid")
    }

    fn refine_1d(&self, is_marked: &[bool]) -> (Mesh, RefinementRelation) {
        let els = match &self.cells {
            Cells::Intervals(e) => e,
            _ => unreachable!(),
        };
        let mut vertices = self.vertices.clone();
        let mut new_els = Vec::with_capacity(els.len() + is_marked.iter().filter(|&&m| m).count());
        let mut generations = Vec::with_capacity(new_els.capacity());
        let mut parent_of = Vec::with_capacity(new_els.capacity());
        let mut refined = Vec::new();
        for (t, e) in els.iter().enumerate() {
            if is_marked[t] {
                let mid = 0.5 * (vertices[e[0]][0] + vertices[e[1]][0]);
                let m = vertices.len();
                vertices.push([mid, 0.0]);
                new_els.push([e[0], m]);
                new_els.push([m, e[1]]);
                generations.push(self.generations[t] + 1);
                generations.push(self.generations[t] + 1);
                parent_of.push(t);
                parent_of.push(t);
                refined.push(t);
            } else {
                new_els.push(*e);
                generations.push(self.generations[t]);
                parent_of.push(t);
            }
        }
        let mesh = Mesh {
            dim: 1,
            vertices,
            cells: Cells::Intervals(new_els),
            generations,
            boundary: self.boundary.clone(),
        };
        (mesh, RefinementRelation { parent_of, refined })
    }

    fn refine_2d(&self, is_marked: &[bool]) -> (Mesh, RefinementRelation) {
        let tris = match &self.cells {
            Cells::Triangles(t) => t,
            _ => unreachable!(),
        };
        // Phase 1: mark the reference edges of marked elements, then close:
        // whenever any edge of an element is marked, its reference edge must
        // be marked too. The fixpoint exists because marking only grows.
        let mut marked_edges: HashMap<(usize, usize), bool> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            if is_marked[t] {
                marked_edges.insert(edge_key(tri[0], tri[1]), true);
            }
        }
        loop {
            let mut changed = false;
            for tri in tris {
                let refk = edge_key(tri[0], tri[1]);
                if marked_edges.contains_key(&refk) {
                    continue;
                }
                let any = marked_edges.contains_key(&edge_key(tri[1], tri[2]))
                    || marked_edges.contains_key(&edge_key(tri[2], tri[0]));
                if any {
                    marked_edges.insert(refk, true);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        // Phase 2: create one midpoint vertex per marked edge, in
        // deterministic element/local-edge order.
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in tris {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = edge_key(a, b);
                if marked_edges.contains_key(&key) && !midpoint.contains_key(&key) {
                    let pa = self.vertices[key.0];
                    let pb = self.vertices[key.1];
                    let idx = vertices.len();
                    vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    midpoint.insert(key, idx);
                }
            }
        }
        // Phase 3: emit children. With the closure property, the possible
        // patterns per element are: nothing, reference edge only, reference
        // edge plus one or both remaining edges.
        let mut new_tris: Vec<[usize; 3]> = Vec::with_capacity(tris.len() * 2);
        let mut generations = Vec::with_capacity(tris.len() * 2);
        let mut parent_of = Vec::with_capacity(tris.len() * 2);
        let mut refined = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            let [a, b, c] = *tri;
            let g = self.generations[t];
            let z = midpoint.get(&edge_key(a, b)).copied();
            let w = midpoint.get(&edge_key(b, c)).copied();
            let y = midpoint.get(&edge_key(c, a)).copied();
            let mut push = |tri: [usize; 3], gen: u32| {
                new_tris.push(tri);
                generations.push(gen);
                parent_of.push(t);
            };
            match (z, w, y) {
                (None, None, None) => push(*tri, g),
                (Some(z), w, y) => {
                    refined.push(t);
                    // Left child (c, a, z), possibly split at y = mid(c, a).
                    match y {
                        None => push([c, a, z], g + 1),
                        Some(y) => {
                            push([z, c, y], g + 2);
                            push([a, z, y], g + 2);
                        }
                    }
                    // Right child (b, c, z), possibly split at w = mid(b, c).
                    match w {
                        None => push([b, c, z], g + 1),
                        Some(w) => {
                            push([z, b, w], g + 2);
                            push([c, z, w], g + 2);
                        }
                    }
                }
                _ => unreachable!("closure marks the reference edge first"),
            }
        }
        // Split boundary edges that received a midpoint.
        let old_boundary = match &self.boundary {
            BoundaryFacets::Edges(e) => e,
            _ => unreachable!(),
        };
        let mut boundary = Vec::with_capacity(old_boundary.len());
        for e in old_boundary {
            let key = edge_key(e[0], e[1]);
            match midpoint.get(&key) {
                Some(&m) => {
                    boundary.push([e[0], m]);
                    boundary.push([m, e[1]]);
                }
                None => boundary.push(*e),
            }
        }
        let mesh = Mesh {
            dim: 2,
            vertices,
            cells: Cells::Triangles(new_tris),
            generations,
            boundary: BoundaryFacets::Edges(boundary),
        };
        (mesh, RefinementRelation { parent_of, refined })
    }
}

/// A uniform partition of `[a, b]` into `n` intervals.
pub fn initial_mesh_1d(a: f64, b: f64, n: usize) -> Result<Mesh, MeshError> {
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(MeshError::InvalidInterval { a, b });
    }
    if n == 0 {
        return Err(MeshError::Empty);
    }
    let vertices: Vec<[f64; 2]> = (0..=n)
        .map(|i| [a + (b - a) * (i as f64 / n as f64), 0.0])
        .collect();
    let cells: Vec<[usize; 2]> = (0..n).map(|i| [i, i + 1]).collect();
    Ok(Mesh {
        dim: 1,
        vertices,
        cells: Cells::Intervals(cells),
        generations: vec![0; n],
        boundary: BoundaryFacets::Vertices(vec![0, n]),
    })
}

/// The unit square split into two triangles along the diagonal from `(0,0)`
/// to `(1,1)`; the diagonal is the common reference edge of both triangles,
/// so the first bisections refine it compatibly.
pub fn initial_mesh_unit_square() -> Mesh {
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    // Counterclockwise, reference edge = diagonal (vertices 2-0 and 0-2).
    let cells = vec![[2, 0, 1], [0, 2, 3]];
    let boundary = vec![[0, 1], [1, 2], [2, 3], [3, 0]];
    Mesh {
        dim: 2,
        vertices,
        cells: Cells::Triangles(cells),
        generations: vec![0, 0],
        boundary: BoundaryFacets::Edges(boundary),
    }
}

/// Quality measures of `mesh`; thin wrapper over [`Mesh::quality`].
pub fn mesh_quality(mesh: &Mesh) -> MeshQuality {
    mesh.quality()
}
