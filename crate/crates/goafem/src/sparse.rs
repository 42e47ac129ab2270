//! A minimal compressed sparse row matrix, sufficient for symmetric
//! positive definite finite element systems.
//!
//! Matrices are built from triplet lists (duplicate entries are summed),
//! support matrix–vector products, submatrix extraction for essential
//! boundary conditions, and entry-wise addition of two matrices with
//! different sparsity patterns.

/// Compressed sparse row matrix with square or rectangular shape.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from COO triplets; duplicates are summed, columns sorted.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> CsrMatrix {
        let mut per_row: Vec<usize> = vec![0; n_rows];
        for &(r, c, _) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of shape");
            per_row[r] += 1;
        }
        let mut row_start = vec![0usize; n_rows + 1];
        for r in 0..n_rows {
            row_start[r + 1] = row_start[r] + per_row[r];
        }
        // Bucket triplets by row, then sort and merge each row.
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut cursor = row_start.clone();
        for &(r, c, v) in triplets {
            let k = cursor[r];
            cols[k] = c;
            vals[k] = v;
            cursor[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n_rows {
            scratch.clear();
            for k in row_start[r]..row_start[r + 1] {
                scratch.push((cols[k], vals[k]));
            }
            // Stable sort: duplicates keep insertion order, so symmetric
            // contributions accumulate identically for (i, j) and (j, i).
            scratch.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < scratch.len() {
                let c = scratch[i].0;
                let mut sum = 0.0;
                while i < scratch.len() && scratch[i].0 == c {
                    sum += scratch[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
        y
    }

    /// Entry (r, c), zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Extract the square submatrix on the index set `keep` (rows and
    /// columns), renumbering indices by their position in `keep`.
    /// `keep` must be ascending.
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let mut new_index = vec![usize::MAX; self.n_cols];
        for (i, &d) in keep.iter().enumerate() {
            new_index[d] = i;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &r in keep {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = new_index[self.col_idx[k]];
                if c != usize::MAX {
                    col_idx.push(c);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: keep.len(),
            n_cols: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Entry-wise sum of two matrices of equal shape (patterns may differ).
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        row_ptr.push(0);
        for r in 0..self.n_rows {
            let (mut i, hi_a) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut j, hi_b) = (other.row_ptr[r], other.row_ptr[r + 1]);
            while i < hi_a || j < hi_b {
                let ca = if i < hi_a { self.col_idx[i] } else { usize::MAX };
                let cb = if j < hi_b { other.col_idx[j] } else { usize::MAX };
                if ca == cb {
                    col_idx.push(ca);
                    values.push(self.values[i] + other.values[j]);
                    i += 1;
                    j += 1;
                } else if ca < cb {
                    col_idx.push(ca);
                    values.push(self.values[i]);
                    i += 1;
                } else {
                    col_idx.push(cb);
                    values.push(other.values[j]);
                    j += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Dense copy, for small test matrices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r][self.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}
