//! Regular sample grids, their Chebyshev-neighborhood graphs and sparse Laplacians.
//!
//! Vertices of a `d`-dimensional grid with `m` points per axis are flattened in
//! row-major (lexicographic) order. Two vertices are adjacent when their index
//! tuples differ by at most `k` in every coordinate.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A regular `m^d` grid on `[0, 1]^d` with neighborhood radius `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    d: usize,
    m: usize,
    k: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(d: usize, m: usize, k: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSpec("dimension d must be positive".into()));
        }
        if m < 2 {
            return Err(Error::InvalidSpec(format!("need m >= 2 points per axis, got {m}")));
        }
        if k == 0 {
            return Err(Error::InvalidSpec("neighborhood radius k must be positive".into()));
        }
        if k >= m {
            return Err(Error::InvalidSpec(format!("radius k={k} must be smaller than m={m}")));
        }
        let n = (0..d)
            .try_fold(1usize, |acc, _| acc.checked_mul(m))
            .ok_or_else(|| Error::InvalidSpec(format!("m^d overflows for m={m}, d={d}")))?;
        Ok(Self { d, m, k, n })
    }

    /// Univariate grid with `n` samples.
    pub fn line(n: usize, k: usize) -> Result<Self> {
        Self::new(1, n, k)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Same grid with a different neighborhood radius.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.d, self.m, k)
    }

    /// Per-axis index tuple of a flat vertex index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.m;
            flat /= self.m;
        }
        idx
    }

    /// Grid coordinates `(i - 1)/(m - 1)` per axis of a flat vertex index.
    pub fn coords<T: Real>(&self, flat: usize) -> Vec<T> {
        let denom = T::from_count(self.m - 1);
        self.multi_index(flat)
            .into_iter()
            .map(|i| T::from_count(i) / denom)
            .collect()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.d];
        for a in (0..self.d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.m;
        }
        s
    }
}

/// Undirected, unweighted neighborhood graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl NeighborGraph {
    /// Builds a graph from an arbitrary edge list. Pairs are normalized to
    /// `(min, max)`, sorted and deduplicated; self loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) out of range for n={n}")));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self loop at vertex {a}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let mut degrees = vec![0; n];
        for &(a, b) in &list {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        Ok(Self { n, edges: list, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Number of connected components (union-find).
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
                count -= 1;
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components() == 1
    }
}

/// Builds the `k`-Chebyshev-neighborhood graph of a grid.
pub fn build_graph(spec: &GridSpec) -> NeighborGraph {
    let (d, m, k, n) = (spec.d, spec.m, spec.k as isize, spec.n);
    let strides = spec.strides();
    let side = 2 * spec.k + 1;
    let offset_count = side.pow(d as u32);

    // Offsets in lexicographic order; in-bounds neighbors then come out with
    // increasing flat index.
    let offsets: Vec<Vec<isize>> = (0..offset_count)
        .map(|mut c| {
            let mut off = vec![0isize; d];
            for slot in off.iter_mut().rev() {
                *slot = (c % side) as isize - k;
                c /= side;
            }
            off
        })
        .filter(|off| off.iter().any(|&o| o != 0))
        .collect();

    let mut edges = Vec::with_capacity(n * offsets.len() / 2);
    let mut degrees = vec![0usize; n];
    let mut idx = vec![0usize; d];
    for i in 0..n {
        let mut rem = i;
        for a in (0..d).rev() {
            idx[a] = rem % m;
            rem /= m;
        }
        for off in &offsets {
            let mut j = 0usize;
            let mut inside = true;
            for a in 0..d {
                let c = idx[a] as isize + off[a];
                if c < 0 || c >= m as isize {
                    inside = false;
                    break;
                }
                j += c as usize * strides[a];
            }
            if !inside {
                continue;
            }
            degrees[i] += 1;
            if j > i {
                edges.push((i, j));
            }
        }
    }
    NeighborGraph { n, edges, degrees }
}

/// Unweighted graph Laplacian `L = D - A` in compressed sparse row form.
///
/// Off-diagonal values are implicitly `-1` and the diagonal is the vertex
/// degree, so only the adjacency structure is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseLaplacian {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    degree: Vec<usize>,
}

/// Builds the Laplacian of a connected graph.
pub fn build_laplacian(graph: &NeighborGraph) -> Result<SparseLaplacian> {
    let components = graph.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let n = graph.n;
    let mut row_ptr = vec![0usize; n + 1];
    for &(a, b) in &graph.edges {
        row_ptr[a + 1] += 1;
        row_ptr[b + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let mut fill = row_ptr.clone();
    let mut cols = vec![0usize; row_ptr[n]];
    for &(a, b) in &graph.edges {
        cols[fill[a]] = b;
        fill[a] += 1;
        cols[fill[b]] = a;
        fill[b] += 1;
    }
    for i in 0..n {
        cols[row_ptr[i]..row_ptr[i + 1]].sort_unstable();
    }
    let degree = (0..n).map(|i| row_ptr[i + 1] - row_ptr[i]).collect();
    Ok(SparseLaplacian { row_ptr, cols, degree })
}

impl SparseLaplacian {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn max_degree(&self) -> usize {
        self.degree.iter().copied().max().unwrap_or(0)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Number of stored off-diagonal entries (twice the edge count).
    pub fn nnz_offdiag(&self) -> usize {
        self.cols.len()
    }

    /// Entry `L[i][j]`.
    pub fn get(&self, i: usize, j: usize) -> i64 {
        if i == j {
            self.degree[i] as i64
        } else if self.neighbors(i).binary_search(&j).is_ok() {
            -1
        } else {
            0
        }
    }

    /// Dense row-major copy, for small problems and tests.
    pub fn to_dense<T: Real>(&self) -> Vec<T> {
        let n = self.n();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            out[i * n + i] = T::from_count(self.degree[i]);
            for &j in self.neighbors(i) {
                out[i * n + j] = -T::one();
            }
        }
        out
    }

    /// `y = scale * L x + shift * x`.
    pub fn apply_scaled<T: Real>(&self, scale: T, shift: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n());
        debug_assert_eq!(y.len(), self.n());
        for (i, yi) in y.iter_mut().enumerate() {
            let xi = x[i];
            let mut acc = T::from_count(self.degree[i]) * xi;
            for &j in self.neighbors(i) {
                acc = acc - x[j];
            }
            *yi = scale * acc + shift * xi;
        }
    }

    /// `y = L x`.
    pub fn apply<T: Real>(&self, x: &[T], y: &mut [T]) {
        self.apply_scaled(T::one(), T::zero(), x, y)
    }

    /// `xᵀ L x = Σ_{i<j adjacent} (x_i - x_j)²`.
    pub fn quadform<T: Real>(&self, x: &[T]) -> Result<T> {
        if x.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), actual: x.len() });
        }
        let mut acc = T::zero();
        for i in 0..self.n() {
            for &j in self.neighbors(i).iter().filter(|&&j| j > i) {
                let diff = x[i] - x[j];
                acc = acc + diff * diff;
            }
        }
        Ok(acc)
    }
}

/// Closed-form spectral estimates for the grid Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Gershgorin bound `2((2k+1)^d - 1)` on the largest eigenvalue.
    pub lambda_max_upper: f64,
    /// `4 κ sin²(π / 2n)` with `κ = (k+1)^d - 1`.
    pub fiedler_lower: f64,
}

/// Largest possible vertex degree, `(2k+1)^d - 1`.
pub fn max_grid_degree(spec: &GridSpec) -> f64 {
    ((2 * spec.k + 1) as f64).powi(spec.d as i32) - 1.0
}

/// Smallest vertex degree, `(k+1)^d - 1`, attained at the grid corners.
pub fn min_grid_degree(spec: &GridSpec) -> f64 {
    ((spec.k + 1) as f64).powi(spec.d as i32) - 1.0
}

pub fn spectral_bounds(spec: &GridSpec) -> SpectralBounds {
    let kappa = min_grid_degree(spec);
    let s = (std::f64::consts::PI / (2.0 * spec.n as f64)).sin();
    SpectralBounds {
        lambda_max_upper: 2.0 * max_grid_degree(spec),
        fiedler_lower: 4.0 * kappa * s * s,
    }
}
