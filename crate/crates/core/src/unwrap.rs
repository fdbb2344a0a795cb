//! Stage 2: recover real samples (up to a global shift) from residues.

use crate::angular::Mod1Samples;
use crate::error::{Error, Result};
use crate::grid_graph::{build_laplacian, GridSpec, NeighborGraph};
use crate::linalg::{conjugate_gradient, CgOptions, ShiftedLaplacian};
use crate::scalar::Real;

pub const DEFAULT_ZETA: f64 = 0.5;

/// Relative residual for the normal-equation solve.
pub const OLS_REL_TOL: f64 = 1e-10;

/// Thresholded sign: `−1` if `t ≥ ζ`, `+1` if `t ≤ −ζ`, else `0`.
#[inline]
pub fn sign_zeta<T: Real>(t: T, zeta: T) -> i32 {
    if t >= zeta {
        -1
    } else if t <= -zeta {
        1
    } else {
        0
    }
}

fn check_zeta<T: Real>(zeta: T) -> Result<()> {
    if zeta > T::zero() && zeta < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("zeta {zeta} outside (0, 1)")))
    }
}

/// Sequential quotient tracking along a 1-D chain; `f̂_1 = r_1`.
pub fn quotient_tracker<T: Real>(r: &Mod1Samples<T>, spec: &GridSpec, zeta: T) -> Result<Vec<T>> {
    if spec.d() != 1 {
        return Err(Error::UnsupportedDimension(spec.d()));
    }
    if r.len() != spec.n() {
        return Err(Error::LengthMismatch { expected: spec.n(), actual: r.len() });
    }
    check_zeta(zeta)?;
    let v = r.values();
    let mut out = Vec::with_capacity(v.len());
    let mut q = 0i64;
    for (i, &ri) in v.iter().enumerate() {
        if i > 0 {
            q += sign_zeta(ri - v[i - 1], zeta) as i64;
        }
        out.push(T::lit(q as f64) + ri);
    }
    Ok(out)
}

/// Edge right-hand side `b_ij = sign_ζ(r_i − r_j) + r_i − r_j` for each
/// edge `(i, j)` of the graph, in edge-list order.
pub fn edge_rhs<T: Real>(r: &Mod1Samples<T>, graph: &NeighborGraph, zeta: T) -> Vec<T> {
    let v = r.values();
    graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let t = v[i] - v[j];
            T::lit(sign_zeta(t, zeta) as f64) + t
        })
        .collect()
}

/// Minimum-norm least-squares solution of `f̂_i − f̂_j = b_ij` over all
/// edges; the result has zero mean.
pub fn ols_unwrap<T: Real>(r: &Mod1Samples<T>, graph: &NeighborGraph, zeta: T) -> Result<Vec<T>> {
    let n = graph.n();
    if r.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: r.len() });
    }
    check_zeta(zeta)?;
    let lap = build_laplacian(graph)?;
    let b = edge_rhs(r, graph, zeta);
    // Tᵀ b with T the signed edge-vertex incidence matrix.
    let mut rhs = vec![T::zero(); n];
    for (&(i, j), &bij) in graph.edges().iter().zip(&b) {
        rhs[i] = rhs[i] + bij;
        rhs[j] = rhs[j] - bij;
    }
    let op = ShiftedLaplacian { laplacian: &lap, scale: T::one(), shift: T::zero() };
    let opts = CgOptions { rel_tol: T::lit(OLS_REL_TOL), max_iter: 20 * n.max(10), deflate_constant: true };
    let mut f = vec![T::zero(); n];
    conjugate_gradient(&op, &rhs, &mut f, &opts)?;
    Ok(f)
}

/// `‖T f − b‖₂` for the edge system.
pub fn edge_residual<T: Real>(f: &[T], r: &Mod1Samples<T>, graph: &NeighborGraph, zeta: T) -> T {
    graph
        .edges()
        .iter()
        .zip(edge_rhs(r, graph, zeta))
        .map(|(&(i, j), b)| (f[i] - f[j] - b).powi(2))
        .sum::<T>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnwrapMethod {
    QuotientTracker,
    Ols,
}

impl std::str::FromStr for UnwrapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qt" => Ok(Self::QuotientTracker),
            "ols" => Ok(Self::Ols),
            other => Err(Error::InvalidArgument(format!("unknown unwrap method '{other}' (expected qt or ols)"))),
        }
    }
}

/// Dispatches to [`quotient_tracker`] or [`ols_unwrap`] on the grid graph.
pub fn unwrap<T: Real>(r: &Mod1Samples<T>, spec: &GridSpec, zeta: T, method: UnwrapMethod) -> Result<Vec<T>> {
    match method {
        UnwrapMethod::QuotientTracker => quotient_tracker(r, spec, zeta),
        UnwrapMethod::Ols => ols_unwrap(r, &crate::grid_graph::build_graph(spec), zeta),
    }
}
