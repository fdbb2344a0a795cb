//! Jacobi-preconditioned conjugate gradients for shifted Laplacian systems.

use crate::error::{Error, Result};
use crate::grid_graph::SparseLaplacian;
use crate::scalar::{dot, norm, Real};

/// Operator `scale * L + shift * I`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedLaplacian<'a, T> {
    pub laplacian: &'a SparseLaplacian,
    pub scale: T,
    pub shift: T,
}

impl<T: Real> ShiftedLaplacian<'_, T> {
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        self.laplacian.apply_scaled(self.scale, self.shift, x, y);
    }

    fn diagonal(&self, i: usize) -> T {
        self.scale * T::from_count(self.laplacian.degree(i)) + self.shift
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions<T> {
    pub rel_tol: T,
    pub max_iter: usize,
    /// Solve on the mean-zero subspace; required when the operator is singular
    /// (`shift == 0`).
    pub deflate_constant: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn remove_mean<T: Real>(v: &mut [T]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().copied().sum::<T>() / T::from_count(v.len());
    v.iter_mut().for_each(|x| *x = *x - mean);
}

/// Solves `A x = b`, using the incoming `x` as the initial guess.
pub fn conjugate_gradient<T: Real>(
    op: &ShiftedLaplacian<'_, T>,
    b: &[T],
    x: &mut [T],
    opts: &CgOptions<T>,
) -> Result<CgStats> {
    let n = op.laplacian.n();
    if b.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: b.len() });
    }
    if x.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: x.len() });
    }

    let mut rhs = b.to_vec();
    if opts.deflate_constant {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let b_norm = norm(&rhs);
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgStats { iterations: 0, rel_residual: 0.0 });
    }

    let inv_diag: Vec<T> = (0..n)
        .map(|i| {
            let d = op.diagonal(i);
            if d > T::zero() {
                T::one() / d
            } else {
                T::one()
            }
        })
        .collect();

    let mut ax = vec![T::zero(); n];
    op.apply(x, &mut ax);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let precondition = |r: &[T], z: &mut Vec<T>| {
        z.clear();
        z.extend(r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di));
        if opts.deflate_constant {
            remove_mean(z);
        }
    };
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let target = opts.rel_tol * b_norm;

    let mut res = norm(&r);
    let mut it = 0;
    while res > target {
        if it >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: (res / b_norm).to_f64_lossy(),
            });
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: (res / b_norm).to_f64_lossy(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r);
        it += 1;
    }
    if opts.deflate_constant {
        remove_mean(x);
    }
    Ok(CgStats { iterations: it, rel_residual: (res / b_norm).to_f64_lossy() })
}
