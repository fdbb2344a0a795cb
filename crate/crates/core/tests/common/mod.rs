//! Dense reference implementations used as independent oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use modulo_denoise::grid_graph::SparseLaplacian;

pub fn dense_laplacian(lap: &SparseLaplacian) -> DMatrix<f64> {
    let n = lap.n();
    DMatrix::from_row_slice(n, n, &lap.to_dense::<f64>())
}

/// Ascending eigenvalues and matching eigenvectors (columns).
pub fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

#[derive(Debug, Clone)]
pub struct DenseTrs {
    pub gbar: Vec<f64>,
    pub mu: f64,
    pub hard: bool,
    pub objective: f64,
    /// Third-smallest eigenvalue of H (= λ β₂(L)).
    pub lambda3_h: f64,
}

pub fn dense_objective(l: &DMatrix<f64>, lambda: f64, zbar: &[f64], gbar: &[f64]) -> f64 {
    let n = l.nrows();
    let re = DVector::from_column_slice(&gbar[..n]);
    let im = DVector::from_column_slice(&gbar[n..]);
    let quad = lambda * (re.dot(&(l * &re)) + im.dot(&(l * &im)));
    quad - 2.0 * gbar.iter().zip(zbar).map(|(a, b)| a * b).sum::<f64>()
}

/// Solves min ḡᵀHḡ − 2ḡᵀz̄ s.t. ‖ḡ‖² = n through the explicit eigen-expansion
/// of H = diag(λL, λL) and bisection on the secular equation.
pub fn dense_trs(lap: &SparseLaplacian, lambda: f64, zbar: &[f64], perp_tol: f64) -> DenseTrs {
    let n = lap.n();
    let l = dense_laplacian(lap);
    let (beta, u) = sorted_eigen(l.clone());
    let zr = DVector::from_column_slice(&zbar[..n]);
    let zi = DVector::from_column_slice(&zbar[n..]);
    let cr: Vec<f64> = (0..n).map(|j| u.column(j).dot(&zr)).collect();
    let ci: Vec<f64> = (0..n).map(|j| u.column(j).dot(&zi)).collect();
    let h_eig: Vec<f64> = beta.iter().map(|b| (lambda * b).max(0.0)).collect();
    let null: Vec<bool> = h_eig.iter().map(|&e| e <= 1e-11).collect();
    let null_mass: f64 = (0..n).filter(|&j| null[j]).map(|j| cr[j] * cr[j] + ci[j] * ci[j]).sum();
    let phi = |mu: f64| -> f64 {
        (0..n)
            .map(|j| 4.0 * (cr[j] * cr[j] + ci[j] * ci[j]) / (2.0 * h_eig[j] + mu).powi(2))
            .sum()
    };
    let nf = n as f64;
    let assemble = |coef: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for j in 0..n {
            let s = coef(j);
            re += u.column(j) * (s * cr[j]);
            im += u.column(j) * (s * ci[j]);
        }
        re.iter().chain(im.iter()).copied().collect()
    };

    let perpendicular = null_mass <= perp_tol * nf;
    let (gbar, mu, hard) = if perpendicular {
        let phi0: f64 = (0..n)
            .filter(|&j| !null[j])
            .map(|j| (cr[j] * cr[j] + ci[j] * ci[j]) / (h_eig[j] * h_eig[j]))
            .sum();
        if phi0 <= nf {
            let mut g = assemble(&|j| if null[j] { 0.0 } else { 1.0 / h_eig[j] });
            let theta = (nf - phi0).sqrt();
            for v in g[..n].iter_mut() {
                *v += theta / nf.sqrt();
            }
            (g, 0.0, true)
        } else {
            let mu = bisect(&phi, 0.0, 2.0, nf);
            (assemble(&|j| 2.0 / (2.0 * h_eig[j] + mu)), mu, false)
        }
    } else {
        let mu = bisect(&phi, 1e-300, 2.0, nf);
        (assemble(&|j| 2.0 / (2.0 * h_eig[j] + mu)), mu, false)
    };
    let objective = dense_objective(&l, lambda, zbar, &gbar);
    DenseTrs { gbar, mu, hard, objective, lambda3_h: lambda * beta[1] }
}

fn bisect(phi: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    if phi(hi) >= target {
        return hi;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Deterministic xorshift stream for test inputs.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }
}
