//! Sphere-constrained quadratic (trust-region subproblem)
//!
//! ```text
//! minimize  ḡᵀ H ḡ − 2 ḡᵀ z̄   subject to  ‖ḡ‖² = n,     H = diag(λL, λL)
//! ```
//!
//! `H` is positive semi-definite and, for a connected graph and `λ > 0`, its
//! null space is spanned by `q1 = [1; 0]/√n` and `q2 = [0; 1]/√n`. Optimal
//! points satisfy `(2H + μ*I) ḡ = 2 z̄` with `μ* ≥ 0`. The multiplier is found
//! from the secular equation `φ(μ) = ‖2 (2H + μI)⁻¹ z̄‖² = n`, where every
//! evaluation of `φ` is a pair of matrix-free conjugate-gradient solves.
//!
//! Three regimes:
//! * `z̄` has a component along the null space: `φ` has a pole at zero and the
//!   root lies in `(0, 2]`.
//! * `z̄ ⟂ N(H)` and `φ(0) > n`: the root lies in `(0, 2 − 2λ₃(H)]`.
//! * `z̄ ⟂ N(H)` and `φ(0) ≤ n` (hard case): `μ* = 0` and
//!   `ḡ = H†z̄ + θ q1` with `θ = √(n − φ(0))`.

use log::debug;

use crate::angular::CircleEmbedding;
use crate::error::{Error, Result};
use crate::grid_graph::SparseLaplacian;
use crate::linalg::{conjugate_gradient, CgOptions, ShiftedLaplacian};
use crate::scalar::{dot, norm, norm_sq, Real};

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative threshold on `c1² + c2²` (times `n`) below which `z̄` is treated
/// as orthogonal to the null space of `H`.
pub const PERP_TOL: f64 = 1e-10;

const MAX_ROOT_ITERS: usize = 200;

#[derive(Debug, Clone)]
pub struct TrsProblem<'a, T> {
    laplacian: &'a SparseLaplacian,
    lambda: T,
    zbar: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrsCase {
    /// `z̄` not orthogonal to `N(H)`; unique root `μ* ∈ (0, 2]`.
    EasyNotPerp,
    /// `z̄ ⟂ N(H)` with `φ(0) > n`; unique root `μ* > 0`.
    PerpInterior,
    /// `z̄ ⟂ N(H)` with `φ(0) ≤ n`; `μ* = 0` plus a null-space component.
    HardCase,
}

#[derive(Debug, Clone)]
pub struct TrsSolution<T> {
    pub gbar: Vec<T>,
    pub mu_star: T,
    pub case_tag: TrsCase,
    /// `‖(2H + μ*I) ḡ − 2 z̄‖₂`.
    pub kkt_residual: T,
    /// `|‖ḡ‖² − n|`.
    pub norm_residual: T,
    pub objective: T,
    /// Secular-equation iterations (zero for closed-form cases).
    pub root_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport<T> {
    pub norm_gap: T,
    pub stationarity_residual: T,
    pub psd_margin: T,
}

impl<'a, T: Real> TrsProblem<'a, T> {
    /// `zbar` is the stacked `[Re; Im]` embedding of length `2n`.
    pub fn new(laplacian: &'a SparseLaplacian, lambda: T, zbar: Vec<T>) -> Result<Self> {
        let n = laplacian.n();
        if zbar.len() != 2 * n {
            return Err(Error::LengthMismatch { expected: 2 * n, actual: zbar.len() });
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { laplacian, lambda, zbar })
    }

    pub fn from_embedding(laplacian: &'a SparseLaplacian, lambda: T, z: &CircleEmbedding<T>) -> Result<Self> {
        Self::new(laplacian, lambda, z.stacked().to_vec())
    }

    pub fn n(&self) -> usize {
        self.laplacian.n()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn laplacian(&self) -> &'a SparseLaplacian {
        self.laplacian
    }

    pub fn zbar(&self) -> &[T] {
        &self.zbar
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() != 2 * self.n() {
            return Err(Error::LengthMismatch { expected: 2 * self.n(), actual: x.len() });
        }
        Ok(())
    }

    /// `(2H + μI) x` via two sparse Laplacian products.
    pub fn apply_shifted(&self, mu: T, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        let n = self.n();
        let two_lambda = self.lambda + self.lambda;
        let mut y = vec![T::zero(); 2 * n];
        let (xr, xi) = x.split_at(n);
        let (yr, yi) = y.split_at_mut(n);
        self.laplacian.apply_scaled(two_lambda, mu, xr, yr);
        self.laplacian.apply_scaled(two_lambda, mu, xi, yi);
        Ok(y)
    }

    /// `ḡᵀ H ḡ = λ (Reᵀ L Re + Imᵀ L Im)`.
    pub fn h_quadform(&self, gbar: &[T]) -> Result<T> {
        self.check_len(gbar)?;
        let (re, im) = gbar.split_at(self.n());
        Ok(self.lambda * (self.laplacian.quadform(re)? + self.laplacian.quadform(im)?))
    }

    /// `ḡᵀ H ḡ − 2 ḡᵀ z̄`.
    pub fn objective(&self, gbar: &[T]) -> Result<T> {
        let quad = self.h_quadform(gbar)?;
        Ok(quad - T::lit(2.0) * dot(gbar, &self.zbar))
    }

    /// Coordinates of `z̄` along `q1 = [1;0]/√n` and `q2 = [0;1]/√n`.
    pub fn null_coefficients(&self) -> (T, T) {
        let n = self.n();
        let root_n = T::from_count(n).sqrt();
        let c1 = self.zbar[..n].iter().copied().sum::<T>() / root_n;
        let c2 = self.zbar[n..].iter().copied().sum::<T>() / root_n;
        (c1, c2)
    }

    /// Whether `z̄` is (numerically) orthogonal to `N(H)`.
    pub fn is_perpendicular(&self) -> bool {
        let (c1, c2) = self.null_coefficients();
        c1 * c1 + c2 * c2 <= T::lit(PERP_TOL) * T::from_count(self.n())
    }

    fn cg_options(&self, tol: T, deflate: bool) -> CgOptions<T> {
        CgOptions {
            rel_tol: tol / T::lit(100.0),
            max_iter: 20 * self.n().max(1),
            deflate_constant: deflate,
        }
    }

    /// Solves `(2H + μI) x = rhs` blockwise. With `μ = 0` the solve is
    /// restricted to the range of `H`.
    fn solve_shifted(&self, mu: T, rhs: &[T], x: &mut [T], tol: T) -> Result<()> {
        let n = self.n();
        let deflate = mu == T::zero();
        let op = ShiftedLaplacian { laplacian: self.laplacian, scale: self.lambda + self.lambda, shift: mu };
        let opts = self.cg_options(tol, deflate);
        let (xr, xi) = x.split_at_mut(n);
        conjugate_gradient(&op, &rhs[..n], xr, &opts)?;
        conjugate_gradient(&op, &rhs[n..], xi, &opts)?;
        Ok(())
    }

    fn check_mu(&self, mu: T) -> Result<()> {
        if !(mu >= T::zero()) {
            return Err(Error::InvalidArgument(format!("shift mu must be >= 0, got {mu}")));
        }
        if mu == T::zero() && (self.lambda == T::zero() || !self.is_perpendicular()) {
            return Err(Error::InvalidArgument(
                "phi(0) is undefined unless lambda > 0 and z is orthogonal to N(H)".into(),
            ));
        }
        Ok(())
    }

    /// `ĝ(μ) = 2 (2H + μI)⁻¹ z̄`; at `μ = 0` this is `H†z̄`.
    pub fn g_of_mu(&self, mu: T, tol: T) -> Result<Vec<T>> {
        self.check_mu(mu)?;
        let mut x = vec![T::zero(); 2 * self.n()];
        let rhs: Vec<T> = self.zbar.iter().map(|&v| v + v).collect();
        self.solve_shifted(mu, &rhs, &mut x, tol)?;
        Ok(x)
    }

    /// `φ(μ) = ‖ĝ(μ)‖²`.
    pub fn phi(&self, mu: T) -> Result<T> {
        Ok(norm_sq(&self.g_of_mu(mu, T::lit(DEFAULT_TOL))?))
    }

    /// Solves the problem to tolerance `tol`.
    pub fn solve(&self, tol: T) -> Result<TrsSolution<T>> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let n = self.n();
        let n_t = T::from_count(n);
        let two = T::lit(2.0);

        if self.lambda == T::zero() {
            // H = 0: ĝ is z̄ scaled onto the sphere, μ* = 2.
            let scale = n_t.sqrt() / norm(&self.zbar);
            let gbar: Vec<T> = self.zbar.iter().map(|&v| v * scale).collect();
            return self.finish(gbar, two, TrsCase::EasyNotPerp, 0);
        }

        if self.is_perpendicular() {
            let g0 = self.g_of_mu(T::zero(), tol)?;
            let phi0 = norm_sq(&g0);
            if phi0 <= n_t {
                let theta = (n_t - phi0).max(T::zero()).sqrt();
                let shift = theta / n_t.sqrt();
                let mut gbar = g0;
                gbar[..n].iter_mut().for_each(|v| *v = *v + shift);
                debug!("trs hard case: phi(0) = {phi0}, theta = {theta}");
                return self.finish(gbar, T::zero(), TrsCase::HardCase, 0);
            }
            let (g, mu, iters) = self.secular_root(T::zero(), Some(g0), two, tol)?;
            return self.finish(g, mu, TrsCase::PerpInterior, iters);
        }

        let (c1, c2) = self.null_coefficients();
        let null_mass = c1 * c1 + c2 * c2;
        // φ(μ) ≥ 4 (c1² + c2²)/μ², so φ ≥ n to the left of this point.
        let lo = (two * (null_mass / n_t).sqrt()).min(two);
        let (g, mu, iters) = self.secular_root(lo, None, two, tol)?;
        self.finish(g, mu, TrsCase::EasyNotPerp, iters)
    }

    /// Safeguarded Newton on `ψ(μ) = φ(μ)^{-1/2} − n^{-1/2}`, which is
    /// increasing and concave, with bisection fallback.
    fn secular_root(&self, lo: T, g_lo: Option<Vec<T>>, hi: T, tol: T) -> Result<(Vec<T>, T, usize)> {
        let n_t = T::from_count(self.n());
        let target_gap = n_t * tol / T::lit(10.0);
        let inv_sqrt_n = T::one() / n_t.sqrt();
        let rhs: Vec<T> = self.zbar.iter().map(|&v| v + v).collect();

        let mut lo = lo;
        let mut hi = hi;
        let mut g = match g_lo {
            Some(g) => g,
            None => {
                let mut x = vec![T::zero(); 2 * self.n()];
                self.solve_shifted(lo, &rhs, &mut x, tol)?;
                x
            }
        };
        let mut mu = lo;
        let mut phi = norm_sq(&g);

        let phi_hi_check = |g_hi: &[T]| norm_sq(g_hi);
        if phi < n_t - target_gap {
            // Bracket violated at the left end; only possible through rounding.
            let mut x = vec![T::zero(); 2 * self.n()];
            self.solve_shifted(hi, &rhs, &mut x, tol)?;
            return Err(Error::Bracket {
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
                phi_lo: phi.to_f64_lossy(),
                phi_hi: phi_hi_check(&x).to_f64_lossy(),
                target: n_t.to_f64_lossy(),
            });
        }

        let mut iters = 0;
        let mut scratch = vec![T::zero(); 2 * self.n()];
        while (phi - n_t).abs() > target_gap {
            if iters >= MAX_ROOT_ITERS || hi - lo <= T::eps() * hi.max(T::one()) * T::lit(4.0) {
                break;
            }
            iters += 1;
            if phi > n_t {
                lo = lo.max(mu);
            } else {
                hi = hi.min(mu);
            }
            // φ'(μ) = −2 ĝᵀ (2H + μI)⁻¹ ĝ
            self.solve_shifted(mu, &g, &mut scratch, tol)?;
            let dphi = -(dot(&g, &scratch) + dot(&g, &scratch));
            let psi = T::one() / phi.sqrt() - inv_sqrt_n;
            let dpsi = -dphi / (T::lit(2.0) * phi * phi.sqrt());
            let mut next = if dpsi > T::zero() { mu - psi / dpsi } else { T::nan() };
            if !(next > lo && next < hi) {
                next = lo + (hi - lo) / T::lit(2.0);
            }
            mu = next;
            self.solve_shifted(mu, &rhs, &mut g, tol)?;
            phi = norm_sq(&g);
        }
        if phi.is_nan() {
            return Err(Error::Bracket {
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
                phi_lo: f64::NAN,
                phi_hi: f64::NAN,
                target: n_t.to_f64_lossy(),
            });
        }
        // Remove the residual secular-equation error by a radial rescale.
        let scale = n_t.sqrt() / phi.sqrt();
        g.iter_mut().for_each(|v| *v = *v * scale);
        debug!("trs secular root mu = {mu} after {iters} iterations");
        Ok((g, mu, iters))
    }

    fn finish(&self, gbar: Vec<T>, mu_star: T, case_tag: TrsCase, root_iterations: usize) -> Result<TrsSolution<T>> {
        let report = self.kkt_report(&gbar, mu_star)?;
        let objective = self.objective(&gbar)?;
        Ok(TrsSolution {
            gbar,
            mu_star,
            case_tag,
            kkt_residual: report.stationarity_residual,
            norm_residual: report.norm_gap,
            objective,
            root_iterations,
        })
    }

    fn kkt_report(&self, gbar: &[T], mu: T) -> Result<KktReport<T>> {
        let lhs = self.apply_shifted(mu, gbar)?;
        let resid: T = lhs
            .iter()
            .zip(&self.zbar)
            .map(|(&a, &z)| {
                let r = a - (z + z);
                r * r
            })
            .sum::<T>()
            .sqrt();
        Ok(KktReport {
            norm_gap: (norm_sq(gbar) - T::from_count(self.n())).abs(),
            stationarity_residual: resid,
            psd_margin: mu,
        })
    }

    /// Residuals of the optimality conditions at a candidate solution.
    pub fn verify_kkt(&self, solution: &TrsSolution<T>) -> Result<KktReport<T>> {
        self.kkt_report(&solution.gbar, solution.mu_star)
    }
}

/// Convenience wrapper for [`TrsProblem::solve`].
pub fn solve_trs<T: Real>(problem: &TrsProblem<'_, T>, tol: T) -> Result<TrsSolution<T>> {
    problem.solve(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{embed, Mod1Samples};
    use crate::grid_graph::{build_graph, build_laplacian, GridSpec};

    fn chain(n: usize, k: usize) -> SparseLaplacian {
        build_laplacian(&build_graph(&GridSpec::line(n, k).unwrap())).unwrap()
    }

    fn zbar_of(y: Vec<f64>) -> Vec<f64> {
        embed(&Mod1Samples::new(y).unwrap()).stacked().to_vec()
    }

    #[test]
    fn apply_shifted_on_null_space() {
        let lap = chain(8, 2);
        let p = TrsProblem::new(&lap, 0.4, zbar_of(vec![0.1; 8])).unwrap();
        let x: Vec<f64> = (0..16).map(|i| if i < 8 { 1.0 } else { -2.0 }).collect();
        let y = p.apply_shifted(3.0, &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - 3.0 * b).abs() < 1e-14);
        }
        let p0 = TrsProblem::new(&lap, 0.0, zbar_of(vec![0.1; 8])).unwrap();
        let r: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(p0.apply_shifted(1.5, &r).unwrap(), r.iter().map(|v| 1.5 * v).collect::<Vec<_>>());
        assert!(p.apply_shifted(1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn null_coefficient_examples() {
        let lap = chain(9, 1);
        let p = TrsProblem::new(&lap, 1.0, zbar_of(vec![0.0; 9])).unwrap();
        let (c1, c2) = p.null_coefficients();
        assert!((c1 - 3.0).abs() < 1e-14 && c2.abs() < 1e-14);

        let lap2 = chain(2, 1);
        let p2 = TrsProblem::new(&lap2, 1.0, zbar_of(vec![0.0, 0.5])).unwrap();
        let (c1, c2) = p2.null_coefficients();
        assert!(c1.abs() < 1e-15 && c2.abs() < 1e-15);
        assert!(p2.is_perpendicular());
    }

    #[test]
    fn phi_without_regularization() {
        let lap = chain(12, 2);
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let p = TrsProblem::new(&lap, 0.0, zbar_of(y)).unwrap();
        for mu in [0.5, 1.0, 3.0] {
            assert!((p.phi(mu).unwrap() - 48.0 / (mu * mu)).abs() < 1e-9);
        }
        assert!(p.phi(0.0).is_err());
    }

    #[test]
    fn phi_for_null_space_embedding() {
        let lap = chain(10, 1);
        let p = TrsProblem::new(&lap, 0.8, zbar_of(vec![0.3; 10])).unwrap();
        assert!((p.phi(0.7).unwrap() - 40.0 / 0.49).abs() < 1e-7);
    }

    #[test]
    fn zero_lambda_returns_embedding() {
        let lap = chain(15, 2);
        let y: Vec<f64> = (0..15).map(|i| (i as f64 * 0.61) % 1.0).collect();
        let z = zbar_of(y);
        let p = TrsProblem::new(&lap, 0.0, z.clone()).unwrap();
        let s = p.solve(1e-9).unwrap();
        assert_eq!(s.mu_star, 2.0);
        assert_eq!(s.case_tag, TrsCase::EasyNotPerp);
        for (a, b) in s.gbar.iter().zip(&z) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_embedding_is_fixed_point() {
        let lap = chain(20, 3);
        let z = zbar_of(vec![0.42; 20]);
        let p = TrsProblem::new(&lap, 0.5, z.clone()).unwrap();
        let s = p.solve(1e-9).unwrap();
        assert!((s.mu_star - 2.0).abs() < 1e-9);
        for (a, b) in s.gbar.iter().zip(&z) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn hard_case_alternating_signs() {
        let lap = chain(16, 1);
        let y: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 0.5 }).collect();
        // H†z̄ is a ramp with ‖·‖² = 88/λ², below n = 16 once λ ≥ 3.
        let p = TrsProblem::new(&lap, 10.0, zbar_of(y)).unwrap();
        let s = p.solve(1e-9).unwrap();
        assert_eq!(s.case_tag, TrsCase::HardCase);
        let report = p.verify_kkt(&s).unwrap();
        assert_eq!(report.psd_margin, 0.0);
        assert!(report.norm_gap < 1e-9 * 16.0);
        assert!(report.stationarity_residual < 1e-8);
    }

    #[test]
    fn perp_interior_small_lambda() {
        let lap = chain(16, 1);
        let y: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 0.5 }).collect();
        let p = TrsProblem::new(&lap, 0.05, zbar_of(y)).unwrap();
        let s = p.solve(1e-9).unwrap();
        assert_eq!(s.case_tag, TrsCase::PerpInterior);
        assert!(s.mu_star > 0.0 && s.mu_star <= 2.0);
        assert!(s.kkt_residual < 1e-8);
    }

    #[test]
    fn perturbation_grows_stationarity_residual() {
        let lap = chain(30, 2);
        let y: Vec<f64> = (0..30).map(|i| ((i as f64) * 0.05 + 0.1 * ((i * 13 % 7) as f64 / 7.0)) % 1.0).collect();
        let p = TrsProblem::new(&lap, 0.1, zbar_of(y)).unwrap();
        let s = p.solve(1e-9).unwrap();
        let base = p.verify_kkt(&s).unwrap().stationarity_residual;
        let mut bumped = s.clone();
        let dir: Vec<f64> = (0..60).map(|i| ((i * 31 % 17) as f64 / 17.0) - 0.5).collect();
        let dn = norm(&dir);
        for (g, d) in bumped.gbar.iter_mut().zip(&dir) {
            *g += 1e-3 * d / dn;
        }
        let grown = p.verify_kkt(&bumped).unwrap().stationarity_residual;
        let expected = norm(&p.apply_shifted(s.mu_star, &dir.iter().map(|d| 1e-3 * d / dn).collect::<Vec<_>>()).unwrap());
        assert!(base < 1e-8);
        assert!((grown - expected).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let lap = chain(5, 1);
        assert!(TrsProblem::new(&lap, 0.1, vec![0.0; 9]).is_err());
        assert!(TrsProblem::new(&lap, -0.1, vec![0.0; 10]).is_err());
        let p = TrsProblem::new(&lap, 0.1, zbar_of(vec![0.1; 5])).unwrap();
        assert!(p.solve(0.0).is_err());
    }
}
