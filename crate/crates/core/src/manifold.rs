//! Riemannian first-order solvers for the unit-modulus problem
//!
//! ```text
//! minimize  λ g* L g − 2 Re(g* z)   over  |g_i| = 1
//! ```
//!
//! and for its Burer-Monteiro factorized SDP relaxation
//!
//! ```text
//! minimize  λ ⟨L Y, Y⟩ − 2 Re(z* Y v)   over  diag(Y Y*) = 1, ‖v‖ = 1.
//! ```
//!
//! Both use gradient descent with Armijo backtracking and normalization
//! retractions, so every iterate is exactly feasible and the objective never
//! increases across accepted steps.

use log::{debug, warn};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angular::{unstack, CircleEmbedding};
use crate::error::{Error, Result};
use crate::grid_graph::SparseLaplacian;
use crate::scalar::Real;
use crate::trs::TrsProblem;

/// Unit-modulus phase vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    g: Vec<Complex<T>>,
}

impl<T: Real> PhaseState<T> {
    /// Normalizes every entry onto the unit circle.
    pub fn normalized(g: Vec<Complex<T>>) -> Result<Self> {
        let mut g = g;
        for (index, c) in g.iter_mut().enumerate() {
            let r = c.norm();
            if r == T::zero() || !r.is_finite() {
                return Err(Error::DegenerateEntry { index });
            }
            *c = *c / r;
        }
        Ok(Self { g })
    }

    pub fn from_embedding(z: &CircleEmbedding<T>) -> Self {
        Self { g: z.to_complex() }
    }

    pub fn phases(&self) -> &[Complex<T>] {
        &self.g
    }

    pub fn into_phases(self) -> Vec<Complex<T>> {
        self.g
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Largest deviation `| |g_i| − 1 |`.
    pub fn modulus_error(&self) -> T {
        self.g.iter().fold(T::zero(), |m, c| m.max((c.norm() - T::one()).abs()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub max_iterations: usize,
    /// Stop once `‖grad‖ ≤ grad_tol · √n`.
    pub grad_tol: T,
    pub armijo_c: T,
    pub shrink: T,
    /// First trial step of every line search; `None` uses
    /// `1 / (2λ·max_degree + 2)`.
    pub initial_step: Option<T>,
    pub min_step: T,
    /// Seed for the Burer-Monteiro initialization.
    pub seed: u64,
    pub record_history: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            grad_tol: T::lit(1e-6),
            armijo_c: T::lit(1e-4),
            shrink: T::lit(0.5),
            initial_step: None,
            min_step: T::lit(1e-20),
            seed: 0,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseSolution<T> {
    pub state: PhaseState<T>,
    pub objective: T,
    pub iterations: usize,
    pub grad_norm: T,
    pub converged: bool,
    /// Set when backtracking underflowed before reaching the tolerance.
    pub line_search_failed: bool,
    /// Objective after every accepted step (first entry: initial point).
    pub history: Vec<T>,
}

/// `y = scale · L x` for complex `x`.
fn apply_complex<T: Real>(lap: &SparseLaplacian, scale: T, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = x[i] * T::from_count(lap.degree(i));
        for &j in lap.neighbors(i) {
            acc = acc - x[j];
        }
        *yi = acc * scale;
    }
}

fn complex_quadform<T: Real>(lap: &SparseLaplacian, x: &[Complex<T>]) -> T {
    let mut acc = T::zero();
    for i in 0..x.len() {
        for &j in lap.neighbors(i).iter().filter(|&&j| j > i) {
            acc = acc + (x[i] - x[j]).norm_sqr();
        }
    }
    acc
}

#[inline]
fn re_inner<T: Real>(a: Complex<T>, b: Complex<T>) -> T {
    a.re * b.re + a.im * b.im
}

fn tangent_norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
}

fn default_step<T: Real>(problem: &TrsProblem<'_, T>) -> T {
    let two = T::lit(2.0);
    T::one() / (two * problem.lambda() * T::from_count(problem.laplacian().max_degree()) + two)
}

fn check_len<T: Real>(problem: &TrsProblem<'_, T>, len: usize) -> Result<()> {
    if len != problem.n() {
        return Err(Error::LengthMismatch { expected: problem.n(), actual: len });
    }
    Ok(())
}

/// `λ g* L g − 2 Re(g* z)`.
pub fn objective<T: Real>(problem: &TrsProblem<'_, T>, g: &PhaseState<T>) -> Result<T> {
    check_len(problem, g.len())?;
    Ok(phase_objective(problem, &unstack(problem.zbar()), g.phases()))
}

fn phase_objective<T: Real>(problem: &TrsProblem<'_, T>, z: &[Complex<T>], g: &[Complex<T>]) -> T {
    let quad = problem.lambda() * complex_quadform(problem.laplacian(), g);
    let lin: T = g.iter().zip(z).map(|(&a, &b)| re_inner(a, b)).sum();
    quad - T::lit(2.0) * lin
}

fn phase_gradient<T: Real>(problem: &TrsProblem<'_, T>, z: &[Complex<T>], g: &[Complex<T>], out: &mut [Complex<T>]) {
    let two = T::lit(2.0);
    apply_complex(problem.laplacian(), two * problem.lambda(), g, out);
    for i in 0..g.len() {
        let e = out[i] - z[i] * two;
        out[i] = e - g[i] * re_inner(e, g[i]);
    }
}

/// Euclidean gradient `2λLg − 2z` projected onto the tangent space of the
/// product of circles at `g`.
pub fn riemannian_gradient<T: Real>(problem: &TrsProblem<'_, T>, g: &PhaseState<T>) -> Result<Vec<Complex<T>>> {
    check_len(problem, g.len())?;
    let z = unstack(problem.zbar());
    let mut out = vec![Complex::new(T::zero(), T::zero()); g.len()];
    phase_gradient(problem, &z, g.phases(), &mut out);
    Ok(out)
}

/// Normalization retraction `(g_i + t ξ_i) / |g_i + t ξ_i|`.
pub fn retract<T: Real>(g: &PhaseState<T>, xi: &[Complex<T>], t: T) -> Result<PhaseState<T>> {
    if xi.len() != g.len() {
        return Err(Error::LengthMismatch { expected: g.len(), actual: xi.len() });
    }
    PhaseState::normalized(g.g.iter().zip(xi).map(|(&a, &d)| a + d * t).collect())
}

fn retract_into<T: Real>(g: &[Complex<T>], dir: &[Complex<T>], t: T, out: &mut [Complex<T>]) -> bool {
    for i in 0..g.len() {
        let c = g[i] + dir[i] * t;
        let r = c.norm();
        if r == T::zero() || !r.is_finite() {
            return false;
        }
        out[i] = c / r;
    }
    true
}

/// Riemannian gradient descent over unit-modulus phases.
pub fn solve_phases<T: Real>(
    problem: &TrsProblem<'_, T>,
    init: &PhaseState<T>,
    opts: &SolverOptions<T>,
) -> Result<PhaseSolution<T>> {
    check_len(problem, init.len())?;
    validate_options(opts)?;
    let n = problem.n();
    let z = unstack(problem.zbar());
    let zero = Complex::new(T::zero(), T::zero());
    let step0 = opts.initial_step.unwrap_or_else(|| default_step(problem));
    let target = opts.grad_tol * T::from_count(n).sqrt();

    let mut g = init.g.clone();
    let mut trial = vec![zero; n];
    let mut grad = vec![zero; n];
    let mut f = phase_objective(problem, &z, &g);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(f);
    }
    phase_gradient(problem, &z, &g, &mut grad);
    let mut gnorm = tangent_norm(&grad);
    let mut iterations = 0;
    let mut line_search_failed = false;

    while gnorm > target && iterations < opts.max_iterations {
        let slope = gnorm * gnorm;
        let mut t = step0;
        let accepted = loop {
            if t < opts.min_step {
                break None;
            }
            if retract_into(&g, &grad, -t, &mut trial) {
                let f_trial = phase_objective(problem, &z, &trial);
                if f_trial <= f - opts.armijo_c * t * slope {
                    break Some(f_trial);
                }
            }
            t = t * opts.shrink;
        };
        let Some(f_next) = accepted else {
            warn!("phase solver: line search underflow at iteration {iterations}, |grad| = {gnorm}");
            line_search_failed = true;
            break;
        };
        std::mem::swap(&mut g, &mut trial);
        f = f_next;
        if opts.record_history {
            history.push(f);
        }
        phase_gradient(problem, &z, &g, &mut grad);
        gnorm = tangent_norm(&grad);
        iterations += 1;
    }
    debug!("phase solver: {iterations} iterations, objective {f}, |grad| {gnorm}");
    Ok(PhaseSolution {
        state: PhaseState { g },
        objective: f,
        iterations,
        grad_norm: gnorm,
        converged: gnorm <= target,
        line_search_failed,
        history,
    })
}

fn validate_options<T: Real>(opts: &SolverOptions<T>) -> Result<()> {
    let ok = opts.grad_tol > T::zero()
        && opts.armijo_c > T::zero()
        && opts.armijo_c < T::one()
        && opts.shrink > T::zero()
        && opts.shrink < T::one()
        && opts.min_step > T::zero()
        && opts.initial_step.is_none_or(|s| s > T::zero());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument("solver options must be positive, with armijo_c and shrink in (0, 1)".into()))
    }
}

/// Burer-Monteiro factor pair: `Y` (n×p, unit rows, row-major) and unit `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmState<T> {
    y: Vec<Complex<T>>,
    v: Vec<Complex<T>>,
    p: usize,
}

impl<T: Real> BmState<T> {
    /// Normalizes the rows of `y` and the vector `v`.
    pub fn new(y: Vec<Complex<T>>, v: Vec<Complex<T>>, p: usize) -> Result<Self> {
        if p == 0 || !y.len().is_multiple_of(p) {
            return Err(Error::InvalidArgument(format!("factor of length {} is not n x {p}", y.len())));
        }
        if v.len() != p {
            return Err(Error::LengthMismatch { expected: p, actual: v.len() });
        }
        let mut s = Self { y, v, p };
        if !s.renormalize() {
            return Err(Error::DegenerateEntry { index: 0 });
        }
        Ok(s)
    }

    /// Row-normalized standard Gaussian `Y` and normalized Gaussian `v`.
    pub fn random(n: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draw = || {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(T::lit(re), T::lit(im))
        };
        let y = (0..n * p).map(|_| draw()).collect();
        let v = (0..p).map(|_| draw()).collect();
        Self::new(y, v, p)
    }

    fn renormalize(&mut self) -> bool {
        for row in self.y.chunks_mut(self.p) {
            if !normalize_slice(row) {
                return false;
            }
        }
        normalize_slice(&mut self.v)
    }

    pub fn rank(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.y.len() / self.p
    }

    pub fn y(&self) -> &[Complex<T>] {
        &self.y
    }

    pub fn v(&self) -> &[Complex<T>] {
        &self.v
    }

    /// `(Y v)_i`.
    pub fn yv(&self) -> Vec<Complex<T>> {
        self.y
            .chunks(self.p)
            .map(|row| row.iter().zip(&self.v).fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// `(max_i |‖Y_i‖² − 1|, |‖v‖² − 1|)`.
    pub fn constraint_residuals(&self) -> (T, T) {
        let rows = self
            .y
            .chunks(self.p)
            .fold(T::zero(), |m, row| m.max((row.iter().map(|c| c.norm_sqr()).sum::<T>() - T::one()).abs()));
        let v = (self.v.iter().map(|c| c.norm_sqr()).sum::<T>() - T::one()).abs();
        (rows, v)
    }

    /// Phases `(Yv)_i / |(Yv)_i|`.
    pub fn extract(&self) -> Result<PhaseState<T>> {
        PhaseState::normalized(self.yv()).map_err(|e| match e {
            Error::DegenerateEntry { index } => Error::DegenerateEntry { index },
            other => other,
        })
    }
}

fn normalize_slice<T: Real>(v: &mut [Complex<T>]) -> bool {
    let r = v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    if r == T::zero() || !r.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|c| *c = *c / r);
    true
}

#[derive(Debug, Clone)]
pub struct BmSolution<T> {
    pub factors: BmState<T>,
    /// Phases extracted from `Y v`.
    pub state: PhaseState<T>,
    /// Factorized objective `λ⟨LY,Y⟩ − 2Re(z*Yv)` at the final factors.
    pub factor_objective: T,
    /// Phase objective at the extracted phases.
    pub objective: T,
    pub iterations: usize,
    pub grad_norm: T,
    pub converged: bool,
    pub line_search_failed: bool,
    pub history: Vec<T>,
    /// Largest constraint residual observed over all iterates.
    pub max_constraint_residual: T,
}

/// `λ⟨LY,Y⟩ − 2 Re(z* Y v)`.
pub fn bm_objective<T: Real>(problem: &TrsProblem<'_, T>, state: &BmState<T>) -> Result<T> {
    check_len(problem, state.n())?;
    let z = unstack(problem.zbar());
    let mut col = vec![Complex::new(T::zero(), T::zero()); state.n()];
    Ok(bm_objective_inner(problem, &z, state, &mut col))
}

fn bm_objective_inner<T: Real>(
    problem: &TrsProblem<'_, T>,
    z: &[Complex<T>],
    s: &BmState<T>,
    col: &mut [Complex<T>],
) -> T {
    let p = s.p;
    let mut quad = T::zero();
    for c in 0..p {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = s.y[i * p + c];
        }
        quad = quad + complex_quadform(problem.laplacian(), col);
    }
    let lin: T = s.yv().iter().zip(z).map(|(&a, &b)| re_inner(b, a)).sum();
    problem.lambda() * quad - T::lit(2.0) * lin
}

/// Tangent vector of the factorization: `(dY row-major, dv)`.
pub type FactorTangent<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// Riemannian gradient on the oblique × sphere product, returned as
/// `(grad_Y row-major, grad_v)`.
pub fn bm_riemannian_gradient<T: Real>(
    problem: &TrsProblem<'_, T>,
    state: &BmState<T>,
) -> Result<FactorTangent<T>> {
    check_len(problem, state.n())?;
    let z = unstack(problem.zbar());
    Ok(bm_gradient_inner(problem, &z, state))
}

fn bm_gradient_inner<T: Real>(
    problem: &TrsProblem<'_, T>,
    z: &[Complex<T>],
    s: &BmState<T>,
) -> FactorTangent<T> {
    let (n, p) = (s.n(), s.p);
    let two = T::lit(2.0);
    let zero = Complex::new(T::zero(), T::zero());
    let mut gy = vec![zero; n * p];
    let mut col = vec![zero; n];
    let mut lcol = vec![zero; n];
    // 2λ L Y, column by column.
    for c in 0..p {
        for i in 0..n {
            col[i] = s.y[i * p + c];
        }
        apply_complex(problem.laplacian(), two * problem.lambda(), &col, &mut lcol);
        for i in 0..n {
            gy[i * p + c] = lcol[i];
        }
    }
    // − 2 z v*
    for i in 0..n {
        for c in 0..p {
            gy[i * p + c] = gy[i * p + c] - z[i] * s.v[c].conj() * two;
        }
    }
    // ∇_v = −2 Y* z
    let mut gv = vec![zero; p];
    for i in 0..n {
        for c in 0..p {
            gv[c] = gv[c] - s.y[i * p + c].conj() * z[i] * two;
        }
    }
    for (row, yrow) in gy.chunks_mut(p).zip(s.y.chunks(p)) {
        let radial: T = row.iter().zip(yrow).map(|(&a, &b)| re_inner(a, b)).sum();
        for (a, &b) in row.iter_mut().zip(yrow) {
            *a = *a - b * radial;
        }
    }
    let radial: T = gv.iter().zip(&s.v).map(|(&a, &b)| re_inner(a, b)).sum();
    for (a, &b) in gv.iter_mut().zip(&s.v) {
        *a = *a - b * radial;
    }
    (gy, gv)
}

/// Retraction on the product manifold: step then renormalize rows and `v`.
pub fn bm_retract<T: Real>(state: &BmState<T>, dy: &[Complex<T>], dv: &[Complex<T>], t: T) -> Option<BmState<T>> {
    let mut next = state.clone();
    for (a, &d) in next.y.iter_mut().zip(dy) {
        *a = *a + d * t;
    }
    for (a, &d) in next.v.iter_mut().zip(dv) {
        *a = *a + d * t;
    }
    next.renormalize().then_some(next)
}

/// Rank-`p` Burer-Monteiro solve from a seeded random start.
pub fn solve_burer_monteiro<T: Real>(
    problem: &TrsProblem<'_, T>,
    p: usize,
    opts: &SolverOptions<T>,
) -> Result<BmSolution<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument("rank p must be positive".into()));
    }
    let init = BmState::random(problem.n(), p, opts.seed)?;
    solve_burer_monteiro_from(problem, init, opts)
}

/// Burer-Monteiro gradient descent from a given feasible start.
pub fn solve_burer_monteiro_from<T: Real>(
    problem: &TrsProblem<'_, T>,
    init: BmState<T>,
    opts: &SolverOptions<T>,
) -> Result<BmSolution<T>> {
    check_len(problem, init.n())?;
    validate_options(opts)?;
    let n = problem.n();
    let z = unstack(problem.zbar());
    let step0 = opts.initial_step.unwrap_or_else(|| default_step(problem));
    let target = opts.grad_tol * T::from_count(n).sqrt();
    let mut col = vec![Complex::new(T::zero(), T::zero()); n];

    let mut state = init;
    let mut f = bm_objective_inner(problem, &z, &state, &mut col);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(f);
    }
    let (mut gy, mut gv) = bm_gradient_inner(problem, &z, &state);
    let mut gnorm = (tangent_norm(&gy).powi(2) + tangent_norm(&gv).powi(2)).sqrt();
    let (r0, r1) = state.constraint_residuals();
    let mut max_resid = r0.max(r1);
    let mut iterations = 0;
    let mut line_search_failed = false;

    while gnorm > target && iterations < opts.max_iterations {
        let slope = gnorm * gnorm;
        let mut t = step0;
        let accepted = loop {
            if t < opts.min_step {
                break None;
            }
            if let Some(next) = bm_retract(&state, &gy, &gv, -t) {
                let f_next = bm_objective_inner(problem, &z, &next, &mut col);
                if f_next <= f - opts.armijo_c * t * slope {
                    break Some((next, f_next));
                }
            }
            t = t * opts.shrink;
        };
        let Some((next, f_next)) = accepted else {
            warn!("burer-monteiro: line search underflow at iteration {iterations}, |grad| = {gnorm}");
            line_search_failed = true;
            break;
        };
        state = next;
        f = f_next;
        if opts.record_history {
            history.push(f);
        }
        let (r0, r1) = state.constraint_residuals();
        max_resid = max_resid.max(r0).max(r1);
        (gy, gv) = bm_gradient_inner(problem, &z, &state);
        gnorm = (tangent_norm(&gy).powi(2) + tangent_norm(&gv).powi(2)).sqrt();
        iterations += 1;
    }
    let phases = state.extract()?;
    let objective = phase_objective(problem, &z, phases.phases());
    debug!("burer-monteiro p={}: {iterations} iterations, objective {f}, rounded {objective}", state.p);
    Ok(BmSolution {
        factors: state,
        state: phases,
        factor_objective: f,
        objective,
        iterations,
        grad_norm: gnorm,
        converged: gnorm <= target,
        line_search_failed,
        history,
        max_constraint_residual: max_resid,
    })
}

/// Rank `⌊√(n+1)⌋ + 1` that guarantees the factorization has no spurious
/// second-order critical points for generic costs.
pub fn theoretical_rank(n: usize) -> usize {
    ((n + 1) as f64).sqrt().floor() as usize + 1
}
