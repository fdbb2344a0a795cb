//! Stage 1: noisy residues in, denoised residues out.
//!
//! Residues are embedded on the unit circle, the regularized least-squares
//! problem is solved by the configured method, and the estimate is projected
//! back to `[0, 1)` by its angle.

use std::fmt;
use std::str::FromStr;

use crate::angular::{embed, project_stacked, stack, Mod1Samples};
use crate::error::{Error, Result};
use crate::grid_graph::{build_graph, build_laplacian, GridSpec, SparseLaplacian};
use crate::manifold::{solve_burer_monteiro, solve_phases, PhaseState, SolverOptions};
use crate::scalar::Real;
use crate::trs::{TrsCase, TrsProblem, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Sphere relaxation solved exactly.
    Trs,
    /// Riemannian descent over unit-modulus phases.
    Phases,
    /// Rank-`p` factorization of the semidefinite relaxation.
    BurerMonteiro,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Trs => "trs",
            Self::Phases => "phases",
            Self::BurerMonteiro => "bm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trs" => Ok(Self::Trs),
            "phases" => Ok(Self::Phases),
            "bm" | "burer-monteiro" => Ok(Self::BurerMonteiro),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}' (expected trs, phases or bm)"))),
        }
    }
}

/// The neighborhood radius `k` is taken from the [`GridSpec`].
#[derive(Debug, Clone, Copy)]
pub struct DenoiseConfig<T> {
    pub lambda: T,
    pub method: Method,
    /// Number of denoising passes (1 = plain, >1 = iterated).
    pub iterations: usize,
    pub trs_tol: T,
    pub solver: SolverOptions<T>,
    /// Burer-Monteiro rank.
    pub rank: usize,
}

impl<T: Real> Default for DenoiseConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(0.1),
            method: Method::Trs,
            iterations: 1,
            trs_tol: T::lit(DEFAULT_TOL),
            solver: SolverOptions::default(),
            rank: 3,
        }
    }
}

impl<T: Real> DenoiseConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one denoising pass.
#[derive(Debug, Clone)]
pub struct DenoiseOutput<T> {
    pub residues: Mod1Samples<T>,
    /// Solver estimate in stacked real form, before projection.
    pub gbar: Vec<T>,
    /// Objective of the solved problem (relaxed for `Trs`).
    pub objective: T,
    pub trs_case: Option<TrsCase>,
    pub iterations: usize,
    /// Manifold solvers: line search underflowed before convergence.
    pub warning: bool,
}

/// Reusable denoiser bound to one grid.
#[derive(Debug, Clone)]
pub struct Denoiser<T> {
    spec: GridSpec,
    laplacian: SparseLaplacian,
    cfg: DenoiseConfig<T>,
}

impl<T: Real> Denoiser<T> {
    pub fn new(spec: &GridSpec, cfg: DenoiseConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let laplacian = build_laplacian(&build_graph(spec))?;
        Ok(Self { spec: *spec, laplacian, cfg })
    }

    pub fn laplacian(&self) -> &SparseLaplacian {
        &self.laplacian
    }

    pub fn config(&self) -> &DenoiseConfig<T> {
        &self.cfg
    }

    /// One pass of embed → solve → project.
    pub fn pass(&self, y: &Mod1Samples<T>) -> Result<DenoiseOutput<T>> {
        if y.len() != self.spec.n() {
            return Err(Error::LengthMismatch { expected: self.spec.n(), actual: y.len() });
        }
        let z = embed(y);
        let problem = TrsProblem::from_embedding(&self.laplacian, self.cfg.lambda, &z)?;
        let (gbar, objective, trs_case, iterations, warning) = match self.cfg.method {
            Method::Trs => {
                let s = problem.solve(self.cfg.trs_tol)?;
                (s.gbar, s.objective, Some(s.case_tag), s.root_iterations, false)
            }
            Method::Phases => {
                let s = solve_phases(&problem, &PhaseState::from_embedding(&z), &self.cfg.solver)?;
                (stack(s.state.phases()), s.objective, None, s.iterations, s.line_search_failed)
            }
            Method::BurerMonteiro => {
                let s = solve_burer_monteiro(&problem, self.cfg.rank, &self.cfg.solver)?;
                (stack(s.state.phases()), s.objective, None, s.iterations, s.line_search_failed)
            }
        };
        let residues = project_stacked(&gbar)?;
        Ok(DenoiseOutput { residues, gbar, objective, trs_case, iterations, warning })
    }

    /// `cfg.iterations` passes, each fed the previous output; returns the last.
    pub fn run(&self, y: &Mod1Samples<T>) -> Result<DenoiseOutput<T>> {
        let mut out = self.pass(y)?;
        for _ in 1..self.cfg.iterations {
            out = self.pass(&out.residues)?;
        }
        Ok(out)
    }
}

/// Single denoising pass (ignores `cfg.iterations`).
pub fn denoise<T: Real>(y: &Mod1Samples<T>, spec: &GridSpec, cfg: &DenoiseConfig<T>) -> Result<Mod1Samples<T>> {
    let cfg = DenoiseConfig { iterations: 1, ..*cfg };
    Ok(Denoiser::new(spec, cfg)?.pass(y)?.residues)
}

/// Iterated denoising: `cfg.iterations` passes.
pub fn denoise_iterated<T: Real>(
    y: &Mod1Samples<T>,
    spec: &GridSpec,
    cfg: &DenoiseConfig<T>,
) -> Result<Mod1Samples<T>> {
    Ok(Denoiser::new(spec, *cfg)?.run(y)?.residues)
}
