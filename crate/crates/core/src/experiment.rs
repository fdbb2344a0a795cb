//! Seeded trial sweeps producing one record per (configuration, trial).
//!
//! Every trial draws its noise from `derive_seed(master_seed, trial)`, so
//! the same trial index sees the same noise stream under every configuration
//! and results do not depend on how trials are scheduled across threads.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::angular::{embed, Mod1Samples};
use crate::denoise::{DenoiseConfig, Denoiser, Method};
use crate::error::{Error, Result};
use crate::eval::{check_bound, correlation, mod_out_shift, realized_delta, rmse, wrap_rmse, BoundKind, BoundParams};
use crate::grid_graph::GridSpec;
use crate::io::fmt_float;
use crate::manifold::SolverOptions;
use crate::noise::{apply_noise, derive_seed, sample_function, FunctionSpec, NoiseModel};
use crate::unwrap::{unwrap, UnwrapMethod};

/// Everything needed to run one trial.
#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub grid: GridSpec,
    pub noise: NoiseModel,
    pub lambda: f64,
    pub method: Method,
    pub iterations: usize,
    pub unwrap: UnwrapMethod,
    pub zeta: f64,
    pub noise_seed: u64,
    /// `ε` for the Bernoulli and Gaussian bounds.
    pub eps: f64,
    pub solver: SolverOptions<f64>,
    pub rank: usize,
}

/// Intermediate and final quantities of one pipeline run.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub noisy: Mod1Samples<f64>,
    pub denoised: Mod1Samples<f64>,
    pub f_hat: Vec<f64>,
    pub wrap_rmse_noisy: f64,
    pub wrap_rmse_mod1: f64,
    pub rmse_f_raw: f64,
    pub rmse_f_after_shift: f64,
    pub shift: f64,
    pub correlation: f64,
    pub delta: f64,
    pub bound: Option<(BoundKind, f64, bool)>,
    pub solver_warning: bool,
}

/// Bound that applies to a single TRS pass under the trial's noise model,
/// if its preconditions hold.
fn applicable_bound(spec: &TrialSpec, function: &FunctionSpec, delta: f64) -> Option<(BoundKind, BoundParams)> {
    if spec.method != Method::Trs || spec.iterations != 1 {
        return None;
    }
    let holder = function.holder()?;
    let params = BoundParams {
        lambda: spec.lambda,
        k: spec.grid.k(),
        n: spec.grid.n(),
        d: spec.grid.d(),
        holder_m: holder.m,
        alpha: holder.alpha,
    };
    let kind = match (spec.noise, spec.grid.d()) {
        (NoiseModel::Bounded { .. }, 1) => BoundKind::BoundedLine { delta },
        (NoiseModel::Bounded { .. }, _) => BoundKind::BoundedGrid { delta },
        (NoiseModel::BernoulliUniform { p }, 1) => BoundKind::Bernoulli { p, eps: spec.eps },
        (NoiseModel::Gaussian { sigma }, 1) => BoundKind::Gaussian { sigma, eps: spec.eps },
        _ => return None,
    };
    Some((kind, params))
}

/// Noise → denoise → unwrap → metrics for precomputed clean samples.
pub fn run_trial(spec: &TrialSpec, function: &FunctionSpec, clean: &[f64]) -> Result<TrialOutcome> {
    if clean.len() != spec.grid.n() {
        return Err(Error::LengthMismatch { expected: spec.grid.n(), actual: clean.len() });
    }
    let clean_mod1 = Mod1Samples::wrapped(clean.iter().copied());
    let noisy = apply_noise(clean, spec.noise, spec.noise_seed)?;
    let cfg = DenoiseConfig {
        lambda: spec.lambda,
        method: spec.method,
        iterations: spec.iterations,
        solver: SolverOptions { seed: spec.noise_seed, ..spec.solver },
        rank: spec.rank,
        ..DenoiseConfig::default()
    };
    let out = Denoiser::new(&spec.grid, cfg)?.run(&noisy)?;
    let f_hat = unwrap(&out.residues, &spec.grid, spec.zeta, spec.unwrap)?;
    let alignment = mod_out_shift(clean, &f_hat)?;

    let h = embed(&clean_mod1);
    let z = embed(&noisy);
    let delta = realized_delta(&z, &h)?;
    let corr = correlation(&h, &out.gbar)?;
    let bound = match applicable_bound(spec, function, delta) {
        Some((kind, params)) => match check_bound(kind, &params, corr) {
            Ok(r) => Some((kind, r.bound, r.holds)),
            Err(Error::Inadmissible(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(TrialOutcome {
        wrap_rmse_noisy: wrap_rmse(&noisy, &clean_mod1)?,
        wrap_rmse_mod1: wrap_rmse(&out.residues, &clean_mod1)?,
        rmse_f_raw: rmse(&f_hat, clean)?,
        rmse_f_after_shift: rmse(&alignment.aligned, clean)?,
        shift: alignment.shift,
        correlation: corr,
        delta,
        bound,
        solver_warning: out.warning,
        noisy,
        denoised: out.residues,
        f_hat,
    })
}

/// Cartesian sweep definition.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub function: FunctionSpec,
    pub d: usize,
    /// Points per axis (`n` for `d = 1`).
    pub m: usize,
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// Noise family; its level is replaced by each entry of `levels`.
    pub noise: NoiseModel,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub iterations: usize,
    pub unwrap: UnwrapMethod,
    pub zeta: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub eps: f64,
    pub solver: SolverOptions<f64>,
    pub rank: usize,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub trial_index: usize,
    pub function: String,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub noise: &'static str,
    pub level: f64,
    pub lambda: f64,
    pub method: Method,
    pub iterations: usize,
    pub unwrap: UnwrapMethod,
    pub trial: usize,
    pub seed: u64,
    pub wrap_rmse_noisy: f64,
    pub wrap_rmse_mod1: f64,
    pub rmse_f_raw: f64,
    pub rmse_f_after_shift: f64,
    pub shift: f64,
    pub correlation: f64,
    pub delta: f64,
    pub bound_kind: Option<BoundKind>,
    pub bound_value: Option<f64>,
    pub bound_holds: Option<bool>,
    pub solver_warning: bool,
    pub wall_time_ms: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("k", self.ks.is_empty()),
            ("lambda", self.lambdas.is_empty()),
            ("noise level", self.levels.is_empty()),
            ("method", self.methods.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidArgument(format!("{name} list is empty")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        for &l in &self.levels {
            self.noise.with_level(l).validate()?;
        }
        Ok(())
    }

    /// Trials in output order: level, k, λ, method, then trial.
    pub fn trial_specs(&self) -> Result<Vec<(usize, TrialSpec)>> {
        self.validate()?;
        let mut out = Vec::new();
        for &level in &self.levels {
            for &k in &self.ks {
                let grid = GridSpec::new(self.d, self.m, k)?;
                for &lambda in &self.lambdas {
                    for &method in &self.methods {
                        for t in 0..self.trials {
                            out.push((
                                t,
                                TrialSpec {
                                    grid,
                                    noise: self.noise.with_level(level),
                                    lambda,
                                    method,
                                    iterations: self.iterations,
                                    unwrap: self.unwrap,
                                    zeta: self.zeta,
                                    noise_seed: derive_seed(self.master_seed, t as u64),
                                    eps: self.eps,
                                    solver: self.solver,
                                    rank: self.rank,
                                },
                            ));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs the sweep on `threads` workers (1 = sequential). Rows come back in
/// trial-index order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ExperimentRecord>> {
    let specs = cfg.trial_specs()?;
    let grid = GridSpec::new(cfg.d, cfg.m, cfg.ks[0])?;
    let clean: Vec<f64> = sample_function(&cfg.function, &grid)?;
    let name = cfg.function.kind.to_string();

    let run = |(index, (t, spec)): (usize, &(usize, TrialSpec))| -> Result<ExperimentRecord> {
        let start = Instant::now();
        let o = run_trial(spec, &cfg.function, &clean)?;
        Ok(ExperimentRecord {
            trial_index: index,
            function: name.clone(),
            d: spec.grid.d(),
            n: spec.grid.n(),
            m: spec.grid.m(),
            k: spec.grid.k(),
            noise: spec.noise.name(),
            level: spec.noise.level(),
            lambda: spec.lambda,
            method: spec.method,
            iterations: spec.iterations,
            unwrap: spec.unwrap,
            trial: *t,
            seed: spec.noise_seed,
            wrap_rmse_noisy: o.wrap_rmse_noisy,
            wrap_rmse_mod1: o.wrap_rmse_mod1,
            rmse_f_raw: o.rmse_f_raw,
            rmse_f_after_shift: o.rmse_f_after_shift,
            shift: o.shift,
            correlation: o.correlation,
            delta: o.delta,
            bound_kind: o.bound.map(|b| b.0),
            bound_value: o.bound.map(|b| b.1),
            bound_holds: o.bound.map(|b| b.2),
            solver_warning: o.solver_warning,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    };

    let mut rows: Vec<ExperimentRecord> = if threads <= 1 {
        specs.iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| specs.par_iter().enumerate().map(run).collect::<Result<_>>())?
    };
    rows.sort_by_key(|r| r.trial_index);
    Ok(rows)
}

fn unwrap_name(u: UnwrapMethod) -> &'static str {
    match u {
        UnwrapMethod::QuotientTracker => "qt",
        UnwrapMethod::Ols => "ols",
    }
}

/// Writes records as CSV. Wall time is non-deterministic, so it is only
/// written when `timing` is set.
pub fn write_records<W: Write>(out: W, rows: &[ExperimentRecord], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "trial_index", "function", "d", "n", "m", "k", "noise", "level", "lambda", "method", "iterations", "unwrap",
        "trial", "seed", "wrap_rmse_noisy", "wrap_rmse_mod1", "rmse_f_raw", "rmse_f_after_shift", "shift",
        "correlation", "delta", "bound_kind", "bound_value", "bound_holds", "solver_warning",
    ];
    if timing {
        header.push("wall_time_ms");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.trial_index.to_string(),
            r.function.clone(),
            r.d.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.noise.to_string(),
            fmt_float(r.level),
            fmt_float(r.lambda),
            r.method.to_string(),
            r.iterations.to_string(),
            unwrap_name(r.unwrap).to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_float(r.wrap_rmse_noisy),
            fmt_float(r.wrap_rmse_mod1),
            fmt_float(r.rmse_f_raw),
            fmt_float(r.rmse_f_after_shift),
            fmt_float(r.shift),
            fmt_float(r.correlation),
            fmt_float(r.delta),
            r.bound_kind.map(|k| k.name().to_string()).unwrap_or_default(),
            r.bound_value.map(fmt_float).unwrap_or_default(),
            r.bound_holds.map(|b| b.to_string()).unwrap_or_default(),
            r.solver_warning.to_string(),
        ];
        if timing {
            row.push(format!("{:.3}", r.wall_time_ms));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median and interquartile range.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    (quantile(&s, 0.5), quantile(&s, 0.75) - quantile(&s, 0.25))
}

/// Per-configuration summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k: usize,
    pub level: f64,
    pub lambda: f64,
    pub method: Method,
    pub trials: usize,
    pub median_wrap_rmse: f64,
    pub iqr_wrap_rmse: f64,
    pub median_rmse_f: f64,
    pub iqr_rmse_f: f64,
}

/// Groups consecutive rows sharing (level, k, λ, method).
pub fn summarize(rows: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    let key = |r: &ExperimentRecord| (r.level.to_bits(), r.k, r.lambda.to_bits(), r.method);
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && key(&rows[end]) == key(&rows[start]) {
            end += 1;
        }
        let group = &rows[start..end];
        let wrap: Vec<f64> = group.iter().map(|r| r.wrap_rmse_mod1).collect();
        let f: Vec<f64> = group.iter().map(|r| r.rmse_f_after_shift).collect();
        let (mw, iw) = median_iqr(&wrap);
        let (mf, i_f) = median_iqr(&f);
        let r = &rows[start];
        out.push(SummaryRow {
            k: r.k,
            level: r.level,
            lambda: r.lambda,
            method: r.method,
            trials: group.len(),
            median_wrap_rmse: mw,
            iqr_wrap_rmse: iw,
            median_rmse_f: mf,
            iqr_rmse_f: i_f,
        });
        start = end;
    }
    out
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k", "level", "lambda", "method", "trials", "median_wrap_rmse", "iqr_wrap_rmse", "median_rmse_f",
        "iqr_rmse_f",
    ])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_float(r.level),
            fmt_float(r.lambda),
            r.method.to_string(),
            r.trials.to_string(),
            fmt_float(r.median_wrap_rmse),
            fmt_float(r.iqr_wrap_rmse),
            fmt_float(r.median_rmse_f),
            fmt_float(r.iqr_rmse_f),
        ])?;
    }
    w.flush()?;
    Ok(())
}
