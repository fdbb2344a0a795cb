//! `mod1`: simulate, denoise, unwrap and evaluate modulo-1 samples.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use modulo_denoise::angular::Mod1Samples;
use modulo_denoise::denoise::{DenoiseConfig, Denoiser};
use modulo_denoise::eval::{mod_out_shift, rmse, wrap_rmse};
use modulo_denoise::experiment::{run_experiment, summarize, write_records, write_summary, ExperimentConfig};
use modulo_denoise::grid_graph::GridSpec;
use modulo_denoise::io::{fmt_float, read_grid_file, read_samples, read_values, write_samples, write_values, SampleTable};
use modulo_denoise::manifold::SolverOptions;
use modulo_denoise::noise::{apply_noise, sample_function, Bandlimited, FunctionKind, FunctionSpec, Holder, NoiseModel};
use modulo_denoise::unwrap::unwrap;
use modulo_denoise::{Error, Method, UnwrapMethod};

#[derive(Parser)]
#[command(name = "mod1", version, about = "Denoise and unwrap noisy modulo-1 samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a test function on a grid and add noise.
    Simulate(SimulateArgs),
    /// Denoise the residues of a samples file; writes `index,r_hat`.
    Denoise(DenoiseArgs),
    /// Unwrap residues; writes `index,f_hat`.
    Unwrap(UnwrapArgs),
    /// Compare pipeline outputs with the clean samples; writes one metrics row.
    Evaluate(EvaluateArgs),
    /// Sweep parameters over seeded trials; one CSV row per trial.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionArg {
    F1,
    Fxy,
    Bandlimited,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Bounded,
    Bernoulli,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Trs,
    Phases,
    Bm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Trs => Method::Trs,
            MethodArg::Phases => Method::Phases,
            MethodArg::Bm => Method::BurerMonteiro,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum UnwrapArg {
    Qt,
    Ols,
}

impl From<UnwrapArg> for UnwrapMethod {
    fn from(u: UnwrapArg) -> Self {
        match u {
            UnwrapArg::Qt => UnwrapMethod::QuotientTracker,
            UnwrapArg::Ols => UnwrapMethod::Ols,
        }
    }
}

#[derive(Args)]
struct FunctionOpts {
    #[arg(long, value_enum, default_value = "f1")]
    function: FunctionArg,
    /// Sample count for 1-D functions.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Points per axis for 2-D functions.
    #[arg(long, default_value_t = 122)]
    m: usize,
    /// Elevation grid (`rows cols` header, then values) for `--function grid`.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Multiplier applied to grid-file values.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 16)]
    modes: usize,
    #[arg(long, default_value_t = 3.0)]
    bl_scale: f64,
    #[arg(long, default_value_t = 3.0)]
    bl_shift: f64,
    /// Seed of the bandlimited function's weights.
    #[arg(long, default_value_t = 0)]
    function_seed: u64,
    /// Hölder constant M, overriding the built-in value.
    #[arg(long)]
    holder_m: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    holder_alpha: f64,
}

impl FunctionOpts {
    fn spec(&self) -> anyhow::Result<FunctionSpec> {
        let kind = match self.function {
            FunctionArg::F1 => FunctionKind::F1,
            FunctionArg::Fxy => FunctionKind::Fxy,
            FunctionArg::Bandlimited => FunctionKind::Bandlimited(Bandlimited {
                modes: self.modes,
                scale: self.bl_scale,
                shift: self.bl_shift,
                seed: self.function_seed,
            }),
            FunctionArg::Grid => {
                let Some(path) = &self.grid_file else { bail!("--function grid needs --grid-file") };
                FunctionKind::GridFile { path: path.clone(), scale: self.scale }
            }
        };
        let holder = self.holder_m.map(|m| Holder::new(m, self.holder_alpha)).transpose()?;
        Ok(FunctionSpec { kind, holder })
    }

    /// `(d, m)` of the sampling grid.
    fn shape(&self, function: &FunctionSpec) -> anyhow::Result<(usize, usize)> {
        Ok(match &function.kind {
            FunctionKind::GridFile { path, .. } => {
                let (rows, cols, _) = read_grid_file(path)?;
                if rows != cols {
                    bail!("grid file must be square (got {rows}x{cols})");
                }
                (2, rows)
            }
            _ if function.dimension() == 1 => (1, self.n),
            _ => (function.dimension(), self.m),
        })
    }
}

#[derive(Args)]
struct NoiseOpts {
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
}

impl NoiseOpts {
    fn model(&self) -> NoiseModel {
        match self.noise {
            NoiseArg::Bounded => NoiseModel::Bounded { gamma: self.gamma },
            NoiseArg::Bernoulli => NoiseModel::BernoulliUniform { p: self.p },
            NoiseArg::Gaussian => NoiseModel::Gaussian { sigma: self.sigma },
        }
    }
}

#[derive(Args)]
struct SolverOpts {
    #[arg(long, value_enum, default_value = "trs")]
    method: MethodArg,
    /// Denoising passes (values above 1 give the iterated variant).
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    /// Burer-Monteiro rank.
    #[arg(long, default_value_t = 3)]
    rank: usize,
    /// Iteration cap of the manifold solvers.
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Gradient tolerance (scaled by √n) of the manifold solvers.
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Seed of the Burer-Monteiro initialization.
    #[arg(long, default_value_t = 0)]
    solver_seed: u64,
}

impl SolverOpts {
    fn options(&self) -> SolverOptions<f64> {
        SolverOptions {
            max_iterations: self.max_iter,
            grad_tol: self.grad_tol,
            seed: self.solver_seed,
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    function: FunctionOpts,
    #[command(flatten)]
    noise: NoiseOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit the `clean_f` column.
    #[arg(long)]
    blind: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Samples file from `simulate` (or any `index,x…,y` CSV).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args)]
struct UnwrapArgs {
    /// Residues: an `index,r_hat` file or a samples file (its `y` column).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid dimension of an `index,r_hat` input.
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    #[arg(long, value_enum, default_value = "ols")]
    method: UnwrapArg,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Samples file with a `clean_f` column.
    #[arg(long)]
    samples: PathBuf,
    /// Denoised residues (`index,r_hat`).
    #[arg(long)]
    denoised: Option<PathBuf>,
    /// Unwrapped estimate (`index,f_hat`).
    #[arg(long)]
    unwrapped: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    function: FunctionOpts,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    /// Noise levels (γ, p or σ).
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    levels: Vec<f64>,
    #[arg(long = "k", value_delimiter = ',', default_value = "2")]
    ks: Vec<usize>,
    #[arg(long = "lambda", value_delimiter = ',', default_value = "0.1")]
    lambdas: Vec<f64>,
    #[arg(long = "method", value_enum, value_delimiter = ',', default_value = "trs")]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    #[arg(long, value_enum, default_value = "ols")]
    unwrap: UnwrapArg,
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Master seed; trial seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ε of the high-probability bounds.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    /// Worker threads; output does not depend on it.
    #[arg(long, env = "MOD1_THREADS", default_value_t = 1)]
    parallel: usize,
    /// Also write per-configuration median/IQR to this path.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Add a wall_time_ms column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let function = a.function.spec()?;
    let (d, m) = a.function.shape(&function)?;
    let grid = GridSpec::new(d, m, 1)?;
    let clean: Vec<f64> = sample_function(&function, &grid)?;
    let noisy = apply_noise(&clean, a.noise.model(), a.seed)?;
    let coords = (0..grid.n()).flat_map(|i| grid.coords::<f64>(i)).collect();
    let table = SampleTable { coords, d, y: noisy.into_values(), clean: Some(clean) };
    let mut out = create(&a.out)?;
    write_samples(&mut out, &table, !a.blind)?;
    out.flush()?;
    info!("wrote {} samples to {}", table.n(), a.out.display());
    Ok(())
}

fn denoise(a: DenoiseArgs) -> anyhow::Result<()> {
    let table = read_samples(open(&a.input)?)?;
    let grid = table.grid(a.k)?;
    let y = Mod1Samples::new(table.y)?;
    let cfg = DenoiseConfig {
        lambda: a.lambda,
        method: a.solver.method.into(),
        iterations: a.solver.iterations,
        solver: a.solver.options(),
        rank: a.solver.rank,
        ..DenoiseConfig::default()
    };
    let out = Denoiser::new(&grid, cfg)?.run(&y)?;
    if out.warning {
        log::warn!("solver stopped before reaching its tolerance");
    }
    info!("objective {:.6e} after {} solver iterations", out.objective, out.iterations);
    let mut w = create(&a.out)?;
    write_values(&mut w, "r_hat", out.residues.values())?;
    w.flush()?;
    Ok(())
}

/// Residues and dimension from either an `index,r_hat` file or a samples file.
fn read_residues(path: &Path, d: usize) -> anyhow::Result<(Vec<f64>, usize)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let columns = text.lines().next().map_or(0, |h| h.split(',').count());
    if columns == 2 {
        let (_, values) = read_values(text.as_bytes())?;
        Ok((values, d))
    } else {
        let table = read_samples(text.as_bytes())?;
        Ok((table.y, table.d))
    }
}

fn unwrap_cmd(a: UnwrapArgs) -> anyhow::Result<()> {
    let (r, d) = read_residues(&a.input, a.d)?;
    let n = r.len();
    let m = (n as f64).powf(1.0 / d as f64).round() as usize;
    let grid = GridSpec::new(d, m, a.k)?;
    if grid.n() != n {
        bail!("{n} residues do not form a {d}-dimensional square grid");
    }
    let f_hat = unwrap(&Mod1Samples::new(r)?, &grid, a.zeta, a.method.into())?;
    let mut w = create(&a.out)?;
    write_values(&mut w, "f_hat", &f_hat)?;
    w.flush()?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let table = read_samples(open(&a.samples)?)?;
    let Some(clean) = table.clean else { bail!("{} has no clean_f column", a.samples.display()) };
    let clean_mod1 = Mod1Samples::wrapped(clean.iter().copied());
    let noisy = Mod1Samples::new(table.y)?;
    let mut header = vec!["n".to_string(), "wrap_rmse_noisy".into()];
    let mut row = vec![clean.len().to_string(), fmt_float(wrap_rmse(&noisy, &clean_mod1)?)];
    if let Some(path) = &a.denoised {
        let (_, r) = read_values(open(path)?)?;
        header.push("wrap_rmse_mod1".into());
        row.push(fmt_float(wrap_rmse(&Mod1Samples::new(r)?, &clean_mod1)?));
    }
    if let Some(path) = &a.unwrapped {
        let (_, f_hat) = read_values(open(path)?)?;
        let aligned = mod_out_shift(&clean, &f_hat)?;
        header.extend(["rmse_f_raw".into(), "rmse_f_after_shift".into(), "shift".into()]);
        row.extend([
            fmt_float(rmse(&f_hat, &clean)?),
            fmt_float(rmse(&aligned.aligned, &clean)?),
            fmt_float(aligned.shift),
        ]);
    }
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(&header)?;
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let function = a.function.spec()?;
    let (d, m) = a.function.shape(&function)?;
    let noise = NoiseOpts { noise: a.noise, gamma: 0.0, p: 0.0, sigma: 0.0 }.model();
    let cfg = ExperimentConfig {
        function,
        d,
        m,
        ks: a.ks,
        lambdas: a.lambdas,
        noise,
        levels: a.levels,
        methods: a.methods.into_iter().map(Method::from).collect(),
        iterations: a.iterations,
        unwrap: a.unwrap.into(),
        zeta: a.zeta,
        trials: a.trials,
        master_seed: a.seed,
        eps: a.eps,
        solver: SolverOptions { max_iterations: a.max_iter, grad_tol: a.grad_tol, ..SolverOptions::default() },
        rank: a.rank,
    };
    let rows = run_experiment(&cfg, a.parallel.max(1))?;
    let mut w = create(&a.out)?;
    write_records(&mut w, &rows, a.timing)?;
    w.flush()?;
    if let Some(path) = &a.summary {
        let mut s = create(path)?;
        write_summary(&mut s, &summarize(&rows))?;
        s.flush()?;
    }
    info!("wrote {} trials to {}", rows.len(), a.out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Denoise(a) => denoise(a),
        Command::Unwrap(a) => unwrap_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Malformed input is a usage problem, like a bad flag.
            let parse = matches!(e.downcast_ref::<Error>(), Some(Error::Parse { .. }));
            ExitCode::from(if parse { 2 } else { 1 })
        }
    }
}
