use modulo_denoise::angular::{embed, Mod1Samples};
use modulo_denoise::denoise::{denoise, denoise_iterated, DenoiseConfig, Denoiser, Method};
use modulo_denoise::eval::{
    check_bound, correlation, mod_out_shift, rmse, wrap_rmse, BoundKind, BoundParams,
};
use modulo_denoise::experiment::{run_experiment, summarize, write_records, ExperimentConfig};
use modulo_denoise::grid_graph::GridSpec;
use modulo_denoise::manifold::SolverOptions;
use modulo_denoise::noise::{apply_noise, derive_seed, sample_function, FunctionSpec, NoiseModel};
use modulo_denoise::UnwrapMethod;

fn f1_grid(n: usize, k: usize) -> (GridSpec, Vec<f64>) {
    let spec = GridSpec::line(n, k).unwrap();
    let clean = sample_function(&FunctionSpec::f1(), &spec).unwrap();
    (spec, clean)
}

fn cfg(lambda: f64) -> DenoiseConfig<f64> {
    DenoiseConfig { lambda, ..DenoiseConfig::default() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn noiseless_denoising_barely_moves_samples() {
    let (spec, clean) = f1_grid(500, 2);
    let y = Mod1Samples::wrapped(clean);
    for method in [Method::Trs, Method::Phases, Method::BurerMonteiro] {
        let out = denoise(&y, &spec, &DenoiseConfig { method, ..cfg(0.1) }).unwrap();
        assert!(wrap_rmse(&out, &y).unwrap() <= 1e-2, "{method}");
    }
}

#[test]
fn zero_lambda_returns_input() {
    let (spec, clean) = f1_grid(200, 2);
    let y = apply_noise(&clean, NoiseModel::Gaussian { sigma: 0.2 }, 1).unwrap();
    let out = denoise(&y, &spec, &cfg(0.0)).unwrap();
    for (a, b) in out.values().iter().zip(y.values()) {
        let d = (a - b).abs();
        assert!(d.min(1.0 - d) <= 1e-9);
    }
}

#[test]
fn denoising_reduces_gaussian_error() {
    let (spec, clean) = f1_grid(500, 2);
    let truth = Mod1Samples::wrapped(clean.iter().copied());
    let improved = (0..20u64)
        .filter(|&t| {
            let y = apply_noise(&clean, NoiseModel::Gaussian { sigma: 0.1 }, derive_seed(1, t)).unwrap();
            let out = denoise(&y, &spec, &cfg(0.1)).unwrap();
            wrap_rmse(&out, &truth).unwrap() < wrap_rmse(&y, &truth).unwrap()
        })
        .count();
    assert!(improved >= 18, "{improved}/20");
}

#[test]
fn single_iteration_equals_single_pass() {
    let (spec, clean) = f1_grid(300, 2);
    let y = apply_noise(&clean, NoiseModel::Bounded { gamma: 0.2 }, 3).unwrap();
    let once = denoise(&y, &spec, &cfg(0.1)).unwrap();
    let iterated = denoise_iterated(&y, &spec, &DenoiseConfig { iterations: 1, ..cfg(0.1) }).unwrap();
    assert_eq!(once, iterated);
}

#[test]
fn iterating_preserves_clean_signal() {
    let (spec, clean) = f1_grid(500, 2);
    let y = Mod1Samples::wrapped(clean);
    let out = denoise_iterated(&y, &spec, &DenoiseConfig { iterations: 10, ..cfg(0.1) }).unwrap();
    assert!(wrap_rmse(&out, &y).unwrap() <= 2e-2);
}

#[test]
fn iterating_helps_under_heavy_bounded_noise() {
    let (spec, clean) = f1_grid(500, 2);
    let truth = Mod1Samples::wrapped(clean.iter().copied());
    let (mut single, mut iterated) = (Vec::new(), Vec::new());
    for t in 0..20u64 {
        let y = apply_noise(&clean, NoiseModel::Bounded { gamma: 0.3 }, derive_seed(2, t)).unwrap();
        single.push(wrap_rmse(&denoise(&y, &spec, &cfg(0.1)).unwrap(), &truth).unwrap());
        iterated.push(wrap_rmse(&denoise_iterated(&y, &spec, &DenoiseConfig { iterations: 10, ..cfg(0.1) }).unwrap(), &truth).unwrap());
    }
    assert!(median(iterated.clone()) <= median(single.clone()), "{} vs {}", median(iterated), median(single));
}

#[test]
fn noiseless_correlation_tends_to_one() {
    let (spec, clean) = f1_grid(500, 2);
    let y = Mod1Samples::wrapped(clean);
    let out = Denoiser::new(&spec, cfg(1e-6)).unwrap().pass(&y).unwrap();
    assert!(correlation(&embed(&y), &out.gbar).unwrap() > 1.0 - 1e-6);
}

#[test]
fn bounded_noise_bound_holds_on_sweep() {
    let (spec, clean) = f1_grid(500, 2);
    let h = embed(&Mod1Samples::wrapped(clean.iter().copied()));
    let holder = FunctionSpec::f1().holder().unwrap();
    let params = BoundParams { lambda: 0.03, k: 2, n: 500, d: 1, holder_m: holder.m, alpha: holder.alpha };
    for t in 0..20u64 {
        let y = apply_noise(&clean, NoiseModel::Bounded { gamma: 0.1 }, derive_seed(3, t)).unwrap();
        let z = embed(&y);
        let out = Denoiser::new(&spec, cfg(0.03)).unwrap().pass(&y).unwrap();
        let delta = modulo_denoise::eval::realized_delta(&z, &h).unwrap();
        let corr = correlation(&h, &out.gbar).unwrap();
        assert!(check_bound(BoundKind::BoundedLine { delta }, &params, corr).unwrap().holds);
    }
}

#[test]
fn shift_alignment_examples() {
    let f: Vec<f64> = (0..400).map(|i| (i as f64 * 0.02).sin() * 2.0).collect();
    let same = mod_out_shift(&f, &f).unwrap();
    assert!(same.shift.abs() <= same.bin_width / 2.0 + 1e-12);
    // 10% of entries carry arbitrary offsets.
    let fh: Vec<f64> = f.iter().enumerate().map(|(i, v)| if i % 10 == 3 { v + 7.0 * (i as f64).sin() } else { v - 3.0 }).collect();
    let a = mod_out_shift(&f, &fh).unwrap();
    assert!((a.shift - 3.0).abs() <= a.bin_width / 2.0 + 1e-12, "{}", a.shift);
    assert!(rmse(&a.aligned, &f).unwrap() < rmse(&fh, &f).unwrap());
}

#[test]
fn experiment_rows_follow_the_sweep() {
    let cfg = ExperimentConfig {
        function: FunctionSpec::f1(),
        d: 1,
        m: 120,
        ks: vec![2, 3, 5],
        lambdas: vec![0.03, 0.1, 0.3, 0.5, 1.0],
        noise: NoiseModel::Bounded { gamma: 0.0 },
        levels: vec![0.1, 0.2],
        methods: vec![Method::Trs],
        iterations: 1,
        unwrap: UnwrapMethod::Ols,
        zeta: 0.5,
        trials: 2,
        master_seed: 1,
        eps: 0.1,
        solver: SolverOptions::default(),
        rank: 3,
    };
    let rows = run_experiment(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 3 * 5 * 2 * 2);
    assert!(rows.windows(2).all(|w| w[0].trial_index < w[1].trial_index));
    assert!(rows.iter().all(|r| (0.0..=0.5).contains(&r.wrap_rmse_mod1) && r.rmse_f_after_shift.is_finite()));
    // Bounds are reported only where λ < 1/(4k).
    for r in &rows {
        assert_eq!(r.bound_kind.is_some(), r.lambda < 1.0 / (4.0 * r.k as f64), "k={} lambda={}", r.k, r.lambda);
    }
    assert_eq!(summarize(&rows).len(), 3 * 5 * 2);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_records(&mut a, &rows, false).unwrap();
    write_records(&mut b, &run_experiment(&cfg, 3).unwrap(), false).unwrap();
    assert_eq!(a, b);
}
