//! Error metrics and evaluators for the closed-form correlation lower bounds.

use std::f64::consts::PI;
use std::fmt;

use crate::angular::{wrap_distance_unchecked, CircleEmbedding, Mod1Samples};
use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Bins in the offset histogram used to estimate the global shift.
pub const SHIFT_BINS: usize = 100;

/// Global shift estimated from the mode of the offsets `f_i − f̂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftAlignment<T> {
    pub shift: T,
    pub bin_width: T,
    /// `f̂ + shift`.
    pub aligned: Vec<T>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: a, actual: b });
    }
    Ok(())
}

fn median<T: Real>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite offsets"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / T::lit(2.0)
    }
}

/// Histogram the offsets over `[min, max]` in [`SHIFT_BINS`] bins and take
/// the center of the fullest bin; ties go to the bin nearest the median.
pub fn mod_out_shift<T: Real>(f_true: &[T], f_hat: &[T]) -> Result<ShiftAlignment<T>> {
    check_lengths(f_true.len(), f_hat.len())?;
    if f_true.is_empty() {
        return Err(Error::InvalidArgument("cannot align empty vectors".into()));
    }
    let offsets: Vec<T> = f_true.iter().zip(f_hat).map(|(&a, &b)| a - b).collect();
    if let Some(i) = offsets.iter().position(|o| !o.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite offset at index {i}")));
    }
    let lo = offsets.iter().copied().fold(T::infinity(), T::min);
    let hi = offsets.iter().copied().fold(T::neg_infinity(), T::max);
    let width = (hi - lo) / T::from_count(SHIFT_BINS);
    let shift = if width == T::zero() {
        lo
    } else {
        let mut counts = [0usize; SHIFT_BINS];
        for &o in &offsets {
            let b = ((o - lo) / width).floor().to_usize().unwrap_or(0).min(SHIFT_BINS - 1);
            counts[b] += 1;
        }
        let center = |b: usize| lo + width * (T::from_count(b) + T::lit(0.5));
        let best = *counts.iter().max().expect("non-empty");
        let med = median(&offsets);
        let bin = (0..SHIFT_BINS)
            .filter(|&b| counts[b] == best)
            .min_by(|&a, &b| {
                (center(a) - med).abs().partial_cmp(&(center(b) - med).abs()).expect("finite")
            })
            .expect("some bin is modal");
        center(bin)
    };
    let aligned = f_hat.iter().map(|&v| v + shift).collect();
    Ok(ShiftAlignment { shift, bin_width: width, aligned })
}

/// `√(mean (a_i − b_i)²)`.
pub fn rmse<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    check_lengths(a.len(), b.len())?;
    if a.is_empty() {
        return Ok(T::zero());
    }
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok((s / T::from_count(a.len())).sqrt())
}

/// RMSE under the wrap-around distance; always in `[0, 0.5]`.
pub fn wrap_rmse<T: Real>(a: &Mod1Samples<T>, b: &Mod1Samples<T>) -> Result<T> {
    check_lengths(a.len(), b.len())?;
    if a.is_empty() {
        return Ok(T::zero());
    }
    let s: T = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| wrap_distance_unchecked(x, y).powi(2))
        .sum();
    Ok((s / T::from_count(a.len())).sqrt())
}

/// `(1/n) ⟨h̄, ĝ̄⟩`.
pub fn correlation<T: Real>(h_clean: &CircleEmbedding<T>, g_hat: &[T]) -> Result<T> {
    check_lengths(h_clean.stacked().len(), g_hat.len())?;
    Ok(dot(h_clean.stacked(), g_hat) / T::from_count(h_clean.n()))
}

/// Realized noise level `‖z̄ − h̄‖₂ / √n`.
pub fn realized_delta<T: Real>(z: &CircleEmbedding<T>, h: &CircleEmbedding<T>) -> Result<T> {
    check_lengths(h.stacked().len(), z.stacked().len())?;
    let s: T = z.stacked().iter().zip(h.stacked()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((s / T::from_count(h.n())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    /// Bounded noise, `d = 1`, with realized `δ`.
    BoundedLine { delta: f64 },
    /// Bernoulli-Uniform noise, high-probability form without the
    /// quadratic-form gain.
    Bernoulli { p: f64, eps: f64 },
    /// Gaussian noise, high-probability form without the quadratic-form gain.
    Gaussian { sigma: f64, eps: f64 },
    /// Bounded noise on a `d`-dimensional grid with realized `δ`.
    BoundedGrid { delta: f64 },
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BoundedLine { .. } => "bounded",
            Self::Bernoulli { .. } => "bernoulli",
            Self::Gaussian { .. } => "gaussian",
            Self::BoundedGrid { .. } => "bounded_grid",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Problem constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub lambda: f64,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    /// Hölder constant `M`.
    pub holder_m: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub params: BoundParams,
    pub correlation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Slack used when comparing a realized correlation against a bound.
pub const BOUND_SLACK: f64 = 1e-9;

fn max_degree(k: usize, d: usize) -> f64 {
    ((2 * k + 1) as f64).powi(d as i32) - 1.0
}

/// Smoothness penalty `λπ²M²(2k)^{2α} d^{2α} [(2k+1)^d − 1] / n^{2α/d}`.
///
/// For `d = 1` this equals `λπ²M²(2k)^{2α+1}/n^{2α}`.
pub fn smoothness_term(p: &BoundParams) -> f64 {
    let BoundParams { lambda, k, n, d, holder_m, alpha } = *p;
    let two_k = 2.0 * k as f64;
    lambda * PI * PI * holder_m * holder_m * two_k.powf(2.0 * alpha) * (d as f64).powf(2.0 * alpha) * max_degree(k, d)
        / (n as f64).powf(2.0 * alpha / d as f64)
}

fn validate_params(p: &BoundParams) -> Result<()> {
    if p.n < 2 || p.k == 0 || p.d == 0 {
        return Err(Error::Inadmissible(format!("need n >= 2, k >= 1, d >= 1 (got n={}, k={}, d={})", p.n, p.k, p.d)));
    }
    if !(p.lambda >= 0.0) {
        return Err(Error::Inadmissible(format!("lambda >= 0 violated (lambda={})", p.lambda)));
    }
    if !(p.holder_m > 0.0) || !(p.alpha > 0.0 && p.alpha <= 1.0) {
        return Err(Error::Inadmissible(format!("need M > 0 and alpha in (0, 1] (M={}, alpha={})", p.holder_m, p.alpha)));
    }
    Ok(())
}

fn require_univariate_lambda(p: &BoundParams) -> Result<()> {
    if p.d != 1 {
        return Err(Error::Inadmissible(format!("bound requires d = 1 (got d={})", p.d)));
    }
    let limit = 1.0 / (4.0 * p.k as f64);
    if !(p.lambda < limit) {
        return Err(Error::Inadmissible(format!("lambda < 1/(4k) violated: {} >= {limit}", p.lambda)));
    }
    Ok(())
}

fn require_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Inadmissible(format!("epsilon in (0, 1/2) violated (eps={eps})")));
    }
    Ok(())
}

fn require_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Inadmissible(format!("delta in [0, 1] violated (delta={delta})")));
    }
    Ok(())
}

/// Right-hand side of the selected bound, after checking its preconditions.
pub fn bound_value(kind: BoundKind, p: &BoundParams) -> Result<f64> {
    validate_params(p)?;
    match kind {
        BoundKind::BoundedLine { delta } => {
            require_univariate_lambda(p)?;
            require_delta(delta)?;
            Ok(1.0 - 1.5 * delta - smoothness_term(p))
        }
        BoundKind::BoundedGrid { delta } => {
            let limit = 1.0 / (2.0 * max_degree(p.k, p.d));
            if !(p.lambda < limit) {
                return Err(Error::Inadmissible(format!(
                    "lambda < 1/(2((2k+1)^d - 1)) violated: {} >= {limit}",
                    p.lambda
                )));
            }
            require_delta(delta)?;
            Ok(1.0 - 1.5 * delta - smoothness_term(p))
        }
        BoundKind::Bernoulli { p: prob, eps } => {
            require_univariate_lambda(p)?;
            require_eps(eps)?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(Error::Inadmissible(format!("p in [0, 1] violated (p={prob})")));
            }
            if !(prob + eps <= 0.5) {
                return Err(Error::Inadmissible(format!("p + eps <= 1/2 violated ({prob} + {eps})")));
            }
            Ok(1.0 - 3.0 * ((prob + eps) / 2.0).sqrt() - smoothness_term(p))
        }
        BoundKind::Gaussian { sigma, eps } => {
            require_univariate_lambda(p)?;
            require_eps(eps)?;
            let keep = (1.0 - eps) * (-2.0 * PI * PI * sigma * sigma).exp();
            if !(keep >= 0.5) {
                return Err(Error::Inadmissible(format!("(1 - eps) exp(-2 pi^2 sigma^2) >= 1/2 violated ({keep})")));
            }
            Ok(1.0 - 3.0 * ((1.0 - keep) / 2.0).sqrt() - smoothness_term(p))
        }
    }
}

/// Compares a realized correlation with the bound.
pub fn check_bound(kind: BoundKind, params: &BoundParams, correlation: f64) -> Result<BoundReport> {
    let bound = bound_value(kind, params)?;
    Ok(BoundReport { kind, params: *params, correlation, bound, holds: correlation >= bound - BOUND_SLACK })
}

/// Bernoulli-Uniform bound including the quadratic-form gain. Reported only;
/// it holds with a probability involving unspecified constants.
pub fn bernoulli_gain_bound(prob: f64, eps: f64, p: &BoundParams) -> Result<f64> {
    bound_value(BoundKind::Bernoulli { p: prob, eps }, p)?;
    let lk = p.lambda * p.k as f64;
    let g = (4.0 * lk + 1.0).powi(2);
    let gain = lk * (1.0 - eps) * prob / (6.0 * g);
    Ok(1.0 - (3.0 * ((prob + eps) / 2.0).sqrt() - gain) - smoothness_term(p) * (1.0 - (1.0 - prob).powi(2) / g))
}

/// Gaussian bound including the quadratic-form gain (report column only).
pub fn gaussian_gain_bound(sigma: f64, eps: f64, p: &BoundParams) -> Result<f64> {
    bound_value(BoundKind::Gaussian { sigma, eps }, p)?;
    let lk = p.lambda * p.k as f64;
    let g = (4.0 * lk + 1.0).powi(2);
    let s2 = sigma * sigma;
    let keep = (1.0 - eps) * (-2.0 * PI * PI * s2).exp();
    let e4 = (-4.0 * PI * PI * s2).exp();
    let gain = lk * (1.0 - eps) * (1.0 - e4).powi(2) / (6.0 * g);
    Ok(1.0 - (3.0 * ((1.0 - keep) / 2.0).sqrt() - gain) - smoothness_term(p) * (1.0 - e4 / g))
}
