//! Built-in test functions and the three residue noise models.
//!
//! All randomness comes from ChaCha20 (`rand_chacha`), seeded from a `u64`;
//! per-trial seeds are derived with [`derive_seed`] so that parallel trials
//! reproduce bit-for-bit.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::OnceLock;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::angular::{wrap, Mod1Samples};
use crate::error::{Error, Result};
use crate::grid_graph::GridSpec;
use crate::io::read_grid_file;
use crate::scalar::Real;

/// Name of the generator recorded in output metadata.
pub const RNG_NAME: &str = "chacha20";

/// Points used for dense sampling of derivatives and normalizers.
const DENSE_POINTS: usize = 100_000;

/// Half-width of the `[−2, 2]²` domain that the unit square is mapped onto
/// for the two-variable bump.
pub const FXY_HALF_WIDTH: f64 = 2.0;

/// Hölder constants: `|f(x) − f(y)| ≤ M ‖x − y‖₂^α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holder {
    pub m: f64,
    pub alpha: f64,
}

impl Holder {
    pub fn new(m: f64, alpha: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("Hölder constant M={m} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("Hölder exponent alpha={alpha} outside (0, 1]")));
        }
        Ok(Self { m, alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandlimited {
    pub modes: usize,
    pub scale: f64,
    pub shift: f64,
    pub seed: u64,
}

impl Default for Bandlimited {
    fn default() -> Self {
        Self { modes: 16, scale: 3.0, shift: 3.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    /// `4x cos²(2πx) − 2 sin²(2πx)` on `[0, 1]`.
    F1,
    /// `6u e^{−u²−v²}` with `(u, v)` the unit square mapped onto `[−2, 2]²`.
    Fxy,
    Bandlimited(Bandlimited),
    /// Square elevation grid, used as `f` directly after scaling.
    GridFile { path: PathBuf, scale: f64 },
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::F1 => write!(f, "f1"),
            Self::Fxy => write!(f, "fxy"),
            Self::Bandlimited(_) => write!(f, "bandlimited"),
            Self::GridFile { .. } => write!(f, "grid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    /// Overrides the built-in constants; required for bound checks on grid
    /// files.
    pub holder: Option<Holder>,
}

impl FunctionSpec {
    pub fn new(kind: FunctionKind) -> Self {
        Self { kind, holder: None }
    }

    pub fn f1() -> Self {
        Self::new(FunctionKind::F1)
    }

    pub fn fxy() -> Self {
        Self::new(FunctionKind::Fxy)
    }

    /// Supplied constants if any, else the built-in (densely sampled) ones.
    pub fn holder(&self) -> Option<Holder> {
        self.holder.or_else(|| match &self.kind {
            FunctionKind::F1 => Some(Holder { m: f1_lipschitz(), alpha: 1.0 }),
            FunctionKind::Fxy => Some(Holder { m: fxy_lipschitz(), alpha: 1.0 }),
            FunctionKind::Bandlimited(b) => Some(Holder { m: BandlimitedFn::new(b).lipschitz(), alpha: 1.0 }),
            FunctionKind::GridFile { .. } => None,
        })
    }

    /// Dimension the function is defined on.
    pub fn dimension(&self) -> usize {
        match self.kind {
            FunctionKind::F1 | FunctionKind::Bandlimited(_) => 1,
            FunctionKind::Fxy | FunctionKind::GridFile { .. } => 2,
        }
    }
}

pub fn f1(x: f64) -> f64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    4.0 * x * c * c - 2.0 * s * s
}

pub fn f1_derivative(x: f64) -> f64 {
    let c = (2.0 * PI * x).cos();
    4.0 * c * c - (8.0 * PI * x + 4.0 * PI) * (4.0 * PI * x).sin()
}

/// `max |f1'|` over a dense grid of `[0, 1]`.
pub fn f1_lipschitz() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        (0..DENSE_POINTS)
            .map(|i| f1_derivative(i as f64 / (DENSE_POINTS - 1) as f64).abs())
            .fold(0.0, f64::max)
    })
}

fn fxy_map(x: f64) -> f64 {
    FXY_HALF_WIDTH * (2.0 * x - 1.0)
}

pub fn fxy(x1: f64, x2: f64) -> f64 {
    let (u, v) = (fxy_map(x1), fxy_map(x2));
    6.0 * u * (-u * u - v * v).exp()
}

/// Gradient with respect to the unit-square coordinates.
pub fn fxy_gradient(x1: f64, x2: f64) -> [f64; 2] {
    let (u, v) = (fxy_map(x1), fxy_map(x2));
    let e = (-u * u - v * v).exp();
    let a = 2.0 * FXY_HALF_WIDTH;
    [a * 6.0 * (1.0 - 2.0 * u * u) * e, a * -12.0 * u * v * e]
}

/// `max ‖∇fxy‖₂` over a dense `1001²` grid of the unit square.
pub fn fxy_lipschitz() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        let p = 1001;
        let mut best = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                let [a, b] = fxy_gradient(i as f64 / (p - 1) as f64, j as f64 / (p - 1) as f64);
                best = best.max(a.hypot(b));
            }
        }
        best
    })
}

/// Random trigonometric sum `Σ_j a_j cos(πjx) + b_j sin(πjx)`, normalized
/// so its largest magnitude over a dense grid is 1, then scaled and shifted.
#[derive(Debug, Clone)]
pub struct BandlimitedFn {
    cos: Vec<f64>,
    sin: Vec<f64>,
    norm: f64,
    scale: f64,
    shift: f64,
}

impl BandlimitedFn {
    pub fn new(p: &Bandlimited) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let (mut cos, mut sin) = (Vec::with_capacity(p.modes), Vec::with_capacity(p.modes));
        for _ in 0..p.modes {
            cos.push(draw());
            sin.push(draw());
        }
        let mut f = Self { cos, sin, norm: 1.0, scale: p.scale, shift: p.shift };
        let peak = (0..DENSE_POINTS)
            .map(|i| f.raw(i as f64 / (DENSE_POINTS - 1) as f64).abs())
            .fold(0.0, f64::max);
        f.norm = if peak > 0.0 { peak } else { 1.0 };
        f
    }

    fn raw(&self, x: f64) -> f64 {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(j, (a, b))| {
                let (s, c) = (PI * j as f64 * x).sin_cos();
                a * c + b * s
            })
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.raw(x) / self.norm + self.shift
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(j, (a, b))| {
                let w = PI * j as f64;
                let (s, c) = (w * x).sin_cos();
                w * (b * c - a * s)
            })
            .sum();
        self.scale * d / self.norm
    }

    pub fn lipschitz(&self) -> f64 {
        (0..DENSE_POINTS)
            .map(|i| self.derivative(i as f64 / (DENSE_POINTS - 1) as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn require_dim(spec: &GridSpec, d: usize, name: &str) -> Result<()> {
    if spec.d() != d {
        return Err(Error::InvalidSpec(format!("{name} is defined for d={d}, grid has d={}", spec.d())));
    }
    Ok(())
}

/// Clean samples `f(x_i)` in flat (row-major) grid order.
pub fn sample_function<T: Real>(function: &FunctionSpec, spec: &GridSpec) -> Result<Vec<T>> {
    let n = spec.n();
    let values: Vec<f64> = match &function.kind {
        FunctionKind::F1 => {
            require_dim(spec, 1, "f1")?;
            (0..n).map(|i| f1(spec.coords::<f64>(i)[0])).collect()
        }
        FunctionKind::Fxy => {
            require_dim(spec, 2, "fxy")?;
            (0..n)
                .map(|i| {
                    let x = spec.coords::<f64>(i);
                    fxy(x[0], x[1])
                })
                .collect()
        }
        FunctionKind::Bandlimited(p) => {
            require_dim(spec, 1, "bandlimited")?;
            let f = BandlimitedFn::new(p);
            (0..n).map(|i| f.eval(spec.coords::<f64>(i)[0])).collect()
        }
        FunctionKind::GridFile { path, scale } => {
            require_dim(spec, 2, "grid file")?;
            let (rows, cols, values) = read_grid_file(path)?;
            if rows != spec.m() || cols != spec.m() {
                return Err(Error::InvalidSpec(format!(
                    "grid file is {rows}x{cols}, spec expects {m}x{m}",
                    m = spec.m()
                )));
            }
            values.into_iter().map(|v| v * scale).collect()
        }
    };
    Ok(values.into_iter().map(T::lit).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `δ_i ~ Uniform[−γ, γ]`.
    Bounded { gamma: f64 },
    /// Each residue replaced by `Uniform[0, 1)` with probability `p`.
    BernoulliUniform { p: f64 },
    /// `η_i ~ N(0, σ²)`.
    Gaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Bounded { gamma } => (0.0..0.5).contains(&gamma),
            Self::BernoulliUniform { p } => (0.0..=1.0).contains(&p),
            Self::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("noise parameter out of range: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bounded { .. } => "bounded",
            Self::BernoulliUniform { .. } => "bernoulli",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    /// `γ`, `p` or `σ`.
    pub fn level(&self) -> f64 {
        match *self {
            Self::Bounded { gamma } => gamma,
            Self::BernoulliUniform { p } => p,
            Self::Gaussian { sigma } => sigma,
        }
    }

    /// Same family with a different level.
    pub fn with_level(&self, level: f64) -> Self {
        match self {
            Self::Bounded { .. } => Self::Bounded { gamma: level },
            Self::BernoulliUniform { .. } => Self::BernoulliUniform { p: level },
            Self::Gaussian { .. } => Self::Gaussian { sigma: level },
        }
    }
}

/// Seed for trial `trial` of a run with master seed `master`: the first word
/// of ChaCha20 stream `trial`.
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng.next_u64()
}

/// Noisy residues `y_i = (f_i + noise) mod 1`.
pub fn apply_noise<T: Real>(clean: &[T], model: NoiseModel, seed: u64) -> Result<Mod1Samples<T>> {
    model.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values: Vec<T> = match model {
        NoiseModel::Bounded { gamma } => clean
            .iter()
            .map(|&f| {
                let u: f64 = rng.random();
                wrap(f + T::lit(gamma * (2.0 * u - 1.0)))
            })
            .collect(),
        NoiseModel::BernoulliUniform { p } => clean
            .iter()
            .map(|&f| {
                let flip: f64 = rng.random();
                if flip < p {
                    wrap(T::lit(rng.random::<f64>()))
                } else {
                    wrap(f)
                }
            })
            .collect(),
        NoiseModel::Gaussian { sigma } => clean
            .iter()
            .map(|&f| {
                let e: f64 = StandardNormal.sample(&mut rng);
                wrap(f + T::lit(sigma * e))
            })
            .collect(),
    };
    Mod1Samples::new(values)
}
