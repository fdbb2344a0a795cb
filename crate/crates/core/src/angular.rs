//! Angular embedding of modulo-1 residues on the unit circle.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maps a real value into `[0, 1)` as `t - floor(t)`.
///
/// Rounding can push the result of a tiny negative input to exactly `1.0`;
/// that case is folded back to `0.0`.
#[inline]
pub fn wrap<T: Real>(t: T) -> T {
    let r = t - t.floor();
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Residues in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mod1Samples<T> {
    values: Vec<T>,
}

impl<T: Real> Mod1Samples<T> {
    /// Validates that every value lies in `[0, 1)`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((index, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= T::zero() && v < T::one()))
        {
            return Err(Error::OutOfRange { index, value: v.to_f64_lossy() });
        }
        Ok(Self { values })
    }

    /// Reduces arbitrary reals modulo 1.
    pub fn wrapped(values: impl IntoIterator<Item = T>) -> Self {
        Self { values: values.into_iter().map(wrap).collect() }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unit-modulus embedding stored in stacked real form `[Re; Im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleEmbedding<T> {
    stacked: Vec<T>,
}

impl<T: Real> CircleEmbedding<T> {
    pub fn n(&self) -> usize {
        self.stacked.len() / 2
    }

    /// Stacked real vector of length `2n`.
    pub fn stacked(&self) -> &[T] {
        &self.stacked
    }

    pub fn re(&self) -> &[T] {
        &self.stacked[..self.n()]
    }

    pub fn im(&self) -> &[T] {
        &self.stacked[self.n()..]
    }

    pub fn get(&self, i: usize) -> Complex<T> {
        Complex::new(self.stacked[i], self.stacked[self.n() + i])
    }

    pub fn to_complex(&self) -> Vec<Complex<T>> {
        (0..self.n()).map(|i| self.get(i)).collect()
    }
}

/// `z_i = exp(2πι y_i)`.
pub fn embed<T: Real>(y: &Mod1Samples<T>) -> CircleEmbedding<T> {
    let n = y.len();
    let mut stacked = vec![T::zero(); 2 * n];
    for (i, &v) in y.values().iter().enumerate() {
        let (s, c) = (T::TAU() * v).sin_cos();
        stacked[i] = c;
        stacked[n + i] = s;
    }
    CircleEmbedding { stacked }
}

/// Splits a stacked `[Re; Im]` vector into complex entries.
pub fn unstack<T: Real>(stacked: &[T]) -> Vec<Complex<T>> {
    let n = stacked.len() / 2;
    (0..n).map(|i| Complex::new(stacked[i], stacked[n + i])).collect()
}

/// Inverse of [`unstack`].
pub fn stack<T: Real>(g: &[Complex<T>]) -> Vec<T> {
    g.iter().map(|c| c.re).chain(g.iter().map(|c| c.im)).collect()
}

/// Angle of each entry divided by `2π`, mapped into `[0, 1)`.
pub fn project_to_mod1<T: Real>(g: &[Complex<T>]) -> Result<Mod1Samples<T>> {
    let mut values = Vec::with_capacity(g.len());
    for (index, c) in g.iter().enumerate() {
        if c.re == T::zero() && c.im == T::zero() {
            return Err(Error::DegenerateEntry { index });
        }
        let mut t = c.im.atan2(c.re) / T::TAU();
        if t < T::zero() {
            t = t + T::one();
        }
        if t >= T::one() {
            t = T::zero();
        }
        values.push(t);
    }
    Ok(Mod1Samples { values })
}

/// [`project_to_mod1`] on a stacked real vector.
pub fn project_stacked<T: Real>(stacked: &[T]) -> Result<Mod1Samples<T>> {
    project_to_mod1(&unstack(stacked))
}

/// Wrap-around distance `min(|t1 - t2|, 1 - |t1 - t2|)` on `[0, 1]`.
pub fn wrap_distance<T: Real>(t1: T, t2: T) -> Result<T> {
    for t in [t1, t2] {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::InvalidArgument(format!("wrap distance input {t} outside [0, 1]")));
        }
    }
    Ok(wrap_distance_unchecked(t1, t2))
}

#[inline]
pub(crate) fn wrap_distance_unchecked<T: Real>(t1: T, t2: T) -> T {
    let d = (t1 - t2).abs();
    d.min(T::one() - d)
}

/// Worst-case wrap distance after normalizing an estimate within `epsilon`
/// of the clean unit-modulus sample: `asin(ε / (1 - ε)) / π`.
pub fn wrap_distance_bound<T: Real>(epsilon: T) -> Result<T> {
    let half = T::lit(0.5);
    if !(epsilon > T::zero() && epsilon < half) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 0.5)")));
    }
    Ok((epsilon / (T::one() - epsilon)).asin() / T::PI())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_known_angles() {
        let z = embed(&Mod1Samples::new(vec![0.0f64, 0.25]).unwrap());
        assert_eq!(z.get(0), Complex::new(1.0, 0.0));
        assert!((z.get(1) - Complex::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn project_known_values() {
        let y = project_to_mod1(&[Complex::new(0.5f64, 0.0), Complex::new(0.0, -2.0)]).unwrap();
        assert_eq!(y.values(), &[0.0, 0.75]);
    }

    #[test]
    fn project_rejects_zero() {
        let g = [Complex::new(1.0f64, 0.0), Complex::new(0.0, 0.0)];
        assert!(matches!(project_to_mod1(&g), Err(Error::DegenerateEntry { index: 1 })));
    }

    #[test]
    fn project_never_returns_one() {
        // atan2 of (1, -tiny) is -tiny, which rounds to exactly 1.0 after adding 1.
        let y = project_to_mod1(&[Complex::new(1.0f64, -1e-300)]).unwrap();
        assert!(y.values()[0] < 1.0);
    }

    #[test]
    fn wrap_handles_negatives() {
        assert_eq!(wrap(-0.25f64), 0.75);
        assert_eq!(wrap(2.5f64), 0.5);
        assert!(wrap(-1e-18f64) < 1.0);
    }

    #[test]
    fn samples_validate_range() {
        assert!(Mod1Samples::new(vec![0.0f64, 0.999]).is_ok());
        assert!(matches!(Mod1Samples::new(vec![0.2f64, 1.0]), Err(Error::OutOfRange { index: 1, .. })));
        assert!(Mod1Samples::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn wrap_distance_examples() {
        assert!((wrap_distance(0.9f64, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(wrap_distance(0.3f64, 0.3).unwrap(), 0.0);
        assert_eq!(wrap_distance(0.0f64, 0.5).unwrap(), 0.5);
        assert!(wrap_distance(1.2f64, 0.5).is_err());
    }

    #[test]
    fn wrap_distance_bound_examples() {
        let b = wrap_distance_bound(1.0f64 / 3.0).unwrap();
        assert!((b - 1.0 / 6.0).abs() < 1e-15);
        assert!(wrap_distance_bound(1e-12f64).unwrap() < 1e-12);
        assert!(wrap_distance_bound(0.5f64).is_err());
        assert!(wrap_distance_bound(0.0f64).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let y = Mod1Samples::new(vec![0.1f32, 0.6, 0.95]).unwrap();
        let back = project_stacked(embed(&y).stacked()).unwrap();
        for (a, b) in back.values().iter().zip(y.values()) {
            assert!(wrap_distance(*a, *b).unwrap() < 1e-6);
        }
    }
}
