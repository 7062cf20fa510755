//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the model and aggregation code is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Tolerance used when the code checks its own results (re-regressions, equation residuals).
    fn check_tolerance() -> Self;
}

impl Real for f32 {
    fn check_tolerance() -> Self {
        1e-3
    }
}

impl Real for f64 {
    fn check_tolerance() -> Self {
        1e-9
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion used for error messages and reports.
#[inline]
pub fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Kahan-Babuska (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

/// Weighted mean `Σ w·x / Σ w` with compensated sums. `None` when the weights sum to zero.
pub fn weighted_mean<T: Real, I: IntoIterator<Item = (T, T)>>(pairs: I) -> Option<T> {
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (x, w) in pairs {
        num.add(x * w);
        den.add(w);
    }
    let den = den.value();
    if den > T::zero() {
        Some(num.value() / den)
    } else {
        None
    }
}

/// Weighted least-squares slope of `y` on `x` (with intercept).
///
/// Returns `None` when the weighted variance of `x` is zero.
pub fn weighted_slope<T: Real>(points: &[(T, T, T)]) -> Option<T> {
    let x_bar = weighted_mean(points.iter().map(|&(x, _, w)| (x, w)))?;
    let y_bar = weighted_mean(points.iter().map(|&(_, y, w)| (y, w)))?;
    let sxy = compensated_sum(points.iter().map(|&(x, y, w)| w * (x - x_bar) * (y - y_bar)));
    let sxx = compensated_sum(points.iter().map(|&(x, _, w)| w * (x - x_bar) * (x - x_bar)));
    if sxx > T::zero() {
        Some(sxy / sxx)
    } else {
        None
    }
}

/// Weighted Pearson correlation. `None` when either side has zero variance.
pub fn weighted_correlation<T: Real>(points: &[(T, T, T)]) -> Option<T> {
    let x_bar = weighted_mean(points.iter().map(|&(x, _, w)| (x, w)))?;
    let y_bar = weighted_mean(points.iter().map(|&(_, y, w)| (y, w)))?;
    let sxy = compensated_sum(points.iter().map(|&(x, y, w)| w * (x - x_bar) * (y - y_bar)));
    let sxx = compensated_sum(points.iter().map(|&(x, _, w)| w * (x - x_bar) * (x - x_bar)));
    let syy = compensated_sum(points.iter().map(|&(_, y, w)| w * (y - y_bar) * (y - y_bar)));
    if sxx > T::zero() && syy > T::zero() {
        Some(sxy / (sxx * syy).sqrt())
    } else {
        None
    }
}
