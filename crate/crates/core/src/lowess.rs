//! Weighted locally linear smoothing with tricube kernel weights.
//!
//! At each evaluation point `x0` the `q = ceil(bandwidth · n)` nearest observations
//! define the radius `h` (distance to the `q`-th nearest). Observation `j` gets
//! weight `w_j · (1 - (|x_j - x0| / h)^3)^3`, and the smoothed value is the
//! weighted least-squares line through those points evaluated at `x0`. No
//! robustness iterations are performed.

use crate::error::{Error, Result};
use crate::scalar::{lit, CompensatedSum, Real};

pub const GRID_POINTS: usize = 100;
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint<T> {
    pub x: T,
    pub y: T,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

pub fn tricube<T: Real>(u: T) -> T {
    let u = u.abs();
    if u >= T::one() {
        T::zero()
    } else {
        let v = T::one() - u * u * u;
        v * v * v
    }
}

/// Evenly spaced evaluation grid of `GRID_POINTS` points spanning the data.
pub fn evaluation_grid<T: Real>(min: T, max: T) -> Vec<T> {
    let step = (max - min) / lit((GRID_POINTS - 1) as f64);
    (0..GRID_POINTS)
        .map(|i| if i == GRID_POINTS - 1 { max } else { min + step * lit(i as f64) })
        .collect()
}

/// Smooths `points` and samples the fit on `evaluation_grid`.
pub fn lowess_curve<T: Real>(points: &[WeightedPoint<T>], bandwidth: T) -> Result<Curve<T>> {
    let sorted = prepare(points, bandwidth)?;
    let (min, max) = (sorted[0].x, sorted[sorted.len() - 1].x);
    let x = evaluation_grid(min, max);
    let y = smooth_at(&sorted, bandwidth, &x)?;
    Ok(Curve { x, y })
}

/// Smoothed values at arbitrary sorted or unsorted evaluation points.
pub fn lowess_at<T: Real>(points: &[WeightedPoint<T>], bandwidth: T, at: &[T]) -> Result<Vec<T>> {
    let sorted = prepare(points, bandwidth)?;
    smooth_at(&sorted, bandwidth, at)
}

fn prepare<T: Real>(points: &[WeightedPoint<T>], bandwidth: T) -> Result<Vec<WeightedPoint<T>>> {
    if points.len() < MIN_POINTS {
        return Err(Error::Argument(format!(
            "lowess needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    if !(bandwidth > T::zero() && bandwidth <= T::one()) {
        return Err(Error::domain("bandwidth", bandwidth, "0 < bandwidth <= 1"));
    }
    for p in points {
        if !(p.x.is_finite() && p.y.is_finite() && p.weight.is_finite() && p.weight >= T::zero()) {
            return Err(Error::Argument(format!(
                "lowess point ({}, {}, weight {}) is not finite with nonnegative weight",
                p.x, p.y, p.weight
            )));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite x"));
    Ok(sorted)
}

fn span<T: Real>(n: usize, bandwidth: T) -> usize {
    let q = (bandwidth * lit(n as f64)).ceil().to_usize().unwrap_or(n);
    q.clamp(2, n)
}

fn smooth_at<T: Real>(sorted: &[WeightedPoint<T>], bandwidth: T, at: &[T]) -> Result<Vec<T>> {
    let n = sorted.len();
    let q = span(n, bandwidth);
    at.iter()
        .map(|&x0| {
            // slide a q-wide window until it holds the q nearest neighbours of x0
            let mut left = sorted.partition_point(|p| p.x < x0).saturating_sub(q).min(n - q);
            while left + q < n && x0 - sorted[left].x > sorted[left + q].x - x0 {
                left += 1;
            }
            let window = &sorted[left..left + q];
            let h = (x0 - window[0].x).max(window[q - 1].x - x0);
            if h > T::zero() {
                local_linear(window, x0, h)
            } else {
                // at least q observations sit exactly at x0: average all of them
                let lo = sorted.partition_point(|p| p.x < x0);
                let hi = sorted.partition_point(|p| p.x <= x0);
                local_linear(&sorted[lo..hi], x0, h)
            }
        })
        .collect()
}

fn local_linear<T: Real>(window: &[WeightedPoint<T>], x0: T, h: T) -> Result<T> {
    let weights: Vec<T> = window
        .iter()
        .map(|p| {
            let k = if h > T::zero() {
                tricube((p.x - x0) / h)
            } else if p.x == x0 {
                T::one()
            } else {
                T::zero()
            };
            k * p.weight
        })
        .collect();
    let mut sw = CompensatedSum::new();
    let mut swx = CompensatedSum::new();
    let mut swy = CompensatedSum::new();
    for (p, &w) in window.iter().zip(&weights) {
        sw.add(w);
        swx.add(w * p.x);
        swy.add(w * p.y);
    }
    let sw = sw.value();
    if !(sw > T::zero()) {
        return Err(Error::Argument(format!("no positive weight near x = {x0}")));
    }
    let x_bar = swx.value() / sw;
    let y_bar = swy.value() / sw;
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    for (p, &w) in window.iter().zip(&weights) {
        let dx = p.x - x_bar;
        sxx.add(w * dx * dx);
        sxy.add(w * dx * (p.y - y_bar));
    }
    let sxx = sxx.value();
    // x barely varies inside the window: fall back to the local weighted mean
    let scale = if h > T::zero() { h * h } else { T::one() };
    if sxx <= sw * scale * lit(1e3) * T::epsilon() {
        return Ok(y_bar);
    }
    Ok(y_bar + sxy.value() / sxx * (x0 - x_bar))
}
