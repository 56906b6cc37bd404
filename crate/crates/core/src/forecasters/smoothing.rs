//! Exponential smoothing family and the two-line Theta method.

use super::regression::line_fit;
use super::ChannelState;
use crate::Scalar;

fn ses_level<T: Scalar>(x: &[T], alpha: T) -> T {
    let mut level = x[0];
    for &v in &x[1..] {
        level = alpha * v + (T::one() - alpha) * level;
    }
    level
}

/// `l_t = α·x_t + (1−α)·l_{t−1}`, `l_0 = x_0`.
pub(super) fn ses<T: Scalar>(x: &[T], alpha: T) -> ChannelState<T> {
    ChannelState::Level { level: ses_level(x, alpha) }
}

/// Additive level + trend with `l_0 = x_0`, `b_0 = x_1 − x_0`.
pub(super) fn holt<T: Scalar>(x: &[T], alpha: T, beta: T) -> ChannelState<T> {
    let one = T::one();
    let mut level = x[0];
    let mut trend = x[1] - x[0];
    for &v in &x[1..] {
        let prev = level;
        level = alpha * v + (one - alpha) * (level + trend);
        trend = beta * (level - prev) + (one - beta) * trend;
    }
    ChannelState::Holt { level, trend }
}

/// Additive Holt-Winters with period `m ≥ 2`; needs `x.len() ≥ 2m`.
///
/// Initial level is the first-cycle mean, initial trend the difference of the
/// first two cycle means divided by `m`, and initial seasonals the first-cycle
/// deviations from its mean. Recursions start at `t = m`.
pub(super) fn holt_winters<T: Scalar>(x: &[T], alpha: T, beta: T, gamma: T, m: usize) -> ChannelState<T> {
    let one = T::one();
    let mf = T::from_usize_lossy(m);
    let first = x[..m].iter().copied().sum::<T>() / mf;
    let second = x[m..2 * m].iter().copied().sum::<T>() / mf;
    let mut level = first;
    let mut trend = (second - first) / mf;
    let mut season: Vec<T> = x[..m].iter().map(|&v| v - first).collect();
    for (t, &v) in x.iter().enumerate().skip(m) {
        let s_old = season[t % m];
        let prev = level;
        level = alpha * (v - s_old) + (one - alpha) * (level + trend);
        trend = beta * (level - prev) + (one - beta) * trend;
        season[t % m] = gamma * (v - level) + (one - gamma) * s_old;
    }
    let n = x.len();
    let seasonals = (0..m).map(|i| season[(n + i) % m]).collect();
    ChannelState::HoltWinters { level, trend, seasonals }
}

/// Mean of the least-squares line extrapolation and SES.
pub(super) fn theta<T: Scalar>(x: &[T], alpha: T) -> ChannelState<T> {
    let (intercept, slope) = line_fit(x);
    ChannelState::Theta { level: ses_level(x, alpha), intercept, slope, origin: T::from_usize_lossy(x.len() - 1) }
}
