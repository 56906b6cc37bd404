//! Least-squares methods: linear trend and AR(p) via normal equations.

use super::{ChannelState, ForecastError};
use crate::Scalar;

const RIDGE_LAMBDA: f64 = 1e-6;
const PIVOT_TOLERANCE: f64 = 1e-10;

/// OLS of `x` on `(1, t)` with `t = 0..n`; returns `(intercept, slope)`.
pub(super) fn line_fit<T: Scalar>(x: &[T]) -> (T, T) {
    let n = x.len();
    let nf = T::from_usize_lossy(n);
    let t_mean = T::from_usize_lossy(n - 1) / T::lit(2.0);
    let x_mean = x.iter().copied().sum::<T>() / nf;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (t, &v) in x.iter().enumerate() {
        let dt = T::from_usize_lossy(t) - t_mean;
        sxy = sxy + dt * (v - x_mean);
        sxx = sxx + dt * dt;
    }
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    (x_mean - slope * t_mean, slope)
}

pub(super) fn linear_trend<T: Scalar>(x: &[T]) -> ChannelState<T> {
    let (intercept, slope) = line_fit(x);
    ChannelState::Linear { intercept, slope, origin: T::from_usize_lossy(x.len() - 1) }
}

/// Cholesky factorisation of a symmetric matrix stored row-major; `None`
/// when a pivot falls below `relative_tol` times the largest diagonal entry.
fn cholesky<T: Scalar>(a: &[T], k: usize, relative_tol: f64) -> Option<Vec<T>> {
    let scale = (0..k).map(|i| a[i * k + i]).fold(T::zero(), T::max);
    let tol = T::lit(relative_tol) * scale.max(T::min_positive_value());
    let mut l = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s = s - l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<T: Scalar>(l: &[T], b: &[T], k: usize) -> Vec<T> {
    let mut y = vec![T::zero(); k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s = s - l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s = s - l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

/// Solves `(XᵀX) β = Xᵀy`, retrying with `λ = 1e-6` on the diagonal when
/// the system is rank deficient. The flag reports whether ridge was used.
pub(crate) fn solve_normal_equations<T: Scalar>(
    gram: &[T],
    rhs: &[T],
    k: usize,
) -> Result<(Vec<T>, bool), ForecastError> {
    if let Some(l) = cholesky(gram, k, PIVOT_TOLERANCE) {
        return Ok((cholesky_solve(&l, rhs, k), false));
    }
    let mut ridged = gram.to_vec();
    for i in 0..k {
        ridged[i * k + i] = ridged[i * k + i] + T::lit(RIDGE_LAMBDA);
    }
    let l = cholesky(&ridged, k, 0.0).ok_or(ForecastError::SingularFit)?;
    Ok((cholesky_solve(&l, rhs, k), true))
}

/// AR(p) with intercept. Rows are `[1, x_{t−1}, …, x_{t−p}] → x_t` for `t = p..n`.
pub(super) fn ar_ls<T: Scalar>(x: &[T], p: usize) -> Result<ChannelState<T>, ForecastError> {
    let n = x.len();
    let k = p + 1;
    let mut gram = vec![T::zero(); k * k];
    let mut rhs = vec![T::zero(); k];
    let mut row = vec![T::one(); k];
    for t in p..n {
        for lag in 1..=p {
            row[lag] = x[t - lag];
        }
        for i in 0..k {
            rhs[i] = rhs[i] + row[i] * x[t];
            for j in 0..k {
                gram[i * k + j] = gram[i * k + j] + row[i] * row[j];
            }
        }
    }
    let (beta, ridge) = solve_normal_equations(&gram, &rhs, k)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(ForecastError::SingularFit);
    }
    Ok(ChannelState::Autoregressive {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        tail: x[n - p..].to_vec(),
        ridge,
    })
}

/// Recursive multi-step forecast; `tail` holds the last `p` values, oldest first.
pub(super) fn ar_forecast<T: Scalar>(intercept: T, coefficients: &[T], tail: &[T], horizon: usize) -> Vec<T> {
    let mut buf = tail.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let len = buf.len();
        let mut y = intercept;
        for (lag, c) in coefficients.iter().enumerate() {
            y = y + *c * buf[len - 1 - lag];
        }
        out.push(y);
        buf.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_posed_system() {
        // [[4, 2], [2, 3]] β = [2, 1]  ⇒  β = (0.5, 0)
        let (b, ridge) = solve_normal_equations::<f64>(&[4.0, 2.0, 2.0, 3.0], &[2.0, 1.0], 2).unwrap();
        assert!(!ridge);
        assert!((b[0] - 0.5).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn singular_system_falls_back() {
        let (_, ridge) = solve_normal_equations(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0], 2).unwrap();
        assert!(ridge);
    }

    #[test]
    fn ar2_recovery() {
        // x_t = 1 + 0.6 x_{t-1} - 0.2 x_{t-2}
        let mut x: Vec<f64> = vec![0.3, -1.1];
        for t in 2..20 {
            let v = 1.0 + 0.6 * x[t - 1] - 0.2 * x[t - 2];
            x.push(v);
        }
        let ChannelState::Autoregressive { intercept, coefficients, .. } = ar_ls(&x, 2).unwrap() else { panic!() };
        assert!((intercept - 1.0).abs() < 1e-6, "{intercept}");
        assert!((coefficients[0] - 0.6).abs() < 1e-6 && (coefficients[1] + 0.2).abs() < 1e-6);
    }
}
