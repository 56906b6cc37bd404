use super::ChannelState;
use crate::scalar::mean as avg;
use crate::Scalar;

pub(super) fn naive<T: Scalar>(x: &[T]) -> ChannelState<T> {
    ChannelState::Level { level: x[x.len() - 1] }
}

pub(super) fn mean<T: Scalar>(x: &[T]) -> ChannelState<T> {
    ChannelState::Level { level: avg(x) }
}

/// Slope of the line through the first and last observation.
pub(super) fn drift<T: Scalar>(x: &[T]) -> ChannelState<T> {
    let n = x.len();
    let last = x[n - 1];
    let slope = (last - x[0]) / T::from_usize_lossy(n - 1);
    ChannelState::Drift { last, slope }
}

pub(super) fn seasonal_naive<T: Scalar>(x: &[T], period: usize) -> ChannelState<T> {
    ChannelState::Seasonal { tail: x[x.len() - period..].to_vec() }
}
