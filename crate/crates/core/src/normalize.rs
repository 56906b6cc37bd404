//! Per-channel z-score normalization fitted on the training segment only.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    #[default]
    Zscore,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormalizerState<T> {
    pub kind: NormalizationKind,
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

const MIN_STD: f64 = 1e-12;

impl<T: Scalar> NormalizerState<T> {
    /// Fits population mean/std per channel.
    pub fn fit(train: ArrayView2<'_, T>, kind: NormalizationKind) -> Result<Self, DataError> {
        let c = train.ncols();
        if train.nrows() == 0 {
            return Err(DataError::EmptySeries);
        }
        if kind == NormalizationKind::None {
            return Ok(Self::identity(c));
        }
        let mean = train.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let std = train.std_axis(Axis(0), T::zero()).to_vec();
        if let Some(channel) = std.iter().position(|s| s.as_f64() < MIN_STD) {
            return Err(DataError::ZeroVariance { channel });
        }
        Ok(Self { kind, mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        Self { kind: NormalizationKind::None, mean: vec![T::zero(); channels], std: vec![T::one(); channels] }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, m: &ArrayView2<'_, T>) -> Result<(), DataError> {
        if m.ncols() != self.channels() {
            return Err(DataError::ShapeMismatch(format!(
                "normalizer has {} channels, matrix has {}",
                self.channels(),
                m.ncols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, m: ArrayView2<'_, T>) -> Result<Array2<T>, DataError> {
        self.check(&m)?;
        let mut out = m.to_owned();
        if self.kind == NormalizationKind::Zscore {
            for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
                let (mu, sd) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|x| (x - mu) / sd);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, m: ArrayView2<'_, T>) -> Result<Array2<T>, DataError> {
        self.check(&m)?;
        let mut out = m.to_owned();
        if self.kind == NormalizationKind::Zscore {
            for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
                let (mu, sd) = (self.mean[j], self.std[j]);
                col.mapv_inplace(|x| x * sd + mu);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn fit_and_apply() {
        let st = NormalizerState::fit(array![[1.0], [3.0]].view(), NormalizationKind::Zscore).unwrap();
        assert_eq!(st.mean, vec![2.0]);
        assert_eq!(st.std, vec![1.0]);
        assert_eq!(st.apply(array![[2.0]].view()).unwrap(), array![[0.0]]);
    }

    #[test]
    fn constant_channel() {
        let err = NormalizerState::fit(array![[5.0], [5.0]].view(), NormalizationKind::Zscore).unwrap_err();
        assert_eq!(err, DataError::ZeroVariance { channel: 0 });
        assert!(NormalizerState::fit(array![[5.0], [5.0]].view(), NormalizationKind::None).is_ok());
    }

    #[test]
    fn channel_count_checked() {
        let st = NormalizerState::<f64>::identity(2);
        assert!(st.apply(array![[1.0]].view()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30),
                      probe in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..30)) {
            let train = crate::series::from_rows(&rows).unwrap();
            let x = crate::series::from_rows(&probe).unwrap();
            if let Ok(st) = NormalizerState::fit(train.view(), NormalizationKind::Zscore) {
                let back = st.invert(st.apply(x.view()).unwrap().view()).unwrap();
                let worst = (&back - &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                prop_assert!(worst < 1e-9);
            }
        }
    }
}
