//! Chronological train/validation/test partitioning.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_ratio: 0.7, val_ratio: 0.1, test_ratio: 0.2 }
    }
}

impl SplitSpec {
    pub fn new(train_ratio: f64, val_ratio: f64, test_ratio: f64) -> Result<Self, DataError> {
        let spec = Self { train_ratio, val_ratio, test_ratio };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for (name, r) in
            [("train_ratio", self.train_ratio), ("val_ratio", self.val_ratio), ("test_ratio", self.test_ratio)]
        {
            if !(r > 0.0 && r < 1.0) {
                return Err(DataError::InvalidRatios(format!("{name} = {r} is outside (0, 1)")));
            }
        }
        let total = self.train_ratio + self.val_ratio + self.test_ratio;
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidRatios(format!("ratios sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Index ranges of the three segments; contiguous, disjoint and covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

// Cumulative ratios like 0.7 + 0.1 land a hair below the exact product, so
// the floor tolerates rounding noise.
fn floor_product(n: usize, ratio: f64) -> usize {
    ((n as f64) * ratio + 1e-9).floor() as usize
}

/// Splits `n` points at `floor(n·train)` and `floor(n·(train+val))`.
pub fn split(n: usize, spec: &SplitSpec) -> Result<SplitRanges, DataError> {
    spec.validate()?;
    let a = floor_product(n, spec.train_ratio).min(n);
    let b = floor_product(n, spec.train_ratio + spec.val_ratio).clamp(a, n);
    let ranges = SplitRanges { train: 0..a, val: a..b, test: b..n };
    for (segment, r) in [("train", &ranges.train), ("validation", &ranges.val), ("test", &ranges.test)] {
        if r.is_empty() {
            return Err(DataError::DegenerateSplit { n, segment });
        }
    }
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floor_boundaries() {
        let s = SplitSpec::default();
        assert_eq!(split(10, &s).unwrap(), SplitRanges { train: 0..7, val: 7..8, test: 8..10 });
        assert_eq!(split(100, &s).unwrap(), SplitRanges { train: 0..70, val: 70..80, test: 80..100 });
    }

    #[test]
    fn empty_validation_segment() {
        let s = SplitSpec::new(0.98, 0.01, 0.01).unwrap();
        assert_eq!(split(3, &s).unwrap_err(), DataError::DegenerateSplit { n: 3, segment: "validation" });
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn ranges_partition(n in 3usize..2000, a in 0.05f64..0.9, b in 0.01f64..0.5) {
            prop_assume!(a + b < 0.99);
            let spec = SplitSpec { train_ratio: a, val_ratio: b, test_ratio: 1.0 - a - b };
            if let Ok(r) = split(n, &spec) {
                prop_assert_eq!(r.train.start, 0);
                prop_assert_eq!(r.train.end, r.val.start);
                prop_assert_eq!(r.val.end, r.test.start);
                prop_assert_eq!(r.test.end, n);
                prop_assert!(!r.train.is_empty() && !r.val.is_empty() && !r.test.is_empty());
            }
        }
    }
}
