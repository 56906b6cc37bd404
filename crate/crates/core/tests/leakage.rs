//! Scores on the test segment must not depend on anything past each
//! window's forecast span, and validation scores must not see the test segment.

use easytime_core::automl::{build_ensemble, ClassifierModel};
use easytime_core::evaluation::{evaluate, evaluate_detailed, EvalConfig, Segment, Strategy};
use easytime_core::forecasters::{MethodSpec, BUILTIN_METHODS};
use easytime_core::synthetic::{generate_synthetic, SyntheticSpec};
use easytime_core::Series;
use ndarray::s;

fn base() -> Series {
    generate_synthetic(&SyntheticSpec { length: 300, period: 12, ..Default::default() }, 17).unwrap()
}

fn corrupt_from(series: &Series, from: usize) -> Series {
    let mut v = series.values().to_owned();
    v.slice_mut(s![from.., ..]).mapv_inplace(|x| x * 50.0 + 1e4);
    series.map_values(v).unwrap()
}

#[test]
fn validation_scores_ignore_the_test_segment() {
    let series = base();
    let cfg = EvalConfig { strategy: Strategy::Rolling, horizon: 6, ..EvalConfig::default() };
    let test_start = 240;
    let tampered = corrupt_from(&series, test_start);
    for id in BUILTIN_METHODS {
        let spec = MethodSpec::new(id);
        let a = evaluate_detailed(&series, &spec, &cfg, Segment::Validation, &mut |_, _| {}).unwrap();
        let b = evaluate_detailed(&tampered, &spec, &cfg, Segment::Validation, &mut |_, _| {}).unwrap();
        assert_eq!(a.record.metric_values, b.record.metric_values, "{id}");
    }
}

#[test]
fn forecasts_only_use_points_before_their_origin() {
    let series = base();
    let cfg = EvalConfig { strategy: Strategy::Rolling, horizon: 12, ..EvalConfig::default() };
    for id in BUILTIN_METHODS {
        let spec = MethodSpec::new(id);
        let full = evaluate_detailed(&series, &spec, &cfg, Segment::Test, &mut |_, _| {}).unwrap();
        for w in &full.windows {
            let tampered = corrupt_from(&series, w.origin);
            let again = evaluate_detailed(&tampered, &spec, &cfg, Segment::Test, &mut |_, _| {}).unwrap();
            let same = again.windows.iter().find(|x| x.origin == w.origin).unwrap();
            assert_eq!(same.values, w.values, "{id} at origin {}", w.origin);
        }
    }
}

#[test]
fn ensembles_ignore_the_test_segment() {
    let series = base();
    let model = ClassifierModel::zeros(BUILTIN_METHODS.iter().map(|s| s.to_string()).collect());
    let cfg = EvalConfig::default();
    let a = build_ensemble(&series, &model, 3, &cfg).unwrap();
    let b = build_ensemble(&corrupt_from(&series, 240), &model, 3, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(evaluate(&series, &MethodSpec::new("naive"), &cfg).is_ok());
}
