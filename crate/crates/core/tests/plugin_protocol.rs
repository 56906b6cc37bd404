use easytime_core::evaluation::{evaluate, EvalConfig};
use easytime_core::forecasters::{fit_predict, ForecastError, MethodSpec};
use easytime_core::synthetic::{generate_synthetic, SyntheticSpec};
use easytime_core::Series;
use ndarray::array;

fn echo() -> MethodSpec {
    MethodSpec::new(format!("external:{}", env!("CARGO_BIN_EXE_easytime-echo-plugin")))
}

#[test]
fn echo_plugin_matches_naive() {
    let history = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]];
    let plugin = fit_predict(&echo(), history.view(), 4).unwrap();
    let naive = fit_predict(&MethodSpec::new("naive"), history.view(), 4).unwrap();
    assert_eq!(plugin.values, naive.values);
}

#[test]
fn echo_plugin_evaluates_like_naive() {
    let series: Series = generate_synthetic(&SyntheticSpec::default(), 5).unwrap();
    let cfg = EvalConfig::default();
    let a = evaluate(&series, &echo(), &cfg).unwrap();
    let b = evaluate(&series, &MethodSpec::new("naive"), &cfg).unwrap();
    assert_eq!(a.metric_values, b.metric_values);
}

#[test]
fn misbehaving_plugins_are_reported() {
    let h = array![[1.0], [2.0]];
    let short = fit_predict(&echo().with_param("short", 1.0), h.view(), 3).unwrap_err();
    assert!(matches!(short, ForecastError::PluginProtocolError(_)), "{short:?}");

    let garbage = fit_predict(&echo().with_param("garbage", 1.0), h.view(), 3).unwrap_err();
    assert!(matches!(garbage, ForecastError::PluginProtocolError(_)), "{garbage:?}");

    let crash = fit_predict(&echo().with_param("exit_code", 7.0), h.view(), 3).unwrap_err();
    match crash {
        ForecastError::PluginCrash { code, stderr } => {
            assert_eq!(code, Some(7));
            assert!(stderr.contains("exiting on request"));
        }
        other => panic!("unexpected {other:?}"),
    }

    let slow = echo().with_param("sleep_ms", 5000.0).with_param("timeout_ms", 200.0);
    assert!(matches!(fit_predict(&slow, h.view(), 3).unwrap_err(), ForecastError::PluginTimeout(_)));

    let missing = MethodSpec::new("external:/definitely/not/here");
    assert!(matches!(fit_predict(&missing, h.view(), 3).unwrap_err(), ForecastError::PluginCrash { code: None, .. }));
}
