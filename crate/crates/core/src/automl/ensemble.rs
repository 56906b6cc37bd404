use std::time::Instant;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::classifier::{recommend, ClassifierModel, Recommendation};
use super::simplex::{ensemble_loss, fit_ensemble_weights};
use super::AutomlError;
use crate::evaluation::{
    evaluate_detailed, prepare, score_window, EvalConfig, EvalError, EvalOutcome, EvalRecord, Segment, WindowFailure,
    WindowForecast,
};
use crate::forecasters::{FittedModel, MethodSpec};
use crate::normalize::NormalizerState;
use crate::series::TimeSeries;
use crate::Scalar;

/// A candidate refit on train + validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EnsembleMember<T> {
    pub spec: MethodSpec,
    pub model: FittedModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberValidation {
    pub method_id: String,
    /// Mean squared error on the stacked validation windows.
    pub loss: f64,
}

/// Weighted combination of refit candidates. Member models work on the
/// normalized scale; `normalizer` maps their forecasts back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EnsembleModel<T> {
    pub members: Vec<EnsembleMember<T>>,
    pub weights: Vec<f64>,
    pub normalizer: NormalizerState<T>,
    /// Index of the first point after the data the members were refit on.
    pub origin_index: usize,
    pub recommendation: Recommendation,
    pub validation_loss: f64,
    pub member_validation: Vec<MemberValidation>,
    /// Candidates that were dropped, with the reason.
    pub warnings: Vec<String>,
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn member_ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.spec.method_id.as_str()).collect()
    }

    pub fn member_specs(&self) -> Vec<MethodSpec> {
        self.members.iter().map(|m| m.spec.clone()).collect()
    }

    /// Original-scale forecast of the next `horizon` points after `origin_index`.
    pub fn predict(&self, horizon: usize) -> Result<Array2<T>, AutomlError> {
        let mut parts = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let f = crate::forecasters::predict(&m.model, horizon)
                .map_err(|e| AutomlError::NonFiniteInput(format!("{}: {e}", m.spec.method_id)))?;
            parts.push(self.normalizer.invert(f.values.view())?);
        }
        Ok(combine(&parts, &self.weights))
    }
}

fn combine<T: Scalar>(parts: &[Array2<T>], weights: &[f64]) -> Array2<T> {
    let mut out = Array2::<T>::zeros(parts[0].dim());
    for (p, &w) in parts.iter().zip(weights) {
        out.zip_mut_with(p, |o, &v| *o = *o + T::lit(w) * v);
    }
    out
}

fn stack<T: Scalar>(windows: &[WindowForecast<T>]) -> Vec<f64> {
    windows.iter().flat_map(|w| w.values.iter().map(|v| v.as_f64())).collect()
}

/// Recommends the top `k` methods for `series`, weights them on the
/// validation windows and refits them on train + validation.
///
/// The recommendation and every fit only see the train and validation
/// segments.
pub fn build_ensemble<T: Scalar>(
    series: &TimeSeries<T>,
    model: &ClassifierModel,
    k: usize,
    config: &EvalConfig,
) -> Result<EnsembleModel<T>, AutomlError> {
    config.validate()?;
    let prepared = prepare(series, config)?;
    let visible_end = prepared.ranges.val.end;
    let recommendation = recommend(model, &series.prefix(visible_end)?, k)?;

    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    for ranked in recommendation.top() {
        let spec = MethodSpec::new(ranked.method_id.clone()).with_seed(config.seed);
        match evaluate_detailed(series, &spec, config, Segment::Validation, &mut |_, _| {}) {
            Ok(outcome) => candidates.push((spec, outcome.windows)),
            Err(e) => warnings.push(format!("{} dropped: {e}", spec.method_id)),
        }
    }
    if candidates.is_empty() {
        return Err(AutomlError::AllCandidatesFailed(warnings));
    }

    let values = series.values();
    let target: Vec<f64> = candidates[0]
        .1
        .iter()
        .flat_map(|w| {
            let span = w.values.nrows();
            values.slice(s![w.origin..w.origin + span, ..]).iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        })
        .collect();
    let a: Vec<Vec<f64>> = candidates.iter().map(|(_, windows)| stack(windows)).collect();
    let fit = fit_ensemble_weights(&a, &target)?;
    let member_validation = candidates
        .iter()
        .enumerate()
        .map(|(i, (spec, _))| {
            let e: Vec<f64> = (0..a.len()).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
            MemberValidation { method_id: spec.method_id.clone(), loss: ensemble_loss(&a, &target, &e) }
        })
        .collect();

    let mut members = Vec::with_capacity(candidates.len());
    let mut weights = Vec::with_capacity(candidates.len());
    for ((spec, _), w) in candidates.into_iter().zip(&fit.weights) {
        match prepared.fit_at(&spec, visible_end, config.lookback) {
            Ok(model) => {
                members.push(EnsembleMember { spec, model });
                weights.push(*w);
            }
            Err(e) => warnings.push(format!("{} dropped at refit: {e}", spec.method_id)),
        }
    }
    if members.is_empty() {
        return Err(AutomlError::AllCandidatesFailed(warnings));
    }
    // Renormalize if a refit failure removed weight mass.
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        weights = vec![1.0 / members.len() as f64; members.len()];
    }

    Ok(EnsembleModel {
        members,
        weights,
        normalizer: prepared.normalizer,
        origin_index: visible_end,
        recommendation,
        validation_loss: fit.loss,
        member_validation,
        warnings,
    })
}

/// Scores the ensemble's members with their fixed weights on the test
/// segment. Each window refits the members on the history before its
/// origin, exactly like a single-method evaluation.
pub fn evaluate_ensemble<T: Scalar>(
    series: &TimeSeries<T>,
    ensemble: &EnsembleModel<T>,
    config: &EvalConfig,
) -> Result<EvalOutcome<T>, EvalError> {
    let started = Instant::now();
    let mut per_member = Vec::with_capacity(ensemble.members.len());
    for m in &ensemble.members {
        per_member.push(evaluate_detailed(series, &m.spec, config, Segment::Test, &mut |_, _| {})?.windows);
    }
    let values = series.values();
    let mut sums = vec![0.0; config.metrics.len()];
    let mut windows = Vec::with_capacity(per_member[0].len());
    for index in 0..per_member[0].len() {
        let parts: Vec<Array2<T>> = per_member.iter().map(|w| w[index].values.clone()).collect();
        let origin = per_member[0][index].origin;
        let combined = combine(&parts, &ensemble.weights);
        let span = combined.nrows();
        let actual = values.slice(s![origin..origin + span, ..]);
        let context = values.slice(s![origin.saturating_sub(config.lookback)..origin, ..]);
        let scores = score_window(&config.metrics, actual, combined.view(), context, config.mase_period)
            .map_err(|e| EvalError::Window { index, origin, source: WindowFailure::Metric(e) })?;
        for (acc, v) in sums.iter_mut().zip(scores) {
            *acc += v;
        }
        windows.push(WindowForecast { origin, values: combined });
    }
    let count = windows.len() as f64;
    let record = EvalRecord {
        dataset_id: series.id().to_string(),
        method_id: "ensemble".to_string(),
        strategy: config.strategy,
        horizon: config.horizon,
        lookback: config.lookback,
        stride: config.stride(),
        metric_values: config.metrics.iter().zip(&sums).map(|(m, t)| (m.name().to_string(), t / count)).collect(),
        n_windows: windows.len(),
        runtime_ms: started.elapsed().as_millis() as u64,
        config_digest: config.digest(),
    };
    Ok(EvalOutcome { record, windows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automl::classifier::ClassifierModel;
    use crate::features::REPRESENTATION_DIM;
    use crate::synthetic::{generate_synthetic, SyntheticSpec};

    fn series() -> TimeSeries<f64> {
        generate_synthetic(&SyntheticSpec { length: 360, period: 12, ..Default::default() }, 4).unwrap()
    }

    fn favouring(ids: &[&str], favourite: &str) -> ClassifierModel {
        let mut model = ClassifierModel::zeros(ids.iter().map(|s| s.to_string()).collect());
        let row = ids.iter().position(|m| *m == favourite).unwrap();
        model.w[row * REPRESENTATION_DIM + REPRESENTATION_DIM - 1] = 5.0;
        model
    }

    #[test]
    fn single_member_is_that_method() {
        let s = series();
        let model = favouring(&["naive", "seasonal_naive", "mean"], "seasonal_naive");
        let cfg = EvalConfig::default();
        let e = build_ensemble(&s, &model, 1, &cfg).unwrap();
        assert_eq!(e.member_ids(), ["seasonal_naive"]);
        assert_eq!(e.weights, vec![1.0]);
        let ens = evaluate_ensemble(&s, &e, &cfg).unwrap().record;
        let single = crate::evaluation::evaluate(&s, &MethodSpec::new("seasonal_naive"), &cfg).unwrap();
        assert_eq!(ens.metric_values, single.metric_values);
    }

    #[test]
    fn weights_on_simplex_and_beat_members_on_validation() {
        let s = series();
        let model = ClassifierModel::zeros(vec!["naive".into(), "seasonal_naive".into(), "theta".into()]);
        let e = build_ensemble(&s, &model, 3, &EvalConfig::default()).unwrap();
        assert_eq!(e.members.len(), 3);
        assert!((e.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for m in &e.member_validation {
            assert!(e.validation_loss <= m.loss + 1e-9);
        }
        let f = e.predict(24).unwrap();
        assert_eq!(f.dim(), (24, 1));
    }

    #[test]
    fn failed_candidates_are_dropped_with_warning() {
        let s = series();
        let mut model = favouring(&["naive", "external:/nonexistent/plugin"], "external:/nonexistent/plugin");
        model.w[REPRESENTATION_DIM - 1] = 1.0;
        let e = build_ensemble(&s, &model, 2, &EvalConfig::default()).unwrap();
        assert_eq!(e.member_ids(), ["naive"]);
        assert_eq!(e.warnings.len(), 1);

        let only_bad = favouring(&["external:/nonexistent/plugin"], "external:/nonexistent/plugin");
        assert!(matches!(
            build_ensemble(&s, &only_bad, 1, &EvalConfig::default()),
            Err(AutomlError::AllCandidatesFailed(_))
        ));
    }
}
