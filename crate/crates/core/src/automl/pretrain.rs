use serde::{Deserialize, Serialize};

use super::classifier::{train_classifier, ClassifierHyper, ClassifierModel};
use super::meta::{MetaDataset, MetaRow};
use super::AutomlError;
use crate::evaluation::{evaluate_detailed, EvalConfig, Segment};
use crate::features::representation;
use crate::forecasters::MethodSpec;
use crate::pipeline::{sweep, PipelineOptions};
use crate::series::TimeSeries;
use crate::split::split;
use crate::Scalar;

#[derive(Default)]
pub struct PretrainOptions<'a> {
    pub hyper: ClassifierHyper,
    pub pipeline: PipelineOptions<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainOutcome {
    pub model: ClassifierModel,
    pub meta: MetaDataset,
    /// (series, method) cells whose error was imputed.
    pub imputed_cells: usize,
    /// Series dropped because every method failed on them.
    pub dropped_series: Vec<String>,
}

/// Evaluates every method on the validation segment of every series and
/// pairs the errors (`config.metrics[0]`) with the series representation.
///
/// The representation is computed on train + validation, the same data a
/// later recommendation for that series would see. A failed method scores
/// twice the worst error observed on its series.
pub fn collect_meta_dataset<T: Scalar>(
    corpus: &[TimeSeries<T>],
    methods: &[MethodSpec],
    config: &EvalConfig,
    options: &PipelineOptions<'_>,
) -> Result<(MetaDataset, usize, Vec<String>), AutomlError> {
    if corpus.is_empty() {
        return Err(AutomlError::EmptyCorpus);
    }
    if methods.is_empty() {
        return Err(AutomlError::InvalidMeta("no methods".into()));
    }
    config.validate()?;
    let metric = config.metrics[0].name();
    let cells = sweep(corpus.len(), methods.len(), options, |i, j| {
        evaluate_detailed(&corpus[i], &methods[j], config, Segment::Validation, &mut |_, _| {})
            .ok()
            .and_then(|o| o.record.metric_values.get(metric).copied())
            .filter(|e| e.is_finite())
    });

    let mut rows = Vec::with_capacity(corpus.len());
    let mut imputed = 0;
    let mut dropped = Vec::new();
    for (i, series) in corpus.iter().enumerate() {
        let errors = &cells[i * methods.len()..(i + 1) * methods.len()];
        let Some(worst) = errors.iter().flatten().copied().reduce(f64::max) else {
            dropped.push(series.id().to_string());
            continue;
        };
        imputed += errors.iter().filter(|e| e.is_none()).count();
        let visible = split(series.len(), &config.split)?.val.end;
        rows.push(MetaRow {
            dataset_id: series.id().to_string(),
            representation: representation(&series.prefix(visible)?)?,
            errors: errors.iter().map(|e| e.unwrap_or(2.0 * worst)).collect(),
        });
    }
    let ids = methods.iter().map(|m| m.method_id.clone()).collect();
    Ok((MetaDataset::new(ids, rows)?, imputed, dropped))
}

/// Builds the meta-dataset from `corpus` and trains the classifier on it.
pub fn pretrain_offline<T: Scalar>(
    corpus: &[TimeSeries<T>],
    methods: &[MethodSpec],
    config: &EvalConfig,
    options: &PretrainOptions<'_>,
) -> Result<PretrainOutcome, AutomlError> {
    let (meta, imputed_cells, dropped_series) = collect_meta_dataset(corpus, methods, config, &options.pipeline)?;
    let model = train_classifier(&meta, &options.hyper)?;
    Ok(PretrainOutcome { model, meta, imputed_cells, dropped_series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SyntheticSpec};

    #[test]
    fn empty_corpus_is_an_error() {
        let r = pretrain_offline::<f64>(&[], &MethodSpec::all_builtin(), &EvalConfig::default(), &Default::default());
        assert_eq!(r.unwrap_err(), AutomlError::EmptyCorpus);
    }

    #[test]
    fn failed_methods_are_penalized() {
        let corpus: Vec<TimeSeries<f64>> = (0..3)
            .map(|i| generate_synthetic(&SyntheticSpec { length: 300, ..Default::default() }, i).unwrap())
            .collect();
        let methods = vec![
            MethodSpec::new("naive"),
            MethodSpec::new("mean"),
            MethodSpec::new("seasonal_naive").with_param("period", 500.0),
        ];
        let (meta, imputed, dropped) =
            collect_meta_dataset(&corpus, &methods, &EvalConfig::default(), &Default::default()).unwrap();
        assert_eq!(imputed, 3);
        assert!(dropped.is_empty());
        for row in &meta.rows {
            assert_eq!(row.errors[2], 2.0 * row.errors[0].max(row.errors[1]));
        }
    }
}
