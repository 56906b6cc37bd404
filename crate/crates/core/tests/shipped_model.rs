use easytime_core::automl::corpus::{meta_corpus, pretrain_eval_config, toy_series};
use easytime_core::automl::{pretrain_offline, pretrained_model, recommend, DEFAULT_K};
use easytime_core::forecasters::MethodSpec;
use easytime_core::Series;

#[test]
fn shipped_model_matches_a_fresh_pretraining_run() {
    let shipped = pretrained_model();
    let meta: Vec<Series> = meta_corpus();
    let fresh = pretrain_offline(&meta, &MethodSpec::all_builtin(), &pretrain_eval_config(), &Default::default())
        .unwrap()
        .model;
    assert_eq!(shipped.method_ids, fresh.method_ids);
    assert_eq!(shipped.w.len(), fresh.w.len());
    for (a, b) in shipped.w.iter().zip(&fresh.w) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn seasonal_series_gets_a_seasonal_method_in_its_top_three() {
    let model = pretrained_model();
    for seed in 0..5 {
        let series: Series = toy_series(true, 900 + seed);
        let rec = recommend(&model, &series, DEFAULT_K).unwrap();
        let top = rec.top_ids();
        assert!(top.iter().any(|m| ["seasonal_naive", "holt_winters", "theta"].contains(m)), "seed {seed}: {top:?}");
        let total: f64 = rec.ranked.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
