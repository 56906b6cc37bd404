use easytime_core::automl::corpus::{pretrain_eval_config, toy_series};
use easytime_core::automl::{
    build_soft_labels, loss_and_gradient, pretrain_offline, train_classifier, ClassifierHyper, MetaDataset, MetaRow,
    RankedMethod,
};
use easytime_core::features::{RepresentationVector, REPRESENTATION_DIM};
use easytime_core::forecasters::MethodSpec;
use easytime_core::Series;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = REPRESENTATION_DIM;

/// Method "a" wins exactly when feature 1 exceeds 0.5, otherwise "b".
fn separable(n: usize, seed: u64) -> MetaDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let mut x = [0.0; D];
            for v in x.iter_mut().take(D - 1) {
                *v = rng.random_range(0.0..1.0);
            }
            x[D - 1] = 1.0;
            let a_wins = x[1] > 0.5;
            let noise: f64 = rng.random_range(0.0..0.2);
            let errors = if a_wins { vec![1.0 + noise, 2.0, 3.0] } else { vec![2.0, 1.0 + noise, 3.0] };
            MetaRow { dataset_id: format!("row{i}"), representation: RepresentationVector(x), errors }
        })
        .collect();
    MetaDataset::new(vec!["a".into(), "b".into(), "c".into()], rows).unwrap()
}

fn argmax(p: &[f64]) -> usize {
    (0..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best })
}

#[test]
fn separable_meta_dataset_is_learned() {
    let meta = separable(200, 21);
    let (train, held_out) = meta.rows.split_at(150);
    let train = MetaDataset::new(meta.method_ids.clone(), train.to_vec()).unwrap();
    let model = train_classifier(&train, &ClassifierHyper::default()).unwrap();
    let correct = held_out
        .iter()
        .filter(|r| {
            argmax(&model.probabilities(&r.representation.0))
                == argmax(&r.errors.iter().map(|e| -e).collect::<Vec<_>>())
        })
        .count();
    let accuracy = correct as f64 / held_out.len() as f64;
    eprintln!("held-out accuracy {accuracy}");
    assert!(accuracy >= 0.9, "held-out accuracy {accuracy}");
}

#[test]
fn gradient_matches_central_differences_at_random_points() {
    let meta = separable(10, 3);
    let labels = build_soft_labels(&meta, 1.0).unwrap();
    let inputs: Vec<[f64; D]> = meta.rows.iter().map(|r| r.representation.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let w: Vec<f64> = (0..3 * D).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&w, &inputs, &labels, 1e-4);
        for i in 0..w.len() {
            let eps = 1e-5;
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric = (loss_and_gradient(&plus, &inputs, &labels, 1e-4).0
                - loss_and_gradient(&minus, &inputs, &labels, 1e-4).0)
                / (2.0 * eps);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "coordinate {i}: analytic {} vs numeric {numeric}", grad[i]);
        }
    }
}

fn position(ranked: &[RankedMethod], id: &str) -> usize {
    ranked.iter().position(|r| r.method_id == id).unwrap()
}

#[test]
fn toy_corpus_separates_seasonal_from_trend() {
    let corpus: Vec<Series> = (0..20).flat_map(|i| [toy_series(true, i), toy_series(false, i)]).collect();
    let config = pretrain_eval_config();
    let outcome = pretrain_offline(&corpus, &MethodSpec::all_builtin(), &config, &Default::default()).unwrap();
    let again = pretrain_offline(&corpus, &MethodSpec::all_builtin(), &config, &Default::default()).unwrap();
    assert_eq!(outcome.model.to_json(), again.model.to_json());

    let wins = (100..120)
        .filter(|&seed| {
            let rec = easytime_core::automl::recommend(&outcome.model, &toy_series::<f64>(true, seed), 3).unwrap();
            position(&rec.ranked, "seasonal_naive") < position(&rec.ranked, "linear_trend")
        })
        .count();
    assert!(wins >= 18, "seasonal_naive ranked first in {wins}/20");
}
