//! Linear softmax classifier trained on soft labels, and the ranking it produces.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::meta::{build_soft_labels, softmax, MetaDataset, SoftLabelMatrix};
use super::AutomlError;
use crate::features::{
    characteristics, representation, CharacteristicVector, REPRESENTATION_DIM, REPRESENTATION_VERSION,
};
use crate::series::TimeSeries;
use crate::Scalar;

const D: usize = REPRESENTATION_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierHyper {
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn one() -> f64 {
    1.0
}
fn default_l2() -> f64 {
    1e-4
}
fn default_lr() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    500
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        Self { temperature: 1.0, l2: default_l2(), lr: default_lr(), epochs: default_epochs() }
    }
}

impl ClassifierHyper {
    pub fn validate(&self) -> Result<(), AutomlError> {
        let ok = self.temperature > 0.0 && self.l2 >= 0.0 && self.lr > 0.0;
        if !ok || !(self.temperature.is_finite() && self.l2.is_finite() && self.lr.is_finite()) {
            return Err(AutomlError::InvalidHyper(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub temperature: f64,
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub final_loss: f64,
    /// Loss before every epoch and after the last one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<f64>,
}

/// `p = softmax(W x)` over `method_ids`; `W` is `M × 16`, row-major, and the
/// last input entry is the constant bias feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub method_ids: Vec<String>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub train_meta: TrainMeta,
    pub representation_version: u32,
}

impl ClassifierModel {
    /// All-zero weights: every input maps to the uniform distribution.
    pub fn zeros(method_ids: Vec<String>) -> Self {
        let w = vec![0.0; method_ids.len() * D];
        let train_meta =
            TrainMeta { temperature: 1.0, l2: 0.0, epochs: 0, lr: 0.0, final_loss: f64::NAN, loss_history: vec![] };
        Self { method_ids, w, train_meta, representation_version: REPRESENTATION_VERSION }
    }

    pub fn validate(&self) -> Result<(), AutomlError> {
        if self.representation_version != REPRESENTATION_VERSION {
            return Err(AutomlError::VersionMismatch {
                found: self.representation_version,
                expected: REPRESENTATION_VERSION,
            });
        }
        let mut ids = self.method_ids.clone();
        ids.sort();
        ids.dedup();
        if self.method_ids.is_empty() || ids.len() != self.method_ids.len() {
            return Err(AutomlError::InvalidModel("method ids must be nonempty and distinct".into()));
        }
        if self.w.len() != self.method_ids.len() * D {
            return Err(AutomlError::InvalidModel(format!(
                "W has {} entries, expected {} x {D}",
                self.w.len(),
                self.method_ids.len()
            )));
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(AutomlError::InvalidModel("W has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AutomlError> {
        let model: Self = serde_json::from_str(text).map_err(|e| AutomlError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn n_methods(&self) -> usize {
        self.method_ids.len()
    }

    pub fn probabilities(&self, x: &[f64; D]) -> Vec<f64> {
        let mut z = logits(&self.w, x, self.n_methods());
        softmax(&mut z);
        z
    }
}

fn logits(w: &[f64], x: &[f64; D], m: usize) -> Vec<f64> {
    (0..m).map(|r| w[r * D..(r + 1) * D].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// `J(W) = (1/N) [Σ_i CE(q_i, softmax(W x_i)) + l2 ‖W‖² / 2]` and its gradient
/// `(1/N) [Σ_i (p_i − q_i) x_iᵀ + l2 W]`.
pub fn loss_and_gradient(w: &[f64], inputs: &[[f64; D]], labels: &SoftLabelMatrix, l2: f64) -> (f64, Vec<f64>) {
    let n = inputs.len() as f64;
    let m = w.len() / D;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (x, q) in inputs.iter().zip(&labels.rows) {
        let z = logits(w, x, m);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for r in 0..m {
            let log_p = z[r] - log_norm;
            loss -= q[r] * log_p;
            let coeff = log_p.exp() - q[r];
            for (g, xi) in grad[r * D..(r + 1) * D].iter_mut().zip(x) {
                *g += coeff * xi;
            }
        }
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, wi) in grad.iter_mut().zip(w) {
        *g = (*g + l2 * wi) / n;
    }
    (loss / n, grad)
}

/// Per-feature `(mean, scale)` of the non-bias inputs; constant features get scale 1.
fn standardization(inputs: &[[f64; D]]) -> ([f64; D], [f64; D]) {
    let n = inputs.len() as f64;
    let mut mean = [0.0; D];
    let mut scale = [1.0; D];
    for j in 0..D - 1 {
        mean[j] = inputs.iter().map(|x| x[j]).sum::<f64>() / n;
        let sd = (inputs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
        if sd > 1e-12 {
            scale[j] = sd;
        }
    }
    (mean, scale)
}

/// Full-batch gradient descent from `W = 0` with a fixed learning rate.
///
/// Descent runs on standardized inputs; the affine map is folded back into
/// `W` afterwards, so the returned model applies to raw representations.
pub fn train_classifier(meta: &MetaDataset, hyper: &ClassifierHyper) -> Result<ClassifierModel, AutomlError> {
    hyper.validate()?;
    let labels = build_soft_labels(meta, hyper.temperature)?;
    let m = meta.method_ids.len();
    if meta.len() < m {
        return Err(AutomlError::InvalidMeta(format!("{} rows is fewer than {m} methods", meta.len())));
    }
    let raw = meta.inputs();
    let (mean, scale) = standardization(&raw);
    let inputs: Vec<[f64; D]> = raw
        .iter()
        .map(|x| {
            let mut z = *x;
            for j in 0..D - 1 {
                z[j] = (x[j] - mean[j]) / scale[j];
            }
            z
        })
        .collect();

    let mut w = vec![0.0; m * D];
    let mut history = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..=hyper.epochs {
        let (loss, grad) = loss_and_gradient(&w, &inputs, &labels, hyper.l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(AutomlError::NonFiniteLoss { epoch, last_loss: history.last().copied().unwrap_or(f64::NAN) });
        }
        history.push(loss);
        if epoch == hyper.epochs {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= hyper.lr * g;
        }
    }

    for row in w.chunks_mut(D) {
        let mut bias = row[D - 1];
        for j in 0..D - 1 {
            row[j] /= scale[j];
            bias -= row[j] * mean[j];
        }
        row[D - 1] = bias;
    }
    let final_loss = *history.last().expect("at least one loss");
    Ok(ClassifierModel {
        method_ids: meta.method_ids.clone(),
        w,
        train_meta: TrainMeta {
            temperature: hyper.temperature,
            l2: hyper.l2,
            epochs: hyper.epochs,
            lr: hyper.lr,
            final_loss,
            loss_history: history,
        },
        representation_version: REPRESENTATION_VERSION,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMethod {
    pub method_id: String,
    pub probability: f64,
}

/// Full ranking over every method of the model; the first `k` are the picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub ranked: Vec<RankedMethod>,
    pub k: usize,
    pub characteristics: CharacteristicVector,
}

impl Recommendation {
    pub fn top(&self) -> &[RankedMethod] {
        &self.ranked[..self.k]
    }

    pub fn top_ids(&self) -> Vec<&str> {
        self.top().iter().map(|r| r.method_id.as_str()).collect()
    }
}

/// Sorts by descending probability, ties by method id.
pub fn rank(method_ids: &[String], probabilities: &[f64]) -> Vec<RankedMethod> {
    let mut ranked: Vec<RankedMethod> = method_ids
        .iter()
        .zip(probabilities)
        .map(|(id, &p)| RankedMethod { method_id: id.clone(), probability: p })
        .collect();
    ranked.sort_by(|a, b| {
        b.probability.partial_cmp(&a.probability).unwrap_or(Ordering::Equal).then_with(|| a.method_id.cmp(&b.method_id))
    });
    ranked
}

pub fn recommend<T: Scalar>(
    model: &ClassifierModel,
    series: &TimeSeries<T>,
    k: usize,
) -> Result<Recommendation, AutomlError> {
    model.validate()?;
    if k == 0 || k > model.n_methods() {
        return Err(AutomlError::InvalidK { k, methods: model.n_methods() });
    }
    let x = representation(series)?;
    let probabilities = model.probabilities(&x.0);
    Ok(Recommendation { ranked: rank(&model.method_ids, &probabilities), k, characteristics: characteristics(series)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automl::meta::MetaRow;
    use crate::features::RepresentationVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("m{i}")).collect()
    }

    fn random_meta(n: usize, m: usize, seed: u64) -> MetaDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let mut x = [0.0; D];
                for v in x.iter_mut().take(D - 1) {
                    *v = rng.random_range(-1.0..1.0);
                }
                x[D - 1] = 1.0;
                MetaRow {
                    dataset_id: format!("r{i}"),
                    representation: RepresentationVector(x),
                    errors: (0..m).map(|_| rng.random_range(0.0..3.0)).collect(),
                }
            })
            .collect();
        MetaDataset::new(ids(m), rows).unwrap()
    }

    fn finite_difference_error(meta: &MetaDataset, w: &[f64], l2: f64) -> f64 {
        let labels = build_soft_labels(meta, 1.0).unwrap();
        let inputs = meta.inputs();
        let (_, grad) = loss_and_gradient(w, &inputs, &labels, l2);
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..w.len() {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric = (loss_and_gradient(&plus, &inputs, &labels, l2).0
                - loss_and_gradient(&minus, &inputs, &labels, l2).0)
                / (2.0 * eps);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_at_zero() {
        let meta = random_meta(10, 3, 1);
        assert!(finite_difference_error(&meta, &vec![0.0; 3 * D], 1e-4) < 1e-4);
    }

    #[test]
    fn loss_is_non_increasing_and_deterministic() {
        let meta = random_meta(60, 4, 2);
        let a = train_classifier(&meta, &ClassifierHyper::default()).unwrap();
        let b = train_classifier(&meta, &ClassifierHyper::default()).unwrap();
        assert_eq!(a, b);
        for pair in a.train_meta.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn uniform_labels_stay_uniform() {
        let mut meta = random_meta(40, 3, 3);
        for row in &mut meta.rows {
            row.errors = vec![1.0; 3];
        }
        let model = train_classifier(&meta, &ClassifierHyper::default()).unwrap();
        for row in &meta.rows {
            for p in model.probabilities(&row.representation.0) {
                assert!((p - 1.0 / 3.0).abs() < 0.02);
            }
        }
    }

    #[test]
    fn zero_model_ranks_lexically() {
        let model = ClassifierModel::zeros(vec!["theta".into(), "drift".into(), "naive".into()]);
        let ranked = rank(&model.method_ids, &model.probabilities(&[0.5; D]));
        let names: Vec<_> = ranked.iter().map(|r| r.method_id.as_str()).collect();
        assert_eq!(names, ["drift", "naive", "theta"]);
    }

    #[test]
    fn artifact_round_trip_and_version_check() {
        let model =
            train_classifier(&random_meta(20, 3, 4), &ClassifierHyper { epochs: 5, ..Default::default() }).unwrap();
        let back = ClassifierModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let mut stale = model.clone();
        stale.representation_version += 1;
        assert!(matches!(ClassifierModel::from_json(&stale.to_json()), Err(AutomlError::VersionMismatch { .. })));
    }

    #[test]
    fn too_few_rows_rejected() {
        assert!(matches!(
            train_classifier(&random_meta(2, 3, 5), &ClassifierHyper::default()),
            Err(AutomlError::InvalidMeta(_))
        ));
    }
}
