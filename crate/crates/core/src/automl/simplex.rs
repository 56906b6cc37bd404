//! Convex ensemble weights: projection onto the probability simplex and
//! projected gradient descent on the stacked validation residual.

use super::AutomlError;

/// Euclidean projection onto `{w ≥ 0, Σ w = 1}` by sort and threshold.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "projection of an empty vector");
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `f(w) = ‖Aᵀw − y‖² / L` where row `i` of `a` is member `i`'s stacked
/// forecasts (length `L`).
pub fn ensemble_loss(a: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    let l = y.len() as f64;
    (0..y.len())
        .map(|t| {
            let fit: f64 = a.iter().zip(w).map(|(row, wi)| wi * row[t]).sum();
            (fit - y[t]).powi(2)
        })
        .sum::<f64>()
        / l
}

fn gradient(a: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let l = y.len() as f64;
    let residual: Vec<f64> =
        (0..y.len()).map(|t| a.iter().zip(w).map(|(row, wi)| wi * row[t]).sum::<f64>() - y[t]).collect();
    a.iter().map(|row| 2.0 * row.iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / l).collect()
}

const MAX_ITERATIONS: usize = 1000;
const MIN_DECREASE: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
}

/// Minimizes [`ensemble_loss`] over the simplex, starting at the best
/// single member. Every accepted step strictly lowers the loss, so the
/// result is never worse than that member.
pub fn fit_ensemble_weights(a: &[Vec<f64>], y: &[f64]) -> Result<WeightFit, AutomlError> {
    let k = a.len();
    if k == 0 || y.is_empty() {
        return Err(AutomlError::NonFiniteInput("need at least one member and one target".into()));
    }
    if a.iter().any(|row| row.len() != y.len()) {
        return Err(AutomlError::NonFiniteInput("member forecasts and targets differ in length".into()));
    }
    if y.iter().chain(a.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(AutomlError::NonFiniteInput("non-finite forecast or target".into()));
    }

    let vertex = |i: usize| -> Vec<f64> { (0..k).map(|j| if j == i { 1.0 } else { 0.0 }).collect() };
    let (best, mut loss) = (0..k)
        .map(|i| (i, ensemble_loss(a, y, &vertex(i))))
        .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
    let mut w = vertex(best);
    if k == 1 {
        return Ok(WeightFit { weights: w, loss, iterations: 0 });
    }

    // ‖AAᵀ‖_∞ / L bounds half the Lipschitz constant of the gradient.
    let l = y.len() as f64;
    let gram_inf = (0..k)
        .map(|i| (0..k).map(|j| a[i].iter().zip(&a[j]).map(|(x, z)| x * z).sum::<f64>().abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut step = 1.0 / (2.0 * gram_inf / l + 1e-12);

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = gradient(a, y, &w);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let candidate = project_simplex(&trial);
            let f = ensemble_loss(a, y, &candidate);
            if f < loss {
                accepted = Some((candidate, f));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, f)) = accepted else { break };
        let decrease = loss - f;
        w = candidate;
        loss = f;
        if decrease < MIN_DECREASE {
            break;
        }
    }
    Ok(WeightFit { weights: w, loss, iterations })
}
