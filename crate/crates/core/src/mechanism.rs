//! Action → scores → impression allocation, and the lifecycle-efficiency reward.

use crate::error::{Error, Result};
use crate::lifecycle::{logistic, Product};

/// Logistic score `1 / (1 + e^{−a·x})`.
pub fn score(a: &[f64], x: &[f64]) -> Result<f64> {
    if a.len() != x.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: x.len(),
        });
    }
    Ok(logistic(dot(a, x)))
}

/// Softmax over scores, shifted by the maximum.
pub fn allocate(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::Allocation(format!("non-finite score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut u: Vec<f64> = scores.iter().map(|&o| (o - max).exp()).collect();
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= total);
    Ok(u)
}

/// Scores every product under `a` and allocates the budget.
pub fn allocate_for_action(a: &[f64], products: &[Product]) -> Result<Vec<f64>> {
    if let Some(bad) = a.iter().find(|v| !v.is_finite()) {
        return Err(Error::Allocation(format!("non-finite action weight {bad}")));
    }
    let scores = products
        .iter()
        .map(|p| score(a, &p.x))
        .collect::<Result<Vec<_>>>()?;
    allocate(&scores)
}

/// Mean over products of the per-product average of `p·u` across its life.
/// Products that have not yet received a step contribute zero.
pub fn reward(products: &[Product]) -> f64 {
    if products.is_empty() {
        return 0.0;
    }
    let total: f64 = products
        .iter()
        .filter(|p| p.age > 0)
        .map(|p| p.pu_sum / f64::from(p.age))
        .sum();
    total / products.len() as f64
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
