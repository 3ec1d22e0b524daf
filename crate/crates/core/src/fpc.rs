//! Approximated state observations: a uniform sample of `n_s` products
//! ordered by projection onto a slowly tracked first principal component.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifecycle::{Marketplace, Product};
use crate::mechanism::dot;

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 1000;

/// Which way the running direction is blended with a fresh component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlendRule {
    /// `β·ê + (1−β)·(e_t − ê)`
    #[default]
    Difference,
    /// `β·ê + (1−β)·e_t`
    Convex,
}

/// Unit projection direction `ê` with decay rate `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub e_hat: Vec<f64>,
    pub beta: f64,
    pub rule: BlendRule,
    /// Updates skipped because the blend collapsed to zero.
    pub degenerate_updates: u64,
}

impl Direction {
    pub fn new(e_hat: Vec<f64>, beta: f64, rule: BlendRule) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("beta {beta} outside [0, 1]")));
        }
        let norm = l2(&e_hat);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("initial direction has zero norm"));
        }
        Ok(Self {
            e_hat: e_hat.iter().map(|v| v / norm).collect(),
            beta,
            rule,
            degenerate_updates: 0,
        })
    }

    /// Soft update toward `e_t`, after flipping `e_t` into the half-space of `ê`.
    pub fn update(&mut self, e_t: &[f64]) -> Result<()> {
        if e_t.len() != self.e_hat.len() {
            return Err(Error::Dimension {
                expected: self.e_hat.len(),
                actual: e_t.len(),
            });
        }
        let sign = if dot(e_t, &self.e_hat) < 0.0 { -1.0 } else { 1.0 };
        let (beta, rest) = (self.beta, 1.0 - self.beta);
        let blended: Vec<f64> = self
            .e_hat
            .iter()
            .zip(e_t)
            .map(|(&h, &e)| {
                let e = sign * e;
                match self.rule {
                    BlendRule::Difference => beta * h + rest * (e - h),
                    BlendRule::Convex => beta * h + rest * e,
                }
            })
            .collect();
        let norm = l2(&blended);
        if norm > 1e-300 && norm.is_finite() {
            self.e_hat = blended.into_iter().map(|v| v / norm).collect();
        } else {
            self.degenerate_updates += 1;
        }
        Ok(())
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gram matrix `SᵀS` of a row-major `rows × d` matrix.
pub fn gram(s: &[f64], rows: usize, d: usize) -> Vec<f64> {
    let mut g = vec![0.0; d * d];
    for r in 0..rows {
        let row = &s[r * d..(r + 1) * d];
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let gi = &mut g[i * d..(i + 1) * d];
            for j in i..d {
                gi[j] += ri * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[i * d + j] = g[j * d + i];
        }
    }
    g
}

/// Leading eigenvector of `SᵀS` by power iteration, with the sign chosen so
/// that the largest-magnitude coordinate is positive.
pub fn first_principal_component(s: &[f64], rows: usize, d: usize) -> Result<Vec<f64>> {
    if rows == 0 || d == 0 {
        return Err(Error::Empty("sample matrix"));
    }
    if s.len() != rows * d {
        return Err(Error::Dimension {
            expected: rows * d,
            actual: s.len(),
        });
    }
    let g = gram(s, rows, d);
    let trace: f64 = (0..d).map(|i| g[i * d + i]).sum();
    if trace <= 0.0 || !trace.is_finite() {
        return Err(Error::Degenerate("all-zero sample matrix"));
    }
    // Shift by a fraction of the trace so the iteration never stalls on a
    // ±λ pair; SᵀS is PSD so the top eigenvalue stays dominant.
    let shift = 1e-3 * trace / d as f64;
    let mut v: Vec<f64> = (0..d).map(|i| g[i * d + i].sqrt() + 1.0 / (1.0 + i as f64)).collect();
    normalize(&mut v);
    let mut next = vec![0.0; d];
    for _ in 0..POWER_MAX_ITERS {
        for i in 0..d {
            next[i] = shift * v[i] + dot(&g[i * d..(i + 1) * d], &v);
        }
        if l2(&next) == 0.0 {
            return Err(Error::Degenerate("power iteration collapsed"));
        }
        normalize(&mut next);
        let cos = dot(&next, &v).abs().min(1.0);
        let angle = (1.0 - cos * cos).max(0.0).sqrt();
        std::mem::swap(&mut v, &mut next);
        if angle < POWER_TOL {
            break;
        }
    }
    canonical_sign(&mut v);
    Ok(v)
}

fn normalize(v: &mut [f64]) {
    let n = l2(v);
    v.iter_mut().for_each(|x| *x /= n);
}

pub(crate) fn canonical_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `n_s × d` sorted attribute rows plus the ids that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rows: usize,
    pub d: usize,
    /// Row-major attribute matrix.
    pub data: Vec<f64>,
    pub ids: Vec<u64>,
}

impl Observation {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.d)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.d..(r + 1) * self.d]
    }

    pub fn from_products<'a>(products: impl IntoIterator<Item = &'a Product>, d: usize) -> Self {
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for p in products {
            data.extend_from_slice(&p.x);
            ids.push(p.id);
        }
        Self {
            rows: ids.len(),
            d,
            data,
            ids,
        }
    }
}

/// Uniform sample of `n_s` distinct population indices, returned in draw order.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, n_s: usize) -> Result<Vec<usize>> {
    if n_s > n {
        return Err(Error::Config(format!("n_s = {n_s} exceeds population n = {n}")));
    }
    if n_s == 0 {
        return Err(Error::Empty("observation sample"));
    }
    Ok(index::sample(rng, n, n_s).into_vec())
}

/// Orders products by projection descending, ties by id ascending.
pub fn sort_by_projection(products: &mut [&Product], e_hat: &[f64]) {
    let mut keyed: Vec<(f64, &Product)> = products.iter().map(|p| (dot(e_hat, &p.x), *p)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
    for (slot, (_, p)) in products.iter_mut().zip(keyed) {
        *slot = p;
    }
}

/// A freshly built observation and the first principal component of its
/// sampled rows.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub observation: Observation,
    pub e_t: Vec<f64>,
}

/// First principal component of the unsorted sample gathered from `indices`.
pub fn sample_component(market: &Marketplace, indices: &[usize]) -> Result<Vec<f64>> {
    let d = market.config().d;
    let products = market.products();
    let mut s = Vec::with_capacity(indices.len() * d);
    for &i in indices {
        s.extend_from_slice(&products[i].x);
    }
    first_principal_component(&s, indices.len(), d)
}

/// Samples `n_s` products, sorts them by `ê`, and reports the sample's component.
pub fn build_observation<R: Rng + ?Sized>(
    market: &Marketplace,
    direction: &Direction,
    rng: &mut R,
    n_s: usize,
) -> Result<Sampled> {
    let indices = sample_indices(rng, market.len(), n_s)?;
    observe_indices(market, &direction.e_hat, &indices)
}

pub(crate) fn observe_indices(market: &Marketplace, e_hat: &[f64], indices: &[usize]) -> Result<Sampled> {
    let d = market.config().d;
    if e_hat.len() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: e_hat.len(),
        });
    }
    let products = market.products();
    let mut chosen: Vec<&Product> = indices.iter().map(|&i| &products[i]).collect();
    let e_t = sample_component(market, indices)?;
    sort_by_projection(&mut chosen, e_hat);
    Ok(Sampled {
        observation: Observation::from_products(chosen, d),
        e_t,
    })
}
