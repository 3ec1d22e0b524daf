//! Non-learning policy and the brought-time observation ordering.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fpc::{sample_indices, Observation};
use crate::lifecycle::{Marketplace, Product};

/// CTR-proportional allocation over the whole population; uniform when
/// every CTR is zero.
pub fn ctr_a_allocation(products: &[Product]) -> Vec<f64> {
    let total: f64 = products.iter().map(|p| p.p.max(0.0)).sum();
    if total > 0.0 && total.is_finite() {
        products.iter().map(|p| p.p.max(0.0) / total).collect()
    } else {
        vec![1.0 / products.len() as f64; products.len()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgeOrder {
    #[default]
    OldestFirst,
    NewestFirst,
}

/// Orders products by age, ties by id ascending.
pub fn sort_by_age(products: &mut [&Product], order: AgeOrder) {
    products.sort_by(|a, b| {
        let by_age = match order {
            AgeOrder::OldestFirst => b.age.cmp(&a.age),
            AgeOrder::NewestFirst => a.age.cmp(&b.age),
        };
        by_age.then(a.id.cmp(&b.id))
    });
}

/// Same sampling as the principal-component observation, rows ordered by age.
pub fn t_perm_observation<R: Rng + ?Sized>(
    market: &Marketplace,
    rng: &mut R,
    n_s: usize,
    order: AgeOrder,
) -> Result<Observation> {
    let indices = sample_indices(rng, market.len(), n_s)?;
    Ok(observe_by_age(market, &indices, order))
}

pub(crate) fn observe_by_age(market: &Marketplace, indices: &[usize], order: AgeOrder) -> Observation {
    let products = market.products();
    let mut chosen: Vec<&Product> = indices.iter().map(|&i| &products[i]).collect();
    sort_by_age(&mut chosen, order);
    Observation::from_products(chosen, market.config().d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpc::{build_observation, BlendRule, Direction};
    use crate::lifecycle::EnvConfig;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn market(n: usize) -> Marketplace {
        Marketplace::new(EnvConfig { n, ..EnvConfig::default() }, 2).unwrap()
    }

    #[test]
    fn proportional_allocation() {
        let mut m = market(2);
        m.products_mut()[0].p = 0.1;
        m.products_mut()[1].p = 0.3;
        let u = ctr_a_allocation(m.products());
        assert!((u[0] - 0.25).abs() < 1e-15 && (u[1] - 0.75).abs() < 1e-15);

        for p in m.products_mut() {
            p.p = 0.07;
        }
        assert_eq!(ctr_a_allocation(m.products()), vec![0.5, 0.5]);
        for p in m.products_mut() {
            p.p = 0.0;
        }
        assert_eq!(ctr_a_allocation(m.products()), vec![0.5, 0.5]);
    }

    #[test]
    fn age_sort_and_ties() {
        let mut m = market(3);
        for (p, age) in m.products_mut().iter_mut().zip([5, 1, 9]) {
            p.age = age;
        }
        let mut rng = seeded(0, "t");
        let obs = t_perm_observation(&m, &mut rng, 3, AgeOrder::OldestFirst).unwrap();
        assert_eq!(obs.ids, vec![2, 0, 1]);
        assert_eq!(obs.shape(), (3, 15));
        for p in m.products_mut() {
            p.age = 4;
        }
        let obs = t_perm_observation(&m, &mut rng, 3, AgeOrder::OldestFirst).unwrap();
        assert_eq!(obs.ids, vec![0, 1, 2]);
        assert!(t_perm_observation(&m, &mut rng, 4, AgeOrder::OldestFirst).is_err());
    }

    #[test]
    fn same_stream_samples_same_products() {
        let m = market(60);
        let dir = Direction::new(vec![1.0; 15], 0.999, BlendRule::Difference).unwrap();
        let by_age = t_perm_observation(&m, &mut seeded(5, "s"), 20, AgeOrder::OldestFirst).unwrap();
        let by_pc = build_observation(&m, &dir, &mut seeded(5, "s"), 20).unwrap().observation;
        let mut a = by_age.ids.clone();
        let mut b = by_pc.ids.clone();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn ctr_a_is_scale_invariant(ctrs in prop::collection::vec(0.001f64..0.2, 1..40), c in 0.01f64..100.0) {
            let mut m = market(ctrs.len());
            for (p, &v) in m.products_mut().iter_mut().zip(&ctrs) { p.p = v; }
            let u = ctr_a_allocation(m.products());
            for (p, &v) in m.products_mut().iter_mut().zip(&ctrs) { p.p = v * c; }
            let w = ctr_a_allocation(m.products());
            for (a, b) in u.iter().zip(&w) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            }
            prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
