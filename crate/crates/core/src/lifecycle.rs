//! Noisy product-lifecycle model.
//!
//! Every product walks the introduction → growth → maturity → decline
//! state machine. Its CTR drifts only in growth (up) and decline (down),
//! following a logistic-derivative bump in the impressions accumulated since
//! the stage was entered, plus Gaussian noise in every stage.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Scale applied to accumulated impressions when mirrored into `x[1]`.
pub const Q_NORMALIZER: f64 = 1.0e6;
/// Attribute coordinate mirroring the (normalized) CTR.
pub const CTR_COORD: usize = 0;
/// Attribute coordinate mirroring the accumulated impressions.
pub const IMPRESSIONS_COORD: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum LifecycleStage {
    Introduction = 0,
    Growth = 1,
    Maturity = 2,
    Decline = 3,
}

impl LifecycleStage {
    pub const ALL: [LifecycleStage; 4] = [
        LifecycleStage::Introduction,
        LifecycleStage::Growth,
        LifecycleStage::Maturity,
        LifecycleStage::Decline,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(z: usize) -> Option<Self> {
        Self::ALL.get(z).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LifecycleStage::Introduction => "introduction",
            LifecycleStage::Growth => "growth",
            LifecycleStage::Maturity => "maturity",
            LifecycleStage::Decline => "decline",
        }
    }
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Config(format!("{name}: non-finite bound")));
        }
        if self.lo > self.hi {
            return Err(Error::Config(format!(
                "{name}: lower bound {} exceeds upper bound {}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    /// Affine image of `s ∈ [0, 1]`.
    pub fn lerp(&self, s: f64) -> f64 {
        self.lo + (self.hi - self.lo) * s
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(v: Interval) -> Self {
        [v.lo, v.hi]
    }
}

/// Environment block of the experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Population size.
    pub n: usize,
    /// Attribute dimension.
    pub d: usize,
    /// Total impressions handed out per step; allocation fractions are scaled by it.
    pub impressions_per_step: f64,
    pub q2: Interval,
    pub t1: Interval,
    pub t2: Interval,
    pub t3: Interval,
    pub delta_mu: Interval,
    pub delta_sigma: Interval,
    /// Stdev of the per-step CTR noise.
    pub sigma: f64,
    pub ctr_low: Interval,
    pub ctr_high: Interval,
    /// Steps a product spends in decline before it is retired and replaced.
    pub k_decline: u32,
    /// Hidden width of the fixed CTR-bounds network.
    pub bounds_hidden: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            d: 15,
            impressions_per_step: 5.0e7,
            q2: Interval::new(1.0e4, 1.0e6),
            t1: Interval::new(5.0, 30.0),
            t2: Interval::new(35.0, 120.0),
            t3: Interval::new(60.0, 180.0),
            delta_mu: Interval::new(1.0e4, 1.0e6),
            delta_sigma: Interval::new(2.5e3, 2.5e5),
            sigma: 0.016,
            ctr_low: Interval::new(0.01, 0.05),
            ctr_high: Interval::new(0.1, 0.15),
            k_decline: 100,
            bounds_hidden: 16,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.d < 2 {
            return Err(Error::Config(
                "d must be at least 2 (two coordinates mirror p and q)".into(),
            ));
        }
        if !(self.impressions_per_step > 0.0 && self.impressions_per_step.is_finite()) {
            return Err(Error::Config("impressions_per_step must be positive".into()));
        }
        for (name, iv) in [
            ("q2", &self.q2),
            ("t1", &self.t1),
            ("t2", &self.t2),
            ("t3", &self.t3),
            ("delta_mu", &self.delta_mu),
            ("delta_sigma", &self.delta_sigma),
            ("ctr_low", &self.ctr_low),
            ("ctr_high", &self.ctr_high),
        ] {
            iv.validate(name)?;
        }
        if self.q2.lo <= 0.0 {
            return Err(Error::Config("q2 must be positive".into()));
        }
        if self.delta_sigma.lo <= 0.0 {
            return Err(Error::Config("delta_sigma must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        if self.ctr_low.lo < 0.0 || self.ctr_low.hi >= self.ctr_high.lo {
            return Err(Error::Config(
                "ctr_low must be nonnegative and lie strictly below ctr_high".into(),
            ));
        }
        if self.t1.lo >= self.t2.hi || self.t2.lo >= self.t3.hi {
            return Err(Error::Config(
                "time threshold ranges admit no ordered draw t1 < t2 < t3".into(),
            ));
        }
        if self.bounds_hidden == 0 {
            return Err(Error::Config("bounds_hidden must be positive".into()));
        }
        Ok(())
    }

    /// Maps a raw CTR into `[0, 1]` over the global CTR envelope.
    pub fn normalize_ctr(&self, p: f64) -> f64 {
        (p - self.ctr_low.lo) / (self.ctr_high.hi - self.ctr_low.lo)
    }
}

/// Latent, unobservable lifecycle parameters of one product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub q2: f64,
    pub delta_mu: f64,
    pub delta_sigma: f64,
    pub c_l: f64,
    pub c_h: f64,
    pub sigma: f64,
}

const MAX_ORDER_RESAMPLES: usize = 10_000;

/// Draws thresholds and offsets; `c_l`/`c_h` are left at the envelope
/// midpoints and are overwritten by [`BoundsNet`] at spawn.
pub fn sample_latent_params<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> Result<LatentParams> {
    for (name, iv) in [
        ("q2", &cfg.q2),
        ("t1", &cfg.t1),
        ("t2", &cfg.t2),
        ("t3", &cfg.t3),
        ("delta_mu", &cfg.delta_mu),
        ("delta_sigma", &cfg.delta_sigma),
    ] {
        iv.validate(name)?;
    }
    let q2 = cfg.q2.sample(rng);
    let (mut t1, mut t2, mut t3);
    let mut tries = 0;
    loop {
        t1 = cfg.t1.sample(rng);
        t2 = cfg.t2.sample(rng);
        t3 = cfg.t3.sample(rng);
        if t1 < t2 && t2 < t3 {
            break;
        }
        tries += 1;
        if tries >= MAX_ORDER_RESAMPLES {
            return Err(Error::Config(
                "could not draw ordered time thresholds t1 < t2 < t3".into(),
            ));
        }
    }
    let delta_mu = cfg.delta_mu.sample(rng);
    let delta_sigma = cfg.delta_sigma.sample(rng);
    Ok(LatentParams {
        t1,
        t2,
        t3,
        q2,
        delta_mu,
        delta_sigma,
        c_l: cfg.ctr_low.lerp(0.5),
        c_h: cfg.ctr_high.lerp(0.5),
        sigma: cfg.sigma,
    })
}

/// Fixed network `x ↦ (c_l, c_h)`: one tanh hidden layer shared by two
/// logistic heads, each affinely scaled into its CTR interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsNet {
    d: usize,
    hidden: usize,
    w_hidden: Vec<f64>,
    b_hidden: Vec<f64>,
    w_low: Vec<f64>,
    b_low: f64,
    w_high: Vec<f64>,
    b_high: f64,
    ctr_low: Interval,
    ctr_high: Interval,
}

impl BoundsNet {
    /// Parameters drawn uniformly from `[-0.5, 0.5]`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> Self {
        let (d, hidden) = (cfg.d, cfg.bounds_hidden);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-0.5..=0.5)).collect() };
        let w_hidden = draw(hidden * d);
        let b_hidden = draw(hidden);
        let w_low = draw(hidden);
        let w_high = draw(hidden);
        let b = draw(2);
        Self {
            d,
            hidden,
            w_hidden,
            b_hidden,
            w_low,
            b_low: b[0],
            w_high,
            b_high: b[1],
            ctr_low: cfg.ctr_low,
            ctr_high: cfg.ctr_high,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ctr_bounds(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                actual: x.len(),
            });
        }
        let mut low = self.b_low;
        let mut high = self.b_high;
        for j in 0..self.hidden {
            let row = &self.w_hidden[j * self.d..(j + 1) * self.d];
            let pre: f64 = self.b_hidden[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let h = pre.tanh();
            low += self.w_low[j] * h;
            high += self.w_high[j] * h;
        }
        Ok((
            self.ctr_low.lerp(logistic(low)),
            self.ctr_high.lerp(logistic(high)),
        ))
    }
}

pub(crate) fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Deterministic part of the CTR drift: `(c_h − c_l)·e^{−δ} / ((2 − z)(1 + e^{−δ})²)`
/// in growth and decline, zero otherwise.
pub fn ctr_drift(z: LifecycleStage, q: f64, q_entry: f64, latent: &LatentParams) -> f64 {
    match z {
        LifecycleStage::Introduction | LifecycleStage::Maturity => 0.0,
        LifecycleStage::Growth | LifecycleStage::Decline => {
            let delta = (q - q_entry - latent.delta_mu) / latent.delta_sigma;
            // e^{-δ}/(1+e^{-δ})² written as s(1-s) so neither tail overflows.
            let s = logistic(delta);
            let bump = s * (1.0 - s);
            let sign = 2.0 - z.index() as f64;
            (latent.c_h - latent.c_l) * bump / sign
        }
    }
}

/// One draw of the per-step CTR increment. The noise term is drawn in every
/// stage so the RNG stream does not depend on the stage sequence.
pub fn ctr_increment<R: Rng + ?Sized>(
    z: LifecycleStage,
    q: f64,
    q_entry: f64,
    latent: &LatentParams,
    rng: &mut R,
) -> f64 {
    let xi: f64 = rng.sample::<f64, _>(StandardNormal) * latent.sigma;
    ctr_drift(z, q, q_entry, latent) + xi
}

/// Lifecycle state machine. `age` is the product's age after the current
/// step's increment and `q` its accumulated impressions.
pub fn next_stage(z: LifecycleStage, age: u32, q: f64, latent: &LatentParams) -> LifecycleStage {
    let age = f64::from(age);
    match z {
        LifecycleStage::Introduction if age > latent.t1 => LifecycleStage::Growth,
        LifecycleStage::Growth if q >= latent.q2 => LifecycleStage::Maturity,
        LifecycleStage::Growth if age > latent.t2 => LifecycleStage::Decline,
        LifecycleStage::Maturity if age > latent.t3 => LifecycleStage::Decline,
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: u64,
    /// Observable attributes; `x[CTR_COORD]` and `x[IMPRESSIONS_COORD]`
    /// mirror the normalized CTR and impressions.
    pub x: Vec<f64>,
    /// Current CTR.
    pub p: f64,
    /// Accumulated impressions.
    pub q: f64,
    pub z: LifecycleStage,
    /// Steps since the product was brought to the platform.
    pub age: u32,
    /// Impressions at entry to the current stage.
    pub q_entry: f64,
    /// Age at which the current stage was entered.
    pub stage_entry_age: u32,
    pub latent: LatentParams,
    /// Accumulated clicks, `Σ p·u·U`.
    pub cum_clicks: f64,
    /// Running `Σ p·u` over budget fractions; feeds the lifecycle reward.
    pub pu_sum: f64,
    /// Age at which maturity was entered, if it ever was.
    pub matured_at: Option<u32>,
}

impl Product {
    /// Applies the state machine; on a transition the stage-entry
    /// impressions are reset to the current `q`. Returns the new stage.
    pub fn stage_transition(&mut self) -> LifecycleStage {
        let next = next_stage(self.z, self.age, self.q, &self.latent);
        if next != self.z {
            self.z = next;
            self.q_entry = self.q;
            self.stage_entry_age = self.age;
            if next == LifecycleStage::Maturity {
                self.matured_at = Some(self.age);
            }
        }
        self.z
    }

    pub fn steps_in_stage(&self) -> u32 {
        self.age - self.stage_entry_age
    }

    fn refresh_observed(&mut self, cfg: &EnvConfig) {
        self.x[CTR_COORD] = cfg.normalize_ctr(self.p);
        self.x[IMPRESSIONS_COORD] = self.q / Q_NORMALIZER;
    }
}

pub fn spawn_product<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &BoundsNet,
    cfg: &EnvConfig,
    id: u64,
) -> Result<Product> {
    let mut x: Vec<f64> = (0..cfg.d).map(|_| rng.gen::<f64>()).collect();
    let mut latent = sample_latent_params(rng, cfg)?;
    let (c_l, c_h) = bounds.ctr_bounds(&x)?;
    latent.c_l = c_l;
    latent.c_h = c_h;
    x[CTR_COORD] = 0.0;
    x[IMPRESSIONS_COORD] = 0.0;
    let mut product = Product {
        id,
        x,
        p: c_l,
        q: 0.0,
        z: LifecycleStage::Introduction,
        age: 0,
        q_entry: 0.0,
        stage_entry_age: 0,
        latent,
        cum_clicks: 0.0,
        pu_sum: 0.0,
        matured_at: None,
    };
    product.refresh_observed(cfg);
    Ok(product)
}

/// Summary of one environment step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Stage counts of the population after the step.
    pub stage_counts: [usize; 4],
    /// Share of this step's impressions received by each stage (stage at allocation time).
    pub stage_shares: [f64; 4],
    pub replacements: usize,
    /// `Σ p·u·U` over the population.
    pub clicks: f64,
    /// Ages of products that entered maturity during this step.
    pub matured_ages: Vec<u32>,
    /// `(p, u)` per product, CTR taken before the drift update.
    pub ctr_and_share: Vec<(f64, f64)>,
}

/// Fixed-size product population.
#[derive(Clone, Debug)]
pub struct Marketplace {
    cfg: EnvConfig,
    bounds: BoundsNet,
    products: Vec<Product>,
    t: u64,
    next_id: u64,
    rng: ChaCha8Rng,
}

/// Tolerance on `Σu = 1`.
pub const ALLOCATION_TOL: f64 = 1e-9;

impl Marketplace {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded(seed, "marketplace");
        let bounds = BoundsNet::sample(&mut rng, &cfg);
        let mut products = Vec::with_capacity(cfg.n);
        for id in 0..cfg.n as u64 {
            products.push(spawn_product(&mut rng, &bounds, &cfg, id)?);
        }
        Ok(Self {
            next_id: cfg.n as u64,
            cfg,
            bounds,
            products,
            t: 0,
            rng,
        })
    }

    /// Builds a marketplace around an explicit population.
    pub fn from_products(cfg: EnvConfig, products: Vec<Product>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if products.len() != cfg.n {
            return Err(Error::Dimension {
                expected: cfg.n,
                actual: products.len(),
            });
        }
        if let Some(bad) = products.iter().find(|p| p.x.len() != cfg.d) {
            return Err(Error::Dimension {
                expected: cfg.d,
                actual: bad.x.len(),
            });
        }
        let mut rng = seeded(seed, "marketplace");
        let bounds = BoundsNet::sample(&mut rng, &cfg);
        let next_id = products.iter().map(|p| p.id + 1).max().unwrap_or(0);
        Ok(Self {
            cfg,
            bounds,
            products,
            t: 0,
            next_id,
            rng,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &BoundsNet {
        &self.bounds
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn products_mut(&mut self) -> &mut [Product] {
        &mut self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn stage_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for p in &self.products {
            counts[p.z.index()] += 1;
        }
        counts
    }

    /// Advances every product by one step under allocation `u`.
    pub fn step(&mut self, u: &[f64]) -> Result<StepReport> {
        validate_allocation(u, self.products.len())?;
        let budget = self.cfg.impressions_per_step;
        let mut report = StepReport {
            ctr_and_share: Vec::with_capacity(u.len()),
            ..StepReport::default()
        };
        for (idx, &share) in u.iter().enumerate() {
            let product = &mut self.products[idx];
            let impressions = share * budget;
            report.stage_shares[product.z.index()] += share;
            report.ctr_and_share.push((product.p, share));
            let clicks = product.p * impressions;
            report.clicks += clicks;
            product.cum_clicks += clicks;
            product.pu_sum += product.p * share;

            let q_before = product.q;
            product.q += impressions;
            let dp = ctr_increment(product.z, q_before, product.q_entry, &product.latent, &mut self.rng);
            product.p = (product.p + dp).clamp(product.latent.c_l, product.latent.c_h);
            product.age += 1;
            let before = product.z;
            let after = product.stage_transition();
            if after == LifecycleStage::Maturity && before != after {
                report.matured_ages.push(product.age);
            }

            if product.z == LifecycleStage::Decline && product.steps_in_stage() >= self.cfg.k_decline {
                let id = self.next_id;
                self.next_id += 1;
                self.products[idx] = spawn_product(&mut self.rng, &self.bounds, &self.cfg, id)?;
                report.replacements += 1;
            } else {
                product.refresh_observed(&self.cfg);
            }
        }
        report.stage_counts = self.stage_counts();
        self.t += 1;
        Ok(report)
    }
}

pub fn validate_allocation(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: u.len(),
        });
    }
    let mut sum = 0.0;
    for &v in u {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Allocation(format!("entry {v} is negative or non-finite")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > ALLOCATION_TOL {
        return Err(Error::Allocation(format!("entries sum to {sum}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn latent() -> LatentParams {
        LatentParams {
            t1: 7.0,
            t2: 40.0,
            t3: 90.0,
            q2: 5.0e5,
            delta_mu: 2.0e5,
            delta_sigma: 5.0e4,
            c_l: 0.02,
            c_h: 0.12,
            sigma: 0.0,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn default_sampling_stays_in_ranges() {
        let cfg = EnvConfig::default();
        let mut r = rng();
        for _ in 0..10_000 {
            let l = sample_latent_params(&mut r, &cfg).unwrap();
            assert!(cfg.q2.contains(l.q2));
            assert!(cfg.t1.contains(l.t1));
            assert!(cfg.t2.contains(l.t2));
            assert!(cfg.t3.contains(l.t3));
            assert!(cfg.delta_mu.contains(l.delta_mu));
            assert!(cfg.delta_sigma.contains(l.delta_sigma));
            assert!(l.t1 < l.t2 && l.t2 < l.t3);
            assert_eq!(l.sigma, 0.016);
        }
    }

    #[test]
    fn degenerate_interval_is_exact() {
        let cfg = EnvConfig {
            t1: Interval::point(7.0),
            ..EnvConfig::default()
        };
        let l = sample_latent_params(&mut rng(), &cfg).unwrap();
        assert_eq!(l.t1, 7.0);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let cfg = EnvConfig::default();
        let a = sample_latent_params(&mut rng(), &cfg).unwrap();
        let b = sample_latent_params(&mut rng(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inverted_range_is_config_error() {
        let cfg = EnvConfig {
            q2: Interval::new(2.0, 1.0),
            ..EnvConfig::default()
        };
        assert!(matches!(sample_latent_params(&mut rng(), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn overlapping_time_ranges_are_resampled_into_order() {
        let cfg = EnvConfig {
            t1: Interval::new(5.0, 50.0),
            t2: Interval::new(20.0, 60.0),
            t3: Interval::new(40.0, 80.0),
            ..EnvConfig::default()
        };
        let mut r = rng();
        for _ in 0..1000 {
            let l = sample_latent_params(&mut r, &cfg).unwrap();
            assert!(l.t1 < l.t2 && l.t2 < l.t3);
        }
    }

    #[test]
    fn bounds_are_scaled_and_deterministic() {
        let cfg = EnvConfig::default();
        let mut r = rng();
        let net = BoundsNet::sample(&mut r, &cfg);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..cfg.d).map(|_| r.gen()).collect();
            let (lo, hi) = net.ctr_bounds(&x).unwrap();
            assert!((0.01..=0.05).contains(&lo));
            assert!((0.1..=0.15).contains(&hi));
            assert_eq!(net.ctr_bounds(&x).unwrap(), (lo, hi));
        }
        assert!(matches!(net.ctr_bounds(&[0.0; 3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn bounds_depend_on_attributes() {
        let cfg = EnvConfig::default();
        let mut r = rng();
        let net = BoundsNet::sample(&mut r, &cfg);
        let a: Vec<f64> = (0..cfg.d).map(|_| r.gen()).collect();
        let b: Vec<f64> = (0..cfg.d).map(|_| r.gen()).collect();
        assert_ne!(net.ctr_bounds(&a).unwrap(), net.ctr_bounds(&b).unwrap());
    }

    #[test]
    fn increment_matches_closed_forms() {
        let l = latent();
        let spread = l.c_h - l.c_l;
        let mut r = rng();
        assert_eq!(ctr_increment(LifecycleStage::Introduction, 1.0e5, 0.0, &l, &mut r), 0.0);
        assert_eq!(ctr_increment(LifecycleStage::Maturity, 1.0e5, 0.0, &l, &mut r), 0.0);
        let q_entry = 3.0e4;
        let at_center = q_entry + l.delta_mu;
        let up = ctr_increment(LifecycleStage::Growth, at_center, q_entry, &l, &mut r);
        assert!((up - spread / 4.0).abs() < 1e-15);
        let down = ctr_increment(LifecycleStage::Decline, at_center, q_entry, &l, &mut r);
        assert!((down + spread / 4.0).abs() < 1e-15);
    }

    #[test]
    fn increment_tails_vanish() {
        let l = latent();
        let spread = l.c_h - l.c_l;
        let mut r = rng();
        for delta in [-20.0, 20.0] {
            let q = l.delta_mu + delta * l.delta_sigma;
            let inc = ctr_increment(LifecycleStage::Growth, q, 0.0, &l, &mut r);
            // e^{-20}/(1+e^{-20})^2 ≈ 2.06e-9
            assert!(inc.abs() < 1e-6 * spread, "{inc}");
            assert!(inc > 0.0);
        }
        let far = ctr_drift(LifecycleStage::Growth, -1.0e12, 0.0, &l);
        assert!(far.is_finite() && far >= 0.0);
    }

    #[test]
    fn fsm_follows_thresholds() {
        let l = latent();
        use LifecycleStage::*;
        assert_eq!(next_stage(Introduction, 7, 0.0, &l), Introduction);
        assert_eq!(next_stage(Introduction, 8, 0.0, &l), Growth);
        assert_eq!(next_stage(Growth, 10, l.q2, &l), Maturity);
        assert_eq!(next_stage(Growth, 41, l.q2 - 1.0, &l), Decline);
        assert_eq!(next_stage(Growth, 41, l.q2, &l), Maturity);
        assert_eq!(next_stage(Growth, 40, l.q2 - 1.0, &l), Growth);
        assert_eq!(next_stage(Maturity, 90, 0.0, &l), Maturity);
        assert_eq!(next_stage(Maturity, 91, 0.0, &l), Decline);
        for age in [0, 50, 1000] {
            assert_eq!(next_stage(Decline, age, 1.0e9, &l), Decline);
        }
    }

    #[test]
    fn transition_resets_stage_entry() {
        let cfg = EnvConfig::default();
        let mut r = rng();
        let net = BoundsNet::sample(&mut r, &cfg);
        let mut p = spawn_product(&mut r, &net, &cfg, 0).unwrap();
        p.latent = latent();
        p.age = 8;
        p.q = 1234.0;
        assert_eq!(p.stage_transition(), LifecycleStage::Growth);
        assert_eq!(p.q_entry, 1234.0);
        assert_eq!(p.stage_entry_age, 8);
        p.q = l_q2(&p);
        p.age = 9;
        assert_eq!(p.stage_transition(), LifecycleStage::Maturity);
        assert_eq!(p.matured_at, Some(9));
        assert!(p.q_entry <= p.q);
    }

    fn l_q2(p: &Product) -> f64 {
        p.latent.q2
    }

    #[test]
    fn spawn_initial_state() {
        let cfg = EnvConfig::default();
        let mut r = rng();
        let net = BoundsNet::sample(&mut r, &cfg);
        for id in 0..10_000 {
            let p = spawn_product(&mut r, &net, &cfg, id).unwrap();
            assert_eq!(p.z, LifecycleStage::Introduction);
            assert_eq!(p.q, 0.0);
            assert_eq!(p.age, 0);
            assert_eq!(p.p, p.latent.c_l);
            assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(p.x[CTR_COORD], cfg.normalize_ctr(p.p));
            assert_eq!(p.x[IMPRESSIONS_COORD], 0.0);
        }
    }

    fn small_cfg(n: usize) -> EnvConfig {
        EnvConfig {
            n,
            impressions_per_step: 1.0e5,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn uniform_step_adds_equal_impressions() {
        let mut m = Marketplace::new(small_cfg(50), 3).unwrap();
        let before: Vec<f64> = m.products().iter().map(|p| p.q).collect();
        let u = vec![1.0 / 50.0; 50];
        let report = m.step(&u).unwrap();
        assert_eq!(report.replacements, 0);
        for (p, q0) in m.products().iter().zip(before) {
            assert!((p.q - q0 - 1.0e5 / 50.0).abs() < 1e-9);
        }
        assert_eq!(m.len(), 50);
        assert_eq!(m.step_count(), 1);
        assert_eq!(report.stage_counts.iter().sum::<usize>(), 50);
        assert!((report.stage_shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_bad_allocations() {
        let mut m = Marketplace::new(small_cfg(4), 3).unwrap();
        assert!(matches!(m.step(&[0.5, 0.5]), Err(Error::Dimension { .. })));
        assert!(matches!(m.step(&[0.5, 0.5, 0.5, 0.5]), Err(Error::Allocation(_))));
        assert!(matches!(m.step(&[1.5, -0.5, 0.0, 0.0]), Err(Error::Allocation(_))));
        assert_eq!(m.step_count(), 0);
    }

    #[test]
    fn ctr_stays_within_bounds_and_population_is_constant() {
        let cfg = EnvConfig {
            n: 200,
            impressions_per_step: 2.0e6,
            sigma: 0.05,
            k_decline: 10,
            ..EnvConfig::default()
        };
        let mut m = Marketplace::new(cfg, 9).unwrap();
        let u = vec![1.0 / 200.0; 200];
        let mut replaced = 0;
        for _ in 0..300 {
            let report = m.step(&u).unwrap();
            replaced += report.replacements;
            assert_eq!(m.len(), 200);
            for p in m.products() {
                assert!(p.p >= p.latent.c_l && p.p <= p.latent.c_h);
                assert!(p.q_entry <= p.q);
            }
        }
        assert!(replaced > 0);
    }

    #[test]
    fn growth_ctr_is_monotone_without_noise() {
        let cfg = EnvConfig {
            n: 1,
            sigma: 0.0,
            impressions_per_step: 2.0e4,
            ..EnvConfig::default()
        };
        let mut m = Marketplace::new(cfg, 5).unwrap();
        let mut prev: Option<(LifecycleStage, f64)> = None;
        for _ in 0..150 {
            let (z, p) = (m.products()[0].z, m.products()[0].p);
            if let Some((pz, pp)) = prev {
                if pz == LifecycleStage::Growth && z == LifecycleStage::Growth {
                    assert!(p >= pp);
                }
            }
            prev = Some((z, p));
            m.step(&[1.0]).unwrap();
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let run = || {
            let mut m = Marketplace::new(small_cfg(30), 21).unwrap();
            let u = vec![1.0 / 30.0; 30];
            for _ in 0..120 {
                m.step(&u).unwrap();
            }
            m.products().to_vec()
        };
        assert_eq!(run(), run());
    }
}
