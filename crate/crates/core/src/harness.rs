//! Experiment driver: configuration, the warmup-then-train protocol, per-step
//! metrics, relative comparisons, and file emission.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentVariant, Checkpoint, Trainer};
use crate::baselines::ctr_a_allocation;
use crate::error::{Error, Result};
use crate::lifecycle::{EnvConfig, LifecycleStage, Marketplace, StepReport};

/// Tolerance on the per-step stage share sum.
pub const SHARE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// CTR-A steps before the configured method takes over.
    pub warmup_steps: u64,
    pub train_steps: u64,
    pub seeds: Vec<u64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            warmup_steps: 360,
            train_steps: 1000,
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Write the final agent state next to the metrics.
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("runs"),
            formats: vec![Format::Csv, Format::Jsonl],
            checkpoint: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub protocol: ProtocolConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate(self.env.n)?;
        if self.agent.gamma >= 1.0 {
            return Err(Error::Config("gamma must be below 1 for the discounted reward".into()));
        }
        if self.protocol.seeds.is_empty() {
            return Err(Error::Config("protocol.seeds must list at least one seed".into()));
        }
        if self.protocol.warmup_steps + self.protocol.train_steps == 0 {
            return Err(Error::Config("protocol runs zero steps".into()));
        }
        Ok(())
    }
}

/// Allocation policy driving the post-warmup phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    CtrA,
    Agent(AgentVariant),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CtrA,
        Method::Agent(AgentVariant::TPerm),
        Method::Agent(AgentVariant::Fpc),
        Method::Agent(AgentVariant::FpcCnn),
        Method::Agent(AgentVariant::FpcCnnExp),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CtrA => "ctr-a",
            Method::Agent(v) => v.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `J' = γJ + r`.
pub fn discounted_accumulated_reward(prev: f64, r: f64, gamma: f64) -> f64 {
    gamma * prev + r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Train,
}

/// One line of the per-step metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub phase: Phase,
    pub reward: f64,
    pub discounted_reward: f64,
    pub count_introduction: usize,
    pub count_growth: usize,
    pub count_maturity: usize,
    pub count_decline: usize,
    pub share_introduction: f64,
    pub share_growth: f64,
    pub share_maturity: f64,
    pub share_decline: f64,
    pub clicks: f64,
    /// Number of products that entered maturity this step.
    pub matured: usize,
    /// Mean age at maturity of those products; empty when none matured.
    pub mean_time_to_maturity: Option<f64>,
    pub replacements: usize,
    pub updates: usize,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
}

impl MetricsRow {
    fn from_report(step: u64, phase: Phase, reward: f64, j: f64, report: &StepReport) -> Self {
        let [c0, c1, c2, c3] = report.stage_counts;
        let [s0, s1, s2, s3] = report.stage_shares;
        let matured = report.matured_ages.len();
        let mean_time_to_maturity = (matured > 0)
            .then(|| report.matured_ages.iter().map(|&a| a as f64).sum::<f64>() / matured as f64);
        Self {
            step,
            phase,
            reward,
            discounted_reward: j,
            count_introduction: c0,
            count_growth: c1,
            count_maturity: c2,
            count_decline: c3,
            share_introduction: s0,
            share_growth: s1,
            share_maturity: s2,
            share_decline: s3,
            clicks: report.clicks,
            matured,
            mean_time_to_maturity,
            replacements: report.replacements,
            updates: 0,
            critic_loss: None,
            actor_objective: None,
        }
    }

    pub fn counts(&self) -> [usize; 4] {
        [
            self.count_introduction,
            self.count_growth,
            self.count_maturity,
            self.count_decline,
        ]
    }

    pub fn shares(&self) -> [f64; 4] {
        [
            self.share_introduction,
            self.share_growth,
            self.share_maturity,
            self.share_decline,
        ]
    }
}

fn audit(step: u64, market: &Marketplace, report: &StepReport) -> Result<()> {
    let share_sum: f64 = report.stage_shares.iter().sum();
    if (share_sum - 1.0).abs() > SHARE_TOL {
        return Err(Error::Audit {
            step,
            what: format!("stage shares sum to {share_sum}"),
        });
    }
    let population: usize = report.stage_counts.iter().sum();
    if population != market.config().n || market.len() != market.config().n {
        return Err(Error::Audit {
            step,
            what: format!("population {population} != {}", market.config().n),
        });
    }
    if let Some(p) = market
        .products()
        .iter()
        .find(|p| !(p.p >= p.latent.c_l && p.p <= p.latent.c_h))
    {
        return Err(Error::Audit {
            step,
            what: format!("product {} has CTR {} outside [{}, {}]", p.id, p.p, p.latent.c_l, p.latent.c_h),
        });
    }
    Ok(())
}

/// Metrics of one seeded run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub warmup_steps: u64,
    pub rows: Vec<MetricsRow>,
    pub checkpoint: Option<Checkpoint>,
}

impl RunResult {
    pub fn warmup_rows(&self) -> &[MetricsRow] {
        &self.rows[..(self.warmup_steps as usize).min(self.rows.len())]
    }

    pub fn train_rows(&self) -> &[MetricsRow] {
        &self.rows[(self.warmup_steps as usize).min(self.rows.len())..]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Check per-step invariants and abort on the first violation.
    pub audit: bool,
    pub keep_checkpoint: bool,
}

/// CTR-A for `warmup_steps`, then `method` for `train_steps`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, method: Method, opts: RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    let gamma = cfg.agent.gamma;
    let warmup = cfg.protocol.warmup_steps;
    let train = cfg.protocol.train_steps;
    let mut market = Marketplace::new(cfg.env.clone(), seed)?;
    let mut rows = Vec::with_capacity((warmup + train) as usize);
    let mut j = 0.0;

    let ctr_a_step = |market: &mut Marketplace, step: u64, phase: Phase, j: &mut f64| -> Result<MetricsRow> {
        let u = ctr_a_allocation(market.products());
        let report = market.step(&u)?;
        if opts.audit {
            audit(step, market, &report)?;
        }
        let r = Trainer::scaled_reward(&cfg.agent, market);
        *j = discounted_accumulated_reward(*j, r, gamma);
        Ok(MetricsRow::from_report(step, phase, r, *j, &report))
    };

    for step in 0..warmup {
        rows.push(ctr_a_step(&mut market, step, Phase::Warmup, &mut j)?);
    }

    let mut checkpoint = None;
    match method {
        Method::CtrA => {
            for step in warmup..warmup + train {
                rows.push(ctr_a_step(&mut market, step, Phase::Train, &mut j)?);
            }
        }
        Method::Agent(variant) if train > 0 => {
            let agent_cfg = AgentConfig {
                variant,
                ..cfg.agent.clone()
            };
            let mut trainer = Trainer::new(agent_cfg, &market, seed, train)?;
            for step in warmup..warmup + train {
                let out = trainer.step(&mut market)?;
                if opts.audit {
                    audit(step, &market, &out.report)?;
                }
                j = discounted_accumulated_reward(j, out.reward, gamma);
                let mut row = MetricsRow::from_report(step, Phase::Train, out.reward, j, &out.report);
                row.updates = out.updates;
                row.critic_loss = out.stats.map(|s| s.critic_loss);
                row.actor_objective = out.stats.map(|s| s.actor_objective);
                rows.push(row);
            }
            if opts.keep_checkpoint {
                checkpoint = Some(trainer.checkpoint());
            }
        }
        Method::Agent(_) => {}
    }
    Ok(RunResult {
        method,
        seed,
        warmup_steps: warmup,
        rows,
        checkpoint,
    })
}

/// Means over a window of metrics rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub steps: usize,
    pub mean_reward: f64,
    pub mean_discounted_reward: f64,
    pub mean_clicks: f64,
    /// Age at maturity pooled over every maturation in the window.
    pub mean_time_to_maturity: Option<f64>,
    pub matured: usize,
    pub mean_shares: [f64; 4],
}

impl WindowSummary {
    pub fn of(rows: &[MetricsRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("metrics window"));
        }
        let k = rows.len() as f64;
        let mean = |f: &dyn Fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
        let matured: usize = rows.iter().map(|r| r.matured).sum();
        let ttm_total: f64 = rows
            .iter()
            .filter_map(|r| r.mean_time_to_maturity.map(|m| m * r.matured as f64))
            .sum();
        let mut mean_shares = [0.0; 4];
        for (s, z) in mean_shares.iter_mut().zip(LifecycleStage::ALL) {
            *s = mean(&|r| r.shares()[z.index()]);
        }
        Ok(Self {
            steps: rows.len(),
            mean_reward: mean(&|r| r.reward),
            mean_discounted_reward: mean(&|r| r.discounted_reward),
            mean_clicks: mean(&|r| r.clicks),
            mean_time_to_maturity: (matured > 0).then(|| ttm_total / matured as f64),
            matured,
            mean_shares,
        })
    }
}

/// The last quarter of `rows`, at least one row.
pub fn final_quartile(rows: &[MetricsRow]) -> &[MetricsRow] {
    let k = rows.len().div_ceil(4).max(1).min(rows.len());
    &rows[rows.len() - k..]
}

/// Percentage changes relative to a CTR-A baseline over the final quartile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeMetrics {
    pub clicks_pct: f64,
    pub reward_pct: f64,
    pub discounted_reward_pct: f64,
    pub time_to_maturity_pct: Option<f64>,
}

pub fn percent_change(value: f64, baseline: f64) -> f64 {
    100.0 * (value - baseline) / baseline
}

pub fn compute_relative_metrics(run: &[MetricsRow], baseline: &[MetricsRow]) -> Result<RelativeMetrics> {
    if run.len() != baseline.len() {
        return Err(Error::Dimension {
            expected: baseline.len(),
            actual: run.len(),
        });
    }
    if run.first().map(|r| r.step) != baseline.first().map(|r| r.step) {
        return Err(Error::Config("runs cover different step ranges".into()));
    }
    let a = WindowSummary::of(final_quartile(run))?;
    let b = WindowSummary::of(final_quartile(baseline))?;
    Ok(RelativeMetrics {
        clicks_pct: percent_change(a.mean_clicks, b.mean_clicks),
        reward_pct: percent_change(a.mean_reward, b.mean_reward),
        discounted_reward_pct: percent_change(a.mean_discounted_reward, b.mean_discounted_reward),
        time_to_maturity_pct: match (a.mean_time_to_maturity, b.mean_time_to_maturity) {
            (Some(x), Some(y)) => Some(percent_change(x, y)),
            _ => None,
        },
    })
}

/// Resolved inputs of a run, written next to its metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub method: Method,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, seed: u64, method: Method) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            method,
            seed,
            config: cfg.clone(),
            notes: vec!["mean_time_to_maturity covers only products that matured; products retired before maturity are excluded".into()],
        }
    }
}

pub const CSV_FILE: &str = "metrics.csv";
pub const JSONL_FILE: &str = "metrics.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

pub fn write_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_jsonl(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the configured tables and the manifest into `dir`.
pub fn emit_outputs(result: &RunResult, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::Empty("metrics rows"));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in &cfg.output.formats {
        let path = match format {
            Format::Csv => {
                let p = dir.join(CSV_FILE);
                write_csv(&result.rows, &p)?;
                p
            }
            Format::Jsonl => {
                let p = dir.join(JSONL_FILE);
                write_jsonl(&result.rows, &p)?;
                p
            }
        };
        written.push(path);
    }
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = BufWriter::new(fs::File::create(&manifest)?);
    serde_json::to_writer_pretty(&mut w, &Manifest::new(cfg, result.seed, result.method))?;
    w.write_all(b"\n")?;
    w.flush()?;
    written.push(manifest);
    if let Some(ck) = &result.checkpoint {
        let p = dir.join(CHECKPOINT_FILE);
        ck.save(&p)?;
        written.push(p);
    }
    Ok(written)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stdev: f64,
}

impl Stat {
    /// Summed in sorted order so the result ignores input order.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
        dev.sort_by(f64::total_cmp);
        let stdev = if v.len() > 1 {
            (dev.iter().sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, stdev }
    }
}

/// Per-seed final-quartile summaries and their mean ± stdev.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<WindowSummary>,
    pub reward: Stat,
    pub discounted_reward: Stat,
    pub clicks: Stat,
    pub time_to_maturity: Option<Stat>,
}

impl SweepSummary {
    pub fn from_runs(runs: &[RunResult]) -> Result<Self> {
        let first = runs.first().ok_or(Error::Empty("seed sweep"))?;
        let per_seed = runs
            .iter()
            .map(|r| WindowSummary::of(final_quartile(&r.rows)))
            .collect::<Result<Vec<_>>>()?;
        let pick = |f: fn(&WindowSummary) -> f64| Stat::of(&per_seed.iter().map(f).collect::<Vec<_>>());
        let ttm: Option<Vec<f64>> = per_seed.iter().map(|s| s.mean_time_to_maturity).collect();
        Ok(Self {
            method: first.method,
            seeds: runs.iter().map(|r| r.seed).collect(),
            reward: pick(|s| s.mean_reward),
            discounted_reward: pick(|s| s.mean_discounted_reward),
            clicks: pick(|s| s.mean_clicks),
            time_to_maturity: ttm.map(|v| Stat::of(&v)),
            per_seed,
        })
    }
}

/// Runs `method` once per configured seed.
pub fn sweep(cfg: &ExperimentConfig, method: Method, opts: RunOptions) -> Result<(Vec<RunResult>, SweepSummary)> {
    let runs = cfg
        .protocol
        .seeds
        .iter()
        .map(|&seed| run_experiment(cfg, seed, method, opts))
        .collect::<Result<Vec<_>>>()?;
    let summary = SweepSummary::from_runs(&runs)?;
    Ok((runs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(step: u64, reward: f64, clicks: f64, ttm: Option<(f64, usize)>) -> MetricsRow {
        let report = StepReport {
            stage_counts: [1, 1, 1, 1],
            stage_shares: [0.25; 4],
            clicks,
            matured_ages: ttm.map_or(vec![], |(t, k)| vec![t as u32; k]),
            ..StepReport::default()
        };
        MetricsRow::from_report(step, Phase::Train, reward, reward, &report)
    }

    #[test]
    fn discounted_reward_values() {
        assert_eq!(discounted_accumulated_reward(42.0, 3.0, 0.0), 3.0);
        assert_eq!(discounted_accumulated_reward(50.0, 2.0, 0.5), 27.0);
        let mut j = 0.0;
        for _ in 0..5000 {
            j = discounted_accumulated_reward(j, 1.0, 0.99);
        }
        assert!((j - 100.0).abs() < 1e-9);
    }

    #[test]
    fn relative_metrics_values() {
        let base: Vec<_> = (0..8).map(|s| row(s, 1.0, 1.00, Some((100.0, 2)))).collect();
        let same = compute_relative_metrics(&base, &base).unwrap();
        assert_eq!(same.clicks_pct, 0.0);
        assert_eq!(same.reward_pct, 0.0);
        assert_eq!(same.time_to_maturity_pct, Some(0.0));

        let run: Vec<_> = (0..8).map(|s| row(s, 1.0, 1.06, Some((74.0, 2)))).collect();
        let rel = compute_relative_metrics(&run, &base).unwrap();
        assert!((rel.clicks_pct - 6.0).abs() < 1e-9);
        assert!((rel.time_to_maturity_pct.unwrap() + 26.0).abs() < 1e-9);
        assert!(compute_relative_metrics(&run[..7], &base).is_err());
    }

    #[test]
    fn pooled_time_to_maturity_weights_by_count() {
        let rows = vec![row(0, 1.0, 1.0, Some((10.0, 3))), row(1, 1.0, 1.0, None), row(2, 1.0, 1.0, Some((20.0, 1)))];
        let s = WindowSummary::of(&rows).unwrap();
        assert_eq!(s.matured, 4);
        assert!((s.mean_time_to_maturity.unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn final_quartile_sizes() {
        let rows: Vec<_> = (0..10).map(|s| row(s, 1.0, 1.0, None)).collect();
        assert_eq!(final_quartile(&rows).len(), 3);
        assert_eq!(final_quartile(&rows[..1]).len(), 1);
        assert_eq!(final_quartile(&rows[..8])[0].step, 6);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("ddpg".parse::<Method>().is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(ExperimentConfig::default().validate().is_ok());
        for text in [
            "[agent]\ngamma = 1.5\n",
            "[agent]\ntau = -0.1\n",
            "[agent]\nbeta = 2.0\n",
            "[agent]\nm = 0\n",
            "[agent]\nn_s = 6000\n",
            "[protocol]\nseeds = []\n",
            "[env]\nunknown_key = 1\n",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
        let cfg = ExperimentConfig::from_toml("[agent]\nn_s = 100\nm = 3\nbeta = 0.9\n").unwrap();
        assert_eq!((cfg.agent.n_s, cfg.agent.m, cfg.agent.beta), (100, 3, 0.9));
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    proptest! {
        #[test]
        fn stat_ignores_seed_order(mut v in proptest::collection::vec(-1e3f64..1e3, 1..8), rot in 0usize..8) {
            let a = Stat::of(&v);
            let k = rot % v.len();
            v.rotate_left(k);
            v.reverse();
            prop_assert_eq!(a, Stat::of(&v));
        }
    }
}
