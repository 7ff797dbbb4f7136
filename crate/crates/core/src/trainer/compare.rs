use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use super::metrics::MetricsLog;
use super::stats::{median, variance};
use super::train::{train, EvaluationReport, REWARD_WINDOW};
use crate::nets::ActorVariant;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub label: String,
    pub config: TrainingConfig,
}

impl CompareEntry {
    pub fn new(config: TrainingConfig) -> Self {
        Self {
            label: config.actor_variant.name().to_string(),
            config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub variant: ActorVariant,
    pub seed: u64,
    pub metrics: MetricsLog,
    pub final_eval: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Run,
    Aggregate,
}

/// One line of the comparison table. Run rows leave the paired statistics
/// empty; aggregate rows leave the seed empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kind: RowKind,
    pub label: String,
    pub variant: ActorVariant,
    pub seed: Option<u64>,
    /// Run: mean final evaluation reward. Aggregate: median over seeds.
    pub final_eval_reward: f64,
    /// Run: variance over evaluation episodes. Aggregate: variance of the
    /// pooled episode rewards of all seeds.
    pub eval_variance: f64,
    pub final_window_reward: f64,
    pub wins: Option<usize>,
    pub losses: Option<usize>,
    /// Relative to the first entry's median final evaluation reward.
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunResult>,
    pub rows: Vec<ComparisonRow>,
}

pub fn validate_entries(entries: &[CompareEntry], seeds: &[u64]) -> Result<()> {
    if entries.len() < 2 {
        return Err(Error::config("variants", "a comparison needs at least two entries"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("seeds", "seeds must be distinct"));
    }
    let base = &entries[0].config;
    for e in entries {
        e.config.validate()?;
        if e.config.paradigm != base.paradigm {
            return Err(Error::config(
                "paradigm",
                format!("{} uses a different paradigm than {}", e.label, entries[0].label),
            ));
        }
        if e.config.randomization != base.randomization || e.config.scenario != base.scenario {
            return Err(Error::config(
                "randomization",
                format!("{} uses different scenario ranges than {}", e.label, entries[0].label),
            ));
        }
    }
    Ok(())
}

/// Trains every entry on every seed (paired: seed `s` drives the same
/// scenarios for all entries) and tabulates the outcome.
pub fn compare(entries: &[CompareEntry], seeds: &[u64]) -> Result<Comparison> {
    compare_with(entries, seeds, |_| {})
}

pub fn compare_with(
    entries: &[CompareEntry],
    seeds: &[u64],
    mut on_run: impl FnMut(&RunResult),
) -> Result<Comparison> {
    validate_entries(entries, seeds)?;
    let mut runs = Vec::with_capacity(entries.len() * seeds.len());
    for e in entries {
        for &seed in seeds {
            let cfg = TrainingConfig {
                master_seed: seed,
                ..e.config.clone()
            };
            let out = train(&cfg)?;
            let run = RunResult {
                label: e.label.clone(),
                variant: cfg.actor_variant,
                seed,
                metrics: out.metrics,
                final_eval: out.final_eval,
            };
            on_run(&run);
            runs.push(run);
        }
    }
    let rows = tabulate(entries, seeds, &runs);
    Ok(Comparison { runs, rows })
}

pub fn tabulate(entries: &[CompareEntry], seeds: &[u64], runs: &[RunResult]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = runs
        .iter()
        .map(|r| ComparisonRow {
            kind: RowKind::Run,
            label: r.label.clone(),
            variant: r.variant,
            seed: Some(r.seed),
            final_eval_reward: r.final_eval.summary.mean,
            eval_variance: r.final_eval.summary.variance,
            final_window_reward: r.metrics.window_means(REWARD_WINDOW).1,
            wins: None,
            losses: None,
            relative_improvement: None,
        })
        .collect();
    let of = |label: &str| -> Vec<&RunResult> {
        seeds
            .iter()
            .filter_map(|s| runs.iter().find(|r| r.label == label && r.seed == *s))
            .collect()
    };
    let base = of(&entries[0].label);
    let base_median = median(&base.iter().map(|r| r.final_eval.summary.mean).collect::<Vec<_>>());
    for e in entries {
        let mine = of(&e.label);
        let finals: Vec<f64> = mine.iter().map(|r| r.final_eval.summary.mean).collect();
        let pooled: Vec<f64> = mine.iter().flat_map(|r| r.final_eval.rewards.iter().copied()).collect();
        let windows: Vec<f64> = mine.iter().map(|r| r.metrics.window_means(REWARD_WINDOW).1).collect();
        let (mut wins, mut losses) = (0, 0);
        for (m, b) in mine.iter().zip(&base) {
            let (x, y) = (m.final_eval.summary.mean, b.final_eval.summary.mean);
            if x > y {
                wins += 1;
            } else if x < y {
                losses += 1;
            }
        }
        let med = median(&finals);
        let rel = if med == base_median {
            0.0
        } else {
            (med - base_median) / base_median.abs()
        };
        rows.push(ComparisonRow {
            kind: RowKind::Aggregate,
            label: e.label.clone(),
            variant: e.config.actor_variant,
            seed: None,
            final_eval_reward: med,
            eval_variance: variance(&pooled),
            final_window_reward: median(&windows),
            wins: Some(wins),
            losses: Some(losses),
            relative_improvement: Some(rel),
        });
    }
    rows
}

impl Comparison {
    pub fn aggregate(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.kind == RowKind::Aggregate && r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}
