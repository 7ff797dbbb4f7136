use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::mean;
use crate::{Error, Result};

pub const METRICS_HEADER: &str =
    "epoch,reward,critic_loss,actor_loss,eval_reward,iter_seconds,expert_frac_0,expert_frac_1,expert_frac_2,expert_frac_3";

/// One training epoch. Optional fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub reward: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub eval_reward: Option<f64>,
    pub iter_seconds: Option<f64>,
    pub expert_frac_0: Option<f64>,
    pub expert_frac_1: Option<f64>,
    pub expert_frac_2: Option<f64>,
    pub expert_frac_3: Option<f64>,
}

impl MetricsRow {
    pub fn expert_fractions(&self) -> Vec<f64> {
        [self.expert_frac_0, self.expert_frac_1, self.expert_frac_2, self.expert_frac_3]
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn set_expert_fractions(&mut self, fractions: &[f64]) {
        let mut it = fractions.iter().copied();
        self.expert_frac_0 = it.next();
        self.expert_frac_1 = it.next();
        self.expert_frac_2 = it.next();
        self.expert_frac_3 = it.next();
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

/// Headline numbers of a run, written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub epochs: usize,
    pub window: usize,
    pub first_window_reward: f64,
    pub final_window_reward: f64,
    pub last_eval_reward: Option<f64>,
    pub best_eval_reward: Option<f64>,
    pub mean_iter_seconds: Option<f64>,
    pub mean_expert_fractions: Option<Vec<f64>>,
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward).collect()
    }

    /// `(epoch, eval_reward)` for rows that carry an evaluation.
    pub fn eval_points(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.eval_reward.map(|e| (r.epoch, e)))
            .collect()
    }

    /// Mean training reward over the first and last `window` epochs.
    pub fn window_means(&self, window: usize) -> (f64, f64) {
        let r = self.rewards();
        let w = window.min(r.len()).max(1);
        (mean(&r[..w]), mean(&r[r.len() - w..]))
    }

    pub fn summary(&self, window: usize) -> MetricsSummary {
        let (first, last) = self.window_means(window);
        let evals = self.eval_points();
        let times: Vec<f64> = self.rows.iter().filter_map(|r| r.iter_seconds).collect();
        let fractions: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(MetricsRow::expert_fractions)
            .filter(|f| !f.is_empty())
            .collect();
        let mean_fractions = (!fractions.is_empty()).then(|| {
            (0..fractions[0].len())
                .map(|k| mean(&fractions.iter().map(|f| f[k]).collect::<Vec<_>>()))
                .collect()
        });
        MetricsSummary {
            epochs: self.rows.len(),
            window: window.min(self.rows.len()),
            first_window_reward: first,
            final_window_reward: last,
            last_eval_reward: evals.last().map(|e| e.1),
            best_eval_reward: evals.iter().map(|e| e.1).reduce(f64::max),
            mean_iter_seconds: (!times.is_empty()).then(|| mean(&times)),
            mean_expert_fractions: mean_fractions,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(METRICS_HEADER.split(',')).expect("write to memory");
        }
        for r in &self.rows {
            w.serialize(r).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    /// Parses a metrics CSV. Errors name the offending line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| Error::Metrics(format!("line 1: {e}")))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != METRICS_HEADER {
            return Err(Error::Metrics(format!(
                "line 1: expected header {METRICS_HEADER:?}, found {header:?}"
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.deserialize::<MetricsRow>().enumerate() {
            let row = rec.map_err(|e| {
                let line = e.position().map_or(i as u64 + 2, |p| p.line());
                Error::Metrics(format!("line {line}: {e}"))
            })?;
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
