use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use crate::crypto::Digest32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorgRecord {
    pub tick: u64,
    pub node: String,
    pub depth: u64,
    pub fork_height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TipChange {
    pub tick: u64,
    pub node: String,
    pub height: u64,
    pub hash: Digest32,
}

/// Observables of one run. Every counter only grows while the run lasts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub seed: u64,
    pub ticks: u64,
    pub blocks_produced: u64,
    /// Produced blocks that are not on the reference node's final chain.
    pub orphan_count: u64,
    pub reorgs: Vec<ReorgRecord>,
    pub tip_history: Vec<TipChange>,
    /// Ticks from creation until the reference node holds the transaction
    /// `confirmation_depth` blocks deep.
    pub confirmation_latency: BTreeMap<Digest32, u64>,
    pub transactions_created: u64,
    pub hash_attempts: Vec<(String, u64)>,
    /// `(tick, fraction of full-node pairs whose chains agree up to the
    /// shorter tip)`.
    pub agreement: Vec<(u64, f64)>,
    /// Two full nodes end on branches that each grew at least five blocks
    /// past their last common block.
    pub fork_split: bool,
    pub rejections: BTreeMap<(String, String), u64>,
}

impl Metrics {
    pub fn max_reorg_depth(&self) -> u64 {
        self.reorgs.iter().map(|r| r.depth).max().unwrap_or(0)
    }

    pub fn reorg_histogram(&self) -> BTreeMap<u64, u64> {
        let mut h = BTreeMap::new();
        for r in &self.reorgs {
            *h.entry(r.depth).or_default() += 1;
        }
        h
    }

    pub fn mean_confirmation_latency(&self) -> Option<f64> {
        let n = self.confirmation_latency.len();
        (n > 0).then(|| self.confirmation_latency.values().sum::<u64>() as f64 / n as f64)
    }

    pub fn min_agreement(&self) -> f64 {
        self.agreement.iter().map(|(_, a)| *a).fold(1.0, f64::min)
    }

    pub fn rejections_with(&self, reason: &str) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for ((node, r), n) in &self.rejections {
            if r == reason {
                *out.entry(node.clone()).or_default() += n;
            }
        }
        out
    }

    pub const SUMMARY_HEADER: [&'static str; 5] =
        ["seed", "orphans", "max_reorg_depth", "mean_confirmation_latency", "fork_split"];

    pub fn summary_fields(&self) -> [String; 5] {
        [
            self.seed.to_string(),
            self.orphan_count.to_string(),
            self.max_reorg_depth().to_string(),
            self.mean_confirmation_latency()
                .map(|m| format!("{m:.2}"))
                .unwrap_or_else(|| "NA".into()),
            self.fork_split.to_string(),
        ]
    }

    /// `key=value` pairs in header order.
    pub fn summary_line(&self) -> String {
        Self::SUMMARY_HEADER
            .iter()
            .zip(self.summary_fields())
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `metrics_summary.csv`, `agreement_timeseries.csv` and
    /// `node_resources.csv` under `dir`.
    pub fn write_csvs(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let csv_err = |e: csv::Error| io::Error::other(e);
        let write = |name: &str, rows: &mut dyn FnMut(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>| -> io::Result<()> {
            let mut w = csv::Writer::from_writer(Vec::new());
            rows(&mut w).map_err(csv_err)?;
            let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
            crate::fsutil::write_atomic(&dir.join(name), &bytes)
        };
        write("metrics_summary.csv", &mut |w| {
            w.write_record(Self::SUMMARY_HEADER)?;
            w.write_record(self.summary_fields())
        })?;
        write("agreement_timeseries.csv", &mut |w| {
            w.write_record(["tick", "agreement_fraction"])?;
            for (t, a) in &self.agreement {
                w.write_record([t.to_string(), format!("{a:.4}")])?;
            }
            Ok(())
        })?;
        write("node_resources.csv", &mut |w| {
            w.write_record(["node", "hash_attempts"])?;
            for (n, a) in &self.hash_attempts {
                w.write_record([n.clone(), a.to_string()])?;
            }
            Ok(())
        })
    }
}
