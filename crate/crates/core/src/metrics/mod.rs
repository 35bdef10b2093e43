//! Evaluation quantities: linkage percentages, recipient entropy, withdrawer
//! distribution, activity heatmaps, and precision/recall on simulated data.

mod activity;
mod evaluation;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use self::activity::{
    activity_heatmap, cumulative_usage, usage_csv, withdrawer_distribution, ActivityHeatmap,
    UsagePoint, Whale, WithdrawerDistribution,
};
pub use self::evaluation::{precision_recall, AttributionScore, ClusterScore, Evaluation};
use crate::address::ChainAddress;
use crate::heuristics::{ClusterSet, LinkageReport};
use crate::ledger::{ChainId, Ledger};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("report was computed on ledger {report} but this ledger is {ledger}")]
    LedgerMismatch { report: String, ledger: String },
    #[error("entropy needs at least one payment")]
    NoPayments,
    #[error("ground truth has no owner for {0}")]
    TruthMismatch(ChainAddress),
}

/// Recipient uncertainty before and after clustering, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub payments: usize,
    pub clusters: usize,
    /// log2 of the number of payments.
    pub naive_entropy_bits: f64,
    /// Shannon entropy with each cluster weighted by its payment count.
    pub clustered_entropy_bits: f64,
    /// log2 of the number of clusters.
    pub cluster_uniform_entropy_bits: f64,
}

/// Entropy of a partition of payments given the payment count of each
/// cluster. Zero weights are ignored.
pub fn entropy_from_weights(weights: &[usize]) -> Result<EntropyReport, MetricsError> {
    let mut weights: Vec<usize> = weights.iter().copied().filter(|&w| w > 0).collect();
    weights.sort_unstable();
    let n: usize = weights.iter().sum();
    if n == 0 {
        return Err(MetricsError::NoPayments);
    }
    let nf = n as f64;
    let clustered = weights
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(EntropyReport {
        payments: n,
        clusters: weights.len(),
        naive_entropy_bits: nf.log2(),
        // -0.0 for a single cluster
        clustered_entropy_bits: clustered.max(0.0),
        cluster_uniform_entropy_bits: (weights.len() as f64).log2(),
    })
}

/// Entropy over `payments` (one stealth address per payment) under the
/// partition `clusters`. Addresses the partition does not know count as
/// their own cluster.
pub fn recipient_entropy(
    clusters: &ClusterSet,
    payments: &[ChainAddress],
) -> Result<EntropyReport, MetricsError> {
    #[derive(PartialEq, Eq, Hash)]
    enum Key {
        Cluster(usize),
        Lone(ChainAddress),
    }
    let mut weights: HashMap<Key, usize> = HashMap::new();
    for st in payments {
        let key = match clusters.cluster_id(st) {
            Some(id) => Key::Cluster(id),
            None => Key::Lone(*st),
        };
        *weights.entry(key).or_default() += 1;
    }
    entropy_from_weights(&weights.into_values().collect::<Vec<_>>())
}

/// Per-chain linkage summary. Percentages are over withdrawn stealth
/// payments and expressed in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymityReport {
    pub chain: ChainId,
    pub count_h1: usize,
    pub count_h2: usize,
    pub total_linked: usize,
    pub total_withdrawn: usize,
    pub pct_linked: f64,
    pub pct_h1: f64,
    pub pct_h2: f64,
    pub entropy: Option<EntropyReport>,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

impl AnonymityReport {
    pub fn from_counts(
        chain: ChainId,
        count_h1: usize,
        count_h2: usize,
        total_linked: usize,
        total_withdrawn: usize,
    ) -> Self {
        Self {
            chain,
            count_h1,
            count_h2,
            total_linked,
            total_withdrawn,
            pct_linked: percent(total_linked, total_withdrawn),
            pct_h1: percent(count_h1, total_withdrawn),
            pct_h2: percent(count_h2, total_withdrawn),
            entropy: None,
        }
    }
}

/// Table-style counts for `report`, which must come from `ledger`. Entropy
/// is computed over all sends under the merged H3/H4 partition.
pub fn linkage_stats(
    report: &LinkageReport,
    ledger: &Ledger,
) -> Result<AnonymityReport, MetricsError> {
    let fingerprint = ledger.fingerprint();
    if report.ledger_fingerprint != fingerprint {
        return Err(MetricsError::LedgerMismatch {
            report: report.ledger_fingerprint.clone(),
            ledger: fingerprint,
        });
    }
    let withdrawn = ledger.withdrawn_stealth_addresses().count();
    let mut stats = AnonymityReport::from_counts(
        ledger.chain().clone(),
        report.counts.h1,
        report.counts.h2,
        report.counts.total_linked,
        withdrawn,
    );
    let payments: Vec<ChainAddress> = ledger.sends().iter().map(|s| s.stealth_address).collect();
    stats.entropy = match recipient_entropy(&report.clusters, &payments) {
        Ok(e) => Some(e),
        Err(MetricsError::NoPayments) => None,
        Err(e) => return Err(e),
    };
    Ok(stats)
}
