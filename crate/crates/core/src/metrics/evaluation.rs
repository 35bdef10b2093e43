use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::address::ChainAddress;
use crate::heuristics::{ClusterSet, HeuristicId, LinkFinding, LinkageReport};
use crate::ledger::Ledger;
use crate::simulator::{Destination, GroundTruth, PaymentTruth};

/// Scores of an identity-attributing heuristic against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionScore {
    pub attributions: usize,
    pub correct: usize,
    pub precision: Option<f64>,
    /// Payments whose recorded behavior this heuristic targets.
    pub eligible: usize,
    pub eligible_found: usize,
    /// `None` when no payment is eligible.
    pub recall: Option<f64>,
    /// Correct attributions over all withdrawn payments.
    pub coverage: Option<f64>,
}

/// Pairwise scores of a clustering against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub clusters: usize,
    pub impure_clusters: usize,
    pub pairs: usize,
    pub correct_pairs: usize,
    pub precision: Option<f64>,
    pub eligible_pairs: usize,
    pub eligible_found: usize,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub h1: AttributionScore,
    pub h2: AttributionScore,
    pub h3: ClusterScore,
    pub h4: ClusterScore,
    pub merged: ClusterScore,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn score_attributions(
    findings: &[&LinkFinding],
    truth: &GroundTruth,
    eligible: &BTreeSet<ChainAddress>,
    population: usize,
) -> AttributionScore {
    let correct: Vec<&&LinkFinding> = findings
        .iter()
        .filter(|f| {
            let owner = truth.owner(&f.stealth_address);
            owner.is_some() && owner == truth.owner(&f.attributed_identity)
        })
        .collect();
    let eligible_found = correct
        .iter()
        .filter(|f| eligible.contains(&f.stealth_address))
        .count();
    AttributionScore {
        attributions: findings.len(),
        correct: correct.len(),
        precision: ratio(correct.len(), findings.len()),
        eligible: eligible.len(),
        eligible_found,
        recall: ratio(eligible_found, eligible.len()),
        coverage: ratio(correct.len(), population),
    }
}

fn score_clusters(
    set: &ClusterSet,
    truth: &GroundTruth,
    eligible: Option<&[Vec<ChainAddress>]>,
) -> ClusterScore {
    let mut score = ClusterScore {
        clusters: 0,
        impure_clusters: 0,
        pairs: 0,
        correct_pairs: 0,
        precision: None,
        eligible_pairs: 0,
        eligible_found: 0,
        recall: None,
    };
    for cluster in set.nontrivial_clusters() {
        score.clusters += 1;
        let mut by_owner: BTreeMap<Option<usize>, usize> = BTreeMap::new();
        for m in &cluster.members {
            *by_owner.entry(truth.owner(&m.address)).or_default() += 1;
        }
        score.pairs += pairs(cluster.len());
        score.correct_pairs += by_owner
            .iter()
            .filter(|(owner, _)| owner.is_some())
            .map(|(_, &n)| pairs(n))
            .sum::<usize>();
        if by_owner.len() > 1 || by_owner.contains_key(&None) {
            score.impure_clusters += 1;
        }
    }
    score.precision = ratio(score.correct_pairs, score.pairs);
    if let Some(groups) = eligible {
        for group in groups {
            score.eligible_pairs += pairs(group.len());
            for (i, x) in group.iter().enumerate() {
                score.eligible_found += group[i + 1..]
                    .iter()
                    .filter(|y| set.same_cluster(x, y))
                    .count();
            }
        }
        score.recall = ratio(score.eligible_found, score.eligible_pairs);
    }
    score
}

fn group_by<K: Ord>(payments: impl Iterator<Item = (K, ChainAddress)>) -> Vec<Vec<ChainAddress>> {
    let mut groups: BTreeMap<K, Vec<ChainAddress>> = BTreeMap::new();
    for (k, st) in payments {
        groups.entry(k).or_default().push(st);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Precision and recall of each heuristic on a simulated ledger.
///
/// Eligibility comes from the behavior the simulator recorded: H1 targets
/// full withdrawals to the registrant, H2 full self-test withdrawals, H3
/// full withdrawals sharing a destination, and H4 native payments of
/// entities with a fixed fee.
pub fn precision_recall(
    report: &LinkageReport,
    ledger: &Ledger,
    truth: &GroundTruth,
) -> Result<Evaluation, MetricsError> {
    let fingerprint = ledger.fingerprint();
    if report.ledger_fingerprint != fingerprint {
        return Err(MetricsError::LedgerMismatch {
            report: report.ledger_fingerprint.clone(),
            ledger: fingerprint,
        });
    }
    for s in ledger.sends() {
        if truth.owner(&s.stealth_address).is_none() {
            return Err(MetricsError::TruthMismatch(s.stealth_address));
        }
    }
    let full = |p: &&PaymentTruth| !p.partial;
    let with_destination = |d: Destination| -> BTreeSet<ChainAddress> {
        truth
            .payments
            .iter()
            .filter(full)
            .filter(|p| p.destination == d)
            .map(|p| p.stealth_address)
            .collect()
    };
    let population = ledger.withdrawn_stealth_addresses().count();
    let by = |h: HeuristicId| -> Vec<&LinkFinding> {
        report
            .findings
            .iter()
            .filter(|f| f.heuristic == h)
            .collect()
    };

    let h3_groups = group_by(
        truth
            .payments
            .iter()
            .filter(full)
            .map(|p| (p.destination_address, p.stealth_address)),
    );
    let h4_groups = group_by(
        truth
            .payments
            .iter()
            .filter(|p| p.asset.is_native() && truth.entities[p.recipient].fee.is_some())
            .map(|p| (p.recipient, p.stealth_address)),
    );
    Ok(Evaluation {
        h1: score_attributions(
            &by(HeuristicId::H1),
            truth,
            &with_destination(Destination::Registrant),
            population,
        ),
        h2: score_attributions(
            &by(HeuristicId::H2),
            truth,
            &with_destination(Destination::SelfTest),
            population,
        ),
        h3: score_clusters(&report.h3, truth, Some(&h3_groups)),
        h4: score_clusters(&report.h4, truth, Some(&h4_groups)),
        merged: score_clusters(&report.clusters, truth, None),
    })
}
