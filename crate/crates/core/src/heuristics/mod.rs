//! The four on-chain linking heuristics.
//!
//! H1 and H2 attribute a stealth address to an identity (a registrant or the
//! paying sender). H3 and H4 only cluster stealth addresses that likely share
//! an owner. H1–H3 consider only stealth addresses emptied by a single
//! withdrawal ([`Ledger::full_withdraw_set`]); H4 looks at every native,
//! self-submitted withdrawal because relayers choose the fees of the rest.
//!
//! All functions are pure over an immutable ledger and emit results in order
//! of first appearance in the ledger.

mod clusters;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use self::clusters::{Cluster, ClusterMember, ClusterSet, ClusterSource, MemberRole, Merge};
use crate::address::ChainAddress;
use crate::ledger::Ledger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HeuristicId {
    H1,
    H2,
    H3,
    H4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    Registrant,
    Sender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkFinding {
    pub stealth_address: ChainAddress,
    pub attributed_identity: ChainAddress,
    pub identity_kind: IdentityKind,
    pub heuristic: HeuristicId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// A priority fee is "unique" when at most this many withdrawals use it.
    pub fee_uniqueness_threshold: u32,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            fee_uniqueness_threshold: 5,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HeuristicError {
    #[error("fee uniqueness threshold must be at least 1")]
    ZeroThreshold,
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        if self.fee_uniqueness_threshold == 0 {
            return Err(HeuristicError::ZeroThreshold);
        }
        Ok(())
    }
}

/// H1: a full withdrawal to an address that registered stealth keys links the
/// stealth address to that registrant.
pub fn h1_registrant_reuse(ledger: &Ledger) -> Vec<LinkFinding> {
    let full = ledger.full_withdraw_set();
    ledger
        .withdrawals()
        .iter()
        .filter(|w| full.contains(&w.stealth_address) && ledger.is_registrant(&w.recipient))
        .map(|w| LinkFinding {
            stealth_address: w.stealth_address,
            attributed_identity: w.recipient,
            identity_kind: IdentityKind::Registrant,
            heuristic: HeuristicId::H1,
        })
        .collect()
}

/// H2: a full withdrawal back to the address that paid in links sender,
/// stealth address and recipient as one entity.
pub fn h2_same_sender_receiver(ledger: &Ledger) -> Vec<LinkFinding> {
    let full = ledger.full_withdraw_set();
    ledger
        .withdrawals()
        .iter()
        .filter(|w| full.contains(&w.stealth_address))
        .filter(|w| {
            ledger
                .sends_to(&w.stealth_address)
                .any(|s| s.sender == w.recipient)
        })
        .map(|w| LinkFinding {
            stealth_address: w.stealth_address,
            attributed_identity: w.recipient,
            identity_kind: IdentityKind::Sender,
            heuristic: HeuristicId::H2,
        })
        .collect()
}

/// Every stealth address of the ledger as a singleton, in first-appearance
/// order (sends first, then withdrawals from unfunded addresses).
fn stealth_universe(ledger: &Ledger) -> ClusterSet {
    let mut set = ClusterSet::new();
    for s in ledger.sends() {
        set.insert(s.stealth_address, MemberRole::Stealth);
    }
    for w in ledger.withdrawals() {
        set.insert(w.stealth_address, MemberRole::Stealth);
    }
    set
}

/// Groups items by key, keeping keys and items in first-seen order.
fn group_in_order<K: std::hash::Hash + Eq + Copy, V>(
    items: impl IntoIterator<Item = (K, V)>,
) -> Vec<(K, Vec<V>)> {
    let mut slot: HashMap<K, usize> = HashMap::new();
    let mut groups: Vec<(K, Vec<V>)> = Vec::new();
    for (k, v) in items {
        let i = *slot.entry(k).or_insert_with(|| {
            groups.push((k, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(v);
    }
    groups
}

/// H3: stealth addresses fully withdrawn to the same recipient form one
/// cluster together with that recipient.
pub fn h3_collector_pattern(ledger: &Ledger) -> ClusterSet {
    let full = ledger.full_withdraw_set();
    let mut set = stealth_universe(ledger);
    let groups = group_in_order(
        ledger
            .withdrawals()
            .iter()
            .filter(|w| full.contains(&w.stealth_address))
            .map(|w| (w.recipient, w.stealth_address)),
    );
    for (anchor, stealths) in groups {
        if stealths.len() < 2 {
            continue;
        }
        set.insert(anchor, MemberRole::Anchor);
        for st in stealths {
            set.union(st, anchor, ClusterSource::H3);
        }
    }
    set
}

/// H4: native withdrawals sharing a priority fee used by between two and
/// `fee_uniqueness_threshold` withdrawals link their stealth addresses.
pub fn h4_unique_priority_fee(ledger: &Ledger, config: &HeuristicConfig) -> ClusterSet {
    let mut set = stealth_universe(ledger);
    let eligible: Vec<_> = ledger
        .withdrawals()
        .iter()
        .filter(|w| w.asset.is_native() && !w.via_relayer)
        .collect();
    let groups = group_in_order(
        eligible
            .iter()
            .map(|w| (w.max_priority_fee_per_gas, w.stealth_address)),
    );
    let threshold = config.fee_uniqueness_threshold as usize;
    for (_, stealths) in groups {
        if stealths.len() < 2 || stealths.len() > threshold {
            continue;
        }
        for pair in stealths.windows(2) {
            set.union(pair[0], pair[1], ClusterSource::H4);
        }
    }
    set
}

/// Identity attribution for one stealth address after de-duplication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub stealth_address: ChainAddress,
    /// H1's registrant when it fired, otherwise H2's sender.
    pub identity: ChainAddress,
    pub identity_kind: IdentityKind,
    pub heuristics: BTreeSet<HeuristicId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicCounts {
    pub h1: usize,
    pub h2: usize,
    /// Distinct stealth addresses attributed by H1 or H2.
    pub total_linked: usize,
    /// Stealth addresses in multi-member H3 / H4 clusters.
    pub h3_clustered: usize,
    pub h4_clustered: usize,
    pub h3_clusters: usize,
    pub h4_clusters: usize,
}

/// Everything the heuristics found on one ledger.
#[derive(Debug, Clone, Serialize)]
pub struct LinkageReport {
    pub ledger_fingerprint: String,
    pub counts: HeuristicCounts,
    pub findings: Vec<LinkFinding>,
    pub attributions: Vec<Attribution>,
    pub h3: ClusterSet,
    pub h4: ClusterSet,
    /// Union of the H3 and H4 partitions.
    pub clusters: ClusterSet,
}

fn clustered_stealth_count(set: &ClusterSet) -> (usize, usize) {
    let nontrivial = set.nontrivial_clusters();
    let members = nontrivial
        .iter()
        .map(|c| c.stealth_addresses().count())
        .sum();
    (members, nontrivial.len())
}

/// Consolidates per-heuristic outputs: attributions are de-duplicated per
/// stealth address and cluster sets are merged, while per-heuristic counts
/// are kept.
pub fn combine(
    ledger: &Ledger,
    h1: Vec<LinkFinding>,
    h2: Vec<LinkFinding>,
    h3: ClusterSet,
    h4: ClusterSet,
) -> LinkageReport {
    let mut by_stealth: BTreeMap<ChainAddress, usize> = BTreeMap::new();
    let mut attributions: Vec<Attribution> = Vec::new();
    for f in h1.iter().chain(h2.iter()) {
        match by_stealth.get(&f.stealth_address) {
            Some(&i) => {
                let a = &mut attributions[i];
                a.heuristics.insert(f.heuristic);
                if f.identity_kind == IdentityKind::Registrant {
                    a.identity = f.attributed_identity;
                    a.identity_kind = IdentityKind::Registrant;
                }
            }
            None => {
                by_stealth.insert(f.stealth_address, attributions.len());
                attributions.push(Attribution {
                    stealth_address: f.stealth_address,
                    identity: f.attributed_identity,
                    identity_kind: f.identity_kind,
                    heuristics: BTreeSet::from([f.heuristic]),
                });
            }
        }
    }
    let h1_distinct: BTreeSet<_> = h1.iter().map(|f| f.stealth_address).collect();
    let h2_distinct: BTreeSet<_> = h2.iter().map(|f| f.stealth_address).collect();
    let (h3_clustered, h3_clusters) = clustered_stealth_count(&h3);
    let (h4_clustered, h4_clusters) = clustered_stealth_count(&h4);
    let counts = HeuristicCounts {
        h1: h1_distinct.len(),
        h2: h2_distinct.len(),
        total_linked: attributions.len(),
        h3_clustered,
        h4_clustered,
        h3_clusters,
        h4_clusters,
    };
    let clusters = ClusterSet::merged([&h3, &h4]);
    let mut findings = h1;
    findings.extend(h2);
    LinkageReport {
        ledger_fingerprint: ledger.fingerprint(),
        counts,
        findings,
        attributions,
        h3,
        h4,
        clusters,
    }
}

/// Runs H1–H4 (concurrently) and consolidates the results.
pub fn analyze(ledger: &Ledger, config: &HeuristicConfig) -> Result<LinkageReport, HeuristicError> {
    config.validate()?;
    let ((h1, h2), (h3, h4)) = rayon::join(
        || (h1_registrant_reuse(ledger), h2_same_sender_receiver(ledger)),
        || {
            (
                h3_collector_pattern(ledger),
                h4_unique_priority_fee(ledger, config),
            )
        },
    );
    Ok(combine(ledger, h1, h2, h3, h4))
}
