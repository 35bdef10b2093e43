//! Naive quadratic reimplementations of the heuristics and a random ledger
//! generator, shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use stealth_audit::address::ChainAddress;
use stealth_audit::ledger::{Asset, ChainId, Ledger, RegistrationTx, SendTx, WithdrawTx};
use stealth_audit::stealth::EncodedAnnouncement;

pub type Partition = BTreeSet<BTreeSet<ChainAddress>>;

pub fn a(n: u64) -> ChainAddress {
    ChainAddress::from_u64(n)
}

/// Single withdrawal that empties the address, checked by brute force.
pub fn ref_full(l: &Ledger) -> BTreeSet<ChainAddress> {
    let mut out = BTreeSet::new();
    for w in l.withdrawals() {
        let count = l
            .withdrawals()
            .iter()
            .filter(|x| x.stealth_address == w.stealth_address)
            .count();
        if count != 1 {
            continue;
        }
        let ok = match w.asset {
            Asset::Token(_) => true,
            Asset::Native => {
                let mut received = 0u128;
                for s in l.sends() {
                    if s.stealth_address == w.stealth_address && s.asset == Asset::Native {
                        received += s.amount;
                    }
                }
                received == w.amount + w.gas_paid
            }
        };
        if ok {
            out.insert(w.stealth_address);
        }
    }
    out
}

pub fn ref_h1(l: &Ledger) -> Vec<(ChainAddress, ChainAddress)> {
    let full = ref_full(l);
    let mut out = Vec::new();
    for w in l.withdrawals() {
        let registrant = l
            .registrations()
            .iter()
            .any(|r| r.registrant == w.recipient);
        if full.contains(&w.stealth_address) && registrant {
            out.push((w.stealth_address, w.recipient));
        }
    }
    out
}

pub fn ref_h2(l: &Ledger) -> Vec<(ChainAddress, ChainAddress)> {
    let full = ref_full(l);
    let mut out = Vec::new();
    for w in l.withdrawals() {
        let same = l
            .sends()
            .iter()
            .any(|s| s.stealth_address == w.stealth_address && s.sender == w.recipient);
        if full.contains(&w.stealth_address) && same {
            out.push((w.stealth_address, w.recipient));
        }
    }
    out
}

/// Connected components by repeated relabelling.
pub fn components(
    nodes: &BTreeSet<ChainAddress>,
    edges: &[(ChainAddress, ChainAddress)],
) -> Partition {
    let mut label: BTreeMap<ChainAddress, ChainAddress> = nodes.iter().map(|n| (*n, *n)).collect();
    for (x, y) in edges {
        label.entry(*x).or_insert(*x);
        label.entry(*y).or_insert(*y);
    }
    loop {
        let mut changed = false;
        for (x, y) in edges {
            let (lx, ly) = (label[x], label[y]);
            if lx != ly {
                let (keep, drop) = if lx < ly { (lx, ly) } else { (ly, lx) };
                for v in label.values_mut() {
                    if *v == drop {
                        *v = keep;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<ChainAddress, BTreeSet<ChainAddress>> = BTreeMap::new();
    for (node, l) in label {
        groups.entry(l).or_default().insert(node);
    }
    groups.into_values().collect()
}

pub fn stealth_universe(l: &Ledger) -> BTreeSet<ChainAddress> {
    l.sends()
        .iter()
        .map(|s| s.stealth_address)
        .chain(l.withdrawals().iter().map(|w| w.stealth_address))
        .collect()
}

pub fn ref_h3_edges(l: &Ledger) -> Vec<(ChainAddress, ChainAddress)> {
    let full = ref_full(l);
    let fw: Vec<&WithdrawTx> = l
        .withdrawals()
        .iter()
        .filter(|w| full.contains(&w.stealth_address))
        .collect();
    let mut edges = Vec::new();
    for w in &fw {
        let shared = fw.iter().filter(|x| x.recipient == w.recipient).count();
        if shared >= 2 {
            edges.push((w.stealth_address, w.recipient));
        }
    }
    edges
}

pub fn ref_h3(l: &Ledger) -> Partition {
    components(&stealth_universe(l), &ref_h3_edges(l))
}

pub fn ref_h4_edges(l: &Ledger, threshold: usize) -> Vec<(ChainAddress, ChainAddress)> {
    let eligible: Vec<&WithdrawTx> = l
        .withdrawals()
        .iter()
        .filter(|w| w.asset == Asset::Native && !w.via_relayer)
        .collect();
    let mut edges = Vec::new();
    for (i, x) in eligible.iter().enumerate() {
        let freq = eligible
            .iter()
            .filter(|y| y.max_priority_fee_per_gas == x.max_priority_fee_per_gas)
            .count();
        if freq < 2 || freq > threshold {
            continue;
        }
        for y in &eligible[i + 1..] {
            if y.max_priority_fee_per_gas == x.max_priority_fee_per_gas {
                edges.push((x.stealth_address, y.stealth_address));
            }
        }
    }
    edges
}

pub fn ref_h4(l: &Ledger, threshold: usize) -> Partition {
    components(&stealth_universe(l), &ref_h4_edges(l, threshold))
}

pub fn ref_merged(l: &Ledger, threshold: usize) -> Partition {
    let mut edges = ref_h3_edges(l);
    edges.extend(ref_h4_edges(l, threshold));
    components(&stealth_universe(l), &edges)
}

/// A small, collision-heavy random ledger with at most `max_records`
/// records. Address pools overlap so every heuristic has something to find.
pub fn random_ledger<R: Rng>(rng: &mut R, max_records: usize) -> Ledger {
    let total = rng.gen_range(0..=max_records);
    let n_regs = total / 10;
    let n_sends = (total - n_regs) / 2;
    let n_wds = total - n_regs - n_sends;
    let stealth_pool = rng.gen_range(1..=n_sends.max(1) as u64 + 1);
    // identities double as registrants, senders and recipients
    let identity = |rng: &mut R| a(10_000 + rng.gen_range(0..25));
    let fees = [1u128, 2, 3, 5, 8, 13, 21, 34, 55, 89];
    let mut block = || rng.gen_range(0..200u64);
    let blocks: Vec<u64> = (0..total).map(|_| block()).collect();
    let mut bi = blocks.into_iter();

    let mut regs = Vec::new();
    for i in 0..n_regs {
        let b = bi.next().unwrap();
        regs.push(RegistrationTx {
            registrant: identity(rng),
            pk_view: "1".into(),
            pk_spend: "2".into(),
            block: b,
            log_index: i as u32,
            timestamp: b * 12,
        });
    }
    let mut sends = Vec::new();
    for i in 0..n_sends {
        let b = bi.next().unwrap();
        let native = rng.gen_bool(0.8);
        sends.push(SendTx {
            tx_id: format!("0xs{i}"),
            sender: identity(rng),
            stealth_address: a(rng.gen_range(0..stealth_pool)),
            announcement: EncodedAnnouncement {
                ephemeral_key: "3".into(),
                stealth_key: "4".into(),
            },
            asset: if native {
                Asset::Native
            } else {
                Asset::Token("DAI".into())
            },
            amount: *[50u128, 100].choose(rng).unwrap(),
            block: b,
            log_index: 1000 + i as u32,
            timestamp: b * 12,
        });
    }
    let mut wds = Vec::new();
    for i in 0..n_wds {
        let b = bi.next().unwrap();
        let st = if sends.is_empty() || rng.gen_bool(0.05) {
            a(rng.gen_range(0..stealth_pool + 3))
        } else {
            sends.choose(rng).unwrap().stealth_address
        };
        let received: u128 = sends
            .iter()
            .filter(|s| s.stealth_address == st && s.asset == Asset::Native)
            .map(|s| s.amount)
            .sum();
        let gas_paid = *[0u128, 5].choose(rng).unwrap();
        let native = rng.gen_bool(0.8);
        let amount = if native && rng.gen_bool(0.7) {
            received.saturating_sub(gas_paid)
        } else {
            rng.gen_range(1..=100)
        };
        wds.push(WithdrawTx {
            tx_id: format!("0xw{i}"),
            stealth_address: st,
            recipient: if rng.gen_bool(0.1) {
                a(rng.gen_range(0..stealth_pool))
            } else {
                identity(rng)
            },
            asset: if native {
                Asset::Native
            } else {
                Asset::Token("DAI".into())
            },
            amount,
            gas_paid,
            max_priority_fee_per_gas: *fees.choose(rng).unwrap(),
            via_relayer: if native { rng.gen_bool(0.1) } else { true },
            block: b,
            log_index: 2000 + i as u32,
            timestamp: b * 12,
        });
    }
    Ledger::new(ChainId::Mainnet, regs, sends, wds)
}

/// Names of the outputs where `analyze` disagrees with the reference.
pub fn mismatches(l: &Ledger, threshold: u32) -> Vec<&'static str> {
    use stealth_audit::heuristics::{analyze, HeuristicConfig, HeuristicId};
    let report = analyze(
        l,
        &HeuristicConfig {
            fee_uniqueness_threshold: threshold,
        },
    )
    .expect("nonzero threshold");
    let t = threshold as usize;
    let pairs = |kind: HeuristicId| -> Vec<_> {
        report
            .findings
            .iter()
            .filter(|f| f.heuristic == kind)
            .map(|f| (f.stealth_address, f.attributed_identity))
            .collect()
    };
    let linked: BTreeSet<_> = ref_h1(l)
        .into_iter()
        .chain(ref_h2(l))
        .map(|(st, _)| st)
        .collect();
    let mut out = Vec::new();
    let checks = [
        ("full_withdraw_set", l.full_withdraw_set() == ref_full(l)),
        ("h1", pairs(HeuristicId::H1) == ref_h1(l)),
        ("h2", pairs(HeuristicId::H2) == ref_h2(l)),
        ("total_linked", report.counts.total_linked == linked.len()),
        ("h3", report.h3.partition() == ref_h3(l)),
        ("h4", report.h4.partition() == ref_h4(l, t)),
        ("merged", report.clusters.partition() == ref_merged(l, t)),
    ];
    for (name, ok) in checks {
        if !ok {
            out.push(name);
        }
    }
    out
}
