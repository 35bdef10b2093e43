use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::address::ChainAddress;
use crate::ledger::Ledger;

const DAY: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Whale {
    pub address: ChainAddress,
    pub withdrawals: usize,
}

/// How many recipient addresses received exactly k withdrawals, for each k.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawerDistribution {
    pub histogram: BTreeMap<usize, usize>,
    pub total_withdrawals: usize,
    pub whale: Option<Whale>,
}

pub fn withdrawer_distribution(ledger: &Ledger) -> WithdrawerDistribution {
    let mut per_address: BTreeMap<ChainAddress, usize> = BTreeMap::new();
    for w in ledger.withdrawals() {
        *per_address.entry(w.recipient).or_default() += 1;
    }
    let mut dist = WithdrawerDistribution {
        total_withdrawals: ledger.withdrawals().len(),
        ..Default::default()
    };
    for (&address, &k) in &per_address {
        *dist.histogram.entry(k).or_default() += 1;
        if dist.whale.as_ref().is_none_or(|w| k > w.withdrawals) {
            dist.whale = Some(Whale {
                address,
                withdrawals: k,
            });
        }
    }
    dist
}

impl WithdrawerDistribution {
    /// Two-column plot data, one row per bucket.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("withdrawals,addresses\n");
        for (k, n) in &self.histogram {
            let _ = writeln!(out, "{k},{n}");
        }
        out
    }
}

/// Transaction counts by UTC day of week (Monday = 0) and hour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityHeatmap {
    pub address: ChainAddress,
    pub counts: [[u64; 24]; 7],
    pub total: u64,
    pub warning: Option<String>,
}

fn day_hour(timestamp: u64) -> (usize, usize) {
    let days = timestamp / DAY;
    // 1970-01-01 was a Thursday
    let dow = ((days + 3) % 7) as usize;
    let hour = ((timestamp % DAY) / 3_600) as usize;
    (dow, hour)
}

/// Buckets every record touching `address` (as registrant, sender, stealth
/// address or withdrawal recipient) whose timestamp lies in `range`.
pub fn activity_heatmap(
    ledger: &Ledger,
    address: &ChainAddress,
    range: Option<Range<u64>>,
) -> ActivityHeatmap {
    let mut stamps: Vec<u64> = Vec::new();
    stamps.extend(
        ledger
            .registrations()
            .iter()
            .filter(|r| r.registrant == *address)
            .map(|r| r.timestamp),
    );
    stamps.extend(
        ledger
            .sends()
            .iter()
            .filter(|s| s.sender == *address || s.stealth_address == *address)
            .map(|s| s.timestamp),
    );
    stamps.extend(
        ledger
            .withdrawals()
            .iter()
            .filter(|w| w.recipient == *address || w.stealth_address == *address)
            .map(|w| w.timestamp),
    );
    let warning = stamps
        .is_empty()
        .then(|| format!("address {address} does not appear in the ledger"));
    let mut map = ActivityHeatmap {
        address: *address,
        counts: [[0; 24]; 7],
        total: 0,
        warning,
    };
    for ts in stamps {
        if range.as_ref().is_some_and(|r| !r.contains(&ts)) {
            continue;
        }
        let (d, h) = day_hour(ts);
        map.counts[d][h] += 1;
        map.total += 1;
    }
    map
}

impl ActivityHeatmap {
    /// One row per weekday, one column per hour.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day");
        for h in 0..24 {
            let _ = write!(out, ",h{h:02}");
        }
        out.push('\n');
        for (d, name) in ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]
            .iter()
            .enumerate()
        {
            out.push_str(name);
            for c in self.counts[d] {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Running totals at the end of each UTC day with activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsagePoint {
    /// Days since the Unix epoch.
    pub day: u64,
    pub registrations: usize,
    pub sends: usize,
    pub withdrawals: usize,
}

pub fn cumulative_usage(ledger: &Ledger) -> Vec<UsagePoint> {
    let mut daily: BTreeMap<u64, [usize; 3]> = BTreeMap::new();
    for r in ledger.registrations() {
        daily.entry(r.timestamp / DAY).or_default()[0] += 1;
    }
    for s in ledger.sends() {
        daily.entry(s.timestamp / DAY).or_default()[1] += 1;
    }
    for w in ledger.withdrawals() {
        daily.entry(w.timestamp / DAY).or_default()[2] += 1;
    }
    let mut acc = [0usize; 3];
    daily
        .into_iter()
        .map(|(day, c)| {
            for i in 0..3 {
                acc[i] += c[i];
            }
            UsagePoint {
                day,
                registrations: acc[0],
                sends: acc[1],
                withdrawals: acc[2],
            }
        })
        .collect()
}

pub fn usage_csv(points: &[UsagePoint]) -> String {
    let mut out = String::from("day,registrations,sends,withdrawals\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.day, p.registrations, p.sends, p.withdrawals
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Asset, ChainId, WithdrawTx};
    use crate::simulator::{simulate, BehaviorProfile, Burstiness, SimConfig};

    fn a(n: u64) -> ChainAddress {
        ChainAddress::from_u64(n)
    }

    fn withdrawal(i: u64, to: ChainAddress, timestamp: u64) -> WithdrawTx {
        WithdrawTx {
            tx_id: format!("0x{i}"),
            stealth_address: a(1000 + i),
            recipient: to,
            asset: Asset::Native,
            amount: 1,
            gas_paid: 0,
            max_priority_fee_per_gas: 1,
            via_relayer: false,
            block: i,
            log_index: 0,
            timestamp,
        }
    }

    fn ledger_of(wds: Vec<WithdrawTx>) -> Ledger {
        Ledger::new(ChainId::Mainnet, vec![], vec![], wds)
    }

    #[test]
    fn distribution_buckets() {
        let mut wds = Vec::new();
        for i in 0..2 {
            wds.push(withdrawal(i, a(1), 0));
        }
        for i in 2..5 {
            wds.push(withdrawal(i, a(2), 0));
        }
        let d = withdrawer_distribution(&ledger_of(wds));
        assert_eq!(d.histogram, BTreeMap::from([(2, 1), (3, 1)]));
        assert_eq!(
            d.whale,
            Some(Whale {
                address: a(2),
                withdrawals: 3
            })
        );
        let sum: usize = d.histogram.iter().map(|(k, n)| k * n).sum();
        assert_eq!(sum, d.total_withdrawals);
        assert_eq!(d.to_csv(), "withdrawals,addresses\n2,1\n3,1\n");
    }

    #[test]
    fn whale_of_481() {
        let mut wds: Vec<_> = (0..481).map(|i| withdrawal(i, a(7), 0)).collect();
        wds.extend((481..500).map(|i| withdrawal(i, a(i), 0)));
        let d = withdrawer_distribution(&ledger_of(wds));
        assert!(d.histogram[&481] >= 1);
        assert_eq!(d.whale.unwrap().withdrawals, 481);
        assert_eq!(d.histogram[&1], 19);
    }

    #[test]
    fn distinct_recipients_single_bucket() {
        let wds = (0..6).map(|i| withdrawal(i, a(i), 0)).collect();
        let d = withdrawer_distribution(&ledger_of(wds));
        assert_eq!(d.histogram, BTreeMap::from([(1, 6)]));
    }

    #[test]
    fn heatmap_cells() {
        // 2024-01-01 was a Monday; 13:30 UTC
        let ts = 1_704_115_800;
        let l = ledger_of(vec![withdrawal(1, a(5), ts)]);
        let m = activity_heatmap(&l, &a(5), None);
        assert_eq!(m.counts[0][13], 1);
        assert_eq!(m.total, 1);
        assert!(m.warning.is_none());
        // one day later, Tuesday
        assert_eq!(day_hour(ts + DAY), (1, 13));
        // epoch was a Thursday
        assert_eq!(day_hour(0), (3, 0));

        let empty = activity_heatmap(&Ledger::empty(ChainId::Mainnet), &a(5), None);
        assert_eq!(empty.total, 0);
        assert!(empty.warning.is_some());
        let outside = activity_heatmap(&l, &a(5), Some(0..ts));
        assert_eq!(outside.total, 0);
        assert!(outside.warning.is_none());
    }

    #[test]
    fn burst_profile_concentrates_activity() {
        let profile = BehaviorProfile {
            burstiness: Burstiness {
                window_days: 14,
                in_window: 0.95,
            },
            p_self_test_payment: 0.0,
            p_withdraw_to_registrant: 1.0,
            ..BehaviorProfile::default()
        };
        let (ledger, truth) = simulate(&SimConfig {
            num_entities: 3,
            num_payments: 300,
            seed: 21,
            ..SimConfig::uniform(profile)
        })
        .unwrap();
        for e in &truth.entities {
            let all = activity_heatmap(&ledger, &e.registrant, None);
            // withdrawals trail payments by up to six days
            let end = e.window_start + u64::from(e.window_days + 6) * DAY;
            let inside = activity_heatmap(&ledger, &e.registrant, Some(e.window_start..end));
            let share = inside.total as f64 / (all.total - 1) as f64;
            assert!(share >= 0.9, "entity {} share {share}", e.id);
        }
    }

    #[test]
    fn cumulative_counts_are_monotone() {
        let (ledger, _) = simulate(&SimConfig {
            num_payments: 50,
            ..SimConfig::default()
        })
        .unwrap();
        let points = cumulative_usage(&ledger);
        let last = points.last().unwrap();
        assert_eq!(last.sends, ledger.sends().len());
        assert_eq!(last.withdrawals, ledger.withdrawals().len());
        assert!(points
            .windows(2)
            .all(|w| w[0].sends <= w[1].sends && w[0].day < w[1].day));
        assert!(usage_csv(&points).starts_with("day,registrations,sends,withdrawals\n"));
    }
}
