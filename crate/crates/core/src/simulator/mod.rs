//! Agent-based generator of labelled stealth-payment ledgers.
//!
//! Every entity registers real meta keys, every payment carries a real
//! announcement, and every withdrawal follows the recipient's
//! [`BehaviorProfile`]. The output is a [`Ledger`] plus a [`GroundTruth`]
//! naming the owner of every address. A seed fully determines both.

mod profile;
mod truth;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::profile::{
    collector_profile, countermeasure_profile, BehaviorProfile, Burstiness, CollectorDegree,
    FeeHabit,
};
pub use self::truth::{Destination, EntityTruth, GroundTruth, PaymentTruth};
use crate::address::ChainAddress;
use crate::dispatch_group;
use crate::group::{random_nonzero_scalar, GroupKind, PrimeOrderGroup};
use crate::ledger::{Asset, ChainId, Ledger, Record, RegistrationTx, SendTx, WithdrawTx};
use crate::stealth::{generate_stealth_payment, StealthMetaKeyPair};

const DAY: u64 = 86_400;
const HOUR: u64 = 3_600;
const BLOCK_TIME: u64 = 12;
const GENESIS_BLOCK: u64 = 14_000_000;
const GAS_PER_WITHDRAWAL: u128 = 21_000;
const GWEI: u128 = 1_000_000_000;

/// Priority fees wallets propose by default.
pub const ROUND_FEES: [u128; 5] = [GWEI, 3 * GWEI / 2, 2 * GWEI, 5 * GWEI / 2, 3 * GWEI];

/// Idiosyncratic fees live in a band no auto or relayer fee reaches.
const IDIOSYNCRATIC_FEES: std::ops::Range<u128> = 10 * GWEI..100 * GWEI;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid simulation config: {0}")]
pub struct SimError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationGroup {
    pub name: String,
    /// Relative weight; entities are split across groups in proportion.
    pub share: f64,
    pub profile: BehaviorProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_entities: usize,
    pub num_payments: usize,
    pub seed: u64,
    pub chain: ChainId,
    pub group: GroupKind,
    /// Fraction of payments made in tokens rather than the native asset.
    pub asset_mix: f64,
    pub tokens: Vec<String>,
    /// Payment amounts are log-uniform between these bounds.
    pub amount_min_eth: f64,
    pub amount_max_eth: f64,
    /// Unix time of the first simulated block.
    pub start_time: u64,
    pub period_days: u32,
    pub relayers: usize,
    /// Chance that an auto fee gets random noise on top of its round value.
    pub p_fee_noise: f64,
    pub population: Vec<PopulationGroup>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_entities: 50,
            num_payments: 500,
            seed: 0,
            chain: ChainId::Mainnet,
            group: GroupKind::Production,
            asset_mix: 0.3,
            tokens: vec!["DAI".into(), "USDC".into()],
            amount_min_eth: 0.01,
            amount_max_eth: 100.0,
            start_time: 1_640_995_200,
            period_days: 365,
            relayers: 3,
            p_fee_noise: 0.1,
            population: default_population(),
        }
    }
}

/// A mixed population: registrant reusers, collectors, wallets with a fee
/// fingerprint, and careful users.
pub fn default_population() -> Vec<PopulationGroup> {
    let burst = |window_days| Burstiness {
        window_days,
        in_window: 0.9,
    };
    vec![
        PopulationGroup {
            name: "registrant-reuse".into(),
            share: 0.35,
            profile: BehaviorProfile {
                p_withdraw_to_registrant: 0.9,
                p_self_test_payment: 0.05,
                collector_degree: CollectorDegree::Reuse(1),
                p_partial_withdraw: 0.05,
                fee_habit: FeeHabit::Auto,
                burstiness: burst(14),
            },
        },
        PopulationGroup {
            name: "collector".into(),
            share: 0.25,
            profile: BehaviorProfile {
                p_withdraw_to_registrant: 0.0,
                p_self_test_payment: 0.02,
                collector_degree: CollectorDegree::Reuse(2),
                p_partial_withdraw: 0.05,
                fee_habit: FeeHabit::Auto,
                burstiness: burst(30),
            },
        },
        PopulationGroup {
            name: "fee-fingerprint".into(),
            share: 0.1,
            profile: BehaviorProfile {
                p_withdraw_to_registrant: 0.2,
                p_self_test_payment: 0.0,
                collector_degree: CollectorDegree::Reuse(3),
                p_partial_withdraw: 0.1,
                fee_habit: FeeHabit::Idiosyncratic,
                burstiness: burst(30),
            },
        },
        PopulationGroup {
            name: "careful".into(),
            share: 0.3,
            profile: countermeasure_profile(),
        },
    ]
}

impl SimConfig {
    /// A config where every entity follows `profile`.
    pub fn uniform(profile: BehaviorProfile) -> Self {
        Self {
            population: vec![PopulationGroup {
                name: "uniform".into(),
                share: 1.0,
                profile,
            }],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError(msg));
        if self.num_entities < 2 {
            return err(format!(
                "num_entities must be at least 2, got {}",
                self.num_entities
            ));
        }
        if self.num_payments < 1 {
            return err("num_payments must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.asset_mix) {
            return err(format!("asset_mix = {} is not a fraction", self.asset_mix));
        }
        if !(0.0..=1.0).contains(&self.p_fee_noise) {
            return err(format!(
                "p_fee_noise = {} is not a probability",
                self.p_fee_noise
            ));
        }
        if self.asset_mix > 0.0 && (self.tokens.is_empty() || self.relayers == 0) {
            return err("token payments need at least one token and one relayer".into());
        }
        if !(self.amount_min_eth > 0.0 && self.amount_min_eth <= self.amount_max_eth)
            || !self.amount_max_eth.is_finite()
        {
            return err(format!(
                "amount range [{}, {}] is not a positive interval",
                self.amount_min_eth, self.amount_max_eth
            ));
        }
        if self.period_days < 2 {
            return err("period_days must be at least 2".into());
        }
        if self.population.is_empty() {
            return err("population must have at least one group".into());
        }
        for g in &self.population {
            if !(g.share > 0.0 && g.share.is_finite()) {
                return err(format!("group {:?}: share must be positive", g.name));
            }
            g.profile
                .validate()
                .map_err(|e| SimError(format!("group {:?}: {e}", g.name)))?;
        }
        Ok(())
    }

    /// Entity counts per population group by largest remainder.
    pub(crate) fn group_sizes(&self) -> Vec<usize> {
        let total: f64 = self.population.iter().map(|g| g.share).sum();
        let quotas: Vec<f64> = self
            .population
            .iter()
            .map(|g| g.share / total * self.num_entities as f64)
            .collect();
        let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (quotas[a].fract(), quotas[b].fract());
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let missing = self.num_entities - sizes.iter().sum::<usize>();
        for &i in order.iter().cycle().take(missing) {
            sizes[i] += 1;
        }
        sizes
    }
}

struct SimEntity<G: PrimeOrderGroup> {
    keys: StealthMetaKeyPair<G>,
    profile: BehaviorProfile,
    truth: EntityTruth,
}

/// A ledger under construction. [`simulate`] drives it with random traffic;
/// the privacy game scripts individual payments on it.
pub struct World<G: PrimeOrderGroup> {
    rng: ChaCha8Rng,
    chain: ChainId,
    group: GroupKind,
    start_time: u64,
    period_secs: u64,
    asset_mix: f64,
    tokens: Vec<String>,
    ln_amount: (f64, f64),
    p_fee_noise: f64,
    relayer_fees: Vec<Vec<u128>>,
    entities: Vec<SimEntity<G>>,
    used_fees: BTreeSet<u128>,
    records: Vec<Record>,
    payments: Vec<PaymentTruth>,
    owners: std::collections::BTreeMap<ChainAddress, usize>,
}

/// Ledger, labels and the entities' secret keys, in entity order.
pub struct Simulation<G: PrimeOrderGroup> {
    pub ledger: Ledger,
    pub truth: GroundTruth,
    pub keys: Vec<StealthMetaKeyPair<G>>,
}

impl<G: PrimeOrderGroup> World<G> {
    /// Takes chain, timing, asset and fee settings from `config`; population
    /// and counts are left to the caller.
    pub fn new(config: &SimConfig, mut rng: ChaCha8Rng) -> Self {
        let relayer_fees = (0..config.relayers)
            .map(|_| {
                (0..2)
                    .map(|_| rng.gen_range(2..=8u128) * GWEI / 2)
                    .collect()
            })
            .collect();
        Self {
            rng,
            chain: config.chain.clone(),
            group: config.group,
            start_time: config.start_time,
            period_secs: u64::from(config.period_days) * DAY,
            asset_mix: config.asset_mix,
            tokens: config.tokens.clone(),
            ln_amount: (config.amount_min_eth.ln(), config.amount_max_eth.ln()),
            p_fee_noise: config.p_fee_noise,
            relayer_fees,
            entities: Vec::new(),
            used_fees: BTreeSet::new(),
            records: Vec::new(),
            payments: Vec::new(),
            owners: Default::default(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn entity(&self, id: usize) -> &EntityTruth {
        &self.entities[id].truth
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    fn fresh_address(&mut self, owner: usize) -> ChainAddress {
        loop {
            let a = ChainAddress::random(&mut self.rng);
            if let std::collections::btree_map::Entry::Vacant(slot) = self.owners.entry(a) {
                slot.insert(owner);
                return a;
            }
        }
    }

    /// Creates an entity with fresh keys and registers it.
    pub fn add_entity(&mut self, group: &str, profile: BehaviorProfile) -> usize {
        let id = self.entities.len();
        let keys = StealthMetaKeyPair::<G>::generate(&mut self.rng);
        let registrant = self.fresh_address(id);
        let wallet = self.fresh_address(id);
        let collectors = match profile.collector_degree {
            CollectorDegree::Reuse(n) => (0..n).map(|_| self.fresh_address(id)).collect(),
            CollectorDegree::Fresh => Vec::new(),
        };
        let fee = match profile.fee_habit {
            FeeHabit::Auto => None,
            FeeHabit::Manual(v) => Some(u128::from(v)),
            FeeHabit::Idiosyncratic => loop {
                let v = self.rng.gen_range(IDIOSYNCRATIC_FEES);
                if self.used_fees.insert(v) {
                    break Some(v);
                }
            },
        };
        let window_secs = u64::from(profile.burstiness.window_days) * DAY;
        let span = self.period_secs.saturating_sub(window_secs + DAY);
        let window_start = self.start_time + DAY + self.rng.gen_range(0..=span);

        self.records.push(Record::Registration(RegistrationTx {
            registrant,
            pk_view: G::encode_text(&keys.public().pk_view),
            pk_spend: G::encode_text(&keys.public().pk_spend),
            block: 0,
            log_index: 0,
            timestamp: self.start_time + id as u64,
        }));
        self.entities.push(SimEntity {
            keys,
            profile,
            truth: EntityTruth {
                id,
                group: group.to_string(),
                registrant,
                wallet,
                collectors,
                fee,
                window_start,
                window_days: profile.burstiness.window_days,
            },
        });
        id
    }

    fn payment_time(&mut self, recipient: usize) -> u64 {
        let e = &self.entities[recipient];
        let window_secs = u64::from(e.profile.burstiness.window_days) * DAY;
        let start = e.truth.window_start;
        if self.rng.gen_bool(e.profile.burstiness.in_window) {
            start + self.rng.gen_range(0..window_secs)
        } else {
            self.start_time + self.rng.gen_range(DAY..self.period_secs)
        }
    }

    fn draw_amount(&mut self) -> u128 {
        let (lo, hi) = self.ln_amount;
        let eth = self.rng.gen_range(lo..=hi).exp();
        (eth * 1e18) as u128
    }

    fn auto_fee(&mut self) -> u128 {
        let round = *ROUND_FEES.choose(&mut self.rng).expect("non-empty");
        if self.rng.gen_bool(self.p_fee_noise) {
            round + self.rng.gen_range(1..GWEI / 2)
        } else {
            round
        }
    }

    fn tx_id(&mut self) -> String {
        format!("0x{}", hex::encode(self.rng.gen::<[u8; 32]>()))
    }

    /// A payment between two random members of `pool` (or a self-test
    /// payment, per the recipient's profile).
    pub fn random_payment(&mut self, pool: &[usize]) -> usize {
        assert!(pool.len() >= 2, "payment pool needs two entities");
        let recipient = *pool.choose(&mut self.rng).expect("non-empty");
        let sender = if self
            .rng
            .gen_bool(self.entities[recipient].profile.p_self_test_payment)
        {
            recipient
        } else {
            let i = self.rng.gen_range(0..pool.len() - 1);
            let pos = pool.iter().position(|&e| e == recipient).expect("in pool");
            pool[if i >= pos { i + 1 } else { i }]
        };
        self.pay(sender, recipient)
    }

    /// One stealth payment from `sender`'s wallet to `recipient`, followed by
    /// the recipient's withdrawals. Returns the payment index.
    pub fn pay(&mut self, sender: usize, recipient: usize) -> usize {
        let asset = if self.rng.gen_bool(self.asset_mix) {
            Asset::Token(
                self.tokens
                    .choose(&mut self.rng)
                    .expect("validated")
                    .clone(),
            )
        } else {
            Asset::Native
        };
        let at = self.payment_time(recipient);
        let profile = self.entities[recipient].profile;

        let (destination, destination_address) = if sender == recipient {
            (Destination::SelfTest, self.entities[recipient].truth.wallet)
        } else if self.rng.gen_bool(profile.p_withdraw_to_registrant) {
            (
                Destination::Registrant,
                self.entities[recipient].truth.registrant,
            )
        } else {
            match profile.collector_degree {
                CollectorDegree::Reuse(_) => {
                    let c = *self.entities[recipient]
                        .truth
                        .collectors
                        .choose(&mut self.rng)
                        .expect("validated");
                    (Destination::Collector, c)
                }
                CollectorDegree::Fresh => (Destination::Fresh, self.fresh_address(recipient)),
            }
        };
        let partial = self.rng.gen_bool(profile.p_partial_withdraw);

        // (tip, gas_paid) per withdrawal
        let mut fees = Vec::with_capacity(2);
        for _ in 0..if partial { 2 } else { 1 } {
            fees.push(if asset.is_native() {
                let tip = match self.entities[recipient].truth.fee {
                    Some(v) => v,
                    None => self.auto_fee(),
                };
                let base = self.rng.gen_range(5..=40u128) * GWEI;
                (tip, GAS_PER_WITHDRAWAL * (base + tip))
            } else {
                let relayer = self.rng.gen_range(0..self.relayer_fees.len());
                (
                    *self.relayer_fees[relayer]
                        .choose(&mut self.rng)
                        .expect("non-empty"),
                    0,
                )
            });
        }
        let total_gas: u128 = fees.iter().map(|f| f.1).sum();
        let amount = self.draw_amount().max(4 * total_gas).max(10);

        let r = random_nonzero_scalar::<G, _>(&mut self.rng);
        let payment = generate_stealth_payment(self.entities[recipient].keys.public(), &r)
            .expect("nonzero ephemeral secret");
        self.owners.insert(payment.stealth_address, recipient);
        let send_id = self.tx_id();
        self.records.push(Record::Send(SendTx {
            tx_id: send_id.clone(),
            sender: self.entities[sender].truth.wallet,
            stealth_address: payment.stealth_address,
            announcement: payment.announcement.encode(),
            asset: asset.clone(),
            amount,
            block: 0,
            log_index: 0,
            timestamp: at,
        }));

        let avail = amount - total_gas;
        let amounts = if partial {
            let first = self.rng.gen_range(avail / 5..=avail * 4 / 5);
            vec![first, avail - first]
        } else {
            vec![avail]
        };
        let mut t = at;
        let mut withdraw_tx_ids = Vec::new();
        for ((tip, gas_paid), value) in fees.into_iter().zip(amounts) {
            t += self.rng.gen_range(HOUR..=3 * DAY);
            let id = self.tx_id();
            withdraw_tx_ids.push(id.clone());
            self.records.push(Record::Withdraw(WithdrawTx {
                tx_id: id,
                stealth_address: payment.stealth_address,
                recipient: destination_address,
                asset: asset.clone(),
                amount: value,
                gas_paid,
                max_priority_fee_per_gas: tip,
                via_relayer: !asset.is_native(),
                block: 0,
                log_index: 0,
                timestamp: t,
            }));
        }

        self.payments.push(PaymentTruth {
            tx_id: send_id,
            stealth_address: payment.stealth_address,
            sender,
            recipient,
            asset,
            destination,
            destination_address,
            partial,
            withdraw_tx_ids,
        });
        self.payments.len() - 1
    }

    /// Orders records by time, assigns blocks and log indices, and builds the
    /// ledger.
    pub fn finish(mut self) -> Simulation<G> {
        fn slot(rec: &mut Record) -> (&mut u64, &mut u64, &mut u32) {
            match rec {
                Record::Registration(r) => (&mut r.timestamp, &mut r.block, &mut r.log_index),
                Record::Send(s) => (&mut s.timestamp, &mut s.block, &mut s.log_index),
                Record::Withdraw(w) => (&mut w.timestamp, &mut w.block, &mut w.log_index),
            }
        }
        self.records.sort_by_key(|r| match r {
            Record::Registration(r) => r.timestamp,
            Record::Send(s) => s.timestamp,
            Record::Withdraw(w) => w.timestamp,
        });
        let mut last_block = u64::MAX;
        let mut next_log = 0u32;
        for rec in &mut self.records {
            let (ts, block, log) = slot(rec);
            *block = GENESIS_BLOCK + (*ts - self.start_time) / BLOCK_TIME;
            if *block != last_block {
                last_block = *block;
                next_log = 0;
            }
            *log = next_log;
            next_log += 1;
        }
        let ledger = Ledger::from_records(self.chain, self.records);
        let (keys, entities) = self.entities.into_iter().map(|e| (e.keys, e.truth)).unzip();
        Simulation {
            ledger,
            truth: GroundTruth {
                group: self.group,
                entities,
                payments: self.payments,
                owners: self.owners,
            },
            keys,
        }
    }
}

/// Runs the simulation in a statically chosen group.
pub fn simulate_in<G: PrimeOrderGroup>(config: &SimConfig) -> Result<Simulation<G>, SimError> {
    config.validate()?;
    let mut world = World::<G>::new(config, ChaCha8Rng::seed_from_u64(config.seed));
    for (group, size) in config.population.iter().zip(config.group_sizes()) {
        for _ in 0..size {
            world.add_entity(&group.name, group.profile);
        }
    }
    let pool: Vec<usize> = (0..world.num_entities()).collect();
    for _ in 0..config.num_payments {
        world.random_payment(&pool);
    }
    Ok(world.finish())
}

/// Runs the simulation in the group named by `config.group`.
pub fn simulate(config: &SimConfig) -> Result<(Ledger, GroundTruth), SimError> {
    dispatch_group!(config.group, G => {
        simulate_in::<G>(config).map(|s| (s.ledger, s.truth))
    })
}
