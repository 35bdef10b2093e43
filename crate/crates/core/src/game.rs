//! The recipient-unlinkability game, run against simulated traffic.
//!
//! Each trial creates two target recipients and a target sender next to some
//! background traffic. The sender pays `r_c` and then pays `r_c` again
//! (`b = 0`) or `r_{1-c}` (`b = 1`). Recipients withdraw per their profile.
//! The adversary sees the resulting public ledger, the two challenge
//! payments and the targets' public addresses, and guesses `b`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::address::ChainAddress;
use crate::dispatch_group;
use crate::group::PrimeOrderGroup;
use crate::heuristics::{analyze, h3_collector_pattern, HeuristicConfig};
use crate::ledger::{Ledger, SendTx};
use crate::simulator::{collector_profile, BehaviorProfile, SimConfig, World};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid game config: {0}")]
    Config(String),
    #[error("unknown strategy {name:?}; available: {}", available.join(", "))]
    UnknownStrategy {
        name: String,
        available: Vec<&'static str>,
    },
}

/// Everything the adversary gets to see. Deliberately holds no labels.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub ledger: Ledger,
    /// Indices into `ledger.sends()` of the first and second challenge
    /// payment.
    pub challenge: [usize; 2],
    /// Registrant addresses of `r_0` and `r_1`.
    pub targets: [ChainAddress; 2],
    pub sender: ChainAddress,
}

impl Transcript {
    pub fn challenge_sends(&self) -> [&SendTx; 2] {
        self.challenge.map(|i| &self.ledger.sends()[i])
    }
}

pub trait AdversaryStrategy: Sync {
    fn name(&self) -> &'static str;

    /// Returns the guess `b'`: `false` for "same recipient" (`b = 0`),
    /// `true` for "different recipients".
    fn guess(&self, transcript: &Transcript, rng: &mut dyn RngCore) -> bool;
}

/// Coin flip.
pub struct RandomGuess;

impl AdversaryStrategy for RandomGuess {
    fn name(&self) -> &'static str {
        "random"
    }

    fn guess(&self, _: &Transcript, rng: &mut dyn RngCore) -> bool {
        rng.gen()
    }
}

/// Looks only at the two announcements and ignores withdrawals.
pub struct AnnouncementOnly;

impl AdversaryStrategy for AnnouncementOnly {
    fn name(&self) -> &'static str {
        "announcement"
    }

    fn guess(&self, t: &Transcript, _: &mut dyn RngCore) -> bool {
        let [a, b] = t.challenge_sends();
        let bit = |s: &SendTx| {
            let text = format!(
                "{}{}",
                s.announcement.ephemeral_key, s.announcement.stealth_key
            );
            text.bytes().fold(0u8, |acc, x| acc ^ x) & 1
        };
        bit(a) != bit(b)
    }
}

/// "Same recipient" iff the collector pattern puts both challenge stealth
/// addresses in one cluster.
pub struct CollectorLink;

impl AdversaryStrategy for CollectorLink {
    fn name(&self) -> &'static str {
        "h3"
    }

    fn guess(&self, t: &Transcript, _: &mut dyn RngCore) -> bool {
        let [a, b] = t.challenge_sends();
        !h3_collector_pattern(&t.ledger).same_cluster(&a.stealth_address, &b.stealth_address)
    }
}

/// "Same recipient" iff any heuristic links the two challenge payments,
/// through a shared cluster or a shared attributed identity.
pub struct AllHeuristics;

impl AdversaryStrategy for AllHeuristics {
    fn name(&self) -> &'static str {
        "heuristics"
    }

    fn guess(&self, t: &Transcript, _: &mut dyn RngCore) -> bool {
        let [a, b] = t.challenge_sends();
        let report = analyze(&t.ledger, &HeuristicConfig::default()).expect("default config");
        if report
            .clusters
            .same_cluster(&a.stealth_address, &b.stealth_address)
        {
            return false;
        }
        let identity = |st: &ChainAddress| {
            report
                .attributions
                .iter()
                .find(|x| x.stealth_address == *st)
                .map(|x| x.identity)
        };
        let (ia, ib) = (identity(&a.stealth_address), identity(&b.stealth_address));
        !(ia.is_some() && ia == ib)
    }
}

pub const STRATEGY_NAMES: [&str; 4] = ["random", "announcement", "h3", "heuristics"];

pub fn strategy_by_name(name: &str) -> Result<Box<dyn AdversaryStrategy>, GameError> {
    Ok(match name {
        "random" => Box::new(RandomGuess),
        "announcement" => Box::new(AnnouncementOnly),
        "h3" => Box::new(CollectorLink),
        "heuristics" => Box::new(AllHeuristics),
        _ => {
            return Err(GameError::UnknownStrategy {
                name: name.to_string(),
                available: STRATEGY_NAMES.to_vec(),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub trials: usize,
    pub seed: u64,
    /// Behavior of the two target recipients.
    pub recipient_profile: BehaviorProfile,
    pub sender_profile: BehaviorProfile,
    /// Chain, group, asset and fee settings, plus the background population
    /// (`num_entities`) and traffic (`num_payments`) of every trial.
    pub background: SimConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            trials: 2000,
            seed: 0,
            recipient_profile: collector_profile(),
            sender_profile: BehaviorProfile::default(),
            background: SimConfig {
                num_entities: 6,
                num_payments: 12,
                ..SimConfig::default()
            },
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.trials == 0 {
            return Err(GameError::Config("trials must be at least 1".into()));
        }
        for (name, p) in [
            ("recipient_profile", &self.recipient_profile),
            ("sender_profile", &self.sender_profile),
        ] {
            p.validate()
                .map_err(|e| GameError::Config(format!("{name}: {e}")))?;
        }
        let bg = &self.background;
        if bg.num_payments > 0 {
            bg.validate()
                .map_err(|e| GameError::Config(format!("background: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Interval {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

/// Maps an interval for the success rate to one for `|p - 1/2|`.
fn advantage_interval(success: Interval) -> Interval {
    let (lo, hi) = (success.low - 0.5, success.high - 0.5);
    if lo <= 0.0 && hi >= 0.0 {
        Interval {
            low: 0.0,
            high: lo.abs().max(hi.abs()),
        }
    } else {
        Interval {
            low: lo.abs().min(hi.abs()),
            high: lo.abs().max(hi.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub strategy: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub advantage: f64,
    pub confidence: f64,
    pub success_interval: Interval,
    pub advantage_interval: Interval,
    /// Trials with challenge bit `b = 1`.
    pub b_ones: usize,
}

struct TrialOutcome {
    b: bool,
    guess: bool,
}

fn run_trial<G: PrimeOrderGroup>(
    strategy: &dyn AdversaryStrategy,
    config: &GameConfig,
    trial: usize,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    let bg = &config.background;
    let mut world = World::<G>::new(bg, rng);

    let mut pool = Vec::new();
    if bg.num_payments > 0 {
        for (group, size) in bg.population.iter().zip(bg.group_sizes()) {
            for _ in 0..size {
                pool.push(world.add_entity(&group.name, group.profile));
            }
        }
    }
    let r = [
        world.add_entity("target", config.recipient_profile),
        world.add_entity("target", config.recipient_profile),
    ];
    let s = world.add_entity("sender", config.sender_profile);
    for _ in 0..bg.num_payments {
        world.random_payment(&pool);
    }

    let c = usize::from(world.rng().gen::<bool>());
    let b: bool = world.rng().gen();
    let first = world.pay(s, r[c]);
    let second = world.pay(s, if b { r[1 - c] } else { r[c] });
    let mut strategy_rng = ChaCha8Rng::from_rng(world.rng()).expect("chacha seeding");

    let targets = [world.entity(r[0]).registrant, world.entity(r[1]).registrant];
    let sender = world.entity(s).wallet;
    let sim = world.finish();
    let locate = |payment: usize| {
        let id = &sim.truth.payments[payment].tx_id;
        sim.ledger
            .sends()
            .iter()
            .position(|x| &x.tx_id == id)
            .expect("challenge payment is on the ledger")
    };
    let transcript = Transcript {
        challenge: [locate(first), locate(second)],
        ledger: sim.ledger,
        targets,
        sender,
    };
    TrialOutcome {
        b,
        guess: strategy.guess(&transcript, &mut strategy_rng),
    }
}

/// Plays `config.trials` independent rounds. Trial `i` draws all its
/// randomness from stream `i` of the seed, so results do not depend on
/// scheduling.
pub fn run_ru_game(
    strategy: &dyn AdversaryStrategy,
    config: &GameConfig,
) -> Result<GameResult, GameError> {
    config.validate()?;
    let outcomes: Vec<TrialOutcome> = dispatch_group!(config.background.group, G => {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial::<G>(strategy, config, i))
            .collect()
    });
    let successes = outcomes.iter().filter(|o| o.b == o.guess).count();
    let b_ones = outcomes.iter().filter(|o| o.b).count();
    let success_rate = successes as f64 / config.trials as f64;
    let success_interval = wilson_interval(successes, config.trials, Z_95);
    Ok(GameResult {
        strategy: strategy.name().to_string(),
        trials: config.trials,
        successes,
        success_rate,
        advantage: (success_rate - 0.5).abs(),
        confidence: 0.95,
        success_interval,
        advantage_interval: advantage_interval(success_interval),
        b_ones,
    })
}
