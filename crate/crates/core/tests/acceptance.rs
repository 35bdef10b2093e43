//! Acceptance checks. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{a, mismatches, random_ledger};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stealth_audit::address::ChainAddress;
use stealth_audit::game::{run_ru_game, strategy_by_name, GameConfig, GameResult};
use stealth_audit::group::{
    random_nonzero_scalar, PrimeOrderGroup, Secp256k1, Toy101, ToyElement, ToyScalar,
};
use stealth_audit::heuristics::{analyze, h3_collector_pattern, HeuristicConfig};
use stealth_audit::ledger::{Asset, ChainId, Ledger, SendTx, WithdrawTx};
use stealth_audit::metrics::{
    entropy_from_weights, linkage_stats, precision_recall, recipient_entropy, AnonymityReport,
};
use stealth_audit::simulator::{
    collector_profile, countermeasure_profile, default_population, simulate, BehaviorProfile,
    FeeHabit, SimConfig,
};
use stealth_audit::stealth::{
    generate_stealth_payment, Announcement, EncodedAnnouncement, StealthMetaKeyPair,
};

const CRYPTO_TRIALS: usize = 1000;
const CRYPTO_BUDGET: Duration = Duration::from_secs(10);
const TABLE_TOLERANCE_PP: f64 = 0.05;
const SOUNDNESS_PAYMENTS: usize = 10_000;
const SOUNDNESS_ENTITIES: usize = 2500;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(60);
const RECALL_PAYMENTS: usize = 4000;
const RECALL_TARGET: f64 = 0.5;
const RECALL_SIGMAS: f64 = 3.0;
const ENTROPY_EPS: f64 = 1e-9;
const ORACLE_LEDGERS: u64 = 50;
const ORACLE_MAX_RECORDS: usize = 500;
const GAME_TRIALS: usize = 2000;
const GAME_MAX_ADVANTAGE: f64 = 0.05;
const GAME_MIN_COLLECTOR_SUCCESS: f64 = 0.95;
const GAME_BUDGET: Duration = Duration::from_secs(120);

type Outcome = Result<String, String>;

fn crypto() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut keys = Vec::with_capacity(CRYPTO_TRIALS);
    let mut anns: Vec<Announcement<Secp256k1>> = Vec::with_capacity(CRYPTO_TRIALS);
    for _ in 0..CRYPTO_TRIALS {
        let k = StealthMetaKeyPair::<Secp256k1>::generate(&mut rng);
        let r = random_nonzero_scalar::<Secp256k1, _>(&mut rng);
        let pay = generate_stealth_payment(k.public(), &r).map_err(|e| e.to_string())?;
        let sk = k.stealth_secret(pay.ephemeral());
        if Secp256k1::mul_base(&sk) != *pay.pk_stealth() {
            return Err("sk_st·G != pk_stealth".into());
        }
        if Secp256k1::derive_address(pay.pk_stealth()) != pay.stealth_address {
            return Err("address does not match pk_stealth".into());
        }
        keys.push(k);
        anns.push(pay.announcement);
    }
    // every recipient scans its own announcement between two foreign ones
    let (mut missed, mut foreign) = (0, 0);
    for (i, k) in keys.iter().enumerate() {
        let window: Vec<usize> = [i + CRYPTO_TRIALS - 1, i, i + 1]
            .iter()
            .map(|j| j % CRYPTO_TRIALS)
            .collect();
        let batch: Vec<_> = window.iter().map(|&j| anns[j]).collect();
        let hits = k.scan(&batch);
        missed += usize::from(!hits.contains(&1));
        foreign += hits.iter().filter(|&&h| h != 1).count();
    }
    // and a few recipients scan everything
    for (i, k) in keys.iter().enumerate().step_by(100) {
        let hits = k.scan(&anns);
        if hits != vec![i] {
            foreign += hits.len().saturating_sub(1);
            missed += usize::from(!hits.contains(&i));
        }
    }
    let elapsed = start.elapsed();
    let detail =
        format!("{CRYPTO_TRIALS} trials, {missed} missed, {foreign} foreign, {elapsed:.2?}");
    if missed == 0 && foreign == 0 && elapsed < CRYPTO_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn toy_example() -> Outcome {
    let k = StealthMetaKeyPair::<Toy101>::from_secrets(ToyScalar::new(7), ToyScalar::new(11))
        .map_err(|e| e.to_string())?;
    let pay =
        generate_stealth_payment(k.public(), &ToyScalar::new(13)).map_err(|e| e.to_string())?;
    let shared = Toy101::hash_to_scalar(&Toy101::scalar_mul(
        &ToyScalar::new(13),
        &k.public().pk_view,
    ));
    let sk = k.stealth_secret(pay.ephemeral());
    let got = (
        pay.ephemeral().value(),
        shared.value(),
        pay.pk_stealth().value(),
        sk.value(),
    );
    let detail = format!(
        "R={} c={} pk_stealth={} sk_st={}",
        got.0, got.1, got.2, got.3
    );
    if got == (13, 91, 1, 1)
        && k.scan(&[pay.announcement]) == vec![0]
        && *pay.ephemeral() == ToyElement::new(13)
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn published_percentages() -> Outcome {
    // (h1, h2, total, withdrawn, published total %, published h1 %)
    let rows = [
        (ChainId::Mainnet, 4671, 253, 4696, 9680, 48.5, 48.25),
        (ChainId::Polygon, 15075, 670, 15084, 58454, 25.8, 25.79),
        (ChainId::Arbitrum, 12488, 356, 12513, 19033, 65.7, 65.61),
        (ChainId::Optimism, 8391, 135, 8403, 15963, 52.6, 52.57),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (chain, h1, h2, total, withdrawn, published_total, published_h1) in rows {
        let r = AnonymityReport::from_counts(chain.clone(), h1, h2, total, withdrawn);
        worst = worst
            .max((r.pct_linked - published_total).abs())
            .max((r.pct_h1 - published_h1).abs());
        parts.push(format!("{chain} {:.2}/{:.2}", r.pct_linked, r.pct_h1));
    }
    let detail = format!("{}; max deviation {worst:.3} pp", parts.join(", "));
    if worst <= TABLE_TOLERANCE_PP {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exclusive_fee_config() -> SimConfig {
    let mut population = default_population();
    for g in &mut population {
        g.profile.fee_habit = FeeHabit::Idiosyncratic;
    }
    SimConfig {
        num_entities: SOUNDNESS_ENTITIES,
        num_payments: SOUNDNESS_PAYMENTS,
        seed: 2024,
        population,
        ..SimConfig::default()
    }
}

fn soundness(entropy_runs: &mut Vec<(f64, f64)>) -> Outcome {
    let start = Instant::now();
    let (ledger, truth) = simulate(&exclusive_fee_config()).map_err(|e| e.to_string())?;
    let report = analyze(&ledger, &HeuristicConfig::default()).map_err(|e| e.to_string())?;
    let eval = precision_recall(&report, &ledger, &truth).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if let Some(e) = linkage_stats(&report, &ledger)
        .map_err(|e| e.to_string())?
        .entropy
    {
        entropy_runs.push((e.clustered_entropy_bits, e.naive_entropy_bits));
    }
    let p = [
        eval.h1.precision,
        eval.h2.precision,
        eval.h3.precision,
        eval.h4.precision,
    ];
    let detail = format!(
        "precision h1..h4 {p:?}, {} h3 / {} h4 clusters, {elapsed:.2?}",
        report.counts.h3_clusters, report.counts.h4_clusters
    );
    let exact = p.iter().all(|x| *x == Some(1.0));
    if exact && report.counts.h4_clusters > 0 && elapsed < SOUNDNESS_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn recall(entropy_runs: &mut Vec<(f64, f64)>) -> Outcome {
    let profile = BehaviorProfile {
        p_withdraw_to_registrant: 0.5,
        p_self_test_payment: 0.0,
        p_partial_withdraw: 0.0,
        ..BehaviorProfile::default()
    };
    let config = SimConfig {
        num_entities: 400,
        num_payments: RECALL_PAYMENTS,
        asset_mix: 0.0,
        seed: 77,
        ..SimConfig::uniform(profile)
    };
    let (ledger, truth) = simulate(&config).map_err(|e| e.to_string())?;
    let report = analyze(&ledger, &HeuristicConfig::default()).map_err(|e| e.to_string())?;
    let eval = precision_recall(&report, &ledger, &truth).map_err(|e| e.to_string())?;
    if let Some(e) = linkage_stats(&report, &ledger)
        .map_err(|e| e.to_string())?
        .entropy
    {
        entropy_runs.push((e.clustered_entropy_bits, e.naive_entropy_bits));
    }
    let native = ledger
        .sends()
        .iter()
        .filter(|s| s.asset == Asset::Native)
        .count();
    let n = ledger.withdrawn_stealth_addresses().count();
    let observed = eval.h1.coverage.unwrap_or(0.0);
    let band = RECALL_SIGMAS * (RECALL_TARGET * (1.0 - RECALL_TARGET) / n as f64).sqrt();
    let detail = format!(
        "H1 attributes {observed:.4} of {n} withdrawn native payments; allowed {RECALL_TARGET} ± {band:.4}"
    );
    if native >= 2000 && native == ledger.sends().len() && (observed - RECALL_TARGET).abs() <= band
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn entropy(entropy_runs: &[(f64, f64)]) -> Outcome {
    let cases: [(&[usize], f64); 3] = [(&[1; 8], 3.0), (&[4], 0.0), (&[2, 1, 1], 1.5)];
    for (weights, want) in cases {
        let e = entropy_from_weights(weights).map_err(|e| e.to_string())?;
        if (e.clustered_entropy_bits - want).abs() > ENTROPY_EPS {
            return Err(format!(
                "{weights:?}: {} bits, expected {want}",
                e.clustered_entropy_bits
            ));
        }
    }
    if let Some((c, n)) = entropy_runs.iter().find(|(c, n)| c > n) {
        return Err(format!("clustered {c} > naive {n}"));
    }
    let config = SimConfig {
        num_entities: 40,
        num_payments: 400,
        seed: 5,
        ..SimConfig::uniform(collector_profile())
    };
    let (ledger, _) = simulate(&config).map_err(|e| e.to_string())?;
    let payments: Vec<ChainAddress> = ledger.sends().iter().map(|s| s.stealth_address).collect();
    let e =
        recipient_entropy(&h3_collector_pattern(&ledger), &payments).map_err(|e| e.to_string())?;
    let detail = format!(
        "examples exact; {} runs clustered <= naive; collectors under H3 {:.3} -> {:.3} bits",
        entropy_runs.len(),
        e.naive_entropy_bits,
        e.clustered_entropy_bits
    );
    if e.clustered_entropy_bits < e.naive_entropy_bits {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn send(st: u64, asset: Asset, block: u64) -> SendTx {
    SendTx {
        tx_id: format!("0xs{st}"),
        sender: a(9000 + st),
        stealth_address: a(st),
        announcement: EncodedAnnouncement {
            ephemeral_key: "1".into(),
            stealth_key: "2".into(),
        },
        asset,
        amount: 100,
        block,
        log_index: 0,
        timestamp: block * 12,
    }
}

fn withdraw(st: u64, fee: u128, asset: Asset, via_relayer: bool, block: u64) -> WithdrawTx {
    WithdrawTx {
        tx_id: format!("0xw{st}"),
        stealth_address: a(st),
        recipient: a(5000 + st),
        asset,
        amount: 90,
        gas_paid: 10,
        max_priority_fee_per_gas: fee,
        via_relayer,
        block,
        log_index: 1,
        timestamp: block * 12,
    }
}

fn h4_threshold() -> Outcome {
    let mut sends = Vec::new();
    let mut wds = Vec::new();
    let mut next = 1u64;
    let mut groups: Vec<(u128, BTreeSet<ChainAddress>)> = Vec::new();
    for k in 2..=6u64 {
        let fee = 1000 + k as u128;
        let mut members = BTreeSet::new();
        for _ in 0..k {
            sends.push(send(next, Asset::Native, next));
            wds.push(withdraw(next, fee, Asset::Native, false, next + 1));
            members.insert(a(next));
            next += 1;
        }
        groups.push((fee, members));
    }
    // relayed token withdrawals sharing fee 1002 with the k = 2 group
    let mut relayed = Vec::new();
    for _ in 0..2 {
        sends.push(send(next, Asset::Token("DAI".into()), next));
        wds.push(withdraw(
            next,
            1002,
            Asset::Token("DAI".into()),
            true,
            next + 1,
        ));
        relayed.push(a(next));
        next += 1;
    }
    let ledger = Ledger::new(ChainId::Mainnet, Vec::new(), sends, wds);
    let report = analyze(&ledger, &HeuristicConfig::default()).map_err(|e| e.to_string())?;
    let clusters: BTreeSet<BTreeSet<ChainAddress>> = report
        .h4
        .partition()
        .into_iter()
        .filter(|c| c.len() > 1)
        .collect();
    let expected: BTreeSet<BTreeSet<ChainAddress>> = groups
        .iter()
        .filter(|(_, m)| m.len() <= 5)
        .map(|(_, m)| m.clone())
        .collect();
    let relayed_clustered = relayed
        .iter()
        .any(|r| clusters.iter().any(|c| c.contains(r)));
    let detail = format!(
        "{} clusters for fee counts 2..=6 (expected 4), relayed tokens clustered: {relayed_clustered}",
        clusters.len()
    );
    if clusters == expected && !relayed_clustered {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle() -> Outcome {
    let mut records = 0;
    for seed in 0..ORACLE_LEDGERS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ledger = random_ledger(&mut rng, ORACLE_MAX_RECORDS);
        records += ledger.len();
        for threshold in [1, 5] {
            let bad = mismatches(&ledger, threshold);
            if !bad.is_empty() {
                return Err(format!("seed {seed}, threshold {threshold}: {bad:?}"));
            }
        }
    }
    Ok(format!(
        "{ORACLE_LEDGERS} ledgers ({records} records) match the reference"
    ))
}

fn play(
    strategy: &str,
    recipient_profile: BehaviorProfile,
    seed: u64,
) -> Result<GameResult, String> {
    let strategy = strategy_by_name(strategy).map_err(|e| e.to_string())?;
    let config = GameConfig {
        trials: GAME_TRIALS,
        seed,
        recipient_profile,
        ..GameConfig::default()
    };
    run_ru_game(strategy.as_ref(), &config).map_err(|e| e.to_string())
}

fn ru_game() -> Outcome {
    let start = Instant::now();
    let random = play("random", collector_profile(), 10)?;
    let announcement = play("announcement", collector_profile(), 11)?;
    let collector = play("h3", collector_profile(), 12)?;
    let careful = play("h3", countermeasure_profile(), 13)?;
    let elapsed = start.elapsed();
    // the challenge bit itself should be fair
    let b_skew = (random.b_ones as f64 / GAME_TRIALS as f64 - 0.5).abs();
    let detail = format!(
        "random adv {:.4}, announcement adv {:.4}, h3 vs collector success {:.4}, h3 vs countermeasure adv {:.4}, b skew {b_skew:.4}, {elapsed:.2?}",
        random.advantage, announcement.advantage, collector.success_rate, careful.advantage
    );
    let ok = random.advantage <= GAME_MAX_ADVANTAGE
        && announcement.advantage <= GAME_MAX_ADVANTAGE
        && collector.success_rate >= GAME_MIN_COLLECTOR_SUCCESS
        && careful.advantage <= GAME_MAX_ADVANTAGE
        && b_skew <= GAME_MAX_ADVANTAGE
        && elapsed < GAME_BUDGET;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pipeline(out: &Path) -> Result<(), String> {
    let o = out.to_str().unwrap();
    let ledger = out.join("ledger.ndjson");
    let truth = out.join("ground_truth.json");
    let code = stealth_audit::cli::run([
        "stealth-audit",
        "--seed",
        "99",
        "--out",
        o,
        "simulate",
        "--payments",
        "1000",
    ]);
    if code != 0 {
        return Err(format!("simulate exited {code}"));
    }
    let args = [
        "stealth-audit",
        "--out",
        o,
        "analyze",
        "--ledger",
        ledger.to_str().unwrap(),
        "--ground-truth",
        truth.to_str().unwrap(),
    ];
    match stealth_audit::cli::run(args) {
        0 => Ok(()),
        code => Err(format!("analyze exited {code}")),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));
    pipeline(&first)?;
    pipeline(&second)?;
    let mut names: Vec<_> = fs::read_dir(&first)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(second.join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        if x != y {
            return Err(format!("{name:?} differs"));
        }
    }
    Ok(format!("{} artifacts byte-identical", names.len()))
}

fn main() -> ExitCode {
    let mut entropy_runs = Vec::new();
    let results: Vec<(&str, Outcome)> = vec![
        ("crypto correctness", crypto()),
        ("toy group example", toy_example()),
        ("published linkage percentages", published_percentages()),
        ("heuristic soundness", soundness(&mut entropy_runs)),
        ("h1 recall calibration", recall(&mut entropy_runs)),
        ("entropy properties", entropy(&entropy_runs)),
        ("h4 threshold semantics", h4_threshold()),
        ("oracle equivalence", oracle()),
        ("ru game", ru_game()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
