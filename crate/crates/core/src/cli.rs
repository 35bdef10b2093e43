//! The `stealth-audit` command line.
//!
//! Settings come from built-in defaults, then the `--config` TOML file, then
//! flags. Every JSON artifact embeds a [`Manifest`]; nothing written depends
//! on the wall clock, so reruns reproduce files byte for byte.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::address::ChainAddress;
use crate::game::{run_ru_game, strategy_by_name, GameConfig};
use crate::group::GroupKind;
use crate::heuristics::{analyze, HeuristicConfig};
use crate::ledger::explorer::{
    ExplorerClient, ExplorerConfig, FetchRequest, HttpTransport, ReplayTransport, SystemPacer,
    VirtualPacer,
};
use crate::ledger::{load_ledger_file, ChainId, Diagnostic, Ledger};
use crate::metrics::{
    activity_heatmap, cumulative_usage, linkage_stats, precision_recall, usage_csv,
    withdrawer_distribution,
};
use crate::simulator::{
    collector_profile, countermeasure_profile, simulate, BehaviorProfile, GroundTruth, SimConfig,
};

/// Environment variable holding the explorer API key.
pub const API_KEY_ENV: &str = "STEALTH_AUDIT_API_KEY";

#[derive(Debug, Parser)]
#[command(
    name = "stealth-audit",
    version,
    about = "Stealth address privacy toolkit"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub chain: Option<ChainId>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic ledger.
    Simulate(SimulateArgs),
    /// Normalize explorer data into a ledger file.
    Ingest(IngestArgs),
    /// Run the heuristics and metrics over a ledger.
    Analyze(AnalyzeArgs),
    /// Play the recipient-unlinkability game.
    Game(GameArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub entities: Option<usize>,
    #[arg(long)]
    pub payments: Option<usize>,
    #[arg(long)]
    pub group: Option<GroupKind>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["endpoint", "replay", "export"])))]
pub struct IngestArgs {
    /// Explorer API endpoint; the key is read from STEALTH_AUDIT_API_KEY.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Recorded explorer responses (NDJSON of `{status, body}`).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// A previously exported NDJSON ledger.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Address to query; repeatable.
    #[arg(long = "address")]
    pub addresses: Vec<ChainAddress>,
    #[arg(long)]
    pub from_block: Option<u64>,
    #[arg(long)]
    pub to_block: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub ledger: PathBuf,
    /// Ground truth written by `simulate`; enables precision and recall.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub fee_threshold: Option<u32>,
    /// Write an activity heatmap for this address; repeatable.
    #[arg(long)]
    pub heatmap: Vec<ChainAddress>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileName {
    Collector,
    Countermeasure,
    Default,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long, default_value = "h3")]
    pub strategy: String,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Behavior of the target recipients.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileName>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub addresses: Vec<ChainAddress>,
    pub from_block: u64,
    pub to_block: Option<u64>,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub chain: Option<ChainId>,
    pub out: Option<PathBuf>,
    pub simulate: SimConfig,
    pub heuristics: HeuristicConfig,
    pub explorer: ExplorerConfig,
    pub ingest: IngestSettings,
    pub game: GameConfig,
}

/// Provenance stamped into every JSON artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the effective configuration of the command, as JSON.
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Manifest {
    fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>) -> Self {
        let json = serde_json::to_vec(config).expect("config serializes");
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: hex::encode(Sha256::digest(json)),
            seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub manifest: Manifest,
    pub config: SimConfig,
    pub truth: GroundTruth,
}

/// A problem with how the tool was invoked; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct UsageError {
    pub message: String,
}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError {
        message: message.into(),
    }
    .into()
}

struct RunContext {
    config: RunConfig,
    seed: Option<u64>,
    chain: ChainId,
    out: PathBuf,
}

fn resolve(cli: &Cli) -> Result<RunContext> {
    let config: RunConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| usage("missing --out <dir> (or `out` in the config file)"))?;
    Ok(RunContext {
        seed: cli.seed.or(config.seed),
        chain: cli
            .chain
            .clone()
            .or_else(|| config.chain.clone())
            .unwrap_or_default(),
        out,
        config,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let ctx = resolve(cli)?;
    fs::create_dir_all(&ctx.out).with_context(|| format!("cannot create {}", ctx.out.display()))?;
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(&ctx, args),
        Command::Ingest(args) => cmd_ingest(&ctx, args),
        Command::Analyze(args) => cmd_analyze(&ctx, args),
        Command::Game(args) => cmd_game(&ctx, args),
    }
}

fn cmd_simulate(ctx: &RunContext, args: &SimulateArgs) -> Result<()> {
    let mut config = ctx.config.simulate.clone();
    if let Some(n) = args.entities {
        config.num_entities = n;
    }
    if let Some(n) = args.payments {
        config.num_payments = n;
    }
    if let Some(g) = args.group {
        config.group = g;
    }
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.chain = ctx.chain.clone();
    let (ledger, truth) = simulate(&config)?;

    write_text(&ctx.out.join("ledger.ndjson"), &ledger.to_ndjson())?;
    let file = GroundTruthFile {
        manifest: Manifest::new("simulate", &config, Some(config.seed)),
        config,
        truth,
    };
    write_json(&ctx.out.join("ground_truth.json"), &file)?;
    eprintln!(
        "simulated {} registrations, {} sends, {} withdrawals into {}",
        ledger.registrations().len(),
        ledger.sends().len(),
        ledger.withdrawals().len(),
        ctx.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    manifest: Manifest,
    source: &'a str,
    chain: &'a ChainId,
    records: usize,
    registrations: usize,
    sends: usize,
    withdrawals: usize,
    warnings: usize,
    diagnostics: &'a [Diagnostic],
}

fn cmd_ingest(ctx: &RunContext, args: &IngestArgs) -> Result<()> {
    let settings = &ctx.config.ingest;
    let request = FetchRequest {
        addresses: if args.addresses.is_empty() {
            settings.addresses.clone()
        } else {
            args.addresses.clone()
        },
        from_block: args.from_block.unwrap_or(settings.from_block),
        to_block: args
            .to_block
            .or(settings.to_block)
            .unwrap_or(u64::from(u32::MAX)),
    };
    let mut explorer = ctx.config.explorer.clone();
    let needs_addresses = || {
        if request.addresses.is_empty() {
            Err(usage("explorer ingestion needs at least one --address"))
        } else {
            Ok(())
        }
    };

    let (source, ledger, mut diagnostics) = if let Some(path) = &args.export {
        let loaded = load_ledger_file(path, ctx.chain.clone())?;
        ("export", loaded.ledger, loaded.diagnostics)
    } else if let Some(path) = &args.replay {
        needs_addresses()?;
        let transport = ReplayTransport::from_file(path)?;
        let mut client = ExplorerClient::new(explorer.clone(), transport, VirtualPacer::default());
        let records = client.fetch(&request)?;
        (
            "replay",
            Ledger::from_records(ctx.chain.clone(), records),
            Vec::new(),
        )
    } else {
        needs_addresses()?;
        explorer.endpoint = args.endpoint.clone().expect("clap enforces one source");
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            explorer.api_key = Some(key);
        }
        let transport = HttpTransport::new(Duration::from_secs(30))
            .map_err(|e| anyhow!("cannot start HTTP client: {e}"))?;
        let mut client = ExplorerClient::new(explorer.clone(), transport, SystemPacer::default());
        let records = client.fetch(&request)?;
        (
            "endpoint",
            Ledger::from_records(ctx.chain.clone(), records),
            Vec::new(),
        )
    };
    diagnostics.extend(ledger.validate());

    write_text(&ctx.out.join("ledger.ndjson"), &ledger.to_ndjson())?;
    #[derive(Serialize)]
    struct Effective<'a> {
        source: &'a str,
        chain: &'a ChainId,
        explorer: &'a ExplorerConfig,
        addresses: &'a [ChainAddress],
        from_block: u64,
        to_block: u64,
    }
    let effective = Effective {
        source,
        chain: &ctx.chain,
        explorer: &explorer,
        addresses: &request.addresses,
        from_block: request.from_block,
        to_block: request.to_block,
    };
    let summary = IngestSummary {
        manifest: Manifest::new("ingest", &effective, ctx.seed),
        source,
        chain: &ctx.chain,
        records: ledger.len(),
        registrations: ledger.registrations().len(),
        sends: ledger.sends().len(),
        withdrawals: ledger.withdrawals().len(),
        warnings: diagnostics.len(),
        diagnostics: &diagnostics,
    };
    write_json(&ctx.out.join("ingest_summary.json"), &summary)?;
    eprintln!(
        "ingested {} records with {} warnings into {}",
        ledger.len(),
        diagnostics.len(),
        ctx.out.display()
    );
    Ok(())
}

fn cmd_analyze(ctx: &RunContext, args: &AnalyzeArgs) -> Result<()> {
    let mut heuristics = ctx.config.heuristics;
    if let Some(t) = args.fee_threshold {
        heuristics.fee_uniqueness_threshold = t;
    }
    heuristics.validate().map_err(|e| usage(e.to_string()))?;
    let loaded = load_ledger_file(&args.ledger, ctx.chain.clone())?;
    let ledger = loaded.ledger;
    let truth = match &args.ground_truth {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let file: GroundTruthFile = serde_json::from_str(&text)
                .with_context(|| format!("invalid ground truth {}", path.display()))?;
            Some(file)
        }
        None => None,
    };
    let seed = ctx
        .seed
        .or_else(|| truth.as_ref().and_then(|t| t.manifest.seed));

    let report = analyze(&ledger, &heuristics)?;
    let anonymity = linkage_stats(&report, &ledger)?;
    let evaluation = match &truth {
        Some(t) => Some(precision_recall(&report, &ledger, &t.truth)?),
        None => None,
    };
    let distribution = withdrawer_distribution(&ledger);

    #[derive(Serialize)]
    struct Effective<'a> {
        chain: &'a ChainId,
        heuristics: &'a HeuristicConfig,
        ledger_fingerprint: &'a str,
        ground_truth: Option<&'a str>,
        heatmaps: &'a [ChainAddress],
    }
    let manifest = Manifest::new(
        "analyze",
        &Effective {
            chain: &ctx.chain,
            heuristics: &heuristics,
            ledger_fingerprint: &report.ledger_fingerprint,
            ground_truth: truth.as_ref().map(|t| t.manifest.config_sha256.as_str()),
            heatmaps: &args.heatmap,
        },
        seed,
    );

    write_json(
        &ctx.out.join("report.json"),
        &serde_json::json!({
            "manifest": manifest,
            "ledger_fingerprint": report.ledger_fingerprint,
            "load_warnings": loaded.diagnostics.len(),
            "counts": report.counts,
            "anonymity": anonymity,
            "withdrawer_distribution": distribution,
            "evaluation": evaluation,
        }),
    )?;
    write_json(
        &ctx.out.join("findings.json"),
        &serde_json::json!({
            "manifest": manifest,
            "findings": report.findings,
            "attributions": report.attributions,
        }),
    )?;
    write_json(
        &ctx.out.join("clusters.json"),
        &serde_json::json!({
            "manifest": manifest,
            "h3": report.h3,
            "h4": report.h4,
            "merged": report.clusters,
        }),
    )?;
    write_text(&ctx.out.join("withdrawers.csv"), &distribution.to_csv())?;
    write_text(
        &ctx.out.join("usage.csv"),
        &usage_csv(&cumulative_usage(&ledger)),
    )?;
    for address in &args.heatmap {
        let map = activity_heatmap(&ledger, address, None);
        if let Some(w) = &map.warning {
            eprintln!("warning: {w}");
        }
        write_text(
            &ctx.out.join(format!("heatmap_{address}.csv")),
            &map.to_csv(),
        )?;
    }
    eprintln!(
        "linked {} of {} withdrawn payments ({:.2}%)",
        anonymity.total_linked, anonymity.total_withdrawn, anonymity.pct_linked
    );
    Ok(())
}

fn cmd_game(ctx: &RunContext, args: &GameArgs) -> Result<()> {
    let strategy = strategy_by_name(&args.strategy).map_err(|e| usage(e.to_string()))?;
    let mut config = ctx.config.game.clone();
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.background.chain = ctx.chain.clone();
    if let Some(p) = args.profile {
        config.recipient_profile = match p {
            ProfileName::Collector => collector_profile(),
            ProfileName::Countermeasure => countermeasure_profile(),
            ProfileName::Default => BehaviorProfile::default(),
        };
    }
    let result = run_ru_game(strategy.as_ref(), &config)?;
    #[derive(Serialize)]
    struct Effective<'a> {
        strategy: &'a str,
        game: &'a GameConfig,
    }
    let manifest = Manifest::new(
        "game",
        &Effective {
            strategy: &args.strategy,
            game: &config,
        },
        Some(config.seed),
    );
    write_json(
        &ctx.out.join(format!("game_{}.json", args.strategy)),
        &serde_json::json!({ "manifest": manifest, "config": config, "result": result }),
    )?;
    eprintln!(
        "{}: {} of {} trials won, advantage {:.4} [{:.4}, {:.4}]",
        result.strategy,
        result.successes,
        result.trials,
        result.advantage,
        result.advantage_interval.low,
        result.advantage_interval.high
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trips() {
        let text = r#"
            seed = 9
            chain = "optimism"
            out = "runs/a"

            [simulate]
            num_entities = 5

            [heuristics]
            fee_uniqueness_threshold = 3

            [explorer]
            rate_limit_rps = 2.0

            [ingest]
            addresses = ["0x0000000000000000000000000000000000000001"]

            [game]
            trials = 10
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.chain, Some(ChainId::Optimism));
        assert_eq!(c.simulate.num_entities, 5);
        assert_eq!(c.heuristics.fee_uniqueness_threshold, 3);
        assert_eq!(c.game.trials, 10);
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "seed = 1\nchain = \"polygon\"\n").unwrap();
        let cli = Cli::try_parse_from([
            "stealth-audit",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "2",
            "--out",
            "x",
            "game",
        ])
        .unwrap();
        let ctx = resolve(&cli).unwrap();
        assert_eq!(ctx.seed, Some(2));
        assert_eq!(ctx.chain, ChainId::Polygon);
    }

    #[test]
    fn manifest_hash_tracks_config() {
        let a = Manifest::new("simulate", &SimConfig::default(), Some(0));
        let b = Manifest::new(
            "simulate",
            &SimConfig {
                seed: 1,
                ..SimConfig::default()
            },
            Some(1),
        );
        assert_ne!(a.config_sha256, b.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
        assert_eq!(a, Manifest::new("simulate", &SimConfig::default(), Some(0)));
    }

    #[test]
    fn ingest_requires_one_source() {
        assert!(Cli::try_parse_from(["stealth-audit", "ingest"]).is_err());
        assert!(
            Cli::try_parse_from(["stealth-audit", "ingest", "--replay", "a", "--export", "b"])
                .is_err()
        );
    }
}
