//! Paginated client for Etherscan-compatible explorer APIs.
//!
//! Responses use the `{status, message, result}` envelope. Pages are fetched
//! with `page`/`offset` query parameters until a short page comes back.
//! Requests are paced to `rate_limit_rps`; transport failures are retried
//! with exponential backoff, and rate-limit replies wait and resume the same
//! page.
//!
//! The HTTP layer sits behind [`Transport`] and time behind [`Pacer`], so
//! recorded sessions replay deterministically without a network or a clock.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_record_line, Asset, Record, WithdrawTx};
use crate::address::ChainAddress;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("network error: {0}")]
    Network(String),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExplorerError {
    #[error("page {page} for {address}: request failed after {attempts} attempts: {last}")]
    Exhausted {
        address: ChainAddress,
        page: u32,
        attempts: u32,
        last: TransportError,
    },
    #[error("page {page} for {address}: malformed response: {reason}")]
    Malformed {
        address: ChainAddress,
        page: u32,
        reason: String,
    },
    #[error("page {page} for {address}: explorer error {message:?}: {detail}")]
    Api {
        address: ChainAddress,
        page: u32,
        message: String,
        detail: String,
    },
    #[error("page {page} for {address}: still rate limited after {waits} waits")]
    RateLimited {
        address: ChainAddress,
        page: u32,
        waits: u32,
    },
    #[error("cannot read recorded session: {0}")]
    Recording(String),
}

pub trait Transport {
    fn get(&mut self, endpoint: &str, query: &[(String, String)])
        -> Result<String, TransportError>;
}

/// Time source and sleeper.
pub trait Pacer {
    fn now(&self) -> Duration;
    fn sleep(&mut self, duration: Duration);
}

pub struct SystemPacer {
    origin: Instant,
}

impl Default for SystemPacer {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Pacer for SystemPacer {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&mut self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Virtual clock that only advances when slept on. Records every sleep.
#[derive(Debug, Default)]
pub struct VirtualPacer {
    now: Duration,
    pub sleeps: Vec<Duration>,
}

impl Pacer for VirtualPacer {
    fn now(&self) -> Duration {
        self.now
    }

    fn sleep(&mut self, duration: Duration) {
        self.now += duration;
        self.sleeps.push(duration);
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(
        &mut self,
        endpoint: &str,
        query: &[(String, String)],
    ) -> Result<String, TransportError> {
        let url = reqwest::Url::parse_with_params(endpoint, query)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let resp = self
            .client
            .get(url)
            .header("Accept", "application/json")
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status(status.as_u16()));
        }
        resp.text()
            .map_err(|e| TransportError::Network(e.to_string()))
    }
}

/// One recorded exchange. `body` may be a JSON value or a raw string (so that
/// corrupt bodies can be recorded); `status` other than 200 replays as an
/// HTTP failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedResponse {
    #[serde(default = "ok_status")]
    pub status: u16,
    #[serde(default)]
    pub body: Value,
}

fn ok_status() -> u16 {
    200
}

/// Replays recorded responses in order and keeps the queries it was sent.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    responses: VecDeque<RecordedResponse>,
    pub requests: Vec<Vec<(String, String)>>,
}

impl ReplayTransport {
    pub fn new(responses: impl IntoIterator<Item = RecordedResponse>) -> Self {
        Self {
            responses: responses.into_iter().collect(),
            requests: Vec::new(),
        }
    }

    /// Reads a session file with one [`RecordedResponse`] per line.
    pub fn from_file(path: &Path) -> Result<Self, ExplorerError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExplorerError::Recording(format!("{}: {e}", path.display())))?;
        let mut responses = Vec::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let r: RecordedResponse = serde_json::from_str(line)
                .map_err(|e| ExplorerError::Recording(format!("line {}: {e}", i + 1)))?;
            responses.push(r);
        }
        Ok(Self::new(responses))
    }
}

impl Transport for ReplayTransport {
    fn get(
        &mut self,
        _endpoint: &str,
        query: &[(String, String)],
    ) -> Result<String, TransportError> {
        self.requests.push(query.to_vec());
        let Some(resp) = self.responses.pop_front() else {
            return Err(TransportError::Network("recorded session exhausted".into()));
        };
        if resp.status != 200 {
            return Err(TransportError::Status(resp.status));
        }
        Ok(match resp.body {
            Value::String(raw) => raw,
            other => other.to_string(),
        })
    }
}

/// How result rows map onto ledger records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFormat {
    /// Rows are already ledger records (a pre-decoded export service).
    #[default]
    Records,
    /// Rows are `txlist` transactions of a stealth address; outgoing ones
    /// become native withdrawals.
    StealthTxList,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerConfig {
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub rate_limit_rps: f64,
    pub page_size: u32,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_rate_limit_waits: u32,
    pub module: String,
    pub action: String,
    pub row_format: RowFormat,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.etherscan.io/api".into(),
            api_key: None,
            rate_limit_rps: 5.0,
            page_size: 1000,
            max_retries: 4,
            backoff_ms: 500,
            max_rate_limit_waits: 20,
            module: "account".into(),
            action: "txlist".into(),
            row_format: RowFormat::Records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchRequest {
    pub addresses: Vec<ChainAddress>,
    pub from_block: u64,
    pub to_block: u64,
}

#[derive(Debug, Deserialize)]
struct Envelope {
    status: String,
    message: String,
    result: Value,
}

enum PageOutcome {
    Rows(Vec<Value>),
    RateLimited,
}

pub struct ExplorerClient<T, P> {
    config: ExplorerConfig,
    transport: T,
    pacer: P,
    last_request: Option<Duration>,
}

impl<T: Transport, P: Pacer> ExplorerClient<T, P> {
    pub fn new(config: ExplorerConfig, transport: T, pacer: P) -> Self {
        Self {
            config,
            transport,
            pacer,
            last_request: None,
        }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn pacer(&self) -> &P {
        &self.pacer
    }

    /// Fetches every page for every requested address, in order.
    pub fn fetch(&mut self, request: &FetchRequest) -> Result<Vec<Record>, ExplorerError> {
        let mut out = Vec::new();
        for address in &request.addresses {
            let mut page = 1u32;
            loop {
                let rows = self.fetch_page(address, request, page)?;
                let n = rows.len();
                for row in rows {
                    if let Some(rec) = self.normalize(address, page, row)? {
                        out.push(rec);
                    }
                }
                if n < self.config.page_size as usize {
                    break;
                }
                page += 1;
            }
        }
        Ok(out)
    }

    fn query(
        &self,
        address: &ChainAddress,
        request: &FetchRequest,
        page: u32,
    ) -> Vec<(String, String)> {
        let mut q = vec![
            ("module".to_string(), self.config.module.clone()),
            ("action".to_string(), self.config.action.clone()),
            ("address".to_string(), address.to_string()),
            ("startblock".to_string(), request.from_block.to_string()),
            ("endblock".to_string(), request.to_block.to_string()),
            ("page".to_string(), page.to_string()),
            ("offset".to_string(), self.config.page_size.to_string()),
            ("sort".to_string(), "asc".to_string()),
        ];
        if let Some(key) = &self.config.api_key {
            q.push(("apikey".to_string(), key.clone()));
        }
        q
    }

    fn pace(&mut self) {
        if self.config.rate_limit_rps > 0.0 {
            let interval = Duration::from_secs_f64(1.0 / self.config.rate_limit_rps);
            if let Some(last) = self.last_request {
                let due = last + interval;
                let now = self.pacer.now();
                if due > now {
                    self.pacer.sleep(due - now);
                }
            }
        }
        self.last_request = Some(self.pacer.now());
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << attempt.min(16)))
    }

    fn fetch_page(
        &mut self,
        address: &ChainAddress,
        request: &FetchRequest,
        page: u32,
    ) -> Result<Vec<Value>, ExplorerError> {
        let query = self.query(address, request, page);
        let mut failures = 0u32;
        let mut waits = 0u32;
        loop {
            self.pace();
            match self.transport.get(&self.config.endpoint, &query) {
                Err(last) => {
                    failures += 1;
                    if failures > self.config.max_retries {
                        return Err(ExplorerError::Exhausted {
                            address: *address,
                            page,
                            attempts: failures,
                            last,
                        });
                    }
                    let delay = self.backoff(failures - 1);
                    self.pacer.sleep(delay);
                }
                Ok(body) => match parse_envelope(address, page, &body)? {
                    PageOutcome::Rows(rows) => return Ok(rows),
                    PageOutcome::RateLimited => {
                        waits += 1;
                        if waits > self.config.max_rate_limit_waits {
                            return Err(ExplorerError::RateLimited {
                                address: *address,
                                page,
                                waits: waits - 1,
                            });
                        }
                        let delay = self.backoff(0).max(Duration::from_secs(1));
                        self.pacer.sleep(delay);
                    }
                },
            }
        }
    }

    fn normalize(
        &self,
        address: &ChainAddress,
        page: u32,
        row: Value,
    ) -> Result<Option<Record>, ExplorerError> {
        let malformed = |reason: String| ExplorerError::Malformed {
            address: *address,
            page,
            reason,
        };
        match self.config.row_format {
            RowFormat::Records => {
                parse_record_line(&row.to_string()).map_err(|kind| malformed(format!("{kind:?}")))
            }
            RowFormat::StealthTxList => txlist_row_to_withdrawal(address, &row)
                .map(|w| w.map(Record::Withdraw))
                .map_err(malformed),
        }
    }
}

fn parse_envelope(
    address: &ChainAddress,
    page: u32,
    body: &str,
) -> Result<PageOutcome, ExplorerError> {
    let env: Envelope = serde_json::from_str(body).map_err(|e| ExplorerError::Malformed {
        address: *address,
        page,
        reason: e.to_string(),
    })?;
    match (env.status.as_str(), env.result) {
        ("1", Value::Array(rows)) => Ok(PageOutcome::Rows(rows)),
        ("1", other) => Err(ExplorerError::Malformed {
            address: *address,
            page,
            reason: format!("status 1 with non-array result {other}"),
        }),
        ("0", Value::Array(rows)) if rows.is_empty() => Ok(PageOutcome::Rows(rows)),
        ("0", result) => {
            let detail = match &result {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            if detail.to_ascii_lowercase().contains("rate limit") {
                Ok(PageOutcome::RateLimited)
            } else {
                Err(ExplorerError::Api {
                    address: *address,
                    page,
                    message: env.message,
                    detail,
                })
            }
        }
        (status, _) => Err(ExplorerError::Malformed {
            address: *address,
            page,
            reason: format!("unexpected status {status:?}"),
        }),
    }
}

fn field<'a>(row: &'a Value, name: &str) -> Result<&'a str, String> {
    row.get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field `{name}`"))
}

fn int_field(row: &Value, name: &str) -> Result<u128, String> {
    field(row, name)?
        .parse()
        .map_err(|e| format!("field `{name}`: {e}"))
}

/// Outgoing, successful transactions of the queried stealth address become
/// native withdrawals. Incoming ones are ignored.
fn txlist_row_to_withdrawal(
    stealth: &ChainAddress,
    row: &Value,
) -> Result<Option<WithdrawTx>, String> {
    let from: ChainAddress = field(row, "from")?
        .parse()
        .map_err(|e| format!("`from`: {e}"))?;
    if from != *stealth {
        return Ok(None);
    }
    if row.get("isError").and_then(Value::as_str) == Some("1") {
        return Ok(None);
    }
    let to: ChainAddress = field(row, "to")?
        .parse()
        .map_err(|e| format!("`to`: {e}"))?;
    let gas_used = int_field(row, "gasUsed")?;
    let gas_price = int_field(row, "gasPrice")?;
    Ok(Some(WithdrawTx {
        tx_id: field(row, "hash")?.to_string(),
        stealth_address: *stealth,
        recipient: to,
        asset: Asset::Native,
        amount: int_field(row, "value")?,
        gas_paid: gas_used * gas_price,
        max_priority_fee_per_gas: int_field(row, "maxPriorityFeePerGas")?,
        via_relayer: false,
        block: int_field(row, "blockNumber")? as u64,
        log_index: int_field(row, "transactionIndex").unwrap_or(0) as u32,
        timestamp: int_field(row, "timeStamp")? as u64,
    }))
}
