//! Transaction data model for registrations, stealth sends and withdrawals,
//! with the lookups the heuristics need.
//!
//! Ledgers are stored as newline-delimited JSON, one [`Record`] per line,
//! discriminated by a `kind` field. Loading never aborts on a bad line: the
//! line is skipped and reported as a [`Diagnostic`].

pub mod explorer;
mod record;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use self::record::{Asset, ChainId, Record, RegistrationTx, SendTx, WithdrawTx};
use crate::address::ChainAddress;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("cannot read ledger {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("ledger stream failed at line {line}: {source}")]
    Stream { line: usize, source: io::Error },
    #[error("cannot write ledger: {0}")]
    Write(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiagnosticKind {
    Malformed {
        message: String,
    },
    UnknownKind {
        kind: String,
    },
    /// A withdrawal from an address no send in the ledger paid into.
    UnknownStealthAddress {
        stealth_address: ChainAddress,
    },
    /// More left a stealth address than ever arrived.
    Overdrawn {
        stealth_address: ChainAddress,
        #[serde(with = "record::decimal")]
        received: u128,
        #[serde(with = "record::decimal")]
        withdrawn: u128,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number for parse problems; absent for ledger-level checks.
    pub line: Option<usize>,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct LedgerIndex {
    sends_by_stealth: BTreeMap<ChainAddress, Vec<usize>>,
    withdrawals_by_stealth: BTreeMap<ChainAddress, Vec<usize>>,
    withdrawals_by_recipient: BTreeMap<ChainAddress, Vec<usize>>,
    latest_registration: BTreeMap<ChainAddress, usize>,
}

/// One chain's stealth-payment activity, ordered by `(block, log_index)`.
///
/// Immutable once built; the three lists and their indexes always agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    chain: ChainId,
    registrations: Vec<RegistrationTx>,
    sends: Vec<SendTx>,
    withdrawals: Vec<WithdrawTx>,
    index: LedgerIndex,
}

impl Ledger {
    pub fn new(
        chain: ChainId,
        mut registrations: Vec<RegistrationTx>,
        mut sends: Vec<SendTx>,
        mut withdrawals: Vec<WithdrawTx>,
    ) -> Self {
        registrations.sort_by_key(|r| (r.block, r.log_index));
        sends.sort_by_key(|s| (s.block, s.log_index));
        withdrawals.sort_by_key(|w| (w.block, w.log_index));

        let mut index = LedgerIndex::default();
        for (i, r) in registrations.iter().enumerate() {
            index.latest_registration.insert(r.registrant, i);
        }
        for (i, s) in sends.iter().enumerate() {
            index
                .sends_by_stealth
                .entry(s.stealth_address)
                .or_default()
                .push(i);
        }
        for (i, w) in withdrawals.iter().enumerate() {
            index
                .withdrawals_by_stealth
                .entry(w.stealth_address)
                .or_default()
                .push(i);
            index
                .withdrawals_by_recipient
                .entry(w.recipient)
                .or_default()
                .push(i);
        }
        Self {
            chain,
            registrations,
            sends,
            withdrawals,
            index,
        }
    }

    pub fn empty(chain: ChainId) -> Self {
        Self::new(chain, Vec::new(), Vec::new(), Vec::new())
    }

    pub fn from_records(chain: ChainId, records: impl IntoIterator<Item = Record>) -> Self {
        let (mut regs, mut sends, mut wds) = (Vec::new(), Vec::new(), Vec::new());
        for rec in records {
            match rec {
                Record::Registration(r) => regs.push(r),
                Record::Send(s) => sends.push(s),
                Record::Withdraw(w) => wds.push(w),
            }
        }
        Self::new(chain, regs, sends, wds)
    }

    pub fn chain(&self) -> &ChainId {
        &self.chain
    }

    pub fn registrations(&self) -> &[RegistrationTx] {
        &self.registrations
    }

    pub fn sends(&self) -> &[SendTx] {
        &self.sends
    }

    pub fn withdrawals(&self) -> &[WithdrawTx] {
        &self.withdrawals
    }

    pub fn is_empty(&self) -> bool {
        self.registrations.is_empty() && self.sends.is_empty() && self.withdrawals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.registrations.len() + self.sends.len() + self.withdrawals.len()
    }

    pub fn sends_to(&self, stealth: &ChainAddress) -> impl Iterator<Item = &SendTx> {
        self.index
            .sends_by_stealth
            .get(stealth)
            .into_iter()
            .flatten()
            .map(|&i| &self.sends[i])
    }

    pub fn withdrawals_from(&self, stealth: &ChainAddress) -> impl Iterator<Item = &WithdrawTx> {
        self.index
            .withdrawals_by_stealth
            .get(stealth)
            .into_iter()
            .flatten()
            .map(|&i| &self.withdrawals[i])
    }

    pub fn withdrawals_to(&self, recipient: &ChainAddress) -> impl Iterator<Item = &WithdrawTx> {
        self.index
            .withdrawals_by_recipient
            .get(recipient)
            .into_iter()
            .flatten()
            .map(|&i| &self.withdrawals[i])
    }

    /// Current registration of `registrant`; later registrations overwrite
    /// earlier ones.
    pub fn registration_of(&self, registrant: &ChainAddress) -> Option<&RegistrationTx> {
        self.index
            .latest_registration
            .get(registrant)
            .map(|&i| &self.registrations[i])
    }

    pub fn is_registrant(&self, address: &ChainAddress) -> bool {
        self.index.latest_registration.contains_key(address)
    }

    pub fn registrants(&self) -> impl Iterator<Item = &ChainAddress> {
        self.index.latest_registration.keys()
    }

    /// Stealth addresses that received at least one payment, in address order.
    pub fn stealth_addresses(&self) -> impl Iterator<Item = &ChainAddress> {
        self.index.sends_by_stealth.keys()
    }

    /// Stealth addresses with at least one withdrawal.
    pub fn withdrawn_stealth_addresses(&self) -> impl Iterator<Item = &ChainAddress> {
        self.index.withdrawals_by_stealth.keys()
    }

    pub fn received_native(&self, stealth: &ChainAddress) -> u128 {
        self.sends_to(stealth)
            .filter(|s| s.asset.is_native())
            .map(|s| s.amount)
            .sum()
    }

    /// Stealth addresses emptied by exactly one withdrawal.
    ///
    /// A single token withdrawal always qualifies because the contract only
    /// releases the full token balance. A single native withdrawal qualifies
    /// when amount plus gas equals everything the address received.
    pub fn full_withdraw_set(&self) -> BTreeSet<ChainAddress> {
        self.index
            .withdrawals_by_stealth
            .iter()
            .filter_map(|(stealth, idx)| {
                let [only] = idx.as_slice() else {
                    return None;
                };
                let w = &self.withdrawals[*only];
                let full = match w.asset {
                    Asset::Token(_) => true,
                    Asset::Native => self.received_native(stealth) == w.outflow(),
                };
                full.then_some(*stealth)
            })
            .collect()
    }

    /// Consistency warnings: withdrawals from unknown stealth addresses and
    /// per-asset overdrafts.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (stealth, idx) in &self.index.withdrawals_by_stealth {
            if !self.index.sends_by_stealth.contains_key(stealth) {
                out.push(Diagnostic {
                    line: None,
                    kind: DiagnosticKind::UnknownStealthAddress {
                        stealth_address: *stealth,
                    },
                });
                continue;
            }
            let mut per_asset: BTreeMap<&Asset, (u128, u128)> = BTreeMap::new();
            for s in self.sends_to(stealth) {
                per_asset.entry(&s.asset).or_default().0 += s.amount;
            }
            for &i in idx {
                let w = &self.withdrawals[i];
                per_asset.entry(&w.asset).or_default().1 += w.outflow();
            }
            for (received, withdrawn) in per_asset.into_values() {
                if withdrawn > received {
                    out.push(Diagnostic {
                        line: None,
                        kind: DiagnosticKind::Overdrawn {
                            stealth_address: *stealth,
                            received,
                            withdrawn,
                        },
                    });
                }
            }
        }
        out
    }

    /// All records merged into file order.
    pub fn records(&self) -> Vec<Record> {
        let mut merged: Vec<Record> = self
            .registrations
            .iter()
            .cloned()
            .map(Record::Registration)
            .chain(self.sends.iter().cloned().map(Record::Send))
            .chain(self.withdrawals.iter().cloned().map(Record::Withdraw))
            .collect();
        // Stable sort keeps same-kind ties in list order.
        merged.sort_by_key(|r| (r.position(), r.kind_rank()));
        merged
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<(), LedgerError> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// SHA-256 of the serialized ledger, used to tie reports to their input.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.chain.to_string().as_bytes());
        hasher.update(b"\n");
        hasher.update(self.to_ndjson().as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedLedger {
    pub ledger: Ledger,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses one NDJSON line. `Ok(None)` for blank lines.
pub fn parse_record_line(line: &str) -> Result<Option<Record>, DiagnosticKind> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let value: serde_json::Value =
        serde_json::from_str(trimmed).map_err(|e| DiagnosticKind::Malformed {
            message: e.to_string(),
        })?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("registration" | "send" | "withdraw") => {}
        Some(other) => {
            return Err(DiagnosticKind::UnknownKind {
                kind: other.to_string(),
            })
        }
        None => {
            return Err(DiagnosticKind::Malformed {
                message: "missing string field `kind`".to_string(),
            })
        }
    }
    serde_json::from_value(value)
        .map(Some)
        .map_err(|e| DiagnosticKind::Malformed {
            message: e.to_string(),
        })
}

/// Reads an NDJSON record stream into an indexed ledger.
///
/// Bad lines and consistency problems end up in
/// [`LoadedLedger::diagnostics`]; only I/O failure is an error.
pub fn load_ledger<R: BufRead>(source: R, chain: ChainId) -> Result<LoadedLedger, LedgerError> {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|source| LedgerError::Stream {
            line: i + 1,
            source,
        })?;
        match parse_record_line(&line) {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => {}
            Err(kind) => diagnostics.push(Diagnostic {
                line: Some(i + 1),
                kind,
            }),
        }
    }
    let ledger = Ledger::from_records(chain, records);
    diagnostics.extend(ledger.validate());
    Ok(LoadedLedger {
        ledger,
        diagnostics,
    })
}

pub fn load_ledger_file(path: &Path, chain: ChainId) -> Result<LoadedLedger, LedgerError> {
    let file = File::open(path).map_err(|source| LedgerError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    load_ledger(BufReader::new(file), chain)
}
