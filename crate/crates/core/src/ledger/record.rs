use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::address::ChainAddress;
use crate::stealth::EncodedAnnouncement;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ChainId {
    #[default]
    Mainnet,
    Polygon,
    Arbitrum,
    Optimism,
    Custom(String),
}

impl FromStr for ChainId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "mainnet" | "ethereum" => Self::Mainnet,
            "polygon" => Self::Polygon,
            "arbitrum" => Self::Arbitrum,
            "optimism" => Self::Optimism,
            _ => Self::Custom(s.to_string()),
        })
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mainnet => "mainnet",
            Self::Polygon => "polygon",
            Self::Arbitrum => "arbitrum",
            Self::Optimism => "optimism",
            Self::Custom(name) => name,
        })
    }
}

impl Serialize for ChainId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChainId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap_or_else(|never| match never {}))
    }
}

/// `"native"` or `{"token": "<symbol>"}` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Asset {
    Native,
    Token(String),
}

impl Asset {
    pub fn is_native(&self) -> bool {
        matches!(self, Asset::Native)
    }
}

/// Integer amounts travel as decimal strings so they survive JSON tooling
/// that truncates large numbers.
pub(crate) mod decimal {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u128, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u128, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse()
            .map_err(|e| de::Error::custom(format!("bad decimal amount {s:?}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationTx {
    pub registrant: ChainAddress,
    pub pk_view: String,
    pub pk_spend: String,
    pub block: u64,
    #[serde(default)]
    pub log_index: u32,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SendTx {
    pub tx_id: String,
    pub sender: ChainAddress,
    pub stealth_address: ChainAddress,
    #[serde(flatten)]
    pub announcement: EncodedAnnouncement,
    pub asset: Asset,
    #[serde(with = "decimal")]
    pub amount: u128,
    pub block: u64,
    #[serde(default)]
    pub log_index: u32,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawTx {
    pub tx_id: String,
    pub stealth_address: ChainAddress,
    pub recipient: ChainAddress,
    pub asset: Asset,
    #[serde(with = "decimal")]
    pub amount: u128,
    /// Native currency burned by the withdrawal itself; zero for relayed
    /// token withdrawals.
    #[serde(with = "decimal", default)]
    pub gas_paid: u128,
    #[serde(with = "decimal")]
    pub max_priority_fee_per_gas: u128,
    pub via_relayer: bool,
    pub block: u64,
    #[serde(default)]
    pub log_index: u32,
    pub timestamp: u64,
}

impl WithdrawTx {
    /// Total value leaving the stealth address.
    pub fn outflow(&self) -> u128 {
        self.amount + self.gas_paid
    }
}

/// One line of a ledger file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Registration(RegistrationTx),
    Send(SendTx),
    Withdraw(WithdrawTx),
}

impl Record {
    pub fn position(&self) -> (u64, u32) {
        match self {
            Record::Registration(r) => (r.block, r.log_index),
            Record::Send(s) => (s.block, s.log_index),
            Record::Withdraw(w) => (w.block, w.log_index),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Registration(_) => "registration",
            Record::Send(_) => "send",
            Record::Withdraw(_) => "withdraw",
        }
    }

    pub(crate) fn kind_rank(&self) -> u8 {
        match self {
            Record::Registration(_) => 0,
            Record::Send(_) => 1,
            Record::Withdraw(_) => 2,
        }
    }
}
