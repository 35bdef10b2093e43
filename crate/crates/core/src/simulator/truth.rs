use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::address::ChainAddress;
use crate::group::GroupKind;
use crate::ledger::Asset;

/// Where a payment's withdrawal went, from the recipient's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Registrant,
    /// Sender and recipient are the same entity; funds go back to the wallet
    /// they came from.
    SelfTest,
    Collector,
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTruth {
    pub id: usize,
    pub group: String,
    pub registrant: ChainAddress,
    /// Address the entity pays from.
    pub wallet: ChainAddress,
    pub collectors: Vec<ChainAddress>,
    /// Fixed priority fee for manual and idiosyncratic fee habits.
    pub fee: Option<u128>,
    pub window_start: u64,
    pub window_days: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentTruth {
    pub tx_id: String,
    pub stealth_address: ChainAddress,
    pub sender: usize,
    pub recipient: usize,
    pub asset: Asset,
    pub destination: Destination,
    pub destination_address: ChainAddress,
    pub partial: bool,
    pub withdraw_tx_ids: Vec<String>,
}

/// Labels for a simulated ledger. Never shown to an adversary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub group: GroupKind,
    pub entities: Vec<EntityTruth>,
    pub payments: Vec<PaymentTruth>,
    /// Owning entity of every stealth, registrant, wallet and recipient
    /// address.
    pub owners: BTreeMap<ChainAddress, usize>,
}

impl GroundTruth {
    pub fn owner(&self, address: &ChainAddress) -> Option<usize> {
        self.owners.get(address).copied()
    }

    pub fn payment_by_stealth(&self) -> BTreeMap<ChainAddress, &PaymentTruth> {
        self.payments
            .iter()
            .map(|p| (p.stealth_address, p))
            .collect()
    }
}
