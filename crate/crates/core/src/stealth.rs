//! Dual-key stealth addresses: payment generation, the linear announcement
//! scan, and recovery of the one-time spending key.
//!
//! A recipient publishes `(pk_view, pk_spend) = (v·G, s·G)`. A sender picks an
//! ephemeral `r`, publishes `R = r·G` and pays to the address of
//!
//! ```text
//! pk_stealth = H(r·pk_view)·G + pk_spend
//! ```
//!
//! The recipient recognizes the payment by recomputing `H(v·R)·G + pk_spend`
//! and spends with `sk_stealth = H(v·R) + s`, since `v·R = r·pk_view`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::address::ChainAddress;
use crate::group::{keygen, GroupError, PrimeOrderGroup};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StealthError {
    #[error("ephemeral scalar must be nonzero")]
    ZeroEphemeral,
    #[error("stealth secret keys must be nonzero")]
    ZeroSecret,
}

/// A recipient's public meta-address, as stored in the key registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StealthMetaAddress<G: PrimeOrderGroup> {
    pub pk_view: G::Element,
    pub pk_spend: G::Element,
}

/// Viewing and spending secrets with their public points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StealthMetaKeyPair<G: PrimeOrderGroup> {
    viewing: G::Scalar,
    spending: G::Scalar,
    public: StealthMetaAddress<G>,
}

impl<G: PrimeOrderGroup> StealthMetaKeyPair<G> {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let (viewing, pk_view) = keygen::<G, R>(rng);
        let (spending, pk_spend) = keygen::<G, R>(rng);
        Self {
            viewing,
            spending,
            public: StealthMetaAddress { pk_view, pk_spend },
        }
    }

    pub fn from_secrets(viewing: G::Scalar, spending: G::Scalar) -> Result<Self, StealthError> {
        if G::scalar_is_zero(&viewing) || G::scalar_is_zero(&spending) {
            return Err(StealthError::ZeroSecret);
        }
        Ok(Self {
            viewing,
            spending,
            public: StealthMetaAddress {
                pk_view: G::mul_base(&viewing),
                pk_spend: G::mul_base(&spending),
            },
        })
    }

    pub fn viewing_secret(&self) -> &G::Scalar {
        &self.viewing
    }

    pub fn spending_secret(&self) -> &G::Scalar {
        &self.spending
    }

    pub fn public(&self) -> &StealthMetaAddress<G> {
        &self.public
    }

    /// Indices of announcements addressed to this key pair.
    pub fn scan(&self, announcements: &[Announcement<G>]) -> Vec<usize> {
        scan_announcements::<G>(&self.viewing, &self.public.pk_spend, announcements)
    }

    pub fn stealth_secret(&self, ephemeral: &G::Element) -> G::Scalar {
        derive_stealth_secret::<G>(&self.viewing, &self.spending, ephemeral)
    }
}

/// The `(R, pk_stealth)` pair published with every stealth payment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Announcement<G: PrimeOrderGroup> {
    pub ephemeral: G::Element,
    pub pk_stealth: G::Element,
}

impl<G: PrimeOrderGroup> Announcement<G> {
    pub fn encode(&self) -> EncodedAnnouncement {
        EncodedAnnouncement {
            ephemeral_key: G::encode_text(&self.ephemeral),
            stealth_key: G::encode_text(&self.pk_stealth),
        }
    }
}

/// An announcement as it appears in ledger files: text encodings that are
/// only decoded against a concrete group when scanned.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedAnnouncement {
    pub ephemeral_key: String,
    pub stealth_key: String,
}

impl EncodedAnnouncement {
    pub fn decode<G: PrimeOrderGroup>(&self) -> Result<Announcement<G>, GroupError> {
        Ok(Announcement {
            ephemeral: G::decode_text(&self.ephemeral_key)?,
            pk_stealth: G::decode_text(&self.stealth_key)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StealthPayment<G: PrimeOrderGroup> {
    pub announcement: Announcement<G>,
    pub stealth_address: ChainAddress,
}

impl<G: PrimeOrderGroup> StealthPayment<G> {
    pub fn ephemeral(&self) -> &G::Element {
        &self.announcement.ephemeral
    }

    pub fn pk_stealth(&self) -> &G::Element {
        &self.announcement.pk_stealth
    }
}

/// Derives a fresh stealth payment for `recipient` from the ephemeral secret.
pub fn generate_stealth_payment<G: PrimeOrderGroup>(
    recipient: &StealthMetaAddress<G>,
    ephemeral_secret: &G::Scalar,
) -> Result<StealthPayment<G>, StealthError> {
    if G::scalar_is_zero(ephemeral_secret) {
        return Err(StealthError::ZeroEphemeral);
    }
    let ephemeral = G::mul_base(ephemeral_secret);
    let shared = G::hash_to_scalar(&G::scalar_mul(ephemeral_secret, &recipient.pk_view));
    let pk_stealth = G::add(&G::mul_base(&shared), &recipient.pk_spend);
    Ok(StealthPayment {
        announcement: Announcement {
            ephemeral,
            pk_stealth,
        },
        stealth_address: G::derive_address(&pk_stealth),
    })
}

fn is_addressed_to<G: PrimeOrderGroup>(
    viewing: &G::Scalar,
    pk_spend: &G::Element,
    announcement: &Announcement<G>,
) -> bool {
    let shared = G::hash_to_scalar(&G::scalar_mul(viewing, &announcement.ephemeral));
    G::add(&G::mul_base(&shared), pk_spend) == announcement.pk_stealth
}

/// Linear scan over announcements. Returns matching indices in input order.
pub fn scan_announcements<G: PrimeOrderGroup>(
    viewing: &G::Scalar,
    pk_spend: &G::Element,
    announcements: &[Announcement<G>],
) -> Vec<usize> {
    announcements
        .par_iter()
        .enumerate()
        .filter(|(_, a)| is_addressed_to::<G>(viewing, pk_spend, a))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub detected: Vec<usize>,
    /// Announcements that failed to decode; skipped, not fatal.
    pub malformed: Vec<(usize, GroupError)>,
}

/// Scan over text-encoded announcements, as read from a ledger.
pub fn scan_encoded<G: PrimeOrderGroup>(
    viewing: &G::Scalar,
    pk_spend: &G::Element,
    announcements: &[EncodedAnnouncement],
) -> ScanReport {
    let outcomes: Vec<Result<bool, GroupError>> = announcements
        .par_iter()
        .map(|a| {
            a.decode::<G>()
                .map(|a| is_addressed_to::<G>(viewing, pk_spend, &a))
        })
        .collect();
    let mut report = ScanReport::default();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(true) => report.detected.push(i),
            Ok(false) => {}
            Err(e) => report.malformed.push((i, e)),
        }
    }
    report
}

/// One-time secret for a detected payment: `H(v·R) + s`.
pub fn derive_stealth_secret<G: PrimeOrderGroup>(
    viewing: &G::Scalar,
    spending: &G::Scalar,
    ephemeral: &G::Element,
) -> G::Scalar {
    let shared = G::hash_to_scalar(&G::scalar_mul(viewing, ephemeral));
    G::scalar_add(&shared, spending)
}
