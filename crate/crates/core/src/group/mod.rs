//! Prime-order group abstraction underneath the stealth address scheme.
//!
//! Two instantiations are provided:
//!
//! * [`Secp256k1`], the curve Ethereum accounts live on. Element hashing uses
//!   Keccak-256 over the compressed SEC1 encoding, reduced modulo the group
//!   order, and addresses are the last 20 bytes of Keccak-256 over the
//!   uncompressed point (the usual Ethereum account derivation).
//! * [`Toy101`], the integers modulo 101 under addition with generator 1.
//!   Hashing is the identity on the canonical integer and an element's
//!   address is that integer, so every computation can be checked by hand.
//!
//! Both are selected at runtime through [`GroupKind`] and the
//! [`dispatch_group!`](crate::dispatch_group) macro.

mod secp256k1;
mod toy;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use self::secp256k1::Secp256k1;
pub use self::toy::{Toy101, ToyElement, ToyScalar, TOY_ORDER};
use crate::address::ChainAddress;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid {group} element encoding: {reason}")]
    Decode { group: &'static str, reason: String },
}

/// Static description of a group instantiation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupDescriptor {
    pub name: &'static str,
    /// Group order, big-endian.
    pub order: Vec<u8>,
    /// Canonical encoding of the generator.
    pub generator: Vec<u8>,
}

/// A cyclic group of prime order `p`, written additively.
///
/// All methods are associated functions: implementors are zero-sized markers.
pub trait PrimeOrderGroup: Send + Sync + 'static {
    type Scalar: Copy + Eq + fmt::Debug + Send + Sync;
    type Element: Copy + Eq + fmt::Debug + Send + Sync;

    const NAME: &'static str;

    fn descriptor() -> GroupDescriptor;
    fn generator() -> Self::Element;
    fn identity() -> Self::Element;
    fn add(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn scalar_mul(k: &Self::Scalar, point: &Self::Element) -> Self::Element;

    fn mul_base(k: &Self::Scalar) -> Self::Element {
        Self::scalar_mul(k, &Self::generator())
    }

    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_neg(a: &Self::Scalar) -> Self::Scalar;
    fn scalar_from_u64(value: u64) -> Self::Scalar;
    fn scalar_is_zero(k: &Self::Scalar) -> bool;

    /// Uniform scalar in `[0, p)`; may be zero.
    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Self::Scalar;

    /// Canonical byte encoding; equal elements have equal encodings.
    fn encode(element: &Self::Element) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Result<Self::Element, GroupError>;

    /// Text form used in ledger files.
    fn encode_text(element: &Self::Element) -> String {
        hex::encode(Self::encode(element))
    }

    fn decode_text(text: &str) -> Result<Self::Element, GroupError> {
        let digits = text.strip_prefix("0x").unwrap_or(text);
        let bytes = hex::decode(digits).map_err(|e| GroupError::Decode {
            group: Self::NAME,
            reason: e.to_string(),
        })?;
        Self::decode(&bytes)
    }

    fn hash_to_scalar(element: &Self::Element) -> Self::Scalar;
    fn derive_address(element: &Self::Element) -> ChainAddress;
}

pub fn scalar_mul<G: PrimeOrderGroup>(k: &G::Scalar, point: &G::Element) -> G::Element {
    G::scalar_mul(k, point)
}

pub fn hash_to_scalar<G: PrimeOrderGroup>(point: &G::Element) -> G::Scalar {
    G::hash_to_scalar(point)
}

pub fn derive_address<G: PrimeOrderGroup>(pk: &G::Element) -> ChainAddress {
    G::derive_address(pk)
}

/// Samples a nonzero secret scalar and its public key `sk·G`.
pub fn keygen<G: PrimeOrderGroup, R: RngCore + ?Sized>(rng: &mut R) -> (G::Scalar, G::Element) {
    let sk = random_nonzero_scalar::<G, R>(rng);
    (sk, G::mul_base(&sk))
}

pub fn random_nonzero_scalar<G: PrimeOrderGroup, R: RngCore + ?Sized>(rng: &mut R) -> G::Scalar {
    loop {
        let k = G::random_scalar(rng);
        if !G::scalar_is_zero(&k) {
            return k;
        }
    }
}

/// Runtime group selector, matching the `group` configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GroupKind {
    #[default]
    #[serde(rename = "production")]
    Production,
    #[serde(rename = "toy101")]
    Toy101,
}

impl FromStr for GroupKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "production" => Ok(Self::Production),
            "toy101" => Ok(Self::Toy101),
            other => Err(format!(
                "unknown group {other:?} (expected \"production\" or \"toy101\")"
            )),
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Production => "production",
            Self::Toy101 => "toy101",
        })
    }
}

/// Runs `$body` with `$g` bound as a type alias to the group selected by
/// `$kind`.
///
/// ```
/// use stealth_audit::dispatch_group;
/// use stealth_audit::group::{GroupKind, PrimeOrderGroup};
///
/// let name = dispatch_group!(GroupKind::Toy101, G => G::NAME);
/// assert_eq!(name, "toy101");
/// ```
#[macro_export]
macro_rules! dispatch_group {
    ($kind:expr, $g:ident => $body:expr) => {
        match $kind {
            $crate::group::GroupKind::Production => {
                #[allow(dead_code)]
                type $g = $crate::group::Secp256k1;
                $body
            }
            $crate::group::GroupKind::Toy101 => {
                #[allow(dead_code)]
                type $g = $crate::group::Toy101;
                $body
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn order_times_generator_is_identity<G: PrimeOrderGroup>() {
        // p ≡ 0, so (p - 1)·G + G must vanish.
        let minus_one = G::scalar_neg(&G::scalar_from_u64(1));
        let almost = G::mul_base(&minus_one);
        assert_eq!(G::add(&almost, &G::generator()), G::identity());
    }

    #[test]
    fn group_order_annihilates_generator() {
        order_times_generator_is_identity::<Toy101>();
        order_times_generator_is_identity::<Secp256k1>();
    }

    fn keygen_properties<G: PrimeOrderGroup>() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let (sk, pk) = keygen::<G, _>(&mut rng);
            assert!(!G::scalar_is_zero(&sk));
            assert_eq!(pk, G::mul_base(&sk));
        }
        let a = keygen::<G, _>(&mut ChaCha8Rng::seed_from_u64(9));
        let b = keygen::<G, _>(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn keygen_is_nonzero_consistent_and_reproducible() {
        keygen_properties::<Toy101>();
        keygen_properties::<Secp256k1>();
    }

    #[test]
    fn annihilation_and_identity_scalar() {
        fn check<G: PrimeOrderGroup>() {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let (_, p) = keygen::<G, _>(&mut rng);
            assert_eq!(G::scalar_mul(&G::scalar_from_u64(0), &p), G::identity());
            assert_eq!(G::mul_base(&G::scalar_from_u64(1)), G::generator());
        }
        check::<Toy101>();
        check::<Secp256k1>();
    }

    #[test]
    fn group_kind_parses() {
        assert_eq!("toy101".parse::<GroupKind>(), Ok(GroupKind::Toy101));
        assert_eq!("production".parse::<GroupKind>(), Ok(GroupKind::Production));
        assert!("p256".parse::<GroupKind>().is_err());
        let cfg: std::collections::BTreeMap<String, GroupKind> =
            toml::from_str("group = \"toy101\"").unwrap();
        assert_eq!(cfg["group"], GroupKind::Toy101);
    }
}
