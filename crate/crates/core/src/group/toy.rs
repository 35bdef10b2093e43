use rand::RngCore;

use super::{GroupDescriptor, GroupError, PrimeOrderGroup};
use crate::address::ChainAddress;

pub const TOY_ORDER: u64 = 101;

/// Integers modulo 101 under addition, generated by 1.
///
/// Not a cryptographic group: discrete logs are trivial. It exists so that
/// every step of the scheme can be verified with pencil and paper.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Toy101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ToyScalar(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ToyElement(u64);

impl ToyScalar {
    pub fn new(value: u64) -> Self {
        Self(value % TOY_ORDER)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

impl ToyElement {
    pub fn new(value: u64) -> Self {
        Self(value % TOY_ORDER)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

impl PrimeOrderGroup for Toy101 {
    type Scalar = ToyScalar;
    type Element = ToyElement;

    const NAME: &'static str = "toy101";

    fn descriptor() -> GroupDescriptor {
        GroupDescriptor {
            name: Self::NAME,
            order: vec![TOY_ORDER as u8],
            generator: vec![1],
        }
    }

    fn generator() -> ToyElement {
        ToyElement(1)
    }

    fn identity() -> ToyElement {
        ToyElement(0)
    }

    fn add(a: &ToyElement, b: &ToyElement) -> ToyElement {
        ToyElement::new(a.0 + b.0)
    }

    fn scalar_mul(k: &ToyScalar, point: &ToyElement) -> ToyElement {
        ToyElement::new(k.0 * point.0)
    }

    fn scalar_add(a: &ToyScalar, b: &ToyScalar) -> ToyScalar {
        ToyScalar::new(a.0 + b.0)
    }

    fn scalar_neg(a: &ToyScalar) -> ToyScalar {
        ToyScalar::new(TOY_ORDER - a.0)
    }

    fn scalar_from_u64(value: u64) -> ToyScalar {
        ToyScalar::new(value)
    }

    fn scalar_is_zero(k: &ToyScalar) -> bool {
        k.0 == 0
    }

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> ToyScalar {
        // Rejection sampling keeps the draw uniform.
        let zone = u64::MAX - u64::MAX % TOY_ORDER;
        loop {
            let x = rng.next_u64();
            if x < zone {
                return ToyScalar(x % TOY_ORDER);
            }
        }
    }

    fn encode(element: &ToyElement) -> Vec<u8> {
        vec![element.0 as u8]
    }

    fn decode(bytes: &[u8]) -> Result<ToyElement, GroupError> {
        match bytes {
            [b] if u64::from(*b) < TOY_ORDER => Ok(ToyElement(u64::from(*b))),
            _ => Err(GroupError::Decode {
                group: Self::NAME,
                reason: format!("expected one byte below {TOY_ORDER}, got {bytes:?}"),
            }),
        }
    }

    fn encode_text(element: &ToyElement) -> String {
        element.0.to_string()
    }

    fn decode_text(text: &str) -> Result<ToyElement, GroupError> {
        let value: u64 = text.trim().parse().map_err(|e| GroupError::Decode {
            group: Self::NAME,
            reason: format!("{text:?}: {e}"),
        })?;
        if value >= TOY_ORDER {
            return Err(GroupError::Decode {
                group: Self::NAME,
                reason: format!("{value} is not reduced mod {TOY_ORDER}"),
            });
        }
        Ok(ToyElement(value))
    }

    fn hash_to_scalar(element: &ToyElement) -> ToyScalar {
        ToyScalar(element.0)
    }

    fn derive_address(element: &ToyElement) -> ChainAddress {
        ChainAddress::from_u64(element.0)
    }
}
