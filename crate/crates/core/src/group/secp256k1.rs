use k256::elliptic_curve::group::prime::PrimeCurveAffine;
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::PrimeField;
use k256::{AffinePoint, EncodedPoint, ProjectivePoint, Scalar, U256};
use rand::RngCore;
use sha3::{Digest, Keccak256};

use super::{GroupDescriptor, GroupError, PrimeOrderGroup};
use crate::address::ChainAddress;

/// The secp256k1 curve group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Secp256k1;

const ORDER_HEX: &str = "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

impl PrimeOrderGroup for Secp256k1 {
    type Scalar = Scalar;
    type Element = ProjectivePoint;

    const NAME: &'static str = "secp256k1";

    fn descriptor() -> GroupDescriptor {
        GroupDescriptor {
            name: Self::NAME,
            order: hex::decode(ORDER_HEX).expect("constant"),
            generator: Self::encode(&ProjectivePoint::GENERATOR),
        }
    }

    fn generator() -> ProjectivePoint {
        ProjectivePoint::GENERATOR
    }

    fn identity() -> ProjectivePoint {
        ProjectivePoint::IDENTITY
    }

    fn add(a: &ProjectivePoint, b: &ProjectivePoint) -> ProjectivePoint {
        a + b
    }

    fn scalar_mul(k: &Scalar, point: &ProjectivePoint) -> ProjectivePoint {
        point * k
    }

    fn mul_base(k: &Scalar) -> ProjectivePoint {
        ProjectivePoint::GENERATOR * k
    }

    fn scalar_add(a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_neg(a: &Scalar) -> Scalar {
        -a
    }

    fn scalar_from_u64(value: u64) -> Scalar {
        Scalar::from(value)
    }

    fn scalar_is_zero(k: &Scalar) -> bool {
        bool::from(k.is_zero())
    }

    fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Scalar {
        // Rejection sampling on 32-byte strings below the order.
        loop {
            let mut bytes = [0u8; 32];
            rng.fill_bytes(&mut bytes);
            if let Some(k) = Option::<Scalar>::from(Scalar::from_repr(bytes.into())) {
                return k;
            }
        }
    }

    fn encode(element: &ProjectivePoint) -> Vec<u8> {
        element
            .to_affine()
            .to_encoded_point(true)
            .as_bytes()
            .to_vec()
    }

    fn decode(bytes: &[u8]) -> Result<ProjectivePoint, GroupError> {
        let err = |reason: String| GroupError::Decode {
            group: Self::NAME,
            reason,
        };
        let encoded = EncodedPoint::from_bytes(bytes).map_err(|e| err(e.to_string()))?;
        Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&encoded))
            .map(ProjectivePoint::from)
            .ok_or_else(|| err("point is not on the curve".to_string()))
    }

    fn hash_to_scalar(element: &ProjectivePoint) -> Scalar {
        let digest = Keccak256::digest(Self::encode(element));
        <Scalar as Reduce<U256>>::reduce_bytes(&digest)
    }

    fn derive_address(element: &ProjectivePoint) -> ChainAddress {
        let affine = element.to_affine();
        let digest = if bool::from(affine.is_identity()) {
            Keccak256::digest([0u8])
        } else {
            let uncompressed = affine.to_encoded_point(false);
            Keccak256::digest(&uncompressed.as_bytes()[1..])
        };
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..]);
        ChainAddress::from_bytes(out)
    }
}
