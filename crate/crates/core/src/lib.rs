//! Dual-key stealth address toolkit: the scheme itself, a labelled ledger
//! simulator, on-chain linking heuristics, anonymity metrics and the
//! recipient-unlinkability game.
//!
//! ```
//! use rand::SeedableRng;
//! use stealth_audit::group::Secp256k1;
//! use stealth_audit::stealth::{generate_stealth_payment, StealthMetaKeyPair};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let bob = StealthMetaKeyPair::<Secp256k1>::generate(&mut rng);
//! let r = stealth_audit::group::random_nonzero_scalar::<Secp256k1, _>(&mut rng);
//! let payment = generate_stealth_payment(bob.public(), &r).unwrap();
//! assert_eq!(bob.scan(&[payment.announcement]), vec![0]);
//! ```

pub mod address;
pub mod cli;
pub mod game;
pub mod group;
pub mod heuristics;
pub mod ledger;
pub mod metrics;
pub mod simulator;
pub mod stealth;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stealth-addresses.md")]
    mod stealth_addresses {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/heuristics.md")]
    mod heuristics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
