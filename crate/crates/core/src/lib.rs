//! SPEKE protocol variants, a deterministic network simulator and the
//! attacks that separate them.
//!
//! ```
//! use rand::SeedableRng;
//! use speke_lab::{group::GroupParams, protocol::Variant, simnet};
//!
//! let cfg = simnet::ExchangeConfig::new(Variant::PSpeke2017, GroupParams::toy23(), b"correct horse");
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
//! let run = simnet::run_honest_exchange(&cfg, &mut rng).unwrap();
//! assert_eq!(run.key_a(), run.key_b());
//! ```

pub mod attacks;
#[cfg(feature = "cli")]
pub mod cli;
pub mod codec;
pub mod error;
pub mod group;
pub mod protocol;
pub mod simnet;

pub use error::{DecodeError, Error, Result};
