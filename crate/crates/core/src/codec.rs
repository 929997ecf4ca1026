//! Canonical octet encodings and the hash, KDF and MAC primitives.
//!
//! Every concatenation fed to a hash is built from self-delimiting pieces:
//! fixed-width big-endian elements, 2-octet length-prefixed strings and
//! single-octet numeric tags.

use std::fmt;
use std::sync::Arc;

use hmac::{Hmac, Mac};
use num_bigint::BigUint;
use sha2::{Digest as _, Sha256};

use crate::error::{DecodeError, Error, Result};
use crate::group::{GroupElement, GroupParams};

/// Output width of [`hash`].
pub const DIGEST_LEN: usize = 32;

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Digest)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Flips one bit; handy for tamper tests.
    pub fn with_bit_flipped(mut self, bit: usize) -> Self {
        self.0[bit / 8 % DIGEST_LEN] ^= 1 << (bit % 8);
        self
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Domain-separation tags for [`kdf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdfTag {
    SessionKey,
    ConfirmationKey,
}

impl KdfTag {
    pub fn as_bytes(self) -> &'static [u8] {
        match self {
            KdfTag::SessionKey => b"SK",
            KdfTag::ConfirmationKey => b"KC",
        }
    }
}

/// Fixed-width big-endian encoding, `element_width` octets.
pub fn encode_element(x: &GroupElement) -> Vec<u8> {
    let width = x.params().element_width();
    let raw = x.value().to_bytes_be();
    let mut out = vec![0u8; width];
    // to_bytes_be yields [0] for zero, which still fits
    out[width - raw.len()..].copy_from_slice(&raw);
    out
}

pub fn decode_element(bytes: &[u8], params: &Arc<GroupParams>) -> Result<GroupElement> {
    let expected = params.element_width();
    if bytes.len() != expected {
        return Err(DecodeError::ElementWidth {
            expected,
            got: bytes.len(),
        }
        .into());
    }
    GroupElement::new(params, BigUint::from_bytes_be(bytes))
}

/// 2-octet big-endian length prefix followed by the UTF-8 octets.
pub fn encode_identity(id: &str) -> Result<Vec<u8>> {
    if id.is_empty() {
        return Err(Error::EmptyIdentity);
    }
    encode_label(id)
}

/// Length-prefixed string; used for identities and literal labels such as
/// `KC_1_U`.
pub fn encode_label(s: &str) -> Result<Vec<u8>> {
    let len = u16::try_from(s.len()).map_err(|_| Error::IdentityTooLong)?;
    let mut out = Vec::with_capacity(2 + s.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(out)
}

/// Reads one length-prefixed string from the front of `input`, returning it
/// with the remaining octets.
pub fn decode_label(input: &[u8]) -> std::result::Result<(&str, &[u8]), DecodeError> {
    if input.len() < 2 {
        return Err(DecodeError::Truncated);
    }
    let len = usize::from(u16::from_be_bytes([input[0], input[1]]));
    let rest = &input[2..];
    if rest.len() < len {
        return Err(DecodeError::Truncated);
    }
    let s = std::str::from_utf8(&rest[..len]).map_err(|_| DecodeError::InvalidUtf8)?;
    Ok((s, &rest[len..]))
}

pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Hash of the concatenation of `parts`.
pub fn hash_parts<I, P>(parts: I) -> Digest
where
    I: IntoIterator<Item = P>,
    P: AsRef<[u8]>,
{
    let mut h = Sha256::new();
    for part in parts {
        h.update(part.as_ref());
    }
    Digest(h.finalize().into())
}

/// `hash(tag || data)`.
pub fn kdf(data: &[u8], tag: KdfTag) -> Digest {
    hash_parts([tag.as_bytes(), data])
}

/// HMAC-SHA256.
pub fn mac(key: &Digest, data: &[u8]) -> Digest {
    let mut m = Hmac::<Sha256>::new_from_slice(key.as_bytes()).expect("HMAC accepts any key length");
    m.update(data);
    Digest(m.finalize().into_bytes().into())
}
