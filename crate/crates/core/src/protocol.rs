//! The SPEKE session state machine, parameterized by protocol variant and
//! key-confirmation method.
//!
//! A session moves `Created -> Sent -> Keyed -> ConfirmSent -> Accepted`,
//! and may drop to `Aborted` from anywhere. Without explicit confirmation the
//! session ends in `Keyed`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;

use crate::codec::{self, Digest, KdfTag};
use crate::error::{Error, Result};
use crate::group::{self, GroupElement, GroupParams, Scalar};

/// Which side opened the session. The initiator speaks first in ordered
/// confirmation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        })
    }
}

/// An entity name with an optional per-session extension, rendered as
/// `"Alice"` or `"Alice (2)"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Identity {
    base: String,
    extension: Option<u32>,
}

impl Identity {
    pub fn new(base: impl Into<String>) -> Self {
        Identity {
            base: base.into(),
            extension: None,
        }
    }

    pub fn with_extension(mut self, n: u32) -> Self {
        self.extension = Some(n);
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn extension(&self) -> Option<u32> {
        self.extension
    }

    pub fn render(&self) -> String {
        match self.extension {
            Some(n) => format!("{} ({n})", self.base),
            None => self.base.clone(),
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for Identity {
    fn from(s: &str) -> Self {
        Identity::new(s)
    }
}

/// The five protocol versions under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Original 1996 protocol: `g = s^2`, `k = H(g^xy)`.
    Jablon96,
    /// IEEE P1363.2 draft: hashed generator, same key derivation.
    IeeeP1363_2,
    /// ISO/IEC 11770-4:2006: as IEEE, identifiers not included in the secret.
    Iso11770_4_2006,
    /// Earlier patch: key bound to sorted identities and sorted elements.
    Patch2014,
    /// Patched SPEKE adopted in ISO/IEC 11770-4:2017: key bound to `sID`.
    PSpeke2017,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Jablon96,
        Variant::IeeeP1363_2,
        Variant::Iso11770_4_2006,
        Variant::Patch2014,
        Variant::PSpeke2017,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Jablon96 => "jablon96",
            Variant::IeeeP1363_2 => "ieee-p1363.2",
            Variant::Iso11770_4_2006 => "iso-11770-4-2006",
            Variant::Patch2014 => "patch-2014",
            Variant::PSpeke2017 => "p-speke-2017",
        }
    }

    pub fn uses_hashed_generator(self) -> bool {
        self != Variant::Jablon96
    }

    pub fn derive_generator(self, password: &[u8], params: &Arc<GroupParams>) -> Result<GroupElement> {
        if self.uses_hashed_generator() {
            group::derive_generator_hashed(password, params)
        } else {
            group::derive_generator_original(password, params)
        }
    }

    /// The confirmation method each specification ships with.
    pub fn preset_confirmation(self) -> ConfirmationMethod {
        match self {
            Variant::Jablon96 => ConfirmationMethod::JablonDoubleHash,
            Variant::IeeeP1363_2 | Variant::Iso11770_4_2006 => ConfirmationMethod::TaggedHash34,
            Variant::Patch2014 => ConfirmationMethod::SymmetricMac,
            Variant::PSpeke2017 => ConfirmationMethod::SymmetricHash,
        }
    }

    /// Session key depends on the identities and the exchanged elements.
    pub fn key_binds_transcript(self) -> bool {
        matches!(self, Variant::Patch2014 | Variant::PSpeke2017)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        let v = match norm.as_str() {
            "jablon96" | "jablon-96" | "jablon" => Variant::Jablon96,
            "ieee-p1363.2" | "ieee-p1363-2" | "ieee" => Variant::IeeeP1363_2,
            "iso-11770-4-2006" | "iso2006" | "iso" => Variant::Iso11770_4_2006,
            "patch-2014" | "patch2014" => Variant::Patch2014,
            "p-speke-2017" | "p-speke" | "pspeke" => Variant::PSpeke2017,
            _ => return Err(format!("unknown variant `{s}`")),
        };
        Ok(v)
    }
}

/// Explicit key-confirmation procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfirmationMethod {
    /// Implicit confirmation only; the session ends once keyed.
    None,
    /// Initiator sends `H(H(k))`, responder answers `H(k)`.
    JablonDoubleHash,
    /// `H(3 || X_i || Y_r || g^xy || g)` then `H(4 || ...)`, initiator first.
    TaggedHash34,
    /// `H(self || peer || own || peer_el || g^xy || g)`, one round.
    SymmetricHash,
    /// `MAC(k_c, "KC_1_U" || self || peer || own || peer_el)`, one round.
    SymmetricMac,
}

impl ConfirmationMethod {
    pub const ALL: [ConfirmationMethod; 5] = [
        ConfirmationMethod::None,
        ConfirmationMethod::JablonDoubleHash,
        ConfirmationMethod::TaggedHash34,
        ConfirmationMethod::SymmetricHash,
        ConfirmationMethod::SymmetricMac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfirmationMethod::None => "none",
            ConfirmationMethod::JablonDoubleHash => "jablon-double-hash",
            ConfirmationMethod::TaggedHash34 => "tagged-hash-3-4",
            ConfirmationMethod::SymmetricHash => "symmetric-hash",
            ConfirmationMethod::SymmetricMac => "symmetric-mac",
        }
    }

    /// The second message depends on the first, so the initiator must go
    /// first.
    pub fn is_ordered(self) -> bool {
        matches!(
            self,
            ConfirmationMethod::JablonDoubleHash | ConfirmationMethod::TaggedHash34
        )
    }

    pub fn is_explicit(self) -> bool {
        self != ConfirmationMethod::None
    }

    /// Tags cover the exchanged elements.
    pub fn binds_elements(self) -> bool {
        matches!(
            self,
            ConfirmationMethod::TaggedHash34
                | ConfirmationMethod::SymmetricHash
                | ConfirmationMethod::SymmetricMac
        )
    }

    /// Tags cover the identities in sender-first order.
    pub fn binds_directed_identities(self) -> bool {
        matches!(
            self,
            ConfirmationMethod::SymmetricHash | ConfirmationMethod::SymmetricMac
        )
    }
}

impl fmt::Display for ConfirmationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfirmationMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        let m = match norm.as_str() {
            "none" => ConfirmationMethod::None,
            "jablon-double-hash" | "double-hash" => ConfirmationMethod::JablonDoubleHash,
            "tagged-hash-3-4" | "tagged-hash" => ConfirmationMethod::TaggedHash34,
            "symmetric-hash" => ConfirmationMethod::SymmetricHash,
            "symmetric-mac" => ConfirmationMethod::SymmetricMac,
            _ => return Err(format!("unknown confirmation method `{s}`")),
        };
        Ok(m)
    }
}

/// Total communication rounds, counting the exchange round.
pub fn round_count(confirm: ConfirmationMethod) -> u32 {
    match confirm {
        ConfirmationMethod::None => 1,
        ConfirmationMethod::JablonDoubleHash | ConfirmationMethod::TaggedHash34 => 3,
        ConfirmationMethod::SymmetricHash | ConfirmationMethod::SymmetricMac => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Exchange,
    Confirm,
}

/// A unit on the wire.
#[derive(Clone, PartialEq, Eq)]
pub enum Message {
    /// `(identity, g^x)`.
    Exchange { sender: String, element: GroupElement },
    /// A confirmation tag.
    Confirm { tag: Digest },
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Exchange { .. } => MessageKind::Exchange,
            Message::Confirm { .. } => MessageKind::Confirm,
        }
    }
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Exchange { sender, element } => write!(f, "Exchange({sender:?}, {element})"),
            Message::Confirm { tag } => write!(f, "Confirm({tag})"),
        }
    }
}

/// Why a session ended in `Aborted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    RangeCheckFailed,
    PeerIdentityMismatch,
    ConfirmationMismatch,
    DuplicateMessage,
    /// The channel ran out of steps or went quiet before completion.
    Timeout,
}

impl AbortReason {
    pub fn name(self) -> &'static str {
        match self {
            AbortReason::RangeCheckFailed => "RangeCheckFailed",
            AbortReason::PeerIdentityMismatch => "PeerIdentityMismatch",
            AbortReason::ConfirmationMismatch => "ConfirmationMismatch",
            AbortReason::DuplicateMessage => "DuplicateMessage",
            AbortReason::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Created,
    Sent,
    Keyed,
    ConfirmSent,
    Accepted,
    Aborted(AbortReason),
}

impl Phase {
    pub fn is_aborted(self) -> bool {
        matches!(self, Phase::Aborted(_))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Created => f.write_str("CREATED"),
            Phase::Sent => f.write_str("SENT"),
            Phase::Keyed => f.write_str("KEYED"),
            Phase::ConfirmSent => f.write_str("CONFIRM_SENT"),
            Phase::Accepted => f.write_str("ACCEPTED"),
            Phase::Aborted(r) => write!(f, "ABORTED({r})"),
        }
    }
}

/// A derived session key and, for P-SPEKE, the `sID` it was bound to.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    bytes: Digest,
    sid: Option<Vec<u8>>,
}

impl SessionKey {
    pub fn bytes(&self) -> &Digest {
        &self.bytes
    }

    pub fn sid(&self) -> Option<&[u8]> {
        self.sid.as_deref()
    }

    /// A hash of the key, safe to log and compare.
    pub fn fingerprint(&self) -> Digest {
        codec::hash(self.bytes.as_bytes())
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey(fp={})", self.fingerprint())
    }
}

fn enc_id(id: &str) -> Vec<u8> {
    // identities are validated when the session starts
    codec::encode_identity(id).expect("validated identity")
}

/// Session key from the shared value and the variant's binding data.
pub fn derive_session_key(
    variant: Variant,
    self_id: &str,
    peer_id: &str,
    own_element: &GroupElement,
    peer_element: &GroupElement,
    shared: &GroupElement,
) -> SessionKey {
    let shared_enc = codec::encode_element(shared);
    match variant {
        Variant::Jablon96 | Variant::IeeeP1363_2 | Variant::Iso11770_4_2006 => SessionKey {
            bytes: codec::kdf(&shared_enc, KdfTag::SessionKey),
            sid: None,
        },
        Variant::Patch2014 => {
            let (a, b) = (enc_id(self_id), enc_id(peer_id));
            let (id_lo, id_hi) = if a <= b { (a, b) } else { (b, a) };
            let m = codec::hash_parts([id_lo, id_hi]);
            let (x, y) = (codec::encode_element(own_element), codec::encode_element(peer_element));
            let (el_lo, el_hi) = if x <= y { (x, y) } else { (y, x) };
            let n = codec::hash_parts([el_lo, el_hi]);
            SessionKey {
                bytes: codec::hash_parts([
                    KdfTag::SessionKey.as_bytes(),
                    m.as_bytes(),
                    n.as_bytes(),
                    &shared_enc,
                ]),
                sid: None,
            }
        }
        Variant::PSpeke2017 => {
            let s_own = codec::hash_parts([enc_id(self_id), codec::encode_element(own_element)]);
            let s_peer = codec::hash_parts([enc_id(peer_id), codec::encode_element(peer_element)]);
            let (hi, lo) = if s_own >= s_peer { (s_own, s_peer) } else { (s_peer, s_own) };
            let mut sid = Vec::with_capacity(2 * codec::DIGEST_LEN);
            sid.extend_from_slice(hi.as_bytes());
            sid.extend_from_slice(lo.as_bytes());
            let mut input = sid.clone();
            input.extend_from_slice(&shared_enc);
            SessionKey {
                bytes: codec::kdf(&input, KdfTag::SessionKey),
                sid: Some(sid),
            }
        }
    }
}

/// Everything a confirmation tag may cover, seen from the tag's sender.
#[derive(Debug, Clone, Copy)]
pub struct TagInputs<'a> {
    pub self_id: &'a str,
    pub peer_id: &'a str,
    pub own_element: &'a GroupElement,
    pub peer_element: &'a GroupElement,
    pub shared: &'a GroupElement,
    pub generator: &'a GroupElement,
    pub key: &'a SessionKey,
}

impl<'a> TagInputs<'a> {
    /// The same transcript from the other side.
    pub fn mirrored(&self) -> TagInputs<'a> {
        TagInputs {
            self_id: self.peer_id,
            peer_id: self.self_id,
            own_element: self.peer_element,
            peer_element: self.own_element,
            ..*self
        }
    }
}

/// The tag a party in `sender_role` emits under `method`.
pub fn confirmation_tag(
    method: ConfirmationMethod,
    sender_role: Role,
    inputs: &TagInputs<'_>,
) -> Result<Digest> {
    let enc = codec::encode_element;
    let tag = match method {
        ConfirmationMethod::None => return Err(Error::ConfirmationDisabled),
        ConfirmationMethod::JablonDoubleHash => {
            let hk = codec::hash(inputs.key.bytes().as_bytes());
            match sender_role {
                Role::Initiator => codec::hash(hk.as_bytes()),
                Role::Responder => hk,
            }
        }
        ConfirmationMethod::TaggedHash34 => {
            let (prefix, x_i, y_r) = match sender_role {
                Role::Initiator => (3u8, inputs.own_element, inputs.peer_element),
                Role::Responder => (4u8, inputs.peer_element, inputs.own_element),
            };
            codec::hash_parts([
                vec![prefix],
                enc(x_i),
                enc(y_r),
                enc(inputs.shared),
                enc(inputs.generator),
            ])
        }
        ConfirmationMethod::SymmetricHash => codec::hash_parts([
            enc_id(inputs.self_id),
            enc_id(inputs.peer_id),
            enc(inputs.own_element),
            enc(inputs.peer_element),
            enc(inputs.shared),
            enc(inputs.generator),
        ]),
        ConfirmationMethod::SymmetricMac => {
            let k_c = codec::kdf(&enc(inputs.shared), KdfTag::ConfirmationKey);
            let mut data = codec::encode_label("KC_1_U")?;
            data.extend(enc_id(inputs.self_id));
            data.extend(enc_id(inputs.peer_id));
            data.extend(enc(inputs.own_element));
            data.extend(enc(inputs.peer_element));
            codec::mac(&k_c, &data)
        }
    };
    Ok(tag)
}

fn ct_eq(a: &Digest, b: &Digest) -> bool {
    a.as_bytes()
        .iter()
        .zip(b.as_bytes())
        .fold(0u8, |acc, (x, y)| acc | (x ^ y))
        == 0
}

/// Static configuration of one party's session.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub role: Role,
    pub self_id: Identity,
    pub peer_id: Identity,
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub params: Arc<GroupParams>,
    /// Abort when a received message repeats one this party already sent.
    /// The check itself needs the party's cross-session history and is done
    /// by the driver (see `simnet`).
    pub duplicate_detection: bool,
}

impl SessionConfig {
    /// Config with the variant's own confirmation method.
    pub fn new(
        role: Role,
        self_id: impl Into<Identity>,
        peer_id: impl Into<Identity>,
        variant: Variant,
        params: Arc<GroupParams>,
    ) -> Self {
        SessionConfig {
            role,
            self_id: self_id.into(),
            peer_id: peer_id.into(),
            variant,
            confirm: variant.preset_confirmation(),
            params,
            duplicate_detection: false,
        }
    }

    pub fn with_confirm(mut self, confirm: ConfirmationMethod) -> Self {
        self.confirm = confirm;
        self
    }

    pub fn with_duplicate_detection(mut self, on: bool) -> Self {
        self.duplicate_detection = on;
        self
    }
}

/// One party's evolving view of a session.
#[derive(Clone)]
pub struct SessionState {
    config: SessionConfig,
    self_rendered: String,
    peer_rendered: String,
    generator: GroupElement,
    ephemeral: Scalar,
    own_element: GroupElement,
    peer_element: Option<GroupElement>,
    shared: Option<GroupElement>,
    key: Option<SessionKey>,
    phase: Phase,
    own_confirm_sent: bool,
    peer_confirmed: bool,
}

/// Starts a session with a freshly sampled ephemeral exponent.
pub fn start_session<R: RngCore + ?Sized>(
    config: SessionConfig,
    password: &[u8],
    rng: &mut R,
) -> Result<(SessionState, Message)> {
    let x = group::sample_scalar(rng, &config.params);
    start_session_with_scalar(config, password, x)
}

/// Starts a session with a caller-chosen ephemeral exponent.
pub fn start_session_with_scalar(
    config: SessionConfig,
    password: &[u8],
    x: Scalar,
) -> Result<(SessionState, Message)> {
    let self_rendered = config.self_id.render();
    let peer_rendered = config.peer_id.render();
    codec::encode_identity(&self_rendered)?;
    codec::encode_identity(&peer_rendered)?;
    if self_rendered == peer_rendered {
        return Err(Error::IdentitiesEqual);
    }
    if password.is_empty() {
        return Err(Error::EmptyPassword);
    }
    let generator = config.variant.derive_generator(password, &config.params)?;
    let own_element = group::exp(&generator, &x);
    let msg = Message::Exchange {
        sender: self_rendered.clone(),
        element: own_element.clone(),
    };
    let state = SessionState {
        config,
        self_rendered,
        peer_rendered,
        generator,
        ephemeral: x,
        own_element,
        peer_element: None,
        shared: None,
        key: None,
        phase: Phase::Sent,
        own_confirm_sent: false,
        peer_confirmed: false,
    };
    Ok((state, msg))
}

impl SessionState {
    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn role(&self) -> Role {
        self.config.role
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn confirm(&self) -> ConfirmationMethod {
        self.config.confirm
    }

    pub fn self_id(&self) -> &str {
        &self.self_rendered
    }

    pub fn peer_id(&self) -> &str {
        &self.peer_rendered
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn key(&self) -> Option<&SessionKey> {
        self.key.as_ref()
    }

    pub fn own_element(&self) -> &GroupElement {
        &self.own_element
    }

    pub fn peer_element(&self) -> Option<&GroupElement> {
        self.peer_element.as_ref()
    }

    /// Whether the session reached its final successful phase: `Accepted`
    /// with explicit confirmation, `Keyed` without.
    pub fn is_complete(&self) -> bool {
        match self.config.confirm {
            ConfirmationMethod::None => self.phase == Phase::Keyed,
            _ => self.phase == Phase::Accepted,
        }
    }

    /// Whether `make_confirmation` would succeed now.
    pub fn can_confirm(&self) -> bool {
        self.config.confirm.is_explicit()
            && self.phase == Phase::Keyed
            && !self.own_confirm_sent
            && (!self.config.confirm.is_ordered()
                || self.config.role == Role::Initiator
                || self.peer_confirmed)
    }

    pub fn abort(&mut self, reason: AbortReason) {
        self.phase = Phase::Aborted(reason);
        self.key = None;
    }

    fn fail(&mut self, reason: AbortReason, err: Error) -> Error {
        self.abort(reason);
        err
    }

    /// Consumes the peer's `(identity, element)` and derives the key.
    pub fn process_exchange(&mut self, msg: &Message) -> Result<()> {
        if self.phase != Phase::Sent {
            return Err(Error::WrongPhase(self.phase));
        }
        let Message::Exchange { sender, element } = msg else {
            return Err(Error::WrongPhase(self.phase));
        };
        if *sender != self.peer_rendered {
            let err = Error::PeerIdentityMismatch {
                expected: self.peer_rendered.clone(),
                got: sender.clone(),
            };
            return Err(self.fail(AbortReason::PeerIdentityMismatch, err));
        }
        if element.params() != &self.config.params || !group::validate_element_range(element) {
            return Err(self.fail(AbortReason::RangeCheckFailed, Error::RangeCheckFailed));
        }
        let shared = group::exp(element, &self.ephemeral);
        let key = derive_session_key(
            self.config.variant,
            &self.self_rendered,
            &self.peer_rendered,
            &self.own_element,
            element,
            &shared,
        );
        self.peer_element = Some(element.clone());
        self.shared = Some(shared);
        self.key = Some(key);
        self.phase = Phase::Keyed;
        Ok(())
    }

    fn tag_inputs(&self) -> Option<TagInputs<'_>> {
        Some(TagInputs {
            self_id: &self.self_rendered,
            peer_id: &self.peer_rendered,
            own_element: &self.own_element,
            peer_element: self.peer_element.as_ref()?,
            shared: self.shared.as_ref()?,
            generator: &self.generator,
            key: self.key.as_ref()?,
        })
    }

    /// Emits this side's confirmation message.
    pub fn make_confirmation(&mut self) -> Result<Message> {
        if !self.config.confirm.is_explicit() {
            return Err(Error::ConfirmationDisabled);
        }
        if !self.can_confirm() {
            return Err(Error::WrongPhase(self.phase));
        }
        let inputs = self.tag_inputs().ok_or(Error::WrongPhase(self.phase))?;
        let tag = confirmation_tag(self.config.confirm, self.config.role, &inputs)?;
        self.own_confirm_sent = true;
        self.phase = if self.peer_confirmed {
            Phase::Accepted
        } else {
            Phase::ConfirmSent
        };
        Ok(Message::Confirm { tag })
    }

    /// Checks the peer's confirmation message.
    pub fn verify_confirmation(&mut self, msg: &Message) -> Result<()> {
        if !self.config.confirm.is_explicit() {
            return Err(Error::ConfirmationDisabled);
        }
        let Message::Confirm { tag } = msg else {
            return Err(Error::WrongPhase(self.phase));
        };
        let in_window = matches!(self.phase, Phase::Keyed | Phase::ConfirmSent);
        let out_of_order = self.config.confirm.is_ordered()
            && self.config.role == Role::Initiator
            && !self.own_confirm_sent;
        if !in_window || self.peer_confirmed || out_of_order {
            return Err(Error::WrongPhase(self.phase));
        }
        let inputs = self.tag_inputs().ok_or(Error::WrongPhase(self.phase))?;
        let expected =
            confirmation_tag(self.config.confirm, self.config.role.other(), &inputs.mirrored())?;
        if !ct_eq(&expected, tag) {
            return Err(self.fail(AbortReason::ConfirmationMismatch, Error::ConfirmationMismatch));
        }
        self.peer_confirmed = true;
        if self.own_confirm_sent {
            self.phase = Phase::Accepted;
        }
        Ok(())
    }
}

impl fmt::Debug for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionState")
            .field("role", &self.config.role)
            .field("self_id", &self.self_rendered)
            .field("peer_id", &self.peer_rendered)
            .field("variant", &self.config.variant)
            .field("confirm", &self.config.confirm)
            .field("phase", &self.phase)
            .field("key", &self.key)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> Arc<GroupParams> {
        GroupParams::toy23()
    }

    fn el(v: u64) -> GroupElement {
        GroupElement::from_u64(&toy(), v).unwrap()
    }

    fn sc(v: u64) -> Scalar {
        Scalar::from_u64(&toy(), v).unwrap()
    }

    fn hexd(s: &str) -> Digest {
        Digest::from_slice(&hex::decode(s).unwrap()).unwrap()
    }

    fn pair(
        variant: Variant,
        confirm: ConfirmationMethod,
        x: u64,
        y: u64,
    ) -> ((SessionState, Message), (SessionState, Message)) {
        let a = SessionConfig::new(Role::Initiator, "A", "B", variant, toy()).with_confirm(confirm);
        let b = SessionConfig::new(Role::Responder, "B", "A", variant, toy()).with_confirm(confirm);
        (
            start_session_with_scalar(a, &[5], sc(x)).unwrap(),
            start_session_with_scalar(b, &[5], sc(y)).unwrap(),
        )
    }

    /// Drives two sessions to completion in the only legal order.
    fn run_confirmation(a: &mut SessionState, b: &mut SessionState) -> Result<()> {
        match a.confirm() {
            ConfirmationMethod::None => Ok(()),
            m if m.is_ordered() => {
                let t1 = a.make_confirmation()?;
                b.verify_confirmation(&t1)?;
                let t2 = b.make_confirmation()?;
                a.verify_confirmation(&t2)
            }
            _ => {
                let ta = a.make_confirmation()?;
                let tb = b.make_confirmation()?;
                b.verify_confirmation(&ta)?;
                a.verify_confirmation(&tb)
            }
        }
    }

    #[test]
    fn start_emits_exchange() {
        let ((s, msg), _) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        assert_eq!(s.phase(), Phase::Sent);
        assert_eq!(
            msg,
            Message::Exchange {
                sender: "A".into(),
                element: el(8)
            }
        );
        // P-SPEKE: g = (H(0x05) mod 23)^2 mod 23 = 16 and 16^3 mod 23 = 2
        let ((_, msg), _) = pair(Variant::PSpeke2017, ConfirmationMethod::None, 3, 4);
        assert_eq!(
            msg,
            Message::Exchange {
                sender: "A".into(),
                element: el(2)
            }
        );
    }

    #[test]
    fn start_rejects_bad_identities_and_passwords() {
        let cfg = SessionConfig::new(Role::Initiator, "A", "A", Variant::Jablon96, toy());
        assert_eq!(start_session_with_scalar(cfg, &[5], sc(3)).unwrap_err(), Error::IdentitiesEqual);
        let cfg = SessionConfig::new(Role::Initiator, "", "B", Variant::Jablon96, toy());
        assert_eq!(start_session_with_scalar(cfg, &[5], sc(3)).unwrap_err(), Error::EmptyIdentity);
        let cfg = SessionConfig::new(Role::Initiator, "A", "B", Variant::Jablon96, toy());
        assert_eq!(start_session_with_scalar(cfg.clone(), &[], sc(3)).unwrap_err(), Error::EmptyPassword);
        assert_eq!(
            start_session_with_scalar(cfg, &[1], sc(3)).unwrap_err(),
            Error::DegenerateGenerator
        );
        // extensions make otherwise equal names distinct
        let cfg = SessionConfig::new(
            Role::Initiator,
            Identity::new("A").with_extension(1),
            Identity::new("A").with_extension(2),
            Variant::Jablon96,
            toy(),
        );
        assert!(start_session_with_scalar(cfg, &[5], sc(3)).is_ok());
    }

    #[test]
    fn process_exchange_derives_key() {
        let ((mut a, _), _) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        a.process_exchange(&Message::Exchange {
            sender: "B".into(),
            element: el(16),
        })
        .unwrap();
        assert_eq!(a.phase(), Phase::Keyed);
        // 16^3 mod 23 = 2, key = SHA-256("SK" || 0x02)
        assert_eq!(
            a.key().unwrap().bytes(),
            &hexd("3ee8092eda9965bad36341d237342fa733a311ab3ccfd49ed1514e08a146fc27")
        );
        assert_eq!(a.key().unwrap().sid(), None);
    }

    #[test]
    fn process_exchange_error_paths() {
        let ((mut a, _), _) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        let err = a
            .process_exchange(&Message::Exchange {
                sender: "B".into(),
                element: el(22),
            })
            .unwrap_err();
        assert_eq!(err, Error::RangeCheckFailed);
        assert_eq!(a.phase(), Phase::Aborted(AbortReason::RangeCheckFailed));
        assert!(a.key().is_none());

        let ((mut a, _), _) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        let err = a
            .process_exchange(&Message::Exchange {
                sender: "C".into(),
                element: el(16),
            })
            .unwrap_err();
        assert!(matches!(err, Error::PeerIdentityMismatch { .. }));
        assert_eq!(a.phase(), Phase::Aborted(AbortReason::PeerIdentityMismatch));

        let ((mut a, _), (_, mb)) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        a.process_exchange(&mb).unwrap();
        assert_eq!(a.process_exchange(&mb).unwrap_err(), Error::WrongPhase(Phase::Keyed));
    }

    #[test]
    fn range_check_rejects_one_and_zero() {
        for v in [0, 1, 22] {
            let ((mut a, _), _) = pair(Variant::PSpeke2017, ConfirmationMethod::None, 3, 4);
            let msg = Message::Exchange {
                sender: "B".into(),
                element: el(v),
            };
            assert_eq!(a.process_exchange(&msg).unwrap_err(), Error::RangeCheckFailed);
        }
    }

    #[test]
    fn patched_keys_are_role_symmetric() {
        let (x, y, shared) = (el(8), el(16), el(2));
        for v in [Variant::Patch2014, Variant::PSpeke2017] {
            let ka = derive_session_key(v, "A", "B", &x, &y, &shared);
            let kb = derive_session_key(v, "B", "A", &y, &x, &shared);
            assert_eq!(ka, kb, "{v}");
        }
        let ka = derive_session_key(Variant::PSpeke2017, "A", "B", &x, &y, &shared);
        let kb = derive_session_key(Variant::PSpeke2017, "A", "B (2)", &x, &y, &shared);
        assert_ne!(ka.bytes(), kb.bytes());
        assert_eq!(ka.sid().unwrap().len(), 64);
    }

    #[test]
    fn jablon_key_is_plain_kdf() {
        let k = derive_session_key(Variant::Jablon96, "A", "B", &el(8), &el(16), &el(2));
        assert_eq!(k.bytes(), &codec::kdf(&[0x02], KdfTag::SessionKey));
    }

    #[test]
    fn pspeke_key_binds_every_transcript_field() {
        let params = toy();
        let ids = ["A", "B", "Alice (2)"];
        let shared = el(9);
        let mut keys = std::collections::HashSet::new();
        let mut count = 0;
        for a in ids {
            for b in ids {
                if a == b {
                    continue;
                }
                for x in 2..=21 {
                    for y in 2..=21 {
                        let (x, y) = (
                            GroupElement::from_u64(&params, x).unwrap(),
                            GroupElement::from_u64(&params, y).unwrap(),
                        );
                        let k = derive_session_key(Variant::PSpeke2017, a, b, &x, &y, &shared);
                        keys.insert(*k.bytes());
                        count += 1;
                    }
                }
            }
        }
        // the key is symmetric under swapping the two (id, element) pairs,
        // and nothing else collides
        assert_eq!(keys.len(), count / 2);
    }

    #[test]
    fn tagged_hash_initiator_vector() {
        let ((mut a, _), (_, mb)) = pair(Variant::Jablon96, ConfirmationMethod::TaggedHash34, 3, 4);
        a.process_exchange(&mb).unwrap();
        let Message::Confirm { tag } = a.make_confirmation().unwrap() else {
            unreachable!()
        };
        // SHA-256(03 08 10 02 02): X=8, Y=16, g^xy=2, g=2
        assert_eq!(tag, hexd("7054494faa72276a10d83f9e38616f5cedf1865e7829824ded467b2634717fc3"));
    }

    #[test]
    fn honest_runs_accept_for_all_combinations() {
        for v in Variant::ALL {
            for m in ConfirmationMethod::ALL {
                for x in 1..=10 {
                    for y in 1..=10 {
                        let ((mut a, ma), (mut b, mb)) = pair(v, m, x, y);
                        a.process_exchange(&mb).unwrap();
                        b.process_exchange(&ma).unwrap();
                        run_confirmation(&mut a, &mut b).unwrap();
                        assert!(a.is_complete() && b.is_complete(), "{v} {m}");
                        assert_eq!(a.key(), b.key());
                        if m.is_explicit() {
                            assert_eq!(a.phase(), Phase::Accepted);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ordered_methods_reject_the_other_order() {
        for m in [ConfirmationMethod::JablonDoubleHash, ConfirmationMethod::TaggedHash34] {
            let ((mut a, ma), (mut b, mb)) = pair(Variant::Jablon96, m, 3, 4);
            a.process_exchange(&mb).unwrap();
            b.process_exchange(&ma).unwrap();
            assert_eq!(b.make_confirmation().unwrap_err(), Error::WrongPhase(Phase::Keyed));
            let fake = Message::Confirm {
                tag: codec::hash(b"x"),
            };
            // the initiator does not accept a reply before its own challenge
            assert_eq!(a.verify_confirmation(&fake).unwrap_err(), Error::WrongPhase(Phase::Keyed));
            assert_eq!(a.phase(), Phase::Keyed);
        }
    }

    #[test]
    fn symmetric_methods_are_one_round() {
        for m in [ConfirmationMethod::SymmetricHash, ConfirmationMethod::SymmetricMac] {
            let ((mut a, ma), (mut b, mb)) = pair(Variant::PSpeke2017, m, 3, 4);
            a.process_exchange(&mb).unwrap();
            b.process_exchange(&ma).unwrap();
            assert!(a.can_confirm() && b.can_confirm());
            let ta = a.make_confirmation().unwrap();
            let tb = b.make_confirmation().unwrap();
            assert_ne!(ta, tb);
            assert_eq!(a.phase(), Phase::ConfirmSent);
            // either side may verify first
            a.verify_confirmation(&tb).unwrap();
            b.verify_confirmation(&ta).unwrap();
            assert_eq!((a.phase(), b.phase()), (Phase::Accepted, Phase::Accepted));
        }
    }

    #[test]
    fn verify_before_send_then_send_accepts() {
        let ((mut a, ma), (mut b, mb)) =
            pair(Variant::PSpeke2017, ConfirmationMethod::SymmetricHash, 3, 4);
        a.process_exchange(&mb).unwrap();
        b.process_exchange(&ma).unwrap();
        let tb = b.make_confirmation().unwrap();
        a.verify_confirmation(&tb).unwrap();
        assert_eq!(a.phase(), Phase::Keyed);
        a.make_confirmation().unwrap();
        assert_eq!(a.phase(), Phase::Accepted);
    }

    #[test]
    fn tampered_or_reflected_tags_abort() {
        let ((mut a, ma), (mut b, mb)) =
            pair(Variant::PSpeke2017, ConfirmationMethod::SymmetricHash, 3, 4);
        a.process_exchange(&mb).unwrap();
        b.process_exchange(&ma).unwrap();
        let ta = a.make_confirmation().unwrap();
        let Message::Confirm { tag } = &ta else { unreachable!() };
        let flipped = Message::Confirm {
            tag: tag.with_bit_flipped(77),
        };
        assert_eq!(b.verify_confirmation(&flipped).unwrap_err(), Error::ConfirmationMismatch);
        assert_eq!(b.phase(), Phase::Aborted(AbortReason::ConfirmationMismatch));
        // own tag reflected back
        assert_eq!(a.verify_confirmation(&ta).unwrap_err(), Error::ConfirmationMismatch);
    }

    #[test]
    fn confirmation_disabled_without_method() {
        let ((mut a, _), (_, mb)) = pair(Variant::Jablon96, ConfirmationMethod::None, 3, 4);
        a.process_exchange(&mb).unwrap();
        assert_eq!(a.make_confirmation().unwrap_err(), Error::ConfirmationDisabled);
        assert!(a.is_complete());
    }

    #[test]
    fn mismatched_passwords_fail_confirmation() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = SessionConfig::new(Role::Initiator, "A", "B", Variant::PSpeke2017, toy());
        let b = SessionConfig::new(Role::Responder, "B", "A", Variant::PSpeke2017, toy());
        let (mut a, ma) = start_session(a, b"correct", &mut rng).unwrap();
        let (mut b, mb) = start_session(b, b"battery", &mut rng).unwrap();
        a.process_exchange(&mb).unwrap();
        b.process_exchange(&ma).unwrap();
        assert_eq!(run_confirmation(&mut a, &mut b).unwrap_err(), Error::ConfirmationMismatch);
    }

    #[test]
    fn round_counts() {
        let got: Vec<u32> = ConfirmationMethod::ALL.iter().map(|&m| round_count(m)).collect();
        assert_eq!(got, vec![1, 3, 3, 2, 2]);
    }

    #[test]
    fn names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        for m in ConfirmationMethod::ALL {
            assert_eq!(m.name().parse::<ConfirmationMethod>().unwrap(), m);
        }
        assert!("speke".parse::<Variant>().is_err());
    }
}
