//! Scripted adversaries for the four attacks and the outcome matrix.
//!
//! Each attack builds a [`Simulator`], registers the honest sessions plus any
//! addresses the adversary pretends to own, and lets an [`Adversary`] drive
//! the channel. The adversary never sees a password, generator or honest
//! exponent: it works from envelopes and the [`PublicView`] alone.

pub mod matrix;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::codec::Digest;
use crate::error::{Error, Result};
use crate::group::{self, GroupElement, GroupParams, Scalar};
use crate::protocol::{
    self, ConfirmationMethod, Identity, Message, Phase, Role, SessionConfig, TagInputs, Variant,
};
use crate::simnet::{
    Adversary, EndpointId, Envelope, EventTrace, InterceptAction, PublicView, SimResult,
    Simulator, StartMode,
};

pub use matrix::{security_matrix, MatrixRow, SecurityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    Impersonation,
    Malleability,
    SessionSwap,
    ExpEquivalence,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Impersonation,
        AttackKind::Malleability,
        AttackKind::SessionSwap,
        AttackKind::ExpEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Impersonation => "impersonation",
            AttackKind::Malleability => "malleability",
            AttackKind::SessionSwap => "session-swap",
            AttackKind::ExpEquivalence => "exp-equivalence",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| format!("unknown attack `{s}`"))
    }
}

/// One session's final state as reported in an outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSummary {
    pub label: String,
    pub self_id: String,
    pub peer_id: String,
    pub phase: Phase,
    pub completed: bool,
    /// Hash of the session key, if one is held.
    pub key_digest: Option<Digest>,
}

/// Verdict of one adversary run.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub attack_name: String,
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub success: bool,
    /// The honest parties noticed: everything aborted and at least one
    /// session saw a confirmation mismatch.
    pub detected: bool,
    /// Two completed sessions share a key while their peer beliefs are not
    /// each other's mirror image.
    pub unknown_key_share: bool,
    pub sessions: Vec<SessionSummary>,
    pub adversary_learned_key: bool,
    pub notes: Vec<String>,
    pub trace: EventTrace,
}

impl AttackOutcome {
    fn from_sim(kind: AttackKind, variant: Variant, confirm: ConfirmationMethod, res: SimResult) -> Self {
        let sessions: Vec<SessionSummary> = res
            .sessions
            .iter()
            .map(|s| SessionSummary {
                label: s.label.clone(),
                self_id: s.self_id.clone(),
                peer_id: s.peer_id.clone(),
                phase: s.phase,
                completed: s.completed(),
                key_digest: s.fingerprint(),
            })
            .collect();
        let detected = sessions.iter().all(|s| s.phase.is_aborted())
            && sessions
                .iter()
                .any(|s| s.phase == Phase::Aborted(protocol::AbortReason::ConfirmationMismatch));
        let unknown_key_share = has_unknown_key_share(&sessions);
        AttackOutcome {
            attack_name: kind.name().to_owned(),
            variant,
            confirm,
            success: false,
            detected,
            unknown_key_share,
            sessions,
            adversary_learned_key: false,
            notes: Vec::new(),
            trace: res.trace,
        }
    }

    pub fn session(&self, label: &str) -> Option<&SessionSummary> {
        self.sessions.iter().find(|s| s.label == label)
    }

    fn pair_agrees(&self, a: &str, b: &str) -> bool {
        match (self.session(a), self.session(b)) {
            (Some(a), Some(b)) => {
                a.completed && b.completed && a.key_digest.is_some() && a.key_digest == b.key_digest
            }
            _ => false,
        }
    }

    /// Human-readable report: header, one line per session, notes.
    pub fn report(&self) -> String {
        let mut out = format!(
            "attack={} variant={} confirm={} success={} detected={} uks={} adversary_learned_key={}\n",
            self.attack_name,
            self.variant,
            self.confirm,
            self.success,
            self.detected,
            self.unknown_key_share,
            self.adversary_learned_key
        );
        for s in &self.sessions {
            let key = s.key_digest.map_or_else(|| "-".to_owned(), |d| d.to_hex());
            out.push_str(&format!(
                "session={:?} self={:?} peer={:?} phase={} key_digest={}\n",
                s.label, s.self_id, s.peer_id, s.phase, key
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn has_unknown_key_share(sessions: &[SessionSummary]) -> bool {
    for (i, a) in sessions.iter().enumerate() {
        for b in &sessions[i + 1..] {
            let shared = a.completed && b.completed && a.key_digest.is_some() && a.key_digest == b.key_digest;
            let mirrored = a.self_id == b.peer_id && a.peer_id == b.self_id;
            if shared && !mirrored {
                return true;
            }
        }
    }
    false
}

/// Common parameters for every attack run.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub params: Arc<GroupParams>,
    /// The password the honest parties share.
    pub password: Vec<u8>,
    pub duplicate_detection: bool,
    /// Forced honest exponents. When unset they are drawn from the run's rng
    /// and kept distinct (see [`sample_distinct_pair`]).
    pub scalars: Option<(Scalar, Scalar)>,
}

impl AttackConfig {
    pub fn new(variant: Variant, params: Arc<GroupParams>) -> Self {
        AttackConfig {
            variant,
            confirm: variant.preset_confirmation(),
            params,
            password: b"correct horse".to_vec(),
            duplicate_detection: false,
            scalars: None,
        }
    }

    pub fn with_confirm(mut self, confirm: ConfirmationMethod) -> Self {
        self.confirm = confirm;
        self
    }

    pub fn with_scalars(mut self, x: Scalar, y: Scalar) -> Self {
        self.scalars = Some((x, y));
        self
    }

    pub fn with_duplicate_detection(mut self, on: bool) -> Self {
        self.duplicate_detection = on;
        self
    }

    fn session(&self, role: Role, me: Identity, peer: Identity) -> SessionConfig {
        SessionConfig::new(role, me, peer, self.variant, Arc::clone(&self.params))
            .with_confirm(self.confirm)
            .with_duplicate_detection(self.duplicate_detection)
    }

    fn honest_scalars<R: RngCore + ?Sized>(&self, rng: &mut R) -> (Scalar, Scalar) {
        match &self.scalars {
            Some(pair) => pair.clone(),
            None => sample_distinct_pair(rng, &self.params),
        }
    }
}

/// Two independent exponents conditioned on `x != y`.
///
/// Equal exponents make both honest elements identical, which in a toy group
/// happens with probability `1/(q-1)` and collapses every transcript binding
/// the attacks are meant to exercise.
pub fn sample_distinct_pair<R: RngCore + ?Sized>(rng: &mut R, params: &GroupParams) -> (Scalar, Scalar) {
    let x = group::sample_scalar(rng, params);
    loop {
        let y = group::sample_scalar(rng, params);
        if y != x {
            return (x, y);
        }
    }
}

/// Uniform `z` in `[lo, q-1]`.
fn sample_exponent_from<R: RngCore + ?Sized>(rng: &mut R, params: &GroupParams, lo: u64) -> Scalar {
    loop {
        let z = group::sample_scalar(rng, params);
        if z.value() >= &BigUint::from(lo) {
            return z;
        }
    }
}

/// Draws `z` until `element^z` lands in `[2, p-2]`, logging each retry.
fn resample_in_range<R: RngCore + ?Sized>(
    rng: &mut R,
    params: &GroupParams,
    element: &GroupElement,
    lo: u64,
    hi_inclusive: Option<&BigUint>,
    notes: &mut Vec<String>,
) -> Scalar {
    loop {
        let z = sample_exponent_from(rng, params, lo);
        if hi_inclusive.is_some_and(|hi| z.value() > hi) {
            continue;
        }
        if group::validate_element_range(&group::exp(element, &z)) {
            return z;
        }
        notes.push(format!("re-sampled z: {element}^z out of range"));
    }
}

/// Two-party setup shared by malleability: `Alice` initiator, `Bob` responder.
fn two_party(cfg: &AttackConfig, seed: u64, x: Scalar, y: Scalar) -> Result<Simulator> {
    let mut sim = Simulator::new(seed);
    let a = sim.add_session(
        "Alice",
        "Alice",
        cfg.session(Role::Initiator, "Alice".into(), "Bob".into()),
        &cfg.password,
        StartMode::Active,
        Some(x),
    )?;
    let b = sim.add_session(
        "Bob",
        "Bob",
        cfg.session(Role::Responder, "Bob".into(), "Alice".into()),
        &cfg.password,
        StartMode::Active,
        Some(y),
    )?;
    sim.link(a, b);
    Ok(sim)
}

/// How the impersonator picks its exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZChoice {
    /// Use this exponent.
    Fixed(Scalar),
    /// Pick per target: a random `z != 1` where the confirmation tags do not
    /// cover the exchanged elements, plain reflection (`z = 1`) otherwise.
    Adaptive,
}

/// The reflection-free strategy only helps when nothing downstream looks at
/// the elements themselves.
fn impersonation_wants_random_z(variant: Variant, confirm: ConfirmationMethod) -> bool {
    !variant.key_binds_transcript()
        && matches!(
            confirm,
            ConfirmationMethod::None | ConfirmationMethod::JablonDoubleHash
        )
}

struct Impersonator {
    s1: EndpointId,
    s2: EndpointId,
    claimed: String,
    z: Option<Scalar>,
    random_z: bool,
    rng: ChaCha20Rng,
    notes: Vec<String>,
}

impl Impersonator {
    fn z_for(&mut self, first: &GroupElement) -> Scalar {
        if let Some(z) = &self.z {
            return z.clone();
        }
        let params = Arc::clone(first.params());
        let z = if self.random_z {
            resample_in_range(&mut self.rng, &params, first, 2, None, &mut self.notes)
        } else {
            Scalar::from_u64(&params, 1).expect("q > 1")
        };
        self.notes.push(format!("z = {}", z.value()));
        self.z = Some(z.clone());
        z
    }

    fn relay_target(&self, from: EndpointId) -> Option<EndpointId> {
        if from == self.s1 {
            Some(self.s2)
        } else if from == self.s2 {
            Some(self.s1)
        } else {
            None
        }
    }
}

impl Adversary for Impersonator {
    fn on_message(&mut self, env: &Envelope, _view: &PublicView<'_>) -> Vec<InterceptAction> {
        let Some(target) = self.relay_target(env.from) else {
            return vec![InterceptAction::Drop];
        };
        let relayed = match &env.msg {
            Message::Exchange { element, .. } => {
                let z = self.z_for(element);
                Message::Exchange {
                    sender: self.claimed.clone(),
                    element: group::exp(element, &z),
                }
            }
            Message::Confirm { .. } => env.msg.clone(),
        };
        vec![InterceptAction::Drop, InterceptAction::Inject(target, relayed)]
    }
}

pub const IMP_SESSION_1: &str = "Alice#1";
pub const IMP_SESSION_2: &str = "Alice#2";

/// Mallory impersonates Bob to Alice using two parallel sessions.
///
/// Alice opens session 1 to Bob, who never answers. Mallory opens session 2
/// to Alice claiming to be Bob, raises each of Alice's exchange elements to
/// `z` and relays it into the other session, then relays the confirmation
/// tags across. Success means both of Alice's sessions complete with the same
/// key, so Mallory can splice the two sessions together.
pub fn impersonation_attack<R: RngCore + ?Sized>(
    cfg: &AttackConfig,
    z: ZChoice,
    rng: &mut R,
) -> Result<AttackOutcome> {
    let (x, y) = cfg.honest_scalars(rng);
    let mut sim = Simulator::new(rng.next_u64());
    let s1 = sim.add_session(
        IMP_SESSION_1,
        "Alice",
        cfg.session(Role::Initiator, "Alice".into(), "Bob".into()),
        &cfg.password,
        StartMode::Active,
        Some(x),
    )?;
    let bob = sim.add_absent("Bob#1");
    let s2 = sim.add_session(
        IMP_SESSION_2,
        "Alice",
        cfg.session(Role::Responder, "Alice".into(), "Bob".into()),
        &cfg.password,
        StartMode::Listening,
        Some(y),
    )?;
    let mallory = sim.add_absent("Mallory#2");
    sim.link(s1, bob);
    sim.link(s2, mallory);

    let mut adv = Impersonator {
        s1,
        s2,
        claimed: "Bob".to_owned(),
        z: match &z {
            ZChoice::Fixed(z) => Some(z.clone()),
            ZChoice::Adaptive => None,
        },
        random_z: impersonation_wants_random_z(cfg.variant, cfg.confirm),
        rng: ChaCha20Rng::seed_from_u64(rng.next_u64()),
        notes: Vec::new(),
    };
    let res = sim.run(&mut adv)?;
    let mut out = AttackOutcome::from_sim(AttackKind::Impersonation, cfg.variant, cfg.confirm, res);
    out.success = out.pair_agrees(IMP_SESSION_1, IMP_SESSION_2);
    out.notes = adv.notes;
    if let Some(z) = &adv.z {
        if z.value().is_one() {
            out.notes.push("reflection: Alice's messages relayed to herself unchanged".into());
        }
    }
    Ok(out)
}

struct Malleator {
    z: Option<Scalar>,
    hi: BigUint,
    rng: ChaCha20Rng,
    notes: Vec<String>,
}

impl Adversary for Malleator {
    fn on_message(&mut self, env: &Envelope, _view: &PublicView<'_>) -> Vec<InterceptAction> {
        match &env.msg {
            Message::Exchange { sender, element } => {
                let z = match &self.z {
                    Some(z) => z.clone(),
                    None => {
                        let params = Arc::clone(element.params());
                        let z = resample_in_range(&mut self.rng, &params, element, 2, Some(&self.hi), &mut self.notes);
                        self.notes.push(format!("z = {}", z.value()));
                        self.z = Some(z.clone());
                        z
                    }
                };
                vec![InterceptAction::Modify(Message::Exchange {
                    sender: sender.clone(),
                    element: group::exp(element, &z),
                })]
            }
            Message::Confirm { .. } => vec![InterceptAction::Forward],
        }
    }
}

/// Man in the middle raises both exchange elements to `z`.
///
/// Success means both parties complete with equal keys despite the
/// modification. `z` must lie in `[2, q-2]`; when `None` it is sampled.
pub fn malleability_attack<R: RngCore + ?Sized>(
    cfg: &AttackConfig,
    z: Option<Scalar>,
    rng: &mut R,
) -> Result<AttackOutcome> {
    let hi = cfg.params.q() - 2u32;
    if let Some(z) = &z {
        if z.value() < &BigUint::from(2u32) || z.value() > &hi {
            return Err(Error::InvalidExponent);
        }
    }
    let (x, y) = cfg.honest_scalars(rng);
    let sim = two_party(cfg, rng.next_u64(), x, y)?;
    let mut adv = Malleator {
        z,
        hi,
        rng: ChaCha20Rng::seed_from_u64(rng.next_u64()),
        notes: Vec::new(),
    };
    let res = sim.run(&mut adv)?;
    let mut out = AttackOutcome::from_sim(AttackKind::Malleability, cfg.variant, cfg.confirm, res);
    out.success = out.pair_agrees("Alice", "Bob");
    out.notes = adv.notes;
    Ok(out)
}

/// Delivers every message into the other session, rewriting the claimed
/// sender to whatever the receiving endpoint expects.
struct Swapper {
    route: Vec<(EndpointId, EndpointId)>,
}

impl Adversary for Swapper {
    fn on_message(&mut self, env: &Envelope, view: &PublicView<'_>) -> Vec<InterceptAction> {
        let Some(&(_, target)) = self.route.iter().find(|(from, _)| *from == env.from) else {
            return vec![InterceptAction::Drop];
        };
        let msg = match &env.msg {
            Message::Exchange { element, .. } => {
                let expected = view
                    .get(target)
                    .and_then(|e| e.session.as_ref())
                    .map(|s| s.peer_id.clone())
                    .unwrap_or_default();
                Message::Exchange {
                    sender: expected,
                    element: element.clone(),
                }
            }
            Message::Confirm { .. } => env.msg.clone(),
        };
        vec![InterceptAction::Drop, InterceptAction::Inject(target, msg)]
    }
}

pub const SWAP_LABELS: [&str; 4] = ["A (1)", "B (1)", "A (2)", "B (2)"];

/// Two concurrent sessions between A and B, cross-wired by the network.
///
/// Sessions use extended identities `A (n)` / `B (n)`. Success means both
/// cross pairings (`A (1)` with `B (2)`, `A (2)` with `B (1)`) complete with
/// matching keys.
pub fn session_swap_attack<R: RngCore + ?Sized>(cfg: &AttackConfig, rng: &mut R) -> Result<AttackOutcome> {
    let (x1, y1) = cfg.honest_scalars(rng);
    let (x2, y2) = match &cfg.scalars {
        Some(_) => (y1.clone(), x1.clone()),
        None => sample_distinct_pair(rng, &cfg.params),
    };
    let mut sim = Simulator::new(rng.next_u64());
    let mut ids = Vec::new();
    for (n, (xa, xb)) in [(1u32, (x1, y1)), (2, (x2, y2))] {
        let a = Identity::new("A").with_extension(n);
        let b = Identity::new("B").with_extension(n);
        let ea = sim.add_session(
            a.render(),
            "A",
            cfg.session(Role::Initiator, a.clone(), b.clone()),
            &cfg.password,
            StartMode::Active,
            Some(xa),
        )?;
        let eb = sim.add_session(
            b.render(),
            "B",
            cfg.session(Role::Responder, b, a),
            &cfg.password,
            StartMode::Active,
            Some(xb),
        )?;
        sim.link(ea, eb);
        ids.push((ea, eb));
    }
    let [(a1, b1), (a2, b2)] = [ids[0], ids[1]];
    let mut adv = Swapper {
        route: vec![(a1, b2), (b2, a1), (a2, b1), (b1, a2)],
    };
    let res = sim.run(&mut adv)?;
    let mut out = AttackOutcome::from_sim(AttackKind::SessionSwap, cfg.variant, cfg.confirm, res);
    out.success = out.pair_agrees("A (1)", "B (2)") && out.pair_agrees("A (2)", "B (1)");
    Ok(out)
}

/// Which password of the pair the victim actually holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PasswordClass {
    /// The attacker's base guess `s`.
    Base,
    /// `s' = s^r mod p`.
    Power,
}

impl fmt::Display for PasswordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PasswordClass::Base => "s",
            PasswordClass::Power => "s^r",
        })
    }
}

impl FromStr for PasswordClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "s" | "base" => Ok(PasswordClass::Base),
            "s^r" | "s-pow-r" | "power" => Ok(PasswordClass::Power),
            _ => Err(format!("unknown password class `{s}`")),
        }
    }
}

/// `s^r mod p` as a password byte string.
pub fn related_password(s: &[u8], r: &BigUint, params: &GroupParams) -> Vec<u8> {
    let base = BigUint::from_bytes_be(s).mod_floor(params.p());
    base.modpow(r, params.p()).to_bytes_be()
}

/// Validates `r` and returns it together with `r^-1 mod q`.
fn exp_equivalence_exponent(r: &BigUint, params: &GroupParams) -> Result<(Scalar, Scalar)> {
    let reduced = r.mod_floor(params.q());
    if reduced.is_zero() || reduced.is_one() {
        return Err(Error::InvalidExponent);
    }
    let r = Scalar::new(params, reduced)?;
    let inv = r.invert(params);
    Ok((r, inv))
}

struct Classifier {
    variant: Variant,
    confirm: ConfirmationMethod,
    victim: EndpointId,
    guess_generators: [GroupElement; 2],
    x: Scalar,
    r_inv: Scalar,
    own: Option<GroupElement>,
    peer: Option<GroupElement>,
    victim_id: String,
    attacker_id: String,
    verdict: Option<Vec<PasswordClass>>,
}

impl Classifier {
    fn classify(&self, tag: &Digest) -> Vec<PasswordClass> {
        let (Some(own), Some(peer)) = (&self.own, &self.peer) else {
            return Vec::new();
        };
        let candidates = [
            (PasswordClass::Base, group::exp(peer, &self.x)),
            (PasswordClass::Power, group::exp(peer, &self.x.mul(&self.r_inv, own.params()))),
        ];
        let mut hits = Vec::new();
        for (i, (class, shared)) in candidates.into_iter().enumerate() {
            // victim's view: it sent `peer` and received `own`
            let key = protocol::derive_session_key(self.variant, &self.victim_id, &self.attacker_id, peer, own, &shared);
            let inputs = TagInputs {
                self_id: &self.victim_id,
                peer_id: &self.attacker_id,
                own_element: peer,
                peer_element: own,
                shared: &shared,
                generator: &self.guess_generators[i],
                key: &key,
            };
            if let Ok(expected) = protocol::confirmation_tag(self.confirm, Role::Initiator, &inputs) {
                if &expected == tag {
                    hits.push(class);
                }
            }
        }
        hits
    }
}

impl Adversary for Classifier {
    fn on_message(&mut self, env: &Envelope, _view: &PublicView<'_>) -> Vec<InterceptAction> {
        if env.from != self.victim {
            return vec![InterceptAction::Drop];
        }
        match &env.msg {
            Message::Exchange { element, .. } => {
                let own = group::exp(&self.guess_generators[0], &self.x);
                self.peer = Some(element.clone());
                self.own = Some(own.clone());
                vec![
                    InterceptAction::Drop,
                    InterceptAction::Inject(
                        self.victim,
                        Message::Exchange {
                            sender: self.attacker_id.clone(),
                            element: own,
                        },
                    ),
                ]
            }
            Message::Confirm { tag } => {
                if self.verdict.is_none() {
                    self.verdict = Some(self.classify(tag));
                }
                vec![InterceptAction::Drop]
            }
        }
    }
}

/// Parameters of one exponential-equivalence probe.
#[derive(Debug, Clone)]
pub struct ExpEquivalenceParams {
    /// The attacker's base guess.
    pub s: Vec<u8>,
    pub r: BigUint,
    /// Ground truth, hidden from the attacker.
    pub victim_holds: PasswordClass,
    /// Forced `(attacker x, victim y)`.
    pub scalars: Option<(Scalar, Scalar)>,
}

/// One active run that tests both `s` and `s^r` at once.
///
/// The attacker answers the victim's exchange with `f(s)^x`, waits for the
/// victim's first confirmation tag and checks it against the keys implied by
/// `Y^x` (victim holds `s`) and `Y^(x/r)` (victim holds `s^r`). Success
/// means exactly the true class matched.
pub fn exp_equivalence_attack<R: RngCore + ?Sized>(
    variant: Variant,
    confirm: ConfirmationMethod,
    params: &Arc<GroupParams>,
    probe: &ExpEquivalenceParams,
    rng: &mut R,
) -> Result<AttackOutcome> {
    let (_, r_inv) = exp_equivalence_exponent(&probe.r, params)?;
    let s_pow = related_password(&probe.s, &probe.r, params);
    let g_base = variant.derive_generator(&probe.s, params)?;
    let g_pow = variant.derive_generator(&s_pow, params)?;
    let victim_password = match probe.victim_holds {
        PasswordClass::Base => probe.s.clone(),
        PasswordClass::Power => s_pow.clone(),
    };
    let (x, y) = match &probe.scalars {
        Some(pair) => pair.clone(),
        None => sample_distinct_pair(rng, params),
    };
    let mut sim = Simulator::new(rng.next_u64());
    let victim_cfg = SessionConfig::new(Role::Initiator, "Alice", "Bob", variant, Arc::clone(params)).with_confirm(confirm);
    let victim = sim.add_session("Alice", "Alice", victim_cfg, &victim_password, StartMode::Active, Some(y))?;
    let attacker = sim.add_absent("Bob");
    sim.link(victim, attacker);

    let coincidence = variant.uses_hashed_generator() && g_pow == group::exp(&g_base, &exp_equivalence_exponent(&probe.r, params)?.0);
    let mut adv = Classifier {
        variant,
        confirm,
        victim,
        guess_generators: [g_base, g_pow],
        x,
        r_inv,
        own: None,
        peer: None,
        victim_id: "Alice".into(),
        attacker_id: "Bob".into(),
        verdict: None,
    };
    let res = sim.run(&mut adv)?;
    let mut out = AttackOutcome::from_sim(AttackKind::ExpEquivalence, variant, confirm, res);
    let hits = adv.verdict.clone().unwrap_or_default();
    out.success = hits == [probe.victim_holds];
    out.adversary_learned_key = out.success;
    out.notes.push(format!("victim holds {}", probe.victim_holds));
    match adv.verdict {
        None => out.notes.push("no confirmation tag observed; nothing to test".into()),
        Some(h) if h.is_empty() => out.notes.push("classifier: no candidate matched".into()),
        Some(h) => {
            let names: Vec<String> = h.iter().map(ToString::to_string).collect();
            out.notes.push(format!("classifier matched: {}", names.join(",")));
        }
    }
    if coincidence {
        out.notes.push("hash coincidence: f(s^r) = f(s)^r for this (s, r)".into());
    }
    Ok(out)
}

/// Whether `f(s^r) = f(s)^r` holds, which lets a hashed-generator variant
/// behave like the unhashed one for this particular pair.
pub fn is_hash_coincidence(variant: Variant, s: &[u8], r: &BigUint, params: &Arc<GroupParams>) -> Result<bool> {
    let (r_s, _) = exp_equivalence_exponent(r, params)?;
    let g = variant.derive_generator(s, params)?;
    let g_pow = variant.derive_generator(&related_password(s, r, params), params)?;
    Ok(g_pow == group::exp(&g, &r_s))
}

/// The outcome each attack is expected to have, by variant and method.
///
/// This is the claim set `speke-lab attack` checks its exit code against.
pub fn expected_success(
    attack: AttackKind,
    variant: Variant,
    confirm: ConfirmationMethod,
    duplicate_detection: bool,
    victim_holds: PasswordClass,
) -> bool {
    let old = !variant.key_binds_transcript();
    match attack {
        AttackKind::Impersonation => {
            if duplicate_detection {
                impersonation_wants_random_z(variant, confirm)
            } else {
                variant != Variant::PSpeke2017 && !confirm.binds_directed_identities()
            }
        }
        AttackKind::Malleability => old && !confirm.binds_elements(),
        AttackKind::SessionSwap => old && !confirm.binds_directed_identities(),
        AttackKind::ExpEquivalence => {
            confirm.is_explicit() && (victim_holds == PasswordClass::Base || !variant.uses_hashed_generator())
        }
    }
}
