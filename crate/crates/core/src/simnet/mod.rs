//! Deterministic in-memory network with an interception hook.
//!
//! Every message a session emits is queued on a FIFO channel. Each step pops
//! one envelope and asks the [`Adversary`] what to do with it. The run ends
//! when the queue drains or the step budget runs out; sessions that have not
//! finished by then are aborted with [`AbortReason::Timeout`].

pub mod socket;
pub mod wire;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::codec::Digest;
use crate::error::{Error, Result};
use crate::group::{self, GroupElement, GroupParams, Scalar};
use crate::protocol::{
    self, AbortReason, ConfirmationMethod, Identity, Message, Phase, Role, SessionConfig,
    SessionKey, SessionState, Variant,
};

/// Default number of channel steps before pending sessions time out.
pub const DEFAULT_STEP_BUDGET: usize = 64;

pub type EndpointId = usize;

/// A message in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub seq: u64,
    pub from: EndpointId,
    pub to: EndpointId,
    /// Communication round in which the sender emitted the message.
    pub round: u32,
    pub msg: Message,
}

/// The adversary's verdict on one envelope.
///
/// `Forward`, `Modify` and `Drop` dispose of the envelope itself; any number
/// of `Inject`s may accompany them. An action list without a disposition
/// drops the envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterceptAction {
    Forward,
    Modify(Message),
    Drop,
    /// Deliver `msg` to an endpoint as if it came from that endpoint's peer.
    Inject(EndpointId, Message),
}

/// Network-level attacker. It sees envelopes and public configuration only.
pub trait Adversary {
    fn on_message(&mut self, env: &Envelope, view: &PublicView<'_>) -> Vec<InterceptAction>;
}

/// Delivers everything untouched.
#[derive(Debug, Default, Clone, Copy)]
pub struct PassThrough;

impl Adversary for PassThrough {
    fn on_message(&mut self, _: &Envelope, _: &PublicView<'_>) -> Vec<InterceptAction> {
        vec![InterceptAction::Forward]
    }
}

/// Delivers nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct DropAll;

impl Adversary for DropAll {
    fn on_message(&mut self, _: &Envelope, _: &PublicView<'_>) -> Vec<InterceptAction> {
        vec![InterceptAction::Drop]
    }
}

/// Publicly known facts about a session endpoint.
#[derive(Debug, Clone)]
pub struct PublicSession {
    pub role: Role,
    pub self_id: String,
    pub peer_id: String,
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub params: Arc<GroupParams>,
}

#[derive(Debug, Clone)]
pub struct PublicEndpoint {
    pub id: EndpointId,
    pub label: String,
    pub peer: Option<EndpointId>,
    /// `None` for addresses nobody answers on.
    pub session: Option<PublicSession>,
}

/// What the adversary may inspect besides the envelopes.
#[derive(Debug, Clone, Copy)]
pub struct PublicView<'a> {
    endpoints: &'a [PublicEndpoint],
}

impl<'a> PublicView<'a> {
    pub fn endpoints(&self) -> &'a [PublicEndpoint] {
        self.endpoints
    }

    pub fn get(&self, id: EndpointId) -> Option<&'a PublicEndpoint> {
        self.endpoints.get(id)
    }

    pub fn by_label(&self, label: &str) -> Option<&'a PublicEndpoint> {
        self.endpoints.iter().find(|e| e.label == label)
    }

    pub fn label(&self, id: EndpointId) -> &'a str {
        self.endpoints.get(id).map_or("?", |e| e.label.as_str())
    }
}

/// How a session endpoint begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// Sends its exchange message when the run starts.
    Active,
    /// Starts on the first exchange message it receives.
    Listening,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Sent {
        seq: u64,
        from: String,
        to: String,
        round: u32,
        msg: Message,
    },
    Delivered {
        seq: u64,
        to: String,
        msg: Message,
    },
    Modified {
        seq: u64,
        msg: Message,
    },
    Dropped {
        seq: u64,
    },
    Injected {
        seq: u64,
        to: String,
        msg: Message,
    },
    KeyDerived {
        endpoint: String,
        fingerprint: Digest,
    },
    Accepted {
        endpoint: String,
    },
    Aborted {
        endpoint: String,
        reason: AbortReason,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Sent { .. } => "SENT",
            Event::Delivered { .. } => "DELIVERED",
            Event::Modified { .. } => "MODIFIED",
            Event::Dropped { .. } => "DROPPED",
            Event::Injected { .. } => "INJECTED",
            Event::KeyDerived { .. } => "KEY_DERIVED",
            Event::Accepted { .. } => "ACCEPTED",
            Event::Aborted { .. } => "ABORTED",
        }
    }

    /// Whether the event puts a message on the wire (a party sending, or the
    /// adversary injecting).
    pub fn is_emission(&self) -> bool {
        matches!(self, Event::Sent { .. } | Event::Injected { .. })
    }
}

fn write_msg(out: &mut String, msg: &Message) {
    match msg {
        Message::Exchange { sender, element } => {
            let _ = write!(out, " kind=EXCHANGE sender={sender:?} element={element}");
        }
        Message::Confirm { tag } => {
            let _ = write!(out, " kind=CONFIRM tag={tag}");
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = format!("event={}", self.name());
        match self {
            Event::Sent {
                seq,
                from,
                to,
                round,
                msg,
            } => {
                let _ = write!(s, " seq={seq} from={from:?} to={to:?} round={round}");
                write_msg(&mut s, msg);
            }
            Event::Delivered { seq, to, msg } | Event::Injected { seq, to, msg } => {
                let _ = write!(s, " seq={seq} to={to:?}");
                write_msg(&mut s, msg);
            }
            Event::Modified { seq, msg } => {
                let _ = write!(s, " seq={seq}");
                write_msg(&mut s, msg);
            }
            Event::Dropped { seq } => {
                let _ = write!(s, " seq={seq}");
            }
            Event::KeyDerived {
                endpoint,
                fingerprint,
            } => {
                let _ = write!(s, " endpoint={endpoint:?} key_digest={fingerprint}");
            }
            Event::Accepted { endpoint } => {
                let _ = write!(s, " endpoint={endpoint:?}");
            }
            Event::Aborted { endpoint, reason } => {
                let _ = write!(s, " endpoint={endpoint:?} reason={reason}");
            }
        }
        f.write_str(&s)
    }
}

/// Ordered record of everything that happened on the channel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    events: Vec<Event>,
}

impl EventTrace {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn emissions(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_emission())
    }

    /// One `key=value` record per line.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

/// Final state of one simulated session.
#[derive(Debug, Clone)]
pub struct SessionResult {
    pub label: String,
    pub party: String,
    pub role: Role,
    pub self_id: String,
    pub peer_id: String,
    pub confirm: ConfirmationMethod,
    pub phase: Phase,
    pub key: Option<SessionKey>,
}

impl SessionResult {
    /// `Accepted`, or `Keyed` when the method has no explicit confirmation.
    pub fn completed(&self) -> bool {
        match self.confirm {
            ConfirmationMethod::None => self.phase == Phase::Keyed,
            _ => self.phase == Phase::Accepted,
        }
    }

    pub fn fingerprint(&self) -> Option<Digest> {
        self.key.as_ref().map(SessionKey::fingerprint)
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub sessions: Vec<SessionResult>,
    pub trace: EventTrace,
    pub steps: usize,
    /// Highest communication round any message was sent in.
    pub rounds: u32,
    pub budget_exhausted: bool,
}

impl SimResult {
    pub fn session(&self, label: &str) -> Option<&SessionResult> {
        self.sessions.iter().find(|s| s.label == label)
    }
}

struct Slot {
    party: String,
    config: SessionConfig,
    password: Vec<u8>,
    mode: StartMode,
    scalar: Option<Scalar>,
    rng: ChaCha20Rng,
    state: Option<SessionState>,
    max_round_in: u32,
    reported_end: bool,
}

impl Slot {
    fn is_terminal(&self) -> bool {
        self.state
            .as_ref()
            .is_some_and(|s| s.phase().is_aborted() || s.is_complete())
    }
}

/// A configured network of endpoints, ready to run.
pub struct Simulator {
    public: Vec<PublicEndpoint>,
    slots: Vec<Option<Slot>>,
    master: ChaCha20Rng,
    budget: usize,
    // exchange elements each party has sent, for duplicate detection
    sent_elements: BTreeMap<String, Vec<GroupElement>>,
    queue: VecDeque<Envelope>,
    trace: EventTrace,
    next_seq: u64,
    max_round: u32,
}

impl Simulator {
    pub fn new(seed: u64) -> Self {
        Simulator {
            public: Vec::new(),
            slots: Vec::new(),
            master: ChaCha20Rng::seed_from_u64(seed),
            budget: DEFAULT_STEP_BUDGET,
            sent_elements: BTreeMap::new(),
            queue: VecDeque::new(),
            trace: EventTrace::default(),
            next_seq: 0,
            max_round: 0,
        }
    }

    pub fn with_step_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Registers a session run by `party`. The configuration is validated
    /// here, so a bad identity or password fails before any step.
    pub fn add_session(
        &mut self,
        label: impl Into<String>,
        party: impl Into<String>,
        config: SessionConfig,
        password: &[u8],
        mode: StartMode,
        scalar: Option<Scalar>,
    ) -> Result<EndpointId> {
        let probe = Scalar::from_u64(&config.params, 1)?;
        protocol::start_session_with_scalar(config.clone(), password, probe)?;
        let id = self.public.len();
        let mut seed = [0u8; 32];
        self.master.fill_bytes(&mut seed);
        self.public.push(PublicEndpoint {
            id,
            label: label.into(),
            peer: None,
            session: Some(PublicSession {
                role: config.role,
                self_id: config.self_id.render(),
                peer_id: config.peer_id.render(),
                variant: config.variant,
                confirm: config.confirm,
                params: Arc::clone(&config.params),
            }),
        });
        self.slots.push(Some(Slot {
            party: party.into(),
            config,
            password: password.to_vec(),
            mode,
            scalar,
            rng: ChaCha20Rng::from_seed(seed),
            state: None,
            max_round_in: 0,
            reported_end: false,
        }));
        Ok(id)
    }

    /// Registers an address with nobody behind it. Messages sent there are
    /// only ever seen by the adversary.
    pub fn add_absent(&mut self, label: impl Into<String>) -> EndpointId {
        let id = self.public.len();
        self.public.push(PublicEndpoint {
            id,
            label: label.into(),
            peer: None,
            session: None,
        });
        self.slots.push(None);
        id
    }

    /// Makes `a` and `b` each other's default destination.
    pub fn link(&mut self, a: EndpointId, b: EndpointId) {
        self.public[a].peer = Some(b);
        self.public[b].peer = Some(a);
    }

    fn label(&self, id: EndpointId) -> String {
        self.public[id].label.clone()
    }

    fn emit(&mut self, from: EndpointId, msg: Message) {
        let Some(to) = self.public[from].peer else {
            return;
        };
        let slot = self.slots[from].as_mut().expect("session endpoint");
        let round = slot.max_round_in + 1;
        if let Message::Exchange { element, .. } = &msg {
            self.sent_elements
                .entry(slot.party.clone())
                .or_default()
                .push(element.clone());
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.max_round = self.max_round.max(round);
        self.trace.push(Event::Sent {
            seq,
            from: self.label(from),
            to: self.label(to),
            round,
            msg: msg.clone(),
        });
        self.queue.push_back(Envelope {
            seq,
            from,
            to,
            round,
            msg,
        });
    }

    fn start(&mut self, id: EndpointId) -> Result<()> {
        let slot = self.slots[id].as_mut().expect("session endpoint");
        let started = match slot.scalar.clone() {
            Some(x) => protocol::start_session_with_scalar(slot.config.clone(), &slot.password, x),
            None => protocol::start_session(slot.config.clone(), &slot.password, &mut slot.rng),
        }?;
        let (state, msg) = started;
        slot.state = Some(state);
        self.emit(id, msg);
        Ok(())
    }

    fn note_end(&mut self, id: EndpointId) {
        let label = self.label(id);
        let Some(slot) = self.slots[id].as_mut() else {
            return;
        };
        if slot.reported_end {
            return;
        }
        let Some(state) = slot.state.as_ref() else {
            return;
        };
        let event = match state.phase() {
            Phase::Accepted => Event::Accepted { endpoint: label },
            Phase::Aborted(reason) => Event::Aborted {
                endpoint: label,
                reason,
            },
            _ => return,
        };
        slot.reported_end = true;
        self.trace.push(event);
    }

    fn deliver(&mut self, to: EndpointId, round: u32, msg: Message) {
        let Some(slot) = self.slots[to].as_mut() else {
            return;
        };
        if slot.state.is_none() {
            if slot.mode != StartMode::Listening || !matches!(msg, Message::Exchange { .. }) {
                return;
            }
            if self.start(to).is_err() {
                return;
            }
        }
        let slot = self.slots[to].as_mut().expect("session endpoint");
        if slot.is_terminal() {
            return;
        }
        slot.max_round_in = slot.max_round_in.max(round);
        let state = slot.state.as_mut().expect("started");
        let outcome = match &msg {
            Message::Exchange { element, .. } => {
                let seen_before = slot.config.duplicate_detection
                    && self
                        .sent_elements
                        .get(&slot.party)
                        .is_some_and(|v| v.contains(element));
                if seen_before {
                    state.abort(AbortReason::DuplicateMessage);
                    Err(Error::DuplicateMessage)
                } else {
                    state.process_exchange(&msg).map(|()| true)
                }
            }
            Message::Confirm { .. } => state.verify_confirmation(&msg).map(|()| false),
        };
        match outcome {
            Ok(true) => {
                let fingerprint = state.key().expect("keyed").fingerprint();
                let endpoint = self.label(to);
                self.trace.push(Event::KeyDerived {
                    endpoint,
                    fingerprint,
                });
            }
            Ok(false) => {}
            // out-of-phase messages are discarded without changing state
            Err(_) => {}
        }
        loop {
            let slot = self.slots[to].as_mut().expect("session endpoint");
            let state = slot.state.as_mut().expect("started");
            if !state.can_confirm() {
                break;
            }
            let Ok(tag) = state.make_confirmation() else {
                break;
            };
            self.emit(to, tag);
        }
        self.note_end(to);
    }

    /// Runs until the queue drains or the step budget is spent.
    pub fn run(mut self, adversary: &mut dyn Adversary) -> Result<SimResult> {
        for id in 0..self.slots.len() {
            if matches!(&self.slots[id], Some(s) if s.mode == StartMode::Active) {
                self.start(id)?;
            }
        }
        let public = self.public.clone();
        let view = PublicView { endpoints: &public };
        let mut steps = 0;
        let mut budget_exhausted = false;
        while let Some(env) = self.queue.pop_front() {
            if steps == self.budget {
                budget_exhausted = true;
                break;
            }
            steps += 1;
            let actions = adversary.on_message(&env, &view);
            let mut disposed = false;
            for action in actions {
                match action {
                    InterceptAction::Forward if !disposed => {
                        disposed = true;
                        self.trace.push(Event::Delivered {
                            seq: env.seq,
                            to: self.label(env.to),
                            msg: env.msg.clone(),
                        });
                        self.deliver(env.to, env.round, env.msg.clone());
                    }
                    InterceptAction::Modify(m) if !disposed => {
                        disposed = true;
                        self.trace.push(Event::Modified {
                            seq: env.seq,
                            msg: m.clone(),
                        });
                        self.trace.push(Event::Delivered {
                            seq: env.seq,
                            to: self.label(env.to),
                            msg: m.clone(),
                        });
                        self.deliver(env.to, env.round, m);
                    }
                    InterceptAction::Drop if !disposed => {
                        disposed = true;
                        self.trace.push(Event::Dropped { seq: env.seq });
                    }
                    InterceptAction::Inject(target, m) if target < self.public.len() => {
                        let seq = self.next_seq;
                        self.next_seq += 1;
                        self.trace.push(Event::Injected {
                            seq,
                            to: self.label(target),
                            msg: m.clone(),
                        });
                        self.deliver(target, env.round, m);
                    }
                    _ => {}
                }
            }
            if !disposed {
                self.trace.push(Event::Dropped { seq: env.seq });
            }
        }
        let mut sessions = Vec::new();
        for id in 0..self.slots.len() {
            let label = self.label(id);
            let Some(slot) = self.slots[id].as_mut() else {
                continue;
            };
            let (phase, key) = match slot.state.as_mut() {
                Some(state) => {
                    if !(state.phase().is_aborted() || state.is_complete()) {
                        state.abort(AbortReason::Timeout);
                    }
                    (state.phase(), state.key().cloned())
                }
                None => (Phase::Aborted(AbortReason::Timeout), None),
            };
            if slot.state.is_some() {
                self.note_end(id);
            } else {
                self.trace.push(Event::Aborted {
                    endpoint: label.clone(),
                    reason: AbortReason::Timeout,
                });
            }
            let slot = self.slots[id].as_ref().expect("session endpoint");
            sessions.push(SessionResult {
                label,
                party: slot.party.clone(),
                role: slot.config.role,
                self_id: slot.config.self_id.render(),
                peer_id: slot.config.peer_id.render(),
                confirm: slot.config.confirm,
                phase,
                key,
            });
        }
        Ok(SimResult {
            sessions,
            trace: self.trace,
            steps,
            rounds: self.max_round,
            budget_exhausted,
        })
    }
}

/// Two honest parties, `A` as initiator and `B` as responder.
#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub variant: Variant,
    pub confirm: ConfirmationMethod,
    pub params: Arc<GroupParams>,
    pub id_a: Identity,
    pub id_b: Identity,
    pub password_a: Vec<u8>,
    pub password_b: Vec<u8>,
    pub duplicate_detection: bool,
    /// Force the ephemeral exponents instead of sampling them.
    pub scalars: Option<(Scalar, Scalar)>,
}

impl ExchangeConfig {
    /// `Alice`/`Bob` sharing `password`, with the variant's preset method.
    pub fn new(variant: Variant, params: Arc<GroupParams>, password: &[u8]) -> Self {
        ExchangeConfig {
            variant,
            confirm: variant.preset_confirmation(),
            params,
            id_a: Identity::new("Alice"),
            id_b: Identity::new("Bob"),
            password_a: password.to_vec(),
            password_b: password.to_vec(),
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

    pub fn config_a(&self) -> SessionConfig {
        SessionConfig::new(
            Role::Initiator,
            self.id_a.clone(),
            self.id_b.clone(),
            self.variant,
            Arc::clone(&self.params),
        )
        .with_confirm(self.confirm)
        .with_duplicate_detection(self.duplicate_detection)
    }

    pub fn config_b(&self) -> SessionConfig {
        SessionConfig::new(
            Role::Responder,
            self.id_b.clone(),
            self.id_a.clone(),
            self.variant,
            Arc::clone(&self.params),
        )
        .with_confirm(self.confirm)
        .with_duplicate_detection(self.duplicate_detection)
    }

    /// A simulator with both parties registered and linked; endpoint 0 is
    /// `A`, endpoint 1 is `B`.
    pub fn simulator(&self, seed: u64) -> Result<Simulator> {
        let mut sim = Simulator::new(seed);
        let (xa, xb) = match &self.scalars {
            Some((x, y)) => (Some(x.clone()), Some(y.clone())),
            None => (None, None),
        };
        let a = sim.add_session(
            self.id_a.render(),
            self.id_a.base(),
            self.config_a(),
            &self.password_a,
            StartMode::Active,
            xa,
        )?;
        let b = sim.add_session(
            self.id_b.render(),
            self.id_b.base(),
            self.config_b(),
            &self.password_b,
            StartMode::Active,
            xb,
        )?;
        sim.link(a, b);
        Ok(sim)
    }
}

/// Result of an honest two-party run.
#[derive(Debug, Clone)]
pub struct HonestRun {
    pub a: SessionResult,
    pub b: SessionResult,
    pub trace: EventTrace,
    pub rounds: u32,
}

impl HonestRun {
    pub fn key_a(&self) -> Option<&Digest> {
        self.a.key.as_ref().map(SessionKey::bytes)
    }

    pub fn key_b(&self) -> Option<&Digest> {
        self.b.key.as_ref().map(SessionKey::bytes)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] Error),
    #[error("session failed: A {}, B {}", .0.a.phase, .0.b.phase)]
    Failed(Box<HonestRun>),
}

fn split_pair(res: SimResult) -> HonestRun {
    let mut it = res.sessions.into_iter();
    let a = it.next().expect("two sessions");
    let b = it.next().expect("two sessions");
    HonestRun {
        a,
        b,
        trace: res.trace,
        rounds: res.rounds,
    }
}

/// Runs `A` and `B` over an untouched channel. Succeeds iff both sessions
/// complete with equal keys.
pub fn run_honest_exchange<R: RngCore + ?Sized>(
    config: &ExchangeConfig,
    rng: &mut R,
) -> std::result::Result<HonestRun, RunError> {
    let res = config.simulator(rng.next_u64())?.run(&mut PassThrough)?;
    let run = split_pair(res);
    if run.a.completed() && run.b.completed() && run.a.key == run.b.key {
        Ok(run)
    } else {
        Err(RunError::Failed(Box::new(run)))
    }
}

/// Runs `A` and `B` with `adversary` in control of the channel.
pub fn run_with_adversary<R: RngCore + ?Sized>(
    config: &ExchangeConfig,
    adversary: &mut dyn Adversary,
    rng: &mut R,
) -> Result<SimResult> {
    config.simulator(rng.next_u64())?.run(adversary)
}

/// `element^z`, the operation every malleating adversary performs.
pub fn raise(element: &GroupElement, z: &Scalar) -> GroupElement {
    group::exp(element, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec;

    fn toy() -> Arc<GroupParams> {
        GroupParams::toy23()
    }

    #[test]
    fn honest_pspeke_toy() {
        let cfg = ExchangeConfig::new(Variant::PSpeke2017, toy(), b"password");
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let run = run_honest_exchange(&cfg, &mut rng).unwrap();
        assert_eq!(run.key_a(), run.key_b());
        assert_eq!((run.a.phase, run.b.phase), (Phase::Accepted, Phase::Accepted));
        assert_eq!(run.rounds, 2);
    }

    #[test]
    fn mismatched_passwords_abort_both() {
        for m in ConfirmationMethod::ALL.into_iter().filter(|m| m.is_explicit()) {
            let mut cfg = ExchangeConfig::new(Variant::PSpeke2017, toy(), b"password").with_confirm(m);
            cfg.password_b = b"wrong".to_vec();
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            let Err(RunError::Failed(run)) = run_honest_exchange(&cfg, &mut rng) else {
                panic!("{m}: mismatched passwords must fail");
            };
            assert!(run.a.phase.is_aborted() && run.b.phase.is_aborted(), "{m}");
            let mismatch = Phase::Aborted(AbortReason::ConfirmationMismatch);
            assert!(run.a.phase == mismatch || run.b.phase == mismatch, "{m}");
            if !m.is_ordered() {
                assert_eq!((run.a.phase, run.b.phase), (mismatch, mismatch), "{m}");
            }
        }
    }

    #[test]
    fn measured_rounds_match_round_count() {
        for v in Variant::ALL {
            for m in ConfirmationMethod::ALL {
                let cfg = ExchangeConfig::new(v, toy(), b"pw").with_confirm(m);
                let run = run_honest_exchange(&cfg, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
                assert_eq!(run.rounds, protocol::round_count(m), "{v} {m}");
            }
        }
    }

    #[test]
    fn drop_all_times_out() {
        let cfg = ExchangeConfig::new(Variant::Jablon96, toy(), b"pw");
        let res = run_with_adversary(&cfg, &mut DropAll, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        for s in &res.sessions {
            assert_eq!(s.phase, Phase::Aborted(AbortReason::Timeout));
            assert!(s.key.is_none());
        }
        assert_eq!(res.steps, 2);
    }

    #[test]
    fn budget_bounds_steps() {
        struct Echo;
        impl Adversary for Echo {
            fn on_message(&mut self, env: &Envelope, _: &PublicView<'_>) -> Vec<InterceptAction> {
                // bounce every message back to its sender's peer forever
                vec![InterceptAction::Drop, InterceptAction::Inject(env.from, env.msg.clone())]
            }
        }
        let cfg = ExchangeConfig::new(Variant::Jablon96, toy(), b"pw").with_confirm(ConfirmationMethod::None);
        let sim = cfg.simulator(5).unwrap().with_step_budget(3);
        let res = sim.run(&mut Echo).unwrap();
        assert!(res.steps <= 3);
    }

    #[test]
    fn trace_export_is_line_per_event() {
        let cfg = ExchangeConfig::new(Variant::Jablon96, toy(), b"pw").with_scalars(
            Scalar::from_u64(&toy(), 3).unwrap(),
            Scalar::from_u64(&toy(), 4).unwrap(),
        );
        let res = run_with_adversary(&cfg, &mut PassThrough, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        let text = res.trace.export();
        assert_eq!(text.lines().count(), res.trace.events().len());
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("event=SENT seq=0 from=\"Alice\" to=\"Bob\" round=1 kind=EXCHANGE"));
        // password 0x7077 squared mod 23 is the generator, 3 the exponent
        let g = group::derive_generator_original(b"pw", &toy()).unwrap();
        let x = group::exp(&g, &Scalar::from_u64(&toy(), 3).unwrap());
        assert!(first.ends_with(&format!("element={}", hex::encode(codec::encode_element(&x)))));
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let cfg = ExchangeConfig::new(Variant::Jablon96, toy(), b"");
        assert!(matches!(
            run_honest_exchange(&cfg, &mut ChaCha20Rng::seed_from_u64(0)),
            Err(RunError::Config(Error::EmptyPassword))
        ));
    }
}
