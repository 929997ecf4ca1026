//! C ABI for `speke-lab`.
//!
//! Handles are opaque heap objects released with their `*_free` function.
//! Every fallible call returns a [`SpekeStatus`]; on failure a message is
//! available from [`speke_last_error`] on the calling thread.
//!
//! Enum arguments are passed as `uint32_t` and validated, so a bad value from
//! C is an error instead of undefined behaviour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use speke_lab::attacks::{self, AttackConfig, ExpEquivalenceParams, PasswordClass, ZChoice};
use speke_lab::group::GroupParams;
use speke_lab::protocol::{self, ConfirmationMethod, Message, Phase, Role, SessionConfig, SessionState, Variant};
use speke_lab::simnet::wire;
use speke_lab::{DecodeError, Error};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownGroup = 3,
    DegenerateGenerator = 4,
    RangeCheckFailed = 5,
    PeerIdentityMismatch = 6,
    WrongPhase = 7,
    ConfirmationDisabled = 8,
    ConfirmationMismatch = 9,
    DecodeError = 10,
    BufferTooSmall = 11,
    InvalidExponent = 12,
    Internal = 255,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekeVariant {
    Jablon96 = 0,
    IeeeP1363_2 = 1,
    Iso11770_4_2006 = 2,
    Patch2014 = 3,
    PSpeke2017 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekeConfirm {
    None = 0,
    JablonDoubleHash = 1,
    TaggedHash34 = 2,
    SymmetricHash = 3,
    SymmetricMac = 4,
    /// The variant's own method.
    Preset = 255,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekeRole {
    Initiator = 0,
    Responder = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekePhase {
    Created = 0,
    Sent = 1,
    Keyed = 2,
    ConfirmSent = 3,
    Accepted = 4,
    Aborted = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpekeAttack {
    Impersonation = 0,
    Malleability = 1,
    SessionSwap = 2,
    ExpEquivalence = 3,
}

/// Opaque group parameters.
pub struct SpekeGroup {
    params: Arc<GroupParams>,
}

/// Opaque protocol session.
pub struct SpekeSession {
    state: SessionState,
}

/// Size of a key or key digest.
pub const SPEKE_KEY_LEN: usize = 32;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SpekeStatus {
    match err {
        Error::UnknownGroup(_) => SpekeStatus::UnknownGroup,
        Error::DegenerateGenerator => SpekeStatus::DegenerateGenerator,
        Error::RangeCheckFailed => SpekeStatus::RangeCheckFailed,
        Error::PeerIdentityMismatch { .. } => SpekeStatus::PeerIdentityMismatch,
        Error::WrongPhase(_) => SpekeStatus::WrongPhase,
        Error::ConfirmationDisabled => SpekeStatus::ConfirmationDisabled,
        Error::ConfirmationMismatch => SpekeStatus::ConfirmationMismatch,
        Error::Decode(_) => SpekeStatus::DecodeError,
        Error::InvalidExponent => SpekeStatus::InvalidExponent,
        _ => SpekeStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> SpekeStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> SpekeStatus) -> SpekeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SpekeStatus::Internal
        }
    }
}

fn variant_from(v: u32) -> Option<Variant> {
    Variant::ALL.get(v as usize).copied()
}

fn confirm_from(c: u32, variant: Variant) -> Option<ConfirmationMethod> {
    if c == SpekeConfirm::Preset as u32 {
        return Some(variant.preset_confirmation());
    }
    ConfirmationMethod::ALL.get(c as usize).copied()
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SpekeStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(SpekeStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SpekeStatus::InvalidArgument
    })
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize) -> Result<&'a [u8], SpekeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error("buffer is null");
        return Err(SpekeStatus::NullPointer);
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out(bytes: &[u8], out: *mut u8, cap: usize, out_len: *mut usize) -> SpekeStatus {
    if out_len.is_null() {
        set_error("out_len is null");
        return SpekeStatus::NullPointer;
    }
    *out_len = bytes.len();
    if bytes.is_empty() {
        return SpekeStatus::Ok;
    }
    if cap < bytes.len() {
        set_error(format!("buffer holds {cap} octets, need {}", bytes.len()));
        return SpekeStatus::BufferTooSmall;
    }
    if out.is_null() {
        set_error("output buffer is null");
        return SpekeStatus::NullPointer;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
    SpekeStatus::Ok
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Last error message on this thread, or null. Valid until the next call
/// into this library on the same thread.
#[no_mangle]
pub extern "C" fn speke_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn speke_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a built-in group (`"toy23"` or `"modp2048"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn speke_group_preset(name: *const c_char, out: *mut *mut SpekeGroup) -> SpekeStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return SpekeStatus::NullPointer;
        }
        let name = try_ffi!(str_arg(name, "name"));
        match GroupParams::preset(name) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(SpekeGroup { params }));
                SpekeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `group` must be null or a pointer from [`speke_group_preset`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn speke_group_free(group: *mut SpekeGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Octets per encoded element, or 0 for a null group.
///
/// # Safety
/// `group` must be null or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn speke_group_element_width(group: *const SpekeGroup) -> usize {
    group.as_ref().map_or(0, |g| g.params.element_width())
}

/// Total rounds for a confirmation method, or 0 if the value is invalid.
#[no_mangle]
pub extern "C" fn speke_round_count(confirm: u32) -> u32 {
    ConfirmationMethod::ALL
        .get(confirm as usize)
        .map_or(0, |&m| protocol::round_count(m))
}

/// Starts a session and writes its exchange message (wire payload, without
/// the length frame) to `msg_out`.
///
/// `variant`, `confirm` and `role` take [`SpekeVariant`], [`SpekeConfirm`]
/// and [`SpekeRole`] values. The ephemeral exponent is drawn from a ChaCha20
/// stream seeded with `seed`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn speke_session_new(
    group: *const SpekeGroup,
    variant: u32,
    confirm: u32,
    role: u32,
    self_id: *const c_char,
    peer_id: *const c_char,
    password: *const u8,
    password_len: usize,
    seed: u64,
    out: *mut *mut SpekeSession,
    msg_out: *mut u8,
    msg_cap: usize,
    msg_len: *mut usize,
) -> SpekeStatus {
    guard(|| {
        let Some(group) = group.as_ref() else {
            set_error("group is null");
            return SpekeStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return SpekeStatus::NullPointer;
        }
        let Some(variant) = variant_from(variant) else {
            set_error(format!("invalid variant {variant}"));
            return SpekeStatus::InvalidArgument;
        };
        let Some(confirm) = confirm_from(confirm, variant) else {
            set_error(format!("invalid confirmation method {confirm}"));
            return SpekeStatus::InvalidArgument;
        };
        let role = match role {
            0 => Role::Initiator,
            1 => Role::Responder,
            _ => {
                set_error(format!("invalid role {role}"));
                return SpekeStatus::InvalidArgument;
            }
        };
        let me = try_ffi!(str_arg(self_id, "self_id"));
        let peer = try_ffi!(str_arg(peer_id, "peer_id"));
        let pw = try_ffi!(bytes_arg(password, password_len));
        let cfg = SessionConfig::new(role, me, peer, variant, Arc::clone(&group.params)).with_confirm(confirm);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (state, msg) = match protocol::start_session(cfg, pw, &mut rng) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let payload = match wire::encode_message(&msg) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let status = write_out(&payload, msg_out, msg_cap, msg_len);
        if status != SpekeStatus::Ok {
            return status;
        }
        *out = Box::into_raw(Box::new(SpekeSession { state }));
        SpekeStatus::Ok
    })
}

/// Feeds one received wire payload to the session. If the session now owes
/// its peer a confirmation message, it is written to `reply` and
/// `*reply_len` is set; otherwise `*reply_len` is 0.
///
/// # Safety
/// `session` must be a live handle; buffers valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn speke_session_process(
    session: *mut SpekeSession,
    payload: *const u8,
    payload_len: usize,
    reply: *mut u8,
    reply_cap: usize,
    reply_len: *mut usize,
) -> SpekeStatus {
    guard(|| {
        let Some(session) = session.as_mut() else {
            set_error("session is null");
            return SpekeStatus::NullPointer;
        };
        if reply_len.is_null() {
            set_error("reply_len is null");
            return SpekeStatus::NullPointer;
        }
        *reply_len = 0;
        let bytes = try_ffi!(bytes_arg(payload, payload_len));
        let state = &mut session.state;
        let msg = match wire::decode_message(bytes, &state.config().params) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let applied = match msg {
            Message::Exchange { .. } => state.process_exchange(&msg),
            Message::Confirm { .. } => state.verify_confirmation(&msg),
        };
        if let Err(e) = applied {
            return fail(e);
        }
        if !state.can_confirm() {
            return SpekeStatus::Ok;
        }
        let tag = match state.make_confirmation().and_then(|m| wire::encode_message(&m)) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        write_out(&tag, reply, reply_cap, reply_len)
    })
}

/// Current phase; [`SpekePhase::Aborted`] for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn speke_session_phase(session: *const SpekeSession) -> SpekePhase {
    match session.as_ref().map(|s| s.state.phase()) {
        Some(Phase::Created) => SpekePhase::Created,
        Some(Phase::Sent) => SpekePhase::Sent,
        Some(Phase::Keyed) => SpekePhase::Keyed,
        Some(Phase::ConfirmSent) => SpekePhase::ConfirmSent,
        Some(Phase::Accepted) => SpekePhase::Accepted,
        Some(Phase::Aborted(_)) | None => SpekePhase::Aborted,
    }
}

/// Whether the session finished successfully: accepted, or keyed when the
/// method has no explicit confirmation.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn speke_session_is_complete(session: *const SpekeSession) -> bool {
    session.as_ref().is_some_and(|s| s.state.is_complete())
}

/// Copies the 32-octet session key into `out`.
///
/// # Safety
/// `out` must point to at least [`SPEKE_KEY_LEN`] writable octets.
#[no_mangle]
pub unsafe extern "C" fn speke_session_key(session: *const SpekeSession, out: *mut u8) -> SpekeStatus {
    key_bytes(session, out, false)
}

/// Copies `SHA-256(key)` into `out`, safe to log or compare.
///
/// # Safety
/// `out` must point to at least [`SPEKE_KEY_LEN`] writable octets.
#[no_mangle]
pub unsafe extern "C" fn speke_session_key_digest(session: *const SpekeSession, out: *mut u8) -> SpekeStatus {
    key_bytes(session, out, true)
}

unsafe fn key_bytes(session: *const SpekeSession, out: *mut u8, digest: bool) -> SpekeStatus {
    guard(|| {
        let Some(session) = session.as_ref() else {
            set_error("session is null");
            return SpekeStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return SpekeStatus::NullPointer;
        }
        let Some(key) = session.state.key() else {
            set_error(format!("no key in phase {}", session.state.phase()));
            return SpekeStatus::WrongPhase;
        };
        let bytes = if digest { key.fingerprint() } else { *key.bytes() };
        ptr::copy_nonoverlapping(bytes.as_bytes().as_ptr(), out, SPEKE_KEY_LEN);
        SpekeStatus::Ok
    })
}

/// # Safety
/// `session` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn speke_session_free(session: *mut SpekeSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Runs one attack scenario in the simulator and reports whether it
/// succeeded. `attack` takes a [`SpekeAttack`] value; exp-equivalence uses
/// password `0x05`, `r = 3` and a victim holding the base password.
///
/// # Safety
/// `group` must be a live handle and `success` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn speke_run_attack(
    group: *const SpekeGroup,
    attack: u32,
    variant: u32,
    confirm: u32,
    seed: u64,
    success: *mut bool,
) -> SpekeStatus {
    guard(|| {
        let Some(group) = group.as_ref() else {
            set_error("group is null");
            return SpekeStatus::NullPointer;
        };
        if success.is_null() {
            set_error("success is null");
            return SpekeStatus::NullPointer;
        }
        let Some(variant) = variant_from(variant) else {
            set_error(format!("invalid variant {variant}"));
            return SpekeStatus::InvalidArgument;
        };
        let Some(confirm) = confirm_from(confirm, variant) else {
            set_error(format!("invalid confirmation method {confirm}"));
            return SpekeStatus::InvalidArgument;
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cfg = AttackConfig::new(variant, Arc::clone(&group.params)).with_confirm(confirm);
        let outcome = match attack {
            0 => attacks::impersonation_attack(&cfg, ZChoice::Adaptive, &mut rng),
            1 => attacks::malleability_attack(&cfg, None, &mut rng),
            2 => attacks::session_swap_attack(&cfg, &mut rng),
            3 => {
                let probe = ExpEquivalenceParams {
                    s: vec![5],
                    r: 3u32.into(),
                    victim_holds: PasswordClass::Base,
                    scalars: None,
                };
                attacks::exp_equivalence_attack(variant, confirm, &group.params, &probe, &mut rng)
            }
            _ => {
                set_error(format!("invalid attack {attack}"));
                return SpekeStatus::InvalidArgument;
            }
        };
        match outcome {
            Ok(o) => {
                *success = o.success;
                SpekeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Renders the security matrix as text. Free the result with
/// [`speke_string_free`].
///
/// # Safety
/// `group` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn speke_security_matrix(group: *const SpekeGroup, seed: u64, out: *mut *mut c_char) -> SpekeStatus {
    guard(|| {
        let Some(group) = group.as_ref() else {
            set_error("group is null");
            return SpekeStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out is null");
            return SpekeStatus::NullPointer;
        }
        match attacks::security_matrix(&group.params, seed) {
            Ok(m) => match CString::new(m.to_text()) {
                Ok(s) => {
                    *out = s.into_raw();
                    SpekeStatus::Ok
                }
                Err(_) => fail(Error::Decode(DecodeError::InvalidUtf8)),
            },
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn speke_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
