use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use speke_lab::attacks::{
    self, expected_success, AttackConfig, AttackKind, PasswordClass, ZChoice, IMP_SESSION_1, IMP_SESSION_2,
};
use speke_lab::codec;
use speke_lab::group::{self, GroupParams, Scalar};
use speke_lab::protocol::{AbortReason, ConfirmationMethod, Message, MessageKind, Phase, Variant};
use speke_lab::simnet::{
    run_with_adversary, wire, Adversary, Envelope, Event, ExchangeConfig, InterceptAction, PublicView,
};

fn toy() -> Arc<GroupParams> {
    GroupParams::toy23()
}

fn sc(v: u64) -> Scalar {
    Scalar::from_u64(&toy(), v).unwrap()
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `(event name, endpoint label, message kind)` for every emission.
fn emissions(trace: &speke_lab::simnet::EventTrace) -> Vec<(&'static str, String, MessageKind)> {
    trace
        .emissions()
        .map(|e| match e {
            Event::Sent { from, msg, .. } => ("SENT", from.clone(), msg.kind()),
            Event::Injected { to, msg, .. } => ("INJECTED", to.clone(), msg.kind()),
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn impersonation_follows_the_eight_message_script() {
    let cfg = AttackConfig::new(Variant::Jablon96, toy()).with_scalars(sc(3), sc(4));
    let out = attacks::impersonation_attack(&cfg, ZChoice::Fixed(sc(2)), &mut rng(0)).unwrap();
    assert!(out.success, "{}", out.report());
    use MessageKind::{Confirm, Exchange};
    let want = [
        ("SENT", IMP_SESSION_1, Exchange),
        ("INJECTED", IMP_SESSION_2, Exchange),
        ("SENT", IMP_SESSION_2, Exchange),
        ("INJECTED", IMP_SESSION_1, Exchange),
        ("SENT", IMP_SESSION_1, Confirm),
        ("INJECTED", IMP_SESSION_2, Confirm),
        ("SENT", IMP_SESSION_2, Confirm),
        ("INJECTED", IMP_SESSION_1, Confirm),
    ];
    let got = emissions(&out.trace);
    assert_eq!(got.len(), 8);
    for (g, w) in got.iter().zip(want) {
        assert_eq!((g.0, g.1.as_str(), g.2), w);
    }
    // injected exchange elements are the victim's raised to z
    let elems: Vec<_> = out
        .trace
        .emissions()
        .filter_map(|e| match e {
            Event::Sent { msg: Message::Exchange { element, .. }, .. }
            | Event::Injected { msg: Message::Exchange { element, .. }, .. } => Some(element.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(elems[1], group::exp(&elems[0], &sc(2)));
    assert_eq!(elems[3], group::exp(&elems[2], &sc(2)));
}

#[test]
fn reflection_defeated_by_duplicate_detection() {
    for v in Variant::ALL {
        let cfg = AttackConfig::new(v, toy()).with_duplicate_detection(true);
        let out = attacks::impersonation_attack(&cfg, ZChoice::Fixed(sc(1)), &mut rng(4)).unwrap();
        assert!(!out.success, "{v}");
        assert_eq!(
            out.session(IMP_SESSION_2).unwrap().phase,
            Phase::Aborted(AbortReason::DuplicateMessage),
            "{v}"
        );
    }
}

// In toy23 a random z maps X onto Alice's own Y about one time in ten, which
// duplicate detection rightly flags; the full-size group has no such collisions.
#[test]
fn random_z_survives_duplicate_detection() {
    let params = GroupParams::modp2048();
    for v in Variant::ALL {
        for m in ConfirmationMethod::ALL {
            let cfg = AttackConfig::new(v, Arc::clone(&params)).with_confirm(m).with_duplicate_detection(true);
            let out = attacks::impersonation_attack(&cfg, ZChoice::Adaptive, &mut rng(7)).unwrap();
            let want = expected_success(AttackKind::Impersonation, v, m, true, PasswordClass::Base);
            assert_eq!(out.success, want, "{v}/{m}\n{}", out.report());
        }
    }
}

#[test]
fn outcomes_agree_with_expected_success_everywhere() {
    for v in Variant::ALL {
        for m in ConfirmationMethod::ALL {
            let cfg = AttackConfig::new(v, toy()).with_confirm(m);
            let want = |k| expected_success(k, v, m, false, PasswordClass::Base);
            for seed in 0..4 {
                let imp = attacks::impersonation_attack(&cfg, ZChoice::Adaptive, &mut rng(seed)).unwrap();
                assert_eq!(imp.success, want(AttackKind::Impersonation), "imp {v}/{m} seed {seed}");
                let mal = attacks::malleability_attack(&cfg, None, &mut rng(seed)).unwrap();
                assert_eq!(mal.success, want(AttackKind::Malleability), "mal {v}/{m} seed {seed}");
                let ss = attacks::session_swap_attack(&cfg, &mut rng(seed)).unwrap();
                assert_eq!(ss.success, want(AttackKind::SessionSwap), "ss {v}/{m} seed {seed}");
            }
        }
    }
}

#[test]
fn malleability_rejects_trivial_exponents() {
    let cfg = AttackConfig::new(Variant::Jablon96, toy()).with_confirm(ConfirmationMethod::None);
    for z in [1, 10] {
        assert!(attacks::malleability_attack(&cfg, Some(sc(z)), &mut rng(0)).is_err(), "z={z}");
    }
}

#[test]
fn tagged_detection_aborts_initiator_by_timeout() {
    let cfg = AttackConfig::new(Variant::IeeeP1363_2, toy());
    let out = attacks::malleability_attack(&cfg, Some(sc(3)), &mut rng(2)).unwrap();
    assert!(out.detected);
    assert_eq!(out.session("Bob").unwrap().phase, Phase::Aborted(AbortReason::ConfirmationMismatch));
    assert_eq!(out.session("Alice").unwrap().phase, Phase::Aborted(AbortReason::Timeout));
}

/// Records everything the adversary is shown.
#[derive(Default)]
struct Recorder {
    wire: Vec<u8>,
    text: String,
}

impl Adversary for Recorder {
    fn on_message(&mut self, env: &Envelope, view: &PublicView<'_>) -> Vec<InterceptAction> {
        self.wire.extend(wire::encode_message(&env.msg).unwrap());
        self.text.push_str(&format!("{env:?}{view:?}"));
        vec![InterceptAction::Forward]
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

#[test]
fn adversary_never_sees_secrets() {
    let params = GroupParams::modp2048();
    let pw = b"correct horse battery";
    for v in Variant::ALL {
        let mut r = rng(11);
        let x = group::sample_scalar(&mut r, &params);
        let y = group::sample_scalar(&mut r, &params);
        let cfg = ExchangeConfig::new(v, Arc::clone(&params), pw).with_scalars(x.clone(), y.clone());
        let mut rec = Recorder::default();
        let res = run_with_adversary(&cfg, &mut rec, &mut r).unwrap();
        let g = v.derive_generator(pw, &params).unwrap();
        let shared = group::exp(&group::exp(&g, &x), &y);
        let key = res.sessions[0].key.as_ref().unwrap();
        let secrets: Vec<(&str, Vec<u8>)> = vec![
            ("password", pw.to_vec()),
            ("generator", codec::encode_element(&g)),
            ("x", x.value().to_bytes_be()),
            ("y", y.value().to_bytes_be()),
            ("shared", codec::encode_element(&shared)),
            ("key", key.bytes().as_bytes().to_vec()),
        ];
        let text = rec.text.to_ascii_lowercase();
        for (name, bytes) in secrets {
            assert!(!contains(&rec.wire, &bytes), "{v}: {name} on the wire");
            assert!(!text.contains(&hex::encode(&bytes)), "{v}: {name} in the view");
        }
        assert!(!text.contains("correct horse"), "{v}");
    }
}
