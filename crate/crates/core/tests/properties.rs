use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use speke_lab::attacks::{self, AttackConfig, ZChoice};
use speke_lab::codec;
use speke_lab::group::{self, GroupElement, GroupParams, Scalar};
use speke_lab::protocol::{ConfirmationMethod, Message, Variant};
use speke_lab::simnet::{run_honest_exchange, wire, ExchangeConfig};

fn toy() -> Arc<GroupParams> {
    GroupParams::toy23()
}

proptest! {
    #[test]
    fn element_codec_round_trips(v in 0u64..23) {
        let params = toy();
        let x = GroupElement::from_u64(&params, v).unwrap();
        let enc = codec::encode_element(&x);
        prop_assert_eq!(enc.len(), params.element_width());
        prop_assert_eq!(codec::decode_element(&enc, &params).unwrap(), x);
    }

    #[test]
    fn large_element_codec_round_trips(bytes in proptest::collection::vec(any::<u8>(), 1..256)) {
        let params = GroupParams::modp2048();
        let x = GroupElement::new(&params, BigUint::from_bytes_be(&bytes)).unwrap();
        let enc = codec::encode_element(&x);
        prop_assert_eq!(enc.len(), 256);
        prop_assert_eq!(codec::decode_element(&enc, &params).unwrap(), x);
    }

    #[test]
    fn wire_decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = wire::decode_message(&bytes, &toy());
        let _ = wire::decode_message(&bytes, &GroupParams::modp2048());
    }

    #[test]
    fn wire_round_trips(sender in "[A-Za-z0-9 ()]{1,24}", v in 0u64..23, tag in any::<[u8; 32]>()) {
        let params = toy();
        for msg in [
            Message::Exchange { sender: sender.clone(), element: GroupElement::from_u64(&params, v).unwrap() },
            Message::Confirm { tag: codec::Digest::from_slice(&tag).unwrap() },
        ] {
            let enc = wire::encode_message(&msg).unwrap();
            prop_assert_eq!(wire::decode_message(&enc, &params).unwrap(), msg);
        }
    }

    #[test]
    fn exponents_compose(b in 2u64..22, e1 in 1u64..11, e2 in 1u64..11) {
        let params = toy();
        let base = GroupElement::from_u64(&params, b).unwrap();
        let (s1, s2) = (Scalar::from_u64(&params, e1).unwrap(), Scalar::from_u64(&params, e2).unwrap());
        let lhs = group::exp(&group::exp(&base, &s1), &s2);
        let rhs = group::exp(&group::exp(&base, &s2), &s1);
        prop_assert_eq!(&lhs, &rhs);
        // squares live in the order-q subgroup
        let g = group::exp(&base, &Scalar::from_u64(&params, 2).unwrap());
        prop_assert_eq!(group::exp(&group::exp(&g, &s1), &s2), group::exp(&g, &s1.mul(&s2, &params)));
    }

    #[test]
    fn honest_runs_agree(v in 0usize..5, m in 0usize..5, seed in any::<u64>(), pw in "[a-z]{3,12}") {
        let params = toy();
        let variant = Variant::ALL[v];
        prop_assume!(variant.derive_generator(pw.as_bytes(), &params).is_ok());
        let cfg = ExchangeConfig::new(variant, params, pw.as_bytes()).with_confirm(ConfirmationMethod::ALL[m]);
        let run = run_honest_exchange(&cfg, &mut ChaCha20Rng::seed_from_u64(seed));
        prop_assert!(run.is_ok(), "{:?}", run.err());
    }

    #[test]
    fn different_passwords_never_accept(v in 0usize..5, seed in any::<u64>()) {
        let params = toy();
        let variant = Variant::ALL[v];
        let mut cfg = ExchangeConfig::new(variant, params, b"correct horse");
        cfg.password_b = b"wrong".to_vec();
        prop_assume!(variant.derive_generator(b"correct horse", &cfg.params) != variant.derive_generator(b"wrong", &cfg.params));
        prop_assert!(run_honest_exchange(&cfg, &mut ChaCha20Rng::seed_from_u64(seed)).is_err());
    }
}

#[test]
fn traces_are_deterministic_per_seed() {
    for v in Variant::ALL {
        let cfg = AttackConfig::new(v, toy());
        let once = |seed| {
            attacks::impersonation_attack(&cfg, ZChoice::Adaptive, &mut ChaCha20Rng::seed_from_u64(seed))
                .unwrap()
                .trace
                .export()
        };
        assert_eq!(once(5), once(5), "{v}");
        let honest = |seed| {
            let cfg = ExchangeConfig::new(v, toy(), b"pw");
            run_honest_exchange(&cfg, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap().trace.export()
        };
        assert_eq!(honest(1), honest(1), "{v}");
    }
}
