//! Safe-prime groups, password-derived generators and element validation.
//!
//! Every arithmetic value lives in the multiplicative group modulo a safe
//! prime `p = 2q + 1`; the protocol itself runs in the order-`q` subgroup of
//! quadratic residues, which is where squaring a password lands.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use once_cell::sync::Lazy;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::codec;
use crate::error::{Error, Result};

/// Miller-Rabin rounds with random bases: error probability at most 4^-40.
const MILLER_RABIN_ROUNDS: usize = 40;

const MODP2048_HEX: &str = "\
    ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74\
    020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f1437\
    4fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7ed\
    ee386bfb5a899fa5ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf05\
    98da48361c55d39a69163fa8fd24cf5f83655d23dca3ad961c62f356208552bb\
    9ed529077096966d670c354e4abc9804f1746c08ca18217c32905e462e36ce3b\
    e39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf695581718\
    3995497cea956ae515d2261898fa051015728e5a8aacaa68ffffffffffffffff";

/// Identifiers accepted by [`GroupParams::preset`].
pub const PRESET_IDS: [&str; 2] = ["toy23", "modp2048"];

static TOY23: Lazy<Arc<GroupParams>> = Lazy::new(|| {
    GroupParams::named(BigUint::from(23u32), BigUint::from(11u32), "toy23")
        .expect("toy23 is a safe prime")
});

static MODP2048: Lazy<Arc<GroupParams>> = Lazy::new(|| {
    let p = BigUint::parse_bytes(MODP2048_HEX.as_bytes(), 16).expect("valid hex");
    let q = (&p - 1u32) >> 1;
    GroupParams::named(p, q, "modp2048").expect("RFC 3526 group 14 is a safe prime")
});

/// A validated safe-prime group `(p, q)` with `p = 2q + 1`.
#[derive(Clone)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    element_width: usize,
    name: Option<&'static str>,
}

impl GroupParams {
    /// Validates `p = 2q + 1` and probabilistic primality of both values.
    pub fn new(p: BigUint, q: BigUint) -> Result<Arc<Self>> {
        Self::validate(p, q, None)
    }

    /// Bundled constants: structure is checked, primality is covered by tests.
    fn named(p: BigUint, q: BigUint, name: &'static str) -> Result<Arc<Self>> {
        Self::check_shape(&p, &q)?;
        Ok(Self::build(p, q, Some(name)))
    }

    fn check_shape(p: &BigUint, q: &BigUint) -> Result<()> {
        let three = BigUint::from(3u32);
        if *p <= three || *q <= three {
            return Err(Error::ParameterTooSmall);
        }
        if *p != (q << 1) + 1u32 {
            return Err(Error::NotSafePrime);
        }
        Ok(())
    }

    fn build(p: BigUint, q: BigUint, name: Option<&'static str>) -> Arc<Self> {
        let element_width = (p.bits() as usize).div_ceil(8);
        Arc::new(GroupParams {
            p,
            q,
            element_width,
            name,
        })
    }

    fn validate(p: BigUint, q: BigUint, name: Option<&'static str>) -> Result<Arc<Self>> {
        Self::check_shape(&p, &q)?;
        if !is_probable_prime(&q, MILLER_RABIN_ROUNDS) {
            return Err(Error::NotPrime("q"));
        }
        if !is_probable_prime(&p, MILLER_RABIN_ROUNDS) {
            return Err(Error::NotPrime("p"));
        }
        Ok(Self::build(p, q, name))
    }

    /// Looks up a built-in group by its string ID.
    pub fn preset(id: &str) -> Result<Arc<Self>> {
        match id {
            "toy23" => Ok(Self::toy23()),
            "modp2048" => Ok(Self::modp2048()),
            other => Err(Error::UnknownGroup(other.to_string())),
        }
    }

    /// The 1-octet group `p = 23, q = 11`, small enough for exhaustive checks.
    pub fn toy23() -> Arc<Self> {
        Arc::clone(&TOY23)
    }

    /// The 2048-bit MODP group 14 from RFC 3526.
    pub fn modp2048() -> Arc<Self> {
        Arc::clone(&MODP2048)
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// Octet width of a canonical element encoding.
    pub fn element_width(&self) -> usize {
        self.element_width
    }

    /// Preset ID, if the group came from [`GroupParams::preset`].
    pub fn name(&self) -> Option<&'static str> {
        self.name
    }
}

impl PartialEq for GroupParams {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl Eq for GroupParams {}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name {
            Some(name) => write!(f, "GroupParams({name})"),
            None => write!(f, "GroupParams(p={:x}, q={:x})", self.p, self.q),
        }
    }
}

/// An integer in `[0, p)` tied to its group.
#[derive(Clone)]
pub struct GroupElement {
    value: BigUint,
    params: Arc<GroupParams>,
}

impl GroupElement {
    pub fn new(params: &Arc<GroupParams>, value: BigUint) -> Result<Self> {
        if value >= params.p {
            return Err(Error::Decode(crate::error::DecodeError::ElementOutOfRange));
        }
        Ok(GroupElement {
            value,
            params: Arc::clone(params),
        })
    }

    pub fn from_u64(params: &Arc<GroupParams>, value: u64) -> Result<Self> {
        Self::new(params, BigUint::from(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    /// `self^q == 1`, i.e. membership in the prime-order subgroup.
    pub fn is_subgroup_member(&self) -> bool {
        !self.value.is_zero() && self.value.modpow(&self.params.q, &self.params.p).is_one()
    }

    pub fn pow(&self, e: &Scalar) -> GroupElement {
        exp(self, e)
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.params == other.params
    }
}

impl Eq for GroupElement {}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Numeric order, which equals the lexicographic order of the fixed-width
/// encodings.
impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value)
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({self})")
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(codec::encode_element(self)))
    }
}

/// An exponent in `[1, q-1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar {
    value: BigUint,
}

impl Scalar {
    pub fn new(params: &GroupParams, value: BigUint) -> Result<Self> {
        if value.is_zero() || value >= params.q {
            return Err(Error::ScalarOutOfRange);
        }
        Ok(Scalar { value })
    }

    pub fn from_u64(params: &GroupParams, value: u64) -> Result<Self> {
        Self::new(params, BigUint::from(value))
    }

    /// Reduces an arbitrary integer modulo `q`; fails when the result is 0.
    pub fn reduce(params: &GroupParams, value: &BigUint) -> Result<Self> {
        Self::new(params, value.mod_floor(&params.q))
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Product modulo `q`.
    pub fn mul(&self, other: &Scalar, params: &GroupParams) -> Scalar {
        Scalar {
            value: (&self.value * &other.value).mod_floor(&params.q),
        }
    }

    /// Multiplicative inverse modulo the prime `q`.
    pub fn invert(&self, params: &GroupParams) -> Scalar {
        let e = &params.q - 2u32;
        Scalar {
            value: self.value.modpow(&e, &params.q),
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Scalar(..)")
    }
}

/// Validates `(p, q)` as a safe-prime group.
pub fn validate_group(p: BigUint, q: BigUint) -> Result<Arc<GroupParams>> {
    GroupParams::new(p, q)
}

fn degenerate_check(params: &Arc<GroupParams>, value: BigUint) -> Result<GroupElement> {
    if value.is_zero() || value.is_one() {
        return Err(Error::DegenerateGenerator);
    }
    GroupElement::new(params, value)
}

/// `g = s^2 mod p`, reading the password octets as a big-endian integer.
pub fn derive_generator_original(password: &[u8], params: &Arc<GroupParams>) -> Result<GroupElement> {
    let s = BigUint::from_bytes_be(password).mod_floor(&params.p);
    degenerate_check(params, s.modpow(&BigUint::from(2u32), &params.p))
}

/// `g = H(s)^2 mod p`.
pub fn derive_generator_hashed(password: &[u8], params: &Arc<GroupParams>) -> Result<GroupElement> {
    let digest = codec::hash(password);
    let h = BigUint::from_bytes_be(digest.as_bytes()).mod_floor(&params.p);
    degenerate_check(params, h.modpow(&BigUint::from(2u32), &params.p))
}

/// True iff `2 <= X <= p - 2`.
pub fn validate_element_range(x: &GroupElement) -> bool {
    let two = BigUint::from(2u32);
    x.value >= two && x.value <= &x.params.p - 2u32
}

/// Modular exponentiation by a Montgomery ladder.
///
/// The ladder performs one multiplication and one squaring per bit of `q`,
/// independent of the exponent's bit pattern and leading zeros.
pub fn exp(base: &GroupElement, e: &Scalar) -> GroupElement {
    let p = &base.params.p;
    let width = base.params.q.bits().max(e.value.bits());
    let mut r0 = BigUint::one();
    let mut r1 = base.value.clone();
    for i in (0..width).rev() {
        let bit = e.value.bit(i);
        if bit {
            std::mem::swap(&mut r0, &mut r1);
        }
        r1 = (&r0 * &r1) % p;
        r0 = (&r0 * &r0) % p;
        if bit {
            std::mem::swap(&mut r0, &mut r1);
        }
    }
    GroupElement {
        value: r0,
        params: Arc::clone(&base.params),
    }
}

/// Uniform draw from `{1, ..., q-1}` by rejection sampling.
pub fn sample_scalar<R: RngCore + ?Sized>(rng: &mut R, params: &GroupParams) -> Scalar {
    let bits = params.q.bits() as usize;
    let len = bits.div_ceil(8);
    let top_mask = match bits % 8 {
        0 => 0xff,
        r => (1u8 << r) - 1,
    };
    let mut buf = vec![0u8; len];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= top_mask;
        let v = BigUint::from_bytes_be(&buf);
        if !v.is_zero() && v < params.q {
            return Scalar { value: v };
        }
    }
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller-Rabin with `rounds` random bases drawn from a fixed-seed stream,
/// so the verdict for a given input is reproducible.
pub fn is_probable_prime(n: &BigUint, rounds: usize) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for sp in SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_5eed);
    let len = (n.bits() as usize).div_ceil(8);
    let mut buf = vec![0u8; len];
    let span = n - 3u32;
    'witness: for _ in 0..rounds {
        rng.fill_bytes(&mut buf);
        // base in [2, n-2]
        let a = BigUint::from_bytes_be(&buf) % &span + 2u32;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Arc<GroupParams> {
        GroupParams::toy23()
    }

    fn el(v: u64) -> GroupElement {
        GroupElement::from_u64(&toy(), v).unwrap()
    }

    fn sc(v: u64) -> Scalar {
        Scalar::from_u64(&toy(), v).unwrap()
    }

    /// Square-and-multiply with no ladder structure.
    fn naive_pow(base: u64, e: u64, p: u64) -> u64 {
        let mut acc = 1u64;
        for _ in 0..e {
            acc = acc * base % p;
        }
        acc
    }

    #[test]
    fn validate_toy_group() {
        let g = validate_group(23u32.into(), 11u32.into()).unwrap();
        assert_eq!(g.p(), &BigUint::from(23u32));
        assert_eq!(g.q(), &BigUint::from(11u32));
        assert_eq!(g.element_width(), 1);
    }

    #[test]
    fn validate_rejects_bad_relation() {
        assert_eq!(validate_group(13u32.into(), 5u32.into()), Err(Error::NotSafePrime));
    }

    #[test]
    fn validate_rejects_composites() {
        // 2*9+1 = 19 is prime but 9 is not
        assert_eq!(validate_group(19u32.into(), 9u32.into()), Err(Error::NotPrime("q")));
        // 2*13+1 = 27 = 3^3
        assert_eq!(validate_group(27u32.into(), 13u32.into()), Err(Error::NotPrime("p")));
        assert_eq!(validate_group(3u32.into(), 1u32.into()), Err(Error::ParameterTooSmall));
    }

    #[test]
    fn modp2048_validates() {
        let g = GroupParams::modp2048();
        assert_eq!(g.p().bits(), 2048);
        assert_eq!(g.element_width(), 256);
        let again = validate_group(g.p().clone(), g.q().clone()).unwrap();
        assert_eq!(*again, *g);
        let t = GroupParams::toy23();
        assert_eq!(*validate_group(t.p().clone(), t.q().clone()).unwrap(), *t);
    }

    #[test]
    fn presets_by_id() {
        assert_eq!(GroupParams::preset("toy23").unwrap().name(), Some("toy23"));
        assert!(matches!(GroupParams::preset("modp1024"), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn primality_on_known_values() {
        let primes = [2u64, 3, 5, 101, 7919, 1_000_000_007, 2_305_843_009_213_693_951];
        for p in primes {
            assert!(is_probable_prime(&BigUint::from(p), 20), "{p}");
        }
        // Carmichael numbers and a square of a prime
        for c in [561u64, 1105, 1729, 41041, 825265, 1_000_000_007u64 * 3] {
            assert!(!is_probable_prime(&BigUint::from(c), 20), "{c}");
        }
    }

    #[test]
    fn original_generator_examples() {
        assert_eq!(derive_generator_original(&[5], &toy()).unwrap(), el(2));
        assert_eq!(derive_generator_original(&[1], &toy()), Err(Error::DegenerateGenerator));
        assert_eq!(derive_generator_original(&[22], &toy()), Err(Error::DegenerateGenerator));
        assert_eq!(derive_generator_original(&[23], &toy()), Err(Error::DegenerateGenerator));
    }

    #[test]
    fn original_generator_lands_in_subgroup() {
        for s in 2u8..=21 {
            let g = derive_generator_original(&[s], &toy()).unwrap();
            assert!(g.is_subgroup_member(), "s={s}");
            assert_eq!(naive_pow(g.value().try_into().unwrap(), 11, 23), 1);
        }
    }

    #[test]
    fn hashed_generator_examples() {
        // (int(SHA-256("password")) mod 23)^2 mod 23, computed with a reference hash
        assert_eq!(derive_generator_hashed(b"password", &toy()).unwrap(), el(9));
        // digest of the single octet 0x13 is 1 mod 23, of 0x24 is 22 mod 23
        assert_eq!(derive_generator_hashed(&[0x13], &toy()), Err(Error::DegenerateGenerator));
        assert_eq!(derive_generator_hashed(&[0x24], &toy()), Err(Error::DegenerateGenerator));
        // and 0x06 is 0 mod 23
        assert_eq!(derive_generator_hashed(&[0x06], &toy()), Err(Error::DegenerateGenerator));
    }

    #[test]
    fn hashing_breaks_exponential_relation() {
        let params = toy();
        let mut unrelated = 0;
        for s in 2u64..=21 {
            for r in 2u64..=10 {
                let sp = naive_pow(s, r, 23);
                let (Ok(gs), Ok(gsp)) = (
                    derive_generator_hashed(&[s as u8], &params),
                    derive_generator_hashed(&[sp as u8], &params),
                ) else {
                    continue;
                };
                if gsp != gs.pow(&sc(r)) {
                    unrelated += 1;
                }
                // the unhashed mapping always preserves the relation
                let os = derive_generator_original(&[s as u8], &params).unwrap();
                let osp = derive_generator_original(&[sp as u8], &params).unwrap();
                assert_eq!(osp, os.pow(&sc(r)));
            }
        }
        assert!(unrelated > 0);
    }

    #[test]
    fn range_predicate_exhaustive() {
        for v in 0u64..23 {
            let expected = (2..=21).contains(&v);
            assert_eq!(validate_element_range(&el(v)), expected, "v={v}");
        }
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp(&el(2), &sc(3)), el(8));
        assert_eq!(exp(&el(2), &Scalar { value: 11u32.into() }), el(1));
        assert_eq!(exp(&el(2), &Scalar { value: 12u32.into() }), el(2));
    }

    #[test]
    fn exp_matches_naive_oracle_exhaustively() {
        for b in 0u64..23 {
            for e in 1u64..11 {
                assert_eq!(exp(&el(b), &sc(e)).value(), &BigUint::from(naive_pow(b, e, 23)));
            }
        }
    }

    #[test]
    fn exp_commutes_exhaustively() {
        let g = el(2);
        for x in 1u64..11 {
            for y in 1u64..11 {
                assert_eq!(g.pow(&sc(x)).pow(&sc(y)), g.pow(&sc(y)).pow(&sc(x)));
            }
        }
    }

    #[test]
    fn exp_agrees_with_modpow_in_large_group() {
        let params = GroupParams::modp2048();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let base = GroupElement::from_u64(&params, 4).unwrap();
        for _ in 0..3 {
            let e = sample_scalar(&mut rng, &params);
            assert_eq!(exp(&base, &e).value(), &base.value().modpow(e.value(), params.p()));
        }
    }

    #[test]
    fn scalar_bounds() {
        assert_eq!(Scalar::from_u64(&toy(), 0), Err(Error::ScalarOutOfRange));
        assert_eq!(Scalar::from_u64(&toy(), 11), Err(Error::ScalarOutOfRange));
        assert!(Scalar::from_u64(&toy(), 10).is_ok());
        let three = sc(3);
        assert_eq!(three.mul(&three.invert(&toy()), &toy()), sc(1));
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let params = toy();
        let a = sample_scalar(&mut ChaCha20Rng::seed_from_u64(42), &params);
        let b = sample_scalar(&mut ChaCha20Rng::seed_from_u64(42), &params);
        assert_eq!(a, b);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v = sample_scalar(&mut rng, &params);
            assert!(v.value() >= &BigUint::one() && v.value() < params.q());
        }
    }

    #[test]
    fn sampling_is_uniform() {
        let params = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let draws = 100_000u32;
        let mut counts = [0u32; 10];
        for _ in 0..draws {
            let v: u64 = sample_scalar(&mut rng, &params).value().try_into().unwrap();
            counts[(v - 1) as usize] += 1;
        }
        let n = f64::from(draws);
        let prob = 0.1;
        let mean = n * prob;
        let sigma = (n * prob * (1.0 - prob)).sqrt();
        let mut chi2 = 0.0;
        for c in counts {
            let c = f64::from(c);
            assert!((c - mean).abs() < 5.0 * sigma, "count {c} vs mean {mean}");
            chi2 += (c - mean).powi(2) / mean;
        }
        // chi-squared, 9 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }
}
