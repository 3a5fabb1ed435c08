//! Prime-order group abstraction and the counted operations the protocols
//! are built from.
//!
//! Every random-point multiplication, fixed-base multiplication and hash
//! goes through a [`Group`] handle, which tallies them into its own
//! [`OpCounters`]. Point additions are free and uncounted.
//!
//! Encodings: points are 33-byte SEC1 compressed (identity = 33 zero bytes),
//! scalars are 32-byte big-endian, for both shipped backends.

mod backend;
mod counters;
mod fixed_base;

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use blake2::Blake2s256;
use ff::{Field, PrimeField};
use group::{Group as _, GroupEncoding};
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

pub use backend::{Backend, BackendKind, Secp256k1, P256};
pub use counters::OpCounters;
pub use fixed_base::{FixedBaseTable, DEFAULT_WINDOW_BITS};

use crate::error::{Error, Result};
use counters::AtomicCounters;

/// Exponent in `[0, n)`.
pub struct Scalar<B: Backend = Secp256k1>(pub(crate) B::Scalar);

/// Group element, including the identity.
pub struct Point<B: Backend = Secp256k1>(pub(crate) B::Point);

impl<B: Backend> Clone for Scalar<B> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<B: Backend> Copy for Scalar<B> {}
impl<B: Backend> PartialEq for Scalar<B> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl<B: Backend> Eq for Scalar<B> {}

impl<B: Backend> Clone for Point<B> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<B: Backend> Copy for Point<B> {}
impl<B: Backend> PartialEq for Point<B> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl<B: Backend> Eq for Point<B> {}

impl<B: Backend> Scalar<B> {
    pub fn zero() -> Self {
        Scalar(B::Scalar::ZERO)
    }

    pub fn one() -> Self {
        Scalar(B::Scalar::ONE)
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(B::Scalar::from(v))
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }

    /// Uniform scalar in `[1, n)` by rejection sampling.
    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Result<Self> {
        loop {
            let mut repr = <B::Scalar as PrimeField>::Repr::default();
            rng.try_fill_bytes(repr.as_mut())
                .map_err(|e| Error::Entropy(e.to_string()))?;
            if let Some(s) = Option::<B::Scalar>::from(B::Scalar::from_repr(repr)) {
                if !bool::from(s.is_zero()) {
                    return Ok(Scalar(s));
                }
            }
        }
    }

    pub fn to_bytes(&self) -> <B::Scalar as PrimeField>::Repr {
        self.0.to_repr()
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.to_bytes().as_ref().to_vec()
    }

    /// Canonical big-endian decoding; rejects values `>= n`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != B::SCALAR_LEN {
            return Err(Error::InvalidScalar);
        }
        let mut repr = <B::Scalar as PrimeField>::Repr::default();
        repr.as_mut().copy_from_slice(bytes);
        Option::<B::Scalar>::from(B::Scalar::from_repr(repr))
            .map(Scalar)
            .ok_or(Error::InvalidScalar)
    }
}

impl<B: Backend> Add for Scalar<B> {
    type Output = Scalar<B>;
    fn add(self, rhs: Self) -> Self {
        Scalar(self.0 + rhs.0)
    }
}

impl<B: Backend> Sub for Scalar<B> {
    type Output = Scalar<B>;
    fn sub(self, rhs: Self) -> Self {
        Scalar(self.0 - rhs.0)
    }
}

impl<B: Backend> Neg for Scalar<B> {
    type Output = Scalar<B>;
    fn neg(self) -> Self {
        Scalar(-self.0)
    }
}

impl<B: Backend> fmt::Debug for Scalar<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex_string(self.to_bytes().as_ref()))
    }
}

impl<B: Backend> Point<B> {
    pub fn generator() -> Self {
        Point(B::Point::generator())
    }

    pub fn identity() -> Self {
        Point(B::Point::identity())
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.0.is_identity())
    }

    pub fn to_bytes(&self) -> <B::Point as GroupEncoding>::Repr {
        self.0.to_bytes()
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.to_bytes().as_ref().to_vec()
    }

    /// Decodes and checks curve membership. The identity (all zeros) is
    /// accepted here; protocol types reject it separately.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != B::POINT_LEN {
            return Err(Error::InvalidPoint);
        }
        let mut repr = <B::Point as GroupEncoding>::Repr::default();
        repr.as_mut().copy_from_slice(bytes);
        Option::<B::Point>::from(B::Point::from_bytes(&repr))
            .map(Point)
            .ok_or(Error::InvalidPoint)
    }

    /// Like [`Point::from_bytes`] but also rejects the identity.
    pub fn from_bytes_nonidentity(bytes: &[u8]) -> Result<Self> {
        let p = Self::from_bytes(bytes)?;
        if p.is_identity() {
            return Err(Error::IdentityPoint);
        }
        Ok(p)
    }
}

impl<B: Backend> Add for Point<B> {
    type Output = Point<B>;
    fn add(self, rhs: Self) -> Self {
        Point(self.0 + rhs.0)
    }
}

impl<B: Backend> Sub for Point<B> {
    type Output = Point<B>;
    fn sub(self, rhs: Self) -> Self {
        Point(self.0 - rhs.0)
    }
}

impl<B: Backend> Neg for Point<B> {
    type Output = Point<B>;
    fn neg(self) -> Self {
        Point(-self.0)
    }
}

impl<B: Backend> fmt::Debug for Point<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", hex_string(self.to_bytes().as_ref()))
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash function behind `hash_to_scalar`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HashAlg {
    #[default]
    Sha256,
    Blake2s256,
}

impl HashAlg {
    pub fn id(self) -> u8 {
        match self {
            HashAlg::Sha256 => 1,
            HashAlg::Blake2s256 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(HashAlg::Sha256),
            2 => Some(HashAlg::Blake2s256),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Blake2s256 => "blake2s256",
        }
    }

    fn digest(self, parts: &[&[u8]]) -> [u8; 32] {
        match self {
            HashAlg::Sha256 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                h.finalize().into()
            }
            HashAlg::Blake2s256 => {
                let mut h = Blake2s256::new();
                for p in parts {
                    h.update(p);
                }
                h.finalize().into()
            }
        }
    }
}

impl FromStr for HashAlg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sha256" | "sha-256" => Ok(HashAlg::Sha256),
            "blake2s" | "blake2s256" => Ok(HashAlg::Blake2s256),
            other => Err(format!("unknown hash `{other}`")),
        }
    }
}

/// Handle to a group backend plus one counting scope.
///
/// The fixed-base table is shared (immutable, `Arc`) across every handle of
/// the same backend; counters are private to each handle. Use
/// [`Group::session`] to open a fresh scope over the same parameters.
pub struct Group<B: Backend = Secp256k1> {
    table: Option<Arc<FixedBaseTable<B>>>,
    hash: HashAlg,
    counters: AtomicCounters,
}

impl<B: Backend> Default for Group<B> {
    fn default() -> Self {
        Self::new()
    }
}

impl<B: Backend> fmt::Debug for Group<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Group")
            .field("backend", &B::NAME)
            .field("hash", &self.hash)
            .field("precomputed", &self.table.is_some())
            .field("counters", &self.counters())
            .finish()
    }
}

impl<B: Backend> Group<B> {
    pub fn new() -> Self {
        Self::with_hash(HashAlg::default())
    }

    pub fn with_hash(hash: HashAlg) -> Self {
        Group {
            table: Some(B::base_table()),
            hash,
            counters: AtomicCounters::default(),
        }
    }

    /// Handle with a private fixed-base table of the given window width.
    pub fn with_window(hash: HashAlg, window_bits: u32) -> Self {
        Group {
            table: Some(Arc::new(FixedBaseTable::with_window(window_bits))),
            hash,
            counters: AtomicCounters::default(),
        }
    }

    /// Handle whose fixed-base path falls back to the generic multiplication.
    pub fn without_precomputation(hash: HashAlg) -> Self {
        Group {
            table: None,
            hash,
            counters: AtomicCounters::default(),
        }
    }

    /// New counting scope sharing this handle's table and hash.
    pub fn session(&self) -> Self {
        Group {
            table: self.table.clone(),
            hash: self.hash,
            counters: AtomicCounters::default(),
        }
    }

    pub fn backend_name(&self) -> &'static str {
        B::NAME
    }

    pub fn hash_alg(&self) -> HashAlg {
        self.hash
    }

    pub fn point_len(&self) -> usize {
        B::POINT_LEN
    }

    pub fn scalar_len(&self) -> usize {
        B::SCALAR_LEN
    }

    pub fn has_precomputation(&self) -> bool {
        self.table.is_some()
    }

    pub fn generator(&self) -> Point<B> {
        Point::generator()
    }

    pub fn order_minus_one(&self) -> Scalar<B> {
        -Scalar::one()
    }

    /// `k * P` for an arbitrary point. Counts one RP.
    pub fn mul_random(&self, k: &Scalar<B>, p: &Point<B>) -> Result<Point<B>> {
        if p.is_identity() {
            return Err(Error::IdentityPoint);
        }
        if k.is_zero() {
            return Err(Error::ZeroScalar);
        }
        self.counters.bump_rp();
        Ok(Point(p.0 * k.0))
    }

    /// `k * G` through the precomputed table. Counts one FP.
    pub fn mul_base(&self, k: &Scalar<B>) -> Result<Point<B>> {
        if k.is_zero() {
            return Err(Error::ZeroScalar);
        }
        self.counters.bump_fp();
        Ok(match &self.table {
            Some(t) => Point(t.mul(&k.0)),
            None => Point(B::Point::generator() * k.0),
        })
    }

    /// Digest of `data` read as a big-endian integer mod n. A zero result is
    /// re-hashed with a one-byte counter appended. Counts one H.
    pub fn hash_to_scalar(&self, data: &[u8]) -> Result<Scalar<B>> {
        if data.is_empty() {
            return Err(Error::EmptyHashInput);
        }
        self.counters.bump_h();
        let mut s = B::reduce_digest(&self.hash.digest(&[data]));
        let mut ctr = 0u8;
        while bool::from(s.is_zero()) {
            ctr = ctr.checked_add(1).expect("256 consecutive zero digests");
            s = B::reduce_digest(&self.hash.digest(&[data, &[ctr]]));
        }
        Ok(Scalar(s))
    }

    /// Uniform scalar in `[1, n)`. Not a counted operation.
    pub fn random_scalar<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> Result<Scalar<B>> {
        Scalar::random(rng)
    }

    pub fn add(&self, p: &Point<B>, q: &Point<B>) -> Point<B> {
        *p + *q
    }

    pub fn counters(&self) -> OpCounters {
        self.counters.snapshot()
    }

    pub fn reset_counters(&self) {
        self.counters.take();
    }

    /// Snapshot and reset in one step.
    pub fn take_counters(&self) -> OpCounters {
        self.counters.take()
    }
}
