//! Baseline dual-key stealth addresses.
//!
//! The receiver publishes a scan key `V = v*G` and a spend key `S = s*G`.
//! For each payment the sender draws an ephemeral `r`, publishes `R = r*G`
//! and pays to `T = H(r*V)*G + S`. The receiver recomputes
//! `T' = H(v*R)*G + S`; on a match the one-time private key is
//! `t = H(v*R) + s`. Anyone holding only `(v, S)` can detect the same
//! payments but cannot derive `t`.
//!
//! Costs per payment: sender 1 RP + 2 FP + 1 H, receiver scan 1 RP + 1 FP + 1 H.
//!
//! Payment wire encoding: `R (POINT_LEN) | T (POINT_LEN) | amount (8, BE)`.

use std::fmt;

use rand_core::{CryptoRng, RngCore};

use crate::codec::{put_point, put_u64, Reader};
use crate::error::{Error, Result};
use crate::group::{Backend, Group, Point, Scalar, Secp256k1};
use crate::par;
use crate::tx::StealthTx;

/// Receiver key material: scan pair `(v, V)` and spend pair `(s, S)`.
pub struct KeyBundle<B: Backend = Secp256k1> {
    scan_private: Scalar<B>,
    scan_public: Point<B>,
    spend_private: Scalar<B>,
    spend_public: Point<B>,
}

/// What a sender needs: `(V, S)`.
pub struct PublicBundle<B: Backend = Secp256k1> {
    scan_public: Point<B>,
    spend_public: Point<B>,
}

/// What an auditor or scanning proxy holds: `(v, S)`. There is no slot for
/// the spend private key.
pub struct AuditorBundle<B: Backend = Secp256k1> {
    scan_private: Scalar<B>,
    spend_public: Point<B>,
}

pub struct StealthPayment<B: Backend = Secp256k1> {
    ephemeral: Point<B>,
    destination: Point<B>,
    amount: u64,
}

macro_rules! copy_eq {
    ($ty:ident { $($field:ident),* }) => {
        impl<B: Backend> Clone for $ty<B> {
            fn clone(&self) -> Self {
                $ty { $($field: self.$field.clone()),* }
            }
        }
        impl<B: Backend> PartialEq for $ty<B> {
            fn eq(&self, other: &Self) -> bool {
                true $(&& self.$field == other.$field)*
            }
        }
        impl<B: Backend> Eq for $ty<B> {}
    };
}

copy_eq!(KeyBundle { scan_private, scan_public, spend_private, spend_public });
copy_eq!(PublicBundle { scan_public, spend_public });
copy_eq!(AuditorBundle { scan_private, spend_public });
copy_eq!(StealthPayment { ephemeral, destination, amount });

impl<B: Backend> fmt::Debug for KeyBundle<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyBundle")
            .field("scan_public", &self.scan_public)
            .field("spend_public", &self.spend_public)
            .finish_non_exhaustive()
    }
}

impl<B: Backend> fmt::Debug for PublicBundle<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicBundle")
            .field("scan_public", &self.scan_public)
            .field("spend_public", &self.spend_public)
            .finish()
    }
}

impl<B: Backend> fmt::Debug for AuditorBundle<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuditorBundle")
            .field("spend_public", &self.spend_public)
            .finish_non_exhaustive()
    }
}

impl<B: Backend> fmt::Debug for StealthPayment<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StealthPayment")
            .field("ephemeral", &self.ephemeral)
            .field("destination", &self.destination)
            .field("amount", &self.amount)
            .finish()
    }
}

impl<B: Backend> KeyBundle<B> {
    /// Two fresh private keys and their public points (2 FP).
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(g: &Group<B>, rng: &mut R) -> Result<Self> {
        let scan_private = g.random_scalar(rng)?;
        let mut spend_private = g.random_scalar(rng)?;
        while spend_private == scan_private {
            spend_private = g.random_scalar(rng)?;
        }
        Self::from_private(g, scan_private, spend_private)
    }

    pub fn from_private(g: &Group<B>, scan_private: Scalar<B>, spend_private: Scalar<B>) -> Result<Self> {
        if scan_private == spend_private {
            return Err(Error::InvalidKeys("scan and spend private keys are equal"));
        }
        Ok(KeyBundle {
            scan_public: g.mul_base(&scan_private)?,
            spend_public: g.mul_base(&spend_private)?,
            scan_private,
            spend_private,
        })
    }

    /// Assemble from stored parts without recomputing the public points;
    /// call [`KeyBundle::validate`] to check them.
    pub fn from_parts(
        scan_private: Scalar<B>,
        scan_public: Point<B>,
        spend_private: Scalar<B>,
        spend_public: Point<B>,
    ) -> Self {
        KeyBundle {
            scan_private,
            scan_public,
            spend_private,
            spend_public,
        }
    }

    /// Checks `V = v*G`, `S = s*G` and `v != s` (2 FP).
    pub fn validate(&self, g: &Group<B>) -> Result<()> {
        if self.scan_private == self.spend_private {
            return Err(Error::InvalidKeys("scan and spend private keys are equal"));
        }
        if g.mul_base(&self.scan_private)? != self.scan_public {
            return Err(Error::InvalidKeys("scan public key does not match"));
        }
        if g.mul_base(&self.spend_private)? != self.spend_public {
            return Err(Error::InvalidKeys("spend public key does not match"));
        }
        Ok(())
    }

    pub fn scan_private(&self) -> &Scalar<B> {
        &self.scan_private
    }

    pub fn scan_public(&self) -> &Point<B> {
        &self.scan_public
    }

    pub fn spend_private(&self) -> &Scalar<B> {
        &self.spend_private
    }

    pub fn spend_public(&self) -> &Point<B> {
        &self.spend_public
    }

    pub fn public(&self) -> PublicBundle<B> {
        PublicBundle {
            scan_public: self.scan_public,
            spend_public: self.spend_public,
        }
    }

    pub fn auditor(&self) -> AuditorBundle<B> {
        AuditorBundle {
            scan_private: self.scan_private,
            spend_public: self.spend_public,
        }
    }
}

impl<B: Backend> PublicBundle<B> {
    pub fn new(scan_public: Point<B>, spend_public: Point<B>) -> Result<Self> {
        if scan_public.is_identity() || spend_public.is_identity() {
            return Err(Error::IdentityPoint);
        }
        Ok(PublicBundle {
            scan_public,
            spend_public,
        })
    }

    pub fn scan_public(&self) -> &Point<B> {
        &self.scan_public
    }

    pub fn spend_public(&self) -> &Point<B> {
        &self.spend_public
    }

    /// `V | S`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * B::POINT_LEN);
        put_point(&mut out, &self.scan_public);
        put_point(&mut out, &self.spend_public);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let v = r.point("scan public key")?;
        let s = r.point("spend public key")?;
        r.finish()?;
        Self::new(v, s)
    }
}

impl<B: Backend> AuditorBundle<B> {
    pub fn new(scan_private: Scalar<B>, spend_public: Point<B>) -> Result<Self> {
        if scan_private.is_zero() {
            return Err(Error::ZeroScalar);
        }
        if spend_public.is_identity() {
            return Err(Error::IdentityPoint);
        }
        Ok(AuditorBundle {
            scan_private,
            spend_public,
        })
    }

    pub fn scan_private(&self) -> &Scalar<B> {
        &self.scan_private
    }

    pub fn spend_public(&self) -> &Point<B> {
        &self.spend_public
    }
}

impl<B: Backend> StealthPayment<B> {
    pub fn new(ephemeral: Point<B>, destination: Point<B>, amount: u64) -> Result<Self> {
        if ephemeral.is_identity() || destination.is_identity() {
            return Err(Error::MalformedTx("payment contains the identity"));
        }
        Ok(StealthPayment {
            ephemeral,
            destination,
            amount,
        })
    }

    pub fn ephemeral(&self) -> &Point<B> {
        &self.ephemeral
    }

    pub fn destination(&self) -> &Point<B> {
        &self.destination
    }

    pub fn amount(&self) -> u64 {
        self.amount
    }

    pub const fn encoded_len() -> usize {
        2 * B::POINT_LEN + 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len());
        put_point(&mut out, &self.ephemeral);
        put_point(&mut out, &self.destination);
        put_u64(&mut out, self.amount);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let ephemeral = r.point("payment ephemeral key")?;
        let destination = r.point("payment destination")?;
        let amount = r.u64("payment amount")?;
        r.finish()?;
        Self::new(ephemeral, destination, amount)
    }

    pub fn to_tx(&self) -> StealthTx<B> {
        StealthTx::new(Some(self.ephemeral), self.destination, self.amount)
            .expect("payment points are validated")
    }

    /// The payment carried by `tx`, if it has an ephemeral key.
    pub fn from_tx(tx: &StealthTx<B>) -> Option<Self> {
        tx.ephemeral().map(|r| StealthPayment {
            ephemeral: *r,
            destination: *tx.destination(),
            amount: tx.amount(),
        })
    }
}

impl<B: Backend> From<StealthPayment<B>> for StealthTx<B> {
    fn from(p: StealthPayment<B>) -> Self {
        p.to_tx()
    }
}

mod sealed {
    pub trait Sealed {}
    impl<B: crate::group::Backend> Sealed for super::KeyBundle<B> {}
    impl<B: crate::group::Backend> Sealed for super::AuditorBundle<B> {}
}

/// Key material able to recognise incoming payments. Implemented only by
/// [`KeyBundle`], whose `Spend` is the one-time private key, and by
/// [`AuditorBundle`], whose `Spend` is `()`.
pub trait ScanKeys<B: Backend>: sealed::Sealed + Send + Sync {
    type Spend: Copy + PartialEq + fmt::Debug + Send + Sync;

    /// Encoded size of `Spend` in state files.
    const SPEND_LEN: usize;

    fn scan_private(&self) -> &Scalar<B>;

    fn spend_public(&self) -> &Point<B>;

    /// Spending capability for a destination derived from `secret`.
    fn spend_for(&self, secret: &Scalar<B>) -> Self::Spend;

    /// A zero one-time private key is unusable and treated as no match.
    fn spend_usable(spend: &Self::Spend) -> bool;

    fn encode_spend(spend: &Self::Spend, out: &mut Vec<u8>);

    fn decode_spend(bytes: &[u8]) -> Result<Self::Spend>;
}

impl<B: Backend> ScanKeys<B> for KeyBundle<B> {
    type Spend = Scalar<B>;
    const SPEND_LEN: usize = B::SCALAR_LEN;

    fn scan_private(&self) -> &Scalar<B> {
        &self.scan_private
    }

    fn spend_public(&self) -> &Point<B> {
        &self.spend_public
    }

    fn spend_for(&self, secret: &Scalar<B>) -> Scalar<B> {
        *secret + self.spend_private
    }

    fn spend_usable(spend: &Scalar<B>) -> bool {
        !spend.is_zero()
    }

    fn encode_spend(spend: &Scalar<B>, out: &mut Vec<u8>) {
        out.extend_from_slice(spend.to_bytes().as_ref());
    }

    fn decode_spend(bytes: &[u8]) -> Result<Scalar<B>> {
        Scalar::from_bytes(bytes)
    }
}

impl<B: Backend> ScanKeys<B> for AuditorBundle<B> {
    type Spend = ();
    const SPEND_LEN: usize = 0;

    fn scan_private(&self) -> &Scalar<B> {
        &self.scan_private
    }

    fn spend_public(&self) -> &Point<B> {
        &self.spend_public
    }

    fn spend_for(&self, _secret: &Scalar<B>) {}

    fn spend_usable(_: &()) -> bool {
        true
    }

    fn encode_spend(_: &(), _: &mut Vec<u8>) {}

    fn decode_spend(bytes: &[u8]) -> Result<()> {
        if bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::CorruptState("auditor record carries spend bytes"))
        }
    }
}

/// Fresh receiver keys (2 FP).
pub fn keygen<B: Backend, R: RngCore + CryptoRng + ?Sized>(g: &Group<B>, rng: &mut R) -> Result<KeyBundle<B>> {
    KeyBundle::generate(g, rng)
}

/// `H(enc(r*V))`: 1 RP + 1 H.
pub fn derive_shared_secret_sender<B: Backend>(
    g: &Group<B>,
    ephemeral_private: &Scalar<B>,
    scan_public: &Point<B>,
) -> Result<Scalar<B>> {
    let shared = g.mul_random(ephemeral_private, scan_public)?;
    g.hash_to_scalar(shared.to_bytes().as_ref())
}

/// `H(enc(v*R))`: 1 RP + 1 H.
pub fn derive_shared_secret_receiver<B: Backend>(
    g: &Group<B>,
    scan_private: &Scalar<B>,
    ephemeral_public: &Point<B>,
) -> Result<Scalar<B>> {
    let shared = g.mul_random(scan_private, ephemeral_public)?;
    g.hash_to_scalar(shared.to_bytes().as_ref())
}

/// `secret*G + S`: 1 FP.
pub fn one_time_destination<B: Backend>(g: &Group<B>, secret: &Scalar<B>, spend_public: &Point<B>) -> Result<Point<B>> {
    Ok(g.mul_base(secret)? + *spend_public)
}

/// Sender side of one payment: 1 RP + 2 FP + 1 H.
pub fn sender_build_payment<B: Backend, R: RngCore + CryptoRng + ?Sized>(
    g: &Group<B>,
    rng: &mut R,
    recipient: &PublicBundle<B>,
    amount: u64,
) -> Result<StealthPayment<B>> {
    let (payment, _) = sender_build_payment_with_secret(g, rng, recipient, amount)?;
    Ok(payment)
}

/// As [`sender_build_payment`], also returning the shared secret `c`.
pub fn sender_build_payment_with_secret<B: Backend, R: RngCore + CryptoRng + ?Sized>(
    g: &Group<B>,
    rng: &mut R,
    recipient: &PublicBundle<B>,
    amount: u64,
) -> Result<(StealthPayment<B>, Scalar<B>)> {
    let r = g.random_scalar(rng)?;
    let ephemeral = g.mul_base(&r)?;
    let secret = derive_shared_secret_sender(g, &r, &recipient.scan_public)?;
    let destination = one_time_destination(g, &secret, &recipient.spend_public)?;
    Ok((StealthPayment::new(ephemeral, destination, amount)?, secret))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiverScan<B: Backend = Secp256k1> {
    Match { spend_key: Scalar<B> },
    NoMatch,
}

impl<B: Backend> ReceiverScan<B> {
    pub fn spend_key(&self) -> Option<&Scalar<B>> {
        match self {
            ReceiverScan::Match { spend_key } => Some(spend_key),
            ReceiverScan::NoMatch => None,
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self, ReceiverScan::Match { .. })
    }
}

/// Auditor result. Carries no key material.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditorScan {
    Match,
    NoMatch,
}

impl AuditorScan {
    pub fn is_match(&self) -> bool {
        matches!(self, AuditorScan::Match)
    }
}

/// Shared secret and purported destination for `R`: 1 RP + 1 H + 1 FP.
pub fn purported_destination<B: Backend, K: ScanKeys<B>>(
    g: &Group<B>,
    keys: &K,
    ephemeral: &Point<B>,
) -> Result<(Scalar<B>, Point<B>)> {
    let secret = derive_shared_secret_receiver(g, keys.scan_private(), ephemeral)?;
    let destination = one_time_destination(g, &secret, keys.spend_public())?;
    Ok((secret, destination))
}

/// Generic scan: `Some(spend)` when the payment is addressed to `keys`.
pub fn scan_with<B: Backend, K: ScanKeys<B>>(
    g: &Group<B>,
    keys: &K,
    payment: &StealthPayment<B>,
) -> Result<Option<K::Spend>> {
    let (secret, destination) = purported_destination(g, keys, &payment.ephemeral)?;
    if destination != payment.destination {
        return Ok(None);
    }
    let spend = keys.spend_for(&secret);
    Ok(K::spend_usable(&spend).then_some(spend))
}

/// Receiver scan of one payment: 1 RP + 1 FP + 1 H.
pub fn receiver_scan<B: Backend>(g: &Group<B>, keys: &KeyBundle<B>, payment: &StealthPayment<B>) -> Result<ReceiverScan<B>> {
    Ok(match scan_with(g, keys, payment)? {
        Some(spend_key) => ReceiverScan::Match { spend_key },
        None => ReceiverScan::NoMatch,
    })
}

/// Receiver scan of an encoded payment; malformed bytes are an error, a
/// well-formed payment for someone else is `NoMatch`.
pub fn receiver_scan_bytes<B: Backend>(g: &Group<B>, keys: &KeyBundle<B>, bytes: &[u8]) -> Result<ReceiverScan<B>> {
    receiver_scan(g, keys, &StealthPayment::from_bytes(bytes)?)
}

/// Auditor scan of one payment: same cost and matches as the receiver.
pub fn auditor_scan<B: Backend>(g: &Group<B>, auditor: &AuditorBundle<B>, payment: &StealthPayment<B>) -> Result<AuditorScan> {
    Ok(match scan_with(g, auditor, payment)? {
        Some(()) => AuditorScan::Match,
        None => AuditorScan::NoMatch,
    })
}

/// Scans a batch of payments, in parallel when the `parallel` feature is
/// on. Counters accumulate on `g` exactly as with sequential scans.
pub fn scan_batch<B: Backend, K: ScanKeys<B>>(
    g: &Group<B>,
    keys: &K,
    payments: &[StealthPayment<B>],
) -> Vec<Result<Option<K::Spend>>> {
    par::map(payments, |p| scan_with(g, keys, p))
}
