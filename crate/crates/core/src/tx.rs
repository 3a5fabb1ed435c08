//! On-ledger transaction record and its wire format.
//!
//! ```text
//! flag (1) | [ephemeral R_A (POINT_LEN) if flag = 0x01] | destination T_A (POINT_LEN) | amount (8, BE)
//! ```
//!
//! A transaction without an ephemeral key has the same layout as a regular
//! (non-stealth) payment: flag `0x00`, destination, amount.

use crate::codec::{put_point, put_u64, Reader};
use crate::error::{Error, Result};
use crate::group::{Backend, Point, Secp256k1};

pub const FLAG_NO_EPHEMERAL: u8 = 0x00;
pub const FLAG_EPHEMERAL: u8 = 0x01;

pub struct StealthTx<B: Backend = Secp256k1> {
    ephemeral: Option<Point<B>>,
    destination: Point<B>,
    amount: u64,
}

impl<B: Backend> Clone for StealthTx<B> {
    fn clone(&self) -> Self {
        StealthTx {
            ephemeral: self.ephemeral,
            destination: self.destination,
            amount: self.amount,
        }
    }
}

impl<B: Backend> PartialEq for StealthTx<B> {
    fn eq(&self, other: &Self) -> bool {
        self.ephemeral == other.ephemeral
            && self.destination == other.destination
            && self.amount == other.amount
    }
}

impl<B: Backend> Eq for StealthTx<B> {}

impl<B: Backend> std::fmt::Debug for StealthTx<B> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StealthTx")
            .field("ephemeral", &self.ephemeral)
            .field("destination", &self.destination)
            .field("amount", &self.amount)
            .finish()
    }
}

impl<B: Backend> StealthTx<B> {
    pub fn new(ephemeral: Option<Point<B>>, destination: Point<B>, amount: u64) -> Result<Self> {
        if ephemeral.is_some_and(|r| r.is_identity()) {
            return Err(Error::MalformedTx("ephemeral key is the identity"));
        }
        if destination.is_identity() {
            return Err(Error::MalformedTx("destination is the identity"));
        }
        Ok(StealthTx {
            ephemeral,
            destination,
            amount,
        })
    }

    /// A plain payment to `destination`: no ephemeral key.
    pub fn regular(destination: Point<B>, amount: u64) -> Result<Self> {
        Self::new(None, destination, amount)
    }

    pub fn ephemeral(&self) -> Option<&Point<B>> {
        self.ephemeral.as_ref()
    }

    pub fn destination(&self) -> &Point<B> {
        &self.destination
    }

    pub fn amount(&self) -> u64 {
        self.amount
    }

    pub fn has_ephemeral(&self) -> bool {
        self.ephemeral.is_some()
    }

    pub fn encoded_len(&self) -> usize {
        Self::encoded_len_for(self.has_ephemeral())
    }

    pub fn encoded_len_for(with_ephemeral: bool) -> usize {
        1 + B::POINT_LEN * (1 + with_ephemeral as usize) + 8
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        match &self.ephemeral {
            Some(r) => {
                out.push(FLAG_EPHEMERAL);
                put_point(out, r);
            }
            None => out.push(FLAG_NO_EPHEMERAL),
        }
        put_point(out, &self.destination);
        put_u64(out, self.amount);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    /// Decodes one transaction, rejecting unknown flags, off-curve or
    /// identity points, truncation and trailing bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let flag = r.u8("tx flag")?;
        let ephemeral = match flag {
            FLAG_EPHEMERAL => Some(
                r.point::<B>("tx ephemeral key")
                    .map_err(|_| Error::MalformedTx("ephemeral key is not a valid point"))?,
            ),
            FLAG_NO_EPHEMERAL => None,
            _ => return Err(Error::MalformedTx("unknown flag byte")),
        };
        let destination = r
            .point::<B>("tx destination")
            .map_err(|e| match e {
                Error::Truncated(w) => Error::Truncated(w),
                _ => Error::MalformedTx("destination is not a valid point"),
            })?;
        let amount = r.u64("tx amount")?;
        r.finish()?;
        Self::new(ephemeral, destination, amount)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Group, Scalar};

    fn pt(k: u64) -> Point {
        Group::<Secp256k1>::new().mul_base(&Scalar::from_u64(k)).unwrap()
    }

    #[test]
    fn layouts() {
        let cold = StealthTx::new(Some(pt(1)), pt(2), 500).unwrap();
        let warm = StealthTx::new(None, pt(3), 500).unwrap();
        let bytes = cold.to_bytes();
        assert_eq!(bytes.len(), 1 + 33 + 33 + 8);
        assert_eq!(bytes[0], FLAG_EPHEMERAL);
        assert_eq!(&bytes[1..34], pt(1).to_vec().as_slice());
        assert_eq!(&bytes[67..], &500u64.to_be_bytes());
        let wb = warm.to_bytes();
        assert_eq!(wb.len(), 1 + 33 + 8);
        assert_eq!(wb[0], FLAG_NO_EPHEMERAL);
        assert_eq!(StealthTx::<Secp256k1>::from_bytes(&bytes).unwrap(), cold);
        assert_eq!(StealthTx::<Secp256k1>::from_bytes(&wb).unwrap(), warm);
        assert_eq!(cold.encoded_len(), bytes.len());
    }

    #[test]
    fn regular_matches_warm_layout() {
        let regular = StealthTx::regular(pt(9), 1).unwrap().to_bytes();
        let warm = StealthTx::new(None, pt(10), 1).unwrap().to_bytes();
        assert_eq!(regular.len(), warm.len());
        assert_eq!(regular[0], warm[0]);
    }

    #[test]
    fn rejects_malformed() {
        let good = StealthTx::new(Some(pt(1)), pt(2), 5).unwrap().to_bytes();
        assert!(matches!(
            StealthTx::<Secp256k1>::from_bytes(&good[..good.len() - 1]),
            Err(Error::Truncated(_))
        ));
        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(StealthTx::<Secp256k1>::from_bytes(&extra), Err(Error::TrailingBytes(1))));
        let mut flag = good.clone();
        flag[0] = 7;
        assert!(matches!(StealthTx::<Secp256k1>::from_bytes(&flag), Err(Error::MalformedTx(_))));
        let mut off = good.clone();
        off[34] = 0x09;
        assert!(matches!(StealthTx::<Secp256k1>::from_bytes(&off), Err(Error::MalformedTx(_))));
        let mut ident = good;
        ident[34..67].fill(0);
        assert!(matches!(StealthTx::<Secp256k1>::from_bytes(&ident), Err(Error::MalformedTx(_))));
        assert!(StealthTx::new(Some(Point::identity()), pt(1), 0).is_err());
    }
}
