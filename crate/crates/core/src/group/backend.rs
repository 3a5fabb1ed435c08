use std::fmt::{self, Debug};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use ff::PrimeField;
use group::{Curve, GroupEncoding};

use super::fixed_base::FixedBaseTable;

/// A prime-order group the protocols can run over.
///
/// Points are encoded in SEC1 compressed form (`POINT_LEN` bytes, the
/// identity as all zeros) and scalars as `SCALAR_LEN` big-endian bytes.
pub trait Backend: Copy + Debug + Default + Send + Sync + 'static {
    type Scalar: PrimeField;
    type Point: Curve<Scalar = Self::Scalar, AffineRepr = Self::Affine> + GroupEncoding;
    type Affine: Copy + Debug + Send + Sync + 'static;

    const NAME: &'static str;
    /// Tag written into state and ledger file headers.
    const ID: u8;
    const POINT_LEN: usize;
    const SCALAR_LEN: usize;

    /// Interpret a 32-byte digest as a big-endian integer reduced mod n.
    fn reduce_digest(digest: &[u8; 32]) -> Self::Scalar;

    /// Process-wide fixed-base table, built on first use.
    fn base_table() -> Arc<FixedBaseTable<Self>>;
}

macro_rules! sec1_backend {
    ($(#[$meta:meta])* $name:ident, $krate:ident, $label:expr, $id:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
        pub struct $name;

        impl Backend for $name {
            type Scalar = $krate::Scalar;
            type Point = $krate::ProjectivePoint;
            type Affine = $krate::AffinePoint;

            const NAME: &'static str = $label;
            const ID: u8 = $id;
            const POINT_LEN: usize = 33;
            const SCALAR_LEN: usize = 32;

            fn reduce_digest(digest: &[u8; 32]) -> Self::Scalar {
                use $krate::elliptic_curve::ops::Reduce;
                let bytes: $krate::FieldBytes = (*digest).into();
                <$krate::Scalar as Reduce<$krate::U256>>::reduce_bytes(&bytes)
            }

            fn base_table() -> Arc<FixedBaseTable<Self>> {
                static TABLE: OnceLock<Arc<FixedBaseTable<$name>>> = OnceLock::new();
                TABLE.get_or_init(|| Arc::new(FixedBaseTable::build())).clone()
            }
        }
    };
}

sec1_backend!(
    /// secp256k1, the default backend.
    Secp256k1,
    k256,
    "secp256k1",
    1
);

sec1_backend!(
    /// NIST P-256.
    P256,
    p256,
    "p256",
    2
);

/// Runtime selector for the available backends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackendKind {
    #[default]
    Secp256k1,
    P256,
}

impl BackendKind {
    pub const ALL: [BackendKind; 2] = [BackendKind::Secp256k1, BackendKind::P256];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Secp256k1 => Secp256k1::NAME,
            BackendKind::P256 => P256::NAME,
        }
    }

    pub fn point_len(self) -> usize {
        match self {
            BackendKind::Secp256k1 => Secp256k1::POINT_LEN,
            BackendKind::P256 => P256::POINT_LEN,
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "secp256k1" | "k256" => Ok(BackendKind::Secp256k1),
            "p256" | "p-256" | "secp256r1" => Ok(BackendKind::P256),
            other => Err(format!("unknown backend `{other}` (expected secp256k1 or p256)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ff::Field;

    fn encoding_lengths<B: Backend>() {
        use group::Group;
        let g = <B::Point as Group>::generator();
        assert_eq!(g.to_bytes().as_ref().len(), B::POINT_LEN);
        assert_eq!(B::Scalar::ONE.to_repr().as_ref().len(), B::SCALAR_LEN);
    }

    #[test]
    fn declared_lengths_match_encodings() {
        encoding_lengths::<Secp256k1>();
        encoding_lengths::<P256>();
    }

    #[test]
    fn reduce_digest_wraps_modulus() {
        // n - 1 is already reduced
        let mut d = [0u8; 32];
        let n_minus_one = (-k256::Scalar::ONE).to_repr();
        d.copy_from_slice(&n_minus_one);
        assert_eq!(Secp256k1::reduce_digest(&d), -k256::Scalar::ONE);
        assert_eq!(Secp256k1::reduce_digest(&[0xff; 32]), {
            // 2^256 - 1 mod n = 2^256 - 1 - n
            let mut be = [0u8; 32];
            be.copy_from_slice(&hex_literal_n_complement());
            Option::<k256::Scalar>::from(k256::Scalar::from_repr(be.into())).unwrap()
        });
    }

    // 2^256 - 1 - n for secp256k1
    fn hex_literal_n_complement() -> [u8; 32] {
        let n = [
            0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF,
            0xFF, 0xFE, 0xBA, 0xAE, 0xDC, 0xE6, 0xAF, 0x48, 0xA0, 0x3B, 0xBF, 0xD2, 0x5E, 0x8C,
            0xD0, 0x36, 0x41, 0x41,
        ];
        let mut out = [0u8; 32];
        for i in 0..32 {
            out[i] = 0xFF - n[i];
        }
        out
    }

    #[test]
    fn backend_kind_parsing() {
        assert_eq!("secp256k1".parse::<BackendKind>().unwrap(), BackendKind::Secp256k1);
        assert_eq!("P-256".parse::<BackendKind>().unwrap(), BackendKind::P256);
        assert!("ed25519".parse::<BackendKind>().is_err());
        assert_eq!(BackendKind::P256.to_string(), "p256");
    }
}
