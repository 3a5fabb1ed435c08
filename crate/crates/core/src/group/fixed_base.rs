//! Fixed-window precomputation for multiplying the base point.
//!
//! The scalar is split into `ceil(NUM_BITS / w)` windows of `w` bits. Row `i`
//! of the table holds the affine points `j * 2^(w*i) * G` for
//! `j = 1 .. 2^w - 1`, so `k * G` is the sum of one table entry per non-zero
//! window: at most `ceil(256 / w)` mixed additions and no doublings.
//!
//! The default `w = 2` gives 128 rows of 3 points (384 affine points). Wider
//! windows trade memory for fewer additions; `w = 2` keeps a fixed-base
//! multiplication a few times cheaper than a random-point one while a hash
//! stays two orders of magnitude below both.

use ff::PrimeField;
use group::{Curve, Group};

use super::backend::Backend;
use crate::par;

pub const DEFAULT_WINDOW_BITS: u32 = 2;

pub struct FixedBaseTable<B: Backend> {
    window_bits: u32,
    rows: Vec<Vec<B::Affine>>,
}

impl<B: Backend> FixedBaseTable<B> {
    pub fn build() -> Self {
        Self::with_window(DEFAULT_WINDOW_BITS)
    }

    /// Build with the given window width; rows are filled in parallel when
    /// the `parallel` feature is on.
    pub fn with_window(window_bits: u32) -> Self {
        let bases = Self::row_bases(window_bits);
        let rows = par::map(&bases, |base| Self::row(window_bits, base));
        FixedBaseTable { window_bits, rows }
    }

    pub fn with_window_sequential(window_bits: u32) -> Self {
        let bases = Self::row_bases(window_bits);
        let rows = bases.iter().map(|base| Self::row(window_bits, base)).collect();
        FixedBaseTable { window_bits, rows }
    }

    fn row_bases(window_bits: u32) -> Vec<B::Point> {
        assert!((1..=8).contains(&window_bits), "window width must be 1..=8 bits");
        let windows = B::Scalar::NUM_BITS.div_ceil(window_bits) as usize;
        let mut bases = Vec::with_capacity(windows);
        let mut base = B::Point::generator();
        for _ in 0..windows {
            bases.push(base);
            for _ in 0..window_bits {
                base = base.double();
            }
        }
        bases
    }

    fn row(window_bits: u32, base: &B::Point) -> Vec<B::Affine> {
        let len = (1usize << window_bits) - 1;
        let mut multiples = Vec::with_capacity(len);
        let mut acc = *base;
        multiples.push(acc);
        for _ in 1..len {
            acc += base;
            multiples.push(acc);
        }
        let mut affine = vec![B::Point::identity().to_affine(); len];
        B::Point::batch_normalize(&multiples, &mut affine);
        affine
    }

    pub fn window_bits(&self) -> u32 {
        self.window_bits
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `k * G`. Table lookups are indexed by the scalar digits, so this is
    /// not constant-time.
    pub fn mul(&self, k: &B::Scalar) -> B::Point {
        let repr = k.to_repr();
        let be = repr.as_ref();
        let mut acc = B::Point::identity();
        for (i, row) in self.rows.iter().enumerate() {
            let digit = window_digit(be, i as u32 * self.window_bits, self.window_bits);
            if digit != 0 {
                acc += row[digit - 1];
            }
        }
        acc
    }
}

/// Bits `[start, start + width)` of a big-endian integer, LSB first.
fn window_digit(be: &[u8], start: u32, width: u32) -> usize {
    let mut digit = 0usize;
    for b in 0..width {
        let pos = (start + b) as usize;
        let byte_idx = match (be.len()).checked_sub(1 + pos / 8) {
            Some(i) => i,
            None => break,
        };
        let bit = (be[byte_idx] >> (pos % 8)) & 1;
        digit |= (bit as usize) << b;
    }
    digit
}
