//! Cursor over a byte slice for the fixed-layout formats.

use crate::error::{Error, Result};
use crate::group::{Backend, Point, Scalar};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        if end > self.buf.len() {
            return Err(Error::Truncated(what));
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub(crate) fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self, what: &'static str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_be_bytes(b.try_into().expect("8 bytes")))
    }

    pub(crate) fn point<B: Backend>(&mut self, what: &'static str) -> Result<Point<B>> {
        Point::from_bytes(self.take(B::POINT_LEN, what)?)
    }

    pub(crate) fn scalar<B: Backend>(&mut self, what: &'static str) -> Result<Scalar<B>> {
        Scalar::from_bytes(self.take(B::SCALAR_LEN, what)?)
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn finish(self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::TrailingBytes(n)),
        }
    }
}

pub(crate) fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub(crate) fn put_point<B: Backend>(out: &mut Vec<u8>, p: &Point<B>) {
    out.extend_from_slice(p.to_bytes().as_ref());
}

pub(crate) fn put_scalar<B: Backend>(out: &mut Vec<u8>, s: &Scalar<B>) {
    out.extend_from_slice(s.to_bytes().as_ref());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_big_endian() {
        let mut out = Vec::new();
        put_u16(&mut out, 0x0102);
        put_u32(&mut out, 0x03040506);
        put_u64(&mut out, 7);
        let mut r = Reader::new(&out);
        assert_eq!(r.u16("a").unwrap(), 0x0102);
        assert_eq!(r.u32("b").unwrap(), 0x03040506);
        assert_eq!(r.u64("c").unwrap(), 7);
        assert!(matches!(r.u8("d"), Err(Error::Truncated("d"))));
        r.finish().unwrap();
    }

    #[test]
    fn trailing_bytes_rejected() {
        let r = Reader::new(&[1, 2]);
        assert!(matches!(r.finish(), Err(Error::TrailingBytes(2))));
    }
}
