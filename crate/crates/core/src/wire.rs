//! Canonical byte encoding shared by everything that is hashed, signed,
//! MACed, or written to disk.
//!
//! All integers are big-endian. Floats are encoded as the big-endian bytes
//! of their IEEE 754 bit pattern, so encoding round-trips exactly and two
//! encoders can never disagree on a hashed payload. Variable-length fields
//! carry a `u32` length prefix.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEof(usize),
    #[error("{0} trailing bytes after a complete value")]
    TrailingBytes(usize),
    #[error("length field {got} exceeds remaining input {remaining}")]
    LengthOverrun { got: usize, remaining: usize },
    #[error("invalid value for {field}: {value}")]
    InvalidValue { field: &'static str, value: u64 },
}

pub fn put_u8(buf: &mut Vec<u8>, v: u8) {
    buf.push(v);
}

pub fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_bits().to_be_bytes());
}

/// `u32` length prefix followed by the raw bytes.
pub fn put_var_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    debug_assert!(b.len() <= u32::MAX as usize);
    put_u32(buf, b.len() as u32);
    buf.extend_from_slice(b);
}

/// Sequential reader over an immutable byte slice.
///
/// Every accessor either consumes exactly its encoded size or fails; no
/// partial reads. `finish` enforces that the input was consumed exactly.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::UnexpectedEof(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn var_bytes(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.u32()? as usize;
        if len > self.remaining() {
            return Err(WireError::LengthOverrun { got: len, remaining: self.remaining() });
        }
        self.take(len)
    }

    /// Consume the rest of the input as one slice.
    pub fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::TrailingBytes(self.remaining()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_round_trip_big_endian() {
        let mut buf = Vec::new();
        put_u16(&mut buf, 0x0102);
        put_u32(&mut buf, 0x03040506);
        put_u64(&mut buf, 0x0708090a0b0c0d0e);
        assert_eq!(buf, (1u8..=14).collect::<Vec<u8>>());

        let mut r = Reader::new(&buf);
        assert_eq!(r.u16().unwrap(), 0x0102);
        assert_eq!(r.u32().unwrap(), 0x03040506);
        assert_eq!(r.u64().unwrap(), 0x0708090a0b0c0d0e);
        r.finish().unwrap();
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.0, -0.0, 1.5, 7.6, f64::MIN_POSITIVE, f64::INFINITY, 1e-300] {
            let mut buf = Vec::new();
            put_f64(&mut buf, v);
            let mut r = Reader::new(&buf);
            let back = r.f64().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn var_bytes_length_is_checked() {
        let mut buf = Vec::new();
        put_var_bytes(&mut buf, b"abc");
        let mut r = Reader::new(&buf);
        assert_eq!(r.var_bytes().unwrap(), b"abc");
        r.finish().unwrap();

        // Claimed length larger than the remaining input must not panic.
        let bogus = [0u8, 0, 0, 9, 1, 2];
        let mut r = Reader::new(&bogus);
        assert!(matches!(r.var_bytes(), Err(WireError::LengthOverrun { .. })));
    }

    #[test]
    fn eof_and_trailing_are_distinct_errors() {
        let mut r = Reader::new(&[1, 2]);
        assert_eq!(r.u32(), Err(WireError::UnexpectedEof(0)));

        let r = Reader::new(&[1, 2]);
        assert_eq!(r.finish(), Err(WireError::TrailingBytes(2)));
    }
}
