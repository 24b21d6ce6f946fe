//! The `DRSC` stream container.
//!
//! Layout: magic `DRSC`, version byte `0x01`, then unsigned LEB128 varints
//! `K`, `K` pairs `(numerator, denominator)` in base order, `d` and `N`,
//! then the payload bits MSB-first, zero-padded to a byte boundary.

use std::io::Cursor;

use drsc_core::delay_codec::StreamHeader;
use drsc_core::{BitString, Rational};

pub const MAGIC: &[u8; 4] = b"DRSC";
pub const VERSION: u8 = 0x01;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("byte {offset}: {detail}")]
pub struct ContainerError {
    pub offset: u64,
    pub detail: String,
}

fn err(offset: u64, detail: impl Into<String>) -> ContainerError {
    ContainerError { offset, detail: detail.into() }
}

pub fn write_container(header: &StreamHeader, bits: &BitString) -> Result<Vec<u8>, ContainerError> {
    let mut out = Vec::with_capacity(16 + bits.len() / 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let put = |out: &mut Vec<u8>, v: u64| {
        leb128::write::unsigned(out, v).expect("writing to a Vec");
    };
    put(&mut out, header.pmf.len() as u64);
    for p in &header.pmf {
        let (Ok(n), Ok(d)) = (u64::try_from(p.numer()), u64::try_from(p.denom())) else {
            return Err(err(out.len() as u64, format!("probability {p} does not fit 64-bit varints")));
        };
        put(&mut out, n);
        put(&mut out, d);
    }
    put(&mut out, header.d);
    put(&mut out, header.n);
    for chunk in bits.bits().chunks(8) {
        let byte = chunk.iter().enumerate().fold(0u8, |b, (i, &bit)| b | ((bit as u8) << (7 - i)));
        out.push(byte);
    }
    Ok(out)
}

/// Parses a container. Returns the header, the payload bits and the byte
/// offset at which the payload starts.
pub fn read_container(bytes: &[u8]) -> Result<(StreamHeader, BitString, u64), ContainerError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(err(0, "bad magic, expected DRSC"));
    }
    match bytes.get(4) {
        Some(&VERSION) => {}
        Some(v) => return Err(err(4, format!("unsupported version {v:#04x}"))),
        None => return Err(err(4, "missing version byte")),
    }
    let mut cur = Cursor::new(bytes);
    cur.set_position(5);
    let mut get = |what: &str| {
        let at = cur.position();
        leb128::read::unsigned(&mut cur).map_err(|e| match e {
            leb128::read::Error::Overflow => err(at, format!("{what}: varint overflows 64 bits")),
            leb128::read::Error::IoError(_) => err(at, format!("{what}: truncated varint")),
        })
        .map(|v| (at, v))
    };
    let (at, k) = get("alphabet size")?;
    if k < 2 {
        return Err(err(at, format!("alphabet size {k} is below 2")));
    }
    let mut pmf = Vec::with_capacity(k.min(bytes.len() as u64) as usize);
    for i in 0..k {
        let (_, n) = get("numerator")?;
        let (at, d) = get("denominator")?;
        let p = Rational::new(n, d).map_err(|_| err(at, format!("symbol {i} has a zero denominator")))?;
        pmf.push(p);
    }
    let (at, d) = get("delay budget")?;
    if d == 0 {
        return Err(err(at, "delay budget must be at least 1"));
    }
    let (_, n) = get("source length")?;
    let start = cur.position();
    let total: Rational = pmf.iter().sum();
    if total != Rational::one() {
        return Err(err(5, format!("probabilities sum to {total}, not 1")));
    }
    let payload = &bytes[start as usize..];
    let bits = payload.iter().flat_map(|&b| (0..8).rev().map(move |i| b >> i & 1 == 1)).collect();
    Ok((StreamHeader { pmf, d, n }, bits, start))
}

/// Byte offset in the container of payload bit `bit`.
pub fn payload_byte(start: u64, bit: u64) -> u64 {
    start + bit / 8
}
