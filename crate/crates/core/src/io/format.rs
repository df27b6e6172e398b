//! Shared pieces of the on-disk layout: a single JSON header line followed
//! by a little-endian f64 payload.

use std::io::{BufRead, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{FormatError, Result};

pub fn write_header<W: Write, H: Serialize>(w: &mut W, header: &H) -> Result<()> {
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Read one header line and decode it; the reader is left at the payload.
pub fn read_header<R: BufRead, H: DeserializeOwned>(r: &mut R) -> Result<H> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(FormatError::MalformedHeader("missing header line terminator".into()).into());
    }
    line.pop();
    serde_json::from_slice(&line).map_err(|e| FormatError::MalformedHeader(e.to_string()).into())
}

pub fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read the rest of the stream as exactly `expected` f64 values. A payload
/// that ends inside a value is reported as truncated; a whole number of
/// values that disagrees with the header is a length mismatch.
pub fn read_f64s<R: Read>(r: &mut R, expected: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let want = expected * 8;
    if bytes.len() % 8 != 0 {
        return Err(FormatError::Truncated {
            expected: want,
            actual: bytes.len(),
        }
        .into());
    }
    if bytes.len() != want {
        return Err(FormatError::LengthMismatch {
            expected,
            actual: bytes.len() / 8,
        }
        .into());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn short_and_long_payloads() {
        let mut buf = Vec::new();
        write_f64s(&mut buf, [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(read_f64s(&mut buf.as_slice(), 3).unwrap(), vec![1.0, 2.0, 3.0]);
        let short = &buf[..23];
        assert!(matches!(
            read_f64s(&mut &short[..], 3),
            Err(Error::Format(FormatError::Truncated { expected: 24, actual: 23 }))
        ));
        assert!(matches!(
            read_f64s(&mut buf.as_slice(), 9),
            Err(Error::Format(FormatError::LengthMismatch { expected: 9, actual: 3 }))
        ));
    }
}
