//! Binary trace file, little-endian:
//!
//! ```text
//! "OTFSTRC1"            8 bytes
//! Nf, Nt                u32, u32
//! subcarrier_spacing_hz f64
//! snapshot_interval_s   f64
//! carrier_hz            f64
//! label_length          u32, followed by that many UTF-8 bytes
//! payload               Nf*Nt (re, im) f64 pairs, row-major, f = row
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use super::ChannelTrace;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OTFSTRC1";
const MAGIC_FAMILY: &[u8; 7] = b"OTFSTRC";

pub fn write_trace<W: Write>(trace: &ChannelTrace, mut w: W) -> Result<()> {
    let (nf, nt) = trace.h().dim();
    let dims = |v: usize| u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")));
    let label = trace.label().as_bytes();

    let mut buf = Vec::with_capacity(48 + label.len() + nf * nt * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&dims(nf)?.to_le_bytes());
    buf.extend_from_slice(&dims(nt)?.to_le_bytes());
    buf.extend_from_slice(&trace.subcarrier_spacing_hz().to_le_bytes());
    buf.extend_from_slice(&trace.snapshot_interval_s().to_le_bytes());
    buf.extend_from_slice(&trace.carrier_hz().to_le_bytes());
    buf.extend_from_slice(&dims(label.len())?.to_le_bytes());
    buf.extend_from_slice(label);
    for z in trace.h().iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_trace(trace: &ChannelTrace, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated file while reading {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_trace<R: Read>(mut r: R) -> Result<ChannelTrace> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ChannelTrace> {
    parse(&fs::read(path)?)
}

fn parse(bytes: &[u8]) -> Result<ChannelTrace> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c.take(8, "magic")?;
    if magic != MAGIC {
        if magic.starts_with(MAGIC_FAMILY) {
            return Err(Error::Format(format!(
                "unsupported trace version '{}'",
                magic[7].escape_ascii()
            )));
        }
        return Err(Error::Format("bad magic".into()));
    }
    let nf = c.u32("Nf")? as usize;
    let nt = c.u32("Nt")? as usize;
    let spacing = c.f64("subcarrier spacing")?;
    let interval = c.f64("snapshot interval")?;
    let carrier = c.f64("carrier")?;
    let label_len = c.u32("label length")? as usize;
    let label = std::str::from_utf8(c.take(label_len, "label")?)
        .map_err(|_| Error::Format("label is not UTF-8".into()))?
        .to_owned();

    let payload_len = nf
        .checked_mul(nt)
        .and_then(|v| v.checked_mul(16))
        .ok_or_else(|| Error::Format(format!("dimensions {nf}x{nt} overflow")))?;
    let remaining = bytes.len() - c.pos;
    if remaining != payload_len {
        return Err(Error::Format(format!(
            "payload is {remaining} bytes, header declares {nf}x{nt} samples ({payload_len} bytes)"
        )));
    }
    let samples = c
        .take(payload_len, "payload")?
        .chunks_exact(16)
        .map(|p| {
            Complex64::new(
                f64::from_le_bytes(p[..8].try_into().unwrap()),
                f64::from_le_bytes(p[8..].try_into().unwrap()),
            )
        })
        .collect();
    let h = Array2::from_shape_vec((nf, nt), samples).expect("length checked");
    ChannelTrace::new(h, spacing, interval, carrier, label)
}
