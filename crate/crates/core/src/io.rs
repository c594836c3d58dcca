//! File formats for signals, decompositions and level energies.
//!
//! Binary containers are a 16-byte header followed by little-endian `f64`
//! values:
//!
//! | format        | header                                            |
//! |---------------|---------------------------------------------------|
//! | signal        | `b"HSIG0001"`, `N: u64`                           |
//! | decomposition | `b"HDWT01"`, `j0: u16`, `N: u64`; pyramid order  |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{HurstError, Result};
use crate::fbm::Signal;
use crate::wavelet::{LevelEnergy, WaveletDecomposition};

pub const SIGNAL_MAGIC: &[u8; 8] = b"HSIG0001";
pub const DECOMPOSITION_MAGIC: &[u8; 6] = b"HDWT01";
const HEADER_LEN: usize = 16;

fn parse_err(offset: usize, message: impl Into<String>) -> HurstError {
    HurstError::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

/// One-column CSV with header `value`.
pub fn write_signal_csv<W: Write>(signal: &Signal, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value"])?;
    for v in signal.samples() {
        // `{:?}` prints the shortest representation that reads back exactly.
        w.write_record([format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signal_csv<R: Read>(input: R) -> Result<Signal> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() != 1 || header.get(0).map(str::trim) != Some("value") {
        return Err(parse_err(
            0,
            format!("expected header `value`, found `{}`", header.as_slice()),
        ));
    }
    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let offset = r.position().byte() as usize;
        if !r.read_record(&mut record)? {
            break;
        }
        let field = record.get(0).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| parse_err(offset, format!("`{field}` is not a number")))?;
        if !v.is_finite() {
            return Err(parse_err(offset, format!("`{field}` is not finite")));
        }
        samples.push(v);
    }
    Signal::new(samples)
}

pub fn write_signal_bin<W: Write>(signal: &Signal, mut out: W) -> Result<()> {
    out.write_all(SIGNAL_MAGIC)?;
    out.write_all(&(signal.len() as u64).to_le_bytes())?;
    for v in signal.samples() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_f64s(bytes: &[u8], start: usize, count: usize) -> Result<Vec<f64>> {
    let needed = start + 8 * count;
    if bytes.len() < needed {
        return Err(parse_err(
            bytes.len(),
            format!("file ends early: {needed} bytes expected"),
        ));
    }
    if bytes.len() > needed {
        return Err(parse_err(needed, "trailing bytes after the last value"));
    }
    Ok(bytes[start..needed]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_signal_bin(bytes: &[u8]) -> Result<Signal> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(
            bytes.len(),
            "file shorter than the 16-byte header",
        ));
    }
    if &bytes[..8] != SIGNAL_MAGIC {
        return Err(parse_err(0, "bad magic, not a signal container"));
    }
    let n = usize::try_from(u64_at(bytes, 8))
        .map_err(|_| parse_err(8, "length does not fit in memory"))?;
    let samples = read_f64s(bytes, HEADER_LEN, n)?;
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(parse_err(HEADER_LEN + 8 * i, "non-finite sample"));
    }
    Signal::new(samples)
}

pub fn write_decomposition_bin<W: Write>(decomp: &WaveletDecomposition, mut out: W) -> Result<()> {
    let j0 =
        u16::try_from(decomp.j0()).map_err(|_| HurstError::domain("j0 does not fit in 16 bits"))?;
    out.write_all(DECOMPOSITION_MAGIC)?;
    out.write_all(&j0.to_le_bytes())?;
    out.write_all(&(decomp.signal_len() as u64).to_le_bytes())?;
    for v in decomp.to_vec() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn decode_decomposition_bin(bytes: &[u8]) -> Result<WaveletDecomposition> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(
            bytes.len(),
            "file shorter than the 16-byte header",
        ));
    }
    if &bytes[..6] != DECOMPOSITION_MAGIC {
        return Err(parse_err(0, "bad magic, not a decomposition container"));
    }
    let j0 = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let n = usize::try_from(u64_at(bytes, 8))
        .map_err(|_| parse_err(8, "length does not fit in memory"))?;
    if n < 2 || !n.is_power_of_two() {
        return Err(parse_err(
            8,
            format!("coefficient count {n} is not a power of two >= 2"),
        ));
    }
    if j0 >= n.trailing_zeros() as usize {
        return Err(parse_err(6, format!("j0 = {j0} out of range for N = {n}")));
    }
    WaveletDecomposition::from_vec(j0, &read_f64s(bytes, HEADER_LEN, n)?)
}

/// Reads a signal, choosing the binary container when the magic matches and CSV otherwise.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.starts_with(SIGNAL_MAGIC) {
        decode_signal_bin(&bytes)
    } else {
        read_signal_csv(bytes.as_slice())
    }
}

/// Writes a signal as binary when the extension is `.bin`, CSV otherwise.
pub fn write_signal(signal: &Signal, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "bin") {
        write_signal_bin(signal, out)
    } else {
        write_signal_csv(signal, out)
    }
}

pub fn read_decomposition(path: &Path) -> Result<WaveletDecomposition> {
    decode_decomposition_bin(&std::fs::read(path)?)
}

#[derive(Serialize)]
struct EnergyRow {
    level: usize,
    count: usize,
    mean_sq: f64,
    log2_energy: Option<f64>,
}

/// CSV of `level, count, mean_sq, log2_energy`; degenerate levels leave the last column empty.
pub fn write_energies_csv<W: Write>(energies: &[LevelEnergy], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in energies {
        w.serialize(EnergyRow {
            level: e.level,
            count: e.count,
            mean_sq: e.mean_sq,
            log2_energy: e.log2_energy,
        })?;
    }
    w.flush()?;
    Ok(())
}
