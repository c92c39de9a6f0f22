//! Little-endian binary helpers shared by the on-disk formats.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], version: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)?;
    Ok(())
}

/// Reads a magic tag and version, rejecting anything but `expected_version`.
pub(crate) fn read_header<R: Read>(
    r: &mut R,
    magic: &[u8; 4],
    expected_version: u32,
) -> Result<()> {
    let mut tag = [0u8; 4];
    read_exact(r, &mut tag)?;
    if &tag != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&tag),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != expected_version {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {expected_version}"
        )));
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated file".into())
    } else {
        Error::Io(e)
    }
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(truncated)
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    r.read_u32::<LittleEndian>().map_err(truncated)
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    r.read_u64::<LittleEndian>().map_err(truncated)
}

pub(crate) fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in memory")))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    // guard against absurd lengths in corrupted headers before allocating
    if count > (1usize << 34) {
        return Err(Error::Format(format!("implausible array length {count}")));
    }
    let mut out = vec![0.0; count];
    r.read_f64_into::<LittleEndian>(&mut out)
        .map_err(truncated)?;
    Ok(out)
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_u32::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_u64::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

/// Fails unless the reader is exhausted.
pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}
