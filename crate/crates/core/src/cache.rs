//! Versioned binary container for a diagonalized sector.
//!
//! Layout (little endian):
//!
//! ```text
//! magic          8 bytes  "PXPSPEC\0"
//! format_version u32
//! n_sites        u32
//! sector_id      u32 length + UTF-8
//! dim            u64
//! observable_id  u32 length + UTF-8
//! energies       dim x f64
//! vectors        dim*dim x f64, row-major
//! checksum       u64, FNV-1a over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

pub const MAGIC: &[u8; 8] = b"PXPSPEC\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheHeader {
    pub format_version: u32,
    pub n_sites: u32,
    pub sector_id: String,
    pub dim: u64,
    pub observable_id: String,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(
    spec: &Spectrum,
    n_sites: usize,
    sector_id: &str,
    observable_id: &str,
) -> Vec<u8> {
    let d = spec.dim();
    let mut buf = Vec::with_capacity(64 + 8 * d * (d + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n_sites as u32).to_le_bytes());
    put_str(&mut buf, sector_id);
    buf.extend_from_slice(&(d as u64).to_le_bytes());
    put_str(&mut buf, observable_id);
    for e in spec.energies() {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    let v = spec.vectors();
    for i in 0..d {
        for j in 0..d {
            buf.extend_from_slice(&v[(i, j)].to_le_bytes());
        }
    }
    let sum = fnv1a64(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Cache("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Cache("identifier is not UTF-8".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(CacheHeader, Spectrum)> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Cache("not a spectrum cache".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());

    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let format_version = r.u32()?;
    if format_version != FORMAT_VERSION {
        return Err(Error::Cache(format!(
            "format version {format_version}, expected {FORMAT_VERSION}"
        )));
    }
    if fnv1a64(body) != stored {
        return Err(Error::Cache("checksum mismatch".into()));
    }
    let n_sites = r.u32()?;
    let sector_id = r.string()?;
    let dim = r.u64()?;
    let observable_id = r.string()?;
    let d = usize::try_from(dim).map_err(|_| Error::Cache("dimension overflow".into()))?;
    let expected = d
        .checked_mul(d + 1)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Cache("dimension overflow".into()))?;
    if body.len() - r.pos != expected {
        return Err(Error::Cache("payload length does not match dimension".into()));
    }
    let energies = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let data = (0..d * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let vectors = DMatrix::from_row_slice(d, d, &data);
    let spec = Spectrum::from_parts(energies, vectors).map_err(|e| Error::Cache(e.to_string()))?;
    Ok((
        CacheHeader {
            format_version,
            n_sites,
            sector_id,
            dim,
            observable_id,
        },
        spec,
    ))
}

pub fn checksum_of(bytes: &[u8]) -> Option<u64> {
    let tail = bytes.len().checked_sub(8)?;
    Some(u64::from_le_bytes(bytes[tail..].try_into().ok()?))
}

/// Conventional file name for a chain length inside a cache directory.
pub fn cache_path(dir: &Path, n_sites: usize, sector_id: &str) -> PathBuf {
    dir.join(format!("pxp_n{n_sites}_{sector_id}.spec"))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("spec.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads and validates a cache, additionally checking the header against
/// what the caller expects.
pub fn read(path: &Path, n_sites: usize, sector_id: &str) -> Result<(CacheHeader, Spectrum)> {
    let bytes = fs::read(path)?;
    let (header, spec) = decode(&bytes)?;
    if header.n_sites as usize != n_sites || header.sector_id != sector_id {
        return Err(Error::Cache(format!(
            "header describes N={} sector {}, expected N={n_sites} sector {sector_id}",
            header.n_sites, header.sector_id
        )));
    }
    Ok((header, spec))
}
