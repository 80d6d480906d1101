//! On-disk cache for eigendecompositions.
//!
//! Layout (little endian): magic, hash length + hash, dimension, phases,
//! residuals, eigenvectors column-major as `(re, im)` pairs, then a SHA-256
//! of everything before it.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::SpectralDecomposition;

const MAGIC: &[u8; 8] = b"AQWEIG02";

pub fn cache_path(dir: &Path, parameter_hash: &str) -> PathBuf {
    dir.join(format!("eig-{}.bin", &parameter_hash[..parameter_hash.len().min(16)]))
}

struct HashingWriter<W> {
    inner: W,
    digest: Sha256,
}

impl<W: Write> HashingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.digest.update(bytes);
        self.inner.write_all(bytes)
    }
}

pub fn write_decomposition(path: &Path, d: &SpectralDecomposition) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("bin.partial");
    {
        let mut w = HashingWriter {
            inner: BufWriter::new(File::create(&tmp)?),
            digest: Sha256::new(),
        };
        let hash = d.parameter_hash().as_bytes();
        w.put(MAGIC)?;
        w.put(&(hash.len() as u32).to_le_bytes())?;
        w.put(hash)?;
        w.put(&(d.len() as u64).to_le_bytes())?;
        for p in d.phases() {
            w.put(&p.to_le_bytes())?;
        }
        for r in d.residuals() {
            w.put(&r.to_le_bytes())?;
        }
        let v = d.vectors();
        for j in 0..v.ncols() {
            for i in 0..v.nrows() {
                let z = v[(i, j)];
                w.put(&z.re.to_le_bytes())?;
                w.put(&z.im.to_le_bytes())?;
            }
        }
        let sum = w.digest.finalize();
        w.inner.write_all(&sum)?;
        w.inner.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct HashingReader<R> {
    inner: R,
    digest: Sha256,
}

impl<R: Read> HashingReader<R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::CacheCorrupt(format!("truncated: {e}")))?;
        self.digest.update(buf);
        Ok(buf)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>()?))
    }
}

/// Reads a cached decomposition. `Ok(None)` means no file; a file that is
/// unreadable, truncated, fails its checksum or belongs to other parameters
/// is an `Error::CacheCorrupt`.
pub fn read_decomposition(path: &Path, expected_hash: &str) -> Result<Option<SpectralDecomposition>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = HashingReader {
        inner: BufReader::new(file),
        digest: Sha256::new(),
    };
    if &r.take::<8>()? != MAGIC {
        return Err(Error::CacheCorrupt("bad magic".into()));
    }
    let hash_len = u32::from_le_bytes(r.take::<4>()?) as usize;
    if hash_len > 256 {
        return Err(Error::CacheCorrupt("implausible hash length".into()));
    }
    let mut hash = vec![0u8; hash_len];
    r.inner
        .read_exact(&mut hash)
        .map_err(|e| Error::CacheCorrupt(format!("truncated: {e}")))?;
    r.digest.update(&hash);
    let hash = String::from_utf8(hash).map_err(|_| Error::CacheCorrupt("hash is not UTF-8".into()))?;
    if hash != expected_hash {
        return Err(Error::CacheCorrupt(format!(
            "parameter hash {hash} does not match {expected_hash}"
        )));
    }
    let n = u64::from_le_bytes(r.take::<8>()?) as usize;
    if n == 0 || n > 100_000 {
        return Err(Error::CacheCorrupt(format!("implausible dimension {n}")));
    }
    let phases = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let residuals = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut vectors = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let re = r.f64()?;
            let im = r.f64()?;
            vectors[(i, j)] = Complex64::new(re, im);
        }
    }
    let computed = r.digest.finalize();
    let mut stored = [0u8; 32];
    r.inner
        .read_exact(&mut stored)
        .map_err(|e| Error::CacheCorrupt(format!("missing checksum: {e}")))?;
    if computed.as_slice() != stored {
        return Err(Error::CacheCorrupt("checksum mismatch".into()));
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(Error::CacheCorrupt("trailing bytes".into()));
    }
    Ok(Some(SpectralDecomposition::from_parts(phases, vectors, residuals, hash)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
    /// The file was unusable and has been replaced.
    Recomputed,
}

/// Loads the decomposition from `dir` if a valid entry exists, otherwise
/// runs `compute` and stores the result. Corrupt entries are reported via
/// `warn` and overwritten.
pub fn load_or_compute(
    dir: &Path,
    parameter_hash: &str,
    compute: impl FnOnce() -> Result<SpectralDecomposition>,
    mut warn: impl FnMut(&str),
) -> Result<(SpectralDecomposition, CacheOutcome)> {
    let path = cache_path(dir, parameter_hash);
    let outcome = match read_decomposition(&path, parameter_hash) {
        Ok(Some(d)) => return Ok((d, CacheOutcome::Hit)),
        Ok(None) => CacheOutcome::Miss,
        Err(e @ Error::CacheCorrupt(_)) => {
            warn(&format!("{}: {e}; recomputing", path.display()));
            CacheOutcome::Recomputed
        }
        Err(e) => return Err(e),
    };
    let d = compute()?;
    write_decomposition(&path, &d)?;
    Ok((d, outcome))
}
