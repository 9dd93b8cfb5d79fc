//! Binary snapshot and checkpoint files, plus CSV writers.
//!
//! Snapshot layout (all little-endian):
//!
//! | bytes | content                          |
//! |-------|----------------------------------|
//! | 8     | magic `OKDVSNAP`                 |
//! | 4     | format version (u32)             |
//! | 4     | nonlinearity power `k` (u32)     |
//! | 8     | `n` (u64)                        |
//! | 8     | domain length (f64)              |
//! | 8     | time (f64)                       |
//! | 8     | coefficient digest (u64)         |
//! | 8·n   | physical samples (f64)           |
//!
//! Checkpoints use magic `OKDVCKPT` and carry the full stepping state.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::dynamics::{RunState, ScalarRecord};
use crate::error::{Error, Result};
use crate::forcing::CoefficientSpec;
use crate::spectral::{make_grid, Field, Grid1D};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"OKDVSNAP";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"OKDVCKPT";
pub const FORMAT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 48;
const CHECKPOINT_HEADER_LEN: usize = 80;

pub const SCALAR_CSV_HEADER: [&str; 5] = ["t", "mass", "energy", "h1_norm", "g_value"];

/// First eight bytes of the SHA-256 of the coefficient's JSON form.
pub fn coefficient_digest(spec: &CoefficientSpec) -> u64 {
    let json = serde_json::to_string(spec).expect("coefficient spec serializes");
    digest_u64(json.as_bytes())
}

pub(crate) fn digest_u64(bytes: &[u8]) -> u64 {
    let hash = Sha256::digest(bytes);
    u64::from_le_bytes(hash[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub version: u32,
    pub k: u32,
    pub domain_length: f64,
    pub time: f64,
    pub coefficient_digest: u64,
    pub values: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.f64()).collect()
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Write via a temporary sibling and rename, so readers never see a
/// partially written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, bytes: &[u8], magic: &[u8; 8], header_len: usize) -> Result<u64> {
    if bytes.len() < header_len {
        return Err(format_err(path, format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..8] != magic {
        return Err(format_err(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(8)
        .and_then(|p| p.checked_add(header_len as u64))
        .ok_or_else(|| format_err(path, "grid size overflows"))?;
    if bytes.len() as u64 != expected {
        return Err(format_err(
            path,
            format!("header declares n = {n} but payload holds {} bytes", bytes.len() - header_len),
        ));
    }
    Ok(n)
}

impl SnapshotFile {
    pub fn from_field(field: &Field, time: f64, k: u32, coefficient_digest: u64) -> Self {
        Self {
            version: FORMAT_VERSION,
            k,
            domain_length: field.grid().domain_length(),
            time,
            coefficient_digest,
            values: field.physical_values().into_owned(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.domain_length.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.coefficient_digest.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let n = check_header(path, bytes, SNAPSHOT_MAGIC, SNAPSHOT_HEADER_LEN)? as usize;
        let mut r = Reader { bytes, pos: 8 };
        let version = r.u32();
        let k = r.u32();
        r.u64();
        Ok(Self {
            version,
            k,
            domain_length: r.f64(),
            time: r.f64(),
            coefficient_digest: r.u64(),
            values: r.f64s(n),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }

    pub fn grid(&self) -> Result<Arc<Grid1D>> {
        make_grid(self.n(), self.domain_length)
    }

    pub fn to_field(&self) -> Result<Field> {
        Ok(Field::from_physical(self.grid()?, self.values.clone()))
    }
}

/// Everything needed to continue a run bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub domain_length: f64,
    /// Digest of the settings the run was started with; resuming under
    /// different settings is refused.
    pub run_digest: u64,
    pub state: RunState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let mut out = Vec::with_capacity(CHECKPOINT_HEADER_LEN + 8 * s.u.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&(s.u.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.domain_length.to_le_bytes());
        out.extend_from_slice(&self.run_digest.to_le_bytes());
        out.extend_from_slice(&s.t.to_le_bytes());
        out.extend_from_slice(&(s.segment as u64).to_le_bytes());
        out.extend_from_slice(&s.step_in_segment.to_le_bytes());
        out.extend_from_slice(&s.steps_taken.to_le_bytes());
        out.extend_from_slice(&s.initial_h1.to_le_bytes());
        for v in &s.u {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let n = check_header(path, bytes, CHECKPOINT_MAGIC, CHECKPOINT_HEADER_LEN)? as usize;
        let mut r = Reader { bytes, pos: 24 };
        let domain_length = r.f64();
        let run_digest = r.u64();
        let t = r.f64();
        let segment = r.u64() as usize;
        let step_in_segment = r.u64();
        let steps_taken = r.u64();
        let initial_h1 = r.f64();
        let u = r.f64s(n);
        Ok(Self {
            domain_length,
            run_digest,
            state: RunState {
                u,
                t,
                segment,
                step_in_segment,
                steps_taken,
                initial_h1,
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

pub fn write_scalars_csv(path: &Path, records: &[ScalarRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SCALAR_CSV_HEADER)?;
    for r in records {
        w.write_record([r.t, r.mass, r.energy, r.h1_norm, r.g_value].map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Snapshot file name for output index `i` (0 is the initial datum).
pub fn snapshot_name(i: usize) -> String {
    format!("snap_{i:05}.bin")
}

/// Snapshot files in a directory, sorted by name.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::gaussian;
    use proptest::prelude::*;

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let grid = make_grid(64, 31.4).unwrap();
        let f = gaussian(&grid, 0.7, 1.3, 0.2);
        let snap = SnapshotFile::from_field(&f, 0.125, 5, 42);
        let bytes = snap.to_bytes();
        assert_eq!(bytes.len(), SNAPSHOT_HEADER_LEN + 64 * 8);
        let back = SnapshotFile::from_bytes(Path::new("mem"), &bytes).unwrap();
        assert_eq!(back, snap);
        let field = back.to_field().unwrap();
        assert_eq!(field.physical_values(), f.physical_values());
        assert_eq!(field.grid(), f.grid());
    }

    #[test]
    fn truncated_and_foreign_files_are_rejected() {
        let grid = make_grid(16, 1.0).unwrap();
        let bytes = SnapshotFile::from_field(&Field::zeros(grid), 0.0, 5, 0).to_bytes();
        let p = Path::new("mem");
        assert!(SnapshotFile::from_bytes(p, &bytes[..bytes.len() - 8]).is_err());
        assert!(SnapshotFile::from_bytes(p, &bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(SnapshotFile::from_bytes(p, &bad).is_err());
        let mut newer = bytes;
        newer[8] = 2;
        assert!(SnapshotFile::from_bytes(p, &newer).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let ck = Checkpoint {
            domain_length: 12.5,
            run_digest: 0xdead_beef,
            state: RunState {
                u: vec![1.0, -0.0, f64::MIN_POSITIVE, 3.25e-300],
                t: 0.3,
                segment: 2,
                step_in_segment: 17,
                steps_taken: 417,
                initial_h1: 0.49,
            },
        };
        let back = Checkpoint::from_bytes(Path::new("mem"), &ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.state.u[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn digests_distinguish_coefficients() {
        let a = CoefficientSpec::cosine(6.0).unwrap().with_frequency(50.0, 0.0);
        let b = a.with_frequency(50.0, 0.1);
        assert_ne!(coefficient_digest(&a), coefficient_digest(&b));
        assert_eq!(coefficient_digest(&a), coefficient_digest(&a.clone()));
    }

    proptest! {
        #[test]
        fn arbitrary_payload_survives(values in proptest::collection::vec(any::<f64>(), 16), t in any::<f64>()) {
            let snap = SnapshotFile { version: FORMAT_VERSION, k: 5, domain_length: 3.0, time: t, coefficient_digest: 7, values };
            let back = SnapshotFile::from_bytes(Path::new("mem"), &snap.to_bytes()).unwrap();
            let a: Vec<u64> = snap.values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(snap.time.to_bits(), back.time.to_bits());
        }
    }
}
