use super::CliError;
use crate::model::NerfModel;
use crate::real::{Dtype, Real};
use crate::renderer::{Aabb, OccupancyBitfield};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FHCP";
const VERSION: u8 = 1;

/// Little-endian container: magic, version, config snapshot, step counter,
/// length-prefixed named parameter arrays, bitfield state, then an FNV-1a64
/// checksum of everything after the magic.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u8,
    pub config_text: String,
    pub step: u64,
    pub arrays: Vec<CheckpointArray>,
    pub bitfield: OccupancyBitfield,
}

#[derive(Debug, Clone)]
pub struct CheckpointArray {
    pub name: String,
    pub dtype: Dtype,
    pub data: Vec<u8>,
}

impl CheckpointArray {
    pub fn len(&self) -> usize {
        self.data.len() / self.dtype.size()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn decode<R: Real>(&self) -> Result<Vec<R>, CliError> {
        if self.dtype != R::DTYPE {
            return Err(CliError::Checkpoint(format!(
                "array {}: stored dtype {:?} does not match requested {:?}",
                self.name,
                self.dtype,
                R::DTYPE
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.dtype.size())
            .map(R::from_le_bytes)
            .collect())
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        if self.pos + n > self.buf.len() {
            return Err(CliError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, CliError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CliError::Checkpoint("non-utf8 string".into()))
    }
}

/// Serializes model parameters, step counter, and bitfield.
pub fn save_checkpoint<R: Real>(
    model: &NerfModel<R>,
    bitfield: &OccupancyBitfield,
    step: u64,
    config_text: &str,
    path: &Path,
) -> Result<(), CliError> {
    let mut payload = Vec::new();
    payload.push(VERSION);
    push_str(&mut payload, config_text);
    payload.extend_from_slice(&step.to_le_bytes());

    let names = model.param_names();
    let arrays = model.param_arrays();
    payload.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, arr) in names.iter().zip(arrays) {
        push_str(&mut payload, name);
        payload.push(R::DTYPE.code());
        payload.extend_from_slice(&(arr.len() as u64).to_le_bytes());
        for &v in arr {
            v.write_le_bytes(&mut payload);
        }
    }

    payload.extend_from_slice(&(bitfield.resolution as u32).to_le_bytes());
    for i in 0..3 {
        payload.extend_from_slice(&bitfield.aabb.min[i].to_le_bytes());
    }
    for i in 0..3 {
        payload.extend_from_slice(&bitfield.aabb.max[i].to_le_bytes());
    }
    let n = bitfield.bits.len();
    let mut packed = vec![0u8; n.div_ceil(8)];
    for (i, &b) in bitfield.bits.iter().enumerate() {
        if b {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    payload.extend_from_slice(&packed);
    for &c in &bitfield.density_cache {
        payload.extend_from_slice(&c.to_le_bytes());
    }

    let checksum = fnv1a64(&payload);
    let mut out = Vec::with_capacity(4 + payload.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&checksum.to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(CliError::Checkpoint(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let payload = &bytes[4..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let actual = fnv1a64(payload);
    if stored != actual {
        return Err(CliError::ChecksumMismatch { stored, actual });
    }

    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    let version = r.u8()?;
    if version != VERSION {
        return Err(CliError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let config_text = r.string()?;
    let step = r.u64()?;
    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let dtype = Dtype::from_code(r.u8()?)
            .ok_or_else(|| CliError::Checkpoint(format!("array {name}: unknown dtype")))?;
        let len = r.u64()? as usize;
        let data = r.take(len * dtype.size())?.to_vec();
        arrays.push(CheckpointArray { name, dtype, data });
    }

    let resolution = r.u32()? as usize;
    let mut aabb_min = [0.0; 3];
    let mut aabb_max = [0.0; 3];
    for v in &mut aabb_min {
        *v = r.f64()?;
    }
    for v in &mut aabb_max {
        *v = r.f64()?;
    }
    let n = resolution * resolution * resolution;
    let packed = r.take(n.div_ceil(8))?;
    let bits: Vec<bool> = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    let mut density_cache = Vec::with_capacity(n);
    for _ in 0..n {
        density_cache.push(f32::from_le_bytes(r.take(4)?.try_into().unwrap()));
    }

    let mut bitfield = OccupancyBitfield::new(resolution, Aabb::new(aabb_min, aabb_max));
    bitfield.bits = bits;
    bitfield.density_cache = density_cache;

    Ok(Checkpoint {
        version,
        config_text,
        step,
        arrays,
        bitfield,
    })
}

impl Checkpoint {
    /// Copies the stored arrays into a freshly built model; names and shapes
    /// must match exactly.
    pub fn apply_to_model<R: Real>(&self, model: &mut NerfModel<R>) -> Result<(), CliError> {
        let names = model.param_names();
        let mut params = model.param_arrays_mut();
        if names.len() != self.arrays.len() {
            return Err(CliError::Checkpoint(format!(
                "checkpoint holds {} arrays, model expects {}",
                self.arrays.len(),
                names.len()
            )));
        }
        for ((name, param), stored) in names.iter().zip(params.iter_mut()).zip(&self.arrays) {
            if &stored.name != name {
                return Err(CliError::Checkpoint(format!(
                    "array order mismatch: checkpoint has {}, model expects {name}",
                    stored.name
                )));
            }
            let decoded: Vec<R> = stored.decode()?;
            if decoded.len() != param.len() {
                return Err(CliError::ShapeMismatch {
                    name: name.clone(),
                    expected: param.len(),
                    got: decoded.len(),
                });
            }
            param.copy_from_slice(&decoded);
        }
        Ok(())
    }
}
