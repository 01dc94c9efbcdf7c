//! Binary tensor records and named bundles of them.
//!
//! A tensor record is `"SPDT"`, version, dtype code, rank, one `u64` per
//! dimension, the little-endian row-major payload and a CRC32 of the payload.
//! A bundle is `"SPDB"`, version, entry count, a `key=value` metadata block and
//! then, per entry, a length-prefixed UTF-8 name followed by a tensor record.
//! All integers are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

const TENSOR_MAGIC: &[u8; 4] = b"SPDT";
const BUNDLE_MAGIC: &[u8; 4] = b"SPDB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    fn dtype_code(&self) -> u32 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::F64(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f64(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let t = Tensor {
            dims: dims.iter().map(|&d| d as u64).collect(),
            data: TensorData::F64(data),
        };
        t.check()?;
        Ok(t)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            dims: vec![data.len() as u64],
            data: TensorData::F64(data),
        }
    }

    fn element_count(&self) -> Result<usize> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
            .context("tensor dimensions overflow")
    }

    fn check(&self) -> Result<()> {
        let n = self.element_count()?;
        ensure!(n == self.data.len(), "tensor dims {:?} hold {n} values, payload has {}", self.dims, self.data.len());
        Ok(())
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F64(v) => v.clone(),
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims.iter().map(|&d| d as usize).collect()
    }

    pub fn encode(&self, out: &mut Vec<u8>) -> Result<()> {
        self.check()?;
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.data.dtype_code().to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        let start = out.len();
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.encode(&mut out)?;
        Ok(out)
    }

    /// Parses one record from the front of `reader`.
    fn decode(reader: &mut Reader<'_>) -> Result<Self> {
        ensure!(reader.take(4)? == TENSOR_MAGIC, "not a tensor record (bad magic)");
        let version = reader.u32()?;
        ensure!(version == FORMAT_VERSION, "unsupported tensor format version {version}");
        let dtype = reader.u32()?;
        let ndim = reader.u32()? as usize;
        ensure!(ndim <= 16, "implausible tensor rank {ndim}");
        let dims = (0..ndim).map(|_| reader.u64()).collect::<Result<Vec<_>>>()?;
        let probe = Tensor { dims: dims.clone(), data: TensorData::F64(Vec::new()) };
        let count = probe.element_count()?;
        let width = match dtype {
            1 => 4,
            2 => 8,
            other => bail!("unknown tensor dtype code {other}"),
        };
        let payload = reader.take(count.checked_mul(width).context("tensor payload size overflows")?)?;
        let crc = reader.u32()?;
        ensure!(crc32fast::hash(payload) == crc, "tensor payload CRC mismatch");
        let data = if width == 4 {
            TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        } else {
            TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        Ok(Tensor { dims, data })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader { bytes, pos: 0 };
        let t = Self::decode(&mut reader)?;
        ensure!(reader.pos == bytes.len(), "{} trailing bytes after tensor record", bytes.len() - reader.pos);
        Ok(t)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.with_context(|| format!("truncated record: need {n} bytes at offset {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Named tensors plus string metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<(String, Tensor)>,
}

impl Bundle {
    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .with_context(|| format!("bundle metadata lacks `{key}`"))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.meta(key)?;
        raw.parse().map_err(|e| anyhow::anyhow!("metadata `{key}` = {raw:?}: {e}"))
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) {
        self.entries.push((name.to_string(), tensor));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .with_context(|| format!("bundle has no tensor named `{name}`"))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut meta = String::new();
        for (k, v) in &self.meta {
            ensure!(!k.contains(['=', '\n']) && !v.contains('\n'), "metadata `{k}` cannot be stored");
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for (name, tensor) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            tensor.encode(&mut out)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        ensure!(r.take(4)? == BUNDLE_MAGIC, "not a bundle file (bad magic)");
        let version = r.u32()?;
        ensure!(version == FORMAT_VERSION, "unsupported bundle format version {version}");
        let count = r.u32()? as usize;
        let meta_len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(meta_len)?).context("bundle metadata is not UTF-8")?;
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line.split_once('=').with_context(|| format!("bad metadata line {line:?}"))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(n)?).context("tensor name is not UTF-8")?.to_string();
            let tensor = Tensor::decode(&mut r).with_context(|| format!("tensor `{name}`"))?;
            entries.push((name, tensor));
        }
        ensure!(r.pos == bytes.len(), "{} trailing bytes after bundle", bytes.len() - r.pos);
        Ok(Bundle { meta, entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("corrupt bundle {}", path.display()))
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    write_atomic(path, &tensor.to_bytes()?)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Tensor::from_bytes(&bytes).with_context(|| format!("corrupt tensor file {}", path.display()))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}
