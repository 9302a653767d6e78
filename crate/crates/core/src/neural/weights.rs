//! Named tensor stores and the `VSW1` weight file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"VSW1"  u32 tensor_count
//! per tensor:
//!   u16 name_len  name (UTF-8)  u8 rank  rank x u32 dims  prod(dims) x f32
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::NetSpec;
use super::Tensor;
use crate::error::{io_err, Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"VSW1";

/// Named tensors in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T> Default for WeightStore<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
        }
    }
}

impl<T: Scalar> WeightStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<()> {
        let name = name.into();
        check_name(&name)?;
        if self.get(&name).is_some() {
            return Err(Error::DuplicateTensor(name));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub(crate) fn require(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn cast<U: Scalar>(&self) -> WeightStore<U> {
        WeightStore {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
        }
    }

    /// Serializes to `VSW1`, storing every value as `f32`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::InvalidParameter("too many tensors".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.entries {
            let len = u16::try_from(name.len()).map_err(|_| {
                Error::InvalidTensorName(format!("name longer than 65535 bytes: {name:?}"))
            })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.rank()).map_err(|_| Error::TensorShape {
                name: name.clone(),
                reason: format!("rank {} exceeds 255", t.rank()),
            })?;
            out.push(rank);
            for &d in t.dims() {
                let d = u32::try_from(d).map_err(|_| Error::TensorShape {
                    name: name.clone(),
                    reason: format!("dimension {d} exceeds u32"),
                })?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a complete `VSW1` buffer. Trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let count = r.u32("tensor count")?;
        let mut store = Self::new();
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "tensor name")?)
                .map_err(|e| Error::InvalidTensorName(format!("not UTF-8: {e}")))?
                .to_string();
            let rank = r.take(1, "tensor rank")?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32("tensor dims")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or(Error::Truncated("tensor data"))?;
            let raw = r.take(n, "tensor data")?;
            let mut data = Vec::with_capacity(n / 4);
            for chunk in raw.chunks_exact(4) {
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::NonFinite(name));
                }
                data.push(T::of(v as f64));
            }
            store.insert(name, Tensor::from_raw(dims, data))?;
        }
        if r.pos != bytes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} trailing bytes after last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(io_err(path))?)
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::InvalidTensorName("empty name".into()));
    }
    if name.len() > u16::MAX as usize {
        return Err(Error::InvalidTensorName(format!(
            "name of {} bytes",
            name.len()
        )));
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Weights for every tensor of `spec`, drawn uniformly from
/// `[-scale / sqrt(fan_in), scale / sqrt(fan_in)]`; biases start at zero.
pub fn random_weights<T: Scalar>(spec: &NetSpec, seed: u64, scale: f64) -> WeightStore<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for t in spec.tensors() {
        let len: usize = t.shape.iter().product();
        let data = if t.is_bias {
            vec![T::zero(); len]
        } else {
            let bound = scale / (t.fan_in.max(1) as f64).sqrt();
            (0..len)
                .map(|_| T::of(rng.gen_range(-bound..=bound)))
                .collect()
        };
        store
            .insert(t.name, Tensor::from_raw(t.shape, data))
            .expect("spec tensor names are unique");
    }
    store
}

/// All-zero weights for every tensor of `spec`.
pub fn zero_weights<T: Scalar>(spec: &NetSpec) -> WeightStore<T> {
    let mut store = WeightStore::new();
    for t in spec.tensors() {
        store
            .insert(t.name, Tensor::zeros(&t.shape))
            .expect("spec tensor names are unique");
    }
    store
}
