//! Named parameter tensors, their gradients, and the checkpoint file format.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "DGNCKPT\0"
//! version  u32      currently 1
//! count    u32      number of arrays
//! per array, in insertion order:
//!   name_len u32, name (utf-8)
//!   ndim u32, dims u64 * ndim
//!   payload f64 * prod(dims)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use super::array::DenseArray;
use super::NumericsError;

const MAGIC: &[u8; 8] = b"DGNCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    values: Vec<DenseArray>,
}

/// Gradients laid out parallel to a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    values: Vec<DenseArray>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: DenseArray) -> Result<ParamId, NumericsError> {
        if self.index.contains_key(name) {
            return Err(NumericsError::DuplicateParameter(name.to_string()));
        }
        let id = self.values.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.values.push(value);
        Ok(ParamId(id))
    }

    /// Uniform in `[-scale, scale]`.
    pub fn add_uniform(&mut self, name: &str, shape: &[usize], scale: f64, rng: &mut impl Rng) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
        self.add(name, DenseArray::new(shape.to_vec(), data).expect("shape matches"))
            .expect("parameter names are unique")
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, DenseArray::zeros(shape)).expect("parameter names are unique")
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &DenseArray {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&DenseArray> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseArray)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn total_size(&self) -> usize {
        self.values.iter().map(DenseArray::len).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { values: self.values.iter().map(|v| DenseArray::zeros(v.shape())).collect() }
    }

    pub fn write_checkpoint(&self, mut out: impl Write) -> Result<(), NumericsError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.values.len() as u32).to_le_bytes())?;
        for (name, value) in self.iter() {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(value.shape().len() as u32).to_le_bytes())?;
            for &d in value.shape() {
                out.write_all(&(d as u64).to_le_bytes())?;
            }
            for &x in value.data() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + self.total_size() * 8);
        self.write_checkpoint(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_checkpoint(mut input: impl Read) -> Result<Self, NumericsError> {
        fn u32_le(r: &mut impl Read) -> Result<u32, NumericsError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn u64_le(r: &mut impl Read) -> Result<u64, NumericsError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NumericsError::Checkpoint("bad magic".into()));
        }
        let version = u32_le(&mut input)?;
        if version != VERSION {
            return Err(NumericsError::Checkpoint(format!("unsupported version {version}")));
        }
        let count = u32_le(&mut input)?;
        let mut store = ParameterStore::new();
        for _ in 0..count {
            let len = u32_le(&mut input)? as usize;
            let mut name = vec![0u8; len];
            input.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| NumericsError::Checkpoint(e.to_string()))?;
            let ndim = u32_le(&mut input)? as usize;
            let shape = (0..ndim).map(|_| u64_le(&mut input).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| u64_le(&mut input).map(f64::from_bits)).collect::<Result<Vec<_>, _>>()?;
            store.add(&name, DenseArray::new(shape, data)?)?;
        }
        Ok(store)
    }
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &DenseArray {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.values[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DenseArray> {
        self.values.iter()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            v.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn zero(&mut self) {
        for v in &mut self.values {
            v.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().flat_map(|v| v.data()).map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn checkpoint_round_trip_is_byte_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParameterStore::new();
        store.add_uniform("encoder.fwd.input", &[6, 4], 0.1, &mut rng);
        store.add_zeros("encoder.fwd.bias", &[6]);
        let bytes = store.to_checkpoint_bytes();
        let back = ParameterStore::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_checkpoint_bytes(), bytes);
    }

    #[test]
    fn rejects_garbage() {
        assert!(ParameterStore::read_checkpoint(&b"NOTACKPT\x01\0\0\0"[..]).is_err());
        let mut store = ParameterStore::new();
        store.add_zeros("w", &[2]);
        assert!(store.add("w", DenseArray::zeros(&[1])).is_err());
    }
}
