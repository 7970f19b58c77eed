use alloc::string::String;
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of learnable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
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

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Replace the value of every parameter from `(name, tensor)` pairs,
    /// checking that names and shapes line up with the current layout.
    pub fn load<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, Tensor)>) -> Result<()> {
        let mut seen = 0;
        for (name, t) in entries {
            let Some(id) = self.find(name) else { bail!(Input, "unknown parameter '{}'", name) };
            if t.shape() != self.values[id.0].shape() {
                bail!(Shape, "parameter '{}' expects {:?}, got {:?}", name, self.values[id.0].shape(), t.shape());
            }
            self.values[id.0] = t;
            seen += 1;
        }
        if seen != self.values.len() {
            bail!(Input, "checkpoint supplies {} of {} parameters", seen, self.values.len());
        }
        Ok(())
    }

    /// FNV-1a over names and raw bits; used to detect unintended mutation.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for (n, t) in self.iter() {
            n.bytes().for_each(&mut eat);
            for x in t.data() {
                x.to_bits().to_le_bytes().into_iter().for_each(&mut eat);
            }
        }
        h
    }
}
