use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Uniform on `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zeros,
    Ones,
    Constant(f64),
    /// Uniform on `[-a, a]`.
    Uniform(f64),
}

struct Entry {
    name: String,
    value: Arc<Tensor>,
    trainable: bool,
}

/// Named parameter tensors plus non-trainable buffers (running statistics).
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        init: Init,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let value = match init {
            Init::Glorot => {
                let a = (6.0 / (shape.0 + shape.1) as f64).sqrt();
                Array2::from_shape_simple_fn(shape, || rng.gen_range(-a..=a))
            }
            Init::Uniform(a) => Array2::from_shape_simple_fn(shape, || rng.gen_range(-a..=a)),
            Init::Zeros => Array2::zeros(shape),
            Init::Ones => Array2::ones(shape),
            Init::Constant(c) => Array2::from_elem(shape, c),
        };
        self.insert(name.into(), value, true)
    }

    /// A tensor that is stored and checkpointed but never optimized.
    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert(name.into(), value, false)
    }

    fn insert(&mut self, name: String, value: Tensor, trainable: bool) -> ParamId {
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry {
            name,
            value: Arc::new(value),
            trainable,
        });
        id
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub(crate) fn value_arc(&self, id: ParamId) -> Arc<Tensor> {
        Arc::clone(&self.entries[id.0].value)
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        Arc::make_mut(&mut self.entries[id.0].value)
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) {
        self.entries[id.0].value = Arc::new(value);
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn get(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Total scalar count of trainable parameters.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        let pa = a.add("w", (30, 20), Init::Glorot, &mut ChaCha8Rng::seed_from_u64(3));
        let pb = b.add("w", (30, 20), Init::Glorot, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.value(pa), b.value(pb));
        let lim = (6.0f64 / 50.0).sqrt();
        assert!(a.value(pa).iter().all(|v| v.abs() <= lim));
    }

    #[test]
    fn buffers_are_not_trainable() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        s.add("w", (2, 2), Init::Zeros, &mut rng);
        let buf = s.add_buffer("running_mean", Array2::zeros((1, 2)));
        assert!(!s.is_trainable(buf));
        assert_eq!(s.trainable_count(), 4);
        assert_eq!(s.get("running_mean"), Some(buf));
    }
}
