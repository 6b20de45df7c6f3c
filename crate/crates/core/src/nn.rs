//! Parameterized building blocks over the autodiff tape.

use std::cell::RefCell;
use std::collections::HashMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Init, ParamId, ParamStore, Tape, Tensor, Var};

/// Creates named parameters with a deterministic RNG.
pub struct ParamBuilder<'s> {
    pub store: &'s mut ParamStore,
    rng: ChaCha8Rng,
    prefix: String,
}

impl<'s> ParamBuilder<'s> {
    pub fn new(store: &'s mut ParamStore, seed: u64) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
            prefix: String::new(),
        }
    }

    pub fn scoped<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let saved = self.prefix.clone();
        if !self.prefix.is_empty() {
            self.prefix.push('.');
        }
        self.prefix.push_str(name);
        let out = f(self);
        self.prefix = saved;
        out
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    pub fn param(&mut self, name: &str, shape: (usize, usize), init: Init) -> ParamId {
        let full = self.full(name);
        self.store.add(full, shape, init, &mut self.rng)
    }

    pub fn buffer(&mut self, name: &str, value: Tensor) -> ParamId {
        let full = self.full(name);
        self.store.add_buffer(full, value)
    }
}

/// Per-forward-pass state: tape, parameters, mode, and batch-norm updates.
pub struct Ctx<'t, 'p> {
    pub tape: &'t Tape,
    pub params: &'p ParamStore,
    pub train: bool,
    cache: RefCell<HashMap<ParamId, Var<'t>>>,
    bn_updates: RefCell<Vec<(ParamId, Tensor)>>,
}

impl<'t, 'p> Ctx<'t, 'p> {
    pub fn new(tape: &'t Tape, params: &'p ParamStore, train: bool) -> Self {
        Self {
            tape,
            params,
            train,
            cache: RefCell::new(HashMap::new()),
            bn_updates: RefCell::new(Vec::new()),
        }
    }

    /// The parameter as a tape variable (recorded once per pass).
    pub fn p(&self, id: ParamId) -> Var<'t> {
        if let Some(v) = self.cache.borrow().get(&id) {
            return *v;
        }
        let v = self.tape.param(self.params, id);
        self.cache.borrow_mut().insert(id, v);
        v
    }

    pub fn constant(&self, t: Tensor) -> Var<'t> {
        self.tape.constant(t)
    }

    pub fn take_buffer_updates(&self) -> Vec<(ParamId, Tensor)> {
        std::mem::take(&mut self.bn_updates.borrow_mut())
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, name: &str, input: usize, output: usize, bias: bool) -> Self {
        pb.scoped(name, |pb| Self {
            w: pb.param("weight", (input, output), Init::Glorot),
            b: bias.then(|| pb.param("bias", (1, output), Init::Zeros)),
            input,
            output,
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let y = x.matmul(ctx.p(self.w));
        match self.b {
            Some(b) => y + ctx.p(b),
            None => y,
        }
    }
}

/// Affine layers with ReLU between; the last layer is linear.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(pb: &mut ParamBuilder, name: &str, input: usize, hidden: &[usize], output: usize) -> Self {
        pb.scoped(name, |pb| {
            let mut dims = vec![input];
            dims.extend_from_slice(hidden);
            dims.push(output);
            let layers = dims
                .windows(2)
                .enumerate()
                .map(|(i, w)| Linear::new(pb, &i.to_string(), w[0], w[1], true))
                .collect();
            Self { layers }
        })
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, mut x: Var<'t>) -> Var<'t> {
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(ctx, x);
            if i < last {
                x = x.relu();
            }
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub const NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize) -> Self {
        pb.scoped(name, |pb| Self {
            gamma: pb.param("gamma", (1, dim), Init::Ones),
            beta: pb.param("beta", (1, dim), Init::Zeros),
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        x.normalize_rows(NORM_EPS) * ctx.p(self.gamma) + ctx.p(self.beta)
    }
}

/// Batch normalization over rows with running statistics for evaluation.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, momentum: f64) -> Self {
        pb.scoped(name, |pb| Self {
            gamma: pb.param("gamma", (1, dim), Init::Ones),
            beta: pb.param("beta", (1, dim), Init::Zeros),
            running_mean: pb.buffer("running_mean", Array2::zeros((1, dim))),
            running_var: pb.buffer("running_var", Array2::ones((1, dim))),
            momentum,
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let normed = if ctx.train {
            let v = x.value();
            let n = v.nrows() as f64;
            let mean = v.mean_axis(ndarray::Axis(0)).unwrap().insert_axis(ndarray::Axis(0));
            let var = (&*v - &mean).mapv(|d| d * d).sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0)) / n;
            let unbiased = if n > 1.0 { &var * (n / (n - 1.0)) } else { var.clone() };
            let m = self.momentum;
            let rm = ctx.params.value(self.running_mean) * (1.0 - m) + &mean * m;
            let rv = ctx.params.value(self.running_var) * (1.0 - m) + &unbiased * m;
            let mut updates = ctx.bn_updates.borrow_mut();
            updates.push((self.running_mean, rm));
            updates.push((self.running_var, rv));
            x.normalize_cols(NORM_EPS)
        } else {
            let mean = ctx.constant(ctx.params.value(self.running_mean).clone());
            let inv = ctx.params.value(self.running_var).mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
            (x - mean) * ctx.constant(inv)
        };
        normed * ctx.p(self.gamma) + ctx.p(self.beta)
    }
}

/// Scaled dot-product multi-head attention with separate query/key/value
/// and output projections.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim {dim} not divisible by {heads} heads");
        pb.scoped(name, |pb| Self {
            q: Linear::new(pb, "query", dim, dim, true),
            k: Linear::new(pb, "key", dim, dim, true),
            v: Linear::new(pb, "value", dim, dim, true),
            o: Linear::new(pb, "out", dim, dim, true),
            heads,
            dim,
        })
    }

    /// Attention of `queries` (n1 x d) over `keys` (n2 x d). `key_mask`
    /// excludes padded keys. Returns the output and per-head weights.
    pub fn forward<'t>(
        &self,
        ctx: &Ctx<'t, '_>,
        queries: Var<'t>,
        keys: Var<'t>,
        key_mask: Option<&[bool]>,
    ) -> (Var<'t>, Vec<Var<'t>>) {
        let q = self.q.forward(ctx, queries);
        let k = self.k.forward(ctx, keys);
        let v = self.v.forward(ctx, keys);
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mask = key_mask.map(|m| {
            Array2::from_shape_fn((queries.rows(), keys.rows()), |(_, j)| m[j])
        });
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = q.slice_cols(h * dh, dh);
            let kh = k.slice_cols(h * dh, dh);
            let vh = v.slice_cols(h * dh, dh);
            let scores = qh.matmul(kh.t()).scale(scale);
            let a = match &mask {
                Some(m) => scores.masked_softmax_rows(m),
                None => scores.softmax_rows(),
            };
            outs.push(a.matmul(vh));
            weights.push(a);
        }
        (self.o.forward(ctx, Var::concat_cols(&outs)), weights)
    }
}

/// Gated recurrent unit cell applied row-wise.
#[derive(Clone, Debug)]
pub struct Gru {
    pub wz: Linear,
    pub uz: Linear,
    pub wr: Linear,
    pub ur: Linear,
    pub wh: Linear,
    pub uh: Linear,
}

impl Gru {
    pub fn new(pb: &mut ParamBuilder, name: &str, input: usize, hidden: usize) -> Self {
        pb.scoped(name, |pb| Self {
            wz: Linear::new(pb, "wz", input, hidden, true),
            uz: Linear::new(pb, "uz", hidden, hidden, false),
            wr: Linear::new(pb, "wr", input, hidden, true),
            ur: Linear::new(pb, "ur", hidden, hidden, false),
            wh: Linear::new(pb, "wh", input, hidden, true),
            uh: Linear::new(pb, "uh", hidden, hidden, false),
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, h: Var<'t>) -> Var<'t> {
        let z = (self.wz.forward(ctx, x) + self.uz.forward(ctx, h)).sigmoid();
        let r = (self.wr.forward(ctx, x) + self.ur.forward(ctx, h)).sigmoid();
        let cand = (self.wh.forward(ctx, x) + self.uh.forward(ctx, r * h)).tanh();
        z.one_minus() * h + z * cand
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mlp_zero_weights_give_zero() {
        let mut store = ParamStore::new();
        let mlp = {
            let mut pb = ParamBuilder::new(&mut store, 0);
            Mlp::new(&mut pb, "m", 3, &[4], 2)
        };
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill(0.0);
        }
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &store, true);
        let y = mlp.forward(&ctx, tape.constant(array![[1.0, 2.0, 3.0]]));
        assert!(y.value().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut ParamBuilder::new(&mut store, 1), "a", 4, 2);
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &store, true);
        let x = tape.constant(Array2::from_shape_fn((3, 4), |(i, j)| (i + 2 * j) as f64 * 0.1));
        let (_, w) = mha.forward(&ctx, x, x, Some(&[true, true, false]));
        for a in w {
            let a = a.value();
            for r in 0..3 {
                assert!((a.row(r).sum() - 1.0).abs() < 1e-12);
                assert_eq!(a[[r, 2]], 0.0);
            }
        }
    }

    #[test]
    fn batchnorm_records_running_stats() {
        let mut store = ParamStore::new();
        let bn = BatchNorm::new(&mut ParamBuilder::new(&mut store, 1), "bn", 2, 0.1);
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &store, true);
        let y = bn.forward(&ctx, tape.constant(array![[1.0, 2.0], [3.0, 6.0]]));
        assert!((y.value().column(0).sum()).abs() < 1e-12);
        let ups = ctx.take_buffer_updates();
        assert_eq!(ups[0].1, array![[0.2, 0.4]]);
    }
}
