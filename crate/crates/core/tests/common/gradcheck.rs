//! Central finite-difference gradient checks and the per-layer probes.

use molrel::autograd::{ParamStore, Tape, Tensor, Var};
use molrel::encode::{
    BatchValue, CnnEncoder, EncoderParams, GatEncoder, GcnEncoder, GinEncoder, MpnnEncoder,
    NeuralFpEncoder, AttentiveFpEncoder, Shape, TokenSet, TransformerEncoder,
};
use molrel::featurize::drug::atom_graph_features;
use molrel::featurize::TokenSequence;
use molrel::interact::{Interaction, InteractionKind, InteractionParams};
use molrel::molparse::{parse_smiles, EntityGraph};
use molrel::nn::{Ctx, Mlp, ParamBuilder};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const COORDS_PER_TENSOR: usize = 12;
pub const POINTS: u64 = 5;
pub const TOLERANCE: f64 = 1e-5;
/// Parameters are jittered by up to this much so that zero-initialized
/// biases do not sit exactly on activation kinks.
pub const JITTER: f64 = 0.1;

pub fn random(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Tensor {
    Array2::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn loss_of<F>(store: &ParamStore, inputs: &[Tensor], weights: &mut Option<Tensor>, seed: u64, f: &F) -> f64
where
    F: for<'t> Fn(&Ctx<'t, '_>, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store, true);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&ctx, &vars);
    let w = weights.get_or_insert_with(|| random(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), out.shape()));
    (out * tape.constant(w.clone())).sum().item()
}

/// Relative error `|a - n| / max(|a|, |n|)` between analytic and numeric
/// gradients over sampled coordinates of every input and trainable
/// parameter.
pub fn gradcheck<F>(store: &mut ParamStore, inputs: Vec<Tensor>, seed: u64, f: F) -> f64
where
    F: for<'t> Fn(&Ctx<'t, '_>, &[Var<'t>]) -> Var<'t>,
{
    let mut jitter = ChaCha8Rng::seed_from_u64(seed ^ 0x7177);
    let trainable: Vec<_> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for &id in &trainable {
        store
            .value_mut(id)
            .mapv_inplace(|v| v + jitter.gen_range(-JITTER..JITTER));
    }
    let mut weights = None;
    loss_of(store, &inputs, &mut weights, seed, &f);
    let w = weights.clone().unwrap();

    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store, true);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = f(&ctx, &vars);
    let loss = (out * tape.constant(w)).sum();
    let grads = tape.backward(loss, store.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let pick = |rng: &mut ChaCha8Rng, shape: (usize, usize)| -> Vec<(usize, usize)> {
        let n = shape.0 * shape.1;
        (0..COORDS_PER_TENSOR.min(n))
            .map(|_| {
                let k = rng.gen_range(0..n);
                (k / shape.1, k % shape.1)
            })
            .collect()
    };

    let mut inputs = inputs;
    for i in 0..inputs.len() {
        let zero = Array2::zeros(inputs[i].dim());
        let g = grads.wrt(vars[i]).cloned().unwrap_or(zero);
        for c in pick(&mut rng, inputs[i].dim()) {
            let orig = inputs[i][c];
            inputs[i][c] = orig + STEP;
            let up = loss_of(store, &inputs, &mut weights, seed, &f);
            inputs[i][c] = orig - STEP;
            let down = loss_of(store, &inputs, &mut weights, seed, &f);
            inputs[i][c] = orig;
            analytic.push(g[c]);
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    let ids: Vec<_> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for id in ids {
        let shape = store.value(id).dim();
        let g = grads.param(id).cloned().unwrap_or_else(|| Array2::zeros(shape));
        for c in pick(&mut rng, shape) {
            let orig = store.value(id)[c];
            store.value_mut(id)[c] = orig + STEP;
            let up = loss_of(store, &inputs, &mut weights, seed, &f);
            store.value_mut(id)[c] = orig - STEP;
            let down = loss_of(store, &inputs, &mut weights, seed, &f);
            store.value_mut(id)[c] = orig;
            analytic.push(g[c]);
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn graph(smiles: &str) -> EntityGraph {
    atom_graph_features(&parse_smiles(smiles).unwrap())
}

const GRAPH_SMILES: [&str; 5] = ["CC(=O)Nc1ccc(O)cc1", "C1CCOC1", "c1ccncc1C#N", "OCC(N)C(=O)O", "CS(=O)(=O)c1ccccc1"];

fn small_graph_params() -> EncoderParams {
    EncoderParams {
        out_dim: Some(5),
        dims: Some(vec![6, 4]),
        heads: Some(2),
        steps: Some(2),
        hidden: Some(vec![7]),
        ..Default::default()
    }
}

/// Worst relative error over the random points for one layer.
fn over_points(mut one: impl FnMut(u64) -> f64) -> f64 {
    (0..POINTS).map(|p| one(p)).fold(0.0, f64::max)
}

macro_rules! graph_probe {
    ($ty:ident, $seed:expr, |$enc:ident, $ctx:ident, $x:ident, $g:ident| $body:expr) => {
        over_points(|p| {
            let g = graph(GRAPH_SMILES[p as usize]);
            let mut store = ParamStore::new();
            let $enc = {
                let mut pb = ParamBuilder::new(&mut store, $seed + p);
                graph_ctor!($ty, pb, g)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(100 + p);
            let x = random(&mut rng, g.node_features.dim());
            gradcheck(&mut store, vec![x], p, |$ctx, v| {
                let $x = v[0];
                let $g = &g;
                $body
            })
        })
    };
}

macro_rules! graph_ctor {
    (GcnEncoder, $pb:ident, $g:ident) => { GcnEncoder::new(&mut $pb, $g.feature_width(), &small_graph_params()) };
    (GatEncoder, $pb:ident, $g:ident) => { GatEncoder::new(&mut $pb, $g.feature_width(), &small_graph_params()).unwrap() };
    (GinEncoder, $pb:ident, $g:ident) => { GinEncoder::new(&mut $pb, $g.feature_width(), &small_graph_params()) };
    (MpnnEncoder, $pb:ident, $g:ident) => {
        MpnnEncoder::new(&mut $pb, $g.feature_width(), $g.edge_features.as_ref().unwrap().ncols(), &small_graph_params())
    };
    (NeuralFpEncoder, $pb:ident, $g:ident) => { NeuralFpEncoder::new(&mut $pb, $g.feature_width(), &small_graph_params()) };
    (AttentiveFpEncoder, $pb:ident, $g:ident) => { AttentiveFpEncoder::new(&mut $pb, $g.feature_width(), &small_graph_params()) };
}

pub fn mlp() -> f64 {
    over_points(|p| {
        let mut store = ParamStore::new();
        let m = Mlp::new(&mut ParamBuilder::new(&mut store, p), "mlp", 6, &[5, 4], 3);
        let x = random(&mut ChaCha8Rng::seed_from_u64(p), (4, 6));
        gradcheck(&mut store, vec![x], p, |ctx, v| m.forward(ctx, v[0]))
    })
}

pub fn cnn() -> f64 {
    over_points(|p| {
        let mut store = ParamStore::new();
        let params = EncoderParams {
            out_dim: Some(3),
            filters: Some(vec![4, 5]),
            kernels: Some(vec![3, 2]),
            ..Default::default()
        };
        let c = CnnEncoder::new(&mut ParamBuilder::new(&mut store, p), 5, 12, &params).unwrap();
        let x = random(&mut ChaCha8Rng::seed_from_u64(p), (12, 5));
        gradcheck(&mut store, vec![x], p, |ctx, v| c.forward(ctx, v[0]))
    })
}

pub fn transformer() -> f64 {
    over_points(|p| {
        let mut store = ParamStore::new();
        let params = EncoderParams {
            d_model: Some(8),
            heads: Some(2),
            layers: Some(2),
            ffn_dim: Some(6),
            ..Default::default()
        };
        let t = TransformerEncoder::new(&mut ParamBuilder::new(&mut store, p), 11, 7, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(p);
        let real = 3 + p as usize % 4;
        let mut ids: Vec<usize> = (0..real).map(|_| rng.gen_range(0..9)).collect();
        ids.resize(7, 9);
        let tokens = TokenSequence {
            mask: (0..7).map(|i| i < real).collect(),
            token_ids: ids,
            max_len: 7,
            vocab_size: 11,
        };
        gradcheck(&mut store, vec![], p, |ctx, _| t.forward(ctx, &tokens).unwrap())
    })
}

pub fn gcn() -> f64 {
    graph_probe!(GcnEncoder, 10, |e, ctx, x, g| e.nodes(ctx, x, g))
}

pub fn gat() -> f64 {
    graph_probe!(GatEncoder, 20, |e, ctx, x, g| e.nodes(ctx, x, g))
}

pub fn gin() -> f64 {
    graph_probe!(GinEncoder, 30, |e, ctx, x, g| e.nodes(ctx, x, g))
}

pub fn mpnn() -> f64 {
    graph_probe!(MpnnEncoder, 40, |e, ctx, x, g| e.forward(ctx, x, g).unwrap())
}

pub fn neural_fp() -> f64 {
    graph_probe!(NeuralFpEncoder, 50, |e, ctx, x, g| e.forward(ctx, x, g))
}

pub fn attentive_fp() -> f64 {
    graph_probe!(AttentiveFpEncoder, 60, |e, ctx, x, g| e.forward(ctx, x, g))
}

/// Batch of 3; token inputs use a partial mask on the second sample.
pub fn interaction(kind: InteractionKind) -> f64 {
    over_points(|p| {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(200 + p);
        let tokens = matches!(
            kind,
            InteractionKind::CrossAttention | InteractionKind::BilinearAttention | InteractionKind::SelfAttention
        );
        let arity = match kind {
            InteractionKind::Concat => 3,
            InteractionKind::Highway | InteractionKind::SelfAttention => 1,
            _ => 2,
        };
        let (d, n) = (4, [3usize, 2, 4]);
        let shapes: Vec<Shape> = (0..arity)
            .map(|_| if tokens { Shape::TokenSet { count: None, dim: d } } else { Shape::Vector(d) })
            .collect();
        let params = InteractionParams {
            out_dim: Some(5),
            heads: Some(2),
            rank: Some(3),
            layers: Some(2),
            ..Default::default()
        };
        let layer = Interaction::build(&mut ParamBuilder::new(&mut store, 300 + p), kind, &shapes, &params).unwrap();
        let inputs: Vec<Tensor> = if tokens {
            (0..arity).flat_map(|a| n.iter().map(move |&k| (k + a, d)).collect::<Vec<_>>()).map(|s| random(&mut rng, s)).collect()
        } else {
            (0..arity).map(|_| random(&mut rng, (3, d))).collect()
        };
        gradcheck(&mut store, inputs, p, |ctx, v| {
            let values: Vec<BatchValue> = if tokens {
                v.chunks(3)
                    .map(|c| {
                        BatchValue::Tokens(
                            c.iter()
                                .enumerate()
                                .map(|(i, &x)| TokenSet {
                                    values: x,
                                    mask: (i == 1).then(|| {
                                        let mut m = vec![true; x.rows()];
                                        m[x.rows() - 1] = false;
                                        m
                                    }),
                                })
                                .collect(),
                        )
                    })
                    .collect()
            } else {
                v.iter().map(|&x| BatchValue::Vectors(x)).collect()
            };
            match layer.forward(ctx, &values).unwrap() {
                BatchValue::Vectors(x) => x,
                BatchValue::Tokens(t) => Var::concat_rows(&t.iter().map(|s| s.values).collect::<Vec<_>>()),
            }
        })
    })
}

pub fn suite() -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = vec![
        ("MLP".into(), mlp()),
        ("CNN".into(), cnn()),
        ("Transformer".into(), transformer()),
        ("GCN".into(), gcn()),
        ("GAT".into(), gat()),
        ("GIN".into(), gin()),
        ("MPNN".into(), mpnn()),
        ("NeuralFP".into(), neural_fp()),
        ("AttentiveFP".into(), attentive_fp()),
    ];
    for k in InteractionKind::ALL {
        out.push((k.name().to_string(), interaction(k)));
    }
    out
}
