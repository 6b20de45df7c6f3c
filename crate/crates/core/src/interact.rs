//! Layers combining embeddings across entities or across encoders of one
//! entity.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autograd::{Init, ParamId, Var};
use crate::encode::{BatchValue, Shape, TokenSet};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Ctx, LayerNorm, Linear, MultiHeadAttention, ParamBuilder};

pub const DEFAULT_FUSION_DIM: usize = 128;
pub const DEFAULT_BILINEAR_RANK: usize = 16;
pub const DEFAULT_HIGHWAY_LAYERS: usize = 2;
pub const DEFAULT_SELF_ATTENTION_HEADS: usize = 4;
pub const DEFAULT_BAN_HEADS: usize = 2;
pub const BAN_BN_MOMENTUM: f64 = 0.1;
pub const HIGHWAY_GATE_BIAS: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    #[serde(rename = "concatenation", alias = "concat")]
    Concat,
    BilinearAttention,
    BilinearFusion,
    CrossAttention,
    Highway,
    GatedFusion,
    SelfAttention,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 7] = [
        InteractionKind::Concat,
        InteractionKind::BilinearAttention,
        InteractionKind::BilinearFusion,
        InteractionKind::CrossAttention,
        InteractionKind::Highway,
        InteractionKind::GatedFusion,
        InteractionKind::SelfAttention,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InteractionKind::Concat => "concatenation",
            InteractionKind::BilinearAttention => "bilinear_attention",
            InteractionKind::BilinearFusion => "bilinear_fusion",
            InteractionKind::CrossAttention => "cross_attention",
            InteractionKind::Highway => "highway",
            InteractionKind::GatedFusion => "gated_fusion",
            InteractionKind::SelfAttention => "self_attention",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        if name == "concat" {
            return Ok(InteractionKind::Concat);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownInteraction(name.to_string()))
    }

    fn requirement(&self) -> &'static str {
        match self {
            InteractionKind::Concat => "one or more vectors",
            InteractionKind::BilinearFusion | InteractionKind::GatedFusion => "exactly two vectors",
            InteractionKind::Highway => "one vector",
            InteractionKind::BilinearAttention | InteractionKind::CrossAttention => {
                "exactly two token sets"
            }
            InteractionKind::SelfAttention => "one token set",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layernorm: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BilinearFusion {
    pub u: Linear,
    pub v: Linear,
    pub c: ParamId,
    pub rank: usize,
    pub out: usize,
}

impl BilinearFusion {
    /// Sums each consecutive block of `rank` columns.
    fn block_sum(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.out * self.rank, self.out), |(i, m)| {
            if i / self.rank == m { 1.0 } else { 0.0 }
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, a: Var<'t>, b: Var<'t>) -> Var<'t> {
        let prod = self.u.forward(ctx, a) * self.v.forward(ctx, b);
        (prod.matmul(ctx.constant(self.block_sum())) + ctx.p(self.c)).relu()
    }
}

#[derive(Clone, Debug)]
pub struct GatedFusion {
    pub w1: Linear,
    pub w2: Linear,
    pub gate: Linear,
}

impl GatedFusion {
    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, a: Var<'t>, b: Var<'t>) -> Var<'t> {
        let h1 = self.w1.forward(ctx, a).tanh();
        let h2 = self.w2.forward(ctx, b).tanh();
        let g = self.gate.forward(ctx, Var::concat_cols(&[a, b])).sigmoid();
        g * h1 + g.one_minus() * h2
    }
}

#[derive(Clone, Debug)]
pub struct HighwayLayer {
    pub transform: Linear,
    pub gate: Linear,
}

#[derive(Clone, Debug)]
pub struct Highway {
    pub layers: Vec<HighwayLayer>,
}

impl Highway {
    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, mut x: Var<'t>) -> Var<'t> {
        for l in &self.layers {
            let t = l.gate.forward(ctx, x).sigmoid();
            x = t * l.transform.forward(ctx, x).relu() + t.one_minus() * x;
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct AttentionDirection {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
}

#[derive(Clone, Debug)]
pub struct CrossAttention {
    pub forward_dir: AttentionDirection,
    pub backward_dir: AttentionDirection,
    pub dim: usize,
}

fn key_mask(queries: usize, keys: &TokenSet) -> Option<Array2<bool>> {
    keys.mask
        .as_ref()
        .map(|m| Array2::from_shape_fn((queries, m.len()), |(_, j)| m[j]))
}

fn attend_pool<'t>(ctx: &Ctx<'t, '_>, dir: &AttentionDirection, dim: usize, from: &TokenSet<'t>, to: &TokenSet<'t>) -> Var<'t> {
    let q = dir.q.forward(ctx, from.values);
    let k = dir.k.forward(ctx, to.values);
    let v = dir.v.forward(ctx, to.values);
    let scores = q.matmul(k.t()).scale(1.0 / (dim as f64).sqrt());
    let a = match key_mask(q.rows(), to) {
        Some(m) => scores.masked_softmax_rows(&m),
        None => scores.softmax_rows(),
    };
    a.matmul(v).gather_rows(&from.real_rows()).max_rows()
}

impl CrossAttention {
    /// Pooled `1 x 2d` output for one pair.
    pub fn pair<'t>(&self, ctx: &Ctx<'t, '_>, t1: &TokenSet<'t>, t2: &TokenSet<'t>) -> Var<'t> {
        let p1 = attend_pool(ctx, &self.forward_dir, self.dim, t1, t2);
        let p2 = attend_pool(ctx, &self.backward_dir, self.dim, t2, t1);
        Var::concat_cols(&[p1, p2])
    }
}

#[derive(Clone, Debug)]
pub struct BilinearAttention {
    pub u: Linear,
    pub v: Linear,
    pub head_vectors: Vec<ParamId>,
    pub bn: BatchNorm,
}

impl BilinearAttention {
    /// Joint `1 x k` vector and the per-head attention maps (before
    /// normalization across the batch).
    pub fn pair<'t>(&self, ctx: &Ctx<'t, '_>, t1: &TokenSet<'t>, t2: &TokenSet<'t>) -> (Var<'t>, Vec<Var<'t>>) {
        let x = self.u.forward(ctx, t1.values).relu();
        let y = self.v.forward(ctx, t2.values).relu();
        let (n1, n2) = (x.rows(), y.rows());
        let m1 = t1.mask.clone().unwrap_or_else(|| vec![true; n1]);
        let m2 = t2.mask.clone().unwrap_or_else(|| vec![true; n2]);
        let mask = Array2::from_shape_fn((1, n1 * n2), |(_, e)| m1[e / n2] && m2[e % n2]);
        let mut joint: Option<Var<'t>> = None;
        let mut maps = Vec::new();
        for &h in &self.head_vectors {
            let logits = (x * ctx.p(h)).matmul(y.t());
            let a = logits.reshape(1, n1 * n2).masked_softmax_rows(&mask).reshape(n1, n2);
            let f = (x * a.matmul(y)).sum_rows();
            joint = Some(match joint {
                Some(j) => j + f,
                None => f,
            });
            maps.push(a);
        }
        (joint.expect("at least one head"), maps)
    }
}

#[derive(Clone, Debug)]
pub struct SelfAttentionLayer {
    pub attn: MultiHeadAttention,
    pub norm: Option<LayerNorm>,
}

#[derive(Clone, Debug)]
pub struct SelfAttention {
    pub layers: Vec<SelfAttentionLayer>,
    pub residual: bool,
}

impl SelfAttention {
    pub fn set<'t>(&self, ctx: &Ctx<'t, '_>, t: &TokenSet<'t>) -> TokenSet<'t> {
        let mut x = t.values;
        for l in &self.layers {
            let (a, _) = l.attn.forward(ctx, x, x, t.mask.as_deref());
            x = if self.residual { x + a } else { a };
            if let Some(n) = &l.norm {
                x = n.forward(ctx, x);
            }
        }
        TokenSet {
            values: x,
            mask: t.mask.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum InteractionLayer {
    Concat,
    BilinearFusion(BilinearFusion),
    GatedFusion(GatedFusion),
    Highway(Highway),
    CrossAttention(CrossAttention),
    BilinearAttention(BilinearAttention),
    SelfAttention(SelfAttention),
}

#[derive(Clone, Debug)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub layer: InteractionLayer,
    pub output: Shape,
}

impl Interaction {
    /// Output shape for `inputs`, validating arity, kinds and widths.
    pub fn infer(kind: InteractionKind, inputs: &[Shape], params: &InteractionParams) -> Result<Shape> {
        let all_vectors = inputs.iter().all(Shape::is_vector);
        let all_tokens = inputs.iter().all(|s| !s.is_vector());
        let arity_ok = match kind {
            InteractionKind::Concat => !inputs.is_empty(),
            InteractionKind::Highway | InteractionKind::SelfAttention => inputs.len() == 1,
            _ => inputs.len() == 2,
        };
        let kinds_ok = match kind {
            InteractionKind::Concat
            | InteractionKind::BilinearFusion
            | InteractionKind::GatedFusion
            | InteractionKind::Highway => all_vectors,
            _ => all_tokens,
        };
        if !arity_ok {
            return Err(Error::Arity(format!(
                "{} takes {}, got {} inputs",
                kind.name(),
                kind.requirement(),
                inputs.len()
            )));
        }
        if !kinds_ok {
            let got: Vec<String> = inputs.iter().map(|s| s.to_string()).collect();
            return Err(Error::Kind(format!(
                "{} takes {}, got [{}]",
                kind.name(),
                kind.requirement(),
                got.join(", ")
            )));
        }
        let out_dim = params.out_dim.unwrap_or(DEFAULT_FUSION_DIM);
        Ok(match kind {
            InteractionKind::Concat => Shape::Vector(inputs.iter().map(Shape::dim).sum()),
            InteractionKind::BilinearFusion | InteractionKind::GatedFusion => Shape::Vector(out_dim),
            InteractionKind::Highway => inputs[0],
            InteractionKind::CrossAttention => {
                let (a, b) = (inputs[0].dim(), inputs[1].dim());
                if a != b {
                    return Err(Error::Shape(format!(
                        "cross_attention needs equal token widths, got {a} and {b}"
                    )));
                }
                Shape::Vector(2 * a)
            }
            InteractionKind::BilinearAttention => {
                if params.heads == Some(0) {
                    return Err(Error::Shape("bilinear_attention needs at least one head".into()));
                }
                Shape::Vector(out_dim)
            }
            InteractionKind::SelfAttention => {
                let d = inputs[0].dim();
                let heads = params.heads.unwrap_or(DEFAULT_SELF_ATTENTION_HEADS);
                if heads == 0 || d % heads != 0 {
                    return Err(Error::Shape(format!(
                        "self_attention width {d} is not divisible by {heads} heads"
                    )));
                }
                inputs[0]
            }
        })
    }

    /// Validate input kinds and construct parameters.
    pub fn build(
        pb: &mut ParamBuilder,
        kind: InteractionKind,
        inputs: &[Shape],
        params: &InteractionParams,
    ) -> Result<Self> {
        let output = Self::infer(kind, inputs, params)?;
        let dims: Vec<usize> = inputs.iter().map(Shape::dim).collect();
        let out_dim = params.out_dim.unwrap_or(DEFAULT_FUSION_DIM);
        let layer = pb.scoped(kind.name(), |pb| match kind {
                InteractionKind::Concat => InteractionLayer::Concat,
                InteractionKind::BilinearFusion => {
                    let rank = params.rank.unwrap_or(DEFAULT_BILINEAR_RANK);
                    let layer = BilinearFusion {
                        u: Linear::new(pb, "u", dims[0], out_dim * rank, false),
                        v: Linear::new(pb, "v", dims[1], out_dim * rank, false),
                        c: pb.param("c", (1, out_dim), Init::Zeros),
                        rank,
                        out: out_dim,
                    };
                    InteractionLayer::BilinearFusion(layer)
                }
                InteractionKind::GatedFusion => {
                    let layer = GatedFusion {
                        w1: Linear::new(pb, "w1", dims[0], out_dim, false),
                        w2: Linear::new(pb, "w2", dims[1], out_dim, false),
                        gate: Linear::new(pb, "gate", dims[0] + dims[1], out_dim, true),
                    };
                    InteractionLayer::GatedFusion(layer)
                }
                InteractionKind::Highway => {
                    let d = dims[0];
                    let layers = (0..params.layers.unwrap_or(DEFAULT_HIGHWAY_LAYERS))
                        .map(|i| {
                            pb.scoped(&format!("layer{i}"), |pb| HighwayLayer {
                                transform: Linear::new(pb, "transform", d, d, false),
                                gate: Linear {
                                    w: pb.param("gate.weight", (d, d), Init::Glorot),
                                    b: Some(pb.param("gate.bias", (1, d), Init::Constant(HIGHWAY_GATE_BIAS))),
                                    input: d,
                                    output: d,
                                },
                            })
                        })
                        .collect();
                    InteractionLayer::Highway(Highway { layers })
                }
                InteractionKind::CrossAttention => {
                    let d = dims[0];
                    let dir = |pb: &mut ParamBuilder, name: &str| {
                        pb.scoped(name, |pb| AttentionDirection {
                            q: Linear::new(pb, "query", d, d, true),
                            k: Linear::new(pb, "key", d, d, true),
                            v: Linear::new(pb, "value", d, d, true),
                        })
                    };
                    let layer = CrossAttention {
                        forward_dir: dir(pb, "first_to_second"),
                        backward_dir: dir(pb, "second_to_first"),
                        dim: d,
                    };
                    InteractionLayer::CrossAttention(layer)
                }
                InteractionKind::BilinearAttention => {
                    let heads = params.heads.unwrap_or(DEFAULT_BAN_HEADS);
                    let layer = BilinearAttention {
                        u: Linear::new(pb, "u", dims[0], out_dim, true),
                        v: Linear::new(pb, "v", dims[1], out_dim, true),
                        head_vectors: (0..heads)
                            .map(|h| pb.param(&format!("head{h}"), (1, out_dim), Init::Uniform(1.0)))
                            .collect(),
                        bn: BatchNorm::new(pb, "bn", out_dim, BAN_BN_MOMENTUM),
                    };
                    InteractionLayer::BilinearAttention(layer)
                }
                InteractionKind::SelfAttention => {
                    let d = dims[0];
                    let heads = params.heads.unwrap_or(DEFAULT_SELF_ATTENTION_HEADS);
                    let norm = params.layernorm.unwrap_or(true);
                    let layers = (0..params.layers.unwrap_or(1))
                        .map(|i| {
                            pb.scoped(&format!("layer{i}"), |pb| SelfAttentionLayer {
                                attn: MultiHeadAttention::new(pb, "attn", d, heads),
                                norm: norm.then(|| LayerNorm::new(pb, "norm", d)),
                            })
                        })
                        .collect();
                    let layer = SelfAttention {
                        layers,
                        residual: params.residual.unwrap_or(true),
                    };
                    InteractionLayer::SelfAttention(layer)
                }
        });
        Ok(Self { kind, layer, output })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, inputs: &[BatchValue<'t>]) -> Result<BatchValue<'t>> {
        let vec = |i: usize| inputs[i].vectors();
        let tok = |i: usize| inputs[i].tokens();
        Ok(match &self.layer {
            InteractionLayer::Concat => {
                let parts = inputs.iter().map(BatchValue::vectors).collect::<Result<Vec<_>>>()?;
                BatchValue::Vectors(if parts.len() == 1 { parts[0] } else { Var::concat_cols(&parts) })
            }
            InteractionLayer::BilinearFusion(l) => BatchValue::Vectors(l.forward(ctx, vec(0)?, vec(1)?)),
            InteractionLayer::GatedFusion(l) => BatchValue::Vectors(l.forward(ctx, vec(0)?, vec(1)?)),
            InteractionLayer::Highway(l) => BatchValue::Vectors(l.forward(ctx, vec(0)?)),
            InteractionLayer::CrossAttention(l) => {
                let (a, b) = (tok(0)?, tok(1)?);
                let rows: Vec<Var<'t>> = a.iter().zip(b).map(|(x, y)| l.pair(ctx, x, y)).collect();
                BatchValue::Vectors(Var::concat_rows(&rows))
            }
            InteractionLayer::BilinearAttention(l) => {
                let (a, b) = (tok(0)?, tok(1)?);
                let rows: Vec<Var<'t>> = a.iter().zip(b).map(|(x, y)| l.pair(ctx, x, y).0).collect();
                BatchValue::Vectors(l.bn.forward(ctx, Var::concat_rows(&rows)))
            }
            InteractionLayer::SelfAttention(l) => {
                BatchValue::Tokens(tok(0)?.iter().map(|t| l.set(ctx, t)).collect())
            }
        })
    }
}
