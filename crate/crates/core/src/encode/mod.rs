//! Trainable encode layers mapping featurized inputs to embeddings.

pub mod graph;
pub mod sequence;

pub use graph::{
    AttentiveFpEncoder, GatEncoder, GcnEncoder, GinEncoder, MpnnEncoder, NeuralFpEncoder,
};
pub use sequence::{CnnEncoder, TransformerEncoder};

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adapters::Adapters;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::featurize::{FeatureKind, Features};
use crate::nn::{Ctx, Linear, Mlp, ParamBuilder};

/// Declared output shape of an encoder or composition node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    /// `count` is `None` when it varies per sample (e.g. graph node sets).
    TokenSet { count: Option<usize>, dim: usize },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match *self {
            Shape::Vector(d) | Shape::TokenSet { dim: d, .. } => d,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, Shape::Vector(_))
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Vector(d) => write!(f, "vector({d})"),
            Shape::TokenSet { count: Some(n), dim } => write!(f, "token_set({n}x{dim})"),
            Shape::TokenSet { count: None, dim } => write!(f, "token_set(?x{dim})"),
        }
    }
}

/// One sample's token set with its padding mask.
#[derive(Clone, Debug)]
pub struct TokenSet<'t> {
    pub values: Var<'t>,
    pub mask: Option<Vec<bool>>,
}

impl<'t> TokenSet<'t> {
    pub fn real_rows(&self) -> Vec<usize> {
        match &self.mask {
            Some(m) => (0..m.len()).filter(|&i| m[i]).collect(),
            None => (0..self.values.rows()).collect(),
        }
    }
}

/// Node output for a whole batch.
#[derive(Clone, Debug)]
pub enum BatchValue<'t> {
    /// `batch x dim`.
    Vectors(Var<'t>),
    Tokens(Vec<TokenSet<'t>>),
}

impl<'t> BatchValue<'t> {
    pub fn vectors(&self) -> Result<Var<'t>> {
        match self {
            BatchValue::Vectors(v) => Ok(*v),
            BatchValue::Tokens(_) => Err(Error::Kind("expected vectors, got a token set".into())),
        }
    }

    pub fn tokens(&self) -> Result<&[TokenSet<'t>]> {
        match self {
            BatchValue::Tokens(t) => Ok(t),
            BatchValue::Vectors(_) => Err(Error::Kind("expected a token set, got vectors".into())),
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            BatchValue::Vectors(v) => v.rows(),
            BatchValue::Tokens(t) => t.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Vector,
    TokenSet,
}

/// Encoder hyperparameters; unset fields take per-layer defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_model: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffn_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputMode>,
}

pub const DEFAULT_OUT_DIM: usize = 128;
pub const DEFAULT_MLP_HIDDEN: [usize; 2] = [512, 256];
pub const DEFAULT_GRAPH_DIMS: [usize; 2] = [64, 64];

impl EncoderParams {
    pub fn out_dim(&self) -> usize {
        self.out_dim.unwrap_or(DEFAULT_OUT_DIM)
    }

    pub fn graph_dims(&self) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| DEFAULT_GRAPH_DIMS.to_vec())
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output.unwrap_or(OutputMode::Vector)
    }
}

/// Encoder computed outside the differentiable core (SchNet, GVP, ...):
/// maps featurized input to a frozen vector of declared width.
pub trait ExtensionEncoder: Send + Sync {
    fn output_dim(&self) -> usize;
    fn encode(&self, features: &Features) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Mlp,
    Cnn,
    Transformer,
    Gcn,
    Gat,
    Gin,
    Mpnn,
    NeuralFp,
    AttentiveFp,
    /// Adapter-provided encoder identified by name, with declared width.
    Extension(&'static str, usize),
}

#[derive(Clone, Debug)]
pub enum EncodeLayer {
    Mlp(Mlp),
    Cnn(CnnEncoder),
    Transformer(TransformerEncoder),
    Gcn(GcnEncoder),
    Gat(GatEncoder),
    Gin(GinEncoder),
    Mpnn(MpnnEncoder),
    NeuralFp(NeuralFpEncoder),
    AttentiveFp(AttentiveFpEncoder),
    Extension {
        name: &'static str,
        width: usize,
        proj: Linear,
    },
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub layer: EncodeLayer,
    pub output: Shape,
}

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

impl Encoder {
    /// Output shape for `input`, validating kinds and hyperparameters.
    pub fn infer(kind: LayerKind, input: FeatureKind, params: &EncoderParams) -> Result<Shape> {
        let out = params.out_dim();
        let token_out = params.output_mode() == OutputMode::TokenSet;
        let mismatch = |what: &str| shape_err(format!("{what}, got {input:?}"));
        match (kind, input) {
            (LayerKind::Mlp, FeatureKind::Vector(_)) | (LayerKind::Extension(..), _) => {}
            (LayerKind::Mlp, _) => return Err(mismatch("MLP needs vector input")),
            (LayerKind::Cnn, FeatureKind::Grid { len, .. }) => sequence::check_kernels(len, params)?,
            (LayerKind::Cnn, _) => return Err(mismatch("CNN needs a one-hot grid")),
            (LayerKind::Transformer, FeatureKind::Tokens { max_len, .. }) => {
                let d = sequence::check_heads(params)?;
                return Ok(if token_out {
                    Shape::TokenSet { count: Some(max_len), dim: d }
                } else {
                    Shape::Vector(d)
                });
            }
            (LayerKind::Transformer, _) => return Err(mismatch("Transformer needs tokens")),
            (_, FeatureKind::Graph { edge_dim, .. }) => {
                if kind == LayerKind::Mpnn && edge_dim.is_none() {
                    return Err(shape_err("MPNN needs edge features".into()));
                }
                if kind == LayerKind::Gat {
                    graph::check_gat_heads(params)?;
                }
                if token_out {
                    return match kind {
                        LayerKind::Gcn | LayerKind::Gat | LayerKind::Gin => {
                            Ok(Shape::TokenSet { count: None, dim: out })
                        }
                        _ => Err(shape_err(
                            "token_set output is only available for GCN, GAT and GIN".into(),
                        )),
                    };
                }
            }
            _ => return Err(mismatch("graph encoder needs graph input")),
        }
        Ok(Shape::Vector(out))
    }

    /// Construct `kind` for inputs of `input` kind.
    pub fn build(
        pb: &mut ParamBuilder,
        kind: LayerKind,
        input: FeatureKind,
        params: &EncoderParams,
    ) -> Result<Self> {
        let output = Self::infer(kind, input, params)?;
        let out = params.out_dim();
        let layer = match (kind, input) {
            (LayerKind::Mlp, FeatureKind::Vector(d)) => {
                let hidden = params.hidden.clone().unwrap_or_else(|| DEFAULT_MLP_HIDDEN.to_vec());
                EncodeLayer::Mlp(Mlp::new(pb, "mlp", d, &hidden, out))
            }
            (LayerKind::Cnn, FeatureKind::Grid { channels, len }) => {
                EncodeLayer::Cnn(CnnEncoder::new(pb, channels, len, params)?)
            }
            (LayerKind::Transformer, FeatureKind::Tokens { vocab, max_len }) => {
                EncodeLayer::Transformer(TransformerEncoder::new(pb, vocab, max_len, params)?)
            }
            (LayerKind::Extension(name, width), _) => EncodeLayer::Extension {
                name,
                width,
                proj: Linear::new(pb, "proj", width, out, true),
            },
            (_, FeatureKind::Graph { node_dim, edge_dim }) => match kind {
                LayerKind::Gcn => EncodeLayer::Gcn(GcnEncoder::new(pb, node_dim, params)),
                LayerKind::Gat => EncodeLayer::Gat(GatEncoder::new(pb, node_dim, params)?),
                LayerKind::Gin => EncodeLayer::Gin(GinEncoder::new(pb, node_dim, params)),
                LayerKind::Mpnn => EncodeLayer::Mpnn(MpnnEncoder::new(
                    pb,
                    node_dim,
                    edge_dim.expect("checked by infer"),
                    params,
                )),
                LayerKind::NeuralFp => EncodeLayer::NeuralFp(NeuralFpEncoder::new(pb, node_dim, params)),
                _ => EncodeLayer::AttentiveFp(AttentiveFpEncoder::new(pb, node_dim, params)),
            },
            _ => unreachable!("rejected by infer"),
        };
        Ok(Self { layer, output })
    }

    /// Encode one feature per sample.
    pub fn forward<'t>(
        &self,
        ctx: &Ctx<'t, '_>,
        inputs: &[&Features],
        adapters: &Adapters,
    ) -> Result<BatchValue<'t>> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let token_out = matches!(self.output, Shape::TokenSet { .. });
        match &self.layer {
            EncodeLayer::Mlp(mlp) => {
                let x = stack_vectors(inputs, mlp.layers[0].input)?;
                Ok(BatchValue::Vectors(mlp.forward(ctx, ctx.constant(x))))
            }
            EncodeLayer::Extension { name, width, proj } => {
                let ext = adapters.encoder(name)?;
                let mut rows = Array2::zeros((inputs.len(), *width));
                for (b, f) in inputs.iter().enumerate() {
                    let v = ext.encode(f)?;
                    if v.len() != *width {
                        return Err(shape_err(format!(
                            "{name} encoder returned width {}, declared {width}",
                            v.len()
                        )));
                    }
                    rows.row_mut(b).assign(&ndarray::ArrayView1::from(&v));
                }
                Ok(BatchValue::Vectors(proj.forward(ctx, ctx.constant(rows))))
            }
            _ => {
                let mut vectors = Vec::new();
                let mut tokens = Vec::new();
                for f in inputs {
                    match self.forward_one(ctx, f, token_out)? {
                        BatchValue::Vectors(v) => vectors.push(v),
                        BatchValue::Tokens(mut t) => tokens.append(&mut t),
                    }
                }
                if token_out {
                    Ok(BatchValue::Tokens(tokens))
                } else {
                    Ok(BatchValue::Vectors(Var::concat_rows(&vectors)))
                }
            }
        }
    }

    fn forward_one<'t>(&self, ctx: &Ctx<'t, '_>, f: &Features, token_out: bool) -> Result<BatchValue<'t>> {
        let graph = || match f {
            Features::Graph(g) if g.node_count() > 0 => Ok(g.clone()),
            Features::Graph(_) => Err(shape_err("graph has no nodes".into())),
            other => Err(shape_err(format!("expected graph features, got {}", other.kind_name()))),
        };
        let one = |v: Var<'t>| Ok(BatchValue::Vectors(v));
        let set = |v: Var<'t>| {
            Ok(BatchValue::Tokens(vec![TokenSet {
                values: v,
                mask: None,
            }]))
        };
        match &self.layer {
            EncodeLayer::Cnn(c) => {
                let Features::Grid(g) = f else {
                    return Err(shape_err(format!("CNN expected a grid, got {}", f.kind_name())));
                };
                if g.nrows() != c.channels {
                    return Err(shape_err(format!(
                        "CNN expected {} channels, got {}",
                        c.channels,
                        g.nrows()
                    )));
                }
                one(c.forward(ctx, ctx.constant(g.t().to_owned())))
            }
            EncodeLayer::Transformer(t) => {
                let Features::Tokens(tok) = f else {
                    return Err(shape_err(format!("Transformer expected tokens, got {}", f.kind_name())));
                };
                let states = t.forward(ctx, tok)?;
                if token_out {
                    Ok(BatchValue::Tokens(vec![TokenSet {
                        values: states,
                        mask: Some(tok.mask.clone()),
                    }]))
                } else {
                    one(masked_mean(ctx, states, &tok.mask))
                }
            }
            EncodeLayer::Gcn(e) => {
                let g = graph()?;
                let nodes = e.nodes(ctx, ctx.constant(g.node_features.clone()), &g);
                if token_out { set(nodes) } else { one(nodes.mean_rows()) }
            }
            EncodeLayer::Gat(e) => {
                let g = graph()?;
                let nodes = e.nodes(ctx, ctx.constant(g.node_features.clone()), &g);
                if token_out { set(nodes) } else { one(nodes.mean_rows()) }
            }
            EncodeLayer::Gin(e) => {
                let g = graph()?;
                let nodes = e.nodes(ctx, ctx.constant(g.node_features.clone()), &g);
                if token_out { set(nodes) } else { one(nodes.sum_rows()) }
            }
            EncodeLayer::Mpnn(e) => {
                let g = graph()?;
                one(e.forward(ctx, ctx.constant(g.node_features.clone()), &g)?)
            }
            EncodeLayer::NeuralFp(e) => {
                let g = graph()?;
                one(e.forward(ctx, ctx.constant(g.node_features.clone()), &g))
            }
            EncodeLayer::AttentiveFp(e) => {
                let g = graph()?;
                one(e.forward(ctx, ctx.constant(g.node_features.clone()), &g))
            }
            EncodeLayer::Mlp(_) | EncodeLayer::Extension { .. } => unreachable!("batched above"),
        }
    }
}

fn stack_vectors(inputs: &[&Features], dim: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((inputs.len(), dim));
    for (b, f) in inputs.iter().enumerate() {
        let Features::Vector(v) = f else {
            return Err(shape_err(format!("expected vector features, got {}", f.kind_name())));
        };
        if v.len() != dim {
            return Err(shape_err(format!("expected vector of {dim}, got {}", v.len())));
        }
        x.row_mut(b).assign(&ndarray::ArrayView1::from(v.as_slice()));
    }
    Ok(x)
}

/// Mean over rows where `mask` is true (zero vector when none are).
pub fn masked_mean<'t>(ctx: &Ctx<'t, '_>, x: Var<'t>, mask: &[bool]) -> Var<'t> {
    let n = mask.iter().filter(|&&m| m).count();
    let w = Array2::from_shape_fn((1, mask.len()), |(_, j)| {
        if mask[j] { 1.0 / n as f64 } else { 0.0 }
    });
    ctx.constant(w).matmul(x)
}

/// Shared handle used when an extension encoder is registered in code.
pub type SharedExtension = Arc<dyn ExtensionEncoder>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::{ParamStore, Tape};

    struct Stub(usize, usize);
    impl ExtensionEncoder for Stub {
        fn output_dim(&self) -> usize {
            self.0
        }
        fn encode(&self, _: &Features) -> Result<Vec<f64>> {
            Ok(vec![0.5; self.1])
        }
    }

    fn ext_forward(adapters: &Adapters) -> Result<Shape> {
        let mut store = ParamStore::new();
        let enc = Encoder::build(
            &mut ParamBuilder::new(&mut store, 0),
            LayerKind::Extension("SchNet", 64),
            FeatureKind::Graph { node_dim: 66, edge_dim: Some(4) },
            &EncoderParams::default(),
        )?;
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &store, false);
        let f = Features::Vector(Arc::new(vec![]));
        let out = enc.forward(&ctx, &[&f], adapters)?;
        let v = out.vectors()?;
        assert_eq!(v.shape(), (1, DEFAULT_OUT_DIM));
        Ok(enc.output)
    }

    #[test]
    fn extension_slot_contract() {
        assert!(matches!(ext_forward(&Adapters::new()), Err(Error::AdapterUnavailable(_))));
        let ok = Adapters::new().with_encoder("SchNet", Arc::new(Stub(64, 64)));
        assert_eq!(ext_forward(&ok).unwrap(), Shape::Vector(DEFAULT_OUT_DIM));
        let bad = Adapters::new().with_encoder("SchNet", Arc::new(Stub(64, 63)));
        assert!(matches!(ext_forward(&bad), Err(Error::Shape(_))));
    }
}
