//! Message-passing encoders over entity graphs. Each takes node features
//! as a tape variable so gradients can flow to the input.

use std::sync::Arc;

use ndarray::Array2;

use crate::autograd::{Init, ParamId, Var};
use crate::error::{Error, Result};
use crate::molparse::EntityGraph;
use crate::nn::{Ctx, Gru, Linear, Mlp, ParamBuilder};

use super::EncoderParams;

pub const GAT_HEADS: usize = 4;
pub const LEAKY_SLOPE: f64 = 0.2;
pub const MPNN_STEPS: usize = 3;
pub const ATTENTIVE_READOUT_STEPS: usize = 2;
pub const NEURAL_FP_LEN: usize = 128;

/// Symmetric-normalized adjacency with self loops.
pub fn normalized_adjacency(g: &EntityGraph) -> Array2<f64> {
    let n = g.node_count();
    let mut a = g.adjacency_matrix();
    for i in 0..n {
        a[[i, i]] = 1.0;
    }
    let inv: Vec<f64> = (0..n).map(|i| 1.0 / a.row(i).sum().sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] * inv[i] * inv[j])
}

/// Adjacency mask, optionally with self loops.
pub fn adjacency_mask(g: &EntityGraph, self_loops: bool) -> Array2<bool> {
    let n = g.node_count();
    let mut m = Array2::from_elem((n, n), false);
    for &(i, j) in &g.edges {
        m[[i, j]] = true;
    }
    if self_loops {
        for i in 0..n {
            m[[i, i]] = true;
        }
    }
    m
}

/// `n x n` matrix with entry `(i, j) = a_i + b_j` for column vectors `a`, `b`.
fn pairwise_sum<'t>(a: Var<'t>, b: Var<'t>) -> Var<'t> {
    a + b.t()
}

fn check_nodes(g: &EntityGraph) -> Result<()> {
    if g.node_count() == 0 {
        return Err(Error::Shape("graph has no nodes".into()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GcnEncoder {
    pub layers: Vec<Linear>,
    pub out: Linear,
}

impl GcnEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, params: &EncoderParams) -> Self {
        pb.scoped("gcn", |pb| {
            let mut width = input;
            let mut layers = Vec::new();
            for (i, d) in params.graph_dims().into_iter().enumerate() {
                layers.push(Linear::new(pb, &format!("layer{i}"), width, d, true));
                width = d;
            }
            Self {
                layers,
                out: Linear::new(pb, "out", width, params.out_dim(), true),
            }
        })
    }

    /// Per-node embeddings (`n x out_dim`).
    pub fn nodes<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Var<'t> {
        let a = ctx.constant(normalized_adjacency(g));
        let mut h = x;
        for l in &self.layers {
            h = l.forward(ctx, a.matmul(h)).relu();
        }
        self.out.forward(ctx, h)
    }
}

#[derive(Clone, Debug)]
pub struct GatHead {
    pub w: Linear,
    pub a_src: ParamId,
    pub a_dst: ParamId,
}

#[derive(Clone, Debug)]
pub struct GatEncoder {
    pub layers: Vec<Vec<GatHead>>,
    pub out: Linear,
}

pub(crate) fn check_gat_heads(params: &EncoderParams) -> Result<usize> {
    let heads = params.heads.unwrap_or(GAT_HEADS);
    if let Some(d) = params.graph_dims().iter().find(|&&d| heads == 0 || d % heads != 0) {
        return Err(Error::Shape(format!("GAT width {d} is not divisible by {heads} heads")));
    }
    Ok(heads)
}

impl GatEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, params: &EncoderParams) -> Result<Self> {
        let heads = check_gat_heads(params)?;
        let dims = params.graph_dims();
        Ok(pb.scoped("gat", |pb| {
            let mut width = input;
            let mut layers = Vec::new();
            for (i, &d) in dims.iter().enumerate() {
                let dh = d / heads;
                let layer = pb.scoped(&format!("layer{i}"), |pb| {
                    (0..heads)
                        .map(|h| {
                            pb.scoped(&format!("head{h}"), |pb| GatHead {
                                w: Linear::new(pb, "w", width, dh, false),
                                a_src: pb.param("a_src", (dh, 1), Init::Glorot),
                                a_dst: pb.param("a_dst", (dh, 1), Init::Glorot),
                            })
                        })
                        .collect()
                });
                layers.push(layer);
                width = d;
            }
            Self {
                layers,
                out: Linear::new(pb, "out", width, params.out_dim(), true),
            }
        }))
    }

    pub fn nodes<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Var<'t> {
        let mask = adjacency_mask(g, true);
        let mut h = x;
        for layer in &self.layers {
            let outs: Vec<Var<'t>> = layer
                .iter()
                .map(|head| {
                    let wh = head.w.forward(ctx, h);
                    let e = pairwise_sum(wh.matmul(ctx.p(head.a_src)), wh.matmul(ctx.p(head.a_dst)))
                        .leaky_relu(LEAKY_SLOPE);
                    e.masked_softmax_rows(&mask).matmul(wh)
                })
                .collect();
            h = Var::concat_cols(&outs).relu();
        }
        self.out.forward(ctx, h)
    }
}

#[derive(Clone, Debug)]
pub struct GinLayer {
    pub eps: ParamId,
    pub mlp: Mlp,
}

#[derive(Clone, Debug)]
pub struct GinEncoder {
    pub layers: Vec<GinLayer>,
    pub out: Linear,
}

impl GinEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, params: &EncoderParams) -> Self {
        pb.scoped("gin", |pb| {
            let mut width = input;
            let mut layers = Vec::new();
            for (i, d) in params.graph_dims().into_iter().enumerate() {
                layers.push(pb.scoped(&format!("layer{i}"), |pb| GinLayer {
                    eps: pb.param("eps", (1, 1), Init::Zeros),
                    mlp: Mlp::new(pb, "mlp", width, &[d], d),
                }));
                width = d;
            }
            Self {
                layers,
                out: Linear::new(pb, "out", width, params.out_dim(), true),
            }
        })
    }

    pub fn nodes<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Var<'t> {
        let a = ctx.constant(g.adjacency_matrix());
        let mut h = x;
        for l in &self.layers {
            let agg = h * ctx.p(l.eps).offset(1.0) + a.matmul(h);
            h = l.mlp.forward(ctx, agg).relu();
        }
        self.out.forward(ctx, h)
    }
}

/// Edge-conditioned message passing with a GRU update and attention
/// set pooling.
#[derive(Clone, Debug)]
pub struct MpnnEncoder {
    pub input: Linear,
    pub edge_net: Mlp,
    pub gru: Gru,
    pub gate: Linear,
    pub out: Linear,
    pub dim: usize,
    pub steps: usize,
}

impl MpnnEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, edge_dim: usize, params: &EncoderParams) -> Self {
        let dim = params.graph_dims()[0];
        pb.scoped("mpnn", |pb| Self {
            input: Linear::new(pb, "input", input, dim, true),
            edge_net: Mlp::new(pb, "edge_net", edge_dim, &[dim], dim * dim),
            gru: Gru::new(pb, "gru", dim, dim),
            gate: Linear::new(pb, "gate", dim, 1, true),
            out: Linear::new(pb, "out", dim, params.out_dim(), true),
            dim,
            steps: params.steps.unwrap_or(MPNN_STEPS),
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Result<Var<'t>> {
        check_nodes(g)?;
        let ef = g
            .edge_features
            .as_ref()
            .ok_or_else(|| Error::Shape("MPNN needs edge features".into()))?;
        if ef.nrows() != g.edges.len() {
            return Err(Error::Shape(format!(
                "{} edge feature rows for {} edges",
                ef.nrows(),
                g.edges.len()
            )));
        }
        let mut h = self.input.forward(ctx, x).relu();
        let edges = Arc::new(g.edges.clone());
        let mats = self.edge_net.forward(ctx, ctx.constant(ef.clone()));
        for _ in 0..self.steps {
            let m = mats.edge_message(h, edges.clone());
            h = self.gru.forward(ctx, m, h);
        }
        let weights = self.gate.forward(ctx, h).t().softmax_rows();
        Ok(self.out.forward(ctx, weights.matmul(h)))
    }
}

/// Differentiable circular fingerprint: each layer's node states are
/// softmax-projected onto fingerprint slots and summed.
#[derive(Clone, Debug)]
pub struct NeuralFpEncoder {
    pub layers: Vec<Linear>,
    pub readouts: Vec<Linear>,
    pub out: Linear,
}

impl NeuralFpEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, params: &EncoderParams) -> Self {
        pb.scoped("neural_fp", |pb| {
            let fp_len = params.hidden.as_ref().and_then(|h| h.first().copied()).unwrap_or(NEURAL_FP_LEN);
            let mut width = input;
            let mut layers = Vec::new();
            let mut readouts = Vec::new();
            for (i, d) in params.graph_dims().into_iter().enumerate() {
                layers.push(Linear::new(pb, &format!("layer{i}"), width, d, true));
                readouts.push(Linear::new(pb, &format!("readout{i}"), d, fp_len, true));
                width = d;
            }
            Self {
                layers,
                readouts,
                out: Linear::new(pb, "out", fp_len, params.out_dim(), true),
            }
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Var<'t> {
        let mut a = g.adjacency_matrix();
        for i in 0..g.node_count() {
            a[[i, i]] = 1.0;
        }
        let a = ctx.constant(a);
        let mut h = x;
        let mut fp: Option<Var<'t>> = None;
        for (l, r) in self.layers.iter().zip(&self.readouts) {
            h = l.forward(ctx, a.matmul(h)).relu();
            let slot = r.forward(ctx, h).softmax_rows().sum_rows();
            fp = Some(match fp {
                Some(f) => f + slot,
                None => slot,
            });
        }
        self.out.forward(ctx, fp.expect("at least one layer"))
    }
}

#[derive(Clone, Debug)]
pub struct AttentiveLayer {
    pub a_self: ParamId,
    pub a_nbr: ParamId,
    pub msg: Linear,
    pub gru: Gru,
}

/// Neighbor attention with GRU updates, then attentive readout over a
/// virtual super node.
#[derive(Clone, Debug)]
pub struct AttentiveFpEncoder {
    pub input: Linear,
    pub layers: Vec<AttentiveLayer>,
    pub readout_self: ParamId,
    pub readout_node: ParamId,
    pub readout_msg: Linear,
    pub readout_gru: Gru,
    pub readout_steps: usize,
    pub out: Linear,
}

impl AttentiveFpEncoder {
    pub fn new(pb: &mut ParamBuilder, input: usize, params: &EncoderParams) -> Self {
        let dims = params.graph_dims();
        let d = dims[0];
        pb.scoped("attentive_fp", |pb| Self {
            input: Linear::new(pb, "input", input, d, true),
            layers: (0..dims.len())
                .map(|i| {
                    pb.scoped(&format!("layer{i}"), |pb| AttentiveLayer {
                        a_self: pb.param("a_self", (d, 1), Init::Glorot),
                        a_nbr: pb.param("a_nbr", (d, 1), Init::Glorot),
                        msg: Linear::new(pb, "msg", d, d, true),
                        gru: Gru::new(pb, "gru", d, d),
                    })
                })
                .collect(),
            readout_self: pb.param("readout_self", (d, 1), Init::Glorot),
            readout_node: pb.param("readout_node", (d, 1), Init::Glorot),
            readout_msg: Linear::new(pb, "readout_msg", d, d, true),
            readout_gru: Gru::new(pb, "readout_gru", d, d),
            readout_steps: params.steps.unwrap_or(ATTENTIVE_READOUT_STEPS),
            out: Linear::new(pb, "out", d, params.out_dim(), true),
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>, g: &EntityGraph) -> Var<'t> {
        let mask = adjacency_mask(g, false);
        let mut h = self.input.forward(ctx, x).leaky_relu(LEAKY_SLOPE);
        for l in &self.layers {
            let e = pairwise_sum(h.matmul(ctx.p(l.a_self)), h.matmul(ctx.p(l.a_nbr)))
                .leaky_relu(LEAKY_SLOPE);
            let c = e.masked_softmax_rows(&mask).matmul(l.msg.forward(ctx, h)).relu();
            h = l.gru.forward(ctx, c, h);
        }
        let mut s = h.sum_rows();
        let msgs = self.readout_msg.forward(ctx, h);
        for _ in 0..self.readout_steps {
            let scores = (h.matmul(ctx.p(self.readout_node)) + s.matmul(ctx.p(self.readout_self)))
                .leaky_relu(LEAKY_SLOPE);
            let c = scores.t().softmax_rows().matmul(msgs).relu();
            s = self.readout_gru.forward(ctx, c, s);
        }
        self.out.forward(ctx, s)
    }
}
