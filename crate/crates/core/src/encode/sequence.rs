//! Convolutional and transformer encoders over sequences.

use crate::autograd::{Init, ParamId, Var};
use crate::error::{Error, Result};
use crate::featurize::TokenSequence;
use crate::nn::{Ctx, LayerNorm, Linear, Mlp, MultiHeadAttention, ParamBuilder};

use super::EncoderParams;

pub const CNN_FILTERS: [usize; 3] = [32, 64, 96];
pub const CNN_KERNELS: [usize; 3] = [4, 6, 8];
pub const CNN_PROTEIN_KERNELS: [usize; 3] = [4, 8, 12];

pub const TRANSFORMER_D_MODEL: usize = 64;
pub const TRANSFORMER_HEADS: usize = 4;
pub const TRANSFORMER_LAYERS: usize = 2;
pub const TRANSFORMER_FFN: usize = 128;

pub(crate) fn check_kernels(len: usize, params: &EncoderParams) -> Result<()> {
    let filters = params.filters.as_deref().unwrap_or(&CNN_FILTERS);
    let kernels = params.kernels.as_deref().unwrap_or(&CNN_KERNELS);
    if filters.len() != kernels.len() || filters.is_empty() {
        return Err(Error::Shape(format!(
            "CNN needs one kernel per filter bank, got {} filters and {} kernels",
            filters.len(),
            kernels.len()
        )));
    }
    let shrink: usize = kernels.iter().map(|k| k.saturating_sub(1)).sum();
    if kernels.contains(&0) || shrink >= len {
        return Err(Error::Shape(format!(
            "CNN kernels {kernels:?} do not fit input length {len}"
        )));
    }
    Ok(())
}

/// Validated transformer width.
pub(crate) fn check_heads(params: &EncoderParams) -> Result<usize> {
    let d = params.d_model.unwrap_or(TRANSFORMER_D_MODEL);
    let heads = params.heads.unwrap_or(TRANSFORMER_HEADS);
    if heads == 0 || d % heads != 0 {
        return Err(Error::Shape(format!("d_model {d} is not divisible by {heads} heads")));
    }
    Ok(d)
}

#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub kernel: usize,
    pub linear: Linear,
}

/// Stacked 1-D convolutions with ReLU, global max pooling and a linear
/// projection. Input is `positions x channels`.
#[derive(Clone, Debug)]
pub struct CnnEncoder {
    pub channels: usize,
    pub convs: Vec<ConvLayer>,
    pub out: Linear,
}

impl CnnEncoder {
    pub fn new(pb: &mut ParamBuilder, channels: usize, len: usize, params: &EncoderParams) -> Result<Self> {
        check_kernels(len, params)?;
        let filters = params.filters.clone().unwrap_or_else(|| CNN_FILTERS.to_vec());
        let kernels = params.kernels.clone().unwrap_or_else(|| CNN_KERNELS.to_vec());
        pb.scoped("cnn", |pb| {
            let mut width = channels;
            let mut convs = Vec::new();
            for (i, (&f, &k)) in filters.iter().zip(&kernels).enumerate() {
                convs.push(ConvLayer {
                    kernel: k,
                    linear: Linear::new(pb, &format!("conv{i}"), k * width, f, true),
                });
                width = f;
            }
            Ok(Self {
                channels,
                convs,
                out: Linear::new(pb, "out", width, params.out_dim(), true),
            })
        })
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, x: Var<'t>) -> Var<'t> {
        let mut h = x;
        for c in &self.convs {
            h = c.linear.forward(ctx, h.unfold_rows(c.kernel)).relu();
        }
        self.out.forward(ctx, h.max_rows())
    }
}

#[derive(Clone, Debug)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub ffn: Mlp,
}

/// Pre-norm transformer encoder over token ids with learned positional
/// embeddings. Padded positions are excluded as attention keys.
#[derive(Clone, Debug)]
pub struct TransformerEncoder {
    pub token_embedding: ParamId,
    pub position_embedding: ParamId,
    pub blocks: Vec<TransformerBlock>,
    pub final_norm: LayerNorm,
    pub d_model: usize,
    pub vocab: usize,
    pub max_len: usize,
}

impl TransformerEncoder {
    pub fn new(pb: &mut ParamBuilder, vocab: usize, max_len: usize, params: &EncoderParams) -> Result<Self> {
        let d = check_heads(params)?;
        let heads = params.heads.unwrap_or(TRANSFORMER_HEADS);
        let layers = params.layers.unwrap_or(TRANSFORMER_LAYERS);
        let ffn = params.ffn_dim.unwrap_or(TRANSFORMER_FFN);
        Ok(pb.scoped("transformer", |pb| {
            let token_embedding = pb.param("token_embedding", (vocab, d), Init::Uniform(0.1));
            let position_embedding = pb.param("position_embedding", (max_len, d), Init::Uniform(0.1));
            let blocks = (0..layers)
                .map(|i| {
                    pb.scoped(&format!("block{i}"), |pb| TransformerBlock {
                        ln1: LayerNorm::new(pb, "ln1", d),
                        attn: MultiHeadAttention::new(pb, "attn", d, heads),
                        ln2: LayerNorm::new(pb, "ln2", d),
                        ffn: Mlp::new(pb, "ffn", d, &[ffn], d),
                    })
                })
                .collect();
            Self {
                token_embedding,
                position_embedding,
                blocks,
                final_norm: LayerNorm::new(pb, "final_norm", d),
                d_model: d,
                vocab,
                max_len,
            }
        }))
    }

    /// Hidden states, one row per position (`max_len x d_model`).
    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, tokens: &TokenSequence) -> Result<Var<'t>> {
        let n = tokens.token_ids.len();
        if n == 0 || n > self.max_len {
            return Err(Error::Shape(format!(
                "token sequence of length {n} for a transformer of max length {}",
                self.max_len
            )));
        }
        if let Some(&bad) = tokens.token_ids.iter().find(|&&t| t >= self.vocab) {
            return Err(Error::Shape(format!("token id {bad} outside vocabulary of {}", self.vocab)));
        }
        let emb = ctx.p(self.token_embedding).gather_rows(&tokens.token_ids);
        let mut x = emb + ctx.p(self.position_embedding).slice_rows(0, n);
        let mask = if tokens.mask.iter().all(|&m| m) { None } else { Some(tokens.mask.as_slice()) };
        for b in &self.blocks {
            let h = b.ln1.forward(ctx, x);
            let (a, _) = b.attn.forward(ctx, h, h, mask);
            x = x + a;
            x = x + b.ffn.forward(ctx, b.ln2.forward(ctx, x));
        }
        Ok(self.final_norm.forward(ctx, x))
    }
}
