//! Model graphs: encoder nodes, stacks, interactions, flatten nodes and an
//! MLP head, checked by shape inference and built into a trainable model.

pub mod presets;
pub mod registry;
pub mod space;

pub use presets::{preset, PRESETS};
pub use registry::{lookup, EncoderEntry, InputType};
pub use space::{ablate, enumerate_model_space};

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adapters::Adapters;
use crate::autograd::{ParamStore, Tape, Tensor, Var};
use crate::encode::{BatchValue, Encoder, EncoderParams, LayerKind, Shape, TokenSet};
use crate::error::{Error, Result};
use crate::featurize::registry::{featurize, FeaturizeOptions, FeaturizerSpec, Role};
use crate::featurize::{Entity, Features};
use crate::interact::{Interaction, InteractionKind, InteractionParams};
use crate::nn::{Ctx, Linear, Mlp, ParamBuilder};

pub const DEFAULT_HEAD_HIDDEN: [usize; 2] = [512, 128];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    Regression,
    Multiclass { classes: usize },
}

impl TaskKind {
    pub fn output_dim(&self) -> usize {
        match *self {
            TaskKind::Multiclass { classes } => classes,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Binary => "binary",
            TaskKind::Regression => "regression",
            TaskKind::Multiclass { .. } => "multiclass",
        }
    }

    /// Logit row to reported scores: sigmoid, identity or softmax.
    pub fn activate(&self, logits: &[f64]) -> Vec<f64> {
        match self {
            TaskKind::Binary => logits.iter().map(|&z| 1.0 / (1.0 + (-z).exp())).collect(),
            TaskKind::Regression => logits.to_vec(),
            TaskKind::Multiclass { .. } => {
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
        }
    }
}

fn is_default<T: Default + PartialEq>(t: &T) -> bool {
    *t == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeSpec {
    Encoder {
        encoder: String,
        entity: usize,
        #[serde(default, skip_serializing_if = "is_default")]
        params: EncoderParams,
    },
    Stack {
        inputs: Vec<usize>,
    },
    Interaction {
        interaction: InteractionKind,
        inputs: Vec<usize>,
        #[serde(default, skip_serializing_if = "is_default")]
        params: InteractionParams,
    },
    Flatten {
        input: usize,
    },
}

impl NodeSpec {
    pub fn inputs(&self) -> Vec<usize> {
        match self {
            NodeSpec::Encoder { .. } => Vec::new(),
            NodeSpec::Stack { inputs } | NodeSpec::Interaction { inputs, .. } => inputs.clone(),
            NodeSpec::Flatten { input } => vec![*input],
        }
    }

    pub(crate) fn inputs_mut(&mut self) -> Vec<&mut usize> {
        match self {
            NodeSpec::Encoder { .. } => Vec::new(),
            NodeSpec::Stack { inputs } | NodeSpec::Interaction { inputs, .. } => inputs.iter_mut().collect(),
            NodeSpec::Flatten { input } => vec![input],
        }
    }

    fn label(&self) -> String {
        match self {
            NodeSpec::Encoder { encoder, .. } => encoder.clone(),
            NodeSpec::Stack { .. } => "stack".into(),
            NodeSpec::Interaction { interaction, .. } => interaction.name().into(),
            NodeSpec::Flatten { .. } => "flatten".into(),
        }
    }
}

/// MLP head. Without an explicit input the head reads the concatenation of
/// every node nothing else consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<usize>,
    #[serde(default = "default_head_hidden")]
    pub hidden: Vec<usize>,
}

fn default_head_hidden() -> Vec<usize> {
    DEFAULT_HEAD_HIDDEN.to_vec()
}

impl Default for HeadSpec {
    fn default() -> Self {
        Self {
            input: None,
            hidden: default_head_hidden(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub task: TaskKind,
    pub entities: [Role; 2],
    #[serde(default, skip_serializing_if = "is_default")]
    pub featurize: FeaturizeOptions,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub head: HeadSpec,
}

/// Inferred shapes of every node plus the head's input nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapePlan {
    pub shapes: Vec<Shape>,
    pub order: Vec<usize>,
    pub head_inputs: Vec<usize>,
    pub head_dim: usize,
}

impl ModelSpec {
    pub fn new(task: TaskKind, entities: [Role; 2]) -> Self {
        Self {
            task,
            entities,
            featurize: FeaturizeOptions::default(),
            nodes: Vec::new(),
            head: HeadSpec::default(),
        }
    }

    pub fn drug_target(task: TaskKind) -> Self {
        Self::new(task, [Role::Drug, Role::Protein])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        Ok(serde_yaml::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_yaml(&self) -> Result<String> {
        Ok(serde_yaml::to_string(self)?)
    }

    /// Read a `.json`, `.yaml` or `.yml` model file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_yaml(&text),
        }
    }

    /// Append a node, keeping it only if shape inference of its prefix passes.
    fn push(&mut self, node: NodeSpec) -> Result<usize> {
        self.nodes.push(node);
        let id = self.nodes.len() - 1;
        if let Err(e) = self.node_shapes(&Adapters::default()) {
            self.nodes.pop();
            return Err(e);
        }
        Ok(id)
    }

    pub fn add_encoder(&mut self, entity: usize, name: &str, params: EncoderParams) -> Result<usize> {
        let role = *self
            .entities
            .get(entity)
            .ok_or_else(|| Error::Kind(format!("entity index {entity} out of range (0 or 1)")))?;
        let entry = registry::lookup(role, name)?;
        self.push(NodeSpec::Encoder {
            encoder: entry.name.to_string(),
            entity,
            params,
        })
    }

    pub fn stack(&mut self, inputs: &[usize]) -> Result<usize> {
        self.push(NodeSpec::Stack {
            inputs: inputs.to_vec(),
        })
    }

    pub fn set_interaction(
        &mut self,
        inputs: &[usize],
        kind: InteractionKind,
        params: InteractionParams,
    ) -> Result<usize> {
        self.push(NodeSpec::Interaction {
            interaction: kind,
            inputs: inputs.to_vec(),
            params,
        })
    }

    pub fn flatten(&mut self, input: usize) -> Result<usize> {
        self.push(NodeSpec::Flatten { input })
    }

    /// Route `input` into the MLP head with the given hidden widths.
    pub fn apply_mlp(&mut self, input: usize, hidden: &[usize]) -> Result<()> {
        let shapes = self.node_shapes(&Adapters::default())?;
        match shapes.get(input) {
            None => return Err(Error::Shape(format!("head input node {input} does not exist"))),
            Some(s) if !s.is_vector() => {
                return Err(Error::Shape(format!(
                    "head input node {input} is {s}; flatten it first"
                )))
            }
            Some(_) => {}
        }
        self.head = HeadSpec {
            input: Some(input),
            hidden: hidden.to_vec(),
        };
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.task.output_dim()
    }

    fn topo_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(&bad) = node.inputs().iter().find(|&&j| j >= n) {
                return Err(Error::Shape(format!("node {i} reads missing node {bad}")));
            }
        }
        // 0 unvisited, 1 on stack, 2 done
        let mut state = vec![0u8; n];
        let mut order = Vec::with_capacity(n);
        fn visit(spec: &ModelSpec, i: usize, state: &mut [u8], order: &mut Vec<usize>) -> Result<()> {
            match state[i] {
                2 => return Ok(()),
                1 => return Err(Error::Cycle(i)),
                _ => {}
            }
            state[i] = 1;
            for j in spec.nodes[i].inputs() {
                visit(spec, j, state, order)?;
            }
            state[i] = 2;
            order.push(i);
            Ok(())
        }
        for i in 0..n {
            visit(self, i, &mut state, &mut order)?;
        }
        Ok(order)
    }

    fn featurizer_of(&self, i: usize) -> Option<(usize, FeaturizerSpec, &'static EncoderEntry, &EncoderParams)> {
        let NodeSpec::Encoder {
            encoder,
            entity,
            params,
        } = &self.nodes[i]
        else {
            return None;
        };
        let entry = registry::lookup(self.entities[*entity], encoder).ok()?;
        let max_len = entry.featurizer.default_max_len().and(params.max_len);
        Some((*entity, FeaturizerSpec::with_max_len(entry.featurizer, max_len), entry, params))
    }

    fn node_shapes(&self, adapters: &Adapters) -> Result<Vec<Shape>> {
        let order = self.topo_order()?;
        let mut shapes: Vec<Option<Shape>> = vec![None; self.nodes.len()];
        for &i in &order {
            let input_shapes: Vec<Shape> = self.nodes[i]
                .inputs()
                .iter()
                .map(|&j| shapes[j].expect("topological order"))
                .collect();
            let at = |e: Error| match e {
                Error::Shape(m) => Error::Shape(format!("node {i} ({}): {m}", self.nodes[i].label())),
                other => other,
            };
            let shape = match &self.nodes[i] {
                NodeSpec::Encoder { encoder, entity, .. } => {
                    let role = *self.entities.get(*entity).ok_or_else(|| {
                        Error::Kind(format!("node {i}: entity index {entity} out of range"))
                    })?;
                    registry::lookup(role, encoder)?;
                    let (_, fspec, entry, params) = self.featurizer_of(i).expect("encoder node");
                    let merged = merge_params(params, &entry.defaults());
                    Encoder::infer(resolve_layer(entry.layer, adapters), fspec.kind(adapters), &merged)
                        .map_err(at)?
                }
                NodeSpec::Stack { .. } => stack_shape(&input_shapes).map_err(at)?,
                NodeSpec::Interaction {
                    interaction,
                    params,
                    ..
                } => Interaction::infer(*interaction, &input_shapes, params).map_err(at)?,
                NodeSpec::Flatten { .. } => flatten_shape(input_shapes[0]).map_err(at)?,
            };
            shapes[i] = Some(shape);
        }
        Ok(shapes.into_iter().map(|s| s.expect("all visited")).collect())
    }

    /// Full shape inference: node shapes, reachability and the head input.
    pub fn infer_shapes(&self, adapters: &Adapters) -> Result<ShapePlan> {
        if self.nodes.is_empty() {
            return Err(Error::Shape("model has no nodes".into()));
        }
        let order = self.topo_order()?;
        let shapes = self.node_shapes(adapters)?;
        let mut consumed = vec![false; self.nodes.len()];
        for node in &self.nodes {
            for j in node.inputs() {
                consumed[j] = true;
            }
        }
        let head_inputs: Vec<usize> = match self.head.input {
            Some(h) => {
                if h >= self.nodes.len() {
                    return Err(Error::Shape(format!("head reads missing node {h}")));
                }
                let mut reach = vec![false; self.nodes.len()];
                let mut todo = vec![h];
                while let Some(i) = todo.pop() {
                    if !std::mem::replace(&mut reach[i], true) {
                        todo.extend(self.nodes[i].inputs());
                    }
                }
                if let Some(i) = reach.iter().position(|r| !r) {
                    return Err(Error::Shape(format!(
                        "node {i} ({}) does not reach the head",
                        self.nodes[i].label()
                    )));
                }
                vec![h]
            }
            None => (0..self.nodes.len()).filter(|&i| !consumed[i]).collect(),
        };
        for &i in &head_inputs {
            if !shapes[i].is_vector() {
                return Err(Error::Shape(format!(
                    "node {i} ({}) feeds the head as {}; flatten it or add an interaction",
                    self.nodes[i].label(),
                    shapes[i]
                )));
            }
        }
        for (e, role) in self.entities.iter().enumerate() {
            let has = self
                .nodes
                .iter()
                .any(|n| matches!(n, NodeSpec::Encoder { entity, .. } if *entity == e));
            if !has {
                return Err(Error::Shape(format!("entity {e} ({role:?}) has no encoder")));
            }
        }
        let head_dim = head_inputs.iter().map(|&i| shapes[i].dim()).sum();
        Ok(ShapePlan {
            shapes,
            order,
            head_inputs,
            head_dim,
        })
    }
}

fn merge_params(user: &EncoderParams, defaults: &EncoderParams) -> EncoderParams {
    macro_rules! pick {
        ($($f:ident),*) => {
            EncoderParams { $($f: user.$f.clone().or_else(|| defaults.$f.clone()),)* }
        };
    }
    pick!(out_dim, hidden, filters, kernels, max_len, d_model, heads, layers, ffn_dim, dims, steps, output)
}

fn resolve_layer(layer: LayerKind, adapters: &Adapters) -> LayerKind {
    match layer {
        LayerKind::Extension(name, 0) => LayerKind::Extension(
            name,
            adapters
                .encoder(name)
                .map_or(registry::DEFAULT_EXTENSION_DIM, |e| e.output_dim()),
        ),
        other => other,
    }
}

fn stack_shape(inputs: &[Shape]) -> Result<Shape> {
    if inputs.len() < 2 {
        return Err(Error::Arity(format!("stack needs at least 2 inputs, got {}", inputs.len())));
    }
    if let Some(s) = inputs.iter().find(|s| !s.is_vector()) {
        return Err(Error::Kind(format!("stack takes vectors, got {s}")));
    }
    Ok(Shape::TokenSet {
        count: Some(inputs.len()),
        dim: inputs.iter().map(Shape::dim).max().unwrap_or(0),
    })
}

fn flatten_shape(input: Shape) -> Result<Shape> {
    match input {
        Shape::Vector(d) => Ok(Shape::Vector(d)),
        Shape::TokenSet { count: Some(n), dim } => Ok(Shape::Vector(n * dim)),
        s @ Shape::TokenSet { count: None, .. } => Err(Error::Shape(format!(
            "cannot flatten {s}: the token count varies per sample"
        ))),
    }
}

/// Featurizer run once per entity of a pair and shared by every encoder that
/// reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSlot {
    pub entity: usize,
    pub spec: FeaturizerSpec,
}

#[derive(Clone, Debug)]
enum NodeOp {
    Encoder { encoder: Encoder, slot: usize },
    Stack { proj: Vec<Option<Linear>>, dim: usize },
    Interaction(Interaction),
    Flatten,
}

/// A built model: parameters, featurization plan and executable graph.
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParamStore,
    pub plan: Vec<FeatureSlot>,
    pub shapes: ShapePlan,
    pub adapters: Adapters,
    ops: Vec<NodeOp>,
    head: Mlp,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec)
            .field("plan", &self.plan)
            .field("params", &self.params.len())
            .finish()
    }
}

/// Featurized inputs of one pair, one entry per plan slot.
pub type FeatureRow = Vec<Features>;

pub fn build(spec: &ModelSpec, adapters: &Adapters, seed: u64) -> Result<Model> {
    let shapes = spec.infer_shapes(adapters)?;
    let mut store = ParamStore::new();
    let mut slots: BTreeMap<FeatureSlot, usize> = BTreeMap::new();
    let mut plan = Vec::new();
    let mut ops = Vec::with_capacity(spec.nodes.len());
    let mut pb = ParamBuilder::new(&mut store, seed);
    for (i, node) in spec.nodes.iter().enumerate() {
        let input_shapes: Vec<Shape> = node.inputs().iter().map(|&j| shapes.shapes[j]).collect();
        let op = pb.scoped(&format!("node{i}"), |pb| -> Result<NodeOp> {
            Ok(match node {
                NodeSpec::Encoder { .. } => {
                    let (entity, fspec, entry, params) = spec.featurizer_of(i).expect("encoder node");
                    let slot = FeatureSlot { entity, spec: fspec };
                    let idx = *slots.entry(slot).or_insert_with(|| {
                        plan.push(slot);
                        plan.len() - 1
                    });
                    let merged = merge_params(params, &entry.defaults());
                    let layer = resolve_layer(entry.layer, adapters);
                    let encoder = Encoder::build(pb, layer, fspec.kind(adapters), &merged)?;
                    NodeOp::Encoder { encoder, slot: idx }
                }
                NodeSpec::Stack { .. } => {
                    let dim = shapes.shapes[i].dim();
                    let proj = input_shapes
                        .iter()
                        .enumerate()
                        .map(|(k, s)| {
                            (s.dim() != dim).then(|| Linear::new(pb, &format!("proj{k}"), s.dim(), dim, true))
                        })
                        .collect();
                    NodeOp::Stack { proj, dim }
                }
                NodeSpec::Interaction {
                    interaction,
                    params,
                    ..
                } => NodeOp::Interaction(Interaction::build(pb, *interaction, &input_shapes, params)?),
                NodeSpec::Flatten { .. } => NodeOp::Flatten,
            })
        })?;
        ops.push(op);
    }
    let head = Mlp::new(&mut pb, "head", shapes.head_dim, &spec.head.hidden, spec.output_dim());
    Ok(Model {
        spec: spec.clone(),
        params: store,
        plan,
        shapes,
        adapters: adapters.clone(),
        ops,
        head,
    })
}

impl Model {
    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Run every plan slot on one pair.
    pub fn featurize(&self, pair: [&Entity; 2]) -> Result<FeatureRow> {
        self.plan
            .iter()
            .map(|s| featurize(&s.spec, pair[s.entity], &self.adapters, &self.spec.featurize))
            .collect()
    }

    /// Logits, `batch x output_dim`.
    pub fn forward<'t>(&self, ctx: &Ctx<'t, '_>, batch: &[&FeatureRow]) -> Result<Var<'t>> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut values: Vec<Option<BatchValue<'t>>> = vec![None; self.ops.len()];
        for &i in &self.shapes.order {
            let inputs: Vec<BatchValue<'t>> = self.spec.nodes[i]
                .inputs()
                .iter()
                .map(|&j| values[j].clone().expect("topological order"))
                .collect();
            let out = match &self.ops[i] {
                NodeOp::Encoder { encoder, slot } => {
                    let feats: Vec<&Features> = batch.iter().map(|row| &row[*slot]).collect();
                    encoder.forward(ctx, &feats, &self.adapters)?
                }
                NodeOp::Stack { proj, dim } => stack_forward(ctx, &inputs, proj, *dim)?,
                NodeOp::Interaction(layer) => layer.forward(ctx, &inputs)?,
                NodeOp::Flatten => flatten_forward(&inputs[0])?,
            };
            values[i] = Some(out);
        }
        let parts: Vec<Var<'t>> = self
            .shapes
            .head_inputs
            .iter()
            .map(|&i| values[i].as_ref().expect("computed").vectors())
            .collect::<Result<_>>()?;
        let x = if parts.len() == 1 { parts[0] } else { Var::concat_cols(&parts) };
        Ok(self.head.forward(ctx, x))
    }

    /// Evaluation-mode logits for featurized rows.
    pub fn logits(&self, rows: &[&FeatureRow]) -> Result<Array2<f64>> {
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &self.params, false);
        let out = self.forward(&ctx, rows)?;
        Ok(out.value().as_ref().clone())
    }

    /// Scores per row: probability (binary), value (regression) or class
    /// probabilities (multiclass).
    pub fn predict_rows(&self, rows: &[&FeatureRow]) -> Result<Vec<Vec<f64>>> {
        let logits = self.logits(rows)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| self.spec.task.activate(&r.to_vec()))
            .collect())
    }

    pub fn predict(&self, pairs: &[[&Entity; 2]]) -> Result<Vec<Vec<f64>>> {
        let rows: Vec<FeatureRow> = pairs.iter().map(|p| self.featurize(*p)).collect::<Result<_>>()?;
        let refs: Vec<&FeatureRow> = rows.iter().collect();
        self.predict_rows(&refs)
    }

    /// Apply running-statistic updates recorded during a training forward.
    pub fn apply_buffer_updates(&mut self, updates: Vec<(crate::autograd::ParamId, Tensor)>) {
        for (id, t) in updates {
            self.params.set(id, t);
        }
    }
}

fn stack_forward<'t>(
    ctx: &Ctx<'t, '_>,
    inputs: &[BatchValue<'t>],
    proj: &[Option<Linear>],
    dim: usize,
) -> Result<BatchValue<'t>> {
    let vs: Vec<Var<'t>> = inputs
        .iter()
        .zip(proj)
        .map(|(v, p)| {
            let v = v.vectors()?;
            Ok(match p {
                Some(l) => l.forward(ctx, v),
                None => v,
            })
        })
        .collect::<Result<_>>()?;
    let b = vs[0].rows();
    let sets = (0..b)
        .map(|r| {
            let rows: Vec<Var<'t>> = vs.iter().map(|v| v.slice_rows(r, 1)).collect();
            let values = Var::concat_rows(&rows);
            debug_assert_eq!(values.cols(), dim);
            TokenSet { values, mask: None }
        })
        .collect();
    Ok(BatchValue::Tokens(sets))
}

fn flatten_forward<'t>(input: &BatchValue<'t>) -> Result<BatchValue<'t>> {
    match input {
        BatchValue::Vectors(v) => Ok(BatchValue::Vectors(*v)),
        BatchValue::Tokens(sets) => {
            let rows: Vec<Var<'t>> = sets
                .iter()
                .map(|t| {
                    let (n, d) = t.values.shape();
                    t.values.reshape(1, n * d)
                })
                .collect();
            if rows.windows(2).any(|w| w[0].cols() != w[1].cols()) {
                return Err(Error::Shape("flatten over token sets of different sizes".into()));
            }
            Ok(BatchValue::Vectors(Var::concat_rows(&rows)))
        }
    }
}
