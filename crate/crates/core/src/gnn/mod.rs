//! Heterogeneous GATv2 graph classifier on a small autodiff tape.
//!
//! Parameter order (also the checkpoint order): token embedding; then for
//! each layer and each relation in [`RELATIONS`] order the source projection,
//! destination projection, attention vector and message projection; then
//! `fc1.w`, `fc1.b`, `fc2.w`, `fc2.b`.

mod adam;
mod tape;

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{EdgeType, NodeType, ProgramGraph};
use crate::labels::ClassLabel;

pub use adam::{adam_step, AdamState};
pub use tape::{cross_entropy_row, Matrix, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no training graphs")]
    EmptyDataset,
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no relation parameters for {src} -{edge}-> {dst}")]
    MissingRelationParams { src: NodeType, edge: EdgeType, dst: NodeType },
    #[error("label {0} is not in the label space")]
    UnknownLabel(ClassLabel),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub layer_sizes: [usize; 3],
    pub node_embed_dim: usize,
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub leaky_slope: f64,
    pub heads: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            layer_sizes: [128, 64, 32],
            node_embed_dim: 64,
            fc_hidden: 16,
            num_classes: 2,
            leaky_slope: 0.2,
            heads: 1,
            lr: 4e-4,
            epochs: 10,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

impl GnnConfig {
    fn check(&self) -> Result<(), GnnError> {
        let dims = self.layer_sizes.iter().chain([&self.node_embed_dim, &self.fc_hidden, &self.num_classes, &self.batch_size]);
        if dims.into_iter().any(|&d| d == 0) {
            return Err(GnnError::InvalidConfig("all dimensions and the batch size must be at least 1".into()));
        }
        if self.heads != 1 {
            return Err(GnnError::InvalidConfig("only a single attention head is supported".into()));
        }
        Ok(())
    }
}

/// A typed relation; `edge: None` is the per-type self loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub src: NodeType,
    pub edge: Option<EdgeType>,
    pub dst: NodeType,
}

const fn rel(src: NodeType, edge: Option<EdgeType>, dst: NodeType) -> Relation {
    Relation { src, edge, dst }
}

pub const RELATIONS: [Relation; 8] = [
    rel(NodeType::Control, Some(EdgeType::Control), NodeType::Control),
    rel(NodeType::Control, Some(EdgeType::Call), NodeType::Control),
    rel(NodeType::Variable, Some(EdgeType::Data), NodeType::Control),
    rel(NodeType::Constant, Some(EdgeType::Data), NodeType::Control),
    rel(NodeType::Control, Some(EdgeType::Data), NodeType::Variable),
    rel(NodeType::Control, None, NodeType::Control),
    rel(NodeType::Variable, None, NodeType::Variable),
    rel(NodeType::Constant, None, NodeType::Constant),
];

const PARTS: [&str; 4] = ["w_src", "w_dst", "att", "w_msg"];

fn relation_of(src: NodeType, edge: EdgeType, dst: NodeType) -> Option<usize> {
    RELATIONS.iter().position(|r| r.src == src && r.edge == Some(edge) && r.dst == dst)
}

fn self_relation(t: NodeType) -> usize {
    RELATIONS.iter().position(|r| r.src == t && r.edge.is_none()).expect("every node type has a self loop")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: GnnConfig,
    /// Known tokens; token `vocab[i]` uses embedding row `i + 1`, row 0 is OOV.
    pub vocab: Vec<String>,
    pub label_space: Vec<ClassLabel>,
    pub params: Vec<Matrix>,
}

/// Parameters of one relation in one layer.
pub struct RelationParams<'a> {
    pub w_src: &'a Matrix,
    pub w_dst: &'a Matrix,
    pub att: &'a Matrix,
    pub w_msg: &'a Matrix,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let b = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-b..b)).collect())
}

impl GnnModel {
    /// Fresh Xavier-uniform model from `config.rng_seed`.
    pub fn new(config: GnnConfig, vocab: Vec<String>, label_space: Vec<ClassLabel>) -> Result<Self, GnnError> {
        let config = GnnConfig { num_classes: label_space.len(), ..config };
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let shapes = Self::shapes(&config, vocab.len());
        let params = shapes.iter().map(|&(name, r, c)| if name.ends_with(".b") { Matrix::zeros(r, c) } else { xavier(&mut rng, r, c) }).collect();
        Ok(Self { config, vocab, label_space, params })
    }

    /// Vocabulary is the sorted set of node tokens of `graphs`.
    pub fn for_graphs<'a>(config: GnnConfig, graphs: impl IntoIterator<Item = &'a ProgramGraph>, label_space: Vec<ClassLabel>) -> Result<Self, GnnError> {
        let vocab: BTreeSet<&str> = graphs.into_iter().flat_map(|g| g.nodes.iter().map(|n| n.token.as_str())).collect();
        Self::new(config, vocab.into_iter().map(String::from).collect(), label_space)
    }

    fn shapes(c: &GnnConfig, vocab: usize) -> Vec<(&'static str, usize, usize)> {
        let mut out = vec![("embedding", vocab + 1, c.node_embed_dim)];
        let mut din = c.node_embed_dim;
        for &dout in &c.layer_sizes {
            for _ in RELATIONS {
                out.extend([("w_src", din, dout), ("w_dst", din, dout), ("att", dout, 1), ("w_msg", din, dout)]);
            }
            din = dout;
        }
        out.extend([("fc1.w", din, c.fc_hidden), ("fc1.b", 1, c.fc_hidden), ("fc2.w", c.fc_hidden, c.num_classes), ("fc2.b", 1, c.num_classes)]);
        out
    }

    /// Human-readable name of every parameter block, in order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for l in 0..3 {
            for r in &RELATIONS {
                let e = r.edge.map_or("Self".to_string(), |e| e.to_string());
                for p in PARTS {
                    names.push(format!("layer{l}.{}-{e}-{}.{p}", r.src, r.dst));
                }
            }
        }
        names.extend(["fc1.w", "fc1.b", "fc2.w", "fc2.b"].map(String::from));
        names
    }

    fn relation_index(layer: usize, relation: usize, part: usize) -> usize {
        1 + (layer * RELATIONS.len() + relation) * 4 + part
    }

    fn fc_index() -> usize {
        Self::relation_index(3, 0, 0)
    }

    pub fn relation_params(&self, layer: usize, relation: usize) -> RelationParams<'_> {
        let at = |p| &self.params[Self::relation_index(layer, relation, p)];
        RelationParams { w_src: at(0), w_dst: at(1), att: at(2), w_msg: at(3) }
    }

    pub fn embedding(&self) -> &Matrix {
        &self.params[0]
    }

    /// `[fc1.w, fc1.b, fc2.w, fc2.b]`
    pub fn fc(&self) -> [&Matrix; 4] {
        let i = Self::fc_index();
        [&self.params[i], &self.params[i + 1], &self.params[i + 2], &self.params[i + 3]]
    }

    /// Embedding row of `token` (0 when unknown).
    pub fn token_index(&self, token: &str) -> usize {
        self.vocab.binary_search_by(|t| t.as_str().cmp(token)).map_or(0, |i| i + 1)
    }

    pub fn class_index(&self, label: &ClassLabel) -> Result<usize, GnnError> {
        self.label_space.iter().position(|l| l == label).ok_or_else(|| GnnError::UnknownLabel(label.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<(), GnnError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GnnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let names = self.param_names();
        let ck = Checkpoint {
            version: 1,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            label_space: self.label_space.clone(),
            params: self
                .params
                .iter()
                .zip(names)
                .map(|(m, name)| NamedParam { name, rows: m.rows, cols: m.cols, values: m.data.clone() })
                .collect(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GnnError> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        let shapes = Self::shapes(&ck.config, ck.vocab.len());
        if ck.params.len() != shapes.len() {
            return Err(GnnError::ShapeMismatch(format!("{} parameter blocks, expected {}", ck.params.len(), shapes.len())));
        }
        let mut params = Vec::with_capacity(shapes.len());
        for (p, (_, r, c)) in ck.params.into_iter().zip(shapes) {
            if (p.rows, p.cols) != (r, c) || p.values.len() != r * c {
                return Err(GnnError::ShapeMismatch(format!("{}: {}x{} with {} values, expected {r}x{c}", p.name, p.rows, p.cols, p.values.len())));
            }
            params.push(Matrix::from_vec(r, c, p.values));
        }
        Ok(Self { config: ck.config, vocab: ck.vocab, label_space: ck.label_space, params })
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: GnnConfig,
    vocab: Vec<String>,
    label_space: Vec<ClassLabel>,
    params: Vec<NamedParam>,
}

#[derive(Serialize, Deserialize)]
struct NamedParam {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Disjoint union of graphs with edges grouped by relation.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub tokens: Vec<usize>,
    pub graph_of: Vec<usize>,
    pub graphs: usize,
    /// Per relation, `(src, dst)` node indices; self loops follow node order.
    pub relations: Vec<(Vec<usize>, Vec<usize>)>,
}

impl GraphBatch {
    pub fn new(model: &GnnModel, graphs: &[&ProgramGraph]) -> Result<Self, GnnError> {
        let mut b = GraphBatch { tokens: Vec::new(), graph_of: Vec::new(), graphs: graphs.len(), relations: vec![(Vec::new(), Vec::new()); RELATIONS.len()] };
        for (gi, g) in graphs.iter().enumerate() {
            if g.nodes.is_empty() {
                return Err(GnnError::EmptyGraph);
            }
            let off = b.tokens.len();
            b.tokens.extend(g.nodes.iter().map(|n| model.token_index(&n.token)));
            b.graph_of.extend(std::iter::repeat(gi).take(g.nodes.len()));
            for e in &g.edges {
                let (s, d) = (g.nodes[e.src].node_type, g.nodes[e.dst].node_type);
                let r = relation_of(s, e.edge_type, d).ok_or(GnnError::MissingRelationParams { src: s, edge: e.edge_type, dst: d })?;
                b.relations[r].0.push(off + e.src);
                b.relations[r].1.push(off + e.dst);
            }
            for n in &g.nodes {
                let r = self_relation(n.node_type);
                b.relations[r].0.push(off + n.id);
                b.relations[r].1.push(off + n.id);
            }
        }
        Ok(b)
    }

    pub fn nodes(&self) -> usize {
        self.tokens.len()
    }
}

/// Attention-weighted GATv2 messages of one relation, one row per edge.
#[allow(clippy::too_many_arguments)]
fn relation_messages(tape: &mut Tape, h_src: Var, h_dst: Var, src: &[usize], dst: &[usize], p: [Var; 4], slope: f64) -> Var {
    let hs = tape.gather(h_src, src.to_vec());
    let hd = tape.gather(h_dst, dst.to_vec());
    let zs = tape.matmul(hs, p[0]);
    let zd = tape.matmul(hd, p[1]);
    let z = tape.add(zs, zd);
    let z = tape.leaky_relu(z, slope);
    let scores = tape.matmul(z, p[2]);
    let alpha = tape.segment_softmax(scores, dst.to_vec());
    let msg = tape.matmul(hs, p[3]);
    tape.scale_rows(msg, alpha)
}

/// Stand-alone GATv2 relation: rows of the result are destinations of `h_dst`.
pub fn gatv2_relation(h_src: &Matrix, h_dst: &Matrix, edges: &[(usize, usize)], params: &RelationParams<'_>, slope: f64) -> Result<Matrix, GnnError> {
    let (din, dout) = params.w_src.shape();
    let ok = h_src.cols == din
        && h_dst.cols == din
        && params.w_dst.shape() == (din, dout)
        && params.w_msg.shape() == (din, dout)
        && params.att.shape() == (dout, 1)
        && edges.iter().all(|&(s, d)| s < h_src.rows && d < h_dst.rows);
    if !ok {
        return Err(GnnError::ShapeMismatch("relation inputs".into()));
    }
    let mut t = Tape::new();
    let hs = t.constant(h_src.clone());
    let hd = t.constant(h_dst.clone());
    let p = [params.w_src, params.w_dst, params.att, params.w_msg].map(|m| t.constant(m.clone()));
    let (src, dst): (Vec<usize>, Vec<usize>) = edges.iter().copied().unzip();
    if edges.is_empty() {
        return Ok(Matrix::zeros(h_dst.rows, dout));
    }
    let m = relation_messages(&mut t, hs, hd, &src, &dst, p, slope);
    let out = t.scatter_add(m, dst, h_dst.rows);
    Ok(t.value(out).clone())
}

/// Records the forward pass; returns node features after each layer and the
/// `graphs x classes` logits.
pub fn forward_on_tape(model: &GnnModel, batch: &GraphBatch, tape: &mut Tape) -> (Vec<Var>, Var) {
    let n = batch.nodes();
    let emb = tape.param(0, &model.params[0]);
    let mut h = tape.gather(emb, batch.tokens.clone());
    let mut layers = Vec::with_capacity(3);
    for (l, &dout) in model.config.layer_sizes.iter().enumerate() {
        // messages of all relations are stacked and summed into their
        // destinations with one scatter
        let mut parts = Vec::new();
        let mut targets = Vec::new();
        for (r, (src, dst)) in batch.relations.iter().enumerate() {
            if src.is_empty() {
                continue;
            }
            let p = [0, 1, 2, 3].map(|k| {
                let i = GnnModel::relation_index(l, r, k);
                tape.param(i, &model.params[i])
            });
            parts.push(relation_messages(tape, h, h, src, dst, p, model.config.leaky_slope));
            targets.extend_from_slice(dst);
        }
        let pre = if parts.is_empty() {
            tape.constant(Matrix::zeros(n, dout))
        } else {
            let all = tape.concat_rows(parts);
            tape.scatter_add(all, targets, n)
        };
        h = tape.elu(pre);
        layers.push(h);
    }
    let pooled = tape.segment_max(h, &batch.graph_of, batch.graphs);
    let f = GnnModel::fc_index();
    let [w1, b1, w2, b2] = [f, f + 1, f + 2, f + 3].map(|i| tape.param(i, &model.params[i]));
    let z = tape.matmul(pooled, w1);
    let z = tape.add_row(z, b1);
    let z = tape.relu(z);
    let z = tape.matmul(z, w2);
    let logits = tape.add_row(z, b2);
    (layers, logits)
}

pub fn forward(model: &GnnModel, graph: &ProgramGraph) -> Result<Vec<f64>, GnnError> {
    let batch = GraphBatch::new(model, &[graph])?;
    let mut tape = Tape::new();
    let (_, logits) = forward_on_tape(model, &batch, &mut tape);
    Ok(tape.value(logits).data.clone())
}

pub fn cross_entropy(logits: &[f64], class: usize) -> Result<f64, GnnError> {
    if class >= logits.len() {
        return Err(GnnError::ClassOutOfRange { class, classes: logits.len() });
    }
    Ok(cross_entropy_row(logits, class).0)
}

/// Per-graph losses from one disjoint-union forward pass.
pub fn batch_losses(model: &GnnModel, graphs: &[&ProgramGraph], classes: &[usize]) -> Result<Vec<f64>, GnnError> {
    check_classes(model, classes)?;
    let batch = GraphBatch::new(model, graphs)?;
    let mut tape = Tape::new();
    let (_, logits) = forward_on_tape(model, &batch, &mut tape);
    let l = tape.cross_entropy(logits, classes.to_vec());
    Ok(tape.value(l).data.clone())
}

fn check_classes(model: &GnnModel, classes: &[usize]) -> Result<(), GnnError> {
    let c = model.label_space.len();
    match classes.iter().find(|&&k| k >= c) {
        Some(&class) => Err(GnnError::ClassOutOfRange { class, classes: c }),
        None => Ok(()),
    }
}

/// Mean batch loss and its gradient for every parameter block, in order.
pub fn loss_and_gradients(model: &GnnModel, graphs: &[&ProgramGraph], classes: &[usize]) -> Result<(f64, Vec<Matrix>), GnnError> {
    check_classes(model, classes)?;
    let batch = GraphBatch::new(model, graphs)?;
    let mut tape = Tape::new();
    let (_, logits) = forward_on_tape(model, &batch, &mut tape);
    let per = tape.cross_entropy(logits, classes.to_vec());
    let loss = tape.mean(per);
    let mut g = tape.backward(loss);
    let grads = model.params.iter().enumerate().map(|(i, p)| g.remove(&i).unwrap_or_else(|| Matrix::zeros(p.rows, p.cols))).collect();
    Ok((tape.value(loss).data[0], grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Trains `model` with seeded shuffled mini-batches and Adam.
/// `mean_loss` is the average per-graph loss seen during the epoch.
pub fn train(mut model: GnnModel, data: &[(&ProgramGraph, ClassLabel)], cfg: &GnnConfig) -> Result<(GnnModel, Vec<EpochLoss>), GnnError> {
    if data.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    cfg.check()?;
    let classes: Vec<usize> = data.iter().map(|(_, l)| model.class_index(l)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(&model.params);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let graphs: Vec<&ProgramGraph> = chunk.iter().map(|&i| data[i].0).collect();
            let cls: Vec<usize> = chunk.iter().map(|&i| classes[i]).collect();
            let (loss, grads) = loss_and_gradients(&model, &graphs, &cls)?;
            total += loss * chunk.len() as f64;
            adam_step(&mut model.params, &grads, &mut adam, cfg.lr)?;
        }
        log.push(EpochLoss { epoch, mean_loss: total / data.len() as f64 });
    }
    Ok((model, log))
}

/// Argmax of the logits; ties go to the earliest label.
pub fn predict_gnn(model: &GnnModel, graph: &ProgramGraph) -> Result<ClassLabel, GnnError> {
    let logits = forward(model, graph)?;
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = i;
        }
    }
    Ok(model.label_space[best].clone())
}

/// Predictions for many graphs, in input order.
pub fn predict_many(model: &GnnModel, graphs: &[&ProgramGraph]) -> Vec<Result<ClassLabel, GnnError>> {
    graphs.par_iter().map(|g| predict_gnn(model, g)).collect()
}

pub fn write_loss_log(path: &Path, log: &[EpochLoss]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphEdge, GraphNode};

    fn node(id: usize, t: NodeType, tok: &str) -> GraphNode {
        GraphNode { id, node_type: t, token: tok.into(), function: None }
    }

    fn tiny() -> ProgramGraph {
        ProgramGraph {
            nodes: vec![node(0, NodeType::Control, "add"), node(1, NodeType::Variable, "intTy"), node(2, NodeType::Control, "ret")],
            edges: vec![
                GraphEdge { src: 0, dst: 1, edge_type: EdgeType::Data, position: 0 },
                GraphEdge { src: 1, dst: 2, edge_type: EdgeType::Data, position: 0 },
                GraphEdge { src: 0, dst: 2, edge_type: EdgeType::Control, position: 0 },
            ],
            label: None,
        }
    }

    fn small_cfg() -> GnnConfig {
        GnnConfig { layer_sizes: [6, 5, 4], node_embed_dim: 3, fc_hidden: 3, ..GnnConfig::default() }
    }

    fn labels() -> Vec<ClassLabel> {
        vec!["A".into(), "B".into()]
    }

    #[test]
    fn zero_parameters_give_zero_logits_and_first_label() {
        let g = tiny();
        let mut m = GnnModel::for_graphs(small_cfg(), [&g], labels()).unwrap();
        m.params.iter_mut().for_each(|p| p.data.iter_mut().for_each(|x| *x = 0.0));
        assert_eq!(forward(&m, &g).unwrap(), vec![0.0, 0.0]);
        assert_eq!(predict_gnn(&m, &g).unwrap().as_str(), "A");
    }

    #[test]
    fn single_class_always_predicted() {
        let g = tiny();
        let m = GnnModel::for_graphs(small_cfg(), [&g], vec!["Only".into()]).unwrap();
        assert_eq!(predict_gnn(&m, &g).unwrap().as_str(), "Only");
    }

    #[test]
    fn empty_graph_rejected() {
        let g = tiny();
        let m = GnnModel::for_graphs(small_cfg(), [&g], labels()).unwrap();
        assert!(matches!(forward(&m, &ProgramGraph::default()), Err(GnnError::EmptyGraph)));
    }

    #[test]
    fn untyped_relation_rejected() {
        let mut g = tiny();
        g.edges.push(GraphEdge { src: 1, dst: 1, edge_type: EdgeType::Call, position: 0 });
        let m = GnnModel::for_graphs(small_cfg(), [&g], labels()).unwrap();
        assert!(matches!(forward(&m, &g), Err(GnnError::MissingRelationParams { .. })));
    }

    #[test]
    fn single_incoming_edge_passes_message_through() {
        let w = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let a = Matrix::from_vec(2, 1, vec![1.0, -1.0]);
        let wm = Matrix::from_vec(2, 2, vec![0.5, 0.0, 0.0, 2.0]);
        let p = RelationParams { w_src: &w, w_dst: &w, att: &a, w_msg: &wm };
        let hs = Matrix::from_vec(1, 2, vec![1.0, 3.0]);
        let hd = Matrix::from_vec(2, 2, vec![0.0, 0.0, 7.0, 7.0]);
        let out = gatv2_relation(&hs, &hd, &[(0, 1)], &p, 0.2).unwrap();
        assert_eq!(out.data, vec![0.0, 0.0, 0.5, 6.0]);
    }

    #[test]
    fn epochs_zero_leaves_model() {
        let g = tiny();
        let m = GnnModel::for_graphs(small_cfg(), [&g], labels()).unwrap();
        let cfg = GnnConfig { epochs: 0, ..small_cfg() };
        let (t, log) = train(m.clone(), &[(&g, "A".into())], &cfg).unwrap();
        assert_eq!(t, m);
        assert!(log.is_empty());
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = tiny();
        let m = GnnModel::for_graphs(small_cfg(), [&g], labels()).unwrap();
        let back = GnnModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn class_out_of_range() {
        assert!(matches!(cross_entropy(&[0.0, 1.0], 2), Err(GnnError::ClassOutOfRange { class: 2, classes: 2 })));
    }
}
