//! Unified heterogeneous program graph (control, data and call flow).
//!
//! Node layout is sectioned per defined function, in module order:
//! parameter variables, then one control node per instruction, then result
//! variables in instruction order, then constants in first-use order.

mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ir::{def_use_map, IrError, IrFunction, IrModule, OperandKind, TypeClass};
use crate::labels::ErrorLabel;

pub use validate::{validate_graph, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Control,
    Variable,
    Constant,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Control, NodeType::Variable, NodeType::Constant];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    Control,
    Data,
    Call,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Control, EdgeType::Data, EdgeType::Call];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    #[serde(rename = "type")]
    pub edge_type: EdgeType,
    #[serde(rename = "pos")]
    pub position: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    #[serde(default)]
    pub label: Option<ErrorLabel>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Emit every edge with position 0.
    pub zero_positions: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error("graph file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("graph file {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

impl ProgramGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path) -> Result<(), GraphIoError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| GraphIoError::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self, GraphIoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GraphIoError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|source| GraphIoError::Json { path: path.display().to_string(), source })
    }

    /// Renumbers nodes by `perm` (old id -> new id) and remaps edges.
    pub fn permuted(&self, perm: &[usize]) -> ProgramGraph {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length");
        let mut nodes = self.nodes.clone();
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = GraphNode { id: perm[old], ..node.clone() };
        }
        let edges = self
            .edges
            .iter()
            .map(|e| GraphEdge { src: perm[e.src], dst: perm[e.dst], ..*e })
            .collect();
        ProgramGraph { nodes, edges, label: self.label }
    }
}

pub fn build_graph(module: &IrModule) -> Result<ProgramGraph, IrError> {
    build_graph_with(module, &GraphOptions::default())
}

pub fn build_graph_with(module: &IrModule, opts: &GraphOptions) -> Result<ProgramGraph, IrError> {
    let defined: HashMap<&str, usize> = module
        .functions
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_declaration)
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();

    let mut g = ProgramGraph::default();
    // per function: control node ids in instruction order, plus ret node ids
    let mut layouts: HashMap<usize, FunctionLayout> = HashMap::new();
    let mut call_sites: Vec<(usize, usize)> = Vec::new(); // (call node, callee function index)

    for (fi, func) in module.functions.iter().enumerate() {
        if func.is_declaration {
            continue;
        }
        def_use_map(func)?;
        let layout = add_function(&mut g, func, &defined, &mut call_sites);
        layouts.insert(fi, layout);
    }

    // call edges: call site -> callee entry, then each callee ret -> call site
    let mut ret_out: HashMap<usize, u32> = HashMap::new();
    for &(site, callee) in &call_sites {
        let layout = &layouts[&callee];
        g.edges.push(GraphEdge { src: site, dst: layout.entry, edge_type: EdgeType::Call, position: 0 });
        for &r in &layout.rets {
            let pos = ret_out.entry(r).or_insert(0);
            g.edges.push(GraphEdge { src: r, dst: site, edge_type: EdgeType::Call, position: *pos });
            *pos += 1;
        }
    }

    if opts.zero_positions {
        for e in &mut g.edges {
            e.position = 0;
        }
    }
    Ok(g)
}

struct FunctionLayout {
    entry: usize,
    rets: Vec<usize>,
}

fn push_node(g: &mut ProgramGraph, node_type: NodeType, token: String, func: &str) -> usize {
    let id = g.nodes.len();
    g.nodes.push(GraphNode { id, node_type, token, function: Some(func.to_string()) });
    id
}

fn control_token(instr: &crate::ir::IrInstruction, defined: &HashMap<&str, usize>) -> String {
    match (&instr.call_target, instr.is_call()) {
        (Some(target), true) if !target.starts_with('%') && target != "asm" && !defined.contains_key(target.as_str()) => {
            format!("{}:{}", instr.opcode, target)
        }
        _ => instr.opcode.clone(),
    }
}

fn add_function(
    g: &mut ProgramGraph,
    func: &IrFunction,
    defined: &HashMap<&str, usize>,
    call_sites: &mut Vec<(usize, usize)>,
) -> FunctionLayout {
    let fname = func.name.as_str();
    let mut values: HashMap<&str, usize> = HashMap::new();
    for (id, ty) in &func.params {
        let n = push_node(g, NodeType::Variable, TypeClass::of(ty).token().to_string(), fname);
        values.insert(id.as_str(), n);
    }

    let mut control: Vec<Vec<usize>> = Vec::with_capacity(func.blocks.len());
    for block in &func.blocks {
        let ids = block
            .instructions
            .iter()
            .map(|ins| push_node(g, NodeType::Control, control_token(ins, defined), fname))
            .collect();
        control.push(ids);
    }

    let mut results: HashMap<(usize, usize), usize> = HashMap::new();
    for (bi, block) in func.blocks.iter().enumerate() {
        for (ii, ins) in block.instructions.iter().enumerate() {
            if let Some(id) = &ins.result_id {
                let n = push_node(g, NodeType::Variable, TypeClass::of(&ins.type_str).token().to_string(), fname);
                values.insert(id.as_str(), n);
                results.insert((bi, ii), n);
            }
        }
    }

    let mut constants: BTreeMap<(OperandKind, &str), usize> = BTreeMap::new();
    let block_entry: HashMap<&str, usize> =
        func.blocks.iter().enumerate().map(|(bi, b)| (b.label.as_str(), control[bi][0])).collect();
    let mut rets = Vec::new();

    for (bi, block) in func.blocks.iter().enumerate() {
        for (ii, ins) in block.instructions.iter().enumerate() {
            let me = control[bi][ii];
            for (pos, op) in ins.value_operands().enumerate() {
                let src = match op.kind {
                    OperandKind::LocalValue => values[op.token.as_str()],
                    _ => match constants.get(&(op.kind, op.token.as_str())) {
                        Some(&n) => n,
                        None => {
                            let n = push_node(g, NodeType::Constant, "Constant".into(), fname);
                            constants.insert((op.kind, op.token.as_str()), n);
                            n
                        }
                    },
                };
                g.edges.push(GraphEdge { src, dst: me, edge_type: EdgeType::Data, position: pos as u32 });
            }
            if let Some(&v) = results.get(&(bi, ii)) {
                g.edges.push(GraphEdge { src: me, dst: v, edge_type: EdgeType::Data, position: 0 });
            }
            if ii + 1 < block.instructions.len() {
                g.edges.push(GraphEdge { src: me, dst: control[bi][ii + 1], edge_type: EdgeType::Control, position: 0 });
            } else {
                for (pos, target) in ins.label_operands().enumerate() {
                    g.edges.push(GraphEdge {
                        src: me,
                        dst: block_entry[target],
                        edge_type: EdgeType::Control,
                        position: pos as u32,
                    });
                }
            }
            if ins.opcode == "ret" {
                rets.push(me);
            }
            if ins.is_call() {
                if let Some(&callee) = ins.call_target.as_deref().and_then(|t| defined.get(t)) {
                    call_sites.push((me, callee));
                }
            }
        }
    }

    FunctionLayout { entry: control[0][0], rets }
}

/// Node and edge counts per type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: [usize; 3],
    pub edges: [usize; 3],
}

impl GraphStats {
    pub fn node_count(&self, t: NodeType) -> usize {
        self.nodes[t.index()]
    }

    pub fn edge_count(&self, t: EdgeType) -> usize {
        self.edges[t.index()]
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().sum()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().sum()
    }
}

impl std::ops::Add for GraphStats {
    type Output = GraphStats;

    fn add(mut self, rhs: GraphStats) -> GraphStats {
        for i in 0..3 {
            self.nodes[i] += rhs.nodes[i];
            self.edges[i] += rhs.edges[i];
        }
        self
    }
}

pub fn graph_stats(g: &ProgramGraph) -> GraphStats {
    let mut s = GraphStats::default();
    for n in &g.nodes {
        s.nodes[n.node_type.index()] += 1;
    }
    for e in &g.edges {
        s.edges[e.edge_type.index()] += 1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_ir;

    fn edge(t: EdgeType, src: usize, dst: usize, pos: u32) -> GraphEdge {
        GraphEdge { src, dst, edge_type: t, position: pos }
    }

    #[test]
    fn trivial_function() {
        let g = build_graph(&parse_ir("define void @f() { ret void }").unwrap()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].node_type, NodeType::Control);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn straight_line_block() {
        let m = parse_ir("define void @f(i32 %x) {\n  %a = add i32 %x, 1\n  ret void\n}\n").unwrap();
        let g = build_graph(&m).unwrap();
        let kinds: Vec<(NodeType, &str)> = g.nodes.iter().map(|n| (n.node_type, n.token.as_str())).collect();
        assert_eq!(
            kinds,
            vec![
                (NodeType::Variable, "intTy"),
                (NodeType::Control, "add"),
                (NodeType::Control, "ret"),
                (NodeType::Variable, "intTy"),
                (NodeType::Constant, "Constant"),
            ]
        );
        let mut edges = g.edges.clone();
        edges.sort();
        let mut want = vec![
            edge(EdgeType::Control, 1, 2, 0),
            edge(EdgeType::Data, 0, 1, 0),
            edge(EdgeType::Data, 4, 1, 1),
            edge(EdgeType::Data, 1, 3, 0),
        ];
        want.sort();
        assert_eq!(edges, want);
        let s = graph_stats(&g);
        assert_eq!(s.nodes, [2, 2, 1]);
        // the enumerated edge list has three data edges
        assert_eq!(s.edges, [1, 3, 0]);
    }

    #[test]
    fn declared_callee_keeps_name() {
        let m = parse_ir("define void @f() {\n  call void @MPI_Barrier(i32 3)\n  ret void\n}\ndeclare void @MPI_Barrier(i32)\n")
            .unwrap();
        let g = build_graph(&m).unwrap();
        assert_eq!(g.nodes[0].token, "call:MPI_Barrier");
        assert!(g.edges.iter().all(|e| e.edge_type != EdgeType::Call));
    }

    #[test]
    fn constants_dedup_per_function() {
        let m = parse_ir(
            "define i32 @f(i32 %x) {\n  %a = add i32 %x, 1\n  %b = add i32 %a, 1\n  ret i32 %b\n}\ndefine i32 @g() {\n  %c = add i32 1, 1\n  ret i32 %c\n}\n",
        )
        .unwrap();
        let g = build_graph(&m).unwrap();
        let consts_f = g.nodes.iter().filter(|n| n.node_type == NodeType::Constant && n.function.as_deref() == Some("f")).count();
        let consts_g = g.nodes.iter().filter(|n| n.node_type == NodeType::Constant && n.function.as_deref() == Some("g")).count();
        assert_eq!((consts_f, consts_g), (1, 1));
    }

    #[test]
    fn zero_positions_flag() {
        let m = parse_ir("define void @f(i32 %x) {\n  %a = add i32 %x, 1\n  ret void\n}\n").unwrap();
        let g = build_graph_with(&m, &GraphOptions { zero_positions: true }).unwrap();
        assert!(g.edges.iter().all(|e| e.position == 0));
    }

    #[test]
    fn undefined_local_propagates() {
        let m = parse_ir("define void @f() {\n  %a = add i32 %nope, 1\n  ret void\n}\n").unwrap();
        assert!(matches!(build_graph(&m), Err(IrError::UndefinedLocal(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = parse_ir("define void @f(i32 %x) {\n  %a = add i32 %x, 1\n  ret void\n}\n").unwrap();
        let mut g = build_graph(&m).unwrap();
        g.label = Some(ErrorLabel::CallOrdering);
        let text = g.to_json();
        assert!(text.contains("\"pos\":1"));
        assert!(text.contains("\"type\":\"Data\""));
        assert_eq!(ProgramGraph::from_json(&text).unwrap(), g);
    }

    #[test]
    fn empty_stats() {
        let s = graph_stats(&ProgramGraph::default());
        assert_eq!((s.total_nodes(), s.total_edges()), (0, 0));
    }
}
