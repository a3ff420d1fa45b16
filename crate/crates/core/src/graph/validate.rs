use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{EdgeType, GraphEdge, NodeType, ProgramGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// `nodes[index].id != index`.
    NonContiguousId { index: usize, id: usize },
    DanglingEdge { edge: usize, src: usize, dst: usize },
    EdgeEndpoints { edge: usize, edge_type: EdgeType, src_type: NodeType, dst_type: NodeType },
    PositionOutOfRange { edge: usize, position: u32, limit: usize },
    VariableInDegree { node: usize, count: usize },
    CrossFunctionControl { edge: usize },
    NoControlPredecessor { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonContiguousId { index, id } => write!(f, "node at index {index} has id {id}"),
            Violation::DanglingEdge { edge, src, dst } => write!(f, "edge {edge} ({src}->{dst}) references a missing node"),
            Violation::EdgeEndpoints { edge, edge_type, src_type, dst_type } => {
                write!(f, "edge {edge}: {edge_type} edge may not connect {src_type} -> {dst_type}")
            }
            Violation::PositionOutOfRange { edge, position, limit } => {
                write!(f, "edge {edge}: position {position} not below {limit}")
            }
            Violation::VariableInDegree { node, count } => {
                write!(f, "variable node {node} has {count} defining data edges")
            }
            Violation::CrossFunctionControl { edge } => write!(f, "control edge {edge} crosses functions"),
            Violation::NoControlPredecessor { node } => {
                write!(f, "reachable control node {node} has no incoming control edge")
            }
        }
    }
}

fn endpoints_ok(t: EdgeType, s: NodeType, d: NodeType) -> bool {
    use NodeType::*;
    match t {
        EdgeType::Control | EdgeType::Call => s == Control && d == Control,
        EdgeType::Data => matches!((s, d), (Variable | Constant, Control) | (Control, Variable)),
    }
}

/// Checks every typed-edge rule and id contiguity; empty iff the graph is well formed.
///
/// Data edges into a control node are operand uses, so their position is
/// checked against that node's operand count (data in-degree). All other
/// edges are checked against the source's out-degree for the edge type.
pub fn validate_graph(g: &ProgramGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, node) in g.nodes.iter().enumerate() {
        if node.id != index {
            out.push(Violation::NonContiguousId { index, id: node.id });
        }
    }
    // look up by id so a contiguity breach does not cascade into edge errors
    let by_id: HashMap<usize, usize> = g.nodes.iter().enumerate().map(|(i, node)| (node.id, i)).collect();

    let mut out_deg: HashMap<(usize, EdgeType), usize> = HashMap::new();
    let mut data_in: HashMap<usize, usize> = HashMap::new();
    for e in &g.edges {
        *out_deg.entry((e.src, e.edge_type)).or_default() += 1;
        if e.edge_type == EdgeType::Data {
            *data_in.entry(e.dst).or_default() += 1;
        }
    }

    let mut well_typed: Vec<&GraphEdge> = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        let (Some(&si), Some(&di)) = (by_id.get(&e.src), by_id.get(&e.dst)) else {
            out.push(Violation::DanglingEdge { edge: i, src: e.src, dst: e.dst });
            continue;
        };
        let (st, dt) = (g.nodes[si].node_type, g.nodes[di].node_type);
        if !endpoints_ok(e.edge_type, st, dt) {
            out.push(Violation::EdgeEndpoints { edge: i, edge_type: e.edge_type, src_type: st, dst_type: dt });
            continue;
        }
        well_typed.push(e);
        let limit = if e.edge_type == EdgeType::Data && dt == NodeType::Control {
            data_in[&e.dst]
        } else {
            out_deg[&(e.src, e.edge_type)]
        };
        if e.position as usize >= limit {
            out.push(Violation::PositionOutOfRange { edge: i, position: e.position, limit });
        }
        if e.edge_type == EdgeType::Control && g.nodes[si].function != g.nodes[di].function {
            out.push(Violation::CrossFunctionControl { edge: i });
        }
    }

    for (i, node) in g.nodes.iter().enumerate() {
        if node.node_type == NodeType::Variable {
            let count = data_in.get(&node.id).copied().unwrap_or(0);
            if count > 1 {
                out.push(Violation::VariableInDegree { node: i, count });
            }
        }
    }

    // reachability from each function's entry (lowest-id control node)
    let mut entries: HashMap<Option<&str>, usize> = HashMap::new();
    for node in g.nodes.iter().filter(|x| x.node_type == NodeType::Control) {
        entries.entry(node.function.as_deref()).or_insert(node.id);
    }
    let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut has_pred: HashSet<usize> = HashSet::new();
    for e in well_typed.iter().filter(|e| e.edge_type == EdgeType::Control) {
        succ.entry(e.src).or_default().push(e.dst);
        has_pred.insert(e.dst);
    }
    let entry_set: HashSet<usize> = entries.values().copied().collect();
    let mut seen: HashSet<usize> = entry_set.clone();
    let mut queue: VecDeque<usize> = entry_set.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        if !entry_set.contains(&v) && !has_pred.contains(&v) {
            out.push(Violation::NoControlPredecessor { node: v });
        }
        for &w in succ.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphNode};
    use crate::ir::parse_ir;

    fn sample() -> ProgramGraph {
        build_graph(&parse_ir("define void @f(i32 %x) {\n  %a = add i32 %x, 1\n  ret void\n}\n").unwrap()).unwrap()
    }

    #[test]
    fn built_graph_is_valid() {
        assert!(validate_graph(&sample()).is_empty());
    }

    #[test]
    fn data_edge_between_controls_is_reported() {
        let mut g = sample();
        g.edges.push(GraphEdge { src: 1, dst: 2, edge_type: EdgeType::Data, position: 0 });
        let v = validate_graph(&g);
        assert_eq!(
            v,
            vec![Violation::EdgeEndpoints {
                edge: g.edges.len() - 1,
                edge_type: EdgeType::Data,
                src_type: NodeType::Control,
                dst_type: NodeType::Control
            }]
        );
    }

    #[test]
    fn id_gap_is_reported() {
        let g = ProgramGraph {
            nodes: vec![
                GraphNode { id: 0, node_type: NodeType::Control, token: "ret".into(), function: None },
                GraphNode { id: 2, node_type: NodeType::Control, token: "ret".into(), function: None },
            ],
            edges: vec![],
            label: None,
        };
        assert_eq!(validate_graph(&g), vec![Violation::NonContiguousId { index: 1, id: 2 }]);
    }

    #[test]
    fn double_definition_is_reported() {
        let mut g = sample();
        // second defining edge into %a (node 3)
        g.edges.push(GraphEdge { src: 2, dst: 3, edge_type: EdgeType::Data, position: 0 });
        assert!(validate_graph(&g).contains(&Violation::VariableInDegree { node: 3, count: 2 }));
    }
}
