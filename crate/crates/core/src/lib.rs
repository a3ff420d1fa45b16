//! Static MPI error detection over textual LLVM IR.
//!
//! The pipeline: [`ir`] parses modules, [`graph`] and [`embed`] turn them
//! into program graphs and fixed-width vectors, [`tabular`] and [`gnn`] are
//! the two classifier backends, [`corpus`] builds labelled manifests and
//! [`eval`] runs cross-validation, scenarios and ablations.

pub mod corpus;
pub mod embed;
pub mod eval;
pub mod folds;
pub mod gnn;
pub mod graph;
pub mod ir;
pub mod labels;
pub mod tabular;

pub use graph::{build_graph, graph_stats, validate_graph, EdgeType, NodeType, ProgramGraph};
pub use ir::{parse_ir, IrModule};
pub use labels::{BinaryLabel, ClassLabel, ErrorLabel};
