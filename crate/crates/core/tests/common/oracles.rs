//! Independent re-implementations used as test oracles.

use std::collections::HashMap;

use mpisentinel_core::embed::{SeedVocab, HALF_DIM};
use mpisentinel_core::gnn::{batch_losses, loss_and_gradients, GnnModel};
use mpisentinel_core::graph::{validate_graph, EdgeType, NodeType};
use mpisentinel_core::ir::{IrModule, OperandKind};
use mpisentinel_core::tabular::LabeledVectors;
use mpisentinel_core::{ClassLabel, ProgramGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WO: f64 = 1.0;
pub const WT: f64 = 0.5;
pub const WA: f64 = 0.2;

pub fn type_token(ty: &str) -> String {
    mpisentinel_core::ir::TypeClass::of(ty).token().to_string()
}

/// Coordinate-major re-summation straight from the instruction fields.
pub fn oracle_symbolic(m: &IrModule, v: &SeedVocab) -> Vec<f64> {
    let instrs: Vec<_> = m.instructions().collect();
    (0..HALF_DIM)
        .map(|i| {
            let mut total = 0.0;
            for ins in &instrs {
                let mut x = WO * v.vector(&ins.opcode)[i] + WT * v.vector(&type_token(&ins.type_str))[i];
                let mut args = 0.0;
                for op in ins.operands.iter().filter(|o| o.kind != OperandKind::Label) {
                    args += v.vector(op.kind.name())[i];
                }
                x += WA * args;
                total += x;
            }
            total
        })
        .collect()
}

/// Damped Jacobi written out with maps keyed by result id.
pub fn oracle_flow(m: &IrModule, v: &SeedVocab, iterations: Option<usize>) -> Vec<f64> {
    let mut out = vec![0.0; HALF_DIM];
    for f in &m.functions {
        let instrs: Vec<_> = f.blocks.iter().flat_map(|b| &b.instructions).collect();
        let base = |k: usize, args: &dyn Fn(&str, OperandKind) -> Vec<f64>| -> Vec<f64> {
            let ins = instrs[k];
            let mut a = vec![0.0; HALF_DIM];
            for op in ins.operands.iter().filter(|o| o.kind != OperandKind::Label) {
                for (s, x) in a.iter_mut().zip(args(&op.token, op.kind)) {
                    *s += x;
                }
            }
            let (o, t) = (v.vector(&ins.opcode), v.vector(&type_token(&ins.type_str)));
            (0..HALF_DIM).map(|i| WO * o[i] + WT * t[i] + WA * a[i]).collect()
        };
        let kind_only = |_: &str, k: OperandKind| v.vector(k.name()).to_vec();
        let mut e: Vec<Vec<f64>> = (0..instrs.len()).map(|k| base(k, &kind_only)).collect();
        let by_id: HashMap<String, usize> =
            instrs.iter().enumerate().filter_map(|(k, i)| i.result_id.clone().map(|r| (r, k))).collect();
        let chained = instrs
            .iter()
            .flat_map(|i| &i.operands)
            .any(|o| o.kind == OperandKind::LocalValue && by_id.contains_key(&o.token));
        if chained {
            let mut prev_change = f64::INFINITY;
            for it in 1.. {
                let snapshot = e.clone();
                let lookup = |tok: &str, k: OperandKind| match (k, by_id.get(tok)) {
                    (OperandKind::LocalValue, Some(&p)) => snapshot[p].clone(),
                    _ => v.vector(k.name()).to_vec(),
                };
                let fresh: Vec<Vec<f64>> = (0..instrs.len()).map(|k| base(k, &lookup)).collect();
                let mut delta = vec![0.0; HALF_DIM];
                for k in 0..instrs.len() {
                    for i in 0..HALF_DIM {
                        let new = 0.5 * snapshot[k][i] + 0.5 * fresh[k][i];
                        delta[i] += new - snapshot[k][i];
                        e[k][i] = new;
                    }
                }
                match iterations {
                    Some(n) if it >= n => break,
                    Some(_) => continue,
                    None => {}
                }
                let change = delta.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                let q = if prev_change > 0.0 { change / prev_change } else { 0.0 };
                let tail = if q < 1.0 { change * q / (1.0 - q) } else { f64::INFINITY };
                prev_change = change;
                if (change < 1e-6 && tail < 1e-6) || it >= 100 {
                    break;
                }
            }
        }
        for row in &e {
            for i in 0..HALF_DIM {
                out[i] += row[i];
            }
        }
    }
    out
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Validity, node-count law and the data degree laws on every fixture.
pub fn check_graph_laws(m: &IrModule, g: &ProgramGraph) {
    assert_eq!(validate_graph(g), vec![]);
    let controls: Vec<usize> = g.nodes.iter().filter(|n| n.node_type == NodeType::Control).map(|n| n.id).collect();
    assert_eq!(controls.len(), m.instruction_count());

    let mut data_in: HashMap<usize, usize> = HashMap::new();
    let mut data_out: HashMap<usize, usize> = HashMap::new();
    for e in g.edges.iter().filter(|e| e.edge_type == EdgeType::Data) {
        *data_in.entry(e.dst).or_default() += 1;
        *data_out.entry(e.src).or_default() += 1;
    }
    let instrs: Vec<_> = m.functions.iter().filter(|f| !f.is_declaration).flat_map(|f| f.blocks.iter().flat_map(|b| &b.instructions)).collect();
    // control nodes are laid out per function in instruction order
    let mut idx = 0;
    for f in m.functions.iter().filter(|f| !f.is_declaration) {
        for ins in f.blocks.iter().flat_map(|b| &b.instructions) {
            let id = controls[idx];
            idx += 1;
            assert_eq!(data_in.get(&id).copied().unwrap_or(0), ins.value_operands().count(), "{ins:?}");
            assert_eq!(data_out.get(&id).copied().unwrap_or(0), usize::from(ins.result_id.is_some()), "{ins:?}");
        }
    }
    assert_eq!(idx, instrs.len());
}

pub fn argmax(r: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in r.iter().enumerate() {
        if *x > r[best] {
            best = i;
        }
    }
    best
}

pub fn labels_of(ix: &[usize]) -> Vec<ClassLabel> {
    ix.iter().map(|i| ClassLabel(format!("L{i}"))).collect()
}

/// 60 rows, 10 features, 3 classes; only feature 7 carries the class.
pub fn planted(seed: u64) -> LabeledVectors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let rows = y.iter().map(|&c| (0..10).map(|f| if f == 7 { c as f64 + rng.gen::<f64>() * 0.5 } else { rng.gen() }).collect()).collect();
    LabeledVectors::new(rows, labels_of(&y)).unwrap()
}

/// Central differences against autodiff for the chosen coordinates of
/// every block; returns the worst relative error and where it occurred.
pub fn fd_check(model: &mut GnnModel, g: &ProgramGraph, class: usize, coords: impl Fn(usize, usize) -> Vec<usize>) -> (f64, String) {
    let (_, grads) = loss_and_gradients(model, &[g], &[class]).unwrap();
    let eps = 1e-5;
    let names = model.param_names();
    let mut worst = (0.0_f64, String::new());
    for b in 0..model.params.len() {
        for k in coords(b, model.params[b].data.len()) {
            let orig = model.params[b].data[k];
            model.params[b].data[k] = orig + eps;
            let up = batch_losses(model, &[g], &[class]).unwrap()[0];
            model.params[b].data[k] = orig - eps;
            let down = batch_losses(model, &[g], &[class]).unwrap()[0];
            model.params[b].data[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads[b].data[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{} [{k}]: autodiff {analytic} vs numeric {numeric}", names[b]));
            }
        }
    }
    worst
}
