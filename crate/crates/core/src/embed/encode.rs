use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::vocab::SeedVocab;
use crate::ir::{token_triple, IrFunction, IrInstruction, IrModule, OperandKind};

/// Per-entity weights of the instruction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub opcode: f64,
    pub type_: f64,
    pub arg: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { opcode: 1.0, type_: 0.5, arg: 0.2 }
    }
}

/// Fixed-point settings of the flow-aware encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Weight of the previous iterate: `e' = d*e + (1-d)*F(e)`.
    pub damping: f64,
    /// Bound on both the L-infinity change of the function's summed vector
    /// and its estimated remaining distance to the fixed point.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { damping: 0.5, tolerance: 1e-6, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Convergence {
    Converged { iterations: usize, residual: f64 },
    /// The last iterate is still returned.
    NonConvergence { iterations: usize, residual: f64 },
}

impl Convergence {
    pub fn converged(&self) -> bool {
        matches!(self, Convergence::Converged { .. })
    }
}

/// `out = wo*op + wt*ty + wa*sum(args)`. The single place instruction
/// vectors are formed, so both encoders round identically.
fn instruction_vector<'a>(out: &mut [f64], op: &[f64], ty: &[f64], args: impl Iterator<Item = &'a [f64]>, w: &Weights) {
    let mut acc = vec![0.0; out.len()];
    for a in args {
        for (s, x) in acc.iter_mut().zip(a) {
            *s += x;
        }
    }
    for i in 0..out.len() {
        out[i] = w.opcode * op[i] + w.type_ * ty[i] + w.arg * acc[i];
    }
}

fn symbolic_instruction(ins: &IrInstruction, vocab: &SeedVocab, w: &Weights) -> Vec<f64> {
    let t = token_triple(ins);
    let op = vocab.vector(&t.opcode_token);
    let ty = vocab.vector(&t.type_token);
    let args: Vec<_> = t.arg_tokens.iter().map(|a| vocab.vector(a)).collect();
    let mut out = vec![0.0; vocab.dim()];
    instruction_vector(&mut out, &op, &ty, args.iter().map(|a| &a[..]), w);
    out
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

pub fn encode_function_symbolic(func: &IrFunction, vocab: &SeedVocab, w: &Weights) -> Vec<f64> {
    let mut acc = vec![0.0; vocab.dim()];
    for ins in func.blocks.iter().flat_map(|b| &b.instructions) {
        add_into(&mut acc, &symbolic_instruction(ins, vocab, w));
    }
    acc
}

pub fn encode_symbolic(module: &IrModule, vocab: &SeedVocab) -> Vec<f64> {
    encode_symbolic_with(module, vocab, &Weights::default())
}

pub fn encode_symbolic_with(module: &IrModule, vocab: &SeedVocab, w: &Weights) -> Vec<f64> {
    let mut acc = vec![0.0; vocab.dim()];
    for ins in module.instructions() {
        add_into(&mut acc, &symbolic_instruction(ins, vocab, w));
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEncoding {
    pub vector: Vec<f64>,
    pub status: Convergence,
}

pub fn encode_flow_aware(module: &IrModule, vocab: &SeedVocab) -> FlowEncoding {
    encode_flow_aware_with(module, vocab, &Weights::default(), &FlowConfig::default())
}

pub fn encode_flow_aware_with(module: &IrModule, vocab: &SeedVocab, w: &Weights, cfg: &FlowConfig) -> FlowEncoding {
    let mut acc = vec![0.0; vocab.dim()];
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    let mut ok = true;
    for func in &module.functions {
        let (vectors, status) = function_flow(func, vocab, w, cfg);
        for v in &vectors {
            add_into(&mut acc, v);
        }
        match status {
            Convergence::Converged { iterations: i, residual: r } => {
                iterations = iterations.max(i);
                residual = residual.max(r);
            }
            Convergence::NonConvergence { iterations: i, residual: r } => {
                ok = false;
                iterations = iterations.max(i);
                residual = residual.max(r);
            }
        }
    }
    let status = if ok {
        Convergence::Converged { iterations, residual }
    } else {
        Convergence::NonConvergence { iterations, residual }
    };
    FlowEncoding { vector: acc, status }
}

/// Flow-aware vectors of every instruction of `func`, in instruction order.
pub fn function_flow(func: &IrFunction, vocab: &SeedVocab, w: &Weights, cfg: &FlowConfig) -> (Vec<Vec<f64>>, Convergence) {
    let instrs: Vec<&IrInstruction> = func.blocks.iter().flat_map(|b| &b.instructions).collect();
    let symbolic: Vec<Vec<f64>> = instrs.iter().map(|i| symbolic_instruction(i, vocab, w)).collect();

    let producer: HashMap<&str, usize> = instrs
        .iter()
        .enumerate()
        .filter_map(|(k, i)| i.result_id.as_deref().map(|id| (id, k)))
        .collect();
    // per instruction, per non-label operand: Some(producer index) or the kind token
    let sources: Vec<Vec<Result<usize, &'static str>>> = instrs
        .iter()
        .map(|i| {
            i.value_operands()
                .map(|op| match op.kind {
                    OperandKind::LocalValue => producer.get(op.token.as_str()).copied().ok_or(op.kind.name()),
                    k => Err(k.name()),
                })
                .collect()
        })
        .collect();

    if sources.iter().flatten().all(Result::is_err) {
        return (symbolic, Convergence::Converged { iterations: 0, residual: 0.0 });
    }

    let kind_vecs: HashMap<&str, _> = sources
        .iter()
        .flatten()
        .filter_map(|s| s.err())
        .map(|k| (k, vocab.vector(k)))
        .collect();
    let triples: Vec<_> = instrs.iter().map(|i| token_triple(i)).collect();
    let op_vecs: Vec<_> = triples.iter().map(|t| vocab.vector(&t.opcode_token)).collect();
    let ty_vecs: Vec<_> = triples.iter().map(|t| vocab.vector(&t.type_token)).collect();

    let mut cur = symbolic;
    let mut next = cur.clone();
    let mut fx = vec![0.0; vocab.dim()];
    let mut sum_change = vec![0.0; vocab.dim()];
    let mut prev_change = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        sum_change.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..instrs.len() {
            let args = sources[k].iter().map(|s| match s {
                Ok(p) => &cur[*p][..],
                Err(kind) => &kind_vecs[kind][..],
            });
            instruction_vector(&mut fx, &op_vecs[k], &ty_vecs[k], args, w);
            for ((d, s), (&old, &f)) in next[k].iter_mut().zip(sum_change.iter_mut()).zip(cur[k].iter().zip(&fx)) {
                *d = cfg.damping * old + (1.0 - cfg.damping) * f;
                *s += *d - old;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        change = sum_change.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        // geometric tail bound: distance to the fixed point <= change * q / (1 - q)
        let q = if prev_change > 0.0 { change / prev_change } else { 0.0 };
        let tail = if q < 1.0 { change * q / (1.0 - q) } else { f64::INFINITY };
        prev_change = change;
        if change < cfg.tolerance && tail < cfg.tolerance {
            return (cur, Convergence::Converged { iterations: it, residual: change });
        }
    }
    (cur, Convergence::NonConvergence { iterations: cfg.max_iterations, residual: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::seed_vocabulary;
    use crate::ir::parse_ir;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn empty_module_is_zero() {
        let v = seed_vocabulary(7, 256);
        let m = parse_ir("").unwrap();
        assert!(encode_symbolic(&m, &v).iter().all(|x| *x == 0.0));
        assert!(encode_flow_aware(&m, &v).vector.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn single_ret_void() {
        let v = seed_vocabulary(7, 256);
        let m = parse_ir("define void @f() { ret void }").unwrap();
        let got = encode_symbolic(&m, &v);
        let (r, t) = (v.vector("ret"), v.vector("void"));
        let want: Vec<f64> = r.iter().zip(t.iter()).map(|(a, b)| 1.0 * a + 0.5 * b).collect();
        assert!(close(&got, &want, 1e-15));
    }

    #[test]
    fn no_chains_means_flow_equals_symbolic() {
        let v = seed_vocabulary(3, 256);
        let m = parse_ir("define i32 @f(i32 %x) {\n  %a = add i32 %x, 4\n  store i32 %x, ptr @g\n  ret i32 7\n}\n@g = global i32 0\n").unwrap();
        assert_eq!(encode_flow_aware(&m, &v).vector, encode_symbolic(&m, &v));
    }

    #[test]
    fn chain_uses_producer_embedding() {
        let v = seed_vocabulary(11, 256);
        let m = parse_ir("define i32 @f(i32 %p) {\n  %a = add i32 %p, 1\n  ret i32 %a\n}\n").unwrap();
        let flow = encode_flow_aware(&m, &v);
        assert!(flow.status.converged());
        // hand expansion: e_add is symbolic; e_ret = Wo v(ret) + Wt v(void) + Wa e_add
        let e_add: Vec<f64> = (0..256)
            .map(|i| v.vector("add")[i] + 0.5 * v.vector("intTy")[i] + 0.2 * (v.vector("LocalValue")[i] + v.vector("Constant")[i]))
            .collect();
        let e_ret: Vec<f64> = (0..256).map(|i| v.vector("ret")[i] + 0.5 * v.vector("void")[i] + 0.2 * e_add[i]).collect();
        let want: Vec<f64> = (0..256).map(|i| e_add[i] + e_ret[i]).collect();
        assert!(close(&flow.vector, &want, 1e-6));
    }

    #[test]
    fn divergent_system_reports_non_convergence() {
        let v = seed_vocabulary(1, 8);
        let m = parse_ir(
            "define i32 @f() {\nentry:\n  br label %l\nl:\n  %x = phi i32 [ 0, %entry ], [ %y, %l ]\n  %y = add i32 %x, %x\n  br label %l\n}\n",
        )
        .unwrap();
        // arg weight 3 with fan-in 2 makes the iteration expansive
        let w = Weights { arg: 3.0, ..Weights::default() };
        let out = encode_flow_aware_with(&m, &v, &w, &FlowConfig::default());
        assert!(matches!(out.status, Convergence::NonConvergence { iterations: 100, .. }));
        assert_eq!(out.vector.len(), 8);
    }
}
