//! Debug pretty-printer.
//!
//! Output re-parses to a structurally equal module. Operand types that the
//! model does not keep are printed as placeholders (`i64`, `ptr`), so the
//! text is not meant for LLVM tools.

use std::fmt::Write;

use super::{IrFunction, IrInstruction, IrModule, Operand, OperandKind};

pub fn render(module: &IrModule) -> String {
    let mut out = String::new();
    if !module.name.is_empty() {
        let _ = writeln!(out, "source_filename = \"{}\"", module.name);
    }
    for (id, ty) in &module.global_constants {
        let _ = writeln!(out, "{id} = global {ty} zeroinitializer");
    }
    for func in &module.functions {
        render_function(&mut out, func);
    }
    out
}

fn render_function(out: &mut String, func: &IrFunction) {
    let params: Vec<String> = func.params.iter().map(|(id, ty)| format!("{ty} {id}")).collect();
    if func.is_declaration {
        let _ = writeln!(out, "declare void @{}({})", func.name, params.join(", "));
        return;
    }
    let _ = writeln!(out, "define void @{}({}) {{", func.name, params.join(", "));
    for block in &func.blocks {
        let _ = writeln!(out, "{}:", block.label);
        for instr in &block.instructions {
            let _ = writeln!(out, "  {}", render_instruction(instr));
        }
    }
    out.push_str("}\n");
}

fn value(op: &Operand) -> String {
    match op.kind {
        OperandKind::Label => format!("label %{}", op.token),
        _ => op.token.clone(),
    }
}

fn values(ops: &[&Operand], ty: &str) -> String {
    ops.iter().map(|o| format!("{ty} {}", value(o))).collect::<Vec<_>>().join(", ")
}

fn render_instruction(ins: &IrInstruction) -> String {
    let lhs = ins.result_id.as_ref().map(|id| format!("{id} = ")).unwrap_or_default();
    let ty = &ins.type_str;
    let ops: Vec<&Operand> = ins.operands.iter().collect();
    let v = |i: usize| value(ops[i]);
    let body = match ins.opcode.as_str() {
        "ret" if ops.is_empty() => "ret void".to_string(),
        "ret" => format!("ret i64 {}", v(0)),
        "br" if ops.len() == 1 => format!("br {}", v(0)),
        "br" => format!("br i1 {}, {}, {}", v(0), v(1), v(2)),
        "switch" => {
            let cases: Vec<String> = ops[2..].chunks(2).map(|c| format!("i64 {}, {}", value(c[0]), value(c[1]))).collect();
            format!("switch i64 {}, {} [ {} ]", v(0), v(1), cases.join(" "))
        }
        "indirectbr" => {
            let labels: Vec<String> = ops[1..].iter().map(|o| value(o)).collect();
            format!("indirectbr ptr {}, [{}]", v(0), labels.join(", "))
        }
        "unreachable" => "unreachable".into(),
        "fence" => "fence seq_cst".into(),
        "call" | "invoke" => {
            let (args, tail) = if ins.opcode == "invoke" {
                let n = ops.len();
                (&ops[1..n - 2], format!(" to {} unwind {}", value(ops[n - 2]), value(ops[n - 1])))
            } else {
                (&ops[1..], String::new())
            };
            format!("{} {} {}({}){}", ins.opcode, ty, v(0), values(args, "i64"), tail)
        }
        "load" => format!("load {ty}, ptr {}", v(0)),
        "store" => format!("store i64 {}, ptr {}", v(0), v(1)),
        "alloca" if ops.is_empty() => "alloca i8".into(),
        "alloca" => format!("alloca i8, i64 {}", v(0)),
        "getelementptr" => format!("getelementptr i8, ptr {}", {
            let mut parts = vec![v(0)];
            parts.extend(ops[1..].iter().map(|o| format!("i64 {}", value(o))));
            parts.join(", ")
        }),
        "fneg" | "freeze" => format!("{} {ty} {}", ins.opcode, v(0)),
        "icmp" | "fcmp" => {
            let (pred, scalar) = if ins.opcode == "icmp" { ("eq", "i64") } else { ("oeq", "double") };
            let opty = match ty.strip_prefix('<').and_then(|r| r.split_once(" x ")) {
                Some((n, _)) => format!("<{n} x {scalar}>"),
                None => scalar.to_string(),
            };
            format!("{} {pred} {opty} {}, {}", ins.opcode, v(0), v(1))
        }
        "phi" => {
            let incoming: Vec<String> = ops.chunks(2).map(|c| format!("[ {}, %{} ]", c[0].token, c[1].token)).collect();
            format!("phi {ty} {}", incoming.join(", "))
        }
        "select" => format!("select i1 {}, {ty} {}, {ty} {}", v(0), v(1), v(2)),
        "atomicrmw" => format!("atomicrmw add ptr {}, {ty} {} seq_cst", v(0), v(1)),
        "cmpxchg" => {
            let inner = ty.strip_prefix("{ ").and_then(|t| t.strip_suffix(", i1 }")).unwrap_or("i64");
            format!("cmpxchg ptr {}, {inner} {}, {inner} {} seq_cst seq_cst", v(0), v(1), v(2))
        }
        "va_arg" => format!("va_arg ptr {}, {ty}", v(0)),
        "landingpad" => format!("landingpad {ty}"),
        op if super::parser::is_binary_op(op) => format!("{op} {ty} {}, {}", v(0), v(1)),
        op if super::parser::is_cast_op(op) => format!("{op} i64 {} to {ty}", v(0)),
        op => {
            let mut parts = Vec::new();
            if ins.result_id.is_some() {
                parts.push(ty.clone());
            }
            parts.extend(ops.iter().map(|o| value(o)));
            if parts.is_empty() {
                op.to_string()
            } else {
                format!("{op} {}", parts.join(", "))
            }
        }
    };
    format!("{lhs}{body}")
}
