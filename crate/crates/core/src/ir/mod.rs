//! In-memory model of a textual LLVM IR compilation unit.
//!
//! Only the structure needed by the downstream representations is kept:
//! functions, blocks, instructions, operand kinds and type strings. The
//! parser accepts any opcode; unknown ones go through a generic operand
//! scan instead of being rejected.

mod lexer;
mod parser;
mod render;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse_ir;
pub use render::render;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrError {
    #[error("malformed IR at line {line}: {message}")]
    MalformedIr { line: usize, message: String },
    #[error("use of undefined local value {0}")]
    UndefinedLocal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrModule {
    pub name: String,
    pub functions: Vec<IrFunction>,
    /// Module-level globals as `(identifier, type string)`.
    pub global_constants: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrFunction {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub blocks: Vec<IrBlock>,
    pub is_declaration: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrBlock {
    pub label: String,
    pub instructions: Vec<IrInstruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrInstruction {
    pub result_id: Option<String>,
    pub opcode: String,
    /// Result type, `"void"` when the instruction produces no value.
    pub type_str: String,
    pub operands: Vec<Operand>,
    pub call_target: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperandKind {
    LocalValue,
    GlobalValue,
    Constant,
    Label,
    FunctionRef,
}

impl OperandKind {
    pub fn name(self) -> &'static str {
        match self {
            OperandKind::LocalValue => "LocalValue",
            OperandKind::GlobalValue => "GlobalValue",
            OperandKind::Constant => "Constant",
            OperandKind::Label => "Label",
            OperandKind::FunctionRef => "FunctionRef",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operand {
    pub kind: OperandKind,
    /// `%id` for locals, `@id` for globals and functions, the label name
    /// (no sigil) for labels, canonical text for constants.
    pub token: String,
}

impl Operand {
    pub fn new(kind: OperandKind, token: impl Into<String>) -> Self {
        Self { kind, token: token.into() }
    }
}

/// Canonical type classes used as embedding vocabulary keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeClass {
    Void,
    Int,
    Float,
    Ptr,
    Vec,
    Agg,
    Label,
    Func,
    Other,
}

impl TypeClass {
    pub const ALL: [TypeClass; 9] = [
        TypeClass::Void,
        TypeClass::Int,
        TypeClass::Float,
        TypeClass::Ptr,
        TypeClass::Vec,
        TypeClass::Agg,
        TypeClass::Label,
        TypeClass::Func,
        TypeClass::Other,
    ];

    pub fn token(self) -> &'static str {
        match self {
            TypeClass::Void => "void",
            TypeClass::Int => "intTy",
            TypeClass::Float => "floatTy",
            TypeClass::Ptr => "ptrTy",
            TypeClass::Vec => "vecTy",
            TypeClass::Agg => "aggTy",
            TypeClass::Label => "labelTy",
            TypeClass::Func => "fnTy",
            TypeClass::Other => "otherTy",
        }
    }

    /// Classifies a canonical type string as produced by the parser.
    pub fn of(type_str: &str) -> TypeClass {
        let t = type_str.trim();
        if t == "void" {
            return TypeClass::Void;
        }
        if t.ends_with('*') || t.starts_with("ptr") {
            return TypeClass::Ptr;
        }
        if t.ends_with(')') && !t.starts_with("target") {
            return TypeClass::Func;
        }
        if t.starts_with("<{") || t.starts_with('{') || t.starts_with('[') || t.starts_with('%') {
            return TypeClass::Agg;
        }
        if t.starts_with('<') {
            return TypeClass::Vec;
        }
        if let Some(width) = t.strip_prefix('i') {
            if !width.is_empty() && width.bytes().all(|b| b.is_ascii_digit()) {
                return TypeClass::Int;
            }
        }
        match t {
            "half" | "bfloat" | "float" | "double" | "fp128" | "x86_fp80" | "ppc_fp128" => TypeClass::Float,
            "label" => TypeClass::Label,
            _ => TypeClass::Other,
        }
    }
}

impl fmt::Display for TypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// `(opcode, type class, operand kinds)` view of one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenTriple {
    pub opcode_token: String,
    pub type_token: String,
    pub arg_tokens: Vec<String>,
}

pub fn token_triple(instr: &IrInstruction) -> TokenTriple {
    TokenTriple {
        opcode_token: instr.opcode.clone(),
        type_token: TypeClass::of(&instr.type_str).token().to_string(),
        arg_tokens: instr
            .operands
            .iter()
            .filter(|op| op.kind != OperandKind::Label)
            .map(|op| op.kind.name().to_string())
            .collect(),
    }
}

pub const TERMINATORS: &[&str] = &[
    "ret",
    "br",
    "switch",
    "unreachable",
    "invoke",
    "indirectbr",
    "resume",
    "callbr",
    "catchswitch",
    "catchret",
    "cleanupret",
];

pub fn is_terminator(opcode: &str) -> bool {
    TERMINATORS.contains(&opcode)
}

impl IrInstruction {
    pub fn is_terminator(&self) -> bool {
        is_terminator(&self.opcode)
    }

    pub fn is_call(&self) -> bool {
        matches!(self.opcode.as_str(), "call" | "invoke")
    }

    /// Non-label operands in operand order.
    pub fn value_operands(&self) -> impl Iterator<Item = &Operand> {
        self.operands.iter().filter(|op| op.kind != OperandKind::Label)
    }

    /// Branch targets in operand order.
    pub fn label_operands(&self) -> impl Iterator<Item = &str> {
        self.operands.iter().filter(|op| op.kind == OperandKind::Label).map(|op| op.token.as_str())
    }
}

impl IrFunction {
    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.instructions.len()).sum()
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Successor labels of every block, in terminator operand order.
    pub fn successors(&self) -> BTreeMap<String, Vec<String>> {
        self.blocks
            .iter()
            .map(|b| {
                let succ = b
                    .instructions
                    .last()
                    .map(|t| t.label_operands().map(str::to_string).collect())
                    .unwrap_or_default();
                (b.label.clone(), succ)
            })
            .collect()
    }
}

impl IrModule {
    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(IrFunction::instruction_count).sum()
    }

    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &IrInstruction> {
        self.functions.iter().flat_map(|f| f.blocks.iter().flat_map(|b| b.instructions.iter()))
    }
}

/// Use sites of every local value defined in `func`, keyed by its `%id`.
///
/// Parameters and instruction results are both definitions; a value with
/// no uses maps to an empty list. Each operand occurrence is one entry, so
/// `mul %a, %a` records two uses of `%a`.
pub fn def_use_map(func: &IrFunction) -> Result<BTreeMap<String, Vec<(usize, usize)>>, IrError> {
    let mut map: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (id, _) in &func.params {
        map.entry(id.clone()).or_default();
    }
    for block in &func.blocks {
        for instr in &block.instructions {
            if let Some(id) = &instr.result_id {
                map.entry(id.clone()).or_default();
            }
        }
    }
    for (bi, block) in func.blocks.iter().enumerate() {
        for (ii, instr) in block.instructions.iter().enumerate() {
            for op in &instr.operands {
                if op.kind != OperandKind::LocalValue {
                    continue;
                }
                match map.get_mut(&op.token) {
                    Some(uses) => uses.push((bi, ii)),
                    None => return Err(IrError::UndefinedLocal(op.token.clone())),
                }
            }
        }
    }
    Ok(map)
}
