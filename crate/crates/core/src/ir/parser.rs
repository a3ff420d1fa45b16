use std::collections::{HashMap, HashSet};

use super::lexer::{depth_delta, join_tokens, lex_line, strip_comment, Tok};
use super::{is_terminator, IrBlock, IrError, IrFunction, IrInstruction, IrModule, Operand, OperandKind};

const TYPE_KEYWORDS: &[&str] = &[
    "void", "half", "bfloat", "float", "double", "fp128", "x86_fp80", "ppc_fp128", "ptr", "label", "metadata",
    "token", "x86_mmx", "x86_amx", "opaque",
];

const VALUE_KEYWORDS: &[&str] = &["true", "false", "null", "undef", "poison", "zeroinitializer", "none"];

const CONSTEXPR_KEYWORDS: &[&str] = &[
    "getelementptr", "bitcast", "ptrtoint", "inttoptr", "addrspacecast", "trunc", "zext", "sext", "fptrunc",
    "fpext", "fptoui", "fptosi", "uitofp", "sitofp", "add", "sub", "mul", "shl", "xor", "and", "or", "icmp",
    "fcmp", "select", "extractelement", "insertelement", "shufflevector", "blockaddress",
];

const BINARY_OPS: &[&str] = &[
    "add", "sub", "mul", "udiv", "sdiv", "urem", "srem", "shl", "lshr", "ashr", "and", "or", "xor", "fadd", "fsub",
    "fmul", "fdiv", "frem",
];

const CAST_OPS: &[&str] = &[
    "trunc", "zext", "sext", "fptrunc", "fpext", "fptoui", "fptosi", "uitofp", "sitofp", "ptrtoint", "inttoptr",
    "bitcast", "addrspacecast",
];

/// Keywords that may precede the operands of an instruction.
const FLAG_WORDS: &[&str] = &[
    "nuw", "nsw", "exact", "disjoint", "nneg", "fast", "nnan", "ninf", "nsz", "arcp", "contract", "afn", "reassoc",
    "inbounds", "nusw", "volatile", "atomic", "weak", "samesign", "inalloca", "swifterror",
];

pub(super) fn is_binary_op(word: &str) -> bool {
    BINARY_OPS.contains(&word)
}

pub(super) fn is_cast_op(word: &str) -> bool {
    CAST_OPS.contains(&word)
}

fn is_int_type(word: &str) -> bool {
    word.len() > 1 && word.starts_with('i') && word[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_type_keyword(word: &str) -> bool {
    TYPE_KEYWORDS.contains(&word) || is_int_type(word) || word == "target"
}

fn is_known_opcode(word: &str) -> bool {
    BINARY_OPS.contains(&word)
        || CAST_OPS.contains(&word)
        || is_terminator(word)
        || matches!(
            word,
            "call" | "load" | "store" | "alloca" | "getelementptr" | "icmp" | "fcmp" | "phi" | "select" | "atomicrmw"
                | "cmpxchg" | "fence" | "fneg" | "freeze" | "va_arg" | "landingpad" | "extractvalue"
                | "insertvalue" | "extractelement" | "insertelement" | "shufflevector" | "tail" | "musttail"
        )
}

#[derive(Debug, Clone)]
struct ParsedType {
    text: String,
}

/// Cursor over the tokens of one logical line.
struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Tok]) -> Self {
        Self { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + offset)
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_ident(word)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_flags(&mut self) {
        while let Some(Tok::Ident(w)) = self.peek() {
            if FLAG_WORDS.contains(&w.as_str()) {
                self.pos += 1;
            } else if w == "inrange" || w == "syncscope" {
                self.pos += 1;
                if self.peek().is_some_and(|t| t.is_punct('(')) {
                    self.skip_group();
                }
            } else {
                break;
            }
        }
    }

    /// Skips a bracketed group starting at the current token; returns its tokens.
    fn skip_group(&mut self) -> &'a [Tok] {
        let start = self.pos;
        let mut depth = 0i64;
        while let Some(t) = self.bump() {
            match t {
                Tok::Punct('(' | '[' | '{' | '<') => depth += 1,
                Tok::Punct(')' | ']' | '}' | '>') => {
                    depth -= 1;
                    if depth <= 0 {
                        break;
                    }
                }
                _ => {}
            }
            if depth == 0 {
                break;
            }
        }
        &self.toks[start..self.pos]
    }

    /// Everything up to the next top-level comma (not consumed).
    fn item(&mut self) -> &'a [Tok] {
        let start = self.pos;
        let mut depth = 0i64;
        while let Some(t) = self.peek() {
            match t {
                Tok::Punct('(' | '[' | '{' | '<') => depth += 1,
                Tok::Punct(')' | ']' | '}' | '>') => depth -= 1,
                Tok::Punct(',') if depth == 0 => break,
                _ => {}
            }
            if depth < 0 {
                break;
            }
            self.pos += 1;
        }
        &self.toks[start..self.pos]
    }

    fn parse_type(&mut self) -> Option<ParsedType> {
        self.parse_type_inner(true)
    }

    /// Parses a type; function-type suffixes are only accepted when `allow_fn`.
    fn parse_type_inner(&mut self, allow_fn: bool) -> Option<ParsedType> {
        let start = self.pos;
        let ok = match self.peek()? {
            Tok::Ident(w) if w == "ptr" => {
                self.pos += 1;
                if self.peek().is_some_and(|t| t.is_ident("addrspace")) {
                    self.pos += 1;
                    self.skip_group();
                }
                true
            }
            Tok::Ident(w) if w == "target" => {
                self.pos += 1;
                self.peek().is_some_and(|t| t.is_punct('(')) && {
                    self.skip_group();
                    true
                }
            }
            Tok::Ident(w) if is_type_keyword(w) => {
                self.pos += 1;
                true
            }
            Tok::Local(_) => {
                self.pos += 1;
                true
            }
            Tok::Punct('{') => self.parse_struct_body('}'),
            Tok::Punct('<') if self.peek_at(1).is_some_and(|t| t.is_punct('{')) => {
                self.pos += 1;
                self.parse_struct_body('}') && self.eat_punct('>')
            }
            Tok::Punct('<') => self.parse_sequential('<', '>'),
            Tok::Punct('[') => self.parse_sequential('[', ']'),
            _ => false,
        };
        if !ok {
            self.pos = start;
            return None;
        }
        loop {
            if self.peek().is_some_and(|t| t.is_ident("addrspace")) && self.peek_at(1).is_some_and(|t| t.is_punct('(')) {
                let save = self.pos;
                self.pos += 1;
                self.skip_group();
                if !self.peek().is_some_and(|t| t.is_punct('*')) {
                    self.pos = save;
                    break;
                }
            }
            if self.eat_punct('*') {
                continue;
            }
            if allow_fn && self.peek().is_some_and(|t| t.is_punct('(')) {
                let save = self.pos;
                if self.parse_fn_params() {
                    continue;
                }
                self.pos = save;
            }
            break;
        }
        Some(ParsedType { text: join_tokens(&self.toks[start..self.pos]) })
    }

    /// `{ T, T }` with the cursor on the opening brace.
    fn parse_struct_body(&mut self, close: char) -> bool {
        self.pos += 1;
        if self.eat_punct(close) {
            return true;
        }
        loop {
            if self.parse_type().is_none() {
                return false;
            }
            if self.eat_punct(close) {
                return true;
            }
            if !self.eat_punct(',') {
                return false;
            }
        }
    }

    /// `[N x T]` / `<N x T>` / `<vscale x N x T>`.
    fn parse_sequential(&mut self, _open: char, close: char) -> bool {
        self.pos += 1;
        if self.eat_ident("vscale") && !self.eat_ident("x") {
            return false;
        }
        if !matches!(self.bump(), Some(Tok::Int(_))) {
            return false;
        }
        if !self.eat_ident("x") {
            return false;
        }
        if self.parse_type().is_none() {
            return false;
        }
        self.eat_punct(close)
    }

    /// `(T, T, ...)` function parameter type list.
    fn parse_fn_params(&mut self) -> bool {
        if !self.eat_punct('(') {
            return false;
        }
        if self.eat_punct(')') {
            return true;
        }
        loop {
            if matches!(self.peek(), Some(Tok::Ellipsis)) {
                self.pos += 1;
            } else if self.parse_type().is_none() {
                return false;
            } else {
                // parameter attributes inside function types are rare but legal
                self.skip_attributes();
            }
            if self.eat_punct(')') {
                return true;
            }
            if !self.eat_punct(',') {
                return false;
            }
        }
    }

    /// Skips parameter/return attributes such as `noundef`, `align 8`,
    /// `dereferenceable(4)` and `byval(%T)`.
    fn skip_attributes(&mut self) {
        while let Some(Tok::Ident(w)) = self.peek() {
            let w = w.as_str();
            if is_type_keyword(w) || VALUE_KEYWORDS.contains(&w) || CONSTEXPR_KEYWORDS.contains(&w) || w == "asm" {
                break;
            }
            if matches!(w, "dso_local_equivalent" | "no_cfi" | "label" | "to" | "x") {
                break;
            }
            self.pos += 1;
            if self.peek().is_some_and(|t| t.is_punct('(')) {
                self.skip_group();
            } else if matches!(w, "align" | "cc" | "addrspace") && matches!(self.peek(), Some(Tok::Int(_))) {
                self.pos += 1;
            }
        }
    }

    fn parse_value(&mut self) -> Option<Operand> {
        let start = self.pos;
        let tok = self.peek()?;
        let op = match tok {
            Tok::Local(s) => {
                self.pos += 1;
                Operand::new(OperandKind::LocalValue, s.clone())
            }
            Tok::Global(s) => {
                self.pos += 1;
                Operand::new(OperandKind::GlobalValue, s.clone())
            }
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) => {
                self.pos += 1;
                Operand::new(OperandKind::Constant, tok.text())
            }
            Tok::Ident(w) if VALUE_KEYWORDS.contains(&w.as_str()) => {
                self.pos += 1;
                Operand::new(OperandKind::Constant, w.clone())
            }
            Tok::Ident(w) if w == "asm" => {
                self.pos += 1;
                while matches!(self.peek(), Some(Tok::Ident(_))) {
                    self.pos += 1;
                }
                if !matches!(self.bump(), Some(Tok::Str(_))) || !self.eat_punct(',') || !matches!(self.bump(), Some(Tok::Str(_))) {
                    self.pos = start;
                    return None;
                }
                Operand::new(OperandKind::Constant, join_tokens(&self.toks[start..self.pos]))
            }
            Tok::Ident(w) if matches!(w.as_str(), "dso_local_equivalent" | "no_cfi") => {
                self.pos += 1;
                if self.parse_value().is_none() {
                    self.pos = start;
                    return None;
                }
                Operand::new(OperandKind::Constant, join_tokens(&self.toks[start..self.pos]))
            }
            Tok::Ident(w) if CONSTEXPR_KEYWORDS.contains(&w.as_str()) => {
                self.pos += 1;
                while matches!(self.peek(), Some(Tok::Ident(_))) {
                    self.pos += 1;
                }
                if !self.peek().is_some_and(|t| t.is_punct('(')) {
                    self.pos = start;
                    return None;
                }
                self.skip_group();
                Operand::new(OperandKind::Constant, join_tokens(&self.toks[start..self.pos]))
            }
            Tok::Punct('{' | '[' | '<') => {
                self.skip_group();
                Operand::new(OperandKind::Constant, join_tokens(&self.toks[start..self.pos]))
            }
            _ => return None,
        };
        Some(op)
    }

    /// `T [attrs] v`, falling back to an untyped value.
    fn parse_typed_value(&mut self) -> Option<(Option<ParsedType>, Operand)> {
        let start = self.pos;
        if let Some(ty) = self.parse_type() {
            self.skip_attributes();
            if let Some(v) = self.parse_value() {
                return Some((Some(ty), v));
            }
            self.pos = start;
        }
        self.parse_value().map(|v| (None, v))
    }

    fn expect_typed_value(&mut self, what: &str) -> Result<(Option<ParsedType>, Operand), String> {
        self.parse_typed_value().ok_or_else(|| format!("expected {what}"))
    }

    fn expect_comma(&mut self) -> Result<(), String> {
        if self.eat_punct(',') {
            Ok(())
        } else {
            Err(format!("expected ',' near '{}'", self.peek().map(Tok::text).unwrap_or("<end>")))
        }
    }

    fn expect_label(&mut self) -> Result<Operand, String> {
        if !self.eat_ident("label") {
            return Err("expected 'label'".into());
        }
        match self.bump() {
            Some(Tok::Local(s)) => Ok(Operand::new(OperandKind::Label, label_name(s))),
            _ => Err("expected label name".into()),
        }
    }
}

fn label_name(local: &str) -> String {
    local.trim_start_matches('%').to_string()
}

/// Parses a textual LLVM IR module.
pub fn parse_ir(text: &str) -> Result<IrModule, IrError> {
    Parser::default().run(text)
}

#[derive(Default)]
struct Parser {
    module_name: String,
    functions: Vec<IrFunction>,
    globals: Vec<(String, String)>,
}

struct FunctionBuilder {
    func: IrFunction,
    start_line: usize,
    current: Option<IrBlock>,
    /// Next number LLVM would assign to an unnamed value or block.
    next_unnamed: u64,
}

impl FunctionBuilder {
    fn note_numbered(&mut self, name: &str) {
        if let Ok(n) = name.trim_start_matches('%').parse::<u64>() {
            self.next_unnamed = self.next_unnamed.max(n + 1);
        }
    }
}

fn malformed(line: usize, message: impl Into<String>) -> IrError {
    IrError::MalformedIr { line, message: message.into() }
}

impl Parser {
    fn run(mut self, text: &str) -> Result<IrModule, IrError> {
        let lines: Vec<&str> = text.lines().collect();
        let mut idx = 0;
        let mut current: Option<FunctionBuilder> = None;

        while idx < lines.len() {
            let line_no = idx + 1;
            let raw = strip_comment(lines[idx]).trim();
            idx += 1;
            if raw.is_empty() {
                continue;
            }

            if current.is_none() {
                if raw.starts_with("define") && raw.split_whitespace().next() == Some("define") {
                    // header may continue until the opening brace
                    let mut header = raw.to_string();
                    while !header.contains('{') {
                        if idx >= lines.len() {
                            return Err(malformed(line_no, "function header without body"));
                        }
                        header.push(' ');
                        header.push_str(strip_comment(lines[idx]).trim());
                        idx += 1;
                    }
                    let (before, after) = header.split_once('{').unwrap();
                    let toks = lex_line(before).map_err(|e| malformed(line_no, e.message))?;
                    let (name, params, next_unnamed) = parse_header(&toks).map_err(|m| malformed(line_no, m))?;
                    current = Some(FunctionBuilder {
                        func: IrFunction { name, params, blocks: Vec::new(), is_declaration: false },
                        start_line: line_no,
                        current: None,
                        next_unnamed,
                    });
                    if !after.trim().is_empty() {
                        // single-line body: `define void @f() { ret void }`
                        let inner = after.trim();
                        let (body, closed) = match inner.strip_suffix('}') {
                            Some(b) => (b.trim(), true),
                            None => (inner, false),
                        };
                        if !body.is_empty() {
                            let toks = lex_line(body).map_err(|e| malformed(line_no, e.message))?;
                            self.body_line(current.as_mut().unwrap(), &toks, line_no)?;
                        }
                        if closed {
                            self.finish_function(current.take().unwrap(), line_no)?;
                        }
                    }
                    continue;
                }
                if raw.starts_with("declare") && raw.split_whitespace().next() == Some("declare") {
                    let toks = lex_line(raw).map_err(|e| malformed(line_no, e.message))?;
                    let (name, params, _) = parse_header(&toks).map_err(|m| malformed(line_no, m))?;
                    self.push_function(IrFunction { name, params, blocks: Vec::new(), is_declaration: true }, line_no)?;
                    continue;
                }
                self.top_level_line(raw, line_no)?;
                continue;
            }

            // inside a function body: join continuation lines of bracketed constructs
            let mut toks = lex_line(raw).map_err(|e| malformed(line_no, e.message))?;
            let mut depth = depth_delta(&toks);
            while depth > 0 && idx < lines.len() {
                let more = lex_line(strip_comment(lines[idx]).trim()).map_err(|e| malformed(idx + 1, e.message))?;
                idx += 1;
                depth += depth_delta(&more);
                toks.extend(more);
            }
            if toks.len() == 1 && toks[0].is_punct('}') {
                self.finish_function(current.take().unwrap(), line_no)?;
                continue;
            }
            self.body_line(current.as_mut().unwrap(), &toks, line_no)?;
        }

        if let Some(fb) = current {
            return Err(malformed(fb.start_line, format!("unbalanced braces: function @{} is never closed", fb.func.name)));
        }

        let mut module = IrModule { name: self.module_name, functions: self.functions, global_constants: self.globals };
        resolve_function_refs(&mut module);
        Ok(module)
    }

    fn top_level_line(&mut self, raw: &str, line_no: usize) -> Result<(), IrError> {
        let first = raw.split_whitespace().next().unwrap_or("");
        if raw.starts_with('!')
            || raw.starts_with('$')
            || raw.starts_with('#')
            || matches!(first, "attributes" | "target" | "module" | "uselistorder" | "uselistorder_bb")
        {
            return Ok(());
        }
        if first == "source_filename" {
            if let Some((_, rhs)) = raw.split_once('=') {
                self.module_name = rhs.trim().trim_matches('"').to_string();
            }
            return Ok(());
        }
        if raw.starts_with('}') {
            return Err(malformed(line_no, "unbalanced '}' outside a function"));
        }
        let toks = lex_line(raw).map_err(|e| malformed(line_no, e.message))?;
        match (toks.first(), toks.get(1)) {
            (Some(Tok::Global(name)), Some(t)) if t.is_punct('=') => {
                let mut cur = Cursor::new(&toks[2..]);
                // linkage, visibility, addrspace, ... up to `global`/`constant`
                while let Some(t) = cur.bump() {
                    if t.is_ident("global") || t.is_ident("constant") {
                        if let Some(ty) = cur.parse_type() {
                            self.globals.push((name.clone(), ty.text));
                        }
                        break;
                    }
                    if t.is_punct('(') {
                        // addrspace(N) and friends
                        cur.pos -= 1;
                        cur.skip_group();
                    }
                }
                Ok(())
            }
            (Some(Tok::Local(_)), Some(t)) if t.is_punct('=') => {
                if toks.get(2).is_some_and(|t| t.is_ident("type")) {
                    Ok(())
                } else {
                    Err(malformed(line_no, "instruction outside a function"))
                }
            }
            (Some(Tok::Ident(w)), _) if is_known_opcode(w) => Err(malformed(line_no, "instruction outside a function")),
            _ => Ok(()),
        }
    }

    fn push_function(&mut self, func: IrFunction, line_no: usize) -> Result<(), IrError> {
        if self.functions.iter().any(|f| f.name == func.name) {
            return Err(malformed(line_no, format!("duplicate function @{}", func.name)));
        }
        self.functions.push(func);
        Ok(())
    }

    fn body_line(&mut self, fb: &mut FunctionBuilder, toks: &[Tok], line_no: usize) -> Result<(), IrError> {
        // block label
        if toks.len() == 2 && toks[1].is_punct(':') {
            let label = match &toks[0] {
                Tok::Ident(s) | Tok::Int(s) | Tok::Str(s) => s.clone(),
                _ => return Err(malformed(line_no, "invalid block label")),
            };
            if let Some(open) = fb.current.take() {
                return Err(malformed(
                    line_no,
                    format!("block '{}' does not end with a terminator before label '{label}'", open.label),
                ));
            }
            fb.note_numbered(&label);
            if fb.func.blocks.iter().any(|b| b.label == label) {
                return Err(malformed(line_no, format!("duplicate block label '{label}'")));
            }
            fb.current = Some(IrBlock { label, instructions: Vec::new() });
            return Ok(());
        }

        let mut instr = parse_instruction(toks).map_err(|m| malformed(line_no, m))?;
        if fb.current.is_none() {
            // implicit (unnamed) block: entry, or a block following a terminator
            let label = fb.next_unnamed.to_string();
            fb.next_unnamed += 1;
            fb.current = Some(IrBlock { label, instructions: Vec::new() });
        }
        match &instr.result_id {
            Some(id) => fb.note_numbered(id),
            None if instr.type_str != "void" => {
                instr.result_id = Some(format!("%{}", fb.next_unnamed));
                fb.next_unnamed += 1;
            }
            None => {}
        }
        let block = fb.current.as_mut().unwrap();
        let terminates = instr.is_terminator();
        block.instructions.push(instr);
        if terminates {
            let done = fb.current.take().unwrap();
            fb.func.blocks.push(done);
        }
        Ok(())
    }

    fn finish_function(&mut self, fb: FunctionBuilder, line_no: usize) -> Result<(), IrError> {
        if let Some(open) = fb.current {
            return Err(malformed(line_no, format!("block '{}' does not end with a terminator", open.label)));
        }
        let func = fb.func;
        if func.blocks.is_empty() {
            return Err(malformed(fb.start_line, format!("function @{} has no blocks", func.name)));
        }
        let labels: HashSet<&str> = func.blocks.iter().map(|b| b.label.as_str()).collect();
        for block in &func.blocks {
            for instr in &block.instructions {
                for target in instr.label_operands() {
                    if !labels.contains(target) {
                        return Err(malformed(
                            fb.start_line,
                            format!("@{}: branch to unknown block '{target}'", func.name),
                        ));
                    }
                }
            }
        }
        self.push_function(func, fb.start_line)
    }
}

/// Globals that name functions of the module become `FunctionRef`s.
fn resolve_function_refs(module: &mut IrModule) {
    let names: HashMap<String, ()> = module.functions.iter().map(|f| (format!("@{}", f.name), ())).collect();
    for func in &mut module.functions {
        for block in &mut func.blocks {
            for instr in &mut block.instructions {
                for op in &mut instr.operands {
                    if op.kind == OperandKind::GlobalValue && names.contains_key(&op.token) {
                        op.kind = OperandKind::FunctionRef;
                    }
                }
            }
        }
    }
}

type Header = (String, Vec<(String, String)>, u64);

/// Parses `define ... @name(params) ...` or `declare ...` tokens.
fn parse_header(toks: &[Tok]) -> Result<Header, String> {
    let name_pos = toks
        .iter()
        .position(|t| matches!(t, Tok::Global(_)))
        .ok_or("function header without a name")?;
    let name = toks[name_pos].text().trim_start_matches('@').to_string();
    let mut cur = Cursor::new(&toks[name_pos + 1..]);
    if !cur.eat_punct('(') {
        return Err(format!("expected parameter list after @{name}"));
    }
    let mut params = Vec::new();
    let mut next_unnamed = 0u64;
    if !cur.eat_punct(')') {
        loop {
            if matches!(cur.peek(), Some(Tok::Ellipsis)) {
                cur.bump();
            } else {
                let ty = cur.parse_type().ok_or_else(|| format!("@{name}: malformed parameter type"))?;
                cur.skip_attributes();
                let id = match cur.peek() {
                    Some(Tok::Local(s)) => {
                        cur.bump();
                        if let Ok(n) = s.trim_start_matches('%').parse::<u64>() {
                            next_unnamed = next_unnamed.max(n + 1);
                        }
                        s.clone()
                    }
                    _ => {
                        let id = format!("%{next_unnamed}");
                        next_unnamed += 1;
                        id
                    }
                };
                params.push((id, ty.text));
            }
            if cur.eat_punct(')') {
                break;
            }
            if !cur.eat_punct(',') {
                return Err(format!("@{name}: malformed parameter list"));
            }
        }
    }
    Ok((name, params, next_unnamed))
}

fn parse_instruction(toks: &[Tok]) -> Result<IrInstruction, String> {
    let mut cur = Cursor::new(toks);
    let mut result_id = None;
    if let (Some(Tok::Local(id)), Some(eq)) = (toks.first(), toks.get(1)) {
        if eq.is_punct('=') {
            result_id = Some(id.clone());
            cur.pos = 2;
        }
    }
    while cur.eat_ident("tail") || cur.eat_ident("musttail") || cur.eat_ident("notail") {}
    let opcode = match cur.bump() {
        Some(Tok::Ident(w)) => w.clone(),
        other => return Err(format!("expected opcode, found '{}'", other.map(Tok::text).unwrap_or("<end>"))),
    };

    let mut ins = IrInstruction {
        result_id,
        opcode: opcode.clone(),
        type_str: "void".into(),
        operands: Vec::new(),
        call_target: None,
    };
    let mut result_type: Option<String> = None;

    match opcode.as_str() {
        "ret" => {
            if !cur.eat_ident("void") {
                let (_, v) = cur.expect_typed_value("return value")?;
                ins.operands.push(v);
            }
        }
        "br" => {
            if cur.peek().is_some_and(|t| t.is_ident("label")) {
                ins.operands.push(cur.expect_label()?);
            } else {
                let (_, c) = cur.expect_typed_value("branch condition")?;
                ins.operands.push(c);
                cur.expect_comma()?;
                ins.operands.push(cur.expect_label()?);
                cur.expect_comma()?;
                ins.operands.push(cur.expect_label()?);
            }
        }
        "switch" => {
            let (_, v) = cur.expect_typed_value("switch condition")?;
            ins.operands.push(v);
            cur.expect_comma()?;
            ins.operands.push(cur.expect_label()?);
            if !cur.eat_punct('[') {
                return Err("expected '[' in switch".into());
            }
            while !cur.eat_punct(']') {
                if cur.at_end() {
                    return Err("unterminated switch table".into());
                }
                let (_, c) = cur.expect_typed_value("case value")?;
                ins.operands.push(c);
                cur.expect_comma()?;
                ins.operands.push(cur.expect_label()?);
            }
        }
        "indirectbr" => {
            let (_, v) = cur.expect_typed_value("address")?;
            ins.operands.push(v);
            cur.expect_comma()?;
            if !cur.eat_punct('[') {
                return Err("expected '[' in indirectbr".into());
            }
            while !cur.eat_punct(']') {
                if cur.at_end() {
                    return Err("unterminated indirectbr list".into());
                }
                cur.eat_punct(',');
                if cur.peek().is_some_and(|t| t.is_punct(']')) {
                    continue;
                }
                ins.operands.push(cur.expect_label()?);
            }
        }
        "unreachable" | "fence" => {}
        "call" | "invoke" => {
            cur.skip_flags();
            let ret = loop {
                if let Some(t) = cur.parse_type_inner(false) {
                    break t;
                }
                if cur.at_end() || !matches!(cur.peek(), Some(Tok::Ident(_))) {
                    return Err(format!("{opcode}: expected return type"));
                }
                cur.bump();
                if cur.peek().is_some_and(|t| t.is_punct('(')) {
                    cur.skip_group();
                } else if matches!(cur.peek(), Some(Tok::Int(_))) {
                    cur.bump();
                }
            };
            // explicit function type: `i32 (ptr, ...)`
            if cur.peek().is_some_and(|t| t.is_punct('(')) {
                let save = cur.pos;
                if !cur.parse_fn_params() {
                    cur.pos = save;
                }
                while cur.eat_punct('*') {}
            }
            let callee = cur.parse_value().ok_or_else(|| format!("{opcode}: expected callee"))?;
            let callee = match callee.kind {
                OperandKind::GlobalValue => {
                    ins.call_target = Some(callee.token.trim_start_matches('@').to_string());
                    Operand::new(OperandKind::FunctionRef, callee.token)
                }
                OperandKind::Constant if callee.token.starts_with("asm") => {
                    ins.call_target = Some("asm".into());
                    callee
                }
                _ => {
                    ins.call_target = Some(callee.token.clone());
                    callee
                }
            };
            ins.operands.push(callee);
            if !cur.eat_punct('(') {
                return Err(format!("{opcode}: expected argument list"));
            }
            if !cur.eat_punct(')') {
                loop {
                    let item = cur.item();
                    let mut ic = Cursor::new(item);
                    let is_metadata = ic.peek().is_some_and(|t| t.is_ident("metadata"));
                    if !is_metadata && !item.is_empty() {
                        let (_, v) = ic.parse_typed_value().ok_or_else(|| format!("{opcode}: malformed argument"))?;
                        ins.operands.push(v);
                    }
                    if cur.eat_punct(')') {
                        break;
                    }
                    if !cur.eat_punct(',') {
                        return Err(format!("{opcode}: malformed argument list"));
                    }
                }
            }
            if opcode == "invoke" {
                while !cur.at_end() && !cur.peek().is_some_and(|t| t.is_ident("to")) {
                    cur.bump();
                }
                if !cur.eat_ident("to") {
                    return Err("invoke without normal destination".into());
                }
                ins.operands.push(cur.expect_label()?);
                if !cur.eat_ident("unwind") {
                    return Err("invoke without unwind destination".into());
                }
                ins.operands.push(cur.expect_label()?);
            }
            result_type = Some(ret.text);
        }
        "load" => {
            cur.skip_flags();
            let ty = cur.parse_type().ok_or("load: expected type")?;
            if cur.eat_punct(',') {
                let (_, p) = cur.expect_typed_value("load address")?;
                ins.operands.push(p);
                result_type = Some(ty.text);
            } else {
                // typed-pointer syntax: `load i32* %p`
                let p = cur.parse_value().ok_or("load: expected address")?;
                ins.operands.push(p);
                result_type = Some(ty.text.strip_suffix('*').unwrap_or(&ty.text).to_string());
            }
        }
        "store" => {
            cur.skip_flags();
            let (_, v) = cur.expect_typed_value("stored value")?;
            ins.operands.push(v);
            cur.expect_comma()?;
            let (_, p) = cur.expect_typed_value("store address")?;
            ins.operands.push(p);
        }
        "alloca" => {
            cur.skip_flags();
            cur.parse_type().ok_or("alloca: expected type")?;
            if cur.eat_punct(',') && !cur.peek().is_some_and(|t| t.is_ident("align") || t.is_ident("addrspace")) {
                let (_, n) = cur.expect_typed_value("element count")?;
                ins.operands.push(n);
            }
            result_type = Some("ptr".into());
        }
        "getelementptr" => {
            cur.skip_flags();
            cur.parse_type().ok_or("getelementptr: expected type")?;
            while cur.eat_punct(',') {
                cur.skip_flags();
                if cur.peek().is_some_and(|t| t.is_ident("align")) {
                    break;
                }
                let (_, v) = cur.expect_typed_value("getelementptr operand")?;
                ins.operands.push(v);
            }
            result_type = Some("ptr".into());
        }
        op if BINARY_OPS.contains(&op) => {
            cur.skip_flags();
            let (ty, a) = cur.expect_typed_value("left operand")?;
            cur.expect_comma()?;
            let b = cur.parse_value().ok_or("expected right operand")?;
            ins.operands.extend([a, b]);
            result_type = Some(ty.ok_or("binary operator without type")?.text);
        }
        "fneg" | "freeze" => {
            cur.skip_flags();
            let (ty, a) = cur.expect_typed_value("operand")?;
            ins.operands.push(a);
            result_type = Some(ty.ok_or("unary operator without type")?.text);
        }
        "icmp" | "fcmp" => {
            cur.skip_flags();
            match cur.bump() {
                Some(Tok::Ident(_)) => {}
                _ => return Err("comparison without predicate".into()),
            }
            let (ty, a) = cur.expect_typed_value("left operand")?;
            cur.expect_comma()?;
            let b = cur.parse_value().ok_or("expected right operand")?;
            ins.operands.extend([a, b]);
            let ty = ty.ok_or("comparison without operand type")?.text;
            result_type = Some(comparison_result_type(&ty));
        }
        op if CAST_OPS.contains(&op) => {
            cur.skip_flags();
            let (_, v) = cur.expect_typed_value("cast operand")?;
            ins.operands.push(v);
            if !cur.eat_ident("to") {
                return Err(format!("{op}: expected 'to'"));
            }
            result_type = Some(cur.parse_type().ok_or("cast: expected destination type")?.text);
        }
        "phi" => {
            cur.skip_flags();
            let ty = cur.parse_type().ok_or("phi: expected type")?;
            loop {
                if !cur.eat_punct('[') {
                    return Err("phi: expected '['".into());
                }
                let v = cur.parse_value().ok_or("phi: expected incoming value")?;
                cur.expect_comma()?;
                let pred = match cur.bump() {
                    Some(Tok::Local(s)) => Operand::new(OperandKind::Label, label_name(s)),
                    _ => return Err("phi: expected predecessor label".into()),
                };
                if !cur.eat_punct(']') {
                    return Err("phi: expected ']'".into());
                }
                ins.operands.extend([v, pred]);
                if !cur.eat_punct(',') || !cur.peek().is_some_and(|t| t.is_punct('[')) {
                    break;
                }
            }
            result_type = Some(ty.text);
        }
        "select" => {
            cur.skip_flags();
            let (_, c) = cur.expect_typed_value("select condition")?;
            cur.expect_comma()?;
            let (ty, a) = cur.expect_typed_value("select operand")?;
            cur.expect_comma()?;
            let (_, b) = cur.expect_typed_value("select operand")?;
            ins.operands.extend([c, a, b]);
            result_type = Some(ty.ok_or("select without type")?.text);
        }
        "atomicrmw" => {
            cur.skip_flags();
            match cur.bump() {
                Some(Tok::Ident(_)) => {}
                _ => return Err("atomicrmw: expected operation".into()),
            }
            let (_, p) = cur.expect_typed_value("atomicrmw address")?;
            cur.expect_comma()?;
            let (ty, v) = cur.expect_typed_value("atomicrmw operand")?;
            ins.operands.extend([p, v]);
            result_type = Some(ty.ok_or("atomicrmw without type")?.text);
        }
        "cmpxchg" => {
            cur.skip_flags();
            let (_, p) = cur.expect_typed_value("cmpxchg address")?;
            cur.expect_comma()?;
            let (ty, c) = cur.expect_typed_value("cmpxchg comparand")?;
            cur.expect_comma()?;
            let (_, n) = cur.expect_typed_value("cmpxchg new value")?;
            ins.operands.extend([p, c, n]);
            result_type = Some(format!("{{ {}, i1 }}", ty.ok_or("cmpxchg without type")?.text));
        }
        "va_arg" => {
            let (_, v) = cur.expect_typed_value("va_list")?;
            ins.operands.push(v);
            cur.expect_comma()?;
            result_type = Some(cur.parse_type().ok_or("va_arg: expected type")?.text);
        }
        "landingpad" => {
            result_type = Some(cur.parse_type().ok_or("landingpad: expected type")?.text);
        }
        _ => {
            // generic path: comma-separated items, each `label %x`, `T v`, `v` or `T`
            let mut first_type = None;
            cur.skip_flags();
            loop {
                let item = cur.item();
                let mut ic = Cursor::new(item);
                if ic.peek().is_some_and(|t| t.is_ident("label")) {
                    if let Ok(l) = ic.expect_label() {
                        ins.operands.push(l);
                    }
                } else if let Some((ty, v)) = ic.parse_typed_value() {
                    let consumed_all = ic.at_end();
                    if ty.is_none() && !consumed_all {
                        // e.g. `i32` keyword followed by junk: type-only fallback below
                        let mut tc = Cursor::new(item);
                        if let Some(t) = tc.parse_type() {
                            first_type.get_or_insert(t.text);
                        }
                    } else {
                        if let Some(t) = ty {
                            first_type.get_or_insert(t.text);
                        }
                        ins.operands.push(v);
                    }
                } else {
                    let mut tc = Cursor::new(item);
                    if let Some(t) = tc.parse_type() {
                        if tc.at_end() {
                            first_type.get_or_insert(t.text);
                        }
                    }
                }
                if !cur.eat_punct(',') {
                    break;
                }
            }
            if ins.result_id.is_some() {
                result_type = Some(first_type.unwrap_or_else(|| "unknown".into()));
            }
        }
    }

    match (&ins.result_id, result_type) {
        (Some(id), Some(ty)) => {
            if ty == "void" {
                return Err(format!("{id} is assigned a void {opcode}"));
            }
            ins.type_str = ty;
        }
        (Some(id), None) => return Err(format!("{opcode} produces no value but is assigned to {id}")),
        (None, Some(ty)) => {
            // unnamed non-void result: the caller numbers it the way LLVM does
            ins.type_str = ty;
        }
        (None, None) => {}
    }
    Ok(ins)
}

/// `i1` for scalars, `<N x i1>` for vector comparisons.
fn comparison_result_type(operand_ty: &str) -> String {
    if let Some(rest) = operand_ty.strip_prefix('<') {
        if let Some((n, _)) = rest.split_once(" x ") {
            return format!("<{n} x i1>");
        }
    }
    "i1".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(body: &str) -> IrInstruction {
        let text = format!("define void @f(i32 %x, ptr %p, i1 %c) {{\n{body}\n  ret void\n}}\n");
        let m = parse_ir(&text).unwrap_or_else(|e| panic!("{e}: {body}"));
        m.functions[0].blocks[0].instructions[0].clone()
    }

    #[test]
    fn empty_text_is_empty_module() {
        let m = parse_ir("").unwrap();
        assert!(m.functions.is_empty());
    }

    #[test]
    fn minimal_function() {
        let m = parse_ir("define void @f() { ret void }").unwrap();
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions[0];
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].instructions.len(), 1);
        assert_eq!(f.blocks[0].instructions[0].opcode, "ret");
        assert_eq!(f.blocks[0].instructions[0].type_str, "void");
    }

    #[test]
    fn clang_style_module() {
        let text = r#"; ModuleID = 'x.c'
source_filename = "x.c"
target datalayout = "e-m:e-i64:64"

%struct.ompi_communicator_t = type opaque
@ompi_mpi_comm_world = external global %struct.ompi_predefined_communicator_t, align 1
@.str = private unnamed_addr constant [4 x i8] c"%d\0A\00", align 1

; Function Attrs: noinline nounwind optnone uwtable
define dso_local i32 @main(i32 noundef %0, ptr noundef %1) #0 !dbg !10 {
  %3 = alloca i32, align 4
  %4 = call i32 @MPI_Init(ptr noundef %3, ptr noundef null), !dbg !12
  %5 = load i32, ptr %3, align 4, !tbaa !5
  %6 = icmp eq i32 %5, 0
  br i1 %6, label %7, label %9

7:                                                ; preds = %2
  %8 = call i32 (ptr, ...) @printf(ptr noundef @.str, i32 noundef %5)
  br label %9

9:
  ret i32 0
}

declare i32 @MPI_Init(ptr noundef, ptr noundef) #1
declare i32 @printf(ptr noundef, ...) #1

attributes #0 = { noinline nounwind }
!10 = distinct !DISubprogram(name: "main")
"#;
        let m = parse_ir(text).unwrap();
        assert_eq!(m.name, "x.c");
        assert_eq!(m.functions.len(), 3);
        let main = &m.functions[0];
        assert_eq!(main.params, vec![("%0".into(), "i32".into()), ("%1".into(), "ptr".into())]);
        let labels: Vec<_> = main.blocks.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, vec!["2", "7", "9"]);
        let call = &main.blocks[0].instructions[1];
        assert_eq!(call.call_target.as_deref(), Some("MPI_Init"));
        assert_eq!(call.operands[0], Operand::new(OperandKind::FunctionRef, "@MPI_Init"));
        assert_eq!(call.operands.len(), 3);
        let printf = &main.blocks[1].instructions[0];
        assert_eq!(printf.type_str, "i32");
        assert_eq!(printf.operands[1], Operand::new(OperandKind::GlobalValue, "@.str"));
        assert_eq!(m.global_constants.len(), 2);
        assert_eq!(m.global_constants[1], ("@.str".into(), "[4 x i8]".into()));
        assert_eq!(m.functions[1].params, vec![("%0".into(), "ptr".into()), ("%1".into(), "ptr".into())]);
    }

    #[test]
    fn instruction_families() {
        let i = single("  %a = add nsw i32 %x, 5");
        assert_eq!((i.opcode.as_str(), i.type_str.as_str()), ("add", "i32"));
        assert_eq!(i.operands[1], Operand::new(OperandKind::Constant, "5"));

        let i = single("  store volatile i32 %x, ptr %p, align 4");
        assert_eq!(i.type_str, "void");
        assert_eq!(i.operands.len(), 2);

        let i = single("  %v = load i32, ptr %p, align 4");
        assert_eq!(i.type_str, "i32");

        let i = single("  %v = load i32* %p");
        assert_eq!(i.type_str, "i32");

        let i = single("  %g = getelementptr inbounds [4 x i32], ptr %p, i64 0, i64 %x");
        assert_eq!((i.type_str.as_str(), i.operands.len()), ("ptr", 3));

        let i = single("  %c2 = icmp slt <4 x i32> %x, zeroinitializer");
        assert_eq!(i.type_str, "<4 x i1>");

        let i = single("  %z = zext nneg i32 %x to i64");
        assert_eq!((i.type_str.as_str(), i.operands.len()), ("i64", 1));

        let i = single("  %s = select i1 %c, i32 %x, i32 7");
        assert_eq!((i.type_str.as_str(), i.operands.len()), ("i32", 3));

        let i = single("  %o = atomicrmw add ptr %p, i32 1 seq_cst, align 4");
        assert_eq!(i.type_str, "i32");

        let i = single("  %o = cmpxchg ptr %p, i32 0, i32 1 acq_rel monotonic");
        assert_eq!(i.type_str, "{ i32, i1 }");

        let i = single("  fence syncscope(\"agent\") seq_cst");
        assert!(i.operands.is_empty());

        let i = single("  %e = extractvalue { i32, i1 } %agg, 0");
        assert_eq!(i.opcode, "extractvalue");
        assert_eq!(i.operands[0], Operand::new(OperandKind::LocalValue, "%agg"));

        let i = single("  call void @llvm.dbg.declare(metadata ptr %p, metadata !12, metadata !DIExpression()), !dbg !3");
        assert_eq!(i.operands.len(), 1);

        let i = single("  %r = tail call fastcc noundef i32 @g(i32 noundef signext %x, ptr nonnull align 8 dereferenceable(16) %p) #4");
        assert_eq!(i.type_str, "i32");
        assert_eq!(i.operands.len(), 3);

        let i = single("  call void asm sideeffect \"nop\", \"~{memory}\"()");
        assert_eq!(i.call_target.as_deref(), Some("asm"));
    }

    #[test]
    fn multi_line_switch() {
        let m = parse_ir(
            "define void @f(i32 %x) {\nentry:\n  switch i32 %x, label %d [\n    i32 0, label %a\n    i32 1, label %b\n  ]\na:\n  br label %d\nb:\n  br label %d\nd:\n  ret void\n}\n",
        )
        .unwrap();
        let sw = &m.functions[0].blocks[0].instructions[0];
        let labels: Vec<_> = sw.label_operands().collect();
        assert_eq!(labels, vec!["d", "a", "b"]);
        assert_eq!(sw.value_operands().count(), 3);
    }

    #[test]
    fn phi_operands_alternate_value_and_label() {
        let m = parse_ir("define i32 @f() {\nentry:\n  br label %loop\nloop:\n  %i = phi i32 [ 0, %entry ], [ %n, %loop ]\n  %n = add i32 %i, 1\n  %d = icmp eq i32 %n, 10\n  br i1 %d, label %out, label %loop\nout:\n  ret i32 %n\n}\n").unwrap();
        let phi = &m.functions[0].blocks[1].instructions[0];
        let kinds: Vec<_> = phi.operands.iter().map(|o| o.kind).collect();
        assert_eq!(kinds, vec![OperandKind::Constant, OperandKind::Label, OperandKind::LocalValue, OperandKind::Label]);
    }

    #[test]
    fn malformed_inputs() {
        let cases = [
            "define void @f() {\n  ret void\n",
            "}\n",
            "  ret void\n",
            "%x = add i32 1, 2\n",
            "define void @f() {\n  %a = add i32 1, 2\n}\n",
            "define void @f() {\n  br label %nowhere\n}\n",
            "define void @f() {\na:\n  ret void\na:\n  ret void\n}\n",
            "define void @f() {\n  ret void\n}\ndefine void @f() {\n  ret void\n}\n",
        ];
        for text in cases {
            assert!(matches!(parse_ir(text), Err(IrError::MalformedIr { .. })), "{text:?}");
        }
    }

    #[test]
    fn malformed_reports_line() {
        let err = parse_ir("define void @f() {\n  ret void\n}\n\n}\n").unwrap_err();
        assert_eq!(err, IrError::MalformedIr { line: 5, message: "unbalanced '}' outside a function".into() });
    }

    #[test]
    fn unknown_opcodes_are_parsed_generically() {
        let i = single("  %r = frobnicate i32 %x, 42");
        assert_eq!(i.opcode, "frobnicate");
        assert_eq!(i.type_str, "i32");
        assert_eq!(i.operands.len(), 2);
    }

    #[test]
    fn implicit_block_after_terminator() {
        // pre-LLVM-4 style: blocks introduced only by a `; <label>:N` comment
        let m = parse_ir("define void @f(i1 %c) {\n  br i1 %c, label %1, label %2\n; <label>:1\n  br label %2\n; <label>:2\n  ret void\n}\n").unwrap();
        let labels: Vec<_> = m.functions[0].blocks.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, vec!["0", "1", "2"]);
    }
}
