//! Tokenizer for textual LLVM IR.
//!
//! Comments, metadata references (`!dbg !7`, `!{...}`, `!DILocation(...)`)
//! and attribute-group references (`#0`) never reach the parser: they are
//! dropped here.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// `%name`, sigil included.
    Local(String),
    /// `@name`, sigil included.
    Global(String),
    /// Bare words: keywords, type names, label names.
    Ident(String),
    Int(String),
    Float(String),
    /// String literal including its quotes, `c"..."` keeps the prefix.
    Str(String),
    Punct(char),
    Ellipsis,
}

impl Tok {
    pub(crate) fn text(&self) -> &str {
        match self {
            Tok::Local(s) | Tok::Global(s) | Tok::Ident(s) | Tok::Int(s) | Tok::Float(s) | Tok::Str(s) => s,
            Tok::Punct(c) => match c {
                ',' => ",",
                '(' => "(",
                ')' => ")",
                '[' => "[",
                ']' => "]",
                '{' => "{",
                '}' => "}",
                '<' => "<",
                '>' => ">",
                '*' => "*",
                '=' => "=",
                ':' => ":",
                _ => "?",
            },
            Tok::Ellipsis => "...",
        }
    }

    pub(crate) fn is_punct(&self, c: char) -> bool {
        matches!(self, Tok::Punct(p) if *p == c)
    }

    pub(crate) fn is_ident(&self, word: &str) -> bool {
        matches!(self, Tok::Ident(w) if w == word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError {
    pub column: usize,
    pub message: String,
}

/// Removes a trailing `;` comment, ignoring semicolons inside string literals.
pub(crate) fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            ';' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c, '$' | '.' | '_')
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '$' | '.' | '_' | '-')
}

/// Tokenizes one (comment-free) line.
pub(crate) fn lex_line(line: &str) -> Result<Vec<Tok>, LexError> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let n = chars.len();

    let read_quoted = |start: usize| -> Result<usize, LexError> {
        // chars[start] == '"'; returns index one past the closing quote
        let mut j = start + 1;
        while j < n && chars[j] != '"' {
            j += 1;
        }
        if j >= n {
            return Err(LexError { column: start + 1, message: "unterminated string literal".into() });
        }
        Ok(j + 1)
    };

    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '%' | '@' => {
                let start = i;
                i += 1;
                if i < n && chars[i] == '"' {
                    i = read_quoted(i)?;
                } else {
                    while i < n && is_ident_char(chars[i]) {
                        i += 1;
                    }
                }
                if i == start + 1 {
                    return Err(LexError { column: start + 1, message: format!("empty identifier after '{c}'") });
                }
                let text: String = chars[start..i].iter().collect();
                toks.push(if c == '%' { Tok::Local(text) } else { Tok::Global(text) });
            }
            '!' => {
                // metadata: name or number, optional string, optional (...) / {...} payload
                i += 1;
                let name_start = i;
                while i < n && (is_ident_char(chars[i]) || chars[i] == '\\') {
                    i += 1;
                }
                if i < n && chars[i] == '"' {
                    i = read_quoted(i)?;
                }
                let had_name = i > name_start;
                let mut j = i;
                while j < n && chars[j].is_whitespace() {
                    j += 1;
                }
                if j < n && (chars[j] == '(' || (!had_name && chars[j] == '{')) {
                    i = skip_balanced(&chars, j)?;
                }
            }
            '#' => {
                i += 1;
                while i < n && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            '"' => {
                let start = i;
                i = read_quoted(i)?;
                toks.push(Tok::Str(chars[start..i].iter().collect()));
            }
            ',' | '(' | ')' | '[' | ']' | '{' | '}' | '<' | '>' | '*' | '=' | ':' => {
                toks.push(Tok::Punct(c));
                i += 1;
            }
            '.' if i + 2 < n && chars[i + 1] == '.' && chars[i + 2] == '.' => {
                toks.push(Tok::Ellipsis);
                i += 3;
            }
            _ if c.is_ascii_digit() || (c == '-' && i + 1 < n && chars[i + 1].is_ascii_digit()) => {
                let start = i;
                i += 1;
                if c == '0' && i < n && chars[i] == 'x' {
                    i += 1;
                    while i < n && chars[i].is_ascii_alphanumeric() {
                        i += 1;
                    }
                    toks.push(Tok::Float(chars[start..i].iter().collect()));
                    continue;
                }
                while i < n && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_float = false;
                if i < n && chars[i] == '.' {
                    is_float = true;
                    i += 1;
                    while i < n && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < n && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < n && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < n && chars[j].is_ascii_digit() {
                        is_float = true;
                        i = j;
                        while i < n && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                toks.push(if is_float { Tok::Float(text) } else { Tok::Int(text) });
            }
            _ if is_ident_start(c) => {
                let start = i;
                while i < n && is_ident_char(chars[i]) {
                    i += 1;
                }
                // c"..." string constants
                if i == start + 1 && c == 'c' && i < n && chars[i] == '"' {
                    i = read_quoted(i)?;
                    toks.push(Tok::Str(chars[start..i].iter().collect()));
                } else {
                    toks.push(Tok::Ident(chars[start..i].iter().collect()));
                }
            }
            _ => {
                return Err(LexError { column: i + 1, message: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(toks)
}

/// `chars[open]` is an opening bracket; returns the index after its match.
fn skip_balanced(chars: &[char], open: usize) -> Result<usize, LexError> {
    let mut depth = 0usize;
    let mut i = open;
    let mut in_str = false;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            if c == '"' {
                in_str = false;
            }
        } else {
            match c {
                '"' => in_str = true,
                '(' | '{' | '[' => depth += 1,
                ')' | '}' | ']' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i + 1);
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
    Err(LexError { column: open + 1, message: "unbalanced metadata payload".into() })
}

/// Joins tokens back into canonical text: single spaces, none before
/// closing punctuation or commas, none after opening brackets.
pub(crate) fn join_tokens(toks: &[Tok]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Tok> = None;
    for t in toks {
        if let Some(p) = prev {
            let call_like = t.is_punct('(')
                && (matches!(p, Tok::Global(_))
                    || matches!(p, Tok::Ident(w) if matches!(w.as_str(), "addrspace" | "target" | "syncscope" | "blockaddress")));
            let no_space = call_like
                || matches!(t, Tok::Punct(',' | ')' | ']' | '*' | '>' | ':'))
                || matches!(p, Tok::Punct('(' | '[' | '<'));
            if !no_space {
                out.push(' ');
            }
        }
        out.push_str(t.text());
        prev = Some(t);
    }
    out
}

/// Net bracket depth change of a token list, counting `()`, `[]` and `{}`.
pub(crate) fn depth_delta(toks: &[Tok]) -> i64 {
    toks.iter()
        .map(|t| match t {
            Tok::Punct('(' | '[' | '{') => 1,
            Tok::Punct(')' | ']' | '}') => -1,
            _ => 0,
        })
        .sum()
}
