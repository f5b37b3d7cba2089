//! Tokenizer and operator-precedence reader for clause text.
//!
//! Grammar files are read as a sequence of clauses, each a term terminated
//! by `.`. The operator table covers the grammar arrows, context markers,
//! gaps, parallel match, CHR arrows and the usual comparison and arithmetic
//! operators.

use std::collections::HashMap;

use crate::term::{list, Term, Var};

/// A syntax error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Atom(String),
    Quoted(String),
    Var(String),
    Int(i64),
    Open,
    OpenList,
    CloseList,
    OpenCurly,
    CloseCurly,
    Close,
    Comma,
    Bar,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    /// Whether whitespace or a comment preceded the token.
    spaced: bool,
}

fn is_symbol_char(c: char) -> bool {
    "+-*/\\^<>=~:.?@#&$".contains(c)
}

fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut spaced = true;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            spaced = true;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            spaced = true;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                bump!();
            }
            if i >= chars.len() {
                return Err(SyntaxError {
                    line,
                    col,
                    message: "unterminated block comment".into(),
                });
            }
            bump!();
            bump!();
            spaced = true;
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump!();
            }
            Tok::Int(s.parse().map_err(|_| SyntaxError {
                line: tl,
                col: tc,
                message: format!("integer out of range: {s}"),
            })?)
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            if c.is_uppercase() || c == '_' {
                Tok::Var(s)
            } else {
                Tok::Atom(s)
            }
        } else if c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError {
                        line: tl,
                        col: tc,
                        message: "unterminated quoted atom".into(),
                    });
                }
                let d = chars[i];
                if d == '\\' && i + 1 < chars.len() {
                    bump!();
                    s.push(chars[i]);
                    bump!();
                } else if d == '\'' {
                    bump!();
                    if i < chars.len() && chars[i] == '\'' {
                        s.push('\'');
                        bump!();
                    } else {
                        break;
                    }
                } else {
                    s.push(d);
                    bump!();
                }
            }
            Tok::Quoted(s)
        } else {
            match c {
                '(' => {
                    bump!();
                    Tok::Open
                }
                ')' => {
                    bump!();
                    Tok::Close
                }
                '[' => {
                    bump!();
                    Tok::OpenList
                }
                ']' => {
                    bump!();
                    Tok::CloseList
                }
                '{' => {
                    bump!();
                    Tok::OpenCurly
                }
                '}' => {
                    bump!();
                    Tok::CloseCurly
                }
                ',' => {
                    bump!();
                    Tok::Comma
                }
                '|' => {
                    bump!();
                    Tok::Bar
                }
                '!' | ';' => {
                    bump!();
                    Tok::Atom(c.to_string())
                }
                _ if is_symbol_char(c) => {
                    let mut s = String::new();
                    while i < chars.len() && is_symbol_char(chars[i]) {
                        s.push(chars[i]);
                        bump!();
                    }
                    let at_end = i >= chars.len() || chars[i].is_whitespace() || chars[i] == '%';
                    if s == "." && at_end {
                        Tok::End
                    } else if s.len() > 1 && s.ends_with('.') && !s.ends_with("..") && at_end {
                        // `foo=..` is not used; a trailing `.` after a symbol run ends the clause
                        s.pop();
                        out.push(Token {
                            tok: Tok::Atom(s),
                            line: tl,
                            col: tc,
                            spaced,
                        });
                        spaced = false;
                        out.push(Token {
                            tok: Tok::End,
                            line,
                            col: col - 1,
                            spaced: false,
                        });
                        continue;
                    } else {
                        Tok::Atom(s)
                    }
                }
                _ => {
                    return Err(SyntaxError {
                        line,
                        col,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            }
        };
        out.push(Token {
            tok,
            line: tl,
            col: tc,
            spaced,
        });
        spaced = false;
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix(name: &str) -> Option<(u32, Assoc)> {
    use Assoc::*;
    Some(match name {
        "where" => (1250, Xfx),
        "gpragma" | "pragma" => (1230, Xfx),
        "@@" => (1220, Xfx),
        "::>" | "<:>" | "==>" | "<=>" => (1200, Xfx),
        "|" => (1150, Xfx),
        ";" => (1100, Xfy),
        "\\" => (1100, Xfx),
        "/-" => (1060, Xfx),
        "-\\" => (1050, Xfx),
        "$$" => (1010, Xfy),
        "," => (1000, Xfy),
        "=" | "\\=" | "==" | "\\==" | "=<" | "<" | ">" | ">=" | "=:=" | "=\\=" | "is" => {
            (700, Xfx)
        }
        "+" | "-" => (500, Yfx),
        "*" | "/" => (400, Yfx),
        "^" => (200, Xfy),
        "..." => (100, Xfx),
        _ => return None,
    })
}

fn prefix(name: &str) -> Option<(u32, bool)> {
    // (priority, operand may have equal priority)
    Some(match name {
        "handler" | "grammar_symbols" | "constraints" | "abducibles" | "gpragma" => (1150, false),
        "\\+" => (900, true),
        "!" | "=+" | "=*" | "=-" | "+" | "-" | "*" => (200, true),
        _ => return None,
    })
}

/// One clause read from source text.
#[derive(Clone, Debug)]
pub struct Clause {
    pub term: Term,
    pub line: usize,
    pub col: usize,
    /// Named variables of the clause.
    pub vars: HashMap<String, Var>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: HashMap<String, Var>,
    eof_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        let (line, col) = self
            .peek()
            .map(|t| (t.line, t.col))
            .unwrap_or((self.eof_line, 1));
        Err(SyntaxError {
            line,
            col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    /// Whether the token at `pos` cannot start a term.
    fn terminates(&self, pos: usize) -> bool {
        match self.toks.get(pos).map(|t| &t.tok) {
            None => true,
            Some(Tok::Close | Tok::CloseList | Tok::CloseCurly | Tok::Comma | Tok::Bar | Tok::End) => {
                true
            }
            Some(Tok::Atom(a)) => infix(a).is_some() && prefix(a).is_none() && {
                // an infix operator followed by an opening paren is a plain functor
                !matches!(self.toks.get(pos + 1), Some(t) if t.tok == Tok::Open && !t.spaced)
            },
            _ => false,
        }
    }

    fn parse(&mut self, max: u32) -> Result<(Term, u32), SyntaxError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        while let Some(tok) = self.peek() {
            let name = match &tok.tok {
                Tok::Atom(a) => a.clone(),
                Tok::Comma => ",".to_string(),
                Tok::Bar => "|".to_string(),
                _ => break,
            };
            let Some((prec, assoc)) = infix(&name) else { break };
            if prec > max {
                break;
            }
            let left_max = if assoc == Assoc::Yfx { prec } else { prec - 1 };
            if left_prec > left_max {
                break;
            }
            let right_max = if assoc == Assoc::Xfy { prec } else { prec - 1 };
            self.pos += 1;
            let (right, _) = self.parse(right_max)?;
            left = Term::compound(&name, vec![left, right]);
            left_prec = prec;
        }
        Ok((left, left_prec))
    }

    fn arguments(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut args = vec![self.parse(999)?.0];
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Comma) => {
                    self.pos += 1;
                    args.push(self.parse(999)?.0);
                }
                Some(Tok::Close) => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.err("expected ',' or ')' in argument list"),
            }
        }
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), SyntaxError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        match tok.tok {
            Tok::Int(i) => Ok((Term::int(i), 0)),
            Tok::Var(name) => {
                if name == "_" {
                    return Ok((Term::Var(Var::fresh("_")), 0));
                }
                let v = self
                    .vars
                    .entry(name.clone())
                    .or_insert_with(|| Var::fresh(&name))
                    .clone();
                Ok((Term::Var(v), 0))
            }
            Tok::Open => {
                let (t, _) = self.parse(1200)?;
                self.expect(Tok::Close, "')'")?;
                Ok((t, 0))
            }
            Tok::OpenList => {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::CloseList)) {
                    self.pos += 1;
                    return Ok((Term::atom("[]"), 0));
                }
                let mut items = vec![self.parse(999)?.0];
                let mut tail = None;
                loop {
                    match self.peek().map(|t| &t.tok) {
                        Some(Tok::Comma) => {
                            self.pos += 1;
                            items.push(self.parse(999)?.0);
                        }
                        Some(Tok::Bar) => {
                            self.pos += 1;
                            tail = Some(self.parse(999)?.0);
                            self.expect(Tok::CloseList, "']'")?;
                            break;
                        }
                        Some(Tok::CloseList) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return self.err("expected ',' or ']' in list"),
                    }
                }
                let mut t = list(items);
                if let Some(tail) = tail {
                    t = replace_list_tail(t, tail);
                }
                Ok((t, 0))
            }
            Tok::OpenCurly => {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::CloseCurly)) {
                    self.pos += 1;
                    return Ok((Term::atom("{}"), 0));
                }
                let (t, _) = self.parse(1200)?;
                self.expect(Tok::CloseCurly, "'}'")?;
                Ok((Term::compound("{}", vec![t]), 0))
            }
            Tok::Quoted(name) => self.after_atom(name, true, max),
            Tok::Atom(name) => self.after_atom(name, false, max),
            Tok::Comma => self.err_at(&tok, "unexpected ','"),
            Tok::Bar => self.err_at(&tok, "unexpected '|'"),
            Tok::End => self.err_at(&tok, "unexpected end of clause"),
            Tok::Close | Tok::CloseList | Tok::CloseCurly => {
                self.err_at(&tok, "unexpected closing bracket")
            }
        }
    }

    fn err_at<T>(&self, tok: &Token, message: &str) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            line: tok.line,
            col: tok.col,
            message: message.into(),
        })
    }

    fn after_atom(&mut self, name: String, quoted: bool, max: u32) -> Result<(Term, u32), SyntaxError> {
        if let Some(t) = self.peek() {
            if t.tok == Tok::Open && !t.spaced {
                self.pos += 1;
                let args = self.arguments()?;
                return Ok((Term::compound(&name, args), 0));
            }
        }
        if !quoted {
            if let Some((prec, equal_ok)) = prefix(&name) {
                if name == "-" {
                    if let Some(Token {
                        tok: Tok::Int(i),
                        spaced: false,
                        ..
                    }) = self.peek()
                    {
                        let v = -*i;
                        self.pos += 1;
                        return Ok((Term::int(v), 0));
                    }
                }
                if !self.terminates(self.pos) {
                    let prec = prec.min(max.max(1));
                    let arg_max = if equal_ok { prec } else { prec - 1 };
                    let (arg, _) = self.parse(arg_max)?;
                    return Ok((Term::compound(&name, vec![arg]), prec));
                }
            }
        }
        Ok((Term::atom(&name), 0))
    }
}

fn replace_list_tail(t: Term, tail: Term) -> Term {
    match &t {
        Term::Compound(name, args) if name.as_ref() == "[|]" => Term::compound(
            "[|]",
            vec![args[0].clone(), replace_list_tail(args[1].clone(), tail)],
        ),
        _ => tail,
    }
}

/// Reads every clause of `text`.
pub fn read_clauses(text: &str) -> Result<Vec<Clause>, SyntaxError> {
    let toks = tokenize(text)?;
    let eof_line = text.lines().count().max(1);
    let mut parser = Parser {
        toks,
        pos: 0,
        vars: HashMap::new(),
        eof_line,
    };
    let mut out = Vec::new();
    while parser.pos < parser.toks.len() {
        parser.vars.clear();
        let start = parser.toks[parser.pos].clone();
        let (term, _) = parser.parse(1250)?;
        match parser.peek() {
            Some(t) if t.tok == Tok::End => parser.pos += 1,
            _ => return parser.err("operator expected or missing '.' at end of clause"),
        }
        out.push(Clause {
            term,
            line: start.line,
            col: start.col,
            vars: std::mem::take(&mut parser.vars),
        });
    }
    Ok(out)
}

/// Reads a single term (no terminating `.` required).
pub fn read_term(text: &str) -> Result<Term, SyntaxError> {
    let mut toks = tokenize(text)?;
    if !matches!(toks.last().map(|t| &t.tok), Some(Tok::End)) {
        toks.push(Token {
            tok: Tok::End,
            line: 1,
            col: text.len() + 1,
            spaced: true,
        });
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        vars: HashMap::new(),
        eof_line: 1,
    };
    let (t, _) = parser.parse(1250)?;
    match parser.peek() {
        Some(end) if end.tok == Tok::End && parser.pos + 1 == parser.toks.len() => Ok(t),
        _ => parser.err("unexpected trailing input"),
    }
}

/// Flattens a right-nested operator chain such as `(a, b, c)`.
pub fn flatten(term: &Term, op: &str) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = term;
    loop {
        match cur {
            Term::Compound(name, args) if name.as_ref() == op && args.len() == 2 => {
                out.extend(flatten(&args[0], op));
                cur = &args[1];
            }
            other => {
                out.push(other.clone());
                break;
            }
        }
    }
    out
}

/// Elements of a proper list term, or `None`.
pub fn list_items(term: &Term) -> Option<Vec<Term>> {
    let mut out = Vec::new();
    let mut cur = term;
    loop {
        match cur {
            Term::Atom(a) if a.as_ref() == "[]" => return Some(out),
            Term::Compound(name, args) if name.as_ref() == "[|]" && args.len() == 2 => {
                out.push(args[0].clone());
                cur = &args[1];
            }
            _ => return None,
        }
    }
}
