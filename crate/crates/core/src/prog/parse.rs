//! Hand-written lexer and recursive-descent parser for `.tpl` sources.

use std::collections::BTreeSet;

use super::{unroll, BinOp, Expr, Instruction, Process, ProgError, Program, Transaction, DEFAULT_UNROLL};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Semi,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Assign,
    DotDot,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Semi => ";",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Assign => ":=",
            Tok::DotDot => "..",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ProgError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let peek = chars.get(i + 1).copied();
        let err = |msg: String| ProgError::Syntax { line: l0, col: c0, msg };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && peek == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two = |a: char, b: char| c == a && peek == Some(b);
        let (tok, width) = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            (Tok::Ident(chars[start..j].iter().collect()), j - start)
        } else if c.is_ascii_digit() {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            let n = text.parse::<u64>().map_err(|_| err(format!("integer literal `{text}` out of range")))?;
            (Tok::Int(n), j - start)
        } else if two(':', '=') {
            (Tok::Assign, 2)
        } else if two('.', '.') {
            (Tok::DotDot, 2)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::NotEq, 2)
        } else if two('<', '=') {
            (Tok::Le, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else {
            let t = match c {
                ';' => Tok::Semi,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '<' => Tok::Lt,
                '!' => Tok::Bang,
                other => return Err(err(format!("unexpected character `{other}`"))),
            };
            (t, 1)
        };
        out.push(Spanned { tok, line: l0, col: c0 });
        i += width;
        col += width;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: &[&str] = &["var", "process", "transaction", "assert", "assume", "if", "else", "for", "in"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    vars: Vec<String>,
    /// Registers assigned so far in the current process.
    regs: BTreeSet<String>,
    /// Loop indices in scope, innermost last.
    indices: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ProgError> {
        let (line, col) = self.here();
        Err(ProgError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ProgError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{}`, found {}", want.text(), self.peek().describe()))
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ProgError> {
        if self.keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.peek().describe()))
        }
    }

    fn ident(&mut self) -> Result<String, ProgError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn program(&mut self) -> Result<Program, ProgError> {
        while self.keyword("var") {
            self.bump();
            let (line, col) = self.here();
            let name = self.ident()?;
            if self.vars.contains(&name) {
                return Err(ProgError::DuplicateVariable { line, col, name });
            }
            self.vars.push(name);
            self.expect(Tok::Semi)?;
        }
        let mut processes = Vec::new();
        while self.keyword("process") {
            processes.push(self.process()?);
        }
        if *self.peek() != Tok::Eof {
            return self.error(format!("expected `var` or `process`, found {}", self.peek().describe()));
        }
        if processes.is_empty() {
            return Err(ProgError::NoProcesses);
        }
        Ok(Program { shared_vars: std::mem::take(&mut self.vars), processes })
    }

    fn process(&mut self) -> Result<Process, ProgError> {
        self.expect_keyword("process")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.regs.clear();
        let mut transactions = Vec::new();
        while self.keyword("transaction") {
            self.bump();
            let tname = match self.peek() {
                Tok::Ident(_) => Some(self.ident()?),
                _ => None,
            };
            self.expect(Tok::LBrace)?;
            let body = self.block_tail()?;
            transactions.push(Transaction { name: tname, body });
        }
        self.expect(Tok::RBrace)?;
        if transactions.is_empty() {
            return Err(ProgError::EmptyProcess { name });
        }
        Ok(Process { name, transactions })
    }

    /// Statements up to and including the closing brace.
    fn block_tail(&mut self) -> Result<Vec<Instruction>, ProgError> {
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.error("unexpected end of input, expected `}`");
            }
            body.push(self.stmt()?);
        }
        self.bump();
        Ok(body)
    }

    fn block(&mut self) -> Result<Vec<Instruction>, ProgError> {
        self.expect(Tok::LBrace)?;
        self.block_tail()
    }

    fn stmt(&mut self) -> Result<Instruction, ProgError> {
        if self.keyword("assert") || self.keyword("assume") {
            let is_assert = self.keyword("assert");
            self.bump();
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            return Ok(if is_assert { Instruction::Assert(e) } else { Instruction::Assume(e) });
        }
        if self.keyword("if") {
            self.bump();
            self.expect(Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(Tok::RParen)?;
            let then_branch = self.block()?;
            let else_branch = if self.keyword("else") {
                self.bump();
                self.block()?
            } else {
                Vec::new()
            };
            return Ok(Instruction::If { cond, then_branch, else_branch });
        }
        if self.keyword("for") {
            self.bump();
            let index = self.ident()?;
            self.expect_keyword("in")?;
            let start = self.additive()?;
            self.expect(Tok::DotDot)?;
            let end = self.additive()?;
            self.indices.push(index.clone());
            let body = self.block();
            self.indices.pop();
            return Ok(Instruction::Loop { index, start, end, body: body? });
        }
        let (line, col) = self.here();
        let target = self.ident()?;
        self.expect(Tok::Assign)?;
        if let Some(var) = self.vars.iter().position(|v| *v == target) {
            let expr = self.expr()?;
            self.expect(Tok::Semi)?;
            return Ok(Instruction::SharedWrite { var, expr });
        }
        if self.indices.contains(&target) {
            let _ = (line, col);
            return Err(ProgError::LoopIndexAssigned { index: target });
        }
        if let (Tok::Ident(name), Tok::Semi) = (self.peek().clone(), self.peek_at(1).clone()) {
            if let Some(var) = self.vars.iter().position(|v| *v == name) {
                self.bump();
                self.bump();
                self.regs.insert(target.clone());
                return Ok(Instruction::SharedRead { reg: target, var });
            }
        }
        let expr = self.expr()?;
        self.expect(Tok::Semi)?;
        self.regs.insert(target.clone());
        Ok(Instruction::RegisterAssign { reg: target, expr })
    }

    fn expr(&mut self) -> Result<Expr, ProgError> {
        self.binary_level(0)
    }

    fn additive(&mut self) -> Result<Expr, ProgError> {
        self.binary_level(4)
    }

    fn binary_level(&mut self, level: usize) -> Result<Expr, ProgError> {
        const LEVELS: &[&[(Tok, BinOp)]] = &[
            &[(Tok::OrOr, BinOp::Or)],
            &[(Tok::AndAnd, BinOp::And)],
            &[(Tok::EqEq, BinOp::Eq), (Tok::NotEq, BinOp::Ne)],
            &[(Tok::Lt, BinOp::Lt), (Tok::Le, BinOp::Le)],
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            &[(Tok::Star, BinOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let Some(op) = LEVELS[level].iter().find(|(t, _)| t == self.peek()).map(|(_, op)| *op) else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ProgError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::not(self.unary()?))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(n) if n <= i64::MAX as u64 + 1 => {
                        self.bump();
                        Ok(Expr::Const((n as i64).wrapping_neg()))
                    }
                    Tok::Int(n) => self.error(format!("integer literal `-{n}` out of range")),
                    other => self.error(format!("expected integer after `-`, found {}", other.describe())),
                }
            }
            Tok::Int(n) => {
                if n > i64::MAX as u64 {
                    return self.error(format!("integer literal `{n}` out of range"));
                }
                self.bump();
                Ok(Expr::Const(n as i64))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                let (line, col) = self.here();
                self.bump();
                if self.indices.contains(&name) || self.regs.contains(&name) {
                    Ok(Expr::Reg(name))
                } else if self.vars.contains(&name) {
                    Err(ProgError::SharedInExpression { line, col, name })
                } else {
                    Err(ProgError::UndeclaredVariable { line, col, name })
                }
            }
            other => self.error(format!("expected expression, found {}", other.describe())),
        }
    }
}

/// Parses a program without expanding loops.
pub fn parse_raw(text: &str) -> Result<Program, ProgError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, vars: Vec::new(), regs: BTreeSet::new(), indices: Vec::new() };
    p.program()
}

/// Parses and unrolls loops with [`DEFAULT_UNROLL`].
pub fn parse_program(text: &str) -> Result<Program, ProgError> {
    parse_program_with_bound(text, DEFAULT_UNROLL)
}

pub fn parse_program_with_bound(text: &str, bound: usize) -> Result<Program, ProgError> {
    unroll(&parse_raw(text)?, bound)
}
