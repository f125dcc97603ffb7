//! Lexer and parser for `.alu` sources.
//!
//! The parser builds a surface tree (identifiers unresolved, `let` bindings
//! still present); validation lowers it to [`super::AluProgram`].

use super::validate::{self, ValidationError};
use super::{AluKind, AluProgram};
use crate::Word;

/// A syntax error with its position in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
    pub expected: String,
    pub found: String,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}, col {}: expected {}, found {}",
            self.line, self.col, self.expected, self.found
        )
    }
}

impl std::error::Error for SyntaxError {}

/// Any error from parsing or validating an ALU source.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AluError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("invalid program: {0}")]
    Validation(#[from] ValidationError),
}

/// Parses and validates one ALU program.
///
/// `name` is the name the caller knows the program by (the file stem when
/// loading from disk); it must match the name declared in the header.
pub fn parse_alu(source: &str, name: &str) -> Result<AluProgram, AluError> {
    let tokens = lex(source)?;
    let surface = Parser { tokens, pos: 0, source }.program()?;
    Ok(validate::lower(surface, name)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(Word),
    Stateful,
    Stateless,
    Alu,
    State,
    If,
    Else,
    Return,
    Let,
    ConstHole,
    Opt,
    Mux,
    Not,
    ArithOp,
    RelOp,
    LogicOp,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Equals,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Int(v) => format!("integer `{}`", v),
            Tok::Stateful => "`stateful`".into(),
            Tok::Stateless => "`stateless`".into(),
            Tok::Alu => "`alu`".into(),
            Tok::State => "`state`".into(),
            Tok::If => "`if`".into(),
            Tok::Else => "`else`".into(),
            Tok::Return => "`return`".into(),
            Tok::Let => "`let`".into(),
            Tok::ConstHole => "`C`".into(),
            Tok::Opt => "`Opt`".into(),
            Tok::Mux => "`Mux`".into(),
            Tok::Not => "`Not`".into(),
            Tok::ArithOp => "`arith_op`".into(),
            Tok::RelOp => "`rel_op`".into(),
            Tok::LogicOp => "`logic_op`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in source.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn syntax_error(source: &str, offset: usize, expected: &str, found: &str) -> SyntaxError {
    let (line, col) = line_col(source, offset);
    SyntaxError {
        offset,
        line,
        col,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn lex(source: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => { i += 1; Tok::LParen }
            ')' => { i += 1; Tok::RParen }
            '{' => { i += 1; Tok::LBrace }
            '}' => { i += 1; Tok::RBrace }
            ',' => { i += 1; Tok::Comma }
            ':' => { i += 1; Tok::Colon }
            '=' => { i += 1; Tok::Equals }
            '-' | '0'..='9' => {
                i += 1;
                if c == '-' && (i >= bytes.len() || !bytes[i].is_ascii_digit()) {
                    return Err(syntax_error(source, start, "a digit after `-`", "`-`"));
                }
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &source[start..i];
                let value: i64 = text
                    .parse()
                    .map_err(|_| syntax_error(source, start, "a 32-bit integer", text))?;
                if value < Word::MIN as i64 || value > Word::MAX as i64 {
                    return Err(syntax_error(source, start, "a 32-bit integer", text));
                }
                Tok::Int(value as Word)
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                i += 1;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                keyword_or_ident(&source[start..i])
            }
            _ => {
                return Err(syntax_error(
                    source,
                    start,
                    "a token",
                    &format!("`{}`", c),
                ))
            }
        };
        out.push(Spanned { tok, offset: start });
    }
    out.push(Spanned { tok: Tok::Eof, offset: bytes.len() });
    Ok(out)
}

fn keyword_or_ident(text: &str) -> Tok {
    match text {
        "stateful" => Tok::Stateful,
        "stateless" => Tok::Stateless,
        "alu" => Tok::Alu,
        "state" => Tok::State,
        "if" => Tok::If,
        "else" => Tok::Else,
        "return" => Tok::Return,
        "let" => Tok::Let,
        "C" => Tok::ConstHole,
        "Opt" => Tok::Opt,
        "Mux" => Tok::Mux,
        "Not" => Tok::Not,
        "arith_op" => Tok::ArithOp,
        "rel_op" => Tok::RelOp,
        "logic_op" => Tok::LogicOp,
        _ => Tok::Ident(text.to_string()),
    }
}

/// Surface statement: identifiers unresolved, `let` still present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SStmt {
    If {
        cond: SExpr,
        then_body: Vec<SStmt>,
        else_body: Vec<SStmt>,
    },
    Let { name: String, value: SExpr, offset: usize },
    Assign { target: String, value: SExpr, offset: usize },
    Return { value: SExpr },
}

/// Surface expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SExpr {
    Ident(String, usize),
    Int(Word),
    ConstHole,
    Opt(Box<SExpr>),
    Mux(Vec<SExpr>),
    Not(Box<SExpr>),
    Arith(Box<SExpr>, Box<SExpr>),
    Rel(Box<SExpr>, Box<SExpr>),
    Logic(Box<SExpr>, Box<SExpr>),
}

#[derive(Debug)]
pub(crate) struct SurfaceProgram {
    pub name: String,
    pub kind: AluKind,
    pub state_vars: Vec<(String, usize)>,
    pub packet_operands: Vec<(String, usize)>,
    pub body: Vec<SStmt>,
}

struct Parser<'s> {
    tokens: Vec<Spanned>,
    pos: usize,
    source: &'s str,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> SyntaxError {
        syntax_error(
            self.source,
            self.offset(),
            expected,
            &self.peek().describe(),
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Spanned, SyntaxError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize), SyntaxError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok((name, offset))
            }
            _ => Err(self.error(expected)),
        }
    }

    fn program(mut self) -> Result<SurfaceProgram, SyntaxError> {
        let kind = match self.peek() {
            Tok::Stateful => { self.advance(); AluKind::Stateful }
            Tok::Stateless => { self.advance(); AluKind::Stateless }
            _ => return Err(self.error("`stateful` or `stateless`")),
        };
        self.expect(Tok::Alu, "`alu`")?;
        let (name, _) = self.ident("the ALU name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut state_vars = Vec::new();
        let mut packet_operands = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                if *self.peek() == Tok::State {
                    self.advance();
                    state_vars.push(self.ident("a state variable name")?);
                } else {
                    packet_operands.push(self.ident("a declaration")?);
                }
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Colon, "`:`")?;
        let mut body = Vec::new();
        while *self.peek() != Tok::Eof {
            body.push(self.stmt()?);
        }
        Ok(SurfaceProgram { name, kind, state_vars, packet_operands, body })
    }

    fn stmt(&mut self) -> Result<SStmt, SyntaxError> {
        match self.peek().clone() {
            Tok::If => self.if_stmt(),
            Tok::Return => {
                self.advance();
                Ok(SStmt::Return { value: self.expr()? })
            }
            Tok::Let => {
                self.advance();
                let (name, offset) = self.ident("a local name")?;
                self.expect(Tok::Equals, "`=`")?;
                Ok(SStmt::Let { name, value: self.expr()?, offset })
            }
            Tok::Ident(_) => {
                let (target, offset) = self.ident("a statement")?;
                self.expect(Tok::Equals, "`=`")?;
                Ok(SStmt::Assign { target, value: self.expr()?, offset })
            }
            _ => Err(self.error("a statement")),
        }
    }

    fn if_stmt(&mut self) -> Result<SStmt, SyntaxError> {
        self.expect(Tok::If, "`if`")?;
        let cond = self.expr()?;
        let then_body = self.block()?;
        let mut else_body = Vec::new();
        if *self.peek() == Tok::Else {
            self.advance();
            if *self.peek() == Tok::If {
                else_body.push(self.if_stmt()?);
            } else {
                else_body = self.block()?;
            }
        }
        Ok(SStmt::If { cond, then_body, else_body })
    }

    fn block(&mut self) -> Result<Vec<SStmt>, SyntaxError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn expr(&mut self) -> Result<SExpr, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(SExpr::Int(v))
            }
            Tok::Ident(_) => {
                let (name, offset) = self.ident("an expression")?;
                Ok(SExpr::Ident(name, offset))
            }
            Tok::ConstHole => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(SExpr::ConstHole)
            }
            Tok::Opt => {
                self.advance();
                Ok(SExpr::Opt(Box::new(self.unary_args()?)))
            }
            Tok::Not => {
                self.advance();
                Ok(SExpr::Not(Box::new(self.unary_args()?)))
            }
            Tok::Mux => {
                self.advance();
                let offset = self.offset();
                self.expect(Tok::LParen, "`(`")?;
                let mut arms = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.advance();
                    arms.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if arms.len() < 2 {
                    return Err(syntax_error(
                        self.source,
                        offset,
                        "at least 2 Mux arguments",
                        "1",
                    ));
                }
                Ok(SExpr::Mux(arms))
            }
            Tok::ArithOp => {
                self.advance();
                let (l, r) = self.binary_args()?;
                Ok(SExpr::Arith(Box::new(l), Box::new(r)))
            }
            Tok::RelOp => {
                self.advance();
                let (l, r) = self.binary_args()?;
                Ok(SExpr::Rel(Box::new(l), Box::new(r)))
            }
            Tok::LogicOp => {
                self.advance();
                let (l, r) = self.binary_args()?;
                Ok(SExpr::Logic(Box::new(l), Box::new(r)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn unary_args(&mut self) -> Result<SExpr, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let arg = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(arg)
    }

    fn binary_args(&mut self) -> Result<(SExpr, SExpr), SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let l = self.expr()?;
        self.expect(Tok::Comma, "`,`")?;
        let r = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok((l, r))
    }
}
