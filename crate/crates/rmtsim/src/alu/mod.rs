//! The ALU capability language.
//!
//! An `.alu` file describes everything one ALU can be configured to do. The
//! body is a loop-free statement list over packet operands and (for stateful
//! ALUs) persistent state variables. Configurable constructs leave holes:
//!
//! * `C()` — a 32-bit immediate,
//! * `arith_op(a, b)` / `rel_op(a, b)` / `logic_op(a, b)` — an opcode choice,
//! * `Opt(e)` — a gate passing `e` or the constant 0,
//! * `Mux(e1, ..., eN)` — an N-to-1 selector.
//!
//! Validation assigns every hole a [`HoleSlot`] in pre-order of the body;
//! [`AluProgram::slot_names`] turns those into the wire names a machine-code
//! listing uses. Evaluation ([`eval_alu`]) runs a body against concrete hole
//! bindings, operands, and state.

mod compile;
mod eval;
mod parse;
mod validate;

pub use compile::CompiledAlu;
pub use eval::{eval_alu, EvalError};
pub use parse::{parse_alu, AluError, SyntaxError};
pub use validate::ValidationError;

pub(crate) use compile::compile_alu;
pub(crate) use eval::eval_bound;

use crate::Word;
use std::path::Path;
use std::sync::Arc;

/// Arithmetic opcodes selectable by `arith_op`: 0 is add, 1 is subtract.
pub const ARITH_ARITY: u32 = 2;
/// Relational opcodes selectable by `rel_op`: 0 is `!=`, 1 is `<`, 2 is `>`,
/// 3 is `==`. Results are 1 or 0; comparisons are signed.
pub const REL_ARITY: u32 = 4;
/// Logical opcodes selectable by `logic_op`: 0 is AND, 1 is OR. Any nonzero
/// operand counts as true; results are 1 or 0.
pub const LOGIC_ARITY: u32 = 2;

/// Whether an ALU carries persistent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluKind {
    Stateful,
    Stateless,
}

/// A validated ALU program.
///
/// `body` is the lowered statement list: local `let` bindings have been
/// substituted away, identifiers are resolved to operand/state indices, and
/// every configurable construct carries an index into `hole_slots`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AluProgram {
    pub name: String,
    pub kind: AluKind,
    pub state_vars: Vec<String>,
    pub packet_operands: Vec<String>,
    pub body: Vec<Stmt>,
    pub hole_slots: Vec<HoleSlot>,
}

/// One statement of a validated body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    /// Assignment to the state variable at `index`.
    Assign {
        target: String,
        index: usize,
        value: Expr,
    },
    Return { value: Expr },
}

/// One expression of a validated body.
///
/// `slot` fields index into [`AluProgram::hole_slots`]. The `Bin` variant
/// never comes out of the parser; it is produced by specialization once an
/// opcode hole has been bound to a concrete operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Operand { name: String, index: usize },
    State { name: String, index: usize },
    Int(Word),
    Const { slot: usize },
    Opt { slot: usize, arg: Box<Expr> },
    Mux { slot: usize, arms: Vec<Expr> },
    Arith { slot: usize, lhs: Box<Expr>, rhs: Box<Expr> },
    Rel { slot: usize, lhs: Box<Expr>, rhs: Box<Expr> },
    Logic { slot: usize, lhs: Box<Expr>, rhs: Box<Expr> },
    Not(Box<Expr>),
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

/// Concrete binary operations produced by specialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Ne,
    Lt,
    Gt,
    Eq,
    And,
    Or,
}

impl BinOp {
    pub(crate) fn apply(self, l: Word, r: Word) -> Word {
        match self {
            BinOp::Add => l.wrapping_add(r),
            BinOp::Sub => l.wrapping_sub(r),
            BinOp::Ne => (l != r) as Word,
            BinOp::Lt => (l < r) as Word,
            BinOp::Gt => (l > r) as Word,
            BinOp::Eq => (l == r) as Word,
            BinOp::And => (l != 0 && r != 0) as Word,
            BinOp::Or => (l != 0 || r != 0) as Word,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Eq => "==",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// The kind of a configurable hole.
///
/// Payloads carry the choice arity: `Opcode(k)` admits values `0..k`,
/// `MuxCtrl(n)` admits `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoleKind {
    Immediate,
    Opcode(u32),
    OptCtrl,
    MuxCtrl(u32),
}

impl HoleKind {
    /// Wire-name category: `immediate`, `opcode`, `optctrl`, or `muxctrl`.
    pub fn category(&self) -> &'static str {
        match self {
            HoleKind::Immediate => "immediate",
            HoleKind::Opcode(_) => "opcode",
            HoleKind::OptCtrl => "optctrl",
            HoleKind::MuxCtrl(_) => "muxctrl",
        }
    }
}

/// One machine-code hole of an ALU body.
///
/// Ordinals count occurrences of the same construct kind (including its
/// arity) in pre-order, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoleSlot {
    pub kind: HoleKind,
    pub ordinal: u32,
}

impl HoleSlot {
    /// Admissible values as a half-open range `[lo, hi)`.
    pub fn valid_range(&self) -> (u64, u64) {
        match self.kind {
            HoleKind::Immediate => (0, 1 << 32),
            HoleKind::Opcode(k) => (0, k as u64),
            HoleKind::OptCtrl => (0, 2),
            HoleKind::MuxCtrl(n) => (0, n as u64),
        }
    }
}

impl AluProgram {
    /// Slot names local to this program, in `hole_slots` order.
    ///
    /// Each name is `{category}_{n}` where `n` counts holes of the same
    /// category in pre-order (all opcode holes share one counter regardless
    /// of arity).
    pub fn local_slot_names(&self) -> Vec<String> {
        let mut counters: [(u32, &str); 4] = [
            (0, "immediate"),
            (0, "opcode"),
            (0, "optctrl"),
            (0, "muxctrl"),
        ];
        self.hole_slots
            .iter()
            .map(|slot| {
                let idx = match slot.kind {
                    HoleKind::Immediate => 0,
                    HoleKind::Opcode(_) => 1,
                    HoleKind::OptCtrl => 2,
                    HoleKind::MuxCtrl(_) => 3,
                };
                let (count, category) = &mut counters[idx];
                let name = format!("{}_{}", category, count);
                *count += 1;
                name
            })
            .collect()
    }

    /// Fully qualified machine-code names for every hole, in `hole_slots`
    /// order: `{alu_path}_{category}_{n}`.
    pub fn slot_names(&self, alu_path: &str) -> Vec<String> {
        self.local_slot_names()
            .into_iter()
            .map(|local| format!("{}_{}", alu_path, local))
            .collect()
    }

    /// Canonical source text. Parsing the result back yields a structurally
    /// identical program (specialized bodies containing concrete operations
    /// are for reading only and do not reparse).
    pub fn pretty(&self) -> String {
        let mut decls: Vec<String> = self
            .state_vars
            .iter()
            .map(|s| format!("state {}", s))
            .collect();
        decls.extend(self.packet_operands.iter().cloned());
        let kind = match self.kind {
            AluKind::Stateful => "stateful",
            AluKind::Stateless => "stateless",
        };
        let mut out = format!("{} alu {}({}):\n", kind, self.name, decls.join(", "));
        write_block(&mut out, &self.body, 1);
        out
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for stmt in stmts {
        write_stmt(out, stmt, level);
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match stmt {
        Stmt::Assign { target, value, .. } => {
            out.push_str(target);
            out.push_str(" = ");
            write_expr(out, value);
            out.push('\n');
        }
        Stmt::Return { value } => {
            out.push_str("return ");
            write_expr(out, value);
            out.push('\n');
        }
        Stmt::If { cond, then_body, else_body } => {
            out.push_str("if ");
            write_expr(out, cond);
            out.push_str(" {\n");
            write_block(out, then_body, level + 1);
            indent(out, level);
            out.push('}');
            write_else(out, else_body, level);
            out.push('\n');
        }
    }
}

fn write_else(out: &mut String, else_body: &[Stmt], level: usize) {
    if else_body.is_empty() {
        return;
    }
    // An else holding a single if prints as an `else if` chain.
    if let [Stmt::If { cond, then_body, else_body: nested }] = else_body {
        out.push_str(" else if ");
        write_expr(out, cond);
        out.push_str(" {\n");
        write_block(out, then_body, level + 1);
        indent(out, level);
        out.push('}');
        write_else(out, nested, level);
        return;
    }
    out.push_str(" else {\n");
    write_block(out, else_body, level + 1);
    indent(out, level);
    out.push('}');
}

fn write_call(out: &mut String, name: &str, lhs: &Expr, rhs: &Expr) {
    out.push_str(name);
    out.push('(');
    write_expr(out, lhs);
    out.push_str(", ");
    write_expr(out, rhs);
    out.push(')');
}

fn write_expr(out: &mut String, expr: &Expr) {
    match expr {
        Expr::Operand { name, .. } | Expr::State { name, .. } => out.push_str(name),
        Expr::Int(v) => out.push_str(&v.to_string()),
        Expr::Const { .. } => out.push_str("C()"),
        Expr::Opt { arg, .. } => {
            out.push_str("Opt(");
            write_expr(out, arg);
            out.push(')');
        }
        Expr::Mux { arms, .. } => {
            out.push_str("Mux(");
            for (i, arm) in arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, arm);
            }
            out.push(')');
        }
        Expr::Arith { lhs, rhs, .. } => write_call(out, "arith_op", lhs, rhs),
        Expr::Rel { lhs, rhs, .. } => write_call(out, "rel_op", lhs, rhs),
        Expr::Logic { lhs, rhs, .. } => write_call(out, "logic_op", lhs, rhs),
        Expr::Not(arg) => {
            out.push_str("Not(");
            write_expr(out, arg);
            out.push(')');
        }
        Expr::Bin { op, lhs, rhs } => {
            out.push('(');
            write_expr(out, lhs);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(out, rhs);
            out.push(')');
        }
    }
}

/// Loads and validates an `.alu` file; the program name is the file stem.
pub fn load_alu_file(path: &Path) -> Result<AluProgram, AluFileError> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| AluFileError::BadPath(path.display().to_string()))?
        .to_string();
    let source = std::fs::read_to_string(path)
        .map_err(|e| AluFileError::Io(path.display().to_string(), e))?;
    parse_alu(&source, &name).map_err(|e| AluFileError::Parse(path.display().to_string(), e))
}

/// Resolves ALU names to `.alu` files across a list of search directories.
///
/// The first directory containing `{name}.alu` wins.
pub fn load_alu_library(
    names: impl IntoIterator<Item = String>,
    search_paths: &[std::path::PathBuf],
) -> Result<std::collections::BTreeMap<String, Arc<AluProgram>>, AluFileError> {
    let mut lib = std::collections::BTreeMap::new();
    for name in names {
        if lib.contains_key(&name) {
            continue;
        }
        let file = search_paths
            .iter()
            .map(|dir| dir.join(format!("{}.alu", name)))
            .find(|p| p.is_file())
            .ok_or_else(|| AluFileError::NotFound(name.clone(), search_paths.to_vec()))?;
        let program = load_alu_file(&file)?;
        lib.insert(name, Arc::new(program));
    }
    Ok(lib)
}

/// Errors raised while loading `.alu` files from disk.
#[derive(Debug, thiserror::Error)]
pub enum AluFileError {
    #[error("cannot derive an ALU name from path {0}")]
    BadPath(String),
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, AluError),
    #[error("no file {0}.alu in search path {1:?}")]
    NotFound(String, Vec<std::path::PathBuf>),
}

#[cfg(test)]
mod tests;
