//! Body specialization: propagate bound hole values into ALU bodies and
//! simplify around them.
//!
//! Once machine code is bound, every hole is a known constant. Substituting
//! them turns opcode-selected operations into concrete ones, selector nodes
//! into their chosen arms, and many branch conditions into constants; those
//! branches are then spliced in and unreachable statements dropped. The
//! specialized body computes exactly what the original computed under the
//! same bindings — it just does less per evaluation.

use crate::alu::{AluProgram, BinOp, Expr, Stmt};
use crate::Word;

/// Specializes one program around dense hole values (`bindings[i]` fills
/// `program.hole_slots[i]`). The result has no hole slots left.
pub(crate) fn specialize_program(program: &AluProgram, bindings: &[u32]) -> AluProgram {
    debug_assert_eq!(bindings.len(), program.hole_slots.len());
    AluProgram {
        name: program.name.clone(),
        kind: program.kind,
        state_vars: program.state_vars.clone(),
        packet_operands: program.packet_operands.clone(),
        body: spec_block(&program.body, bindings),
        hole_slots: Vec::new(),
    }
}

fn spec_block(stmts: &[Stmt], bindings: &[u32]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for stmt in stmts {
        match stmt {
            Stmt::Return { value } => {
                out.push(Stmt::Return { value: spec_expr(value, bindings) });
                return out; // anything after a return is unreachable
            }
            Stmt::Assign { target, index, value } => {
                out.push(Stmt::Assign {
                    target: target.clone(),
                    index: *index,
                    value: spec_expr(value, bindings),
                });
            }
            Stmt::If { cond, then_body, else_body } => {
                let cond = spec_expr(cond, bindings);
                if let Expr::Int(v) = cond {
                    // Constant condition: splice the taken branch in place.
                    let taken = if v != 0 { then_body } else { else_body };
                    let mut spliced = spec_block(taken, bindings);
                    let returns = block_returns(&spliced);
                    out.append(&mut spliced);
                    if returns {
                        return out;
                    }
                } else {
                    let then_s = spec_block(then_body, bindings);
                    let else_s = spec_block(else_body, bindings);
                    let returns = block_returns(&then_s) && block_returns(&else_s);
                    out.push(Stmt::If { cond, then_body: then_s, else_body: else_s });
                    if returns {
                        return out;
                    }
                }
            }
        }
    }
    out
}

/// Whether a specialized block is guaranteed to return.
fn block_returns(stmts: &[Stmt]) -> bool {
    match stmts.last() {
        Some(Stmt::Return { .. }) => true,
        Some(Stmt::If { then_body, else_body, .. }) => {
            block_returns(then_body) && block_returns(else_body)
        }
        _ => false,
    }
}

fn spec_expr(expr: &Expr, bindings: &[u32]) -> Expr {
    match expr {
        Expr::Operand { .. } | Expr::State { .. } | Expr::Int(_) => expr.clone(),
        Expr::Const { slot } => Expr::Int(bindings[*slot] as Word),
        Expr::Opt { slot, arg } => {
            if bindings[*slot] == 1 {
                spec_expr(arg, bindings)
            } else {
                Expr::Int(0)
            }
        }
        Expr::Mux { slot, arms } => spec_expr(&arms[bindings[*slot] as usize], bindings),
        Expr::Arith { slot, lhs, rhs } => {
            let op = match bindings[*slot] {
                0 => BinOp::Add,
                _ => BinOp::Sub,
            };
            fold(op, spec_expr(lhs, bindings), spec_expr(rhs, bindings))
        }
        Expr::Rel { slot, lhs, rhs } => {
            let op = match bindings[*slot] {
                0 => BinOp::Ne,
                1 => BinOp::Lt,
                2 => BinOp::Gt,
                _ => BinOp::Eq,
            };
            fold(op, spec_expr(lhs, bindings), spec_expr(rhs, bindings))
        }
        Expr::Logic { slot, lhs, rhs } => {
            let op = match bindings[*slot] {
                0 => BinOp::And,
                _ => BinOp::Or,
            };
            fold(op, spec_expr(lhs, bindings), spec_expr(rhs, bindings))
        }
        Expr::Not(arg) => match spec_expr(arg, bindings) {
            Expr::Int(v) => Expr::Int((v == 0) as Word),
            arg => Expr::Not(Box::new(arg)),
        },
        Expr::Bin { op, lhs, rhs } => {
            fold(*op, spec_expr(lhs, bindings), spec_expr(rhs, bindings))
        }
    }
}

/// Builds a concrete binary node, folding it when both sides are literals.
fn fold(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    if let (Expr::Int(l), Expr::Int(r)) = (&lhs, &rhs) {
        return Expr::Int(op.apply(*l, *r));
    }
    Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
}

/// Structural scan: `true` iff no hole node remains anywhere in the body and
/// no if-statement has a constant condition (one referencing neither an
/// operand nor a state variable).
pub fn fully_specialized(program: &AluProgram) -> bool {
    program.hole_slots.is_empty() && stmts_specialized(&program.body)
}

fn stmts_specialized(stmts: &[Stmt]) -> bool {
    stmts.iter().all(|stmt| match stmt {
        Stmt::Return { value } => expr_specialized(value),
        Stmt::Assign { value, .. } => expr_specialized(value),
        Stmt::If { cond, then_body, else_body } => {
            expr_specialized(cond)
                && !expr_is_constant(cond)
                && stmts_specialized(then_body)
                && stmts_specialized(else_body)
        }
    })
}

fn expr_specialized(expr: &Expr) -> bool {
    match expr {
        Expr::Operand { .. } | Expr::State { .. } | Expr::Int(_) => true,
        // Every slot-carrying node is an unfilled hole.
        Expr::Const { .. }
        | Expr::Opt { .. }
        | Expr::Mux { .. }
        | Expr::Arith { .. }
        | Expr::Rel { .. }
        | Expr::Logic { .. } => false,
        Expr::Not(arg) => expr_specialized(arg),
        Expr::Bin { lhs, rhs, .. } => expr_specialized(lhs) && expr_specialized(rhs),
    }
}

/// Whether an expression references no operand and no state variable — after
/// specialization such an expression is a compile-time constant.
fn expr_is_constant(expr: &Expr) -> bool {
    match expr {
        Expr::Operand { .. } | Expr::State { .. } => false,
        Expr::Int(_) | Expr::Const { .. } => true,
        Expr::Opt { arg, .. } | Expr::Not(arg) => expr_is_constant(arg),
        Expr::Mux { arms, .. } => arms.iter().all(expr_is_constant),
        Expr::Arith { lhs, rhs, .. }
        | Expr::Rel { lhs, rhs, .. }
        | Expr::Logic { lhs, rhs, .. }
        | Expr::Bin { lhs, rhs, .. } => expr_is_constant(lhs) && expr_is_constant(rhs),
    }
}
