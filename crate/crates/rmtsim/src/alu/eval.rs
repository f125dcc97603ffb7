//! Evaluation of a validated ALU body against concrete hole bindings.

use super::{AluProgram, Expr, HoleSlot, Stmt};
use crate::Word;
use std::collections::BTreeMap;

/// A binding problem detected before evaluation.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no binding for slot `{0}`")]
    MissingBinding(String),
    #[error("binding for slot `{slot}` is {value}, outside [{lo},{hi})")]
    OutOfRangeBinding { slot: String, value: u32, lo: u64, hi: u64 },
}

/// Evaluates one ALU execution.
///
/// `bindings` maps local slot names (`opcode_0`, `immediate_1`, ...) to
/// values; every hole must be bound in range. `operands` must match the
/// program's packet operands and `state` its state variables; state is
/// updated in place. Returns the value of the taken `return`.
pub fn eval_alu(
    alu: &AluProgram,
    bindings: &BTreeMap<String, u32>,
    operands: &[Word],
    state: &mut [Word],
) -> Result<Word, EvalError> {
    assert_eq!(
        operands.len(),
        alu.packet_operands.len(),
        "operand count must match the program's packet operands"
    );
    assert_eq!(
        state.len(),
        alu.state_vars.len(),
        "state length must match the program's state variables"
    );
    let dense = check_bindings(&alu.hole_slots, &alu.local_slot_names(), bindings)?;
    Ok(eval_bound(alu, &dense, operands, state))
}

fn check_bindings(
    slots: &[HoleSlot],
    names: &[String],
    bindings: &BTreeMap<String, u32>,
) -> Result<Vec<u32>, EvalError> {
    let mut dense = Vec::with_capacity(slots.len());
    for (slot, name) in slots.iter().zip(names) {
        let value = *bindings
            .get(name)
            .ok_or_else(|| EvalError::MissingBinding(name.clone()))?;
        let (lo, hi) = slot.valid_range();
        if (value as u64) < lo || (value as u64) >= hi {
            return Err(EvalError::OutOfRangeBinding { slot: name.clone(), value, lo, hi });
        }
        dense.push(value);
    }
    Ok(dense)
}

/// Evaluates with pre-validated dense bindings (one value per hole slot, in
/// `hole_slots` order). This is the simulator's hot path.
pub(crate) fn eval_bound(
    alu: &AluProgram,
    bindings: &[u32],
    operands: &[Word],
    state: &mut [Word],
) -> Word {
    debug_assert_eq!(bindings.len(), alu.hole_slots.len());
    exec_block(&alu.body, bindings, operands, state)
        .expect("a validated body returns on every control path")
}

fn exec_block(
    stmts: &[Stmt],
    bindings: &[u32],
    operands: &[Word],
    state: &mut [Word],
) -> Option<Word> {
    for stmt in stmts {
        match stmt {
            Stmt::Assign { index, value, .. } => {
                state[*index] = eval_expr(value, bindings, operands, state);
            }
            Stmt::Return { value } => {
                return Some(eval_expr(value, bindings, operands, state));
            }
            Stmt::If { cond, then_body, else_body } => {
                let taken = if eval_expr(cond, bindings, operands, state) != 0 {
                    then_body
                } else {
                    else_body
                };
                if let Some(v) = exec_block(taken, bindings, operands, state) {
                    return Some(v);
                }
            }
        }
    }
    None
}

fn eval_expr(expr: &Expr, bindings: &[u32], operands: &[Word], state: &[Word]) -> Word {
    match expr {
        Expr::Operand { index, .. } => operands[*index],
        Expr::State { index, .. } => state[*index],
        Expr::Int(v) => *v,
        Expr::Const { slot } => bindings[*slot] as Word,
        Expr::Opt { slot, arg } => {
            if bindings[*slot] == 1 {
                eval_expr(arg, bindings, operands, state)
            } else {
                0
            }
        }
        Expr::Mux { slot, arms } => {
            eval_expr(&arms[bindings[*slot] as usize], bindings, operands, state)
        }
        Expr::Arith { slot, lhs, rhs } => {
            let l = eval_expr(lhs, bindings, operands, state);
            let r = eval_expr(rhs, bindings, operands, state);
            match bindings[*slot] {
                0 => l.wrapping_add(r),
                1 => l.wrapping_sub(r),
                _ => unreachable!("arith opcode bindings are range-checked"),
            }
        }
        Expr::Rel { slot, lhs, rhs } => {
            let l = eval_expr(lhs, bindings, operands, state);
            let r = eval_expr(rhs, bindings, operands, state);
            match bindings[*slot] {
                0 => (l != r) as Word,
                1 => (l < r) as Word,
                2 => (l > r) as Word,
                3 => (l == r) as Word,
                _ => unreachable!("rel opcode bindings are range-checked"),
            }
        }
        Expr::Logic { slot, lhs, rhs } => {
            let l = eval_expr(lhs, bindings, operands, state);
            let r = eval_expr(rhs, bindings, operands, state);
            match bindings[*slot] {
                0 => (l != 0 && r != 0) as Word,
                1 => (l != 0 || r != 0) as Word,
                _ => unreachable!("logic opcode bindings are range-checked"),
            }
        }
        Expr::Not(arg) => (eval_expr(arg, bindings, operands, state) == 0) as Word,
        Expr::Bin { op, lhs, rhs } => {
            let l = eval_expr(lhs, bindings, operands, state);
            let r = eval_expr(rhs, bindings, operands, state);
            op.apply(l, r)
        }
    }
}
