//! Flattening of specialized ALU bodies into a linear evaluation tape.
//!
//! A specialized body is closed — no configurable construct remains — so it
//! can run without a binding table. Flattening the boxed expression tree
//! into a postfix instruction sequence removes the recursion and pointer
//! chasing that dominate the tree interpreter; the general interpreter in
//! [`super::eval`] remains the reference semantics for everything else.

use super::{AluProgram, BinOp, Expr, Stmt};
use crate::Word;

/// One instruction of the flattened form. Value instructions push onto an
/// operand stack; `Bin` and `Not` pop their inputs and push the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TapeOp {
    PushOperand(u32),
    PushState(u32),
    PushInt(Word),
    Bin(BinOp),
    Not,
    /// Pops the value and writes it to the state variable.
    StoreState(u32),
    /// Pops the return value and halts.
    Return,
    Jump(u32),
    /// Pops the condition and jumps when it is zero.
    JumpIfZero(u32),
}

/// A specialized ALU body in executable tape form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledAlu {
    ops: Vec<TapeOp>,
}

/// Flattens a program, or returns `None` while any configurable construct
/// remains — only fully specialized bodies are closed enough to flatten.
pub(crate) fn compile_alu(program: &AluProgram) -> Option<CompiledAlu> {
    let mut ops = Vec::new();
    emit_block(&program.body, &mut ops)?;
    Some(CompiledAlu { ops })
}

fn emit_block(stmts: &[Stmt], ops: &mut Vec<TapeOp>) -> Option<()> {
    for stmt in stmts {
        match stmt {
            Stmt::Assign { index, value, .. } => {
                emit_expr(value, ops)?;
                ops.push(TapeOp::StoreState(*index as u32));
            }
            Stmt::Return { value } => {
                emit_expr(value, ops)?;
                ops.push(TapeOp::Return);
            }
            Stmt::If { cond, then_body, else_body } => {
                emit_expr(cond, ops)?;
                let branch_at = ops.len();
                ops.push(TapeOp::JumpIfZero(u32::MAX));
                emit_block(then_body, ops)?;
                if else_body.is_empty() {
                    ops[branch_at] = TapeOp::JumpIfZero(ops.len() as u32);
                } else {
                    let skip_else_at = ops.len();
                    ops.push(TapeOp::Jump(u32::MAX));
                    ops[branch_at] = TapeOp::JumpIfZero(ops.len() as u32);
                    emit_block(else_body, ops)?;
                    ops[skip_else_at] = TapeOp::Jump(ops.len() as u32);
                }
            }
        }
    }
    Some(())
}

fn emit_expr(expr: &Expr, ops: &mut Vec<TapeOp>) -> Option<()> {
    match expr {
        Expr::Operand { index, .. } => ops.push(TapeOp::PushOperand(*index as u32)),
        Expr::State { index, .. } => ops.push(TapeOp::PushState(*index as u32)),
        Expr::Int(v) => ops.push(TapeOp::PushInt(*v)),
        Expr::Not(arg) => {
            emit_expr(arg, ops)?;
            ops.push(TapeOp::Not);
        }
        Expr::Bin { op, lhs, rhs } => {
            emit_expr(lhs, ops)?;
            emit_expr(rhs, ops)?;
            ops.push(TapeOp::Bin(*op));
        }
        Expr::Const { .. }
        | Expr::Opt { .. }
        | Expr::Mux { .. }
        | Expr::Arith { .. }
        | Expr::Rel { .. }
        | Expr::Logic { .. } => return None,
    }
    Some(())
}

impl CompiledAlu {
    /// Executes the tape. `stack` is caller-provided scratch, reused across
    /// runs so the hot loop stops allocating once it has warmed up.
    ///
    /// Validated bodies return on every control path, so the program
    /// counter never runs off the end of the tape.
    pub(crate) fn run(&self, operands: &[Word], state: &mut [Word], stack: &mut Vec<Word>) -> Word {
        stack.clear();
        let mut pc = 0usize;
        loop {
            match self.ops[pc] {
                TapeOp::PushOperand(i) => stack.push(operands[i as usize]),
                TapeOp::PushState(i) => stack.push(state[i as usize]),
                TapeOp::PushInt(v) => stack.push(v),
                TapeOp::Bin(op) => {
                    let r = stack.pop().expect("binary op needs two stacked values");
                    let l = stack.pop().expect("binary op needs two stacked values");
                    stack.push(op.apply(l, r));
                }
                TapeOp::Not => {
                    let v = stack.pop().expect("negation needs a stacked value");
                    stack.push((v == 0) as Word);
                }
                TapeOp::StoreState(i) => {
                    state[i as usize] =
                        stack.pop().expect("assignment needs a stacked value");
                }
                TapeOp::Return => return stack.pop().expect("return needs a stacked value"),
                TapeOp::Jump(target) => {
                    pc = target as usize;
                    continue;
                }
                TapeOp::JumpIfZero(target) => {
                    if stack.pop().expect("branch needs a stacked condition") == 0 {
                        pc = target as usize;
                        continue;
                    }
                }
            }
            pc += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alu::{eval_bound, parse_alu};
    use crate::pipeline::specialize_program;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_bindings(program: &AluProgram, rng: &mut ChaCha8Rng) -> Vec<u32> {
        program
            .hole_slots
            .iter()
            .map(|slot| {
                let (lo, hi) = slot.valid_range();
                rng.gen_range(lo..hi) as u32
            })
            .collect()
    }

    #[test]
    fn refuses_bodies_with_configurable_constructs() {
        let program = parse_alu(
            "stateless alu raw(pkt_0):\n    return arith_op(pkt_0, C())\n",
            "raw",
        )
        .unwrap();
        assert!(compile_alu(&program).is_none());
        let specialized = specialize_program(&program, &[1, 3]);
        assert!(compile_alu(&specialized).is_some());
    }

    #[test]
    fn matches_tree_interpreter_on_random_specializations() {
        let sources = [
            (
                "guarded",
                "stateful alu guarded(state s0, pkt_0, pkt_1):\n\
                     if logic_op(rel_op(pkt_0, C()), rel_op(pkt_1, C())) {\n\
                         s0 = arith_op(s0, Mux(pkt_0, pkt_1))\n\
                     }\n\
                     return s0\n",
            ),
            (
                "branchy",
                "stateful alu branchy(state lo, state hi, pkt_0, pkt_1):\n\
                     if rel_op(pkt_0, pkt_1) {\n\
                         lo = arith_op(lo, Opt(pkt_0))\n\
                     } else {\n\
                         hi = arith_op(hi, C())\n\
                     }\n\
                     return arith_op(lo, hi)\n",
            ),
            (
                "pure",
                "stateless alu pure(pkt_0, pkt_1):\n\
                     return arith_op(Mux(pkt_0, pkt_1, C()), Not(rel_op(pkt_0, pkt_1)))\n",
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for (name, source) in sources {
            let program = parse_alu(source, name).unwrap();
            for _ in 0..25 {
                let bindings = random_bindings(&program, &mut rng);
                let specialized = specialize_program(&program, &bindings);
                let compiled = compile_alu(&specialized).expect("specialized body flattens");
                let mut stack = Vec::new();
                for _ in 0..40 {
                    let operands: Vec<Word> = (0..program.packet_operands.len())
                        .map(|_| rng.gen_range(-1000..1000))
                        .collect();
                    let mut tree_state: Vec<Word> = (0..program.state_vars.len())
                        .map(|_| rng.gen_range(-1000..1000))
                        .collect();
                    let mut tape_state = tree_state.clone();
                    let tree = eval_bound(&program, &bindings, &operands, &mut tree_state);
                    let tape = compiled.run(&operands, &mut tape_state, &mut stack);
                    assert_eq!(tree, tape, "return value diverged for {source}");
                    assert_eq!(tree_state, tape_state, "state diverged for {source}");
                }
            }
        }
    }

    #[test]
    fn early_return_skips_the_rest_of_the_tape() {
        let program = parse_alu(
            "stateful alu gate(state s0, pkt_0):\n\
                 if rel_op(pkt_0, C()) {\n\
                     return 0\n\
                 }\n\
                 s0 = arith_op(s0, pkt_0)\n\
                 return s0\n",
            "gate",
        )
        .unwrap();
        // rel opcode 2 is `>`, threshold 10, arith opcode 0 is add.
        let specialized = specialize_program(&program, &[2, 10, 0]);
        let compiled = compile_alu(&specialized).unwrap();
        let mut stack = Vec::new();

        let mut state = vec![5];
        assert_eq!(compiled.run(&[50], &mut state, &mut stack), 0);
        assert_eq!(state, vec![5], "early return must not touch state");

        let mut state = vec![5];
        assert_eq!(compiled.run(&[3], &mut state, &mut stack), 8);
        assert_eq!(state, vec![8]);
    }
}
