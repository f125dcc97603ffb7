use super::*;
use crate::alu::parse::parse_alu;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;

const RAW_SRC: &str = "stateless alu raw(pkt_0): return arith_op(pkt_0, C())";

const IF_ELSE_RAW_SRC: &str = "\
stateful alu if_else_raw(state s0, pkt_0):
  if rel_op(pkt_0, C()) {
    s0 = arith_op(s0, Opt(pkt_0))
  } else {
    s0 = arith_op(s0, C())
  }
  return s0
";

fn bindings(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Recounts hole slots by walking the lowered body independently of the
/// validator's own bookkeeping.
fn recount_slots(program: &AluProgram) -> Vec<HoleSlot> {
    fn visit(expr: &Expr, out: &mut Vec<HoleKind>) {
        match expr {
            Expr::Operand { .. } | Expr::State { .. } | Expr::Int(_) => {}
            Expr::Const { .. } => out.push(HoleKind::Immediate),
            Expr::Opt { arg, .. } => {
                out.push(HoleKind::OptCtrl);
                visit(arg, out);
            }
            Expr::Mux { arms, .. } => {
                out.push(HoleKind::MuxCtrl(arms.len() as u32));
                for arm in arms {
                    visit(arm, out);
                }
            }
            Expr::Arith { lhs, rhs, .. } => {
                out.push(HoleKind::Opcode(ARITH_ARITY));
                visit(lhs, out);
                visit(rhs, out);
            }
            Expr::Rel { lhs, rhs, .. } => {
                out.push(HoleKind::Opcode(REL_ARITY));
                visit(lhs, out);
                visit(rhs, out);
            }
            Expr::Logic { lhs, rhs, .. } => {
                out.push(HoleKind::Opcode(LOGIC_ARITY));
                visit(lhs, out);
                visit(rhs, out);
            }
            Expr::Not(arg) => visit(arg, out),
            Expr::Bin { .. } => panic!("parsed programs carry no concrete ops"),
        }
    }
    fn walk(stmts: &[Stmt], out: &mut Vec<HoleKind>) {
        for stmt in stmts {
            match stmt {
                Stmt::Assign { value, .. } | Stmt::Return { value } => visit(value, out),
                Stmt::If { cond, then_body, else_body } => {
                    visit(cond, out);
                    walk(then_body, out);
                    walk(else_body, out);
                }
            }
        }
    }
    let mut kinds = Vec::new();
    walk(&program.body, &mut kinds);
    let mut counters: BTreeMap<(u8, u32), u32> = BTreeMap::new();
    kinds
        .into_iter()
        .map(|kind| {
            let key = match kind {
                HoleKind::Immediate => (0, 0),
                HoleKind::Opcode(k) => (1, k),
                HoleKind::OptCtrl => (2, 0),
                HoleKind::MuxCtrl(n) => (3, n),
            };
            let c = counters.entry(key).or_insert(0);
            let slot = HoleSlot { kind, ordinal: *c };
            *c += 1;
            slot
        })
        .collect()
}

#[test]
fn raw_parses_to_expected_structure() {
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    assert_eq!(p.kind, AluKind::Stateless);
    assert!(p.state_vars.is_empty());
    assert_eq!(p.packet_operands, vec!["pkt_0".to_string()]);
    assert_eq!(
        p.hole_slots,
        vec![
            HoleSlot { kind: HoleKind::Opcode(2), ordinal: 0 },
            HoleSlot { kind: HoleKind::Immediate, ordinal: 0 },
        ]
    );
    assert_eq!(
        p.body,
        vec![Stmt::Return {
            value: Expr::Arith {
                slot: 0,
                lhs: Box::new(Expr::Operand { name: "pkt_0".into(), index: 0 }),
                rhs: Box::new(Expr::Const { slot: 1 }),
            }
        }]
    );
}

#[test]
fn if_else_raw_hole_slots_match_preorder() {
    let p = parse_alu(IF_ELSE_RAW_SRC, "if_else_raw").unwrap();
    let expected = vec![
        HoleSlot { kind: HoleKind::Opcode(4), ordinal: 0 },
        HoleSlot { kind: HoleKind::Immediate, ordinal: 0 },
        HoleSlot { kind: HoleKind::Opcode(2), ordinal: 0 },
        HoleSlot { kind: HoleKind::OptCtrl, ordinal: 0 },
        HoleSlot { kind: HoleKind::Opcode(2), ordinal: 1 },
        HoleSlot { kind: HoleKind::Immediate, ordinal: 1 },
    ];
    assert_eq!(p.hole_slots, expected);
    assert_eq!(recount_slots(&p), expected);
    assert_eq!(
        p.local_slot_names(),
        vec!["opcode_0", "immediate_0", "opcode_1", "optctrl_0", "opcode_2", "immediate_1"]
    );
}

#[test]
fn slot_names_prefix_alu_path() {
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    assert_eq!(
        p.slot_names("stage_0_alu_0"),
        vec!["stage_0_alu_0_opcode_0", "stage_0_alu_0_immediate_0"]
    );
}

#[test]
fn zero_hole_program_has_empty_slot_names() {
    let p = parse_alu("stateless alu forward(pkt_0): return pkt_0", "forward").unwrap();
    assert!(p.hole_slots.is_empty());
    assert!(p.slot_names("stage_3_alu_1").is_empty());
}

#[test]
fn opcode_name_counter_is_shared_across_arities() {
    let src = "stateless alu mixed(pkt_0): \
               return logic_op(rel_op(pkt_0, C()), arith_op(pkt_0, C()))";
    let p = parse_alu(src, "mixed").unwrap();
    assert_eq!(
        p.hole_slots,
        vec![
            HoleSlot { kind: HoleKind::Opcode(2), ordinal: 0 },
            HoleSlot { kind: HoleKind::Opcode(4), ordinal: 0 },
            HoleSlot { kind: HoleKind::Immediate, ordinal: 0 },
            HoleSlot { kind: HoleKind::Opcode(2), ordinal: 1 },
            HoleSlot { kind: HoleKind::Immediate, ordinal: 1 },
        ]
    );
    assert_eq!(
        p.local_slot_names(),
        vec!["opcode_0", "opcode_1", "immediate_0", "opcode_2", "immediate_1"]
    );
    assert_eq!(recount_slots(&p), p.hole_slots);
}

#[test]
fn empty_source_is_a_syntax_error_at_offset_zero() {
    match parse_alu("", "x") {
        Err(AluError::Syntax(e)) => {
            assert_eq!(e.offset, 0);
            assert_eq!(e.line, 1);
            assert_eq!(e.col, 1);
        }
        other => panic!("expected a syntax error, got {:?}", other),
    }
}

#[test]
fn parse_is_deterministic() {
    let a = parse_alu(IF_ELSE_RAW_SRC, "if_else_raw").unwrap();
    let b = parse_alu(IF_ELSE_RAW_SRC, "if_else_raw").unwrap();
    assert_eq!(a, b);
}

#[test]
fn eval_raw_add_and_sub() {
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    let mut state = [];
    let add = bindings(&[("opcode_0", 0), ("immediate_0", 3)]);
    assert_eq!(eval_alu(&p, &add, &[7], &mut state).unwrap(), 10);
    let sub = bindings(&[("opcode_0", 1), ("immediate_0", 3)]);
    assert_eq!(eval_alu(&p, &sub, &[10], &mut state).unwrap(), 7);
}

#[test]
fn eval_if_else_raw_taken_branch_updates_state() {
    let p = parse_alu(IF_ELSE_RAW_SRC, "if_else_raw").unwrap();
    let b = bindings(&[
        ("opcode_0", 3),    // rel_op: ==
        ("immediate_0", 5),
        ("opcode_1", 0),    // then arith: +
        ("optctrl_0", 1),   // Opt passes its argument
        ("opcode_2", 0),
        ("immediate_1", 9),
    ]);
    let mut state = [100];
    assert_eq!(eval_alu(&p, &b, &[5], &mut state).unwrap(), 105);
    assert_eq!(state, [105]);
    // Condition false: the else branch adds immediate_1 instead.
    let mut state = [100];
    assert_eq!(eval_alu(&p, &b, &[6], &mut state).unwrap(), 109);
    assert_eq!(state, [109]);
}

#[test]
fn eval_missing_and_out_of_range_bindings() {
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    let mut state = [];
    let missing = bindings(&[("opcode_0", 0)]);
    assert_eq!(
        eval_alu(&p, &missing, &[1], &mut state),
        Err(EvalError::MissingBinding("immediate_0".into()))
    );
    let out_of_range = bindings(&[("opcode_0", 2), ("immediate_0", 0)]);
    assert_eq!(
        eval_alu(&p, &out_of_range, &[1], &mut state),
        Err(EvalError::OutOfRangeBinding { slot: "opcode_0".into(), value: 2, lo: 0, hi: 2 })
    );
}

#[test]
fn eval_wraps_in_32_bits() {
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    let mut state = [];
    // u32::MAX reinterprets as -1 in the value domain.
    let b = bindings(&[("opcode_0", 0), ("immediate_0", u32::MAX)]);
    assert_eq!(eval_alu(&p, &b, &[5], &mut state).unwrap(), 4);
    let b = bindings(&[("opcode_0", 0), ("immediate_0", 1)]);
    assert_eq!(
        eval_alu(&p, &b, &[Word::MAX], &mut state).unwrap(),
        Word::MIN
    );
}

#[test]
fn opt_gate_passes_or_zeroes() {
    let p = parse_alu("stateless alu optprobe(pkt_0): return Opt(pkt_0)", "optprobe").unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let v: Word = rng.gen();
        let mut state = [];
        let pass = bindings(&[("optctrl_0", 1)]);
        assert_eq!(eval_alu(&p, &pass, &[v], &mut state).unwrap(), v);
        let zero = bindings(&[("optctrl_0", 0)]);
        assert_eq!(eval_alu(&p, &zero, &[v], &mut state).unwrap(), 0);
    }
}

#[test]
fn mux_selects_by_ctrl() {
    let p = parse_alu(
        "stateless alu pick(pkt_0, pkt_1): return Mux(pkt_0, pkt_1, C())",
        "pick",
    )
    .unwrap();
    assert_eq!(
        p.hole_slots,
        vec![
            HoleSlot { kind: HoleKind::MuxCtrl(3), ordinal: 0 },
            HoleSlot { kind: HoleKind::Immediate, ordinal: 0 },
        ]
    );
    let mut state = [];
    for (ctrl, expected) in [(0, 5), (1, 6), (2, 42)] {
        let b = bindings(&[("muxctrl_0", ctrl), ("immediate_0", 42)]);
        assert_eq!(eval_alu(&p, &b, &[5, 6], &mut state).unwrap(), expected);
    }
}

#[test]
fn logic_and_rel_and_not_produce_flags() {
    let src = "stateless alu flags(pkt_0, pkt_1): \
               return logic_op(rel_op(pkt_0, pkt_1), Not(pkt_0))";
    let p = parse_alu(src, "flags").unwrap();
    let mut state = [];
    // logic AND of (pkt_0 < pkt_1) and Not(pkt_0).
    let b = bindings(&[("opcode_0", 0), ("opcode_1", 1)]);
    assert_eq!(eval_alu(&p, &b, &[0, 1], &mut state).unwrap(), 1);
    assert_eq!(eval_alu(&p, &b, &[2, 3], &mut state).unwrap(), 0);
    // logic OR.
    let b = bindings(&[("opcode_0", 1), ("opcode_1", 1)]);
    assert_eq!(eval_alu(&p, &b, &[2, 3], &mut state).unwrap(), 1);
    // Comparisons are signed.
    let b = bindings(&[("opcode_0", 0), ("opcode_1", 1)]);
    assert_eq!(eval_alu(&p, &b, &[-5, 0], &mut state).unwrap(), 0); // Not(-5) is 0
}

#[test]
fn let_locals_substitute_and_count_holes_at_use_site() {
    let src = "\
stateful alu acc(state s0, pkt_0):
  let bumped = arith_op(pkt_0, C())
  s0 = bumped
  return s0
";
    let p = parse_alu(src, "acc").unwrap();
    assert_eq!(
        p.hole_slots,
        vec![
            HoleSlot { kind: HoleKind::Opcode(2), ordinal: 0 },
            HoleSlot { kind: HoleKind::Immediate, ordinal: 0 },
        ]
    );
    let b = bindings(&[("opcode_0", 0), ("immediate_0", 2)]);
    let mut state = [0];
    assert_eq!(eval_alu(&p, &b, &[5], &mut state).unwrap(), 7);
    assert_eq!(state, [7]);
}

#[test]
fn let_used_twice_replicates_holes() {
    let src = "stateless alu twice(pkt_0): \
               let t = arith_op(pkt_0, C()) \
               return arith_op(t, t)";
    let p = parse_alu(src, "twice").unwrap();
    // The outer arith plus two substituted copies: 3 opcodes, 2 immediates.
    assert_eq!(p.hole_slots.len(), 5);
    assert_eq!(
        p.local_slot_names(),
        vec!["opcode_0", "opcode_1", "immediate_0", "opcode_2", "immediate_1"]
    );
}

#[test]
fn local_initializer_cannot_see_later_locals() {
    let src = "stateless alu bad(pkt_0): \
               let a = b \
               let b = pkt_0 \
               return arith_op(a, b)";
    match parse_alu(src, "bad") {
        Err(AluError::Validation(ValidationError::Undeclared { name })) => {
            assert_eq!(name, "b");
        }
        other => panic!("expected undeclared `b`, got {:?}", other),
    }
}

#[test]
fn validation_rejects_structural_errors() {
    let cases: &[(&str, &str, ValidationError)] = &[
        (
            "stateless alu raw(pkt_0): return pkt_0",
            "other",
            ValidationError::NameMismatch { declared: "raw".into(), expected: "other".into() },
        ),
        (
            "stateless alu x(pkt_0, pkt_0): return pkt_0",
            "x",
            ValidationError::DuplicateDeclaration { name: "pkt_0".into() },
        ),
        (
            "stateless alu x(state s0, pkt_0): return pkt_0",
            "x",
            ValidationError::StatelessWithState { name: "s0".into() },
        ),
        (
            "stateful alu x(pkt_0): return pkt_0",
            "x",
            ValidationError::StatefulWithoutState,
        ),
        (
            "stateless alu x(pkt_0): return nope",
            "x",
            ValidationError::Undeclared { name: "nope".into() },
        ),
        (
            "stateless alu x(pkt_0): pkt_0 = pkt_0 return pkt_0",
            "x",
            ValidationError::AssignToOperand { name: "pkt_0".into() },
        ),
        (
            "stateful alu x(state s0, pkt_0): s0 = pkt_0",
            "x",
            ValidationError::MissingReturnPath,
        ),
        (
            "stateful alu x(state s0, pkt_0): \
             if rel_op(pkt_0, C()) { s0 = pkt_0 } s0 = pkt_0 return s0",
            "x",
            ValidationError::DuplicateStateAssign { name: "s0".into() },
        ),
        (
            "stateless alu x(pkt_0): \
             if pkt_0 { return pkt_0 } else { return pkt_0 } return pkt_0",
            "x",
            ValidationError::UnreachableStatement,
        ),
        (
            "stateless alu x(pkt_0): if pkt_0 { } else { return pkt_0 } return pkt_0",
            "x",
            ValidationError::EmptyBranch,
        ),
        (
            "stateless alu x(pkt_0): let t = pkt_0 return pkt_0",
            "x",
            ValidationError::UnusedLocal { name: "t".into() },
        ),
        (
            "stateless alu x(pkt_0): let t = pkt_0 t = pkt_0 return t",
            "x",
            ValidationError::AssignToLocal { name: "t".into() },
        ),
    ];
    for (src, name, expected) in cases {
        match parse_alu(src, name) {
            Err(AluError::Validation(e)) => assert_eq!(&e, expected, "source: {}", src),
            other => panic!("expected {:?} for {:?}, got {:?}", expected, src, other),
        }
    }
}

#[test]
fn else_if_chains_parse_and_nest() {
    let src = "\
stateless alu chain(pkt_0):
  if rel_op(pkt_0, C()) {
    return pkt_0
  } else if rel_op(pkt_0, C()) {
    return arith_op(pkt_0, C())
  } else {
    return 0
  }
";
    let p = parse_alu(src, "chain").unwrap();
    match &p.body[0] {
        Stmt::If { else_body, .. } => {
            assert!(matches!(else_body.as_slice(), [Stmt::If { .. }]));
        }
        other => panic!("expected an if, got {:?}", other),
    }
}

#[test]
fn pretty_print_reparses_to_identical_program() {
    let sources = [
        (RAW_SRC, "raw"),
        (IF_ELSE_RAW_SRC, "if_else_raw"),
        ("stateless alu forward(pkt_0): return pkt_0", "forward"),
        (
            "stateless alu pick(pkt_0, pkt_1): return Mux(pkt_0, pkt_1, C())",
            "pick",
        ),
        (
            "stateful alu two(state s0, state s1, pkt_0): \
             if logic_op(s0, Not(pkt_0)) { s0 = arith_op(s0, C()) } \
             else if rel_op(pkt_0, -3) { s1 = Opt(pkt_0) } \
             return arith_op(s0, s1)",
            "two",
        ),
    ];
    for (src, name) in sources {
        let p = parse_alu(src, name).unwrap();
        let printed = p.pretty();
        let reparsed = parse_alu(&printed, name)
            .unwrap_or_else(|e| panic!("pretty output failed to reparse: {}\n{}", e, printed));
        assert_eq!(p, reparsed, "round trip changed structure for {}", name);
    }
}

#[test]
fn stateless_eval_leaves_no_state_to_touch() {
    // Stateless programs cannot declare or reference state; evaluation over
    // random operands is a pure function of operands and bindings.
    let p = parse_alu(RAW_SRC, "raw").unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..100 {
        let v: Word = rng.gen();
        let imm: u32 = rng.gen();
        let b = bindings(&[("opcode_0", 0), ("immediate_0", imm)]);
        let mut state = [];
        let one = eval_alu(&p, &b, &[v], &mut state).unwrap();
        let two = eval_alu(&p, &b, &[v], &mut state).unwrap();
        assert_eq!(one, two);
        assert_eq!(one, v.wrapping_add(imm as Word));
    }
}
