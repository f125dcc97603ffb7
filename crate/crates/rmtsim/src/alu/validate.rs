//! Lowering from the surface tree to a validated [`AluProgram`].
//!
//! Lowering resolves identifiers, substitutes `let` locals away, checks the
//! control-flow rules (every path returns exactly once, a state variable is
//! assigned at most once per path), and assigns every configurable construct
//! its hole slot in pre-order of the lowered body.

use super::parse::{SExpr, SStmt, SurfaceProgram};
use super::{AluKind, AluProgram, Expr, HoleKind, HoleSlot, Stmt};
use std::collections::{BTreeSet, HashMap};

/// A structural rule violation in an otherwise well-formed source.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("header declares `{declared}` but the program is named `{expected}`")]
    NameMismatch { declared: String, expected: String },
    #[error("`{name}` is declared more than once")]
    DuplicateDeclaration { name: String },
    #[error("stateless ALU declares state variable `{name}`")]
    StatelessWithState { name: String },
    #[error("stateful ALU declares no state variables")]
    StatefulWithoutState,
    #[error("`{name}` is not declared")]
    Undeclared { name: String },
    #[error("cannot assign to packet operand `{name}`")]
    AssignToOperand { name: String },
    #[error("local `{name}` is single-assignment; it cannot be reassigned")]
    AssignToLocal { name: String },
    #[error("state variable `{name}` is assigned more than once on a control path")]
    DuplicateStateAssign { name: String },
    #[error("not every control path ends in a return")]
    MissingReturnPath,
    #[error("statement is unreachable: every path before it already returned")]
    UnreachableStatement,
    #[error("an if branch must contain at least one statement")]
    EmptyBranch,
    #[error("local `{name}` is never used")]
    UnusedLocal { name: String },
}

struct LocalDef {
    name: String,
    init: SExpr,
    /// Declaration order; a local's initializer may only reference locals
    /// declared strictly before it.
    order: usize,
    uses: usize,
}

struct Lowerer {
    kind: AluKind,
    state_vars: Vec<String>,
    packet_operands: Vec<String>,
    frames: Vec<Vec<LocalDef>>,
    slots: Vec<HoleSlot>,
    ordinals: HashMap<HoleKind, u32>,
    next_local_order: usize,
}

pub(super) fn lower(surface: SurfaceProgram, expected_name: &str) -> Result<AluProgram, ValidationError> {
    if surface.name != expected_name {
        return Err(ValidationError::NameMismatch {
            declared: surface.name,
            expected: expected_name.to_string(),
        });
    }
    let mut seen = BTreeSet::new();
    for (name, _) in surface.state_vars.iter().chain(&surface.packet_operands) {
        if !seen.insert(name.clone()) {
            return Err(ValidationError::DuplicateDeclaration { name: name.clone() });
        }
    }
    match surface.kind {
        AluKind::Stateless => {
            if let Some((name, _)) = surface.state_vars.first() {
                return Err(ValidationError::StatelessWithState { name: name.clone() });
            }
        }
        AluKind::Stateful => {
            if surface.state_vars.is_empty() {
                return Err(ValidationError::StatefulWithoutState);
            }
        }
    }

    let mut lowerer = Lowerer {
        kind: surface.kind,
        state_vars: surface.state_vars.into_iter().map(|(n, _)| n).collect(),
        packet_operands: surface.packet_operands.into_iter().map(|(n, _)| n).collect(),
        frames: Vec::new(),
        slots: Vec::new(),
        ordinals: HashMap::new(),
        next_local_order: 0,
    };
    let (body, returns, _) = lowerer.block(&surface.body, &BTreeSet::new())?;
    if !returns {
        return Err(ValidationError::MissingReturnPath);
    }
    Ok(AluProgram {
        name: expected_name.to_string(),
        kind: lowerer.kind,
        state_vars: lowerer.state_vars,
        packet_operands: lowerer.packet_operands,
        body,
        hole_slots: lowerer.slots,
    })
}

impl Lowerer {
    fn push_slot(&mut self, kind: HoleKind) -> usize {
        let ordinal = self.ordinals.entry(kind).or_insert(0);
        self.slots.push(HoleSlot { kind, ordinal: *ordinal });
        *ordinal += 1;
        self.slots.len() - 1
    }

    fn name_in_scope(&self, name: &str) -> bool {
        self.state_vars.iter().any(|s| s == name)
            || self.packet_operands.iter().any(|p| p == name)
            || self
                .frames
                .iter()
                .any(|f| f.iter().any(|d| d.name == name))
    }

    /// Lowers one statement list. `inherited` is the set of state variables
    /// already assigned on the control path entering this block. Returns the
    /// lowered statements, whether every path through the block returns, and
    /// the state variables newly assigned on paths that continue past it.
    fn block(
        &mut self,
        stmts: &[SStmt],
        inherited: &BTreeSet<usize>,
    ) -> Result<(Vec<Stmt>, bool, BTreeSet<usize>), ValidationError> {
        self.frames.push(Vec::new());
        let result = self.block_inner(stmts, inherited);
        let frame = self.frames.pop().expect("frame pushed above");
        if result.is_ok() {
            if let Some(unused) = frame.iter().find(|d| d.uses == 0) {
                return Err(ValidationError::UnusedLocal { name: unused.name.clone() });
            }
        }
        result
    }

    fn block_inner(
        &mut self,
        stmts: &[SStmt],
        inherited: &BTreeSet<usize>,
    ) -> Result<(Vec<Stmt>, bool, BTreeSet<usize>), ValidationError> {
        let mut assigned = inherited.clone();
        let mut new_assigned = BTreeSet::new();
        let mut out = Vec::new();
        let mut returns = false;
        for stmt in stmts {
            if returns {
                return Err(ValidationError::UnreachableStatement);
            }
            match stmt {
                SStmt::Let { name, value, .. } => {
                    if self.name_in_scope(name) {
                        return Err(ValidationError::DuplicateDeclaration { name: name.clone() });
                    }
                    let order = self.next_local_order;
                    self.next_local_order += 1;
                    self.frames.last_mut().expect("scope frame").push(LocalDef {
                        name: name.clone(),
                        init: value.clone(),
                        order,
                        uses: 0,
                    });
                }
                SStmt::Assign { target, value, .. } => {
                    if self
                        .frames
                        .iter()
                        .any(|f| f.iter().any(|d| d.name == *target))
                    {
                        return Err(ValidationError::AssignToLocal { name: target.clone() });
                    }
                    if self.packet_operands.iter().any(|p| p == target) {
                        return Err(ValidationError::AssignToOperand { name: target.clone() });
                    }
                    let index = self
                        .state_vars
                        .iter()
                        .position(|s| s == target)
                        .ok_or_else(|| ValidationError::Undeclared { name: target.clone() })?;
                    if !assigned.insert(index) {
                        return Err(ValidationError::DuplicateStateAssign { name: target.clone() });
                    }
                    new_assigned.insert(index);
                    let value = self.expr(value, usize::MAX)?;
                    out.push(Stmt::Assign { target: target.clone(), index, value });
                }
                SStmt::Return { value } => {
                    let value = self.expr(value, usize::MAX)?;
                    out.push(Stmt::Return { value });
                    returns = true;
                }
                SStmt::If { cond, then_body, else_body } => {
                    if then_body.is_empty() {
                        return Err(ValidationError::EmptyBranch);
                    }
                    let cond = self.expr(cond, usize::MAX)?;
                    let (then_l, t_ret, t_new) = self.block(then_body, &assigned)?;
                    let (else_l, e_ret, e_new) = self.block(else_body, &assigned)?;
                    if !t_ret {
                        assigned.extend(&t_new);
                        new_assigned.extend(&t_new);
                    }
                    if !e_ret {
                        assigned.extend(&e_new);
                        new_assigned.extend(&e_new);
                    }
                    returns = t_ret && e_ret;
                    out.push(Stmt::If { cond, then_body: then_l, else_body: else_l });
                }
            }
        }
        Ok((out, returns, new_assigned))
    }

    /// Lowers one expression, assigning hole slots in pre-order. References
    /// to locals substitute the local's initializer in place; `vis_limit`
    /// restricts which locals are visible (a substituted initializer only
    /// sees locals declared before its own `let`).
    fn expr(&mut self, expr: &SExpr, vis_limit: usize) -> Result<Expr, ValidationError> {
        Ok(match expr {
            SExpr::Int(v) => Expr::Int(*v),
            SExpr::Ident(name, _) => {
                if let Some(index) = self.state_vars.iter().position(|s| s == name) {
                    Expr::State { name: name.clone(), index }
                } else if let Some(index) =
                    self.packet_operands.iter().position(|p| p == name)
                {
                    Expr::Operand { name: name.clone(), index }
                } else if let Some((f, d, order)) = self.find_local(name, vis_limit) {
                    self.frames[f][d].uses += 1;
                    let init = self.frames[f][d].init.clone();
                    self.expr(&init, order)?
                } else {
                    return Err(ValidationError::Undeclared { name: name.clone() });
                }
            }
            SExpr::ConstHole => {
                let slot = self.push_slot(HoleKind::Immediate);
                Expr::Const { slot }
            }
            SExpr::Opt(arg) => {
                let slot = self.push_slot(HoleKind::OptCtrl);
                Expr::Opt { slot, arg: Box::new(self.expr(arg, vis_limit)?) }
            }
            SExpr::Mux(arms) => {
                let slot = self.push_slot(HoleKind::MuxCtrl(arms.len() as u32));
                let arms = arms
                    .iter()
                    .map(|a| self.expr(a, vis_limit))
                    .collect::<Result<Vec<_>, _>>()?;
                Expr::Mux { slot, arms }
            }
            SExpr::Not(arg) => Expr::Not(Box::new(self.expr(arg, vis_limit)?)),
            SExpr::Arith(l, r) => {
                let slot = self.push_slot(HoleKind::Opcode(super::ARITH_ARITY));
                Expr::Arith {
                    slot,
                    lhs: Box::new(self.expr(l, vis_limit)?),
                    rhs: Box::new(self.expr(r, vis_limit)?),
                }
            }
            SExpr::Rel(l, r) => {
                let slot = self.push_slot(HoleKind::Opcode(super::REL_ARITY));
                Expr::Rel {
                    slot,
                    lhs: Box::new(self.expr(l, vis_limit)?),
                    rhs: Box::new(self.expr(r, vis_limit)?),
                }
            }
            SExpr::Logic(l, r) => {
                let slot = self.push_slot(HoleKind::Opcode(super::LOGIC_ARITY));
                Expr::Logic {
                    slot,
                    lhs: Box::new(self.expr(l, vis_limit)?),
                    rhs: Box::new(self.expr(r, vis_limit)?),
                }
            }
        })
    }

    fn find_local(&self, name: &str, vis_limit: usize) -> Option<(usize, usize, usize)> {
        for (f, frame) in self.frames.iter().enumerate().rev() {
            for (d, def) in frame.iter().enumerate().rev() {
                if def.name == name && def.order < vis_limit {
                    return Some((f, d, def.order));
                }
            }
        }
        None
    }
}
