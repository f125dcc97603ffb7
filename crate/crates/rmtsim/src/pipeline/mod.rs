//! Pipeline construction and configuration.
//!
//! A pipeline is a depth × width grid of ALU instances. Each instance reads
//! its packet operands through per-operand input multiplexers (fan-in =
//! PHV length); each stage writes every PHV container through a per-container
//! output multiplexer (fan-in = width). Data flows strictly forward: stage
//! `s` feeds only stage `s + 1`.
//!
//! Building yields an *unbound* pipeline plus a [`SlotCatalog`] naming every
//! configurable point — the contract a compiler targets. Binding applies a
//! [`MachineCode`] listing (refused unless it checks out clean against the
//! catalog); optimizing specializes every ALU body around its bound values.

mod describe;
mod hwspec;
mod optimize;

pub use hwspec::{HardwareSpec, HwSpecError};
pub use optimize::fully_specialized;

#[cfg(test)]
pub(crate) use optimize::specialize_program;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::alu::{compile_alu, AluProgram, CompiledAlu};
use crate::mcode::{
    check_against_catalog, CatalogEntry, Diagnostic, MachineCode, SlotCatalog, SlotKind,
};
use crate::state::{Coord, StateLayout};

/// One ALU placed in the grid.
#[derive(Debug, Clone)]
pub struct AluInstance {
    pub program: Arc<AluProgram>,
    pub coord: Coord,
    /// Block of this instance's state in the flat state vector
    /// (zero-length for stateless programs).
    pub state_offset: usize,
    pub state_len: usize,
    /// One control per packet operand, each selecting a PHV container.
    /// Empty until bound.
    pub input_ctrls: Vec<u32>,
    /// Hole values in `program.hole_slots` order. Empty until bound, and
    /// empty again once specialization has folded them into the body.
    pub bindings: Vec<u32>,
    /// Flattened form of the body, present only on specialized instances.
    /// The simulator prefers it over walking the expression tree.
    pub compiled: Option<Arc<CompiledAlu>>,
}

/// One stage: `width` ALUs plus one output multiplexer per PHV container.
#[derive(Debug, Clone)]
pub struct Stage {
    pub alus: Vec<AluInstance>,
    /// One control per PHV container, each selecting an ALU of this stage.
    /// Empty until bound.
    pub output_ctrls: Vec<u32>,
}

/// An executable pipeline blueprint. Unbound and bound pipelines are
/// immutable; simulation clones state per run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    spec: HardwareSpec,
    stages: Vec<Stage>,
    catalog: SlotCatalog,
    state_layout: Arc<StateLayout>,
    bound: bool,
    optimized: bool,
}

/// A hardware spec that cannot be turned into a pipeline.
#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Spec(#[from] HwSpecError),
    #[error("stage {stage}: unknown ALU `{name}`")]
    UnknownAlu { name: String, stage: usize },
    #[error(
        "stage {stage}: ALU `{name}` reads {operands} packet operands \
         but the PHV has only {phv_length} containers"
    )]
    OperandArityExceedsPhv { name: String, stage: usize, operands: usize, phv_length: usize },
}

/// Machine code that cannot be applied to a pipeline.
#[derive(Debug, thiserror::Error)]
pub enum BindError {
    #[error("machine code does not fit the pipeline:\n{}", render_diagnostics(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("an optimized pipeline cannot be rebound; bind the unoptimized blueprint")]
    RebindOptimized,
}

fn render_diagnostics(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for (i, d) in diags.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "  {}", d);
    }
    out
}

/// Builds an unbound pipeline from a shape and a library of parsed ALU
/// programs, deriving its slot catalog and state layout.
pub fn build_pipeline(
    spec: &HardwareSpec,
    library: &BTreeMap<String, Arc<AluProgram>>,
) -> Result<Pipeline, BuildError> {
    spec.validate()?;
    let mut grid: Vec<Vec<Arc<AluProgram>>> = Vec::with_capacity(spec.depth);
    let mut stateful = Vec::new();
    for (s, names) in spec.stage_assignments.iter().enumerate() {
        let mut row = Vec::with_capacity(spec.width);
        for (a, name) in names.iter().enumerate() {
            let program = library
                .get(name)
                .ok_or_else(|| BuildError::UnknownAlu { name: name.clone(), stage: s })?;
            if program.packet_operands.len() > spec.phv_length {
                return Err(BuildError::OperandArityExceedsPhv {
                    name: name.clone(),
                    stage: s,
                    operands: program.packet_operands.len(),
                    phv_length: spec.phv_length,
                });
            }
            if !program.state_vars.is_empty() {
                stateful.push((Coord { stage: s, alu: a }, program.state_vars.len()));
            }
            row.push(Arc::clone(program));
        }
        grid.push(row);
    }

    let state_layout = Arc::new(StateLayout::new(spec.depth, stateful));
    let mut stages = Vec::with_capacity(spec.depth);
    let mut entries = Vec::new();
    for (s, row) in grid.into_iter().enumerate() {
        let mut alus = Vec::with_capacity(spec.width);
        for (a, program) in row.into_iter().enumerate() {
            let coord = Coord { stage: s, alu: a };
            let path = coord.to_string();
            for (slot, name) in program.hole_slots.iter().zip(program.slot_names(&path)) {
                let (lo, hi) = slot.valid_range();
                entries.push(CatalogEntry { name, kind: SlotKind::AluHole, lo, hi });
            }
            for k in 0..program.packet_operands.len() {
                entries.push(CatalogEntry {
                    name: format!("{}_input_mux_{}_ctrl", path, k),
                    kind: SlotKind::InputMuxCtrl,
                    lo: 0,
                    hi: spec.phv_length as u64,
                });
            }
            let (state_offset, state_len) = state_layout.block(coord).unwrap_or((0, 0));
            alus.push(AluInstance {
                program,
                coord,
                state_offset,
                state_len,
                input_ctrls: Vec::new(),
                bindings: Vec::new(),
                compiled: None,
            });
        }
        for c in 0..spec.phv_length {
            entries.push(CatalogEntry {
                name: format!("stage_{}_output_mux_{}_ctrl", s, c),
                kind: SlotKind::OutputMuxCtrl,
                lo: 0,
                hi: spec.width as u64,
            });
        }
        stages.push(Stage { alus, output_ctrls: Vec::new() });
    }

    Ok(Pipeline {
        spec: spec.clone(),
        stages,
        catalog: SlotCatalog::new(entries),
        state_layout,
        bound: false,
        optimized: false,
    })
}

impl Pipeline {
    pub fn spec(&self) -> &HardwareSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.spec.depth
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn phv_length(&self) -> usize {
        self.spec.phv_length
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn catalog(&self) -> &SlotCatalog {
        &self.catalog
    }

    pub fn state_layout(&self) -> &Arc<StateLayout> {
        &self.state_layout
    }

    pub fn is_bound(&self) -> bool {
        self.bound
    }

    pub fn is_optimized(&self) -> bool {
        self.optimized
    }

    /// Applies a machine-code listing, yielding a new bound pipeline.
    /// `self` is unaffected (value semantics), so one blueprint can be bound
    /// many times with different listings.
    pub fn bind(&self, mc: &MachineCode) -> Result<Pipeline, BindError> {
        if self.optimized {
            return Err(BindError::RebindOptimized);
        }
        let diags = check_against_catalog(mc, &self.catalog);
        if !diags.is_empty() {
            return Err(BindError::Diagnostics(diags));
        }
        let mut bound = self.clone();
        for (s, stage) in bound.stages.iter_mut().enumerate() {
            for alu in stage.alus.iter_mut() {
                let path = alu.coord.to_string();
                alu.bindings = alu
                    .program
                    .slot_names(&path)
                    .iter()
                    .map(|name| mc.get(name).expect("checked against catalog"))
                    .collect();
                alu.input_ctrls = (0..alu.program.packet_operands.len())
                    .map(|k| {
                        mc.get(&format!("{}_input_mux_{}_ctrl", path, k))
                            .expect("checked against catalog")
                    })
                    .collect();
            }
            stage.output_ctrls = (0..self.spec.phv_length)
                .map(|c| {
                    mc.get(&format!("stage_{}_output_mux_{}_ctrl", s, c))
                        .expect("checked against catalog")
                })
                .collect();
        }
        bound.bound = true;
        Ok(bound)
    }

    /// Specializes every ALU body around its bound hole values: constants
    /// substituted, opcodes replaced by their concrete operations, selectors
    /// folded, constant subexpressions evaluated, constant-condition
    /// branches spliced in, unreachable statements dropped. The closed body
    /// is then flattened into a linear tape the simulator executes without
    /// tree walking. Behavior is preserved exactly; only the amount of work
    /// per evaluation shrinks.
    ///
    /// # Panics
    ///
    /// Panics if the pipeline is unbound — holes have no default values.
    pub fn optimize(&self) -> Pipeline {
        assert!(self.bound, "optimize requires a bound pipeline");
        let mut optimized = self.clone();
        for stage in optimized.stages.iter_mut() {
            for alu in stage.alus.iter_mut() {
                alu.program = Arc::new(optimize::specialize_program(&alu.program, &alu.bindings));
                alu.bindings = Vec::new();
                alu.compiled = compile_alu(&alu.program).map(Arc::new);
            }
        }
        optimized.optimized = true;
        optimized
    }

    /// Deterministic human-readable listing of the pipeline: shape, per-slot
    /// ALU bodies (specialized if optimized), mux wiring, bindings.
    pub fn describe(&self) -> String {
        describe::describe(self)
    }
}
