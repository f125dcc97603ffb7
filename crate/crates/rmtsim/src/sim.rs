//! Tick-accurate and sequential execution of a bound pipeline over a stream
//! of PHVs.
//!
//! In tick-accurate mode one PHV enters per tick and every in-flight PHV
//! advances one stage per tick; stages execute last-first within a tick so
//! each PHV reads state already updated by all earlier PHVs at that stage.
//! Sequential mode runs each PHV through the whole pipeline before admitting
//! the next. Both modes produce the same output PHVs and the same final
//! state; tick numbering is shared so their output traces are directly
//! comparable.
//!
//! Trace snapshots: an input entry records the full pipeline state at the
//! PHV's entry tick (schedule-dependent for later stages, by design). An
//! output entry records, per stage, the state immediately after this PHV
//! executed that stage — a schedule-independent view that is identical
//! across modes and is what specification oracles compare against.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::alu::eval_bound;
use crate::pipeline::Pipeline;
use crate::state::{StateError, StateSnapshot};
use crate::Word;

/// A packet header vector: one 32-bit container per field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Phv(pub Vec<Word>);

impl fmt::Display for Phv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v)?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceRole {
    Input,
    Output,
}

/// One trace record: a PHV at a tick, with a state snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub tick: u64,
    pub phv: Phv,
    pub state: StateSnapshot,
}

/// Ordered trace of pipeline entry or exit events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub role: TraceRole,
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    fn new(role: TraceRole, capacity: usize) -> Self {
        Trace { role, entries: Vec::with_capacity(capacity) }
    }

    /// Line-oriented text form, one entry per line:
    /// `tick=<t> phv=[c0,c1] state={stage_0_alu_0:[v0],...}`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let _ = writeln!(
                out,
                "tick={} phv={} state={}",
                entry.tick,
                entry.phv,
                entry.state.to_text()
            );
        }
        out
    }
}

/// Execution schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    TickAccurate,
    Sequential,
}

/// A simulation that cannot run.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("PHV {index} has {got} containers, pipeline expects {expected}")]
    PhvLengthMismatch { index: usize, expected: usize, got: usize },
    #[error("initial state does not cover the pipeline: {0}")]
    StateCoverage(#[from] StateError),
    #[error("pipeline is not bound to machine code")]
    UnboundPipeline,
}

/// Everything a completed simulation produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub input: Trace,
    pub output: Trace,
    pub final_state: StateSnapshot,
}

/// Reusable per-run buffers so the hot loop never allocates.
pub(crate) struct StageScratch {
    outputs: Vec<Word>,
    operands: Vec<Word>,
    /// Operand stack for flattened ALU bodies.
    stack: Vec<Word>,
}

impl StageScratch {
    pub(crate) fn new(width: usize) -> Self {
        StageScratch {
            outputs: vec![0; width],
            operands: Vec::with_capacity(8),
            stack: Vec::with_capacity(16),
        }
    }
}

/// Executes one stage over a PHV in place: every ALU reads its operands from
/// the incoming PHV (through its input muxes) and runs, then every output
/// mux overwrites its container with its selected ALU's result.
pub(crate) fn exec_stage(
    pipeline: &Pipeline,
    stage_idx: usize,
    phv: &mut [Word],
    state: &mut [Word],
    scratch: &mut StageScratch,
) {
    let stage = &pipeline.stages()[stage_idx];
    for (a, alu) in stage.alus.iter().enumerate() {
        scratch.operands.clear();
        for &ctrl in &alu.input_ctrls {
            scratch.operands.push(phv[ctrl as usize]);
        }
        let local = &mut state[alu.state_offset..alu.state_offset + alu.state_len];
        scratch.outputs[a] = match &alu.compiled {
            Some(tape) => tape.run(&scratch.operands, local, &mut scratch.stack),
            None => eval_bound(&alu.program, &alu.bindings, &scratch.operands, local),
        };
    }
    for (c, &ctrl) in stage.output_ctrls.iter().enumerate() {
        phv[c] = scratch.outputs[ctrl as usize];
    }
}

/// Rebuilds the snapshot on the pipeline's own layout, verifying it covers
/// exactly the pipeline's stateful instances.
fn normalize_state(pipeline: &Pipeline, snapshot: &StateSnapshot) -> Result<StateSnapshot, SimError> {
    let want = pipeline.state_layout();
    let got = snapshot.layout();
    for coord in want.coords() {
        let (_, want_len) = want.block(coord).unwrap();
        match got.block(coord) {
            None => {
                return Err(StateError::MissingInstance(coord.to_string()).into());
            }
            Some((_, got_len)) if got_len != want_len => {
                return Err(StateError::LengthMismatch { expected: want_len, got: got_len }.into());
            }
            Some(_) => {}
        }
    }
    for coord in got.coords() {
        if want.block(coord).is_none() {
            return Err(StateError::UnknownInstance(coord.to_string()).into());
        }
    }
    let mut normalized = StateSnapshot::zeroed(want.clone());
    for coord in want.coords() {
        let (offset, len) = want.block(coord).unwrap();
        normalized.values_mut()[offset..offset + len].copy_from_slice(snapshot.get(coord).unwrap());
    }
    Ok(normalized)
}

struct InFlight {
    containers: Vec<Word>,
    entry_tick: u64,
    /// Per-stage state captured right after this PHV executed each stage;
    /// becomes the output-entry snapshot at exit.
    acc: StateSnapshot,
}

/// A stepwise tick-accurate simulation: inject PHVs, advance tick by tick,
/// collect traces. [`simulate`] drives this to completion; the stepping API
/// is exposed for debugging.
pub struct SimRun<'p> {
    pipeline: &'p Pipeline,
    live: StateSnapshot,
    /// `slots[s]` holds the PHV that will execute stage `s` on the next tick.
    slots: Vec<Option<InFlight>>,
    pending: VecDeque<Phv>,
    tick: u64,
    input: Trace,
    output: Trace,
    scratch: StageScratch,
}

impl<'p> SimRun<'p> {
    pub fn new(pipeline: &'p Pipeline, initial_state: &StateSnapshot) -> Result<Self, SimError> {
        if !pipeline.is_bound() {
            return Err(SimError::UnboundPipeline);
        }
        let live = normalize_state(pipeline, initial_state)?;
        Ok(SimRun {
            pipeline,
            live,
            slots: (0..pipeline.depth()).map(|_| None).collect(),
            pending: VecDeque::new(),
            tick: 0,
            input: Trace::new(TraceRole::Input, 0),
            output: Trace::new(TraceRole::Output, 0),
            scratch: StageScratch::new(pipeline.width()),
        })
    }

    /// Queues a PHV for admission (one per tick, in order).
    pub fn inject(&mut self, phv: Phv) -> Result<(), SimError> {
        if phv.0.len() != self.pipeline.phv_length() {
            return Err(SimError::PhvLengthMismatch {
                index: self.input.entries.len() + self.pending.len(),
                expected: self.pipeline.phv_length(),
                got: phv.0.len(),
            });
        }
        self.pending.push_back(phv);
        Ok(())
    }

    /// Advances one tick; returns whether a PHV exited the last stage.
    fn step_tick(&mut self) -> bool {
        let depth = self.pipeline.depth();
        if let Some(phv) = self.pending.pop_front() {
            debug_assert!(self.slots[0].is_none(), "stage 0 vacates every tick");
            self.input.entries.push(TraceEntry {
                tick: self.tick,
                phv: phv.clone(),
                state: self.live.clone(),
            });
            self.slots[0] = Some(InFlight {
                containers: phv.0,
                entry_tick: self.tick,
                acc: self.live.clone(),
            });
        }
        let mut exited = false;
        for s in (0..depth).rev() {
            if let Some(mut flight) = self.slots[s].take() {
                exec_stage(
                    self.pipeline,
                    s,
                    &mut flight.containers,
                    self.live.values_mut(),
                    &mut self.scratch,
                );
                let (offset, len) = self.pipeline.state_layout().stage_region(s);
                flight.acc.values_mut()[offset..offset + len]
                    .copy_from_slice(&self.live.values()[offset..offset + len]);
                if s + 1 == depth {
                    self.output.entries.push(TraceEntry {
                        tick: flight.entry_tick + depth as u64 - 1,
                        phv: Phv(flight.containers),
                        state: flight.acc,
                    });
                    exited = true;
                } else {
                    self.slots[s + 1] = Some(flight);
                }
            }
        }
        self.tick += 1;
        exited
    }

    /// Advances one tick; returns the exit record if a PHV left the pipeline.
    pub fn step(&mut self) -> Option<&TraceEntry> {
        if self.step_tick() {
            self.output.entries.last()
        } else {
            None
        }
    }

    /// No PHV pending or in flight.
    pub fn is_idle(&self) -> bool {
        self.pending.is_empty() && self.slots.iter().all(Option::is_none)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn run_to_completion(&mut self) {
        while !self.is_idle() {
            self.step_tick();
        }
    }

    pub fn into_output(self) -> SimOutput {
        SimOutput { input: self.input, output: self.output, final_state: self.live }
    }
}

/// Runs a complete simulation: every PHV admitted in order, traces recorded
/// at entry and exit, final state returned.
pub fn simulate(
    pipeline: &Pipeline,
    phvs: &[Phv],
    initial_state: &StateSnapshot,
    mode: SimMode,
) -> Result<SimOutput, SimError> {
    match mode {
        SimMode::TickAccurate => {
            let mut run = SimRun::new(pipeline, initial_state)?;
            for phv in phvs {
                run.inject(phv.clone())?;
            }
            run.input.entries.reserve(phvs.len());
            run.output.entries.reserve(phvs.len());
            run.run_to_completion();
            Ok(run.into_output())
        }
        SimMode::Sequential => simulate_sequential(pipeline, phvs, initial_state),
    }
}

fn simulate_sequential(
    pipeline: &Pipeline,
    phvs: &[Phv],
    initial_state: &StateSnapshot,
) -> Result<SimOutput, SimError> {
    if !pipeline.is_bound() {
        return Err(SimError::UnboundPipeline);
    }
    let mut live = normalize_state(pipeline, initial_state)?;
    let depth = pipeline.depth();
    let mut scratch = StageScratch::new(pipeline.width());
    let mut input = Trace::new(TraceRole::Input, phvs.len());
    let mut output = Trace::new(TraceRole::Output, phvs.len());
    for (i, phv) in phvs.iter().enumerate() {
        if phv.0.len() != pipeline.phv_length() {
            return Err(SimError::PhvLengthMismatch {
                index: i,
                expected: pipeline.phv_length(),
                got: phv.0.len(),
            });
        }
        let tick = i as u64;
        input.entries.push(TraceEntry { tick, phv: phv.clone(), state: live.clone() });
        let mut containers = phv.0.clone();
        for s in 0..depth {
            exec_stage(pipeline, s, &mut containers, live.values_mut(), &mut scratch);
        }
        // With no other PHV in flight, the live state after the last stage
        // is exactly the per-stage capture the tick-accurate mode records.
        output.entries.push(TraceEntry {
            tick: tick + depth as u64 - 1,
            phv: Phv(containers),
            state: live.clone(),
        });
    }
    Ok(SimOutput { input, output, final_state: live })
}
