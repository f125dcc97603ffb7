//! Instruction-level simulator for RMT-style feed-forward packet pipelines.
//!
//! The crate models a programmable switch pipeline as a depth x width grid of
//! configurable ALUs. Packet header vectors (PHVs) enter one per tick; each
//! stage's input multiplexers pick ALU operands out of the PHV, every ALU
//! executes, and one output multiplexer per PHV container picks which ALU
//! result overwrites it. Stateful ALUs keep a private state vector that the
//! next PHV through the same stage observes.
//!
//! What an ALU can do is written in a small capability language (see
//! [`alu`]); the configurable pieces of a body (immediates, opcode choices,
//! optional-argument gates, selectors) are holes filled in from a flat
//! name/value machine-code listing (see [`mcode`]). A compiler targeting the
//! pipeline emits such a listing; this crate builds the pipeline ([`pipeline`]),
//! binds the listing, optionally specializes the ALU bodies against it
//! ([`pipeline::optimize`]), simulates traffic ([`sim`]), and differentially
//! checks the result against a reference oracle ([`fuzz`], [`oracle`]).

pub mod alu;
pub mod fuzz;
pub mod mcode;
pub mod oracle;
pub mod pipeline;
pub mod sim;
pub mod state;

pub use alu::{eval_alu, parse_alu, AluProgram};
pub use fuzz::{fuzz_test, generate_traffic, mutation_campaign, TrafficConfig, Verdict};
pub use mcode::{check_against_catalog, MachineCode, SlotCatalog};
pub use oracle::{OracleRegistry, SpecOracle};
pub use pipeline::{build_pipeline, HardwareSpec, Pipeline};
pub use sim::{simulate, Phv, SimMode, SimOutput, SimRun, Trace};
pub use state::{Coord, StateLayout, StateSnapshot};

/// Value domain of the machine: 32-bit two's-complement integers.
///
/// All arithmetic wraps; comparisons are signed. Machine-code values are
/// stored as `u32` and reinterpreted into this domain where they meet it
/// (immediates).
pub type Word = i32;
