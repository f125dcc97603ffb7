//! Specification oracles: native reference implementations of the packet
//! program a compiler was asked to realize.
//!
//! An oracle is a transfer function over (PHV, oracle state) plus a schema
//! mapping each oracle-state word onto one state variable of one pipeline
//! instance. Differential fuzzing runs pipeline and oracle over the same
//! traffic and demands exact agreement on output PHVs and schema-mapped
//! state. The schema is part of the compiler-under-test's contract: state
//! the compiler placed elsewhere is not compared.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::pipeline::Pipeline;
use crate::sim::{exec_stage, Phv, StageScratch};
use crate::state::{Coord, StateLayout, StateSnapshot};
use crate::Word;

/// Maps one oracle-state word onto state variable `var` of the instance at
/// `coord`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct StateBinding {
    #[serde(serialize_with = "serialize_coord")]
    pub coord: Coord,
    pub var: usize,
}

fn serialize_coord<S: serde::Serializer>(coord: &Coord, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&coord.to_string())
}

impl fmt::Display for StateBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.coord, self.var)
    }
}

type TransferFn = dyn Fn(&Phv, &mut [Word]) -> Phv + Send + Sync;

/// A reference implementation to fuzz a pipeline against.
pub struct SpecOracle {
    name: String,
    schema: Vec<StateBinding>,
    transfer_fn: Box<TransferFn>,
}

impl fmt::Debug for SpecOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpecOracle")
            .field("name", &self.name)
            .field("schema", &self.schema)
            .finish_non_exhaustive()
    }
}

impl SpecOracle {
    pub fn new(
        name: impl Into<String>,
        schema: Vec<StateBinding>,
        transfer: impl Fn(&Phv, &mut [Word]) -> Phv + Send + Sync + 'static,
    ) -> Self {
        SpecOracle { name: name.into(), schema, transfer_fn: Box::new(transfer) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &[StateBinding] {
        &self.schema
    }

    pub fn state_len(&self) -> usize {
        self.schema.len()
    }

    /// Applies the reference semantics to one PHV, mutating oracle state.
    pub fn transfer(&self, phv: &Phv, state: &mut [Word]) -> Phv {
        debug_assert_eq!(state.len(), self.schema.len());
        (self.transfer_fn)(phv, state)
    }

    /// Checks the schema against a pipeline's stateful instances: every
    /// binding must name an existing state variable, and no variable may be
    /// bound twice.
    pub fn validate_schema(&self, layout: &StateLayout) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for binding in &self.schema {
            let (_, len) = layout.block(binding.coord).ok_or_else(|| {
                format!("oracle `{}`: pipeline has no stateful instance {}", self.name, binding.coord)
            })?;
            if binding.var >= len {
                return Err(format!(
                    "oracle `{}`: instance {} has {} state variables, schema names variable {}",
                    self.name, binding.coord, len, binding.var
                ));
            }
            if !seen.insert((binding.coord, binding.var)) {
                return Err(format!(
                    "oracle `{}`: state variable {} bound twice",
                    self.name, binding
                ));
            }
        }
        Ok(())
    }

    /// Extracts the oracle's initial state from a pipeline snapshot.
    pub fn project_state(&self, snapshot: &StateSnapshot) -> Vec<Word> {
        self.schema
            .iter()
            .map(|b| snapshot.get(b.coord).expect("schema validated")[b.var])
            .collect()
    }
}

/// Named oracles available to the fuzzing front end.
#[derive(Debug, Default)]
pub struct OracleRegistry {
    oracles: BTreeMap<String, Arc<SpecOracle>>,
}

fn stage_0_alu_0() -> Coord {
    Coord { stage: 0, alu: 0 }
}

impl OracleRegistry {
    /// The fixture oracles, matching the machine-code fixtures shipped under
    /// `fixtures/mc/`:
    ///
    /// - `identity`: every PHV passes through unchanged; no state.
    /// - `counter`: one counter increments per PHV; output container 0
    ///   carries its value.
    /// - `threshold`: adds container 0 into an accumulator whenever both
    ///   containers exceed 5000; every output container carries the
    ///   accumulator.
    /// - `sampler`: adds container 0 into an accumulator when it is nonzero,
    ///   otherwise adds 1; output container 0 carries the accumulator.
    pub fn builtin() -> Self {
        let mut registry = OracleRegistry::default();
        registry.register(SpecOracle::new("identity", vec![], |phv, _| phv.clone()));
        registry.register(SpecOracle::new(
            "counter",
            vec![StateBinding { coord: stage_0_alu_0(), var: 0 }],
            |_, state| {
                state[0] = state[0].wrapping_add(1);
                Phv(vec![state[0]])
            },
        ));
        registry.register(SpecOracle::new(
            "threshold",
            vec![StateBinding { coord: stage_0_alu_0(), var: 0 }],
            |phv, state| {
                if phv.0[0] > 5000 && phv.0[1] > 5000 {
                    state[0] = state[0].wrapping_add(phv.0[0]);
                }
                Phv(vec![state[0], state[0]])
            },
        ));
        registry.register(SpecOracle::new(
            "sampler",
            vec![StateBinding { coord: stage_0_alu_0(), var: 0 }],
            |phv, state| {
                let add = if phv.0[0] != 0 { phv.0[0] } else { 1 };
                state[0] = state[0].wrapping_add(add);
                Phv(vec![state[0]])
            },
        ));
        registry
    }

    pub fn register(&mut self, oracle: SpecOracle) {
        self.oracles.insert(oracle.name.clone(), Arc::new(oracle));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<SpecOracle>> {
        self.oracles.get(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.oracles.keys().map(String::as_str).collect()
    }
}

/// Builds the self-consistency oracle: the pipeline's own sequential
/// semantics, with a schema covering every state variable. Fuzzing a
/// pipeline against its own oracle must always pass; it smoke-tests the
/// harness itself.
pub fn oracle_from_pipeline(pipeline: &Pipeline) -> SpecOracle {
    assert!(pipeline.is_bound(), "oracle_from_pipeline requires a bound pipeline");
    let layout = pipeline.state_layout();
    let mut schema = Vec::with_capacity(layout.total_len());
    for coord in layout.coords() {
        let (_, len) = layout.block(coord).unwrap();
        for var in 0..len {
            schema.push(StateBinding { coord, var });
        }
    }
    let captured = pipeline.clone();
    SpecOracle::new("pipeline-self", schema, move |phv, state| {
        // The schema flattens the layout in layout order, so `state` is
        // exactly the pipeline's flat state vector.
        let mut scratch = StageScratch::new(captured.width());
        let mut containers = phv.0.clone();
        for s in 0..captured.depth() {
            exec_stage(&captured, s, &mut containers, state, &mut scratch);
        }
        Phv(containers)
    })
}
