//! Pipeline state: the mutable registers of stateful ALU instances.
//!
//! Each stateful ALU instance owns a fixed-length block of words. A
//! [`StateLayout`] maps instance coordinates to offsets in one flat vector so
//! a [`StateSnapshot`] clones as a single memcpy; snapshots are taken per
//! packet for tracing, so that matters.

use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::Serialize;

use crate::Word;

/// Position of an ALU instance in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub stage: usize,
    pub alu: usize,
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage_{}_alu_{}", self.stage, self.alu)
    }
}

impl Coord {
    /// Parses the `stage_<s>_alu_<a>` form produced by `Display`.
    pub fn parse(text: &str) -> Option<Coord> {
        let rest = text.strip_prefix("stage_")?;
        let (stage_text, alu_text) = rest.split_once("_alu_")?;
        Some(Coord {
            stage: stage_text.parse().ok()?,
            alu: alu_text.parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Instance {
    coord: Coord,
    offset: usize,
    len: usize,
}

/// Where each stateful instance's words live in the flat value vector.
///
/// Instances are kept sorted by coordinate; each stage's instances occupy a
/// contiguous region, which lets the simulator snapshot one stage with a
/// single slice copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    instances: Vec<Instance>,
    /// `[start, end)` into `instances` for each stage.
    stage_ranges: Vec<(usize, usize)>,
    total_len: usize,
}

impl StateLayout {
    /// Builds a layout for a pipeline of `depth` stages from the stateful
    /// instances present, given as `(coord, state_len)`.
    pub fn new(depth: usize, mut instances: Vec<(Coord, usize)>) -> Self {
        instances.sort_by_key(|(c, _)| *c);
        let mut out = Vec::with_capacity(instances.len());
        let mut offset = 0;
        for (coord, len) in instances {
            debug_assert!(coord.stage < depth, "instance {} beyond depth {}", coord, depth);
            debug_assert!(len > 0, "stateful instance {} with no state", coord);
            out.push(Instance { coord, offset, len });
            offset += len;
        }
        let mut stage_ranges = Vec::with_capacity(depth);
        let mut i = 0;
        for stage in 0..depth {
            let start = i;
            while i < out.len() && out[i].coord.stage == stage {
                i += 1;
            }
            stage_ranges.push((start, i));
        }
        StateLayout { instances: out, stage_ranges, total_len: offset }
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Coordinates of every stateful instance, ascending.
    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        self.instances.iter().map(|inst| inst.coord)
    }

    /// `(offset, len)` of one instance's block.
    pub fn block(&self, coord: Coord) -> Option<(usize, usize)> {
        self.instances
            .binary_search_by_key(&coord, |inst| inst.coord)
            .ok()
            .map(|i| (self.instances[i].offset, self.instances[i].len))
    }

    /// `(offset, len)` of the contiguous region holding one stage's state.
    pub fn stage_region(&self, stage: usize) -> (usize, usize) {
        let (start, end) = self.stage_ranges[stage];
        if start == end {
            return (0, 0);
        }
        let offset = self.instances[start].offset;
        let last = &self.instances[end - 1];
        (offset, last.offset + last.len - offset)
    }
}

/// The values of every stateful instance at one instant.
#[derive(Debug, Clone)]
pub struct StateSnapshot {
    layout: Arc<StateLayout>,
    values: Vec<Word>,
}

impl PartialEq for StateSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.layout == other.layout && self.values == other.values
    }
}

impl Eq for StateSnapshot {}

impl StateSnapshot {
    pub fn zeroed(layout: Arc<StateLayout>) -> Self {
        let values = vec![0; layout.total_len()];
        StateSnapshot { layout, values }
    }

    pub fn from_values(layout: Arc<StateLayout>, values: Vec<Word>) -> Result<Self, StateError> {
        if values.len() != layout.total_len() {
            return Err(StateError::LengthMismatch {
                expected: layout.total_len(),
                got: values.len(),
            });
        }
        Ok(StateSnapshot { layout, values })
    }

    /// Builds a snapshot from per-instance values; every instance in the
    /// layout must be covered exactly once with the right arity.
    pub fn from_named(
        layout: Arc<StateLayout>,
        named: &[(Coord, Vec<Word>)],
    ) -> Result<Self, StateError> {
        let mut snap = StateSnapshot::zeroed(Arc::clone(&layout));
        let mut covered = vec![false; layout.instances.len()];
        for (coord, values) in named {
            let idx = layout
                .instances
                .binary_search_by_key(coord, |inst| inst.coord)
                .map_err(|_| StateError::UnknownInstance(coord.to_string()))?;
            let inst = &layout.instances[idx];
            if values.len() != inst.len {
                return Err(StateError::LengthMismatch { expected: inst.len, got: values.len() });
            }
            if covered[idx] {
                return Err(StateError::DuplicateInstance(coord.to_string()));
            }
            covered[idx] = true;
            snap.values[inst.offset..inst.offset + inst.len].copy_from_slice(values);
        }
        if let Some(i) = covered.iter().position(|&c| !c) {
            return Err(StateError::MissingInstance(layout.instances[i].coord.to_string()));
        }
        Ok(snap)
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[Word] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Word] {
        &mut self.values
    }

    /// One instance's values.
    pub fn get(&self, coord: Coord) -> Option<&[Word]> {
        let (offset, len) = self.layout.block(coord)?;
        Some(&self.values[offset..offset + len])
    }

    /// Renders `{stage_0_alu_0:[1,2],stage_1_alu_0:[3]}` — no spaces,
    /// coordinates ascending. The empty layout renders `{}`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("{");
        for (i, inst) in self.layout.instances.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&inst.coord.to_string());
            out.push_str(":[");
            for (j, v) in self.values[inst.offset..inst.offset + inst.len].iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&v.to_string());
            }
            out.push(']');
        }
        out.push('}');
        out
    }
}

impl Serialize for StateSnapshot {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.layout.instances.len()))?;
        for inst in &self.layout.instances {
            map.serialize_entry(
                &inst.coord.to_string(),
                &self.values[inst.offset..inst.offset + inst.len],
            )?;
        }
        map.end()
    }
}

/// Problems constructing or parsing state.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("no values given for stateful instance {0}")]
    MissingInstance(String),
    #[error("pipeline has no stateful instance {0}")]
    UnknownInstance(String),
    #[error("instance {0} given twice")]
    DuplicateInstance(String),
    #[error("expected {expected} state words, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Parses a state file: one `stage_<s>_alu_<a> = v0,v1,...` per line, `#`
/// comments, every stateful instance covered.
pub fn parse_state_file(source: &str, layout: Arc<StateLayout>) -> Result<StateSnapshot, StateError> {
    let mut named = Vec::new();
    for (i, raw_line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (coord_text, values_text) = line.split_once('=').ok_or_else(|| StateError::Parse {
            line: line_no,
            msg: "expected `stage_<s>_alu_<a> = v0,v1,...`".to_string(),
        })?;
        let coord = Coord::parse(coord_text.trim()).ok_or_else(|| StateError::Parse {
            line: line_no,
            msg: format!("invalid coordinate `{}`", coord_text.trim()),
        })?;
        let mut values = Vec::new();
        for piece in values_text.split(',') {
            let piece = piece.trim();
            let v: Word = piece.parse().map_err(|_| StateError::Parse {
                line: line_no,
                msg: format!("invalid value `{}`", piece),
            })?;
            values.push(v);
        }
        named.push((coord, values));
    }
    StateSnapshot::from_named(layout, &named)
}
