//! Machine code: the flat name/value listing a compiler emits for a pipeline.
//!
//! The wire format is line oriented: one `name = value` per line, `#` starts
//! a comment, names are `[a-z0-9_]+`, values are decimal unsigned 32-bit
//! integers. A [`SlotCatalog`] describes every slot a pipeline exposes;
//! [`check_against_catalog`] reports the complete diagnosis of a listing
//! against it, and binding refuses listings that do not check out clean.

use std::collections::HashMap;
use std::fmt;

/// A parsed machine-code listing. Pair order is preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineCode {
    pairs: Vec<(String, u32)>,
    index: HashMap<String, usize>,
}

/// A malformed machine-code listing.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum McodeError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {second_line}: `{name}` already defined on line {first_line}")]
    DuplicateName { name: String, first_line: usize, second_line: usize },
    #[error("line {line}: value of `{name}` does not fit in 32 bits")]
    ValueOverflow { name: String, line: usize },
}

impl MachineCode {
    /// Parses the line-oriented wire format.
    pub fn parse(source: &str) -> Result<Self, McodeError> {
        let mut pairs = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut first_lines: HashMap<String, usize> = HashMap::new();
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
            let (name, value_text) = line.split_once('=').ok_or_else(|| McodeError::Syntax {
                line: line_no,
                msg: "expected `name = value`".to_string(),
            })?;
            let name = name.trim();
            let value_text = value_text.trim();
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            {
                return Err(McodeError::Syntax {
                    line: line_no,
                    msg: format!("invalid name `{}` (allowed: [a-z0-9_]+)", name),
                });
            }
            if value_text.is_empty() || !value_text.chars().all(|c| c.is_ascii_digit()) {
                return Err(McodeError::Syntax {
                    line: line_no,
                    msg: format!("invalid value `{}` (decimal unsigned)", value_text),
                });
            }
            let value: u64 = value_text.parse().map_err(|_| McodeError::ValueOverflow {
                name: name.to_string(),
                line: line_no,
            })?;
            if value > u32::MAX as u64 {
                return Err(McodeError::ValueOverflow { name: name.to_string(), line: line_no });
            }
            if let Some(&first) = first_lines.get(name) {
                return Err(McodeError::DuplicateName {
                    name: name.to_string(),
                    first_line: first,
                    second_line: line_no,
                });
            }
            first_lines.insert(name.to_string(), line_no);
            index.insert(name.to_string(), pairs.len());
            pairs.push((name.to_string(), value as u32));
        }
        Ok(MachineCode { pairs, index })
    }

    /// Builds a listing from pairs directly; names must be unique.
    pub fn from_pairs(pairs: Vec<(String, u32)>) -> Result<Self, McodeError> {
        let mut index = HashMap::new();
        for (i, (name, _)) in pairs.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(McodeError::DuplicateName {
                    name: name.clone(),
                    first_line: 0,
                    second_line: 0,
                });
            }
        }
        Ok(MachineCode { pairs, index })
    }

    /// Renders the wire format. Comments are not preserved; pair order is.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.pairs {
            out.push_str(name);
            out.push_str(" = ");
            out.push_str(&value.to_string());
            out.push('\n');
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).map(|&i| self.pairs[i].1)
    }

    pub fn pairs(&self) -> &[(String, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Returns a copy with one slot rewritten, or `None` if the name is not
    /// present.
    pub fn with_value(&self, name: &str, value: u32) -> Option<Self> {
        let &i = self.index.get(name)?;
        let mut copy = self.clone();
        copy.pairs[i].1 = value;
        Some(copy)
    }
}

/// What kind of configuration point a catalog entry is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    AluHole,
    InputMuxCtrl,
    OutputMuxCtrl,
}

/// One named configuration point of a pipeline with its admissible values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: String,
    pub kind: SlotKind,
    /// Half-open admissible range `[lo, hi)`.
    pub lo: u64,
    pub hi: u64,
}

/// Every machine-code name a pipeline exposes, in deterministic order
/// (stages ascending; within a stage: each ALU's holes then its input-mux
/// controls; then the stage's output-mux controls).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotCatalog {
    entries: Vec<CatalogEntry>,
    index: HashMap<String, usize>,
}

impl SlotCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        SlotCatalog { entries, index }
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }
}

/// One problem found when checking a listing against a catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// A catalog slot has no value in the listing.
    MissingSlot(String),
    /// The listing names a slot the catalog does not have.
    UnknownName(String),
    /// A value falls outside the slot's admissible range.
    OutOfRange { name: String, value: u32, lo: u64, hi: u64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::MissingSlot(name) => write!(f, "missing slot `{}`", name),
            Diagnostic::UnknownName(name) => write!(f, "unknown name `{}`", name),
            Diagnostic::OutOfRange { name, value, lo, hi } => {
                write!(f, "`{}` = {} is outside [{},{})", name, value, lo, hi)
            }
        }
    }
}

/// Full diagnosis of a listing against a catalog. An empty result means the
/// listing covers every slot, names nothing else, and every value is in
/// range; only such listings may be bound.
pub fn check_against_catalog(mc: &MachineCode, catalog: &SlotCatalog) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for entry in catalog.entries() {
        match mc.get(&entry.name) {
            None => diags.push(Diagnostic::MissingSlot(entry.name.clone())),
            Some(value) => {
                if (value as u64) < entry.lo || (value as u64) >= entry.hi {
                    diags.push(Diagnostic::OutOfRange {
                        name: entry.name.clone(),
                        value,
                        lo: entry.lo,
                        hi: entry.hi,
                    });
                }
            }
        }
    }
    for (name, _) in mc.pairs() {
        if catalog.get(name).is_none() {
            diags.push(Diagnostic::UnknownName(name.clone()));
        }
    }
    diags
}
