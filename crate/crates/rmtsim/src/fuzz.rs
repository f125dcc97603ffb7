//! Differential fuzzing of compiled machine code against specification
//! oracles: seeded traffic generation, exact-equality comparison with
//! replayable counterexamples, and mutation campaigns that prove the harness
//! catches wrong code.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::mcode::{MachineCode, SlotCatalog};
use crate::oracle::SpecOracle;
use crate::pipeline::Pipeline;
use crate::sim::{simulate, Phv, SimError, SimMode};
use crate::state::{StateLayout, StateSnapshot};
use crate::Word;

/// How to initialize pipeline state before a run.
#[derive(Debug, Clone)]
pub enum StateInit {
    RandomInRange { min: Word, max: Word },
    Explicit(StateSnapshot),
}

/// Traffic generation parameters. Defaults draw every container uniformly
/// from `[0, 10000]`, and state the same way.
#[derive(Debug, Clone)]
pub struct TrafficConfig {
    pub num_phvs: usize,
    /// Inclusive container bounds.
    pub container_min: Word,
    pub container_max: Word,
    pub seed: u64,
    pub state_init: StateInit,
}

impl TrafficConfig {
    pub fn new(num_phvs: usize, seed: u64) -> Self {
        TrafficConfig {
            num_phvs,
            container_min: 0,
            container_max: 10_000,
            seed,
            state_init: StateInit::RandomInRange { min: 0, max: 10_000 },
        }
    }
}

/// A fuzzing run that cannot be set up as configured.
#[derive(Debug, thiserror::Error)]
pub enum FuzzError {
    #[error("no PHVs requested")]
    NoPhvs,
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("mutations file, line {line}: {msg}")]
    MutationSyntax { line: usize, msg: String },
}

/// Draws the initial state and then the PHV stream from one seeded
/// generator, so a `(seed, config)` pair pins the whole input exactly.
pub fn generate_traffic(
    cfg: &TrafficConfig,
    phv_length: usize,
    layout: &Arc<StateLayout>,
) -> Result<(Vec<Phv>, StateSnapshot), FuzzError> {
    if cfg.num_phvs == 0 {
        return Err(FuzzError::NoPhvs);
    }
    if cfg.container_min > cfg.container_max {
        return Err(FuzzError::Config(format!(
            "container bounds reversed: {} > {}",
            cfg.container_min, cfg.container_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = match &cfg.state_init {
        StateInit::RandomInRange { min, max } => {
            if min > max {
                return Err(FuzzError::Config(format!(
                    "state bounds reversed: {} > {}",
                    min, max
                )));
            }
            let mut snap = StateSnapshot::zeroed(Arc::clone(layout));
            for value in snap.values_mut() {
                *value = rng.gen_range(*min..=*max);
            }
            snap
        }
        StateInit::Explicit(snap) => {
            if **snap.layout() != **layout {
                return Err(FuzzError::Config(
                    "explicit initial state does not match the pipeline's state layout".into(),
                ));
            }
            snap.clone()
        }
    };
    let phvs = (0..cfg.num_phvs)
        .map(|_| {
            Phv((0..phv_length)
                .map(|_| rng.gen_range(cfg.container_min..=cfg.container_max))
                .collect())
        })
        .collect();
    Ok((phvs, state))
}

/// Draws an in-range value for every slot of a catalog, in catalog order —
/// a uniformly random complete configuration.
pub fn random_machine_code(catalog: &SlotCatalog, rng: &mut impl Rng) -> MachineCode {
    let pairs = catalog
        .entries()
        .iter()
        .map(|e| (e.name.clone(), rng.gen_range(e.lo..e.hi) as u32))
        .collect();
    MachineCode::from_pairs(pairs).expect("catalog names are unique")
}

pub fn random_machine_code_seeded(catalog: &SlotCatalog, seed: u64) -> MachineCode {
    random_machine_code(catalog, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// The complete, replayable record of one disagreement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Index of the PHV (same position in input and output traces).
    pub entry: usize,
    /// Exit tick of the mismatching output entry.
    pub tick: u64,
    /// Traffic seed that reproduces the run.
    pub seed: u64,
    pub input_phv: Phv,
    pub expected_phv: Phv,
    pub actual_phv: Phv,
    /// Schema-mapped state after this PHV, as `(variable, value)` pairs.
    pub expected_state: Vec<(String, Word)>,
    pub actual_state: Vec<(String, Word)>,
    /// Paths that differ, e.g. `phv[1]` or `state stage_0_alu_0[0]`.
    pub mismatches: Vec<String>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "counterexample at entry {} (tick {}), seed {}",
            self.entry, self.tick, self.seed
        )?;
        writeln!(f, "  input phv:      {}", self.input_phv)?;
        writeln!(f, "  expected phv:   {}", self.expected_phv)?;
        writeln!(f, "  actual phv:     {}", self.actual_phv)?;
        let render = |pairs: &[(String, Word)]| {
            if pairs.is_empty() {
                "(none)".to_string()
            } else {
                pairs
                    .iter()
                    .map(|(name, value)| format!("{}={}", name, value))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        writeln!(f, "  expected state: {}", render(&self.expected_state))?;
        writeln!(f, "  actual state:   {}", render(&self.actual_state))?;
        write!(f, "  mismatches:     {}", self.mismatches.join(", "))
    }
}

/// Outcome of one differential run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Pass,
    Fail(Box<Counterexample>),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail(ce) => write!(f, "fail at entry {} (tick {})", ce.entry, ce.tick),
        }
    }
}

/// Runs pipeline (tick-accurate) and oracle over the same generated traffic
/// and compares output PHVs and schema-mapped exit state with exact
/// equality. Stops at the first mismatch and returns it as a replayable
/// counterexample.
pub fn fuzz_test(
    pipeline: &Pipeline,
    oracle: &SpecOracle,
    cfg: &TrafficConfig,
) -> Result<Verdict, FuzzError> {
    oracle
        .validate_schema(pipeline.state_layout())
        .map_err(FuzzError::Schema)?;
    let (phvs, initial_state) = generate_traffic(cfg, pipeline.phv_length(), pipeline.state_layout())?;
    let sim = simulate(pipeline, &phvs, &initial_state, SimMode::TickAccurate)?;
    let mut oracle_state = oracle.project_state(&initial_state);
    for (i, phv) in phvs.iter().enumerate() {
        let expected_phv = oracle.transfer(phv, &mut oracle_state);
        let entry = &sim.output.entries[i];
        let mut mismatches = Vec::new();
        if expected_phv.0.len() != entry.phv.0.len() {
            mismatches.push(format!(
                "phv length ({} vs {})",
                expected_phv.0.len(),
                entry.phv.0.len()
            ));
        } else {
            for c in 0..expected_phv.0.len() {
                if expected_phv.0[c] != entry.phv.0[c] {
                    mismatches.push(format!("phv[{}]", c));
                }
            }
        }
        let actual_state: Vec<Word> = oracle
            .schema()
            .iter()
            .map(|b| entry.state.get(b.coord).expect("schema validated")[b.var])
            .collect();
        for (k, binding) in oracle.schema().iter().enumerate() {
            if actual_state[k] != oracle_state[k] {
                mismatches.push(format!("state {}", binding));
            }
        }
        if !mismatches.is_empty() {
            let name = |k: usize| oracle.schema()[k].to_string();
            return Ok(Verdict::Fail(Box::new(Counterexample {
                entry: i,
                tick: entry.tick,
                seed: cfg.seed,
                input_phv: phv.clone(),
                expected_phv,
                actual_phv: entry.phv.clone(),
                expected_state: oracle_state
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (name(k), v))
                    .collect(),
                actual_state: actual_state
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (name(k), v))
                    .collect(),
                mismatches,
            })));
        }
    }
    Ok(Verdict::Pass)
}

/// What a mutation is declared to do to pipeline semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Expectation {
    Pass,
    Fail,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Pass => write!(f, "pass"),
            Expectation::Fail => write!(f, "fail"),
        }
    }
}

/// One single-slot machine-code edit with its declared consequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mutation {
    pub label: String,
    pub slot: String,
    pub value: u32,
    pub expect: Expectation,
}

/// Parses a mutations file: one `label: slot = value expect pass|fail` per
/// line, `#` comments.
pub fn parse_mutations(source: &str) -> Result<Vec<Mutation>, FuzzError> {
    let mut mutations = Vec::new();
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
        let syntax = |msg: String| FuzzError::MutationSyntax { line: line_no, msg };
        let (label, rest) = line
            .split_once(':')
            .ok_or_else(|| syntax("expected `label: slot = value expect pass|fail`".into()))?;
        let label = label.trim();
        if label.is_empty() {
            return Err(syntax("empty label".into()));
        }
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        if tokens.len() != 5 || tokens[1] != "=" || tokens[3] != "expect" {
            return Err(syntax("expected `label: slot = value expect pass|fail`".into()));
        }
        let value: u32 = tokens[2]
            .parse()
            .map_err(|_| syntax(format!("invalid value `{}`", tokens[2])))?;
        let expect = match tokens[4] {
            "pass" => Expectation::Pass,
            "fail" => Expectation::Fail,
            other => return Err(syntax(format!("expected `pass` or `fail`, found `{}`", other))),
        };
        mutations.push(Mutation {
            label: label.to_string(),
            slot: tokens[0].to_string(),
            value,
            expect,
        });
    }
    Ok(mutations)
}

/// What actually happened when a mutation ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MutationOutcome {
    Verdict(Verdict),
    /// The edit could not even be applied or bound.
    Error(String),
}

/// One row of a campaign report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutationRecord {
    pub label: String,
    pub slot: String,
    pub value: u32,
    pub expect: Expectation,
    pub outcome: MutationOutcome,
}

impl MutationRecord {
    /// Whether the outcome matches the declared expectation.
    pub fn met(&self) -> bool {
        match (&self.expect, &self.outcome) {
            (Expectation::Pass, MutationOutcome::Verdict(Verdict::Pass)) => true,
            (Expectation::Fail, MutationOutcome::Verdict(Verdict::Fail(_))) => true,
            _ => false,
        }
    }
}

/// Results of a whole mutation campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    /// Verdict of the unmutated machine code (must pass for the campaign to
    /// mean anything).
    pub baseline: Verdict,
    pub records: Vec<MutationRecord>,
}

impl CampaignReport {
    pub fn expectations_met(&self) -> bool {
        self.baseline.is_pass() && self.records.iter().all(MutationRecord::met)
    }

    /// `(met, missed)` counts over the mutation rows.
    pub fn counts(&self) -> (usize, usize) {
        let met = self.records.iter().filter(|r| r.met()).count();
        (met, self.records.len() - met)
    }

    /// Human-readable table, one line per mutation plus a summary line.
    pub fn table_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("baseline: {}\n", self.baseline);
        for r in &self.records {
            let outcome = match &r.outcome {
                MutationOutcome::Verdict(v) => v.to_string(),
                MutationOutcome::Error(e) => format!("error: {}", e),
            };
            let _ = writeln!(
                out,
                "{}: {} = {} expect {} -> {} [{}]",
                r.label,
                r.slot,
                r.value,
                r.expect,
                outcome,
                if r.met() { "ok" } else { "MISSED" }
            );
        }
        let (met, missed) = self.counts();
        let _ = writeln!(
            out,
            "summary: {}/{} expectations met{}",
            met,
            met + missed,
            if self.baseline.is_pass() { "" } else { ", baseline FAILED" }
        );
        out
    }
}

/// Applies each single-slot edit to the base machine code, binds it onto the
/// blueprint, fuzzes it against the oracle, and records whether the verdict
/// matches the declared expectation. The unmutated base runs first as a
/// baseline.
pub fn mutation_campaign(
    pipeline: &Pipeline,
    base_mc: &MachineCode,
    oracle: &SpecOracle,
    cfg: &TrafficConfig,
    mutations: &[Mutation],
) -> Result<CampaignReport, FuzzError> {
    let base_bound = pipeline
        .bind(base_mc)
        .map_err(|e| FuzzError::Config(format!("base machine code: {}", e)))?;
    let baseline = fuzz_test(&base_bound, oracle, cfg)?;
    let mut records = Vec::with_capacity(mutations.len());
    for m in mutations {
        let outcome = match base_mc.with_value(&m.slot, m.value) {
            None => MutationOutcome::Error(format!(
                "slot `{}` is not in the base machine code",
                m.slot
            )),
            Some(edited) => match pipeline.bind(&edited) {
                Err(e) => MutationOutcome::Error(e.to_string()),
                Ok(bound) => MutationOutcome::Verdict(fuzz_test(&bound, oracle, cfg)?),
            },
        };
        records.push(MutationRecord {
            label: m.label.clone(),
            slot: m.slot.clone(),
            value: m.value,
            expect: m.expect,
            outcome,
        });
    }
    Ok(CampaignReport { baseline, records })
}
