//! Shared fixture loading for the integration tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rmtsim::alu::parse_alu;
use rmtsim::mcode::MachineCode;
use rmtsim::pipeline::{build_pipeline, HardwareSpec, Pipeline};
use rmtsim::AluProgram;

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_spec(name: &str) -> HardwareSpec {
    let path = fixture_root().join("specs").join(format!("{name}.toml"));
    HardwareSpec::load(&path)
        .unwrap_or_else(|e| panic!("spec fixture {}: {e}", path.display()))
}

/// Parses every ALU program a hardware spec references, keyed by name.
pub fn load_library(spec: &HardwareSpec) -> BTreeMap<String, Arc<AluProgram>> {
    spec.alu_names()
        .iter()
        .map(|name| {
            let path = fixture_root().join("alus").join(format!("{name}.alu"));
            let source = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
            let program = parse_alu(&source, name)
                .unwrap_or_else(|e| panic!("ALU fixture {name}: {e}"));
            (name.to_string(), Arc::new(program))
        })
        .collect()
}

/// Builds the unbound pipeline for a spec fixture.
pub fn blueprint(spec_name: &str) -> Pipeline {
    let spec = load_spec(spec_name);
    let library = load_library(&spec);
    build_pipeline(&spec, &library).unwrap_or_else(|e| panic!("build {spec_name}: {e}"))
}

pub fn load_mc(name: &str) -> MachineCode {
    let path = fixture_root().join("mc").join(format!("{name}.mc"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    MachineCode::parse(&text).unwrap_or_else(|e| panic!("mc fixture {name}: {e}"))
}

/// Builds and binds one of the configured fixtures.
pub fn bound(spec_name: &str, mc_name: &str) -> Pipeline {
    blueprint(spec_name)
        .bind(&load_mc(mc_name))
        .unwrap_or_else(|e| panic!("bind {mc_name} onto {spec_name}: {e}"))
}

/// Every shipped hardware-spec fixture name.
pub const ALL_SPECS: [&str; 13] = [
    "identity_2x2",
    "counter_1x1",
    "threshold_1x1",
    "sampler_2x1",
    "shape_4x2",
    "shape_2x1",
    "shape_2x2",
    "shape_3x2",
    "shape_1x1",
    "shape_4x5",
    "shape_3x5",
    "shape_3x3",
    "shape_1x5",
];

/// The four (spec, mc, oracle) triples with hand-written machine code.
pub const CONFIGURED: [(&str, &str, &str); 4] = [
    ("identity_2x2", "identity_2x2", "identity"),
    ("counter_1x1", "counter_1x1", "counter"),
    ("threshold_1x1", "threshold_1x1", "threshold"),
    ("sampler_2x1", "sampler_2x1", "sampler"),
];
