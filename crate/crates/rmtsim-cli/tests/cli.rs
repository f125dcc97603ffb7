//! Black-box tests of the `rmtsim` binary: flag handling, output formats,
//! determinism, and the exit-code contract (0 pass, 1 semantic failure,
//! 2 usage/config, 3 internal invariant).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(rel: &str) -> String {
    fixture_root().join(rel).display().to_string()
}

fn rmtsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmtsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn gen_catalog_lists_all_sixteen_identity_slots() {
    let out = rmtsim(&[
        "gen",
        "--spec",
        &fixture("specs/identity_2x2.toml"),
        "--alu-path",
        &fixture("alus"),
        "--catalog",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 16);
    assert_eq!(lines[0], "stage_0_alu_0_opcode_0 [0, 2)");
    assert_eq!(lines[1], "stage_0_alu_0_immediate_0 [0, 4294967296)");
    assert_eq!(lines[15], "stage_1_output_mux_1_ctrl [0, 2)");
}

#[test]
fn gen_without_alu_sources_exits_two() {
    let out = rmtsim(&[
        "gen",
        "--spec",
        &fixture("specs/identity_2x2.toml"),
        "--alu-path",
        &fixture("specs"), // wrong directory on purpose
        "--catalog",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("unknown ALU `raw`"),
        "stderr names the missing ALU: {}",
        stderr(&out)
    );
}

#[test]
fn gen_optimize_without_mc_exits_two() {
    let out = rmtsim(&[
        "gen",
        "--spec",
        &fixture("specs/identity_2x2.toml"),
        "--alu-path",
        &fixture("alus"),
        "--optimize",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("optimization requires machine code"));
}

#[test]
fn gen_reads_alu_path_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_rmtsim"))
        .args(["gen", "--spec", &fixture("specs/counter_1x1.toml"), "--catalog"])
        .env("RMTSIM_ALU_PATH", fixture("alus"))
        .output()
        .expect("binary runs");
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn gen_describe_reflects_binding_states() {
    let spec = fixture("specs/counter_1x1.toml");
    let alus = fixture("alus");
    let unbound = rmtsim(&["gen", "--spec", &spec, "--alu-path", &alus]);
    assert_eq!(exit_code(&unbound), 0);
    assert!(stdout(&unbound).contains("unbound"));

    let mc = fixture("mc/counter_1x1.mc");
    let optimized = rmtsim(&["gen", "--spec", &spec, "--alu-path", &alus, "--mc", &mc, "--optimize"]);
    assert_eq!(exit_code(&optimized), 0);
    let text = stdout(&optimized);
    assert!(text.contains("optimized"), "{text}");
    assert!(!text.contains("opcode"), "specialized body keeps no holes: {text}");
}

#[test]
fn sim_identity_returns_inputs_and_is_deterministic() {
    let args = [
        "sim",
        "--spec",
        &fixture("specs/identity_2x2.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/identity_2x2.mc"),
        "--phvs",
        "3",
        "--seed",
        "42",
    ];
    let first = rmtsim(&args);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr(&first));
    let text = stdout(&first);

    let sections: Vec<&str> = text.split_inclusive('\n').collect();
    assert_eq!(sections[0], "# input trace\n");
    let inputs: Vec<&str> = text.lines().skip(1).take(3).collect();
    let outputs: Vec<&str> = text.lines().skip(5).take(3).collect();
    for (input, output) in inputs.iter().zip(&outputs) {
        let phv = |line: &str| {
            line.split_whitespace()
                .find(|field| field.starts_with("phv="))
                .expect("trace lines carry phv fields")
                .to_string()
        };
        assert_eq!(phv(input), phv(output), "identity preserves each phv");
    }

    let second = rmtsim(&args);
    assert_eq!(first.stdout, second.stdout, "same invocation is byte-identical");
}

#[test]
fn sim_accepts_machine_code_on_stdin() {
    let mc_text = std::fs::read_to_string(fixture("mc/counter_1x1.mc")).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_rmtsim"))
        .args([
            "sim",
            "--spec",
            &fixture("specs/counter_1x1.toml"),
            "--alu-path",
            &fixture("alus"),
            "--mc",
            "-",
            "--phvs",
            "2",
            "--state-init",
            "zero",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(mc_text.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("tick=0 phv=[1]"), "{text}");
    assert!(text.contains("tick=1 phv=[2]"), "{text}");
}

#[test]
fn sim_zero_phvs_exits_two() {
    let out = rmtsim(&[
        "sim",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--phvs",
        "0",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("no PHVs requested"));
}

#[test]
fn sim_writes_traces_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.txt");
    let out = rmtsim(&[
        "sim",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--phvs",
        "1",
        "--state-init",
        &format!("file:{}", fixture("state/counter_zero.state")),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).is_empty(), "traces went to the file, not stdout");
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains("# output trace\ntick=0 phv=[1] state={stage_0_alu_0:[1]}"), "{text}");
    assert!(text.ends_with("# final state\n{stage_0_alu_0:[1]}\n"), "{text}");
}

#[test]
fn fuzz_correct_counter_passes() {
    let out = rmtsim(&[
        "fuzz",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--oracle",
        "counter",
        "--phvs",
        "2000",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).starts_with("pass"));
}

#[test]
fn fuzz_mutated_counter_fails_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let mc_path = dir.path().join("over_count.mc");
    let base = std::fs::read_to_string(fixture("mc/counter_1x1.mc")).unwrap();
    std::fs::write(&mc_path, base.replace("immediate_0 = 1", "immediate_0 = 2")).unwrap();

    let out = rmtsim(&[
        "fuzz",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        mc_path.to_str().unwrap(),
        "--oracle",
        "counter",
        "--phvs",
        "2000",
        "--state-init",
        "zero",
    ]);
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("counterexample at entry 0 (tick 0)"), "{text}");
    assert!(text.contains("expected state: stage_0_alu_0[0]=1"), "{text}");
    assert!(text.contains("actual state:   stage_0_alu_0[0]=2"), "{text}");
}

#[test]
fn fuzz_unknown_oracle_exits_two_and_lists_registered() {
    let out = rmtsim(&[
        "fuzz",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--oracle",
        "nonesuch",
    ]);
    assert_eq!(exit_code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("unknown oracle `nonesuch`"), "{text}");
    for name in ["counter", "identity", "sampler", "threshold"] {
        assert!(text.contains(name), "registered oracle {name} is listed: {text}");
    }
}

#[test]
fn fuzz_campaign_reports_table_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.json");
    let out = rmtsim(&[
        "fuzz",
        "--spec",
        &fixture("specs/identity_2x2.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/identity_2x2.mc"),
        "--oracle",
        "identity",
        "--phvs",
        "2000",
        "--mutations",
        &fixture("mutations/identity.mut"),
        "--results",
        results.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("baseline: pass"), "{text}");
    assert!(text.contains("summary: 7/7 expectations met"), "{text}");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(results).unwrap()).unwrap();
    let records = json["records"].as_array().expect("records array");
    assert_eq!(records.len(), 7);
    assert_eq!(records[0]["label"], "shift_c0");
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mutations = dir.path().join("wrong.mut");
    // Declares a semantics-changing edit as preserving; the campaign must
    // catch the broken expectation and signal semantic failure.
    std::fs::write(&mutations, "wrong: stage_0_alu_0_immediate_0 = 2 expect pass\n").unwrap();
    let out = rmtsim(&[
        "fuzz",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--oracle",
        "counter",
        "--phvs",
        "500",
        "--mutations",
        mutations.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stdout(&out).contains("[MISSED]"), "{}", stdout(&out));
}

#[test]
fn bench_zero_phvs_exits_two() {
    let out = rmtsim(&[
        "bench",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--phvs",
        "0",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("no PHVs requested"));
}

#[test]
fn bench_reports_medians_and_speedup() {
    let out = rmtsim(&[
        "bench",
        "--spec",
        &fixture("specs/counter_1x1.toml"),
        "--alu-path",
        &fixture("alus"),
        "--mc",
        &fixture("mc/counter_1x1.mc"),
        "--phvs",
        "5000",
        "--repeat",
        "3",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("unoptimized_median_ms:"), "{text}");
    assert!(text.contains("optimized_median_ms:"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("speedup:")), "{text}");
}
