//! `rmtsim` command line: build, inspect, simulate, fuzz, and benchmark
//! configurable packet pipelines.
//!
//! Exit codes are a stable contract: 0 success/pass, 1 semantic failure
//! (a fuzz run or mutation campaign found a mismatch), 2 usage or
//! configuration error, 3 internal invariant violation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmtsim::alu::parse_alu;
use rmtsim::fuzz::{
    fuzz_test, generate_traffic, mutation_campaign, parse_mutations, FuzzError, StateInit,
    TrafficConfig, Verdict,
};
use rmtsim::mcode::MachineCode;
use rmtsim::oracle::OracleRegistry;
use rmtsim::pipeline::{build_pipeline, HardwareSpec, Pipeline};
use rmtsim::sim::{simulate, SimMode, SimOutput};
use rmtsim::state::{parse_state_file, StateSnapshot};
use rmtsim::{AluProgram, Word};

#[derive(Parser)]
#[command(
    name = "rmtsim",
    version,
    about = "Simulator for RMT-style programmable switch pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a pipeline and print its description or slot catalog
    Gen(GenArgs),
    /// Simulate generated traffic and print the input/output traces
    Sim(SimArgs),
    /// Differentially test a bound pipeline against a reference oracle
    Fuzz(FuzzArgs),
    /// Time unoptimized vs specialized simulation over identical traffic
    Bench(BenchArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Hardware spec TOML file
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Directory searched for `<name>.alu` sources; repeatable, searched in
    /// order. RMTSIM_ALU_PATH (colon-separated) appends more directories.
    #[arg(long = "alu-path", value_name = "DIR")]
    alu_path: Vec<PathBuf>,
}

#[derive(Args)]
struct TrafficArgs {
    /// Number of PHVs to generate
    #[arg(long, default_value_t = 10_000)]
    phvs: usize,
    /// Traffic seed; (seed, flags) pins the whole run
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest container value generated (inclusive)
    #[arg(long, default_value_t = 0)]
    min: Word,
    /// Largest container value generated (inclusive)
    #[arg(long, default_value_t = 10_000)]
    max: Word,
    /// Initial state: `zero`, `random:MIN:MAX`, or `file:PATH`
    #[arg(long = "state-init", default_value = "random:0:10000", value_name = "SPEC")]
    state_init: String,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Machine code file (`-` for stdin)
    #[arg(long, value_name = "FILE")]
    mc: Option<String>,
    /// List every machine-code slot with its admissible range
    #[arg(long)]
    catalog: bool,
    /// Specialize ALU bodies against the machine code before printing
    #[arg(long)]
    optimize: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Machine code file (`-` for stdin)
    #[arg(long, value_name = "FILE")]
    mc: String,
    #[command(flatten)]
    traffic: TrafficArgs,
    /// Execution schedule
    #[arg(long, value_enum, default_value_t = ModeArg::Tick)]
    mode: ModeArg,
    /// Specialize ALU bodies against the machine code before simulating
    #[arg(long)]
    optimize: bool,
    /// Write traces to this file instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Machine code file (`-` for stdin)
    #[arg(long, value_name = "FILE")]
    mc: String,
    #[command(flatten)]
    traffic: TrafficArgs,
    /// Reference oracle to compare against
    #[arg(long, value_name = "NAME")]
    oracle: String,
    /// Mutation list file; runs a campaign over every listed edit
    #[arg(long, value_name = "FILE")]
    mutations: Option<PathBuf>,
    /// Write structured JSON results to this file
    #[arg(long, value_name = "FILE")]
    results: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    build: BuildArgs,
    /// Machine code file (`-` for stdin)
    #[arg(long, value_name = "FILE")]
    mc: String,
    #[command(flatten)]
    traffic: TrafficArgs,
    /// Timed repetitions per variant; medians are reported
    #[arg(long, default_value_t = 5)]
    repeat: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Tick-accurate: one PHV enters per tick, stages run concurrently
    Tick,
    /// Sequential: each PHV runs to completion before the next starts
    Seq,
}

/// A failure carrying the exit code it maps to: 2 for configuration and
/// input problems, 3 for internal invariant violations.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

/// Setup problems (bad flags, bad files, schema mismatches) are the user's
/// to fix; a simulation error after setup validated is a bug in here.
fn map_fuzz_err(err: FuzzError) -> Failure {
    match err {
        FuzzError::Sim(e) => Failure::internal(e.to_string()),
        other => Failure::config(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Sim(args) => cmd_sim(args),
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load_spec(path: &Path) -> Result<HardwareSpec, Failure> {
    HardwareSpec::load(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn alu_search_dirs(cli_dirs: &[PathBuf]) -> Vec<PathBuf> {
    let mut dirs = cli_dirs.to_vec();
    if let Ok(env_paths) = std::env::var("RMTSIM_ALU_PATH") {
        dirs.extend(env_paths.split(':').filter(|p| !p.is_empty()).map(PathBuf::from));
    }
    if dirs.is_empty() {
        dirs.push(PathBuf::from("."));
    }
    dirs
}

fn load_library(
    spec: &HardwareSpec,
    dirs: &[PathBuf],
) -> Result<BTreeMap<String, Arc<AluProgram>>, Failure> {
    let mut library = BTreeMap::new();
    for name in spec.alu_names() {
        let file = format!("{name}.alu");
        let path = dirs.iter().map(|d| d.join(&file)).find(|p| p.is_file()).ok_or_else(|| {
            let searched: Vec<String> = dirs.iter().map(|d| d.display().to_string()).collect();
            Failure::config(format!(
                "unknown ALU `{name}`: no {file} found in search path ({})",
                searched.join(", ")
            ))
        })?;
        let source = fs::read_to_string(&path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let program = parse_alu(&source, name)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        library.insert(name.to_string(), Arc::new(program));
    }
    Ok(library)
}

fn read_mc(arg: &str) -> Result<MachineCode, Failure> {
    let text = if arg == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::config(format!("stdin: {e}")))?;
        buf
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::config(format!("{arg}: {e}")))?
    };
    MachineCode::parse(&text).map_err(|e| Failure::config(format!("machine code: {e}")))
}

fn blueprint(build: &BuildArgs) -> Result<Pipeline, Failure> {
    let spec = load_spec(&build.spec)?;
    let library = load_library(&spec, &alu_search_dirs(&build.alu_path))?;
    build_pipeline(&spec, &library).map_err(|e| Failure::config(e.to_string()))
}

fn bind(pipeline: &Pipeline, mc: &MachineCode) -> Result<Pipeline, Failure> {
    pipeline.bind(mc).map_err(|e| Failure::config(e.to_string()))
}

fn parse_state_init(text: &str, pipeline: &Pipeline) -> Result<StateInit, Failure> {
    if text == "zero" {
        return Ok(StateInit::Explicit(StateSnapshot::zeroed(Arc::clone(
            pipeline.state_layout(),
        ))));
    }
    if let Some(rest) = text.strip_prefix("random:") {
        let bounds = rest.split_once(':').and_then(|(min, max)| {
            Some((min.parse::<Word>().ok()?, max.parse::<Word>().ok()?))
        });
        let (min, max) = bounds.ok_or_else(|| {
            Failure::config(format!("invalid --state-init `{text}`: expected random:MIN:MAX"))
        })?;
        return Ok(StateInit::RandomInRange { min, max });
    }
    if let Some(path) = text.strip_prefix("file:") {
        let source =
            fs::read_to_string(path).map_err(|e| Failure::config(format!("{path}: {e}")))?;
        let snapshot = parse_state_file(&source, Arc::clone(pipeline.state_layout()))
            .map_err(|e| Failure::config(format!("{path}: {e}")))?;
        return Ok(StateInit::Explicit(snapshot));
    }
    Err(Failure::config(format!(
        "invalid --state-init `{text}`: expected `zero`, `random:MIN:MAX`, or `file:PATH`"
    )))
}

fn traffic_config(args: &TrafficArgs, pipeline: &Pipeline) -> Result<TrafficConfig, Failure> {
    let mut cfg = TrafficConfig::new(args.phvs, args.seed);
    cfg.container_min = args.min;
    cfg.container_max = args.max;
    cfg.state_init = parse_state_init(&args.state_init, pipeline)?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    fs::write(path, text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn cmd_gen(args: &GenArgs) -> Result<ExitCode, Failure> {
    if args.optimize && args.mc.is_none() {
        return Err(Failure::config("optimization requires machine code (--mc)"));
    }
    let mut pipeline = blueprint(&args.build)?;
    if let Some(mc_arg) = &args.mc {
        pipeline = bind(&pipeline, &read_mc(mc_arg)?)?;
        if args.optimize {
            pipeline = pipeline.optimize();
        }
    }
    if args.catalog {
        let mut out = String::new();
        for entry in pipeline.catalog().entries() {
            let _ = writeln!(out, "{} [{}, {})", entry.name, entry.lo, entry.hi);
        }
        print!("{out}");
    } else {
        println!("{}", pipeline.describe());
    }
    Ok(ExitCode::SUCCESS)
}

fn render_sim(out: &SimOutput) -> String {
    let mut text = String::from("# input trace\n");
    text.push_str(&out.input.to_text());
    text.push_str("# output trace\n");
    text.push_str(&out.output.to_text());
    text.push_str("# final state\n");
    text.push_str(&out.final_state.to_text());
    text.push('\n');
    text
}

fn cmd_sim(args: &SimArgs) -> Result<ExitCode, Failure> {
    let pipeline = bind(&blueprint(&args.build)?, &read_mc(&args.mc)?)?;
    let pipeline = if args.optimize { pipeline.optimize() } else { pipeline };
    let cfg = traffic_config(&args.traffic, &pipeline)?;
    let (phvs, state) = generate_traffic(&cfg, pipeline.phv_length(), pipeline.state_layout())
        .map_err(map_fuzz_err)?;
    let mode = match args.mode {
        ModeArg::Tick => SimMode::TickAccurate,
        ModeArg::Seq => SimMode::Sequential,
    };
    let out =
        simulate(&pipeline, &phvs, &state, mode).map_err(|e| Failure::internal(e.to_string()))?;
    let text = render_sim(&out);
    match &args.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fuzz(args: &FuzzArgs) -> Result<ExitCode, Failure> {
    let unbound = blueprint(&args.build)?;
    let mc = read_mc(&args.mc)?;
    let registry = OracleRegistry::builtin();
    let oracle = registry.get(&args.oracle).ok_or_else(|| {
        Failure::config(format!(
            "unknown oracle `{}`; registered oracles: {}",
            args.oracle,
            registry.names().join(", ")
        ))
    })?;
    let cfg = traffic_config(&args.traffic, &unbound)?;
    match &args.mutations {
        None => {
            let bound = bind(&unbound, &mc)?;
            let verdict = fuzz_test(&bound, oracle, &cfg).map_err(map_fuzz_err)?;
            if let Some(path) = &args.results {
                write_json(path, &verdict)?;
            }
            match verdict {
                Verdict::Pass => {
                    println!("pass: {} PHVs, seed {}", cfg.num_phvs, cfg.seed);
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::Fail(counterexample) => {
                    println!("fail\n{counterexample}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Some(mutations_path) => {
            let source = fs::read_to_string(mutations_path)
                .map_err(|e| Failure::config(format!("{}: {e}", mutations_path.display())))?;
            let mutations = parse_mutations(&source).map_err(map_fuzz_err)?;
            let report =
                mutation_campaign(&unbound, &mc, oracle, &cfg, &mutations).map_err(map_fuzz_err)?;
            print!("{}", report.table_text());
            if let Some(path) = &args.results {
                write_json(path, &report)?;
            }
            if report.expectations_met() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, Failure> {
    if args.repeat == 0 {
        return Err(Failure::config("--repeat must be at least 1"));
    }
    let bound = bind(&blueprint(&args.build)?, &read_mc(&args.mc)?)?;
    let optimized = bound.optimize();
    let cfg = traffic_config(&args.traffic, &bound)?;
    let (phvs, state) =
        generate_traffic(&cfg, bound.phv_length(), bound.state_layout()).map_err(map_fuzz_err)?;

    // Equality gate: refuse to time variants that disagree.
    let check = |pipeline: &Pipeline| {
        simulate(pipeline, &phvs, &state, SimMode::TickAccurate)
            .map_err(|e| Failure::internal(e.to_string()))
    };
    if check(&bound)? != check(&optimized)? {
        return Err(Failure::internal(
            "optimized and unoptimized traces diverge; refusing to report timings",
        ));
    }

    let time_once = |pipeline: &Pipeline| -> f64 {
        let started = Instant::now();
        let out = simulate(pipeline, &phvs, &state, SimMode::TickAccurate)
            .expect("equality gate already simulated this pipeline");
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        elapsed_ms
    };
    // Repetitions are paired and the order within each pair alternates, so
    // machine-wide drift (frequency scaling, noisy neighbors) hits both
    // variants evenly instead of whichever batch ran last.
    let mut unoptimized_samples = Vec::with_capacity(args.repeat);
    let mut optimized_samples = Vec::with_capacity(args.repeat);
    for rep in 0..args.repeat {
        if rep % 2 == 0 {
            unoptimized_samples.push(time_once(&bound));
            optimized_samples.push(time_once(&optimized));
        } else {
            optimized_samples.push(time_once(&optimized));
            unoptimized_samples.push(time_once(&bound));
        }
    }
    let unoptimized_ms = median(unoptimized_samples);
    let optimized_ms = median(optimized_samples);

    println!(
        "shape: depth={} width={} phv_length={}",
        bound.depth(),
        bound.width(),
        bound.phv_length()
    );
    println!("phvs: {}  repeat: {}", cfg.num_phvs, args.repeat);
    println!("unoptimized_median_ms: {unoptimized_ms:.3}");
    println!("optimized_median_ms: {optimized_ms:.3}");
    println!("speedup: {:.3}", unoptimized_ms / optimized_ms);
    Ok(ExitCode::SUCCESS)
}
