//! `iirforge`: design, export, emit, simulate and benchmark second-order IIR filters.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iirforge::bench::{self, BenchOutcome};
use iirforge::filterspec::{discretize, FrequencySpec};
use iirforge::hardware::{self, Datapath, IoFormat};
use iirforge::milp::{self, ModelFormats, ModelMode};
use iirforge::report::{DesignReport, ProblemSummary};
use iirforge::response::{response_csv, response_table, verify_spec};
use iirforge::search::{self, DesignProblem, Status};

use config::{DesignConfig, SpecSource};

pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_TIMED_OUT: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_NO_INPUT: u8 = 66;

#[derive(Debug, Parser)]
#[command(name = "iirforge", version, about = "Optimal multiplierless second-order IIR filter design")]
struct Cli {
    /// Search worker threads (default: available parallelism).
    #[arg(long, global = true, env = "IIRFORGE_THREADS")]
    threads: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design one filter, verify it and write result JSON, DOT and response CSV.
    Design(DesignArgs),
    /// Design over a word-length range and write a per-w CSV.
    Sweep(SweepArgs),
    /// Export the design model of one format pair as an LP file.
    ExportIlp(ExportArgs),
    /// Size the datapath of a result and write VHDL and DOT.
    Emit(EmitArgs),
    /// Compare the bit-accurate datapath with the exact reference.
    Simulate(SimulateArgs),
    /// Run the benchmark table and diff it against the expected values.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SpecArgs {
    /// Specification file (TOML).
    #[arg(long, conflicts_with = "benchmark", required_unless_present = "benchmark")]
    pub spec: Option<PathBuf>,
    /// Built-in benchmark such as lp1_0, lp4 or hp0.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub points_per_band: Option<usize>,
    /// Disable the symmetry-breaking constraint.
    #[arg(long)]
    pub no_sbc: bool,
    /// Inclusive MSB range of the b coefficients, e.g. `-3:1`.
    #[arg(long, value_parser = config::parse_range, allow_hyphen_values = true)]
    pub g_b_range: Option<(i32, i32)>,
    /// Inclusive MSB range of the a coefficients.
    #[arg(long, value_parser = config::parse_range, allow_hyphen_values = true)]
    pub g_a_range: Option<(i32, i32)>,
    /// Time limit per word length in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Step of the continuous verification scan.
    #[arg(long)]
    pub verify_step: Option<f64>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, short = 'w')]
    wordlength: Option<u32>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    from: u32,
    #[arg(long)]
    to: u32,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, short = 'w')]
    wordlength: Option<u32>,
    /// MSB of the a coefficients (default: top of the a range).
    #[arg(long, allow_hyphen_values = true)]
    g_a: Option<i32>,
    /// MSB of the b coefficients (default: top of the b range).
    #[arg(long, allow_hyphen_values = true)]
    g_b: Option<i32>,
    /// feasibility, max-zeros, min-b0..min-b2 or max-b0..max-b2.
    #[arg(long, default_value = "max-zeros")]
    objective: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct IoArgs {
    /// Result JSON written by `design`.
    #[arg(long)]
    result: PathBuf,
    /// Weight of the input sign bit.
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    msb_in: i32,
    /// Input LSB (default: 16-bit input).
    #[arg(long, allow_hyphen_values = true)]
    lsb_in: Option<i32>,
    /// Output LSB (default: output as wide as the input).
    #[arg(long, allow_hyphen_values = true)]
    lsb_out: Option<i32>,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[command(flatten)]
    io: IoArgs,
    /// VHDL entity name (default: the specification name).
    #[arg(long)]
    entity: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Number of uniformly random input samples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Input codes, one integer per line, instead of random samples.
    #[arg(long, conflicts_with = "zero")]
    input: Option<PathBuf>,
    /// All-zero input.
    #[arg(long)]
    zero: bool,
    /// Per-sample trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated benchmark ids to run.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Expected table (default: the shipped one).
    #[arg(long)]
    expected: Option<PathBuf>,
    #[arg(long)]
    points_per_band: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying a specific exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn no_input(path: &Path) -> anyhow::Error {
    Exit(EXIT_NO_INPUT, format!("cannot read {}", path.display())).into()
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|_| no_input(path))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Exit>() {
                Some(Exit(code, _)) => ExitCode::from(*code),
                None => ExitCode::FAILURE,
            }
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(EXIT_USAGE, msg.into()).into()
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Design(a) => cmd_design(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::ExportIlp(a) => cmd_export_ilp(cli, a),
        Command::Emit(a) => cmd_emit(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
    }
}

fn load_config(cli: &Cli, spec: &SpecArgs, wordlength: Option<u32>) -> Result<(FrequencySpec, DesignConfig)> {
    let source = match (&spec.spec, &spec.benchmark) {
        (Some(p), _) => SpecSource::File(read_input(p)?),
        (None, Some(b)) => SpecSource::Benchmark(b.clone()),
        (None, None) => return Err(usage("one of --spec or --benchmark is required")),
    };
    let (fs, cfg) = config::resolve(&source, spec, wordlength, cli.threads, cli.seed)?;
    Ok((fs, cfg))
}

fn print_config(cfg: &impl serde::Serialize) -> Result<u8> {
    println!("{}", serde_json::to_string_pretty(cfg)?);
    Ok(0)
}

fn problem_for(spec: &FrequencySpec, cfg: &DesignConfig, w: u32) -> Result<DesignProblem> {
    let grid = discretize(spec, cfg.points_per_band)?;
    let mut p = DesignProblem::new(spec.clone(), grid, w)?;
    if let Some(r) = cfg.g_b_range {
        p.g_b_range = r;
    }
    p.options = cfg.search_options();
    Ok(p)
}

fn summary_of(cfg: &DesignConfig, p: &DesignProblem) -> ProblemSummary {
    ProblemSummary {
        w: p.w,
        g_a_range: [p.options.g_a_range.0, p.options.g_a_range.1],
        g_b_range: [p.g_b_range.0, p.g_b_range.1],
        points_per_band: cfg.points_per_band,
        use_sbc: p.options.use_sbc,
        verify_step: cfg.verify_step,
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Optimal => 0,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::TimedOut => EXIT_TIMED_OUT,
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "Optimal",
        Status::Infeasible => "Infeasible",
        Status::TimedOut => "TimedOut",
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_design(cli: &Cli, a: &DesignArgs) -> Result<u8> {
    let (spec, cfg) = load_config(cli, &a.spec, a.wordlength)?;
    if cli.print_config {
        return print_config(&cfg);
    }
    let w = cfg.wordlength.ok_or_else(|| usage("--wordlength is required"))?;
    let p = problem_for(&spec, &cfg, w)?;
    let d = search::design_with_verification(&p, cfg.verify_step)?;
    let report = DesignReport::new(&spec, summary_of(&cfg, &p), &d);
    let stem = a.out.join(format!("{}_w{w}", spec.name));
    write_file(&stem.with_extension("json"), &report.to_json()?)?;
    let r = &d.result;
    if let Some(q) = &r.filter {
        let dot = iirforge::mcm::emit_dot(&[("a", &r.graph_a), ("b", &r.graph_b)]);
        write_file(&stem.with_extension("dot"), &dot)?;
        let csv = response_csv(&response_table(q, &spec, 1001));
        write_file(&a.out.join(format!("{}_w{w}_response.csv", spec.name)), &csv)?;
    }
    match r.status {
        Status::Optimal => println!(
            "{} w={w}: Optimal A={} (A_M={}, A_S={}) a'={:?} g_a={} b'={:?} g_b={} verified={} iterations={}",
            spec.name,
            r.a_total,
            r.a_m,
            r.a_s,
            r.filter.map(|q| q.a_int()).unwrap_or_default(),
            r.filter.map_or(0, |q| q.fmt_a.g),
            r.filter.map(|q| q.b_int()).unwrap_or_default(),
            r.filter.map_or(0, |q| q.fmt_b.g),
            d.verified,
            d.iterations
        ),
        s => println!("{} w={w}: {}", spec.name, status_name(s)),
    }
    if r.status == Status::Optimal && !d.verified {
        bail!("the optimum did not verify on the continuous specification");
    }
    Ok(status_code(r.status))
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<u8> {
    if a.from > a.to {
        return Err(usage(format!("empty word-length range {}..{}", a.from, a.to)));
    }
    let (spec, cfg) = load_config(cli, &a.spec, Some(a.from))?;
    if cli.print_config {
        return print_config(&cfg);
    }
    let p = problem_for(&spec, &cfg, a.from)?;
    let results = search::wordlength_sweep(&p, a.from, a.to)?;
    let mut csv = String::from("w,status,a_m,a_s,a_total,g_a,g_b,a1,a2,b0,b1,b2,verified,monotone\n");
    let mut prev: Option<u32> = None;
    let mut any_timeout = false;
    for (w, r) in (a.from..=a.to).zip(&results) {
        any_timeout |= r.status == Status::TimedOut;
        let verified = match (&r.filter, r.status) {
            (Some(q), Status::Optimal) => verify_spec(q, &spec, cfg.verify_step)?.is_verified(),
            _ => false,
        };
        let cost = (r.status == Status::Optimal).then_some(r.a_total);
        let monotone = match (prev, cost) {
            (Some(p), Some(c)) => c <= p,
            _ => true,
        };
        if cost.is_some() {
            prev = cost;
        }
        let codes = r
            .filter
            .filter(|_| cost.is_some())
            .map(|q| {
                let [a1, a2] = q.a_int();
                let [b0, b1, b2] = q.b_int();
                format!("{},{},{a1},{a2},{b0},{b1},{b2}", q.fmt_a.g, q.fmt_b.g)
            })
            .unwrap_or_else(|| ",,,,,,".into());
        let (am, asx, total) = match cost {
            Some(c) => (r.a_m.to_string(), r.a_s.to_string(), c.to_string()),
            None => (String::new(), String::new(), status_name(r.status).to_string()),
        };
        csv.push_str(&format!("{w},{},{am},{asx},{total},{codes},{verified},{monotone}\n", status_name(r.status)));
    }
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    let code = if any_timeout {
        EXIT_TIMED_OUT
    } else if prev.is_none() {
        EXIT_INFEASIBLE
    } else {
        0
    };
    Ok(code)
}

fn parse_mode(s: &str) -> Result<ModelMode> {
    let idx = |t: &str| -> Result<usize> {
        match t {
            "0" => Ok(0),
            "1" => Ok(1),
            "2" => Ok(2),
            _ => Err(usage(format!("unknown objective `{s}`"))),
        }
    };
    match s {
        "feasibility" => Ok(ModelMode::Feasibility),
        "max-zeros" => Ok(ModelMode::MaxZeros),
        _ => match (s.strip_prefix("min-b"), s.strip_prefix("max-b")) {
            (Some(k), _) => Ok(ModelMode::MinB(idx(k)?)),
            (_, Some(k)) => Ok(ModelMode::MaxB(idx(k)?)),
            _ => Err(usage(format!("unknown objective `{s}`"))),
        },
    }
}

fn cmd_export_ilp(cli: &Cli, a: &ExportArgs) -> Result<u8> {
    let (spec, cfg) = load_config(cli, &a.spec, a.wordlength)?;
    let mode = parse_mode(&a.objective)?;
    if cli.print_config {
        return print_config(&cfg);
    }
    let w = cfg.wordlength.ok_or_else(|| usage("--wordlength is required"))?;
    let p = problem_for(&spec, &cfg, w)?;
    let fmts = ModelFormats { g_a: a.g_a.unwrap_or(p.options.g_a_range.1), g_b: a.g_b.unwrap_or(p.g_b_range.1) };
    let model = milp::build_design_model(&p, fmts, None, mode)?;
    let text = milp::to_lp_string(&model)?;
    if let Some(m) = milp::parse_lp(&text)?.mismatch(&model, 0.0) {
        bail!("exported model does not read back: {m}");
    }
    let path = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}_w{w}_ga{}_gb{}.lp", spec.name, fmts.g_a, fmts.g_b)));
    write_file(&path, &text)?;
    println!(
        "{}: {} variables, {} constraints, max big-M {}",
        path.display(),
        model.variables.len(),
        model.constraints.len(),
        model.max_big_m()
    );
    Ok(0)
}

#[derive(serde::Serialize)]
struct IoConfig<'a> {
    result: &'a Path,
    io: IoFormat,
    seed: u64,
}

fn load_datapath(a: &IoArgs) -> Result<(DesignReport, Datapath)> {
    let text = read_input(&a.result)?;
    let report = DesignReport::from_json(&text).with_context(|| format!("reading {}", a.result.display()))?;
    let q = report.quantized()?.ok_or_else(|| anyhow!("{} holds no filter", a.result.display()))?;
    let io = io_format(a, &q)?;
    let dp = hardware::size_datapath(&q, Some((report.graph_b.clone(), report.graph_a.clone())), io)?;
    Ok((report, dp))
}

fn io_format(a: &IoArgs, q: &iirforge::fixedpoint::QuantizedFilter) -> Result<IoFormat> {
    let l_in = a.lsb_in.unwrap_or(a.msb_in - 15);
    if l_in > a.msb_in {
        return Err(usage(format!("--lsb-in {l_in} above --msb-in {}", a.msb_in)));
    }
    let bits = (a.msb_in - l_in + 1) as u32;
    let mut io = IoFormat::symmetric(bits, a.msb_in, q)?;
    if let Some(l) = a.lsb_out {
        io.l_out = l;
    }
    Ok(io)
}

fn cmd_emit(cli: &Cli, a: &EmitArgs) -> Result<u8> {
    if cli.print_config {
        let text = read_input(&a.io.result)?;
        let q = DesignReport::from_json(&text)?.quantized()?.ok_or_else(|| anyhow!("result holds no filter"))?;
        return print_config(&IoConfig { result: &a.io.result, io: io_format(&a.io, &q)?, seed: cli.seed });
    }
    let (report, dp) = load_datapath(&a.io)?;
    let entity = a.entity.clone().unwrap_or_else(|| sanitize(&report.spec.name));
    write_file(&a.out.join(format!("{entity}.vhd")), &hardware::emit_vhdl(&dp, &entity))?;
    write_file(&a.out.join(format!("{entity}_datapath.dot")), &hardware::emit_dot(&dp))?;
    write_file(&a.out.join(format!("{entity}_datapath.json")), &serde_json::to_string_pretty(&dp)?)?;
    let yo = dp.out_format();
    println!(
        "{entity}: {} adders, guard bits {}, input [{}, {}], output [{}, {}], l_ext {}, WCPG {:.6}",
        dp.adder_count(),
        dp.guard_bits,
        dp.io.m_in,
        dp.io.l_in,
        yo.msb,
        yo.lsb,
        dp.l_ext,
        dp.wcpg_filter
    );
    Ok(0)
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    if s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s
    } else {
        format!("f_{s}")
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    if cli.print_config {
        let text = read_input(&a.io.result)?;
        let q = DesignReport::from_json(&text)?.quantized()?.ok_or_else(|| anyhow!("result holds no filter"))?;
        return print_config(&IoConfig { result: &a.io.result, io: io_format(&a.io, &q)?, seed: cli.seed });
    }
    let (_, dp) = load_datapath(&a.io)?;
    let inputs: Vec<i64> = if let Some(path) = &a.input {
        read_input(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<i64>().map_err(|_| anyhow!("bad input sample `{l}`")))
            .collect::<Result<_>>()?
    } else if a.zero {
        vec![0; a.samples]
    } else {
        let half = 1i64 << (dp.io.m_in - dp.io.l_in);
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        (0..a.samples).map(|_| rng.gen_range(-half..half)).collect()
    };
    let (ys, errs, s) = hardware::compare_with_reference(&dp, &inputs)?;
    if let Some(path) = &a.trace {
        write_file(path, &hardware::trace_csv(&inputs, &ys, &errs))?;
    }
    let faithful = s.max_raw_ulps < 1.0 && s.max_rounded_ulps <= 1;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "samples": s.samples,
            "max_error_ulps": s.max_raw_ulps,
            "max_rounded_error_ulps": s.max_rounded_ulps,
            "faithful": faithful,
            "seed": cli.seed,
        }))?
    );
    Ok(if faithful { 0 } else { 1 })
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<u8> {
    let table = match &a.expected {
        Some(p) => bench::parse_expected(&read_input(p)?)?,
        None => bench::expected_table(),
    };
    let rows: Vec<_> = if a.only.is_empty() {
        table
    } else {
        for id in &a.only {
            if !table.iter().any(|r| &r.id == id) {
                return Err(usage(format!("`{id}` is not in the benchmark table")));
            }
        }
        table.into_iter().filter(|r| a.only.contains(&r.id)).collect()
    };
    let cfg = DesignConfig::defaults(cli.threads, cli.seed).with_points(a.points_per_band);
    if cli.print_config {
        return print_config(&cfg);
    }
    let mut outcomes: Vec<BenchOutcome> = Vec::new();
    for row in &rows {
        let o = bench::run_row(row, cfg.points_per_band, &cfg.search_options())?;
        eprintln!(
            "{:<6} w={} expected {} got {} {}",
            o.id,
            o.w,
            o.expected,
            o.a_total.map_or_else(|| status_name(o.status).to_string(), |v| v.to_string()),
            if o.matches() { "ok" } else { "MISMATCH" }
        );
        outcomes.push(o);
    }
    let csv = bench::outcomes_csv(&outcomes);
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(if outcomes.iter().all(BenchOutcome::matches) { 0 } else { 1 })
}
