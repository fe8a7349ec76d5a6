//! `evosim`: run scenarios, compare the analytic batch model, analyze logs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use evosim_core::analysis::{self, EmitOptions, GroupReport, ReportSet};
use evosim_core::analytic;
use evosim_core::engine::{self, realtime, Replication};
use evosim_core::sampling::sample_matrix;
use evosim_core::scenario_file::ScenarioFile;
use evosim_core::{Algorithm, LogRecord, Millis, Mode, RngStream, Scenario};

const OUT_ENV: &str = "EVOSIM_OUT";
const DEFAULT_OUT: &str = "evosim-out";

#[derive(Parser)]
#[command(name = "evosim", version, about = "Cluster resource-usage simulator for generation-based and steady-state evolutionary runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications of a scenario and write logs and CSV reports.
    Simulate(SimulateArgs),
    /// Monte-Carlo comparison of the closed-form batch times.
    Compare(CompareArgs),
    /// Normalize raw logs and write CSV reports.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Output {
    /// Output directory; the EVOSIM_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report times in days (two decimals) instead of milliseconds.
    #[arg(long)]
    days: bool,
    /// Histogram bin width in ms (default: Freedman-Diaconis).
    #[arg(long, value_name = "MS")]
    bin_width: Option<Millis>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file, or a preset name (e00, e02, e12, e14, table01).
    #[arg(long)]
    scenario: String,
    /// gb or st (also generation-based, steady-state).
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// virtual or scaled.
    #[arg(long)]
    mode: Option<Mode>,
    /// Milliseconds subtracted from every overall time.
    #[arg(long, value_name = "MS")]
    overhead: Option<Millis>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Raw or normalized log files.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Processor count (default: highest processor id in the logs).
    #[arg(long)]
    phi: Option<u32>,
    /// Group label in the CSV reports.
    #[arg(long, default_value = "logs")]
    group: String,
    #[arg(long, value_name = "MS", default_value_t = 0)]
    overhead: Millis,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// A path that exists is loaded; otherwise the file stem is tried as a preset.
fn load_scenario(arg: &str) -> Result<ScenarioFile> {
    let path = Path::new(arg);
    if path.exists() {
        return ScenarioFile::load(path).with_context(|| format!("loading {}", path.display()));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    match Scenario::preset(stem) {
        Some(s) => Ok(ScenarioFile::from_scenario(s)),
        None => bail!(
            "{arg}: no such file and not a preset (known: {})",
            Scenario::PRESETS.join(", ")
        ),
    }
}

fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
        .or(file)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn fmt_time(ms: f64, days: bool) -> String {
    if days {
        format!("{:.2}d", analysis::to_days(ms))
    } else {
        format!("{ms:.0}")
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut file = load_scenario(&a.scenario)?;
    let s = &mut file.scenario;
    if let Some(alg) = a.algorithm {
        s.algorithm = alg;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if let Some(mode) = a.mode {
        s.mode = mode;
    }
    if let Some(reps) = a.reps {
        file.replications = reps;
    }
    if let Some(o) = a.overhead {
        file.overhead = o;
    }
    if file.replications == 0 {
        bail!("--reps must be at least 1");
    }
    if let Err(v) = file.scenario.validate() {
        let msgs: Vec<_> = v.iter().map(|x| x.to_string()).collect();
        bail!("invalid scenario: {}", msgs.join("; "));
    }
    let s = &file.scenario;
    let dir = out_dir(a.output.out.clone(), file.out_dir.clone());
    create_dir(&dir)?;

    let reps = match s.mode {
        Mode::VirtualTime => engine::run_replications(s, file.replications, s.seed)?,
        Mode::ScaledRealTime => {
            eprintln!(
                "warning: scaled real-time mode is not deterministic; results vary between runs"
            );
            run_scaled(s, file.replications, file.time_scale)?
        }
    };

    let width = (file.replications - 1).to_string().len().max(3);
    let mut taus = Vec::with_capacity(reps.len());
    let mut usage = Vec::with_capacity(reps.len());
    let mut summary = csv_writer(&dir.join("summary.csv"))?;
    summary.write_record(["rep", "seed", "makespan"])?;
    for r in &reps {
        let log = dir.join(format!("log_r{:0width$}.txt", r.index));
        write(&log, analysis::format_log(&r.records))?;
        let tau = analysis::overall_time(&r.records, file.overhead)?.tau;
        taus.push(tau);
        usage.push(analysis::usage(&r.records, s.phi)?);
        summary.write_record([r.index.to_string(), r.seed.to_string(), tau.to_string()])?;
    }
    summary.flush()?;

    let group = format!("{}_{}", s.name, s.algorithm.short());
    let set = ReportSet {
        gantt: analysis::normalize(&reps[0].records)?,
        groups: vec![GroupReport {
            name: group.clone(),
            taus: taus.clone(),
            usage,
        }],
    };
    analysis::emit(&set, &dir, emit_options(&a.output))?;

    let st = analysis::tau_summary(&taus, false).expect("at least one replication");
    println!(
        "{group} reps={} seed={} mean={} min={} median={} max={} out={}",
        taus.len(),
        s.seed,
        fmt_time(st.mean, a.output.days),
        fmt_time(st.min, a.output.days),
        fmt_time(st.median, a.output.days),
        fmt_time(st.max, a.output.days),
        dir.display()
    );
    Ok(())
}

fn run_scaled(s: &Scenario, replications: usize, time_scale: f64) -> Result<Vec<Replication>> {
    (0..replications)
        .map(|r| {
            let seed = s.seed.wrapping_add(r as u64);
            let mut rng = RngStream::new(seed);
            let m = sample_matrix(s.eta as usize, s.batches(), &s.steps, &mut rng);
            let records = realtime::run_scaled(s, &m, rng.next_u64_value(), time_scale)?;
            Ok(Replication {
                index: r,
                seed,
                makespan: engine::makespan(&records),
                records,
            })
        })
        .collect()
}

fn emit_options(o: &Output) -> EmitOptions {
    EmitOptions {
        days: o.days,
        bin_width: o.bin_width,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(csv::Writer::from_writer(f))
}

fn compare(a: CompareArgs) -> Result<()> {
    let file = load_scenario(&a.scenario)?;
    let s = &file.scenario;
    let reps = a.reps.unwrap_or(file.replications);
    let seed = a.seed.unwrap_or(s.seed);
    if s.dops() != [1, 1, 1] {
        eprintln!(
            "warning: the batch model assumes one processor per step; dop {:?} is ignored",
            s.dops()
        );
    }
    let r = analytic::monte_carlo_compare(s.eta, s.n_new, s.phi, &s.steps, reps, seed)?;
    let dir = out_dir(a.output.out.clone(), file.out_dir.clone());
    create_dir(&dir)?;
    let path = dir.join("compare.csv");
    let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    r.write_csv(f)?;
    println!(
        "{} reps={reps} seed={seed} mean_gb={} mean_st={} speedup={:.2}",
        s.name,
        fmt_time(r.mean_gb(), a.output.days),
        fmt_time(r.mean_st(), a.output.days),
        r.speedup
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut logs: Vec<(PathBuf, Vec<LogRecord>)> = Vec::new();
    for path in &a.logs {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let records =
            analysis::parse_log(&text).with_context(|| format!("parsing {}", path.display()))?;
        if records.is_empty() {
            bail!("{}: no records", path.display());
        }
        logs.push((path.clone(), records));
    }
    let phi = match a.phi {
        Some(p) => p,
        None => logs
            .iter()
            .flat_map(|(_, r)| r.iter().map(|x| x.proc_id))
            .max()
            .unwrap_or(1),
    };
    let dir = out_dir(a.output.out.clone(), None);
    create_dir(&dir)?;

    let mut group = GroupReport {
        name: a.group.clone(),
        ..Default::default()
    };
    let mut gantt = Vec::new();
    for (i, (path, records)) in logs.iter().enumerate() {
        let normalized = analysis::normalize(records)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
        write(
            &dir.join(format!("{stem}.normalized.txt")),
            analysis::format_normalized(&normalized),
        )?;
        let t = analysis::overall_time(records, a.overhead)
            .with_context(|| format!("{}", path.display()))?;
        let u = analysis::usage(records, phi).with_context(|| format!("{}", path.display()))?;
        println!(
            "{} records={} tau={} mean_active={} mean_idle={}",
            path.display(),
            records.len(),
            fmt_time(t.tau as f64, a.output.days),
            fmt_time(u.mean_active(), a.output.days),
            fmt_time(u.mean_idle(), a.output.days)
        );
        if i == 0 {
            gantt = normalized;
        }
        group.taus.push(t.tau);
        group.usage.push(u);
    }
    let set = ReportSet {
        gantt,
        groups: vec![group],
    };
    analysis::emit(&set, &dir, emit_options(&a.output))?;
    Ok(())
}
