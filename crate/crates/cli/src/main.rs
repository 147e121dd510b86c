//! `peakon`: classify conservation laws, simulate, and build travelling waves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use peakon::conslaw::{
    characteristic_residual, classify, ConsLawError, ConservedCurrent, EquationSpec, LawVerdict,
};
use peakon::expr::{is_zero, parse, SamplingPolicy, ZeroVerdict};
use peakon::pde::{self, check_apriori_bounds, RunStatus, SimConfig};
use peakon::twave::{self, TwaveError};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_VERDICT: u8 = 2;
const EXIT_BREAKING: u8 = 3;
const EXIT_GUARD: u8 = 4;

#[derive(Parser)]
#[command(name = "peakon", version, about = "Conservation laws and travelling waves of multi-peakon equations")]
struct Cli {
    /// Seed for randomized zero testing.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide which conservation laws an equation admits.
    Classify(EquationArgs),
    /// Run the pseudospectral solver from a JSON config.
    Simulate { config: PathBuf },
    /// Travelling-wave profiles.
    Twave {
        #[command(subcommand)]
        kind: TwaveCommand,
    },
    /// Check a density, flux and multiplier against an equation.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct EquationArgs {
    #[arg(long, allow_hyphen_values = true)]
    f: String,
    #[arg(long, allow_hyphen_values = true)]
    g: String,
    /// Parameter binding `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long = "T", allow_hyphen_values = true)]
    density: String,
    #[arg(long = "Phi", allow_hyphen_values = true)]
    flux: String,
    #[arg(long = "Q", allow_hyphen_values = true)]
    multiplier: String,
    #[command(flatten)]
    equation: EquationArgs,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TwaveCommand {
    /// Solitary wave of the singular family.
    Solitary {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        /// Half-width of the sampled ξ interval.
        #[arg(long, default_value_t = 15.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
    /// Peakon `a e^{-|ξ|}` of the singular family.
    Peakon {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 15.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// A failure that maps onto an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(format!("i/o error: {e}"))
    }
}

impl From<TwaveError> for Failure {
    fn from(e: TwaveError) -> Self {
        Self::input(e.to_string())
    }
}

fn equation_error(e: ConsLawError, f: &str, g: &str) -> Failure {
    match &e {
        ConsLawError::Parse { which, source } => {
            let text = if *which == "f" { f } else { g };
            Failure::input(format!("{e}\n{}", source.caret(text)))
        }
        _ => Failure::input(e.to_string()),
    }
}

/// What a command produced: JSON for stdout, files written, exit code.
struct Outcome {
    report: Value,
    files: Vec<PathBuf>,
    code: u8,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    config: Value,
    seed: u64,
    threads: usize,
    version: &'static str,
    started_unix: f64,
    finished_unix: f64,
    outputs: Vec<PathBuf>,
    exit_code: u8,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn policy(seed: u64) -> SamplingPolicy {
    SamplingPolicy::default().with_seed(seed)
}

fn law_code(v: &LawVerdict) -> bool {
    v.conserved.is_some()
}

fn cmd_classify(args: &EquationArgs, seed: u64, out: Option<&Path>) -> Result<Outcome, Failure> {
    let params: BTreeMap<String, f64> = args.params.iter().cloned().collect();
    let eq = EquationSpec::parse(&args.f, &args.g, &params).map_err(|e| equation_error(e, &args.f, &args.g))?;
    let report = classify(&eq, &policy(seed)).map_err(|e| Failure::input(e.to_string()))?;
    let determinate = law_code(&report.momentum) && law_code(&report.h1) && !report.is_indeterminate();
    let value = serde_json::to_value(&report).map_err(|e| Failure::input(e.to_string()))?;
    let mut files = Vec::new();
    if let Some(dir) = out {
        let path = dir.join("classify.json");
        write_json(&path, &value)?;
        files.push(path);
    }
    Ok(Outcome {
        report: value,
        files,
        code: if determinate { EXIT_OK } else { EXIT_VERDICT },
    })
}

fn cmd_verify(args: &VerifyArgs, seed: u64, out: Option<&Path>) -> Result<Outcome, Failure> {
    let e = &args.equation;
    let params: BTreeMap<String, f64> = e.params.iter().cloned().collect();
    let eq = EquationSpec::parse(&e.f, &e.g, &params).map_err(|err| equation_error(err, &e.f, &e.g))?;
    let declared = params.keys().cloned().collect();
    let read = |name: &str, src: &str| {
        parse(src, &declared)
            .map(|x| x.bind_params(&params))
            .map_err(|err| Failure::input(format!("{name}: {err}\n{}", err.caret(src))))
    };
    let current = ConservedCurrent::new(
        read("T", &args.density)?,
        read("Phi", &args.flux)?,
        read("Q", &args.multiplier)?,
    );
    let residual = characteristic_residual(&current, &eq).map_err(|err| Failure::input(err.to_string()))?;
    let verdict = is_zero(&residual, &policy(seed)).map_err(|err| Failure::input(err.to_string()))?;
    let code = if matches!(verdict, ZeroVerdict::Zero { .. }) { EXIT_OK } else { EXIT_VERDICT };
    let value = json!({
        "residual": residual.to_string(),
        "verdict": verdict,
    });
    let mut files = Vec::new();
    if let Some(dir) = out {
        let path = dir.join("verify.json");
        write_json(&path, &value)?;
        files.push(path);
    }
    Ok(Outcome {
        report: value,
        files,
        code,
    })
}

fn cmd_simulate(path: &Path, out: Option<&Path>) -> Result<(Outcome, Value), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let config: SimConfig =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let eq = config.equation_spec().map_err(|e| match e {
        pde::PdeError::Equation(inner) => equation_error(inner, &config.equation.f, &config.equation.g),
        other => Failure::input(other.to_string()),
    })?;
    let result = pde::run(&config, &eq).map_err(|e| Failure::input(e.to_string()))?;

    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let series_path = dir.join(config.output.series_path.as_deref().unwrap_or("series.csv"));
    fs::write(&series_path, result.series.to_csv())?;
    files.push(series_path);
    let stem = config.output.snapshot_path.as_deref().unwrap_or("snapshot");
    for (k, snap) in result.snapshots.iter().enumerate() {
        let p = dir.join(format!("{stem}_{k:03}.csv"));
        fs::write(&p, snap.to_csv())?;
        files.push(p);
    }

    let l2m_conserved = classify(&eq, &SamplingPolicy::default())
        .map(|r| r.l2m == Some(true))
        .unwrap_or(false);
    let s = &result.series;
    let report = json!({
        "status": result.status,
        "rows": s.rows.len(),
        "final_t": result.final_state.t,
        "relative_drift": {
            "M": s.relative_drift(|r| r.m_integral),
            "H1sq": s.relative_drift(|r| r.h1sq),
            "L2msq": s.relative_drift(|r| r.l2msq),
            "E": s.relative_drift(|r| r.energy),
        },
        "apriori_bounds": check_apriori_bounds(s, l2m_conserved),
        "warnings": result.warnings,
    });
    let code = match result.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::WaveBreaking { .. } | RunStatus::NonFinite { .. } => EXIT_BREAKING,
        RunStatus::SingularityGuard { .. } => EXIT_GUARD,
    };
    let config_value = serde_json::to_value(&config).map_err(|e| Failure::input(e.to_string()))?;
    Ok((
        Outcome {
            report,
            files,
            code,
        },
        config_value,
    ))
}

fn cmd_twave(kind: &TwaveCommand, out: Option<&Path>) -> Result<Outcome, Failure> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let (profile, sidecar) = match *kind {
        TwaveCommand::Solitary { b, c, xi_max, points } => {
            let wave = twave::SolitaryWave::new(b, c)?;
            let profile = twave::solitary_profile(b, c, &twave::symmetric_grid(xi_max, points))?;
            let stats = twave::solitary_ode_residual(&profile, 1e-3)?;
            let sidecar = json!({
                "b": b,
                "c": c,
                "peak_height": wave.peak_height(),
                "c1": wave.c1(),
                "c2": wave.c2(),
                "residual_max_ode1": stats.max_ode1,
                "residual_rms_ode3": stats.rms_ode3,
            });
            (profile, sidecar)
        }
        TwaveCommand::Peakon { a, xi_max, points } => {
            let profile = twave::peakon(a, &twave::symmetric_grid(xi_max, points))?;
            let sidecar = json!({
                "a": a,
                "c": profile.c,
                "peak_height": profile.peak_height,
            });
            (profile, sidecar)
        }
    };
    fs::create_dir_all(&dir)?;
    let csv = dir.join("profile.csv");
    let side = dir.join("profile.json");
    fs::write(&csv, profile.to_csv())?;
    write_json(&side, &sidecar)?;
    Ok(Outcome {
        report: sidecar,
        files: vec![csv, side],
        code: EXIT_OK,
    })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
    }
    let out = cli.out.as_deref();
    let started = now();
    let (name, outcome, config) = match &cli.command {
        Command::Classify(args) => ("classify", cmd_classify(args, cli.seed, out)?, json!(args)),
        Command::Verify(args) => ("verify", cmd_verify(args, cli.seed, out)?, json!(args)),
        Command::Simulate { config } => {
            let (outcome, resolved) = cmd_simulate(config, out)?;
            ("simulate", outcome, resolved)
        }
        Command::Twave { kind } => ("twave", cmd_twave(kind, out)?, json!(kind)),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.report).map_err(|e| Failure::input(e.to_string()))?
    );
    let writes_files = out.is_some() || matches!(cli.command, Command::Simulate { .. } | Command::Twave { .. });
    if writes_files {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let manifest = RunManifest {
            subcommand: name,
            config,
            seed: cli.seed,
            threads: cli.threads.max(1),
            version: env!("CARGO_PKG_VERSION"),
            started_unix: started,
            finished_unix: now(),
            outputs: outcome.files,
            exit_code: outcome.code,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
