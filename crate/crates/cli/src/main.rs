//! `coguide` command-line front end.
//!
//! Exit codes: 0 on success (a timeout is still a success and is reported in
//! the metrics), 1 when a scenario fails to parse or validate, 2 when a run
//! aborts on a non-finite state or an output file cannot be written.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coguide::scenario::{parse_document, resolve, warnings, ScenarioConfig};
use coguide::{batch, output, sim};

#[derive(Parser)]
#[command(name = "coguide", version, about = "Cooperative salvo guidance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a scenario, then print the effective configuration.
    Validate { scenario: PathBuf },
    /// Print graph spectra and gain floors.
    Gains { scenario: PathBuf },
    /// Print each pursuer's initial true and estimated time-to-go.
    Tgo { scenario: PathBuf },
    /// Run one scenario and write trace.csv and metrics.json.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Integration step (s); overrides the scenario.
        #[arg(long)]
        dt: Option<f64>,
        /// Capture radius (m); overrides the scenario.
        #[arg(long = "capture-radius")]
        capture_radius: Option<f64>,
    },
    /// Run every `*.toml` scenario in a directory, one output sub-directory each.
    Batch {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

fn load(path: &Path, dt: Option<f64>, capture_radius: Option<f64>) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let at = |e: coguide::ScenarioError| Failure::invalid(format!("{}: {e}", path.display()));
    let mut doc = parse_document(&text).map_err(at)?;
    if dt.is_some() {
        doc.times.dt = dt;
    }
    if capture_radius.is_some() {
        doc.capture_radius = capture_radius;
    }
    resolve(doc).map_err(at)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load(path, None, None)?;
    for w in warnings(&config) {
        log::warn!("{w}");
    }
    print!("{}", config.echo());
    Ok(())
}

fn gains(path: &Path) -> Result<(), Failure> {
    let c = load(path, None, None)?;
    let d = &c.design;
    let r: Vec<String> = d.sensing.r_diag.iter().map(|v| format!("{v:.6}")).collect();
    println!("R diagonal          [{}]", r.join(", "));
    println!("lambda_max(R)       {:.6}", d.sensing.lambda_max_r);
    println!("lambda_1(Q)         {:.6}", d.sensing.lambda1_q);
    match d.fiedler {
        Some(f) => println!("lambda_2(mirror)    {f:.6}"),
        None => println!("lambda_2(mirror)    - (single pursuer)"),
    }
    println!("K1 floor            {:.6}   K1 = {:.6}", d.observer.k1_min, c.gains.k1);
    println!("K2 floor            {:.6}   K2 = {:.6}", d.observer.k2_min, c.gains.k2);
    println!("M2 floor            {:.6}   M2 = {:.6}", d.m2_min, c.gains.m2);
    println!("M1                  {:.6}", c.gains.m1);
    println!("observer guard      {:.6} s", c.times.observer_guard);
    println!("consensus guard     {:.6} s", c.times.consensus_guard);
    Ok(())
}

fn tgo(path: &Path) -> Result<(), Failure> {
    let c = load(path, None, None)?;
    println!("pursuer  true_tgo  est_tgo");
    for (i, (t, e)) in c.initial_true_tgo().into_iter().zip(c.initial_estimated_tgo()).enumerate() {
        println!("P{:<7} {:>8}  {:>7}", i + 1, opt(t), opt(e));
    }
    Ok(())
}

fn execute(config: &ScenarioConfig, out: &Path) -> Result<sim::EngagementMetrics, Failure> {
    let result = sim::run(config).map_err(|e| Failure::runtime(format!("{}: {e}", config.name)))?;
    output::emit(out, &config.name, &result.trace, &result.metrics)
        .map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    Ok(result.metrics)
}

fn summary(name: &str, m: &sim::EngagementMetrics) -> String {
    let times: Vec<String> = m.intercept_times.iter().map(|t| opt(*t)).collect();
    let mut line = format!(
        "{name}: intercepts [{}] mean {} spread {}",
        times.join(", "),
        opt(m.mean_intercept_time),
        opt(m.spread)
    );
    if m.timed_out {
        let missed: Vec<String> = m.missed.iter().map(|i| format!("P{}", i + 1)).collect();
        line.push_str(&format!(" timed out, missed [{}]", missed.join(", ")));
    }
    line
}

fn run(path: &Path, out: &Path, dt: Option<f64>, capture_radius: Option<f64>) -> Result<(), Failure> {
    let config = load(path, dt, capture_radius)?;
    let m = execute(&config, out)?;
    for w in &m.warnings {
        log::warn!("{w}");
    }
    println!("{}", summary(&config.name, &m));
    Ok(())
}

fn batch_dir(dir: &Path, out: &Path) -> Result<(), Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    let results = batch::map(&files, |path| {
        let config = load(path, None, None)?;
        let stem = path.file_stem().unwrap_or_default();
        execute(&config, &out.join(stem)).map(|m| summary(&config.name, &m))
    });
    let mut code = 0;
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(f) => {
                eprintln!("error: {}", f.message);
                code = code.max(f.code);
            }
        }
    }
    match code {
        0 => Ok(()),
        c => Err(Failure {
            code: c,
            message: "some scenarios failed".into(),
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { scenario } => validate(scenario),
        Command::Gains { scenario } => gains(scenario),
        Command::Tgo { scenario } => tgo(scenario),
        Command::Run {
            scenario,
            out,
            dt,
            capture_radius,
        } => run(scenario, out, *dt, *capture_radius),
        Command::Batch { dir, out } => batch_dir(dir, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
