mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use sobolab::Error;

use commands::{Outcome, Status, Table};
use config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sobolab", version, about = "Weighted Sobolev embeddings on cusp domains, numerically")]
struct Cli {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Validity(String),
    Inconclusive(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Validity(_) => 3,
            Failure::Inconclusive(_) => 4,
            Failure::Internal(_) => 1,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Validity(_) => "validity",
            Failure::Inconclusive(_) => "inconclusive",
            Failure::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Validity(m) | Failure::Inconclusive(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Input(_) | Error::Dimension { .. } | Error::Domain(_) | Error::Parse(_) => Failure::Config(m),
            Error::Validity(_) => Failure::Validity(m),
            Error::Inconclusive(_) | Error::Solver { .. } => Failure::Inconclusive(m),
            Error::Evaluation(_) => Failure::Internal(m),
        }
    }
}

fn missing(cmd: Command) -> Failure {
    Failure::Config(format!("config has no [{}] section", cmd.name()))
}

fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let out = match cmd {
        Command::ApCheck => commands::ap_check_cmd(cfg.ap_check.as_ref().ok_or_else(|| missing(cmd))?, cfg.seed)?,
        Command::Exponents => commands::exponents_cmd(cfg.exponents.as_ref().ok_or_else(|| missing(cmd))?)?,
        Command::Distortion => commands::distortion_cmd(cfg.distortion.as_ref().ok_or_else(|| missing(cmd))?, cfg.seed)?,
        Command::Mollify => commands::mollify_cmd(cfg.mollify.as_ref().ok_or_else(|| missing(cmd))?)?,
        Command::Solve => commands::solve_cmd(cfg.solve.as_ref().ok_or_else(|| missing(cmd))?)?,
        Command::Probe => commands::probe_cmd(cfg.probe.as_ref().ok_or_else(|| missing(cmd))?)?,
        Command::Report => return report(cfg),
    };
    Ok(out)
}

// every section present in the config, one after another
fn report(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let present = [
        (Command::ApCheck, cfg.ap_check.is_some()),
        (Command::Exponents, cfg.exponents.is_some()),
        (Command::Distortion, cfg.distortion.is_some()),
        (Command::Mollify, cfg.mollify.is_some()),
        (Command::Solve, cfg.solve.is_some()),
        (Command::Probe, cfg.probe.is_some()),
    ];
    let mut result = serde_json::Map::new();
    let mut tables = Vec::new();
    let mut status = Status::Ok;
    for (cmd, _) in present.iter().filter(|(_, p)| *p) {
        let o = dispatch(*cmd, cfg)?;
        status = status.max(o.status);
        result.insert(cmd.name().to_string(), json!({ "status": o.status, "result": o.result }));
        tables.extend(o.tables.into_iter().map(|t| Table { name: format!("{}-{}", cmd.name(), t.name), ..t }));
    }
    if result.is_empty() {
        return Err(Failure::Config("config has no command sections".into()));
    }
    Ok(Outcome { result: serde_json::Value::Object(result), tables, status })
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Failure::Internal(e.to_string());
    w.write_record(&t.header).map_err(internal)?;
    for row in &t.rows {
        w.write_record(row).map_err(internal)?;
    }
    w.into_inner().map_err(|e| Failure::Internal(e.to_string()))
}

fn write_outputs(dir: &Path, report: &serde_json::Value, tables: &[Table]) -> Result<(), Failure> {
    // render everything before touching the filesystem
    let mut files = vec![("report.json".to_string(), {
        let mut s = serde_json::to_string_pretty(report).map_err(|e| Failure::Internal(e.to_string()))?;
        s.push('\n');
        s.into_bytes()
    })];
    for t in tables {
        files.push((format!("{}.csv", t.name), csv_bytes(t)?));
    }
    let io = |e: std::io::Error| Failure::Internal(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes).map_err(io)?;
    }
    Ok(())
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&cli.config).map_err(|e| Failure::Config(format!("{}: {e}", cli.config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(Failure::Config)?;
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(Failure::Config(format!("config is for `{}`, not `{}`", c.name(), cli.command.name())));
        }
    }
    cfg.command = Some(cli.command);
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Status, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let cfg = load(cli)?;
    let outcome = dispatch(cli.command, &cfg)?;
    let report = json!({
        "schema": 1,
        "command": cli.command.name(),
        "status": outcome.status,
        "config": cfg,
        "result": outcome.result,
    });
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&dir, &report, &outcome.tables)?;
    log::info!("wrote {}", dir.join("report.json").display());
    Ok(outcome.status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Validity) => ExitCode::from(3),
        Ok(Status::Inconclusive) => ExitCode::from(4),
        Err(f) => {
            eprintln!("{}", json!({ "error": f.category(), "message": f.message() }));
            ExitCode::from(f.code())
        }
    }
}
