//! `rowdil`: batch runner for the dilation, wandering-subspace and multiplier experiments.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 a precondition was violated,
//! 3 I/O or configuration error.

mod commands;
mod config;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use commands::{Command, Outcome, Table};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "rowdil", version, about = "Verification experiments for commuting row contractions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Purity check, canonical dilation and its residuals.
    Dilate(RunArgs),
    /// Wandering subspace of an invariant subspace, computed directly and from a representation.
    Wandering(RunArgs),
    /// Multiplier norm against the H(K) norm for a quasi-homogeneous polynomial.
    Multnorm(RunArgs),
    /// Smallest nonzero singular value of a multiplication operator across truncations.
    ProbeRange(RunArgs),
    /// Recovery of fiber maps between scrambled and embedded dilations.
    Uniqueness(RunArgs),
    /// Every entry of the config's `experiments` list.
    Batch(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report path; standard output when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the result table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    Precondition = 2,
    Error = 3,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Precondition => "precondition-violated",
            Status::Error => "error",
        }
    }
}

/// Why an experiment produced no results.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            status: Status::Error,
            kind: "Config".into(),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            status: Status::Error,
            kind: "Io".into(),
            message: message.into(),
        }
    }
}

impl From<rowdil_core::Error> for Failure {
    fn from(e: rowdil_core::Error) -> Self {
        use rowdil_core::Error as E;
        let (status, kind) = match &e {
            E::NotPsd { .. } => (Status::Precondition, "NotPsd"),
            E::PointOutsideBall { .. } => (Status::Precondition, "PointOutsideBall"),
            E::NotCommuting { .. } => (Status::Precondition, "NotCommuting"),
            E::NotRowContraction { .. } => (Status::Precondition, "NotRowContraction"),
            E::NotPure { .. } => (Status::Precondition, "NotPure"),
            E::NotMinimal { .. } => (Status::Precondition, "NotMinimal"),
            E::NotADilation { .. } => (Status::Precondition, "NotADilation"),
            E::NotInvariant { .. } => (Status::Precondition, "NotInvariant"),
            E::RangeMismatch { .. } => (Status::Precondition, "RangeMismatch"),
            E::ZeroPolynomial => (Status::Precondition, "ZeroPolynomial"),
            E::NotQuasiHomogeneous => (Status::Precondition, "NotQuasiHomogeneous"),
            E::NotHomogeneous => (Status::Precondition, "NotHomogeneous"),
            E::NotPartialIsometry { .. } => (Status::Precondition, "NotPartialIsometry"),
            E::DimensionMismatch(_) => (Status::Error, "DimensionMismatch"),
            E::EmptyInput(_) => (Status::Error, "EmptyInput"),
            E::MalformedRepresentation(_) => (Status::Error, "MalformedRepresentation"),
            E::InvalidArgument(_) => (Status::Error, "InvalidArgument"),
            E::Format(_) => (Status::Error, "Format"),
        };
        Self {
            status,
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

struct Entry {
    id: Option<String>,
    command: Option<Command>,
    config: Option<ExperimentConfig>,
    result: Result<(Outcome, rowdil_core::Tolerances), Failure>,
}

impl Entry {
    fn status(&self) -> Status {
        match &self.result {
            Ok((o, _)) if o.passed => Status::Pass,
            Ok(_) => Status::Fail,
            Err(f) => f.status,
        }
    }

    fn to_json(&self) -> Value {
        let status = self.status();
        let mut m = Map::new();
        if let Some(id) = &self.id {
            m.insert("id".into(), json!(id));
        }
        m.insert("command".into(), json!(self.command.map(Command::name)));
        m.insert("status".into(), json!(status.label()));
        m.insert("exit_code".into(), json!(status as u8));
        if let Some(cfg) = &self.config {
            m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
        }
        match &self.result {
            Ok((outcome, tol)) => {
                m.insert("tolerances".into(), serde_json::to_value(tol).expect("tolerances serialize"));
                m.insert("results".into(), outcome.results.clone());
            }
            Err(f) => {
                m.insert("error".into(), json!({ "kind": f.kind, "message": f.message }));
            }
        }
        Value::Object(m)
    }
}

fn run_one(command: Command, cfg: &ExperimentConfig) -> Result<(Outcome, rowdil_core::Tolerances), Failure> {
    let tol = cfg.tolerances()?;
    let outcome = command.run(cfg, &tol)?;
    Ok((outcome, tol))
}

fn single(command: Command, cfg: ExperimentConfig) -> Entry {
    let result = if !cfg.experiments.is_empty() {
        Err(Failure::config("config holds an `experiments` list; run it with `batch`"))
    } else if cfg.command.as_deref().is_some_and(|c| c != command.name()) {
        Err(Failure::config(format!(
            "config is for `{}`, invoked as `{}`",
            cfg.command.as_deref().unwrap_or_default(),
            command.name()
        )))
    } else {
        run_one(command, &cfg)
    };
    Entry {
        id: cfg.id.clone(),
        command: Some(command),
        config: Some(cfg),
        result,
    }
}

/// Experiments run on scoped threads; the report lists them sorted by id.
fn batch(cfg: &ExperimentConfig) -> Result<Vec<Entry>, Failure> {
    if cfg.experiments.is_empty() {
        return Err(Failure::config("`batch` needs a non-empty `experiments` list"));
    }
    let mut jobs = Vec::with_capacity(cfg.experiments.len());
    let mut seen = BTreeSet::new();
    for (i, e) in cfg.experiments.iter().enumerate() {
        if !e.experiments.is_empty() {
            return Err(Failure::config("nested `experiments` lists are not supported"));
        }
        let mut merged = cfg.inherit(e);
        let id = merged.id.clone().unwrap_or_else(|| format!("{i:03}"));
        if !seen.insert(id.clone()) {
            return Err(Failure::config(format!("duplicate experiment id {id:?}")));
        }
        merged.id = Some(id);
        jobs.push(merged);
    }
    let mut entries: Vec<Entry> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|job| {
                scope.spawn(move || {
                    let id = job.id.clone();
                    match job.command.as_deref().map(|c| (c, Command::parse(c))) {
                        Some((_, Some(command))) => Entry { id, ..single(command, job) },
                        Some((name, None)) => Entry {
                            id,
                            command: None,
                            result: Err(Failure::config(format!("unknown command {name:?}"))),
                            config: Some(job.clone()),
                        },
                        None => Entry {
                            id,
                            command: None,
                            result: Err(Failure::config("experiment has no `command`")),
                            config: Some(job.clone()),
                        },
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(entries)
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

fn header(command: &str, status: Status) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!("rowdil"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("timestamp".into(), json!(timestamp()));
    m.insert("status".into(), json!(status.label()));
    m.insert("exit_code".into(), json!(status as u8));
    m
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_csv(path: &Path, tables: &[(Option<&str>, &Table)]) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let batch = tables.iter().any(|(id, _)| id.is_some());
    if batch {
        // rows of different experiments have different columns, so the table is long-format
        w.write_record(["experiment", "row", "column", "value"]).map_err(io)?;
        for (id, table) in tables {
            for (r, row) in table.rows.iter().enumerate() {
                for (h, v) in table.headers.iter().zip(row) {
                    w.write_record([id.unwrap_or_default(), &r.to_string(), h, v]).map_err(io)?;
                }
            }
        }
    } else if let Some((_, table)) = tables.first() {
        w.write_record(&table.headers).map_err(io)?;
        for row in &table.rows {
            w.write_record(row).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn execute(cmd: Cmd) -> Status {
    let (name, args) = match cmd {
        Cmd::Dilate(a) => ("dilate", a),
        Cmd::Wandering(a) => ("wandering", a),
        Cmd::Multnorm(a) => ("multnorm", a),
        Cmd::ProbeRange(a) => ("probe-range", a),
        Cmd::Uniqueness(a) => ("uniqueness", a),
        Cmd::Batch(a) => ("batch", a),
    };

    let loaded = ExperimentConfig::load(&args.config).map(|mut cfg| {
        if let Some(seed) = args.seed {
            cfg.override_seed(seed);
        }
        cfg
    });
    let out = args
        .out
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.output.clone()));

    let (report, status, entries) = match loaded {
        Err(f) => {
            let status = f.status;
            let mut m = header(name, status);
            m.insert("error".into(), json!({ "kind": f.kind, "message": f.message }));
            (m, status, Vec::new())
        }
        Ok(cfg) if name == "batch" => match batch(&cfg) {
            Err(f) => {
                let mut m = header(name, f.status);
                m.insert("error".into(), json!({ "kind": f.kind, "message": f.message }));
                (m, f.status, Vec::new())
            }
            Ok(entries) => {
                let status = entries.iter().map(Entry::status).max().unwrap_or(Status::Pass);
                let mut m = header(name, status);
                m.insert("experiments".into(), Value::Array(entries.iter().map(Entry::to_json).collect()));
                (m, status, entries)
            }
        },
        Ok(cfg) => {
            let command = Command::parse(name).expect("subcommand names match");
            let entry = single(command, cfg);
            let status = entry.status();
            let mut m = header(name, status);
            if let Value::Object(body) = entry.to_json() {
                for (k, v) in body {
                    if !m.contains_key(&k) {
                        m.insert(k, v);
                    }
                }
            }
            (m, status, vec![entry])
        }
    };

    let mut text = serde_json::to_string_pretty(&Value::Object(report)).expect("report serializes");
    text.push('\n');
    let mut status = status;
    match &out {
        Some(path) => {
            if let Err(f) = write_text(path, &text) {
                eprintln!("rowdil: {}", f.message);
                status = Status::Error;
            }
        }
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    if let Some(path) = &args.csv {
        let tables: Vec<(Option<&str>, &Table)> = entries
            .iter()
            .filter_map(|e| {
                let id = if name == "batch" { e.id.as_deref() } else { None };
                e.result.as_ref().ok().map(|(o, _)| (id, &o.table))
            })
            .collect();
        if let Err(f) = write_csv(path, &tables) {
            eprintln!("rowdil: {}", f.message);
            status = Status::Error;
        }
    }
    eprintln!("rowdil {name}: {}", status.label());
    status
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Status::Error as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(execute(cli.command) as u8)
}
