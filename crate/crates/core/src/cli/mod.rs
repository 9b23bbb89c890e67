//! Experiment harness behind the `caa` binary.
//!
//! Each subcommand reads a flat config (file plus `--key value` overrides),
//! computes a table and writes it as CSV to `--out` or stdout. `--plot`
//! additionally renders an SVG next to the CSV.

mod commands;
pub mod config;
mod plot;

pub use commands::{chebsolve, rates, run, thresholds, Outcome};
pub use config::Config;

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "caa",
    version,
    about = "Constrained Anderson acceleration: rate tables, Chebyshev bounds and guarded runs",
    after_help = "Any other `--key value` pair overrides the config file entry `key`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form rate quantities for each (rho, k).
    Rates(CommonArgs),
    /// Sweep of the constrained Chebyshev value and its bounds over C.
    Chebsolve(CommonArgs),
    /// Guarded CAA run on a generated operator.
    Run(CommonArgs),
    /// Perturbation thresholds and the outer-iteration threshold.
    Thresholds(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot next to `--out`.
    #[arg(long)]
    plot: bool,
    /// Seed for generated operators and starting points.
    #[arg(long)]
    seed: Option<u64>,
}

const KNOWN_FLAGS: [&str; 4] = ["config", "out", "plot", "seed"];

type Split = (Vec<String>, Vec<(String, String)>);

/// Separates `--key value` overrides from the flags clap understands.
fn split_overrides(args: Vec<String>) -> Result<Split, CliError> {
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    if let Some(bin) = it.next() {
        kept.push(bin);
    }
    let mut seen_command = false;
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|_| seen_command) else {
            seen_command |= !arg.starts_with('-');
            kept.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if KNOWN_FLAGS.contains(&name.as_str()) || name == "help" || name.is_empty() {
            kept.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| CliError::Usage(format!("override `--{name}` needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((kept, overrides))
}

fn load_config(args: &CommonArgs, overrides: &[(String, String)]) -> Result<Config, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for (k, v) in overrides {
        cfg.set_override(k, v)?;
    }
    Ok(cfg)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn execute(cmd: Command, overrides: &[(String, String)]) -> Result<u8, CliError> {
    let (args, kind) = match &cmd {
        Command::Rates(a) => (a, "rates"),
        Command::Chebsolve(a) => (a, "chebsolve"),
        Command::Run(a) => (a, "run"),
        Command::Thresholds(a) => (a, "thresholds"),
    };
    let cfg = load_config(args, overrides)?;
    if args.plot && args.out.is_none() {
        return Err(CliError::Usage("--plot needs --out".into()));
    }
    let outcome = match cmd {
        Command::Rates(_) => rates(&cfg)?,
        Command::Chebsolve(_) => chebsolve(&cfg)?,
        Command::Run(_) => run(&cfg, args.seed)?,
        Command::Thresholds(_) => thresholds(&cfg)?,
    };
    write_output(args.out.as_deref(), &outcome.text)?;
    if args.plot {
        let out = args.out.as_deref().expect("checked above");
        let svg = out.with_extension("svg");
        match plot::render(kind, &outcome.text)? {
            Some(doc) => std::fs::write(&svg, doc)?,
            None => eprintln!("note: `{kind}` has no plot"),
        }
    }
    for note in &outcome.notes {
        eprintln!("note: {note}");
    }
    for failure in &outcome.failures {
        eprintln!("error: {failure}");
    }
    Ok(if outcome.failures.is_empty() { 0 } else { 2 })
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> u8 {
    let args: Vec<String> = args.into_iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = split_overrides(args).and_then(|(kept, overrides)| {
        let cli = match Cli::try_parse_from(kept) {
            Ok(cli) => cli,
            Err(e) => {
                let code = if e.use_stderr() { 1 } else { 0 };
                let _ = e.print();
                return Ok(code);
            }
        };
        execute(cli.command, &overrides)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_out() {
        let (kept, ov) =
            split_overrides(strings(&["caa", "rates", "--rho", "0.9", "--out", "x.csv", "--k=5", "--plot"])).unwrap();
        assert_eq!(kept, strings(&["caa", "rates", "--out", "x.csv", "--plot"]));
        assert_eq!(ov, vec![("rho".into(), "0.9".into()), ("k".into(), "5".into())]);
        assert!(split_overrides(strings(&["caa", "rates", "--rho"])).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 34.141_592, 1e-300, -2.5e17] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn csv_uses_lf() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,\n");
    }
}
