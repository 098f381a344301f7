//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or config parse error, 3 domain error,
//! 4 I/O error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::exactref::{exact_fdr_stepdown, AltCdf, ExactFdrSpec};
use crate::procedures::{
    apply, bh_constants, check_theorem1_condition, ms_constants, prds_constants, theorem1_bound,
    Procedure, ProcedureOptions, CONDITION_SLACK, DEFAULT_LAMBDA,
};
use crate::pvalues::{CriticalConstants, PValueVector};
use crate::simulate::{self, ConfigError, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "msfdr", version, about = "Adaptive step-down FDR procedures and simulation study")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a procedure to a file of p-values.
    Adjust(AdjustArgs),
    /// Run a scenario grid and write CSV and JSON results.
    Simulate(SimulateArgs),
    /// Print a critical-constant schedule and check the control condition.
    Constants(ConstantsArgs),
    /// Exact FDR of a step-down schedule for m <= 3 independent tests.
    ExactFdr(ExactFdrArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Ms,
    Bh,
    Prds,
}

#[derive(Debug, Args)]
struct AdjustArgs {
    /// CSV with a `p` column (and optional `id`), or one p-value per line.
    input: PathBuf,
    #[arg(long, default_value = "MS")]
    procedure: Procedure,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    /// Storey λ, used by STS.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of true nulls, required by ORC.
    #[arg(long)]
    m0: Option<usize>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results path. The other format and a `.curves.csv` file are written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `reps` from the config.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Format of the file at `--out`.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    /// Only for the ms family.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct ExactFdrArgs {
    #[arg(long, value_enum, default_value_t = Family::Ms)]
    family: Family,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    m0: usize,
    /// Mean shift of the false nulls; uniform alternatives when omitted.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidPValue { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Adjust(a) => cmd_adjust(&a, out, err),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Constants(a) => cmd_constants(&a, out, err),
        Command::ExactFdr(a) => cmd_exact_fdr(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

/// p-values read from an input file, with the label to echo for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

/// Reads either a headed CSV with a `p` column (optionally `id`) or a bare
/// list of p-values, one per line. Errors name the 1-based input line.
pub fn parse_pvalue_input(text: &str) -> std::result::Result<InputTable, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| format!("malformed CSV: {e}"))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, rec));
    }

    let Some((_, first)) = records.first() else {
        return Ok(InputTable {
            labels: Vec::new(),
            values: Vec::new(),
        });
    };

    let headed = !(first.len() == 1 && first[0].parse::<f64>().is_ok());
    let (p_col, id_col, body) = if headed {
        let find = |name: &str| first.iter().position(|h| h.eq_ignore_ascii_case(name));
        let p_col = find("p").ok_or_else(|| "line 1: header has no `p` column".to_string())?;
        (p_col, find("id"), &records[1..])
    } else {
        (0, None, &records[..])
    };

    let mut table = InputTable {
        labels: Vec::with_capacity(body.len()),
        values: Vec::with_capacity(body.len()),
    };
    for (row, (line, rec)) in body.iter().enumerate() {
        let raw = rec
            .get(p_col)
            .ok_or_else(|| format!("line {line}: missing p-value field"))?;
        let p: f64 = raw
            .parse()
            .map_err(|_| format!("line {line}: cannot parse '{raw}' as a p-value"))?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(format!("line {line}: p-value {raw} is outside [0, 1]"));
        }
        let label = match id_col.and_then(|c| rec.get(c)) {
            Some(id) => id.to_string(),
            None => row.to_string(),
        };
        table.labels.push(label);
        table.values.push(p);
    }
    Ok(table)
}

#[derive(Serialize)]
struct AdjustRow<'a> {
    id: &'a str,
    p: f64,
    rejected: u8,
    rank: usize,
    threshold_used: f64,
}

#[derive(Serialize)]
struct AdjustReport<'a> {
    procedure: Procedure,
    q: f64,
    m: usize,
    k: usize,
    family: String,
    threshold: f64,
    rows: &'a [AdjustRow<'a>],
}

fn cmd_adjust(a: &AdjustArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", a.input.display())))?;
    let table = parse_pvalue_input(&text).map_err(CliError::Parse)?;
    let m = table.values.len();

    if a.procedure == Procedure::Orc && a.m0.is_none() {
        return Err(CliError::Domain("procedure ORC requires --m0".into()));
    }
    let opts = ProcedureOptions {
        lambda: a.lambda.unwrap_or(DEFAULT_LAMBDA),
        m0: a.m0,
    };
    let pv = PValueVector::new(table.values.clone())?;
    let adj = apply(a.procedure, &pv, a.q, opts)?;

    let mut rank_of = vec![0; m];
    for (r, &id) in adj.ordered.rank_to_id().iter().enumerate() {
        rank_of[id] = r + 1;
    }
    let rows: Vec<AdjustRow> = (0..m)
        .map(|id| AdjustRow {
            id: &table.labels[id],
            p: table.values[id],
            rejected: u8::from(rank_of[id] <= adj.rejections.k),
            rank: rank_of[id],
            threshold_used: adj.constants[rank_of[id] - 1],
        })
        .collect();

    let summary = format!(
        "procedure={} m={m} k={} q={} family={} threshold={}",
        a.procedure,
        adj.rejections.k,
        a.q,
        a.procedure.family(),
        adj.rejections.threshold
    );

    let write_body = |w: &mut dyn Write| -> CliResult<()> {
        match a.format {
            Format::Csv => {
                let mut cw = csv::Writer::from_writer(w);
                cw.write_record(["id", "p", "rejected", "rank", "threshold_used"])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                for r in &rows {
                    cw.write_record([
                        r.id.to_string(),
                        r.p.to_string(),
                        r.rejected.to_string(),
                        r.rank.to_string(),
                        r.threshold_used.to_string(),
                    ])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                }
                cw.flush()?;
            }
            Format::Structured => {
                let report = AdjustReport {
                    procedure: a.procedure,
                    q: a.q,
                    m,
                    k: adj.rejections.k,
                    family: a.procedure.family().to_string(),
                    threshold: adj.rejections.threshold,
                    rows: &rows,
                };
                serde_json::to_writer_pretty(&mut *w, &report)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    };

    match &a.out {
        Some(path) => {
            let mut file = create(path)?;
            write_body(&mut file)?;
            file.flush()?;
            writeln!(out, "{summary}")?;
        }
        None => {
            write_body(out)?;
            writeln!(err, "{summary}")?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut config = ExperimentConfig::load(&a.config).map_err(|e| match e {
        ConfigError::Io { .. } => CliError::Io(e.to_string()),
        ConfigError::Parse(_) => CliError::Parse(e.to_string()),
    })?;
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    if let Some(reps) = a.reps {
        config.reps = reps;
    }
    if a.workers == Some(0) {
        return Err(CliError::Domain("--workers must be at least 1".into()));
    }

    let grid = config.scenarios();
    for s in &grid {
        s.validate()?;
    }
    let cells = simulate::run_experiment(&grid, &config.procedures, a.workers)?;

    let (csv_path, json_path) = match a.format {
        Format::Csv => (a.out.clone(), sibling(&a.out, ".json")),
        Format::Structured => (sibling(&a.out, ".csv"), a.out.clone()),
    };
    let mut w = create(&csv_path)?;
    simulate::write_csv(&cells, &mut w)?;
    w.flush()?;
    let mut w = create(&json_path)?;
    simulate::write_json(&cells, &mut w)?;
    w.flush()?;
    let curves_path = sibling(&a.out, ".curves.csv");
    let mut w = create(&curves_path)?;
    simulate::write_curves(&cells, &mut w)?;
    w.flush()?;

    if let Some(name) = &config.name {
        writeln!(out, "{name}")?;
    }
    write!(out, "{}", simulate::format_tables(&cells))?;
    writeln!(
        out,
        "wrote {}, {} and {}",
        csv_path.display(),
        json_path.display(),
        curves_path.display()
    )?;
    Ok(())
}

fn build_constants(family: Family, m: usize, q: f64, beta: Option<f64>) -> CliResult<CriticalConstants> {
    if beta.is_some() && family != Family::Ms {
        return Err(CliError::Domain("--beta applies only to the ms family".into()));
    }
    Ok(match family {
        Family::Ms => ms_constants(m, q, beta.unwrap_or(1.0))?,
        Family::Bh => bh_constants(m, q)?,
        Family::Prds => prds_constants(m, q)?,
    })
}

#[derive(Serialize)]
struct ConstantRow {
    i: usize,
    alpha: f64,
    bound: f64,
    holds: bool,
}

fn cmd_constants(a: &ConstantsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if a.m == 0 {
        return Err(CliError::Domain("m must be at least 1".into()));
    }
    let c = build_constants(a.family, a.m, a.q, a.beta)?;
    let rows: Vec<ConstantRow> = c
        .alphas
        .iter()
        .enumerate()
        .map(|(idx, &alpha)| {
            let bound = theorem1_bound(idx + 1, a.m, a.q);
            ConstantRow {
                i: idx + 1,
                alpha,
                bound,
                holds: alpha < 1.0 && alpha / (1.0 - alpha) <= bound * (1.0 + CONDITION_SLACK),
            }
        })
        .collect();
    let holds = check_theorem1_condition(&c, a.q);
    match a.format {
        Format::Csv => {
            writeln!(out, "i,alpha,bound,holds")?;
            for r in &rows {
                writeln!(out, "{},{},{},{}", r.i, r.alpha, r.bound, r.holds)?;
            }
        }
        Format::Structured => {
            let doc = serde_json::json!({
                "family": a.family.to_possible_value().map(|v| v.get_name().to_string()),
                "m": a.m,
                "q": a.q,
                "beta": c.beta,
                "condition_holds": holds,
                "rows": rows,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?)?;
        }
    }
    writeln!(
        err,
        "condition alpha_i/(1-alpha_i) <= iq/(m+1-i): {}",
        if holds { "holds" } else { "violated" }
    )?;
    Ok(())
}

fn cmd_exact_fdr(a: &ExactFdrArgs, out: &mut dyn Write) -> CliResult<()> {
    let constants = build_constants(a.family, a.m, a.q, a.beta)?;
    let alt_cdf = match a.mu {
        Some(mu) if mu.is_finite() => AltCdf::GaussianShift(mu),
        Some(mu) => return Err(CliError::Domain(format!("mu = {mu} must be finite"))),
        None => AltCdf::Uniform,
    };
    let fdr = exact_fdr_stepdown(&ExactFdrSpec {
        constants,
        m0: a.m0,
        alt_cdf,
    })?;
    match a.format {
        Format::Csv => {
            writeln!(out, "m,m0,q,fdr")?;
            writeln!(out, "{},{},{},{}", a.m, a.m0, a.q, fdr)?;
        }
        Format::Structured => {
            let doc = serde_json::json!({ "m": a.m, "m0": a.m0, "q": a.q, "mu": a.mu, "fdr": fdr });
            writeln!(out, "{doc}")?;
        }
    }
    Ok(())
}
