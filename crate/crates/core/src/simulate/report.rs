use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use super::ResultCell;
use crate::procedures::Procedure;

pub const CSV_COLUMNS: [&str; 11] = [
    "procedure", "m", "pi0", "rho", "q", "reps", "fdr_hat", "fdr_se", "power_hat", "power_se",
    "rel_power",
];

/// Flat view of a [`ResultCell`], shared by the CSV and JSON outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub procedure: Procedure,
    pub m: usize,
    pub pi0: f64,
    pub rho: f64,
    pub q: f64,
    pub reps: usize,
    pub fdr_hat: f64,
    pub fdr_se: Option<f64>,
    pub power_hat: Option<f64>,
    pub power_se: Option<f64>,
    pub rel_power: Option<f64>,
}

impl From<&ResultCell> for ResultRow {
    fn from(c: &ResultCell) -> Self {
        Self {
            procedure: c.procedure,
            m: c.scenario.m,
            pi0: c.scenario.pi0,
            rho: c.scenario.rho,
            q: c.scenario.q,
            reps: c.scenario.reps,
            fdr_hat: c.fdr_hat,
            fdr_se: c.fdr_se,
            power_hat: c.power_hat,
            power_se: c.power_se,
            rel_power: c.rel_power,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// One row per cell; undefined values are written as `NA`.
pub fn write_csv<W: Write>(cells: &[ResultCell], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(to_io)?;
    for c in cells {
        let r = ResultRow::from(c);
        w.write_record([
            r.procedure.to_string(),
            r.m.to_string(),
            r.pi0.to_string(),
            r.rho.to_string(),
            r.q.to_string(),
            r.reps.to_string(),
            r.fdr_hat.to_string(),
            opt(r.fdr_se),
            opt(r.power_hat),
            opt(r.power_se),
            opt(r.rel_power),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

/// The same rows as [`write_csv`] as a JSON array; undefined values are `null`.
pub fn write_json<W: Write>(cells: &[ResultCell], mut out: W) -> io::Result<()> {
    let rows: Vec<ResultRow> = cells.iter().map(ResultRow::from).collect();
    serde_json::to_writer_pretty(&mut out, &rows)?;
    writeln!(out)
}

/// FDR (and power) against pi0, one line per (procedure, m, rho), sorted for plotting.
pub fn write_curves<W: Write>(cells: &[ResultCell], out: W) -> io::Result<()> {
    let mut rows: Vec<&ResultCell> = cells.iter().collect();
    rows.sort_by(|a, b| {
        (a.procedure, a.scenario.m)
            .cmp(&(b.procedure, b.scenario.m))
            .then(a.scenario.rho.total_cmp(&b.scenario.rho))
            .then(a.scenario.pi0.total_cmp(&b.scenario.pi0))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["procedure", "m", "rho", "pi0", "fdr_hat", "fdr_se", "rel_power"])
        .map_err(to_io)?;
    for c in rows {
        w.write_record([
            c.procedure.to_string(),
            c.scenario.m.to_string(),
            c.scenario.rho.to_string(),
            c.scenario.pi0.to_string(),
            c.fdr_hat.to_string(),
            opt(c.fdr_se),
            opt(c.rel_power),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

/// Text tables: estimated FDR and power relative to the oracle, with
/// procedures as rows and (pi0, m) as columns, one block per rho.
pub fn format_tables(cells: &[ResultCell]) -> String {
    let mut procs: Vec<Procedure> = Vec::new();
    for c in cells {
        if !procs.contains(&c.procedure) {
            procs.push(c.procedure);
        }
    }
    let key = |x: f64| x.to_bits();
    let rhos: BTreeSet<u64> = cells.iter().map(|c| key(c.scenario.rho)).collect();
    let ms: BTreeSet<usize> = cells.iter().map(|c| c.scenario.m).collect();
    let pi0s: BTreeSet<u64> = cells.iter().map(|c| key(c.scenario.pi0)).collect();

    let lookup = |p: Procedure, rho: u64, m: usize, pi0: u64| {
        cells.iter().find(|c| {
            c.procedure == p && key(c.scenario.rho) == rho && c.scenario.m == m && key(c.scenario.pi0) == pi0
        })
    };

    let mut s = String::new();
    for &rho in &rhos {
        let rho_v = f64::from_bits(rho);
        for (title, pick) in [
            ("Estimated FDR", (|c: &ResultCell| Some(c.fdr_hat)) as fn(&ResultCell) -> Option<f64>),
            ("Power relative to the oracle", |c: &ResultCell| c.rel_power),
        ] {
            let _ = writeln!(s, "{title}, rho = {rho_v}");
            let _ = write!(s, "{:<6}", "m0/m");
            for &pi0 in &pi0s {
                for _ in &ms {
                    let _ = write!(s, "{:>8}", f64::from_bits(pi0));
                }
            }
            let _ = write!(s, "\n{:<6}", "m");
            for _ in &pi0s {
                for m in &ms {
                    let _ = write!(s, "{m:>8}");
                }
            }
            s.push('\n');
            for &p in &procs {
                let _ = write!(s, "{:<6}", p.as_str());
                for &pi0 in &pi0s {
                    for &m in &ms {
                        let cell = lookup(p, rho, m, pi0).and_then(pick);
                        match cell {
                            Some(v) => {
                                let _ = write!(s, "{v:>8.3}");
                            }
                            None => {
                                let _ = write!(s, "{:>8}", "-");
                            }
                        }
                    }
                }
                s.push('\n');
            }
            s.push('\n');
        }
    }
    s
}
