//! QAPLIB `.dat` ingestion and result tables.
//!
//! A `.dat` file is a whitespace-separated stream: the order `n`, then the
//! flow matrix `A` and the distance matrix `B`, each row-major. The linear
//! term is always zero for QAPLIB data.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

use crate::bounding::relative_gap;
use crate::error::{QapError, Result};
use crate::instance::QapInstance;
use crate::solver::SolverMode;

pub const CSV_HEADER: &str = "problem,opt,lbd,ubd,rel.gap,iter,time(sec),mode";

pub fn parse_instance(text: &[u8], name: &str) -> Result<QapInstance> {
    let text = String::from_utf8_lossy(text);
    let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
    let Some(first) = tokens.first() else {
        return Err(QapError::MalformedCount {
            expected: 1,
            found: 0,
        });
    };
    let n: usize = first.parse().map_err(|_| QapError::NonNumericToken {
        token: first.to_string(),
        position: 0,
    })?;
    let mut values = Vec::with_capacity(tokens.len() - 1);
    for (k, tok) in tokens.iter().enumerate().skip(1) {
        let v: f64 = tok.parse().map_err(|_| QapError::NonNumericToken {
            token: tok.to_string(),
            position: k,
        })?;
        if !v.is_finite() {
            return Err(QapError::NonNumericToken {
                token: tok.to_string(),
                position: k,
            });
        }
        values.push(v);
    }
    let expected = 1 + 2 * n * n;
    if tokens.len() != expected {
        return Err(QapError::MalformedCount {
            expected,
            found: tokens.len(),
        });
    }
    let a = DMatrix::from_row_slice(n, n, &values[..n * n]);
    let b = DMatrix::from_row_slice(n, n, &values[n * n..]);
    QapInstance::new(name, a, b, None)
}

/// Debug dump in `.dat` layout. Only `A` and `B` are written.
pub fn write_instance(inst: &QapInstance) -> String {
    let mut out = format!("{}\n", inst.n());
    for m in [inst.a(), inst.b()] {
        out.push('\n');
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// One row of a bounds table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(rename = "problem")]
    pub name: String,
    #[serde(rename = "opt")]
    pub opt_known: Option<f64>,
    pub lbd: f64,
    pub ubd: f64,
    #[serde(rename = "rel.gap", serialize_with = "two_decimals")]
    pub rel_gap_pct: f64,
    #[serde(rename = "iter")]
    pub iters: usize,
    #[serde(rename = "time(sec)")]
    pub time_sec: f64,
    #[serde(rename = "mode")]
    pub solver_mode: SolverMode,
}

impl BoundsReport {
    pub fn new(
        name: impl Into<String>,
        opt_known: Option<f64>,
        lbd: f64,
        ubd: f64,
        iters: usize,
        time_sec: f64,
        solver_mode: SolverMode,
    ) -> Result<Self> {
        if lbd.partial_cmp(&ubd).is_none_or(|o| o.is_gt()) {
            return Err(QapError::Numerical(format!(
                "lower bound {lbd} exceeds upper bound {ubd}"
            )));
        }
        Ok(Self {
            name: name.into(),
            opt_known,
            lbd,
            ubd,
            rel_gap_pct: relative_gap(lbd, ubd),
            iters,
            time_sec,
            solver_mode,
        })
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn two_decimals<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// A table row that is either a finished report or a per-instance failure.
#[derive(Clone, Debug, PartialEq)]
pub enum ReportEntry {
    Solved(BoundsReport),
    Failed {
        name: String,
        opt_known: Option<f64>,
        error: String,
    },
}

impl ReportEntry {
    pub fn name(&self) -> &str {
        match self {
            ReportEntry::Solved(r) => &r.name,
            ReportEntry::Failed { name, .. } => name,
        }
    }
}

pub fn write_report(reports: &[BoundsReport], format: ReportFormat) -> String {
    let entries: Vec<ReportEntry> = reports.iter().cloned().map(ReportEntry::Solved).collect();
    write_entries(&entries, format)
}

/// Like [`write_report`]; failed rows keep the name and known optimum and
/// carry `failed` in the mode column (csv) or an `error` key (json).
pub fn write_entries(entries: &[ReportEntry], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for e in entries {
                match e {
                    ReportEntry::Solved(r) => {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{:.2},{},{},{}",
                            r.name,
                            opt_field(r.opt_known),
                            r.lbd,
                            r.ubd,
                            r.rel_gap_pct,
                            r.iters,
                            r.time_sec,
                            r.solver_mode
                        );
                    }
                    ReportEntry::Failed {
                        name, opt_known, ..
                    } => {
                        let _ = writeln!(out, "{},{},,,,,,failed", name, opt_field(*opt_known));
                    }
                }
            }
            out
        }
        ReportFormat::Json => {
            let values: Vec<serde_json::Value> = entries
                .iter()
                .map(|e| match e {
                    ReportEntry::Solved(r) => {
                        serde_json::to_value(r).expect("report serializes to json")
                    }
                    ReportEntry::Failed {
                        name,
                        opt_known,
                        error,
                    } => serde_json::json!({
                        "problem": name,
                        "opt": opt_known,
                        "error": error,
                    }),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&values).expect("json array serializes");
            s.push('\n');
            s
        }
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// A published optimum; `proven` is false for best-known values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnownOptimum {
    pub name: &'static str,
    pub value: f64,
    pub proven: bool,
}

const fn opt(name: &'static str, value: f64) -> KnownOptimum {
    KnownOptimum {
        name,
        value,
        proven: true,
    }
}

const fn best_known(name: &'static str, value: f64) -> KnownOptimum {
    KnownOptimum {
        name,
        value,
        proven: false,
    }
}

pub const KNOWN_OPTIMA: &[KnownOptimum] = &[
    opt("chr12a", 9552.0),
    opt("chr12b", 9742.0),
    opt("chr12c", 11156.0),
    opt("chr15a", 9896.0),
    opt("chr15b", 7990.0),
    opt("chr15c", 9504.0),
    opt("chr18a", 11098.0),
    opt("chr18b", 1534.0),
    opt("chr20a", 2192.0),
    opt("chr20b", 2298.0),
    opt("chr20c", 14142.0),
    opt("els19", 17212548.0),
    opt("esc16a", 68.0),
    opt("esc16b", 292.0),
    opt("esc16c", 160.0),
    opt("esc16d", 16.0),
    opt("esc16e", 28.0),
    opt("esc16g", 26.0),
    opt("esc16h", 996.0),
    opt("esc16i", 14.0),
    opt("esc16j", 8.0),
    opt("had12", 1652.0),
    opt("had14", 2724.0),
    opt("had16", 3720.0),
    opt("had18", 5358.0),
    opt("had20", 6922.0),
    opt("nug12", 578.0),
    opt("nug14", 1014.0),
    opt("nug15", 1150.0),
    opt("nug16a", 1610.0),
    opt("nug16b", 1240.0),
    opt("nug17", 1732.0),
    opt("nug18", 1930.0),
    opt("nug20", 2570.0),
    opt("rou12", 235528.0),
    opt("rou15", 354210.0),
    opt("rou20", 725522.0),
    opt("scr12", 31410.0),
    opt("scr15", 51140.0),
    opt("scr20", 110030.0),
    opt("tai10a", 135028.0),
    opt("tai12a", 224416.0),
    opt("tai15a", 388214.0),
    opt("tai17a", 491812.0),
    opt("tai20a", 703482.0),
    opt("chr22a", 6156.0),
    opt("chr22b", 6194.0),
    opt("chr25a", 3796.0),
    opt("esc32a", 130.0),
    opt("esc32b", 168.0),
    opt("esc32c", 642.0),
    opt("esc32d", 200.0),
    opt("esc32e", 2.0),
    opt("esc32g", 6.0),
    opt("esc32h", 438.0),
    opt("kra30a", 88900.0),
    opt("kra30b", 91420.0),
    opt("kra32", 88700.0),
    opt("nug21", 2438.0),
    opt("nug22", 3596.0),
    opt("nug24", 3488.0),
    opt("nug25", 3744.0),
    opt("nug27", 5234.0),
    opt("nug28", 5166.0),
    opt("nug30", 6124.0),
    opt("ste36a", 9526.0),
    opt("ste36b", 15852.0),
    opt("ste36c", 8239110.0),
    opt("tai25a", 1167256.0),
    opt("tai30a", 1818146.0),
    best_known("tai35a", 2422002.0),
    best_known("tai40a", 3139370.0),
    opt("tho30", 149936.0),
    best_known("tho40", 240516.0),
    opt("esc64a", 116.0),
    best_known("sko42", 15812.0),
    best_known("sko49", 23386.0),
    best_known("sko56", 34458.0),
    best_known("sko64", 48498.0),
    best_known("tai50a", 4938796.0),
    best_known("tai60a", 7205962.0),
    opt("tai64c", 1855928.0),
    best_known("wil50", 48816.0),
];

/// Looks up the bundled optimum for an instance name (case-insensitive,
/// any `.dat` suffix ignored).
pub fn known_optimum(name: &str) -> Option<KnownOptimum> {
    let key = name.trim_end_matches(".dat").to_ascii_lowercase();
    KNOWN_OPTIMA.iter().copied().find(|k| k.name == key)
}
