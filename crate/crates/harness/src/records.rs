//! The per-iteration record file (`runs.csv`) and its per-iteration summary.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{HarnessError, Result};

pub const RUN_COLUMNS: [&str; 8] = [
    "experiment_id",
    "seed",
    "iteration",
    "gap_sup",
    "gap_l2",
    "bias_l2",
    "noise_trace",
    "wall_ms",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "experiment_id",
    "iteration",
    "n_seeds",
    "gap_l2_mean",
    "gap_l2_std",
    "gap_l2_min",
    "gap_l2_max",
    "gap_sup_mean",
    "gap_sup_std",
    "gap_sup_min",
    "gap_sup_max",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment_id: String,
    pub seed: u64,
    pub iteration: usize,
    pub gap_sup: f64,
    pub gap_l2: f64,
    pub bias_l2: Option<f64>,
    pub noise_trace: Option<f64>,
    pub wall_ms: f64,
}

/// Shortest-exact scientific form, so values survive a write/read cycle.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

pub fn write_runs<W: Write>(out: W, records: &[RunRecord]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for r in records {
        w.write_record([
            r.experiment_id.clone(),
            r.seed.to_string(),
            r.iteration.to_string(),
            format_float(r.gap_sup),
            format_float(r.gap_l2),
            format_opt(r.bias_l2),
            format_opt(r.noise_trace),
            format_float(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_file(path: &Path, records: &[RunRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_runs(std::io::BufWriter::new(f), records).map_err(|e| csv_err(path, e))
}

fn check_header(path: &Path, got: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if got.iter().ne(expected.iter().copied()) {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header {}, found {}",
                expected.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

/// Reads `runs.csv`; `path` only labels error messages.
pub fn read_runs<R: Read>(input: R, path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(path, rdr.headers().map_err(|e| csv_err(path, e))?, &RUN_COLUMNS)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |col: &str, val: &str| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {col} value {val:?}"),
        };
        let field = |i: usize| row.get(i).unwrap_or("");
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(RUN_COLUMNS[i], field(i)));
        let opt = |i: usize| match field(i) {
            "" => Ok(None),
            s => s.parse::<f64>().map(Some).map_err(|_| bad(RUN_COLUMNS[i], s)),
        };
        out.push(RunRecord {
            experiment_id: field(0).to_string(),
            seed: field(1).parse().map_err(|_| bad("seed", field(1)))?,
            iteration: field(2).parse().map_err(|_| bad("iteration", field(2)))?,
            gap_sup: float(3)?,
            gap_l2: float(4)?,
            bias_l2: opt(5)?,
            noise_trace: opt(6)?,
            wall_ms: float(7)?,
        });
    }
    Ok(out)
}

pub fn read_runs_file(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_runs(std::io::BufReader::new(f), path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Order-independent: values are sorted before summing. Constant input gives
/// exactly that value and zero spread.
pub fn stats(values: &[f64]) -> Stats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (min, max) = (v[0], v[v.len() - 1]);
    if min == max {
        return Stats {
            mean: min,
            std: 0.0,
            min,
            max,
        };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stats { mean, std, min, max }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub iteration: usize,
    pub n_seeds: usize,
    pub gap_l2: Stats,
    pub gap_sup: Stats,
}

/// One row per `(experiment_id, iteration)`; experiments keep their order of
/// first appearance, iterations ascend.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.experiment_id.as_str()) {
            order.push(&r.experiment_id);
        }
    }
    let mut out = Vec::new();
    for id in order {
        let mut rows: Vec<&RunRecord> = records.iter().filter(|r| r.experiment_id == id).collect();
        rows.sort_by_key(|r| (r.iteration, r.seed));
        for group in rows.chunk_by(|a, b| a.iteration == b.iteration) {
            let l2: Vec<f64> = group.iter().map(|r| r.gap_l2).collect();
            let sup: Vec<f64> = group.iter().map(|r| r.gap_sup).collect();
            out.push(SummaryRow {
                experiment_id: id.to_string(),
                iteration: group[0].iteration,
                n_seeds: group.len(),
                gap_l2: stats(&l2),
                gap_sup: stats(&sup),
            });
        }
    }
    out
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        let mut rec = vec![r.experiment_id.clone(), r.iteration.to_string(), r.n_seeds.to_string()];
        for s in [r.gap_l2, r.gap_sup] {
            rec.extend([s.mean, s.std, s.min, s.max].map(format_float));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_file(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_summary(std::io::BufWriter::new(f), rows).map_err(|e| csv_err(path, e))
}

/// `runs.csv` in, `summary.csv` out.
pub fn summarize_file(runs: &Path, summary: &Path) -> Result<Vec<SummaryRow>> {
    let rows = summarize(&read_runs_file(runs)?);
    write_summary_file(summary, &rows)?;
    Ok(rows)
}
