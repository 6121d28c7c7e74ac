//! Result files: a per-iteration CSV and a JSON run summary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{median, AlgorithmKind, BenchError, Mode, RunRecord};

/// One CSV line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub iteration: usize,
    pub pe_eff: f64,
    pub pe_eff_frac: f64,
    pub err_px: f64,
    pub exchanged: u64,
    pub messages: u64,
    pub bytes: u64,
}

pub const CSV_HEADER: &str = "run_id,iteration,pe_eff,pe_eff_frac,err_px,exchanged,messages,bytes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub replicate: usize,
    pub seed: u64,
    pub mode: Mode,
    pub algo: AlgorithmKind,
    pub pes: usize,
    pub particles_per_pe: usize,
    pub iterations: usize,
    pub rmse: f64,
    pub final_pe_eff_frac: f64,
    pub total_exchanged: u64,
    pub total_messages: u64,
    pub total_bytes: u64,
    pub diverged_iterations: usize,
    pub wall_time_s: f64,
}

pub fn summarize(record: &RunRecord) -> RunSummary {
    RunSummary {
        run_id: record.run_id.clone(),
        replicate: record.replicate,
        seed: record.seed,
        mode: record.config.mode,
        algo: record.config.algo,
        pes: record.config.pes,
        particles_per_pe: record.config.particles_per_pe,
        iterations: record.rows.len(),
        rmse: record.rmse,
        final_pe_eff_frac: record.rows.last().map_or(f64::NAN, |r| r.pe_eff_frac),
        total_exchanged: record.total_exchanged(),
        total_messages: record.total_messages(),
        total_bytes: record.total_bytes(),
        diverged_iterations: record.diverged_iterations(),
        wall_time_s: record.wall_time_s,
    }
}

fn rows_of(record: &RunRecord) -> impl Iterator<Item = CsvRow> + '_ {
    record.rows.iter().map(move |r| CsvRow {
        run_id: record.run_id.clone(),
        iteration: r.iteration,
        pe_eff: r.pe_eff,
        pe_eff_frac: r.pe_eff_frac,
        err_px: r.err_px,
        exchanged: r.exchanged,
        messages: r.messages,
        bytes: r.bytes,
    })
}

pub fn write_csv<W: Write>(records: &[RunRecord], w: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    for record in records {
        for row in rows_of(record) {
            writer.serialize(row)?;
        }
    }
    if records.iter().all(|r| r.rows.is_empty()) {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<CsvRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn read_csv_path(path: &Path) -> Result<Vec<CsvRow>, BenchError> {
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file).map_err(|source| BenchError::Csv {
        path: path.display().to_string(),
        source,
    })
}

/// Path of the JSON summary written next to `csv_path`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Writes `csv_path` and a `<stem>.summary.json` beside it. Returns the
/// summary path.
pub fn write_results(records: &[RunRecord], csv_path: &Path) -> Result<PathBuf, BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| BenchError::Io { path, source }
    };
    let file = File::create(csv_path).map_err(io_err(csv_path))?;
    write_csv(records, BufWriter::new(file)).map_err(|source| BenchError::Csv {
        path: csv_path.display().to_string(),
        source,
    })?;
    let summary: Vec<RunSummary> = records.iter().map(summarize).collect();
    let json_path = summary_path(csv_path);
    let mut out = BufWriter::new(File::create(&json_path).map_err(io_err(&json_path))?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n").map_err(io_err(&json_path))?;
    out.flush().map_err(io_err(&json_path))?;
    Ok(json_path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub run_id: String,
    pub iterations: usize,
    /// `sqrt(mean err_px²)`, i.e. the run's RMSE.
    pub rmse: f64,
    pub final_pe_eff_frac: f64,
    pub exchanged: u64,
    pub messages: u64,
    pub bytes: u64,
}

/// Summary statistics over one or more result CSVs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub runs: Vec<RunReport>,
    /// Per run label (run id without the replicate suffix): median
    /// `pe_eff / M` per iteration.
    pub recovery: BTreeMap<String, Vec<(usize, f64)>>,
}

fn label_of(run_id: &str) -> &str {
    run_id.rsplit_once("-r").map_or(run_id, |(label, _)| label)
}

pub fn report(rows: &[CsvRow]) -> Report {
    let mut by_run: BTreeMap<&str, Vec<&CsvRow>> = BTreeMap::new();
    for row in rows {
        by_run.entry(row.run_id.as_str()).or_default().push(row);
    }
    let runs = by_run
        .iter()
        .map(|(id, rows)| RunReport {
            run_id: id.to_string(),
            iterations: rows.len(),
            rmse: (rows.iter().map(|r| r.err_px * r.err_px).sum::<f64>() / rows.len() as f64).sqrt(),
            final_pe_eff_frac: rows.iter().max_by_key(|r| r.iteration).map_or(f64::NAN, |r| r.pe_eff_frac),
            exchanged: rows.iter().map(|r| r.exchanged).sum(),
            messages: rows.iter().map(|r| r.messages).sum(),
            bytes: rows.iter().map(|r| r.bytes).sum(),
        })
        .collect();
    let mut grouped: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry(label_of(&row.run_id).to_string())
            .or_default()
            .entry(row.iteration)
            .or_default()
            .push(row.pe_eff_frac);
    }
    let recovery = grouped
        .into_iter()
        .map(|(label, per_it)| (label, per_it.into_iter().map(|(k, v)| (k, median(&v))).collect()))
        .collect();
    Report { runs, recovery }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>6} {:>10} {:>12} {:>10} {:>9} {:>12}",
            "run_id", "iters", "rmse_px", "pe_eff_frac", "exchanged", "messages", "bytes"
        )?;
        for r in &self.runs {
            writeln!(
                f,
                "{:<16} {:>6} {:>10.4} {:>12.4} {:>10} {:>9} {:>12}",
                r.run_id, r.iterations, r.rmse, r.final_pe_eff_frac, r.exchanged, r.messages, r.bytes
            )?;
        }
        for (label, curve) in &self.recovery {
            writeln!(f)?;
            writeln!(f, "median pe_eff/M for {label}:")?;
            for (k, v) in curve {
                writeln!(f, "  iter {k:>3}  {v:.4}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{IterationRow, ScenarioConfig};
    use proptest::prelude::*;

    fn record(id: &str, rows: Vec<IterationRow>) -> RunRecord {
        RunRecord {
            run_id: id.into(),
            replicate: 0,
            seed: 1,
            config: ScenarioConfig::default(),
            estimates: vec![],
            rmse: 0.0,
            wall_time_s: 0.0,
            rows,
        }
    }

    fn row(iteration: usize, pe_eff: f64, err_px: f64) -> IterationRow {
        IterationRow {
            iteration,
            pe_eff,
            pe_eff_frac: pe_eff / 24.0,
            err_px,
            exchanged: 4,
            messages: 1,
            bytes: 208,
            diverged: false,
        }
    }

    #[test]
    fn header_and_single_row() {
        let mut buf = Vec::new();
        write_csv(&[record("arna-r0", vec![row(1, 3.0, 0.1)])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("arna-r0,1,3.0,0.125,0.1,4,1,208"));
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_results(&[], &dir.path().join("x.csv")),
            Err(BenchError::EmptyResults)
        ));
    }

    #[test]
    fn io_errors_carry_path() {
        let err = write_results(&[record("a-r0", vec![row(1, 1.0, 0.0)])], Path::new("/nonexistent/dir/out.csv"))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }

    #[test]
    fn report_groups_by_label() {
        let rows = vec![
            CsvRow { run_id: "arna-r0".into(), iteration: 1, pe_eff: 2.0, pe_eff_frac: 0.1, err_px: 3.0, exchanged: 5, messages: 1, bytes: 260 },
            CsvRow { run_id: "arna-r0".into(), iteration: 2, pe_eff: 4.0, pe_eff_frac: 0.3, err_px: 4.0, exchanged: 0, messages: 0, bytes: 0 },
            CsvRow { run_id: "arna-r1".into(), iteration: 1, pe_eff: 2.0, pe_eff_frac: 0.2, err_px: 0.0, exchanged: 5, messages: 1, bytes: 260 },
        ];
        let rep = report(&rows);
        assert_eq!(rep.runs.len(), 2);
        assert!((rep.runs[0].rmse - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(rep.runs[0].final_pe_eff_frac, 0.3);
        assert_eq!(rep.runs[0].exchanged, 5);
        let curve = &rep.recovery["arna"];
        assert!((curve[0].1 - 0.15).abs() < 1e-12);
        assert_eq!(curve[1], (2, 0.3));
        assert!(rep.to_string().contains("arna-r1"));
    }

    proptest! {
        #[test]
        fn csv_roundtrip_full_precision(
            vals in prop::collection::vec((1.0f64..1000.0, 0.0f64..1.0, 0.0f64..100.0, any::<u32>()), 1..20)
        ) {
            let rows: Vec<IterationRow> = vals
                .iter()
                .enumerate()
                .map(|(k, &(pe, frac, err, n))| IterationRow {
                    iteration: k + 1,
                    pe_eff: pe,
                    pe_eff_frac: frac,
                    err_px: err,
                    exchanged: n as u64,
                    messages: (n % 7) as u64,
                    bytes: n as u64 * 52,
                    diverged: false,
                })
                .collect();
            let rec = record("rna10-r3", rows.clone());
            let mut buf = Vec::new();
            write_csv(std::slice::from_ref(&rec), &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (b, r) in back.iter().zip(&rows) {
                prop_assert_eq!(&b.run_id, "rna10-r3");
                prop_assert_eq!(b.iteration, r.iteration);
                prop_assert_eq!(b.pe_eff.to_bits(), r.pe_eff.to_bits());
                prop_assert_eq!(b.pe_eff_frac.to_bits(), r.pe_eff_frac.to_bits());
                prop_assert_eq!(b.err_px.to_bits(), r.err_px.to_bits());
                prop_assert_eq!((b.exchanged, b.messages, b.bytes), (r.exchanged, r.messages, r.bytes));
            }
        }
    }
}
