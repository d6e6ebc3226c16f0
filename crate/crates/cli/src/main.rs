mod config;
mod experiments;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaos_opuc::montecarlo::ReplicaPool;
use chaos_opuc::Error;
use clap::Parser;
use serde_json::{json, Value};

use config::{Cli, Experiment};
use experiments::{Outcome, Table};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_csv(path: &Path, table: &Table) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(table.columns.iter().map(|c| c.0))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

fn header(experiment: &Experiment) -> serde_json::Map<String, Value> {
    let common = experiment.common();
    let mut m = serde_json::Map::new();
    m.insert("experiment".into(), json!(experiment.name()));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(common.seed));
    m.insert("threads".into(), json!(common.threads));
    m.insert("config".into(), experiment.echo());
    m
}

fn write_json(path: &Path, value: &Value) -> Result<(), Error> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

fn finish(experiment: &Experiment, prefix: &Path, outcome: Outcome) -> Result<bool, Error> {
    let csv_path = with_suffix(prefix, ".samples.csv");
    write_csv(&csv_path, &outcome.table)?;
    let pass = outcome.reports.iter().all(|r| r.pass);
    let mut report = header(experiment);
    report.insert("pass".into(), json!(pass));
    report.insert("reports".into(), serde_json::to_value(&outcome.reports)?);
    report.insert("samples_csv".into(), json!(csv_path.display().to_string()));
    let columns: serde_json::Map<String, Value> =
        outcome.table.columns.iter().map(|(name, doc)| (name.to_string(), json!(doc))).collect();
    report.insert("csv_columns".into(), Value::Object(columns));
    write_json(&with_suffix(prefix, ".report.json"), &Value::Object(report))?;
    for r in &outcome.reports {
        println!(
            "{:<28} statistic {:<12.6e} threshold {:<10.3e} {}",
            r.name,
            r.statistic,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(pass)
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Parameter(_) | Error::Domain(_) | Error::Phase(_))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = &cli.experiment;
    let common = experiment.common();
    let prefix = common.output.clone().unwrap_or_else(|| PathBuf::from(experiment.name()));
    let pool = ReplicaPool::new(common.threads);
    let result = experiments::run(experiment, &pool).and_then(|outcome| finish(experiment, &prefix, outcome));
    match result {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error in {}: {e}", experiment.name());
            if is_usage_error(&e) {
                return ExitCode::from(EXIT_USAGE);
            }
            let mut report = header(experiment);
            report.insert("pass".into(), json!(false));
            report.insert("error".into(), json!(e.to_string()));
            if let Err(io) = write_json(&with_suffix(&prefix, ".report.json"), &Value::Object(report)) {
                eprintln!("could not write the error report: {io}");
            }
            ExitCode::from(EXIT_FAIL)
        }
    }
}
