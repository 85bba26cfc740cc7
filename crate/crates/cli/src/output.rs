use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rows for CSV output; the first element is the header.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What a command produced, plus an optional failure to report after the
/// result has been written.
pub struct Report {
    pub table: Table,
    pub body: Value,
    pub status: Option<Failure>,
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x != 0.0 && !(1e-6..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn provenance_lines<P: Serialize>(command: &str, resolved: &Resolved<P>) -> String {
    format!("# fcp-lab {command}\n# config: {}\n# config_sha256: {}\n", resolved.canonical_json(), resolved.sha256())
}

pub fn render_csv<P: Serialize>(command: &str, resolved: &Resolved<P>, table: &Table) -> Result<Vec<u8>, Failure> {
    let mut buf = provenance_lines(command, resolved).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn render_json<P: Serialize>(command: &str, resolved: &Resolved<P>, body: &Value) -> Result<Vec<u8>, Failure> {
    let doc = json!({
        "command": command,
        "provenance": {
            "config": resolved,
            "config_sha256": resolved.sha256(),
        },
        "result": body,
    });
    let mut buf = serde_json::to_vec_pretty(&doc).map_err(|e| Failure::io(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Where a reproducer for a failed claim goes: next to `--out` if given,
/// else in the working directory, named after the config hash.
pub fn reproducer_path(out: Option<&Path>, hash: &str) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".reproducer.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("fcp-lab-reproducer-{}.json", &hash[..12])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e-40, 12345.678, 3e20] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(6.5e-53), "6.5e-53");
    }

    #[test]
    fn reproducer_sits_next_to_output() {
        assert_eq!(
            reproducer_path(Some(Path::new("a/b.json")), "0123456789abcdef"),
            PathBuf::from("a/b.json.reproducer.json")
        );
        assert_eq!(reproducer_path(None, "0123456789abcdef"), PathBuf::from("fcp-lab-reproducer-0123456789ab.json"));
    }
}
