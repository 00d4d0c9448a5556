use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "trial",
    "estimator",
    "policy",
    "n",
    "realized_error",
    "theoretical_bound",
    "queries",
    "bits",
    "wall_time_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: u64,
    pub estimator: String,
    pub policy: String,
    pub n: u64,
    pub realized_error: f64,
    pub theoretical_bound: f64,
    pub queries: u64,
    pub bits: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(invalid(format!(
                "unknown format {s:?}, expected csv or json"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Scientific notation with 17 significant digits.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_results(rows: &[ResultRow], format: Format) -> Result<String> {
    if rows.is_empty() {
        return Err(invalid("no result rows to emit"));
    }
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.trial.to_string(),
                    r.estimator.clone(),
                    r.policy.clone(),
                    r.n.to_string(),
                    float(r.realized_error),
                    float(r.theoretical_bound),
                    r.queries.to_string(),
                    r.bits.to_string(),
                    float(r.wall_time_ms),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

/// Writes `rows` to `path` in `format`.
pub fn emit_results(rows: &[ResultRow], format: Format, path: impl AsRef<Path>) -> Result<()> {
    let text = render_results(rows, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_results(text: &str, format: Format) -> Result<Vec<ResultRow>> {
    match format {
        Format::Json => Ok(serde_json::from_str(text)?),
        Format::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
            if header != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header {header:?}"),
                });
            }
            Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: u64) -> ResultRow {
        ResultRow {
            trial,
            estimator: "signed-mean".into(),
            policy: "adversarial-up".into(),
            n: 1024,
            realized_error: 0.1 + trial as f64 / 3.0,
            theoretical_bound: 2.0f64.sqrt(),
            queries: 42,
            bits: 0,
            wall_time_ms: 0.0,
        }
    }

    #[test]
    fn csv_layout() {
        let text = render_results(&[row(0)], Format::Csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "trial,estimator,policy,n,realized_error,theoretical_bound,queries,bits,wall_time_ms"
        );
        assert_eq!(
            lines[1],
            "0,signed-mean,adversarial-up,1024,1.0000000000000001e-1,1.4142135623730951e0,42,0,0.0000000000000000e0"
        );
    }

    #[test]
    fn round_trips() {
        let rows: Vec<_> = (0..5).map(row).collect();
        for format in [Format::Csv, Format::Json] {
            let text = render_results(&rows, format).unwrap();
            assert_eq!(parse_results(&text, format).unwrap(), rows, "{format}");
            assert_eq!(render_results(&rows, format).unwrap(), text);
        }
    }

    #[test]
    fn empty_rows_and_bad_path() {
        assert!(render_results(&[], Format::Csv).is_err());
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("out.csv");
        assert!(matches!(
            emit_results(&[row(0)], Format::Csv, bad),
            Err(Error::Io(_))
        ));
        let good = dir.path().join("out.json");
        emit_results(&[row(1)], Format::Json, &good).unwrap();
        let back = parse_results(&std::fs::read_to_string(good).unwrap(), Format::Json).unwrap();
        assert_eq!(back, vec![row(1)]);
    }
}
