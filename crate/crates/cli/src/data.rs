//! CSV input and output.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::CliError;

/// Shortest fixed-width form that round-trips every `f64`: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub observations: DMatrix<f64>,
    pub output_names: Vec<String>,
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

/// Reads a header-led CSV whose first column is `time` and whose remaining
/// columns are model outputs. Times must strictly increase.
pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeries, CliError> {
    parse_timeseries(open(path)?, &path.display().to_string())
}

pub fn parse_timeseries(input: impl Read, source: &str) -> Result<TimeSeries, CliError> {
    let fail = |line: u64, msg: String| CliError::Config(format!("{source}: line {line}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| fail(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    if header.first().map(String::as_str) != Some("time") {
        return Err(fail(1, "first column must be named 'time'".into()));
    }
    if header.len() < 2 {
        return Err(fail(1, "no output columns".into()));
    }
    let n_outputs = header.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    fail(line, format!("expected {expected_len} fields, found {len}"))
                }
                _ => fail(line, e.to_string()),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let field = field.trim();
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(fail(line, format!("'{field}' is not a finite number"))),
            }
        }
        if let Some(&last) = times.last() {
            if row[0] <= last {
                return Err(fail(line, format!("time {} does not increase on {last}", row[0])));
            }
        }
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    if times.is_empty() {
        return Err(CliError::Config(format!("{source}: no data rows")));
    }
    let observations = DMatrix::from_row_slice(times.len(), n_outputs, &values);
    Ok(TimeSeries {
        times,
        observations,
        output_names: header[1..].to_vec(),
    })
}

/// Writes rows of numbers under a header.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    write_table(path, header, rows.into_iter().map(|r| r.into_iter().map(format_f64).collect()))
}

/// Writes pre-formatted fields under a header.
pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Run(format!("cannot write {}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads back a numeric CSV written by [`write_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let source = path.display().to_string();
    let mut reader = csv::Reader::from_reader(open(path)?);
    let header = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Config(format!("{source}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(
            record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| CliError::Config(format!("{source}: line {line}: '{f}' is not a number")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TimeSeries, CliError> {
        parse_timeseries(text.as_bytes(), "test.csv")
    }

    #[test]
    fn minimal_file() {
        let ts = parse("time,y\n0,1\n1,2\n").unwrap();
        assert_eq!(ts.times, vec![0.0, 1.0]);
        assert_eq!(ts.observations, DMatrix::from_row_slice(2, 1, &[1.0, 2.0]));
        assert_eq!(ts.output_names, vec!["y"]);
    }

    #[test]
    fn crlf_and_two_outputs() {
        let ts = parse("time,a,b\r\n0,1,2\r\n0.5,3,4\r\n").unwrap();
        assert_eq!(ts.observations.ncols(), 2);
        assert_eq!(ts.observations[(1, 1)], 4.0);
    }

    #[test]
    fn out_of_order_names_line() {
        let err = parse("time,y\n1,1\n0,2\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn rejects_bad_input() {
        for (text, line) in [
            ("time,y\n0,1\n1,NaN\n", "line 3"),
            ("time,y\n0,1\n1,2,3\n", "line 3"),
            ("t,y\n0,1\n", "line 1"),
            ("time,y\n0,1\n1,abc\n", "line 3"),
        ] {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(line), "{text:?}: {err}");
        }
        assert!(parse("time,y\n").is_err());
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123_456_789.123_456_79, f64::MIN_POSITIVE, 5e-324] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
    }
}
