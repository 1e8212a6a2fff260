//! Telemetry CSV and coordinate-log I/O.
//!
//! Telemetry files carry one row per control step with the columns in
//! [`TELEMETRY_COLUMNS`]. Floats are written in their shortest round-trip
//! decimal form, so reading a file back reproduces the samples bit for bit.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::Sector;
use crate::scalar::Scalar;
use crate::trial::Sample;

pub const TELEMETRY_COLUMNS: [&str; 8] = [
    "t",
    "x",
    "y",
    "P",
    "sector",
    "yaw_cmd",
    "pitch_cmd",
    "visible",
];
pub const LOG_COLUMNS: [&str; 3] = ["t", "x", "y"];

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("CSV error in {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header {expected:?}")]
    Header {
        path: PathBuf,
        expected: Vec<String>,
    },
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {count} malformed line(s):\n{details}")]
    Malformed {
        path: PathBuf,
        count: usize,
        details: String,
    },
    #[error("{path}:{line}: time {t} does not increase past {prev}")]
    NonMonotonic {
        path: PathBuf,
        line: u64,
        t: f64,
        prev: f64,
    },
    #[error("{path}: cannot infer the timestep from {samples} sample(s)")]
    NoTimestep { path: PathBuf, samples: usize },
}

/// Shortest decimal that parses back to the same value.
fn fmt_float<T: Scalar>(v: T) -> String {
    format!("{v}")
}

pub fn write_telemetry<T: Scalar, W: Write>(out: W, samples: &[Sample<T>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TELEMETRY_COLUMNS)?;
    for s in samples {
        w.write_record([
            fmt_float(s.t),
            fmt_float(s.x),
            fmt_float(s.y),
            fmt_float(s.p),
            s.sector.as_str().to_string(),
            fmt_float(s.yaw_cmd),
            fmt_float(s.pitch_cmd),
            s.visible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_telemetry_file<T: Scalar>(
    path: &Path,
    samples: &[Sample<T>],
) -> Result<(), TelemetryError> {
    let file = File::create(path).map_err(|source| TelemetryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_telemetry(io::BufWriter::new(file), samples).map_err(|source| TelemetryError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn read_all(path: &Path) -> Result<String, TelemetryError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| TelemetryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(text)
}

fn parse_float(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("column {name}: '{field}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("column {name}: '{field}' is not finite"))
    }
}

/// Parses telemetry text. `path` only labels errors.
pub fn parse_telemetry(text: &str, path: &Path) -> Result<Vec<Sample<f64>>, TelemetryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let csv_err = |source| TelemetryError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().map(str::trim).ne(TELEMETRY_COLUMNS) {
        return Err(TelemetryError::Header {
            path: path.to_path_buf(),
            expected: TELEMETRY_COLUMNS.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = |message: String| TelemetryError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != TELEMETRY_COLUMNS.len() {
            return Err(row(format!(
                "expected {} fields, got {}",
                TELEMETRY_COLUMNS.len(),
                rec.len()
            )));
        }
        let f = |i: usize| parse_float(&rec[i], TELEMETRY_COLUMNS[i]).map_err(row);
        let sector = Sector::parse(rec[4].trim())
            .ok_or_else(|| row(format!("unknown sector '{}'", &rec[4])))?;
        let visible = match rec[7].trim() {
            "true" => true,
            "false" => false,
            other => return Err(row(format!("visible must be true or false, got '{other}'"))),
        };
        samples.push(Sample {
            t: f(0)?,
            x: f(1)?,
            y: f(2)?,
            p: f(3)?,
            sector,
            yaw_cmd: f(5)?,
            pitch_cmd: f(6)?,
            visible,
        });
    }
    Ok(samples)
}

pub fn read_telemetry_file(path: &Path) -> Result<Vec<Sample<f64>>, TelemetryError> {
    parse_telemetry(&read_all(path)?, path)
}

/// Timestep of a telemetry trace: the spacing of the first two samples, or
/// the first timestamp when there is only one.
pub fn infer_dt(samples: &[Sample<f64>], path: &Path) -> Result<f64, TelemetryError> {
    let dt = match samples {
        [a, b, ..] => b.t - a.t,
        [a] => a.t,
        [] => 0.0,
    };
    if dt > 0.0 {
        Ok(dt)
    } else {
        Err(TelemetryError::NoTimestep {
            path: path.to_path_buf(),
            samples: samples.len(),
        })
    }
}

/// One row of a recorded tracker log: time and raw pixel position, `x` the
/// column and `y` the row from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Parses a coordinate log. A header row `t,x,y` is optional and blank
/// lines are skipped. Every malformed line is reported; time must strictly
/// increase.
pub fn parse_log(text: &str, path: &Path) -> Result<Vec<LogRow>, TelemetryError> {
    let mut rows: Vec<(u64, LogRow)> = Vec::new();
    let mut bad = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if rows.is_empty() && bad.is_empty() && fields == LOG_COLUMNS {
            continue;
        }
        if fields.len() != LOG_COLUMNS.len() {
            bad.push(format!(
                "line {line}: expected 3 fields, got {}",
                fields.len()
            ));
            continue;
        }
        let parsed: Result<Vec<f64>, String> = fields
            .iter()
            .zip(LOG_COLUMNS)
            .map(|(f, name)| parse_float(f, name))
            .collect();
        match parsed {
            Ok(v) => rows.push((
                line,
                LogRow {
                    t: v[0],
                    x: v[1],
                    y: v[2],
                },
            )),
            Err(e) => bad.push(format!("line {line}: {e}")),
        }
    }
    if !bad.is_empty() {
        return Err(TelemetryError::Malformed {
            path: path.to_path_buf(),
            count: bad.len(),
            details: bad.join("\n"),
        });
    }
    for w in rows.windows(2) {
        let ((_, a), (line, b)) = (w[0], w[1]);
        if !(b.t > a.t) {
            return Err(TelemetryError::NonMonotonic {
                path: path.to_path_buf(),
                line,
                t: b.t,
                prev: a.t,
            });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRow>, TelemetryError> {
    parse_log(&read_all(path)?, path)
}
