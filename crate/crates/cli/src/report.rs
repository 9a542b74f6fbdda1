use std::fmt;
use std::io::Write;

use serde::Serialize;
use smith_sched::rational::decimal;
use smith_sched::{Error, Rational};

/// First line of every CSV report.
pub const CSV_HEADER: &str = "# smith-sched-report v1";

/// A rational printed exactly and as a 15-significant-digit decimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Value {
    pub exact: String,
    pub decimal: String,
}

impl Value {
    pub fn of(r: &Rational) -> Self {
        Self {
            exact: r.to_string(),
            decimal: decimal(r),
        }
    }
}

impl From<&Rational> for Value {
    fn from(r: &Rational) -> Self {
        Self::of(r)
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Violation = 1,
    Usage = 2,
    Budget = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Usage,
            message: message.into(),
        }
    }

    pub fn violation(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Violation,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match &e {
            Error::InstanceTooLarge { .. } | Error::Convergence { .. } => Exit::Budget,
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::InvalidSpec(_)
            | Error::InvalidMarginals(_)
            | Error::InvalidAssignment { .. }
            | Error::Precondition(_)
            | Error::Domain(_) => Exit::Usage,
            _ => Exit::Violation,
        };
        Self {
            exit,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

/// Writes `rows` as CSV after the version comment.
pub fn write_csv<W: Write>(mut out: W, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(field, exact, decimal)` rows for a flat list of named values.
pub fn value_rows<'a>(items: impl IntoIterator<Item = (&'a str, &'a Value)>) -> Vec<Vec<String>> {
    items
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v.exact.clone(), v.decimal.clone()])
        .collect()
}
