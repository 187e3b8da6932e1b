//! CSV emission with fixed 17-significant-digit numbers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    writer: csv::Writer<Box<dyn Write>>,
}

impl Table {
    /// Writes to `path`, or to standard output when `None`.
    pub fn create(path: Option<&Path>, header: &[String]) -> Result<Self, CliError> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Self::from_writer(sink, header)
    }

    pub fn from_writer(sink: Box<dyn Write>, header: &[String]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header).map_err(csv_error)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.writer.write_record(cells).map_err(csv_error)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::io(Path::new("<output>"), e))
    }
}

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io(Path::new("<output>"), e),
        other => CliError::Input(format!("csv: {other:?}")),
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
