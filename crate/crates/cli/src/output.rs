use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::CliResult;

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvOut<'a> {
    inner: csv::Writer<Box<dyn Write + 'a>>,
}

impl<'a> CsvOut<'a> {
    pub fn new(path: Option<&Path>, stdout: &'a mut dyn Write) -> CliResult<Self> {
        let sink: Box<dyn Write + 'a> = match path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(stdout),
        };
        Ok(Self {
            inner: csv::Writer::from_writer(sink),
        })
    }

    pub fn file(path: &Path) -> CliResult<CsvOut<'static>> {
        Ok(CsvOut {
            inner: csv::Writer::from_writer(Box::new(File::create(path)?)),
        })
    }

    pub fn header(&mut self, cols: &[&str]) -> CliResult<()> {
        Ok(self.inner.write_record(cols)?)
    }

    pub fn row(&mut self, fields: &[String]) -> CliResult<()> {
        Ok(self.inner.write_record(fields)?)
    }

    pub fn finish(mut self) -> CliResult<()> {
        Ok(self.inner.flush()?)
    }
}
