//! CSV and manifest writers. Every float is written with 12 significant
//! digits so files compare byte-for-byte across runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::Value;

/// `x` with 12 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

pub struct CsvOut {
    inner: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> io::Result<Self> {
        let mut inner = csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?));
        inner.write_record(header)?;
        Ok(Self { inner, width: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn write_manifest(path: &Path, record: &BTreeMap<String, Value>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, record)?;
    w.write_all(b"\n")?;
    w.flush()
}
