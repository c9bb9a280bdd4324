//! Newline-delimited JSON for event traces: one [`TraceRecord`] per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use fso_core::trace::TraceRecord;

use crate::error::SimError;

pub fn write_ndjson(records: &[TraceRecord], path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| SimError::io(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn read_ndjson(path: &Path) -> Result<Vec<TraceRecord>, SimError> {
    let file = File::open(path).map_err(|e| SimError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| SimError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
