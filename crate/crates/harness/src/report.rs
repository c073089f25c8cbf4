//! CSV report rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::pipeline::Row;

pub const HEADER: &str = "metric,horizon,snr_db,value,config_hash";

/// Header plus one line per row; rows without an SNR leave that field empty.
pub fn to_csv(rows: &[Row], config_hash: &str) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let snr = r.snr_db.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.metric, r.horizon, snr, r.value, config_hash).expect("string write");
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row], config_hash: &str) -> Result<()> {
    std::fs::write(path, to_csv(rows, config_hash)).map_err(|e| HarnessError::io(path, e))
}
