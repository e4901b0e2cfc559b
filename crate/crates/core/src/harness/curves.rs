//! Aggregated error curves as CSV.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};

pub const CURVE_HEADER: &str = "experiment,algorithm,trial_agg,round,error_mean,ci_low,ci_high";

/// Mean error across trials at one round, with its bootstrap interval.
/// `trial_agg` is `<metric>:mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub experiment: String,
    pub algorithm: String,
    pub trial_agg: String,
    pub round: usize,
    pub error_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Writes one row per point under the fixed header, LF line endings.
pub fn emit_curves(points: &[CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CURVE_HEADER.split(','))
        .map_err(|e| NdbalError::Io(e.to_string()))?;
    for p in points {
        w.serialize(p).map_err(|e| NdbalError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| NdbalError::Io(e.to_string()))?;
    let mut f = std::fs::File::create(path)
        .map_err(|e| NdbalError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| NdbalError::Io(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| NdbalError::Io(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header.join(",") != CURVE_HEADER {
        return Err(NdbalError::Io(format!("unexpected header {}", header.join(","))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| NdbalError::Io(e.to_string())))
        .collect()
}
