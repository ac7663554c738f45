//! CSV and JSON writers. Row order is whatever the caller passes in, so
//! identical inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{DopMapRow, ErrorSummary, RangeCheck, TrialRecord};
use crate::error::Result;
use crate::placement::HistoryRow;

pub const TRIAL_HEADER: [&str; 20] = [
    "id", "snr_db", "true_x", "true_y", "true_z", "est_x", "est_y", "est_z", "err_x", "err_y", "err_z", "err_xy", "err_3d", "range_err_0",
    "range_err_1", "range_err_2", "range_err_3", "ok", "error", "layout",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// One row per trial in [`TRIAL_HEADER`] order; `layout` tags the beacon set.
pub fn write_trials_csv(path: &Path, records: &[TrialRecord], layout: &str) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRIAL_HEADER)?;
    for r in records {
        let mut row = vec![r.id.to_string(), num(r.snr_db)];
        for p in [r.true_position, r.estimated_position] {
            row.extend([num(p.x), num(p.y), num(p.z)]);
        }
        row.extend([r.err_x, r.err_y, r.err_z, r.err_xy, r.err_3d].map(num));
        for i in 0..4 {
            row.push(num(r.range_errors.get(i).copied().unwrap_or(f64::NAN)));
        }
        row.extend([r.ok.to_string(), r.error.clone(), layout.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[ErrorSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["snr_db".to_string(), "trials".into(), "failed".into()];
    for name in ["err_x", "err_y", "err_z", "err_xy", "err_3d"] {
        header.push(format!("mean_{name}"));
        header.push(format!("std_{name}"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![num(r.snr_db), r.trials.to_string(), r.failed.to_string()];
        for s in [r.err_x, r.err_y, r.err_z, r.err_xy, r.err_3d] {
            row.push(num(s.mean));
            row.push(num(s.std));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["restart", "iteration", "best_fitness"])?;
    for r in rows {
        w.write_record([r.restart.to_string(), r.iteration.to_string(), num(r.best_fitness)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dopmap_csv(path: &Path, rows: &[DopMapRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "z", "hdop", "vdop", "gdop"])?;
    for r in rows {
        w.write_record([r.x, r.y, r.z, r.hdop, r.vdop, r.gdop].map(num))?;
    }
    w.flush()?;
    Ok(())
}

/// `(trial id, check)` pairs.
pub fn write_rangetest_csv(path: &Path, rows: &[(u64, RangeCheck)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "beacon", "true_distance", "estimated_distance", "error", "lag", "noiseless_lag", "matched"])?;
    for (id, c) in rows {
        w.write_record([
            id.to_string(),
            c.beacon.to_string(),
            num(c.true_distance),
            num(c.estimated_distance),
            num(c.estimated_distance - c.true_distance),
            c.lag.to_string(),
            c.noiseless_lag.to_string(),
            c.matched().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
