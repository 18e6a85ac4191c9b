//! `trace.csv` output.

use std::fs;
use std::path::Path;

use crate::error::{MidasError, Result};
use crate::solver::{RunTrace, TraceRecord};

pub const TRACE_HEADER: &str = "epoch,iter,phi,f,elapsed_s,step_norm,lyapunov_surrogate";

/// One CSV row. Floats use the shortest representation that parses back to
/// the same bits. With `timing == false` the elapsed time is written as 0 so
/// that repeated runs give identical files.
pub fn trace_row(r: &TraceRecord, timing: bool) -> String {
    let elapsed = if timing { r.elapsed_seconds } else { 0.0 };
    let lyap = r.lyapunov_surrogate.map_or(String::new(), |v| format!("{v:?}"));
    format!(
        "{},{},{:?},{:?},{:?},{:?},{}",
        r.epoch, r.iter, r.phi, r.f, elapsed, r.step_norm, lyap
    )
}

pub fn render_trace(trace: &RunTrace, timing: bool) -> String {
    let mut s = String::with_capacity(64 * (trace.records.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &trace.records {
        s.push_str(&trace_row(r, timing));
        s.push('\n');
    }
    s
}

pub fn write_trace(path: impl AsRef<Path>, trace: &RunTrace, timing: bool) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_trace(trace, timing)).map_err(|e| MidasError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjectiveValue;

    #[test]
    fn rows_round_trip_floats() {
        let rec = TraceRecord {
            epoch: 3,
            iter: 42,
            phi: 0.1 + 0.2,
            f: 1e-300,
            elapsed_seconds: 1.5,
            mode_updates: [1, 2, 3],
            step_norm: 2.0f64.sqrt(),
            lyapunov_surrogate: None,
        };
        let row = trace_row(&rec, false);
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(cols[2].parse::<f64>().unwrap().to_bits(), rec.phi.to_bits());
        assert_eq!(cols[3].parse::<f64>().unwrap(), 1e-300);
        assert_eq!(cols[4], "0.0");
        assert_eq!(cols[6], "");
        let trace = RunTrace {
            initial: ObjectiveValue { f: 1.0, h: 0.0, phi: 1.0 },
            records: vec![rec],
        };
        let text = render_trace(&trace, true);
        assert!(text.starts_with(TRACE_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",1.5,"));
    }
}
