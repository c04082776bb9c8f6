use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One sampled iteration of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub rel_change: f64,
    pub v_gap: f64,
    pub g_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,rel_change,v_gap,g_gap";

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `iter,objective,rel_change,v_gap,g_gap`. Floats use
    /// the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.iter, r.objective, r.rel_change, r.v_gap, r.g_gap
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let trace = ConvergenceTrace {
            records: vec![TraceRecord {
                iter: 10,
                objective: 1.5,
                rel_change: 2.5e-3,
                v_gap: 0.0,
                g_gap: 0.125,
            }],
        };
        assert_eq!(
            trace.to_csv(),
            "iter,objective,rel_change,v_gap,g_gap\n10,1.5e0,2.5e-3,0e0,1.25e-1\n"
        );
    }
}
