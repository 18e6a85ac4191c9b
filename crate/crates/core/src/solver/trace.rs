use crate::model::ObjectiveValue;

/// One trace row, written at the end of an epoch (or iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Iterations completed so far.
    pub iter: u64,
    pub phi: f64,
    pub f: f64,
    pub elapsed_seconds: f64,
    pub mode_updates: [u64; 3],
    /// `||A^{k+1} - A^k||_F` of the last step.
    pub step_norm: f64,
    pub lyapunov_surrogate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub initial: ObjectiveValue,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(initial: ObjectiveValue) -> Self {
        RunTrace {
            initial,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Objective at the last record, or at the start when nothing ran.
    pub fn final_objective(&self) -> ObjectiveValue {
        self.last().map_or(self.initial, |r| ObjectiveValue {
            f: r.f,
            h: r.phi - r.f,
            phi: r.phi,
        })
    }
}
