use crate::error::{Error, Result};
use crate::mapf::sim::{ConflictKind, ExecutionTrace};

/// Averages over a batch of episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRow {
    /// Mean attempted agent-agent vertex conflicts.
    pub ca: f64,
    /// Mean attempted moves into obstacles (out-of-bounds moves included).
    pub co: f64,
    /// Percentage of successful episodes.
    pub sr: f64,
    /// Mean makespan; failures count as the episode cap.
    pub ms: f64,
    /// `CA / MS` of the batch means, zero when `MS = 0`.
    pub cr: f64,
    /// Mean executed non-wait actions.
    pub tm: f64,
    pub n_cases: usize,
}

pub fn measurements(traces: &[ExecutionTrace]) -> Result<MeasurementRow> {
    if traces.is_empty() {
        return Err(Error::contract("measurements need at least one trace"));
    }
    let n = traces.len() as f64;
    let mean = |f: &dyn Fn(&ExecutionTrace) -> f64| traces.iter().map(f).sum::<f64>() / n;
    let ca = mean(&|t| t.count(ConflictKind::AgentVertex) as f64);
    let ms = mean(&|t| t.makespan as f64);
    Ok(MeasurementRow {
        ca,
        co: mean(&|t| {
            (t.count(ConflictKind::Obstacle) + t.count(ConflictKind::OutOfBounds)) as f64
        }),
        sr: 100.0 * traces.iter().filter(|t| t.success).count() as f64 / n,
        ms,
        cr: if ms == 0.0 { 0.0 } else { ca / ms },
        tm: mean(&|t| t.total_moves as f64),
        n_cases: traces.len(),
    })
}
