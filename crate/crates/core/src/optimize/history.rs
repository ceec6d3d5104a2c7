use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const HISTORY_HEADER: &str = "iter,f,A,Tstd,S,Tmean,viol,gnorm,evals,phase";

/// State after one accepted step (iteration 0 is the start point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: String,
    pub iteration: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub area: f64,
    pub ripple: f64,
    pub smoothness: f64,
    pub mean_torque: f64,
    /// Largest scaled constraint violation.
    pub violation: f64,
    /// Projected gradient norm of the augmented Lagrangian.
    pub gradient_norm: f64,
    /// Objective evaluations so far in this phase.
    pub evaluations: usize,
}

pub fn write_history_csv<W: Write>(records: &[IterationRecord], mut w: W) -> Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.iteration,
            r.f,
            r.area,
            r.ripple,
            r.smoothness,
            r.mean_torque,
            r.violation,
            r.gradient_norm,
            r.evaluations,
            r.phase
        )?;
    }
    Ok(())
}
