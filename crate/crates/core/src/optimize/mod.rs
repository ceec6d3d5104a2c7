//! Scalarized design problem `w₁ A + w₂ T̂ + w₃ S` subject to a mean-torque
//! target and the clearance constraints, solved by an augmented Lagrangian
//! with a projected L-BFGS inner solver on `[0, 1]^d`.

mod driver;
mod history;
mod objective;

use serde::{Deserialize, Serialize};

pub use driver::{minimize_box, optimize, AugmentedLagrangian, BoxProblem, OptimizationResult, Status};
pub use history::{write_history_csv, IterationRecord, HISTORY_HEADER};
pub use objective::{Evaluation, Gradients, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Magnet area, per m².
    pub area: f64,
    /// Torque ripple, per N·m.
    pub ripple: f64,
    /// Surface smoothness.
    pub smoothness: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            area: 10000.0,
            ripple: 100.0,
            smoothness: 1000.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.area, self.ripple, self.smoothness];
        if w.iter().any(|v| !(*v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
            return Err(Error::Config(
                "weights must be non-negative and not all zero".into(),
            ));
        }
        Ok(())
    }
}

/// Which design variables move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(alias = "param")]
    Parameters,
    Shape,
    /// Parameters first, then shape from the result.
    Sequential,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Projected gradient of the augmented Lagrangian (infinity norm).
    pub optimality: f64,
    /// Largest scaled constraint violation.
    pub constraint: f64,
    /// Smallest accepted step (infinity norm).
    pub step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            optimality: 1e-4,
            constraint: 1e-5,
            step: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationConfig {
    /// Lower bound on the mean torque of the simulated sector in N·m.
    pub target_torque: f64,
    /// Target of the shape phase of a sequential run; `target_torque` when absent.
    pub shape_target_torque: Option<f64>,
    pub weights: ObjectiveWeights,
    /// Accepted steps per phase.
    pub max_iterations: usize,
    pub tolerances: Tolerances,
    /// Rotation angles in radians; the model angles when absent.
    pub angles: Option<Vec<f64>>,
    pub symmetric: bool,
    pub mode: Mode,
    /// Let the electric phase offset move in shape-only runs.
    pub shape_moves_phase: bool,
    /// Largest change of any design coordinate per step.
    pub max_step: f64,
    /// Stored L-BFGS pairs.
    pub memory: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            target_torque: 0.575,
            shape_target_torque: None,
            weights: ObjectiveWeights::default(),
            max_iterations: 100,
            tolerances: Tolerances::default(),
            angles: None,
            symmetric: true,
            mode: Mode::Combined,
            shape_moves_phase: true,
            max_step: 0.05,
            memory: 8,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let targets = [Some(self.target_torque), self.shape_target_torque];
        if targets.iter().flatten().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("target torque must be positive".into()));
        }
        if !(self.max_step > 0.0) || self.memory == 0 {
            return Err(Error::Config("step cap and memory must be positive".into()));
        }
        if self.angles.as_ref().is_some_and(|a| a.is_empty()) {
            return Err(Error::Config("empty angle set".into()));
        }
        Ok(())
    }
}
