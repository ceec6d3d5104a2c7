use crate::error::{Error, Result};
use crate::geometry::design::MIN_BRIDGE;
use crate::geometry::{ControlPointOffsets, DesignSpace, DesignVector, MachineGeometry, NUM_FREE};
use crate::model::{MotorModel, Prepared, TorqueEvaluation};

use super::ObjectiveWeights;

/// Objective value reported for designs that cannot be built or solved.
pub const SENTINEL: f64 = 1e6;

/// `∂/∂x` of the objective, the mean torque and the clearance constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub f: Vec<f64>,
    pub mean_torque: Vec<f64>,
    /// One row per constraint.
    pub constraints: Vec<Vec<f64>>,
}

struct State {
    machine: MachineGeometry,
    offsets: ControlPointOffsets,
    prepared: Prepared,
    torque: TorqueEvaluation,
}

/// Objective components at one design.
pub struct Evaluation {
    pub x: DesignVector,
    /// False for the sentinel of an unbuildable or unsolvable design.
    pub feasible: bool,
    pub f: f64,
    pub area: f64,
    pub ripple: f64,
    pub smoothness: f64,
    pub mean_torque: f64,
    /// Clearance shortfalls in meters.
    pub clearance: Vec<f64>,
    pub gradients: Option<Gradients>,
    smoothness_grad: Vec<f64>,
    area_grad: Vec<f64>,
    state: Option<Box<State>>,
}

impl std::fmt::Debug for Evaluation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluation")
            .field("feasible", &self.feasible)
            .field("f", &self.f)
            .field("area", &self.area)
            .field("ripple", &self.ripple)
            .field("smoothness", &self.smoothness)
            .field("mean_torque", &self.mean_torque)
            .field("clearance", &self.clearance)
            .finish()
    }
}

impl Evaluation {
    fn sentinel(x: DesignVector) -> Self {
        Self {
            x,
            feasible: false,
            f: SENTINEL,
            area: f64::NAN,
            ripple: f64::NAN,
            smoothness: f64::NAN,
            mean_torque: f64::NAN,
            clearance: Vec::new(),
            gradients: None,
            smoothness_grad: Vec::new(),
            area_grad: Vec::new(),
            state: None,
        }
    }
}

fn is_infeasible(e: &Error) -> bool {
    matches!(
        e,
        Error::Geometry { .. }
            | Error::GeometryInfeasible(_)
            | Error::NonConvergence { .. }
            | Error::LinearAlgebra(_)
    )
}

/// Design space, model and weights of one optimization run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: DesignSpace,
    pub model: MotorModel,
    pub weights: ObjectiveWeights,
    pub target_torque: f64,
    warm: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(space: DesignSpace, model: MotorModel, weights: ObjectiveWeights, target_torque: f64) -> Self {
        Self {
            space,
            model,
            weights,
            target_torque,
            warm: None,
        }
    }

    /// Builds and solves the design; infeasible designs give the sentinel.
    pub fn evaluate(&self, x: &DesignVector) -> Result<Evaluation> {
        match self.evaluate_inner(x) {
            Err(e) if is_infeasible(&e) => Ok(Evaluation::sentinel(x.clone())),
            r => r,
        }
    }

    fn evaluate_inner(&self, x: &DesignVector) -> Result<Evaluation> {
        let machine = self.space.build(x)?;
        let (_, offsets) = self.space.decode(x)?;
        let prepared = self.model.prepare(&machine)?;
        let torque = self.model.evaluate(&prepared, self.warm.as_deref())?;
        let (area, area_grad) = self.space.magnet_area_and_gradient(x)?;
        let (smoothness, sg) = offsets.smoothness(&machine.surface_angles)?;
        let mut smoothness_grad = vec![0.0; NUM_FREE];
        smoothness_grad.extend(sg.iter().map(|v| v * self.space.offset_range()));
        let clearance = self.space.constraints(x)?;
        let w = &self.weights;
        let ripple = torque.profile.std;
        Ok(Evaluation {
            x: x.clone(),
            feasible: true,
            f: w.area * area + w.ripple * ripple + w.smoothness * smoothness,
            area,
            ripple,
            smoothness,
            mean_torque: torque.profile.mean,
            clearance,
            gradients: None,
            smoothness_grad,
            area_grad,
            state: Some(Box::new(State {
                machine,
                offsets,
                prepared,
                torque,
            })),
        })
    }

    /// Fills `ev.gradients`; the sentinel keeps zero gradients.
    pub fn differentiate(&self, ev: &mut Evaluation) -> Result<()> {
        let d = self.space.dim();
        let Some(st) = &ev.state else {
            ev.gradients = Some(Gradients {
                f: vec![0.0; d],
                mean_torque: vec![0.0; d],
                constraints: Vec::new(),
            });
            return Ok(());
        };
        let stats =
            self.model
                .stats_gradient(&self.space, &st.machine, &st.offsets, &st.prepared, &st.torque)?;
        let (_, constraints) = self.space.constraints_and_gradient(&ev.x)?;
        let w = &self.weights;
        let f = (0..d)
            .map(|i| {
                w.area * ev.area_grad[i] + w.ripple * stats.std[i] + w.smoothness * ev.smoothness_grad[i]
            })
            .collect();
        ev.gradients = Some(Gradients {
            f,
            mean_torque: stats.mean,
            constraints,
        });
        Ok(())
    }

    /// Value and gradient at `x`.
    pub fn evaluate_objective(&self, x: &DesignVector) -> Result<Evaluation> {
        let mut ev = self.evaluate(x)?;
        self.differentiate(&mut ev)?;
        Ok(ev)
    }

    /// Later solves start from the first-angle state of `ev`.
    pub fn accept(&mut self, ev: &Evaluation) {
        if let Some(st) = &ev.state {
            self.warm = st.torque.solutions.first().map(|s| s.x.clone());
        }
    }

    /// `[(T_target − T̄)/T_target, g/MIN_BRIDGE]`, feasible when `≤ 0`.
    pub fn scaled_constraints(&self, ev: &Evaluation) -> Vec<f64> {
        let mut c = vec![(self.target_torque - ev.mean_torque) / self.target_torque];
        c.extend(ev.clearance.iter().map(|g| g / MIN_BRIDGE));
        c
    }

    /// Gradients matching [`Problem::scaled_constraints`].
    pub fn scaled_constraint_gradients(&self, g: &Gradients) -> Vec<Vec<f64>> {
        let mut out = vec![g.mean_torque.iter().map(|v| -v / self.target_torque).collect()];
        out.extend(
            g.constraints
                .iter()
                .map(|row| row.iter().map(|v| v / MIN_BRIDGE).collect()),
        );
        out
    }
}
