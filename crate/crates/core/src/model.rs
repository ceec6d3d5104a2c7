//! Torque evaluation of a built machine over the rotation angles, and the
//! gradient of the torque statistics in design coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, ExcitationState, Harmonics};
use crate::error::{Error, Result};
use crate::geometry::params::OPERATING_ANGLE;
use crate::geometry::{control_point_jacobians, ControlPointOffsets, DesignSpace, MachineGeometry, NUM_FREE};
use crate::materials::MaterialLibrary;
use crate::sensitivity::{solve_adjoint, torque_dc, torque_dp, torque_stats_gradient, TorqueStatsGradient};
use crate::solver::{sweep, FieldSolution, NewtonOptions, SaddleSolver, TorqueProfile};

/// Excitation and discretization settings that are not design parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    /// Applied current amplitude in amperes.
    pub current: f64,
    pub n_wind: f64,
    pub pole_pairs: usize,
    /// Coil cross-section in m²; the template value when absent.
    pub coil_area: Option<f64>,
    pub harmonics: Harmonics,
    /// Rotation angles in radians.
    pub angles: Vec<f64>,
    pub newton: NewtonOptions,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            current: 3.0,
            n_wind: 35.0,
            pole_pairs: 2,
            coil_area: None,
            harmonics: Harmonics::default(),
            angles: (0..30).map(|d| (d as f64).to_radians()).collect(),
            newton: NewtonOptions::default(),
        }
    }
}

/// Assembly context of one machine.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub assembler: Assembler,
    pub solver: SaddleSolver,
    pub excitation: ExcitationState,
    /// Axial length in meters.
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct TorqueEvaluation {
    pub profile: TorqueProfile,
    pub solutions: Vec<FieldSolution>,
}

#[derive(Debug, Clone)]
pub struct MotorModel {
    pub settings: ModelSettings,
    pub materials: MaterialLibrary,
}

impl MotorModel {
    pub fn new(settings: ModelSettings, materials: MaterialLibrary) -> Result<Self> {
        if settings.angles.is_empty() {
            return Err(Error::Config("at least one rotation angle required".into()));
        }
        if settings.pole_pairs == 0 {
            return Err(Error::Config("pole pair count must be at least 1".into()));
        }
        Ok(Self { settings, materials })
    }

    /// Excitation at `β = 0` with `φ₀` taken from the operating-angle parameter.
    pub fn excitation(&self, m: &MachineGeometry) -> ExcitationState {
        ExcitationState {
            beta: 0.0,
            phi0: m.params.si(OPERATING_ANGLE),
            current: self.settings.current,
            n_wind: self.settings.n_wind,
            coil_area: self.settings.coil_area.unwrap_or(m.coil_area),
            pole_pairs: self.settings.pole_pairs,
        }
    }

    pub fn prepare(&self, m: &MachineGeometry) -> Result<Prepared> {
        let assembler = Assembler::new(&m.geometry, &self.materials, &self.settings.harmonics)?;
        let solver = SaddleSolver::new(&assembler)?;
        let excitation = self.excitation(m);
        excitation.validate()?;
        Ok(Prepared {
            assembler,
            solver,
            excitation,
            length: m.params.fixed_si("LENGTH")?,
        })
    }

    /// Angle sweep, optionally warm started from a previous state.
    pub fn evaluate(&self, prep: &Prepared, x0: Option<&[f64]>) -> Result<TorqueEvaluation> {
        let x0 = x0.filter(|x| x.len() == prep.assembler.size());
        let (profile, solutions) = sweep(
            &prep.assembler,
            &prep.solver,
            &prep.excitation,
            &self.settings.angles,
            prep.length,
            &self.settings.newton,
            x0,
        )?;
        Ok(TorqueEvaluation { profile, solutions })
    }

    /// Per-angle `dT_β/dx` in design coordinates for the machine `m`
    /// (built from `space` with `offsets` applied).
    pub fn torque_gradients(
        &self,
        space: &DesignSpace,
        m: &MachineGeometry,
        offsets: &ControlPointOffsets,
        prep: &Prepared,
        eval: &TorqueEvaluation,
    ) -> Result<Vec<Vec<f64>>> {
        let jacobians = control_point_jacobians(m, offsets)?;
        let ncp = m.geometry.num_control_points();
        let range = space.offset_range();
        eval.solutions
            .par_iter()
            .map(|sol| {
                let asm = &prep.assembler;
                let exc = ExcitationState {
                    beta: sol.beta,
                    ..prep.excitation
                };
                let adj = solve_adjoint(asm, &prep.solver, sol, prep.length)?;
                let dtdc = torque_dc(asm, sol, &adj, &exc, ncp)?;
                let dtdp = torque_dp(asm, &adj, &exc, &dtdc, &jacobians, Some(OPERATING_ANGLE))?;
                let mut g: Vec<f64> = (0..NUM_FREE).map(|l| dtdp[l] * m.params.range_si(l)).collect();
                g.extend(offsets.chain_rule(m, &dtdc).into_iter().map(|v| v * range));
                Ok(g)
            })
            .collect()
    }

    /// `dT̄/dx` and `dT̂/dx` in design coordinates.
    pub fn stats_gradient(
        &self,
        space: &DesignSpace,
        m: &MachineGeometry,
        offsets: &ControlPointOffsets,
        prep: &Prepared,
        eval: &TorqueEvaluation,
    ) -> Result<TorqueStatsGradient> {
        let grads = self.torque_gradients(space, m, offsets, prep, eval)?;
        torque_stats_gradient(&eval.profile, &grads)
    }
}
