//! Adjoint torque sensitivities with respect to control points, design
//! parameters and physical excitation quantities, and derivatives of the
//! torque statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, ExcitationState};
use crate::error::{Error, Result};
use crate::geometry::ParameterDerivative;
use crate::linalg::dot;
use crate::solver::{FieldSolution, SaddleSolver, TorqueProfile};
use crate::splines::Region;

/// Adjoint solution `γ` of `Jᵀ γ = −∂T/∂x` at one rotation angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjoint {
    pub gamma: Vec<f64>,
    pub beta: f64,
}

/// Solves the adjoint system with the Newton Jacobian at the converged state.
/// The saddle Jacobian is symmetric, so the forward factorization pattern is reused.
pub fn solve_adjoint(
    asm: &Assembler,
    solver: &SaddleSolver,
    sol: &FieldSolution,
    length: f64,
) -> Result<Adjoint> {
    let dt = asm.torque_gradient(&sol.x, sol.beta, length);
    if dt.iter().all(|v| *v == 0.0) {
        return Ok(Adjoint {
            gamma: vec![0.0; dt.len()],
            beta: sol.beta,
        });
    }
    let j = asm.system_matrix(&sol.x, sol.beta, true);
    let f = solver.factor(&j)?;
    let rhs: Vec<f64> = dt.iter().map(|v| -v).collect();
    Ok(Adjoint {
        gamma: solver.solve(&j, &f, &rhs),
        beta: sol.beta,
    })
}

fn check_pair(sol: &FieldSolution, adj: &Adjoint) -> Result<()> {
    if sol.beta != adj.beta || sol.x.len() != adj.gamma.len() {
        return Err(Error::Contract(format!(
            "forward state at beta = {} paired with adjoint at beta = {}",
            sol.beta, adj.beta
        )));
    }
    Ok(())
}

/// `dT/dC_kd = Σᵢ γᵢ (Σⱼ dK_ij/dC_kd u_j − db_i/dC_kd)` for every control
/// point `k` and direction `d`. Weights are frozen; the coil current density
/// is held fixed.
pub fn torque_dc(
    asm: &Assembler,
    sol: &FieldSolution,
    adj: &Adjoint,
    exc: &ExcitationState,
    num_control_points: usize,
) -> Result<Vec<[f64; 2]>> {
    check_pair(sol, adj)?;
    let nf = asm.n_field();
    let u_cp = asm.dofs.expand(&sol.x[..nf]);
    let g_cp = asm.dofs.expand(&adj.gamma[..nf]);
    let per_el: Vec<Vec<[f64; 2]>> = (0..asm.cache.elements.len())
        .into_par_iter()
        .map(|e| {
            let el = &asm.cache.elements[e];
            let nb = el.nb();
            let mut out = vec![[0.0; 2]; nb];
            let region = asm.region_of(el.patch);
            for q in 0..el.np {
                let (nu, dnu, gu) = asm.point_state(e, q, &u_cp);
                let gg = el.gradient(q, &g_cp);
                let w = el.weights[q];
                let b = gu[0].hypot(gu[1]);
                let gu_gg = gu[0] * gg[0] + gu[1] * gg[1];
                let src_mag = match region {
                    Region::Magnet(m) => Some([-m.br * m.alpha.sin(), m.br * m.alpha.cos()]),
                    _ => None,
                };
                let src_coil = match region {
                    Region::Coil(c) => c.sign * exc.current_density(c.phase) * el.value(q, &g_cp),
                    _ => 0.0,
                };
                for (c, o) in out.iter_mut().enumerate() {
                    let r = el.grads[q * nb + c];
                    let r_u = r[0] * gu[0] + r[1] * gu[1];
                    let r_g = r[0] * gg[0] + r[1] * gg[1];
                    for d in 0..2 {
                        let mut v = -nu * gg[d] * r_u - nu * gu[d] * r_g + nu * gu_gg * r[d];
                        if dnu != 0.0 && b > 0.0 {
                            v -= dnu / b * r_u * gu[d] * gu_gg;
                        }
                        if let Some(br) = src_mag {
                            let gb = gg[0] * br[0] + gg[1] * br[1];
                            v -= nu * (-gg[d] * (r[0] * br[0] + r[1] * br[1]) + gb * r[d]);
                        }
                        v -= src_coil * r[d];
                        o[d] += w * v;
                    }
                }
            }
            out
        })
        .collect();
    let mut grad = vec![[0.0; 2]; num_control_points];
    for (el, g) in asm.cache.elements.iter().zip(&per_el) {
        for (&cp, v) in el.cps.iter().zip(g) {
            grad[cp][0] += v[0];
            grad[cp][1] += v[1];
        }
    }
    Ok(grad)
}

/// `dT/dφ₀ = −γᵀ ∂b/∂φ₀`.
pub fn torque_dphi0(asm: &Assembler, adj: &Adjoint, exc: &ExcitationState) -> Result<f64> {
    let db = asm.rhs_dphi0(&ExcitationState {
        beta: adj.beta,
        ..*exc
    })?;
    Ok(-dot(&adj.gamma, &db))
}

/// `dT/dα = −γᵀ ∂b/∂α` for the magnet in `patch`.
pub fn torque_dalpha(asm: &Assembler, adj: &Adjoint, patch: usize) -> Result<f64> {
    Ok(-dot(&adj.gamma, &asm.rhs_dalpha(patch)?))
}

/// Chain rule `dT/dP_l = Σ_kd (dT/dC_kd)(dC_kd/dP_l) + D_phys`, per SI unit of
/// each parameter. `phase` names the parameter whose SI value is `φ₀`.
pub fn torque_dp(
    asm: &Assembler,
    adj: &Adjoint,
    exc: &ExcitationState,
    dtdc: &[[f64; 2]],
    jacobians: &[ParameterDerivative],
    phase: Option<usize>,
) -> Result<Vec<f64>> {
    let dphi0 = match phase {
        Some(_) => torque_dphi0(asm, adj, exc)?,
        None => 0.0,
    };
    jacobians
        .iter()
        .map(|jac| {
            let mut g: f64 = jac
                .dc
                .iter()
                .map(|(k, d)| dtdc[*k][0] * d[0] + dtdc[*k][1] * d[1])
                .sum();
            for (patch, da) in &jac.dalpha {
                g += torque_dalpha(asm, adj, *patch)? * da;
            }
            if phase == Some(jac.param) {
                g += dphi0;
            }
            Ok(g)
        })
        .collect()
}

/// Derivatives of the mean and population standard deviation of a torque
/// profile from per-angle gradients. The flag is set when `T̂ = 0`, in which
/// case the ripple gradient is the zero subgradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueStatsGradient {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub degenerate: bool,
}

pub fn torque_stats_gradient(profile: &TorqueProfile, grads: &[Vec<f64>]) -> Result<TorqueStatsGradient> {
    let n = profile.torques.len();
    if grads.len() != n || n == 0 {
        return Err(Error::Contract("one gradient per torque sample required".into()));
    }
    let dim = grads[0].len();
    if grads.iter().any(|g| g.len() != dim) {
        return Err(Error::Contract("gradients of unequal length".into()));
    }
    let inv = 1.0 / n as f64;
    let mut mean = vec![0.0; dim];
    let mut weighted = vec![0.0; dim];
    for (t, g) in profile.torques.iter().zip(grads) {
        for i in 0..dim {
            mean[i] += inv * g[i];
            weighted[i] += inv * t * g[i];
        }
    }
    if profile.std == 0.0 {
        return Ok(TorqueStatsGradient {
            mean,
            std: vec![0.0; dim],
            degenerate: true,
        });
    }
    let std = (0..dim)
        .map(|i| (weighted[i] - profile.mean * mean[i]) / profile.std)
        .collect();
    Ok(TorqueStatsGradient {
        mean,
        std,
        degenerate: false,
    })
}
