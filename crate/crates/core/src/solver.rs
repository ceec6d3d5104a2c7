//! Damped Newton solution of the coupled saddle-point system, torque and
//! torque statistics over a rotation sweep.

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, ExcitationState};
use crate::error::{Error, Result};
use crate::linalg::{norm2, rcm_ordering, CsrMatrix, LdlFactor, LdlSymbolic};
use crate::splines::MultiPatchGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
    /// Smallest Armijo step before giving up.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-10,
            tol_abs: 1e-12,
            max_iter: 50,
            min_step: 2f64.powi(-20),
        }
    }
}

/// Converged state `x = (u_rt, u_st, λ)` at one rotation angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSolution {
    pub x: Vec<f64>,
    pub n_field: usize,
    pub beta: f64,
    /// Newton steps taken.
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual norm before every step and after the last one.
    pub history: Vec<f64>,
}

impl FieldSolution {
    pub fn u(&self) -> &[f64] {
        &self.x[..self.n_field]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.x[self.n_field..]
    }
}

/// Fill-reducing ordering and symbolic factorization of the saddle pattern,
/// shared by all solves on one assembler. Multipliers are eliminated last.
#[derive(Debug, Clone)]
pub struct SaddleSolver {
    symbolic: LdlSymbolic,
}

impl SaddleSolver {
    pub fn new(asm: &Assembler) -> Result<Self> {
        let perm = rcm_ordering(asm.pattern(), asm.n_field());
        Ok(Self {
            symbolic: LdlSymbolic::analyze(asm.pattern(), perm)?,
        })
    }

    pub fn factor(&self, a: &CsrMatrix) -> Result<LdlFactor> {
        self.symbolic.factor(a)
    }

    /// Direct solve plus one step of iterative refinement.
    pub fn solve(&self, a: &CsrMatrix, f: &LdlFactor, b: &[f64]) -> Vec<f64> {
        let mut x = f.solve(b);
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        for (xi, di) in x.iter_mut().zip(f.solve(&r)) {
            *xi += di;
        }
        x
    }
}

/// Newton–Raphson with Armijo backtracking on `‖F‖`, starting from `x0`
/// (zero when absent).
pub fn solve_magnetostatic(
    asm: &Assembler,
    solver: &SaddleSolver,
    rhs: &[f64],
    beta: f64,
    x0: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<FieldSolution> {
    let n = asm.size();
    if rhs.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::Contract(
            "state or right-hand side has the wrong size".into(),
        ));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let tol = opts.tol_abs + opts.tol_rel * norm2(rhs);
    let mut r = asm.residual(&x, beta, rhs);
    let mut norm = norm2(&r);
    let mut history = vec![norm];
    let linear = asm.materials.is_linear();
    for it in 0..opts.max_iter {
        if norm <= tol {
            return Ok(FieldSolution {
                x,
                n_field: asm.n_field(),
                beta,
                iterations: it,
                residual_norm: norm,
                history,
            });
        }
        let a = asm.system_matrix(&x, beta, true);
        let f = solver.factor(&a)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = solver.solve(&a, &f, &neg);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(p, d)| p + t * d).collect();
            let rt = asm.residual(&trial, beta, rhs);
            let nt = norm2(&rt);
            // a linear problem is solved by the full step up to rounding
            if nt <= (1.0 - 1e-4 * t) * norm || (linear && t == 1.0) || nt <= tol {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            t *= 0.5;
            if t < opts.min_step {
                history.push(nt);
                return Err(Error::NonConvergence {
                    iterations: it + 1,
                    beta,
                    history,
                });
            }
        }
        history.push(norm);
    }
    if norm <= tol {
        return Ok(FieldSolution {
            x,
            n_field: asm.n_field(),
            beta,
            iterations: opts.max_iter,
            residual_norm: norm,
            history,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        beta,
        history,
    })
}

/// `T_β = −L u_stᵀ G_st R'_β λ` in N·m.
pub fn torque(asm: &Assembler, sol: &FieldSolution, length: f64) -> f64 {
    asm.torque(&sol.x, sol.beta, length)
}

/// Position and `B = (∂u/∂y, −∂u/∂x)` at a parametric point of one patch,
/// in the unrotated frame of its side.
pub fn flux_density(
    geom: &MultiPatchGeometry,
    asm: &Assembler,
    sol: &FieldSolution,
    patch: usize,
    point: [f64; 2],
) -> Result<([f64; 2], [f64; 2])> {
    let entry = geom
        .patches
        .get(patch)
        .ok_or_else(|| Error::Domain(format!("no patch {patch}")))?;
    let u_cp = asm.dofs.expand(sol.u());
    let eval = entry.patch.basis.evaluate(point, 1)?;
    let m = entry.patch.evaluate_mapping(point).map_err(|e| match e {
        Error::Geometry { xi, eta, message, .. } => Error::Geometry {
            patch,
            xi,
            eta,
            message,
        },
        e => e,
    })?;
    let mut gh = [0.0; 2];
    for (&l, g) in eval.indices.iter().zip(&eval.grads) {
        let u = u_cp[entry.cp_ids[l]];
        gh[0] += g[0] * u;
        gh[1] += g[1] * u;
    }
    // ∇u = J⁻ᵀ ∇̂u
    let j = m.jacobian;
    let gx = (j[1][1] * gh[0] - j[1][0] * gh[1]) / m.det;
    let gy = (-j[0][1] * gh[0] + j[0][0] * gh[1]) / m.det;
    Ok((m.x, [gy, -gx]))
}

/// Torques over a set of angles with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueProfile {
    pub angles: Vec<f64>,
    pub torques: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl TorqueProfile {
    pub fn new(angles: Vec<f64>, torques: Vec<f64>) -> Result<Self> {
        if torques.is_empty() || angles.len() != torques.len() {
            return Err(Error::Contract(
                "one torque per angle and at least one angle".into(),
            ));
        }
        let n = torques.len() as f64;
        let mean = torques.iter().sum::<f64>() / n;
        let var = torques.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            angles,
            torques,
            mean,
            std: var.max(0.0).sqrt(),
        })
    }
}

/// Solves at every angle with the coupling matrices assembled once, warm
/// starting each angle from the previous solution and the first from `x0`.
pub fn sweep(
    asm: &Assembler,
    solver: &SaddleSolver,
    excitation: &ExcitationState,
    angles: &[f64],
    length: f64,
    opts: &NewtonOptions,
    x0: Option<&[f64]>,
) -> Result<(TorqueProfile, Vec<FieldSolution>)> {
    if angles.is_empty() {
        return Err(Error::Config("sweep needs at least one angle".into()));
    }
    let mut sols: Vec<FieldSolution> = Vec::with_capacity(angles.len());
    for &beta in angles {
        let exc = ExcitationState { beta, ..*excitation };
        let rhs = asm.rhs(&exc)?;
        let start = sols.last().map(|s| s.x.as_slice()).or(x0);
        sols.push(solve_magnetostatic(asm, solver, &rhs, beta, start, opts)?);
    }
    let torques = sols.iter().map(|s| torque(asm, s, length)).collect();
    Ok((TorqueProfile::new(angles.to_vec(), torques)?, sols))
}
