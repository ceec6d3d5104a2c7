use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::params::OPERATING_ANGLE;
use crate::geometry::{DesignSpace, DesignVector, NUM_FREE};
use crate::model::MotorModel;

use super::history::IterationRecord;
use super::objective::{Evaluation, Problem};
use super::{Mode, OptimizationConfig, Tolerances};

/// Smooth objective `f` with constraints `c(x) ≤ 0` on the unit box.
pub trait BoxProblem {
    fn dim(&self) -> usize;
    /// `(f, c)` at `x`, or `None` when `x` cannot be evaluated.
    fn value(&mut self, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>>;
    /// `(∇f, ∇c)` at the point of the last successful [`BoxProblem::value`]
    /// call, which becomes the current iterate.
    fn accept(&mut self) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;
    /// Area, ripple, smoothness and mean torque of the current iterate.
    fn components(&self) -> [f64; 4] {
        [f64::NAN; 4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Converged,
    IterationLimit,
    /// No descent step could be found.
    Stalled,
    /// Too many consecutive failed evaluations.
    Aborted,
}

/// Settings of the augmented-Lagrangian outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentedLagrangian {
    pub max_iterations: usize,
    pub tolerances: Tolerances,
    pub max_step: f64,
    pub memory: usize,
    /// Initial penalty parameter.
    pub penalty: f64,
    /// Accepted steps between multiplier or penalty updates.
    pub inner_iterations: usize,
    pub max_failures: usize,
}

impl Default for AugmentedLagrangian {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerances: Tolerances::default(),
            max_step: 0.05,
            memory: 8,
            penalty: 100.0,
            inner_iterations: 10,
            max_failures: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub x: Vec<f64>,
    pub status: Status,
    pub history: Vec<IterationRecord>,
    pub multipliers: Vec<f64>,
}

fn clip(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn max_violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |a, v| a.max(*v))
}

struct Merit<'a> {
    lambda: &'a [f64],
    mu: f64,
}

impl Merit<'_> {
    fn value(&self, f: f64, c: &[f64]) -> f64 {
        let pen: f64 = c
            .iter()
            .zip(self.lambda)
            .map(|(ci, li)| ((li + self.mu * ci).max(0.0).powi(2) - li * li) / (2.0 * self.mu))
            .sum();
        f + pen
    }

    fn gradient(&self, gf: &[f64], c: &[f64], gc: &[Vec<f64>]) -> Vec<f64> {
        let mut g = gf.to_vec();
        for ((ci, li), row) in c.iter().zip(self.lambda).zip(gc) {
            let m = (li + self.mu * ci).max(0.0);
            if m > 0.0 {
                for (gk, rk) in g.iter_mut().zip(row) {
                    *gk += m * rk;
                }
            }
        }
        g
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], free: &[bool]) -> f64 {
    (0..x.len())
        .filter(|&i| free[i])
        .map(|i| (x[i] - clip(x[i] - g[i])).abs())
        .fold(0.0, f64::max)
}

/// Two-loop recursion restricted to the coordinates in `set`.
fn lbfgs_direction(g: &[f64], set: &[bool], pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..a.len()).filter(|&i| set[i]).map(|i| a[i] * b[i]).sum() };
    let mut q: Vec<f64> = (0..g.len()).map(|i| if set[i] { g[i] } else { 0.0 }).collect();
    let mut alpha = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for i in 0..q.len() {
            q[i] -= a * y[i];
        }
        alpha.push((a, rho));
    }
    let gamma = match pairs.last() {
        Some((s, y)) => dot(s, y) / dot(y, y),
        None => 1.0,
    };
    for v in &mut q {
        *v *= gamma;
    }
    for ((s, y), (a, rho)) in pairs.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for i in 0..q.len() {
            q[i] += (a - b) * s[i];
        }
    }
    (0..q.len()).map(|i| if set[i] { -q[i] } else { 0.0 }).collect()
}

/// Augmented Lagrangian for `min f s.t. c ≤ 0, x ∈ [0,1]^d`; only the
/// coordinates flagged in `free` move. Returns the best iterate within the
/// constraint tolerance (the last one if none is) and one record per
/// accepted step, labeled with `phase`.
pub fn minimize_box<P: BoxProblem>(
    problem: &mut P,
    x0: &[f64],
    free: &[bool],
    settings: &AugmentedLagrangian,
    phase: &str,
) -> Result<OptimizationResult> {
    let d = problem.dim();
    if x0.len() != d || free.len() != d {
        return Err(Error::Contract(
            "start point and mask must match the dimension".into(),
        ));
    }
    let tol = settings.tolerances;
    let mut x: Vec<f64> = x0.iter().map(|v| clip(*v)).collect();
    let Some((mut f, mut c)) = problem.value(&x)? else {
        return Err(Error::GeometryInfeasible(
            "start design cannot be evaluated".into(),
        ));
    };
    let mut evals = 1;
    let (mut gf, mut gc) = problem.accept()?;
    let mut lambda = vec![0.0; c.len()];
    let mut mu = settings.penalty;
    let mut omega = 1.0 / mu;
    let mut eta = 1.0 / mu.powf(0.1);
    let mut iter = 0;
    let mut failures = 0;
    let mut status = Status::IterationLimit;
    let mut history = Vec::new();

    let record = |problem: &P, x: &[f64], f: f64, c: &[f64], gnorm: f64, iter: usize, evals: usize| {
        let [area, ripple, smoothness, mean_torque] = problem.components();
        IterationRecord {
            phase: phase.to_string(),
            iteration: iter,
            x: x.to_vec(),
            f,
            area,
            ripple,
            smoothness,
            mean_torque,
            violation: max_violation(c),
            gradient_norm: gnorm,
            evaluations: evals,
        }
    };
    {
        let m = Merit { lambda: &lambda, mu };
        let g = m.gradient(&gf, &c, &gc);
        history.push(record(
            problem,
            &x,
            f,
            &c,
            projected_gradient_norm(&x, &g, free),
            0,
            evals,
        ));
    }

    'outer: loop {
        let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut stalled = false;
        let inner_start = iter;
        loop {
            let merit = Merit { lambda: &lambda, mu };
            let phi = merit.value(f, &c);
            let g = merit.gradient(&gf, &c, &gc);
            let pg = projected_gradient_norm(&x, &g, free);
            if pg <= omega.max(tol.optimality)
                || iter >= settings.max_iterations
                || iter - inner_start >= settings.inner_iterations
            {
                break;
            }
            let set: Vec<bool> = (0..d)
                .map(|i| free[i] && !((x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= 1.0 && g[i] < 0.0)))
                .collect();
            let mut dir = lbfgs_direction(&g, &set, &pairs);
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                pairs.clear();
                dir = lbfgs_direction(&g, &set, &pairs);
            }
            let dmax = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if dmax == 0.0 {
                stalled = true;
                break;
            }
            let mut t = (settings.max_step / dmax).min(1.0);
            let mut accepted = None;
            while t * dmax >= tol.step {
                let xt: Vec<f64> = (0..d).map(|i| clip(x[i] + t * dir[i])).collect();
                let trial = problem.value(&xt)?;
                evals += 1;
                match trial {
                    Some((ft, ct)) => {
                        failures = 0;
                        let decrease: f64 = (0..d).map(|i| g[i] * (xt[i] - x[i])).sum();
                        if merit.value(ft, &ct) <= phi + 1e-4 * decrease {
                            accepted = Some((xt, ft, ct));
                            break;
                        }
                    }
                    None => {
                        failures += 1;
                        if failures > settings.max_failures {
                            status = Status::Aborted;
                            break 'outer;
                        }
                    }
                }
                t *= 0.5;
            }
            let Some((xt, ft, ct)) = accepted else {
                if pairs.is_empty() {
                    stalled = true;
                    break;
                }
                pairs.clear();
                continue;
            };
            let (gft, gct) = problem.accept()?;
            let gt = merit.gradient(&gft, &ct, &gct);
            let s: Vec<f64> = (0..d).map(|i| xt[i] - x[i]).collect();
            let y: Vec<f64> = (0..d).map(|i| if free[i] { gt[i] - g[i] } else { 0.0 }).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let (ns, ny) = (crate::linalg::norm2(&s), crate::linalg::norm2(&y));
            if sy > 1e-10 * ns * ny {
                pairs.push((s.clone(), y));
                if pairs.len() > settings.memory {
                    pairs.remove(0);
                }
            }
            let step = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            x = xt;
            f = ft;
            c = ct;
            gf = gft;
            gc = gct;
            iter += 1;
            let pg = projected_gradient_norm(&x, &gt, free);
            history.push(record(problem, &x, f, &c, pg, iter, evals));
            if step < tol.step {
                break;
            }
        }
        let viol = max_violation(&c);
        let pg = {
            let merit = Merit { lambda: &lambda, mu };
            projected_gradient_norm(&x, &merit.gradient(&gf, &c, &gc), free)
        };
        if viol <= tol.constraint && pg <= tol.optimality {
            status = Status::Converged;
            break;
        }
        if iter >= settings.max_iterations {
            break;
        }
        if stalled && viol <= tol.constraint {
            status = Status::Stalled;
            break;
        }
        if viol <= eta {
            for (li, ci) in lambda.iter_mut().zip(&c) {
                *li = (*li + mu * ci).max(0.0);
            }
            eta /= mu.powf(0.9);
            omega /= mu;
        } else {
            mu *= 10.0;
            eta = 1.0 / mu.powf(0.1);
            omega = 1.0 / mu;
        }
        if mu > 1e12 {
            status = Status::Stalled;
            break;
        }
    }

    let best = history
        .iter()
        .filter(|r| r.violation <= tol.constraint)
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .map(|r| r.x.clone());
    Ok(OptimizationResult {
        x: best.unwrap_or(x),
        status,
        history,
        multipliers: lambda,
    })
}

/// The motor design problem seen by the box optimizer.
struct MotorProblem {
    problem: Problem,
    last: Option<Evaluation>,
    current: Option<Evaluation>,
}

impl BoxProblem for MotorProblem {
    fn dim(&self) -> usize {
        self.problem.space.dim()
    }

    fn value(&mut self, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let ev = self.problem.evaluate(&DesignVector::new(x.to_vec())?)?;
        if !ev.feasible {
            self.last = None;
            return Ok(None);
        }
        let out = (ev.f, self.problem.scaled_constraints(&ev));
        self.last = Some(ev);
        Ok(Some(out))
    }

    fn accept(&mut self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut ev = self
            .last
            .take()
            .ok_or_else(|| Error::Contract("no evaluated point to accept".into()))?;
        self.problem.differentiate(&mut ev)?;
        self.problem.accept(&ev);
        let g = ev.gradients.as_ref().expect("just differentiated");
        let out = (g.f.clone(), self.problem.scaled_constraint_gradients(g));
        self.current = Some(ev);
        Ok(out)
    }

    fn components(&self) -> [f64; 4] {
        match &self.current {
            Some(e) => [e.area, e.ripple, e.smoothness, e.mean_torque],
            None => [f64::NAN; 4],
        }
    }
}

fn mask(mode: Mode, dim: usize, shape_moves_phase: bool) -> Vec<bool> {
    (0..dim)
        .map(|i| match mode {
            Mode::Combined | Mode::Sequential => true,
            Mode::Parameters => i < NUM_FREE,
            Mode::Shape => i >= NUM_FREE || (shape_moves_phase && i == OPERATING_ANGLE),
        })
        .collect()
}

/// Runs the configured mode from `x0`. A sequential run optimizes the
/// parameters first and continues with the shape from their optimum.
pub fn optimize(
    space: &DesignSpace,
    model: &MotorModel,
    config: &OptimizationConfig,
    x0: &DesignVector,
) -> Result<OptimizationResult> {
    config.validate()?;
    if space.symmetric != config.symmetric {
        return Err(Error::Config(
            "design space symmetry differs from the configuration".into(),
        ));
    }
    let mut model = model.clone();
    if let Some(a) = &config.angles {
        model.settings.angles = a.clone();
    }
    let settings = AugmentedLagrangian {
        max_iterations: config.max_iterations,
        tolerances: config.tolerances,
        max_step: config.max_step,
        memory: config.memory,
        ..Default::default()
    };
    let phases: Vec<(Mode, f64, &str)> = match config.mode {
        Mode::Sequential => vec![
            (Mode::Parameters, config.target_torque, "param"),
            (
                Mode::Shape,
                config.shape_target_torque.unwrap_or(config.target_torque),
                "shape",
            ),
        ],
        Mode::Parameters => vec![(Mode::Parameters, config.target_torque, "param")],
        Mode::Shape => vec![(
            Mode::Shape,
            config.shape_target_torque.unwrap_or(config.target_torque),
            "shape",
        )],
        Mode::Combined => vec![(Mode::Combined, config.target_torque, "combined")],
    };
    let mut x = x0.x.iter().map(|v| clip(*v)).collect::<Vec<_>>();
    let mut out: Option<OptimizationResult> = None;
    for (mode, target, label) in phases {
        let mut p = MotorProblem {
            problem: Problem::new(space.clone(), model.clone(), config.weights, target),
            last: None,
            current: None,
        };
        let free = mask(mode, space.dim(), config.shape_moves_phase);
        let r = minimize_box(&mut p, &x, &free, &settings, label)?;
        x = r.x.clone();
        out = Some(match out {
            None => r,
            Some(mut prev) => {
                prev.history.extend(r.history);
                OptimizationResult {
                    x: r.x,
                    status: r.status,
                    history: prev.history,
                    multipliers: r.multipliers,
                }
            }
        });
        if matches!(out.as_ref().map(|o| o.status), Some(Status::Aborted)) {
            break;
        }
    }
    Ok(out.expect("at least one phase"))
}
