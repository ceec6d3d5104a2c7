use std::path::Path;

use iga_motor::assembly::Assembler;
use iga_motor::geometry::params::{MW1, WMAG};
use iga_motor::geometry::{DesignVector, NUM_FREE};
use iga_motor::model::{MotorModel, TorqueEvaluation};
use iga_motor::optimize::{optimize, write_history_csv, Mode, ObjectiveWeights, Status};
use iga_motor::solver::flux_density;
use iga_motor::splines::{MultiPatchGeometry, Side};
use serde::Serialize;
use serde_json::json;

use crate::config::{GeometryConfig, ResolvedGeometry, Run};
use crate::error::CliError;
use crate::output::{write_atomic, write_csv, write_json};

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Objective components of one design, from a cold-started sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Assessment {
    pub objective: f64,
    pub magnet_area_m2: f64,
    pub ripple_nm: f64,
    pub mean_torque_nm: f64,
    pub smoothness: f64,
}

struct Solved {
    geometry: MultiPatchGeometry,
    assembler: Assembler,
    eval: TorqueEvaluation,
    assessment: Assessment,
}

fn solve(g: &ResolvedGeometry, model: &MotorModel, w: &ObjectiveWeights) -> Result<Solved, CliError> {
    let machine = g.build()?;
    let prep = model.prepare(&machine)?;
    let eval = model.evaluate(&prep, None)?;
    let area = 2.0 * g.params.si(MW1) * g.params.si(WMAG);
    let (smoothness, _) = g.offsets.smoothness(&machine.surface_angles)?;
    let ripple = eval.profile.std;
    let assessment = Assessment {
        objective: w.area * area + w.ripple * ripple + w.smoothness * smoothness,
        magnet_area_m2: area,
        ripple_nm: ripple,
        mean_torque_nm: eval.profile.mean,
        smoothness,
    };
    Ok(Solved {
        geometry: machine.geometry,
        assembler: prep.assembler,
        eval,
        assessment,
    })
}

pub fn assess(
    g: &ResolvedGeometry,
    model: &MotorModel,
    w: &ObjectiveWeights,
) -> Result<Assessment, CliError> {
    Ok(solve(g, model, w)?.assessment)
}

pub fn evaluate(run: &Run, out: &Path) -> Result<(), CliError> {
    let s = solve(&run.geometry, &run.model, &run.config.optimization.weights)?;
    let p = &s.eval.profile;
    let rows: Vec<Vec<String>> = run
        .angles_deg
        .iter()
        .zip(&p.torques)
        .map(|(b, t)| vec![b.to_string(), num(*t)])
        .collect();
    write_csv(&out.join("torque.csv"), "beta_deg,torque_Nm", &rows)?;

    // field at the first angle, rotor points moved to their rotated pose
    let sol = &s.eval.solutions[0];
    let (sn, cs) = (-sol.beta).sin_cos();
    let n = run.config.field_samples;
    let mut field = Vec::new();
    for (k, entry) in s.geometry.patches.iter().enumerate() {
        let turn = |v: [f64; 2]| match entry.side {
            Side::Rotor => [cs * v[0] - sn * v[1], sn * v[0] + cs * v[1]],
            Side::Stator => v,
        };
        for i in 0..n {
            for j in 0..n {
                let pt = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let (x, b) = flux_density(&s.geometry, &s.assembler, sol, k, pt)?;
                let (x, b) = (turn(x), turn(b));
                field.push(vec![
                    k.to_string(),
                    pt[0].to_string(),
                    pt[1].to_string(),
                    num(x[0]),
                    num(x[1]),
                    num(b[0]),
                    num(b[1]),
                    num(b[0].hypot(b[1])),
                ]);
            }
        }
    }
    write_csv(&out.join("field.csv"), "patch,xi,eta,x,y,Bx,By,Bmag", &field)?;

    let a = &s.assessment;
    let sectors = if run.geometry.options.full_machine {
        1.0
    } else {
        4.0
    };
    let summary = json!({
        "mean_torque_Nm": a.mean_torque_nm,
        "ripple_Nm": a.ripple_nm,
        "magnet_area_m2": a.magnet_area_m2,
        "machine_mean_torque_Nm": sectors * a.mean_torque_nm,
        "smoothness": a.smoothness,
        "objective": a.objective,
        "angles": p.angles.len(),
        "newton_iterations": s.eval.solutions.iter().map(|s| s.iterations).collect::<Vec<_>>(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "mean torque {:.6} N·m, ripple {:.6} N·m, magnet area {:.4e} m² over {} angles",
        a.mean_torque_nm,
        a.ripple_nm,
        a.magnet_area_m2,
        p.angles.len()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub coordinate: String,
    pub analytic: f64,
    pub fd: f64,
    pub rel_error: f64,
}

fn coordinate_names(run: &Run) -> Vec<String> {
    let mut names: Vec<String> = run.geometry.params.free.iter().map(|p| p.name.clone()).collect();
    names.extend((0..run.geometry.offsets.values.len()).map(|k| format!("offset{k}")));
    names
}

/// `dT̄/dx` in scaled design coordinates against central differences
/// (second-order one-sided at a bound); Newton runs at tolerance 1e-13.
pub fn gradcheck(
    run: &Run,
    out: &Path,
    fd_step: Option<f64>,
    corrupt: bool,
) -> Result<Vec<GradcheckRow>, CliError> {
    let cfg = &run.config.gradcheck;
    let h = fd_step.unwrap_or(cfg.fd_step);
    if !(h > 0.0 && h < 0.5) {
        return Err(CliError::Config(format!("difference step {h} outside (0, 0.5)")));
    }
    let names = coordinate_names(run);
    let selected: Vec<usize> = match &cfg.coordinates {
        None => (0..NUM_FREE).collect(),
        Some(list) => list
            .iter()
            .map(|c| {
                names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| CliError::Config(format!("unknown coordinate {c}")))
            })
            .collect::<Result<_, _>>()?,
    };
    let mut model = run.model.clone();
    model.settings.newton.tol_rel = model.settings.newton.tol_rel.min(1e-13);
    model.settings.newton.tol_abs = model.settings.newton.tol_abs.min(1e-14);
    let space = run.geometry.space();
    let (x0, clipped) = run.geometry.design_vector()?;
    if clipped {
        eprintln!("warning: start point clipped to the design box");
    }
    let machine = space.build(&x0)?;
    let (_, offsets) = space.decode(&x0)?;
    let prep = model.prepare(&machine)?;
    let eval = model.evaluate(&prep, None)?;
    let analytic = model
        .stats_gradient(&space, &machine, &offsets, &prep, &eval)?
        .mean;
    let mean_at = |i: usize, s: f64| -> Result<f64, CliError> {
        if s == 0.0 {
            return Ok(eval.profile.mean);
        }
        let mut x = x0.x.clone();
        x[i] += s;
        let m = space.build(&DesignVector::new(x)?)?;
        Ok(model.evaluate(&model.prepare(&m)?, None)?.profile.mean)
    };
    let mut rows = Vec::new();
    for &i in &selected {
        let xi = x0.x[i];
        let fd = if xi - h < 0.0 {
            (-3.0 * mean_at(i, 0.0)? + 4.0 * mean_at(i, h)? - mean_at(i, 2.0 * h)?) / (2.0 * h)
        } else if xi + h > 1.0 {
            (3.0 * mean_at(i, 0.0)? - 4.0 * mean_at(i, -h)? + mean_at(i, -2.0 * h)?) / (2.0 * h)
        } else {
            (mean_at(i, h)? - mean_at(i, -h)?) / (2.0 * h)
        };
        let a = if corrupt {
            analytic[i] * 1.01 + 1e-3
        } else {
            analytic[i]
        };
        let rel_error = if a == fd {
            0.0
        } else {
            (a - fd).abs() / a.abs().max(fd.abs())
        };
        rows.push(GradcheckRow {
            coordinate: names[i].clone(),
            analytic: a,
            fd,
            rel_error,
        });
    }
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.coordinate.clone(), num(r.analytic), num(r.fd), num(r.rel_error)])
        .collect();
    write_csv(
        &out.join("gradcheck.csv"),
        "coordinate,analytic,fd,rel_error",
        &csv,
    )?;
    let failed = rows.iter().filter(|r| !(r.rel_error <= cfg.threshold)).count();
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.rel_error));
    println!("{} coordinates, worst relative error {worst:.3e}", rows.len());
    if failed > 0 {
        return Err(CliError::Gradcheck {
            failed,
            total: rows.len(),
            threshold: cfg.threshold,
            worst,
        });
    }
    Ok(rows)
}

pub fn optimize_run(run: &Run, out: &Path, mode: Option<Mode>) -> Result<(), CliError> {
    let mut config = run.config.optimization.clone();
    config.symmetric = run.geometry.offsets.symmetric;
    if let Some(m) = mode {
        config.mode = m;
    }
    let w = config.weights;
    let space = run.geometry.space();
    let (x0, clipped) = run.geometry.design_vector()?;
    if clipped {
        eprintln!("warning: start point clipped to the design box");
    }
    let initial = assess(&run.geometry, &run.model, &w)?;
    let result = optimize(&space, &run.model, &config, &x0)?;
    write_atomic(&out.join("history.csv"), |wr| {
        write_history_csv(&result.history, wr).map_err(std::io::Error::other)
    })?;
    let (params, offsets) = space.decode(&DesignVector::new(result.x.clone())?)?;
    let file = GeometryConfig::from_resolved(&ResolvedGeometry {
        params,
        offsets,
        options: run.geometry.options,
    });
    write_json(&out.join("final_geometry.json"), &file)?;
    if result.status == Status::Aborted {
        return Err(CliError::Aborted);
    }
    // the report describes the design exactly as reloaded from the file
    let fin = assess(&file.resolve()?, &run.model, &w)?;
    let phases: Vec<serde_json::Value> = {
        let mut seen: Vec<&str> = Vec::new();
        for r in &result.history {
            if !seen.contains(&r.phase.as_str()) {
                seen.push(&r.phase);
            }
        }
        seen.iter()
            .map(|ph| {
                let recs: Vec<_> = result.history.iter().filter(|r| r.phase == *ph).collect();
                json!({
                    "phase": ph,
                    "iterations": recs.len() - 1,
                    "evaluations": recs.last().map_or(0, |r| r.evaluations),
                })
            })
            .collect()
    };
    let report = json!({
        "status": result.status,
        "mode": config.mode,
        "target_torque_Nm": config.target_torque,
        "phases": phases,
        "initial": initial,
        "final": fin,
    });
    write_json(&out.join("report.json"), &report)?;
    println!("{:<12}{:>14}{:>14}", "", "initial", "final");
    for (name, a, b) in [
        ("f_opt", initial.objective, fin.objective),
        ("A_magnet", initial.magnet_area_m2, fin.magnet_area_m2),
        ("T_ripple", initial.ripple_nm, fin.ripple_nm),
        ("T_mean", initial.mean_torque_nm, fin.mean_torque_nm),
    ] {
        println!("{name:<12}{a:>14.6e}{b:>14.6e}");
    }
    println!("status {:?}", result.status);
    Ok(())
}

pub fn export_geometry(run: &Run, out: &Path) -> Result<(), CliError> {
    let machine = run.geometry.build()?;
    write_json(
        &out.join("geometry.json"),
        &GeometryConfig::from_resolved(&run.geometry),
    )?;
    write_json(&out.join("multipatch.json"), &machine.geometry)?;
    println!(
        "{} patches, {} control points",
        machine.geometry.patches.len(),
        machine.geometry.num_control_points()
    );
    Ok(())
}
