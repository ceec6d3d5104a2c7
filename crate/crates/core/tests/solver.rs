mod common;

use common::*;
use iga_motor::solver::{solve_magnetostatic, torque};

#[test]
fn manufactured_convergence_bilinear() {
    let ns = [4, 8, 16, 32];
    let e: Vec<f64> = ns.iter().map(|&n| manufactured_error(1, n)).collect();
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let k = observed_order(&h, &e);
    assert!((k - 2.0).abs() < 0.2, "order {k}");
}

#[test]
fn manufactured_convergence_quadratic() {
    let ns = [4, 8, 16, 32];
    let e: Vec<f64> = ns.iter().map(|&n| manufactured_error(2, n)).collect();
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let k = observed_order(&h, &e);
    assert!((k - 3.0).abs() < 0.2, "order {k}");
}

#[test]
fn mortar_matches_monolithic_solve() {
    let coarse = mortar_trace_difference(2, 96);
    assert!(coarse > 1e-3, "truncation invisible: {coarse:e}");
    assert!(mortar_trace_difference(40, 96) < 1e-6);
}

use iga_motor::error::Error;
use iga_motor::geometry::{build_geometry, GeometryOptions, ParameterSet};
use iga_motor::solver::{sweep, NewtonOptions, TorqueProfile};
use iga_motor::splines::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rotating_the_rotor_matches_rotated_coupling() {
    let m = nominal_machine();
    let lib = linear_library();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let beta = rng.gen_range(0.0..std::f64::consts::FRAC_PI_6);
        let exc = excitation(&m, beta);
        let coupled = torque_at(&m.geometry, &lib, &exc, beta, &tight());
        let turned = torque_at(&rotated_rotor(&m, -beta), &lib, &exc, 0.0, &tight());
        let rel = (coupled - turned).abs() / coupled.abs();
        assert!(rel < 1e-4, "beta {beta}: {coupled} vs {turned}");
    }
}

#[test]
fn torque_repeats_after_thirty_degrees() {
    let b = Bench::new(nominal_machine(), &nonlinear_library());
    let t0 = torque(&b.asm, &b.solve(0.0, &tight()), LENGTH);
    let t1 = torque(&b.asm, &b.solve(30f64.to_radians(), &tight()), LENGTH);
    assert!((t0 - t1).abs() <= 1e-6 * t0.abs(), "{t0} vs {t1}");
}

#[test]
fn full_machine_torque_is_four_quarters() {
    let lib = nonlinear_library();
    let p = ParameterSet::initial();
    let quarter = Bench::new(build_geometry(&p, &GeometryOptions::default()).unwrap(), &lib);
    let full_opts = GeometryOptions {
        full_machine: true,
        ..Default::default()
    };
    let full = Bench::new(build_geometry(&p, &full_opts).unwrap(), &lib);
    assert_eq!(
        patch_count(&full.machine.geometry, Side::Rotor),
        4 * patch_count(&quarter.machine.geometry, Side::Rotor)
    );
    for deg in [0.0, 7.0] {
        let beta = f64::to_radians(deg);
        let tq = torque(&quarter.asm, &quarter.solve(beta, &tight()), LENGTH);
        let tf = torque(&full.asm, &full.solve(beta, &tight()), LENGTH);
        assert!((tf - 4.0 * tq).abs() <= 1e-6 * tf.abs(), "{tf} vs 4 x {tq}");
    }
}

#[test]
fn newton_converges_quickly() {
    let b = Bench::new(nominal_machine(), &nonlinear_library());
    let sol = b.solve(0.0, &NewtonOptions::default());
    assert!(sol.iterations <= 25);
    let rho: Vec<f64> = sol.history.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &rho[rho.len() - 3..];
    // superlinear: contraction keeps improving
    assert!(tail[0] > tail[1] && tail[1] > tail[2], "ratios {tail:?}");
}

#[test]
fn linear_problem_takes_one_step() {
    let b = Bench::new(nominal_machine(), &linear_library());
    let sol = b.solve(0.2, &NewtonOptions::default());
    assert_eq!(sol.iterations, 1);
}

#[test]
fn zero_sources_give_zero_field() {
    let b = Bench::new(nominal_machine(), &nonlinear_library());
    let rhs = vec![0.0; b.asm.size()];
    let sol = solve_magnetostatic(&b.asm, &b.solver, &rhs, 0.3, None, &NewtonOptions::default()).unwrap();
    assert_eq!(sol.iterations, 0);
    assert!(sol.x.iter().all(|v| *v == 0.0));
    assert_eq!(torque(&b.asm, &sol, LENGTH), 0.0);
}

#[test]
fn torque_is_minus_derivative_of_the_potential() {
    for lib in [linear_library(), nonlinear_library()] {
        let b = Bench::new(nominal_machine(), &lib);
        let beta = 0.13;
        let h = 1e-4;
        let t = torque(&b.asm, &b.solve(beta, &tight()), LENGTH);
        let fd = -LENGTH * (b.potential(beta + h, beta, &tight()) - b.potential(beta - h, beta, &tight()))
            / (2.0 * h);
        assert!((t - fd).abs() < 1e-3 * t.abs(), "torque {t} vs {fd}");
    }
}

#[test]
fn profile_statistics() {
    let p = TorqueProfile::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
    assert_eq!(p.mean, 2.0);
    assert!((p.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!(TorqueProfile::new(vec![], vec![]).is_err());
}

#[test]
fn empty_sweep_is_rejected() {
    let b = Bench::new(nominal_machine(), &linear_library());
    let r = sweep(
        &b.asm,
        &b.solver,
        &excitation(&b.machine, 0.0),
        &[],
        LENGTH,
        &NewtonOptions::default(),
        None,
    );
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn warm_start_reaches_the_same_state() {
    let b = Bench::new(nominal_machine(), &nonlinear_library());
    let cold = b.solve(0.05, &tight());
    let rhs = b.asm.rhs(&excitation(&b.machine, 0.05)).unwrap();
    let prev = b.solve(0.04, &tight());
    let warm = solve_magnetostatic(&b.asm, &b.solver, &rhs, 0.05, Some(&prev.x), &tight()).unwrap();
    assert!(warm.iterations < cold.iterations);
    let (tc, tw) = (torque(&b.asm, &cold, LENGTH), torque(&b.asm, &warm, LENGTH));
    assert!((tc - tw).abs() < 1e-9 * tc.abs());
}

#[test]
fn normal_flux_is_continuous_across_patch_edges() {
    use iga_motor::solver::flux_density;
    let b = Bench::new(nominal_machine(), &nonlinear_library());
    let sol = b.solve(0.1, &tight());
    let g = &b.machine.geometry;
    let at = |p: usize, pt: [f64; 2]| g.patches[p].patch.evaluate_mapping(pt).unwrap().x;
    let close = |a: [f64; 2], c: [f64; 2]| (a[0] - c[0]).hypot(a[1] - c[1]) < 1e-12;
    let mut checked = 0;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for a in 0..g.patches.len() {
        for c in 0..g.patches.len() {
            if g.patches[a].side != g.patches[c].side {
                continue;
            }
            // East edge of a against West edge of c, and North against South
            for (pa, pc, dir) in [(|s| [1.0, s], |s| [0.0, s], 1), (|s| [s, 1.0], |s| [s, 0.0], 0)]
                as [(fn(f64) -> [f64; 2], fn(f64) -> [f64; 2], usize); 2]
            {
                if !(close(at(a, pa(0.3)), at(c, pc(0.3))) && close(at(a, pa(0.7)), at(c, pc(0.7)))) {
                    continue;
                }
                let s = 0.41;
                let (_, ba) = flux_density(g, &b.asm, &sol, a, pa(s)).unwrap();
                let (_, bc) = flux_density(g, &b.asm, &sol, c, pc(s)).unwrap();
                let j = g.patches[a].patch.evaluate_mapping(pa(s)).unwrap().jacobian;
                let t = [j[0][dir], j[1][dir]];
                let n = [-t[1], t[0]];
                let len = n[0].hypot(n[1]);
                let jump = ((ba[0] - bc[0]) * n[0] + (ba[1] - bc[1]) * n[1]) / len;
                worst = worst.max(jump.abs());
                scale = scale.max(ba[0].hypot(ba[1]));
                checked += 1;
            }
        }
    }
    assert!(checked > 20, "{checked} shared edges");
    assert!(
        worst < 1e-6 * scale,
        "normal jump {worst:e} against |B| {scale:e}"
    );
}
