use iga_motor::geometry::design::MIN_BRIDGE;
use iga_motor::geometry::params::*;
use iga_motor::geometry::template::magnet_corners;
use iga_motor::geometry::*;
use iga_motor::splines::{BasisFunctionSet, KnotVector, NurbsPatch, Side};
use iga_motor::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nominal() -> MachineGeometry {
    build_geometry(&ParameterSet::initial(), &GeometryOptions::default()).unwrap()
}

fn space() -> DesignSpace {
    DesignSpace::new(ParameterSet::initial(), GeometryOptions::default(), true)
}

fn nominal_x(s: &DesignSpace) -> DesignVector {
    s.encode(&ParameterSet::initial(), &ControlPointOffsets::zeros(s.symmetric))
        .unwrap()
}

#[test]
fn magnet_area_at_lower_wmag() {
    let mut p = ParameterSet::initial();
    p.set(WMAG, 3.0);
    let g = build_geometry(&p, &GeometryOptions::default()).unwrap();
    let area: f64 = g
        .geometry
        .patches
        .iter()
        .enumerate()
        .filter(|(_, e)| e.material == iga_motor::materials::MaterialTag::Magnet)
        .map(|(i, _)| g.geometry.patch_area(i))
        .sum();
    assert!((area - 1.320e-4).abs() < 1e-15, "{area}");
    let s = space();
    let x = s.encode(&p, &ControlPointOffsets::zeros(true)).unwrap();
    let (a, _) = s.magnet_area_and_gradient(&x).unwrap();
    assert!((a - 1.320e-4).abs() < 1e-18);
}

#[test]
fn below_bound_parameter_rejected() {
    let mut p = ParameterSet::initial();
    p.set(MT1, 0.0);
    let r = build_geometry(&p, &GeometryOptions::default());
    assert!(matches!(r, Err(Error::Bounds { .. })));
}

#[test]
fn random_parameters_build_or_report_infeasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = 0;
    for _ in 0..200 {
        let mut p = ParameterSet::initial();
        let x: Vec<f64> = (0..NUM_FREE).map(|_| rng.gen()).collect();
        p.set_scaled(&x);
        match build_geometry(&p, &GeometryOptions::default()) {
            Ok(_) => ok += 1,
            Err(Error::GeometryInfeasible(msg)) => assert!(msg.starts_with("patch ")),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    eprintln!("{ok} of 200 random designs are buildable");
    assert!(ok > 0);
}

#[test]
fn zero_offsets_are_bit_identical() {
    let g = nominal();
    for sym in [true, false] {
        let h = apply_offsets(&g, &ControlPointOffsets::zeros(sym)).unwrap();
        assert_eq!(h.geometry, g.geometry);
    }
}

#[test]
fn uniform_offset_grows_radius() {
    let g = nominal();
    let d = -0.7e-3;
    let o = ControlPointOffsets::new(vec![d; 58], false).unwrap();
    let h = apply_offsets(&g, &o).unwrap();
    let r = |p: [f64; 2]| p[0].hypot(p[1]);
    for (j, &id) in g.surface_cps.iter().enumerate() {
        let (a, b) = (g.geometry.control_points()[id], h.geometry.control_points()[id]);
        if j == 0 || j == 30 || j == 60 {
            assert_eq!(a, b);
        } else {
            assert!((r(b) - r(a) - d).abs() < 1e-15);
            assert!((a[1].atan2(a[0]) - b[1].atan2(b[0])).abs() < 1e-14);
        }
    }
}

#[test]
fn single_offset_moves_one_or_two_points() {
    let g = nominal();
    for (sym, expect) in [(false, 1), (true, 2)] {
        let mut o = ControlPointOffsets::zeros(sym);
        o.values[3] = -1e-3;
        let h = apply_offsets(&g, &o).unwrap();
        let a = g.geometry.control_points();
        let b = h.geometry.control_points();
        let moved: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(moved.len(), expect);
        for &i in &moved {
            assert_eq!(g.geometry.cp_side[i], Side::Rotor);
            assert!(g.surface_cps.contains(&i));
        }
        for (pa, pb) in g.geometry.patches.iter().zip(&h.geometry.patches) {
            assert_eq!(pa.patch.basis, pb.patch.basis);
        }
    }
}

#[test]
fn oversized_offset_rejected() {
    let mut o = ControlPointOffsets::zeros(true);
    o.values[0] = 2e-3;
    assert!(matches!(apply_offsets(&nominal(), &o), Err(Error::Bounds { .. })));
}

#[test]
fn rectangle_width_derivative() {
    let build = |w: f64| {
        let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2).unwrap();
        let basis = BasisFunctionSet::b_spline(kv.clone(), kv);
        let mut cps = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                cps.push([w * i as f64 / 2.0, 0.01 * j as f64 / 2.0]);
            }
        }
        NurbsPatch::new(basis, cps)
            .unwrap()
            .refine(&[0.25, 0.5, 0.75], &[0.5])
            .unwrap()
    };
    let w = 0.03;
    let h = 1e-6 * 0.02;
    let a = build(w);
    let b = build(w + h);
    let d = difference_quotient(&a.control_points, &b.control_points, h);
    let (nu, _) = a.basis.size();
    let knots = a.basis.knot_u.knots().to_vec();
    let mut seen = 0;
    for (i, dc) in d {
        // Greville abscissa of the radial index
        let iu = i % nu;
        let s = 0.5 * (knots[iu + 1] + knots[iu + 2]);
        assert!((dc[0] - s).abs() <= 1e-6 * s.max(1e-3), "{} vs {s}", dc[0]);
        assert_eq!(dc[1], 0.0);
        seen += 1;
    }
    // the control points at s = 0 do not move
    assert_eq!(seen, a.control_points.len() - a.control_points.len() / nu);
}

#[test]
fn operating_angle_does_not_move_control_points() {
    let g = nominal();
    let o = ControlPointOffsets::zeros(true);
    let d = control_point_jacobian(&g, &o, OPERATING_ANGLE).unwrap();
    assert!(d.dc.is_empty());
    assert!(d.dalpha.is_empty());
    let d = control_point_jacobian(&g, &o, MA).unwrap();
    assert_eq!(d.dalpha.len(), 2);
    // α = ±(MA/2 − π/4) about the d-axis
    for (_, da) in d.dalpha {
        assert!((da.abs() - 0.5).abs() < 1e-6);
    }
}

#[test]
fn jacobian_pattern_is_deterministic() {
    let g = nominal();
    let o = ControlPointOffsets::zeros(true);
    let a = control_point_jacobians(&g, &o).unwrap();
    let b = control_point_jacobians(&g, &o).unwrap();
    assert_eq!(a, b);
    // stator control points never depend on rotor parameters
    for d in &a {
        for (i, _) in &d.dc {
            assert_eq!(g.geometry.cp_side[*i], Side::Rotor);
        }
    }
}

#[test]
fn forward_and_central_agree_on_wmag() {
    let p = ParameterSet::initial();
    let opts = GeometryOptions::default();
    let g = nominal();
    let o = ControlPointOffsets::zeros(true);
    let fwd = control_point_jacobian(&g, &o, WMAG).unwrap();
    let h = 1e-3;
    let at = |v: f64| {
        let mut q = p.clone();
        q.set(WMAG, v);
        build_geometry(&q, &opts)
            .unwrap()
            .geometry
            .control_points()
            .to_vec()
    };
    let (plus, minus) = (at(4.0 + h), at(4.0 - h));
    let hs = 2.0 * h * 1e-3;
    for (i, d) in fwd.dc {
        for k in 0..2 {
            let c = (plus[i][k] - minus[i][k]) / hs;
            // forward error is O(h), central O(h²)
            assert!(
                (c - d[k]).abs() < 1e-4 * (1.0 + c.abs()),
                "{i} {k}: {c} vs {}",
                d[k]
            );
        }
    }
}

#[test]
fn initial_design_is_feasible() {
    let s = space();
    let g = s.constraints(&nominal_x(&s)).unwrap();
    assert_eq!(g.len(), NUM_CONSTRAINTS);
    for (i, v) in g.iter().enumerate() {
        assert!(*v < 0.0, "constraint {i} = {v}");
    }
}

#[test]
fn corner_clearance_against_circular_surface() {
    // the outer magnet corner faces the exact circular part of the surface
    let p = ParameterSet::initial();
    let g = clearance_constraints(&nominal()).unwrap();
    let p3 = magnet_corners(&p)[3];
    let expect = MIN_BRIDGE - (0.05 - p3[0].hypot(p3[1]));
    assert!((g[1] - expect).abs() < 1e-12, "{} vs {expect}", g[1]);
}

#[test]
fn corner_on_the_limit_gives_zero() {
    // move DMAG until the outer magnet corner sits 1.5 mm below the surface
    let s = space();
    let mut p = ParameterSet::initial();
    let corner = |p: &ParameterSet| {
        let c = magnet_corners(p)[3];
        0.05 - c[0].hypot(c[1]) - MIN_BRIDGE
    };
    let (mut lo, mut hi) = (30.0, 40.0);
    for _ in 0..80 {
        let m = 0.5 * (lo + hi);
        p.set(DMAG, m);
        if corner(&p) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    p.set(DMAG, 0.5 * (lo + hi));
    let x = s.encode(&p, &ControlPointOffsets::zeros(true)).unwrap();
    let g = s.constraints(&x).unwrap();
    // frozen arc weights keep the moved surface within 1e-10 m of the circle
    assert!(g[1].abs() < 1e-10, "{}", g[1]);
}

#[test]
fn constraint_gradient_is_consistent() {
    let s = space();
    let x = nominal_x(&s);
    let (g0, dg) = s.constraints_and_gradient(&x).unwrap();
    let h = 1e-4;
    for k in [DMAG, MA, MW1, RA1, NUM_FREE + 2] {
        let mut xp = x.clone();
        xp.x[k] += h;
        let mut xm = x.clone();
        xm.x[k] -= h;
        let (gp, gm) = (s.constraints(&xp).unwrap(), s.constraints(&xm).unwrap());
        for i in 0..g0.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!(
                (fd - dg[i][k]).abs() <= 1e-4 * fd.abs().max(1e-6),
                "g{i} x{k}: {fd} vs {}",
                dg[i][k]
            );
        }
    }
}

#[test]
fn magnet_area_gradient_matches_fd() {
    let s = space();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = DesignVector::new((0..s.dim()).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
        let (_, g) = s.magnet_area_and_gradient(&x).unwrap();
        for k in 0..s.dim() {
            let h = 1e-4;
            let mut xp = x.clone();
            xp.x[k] += h;
            let mut xm = x.clone();
            xm.x[k] -= h;
            let fd = (s.magnet_area_and_gradient(&xp).unwrap().0
                - s.magnet_area_and_gradient(&xm).unwrap().0)
                / (2.0 * h);
            if k >= NUM_FREE {
                assert_eq!(g[k], 0.0);
            }
            assert!(
                (fd - g[k]).abs() <= 1e-10 * g[k].abs().max(1e-6),
                "{k}: {fd} vs {}",
                g[k]
            );
        }
    }
}

#[test]
fn smoothness_gradient_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let theta: Vec<f64> = (0..61)
        .map(|j| j as f64 * 0.025 + 0.001 * (j % 3) as f64)
        .collect();
    let d: Vec<f64> = (0..61).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let (_, g) = smoothness_and_gradient(&d, &theta).unwrap();
    for k in 0..61 {
        // S is quadratic, so the central quotient is exact for any step
        let h = 1e-4;
        let mut dp = d.clone();
        dp[k] += h;
        let mut dm = d.clone();
        dm[k] -= h;
        let fd = (smoothness_and_gradient(&dp, &theta).unwrap().0
            - smoothness_and_gradient(&dm, &theta).unwrap().0)
            / (2.0 * h);
        assert!(
            (fd - g[k]).abs() <= 1e-9 * g[k].abs().max(1e-9),
            "{k}: {fd} vs {}",
            g[k]
        );
    }
    let (s, g) = smoothness_and_gradient(&[2e-4; 61], &theta).unwrap();
    assert_eq!(s, 0.0);
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn folded_smoothness_gradient() {
    let g = nominal();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let o = ControlPointOffsets::new((0..29).map(|_| rng.gen_range(-1e-3..1e-4)).collect(), true).unwrap();
    let (_, grad) = o.smoothness(&g.surface_angles).unwrap();
    for k in 0..29 {
        let h = 1e-7;
        let mut op = o.clone();
        op.values[k] += h;
        let mut om = o.clone();
        om.values[k] -= h;
        let fd = (op.smoothness(&g.surface_angles).unwrap().0 - om.smoothness(&g.surface_angles).unwrap().0)
            / (2.0 * h);
        assert!((fd - grad[k]).abs() <= 1e-7 * grad[k].abs().max(1e-6));
    }
}

#[test]
fn scaling_round_trip_through_design_vector() {
    let s = DesignSpace::new(ParameterSet::initial(), GeometryOptions::default(), false);
    let mut o = ControlPointOffsets::zeros(false);
    o.values[7] = -1.2e-3;
    let x = s.encode(&ParameterSet::initial(), &o).unwrap();
    assert_eq!(x.x.len(), 17 + 58);
    let (p, o2) = s.decode(&x).unwrap();
    for (a, b) in p.free.iter().zip(&ParameterSet::initial().free) {
        assert!((a.value - b.value).abs() <= 1e-14 * b.value.abs().max(1.0));
    }
    for (a, b) in o.values.iter().zip(&o2.values) {
        assert!((a - b).abs() < 1e-17);
    }
}
