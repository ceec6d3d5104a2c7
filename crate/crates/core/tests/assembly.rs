use std::f64::consts::{FRAC_PI_2, PI};

use iga_motor::assembly::{coupling_integrals, rotation_matrix, Assembler, ExcitationState, Harmonics};
use iga_motor::geometry::{build_geometry, GeometryOptions, ParameterSet};
use iga_motor::linalg::norm2;
use iga_motor::materials::{MaterialLibrary, MaterialTag, ReluctivityModel};
use iga_motor::splines::primitives::{annulus_sector, glue, rectangle, PatchSpec};
use iga_motor::splines::{
    BoundaryTag, ExcitationSpec, MagnetSpec, MultiPatchGeometry, NurbsPatch, PatchEdge, Region, Side,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_library(nu: f64) -> MaterialLibrary {
    let m = ReluctivityModel::Linear { nu };
    MaterialLibrary {
        iron: m.clone(),
        magnet: m.clone(),
        air: m.clone(),
        coil: m,
    }
}

fn spec(patch: NurbsPatch, material: MaterialTag, region: Region, side: Side) -> PatchSpec {
    PatchSpec {
        patch,
        material,
        region,
        side,
        boundary: Vec::new(),
    }
}

fn single(patch: NurbsPatch, material: MaterialTag, region: Region) -> MultiPatchGeometry {
    glue(vec![spec(patch, material, region, Side::Stator)], 1.0, 1e-12).unwrap()
}

fn uncoupled(geom: &MultiPatchGeometry, lib: &MaterialLibrary) -> Assembler {
    Assembler::new(geom, lib, &Harmonics::first(1)).unwrap()
}

#[test]
fn bilinear_unit_square_element() {
    let g = single(
        rectangle([0.0, 0.0], [1.0, 1.0], 1, 1, 1).unwrap(),
        MaterialTag::Air,
        Region::Passive,
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let k = a.stiffness(&[0.0; 4], false).to_dense();
    // cps: 0 (0,0), 1 (1,0), 2 (0,1), 3 (1,1)
    for i in 0..4 {
        assert!((k[i][i] - 2.0 / 3.0).abs() < 1e-14);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
        assert!((k[i][j] + 1.0 / 6.0).abs() < 1e-14);
    }
    for (i, j) in [(0, 3), (1, 2)] {
        assert!((k[i][j] + 1.0 / 3.0).abs() < 1e-14);
    }
}

#[test]
fn stiffness_is_linear_in_reluctivity() {
    let g = single(
        annulus_sector(1.0, 2.0, 0.0, FRAC_PI_2, 2, 3).unwrap(),
        MaterialTag::Iron,
        Region::Passive,
    );
    let n = g.num_control_points();
    let k1 = uncoupled(&g, &unit_library(1.0)).stiffness(&vec![0.0; n], false);
    let k3 = uncoupled(&g, &unit_library(3.0)).stiffness(&vec![0.0; n], false);
    for (a, b) in k1.data.iter().zip(&k3.data) {
        assert!((3.0 * a - b).abs() <= 1e-13 * b.abs().max(1.0));
    }
}

#[test]
fn two_patch_split_matches_refined_single_patch() {
    let whole = rectangle([0.0, 0.0], [1.0, 1.0], 2, 2, 2)
        .unwrap()
        .refine(&[0.5], &[])
        .unwrap();
    let g1 = single(whole, MaterialTag::Air, Region::Passive);
    let left = rectangle([0.0, 0.0], [0.5, 1.0], 2, 1, 2).unwrap();
    let right = rectangle([0.5, 0.0], [1.0, 1.0], 2, 1, 2).unwrap();
    let g2 = glue(
        vec![
            spec(left, MaterialTag::Air, Region::Passive, Side::Stator),
            spec(right, MaterialTag::Air, Region::Passive, Side::Stator),
        ],
        1.0,
        1e-12,
    )
    .unwrap();
    assert_eq!(g1.num_control_points(), g2.num_control_points());
    let lib = unit_library(1.0);
    let n = g1.num_control_points();
    let k1 = uncoupled(&g1, &lib).stiffness(&vec![0.0; n], false).to_dense();
    let k2 = uncoupled(&g2, &lib).stiffness(&vec![0.0; n], false).to_dense();
    let map: Vec<usize> = g1
        .control_points()
        .iter()
        .map(|p| {
            g2.control_points()
                .iter()
                .position(|q| (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-12)
                .expect("matching control point")
        })
        .collect();
    let mut diff: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            diff = diff.max((k1[i][j] - k2[map[i]][map[j]]).abs());
        }
    }
    assert!(diff < 1e-12, "max entry difference {diff}");
}

#[test]
fn neumann_stiffness_annihilates_constants_and_is_symmetric() {
    let g = single(
        annulus_sector(0.5, 1.5, 0.2, 1.4, 3, 4).unwrap(),
        MaterialTag::Air,
        Region::Passive,
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let n = a.n_field();
    let k = a.stiffness(&vec![0.0; n], false);
    assert!(norm2(&k.mul_vec(&vec![1.0; n])) < 1e-10);
    assert!(k.asymmetry() <= 1e-12 * k.max_abs());
}

fn coil_state(phi0: f64) -> ExcitationState {
    ExcitationState {
        beta: 0.0,
        phi0,
        current: 10.0,
        n_wind: 20.0,
        coil_area: 2.0e-4,
        pole_pairs: 2,
    }
}

#[test]
fn constant_current_density_sums_to_area() {
    let g = single(
        rectangle([0.1, 0.2], [0.4, 0.7], 2, 3, 2).unwrap(),
        MaterialTag::Coil,
        Region::Coil(ExcitationSpec { phase: 0, sign: 1.0 }),
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let exc = coil_state(FRAC_PI_2);
    let b = a.rhs(&exc).unwrap();
    let area = 0.3 * 0.5;
    let j = 10.0 * 20.0 / 2.0e-4;
    let err = (b.iter().sum::<f64>() - j * area).abs() / (j * area);
    assert!(err < 1e-13, "{err}");
}

#[test]
fn coil_at_zero_phase_contributes_nothing() {
    let g = single(
        rectangle([0.0, 0.0], [1.0, 1.0], 2, 2, 2).unwrap(),
        MaterialTag::Coil,
        Region::Coil(ExcitationSpec { phase: 1, sign: -1.0 }),
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let b = a.rhs(&coil_state(-2.0 * PI / 3.0)).unwrap();
    assert!(b.iter().all(|v| v.abs() < 1e-6), "{b:?}");
    let bad = ExcitationState {
        coil_area: 0.0,
        ..coil_state(0.0)
    };
    assert!(a.rhs(&bad).is_err());
}

#[test]
fn magnet_source_is_orthogonal_to_constants() {
    let g = single(
        rectangle([0.0, 0.0], [2.0, 1.0], 2, 3, 2).unwrap(),
        MaterialTag::Magnet,
        Region::Magnet(MagnetSpec { br: 1.2, alpha: 0.4 }),
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let b = a.rhs(&coil_state(0.0)).unwrap();
    assert!(b.iter().sum::<f64>().abs() < 1e-12);
    // Br⊥ = (1, 0) at α = −π/2: b_i = ∫ ∂_x N_i, so the x-interior rows vanish
    // for functions whose support does not touch x = 0 or x = 2.
    let g = single(
        rectangle([0.0, 0.0], [2.0, 1.0], 1, 4, 1).unwrap(),
        MaterialTag::Magnet,
        Region::Magnet(MagnetSpec {
            br: 1.0,
            alpha: -FRAC_PI_2,
        }),
    );
    let a = uncoupled(&g, &unit_library(1.0));
    let b = a.rhs(&coil_state(0.0)).unwrap();
    for (i, p) in g.control_points().iter().enumerate() {
        if p[0] > 0.0 && p[0] < 2.0 {
            assert!(b[i].abs() < 1e-14, "entry {i} = {}", b[i]);
        }
    }
}

fn ring_side(r0: f64, r1: f64, side: Side, edge: PatchEdge, quarters: usize) -> Vec<PatchSpec> {
    (0..quarters)
        .map(|q| {
            let t0 = q as f64 * FRAC_PI_2;
            PatchSpec {
                patch: annulus_sector(r0, r1, t0, t0 + FRAC_PI_2, 2, 6).unwrap(),
                material: MaterialTag::Air,
                region: Region::Passive,
                side,
                boundary: vec![(edge, BoundaryTag::Airgap)],
            }
        })
        .collect()
}

#[test]
fn quarter_arc_sine_column() {
    let r = 0.7;
    let g = glue(ring_side(0.3, r, Side::Rotor, PatchEdge::East, 1), r, 1e-12).unwrap();
    let h = Harmonics::new(vec![2]).unwrap();
    let rows = coupling_integrals(&g, Side::Rotor, &h, 0).unwrap();
    let sin: f64 = rows.iter().map(|(_, v)| v[0]).sum();
    let cos: f64 = rows.iter().map(|(_, v)| v[1]).sum();
    assert!((sin - r).abs() < 1e-12, "{sin}");
    assert!(cos.abs() < 1e-12, "{cos}");
}

#[test]
fn full_circle_constant_trace_is_orthogonal() {
    let g = glue(ring_side(0.3, 0.7, Side::Rotor, PatchEdge::East, 4), 0.7, 1e-12).unwrap();
    let h = Harmonics::default();
    let rows = coupling_integrals(&g, Side::Rotor, &h, 0).unwrap();
    for c in 0..h.columns() {
        let s: f64 = rows.iter().map(|(_, v)| v[c]).sum();
        assert!(s.abs() < 1e-12, "column {c}: {s}");
    }
}

#[test]
fn coupling_quadrature_is_converged() {
    let g = glue(ring_side(0.3, 0.7, Side::Rotor, PatchEdge::East, 1), 0.7, 1e-12).unwrap();
    let h = Harmonics::default();
    let a = coupling_integrals(&g, Side::Rotor, &h, 0).unwrap();
    let b = coupling_integrals(&g, Side::Rotor, &h, 2).unwrap();
    let scale = a
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    for ((ia, va), (ib, vb)) in a.iter().zip(&b) {
        assert_eq!(ia, ib);
        for (x, y) in va.iter().zip(vb) {
            assert!((x - y).abs() < 1e-10 * scale);
        }
    }
}

#[test]
fn missing_interface_is_a_config_error() {
    let g = glue(ring_side(0.3, 0.7, Side::Rotor, PatchEdge::East, 1), 0.7, 1e-12).unwrap();
    assert!(coupling_integrals(&g, Side::Stator, &Harmonics::default(), 0).is_err());
}

#[test]
fn harmonic_set_validation() {
    assert!(Harmonics::new(vec![2, 4]).is_err());
    assert!(Harmonics::new(vec![6, 2]).is_err());
    assert!(Harmonics::new(vec![]).is_err());
    let h = Harmonics::default();
    assert_eq!(h.columns(), 52);
    assert_eq!(h.max_order(), 102);
}

#[test]
fn rotation_blocks() {
    let h = Harmonics::default();
    let id = rotation_matrix(0.0, &h, false).to_dense();
    for (i, row) in id.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
        }
    }
    let two = Harmonics::new(vec![2]).unwrap();
    let r = rotation_matrix(FRAC_PI_2, &two, false).blocks[0];
    let expect = [[-1.0, 0.0], [0.0, -1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((r[i][j] - expect[i][j]).abs() < 1e-15);
        }
    }
    let beta = 0.37;
    let rp = rotation_matrix(beta, &h, false);
    let rm = rotation_matrix(-beta, &h, false);
    let x: Vec<f64> = (0..h.columns()).map(|k| (k as f64).sin()).collect();
    let y = rp.mul(&rm.mul(&x));
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() < 1e-14);
    }
    let d = rotation_matrix(beta, &h, true);
    let step = 1e-6;
    let fd_p = rotation_matrix(beta + step, &h, false);
    let fd_m = rotation_matrix(beta - step, &h, false);
    for q in 0..h.len() {
        for i in 0..2 {
            for j in 0..2 {
                let fd = (fd_p.blocks[q][i][j] - fd_m.blocks[q][i][j]) / (2.0 * step);
                assert!((fd - d.blocks[q][i][j]).abs() < 1e-5 * (h.orders()[q] as f64).powi(2));
            }
        }
    }
}

#[test]
fn shift_identity_of_the_rotation() {
    // sin(n(θ − β)) expressed in the unrotated basis
    let h = Harmonics::new(vec![6]).unwrap();
    let (beta, theta) = (0.21, 1.1);
    let r = rotation_matrix(beta, &h, false);
    let coeff = r.mul_transposed(&[1.0, 0.0]);
    let n = 6.0;
    let lhs = (n * (theta - beta)).sin();
    let rhs = coeff[0] * (n * theta).sin() + coeff[1] * (n * theta).cos();
    assert!((lhs - rhs).abs() < 1e-14);
}

fn iron_patch() -> (MultiPatchGeometry, MaterialLibrary) {
    let g = single(
        annulus_sector(0.02, 0.04, 0.1, 1.2, 3, 4).unwrap(),
        MaterialTag::Iron,
        Region::Passive,
    );
    (g, MaterialLibrary::nonlinear(1.05).unwrap())
}

fn random_field(n: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn newton_jacobian_matches_directional_difference() {
    let (g, lib) = iron_patch();
    let a = uncoupled(&g, &lib);
    let n = a.n_field();
    // A_z differences of ~1e-2 Wb/m across 2 cm put B in the saturation knee.
    let u = random_field(n, 2.0e-2, 7);
    let du = random_field(n, 1.0, 8);
    let jd = a.stiffness(&u, true).mul_vec(&du);
    let h = 1e-7;
    let shift = |s: f64| -> Vec<f64> { u.iter().zip(&du).map(|(x, d)| x + s * d).collect() };
    let fp = a.internal_force(&shift(h));
    let fm = a.internal_force(&shift(-h));
    let fd: Vec<f64> = fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * h)).collect();
    let err: Vec<f64> = fd.iter().zip(&jd).map(|(x, y)| x - y).collect();
    let rel = norm2(&err) / norm2(&jd);
    assert!(rel < 1e-6, "relative error {rel}");
    let k = a.stiffness(&u, false).mul_vec(&du);
    assert!(norm2(&k.iter().zip(&jd).map(|(x, y)| x - y).collect::<Vec<_>>()) > 1e-3 * norm2(&jd));
}

#[test]
fn newton_jacobian_is_symmetric() {
    let (g, lib) = iron_patch();
    let a = uncoupled(&g, &lib);
    let u = random_field(a.n_field(), 2.0e-2, 3);
    let j = a.stiffness(&u, true);
    assert!(j.asymmetry() < 1e-12 * j.max_abs());
}

#[test]
fn linear_jacobian_equals_stiffness() {
    let (g, _) = iron_patch();
    let a = uncoupled(&g, &MaterialLibrary::linear(1000.0, 1.05).unwrap());
    let u = random_field(a.n_field(), 2.0e-2, 3);
    assert_eq!(a.stiffness(&u, true), a.stiffness(&u, false));
}

#[test]
fn nonlinear_magnets_are_rejected() {
    let (g, _) = iron_patch();
    let mut lib = MaterialLibrary::nonlinear(1.05).unwrap();
    lib.magnet = lib.iron.clone();
    assert!(Assembler::new(&g, &lib, &Harmonics::default()).is_err());
}

fn machine_assembler() -> (iga_motor::geometry::MachineGeometry, Assembler) {
    let m = build_geometry(&ParameterSet::initial(), &GeometryOptions::default()).unwrap();
    let lib = MaterialLibrary::linear(1000.0, 1.05).unwrap();
    let a = Assembler::new(&m.geometry, &lib, &Harmonics::default()).unwrap();
    (m, a)
}

#[test]
fn antiperiodic_fold_flips_sign() {
    let (m, a) = machine_assembler();
    let u = random_field(a.n_field(), 1.0, 11);
    let cp = a.dofs.expand(&u);
    assert!(!m.geometry.links.is_empty());
    for l in &m.geometry.links {
        assert_eq!(l.sign, -1.0);
        assert_eq!(cp[l.slave], -cp[l.master]);
        let (ps, pm) = (
            m.geometry.control_points()[l.slave],
            m.geometry.control_points()[l.master],
        );
        // the slave sits on the cut a quarter turn away from its master
        let rot = [-pm[1], pm[0]];
        assert!((ps[0] - rot[0]).hypot(ps[1] - rot[1]) < 1e-12);
    }
}

#[test]
fn saddle_matrix_reproduces_linear_residual() {
    let (m, a) = machine_assembler();
    assert_eq!(a.n_multipliers(), 52);
    let beta = 0.123;
    let x = random_field(a.size(), 1e-2, 5);
    let exc = ExcitationState {
        beta,
        phi0: 0.3,
        current: 10.0,
        n_wind: 20.0,
        coil_area: m.coil_area,
        pole_pairs: 2,
    };
    let b = a.rhs(&exc).unwrap();
    let s = a.system_matrix(&x, beta, false);
    assert!(s.asymmetry() <= 1e-12 * s.max_abs());
    let ax = s.mul_vec(&x);
    let r = a.residual(&x, beta, &b);
    let diff: Vec<f64> = ax.iter().zip(&b).zip(&r).map(|((p, q), s)| p - q - s).collect();
    assert!(norm2(&diff) < 1e-10 * norm2(&ax));
}

#[test]
fn torque_gradient_matches_difference_quotient() {
    let (_, a) = machine_assembler();
    let x = random_field(a.size(), 1e-2, 9);
    let beta = 0.05;
    let g = a.torque_gradient(&x, beta, 0.035);
    let dx = random_field(a.size(), 1.0, 10);
    let h = 1e-6;
    let t = |s: f64| {
        let y: Vec<f64> = x.iter().zip(&dx).map(|(p, d)| p + s * d).collect();
        a.torque(&y, beta, 0.035)
    };
    let fd = (t(h) - t(-h)) / (2.0 * h);
    let an: f64 = g.iter().zip(&dx).map(|(p, q)| p * q).sum();
    assert!((fd - an).abs() < 1e-7 * an.abs(), "{fd} vs {an}");
    assert_eq!(a.torque(&vec![0.0; a.size()], beta, 0.035), 0.0);
}
