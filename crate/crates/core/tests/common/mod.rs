//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use iga_motor::assembly::{Assembler, ExcitationState, Harmonics, QuadCache};
use iga_motor::geometry::{build_geometry, GeometryOptions, MachineGeometry, ParameterSet};
use iga_motor::materials::{MaterialLibrary, MaterialTag, ReluctivityModel};
use iga_motor::quadrature::gauss_legendre;
use iga_motor::solver::{solve_magnetostatic, torque, NewtonOptions, SaddleSolver};
use iga_motor::splines::primitives::{annulus_sector, annulus_sector_bilinear, glue, PatchSpec};
use iga_motor::splines::{BoundaryTag, MultiPatchGeometry, NurbsPatch, PatchEdge, Region, Side};

pub const LENGTH: f64 = 0.035;

pub fn unit_library() -> MaterialLibrary {
    let m = ReluctivityModel::Linear { nu: 1.0 };
    MaterialLibrary {
        iron: m.clone(),
        magnet: m.clone(),
        air: m.clone(),
        coil: m,
    }
}

pub fn linear_library() -> MaterialLibrary {
    MaterialLibrary::linear(1000.0, 1.05).unwrap()
}

pub fn nonlinear_library() -> MaterialLibrary {
    MaterialLibrary::nonlinear(1.05).unwrap()
}

pub fn tight() -> NewtonOptions {
    NewtonOptions {
        tol_rel: 1e-13,
        tol_abs: 1e-14,
        ..Default::default()
    }
}

pub fn nominal_machine() -> MachineGeometry {
    build_geometry(&ParameterSet::initial(), &GeometryOptions::default()).unwrap()
}

pub fn excitation(m: &MachineGeometry, beta: f64) -> ExcitationState {
    ExcitationState {
        beta,
        phi0: 0.0,
        current: 3.0,
        n_wind: 35.0,
        coil_area: m.coil_area,
        pole_pairs: 2,
    }
}

/// Torque at `β` on an arbitrary multipatch domain, with the currents of
/// rotation angle `exc.beta` and the coupling rotated by `beta`.
pub fn torque_at(
    geom: &MultiPatchGeometry,
    lib: &MaterialLibrary,
    exc: &ExcitationState,
    beta: f64,
    opts: &NewtonOptions,
) -> f64 {
    let a = Assembler::new(geom, lib, &Harmonics::default()).unwrap();
    let s = SaddleSolver::new(&a).unwrap();
    let sol = solve_magnetostatic(&a, &s, &a.rhs(exc).unwrap(), beta, None, opts).unwrap();
    torque(&a, &sol, LENGTH)
}

/// Manufactured field on the sector `r ∈ [r0, r1]`, `θ ∈ [0, π/2]`, vanishing
/// on the whole boundary, and its source `−Δu`.
pub struct Manufactured {
    pub r0: f64,
    pub r1: f64,
}

impl Manufactured {
    fn polar(p: [f64; 2]) -> (f64, f64) {
        (p[0].hypot(p[1]), p[1].atan2(p[0]))
    }

    pub fn exact(&self, p: [f64; 2]) -> f64 {
        let (r, t) = Self::polar(p);
        let s = PI / (self.r1 - self.r0);
        (s * (r - self.r0)).sin() * (2.0 * t).sin()
    }

    pub fn source(&self, p: [f64; 2]) -> f64 {
        let (r, t) = Self::polar(p);
        let s = PI / (self.r1 - self.r0);
        let phi = s * (r - self.r0);
        (s * s * phi.sin() - s * phi.cos() / r + 4.0 * phi.sin() / (r * r)) * (2.0 * t).sin()
    }
}

/// L2 error of the Galerkin solution on an `n × n` mesh of degree `p`.
pub fn manufactured_error(p: usize, n: usize) -> f64 {
    let mms = Manufactured { r0: 1.0, r1: 2.0 };
    let patch = match p {
        1 => annulus_sector_bilinear(mms.r0, mms.r1, 0.0, FRAC_PI_2, n, n).unwrap(),
        2 => annulus_sector(mms.r0, mms.r1, 0.0, FRAC_PI_2, n, n).unwrap(),
        _ => panic!("degree {p} not covered"),
    };
    let geom = glue(
        vec![PatchSpec {
            patch,
            material: MaterialTag::Air,
            region: Region::Passive,
            side: Side::Stator,
            boundary: [
                PatchEdge::West,
                PatchEdge::East,
                PatchEdge::South,
                PatchEdge::North,
            ]
            .into_iter()
            .map(|e| (e, BoundaryTag::Dirichlet))
            .collect(),
        }],
        1.0,
        1e-12,
    )
    .unwrap();
    let a = Assembler::new(&geom, &unit_library(), &Harmonics::first(1)).unwrap();
    assert_eq!(a.n_multipliers(), 0);
    let s = SaddleSolver::new(&a).unwrap();
    let b = a.load(|x| mms.source(x));
    let sol = solve_magnetostatic(&a, &s, &b, 0.0, None, &NewtonOptions::default()).unwrap();
    let u_cp = a.dofs.expand(sol.u());
    let fine = QuadCache::new(&geom, 3).unwrap();
    let mut err = 0.0;
    for el in &fine.elements {
        for q in 0..el.np {
            let d = el.value(q, &u_cp) - mms.exact(el.points[q]);
            err += el.weights[q] * d * d;
        }
    }
    err.sqrt()
}

/// Least-squares slope of `log e` against `log h`.
pub fn observed_order(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn ring(
    r0: f64,
    r1: f64,
    side: Side,
    inner: BoundaryTag,
    outer: BoundaryTag,
    nr: usize,
    nt: usize,
) -> Vec<PatchSpec> {
    (0..4)
        .map(|q| {
            let t0 = q as f64 * FRAC_PI_2;
            PatchSpec {
                patch: annulus_sector(r0, r1, t0, t0 + FRAC_PI_2, nr, nt).unwrap(),
                material: MaterialTag::Air,
                region: Region::Passive,
                side,
                boundary: vec![(PatchEdge::West, inner), (PatchEdge::East, outer)],
            }
        })
        .collect()
}

/// `∫_Γ (Σ c_i N_i)² ds` over the East edges of the given patches, with
/// control-point values `c`.
fn trace_l2_squared(geom: &MultiPatchGeometry, patches: &[usize], c: &[f64]) -> f64 {
    let mut s = 0.0;
    for &pi in patches {
        let entry = &geom.patches[pi];
        let basis = &entry.patch.basis;
        let (gx, gw) = gauss_legendre(8);
        for (_, a, b) in basis.knot_v.elements() {
            for (x, w) in gx.iter().zip(&gw) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let e = basis.evaluate([1.0, t], 1).unwrap();
                let m = entry.patch.evaluate_mapping([1.0, t]).unwrap();
                let ds = m.jacobian[0][1].hypot(m.jacobian[1][1]) * w * 0.5 * (b - a);
                let v: f64 = e
                    .indices
                    .iter()
                    .zip(&e.values)
                    .map(|(l, n)| n * c[entry.cp_ids[*l]])
                    .sum();
                s += v * v * ds;
            }
        }
    }
    s
}

/// Relative L2 difference of the rotor interface trace between the coupled
/// two-domain solve with `harmonics` and the monolithic solve.
pub fn mortar_trace_difference(harmonics: usize, nt: usize) -> f64 {
    let (r0, r1, r2) = (0.3, 0.5, 0.8);
    let source = |p: [f64; 2]| {
        let (r, t) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
        let bump = ((r - r0) * (r2 - r)).max(0.0);
        // quarter-antiperiodic projection of a peaked profile, all orders 2 mod 4
        let g = |s: f64| (20.0 * ((s - 0.4).cos() - 1.0)).exp();
        let a: f64 = (0..4)
            .map(|k| (-1f64).powi(k) * g(t + k as f64 * FRAC_PI_2))
            .sum();
        bump * a
    };
    let mut coupled = ring(
        r0,
        r1,
        Side::Rotor,
        BoundaryTag::Dirichlet,
        BoundaryTag::Airgap,
        4,
        nt,
    );
    coupled.extend(ring(
        r1,
        r2,
        Side::Stator,
        BoundaryTag::Airgap,
        BoundaryTag::Dirichlet,
        4,
        nt,
    ));
    let gc = glue(coupled, r1, 1e-12).unwrap();
    let inner = BoundaryTag::Dirichlet;
    let mut mono: Vec<PatchSpec> = ring(r0, r1, Side::Stator, inner, inner, 4, nt);
    for s in &mut mono {
        s.boundary.retain(|(e, _)| *e == PatchEdge::West);
    }
    let mut outer = ring(r1, r2, Side::Stator, inner, inner, 4, nt);
    for s in &mut outer {
        s.boundary.retain(|(e, _)| *e == PatchEdge::East);
    }
    mono.extend(outer);
    let gm = glue(mono, r1, 1e-12).unwrap();

    let solve = |g: &MultiPatchGeometry, h: &Harmonics| {
        let a = Assembler::new(g, &unit_library(), h).unwrap();
        let s = SaddleSolver::new(&a).unwrap();
        let mut b = a.load(source);
        b.resize(a.size(), 0.0);
        let sol = solve_magnetostatic(&a, &s, &b, 0.0, None, &tight()).unwrap();
        a.dofs.expand(sol.u())
    };
    let h = Harmonics::first(harmonics);
    let uc = solve(&gc, &h);
    let um = solve(&gm, &h);
    // rotor patches 0..4 carry the interface on their East edges in both domains
    let map: Vec<usize> = gc
        .control_points()
        .iter()
        .map(|p| {
            gm.control_points()
                .iter()
                .position(|q| (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-12)
                .unwrap()
        })
        .collect();
    let diff: Vec<f64> = (0..uc.len()).map(|i| uc[i] - um[map[i]]).collect();
    let reference: Vec<f64> = (0..uc.len()).map(|i| um[map[i]]).collect();
    let patches = [0, 1, 2, 3];
    (trace_l2_squared(&gc, &patches, &diff) / trace_l2_squared(&gc, &patches, &reference)).sqrt()
}

pub fn patch_count(m: &MultiPatchGeometry, side: Side) -> usize {
    m.patches.iter().filter(|p| p.side == side).count()
}

pub fn rotated_rotor(m: &MachineGeometry, angle: f64) -> MultiPatchGeometry {
    let mut g = m.geometry.clone();
    g.rotate_side(Side::Rotor, angle);
    g
}

pub fn patch_of(p: &NurbsPatch) -> usize {
    p.control_points.len()
}

/// Prepared machine with a fresh assembler and solver.
pub struct Bench {
    pub machine: MachineGeometry,
    pub asm: Assembler,
    pub solver: SaddleSolver,
}

impl Bench {
    pub fn new(machine: MachineGeometry, lib: &MaterialLibrary) -> Self {
        let asm = Assembler::new(&machine.geometry, lib, &Harmonics::default()).unwrap();
        let solver = SaddleSolver::new(&asm).unwrap();
        Self { machine, asm, solver }
    }

    pub fn solve(&self, beta: f64, opts: &NewtonOptions) -> iga_motor::solver::FieldSolution {
        let rhs = self.asm.rhs(&excitation(&self.machine, beta)).unwrap();
        solve_magnetostatic(&self.asm, &self.solver, &rhs, beta, None, opts).unwrap()
    }

    /// Minimum of `∫ w(|∇u|) − bᵀu` with the currents of angle `current_beta`
    /// and the interface at `beta`, where `w(B) = ∫₀^B ν(s) s ds`.
    pub fn potential(&self, beta: f64, current_beta: f64, opts: &NewtonOptions) -> f64 {
        let rhs = self.asm.rhs(&excitation(&self.machine, current_beta)).unwrap();
        let sol = solve_magnetostatic(&self.asm, &self.solver, &rhs, beta, None, opts).unwrap();
        let u_cp = self.asm.dofs.expand(sol.u());
        let mut w = 0.0;
        for (e, el) in self.asm.cache.elements.iter().enumerate() {
            let model = self.asm.model_of(el.patch);
            for q in 0..el.np {
                let (_, _, g) = self.asm.point_state(e, q, &u_cp);
                w += el.weights[q] * energy_density(model, g[0].hypot(g[1]));
            }
        }
        let n = self.asm.n_field();
        w - rhs[..n].iter().zip(sol.u()).map(|(b, u)| b * u).sum::<f64>()
    }
}

/// `∫₀^B ν(s) s ds` by composite Gauss–Legendre.
pub fn energy_density(model: &ReluctivityModel, b: f64) -> f64 {
    let (x, w) = gauss_legendre(6);
    let pieces = 400;
    let h = b / pieces as f64;
    let mut s = 0.0;
    for k in 0..pieces {
        for (xi, wi) in x.iter().zip(&w) {
            let t = h * (k as f64 + 0.5 + 0.5 * xi);
            s += 0.5 * h * wi * model.nu(t) * t;
        }
    }
    s
}
