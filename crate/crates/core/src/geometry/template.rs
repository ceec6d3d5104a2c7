//! Parametric quarter-machine template: one rotor pole with a V pair of
//! magnets, air slits at the magnet tips and a q-axis pocket, and a stator
//! sector with six slots.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::lattice::{build_side, EdgeKind, Lattice, SideMesh};
use super::params::*;
use crate::error::{Error, Result};
use crate::materials::MaterialTag;
use crate::splines::{BoundaryTag, CpLink, ExcitationSpec, MagnetSpec, MultiPatchGeometry, Region, Side};

/// Vertex rows of the rotor half-pole lattice.
pub const ROTOR_ROWS: usize = 6;
/// Vertex columns of the rotor half-pole lattice, d-axis first.
pub const ROTOR_COLS: usize = 7;
/// Row index of the rotor surface.
pub const SURFACE_ROW: usize = 4;

const SHAFT_ANGLES_DEG: [f64; ROTOR_COLS] = [0.0, 6.0, 34.0, 36.5, 39.5, 42.5, 45.0];
const AIRGAP_ANGLES_DEG: [f64; ROTOR_COLS] = [0.0, 3.5, 28.5, 31.0, 36.0, 44.0, 45.0];
const SLOTS_PER_SECTOR: usize = 6;
/// Phase index and winding direction of the slots in one pole pitch.
const WINDING: [(usize, f64); SLOTS_PER_SECTOR] =
    [(0, 1.0), (0, 1.0), (2, -1.0), (2, -1.0), (1, 1.0), (1, 1.0)];

/// Construction options that are not design parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Remanence magnitude in tesla.
    pub br: f64,
    /// Radius of the sliding interface in meters.
    pub airgap_radius: f64,
    /// Build all four poles instead of one quarter with antiperiodic cuts.
    pub full_machine: bool,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            br: 1.0,
            airgap_radius: 50.5e-3,
            full_machine: false,
        }
    }
}

/// Half-pole rotor vertices in the pole frame `(a, t)`, `a` along the d-axis.
pub type RotorHalf = [[[f64; 2]; ROTOR_COLS]; ROTOR_ROWS];

fn pol(r: f64, phi: f64) -> [f64; 2] {
    [r * phi.cos(), r * phi.sin()]
}

pub(crate) fn radius(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

pub(crate) fn angle(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0])
}

fn add(p: [f64; 2], s: f64, d: [f64; 2]) -> [f64; 2] {
    [p[0] + s * d[0], p[1] + s * d[1]]
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Magnet corner points `[P0, P1, P2, P3]`: P0/P1 inner long side, P2/P3 outer.
pub fn magnet_corners(p: &ParameterSet) -> [[f64; 2]; 4] {
    let (e, n) = magnet_axes(p);
    let wmag = p.si(WMAG);
    let p2 = [p.si(DMAG) + wmag * n[0], 0.5 * p.si(MT1)];
    let p0 = add(p2, -wmag, n);
    let p1 = add(p0, p.si(MW1), e);
    let p3 = add(p1, wmag, n);
    [p0, p1, p2, p3]
}

/// Long-side direction `e` and outward normal `n` of the `t > 0` magnet.
fn magnet_axes(p: &ParameterSet) -> ([f64; 2], [f64; 2]) {
    let delta = 0.5 * (PI - p.si(MA));
    ([delta.sin(), delta.cos()], [delta.cos(), -delta.sin()])
}

/// Rotor half-pole vertices for the given parameters.
pub fn rotor_half(p: &ParameterSet) -> Result<RotorHalf> {
    let r_ro = 0.5 * p.fixed_si("RD1")?;
    let r_sh = 0.5 * p.fixed_si("RD2")?;
    let mm = 1e-3;
    let (e, n) = magnet_axes(p);
    let [p0, p1, p2, p3] = magnet_corners(p);
    let q = [FRAC_PI_4.cos(), FRAC_PI_4.sin()];
    let q_perp = [q[1], -q[0]];
    let rib = (1.0 + p.value(RW3)) * mm;
    let qpoint = |s: f64, off: f64| [s * q[0] + off * q_perp[0], s * q[1] + off * q_perp[1]];

    let surf_q = r_ro - p.si(RS);
    let pocket_top = r_ro - p.si(RS) - 1.5 * mm - p.si(RW5);
    let pocket_bottom = pocket_top - (1.0 + p.value(RW4)) * mm;
    let bridge_q = pocket_top + 0.3 * (surf_q - pocket_top);

    let mut v = [[[0.0; 2]; ROTOR_COLS]; ROTOR_ROWS];
    for (c, deg) in SHAFT_ANGLES_DEG.iter().enumerate() {
        v[0][c] = pol(r_sh, deg.to_radians());
    }
    // magnet bottom line
    v[1][0] = [p.si(DMAG), 0.0];
    v[1][1] = p0;
    v[1][2] = p1;
    v[1][3] = add(p1, 0.4 * p.si(LSLIT1), e);
    v[1][5] = qpoint(pocket_bottom, rib);
    v[1][6] = qpoint(pocket_bottom, 0.0);
    v[1][4] = mid(v[1][3], v[1][5]);
    // magnet top line
    v[2][0] = [p2[0], 0.0];
    v[2][1] = p2;
    v[2][2] = p3;
    v[2][3] = add(p3, 0.4 * p.si(LSLIT2), e);
    v[2][5] = qpoint(pocket_top, rib);
    v[2][6] = qpoint(pocket_top, 0.0);
    v[2][4] = mid(v[2][3], v[2][5]);
    // bridge line
    let r_bridge = 0.5 * (p2[0] + r_ro);
    v[3][0] = pol(r_bridge, 0.0);
    v[3][1] = pol(r_bridge, angle(p2));
    v[3][2] = add(p3, p.si(DSLIT6), n);
    v[3][3] = add(v[2][3], p.si(DSLIT5), n);
    v[3][5] = qpoint(bridge_q, rib);
    v[3][6] = qpoint(bridge_q, 0.0);
    v[3][4] = mid(v[3][3], v[3][5]);
    // rotor surface
    for c in 0..4 {
        v[4][c] = pol(r_ro, angle(v[3][c]));
    }
    v[4][0] = pol(r_ro, 0.0);
    v[4][4] = pol(r_ro, 0.25 * p.si(RA1));
    v[4][5] = pol(r_ro - 0.25 * p.si(RW2) * p.value(RS), 0.25 * p.si(RA2));
    v[4][6] = pol(surf_q, FRAC_PI_4);
    Ok(v)
}

pub(crate) fn to_global(p: [f64; 2], mirror: bool) -> [f64; 2] {
    let t = if mirror { -p[1] } else { p[1] };
    let (s, c) = FRAC_PI_4.sin_cos();
    [p[0] * c - t * s, p[0] * s + t * c]
}

/// Full-pole rotor lattice (13 vertex columns from θ = 0 to θ = π/2).
pub fn rotor_lattice(p: &ParameterSet, opts: &GeometryOptions) -> Result<Lattice> {
    let mut half = rotor_half(p)?;
    for (c, deg) in AIRGAP_ANGLES_DEG.iter().enumerate() {
        half[5][c] = pol(opts.airgap_radius, deg.to_radians());
    }
    let ncol = 2 * ROTOR_COLS - 1;
    let mut vertices = vec![vec![[0.0; 2]; ncol]; ROTOR_ROWS];
    for r in 0..ROTOR_ROWS {
        for k in 0..ROTOR_COLS {
            vertices[r][ROTOR_COLS - 1 - k] = to_global(half[r][k], true);
            vertices[r][ROTOR_COLS - 1 + k] = to_global(half[r][k], false);
        }
        // the d-axis column lies on the mirror line
        vertices[r][ROTOR_COLS - 1] = to_global([half[r][0][0], 0.0], false);
    }
    let half_kind = |r: usize, k: usize| match r {
        0 | 4 | 5 => EdgeKind::Arc,
        3 if k == 0 => EdgeKind::Arc,
        _ => EdgeKind::Line,
    };
    let alpha_pos = 0.5 * p.si(MA) - FRAC_PI_4;
    let alpha_neg = 3.0 * FRAC_PI_4 - 0.5 * p.si(MA);
    let half_cell = |r: usize, k: usize, mirror: bool| -> (MaterialTag, Region) {
        let iron = (MaterialTag::Iron, Region::Passive);
        let air = (MaterialTag::Air, Region::Passive);
        match (r, k) {
            (1, 1) => (
                MaterialTag::Magnet,
                Region::Magnet(MagnetSpec {
                    br: opts.br,
                    alpha: if mirror { alpha_neg } else { alpha_pos },
                }),
            ),
            (1, 2) | (2, 2) => air,
            (1, 5) => air,
            (4, _) => air,
            _ => iron,
        }
    };
    let nh = ROTOR_COLS - 1;
    let mut row_edges: Vec<Vec<_>> = (0..ROTOR_ROWS).map(|_| Vec::with_capacity(2 * nh)).collect();
    for (r, edges) in row_edges.iter_mut().enumerate() {
        for c in 0..2 * nh {
            let k = if c < nh { nh - 1 - c } else { c - nh };
            edges.push(half_kind(r, k));
        }
    }
    let mut cells: Vec<Vec<_>> = (0..ROTOR_ROWS - 1).map(|_| Vec::with_capacity(2 * nh)).collect();
    for (r, row) in cells.iter_mut().enumerate() {
        for c in 0..2 * nh {
            if c < nh {
                row.push(half_cell(r, nh - 1 - c, true));
            } else {
                row.push(half_cell(r, c - nh, false));
            }
        }
    }
    Ok(Lattice {
        side: Side::Rotor,
        vertices,
        row_edges,
        cells,
        polar_rows: vec![false, false, false, true, true],
        row_knots: vec![1, 0, 0, 0, 0],
        col_knots: vec![3; 2 * nh],
        inner_tag: Some(BoundaryTag::Dirichlet),
        outer_tag: Some(BoundaryTag::Airgap),
        cut_tag: Some(BoundaryTag::Antiperiodic),
        periodic: false,
    })
}

/// Stator sector lattice with six slots.
pub fn stator_lattice(p: &ParameterSet, opts: &GeometryOptions) -> Result<Lattice> {
    let bore = 0.5 * p.fixed_si("SD2")?;
    let radii = [
        opts.airgap_radius,
        bore,
        bore + p.fixed_si("ST")?,
        bore + p.fixed_si("SW4")?,
        0.5 * p.fixed_si("SD1")?,
    ];
    if !radii.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::GeometryInfeasible(
            "stator radii are not increasing".into(),
        ));
    }
    let half_width = [
        0.5 * p.fixed_si("SW2")?,
        0.5 * p.fixed_si("SW2")?,
        0.5 * p.fixed_si("SW1")?,
        0.5 * p.fixed_si("SW1")?,
        0.5 * p.fixed_si("SW1")?,
    ];
    let pitch = FRAC_PI_2 / SLOTS_PER_SECTOR as f64;
    let mut vertices = vec![Vec::new(); radii.len()];
    for (r, row) in vertices.iter_mut().enumerate() {
        let hw = (half_width[r] / radii[r]).asin();
        for s in 0..SLOTS_PER_SECTOR {
            let th = s as f64 * pitch;
            row.push(pol(radii[r], th));
            row.push(pol(radii[r], th + 0.5 * pitch - hw));
            row.push(pol(radii[r], th + 0.5 * pitch + hw));
        }
        row.push(pol(radii[r], FRAC_PI_2));
    }
    let ncell = 3 * SLOTS_PER_SECTOR;
    let iron = (MaterialTag::Iron, Region::Passive);
    let air = (MaterialTag::Air, Region::Passive);
    let mut cells = vec![vec![air; ncell], Vec::new(), Vec::new(), vec![iron; ncell]];
    for &(phase, sign) in WINDING.iter() {
        cells[1].extend([iron, air, iron]);
        cells[2].extend([
            iron,
            (MaterialTag::Coil, Region::Coil(ExcitationSpec { phase, sign })),
            iron,
        ]);
    }
    Ok(Lattice {
        side: Side::Stator,
        vertices,
        row_edges: vec![vec![EdgeKind::Arc; ncell]; radii.len()],
        cells,
        polar_rows: vec![false; 4],
        row_knots: vec![0, 0, 1, 1],
        col_knots: vec![1; ncell],
        inner_tag: Some(BoundaryTag::Airgap),
        outer_tag: Some(BoundaryTag::Dirichlet),
        cut_tag: Some(BoundaryTag::Antiperiodic),
        periodic: false,
    })
}

/// Control-point grid layout of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct SideIndex {
    pub offset: usize,
    pub ni: usize,
    pub nj: usize,
    pub row_index: Vec<usize>,
    pub col_index: Vec<usize>,
}

impl SideIndex {
    fn from_mesh(m: &SideMesh) -> Self {
        Self {
            offset: m.offset,
            ni: m.ni,
            nj: m.nj,
            row_index: m.row_index.clone(),
            col_index: m.col_index.clone(),
        }
    }

    pub fn id(&self, i: usize, j: usize) -> usize {
        self.offset + i + self.ni * (j % self.nj)
    }
}

/// Built machine: the multipatch domain plus template bookkeeping.
#[derive(Debug, Clone)]
pub struct MachineGeometry {
    pub geometry: MultiPatchGeometry,
    pub params: ParameterSet,
    pub options: GeometryOptions,
    pub rotor: SideIndex,
    pub stator: SideIndex,
    /// Rotor surface control points in increasing angle.
    pub surface_cps: Vec<usize>,
    /// Polar angles of the surface control points of the initial design.
    pub surface_angles: Vec<f64>,
    /// Area of one coil patch in m².
    pub coil_area: f64,
    /// Half-pole rotor vertices in the pole frame.
    pub rotor_half: RotorHalf,
}

impl MachineGeometry {
    /// Row-3 patches of the first pole; their East edges (`ξ = 1`) trace
    /// the rotor surface.
    pub fn surface_patches(&self) -> Vec<usize> {
        let nc = self.rotor.col_index.len() - 1;
        (0..2 * (ROTOR_COLS - 1))
            .map(|c| (SURFACE_ROW - 1) * nc + c)
            .collect()
    }
}

fn nominal(p: &ParameterSet) -> ParameterSet {
    let mut n = p.clone();
    for (q, init) in n.free.iter_mut().zip(ParameterSet::initial().free) {
        q.value = init.value;
    }
    n
}

/// Builds the machine from validated parameters. Arc weights are frozen at
/// the initial design so that weights never depend on the parameters.
pub fn build_geometry(p: &ParameterSet, opts: &GeometryOptions) -> Result<MachineGeometry> {
    build_impl(p, opts, true)
}

/// Same as [`build_geometry`] without the orientation check, for evaluating
/// constraints of designs whose patches may be inverted.
pub fn build_geometry_unchecked(p: &ParameterSet, opts: &GeometryOptions) -> Result<MachineGeometry> {
    build_impl(p, opts, false)
}

fn build_impl(p: &ParameterSet, opts: &GeometryOptions, check: bool) -> Result<MachineGeometry> {
    p.validate()?;
    let nom = nominal(p);
    let mut rl = rotor_lattice(p, opts)?;
    let mut rl_nom = rotor_lattice(&nom, opts)?;
    let mut sl = stator_lattice(p, opts)?;
    if opts.full_machine {
        rl = rl.tile(4, FRAC_PI_2, true);
        rl_nom = rl_nom.tile(4, FRAC_PI_2, true);
        sl = sl.tile(4, FRAC_PI_2, true);
    }
    let w_nom = rl_nom.arc_weights();
    let rm = build_side(&rl, &w_nom, 0)?;
    let rm_nom = build_side(&rl_nom, &w_nom, 0)?;
    let i_s = rm.row_index[SURFACE_ROW];
    let surface_angles = (0..rm.nj)
        .map(|j| angle(rm_nom.control_points[rm_nom.id(i_s, j)]))
        .collect();
    let sm = build_side(&sl, &sl.arc_weights(), rm.control_points.len())?;

    let mut links = Vec::new();
    if !opts.full_machine {
        for m in [&rm, &sm] {
            for i in 0..m.ni {
                links.push(CpLink {
                    slave: m.id(i, m.nj - 1),
                    master: m.id(i, 0),
                    sign: -1.0,
                });
            }
        }
    }
    let mut cps = rm.control_points.clone();
    cps.extend_from_slice(&sm.control_points);
    let mut sides = vec![Side::Rotor; rm.control_points.len()];
    sides.extend(std::iter::repeat_n(Side::Stator, sm.control_points.len()));
    let rotor = SideIndex::from_mesh(&rm);
    let stator = SideIndex::from_mesh(&sm);
    let mut patches = rm.patches;
    patches.extend(sm.patches);
    let geometry = MultiPatchGeometry::new(patches, cps, sides, links, opts.airgap_radius)?;
    if check {
        geometry.check_orientation().map_err(|e| match e {
            Error::Geometry { patch, message, .. } => {
                Error::GeometryInfeasible(format!("patch {patch}: {message}"))
            }
            other => other,
        })?;
    }
    let coil_area = geometry
        .patches
        .iter()
        .position(|e| matches!(e.region, Region::Coil(_)))
        .map(|i| geometry.patch_area(i))
        .unwrap_or(0.0);
    let surface_cps = (0..rotor.nj).map(|j| rotor.id(i_s, j)).collect();
    Ok(MachineGeometry {
        geometry,
        params: p.clone(),
        options: *opts,
        rotor,
        stator,
        surface_cps,
        surface_angles,
        coil_area,
        rotor_half: rotor_half(p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::PatchEdge;

    #[test]
    fn initial_design_builds() {
        let g = build_geometry(&ParameterSet::initial(), &GeometryOptions::default()).unwrap();
        assert_eq!(g.surface_cps.len(), 61);
        assert_eq!(g.rotor.nj, 61);
        assert_eq!(g.stator.nj, 55);
        let magnets: Vec<_> = g
            .geometry
            .patches
            .iter()
            .enumerate()
            .filter(|(_, e)| e.material == MaterialTag::Magnet)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(magnets.len(), 2);
        let area: f64 = magnets.iter().map(|&i| g.geometry.patch_area(i)).sum();
        assert!((area - 1.76e-4).abs() < 1e-15, "{area}");
    }

    #[test]
    fn airgap_traces_lie_on_the_circle() {
        let g = build_geometry(&ParameterSet::initial(), &GeometryOptions::default()).unwrap();
        for side in [Side::Rotor, Side::Stator] {
            let edges = g.geometry.airgap_edges(side);
            assert_eq!(edges.len(), if side == Side::Rotor { 12 } else { 18 });
            for (pi, edge) in edges {
                let patch = &g.geometry.patches[pi].patch;
                let xi = if edge == PatchEdge::East { 1.0 } else { 0.0 };
                for k in 0..=20 {
                    let m = patch.evaluate_mapping([xi, k as f64 / 20.0]).unwrap();
                    assert!((radius(m.x) - 50.5e-3).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn full_machine_builds() {
        let opts = GeometryOptions {
            full_machine: true,
            ..Default::default()
        };
        let g = build_geometry(&ParameterSet::initial(), &opts).unwrap();
        assert_eq!(g.rotor.nj, 240);
        assert_eq!(g.stator.nj, 216);
        assert!(g.geometry.links.is_empty());
    }
}
