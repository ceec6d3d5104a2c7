use serde::{Deserialize, Serialize};

use super::NurbsPatch;
use crate::error::{Error, Result};
use crate::materials::MaterialTag;
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Rotor,
    Stator,
}

/// Permanent-magnet data: remanence magnitude in tesla and direction in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetSpec {
    pub br: f64,
    pub alpha: f64,
}

/// Coil data: phase index `k ∈ {0, 1, 2}` and winding direction `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub phase: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Passive,
    Magnet(MagnetSpec),
    Coil(ExcitationSpec),
}

/// Patch edge: West `ξ = 0`, East `ξ = 1`, South `η = 0`, North `η = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchEdge {
    West,
    East,
    South,
    North,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Antiperiodic,
    Airgap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub patch: NurbsPatch,
    pub material: MaterialTag,
    pub region: Region,
    pub side: Side,
    /// Global control-point id of every local control point.
    pub cp_ids: Vec<usize>,
    pub boundary: Vec<(PatchEdge, BoundaryTag)>,
}

impl PatchEntry {
    /// Local control-point indices along an edge, in increasing parameter order.
    pub fn edge_local_indices(&self, edge: PatchEdge) -> Vec<usize> {
        let (nu, nv) = self.patch.basis.size();
        match edge {
            PatchEdge::West => (0..nv).map(|j| nu * j).collect(),
            PatchEdge::East => (0..nv).map(|j| nu - 1 + nu * j).collect(),
            PatchEdge::South => (0..nu).collect(),
            PatchEdge::North => (0..nu).map(|i| i + nu * (nv - 1)).collect(),
        }
    }

    pub fn tag_of(&self, edge: PatchEdge) -> Option<BoundaryTag> {
        self.boundary.iter().find(|(e, _)| *e == edge).map(|(_, t)| *t)
    }
}

/// Identification `u_slave = sign · u_master` between two control points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpLink {
    pub slave: usize,
    pub master: usize,
    pub sign: f64,
}

/// Conforming multipatch domain with a single global control-point array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPatchGeometry {
    pub patches: Vec<PatchEntry>,
    control_points: Vec<[f64; 2]>,
    pub cp_side: Vec<Side>,
    pub dirichlet: Vec<bool>,
    pub links: Vec<CpLink>,
    pub airgap_radius: f64,
}

impl MultiPatchGeometry {
    pub fn new(
        patches: Vec<PatchEntry>,
        control_points: Vec<[f64; 2]>,
        cp_side: Vec<Side>,
        links: Vec<CpLink>,
        airgap_radius: f64,
    ) -> Result<Self> {
        let n = control_points.len();
        if cp_side.len() != n {
            return Err(Error::Domain("one side label per control point required".into()));
        }
        let mut dirichlet = vec![false; n];
        for (pi, p) in patches.iter().enumerate() {
            if p.cp_ids.len() != p.patch.control_points.len() {
                return Err(Error::Domain(format!("patch {pi}: id map length mismatch")));
            }
            for (l, &g) in p.cp_ids.iter().enumerate() {
                if g >= n || p.patch.control_points[l] != control_points[g] {
                    return Err(Error::Domain(format!(
                        "patch {pi}: local control point {l} disagrees with global {g}"
                    )));
                }
            }
            for &(edge, tag) in &p.boundary {
                if tag == BoundaryTag::Dirichlet {
                    for l in p.edge_local_indices(edge) {
                        dirichlet[p.cp_ids[l]] = true;
                    }
                }
            }
        }
        Ok(Self {
            patches,
            control_points,
            cp_side,
            dirichlet,
            links,
            airgap_radius,
        })
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.control_points
    }

    pub fn num_control_points(&self) -> usize {
        self.control_points.len()
    }

    /// Replaces all control points and updates the patch-local copies.
    pub fn set_control_points(&mut self, cps: Vec<[f64; 2]>) -> Result<()> {
        if cps.len() != self.control_points.len() {
            return Err(Error::Contract("control point count changed".into()));
        }
        for p in &mut self.patches {
            for (l, &g) in p.cp_ids.iter().enumerate() {
                p.patch.control_points[l] = cps[g];
            }
        }
        self.control_points = cps;
        Ok(())
    }

    /// `(patch index, edge)` pairs tagged as air-gap interface on one side.
    pub fn airgap_edges(&self, side: Side) -> Vec<(usize, PatchEdge)> {
        let mut out = Vec::new();
        for (i, p) in self.patches.iter().enumerate() {
            if p.side == side {
                for &(e, t) in &p.boundary {
                    if t == BoundaryTag::Airgap {
                        out.push((i, e));
                    }
                }
            }
        }
        out
    }

    /// Rotates all control points of one side about the origin; magnet
    /// directions on that side turn with the geometry.
    pub fn rotate_side(&mut self, side: Side, angle: f64) {
        let (s, c) = angle.sin_cos();
        let cps: Vec<[f64; 2]> = self
            .control_points
            .iter()
            .zip(&self.cp_side)
            .map(|(p, &sd)| {
                if sd == side {
                    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
                } else {
                    *p
                }
            })
            .collect();
        self.set_control_points(cps).expect("same length");
        for p in &mut self.patches {
            if p.side == side {
                if let Region::Magnet(m) = &mut p.region {
                    m.alpha += angle;
                }
            }
        }
    }

    /// Checks `det(J_F) > 0` at the Gauss points of every element.
    pub fn check_orientation(&self) -> Result<()> {
        for (pi, entry) in self.patches.iter().enumerate() {
            let basis = &entry.patch.basis;
            let pu = basis.knot_u.degree();
            let pv = basis.knot_v.degree();
            let (xu, _) = gauss_legendre(pu + 1);
            let (xv, _) = gauss_legendre(pv + 1);
            for (su, a, b) in basis.knot_u.elements() {
                for (sv, c, d) in basis.knot_v.elements() {
                    for &gu in &xu {
                        for &gv in &xv {
                            let pt = [
                                0.5 * (a + b) + 0.5 * (b - a) * gu,
                                0.5 * (c + d) + 0.5 * (d - c) * gv,
                            ];
                            let e = basis.evaluate_in_span(su, sv, pt);
                            let m = entry.patch.map_from_basis(&e);
                            if !(m.det > 0.0) {
                                return Err(Error::Geometry {
                                    patch: pi,
                                    xi: pt[0],
                                    eta: pt[1],
                                    message: format!("det(J_F) = {:e} is not positive", m.det),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Area of one patch by Gauss quadrature.
    pub fn patch_area(&self, patch: usize) -> f64 {
        let entry = &self.patches[patch];
        let basis = &entry.patch.basis;
        let (xu, wu) = gauss_legendre(basis.knot_u.degree() + 2);
        let (xv, wv) = gauss_legendre(basis.knot_v.degree() + 2);
        let mut area = 0.0;
        for (su, a, b) in basis.knot_u.elements() {
            for (sv, c, d) in basis.knot_v.elements() {
                for (gu, wgu) in xu.iter().zip(&wu) {
                    for (gv, wgv) in xv.iter().zip(&wv) {
                        let pt = [
                            0.5 * (a + b) + 0.5 * (b - a) * gu,
                            0.5 * (c + d) + 0.5 * (d - c) * gv,
                        ];
                        let e = basis.evaluate_in_span(su, sv, pt);
                        let m = entry.patch.map_from_basis(&e);
                        area += m.det * wgu * wgv * 0.25 * (b - a) * (d - c);
                    }
                }
            }
        }
        area
    }
}
