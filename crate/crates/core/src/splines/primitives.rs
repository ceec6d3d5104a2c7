//! Simple patches (rectangles, annulus sectors) and a gluing helper for
//! assembling them into a conforming multipatch domain.

use super::multipatch::{BoundaryTag, MultiPatchGeometry, PatchEdge, PatchEntry, Region, Side};
use super::{BasisFunctionSet, KnotVector, NurbsPatch};
use crate::error::{Error, Result};
use crate::materials::MaterialTag;

fn interior_knots(n: usize) -> Vec<f64> {
    (1..n).map(|k| k as f64 / n as f64).collect()
}

/// Axis-aligned rectangle of degree `p` in both directions with `nx × ny`
/// uniform elements; `ξ` along x.
pub fn rectangle(lo: [f64; 2], hi: [f64; 2], p: usize, nx: usize, ny: usize) -> Result<NurbsPatch> {
    if p == 0 || nx == 0 || ny == 0 {
        return Err(Error::Domain("degree and element counts must be positive".into()));
    }
    let mut cps = Vec::new();
    for j in 0..=p {
        for i in 0..=p {
            let s = i as f64 / p as f64;
            let t = j as f64 / p as f64;
            cps.push([lo[0] + s * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])]);
        }
    }
    let b = BasisFunctionSet::b_spline(KnotVector::uniform(p, 1), KnotVector::uniform(p, 1));
    NurbsPatch::new(b, cps)?.refine(&interior_knots(nx), &interior_knots(ny))
}

/// Annulus sector `r ∈ [r0, r1]`, `θ ∈ [θ0, θ1]` (span at most π/2), exact in
/// `θ`, quadratic in both directions; `ξ` radial, `η` counterclockwise.
pub fn annulus_sector(
    r0: f64,
    r1: f64,
    theta0: f64,
    theta1: f64,
    nr: usize,
    nt: usize,
) -> Result<NurbsPatch> {
    let span = theta1 - theta0;
    if !(r0 > 0.0 && r1 > r0) || !(span > 0.0 && span <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::Domain(
            "annulus sector needs 0 < r0 < r1 and 0 < span ≤ π/2".into(),
        ));
    }
    if nr == 0 || nt == 0 {
        return Err(Error::Domain("element counts must be positive".into()));
    }
    let w = (0.5 * span).cos();
    let mid = 0.5 * (theta0 + theta1);
    let mut cps = Vec::new();
    let mut weights = Vec::new();
    for (phi, rs, wj) in [(theta0, 1.0, 1.0), (mid, 1.0 / w, w), (theta1, 1.0, 1.0)] {
        for r in [r0, 0.5 * (r0 + r1), r1] {
            cps.push([r * rs * phi.cos(), r * rs * phi.sin()]);
            weights.push(wj);
        }
    }
    let b = BasisFunctionSet::new(KnotVector::uniform(2, 1), KnotVector::uniform(2, 1), weights)?;
    NurbsPatch::new(b, cps)?.refine(&interior_knots(nr), &interior_knots(nt))
}

/// One patch with its physical attributes, before gluing.
#[derive(Debug, Clone)]
pub struct PatchSpec {
    pub patch: NurbsPatch,
    pub material: MaterialTag,
    pub region: Region,
    pub side: Side,
    pub boundary: Vec<(PatchEdge, BoundaryTag)>,
}

/// Merges coincident control points (within `tol`, same side) into a single
/// global numbering.
pub fn glue(specs: Vec<PatchSpec>, airgap_radius: f64, tol: f64) -> Result<MultiPatchGeometry> {
    let mut global: Vec<[f64; 2]> = Vec::new();
    let mut sides: Vec<Side> = Vec::new();
    let mut entries = Vec::new();
    for s in specs {
        let mut ids = Vec::with_capacity(s.patch.control_points.len());
        for c in &s.patch.control_points {
            let found = global
                .iter()
                .zip(&sides)
                .position(|(g, &sd)| sd == s.side && (g[0] - c[0]).hypot(g[1] - c[1]) <= tol);
            ids.push(found.unwrap_or_else(|| {
                global.push(*c);
                sides.push(s.side);
                global.len() - 1
            }));
        }
        entries.push(PatchEntry {
            patch: s.patch,
            material: s.material,
            region: s.region,
            side: s.side,
            cp_ids: ids,
            boundary: s.boundary,
        });
    }
    // Snap local copies onto the merged coordinates.
    for e in &mut entries {
        for (l, &g) in e.cp_ids.iter().enumerate() {
            e.patch.control_points[l] = global[g];
        }
    }
    MultiPatchGeometry::new(entries, global, sides, Vec::new(), airgap_radius)
}

/// Bilinear annulus sector with control points on the circles (a polygonal
/// approximation of the curved edges); `ξ` radial, `η` counterclockwise.
pub fn annulus_sector_bilinear(
    r0: f64,
    r1: f64,
    theta0: f64,
    theta1: f64,
    nr: usize,
    nt: usize,
) -> Result<NurbsPatch> {
    if !(r0 > 0.0 && r1 > r0) || !(theta1 > theta0) || nr == 0 || nt == 0 {
        return Err(Error::Domain("invalid annulus sector".into()));
    }
    let mut cps = Vec::new();
    for j in 0..=nt {
        let t = theta0 + (theta1 - theta0) * j as f64 / nt as f64;
        for i in 0..=nr {
            let r = r0 + (r1 - r0) * i as f64 / nr as f64;
            cps.push([r * t.cos(), r * t.sin()]);
        }
    }
    let b = BasisFunctionSet::b_spline(KnotVector::uniform(1, nr), KnotVector::uniform(1, nt));
    NurbsPatch::new(b, cps)
}
