//! Scaled design vector, geometric constraints and magnet area.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::offsets::{apply_offsets, apply_offsets_unchecked, ControlPointOffsets};
use super::params::*;
use super::template::{
    angle, build_geometry, build_geometry_unchecked, radius, to_global, GeometryOptions, MachineGeometry,
};
use crate::error::{Error, Result};

/// Number of clearance constraints.
pub const NUM_CONSTRAINTS: usize = 9;
/// Required iron thickness between holes and the rotor surface in meters.
pub const MIN_BRIDGE: f64 = 1.5e-3;
/// Step of the central differences in scaled coordinates.
pub const CONSTRAINT_FD_STEP: f64 = 1e-6;

/// Point of `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub x: Vec<f64>,
}

impl DesignVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Bounds {
                name: format!("x[{i}]"),
                value: x[i],
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(Self { x })
    }
}

/// Layout of the design vector: 17 scaled parameters followed by scaled offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    /// Bounds and fixed dimensions; the free values are overwritten on decode.
    pub params: ParameterSet,
    pub options: GeometryOptions,
    pub symmetric: bool,
    /// Offset bounds in meters.
    pub offset_min: f64,
    pub offset_max: f64,
}

impl DesignSpace {
    pub fn new(params: ParameterSet, options: GeometryOptions, symmetric: bool) -> Self {
        Self {
            params,
            options,
            symmetric,
            offset_min: -1.5e-3,
            offset_max: 0.0,
        }
    }

    pub fn num_offsets(&self) -> usize {
        ControlPointOffsets::len_for(self.symmetric)
    }

    pub fn dim(&self) -> usize {
        NUM_FREE + self.num_offsets()
    }

    pub fn offset_range(&self) -> f64 {
        self.offset_max - self.offset_min
    }

    pub fn encode(&self, p: &ParameterSet, o: &ControlPointOffsets) -> Result<DesignVector> {
        if o.symmetric != self.symmetric {
            return Err(Error::Config(
                "offset symmetry does not match the design space".into(),
            ));
        }
        let mut x = p.to_scaled();
        let r = self.offset_range();
        x.extend(o.values.iter().map(|v| (v - self.offset_min) / r));
        DesignVector::new(x)
    }

    pub fn decode(&self, x: &DesignVector) -> Result<(ParameterSet, ControlPointOffsets)> {
        if x.x.len() != self.dim() {
            return Err(Error::Config(format!(
                "design vector has {} entries, expected {}",
                x.x.len(),
                self.dim()
            )));
        }
        let mut p = self.params.clone();
        p.set_scaled(&x.x[..NUM_FREE]);
        // rounding must not push a value out of its own bounds
        for q in &mut p.free {
            q.value = q.value.clamp(q.min, q.max);
        }
        let r = self.offset_range();
        let values = x.x[NUM_FREE..].iter().map(|s| self.offset_min + s * r).collect();
        Ok((p, ControlPointOffsets::new(values, self.symmetric)?))
    }

    /// Geometry with offsets applied; every patch is checked for orientation.
    pub fn build(&self, x: &DesignVector) -> Result<MachineGeometry> {
        let (p, o) = self.decode(x)?;
        apply_offsets(&build_geometry(&p, &self.options)?, &o)
    }

    fn build_unchecked(&self, x: &DesignVector) -> Result<MachineGeometry> {
        let (p, o) = self.decode(x)?;
        apply_offsets_unchecked(&build_geometry_unchecked(&p, &self.options)?, &o)
    }

    /// Clearance shortfalls in meters, `g ≤ 0` when feasible.
    pub fn constraints(&self, x: &DesignVector) -> Result<Vec<f64>> {
        clearance_constraints(&self.build_unchecked(x)?)
    }

    /// Constraint values and gradients `dg_i/dx` by central differences,
    /// one-sided at the box faces.
    pub fn constraints_and_gradient(&self, x: &DesignVector) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let g0 = self.constraints(x)?;
        let h = CONSTRAINT_FD_STEP;
        let cols: Vec<Vec<f64>> = (0..self.dim())
            .into_par_iter()
            .map(|k| -> Result<Vec<f64>> {
                let lo = (x.x[k] - h).max(0.0);
                let hi = (x.x[k] + h).min(1.0);
                let mut xp = x.clone();
                xp.x[k] = hi;
                let gp = self.constraints(&xp)?;
                let mut xm = x.clone();
                xm.x[k] = lo;
                let gm = self.constraints(&xm)?;
                Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (hi - lo)).collect())
            })
            .collect::<Result<_>>()?;
        let grad = (0..g0.len())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        Ok((g0, grad))
    }

    /// `A = 2 · MW1 · WMAG` for one pole and its gradient in scaled coordinates.
    pub fn magnet_area_and_gradient(&self, x: &DesignVector) -> Result<(f64, Vec<f64>)> {
        let (p, _) = self.decode(x)?;
        let (mw1, wmag) = (p.si(MW1), p.si(WMAG));
        let mut g = vec![0.0; self.dim()];
        g[MW1] = 2.0 * wmag * p.range_si(MW1);
        g[WMAG] = 2.0 * mw1 * p.range_si(WMAG);
        Ok((2.0 * mw1 * wmag, g))
    }
}

/// Radius of the rotor surface curve at polar angle `phi`; angles beyond the
/// pole are clamped to its ends.
pub fn surface_radius(m: &MachineGeometry, phi: f64) -> Result<f64> {
    let patches = m.surface_patches();
    let at = |pi: usize, eta: f64| -> Result<[f64; 2]> {
        let patch = &m.geometry.patches[pi].patch;
        let e = patch.basis.evaluate([1.0, eta], 0)?;
        Ok(patch.map_from_basis(&e).x)
    };
    let first = patches[0];
    let last = patches[patches.len() - 1];
    if phi <= angle(at(first, 0.0)?) {
        return Ok(radius(at(first, 0.0)?));
    }
    if phi >= angle(at(last, 1.0)?) {
        return Ok(radius(at(last, 1.0)?));
    }
    for pi in patches {
        if !(phi >= angle(at(pi, 0.0)?) && phi <= angle(at(pi, 1.0)?)) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if angle(at(pi, mid)?) < phi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(radius(at(pi, 0.5 * (lo + hi))?));
    }
    Err(Error::Domain(format!(
        "angle {phi} is not covered by the rotor surface"
    )))
}

/// Nine clearance shortfalls: eight hole corners against the surface curve
/// and the spacing of the two surface break points. For each corner the
/// worse of the two mirrored halves counts.
pub fn clearance_constraints(m: &MachineGeometry) -> Result<Vec<f64>> {
    let v = &m.rotor_half;
    let corners = [
        v[1][2], v[2][2], v[1][3], v[2][3], v[3][2], v[3][3], v[2][5], v[2][6],
    ];
    let mut g = Vec::with_capacity(NUM_CONSTRAINTS);
    for c in corners {
        let mut worst = f64::NEG_INFINITY;
        for mirror in [false, true] {
            let q = to_global(c, mirror);
            let clearance = surface_radius(m, angle(q))? - radius(q);
            worst = worst.max(MIN_BRIDGE - clearance);
        }
        g.push(worst);
    }
    let r_ro = 0.5 * m.params.fixed_si("RD1")?;
    g.push(MIN_BRIDGE - r_ro * 0.25 * (m.params.si(RA2) - m.params.si(RA1)));
    Ok(g)
}
