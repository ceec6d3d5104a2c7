//! Radial offsets of the rotor surface control points and the smoothness
//! regularizer.

use serde::{Deserialize, Serialize};

use super::template::MachineGeometry;
use crate::error::{Error, Result};

/// Offsettable surface control points per pole (two mirrored groups of 29).
pub const NUM_PHYSICAL_OFFSETS: usize = 58;
/// Design values when mirrored pairs are tied.
pub const NUM_SYMMETRIC_OFFSETS: usize = 29;
/// Largest admissible offset magnitude in meters.
pub const MAX_OFFSET: f64 = 1.5e-3;

/// Surface control points per pole, including the two cut points.
const POLE_SURFACE: usize = 61;
const CENTER: usize = 30;

/// Surface index `j` (within one pole) of physical offset `m`.
pub fn surface_index(m: usize) -> usize {
    if m < NUM_SYMMETRIC_OFFSETS {
        m + 1
    } else {
        m + 2
    }
}

/// Radial offsets in meters. With `symmetric` set, `values[k - 1]` drives the
/// pair of surface points `30 - k` and `30 + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPointOffsets {
    pub values: Vec<f64>,
    pub symmetric: bool,
}

impl ControlPointOffsets {
    pub fn zeros(symmetric: bool) -> Self {
        Self {
            values: vec![0.0; Self::len_for(symmetric)],
            symmetric,
        }
    }

    pub fn new(values: Vec<f64>, symmetric: bool) -> Result<Self> {
        let n = Self::len_for(symmetric);
        if values.len() != n {
            return Err(Error::Config(format!(
                "expected {n} offsets, got {}",
                values.len()
            )));
        }
        Ok(Self { values, symmetric })
    }

    pub fn len_for(symmetric: bool) -> usize {
        if symmetric {
            NUM_SYMMETRIC_OFFSETS
        } else {
            NUM_PHYSICAL_OFFSETS
        }
    }

    /// Design index driving physical offset `m`.
    pub fn design_index(&self, m: usize) -> usize {
        if !self.symmetric {
            return m;
        }
        let j = surface_index(m);
        j.abs_diff(CENTER) - 1
    }

    pub fn physical(&self) -> Vec<f64> {
        (0..NUM_PHYSICAL_OFFSETS)
            .map(|m| self.values[self.design_index(m)])
            .collect()
    }

    /// Offsets of all 61 surface points of one pole; cut and center points are zero.
    pub fn surface_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; POLE_SURFACE];
        for (m, v) in self.physical().into_iter().enumerate() {
            out[surface_index(m)] = v;
        }
        out
    }

    /// Sums a gradient over the 61 surface points into design values.
    pub fn fold_surface_gradient(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for m in 0..NUM_PHYSICAL_OFFSETS {
            out[self.design_index(m)] += g[surface_index(m)];
        }
        out
    }

    /// Chain rule from a control-point gradient `df/dC` of the offset geometry
    /// `m` to the design values (per meter of offset).
    pub fn chain_rule(&self, m: &MachineGeometry, dfdc: &[[f64; 2]]) -> Vec<f64> {
        let mut g = vec![0.0; POLE_SURFACE];
        let cps = m.geometry.control_points();
        for (j, &id) in m.surface_cps.iter().enumerate() {
            let p = cps[id];
            let r = p[0].hypot(p[1]);
            g[j % (POLE_SURFACE - 1)] += (dfdc[id][0] * p[0] + dfdc[id][1] * p[1]) / r;
        }
        self.fold_surface_gradient(&g)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &v) in self.values.iter().enumerate() {
            if !(v.abs() <= MAX_OFFSET * (1.0 + 1e-12)) {
                return Err(Error::Bounds {
                    name: format!("offset[{k}]"),
                    value: v,
                    min: -MAX_OFFSET,
                    max: MAX_OFFSET,
                });
            }
        }
        Ok(())
    }

    /// Smoothness `S` and its gradient with respect to the design values.
    pub fn smoothness(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() < POLE_SURFACE {
            return Err(Error::Domain(
                "one angle per surface control point required".into(),
            ));
        }
        let (s, g) = smoothness_and_gradient(&self.surface_profile(), &theta[..POLE_SURFACE])?;
        Ok((s, self.fold_surface_gradient(&g)))
    }
}

/// `S = Σ (d_{i+1} − d_i)² / (θ_{i+1} − θ_i)` and `dS/dd`.
pub fn smoothness_and_gradient(delta: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if delta.len() != theta.len() {
        return Err(Error::Domain("offsets and angles differ in length".into()));
    }
    let mut s = 0.0;
    let mut g = vec![0.0; delta.len()];
    for i in 0..delta.len().saturating_sub(1) {
        let dt = theta[i + 1] - theta[i];
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("angles not strictly increasing at {i}")));
        }
        let d = delta[i + 1] - delta[i];
        s += d * d / dt;
        g[i + 1] += 2.0 * d / dt;
        g[i] -= 2.0 * d / dt;
    }
    Ok((s, g))
}

fn move_radially(p: [f64; 2], d: f64) -> [f64; 2] {
    let r = p[0].hypot(p[1]);
    let f = (r + d) / r;
    [p[0] * f, p[1] * f]
}

/// Moves the tagged surface control points radially; every pole of a full
/// machine receives the same profile.
pub fn apply_offsets(m: &MachineGeometry, offsets: &ControlPointOffsets) -> Result<MachineGeometry> {
    let out = apply_offsets_unchecked(m, offsets)?;
    out.geometry.check_orientation()?;
    Ok(out)
}

pub(crate) fn apply_offsets_unchecked(
    m: &MachineGeometry,
    offsets: &ControlPointOffsets,
) -> Result<MachineGeometry> {
    offsets.validate()?;
    let profile = offsets.surface_profile();
    let mut cps = m.geometry.control_points().to_vec();
    for (j, &id) in m.surface_cps.iter().enumerate() {
        let d = profile[j % (POLE_SURFACE - 1)];
        if d != 0.0 {
            cps[id] = move_radially(cps[id], d);
        }
    }
    let mut out = m.clone();
    out.geometry.set_control_points(cps)?;
    Ok(out)
}
