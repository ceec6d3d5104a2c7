//! Numerical derivatives of control points and magnetization directions
//! with respect to the free parameters.

use rayon::prelude::*;

use super::offsets::{apply_offsets, ControlPointOffsets};
use super::params::{ParameterSet, NUM_FREE};
use super::template::{build_geometry, GeometryOptions, MachineGeometry};
use crate::error::Result;
use crate::splines::Region;

/// Entries smaller than this (m per SI unit) are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
/// Relative step of the forward differences.
pub const REL_STEP: f64 = 1e-6;

/// `dC/dP_l` for one parameter, per SI unit of the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDerivative {
    pub param: usize,
    /// Signed step actually used, in user units.
    pub step: f64,
    /// `(control point, [dx, dy])`, sorted by control point.
    pub dc: Vec<(usize, [f64; 2])>,
    /// `(patch, dα)` for magnet patches with a nonzero derivative.
    pub dalpha: Vec<(usize, f64)>,
}

fn build(p: &ParameterSet, o: &ControlPointOffsets, opts: &GeometryOptions) -> Result<MachineGeometry> {
    apply_offsets(&build_geometry(p, opts)?, o)
}

fn magnet_angles(m: &MachineGeometry) -> Vec<(usize, f64)> {
    m.geometry
        .patches
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e.region {
            Region::Magnet(s) => Some((i, s.alpha)),
            _ => None,
        })
        .collect()
}

/// Pruned `(b − a) / h` per control point.
pub fn difference_quotient(a: &[[f64; 2]], b: &[[f64; 2]], h: f64) -> Vec<(usize, [f64; 2])> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter_map(|(i, (a, b))| {
            let d = [(b[0] - a[0]) / h, (b[1] - a[1]) / h];
            (d[0].abs() >= PRUNE_TOL || d[1].abs() >= PRUNE_TOL).then_some((i, d))
        })
        .collect()
}

/// Difference quotient between a base geometry and one rebuilt with parameter
/// `l` moved by `h = 1e-6 (max − min)`, backward at the upper bound.
pub fn control_point_jacobian(
    base: &MachineGeometry,
    offsets: &ControlPointOffsets,
    l: usize,
) -> Result<ParameterDerivative> {
    let p = &base.params;
    let q = &p.free[l];
    let mut step = REL_STEP * (q.max - q.min);
    if q.value + step > q.max {
        step = -step;
    }
    let mut pp = p.clone();
    pp.set(l, q.value + step);
    let h_si = pp.si(l) - p.si(l);
    let pert = build(&pp, offsets, &base.options)?;
    let dc = difference_quotient(
        base.geometry.control_points(),
        pert.geometry.control_points(),
        h_si,
    );
    let dalpha = magnet_angles(base)
        .into_iter()
        .zip(magnet_angles(&pert))
        .filter_map(|((i, a), (_, b))| {
            let d = (b - a) / h_si;
            (d.abs() >= PRUNE_TOL).then_some((i, d))
        })
        .collect();
    Ok(ParameterDerivative {
        param: l,
        step,
        dc,
        dalpha,
    })
}

/// Derivatives for all free parameters, computed concurrently.
pub fn control_point_jacobians(
    base: &MachineGeometry,
    offsets: &ControlPointOffsets,
) -> Result<Vec<ParameterDerivative>> {
    (0..NUM_FREE)
        .into_par_iter()
        .map(|l| control_point_jacobian(base, offsets, l))
        .collect()
}
