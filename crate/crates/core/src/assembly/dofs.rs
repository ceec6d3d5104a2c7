use std::ops::Range;

use crate::error::{Error, Result};
use crate::splines::{MultiPatchGeometry, Side};

/// Global numbering of the free field coefficients: rotor DoFs first, then
/// stator DoFs. Dirichlet control points carry no DoF; antiperiodic slaves
/// reuse their master's DoF with a sign.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// `(dof, sign)` of every control point, `None` when eliminated.
    pub cp_dof: Vec<Option<(usize, f64)>>,
    pub n_rotor: usize,
    pub n_stator: usize,
}

impl DofMap {
    pub fn new(geom: &MultiPatchGeometry) -> Result<Self> {
        let n = geom.num_control_points();
        let mut master_of: Vec<Option<(usize, f64)>> = vec![None; n];
        for l in &geom.links {
            if l.slave >= n || l.master >= n {
                return Err(Error::Domain("link refers to a missing control point".into()));
            }
            if geom.cp_side[l.slave] != geom.cp_side[l.master] {
                return Err(Error::Domain("link crosses the air gap".into()));
            }
            if master_of[l.slave].is_some() || master_of[l.master].is_some() {
                return Err(Error::Domain(format!("control point {} linked twice", l.slave)));
            }
            master_of[l.slave] = Some((l.master, l.sign));
        }
        let mut cp_dof = vec![None; n];
        let mut counts = [0usize; 2];
        let mut next = 0;
        for (k, side) in [Side::Rotor, Side::Stator].into_iter().enumerate() {
            for i in 0..n {
                if geom.cp_side[i] != side || geom.dirichlet[i] || master_of[i].is_some() {
                    continue;
                }
                cp_dof[i] = Some((next, 1.0));
                next += 1;
                counts[k] += 1;
            }
        }
        for i in 0..n {
            if let Some((m, s)) = master_of[i] {
                if !geom.dirichlet[i] {
                    cp_dof[i] = cp_dof[m].map(|(d, sm)| (d, s * sm));
                }
            }
        }
        Ok(Self {
            cp_dof,
            n_rotor: counts[0],
            n_stator: counts[1],
        })
    }

    pub fn n_field(&self) -> usize {
        self.n_rotor + self.n_stator
    }

    pub fn range(&self, side: Side) -> Range<usize> {
        match side {
            Side::Rotor => 0..self.n_rotor,
            Side::Stator => self.n_rotor..self.n_field(),
        }
    }

    /// Control-point values of a DoF vector (zero on Dirichlet points).
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.cp_dof
            .iter()
            .map(|d| d.map_or(0.0, |(i, s)| s * u[i]))
            .collect()
    }

    /// Transpose of [`expand`](Self::expand): sums control-point values into DoFs.
    pub fn fold(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_field()];
        for (d, x) in self.cp_dof.iter().zip(v) {
            if let Some((i, s)) = d {
                out[*i] += s * x;
            }
        }
        out
    }
}
