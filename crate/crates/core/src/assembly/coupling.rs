//! Harmonic mortar coupling across the sliding interface.

use serde::{Deserialize, Serialize};

use super::dofs::DofMap;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::splines::{MultiPatchGeometry, PatchEdge, Side};

/// Harmonic orders of the interface multipliers, each `≡ 2 (mod 4)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Harmonics(Vec<usize>);

impl Harmonics {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Config("at least one harmonic required".into()));
        }
        if let Some(n) = orders.iter().find(|&&n| n % 4 != 2) {
            return Err(Error::Config(format!("harmonic {n} is not of the form 4k + 2")));
        }
        if !orders.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("harmonics must be strictly increasing".into()));
        }
        Ok(Self(orders))
    }

    /// `{2, 6, …, 4 count − 2}`.
    pub fn first(count: usize) -> Self {
        Self((0..count).map(|k| 4 * k + 2).collect())
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplier count: one sine and one cosine column per harmonic.
    pub fn columns(&self) -> usize {
        2 * self.0.len()
    }

    pub fn max_order(&self) -> usize {
        *self.0.last().expect("non-empty")
    }
}

impl Default for Harmonics {
    fn default() -> Self {
        Self::first(26)
    }
}

/// Block-diagonal rotation acting on `(sin, cos)` coefficient pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub blocks: Vec<[[f64; 2]; 2]>,
}

/// `R_β` with blocks `[[cos nβ, −sin nβ], [sin nβ, cos nβ]]`, or `dR_β/dβ`.
pub fn rotation_matrix(beta: f64, harmonics: &Harmonics, derivative: bool) -> Rotation {
    let blocks = harmonics
        .orders()
        .iter()
        .map(|&n| {
            let n = n as f64;
            let (s, c) = (n * beta).sin_cos();
            if derivative {
                [[-n * s, -n * c], [n * c, -n * s]]
            } else {
                [[c, -s], [s, c]]
            }
        })
        .collect();
    Rotation { blocks }
}

impl Rotation {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (q, b) in self.blocks.iter().enumerate() {
            let (s, c) = (x[2 * q], x[2 * q + 1]);
            y[2 * q] = b[0][0] * s + b[0][1] * c;
            y[2 * q + 1] = b[1][0] * s + b[1][1] * c;
        }
        y
    }

    pub fn mul_transposed(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (q, b) in self.blocks.iter().enumerate() {
            let (s, c) = (x[2 * q], x[2 * q + 1]);
            y[2 * q] = b[0][0] * s + b[1][0] * c;
            y[2 * q + 1] = b[0][1] * s + b[1][1] * c;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = 2 * self.blocks.len();
        let mut d = vec![vec![0.0; m]; m];
        for (q, b) in self.blocks.iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    d[2 * q + r][2 * q + c] = b[r][c];
                }
            }
        }
        d
    }
}

/// Coupling matrix of one side as rows `(dof, [(column, value)])`, columns
/// `2q` (sine) and `2q + 1` (cosine) of harmonic `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub rows: Vec<(usize, Vec<(usize, f64)>)>,
    pub columns: usize,
}

impl CouplingMatrix {
    /// `G x` into a field-sized vector.
    pub fn mul(&self, x: &[f64], n_field: usize) -> Vec<f64> {
        let mut y = vec![0.0; n_field];
        for (r, entries) in &self.rows {
            y[*r] = entries.iter().map(|(c, v)| v * x[*c]).sum();
        }
        y
    }

    /// `Gᵀ u`.
    pub fn mul_transposed(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.columns];
        for (r, entries) in &self.rows {
            for (c, v) in entries {
                y[*c] += v * u[*r];
            }
        }
        y
    }

    pub fn to_dense(&self, n_field: usize) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.columns]; n_field];
        for (r, entries) in &self.rows {
            for (c, v) in entries {
                d[*r][*c] = *v;
            }
        }
        d
    }
}

/// Control-point-level coupling integrals `∫ N_i sin(nθ) dΓ`, `∫ N_i cos(nθ) dΓ`
/// over the interface edges of one side. `extra` raises the quadrature order.
pub fn coupling_integrals(
    geom: &MultiPatchGeometry,
    side: Side,
    harmonics: &Harmonics,
    extra: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let edges = geom.airgap_edges(side);
    if edges.is_empty() {
        return Err(Error::Config(format!("no air-gap edges on the {side:?} side")));
    }
    let ncol = harmonics.columns();
    let nmax = harmonics.max_order() as f64;
    let mut acc: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (pi, edge) in edges {
        let entry = &geom.patches[pi];
        let basis = &entry.patch.basis;
        let (xi, along_v) = match edge {
            PatchEdge::West => (0.0, true),
            PatchEdge::East => (1.0, true),
            PatchEdge::South => (0.0, false),
            PatchEdge::North => (1.0, false),
        };
        let knots = if along_v { &basis.knot_v } else { &basis.knot_u };
        let p = knots.degree();
        for (_, a, b) in knots.elements() {
            let point = |t: f64| if along_v { [xi, t] } else { [t, xi] };
            let x0 = entry.patch.evaluate_mapping(point(a))?.x;
            let x1 = entry.patch.evaluate_mapping(point(b))?.x;
            let dtheta = (x0[0] * x1[1] - x0[1] * x1[0])
                .atan2(x0[0] * x1[0] + x0[1] * x1[1])
                .abs();
            let m = p + 1 + (nmax * dtheta).ceil() as usize + 8 + extra;
            let (gx, gw) = gauss_legendre(m);
            for (g, w) in gx.iter().zip(&gw) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * g;
                let e = basis.evaluate(point(t), 1)?;
                let mp = entry.patch.map_from_basis(&e);
                let k = if along_v { 1 } else { 0 };
                let ds = mp.jacobian[0][k].hypot(mp.jacobian[1][k]) * w * 0.5 * (b - a);
                let theta = mp.x[1].atan2(mp.x[0]);
                let trig: Vec<f64> = harmonics
                    .orders()
                    .iter()
                    .flat_map(|&n| {
                        let (s, c) = (n as f64 * theta).sin_cos();
                        [s, c]
                    })
                    .collect();
                for (l, v) in e.indices.iter().zip(&e.values) {
                    if *v == 0.0 {
                        continue;
                    }
                    let row = acc.entry(entry.cp_ids[*l]).or_insert_with(|| vec![0.0; ncol]);
                    for (r, tv) in row.iter_mut().zip(&trig) {
                        *r += v * tv * ds;
                    }
                }
            }
        }
    }
    Ok(acc.into_iter().collect())
}

/// Folded coupling matrix of one side.
pub fn assemble_coupling(
    geom: &MultiPatchGeometry,
    dofs: &DofMap,
    side: Side,
    harmonics: &Harmonics,
) -> Result<CouplingMatrix> {
    let raw = coupling_integrals(geom, side, harmonics, 0)?;
    let ncol = harmonics.columns();
    let mut rows: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (cp, vals) in raw {
        if let Some((d, s)) = dofs.cp_dof[cp] {
            let row = rows.entry(d).or_insert_with(|| vec![0.0; ncol]);
            for (r, v) in row.iter_mut().zip(&vals) {
                *r += s * v;
            }
        }
    }
    Ok(CouplingMatrix {
        rows: rows
            .into_iter()
            .map(|(d, v)| (d, v.into_iter().enumerate().collect()))
            .collect(),
        columns: ncol,
    })
}
