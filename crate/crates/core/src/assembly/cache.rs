//! Basis values, physical gradients and weights at the Gauss points of
//! every element, computed once per geometry.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::splines::MultiPatchGeometry;

/// One knot-span element with its Gauss points.
#[derive(Debug, Clone)]
pub struct Element {
    pub patch: usize,
    /// Global control-point ids of the non-zero basis functions.
    pub cps: Vec<usize>,
    /// Number of Gauss points.
    pub np: usize,
    /// `values[q * nb + a]`.
    pub values: Vec<f64>,
    /// Physical gradients, same layout as `values`.
    pub grads: Vec<[f64; 2]>,
    /// Quadrature weight times `|J_F|` (including the element map).
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl Element {
    pub fn nb(&self) -> usize {
        self.cps.len()
    }

    /// Gradient of a field given by control-point values at point `q`.
    pub fn gradient(&self, q: usize, u_cp: &[f64]) -> [f64; 2] {
        let nb = self.nb();
        let mut g = [0.0; 2];
        for a in 0..nb {
            let c = u_cp[self.cps[a]];
            let d = self.grads[q * nb + a];
            g[0] += c * d[0];
            g[1] += c * d[1];
        }
        g
    }

    /// Field value at point `q`.
    pub fn value(&self, q: usize, u_cp: &[f64]) -> f64 {
        let nb = self.nb();
        (0..nb).map(|a| u_cp[self.cps[a]] * self.values[q * nb + a]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct QuadCache {
    pub elements: Vec<Element>,
}

impl QuadCache {
    /// Gauss–Legendre with `p + 1 + extra` points per direction and span.
    pub fn new(geom: &MultiPatchGeometry, extra: usize) -> Result<Self> {
        let per_patch: Vec<Vec<Element>> = (0..geom.patches.len())
            .into_par_iter()
            .map(|pi| patch_elements(geom, pi, extra))
            .collect::<Result<_>>()?;
        Ok(Self {
            elements: per_patch.into_iter().flatten().collect(),
        })
    }
}

fn patch_elements(geom: &MultiPatchGeometry, pi: usize, extra: usize) -> Result<Vec<Element>> {
    let entry = &geom.patches[pi];
    let basis = &entry.patch.basis;
    let (xu, wu) = gauss_legendre(basis.knot_u.degree() + 1 + extra);
    let (xv, wv) = gauss_legendre(basis.knot_v.degree() + 1 + extra);
    let mut out = Vec::new();
    for (su, a, b) in basis.knot_u.elements() {
        for (sv, c, d) in basis.knot_v.elements() {
            let mut el = Element {
                patch: pi,
                cps: Vec::new(),
                np: xu.len() * xv.len(),
                values: Vec::new(),
                grads: Vec::new(),
                weights: Vec::new(),
                points: Vec::new(),
            };
            let scale = 0.25 * (b - a) * (d - c);
            for (gv, wgv) in xv.iter().zip(&wv) {
                for (gu, wgu) in xu.iter().zip(&wu) {
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
                    if el.cps.is_empty() {
                        el.cps = e.indices.iter().map(|&l| entry.cp_ids[l]).collect();
                    }
                    // J⁻ᵀ for J = [[x_ξ, x_η], [y_ξ, y_η]]
                    let j = m.jacobian;
                    let inv = 1.0 / m.det;
                    for (v, g) in e.values.iter().zip(&e.grads) {
                        el.values.push(*v);
                        el.grads.push([
                            inv * (j[1][1] * g[0] - j[1][0] * g[1]),
                            inv * (-j[0][1] * g[0] + j[0][0] * g[1]),
                        ]);
                    }
                    el.weights.push(wgu * wgv * scale * m.det);
                    el.points.push(m.x);
                }
            }
            out.push(el);
        }
    }
    Ok(out)
}
