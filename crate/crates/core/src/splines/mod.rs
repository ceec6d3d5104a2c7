//! B-spline and NURBS bases, single patches and the patch mapping.
//!
//! Knot vectors are open and normalized to `[0, 1]`. Basis evaluation at an
//! interior knot is right-continuous; the end point `1` is taken from the
//! left so that the last basis function is one there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod multipatch;
pub mod primitives;
pub use multipatch::*;

/// Open knot vector of degree `p` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Validates and normalizes a knot vector. Vectors on another range are
    /// rescaled affinely to `[0, 1]`.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::Domain(format!(
                "knot vector of length {} too short for degree {degree}",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0] || !w[0].is_finite()) {
            return Err(Error::Domain("knot vector must be non-decreasing".into()));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if last <= first {
            return Err(Error::Domain("knot vector spans an empty interval".into()));
        }
        let knots: Vec<f64> = if first != 0.0 || last != 1.0 {
            knots.iter().map(|k| (k - first) / (last - first)).collect()
        } else {
            knots
        };
        let n = knots.len();
        let start = knots.iter().take_while(|&&k| k == 0.0).count();
        let end = knots.iter().rev().take_while(|&&k| k == 1.0).count();
        if start != degree + 1 || end != degree + 1 {
            return Err(Error::Domain(format!(
                "knot vector is not open: end multiplicities {start}/{end}, expected {}",
                degree + 1
            )));
        }
        // interior multiplicity above p would disconnect the basis
        let mut i = degree + 1;
        while i < n - degree - 1 {
            let m = knots[i..].iter().take_while(|&&k| k == knots[i]).count();
            if m > degree {
                return Err(Error::Domain(format!(
                    "interior knot {} has multiplicity {m} > degree {degree}",
                    knots[i]
                )));
            }
            i += m;
        }
        Ok(Self { knots, degree })
    }

    /// Open knot vector with `elements` uniform spans.
    pub fn uniform(degree: usize, elements: usize) -> Self {
        let mut knots = vec![0.0; degree + 1];
        for e in 1..elements {
            knots.push(e as f64 / elements as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { knots, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions `n = len - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Index `k` with `ξ_k ≤ ξ < ξ_{k+1}`; the end point maps to the last
    /// non-empty span.
    pub fn find_span(&self, xi: f64) -> usize {
        let p = self.degree;
        let n = self.num_basis();
        if xi >= self.knots[n] {
            return n - 1;
        }
        if xi <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Non-zero basis values and first derivatives on `span` at `xi`, the
    /// functions `span - p ..= span`.
    pub fn basis_with_derivative(&self, span: usize, xi: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.degree;
        let u = &self.knots;
        // table of the lower-degree values, ndu[j][r]: degree j, function span-j+r
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut knot_diff = vec![vec![0.0; p + 1]; p + 1];
        ndu[0][0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                // knot_diff[j][r] = u[span+r+1] - u[span+1-j+r]
                knot_diff[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[j - 1][r] / knot_diff[j][r];
                ndu[j][r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let values = ndu[p].clone();
        let mut ders = vec![0.0; p + 1];
        if p > 0 {
            let pf = p as f64;
            for r in 0..=p {
                let mut d = 0.0;
                if r >= 1 {
                    d += ndu[p - 1][r - 1] / knot_diff[p][r - 1];
                }
                if r < p {
                    d -= ndu[p - 1][r] / knot_diff[p][r];
                }
                ders[r] = pf * d;
            }
        }
        (values, ders)
    }

    /// Non-empty knot spans as `(span index, left knot, right knot)`.
    pub fn elements(&self) -> Vec<(usize, f64, f64)> {
        let p = self.degree;
        let n = self.num_basis();
        (p..n)
            .filter(|&k| self.knots[k + 1] > self.knots[k])
            .map(|k| (k, self.knots[k], self.knots[k + 1]))
            .collect()
    }
}

/// Tensor-product basis with per-function weights (all one for B-splines).
///
/// Function `(i, j)` has flat index `i + n_u * j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFunctionSet {
    pub knot_u: KnotVector,
    pub knot_v: KnotVector,
    weights: Vec<f64>,
}

/// Non-zero basis functions at one parametric point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Flat tensor indices.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Parametric gradients `(∂/∂ξ, ∂/∂η)`; zeros if not requested.
    pub grads: Vec<[f64; 2]>,
}

impl BasisFunctionSet {
    pub fn new(knot_u: KnotVector, knot_v: KnotVector, weights: Vec<f64>) -> Result<Self> {
        let n = knot_u.num_basis() * knot_v.num_basis();
        if weights.len() != n {
            return Err(Error::Domain(format!(
                "{} weights for {n} basis functions",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("NURBS weights must be strictly positive".into()));
        }
        Ok(Self {
            knot_u,
            knot_v,
            weights,
        })
    }

    pub fn b_spline(knot_u: KnotVector, knot_v: KnotVector) -> Self {
        let n = knot_u.num_basis() * knot_v.num_basis();
        Self {
            knot_u,
            knot_v,
            weights: vec![1.0; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn size(&self) -> (usize, usize) {
        (self.knot_u.num_basis(), self.knot_v.num_basis())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Evaluates the `(p_u+1)(p_v+1)` non-zero rational basis functions.
    pub fn evaluate(&self, point: [f64; 2], derivative_order: usize) -> Result<BasisEval> {
        check_point(point)?;
        if derivative_order > 1 {
            return Err(Error::Domain(
                "only derivative orders 0 and 1 are supported".into(),
            ));
        }
        let su = self.knot_u.find_span(point[0]);
        let sv = self.knot_v.find_span(point[1]);
        Ok(self.evaluate_in_span(su, sv, point))
    }

    /// Evaluation with known spans (no bounds checks); used by assembly.
    pub fn evaluate_in_span(&self, su: usize, sv: usize, point: [f64; 2]) -> BasisEval {
        let pu = self.knot_u.degree();
        let pv = self.knot_v.degree();
        let nu = self.knot_u.num_basis();
        let (bu, du) = self.knot_u.basis_with_derivative(su, point[0]);
        let (bv, dv) = self.knot_v.basis_with_derivative(sv, point[1]);
        let count = (pu + 1) * (pv + 1);
        let mut indices = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        let mut grads = Vec::with_capacity(count);
        let mut w_sum = 0.0;
        let mut dw = [0.0; 2];
        for b in 0..=pv {
            let j = sv - pv + b;
            for a in 0..=pu {
                let i = su - pu + a;
                let idx = i + nu * j;
                let w = self.weights[idx];
                let val = w * bu[a] * bv[b];
                let g = [w * du[a] * bv[b], w * bu[a] * dv[b]];
                w_sum += val;
                dw[0] += g[0];
                dw[1] += g[1];
                indices.push(idx);
                values.push(val);
                grads.push(g);
            }
        }
        for (v, g) in values.iter_mut().zip(grads.iter_mut()) {
            let r = *v / w_sum;
            g[0] = (g[0] - r * dw[0]) / w_sum;
            g[1] = (g[1] - r * dw[1]) / w_sum;
            *v = r;
        }
        BasisEval {
            indices,
            values,
            grads,
        }
    }
}

fn check_point(point: [f64; 2]) -> Result<()> {
    if point.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::Domain(format!(
            "parametric point ({}, {}) outside [0,1]²",
            point[0], point[1]
        )));
    }
    Ok(())
}

/// Physical point, Jacobian `J_F` (rows: x, y; columns: ξ, η) and its determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingEval {
    pub x: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
}

/// A NURBS patch: basis plus tensor-ordered control points in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NurbsPatch {
    pub basis: BasisFunctionSet,
    pub control_points: Vec<[f64; 2]>,
}

impl NurbsPatch {
    pub fn new(basis: BasisFunctionSet, control_points: Vec<[f64; 2]>) -> Result<Self> {
        if control_points.len() != basis.len() {
            return Err(Error::Domain(format!(
                "{} control points for {} basis functions",
                control_points.len(),
                basis.len()
            )));
        }
        Ok(Self {
            basis,
            control_points,
        })
    }

    /// `x = Σ Ĝ_k C_k` and `J_F` with rows `Σ_k (∇̂Ĝ_k)ᵀ C_k,d`.
    pub fn evaluate_mapping(&self, point: [f64; 2]) -> Result<MappingEval> {
        let eval = self.basis.evaluate(point, 1)?;
        let m = self.map_from_basis(&eval);
        if !(m.det > 0.0) {
            return Err(Error::Geometry {
                patch: usize::MAX,
                xi: point[0],
                eta: point[1],
                message: format!("det(J_F) = {:e} is not positive", m.det),
            });
        }
        Ok(m)
    }

    pub(crate) fn map_from_basis(&self, eval: &BasisEval) -> MappingEval {
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for ((&idx, &v), g) in eval.indices.iter().zip(&eval.values).zip(&eval.grads) {
            let c = self.control_points[idx];
            for d in 0..2 {
                x[d] += v * c[d];
                jac[d][0] += g[0] * c[d];
                jac[d][1] += g[1] * c[d];
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        MappingEval {
            x,
            jacobian: jac,
            det,
        }
    }

    /// Inserts knots (each strictly inside `(0,1)`) without changing the mapping.
    pub fn refine(&self, new_knots_u: &[f64], new_knots_v: &[f64]) -> Result<NurbsPatch> {
        for &k in new_knots_u.iter().chain(new_knots_v) {
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::Domain(format!("inserted knot {k} not inside (0, 1)")));
            }
        }
        let (nu, nv) = self.basis.size();
        // homogeneous control net [w x, w y, w]
        let mut net: Vec<[f64; 3]> = self
            .control_points
            .iter()
            .zip(self.basis.weights())
            .map(|(c, &w)| [w * c[0], w * c[1], w])
            .collect();
        let mut ku = self.basis.knot_u.clone();
        let mut kv = self.basis.knot_v.clone();
        let (mut cur_nu, mut cur_nv) = (nu, nv);

        let mut sorted_u = new_knots_u.to_vec();
        sorted_u.sort_by(f64::total_cmp);
        for &k in &sorted_u {
            let (new_knots, new_net) = insert_u(&ku, &net, cur_nu, cur_nv, k);
            ku = KnotVector::new(new_knots, ku.degree())?;
            net = new_net;
            cur_nu += 1;
        }
        let mut sorted_v = new_knots_v.to_vec();
        sorted_v.sort_by(f64::total_cmp);
        for &k in &sorted_v {
            // insert along v by transposing the net
            let transposed = transpose(&net, cur_nu, cur_nv);
            let (new_knots, new_t) = insert_u(&kv, &transposed, cur_nv, cur_nu, k);
            kv = KnotVector::new(new_knots, kv.degree())?;
            cur_nv += 1;
            net = transpose(&new_t, cur_nv, cur_nu);
        }
        let weights: Vec<f64> = net.iter().map(|h| h[2]).collect();
        let cps = net.iter().map(|h| [h[0] / h[2], h[1] / h[2]]).collect();
        NurbsPatch::new(BasisFunctionSet::new(ku, kv, weights)?, cps)
    }
}

fn transpose(net: &[[f64; 3]], nu: usize, nv: usize) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; nu * nv];
    for j in 0..nv {
        for i in 0..nu {
            out[j + nv * i] = net[i + nu * j];
        }
    }
    out
}

/// Boehm insertion of one knot in the first tensor direction.
fn insert_u(kv: &KnotVector, net: &[[f64; 3]], nu: usize, nv: usize, knot: f64) -> (Vec<f64>, Vec<[f64; 3]>) {
    let p = kv.degree();
    let u = kv.knots();
    let k = kv.find_span(knot);
    let new_nu = nu + 1;
    let mut out = vec![[0.0; 3]; new_nu * nv];
    for j in 0..nv {
        for i in 0..new_nu {
            let q = if i + p <= k {
                net[i + nu * j]
            } else if i > k {
                net[i - 1 + nu * j]
            } else {
                let alpha = (knot - u[i]) / (u[i + p] - u[i]);
                let a = net[i + nu * j];
                let b = net[i - 1 + nu * j];
                [
                    alpha * a[0] + (1.0 - alpha) * b[0],
                    alpha * a[1] + (1.0 - alpha) * b[1],
                    alpha * a[2] + (1.0 - alpha) * b[2],
                ]
            };
            out[i + new_nu * j] = q;
        }
    }
    let mut knots = u.to_vec();
    knots.insert(k + 1, knot);
    (knots, out)
}
