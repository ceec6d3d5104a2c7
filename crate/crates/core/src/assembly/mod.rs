//! Galerkin assembly of the coupled rotor–stator system: stiffness and
//! Newton Jacobian, source vectors, mortar coupling and the saddle-point matrix.

mod cache;
mod coupling;
mod dofs;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{Element, QuadCache};
pub use coupling::{
    assemble_coupling, coupling_integrals, rotation_matrix, CouplingMatrix, Harmonics, Rotation,
};
pub use dofs::DofMap;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::materials::{MaterialLibrary, ReluctivityModel};
use crate::splines::{MultiPatchGeometry, Region, Side};

/// Operating point of the excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationState {
    /// Rotation angle in radians.
    pub beta: f64,
    /// Electric phase offset in radians.
    pub phi0: f64,
    /// Applied current amplitude in amperes.
    pub current: f64,
    pub n_wind: f64,
    /// Coil cross-section in m².
    pub coil_area: f64,
    pub pole_pairs: usize,
}

impl ExcitationState {
    pub fn validate(&self) -> Result<()> {
        if !(self.coil_area > 0.0) {
            return Err(Error::Config(format!(
                "coil area {} must be positive",
                self.coil_area
            )));
        }
        if self.pole_pairs == 0 {
            return Err(Error::Config("pole pair count must be at least 1".into()));
        }
        Ok(())
    }

    fn phase_angle(&self, phase: usize) -> f64 {
        self.pole_pairs as f64 * self.beta + self.phi0 + 2.0 * PI * phase as f64 / 3.0
    }

    /// Source current density of phase `k` before the winding sign, in A/m².
    pub fn current_density(&self, phase: usize) -> f64 {
        self.current * self.n_wind / self.coil_area * self.phase_angle(phase).sin()
    }

    /// `∂J/∂φ₀` of phase `k`.
    pub fn current_density_dphi0(&self, phase: usize) -> f64 {
        self.current * self.n_wind / self.coil_area * self.phase_angle(phase).cos()
    }
}

/// Assembly context of one geometry: DoF numbering, quadrature cache,
/// coupling matrices and the saddle-point sparsity pattern.
#[derive(Debug, Clone)]
pub struct Assembler {
    pub dofs: DofMap,
    pub cache: QuadCache,
    pub harmonics: Harmonics,
    pub g_rt: CouplingMatrix,
    pub g_st: CouplingMatrix,
    pub materials: MaterialLibrary,
    regions: Vec<Region>,
    models: Vec<ReluctivityModel>,
    pattern: CsrMatrix,
    /// Saddle-matrix positions of every element pair, `usize::MAX` if eliminated.
    scatter: Vec<Vec<usize>>,
    /// Folded `(dof, sign)` of every element basis function.
    local_dofs: Vec<Vec<Option<(usize, f64)>>>,
}

const NO_POS: usize = usize::MAX;

impl Assembler {
    /// Coupling is assembled only when the geometry tags an interface on both
    /// sides; otherwise the system has no multipliers.
    pub fn new(
        geom: &MultiPatchGeometry,
        materials: &MaterialLibrary,
        harmonics: &Harmonics,
    ) -> Result<Self> {
        if !materials.magnet.is_linear() {
            return Err(Error::Config("magnet reluctivity must be linear".into()));
        }
        let dofs = DofMap::new(geom)?;
        let cache = QuadCache::new(geom, 0)?;
        let coupled =
            !geom.airgap_edges(Side::Rotor).is_empty() || !geom.airgap_edges(Side::Stator).is_empty();
        let (g_rt, g_st) = if coupled {
            (
                assemble_coupling(geom, &dofs, Side::Rotor, harmonics)?,
                assemble_coupling(geom, &dofs, Side::Stator, harmonics)?,
            )
        } else {
            let empty = CouplingMatrix {
                rows: Vec::new(),
                columns: 0,
            };
            (empty.clone(), empty)
        };
        let nf = dofs.n_field();
        let m = g_rt.columns;
        let n = nf + m;
        let local_dofs: Vec<Vec<Option<(usize, f64)>>> = cache
            .elements
            .iter()
            .map(|el| el.cps.iter().map(|&c| dofs.cp_dof[c]).collect())
            .collect();
        let mut rows = vec![Vec::new(); n];
        for ld in &local_dofs {
            for (i, _) in ld.iter().flatten() {
                rows[*i].extend(ld.iter().flatten().map(|(j, _)| *j));
            }
        }
        for g in [&g_rt, &g_st] {
            for (r, _) in &g.rows {
                rows[*r].extend(nf..n);
                for c in nf..n {
                    rows[c].push(*r);
                }
            }
        }
        for (c, row) in rows.iter_mut().enumerate().skip(nf) {
            row.push(c);
        }
        let pattern = CsrMatrix::from_pattern(n, n, rows);
        let scatter = local_dofs
            .iter()
            .map(|ld| {
                let mut pos = Vec::with_capacity(ld.len() * ld.len());
                for a in ld {
                    for b in ld {
                        pos.push(match (a, b) {
                            (Some((i, _)), Some((j, _))) => pattern.find(*i, *j).expect("pattern"),
                            _ => NO_POS,
                        });
                    }
                }
                pos
            })
            .collect();
        Ok(Self {
            dofs,
            cache,
            harmonics: harmonics.clone(),
            g_rt,
            g_st,
            materials: materials.clone(),
            regions: geom.patches.iter().map(|p| p.region).collect(),
            models: geom
                .patches
                .iter()
                .map(|p| materials.model(p.material).clone())
                .collect(),
            pattern,
            scatter,
            local_dofs,
        })
    }

    pub fn n_field(&self) -> usize {
        self.dofs.n_field()
    }

    pub fn n_multipliers(&self) -> usize {
        self.g_rt.columns
    }

    /// Size of the saddle-point system.
    pub fn size(&self) -> usize {
        self.n_field() + self.n_multipliers()
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub fn model_of(&self, patch: usize) -> &ReluctivityModel {
        &self.models[patch]
    }

    pub fn region_of(&self, patch: usize) -> Region {
        self.regions[patch]
    }

    /// `(ν, ∂ν/∂B, ∇u)` at Gauss point `q` of element `e`.
    pub fn point_state(&self, e: usize, q: usize, u_cp: &[f64]) -> (f64, f64, [f64; 2]) {
        let el = &self.cache.elements[e];
        let g = el.gradient(q, u_cp);
        let model = &self.models[el.patch];
        if model.is_linear() {
            return (model.nu(0.0), 0.0, g);
        }
        let (nu, dnu) = model.nu_and_derivative(g[0].hypot(g[1]));
        (nu, dnu, g)
    }

    /// Element matrix `∫ ν ∇N_a·∇N_b`, plus the Newton term
    /// `∫ (ν'/B)(∇N_a·∇u)(∇N_b·∇u)` when `newton` is set.
    fn element_matrix(&self, e: usize, u_cp: &[f64], newton: bool) -> Vec<f64> {
        let el = &self.cache.elements[e];
        let nb = el.nb();
        let mut k = vec![0.0; nb * nb];
        for q in 0..el.np {
            let (nu, dnu, g) = self.point_state(e, q, u_cp);
            let w = el.weights[q];
            let grads = &el.grads[q * nb..(q + 1) * nb];
            let b = g[0].hypot(g[1]);
            let tangent = newton && dnu != 0.0 && b > 0.0;
            let proj: Vec<f64> = if tangent {
                grads.iter().map(|d| d[0] * g[0] + d[1] * g[1]).collect()
            } else {
                Vec::new()
            };
            for a in 0..nb {
                for c in 0..nb {
                    let mut v = nu * (grads[a][0] * grads[c][0] + grads[a][1] * grads[c][1]);
                    if tangent {
                        v += dnu / b * proj[a] * proj[c];
                    }
                    k[a * nb + c] += w * v;
                }
            }
        }
        k
    }

    fn element_matrices(&self, x: &[f64], newton: bool) -> Vec<Vec<f64>> {
        let u_cp = self.dofs.expand(&x[..self.n_field()]);
        (0..self.cache.elements.len())
            .into_par_iter()
            .map(|e| self.element_matrix(e, &u_cp, newton))
            .collect()
    }

    /// Field block `K(u)` (or the Newton Jacobian) as a standalone matrix.
    pub fn stiffness(&self, x: &[f64], newton: bool) -> CsrMatrix {
        let nf = self.n_field();
        let mut trip = Vec::new();
        for (ld, k) in self.local_dofs.iter().zip(self.element_matrices(x, newton)) {
            let nb = ld.len();
            for (a, da) in ld.iter().enumerate() {
                for (c, dc) in ld.iter().enumerate() {
                    if let (Some((i, si)), Some((j, sj))) = (da, dc) {
                        trip.push((*i, *j, si * sj * k[a * nb + c]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(nf, nf, &trip)
    }

    /// Saddle-point matrix
    /// `[[K_rt, 0, −G_rt], [0, K_st, G_st R_β], [−G_rtᵀ, R_βᵀ G_stᵀ, 0]]`
    /// with `K` replaced by the Newton Jacobian when `newton` is set.
    pub fn system_matrix(&self, x: &[f64], beta: f64, newton: bool) -> CsrMatrix {
        let mut a = self.pattern.clone();
        for ((ld, pos), k) in self
            .local_dofs
            .iter()
            .zip(&self.scatter)
            .zip(self.element_matrices(x, newton))
        {
            let nb = ld.len();
            for a_ in 0..nb {
                for c in 0..nb {
                    let p = pos[a_ * nb + c];
                    if p != NO_POS {
                        let s = ld[a_].unwrap().1 * ld[c].unwrap().1;
                        a.data[p] += s * k[a_ * nb + c];
                    }
                }
            }
        }
        let nf = self.n_field();
        let rot = rotation_matrix(beta, &self.harmonics, false).to_dense();
        for (r, entries) in &self.g_rt.rows {
            for (c, v) in entries {
                let p = a.find(*r, nf + c).unwrap();
                a.data[p] -= v;
                let p = a.find(nf + c, *r).unwrap();
                a.data[p] -= v;
            }
        }
        let m = self.n_multipliers();
        for (r, entries) in &self.g_st.rows {
            let mut gr = vec![0.0; m];
            for (c, v) in entries {
                gr[*c] = *v;
            }
            for c in 0..m {
                // (G_st R)_{r c} = Σ_k G_{r k} R_{k c}; R is 2×2 block diagonal.
                let q = c / 2;
                let v = gr[2 * q] * rot[2 * q][c] + gr[2 * q + 1] * rot[2 * q + 1][c];
                let p = a.find(*r, nf + c).unwrap();
                a.data[p] += v;
                let p = a.find(nf + c, *r).unwrap();
                a.data[p] += v;
            }
        }
        a
    }

    /// Internal force `K(u) u` of the field DoFs.
    pub fn internal_force(&self, x: &[f64]) -> Vec<f64> {
        let u_cp = self.dofs.expand(&x[..self.n_field()]);
        let per_el: Vec<Vec<f64>> = (0..self.cache.elements.len())
            .into_par_iter()
            .map(|e| {
                let el = &self.cache.elements[e];
                let nb = el.nb();
                let mut f = vec![0.0; nb];
                for q in 0..el.np {
                    let (nu, _, g) = self.point_state(e, q, &u_cp);
                    let w = el.weights[q] * nu;
                    for (fa, d) in f.iter_mut().zip(&el.grads[q * nb..(q + 1) * nb]) {
                        *fa += w * (d[0] * g[0] + d[1] * g[1]);
                    }
                }
                f
            })
            .collect();
        self.scatter_vector(&per_el)
    }

    fn scatter_vector(&self, per_el: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_field()];
        for (ld, f) in self.local_dofs.iter().zip(per_el) {
            for (d, v) in ld.iter().zip(f) {
                if let Some((i, s)) = d {
                    out[*i] += s * v;
                }
            }
        }
        out
    }

    /// Coupling terms of the residual: field rows `−G_rt λ + G_st R_β λ`,
    /// multiplier rows `−G_rtᵀ u_rt + R_βᵀ G_stᵀ u_st`.
    pub fn coupling_action(&self, x: &[f64], beta: f64) -> Vec<f64> {
        let nf = self.n_field();
        let mut out = vec![0.0; self.size()];
        if self.n_multipliers() == 0 {
            return out;
        }
        let lambda = &x[nf..];
        let rot = rotation_matrix(beta, &self.harmonics, false);
        let rl = rot.mul(lambda);
        let a = self.g_rt.mul(lambda, nf);
        let b = self.g_st.mul(&rl, nf);
        for i in 0..nf {
            out[i] = b[i] - a[i];
        }
        let c = self.g_rt.mul_transposed(&x[..nf]);
        let d = rot.mul_transposed(&self.g_st.mul_transposed(&x[..nf]));
        for k in 0..self.n_multipliers() {
            out[nf + k] = d[k] - c[k];
        }
        out
    }

    /// Nonlinear residual `F(x) = A(x) x − b` of the saddle system.
    pub fn residual(&self, x: &[f64], beta: f64, rhs: &[f64]) -> Vec<f64> {
        let mut r = self.coupling_action(x, beta);
        for (ri, fi) in r.iter_mut().zip(self.internal_force(x)) {
            *ri += fi;
        }
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri -= bi;
        }
        r
    }

    /// Element source vectors `∫ f(e, q) N_a` for a per-point density.
    fn source<F>(&self, density: F) -> Vec<f64>
    where
        F: Fn(usize, usize) -> Option<f64> + Sync,
    {
        let per_el: Vec<Vec<f64>> = (0..self.cache.elements.len())
            .into_par_iter()
            .map(|e| {
                let el = &self.cache.elements[e];
                let nb = el.nb();
                let mut f = vec![0.0; nb];
                for q in 0..el.np {
                    if let Some(s) = density(e, q) {
                        let w = el.weights[q] * s;
                        for (fa, v) in f.iter_mut().zip(&el.values[q * nb..(q + 1) * nb]) {
                            *fa += w * v;
                        }
                    }
                }
                f
            })
            .collect();
        self.scatter_vector(&per_el)
    }

    /// Load vector `∫ f N_i dΩ` of a scalar source density over the field DoFs.
    pub fn load<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn([f64; 2]) -> f64 + Sync,
    {
        self.source(|e, q| Some(f(self.cache.elements[e].points[q])))
    }

    fn coil_source(&self, density: impl Fn(usize) -> f64 + Sync) -> Vec<f64> {
        self.source(|e, _| match self.regions[self.cache.elements[e].patch] {
            Region::Coil(spec) => Some(spec.sign * density(spec.phase)),
            _ => None,
        })
    }

    /// Magnet term `∫ ν ∇N_i · v dΩ` over the given patches with a per-patch vector `v`.
    fn magnet_source(&self, vector: impl Fn(usize) -> Option<[f64; 2]> + Sync) -> Vec<f64> {
        let per_el: Vec<Vec<f64>> = (0..self.cache.elements.len())
            .into_par_iter()
            .map(|e| {
                let el = &self.cache.elements[e];
                let nb = el.nb();
                let mut f = vec![0.0; nb];
                if let Some(v) = vector(el.patch) {
                    let nu = self.models[el.patch].nu(0.0);
                    for q in 0..el.np {
                        let w = el.weights[q] * nu;
                        for (fa, d) in f.iter_mut().zip(&el.grads[q * nb..(q + 1) * nb]) {
                            *fa += w * (d[0] * v[0] + d[1] * v[1]);
                        }
                    }
                }
                f
            })
            .collect();
        self.scatter_vector(&per_el)
    }

    fn padded(&self, mut v: Vec<f64>) -> Vec<f64> {
        v.resize(self.size(), 0.0);
        v
    }

    /// Right-hand side of the saddle system: magnets plus coil currents.
    pub fn rhs(&self, exc: &ExcitationState) -> Result<Vec<f64>> {
        exc.validate()?;
        let magnets = self.magnet_source(|p| match self.regions[p] {
            Region::Magnet(m) => Some([-m.br * m.alpha.sin(), m.br * m.alpha.cos()]),
            _ => None,
        });
        let coils = self.coil_source(|k| exc.current_density(k));
        Ok(self.padded(magnets.iter().zip(&coils).map(|(a, b)| a + b).collect()))
    }

    /// `∂b/∂φ₀`.
    pub fn rhs_dphi0(&self, exc: &ExcitationState) -> Result<Vec<f64>> {
        exc.validate()?;
        Ok(self.padded(self.coil_source(|k| exc.current_density_dphi0(k))))
    }

    /// `∂b/∂α` of the magnet in `patch`.
    pub fn rhs_dalpha(&self, patch: usize) -> Result<Vec<f64>> {
        let Region::Magnet(m) = self.regions.get(patch).copied().unwrap_or(Region::Passive) else {
            return Err(Error::Contract(format!("patch {patch} is not a magnet")));
        };
        Ok(self.padded(
            self.magnet_source(|p| (p == patch).then(|| [-m.br * m.alpha.cos(), -m.br * m.alpha.sin()])),
        ))
    }

    /// Torque `T = −L u_stᵀ G_st R'_β λ`.
    pub fn torque(&self, x: &[f64], beta: f64, length: f64) -> f64 {
        if self.n_multipliers() == 0 {
            return 0.0;
        }
        let nf = self.n_field();
        let dr = rotation_matrix(beta, &self.harmonics, true);
        let gl = self.g_st.mul(&dr.mul(&x[nf..]), nf);
        -length * crate::linalg::dot(&x[..nf], &gl)
    }

    /// `∂T/∂x = −L (0; G_st R'_β λ; R'_βᵀ G_stᵀ u_st)`.
    pub fn torque_gradient(&self, x: &[f64], beta: f64, length: f64) -> Vec<f64> {
        let nf = self.n_field();
        let mut out = vec![0.0; self.size()];
        if self.n_multipliers() == 0 {
            return out;
        }
        let dr = rotation_matrix(beta, &self.harmonics, true);
        let gl = self.g_st.mul(&dr.mul(&x[nf..]), nf);
        for (o, v) in out.iter_mut().zip(gl) {
            *o = -length * v;
        }
        let gu = dr.mul_transposed(&self.g_st.mul_transposed(&x[..nf]));
        for (o, v) in out[nf..].iter_mut().zip(gu) {
            *o = -length * v;
        }
        out
    }
}
