//! Reluctivity models ν(B) and their derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Vacuum reluctivity in m/H.
pub const NU0: f64 = 1.0 / MU0;

const M27_CSV: &str = include_str!("../assets/m27_bh.csv");

/// Region material of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialTag {
    Air,
    Iron,
    Magnet,
    Coil,
}

/// Monotone piecewise-cubic H(B) built from samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BhCurve {
    b: Vec<f64>,
    h: Vec<f64>,
    slopes: Vec<f64>,
}

impl BhCurve {
    /// Samples must start at the origin and be strictly increasing in both B and H.
    pub fn new(b: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if b.len() != h.len() || b.len() < 3 {
            return Err(Error::Domain("BH curve needs at least three (B, H) pairs".into()));
        }
        if b[0] != 0.0 || h[0] != 0.0 {
            return Err(Error::Domain("BH curve must start at (0, 0)".into()));
        }
        if b.windows(2).any(|w| !(w[1] > w[0])) || h.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("BH samples must be strictly increasing".into()));
        }
        let slopes = pchip_slopes(&b, &h);
        Ok(Self { b, h, slopes })
    }

    /// Parses a two-column CSV with header `B_tesla,H_A_per_m`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty BH curve file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["B_tesla", "H_A_per_m"] {
            return Err(Error::Config(format!("unexpected BH curve header `{header}`")));
        }
        let (mut b, mut h) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(bv)), Some(Ok(hv)), None) => {
                    b.push(bv);
                    h.push(hv);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "BH curve row {} is not two numbers: `{line}`",
                        row + 1
                    )))
                }
            }
        }
        Self::new(b, h).map_err(|e| Error::Config(e.to_string()))
    }

    /// The bundled M27-type electrical steel curve.
    pub fn m27() -> Self {
        Self::from_csv(M27_CSV).expect("bundled BH curve is valid")
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.b, &self.h)
    }

    /// Returns `(ν, dν/dB)`.
    fn eval(&self, bm: f64) -> (f64, f64) {
        let n = self.b.len();
        let (b_last, h_last) = (self.b[n - 1], self.h[n - 1]);
        if bm >= b_last {
            let h = h_last + (bm - b_last) * NU0;
            let nu = h / bm;
            return (nu, (NU0 - nu) / bm);
        }
        let k = match self.b.partition_point(|&x| x <= bm) {
            0 => 0,
            i => i - 1,
        };
        let (b0, b1) = (self.b[k], self.b[k + 1]);
        let (h0, h1) = (self.h[k], self.h[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let dx = b1 - b0;
        let s = (h1 - h0) / dx;
        // H = h0 + d0 t + c2 t² + c3 t³ with t = B - b0
        let c2 = (3.0 * s - 2.0 * d0 - d1) / dx;
        let c3 = (d0 + d1 - 2.0 * s) / (dx * dx);
        if k == 0 {
            // H/B is a polynomial on the first interval since H(0) = 0
            let nu = d0 + c2 * bm + c3 * bm * bm;
            return (nu, c2 + 2.0 * c3 * bm);
        }
        let t = bm - b0;
        let h = h0 + t * (d0 + t * (c2 + t * c3));
        let dh = d0 + t * (2.0 * c2 + 3.0 * t * c3);
        let nu = h / bm;
        (nu, (dh - nu) / bm)
    }
}

/// Shape-preserving slopes (weighted harmonic mean) with the end slope
/// matched to the vacuum extrapolation.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let hs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / hs[i]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let w1 = 2.0 * hs[k] + hs[k - 1];
        let w2 = hs[k] + 2.0 * hs[k - 1];
        d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
    }
    let mut d0 = ((2.0 * hs[0] + hs[1]) * s[0] - hs[0] * s[1]) / (hs[0] + hs[1]);
    if d0 <= 0.0 {
        d0 = s[0];
    } else if d0 > 3.0 * s[0] {
        d0 = 3.0 * s[0];
    }
    d[0] = d0;
    d[n - 1] = NU0.min(3.0 * s[n - 2]);
    d
}

/// ν(‖B‖) for one material.
#[derive(Debug, Clone, PartialEq)]
pub enum ReluctivityModel {
    Linear { nu: f64 },
    Curve(BhCurve),
}

impl ReluctivityModel {
    pub fn linear_relative(mu_r: f64) -> Result<Self> {
        if !(mu_r > 0.0) {
            return Err(Error::Domain(format!(
                "relative permeability {mu_r} must be positive"
            )));
        }
        Ok(Self::Linear { nu: NU0 / mu_r })
    }

    pub fn vacuum() -> Self {
        Self::Linear { nu: NU0 }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear { .. })
    }

    pub fn nu(&self, b: f64) -> f64 {
        self.nu_and_derivative(b).0
    }

    pub fn dnu_db(&self, b: f64) -> f64 {
        self.nu_and_derivative(b).1
    }

    /// `(ν(B), dν/dB(B))` for `B ≥ 0`.
    pub fn nu_and_derivative(&self, b: f64) -> (f64, f64) {
        match self {
            Self::Linear { nu } => (*nu, 0.0),
            Self::Curve(c) => c.eval(b.max(0.0)),
        }
    }
}

/// Material models for the four region tags.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLibrary {
    pub iron: ReluctivityModel,
    pub magnet: ReluctivityModel,
    pub air: ReluctivityModel,
    pub coil: ReluctivityModel,
}

impl MaterialLibrary {
    /// M27 iron, magnets with the given μ_r, air and copper as vacuum.
    pub fn nonlinear(magnet_mu_r: f64) -> Result<Self> {
        Ok(Self {
            iron: ReluctivityModel::Curve(BhCurve::m27()),
            magnet: ReluctivityModel::linear_relative(magnet_mu_r)?,
            air: ReluctivityModel::vacuum(),
            coil: ReluctivityModel::vacuum(),
        })
    }

    /// Linear iron with constant μ_r.
    pub fn linear(iron_mu_r: f64, magnet_mu_r: f64) -> Result<Self> {
        Ok(Self {
            iron: ReluctivityModel::linear_relative(iron_mu_r)?,
            magnet: ReluctivityModel::linear_relative(magnet_mu_r)?,
            air: ReluctivityModel::vacuum(),
            coil: ReluctivityModel::vacuum(),
        })
    }

    pub fn model(&self, tag: MaterialTag) -> &ReluctivityModel {
        match tag {
            MaterialTag::Air => &self.air,
            MaterialTag::Iron => &self.iron,
            MaterialTag::Magnet => &self.magnet,
            MaterialTag::Coil => &self.coil,
        }
    }

    pub fn is_linear(&self) -> bool {
        [&self.iron, &self.magnet, &self.air, &self.coil]
            .iter()
            .all(|m| m.is_linear())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn magnet_and_air_constants() {
        let m = ReluctivityModel::linear_relative(1.05).unwrap();
        assert!(rel(m.nu(0.7), 7.5788e5) < 1e-4);
        assert!(rel(ReluctivityModel::vacuum().nu(3.0), 7.9577e5) < 1e-4);
        assert_eq!(m.dnu_db(1.3), 0.0);
    }

    #[test]
    fn curve_reproduces_samples() {
        let c = BhCurve::m27();
        let model = ReluctivityModel::Curve(c.clone());
        let (b, h) = c.samples();
        for i in 1..b.len() {
            assert!(rel(model.nu(b[i]), h[i] / b[i]) < 1e-12, "sample {i}");
        }
        assert!(rel(model.nu(0.0), c.slopes[0]) < 1e-15);
    }

    #[test]
    fn derivative_matches_fd_between_samples() {
        let model = ReluctivityModel::Curve(BhCurve::m27());
        let (bs, _) = match &model {
            ReluctivityModel::Curve(c) => c.samples(),
            _ => unreachable!(),
        };
        let bs = bs.to_vec();
        for w in bs.windows(2) {
            for frac in [0.3, 0.5, 0.77] {
                let b = w[0] + frac * (w[1] - w[0]);
                let h = 1e-7 * (w[1] - w[0]);
                let fd = (model.nu(b + h) - model.nu(b - h)) / (2.0 * h);
                let an = model.dnu_db(b);
                let scale = an.abs().max(1e-6 * model.nu(b) / b);
                assert!((fd - an).abs() / scale < 1e-6, "B={b}: {an} vs {fd}");
            }
        }
        for b in [2.6, 3.0, 5.0] {
            let (nu, d) = model.nu_and_derivative(b);
            assert!(rel(d, (NU0 - nu) / b) < 1e-14);
        }
    }

    #[test]
    fn monotone_secant_and_bounded_by_vacuum() {
        let model = ReluctivityModel::Curve(BhCurve::m27());
        for i in 0..1000 {
            let b = 3.5 * i as f64 / 999.0;
            let (nu, d) = model.nu_and_derivative(b);
            assert!(nu + b * d > 0.0, "B={b}");
            assert!(nu <= NU0, "B={b}");
        }
    }

    #[test]
    fn continuous_across_extrapolation_junction() {
        let model = ReluctivityModel::Curve(BhCurve::m27());
        let b_end = 2.5;
        let eps = 1e-10;
        let (nl, dl) = model.nu_and_derivative(b_end - eps);
        let (nr, dr) = model.nu_and_derivative(b_end + eps);
        assert!(rel(nl, nr) < 1e-8);
        assert!((dl - dr).abs() / dl.abs().max(1.0) < 1e-5);
    }

    #[test]
    fn csv_validation() {
        assert!(BhCurve::from_csv("B,H\n0,0\n1,2\n2,3\n").is_err());
        assert!(BhCurve::from_csv("B_tesla,H_A_per_m\n0,0\n1,2\n0.5,3\n").is_err());
        assert!(BhCurve::from_csv("B_tesla,H_A_per_m\n0,0\n1,2\n2,5\n").is_ok());
    }
}
