//! Structured lattices of quadratic NURBS cells.
//!
//! A lattice is a grid of vertices `[row][col]` where rows run roughly along
//! constant radius and columns roughly along rays. Every cell becomes one
//! biquadratic patch with `ξ` pointing from row `r` to row `r + 1` and `η`
//! from column `c` to column `c + 1`.

use crate::error::{Error, Result};
use crate::materials::MaterialTag;
use crate::splines::{
    BasisFunctionSet, BoundaryTag, KnotVector, NurbsPatch, PatchEdge, PatchEntry, Region, Side,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Line,
    /// Circular-type arc about the origin between the two vertices.
    Arc,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    pub side: Side,
    pub vertices: Vec<Vec<[f64; 2]>>,
    /// Kind of the edge along each row between columns `c` and `c + 1`.
    pub row_edges: Vec<Vec<EdgeKind>>,
    pub cells: Vec<Vec<(MaterialTag, Region)>>,
    /// Cell rows whose radial edges follow the polar interpolation of their
    /// end points instead of a straight line.
    pub polar_rows: Vec<bool>,
    pub row_knots: Vec<usize>,
    pub col_knots: Vec<usize>,
    pub inner_tag: Option<BoundaryTag>,
    pub outer_tag: Option<BoundaryTag>,
    pub cut_tag: Option<BoundaryTag>,
    /// Last vertex column coincides with the first (closed ring).
    pub periodic: bool,
}

/// Signed angle from `a` to `b`.
fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

impl Lattice {
    pub fn cell_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_cols(&self) -> usize {
        self.cells[0].len()
    }

    /// Arc weights `cos(Δθ/2)` for the current vertex positions; lines get 1.
    pub fn arc_weights(&self) -> Vec<Vec<f64>> {
        self.row_edges
            .iter()
            .enumerate()
            .map(|(r, kinds)| {
                kinds
                    .iter()
                    .enumerate()
                    .map(|(c, k)| match k {
                        EdgeKind::Line => 1.0,
                        EdgeKind::Arc => {
                            let d = angle_between(self.vertices[r][c], self.vertices[r][c + 1]);
                            (0.5 * d).cos()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `copies` rotated replicas side by side, closed into a ring. Odd
    /// replicas flip magnet polarity and winding direction when `flip` is set.
    pub fn tile(&self, copies: usize, step: f64, flip: bool) -> Lattice {
        let nc = self.cell_cols();
        let mut vertices: Vec<Vec<[f64; 2]>> = vec![Vec::new(); self.vertices.len()];
        let mut row_edges: Vec<Vec<EdgeKind>> = vec![Vec::new(); self.row_edges.len()];
        let mut cells: Vec<Vec<(MaterialTag, Region)>> = vec![Vec::new(); self.cells.len()];
        let mut col_knots = Vec::new();
        for q in 0..copies {
            let (s, c) = (q as f64 * step).sin_cos();
            for (r, row) in self.vertices.iter().enumerate() {
                let skip = if q == 0 { 0 } else { 1 };
                for p in &row[skip..] {
                    vertices[r].push([c * p[0] - s * p[1], s * p[0] + c * p[1]]);
                }
            }
            for (r, kinds) in self.row_edges.iter().enumerate() {
                row_edges[r].extend_from_slice(kinds);
            }
            let negate = flip && q % 2 == 1;
            for (r, row) in self.cells.iter().enumerate() {
                for &(m, reg) in row {
                    let reg = match reg {
                        Region::Magnet(mut spec) => {
                            spec.alpha += q as f64 * step + if negate { std::f64::consts::PI } else { 0.0 };
                            Region::Magnet(spec)
                        }
                        Region::Coil(mut spec) => {
                            if negate {
                                spec.sign = -spec.sign;
                            }
                            Region::Coil(spec)
                        }
                        Region::Passive => Region::Passive,
                    };
                    cells[r].push((m, reg));
                }
            }
            col_knots.extend_from_slice(&self.col_knots[..nc]);
        }
        Lattice {
            side: self.side,
            vertices,
            row_edges,
            cells,
            polar_rows: self.polar_rows.clone(),
            row_knots: self.row_knots.clone(),
            col_knots,
            inner_tag: self.inner_tag,
            outer_tag: self.outer_tag,
            cut_tag: None,
            periodic: true,
        }
    }
}

/// Patches and control points of one lattice.
#[derive(Debug, Clone)]
pub struct SideMesh {
    pub patches: Vec<PatchEntry>,
    pub control_points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Control points per angular line and number of angular lines.
    pub ni: usize,
    pub nj: usize,
    /// Global radial index of each vertex row.
    pub row_index: Vec<usize>,
    /// Global angular index of each vertex column.
    pub col_index: Vec<usize>,
    pub offset: usize,
}

impl SideMesh {
    pub fn id(&self, i: usize, j: usize) -> usize {
        self.offset + i + self.ni * (j % self.nj)
    }
}

fn uniform_knots(k: usize) -> Vec<f64> {
    (1..=k).map(|i| i as f64 / (k + 1) as f64).collect()
}

fn arc_mid(a: [f64; 2], b: [f64; 2], w: f64) -> [f64; 2] {
    let d = angle_between(a, b);
    let tm = a[1].atan2(a[0]) + 0.5 * d;
    let rm = 0.5 * (a[0].hypot(a[1]) + b[0].hypot(b[1]));
    // passes through the arc midpoint for any fixed weight
    let rho = rm * (1.0 + w - (0.5 * d).cos()) / w;
    [rho * tm.cos(), rho * tm.sin()]
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Middle control point of a quadratic through the polar mean of `a` and `b`.
fn polar_mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let t = a[1].atan2(a[0]) + 0.5 * angle_between(a, b);
    let r = 0.5 * (a[0].hypot(a[1]) + b[0].hypot(b[1]));
    let m = mid(a, b);
    [2.0 * r * t.cos() - m[0], 2.0 * r * t.sin() - m[1]]
}

/// Builds the refined cell patches; `weights[r][c]` are the fixed arc weights.
pub fn build_side(l: &Lattice, weights: &[Vec<f64>], offset: usize) -> Result<SideMesh> {
    let nr = l.cell_rows();
    let nc = l.cell_cols();
    let mut row_index = vec![0usize; nr + 1];
    for r in 0..nr {
        row_index[r + 1] = row_index[r] + 2 + l.row_knots[r];
    }
    let mut col_index = vec![0usize; nc + 1];
    for c in 0..nc {
        col_index[c + 1] = col_index[c] + 2 + l.col_knots[c];
    }
    let ni = row_index[nr] + 1;
    let nj = if l.periodic {
        col_index[nc]
    } else {
        col_index[nc] + 1
    };
    let mut mesh = SideMesh {
        patches: Vec::with_capacity(nr * nc),
        control_points: vec![[f64::NAN; 2]; ni * nj],
        weights: vec![f64::NAN; ni * nj],
        ni,
        nj,
        row_index,
        col_index,
        offset,
    };
    let q2 = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2)?;
    for r in 0..nr {
        for c in 0..nc {
            let v = &l.vertices;
            let (v00, v01, v10, v11) = (v[r][c], v[r][c + 1], v[r + 1][c], v[r + 1][c + 1]);
            let edge_mid = |row: usize, a, b, w| match l.row_edges[row][c] {
                EdgeKind::Line => mid(a, b),
                EdgeKind::Arc => arc_mid(a, b, w),
            };
            let (wb, wt) = (weights[r][c], weights[r + 1][c]);
            let p01 = edge_mid(r, v00, v01, wb);
            let p21 = edge_mid(r + 1, v10, v11, wt);
            let side_mid = if l.polar_rows[r] { polar_mid } else { mid };
            let p10 = side_mid(v00, v10);
            let p12 = side_mid(v01, v11);
            let mut p11 = [0.0; 2];
            for d in 0..2 {
                p11[d] =
                    0.5 * (p01[d] + p21[d] + p10[d] + p12[d]) - 0.25 * (v00[d] + v01[d] + v10[d] + v11[d]);
            }
            // local index i + 3 j, i radial, j angular
            let cps = vec![v00, p10, v10, p01, p11, p21, v01, p12, v11];
            let wm = 0.5 * (wb + wt);
            let ws = vec![1.0, 1.0, 1.0, wb, wm, wt, 1.0, 1.0, 1.0];
            let basis = BasisFunctionSet::new(q2.clone(), q2.clone(), ws)?;
            let patch = NurbsPatch::new(basis, cps)?
                .refine(&uniform_knots(l.row_knots[r]), &uniform_knots(l.col_knots[c]))?;
            let (nu, nv) = patch.basis.size();
            let mut cp_ids = Vec::with_capacity(nu * nv);
            for j in 0..nv {
                for i in 0..nu {
                    let g = mesh.id(mesh.row_index[r] + i, mesh.col_index[c] + j);
                    let local = g - offset;
                    if mesh.control_points[local][0].is_nan() {
                        mesh.control_points[local] = patch.control_points[i + nu * j];
                        mesh.weights[local] = patch.basis.weights()[i + nu * j];
                    }
                    cp_ids.push(g);
                }
            }
            let mut boundary = Vec::new();
            if r == 0 {
                if let Some(t) = l.inner_tag {
                    boundary.push((PatchEdge::West, t));
                }
            }
            if r + 1 == nr {
                if let Some(t) = l.outer_tag {
                    boundary.push((PatchEdge::East, t));
                }
            }
            if let Some(t) = l.cut_tag {
                if c == 0 {
                    boundary.push((PatchEdge::South, t));
                }
                if c + 1 == nc {
                    boundary.push((PatchEdge::North, t));
                }
            }
            let (material, region) = l.cells[r][c];
            mesh.patches.push(PatchEntry {
                patch,
                material,
                region,
                side: l.side,
                cp_ids,
                boundary,
            });
        }
    }
    // shared control points must agree across patches
    for (pi, p) in mesh.patches.iter_mut().enumerate() {
        for (k, &g) in p.cp_ids.iter().enumerate() {
            let gp = mesh.control_points[g - offset];
            let lp = p.patch.control_points[k];
            let tol = 1e-12 * (1.0 + gp[0].abs() + gp[1].abs());
            if (gp[0] - lp[0]).abs() > tol || (gp[1] - lp[1]).abs() > tol {
                return Err(Error::Domain(format!(
                    "non-conforming interface at patch {pi}, local control point {k}"
                )));
            }
            if mesh.weights[g - offset] != p.patch.basis.weights()[k] {
                return Err(Error::Domain(format!("weight mismatch at patch {pi}, local {k}")));
            }
            p.patch.control_points[k] = gp;
        }
    }
    Ok(mesh)
}
