//! Guaranteed a posteriori error bounds.
//!
//! For any primal field v and any feasible dual field q with zero normal trace,
//! `‖u − v‖² ≤ err_u² = 2ν/(c₁−c₂)² (E^rel[v] + D^rel[q])`, and the misclassified
//! area of the thresholded field is at most
//! `err_χ = inf_η a[v,η] + err_u²/η²` where `a[v,η]` is the area of the band
//! `½−η ≤ v ≤ ½+η`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fdgrid::{bilinear, bilinear_grad_local, Lattice};
use crate::input::{cross_value, Source};
use crate::mesh::QuadMesh;
use crate::model::{self, ModelParams, FEASIBILITY_TOL};
use crate::pdsolver::Discretization;
use crate::quadrature::{square_gauss3, TRIANGLE_DEG4};

pub const ETA_STEP: f64 = 0.0025;

/// The search grid `kΔη`, k = 1..⌊(½−Δη)/Δη⌋.
pub fn eta_grid() -> Vec<f64> {
    let count = ((0.5 - ETA_STEP) / ETA_STEP + 1e-9).floor() as usize;
    (1..=count).map(|k| k as f64 * ETA_STEP).collect()
}

/// The L² part of a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct UEstimate {
    pub err_u_sq: f64,
    pub e_primal: f64,
    pub d_predual: f64,
    /// Local contributions (already scaled by 2ν/(c₁−c₂)²), one per cell.
    pub per_cell: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiEstimate {
    pub err_chi: f64,
    pub eta_opt: f64,
    /// Sampled (η, a[v,η]).
    pub a_of_eta: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub err_u_sq: f64,
    pub err_chi: f64,
    pub eta_opt: f64,
    pub e_primal: f64,
    pub d_predual: f64,
    pub per_cell: Vec<f64>,
    pub a_of_eta: Vec<(f64, f64)>,
}

impl Certificate {
    pub fn new(u: UEstimate, pieces: &AffinePieces) -> Self {
        let chi = estimate_chi(pieces, u.err_u_sq);
        Self {
            err_u_sq: u.err_u_sq,
            err_chi: chi.err_chi,
            eta_opt: chi.eta_opt,
            e_primal: u.e_primal,
            d_predual: u.d_predual,
            per_cell: u.per_cell,
            a_of_eta: chi.a_of_eta,
        }
    }
}

/// A piecewise affine field given by vertex values on triangles of known area.
/// Degenerate "triangles" with equal vertex values model nodal (lumped) fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffinePieces {
    pub areas: Vec<f64>,
    pub values: Vec<[f64; 3]>,
}

impl AffinePieces {
    pub fn from_mesh(mesh: &QuadMesh, dofs: &[f64]) -> Self {
        let nodal = mesh.expand(dofs);
        Self {
            areas: mesh.areas().to_vec(),
            values: mesh.triangles().iter().map(|t| [nodal[t[0]], nodal[t[1]], nodal[t[2]]]).collect(),
        }
    }

    /// Splits every lattice cell into four triangles around the corner mean.
    pub fn from_lattice(lattice: &Lattice, values: &[f64]) -> Self {
        let cells = lattice.side() - 1;
        let area = lattice.h().powi(2) / 4.0;
        let mut out = Self::default();
        for cy in 0..cells {
            for cx in 0..cells {
                let c = [
                    values[lattice.index(cx, cy)],
                    values[lattice.index(cx + 1, cy)],
                    values[lattice.index(cx + 1, cy + 1)],
                    values[lattice.index(cx, cy + 1)],
                ];
                let m = 0.25 * (c[0] + c[1] + c[2] + c[3]);
                for k in 0..4 {
                    out.areas.push(area);
                    out.values.push([c[k], c[(k + 1) % 4], m]);
                }
            }
        }
        out
    }

    /// Nodal values each carrying the weight `w` (constant pieces).
    pub fn nodal(values: &[f64], w: f64) -> Self {
        Self { areas: vec![w; values.len()], values: values.iter().map(|&v| [v, v, v]).collect() }
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
}

/// Fraction of a triangle where the affine function with the given vertex
/// values lies in the closed interval [lo, hi].
pub fn triangle_band_fraction(vals: [f64; 3], lo: f64, hi: f64) -> f64 {
    let mut v = vals;
    v.sort_by(f64::total_cmp);
    let [a, b, c] = v;
    if c == a {
        return if lo <= a && a <= hi { 1.0 } else { 0.0 };
    }
    affine_cdf(a, b, c, hi) - affine_cdf(a, b, c, lo)
}

/// Area fraction where an affine function with sorted vertex values a ≤ b ≤ c
/// (a < c) is at most t.
fn affine_cdf(a: f64, b: f64, c: f64, t: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= c {
        1.0
    } else if t <= b {
        (t - a).powi(2) / ((b - a) * (c - a))
    } else {
        1.0 - (c - t).powi(2) / ((c - a) * (c - b))
    }
}

/// a[v,η]: area of {½−η ≤ v ≤ ½+η}.
pub fn area_band(pieces: &AffinePieces, eta: f64) -> f64 {
    let (lo, hi) = (0.5 - eta, 0.5 + eta);
    pieces
        .values
        .iter()
        .zip(&pieces.areas)
        .map(|(v, a)| a * triangle_band_fraction(*v, lo, hi))
        .sum()
}

/// Minimizes a[v,η] + err_u²/η² over [`eta_grid`]; ties keep the smaller η.
pub fn estimate_chi(pieces: &AffinePieces, err_u_sq: f64) -> ChiEstimate {
    let err = err_u_sq.max(0.0);
    let a_of_eta: Vec<(f64, f64)> = eta_grid().into_par_iter().map(|eta| (eta, area_band(pieces, eta))).collect();
    let mut best = (f64::INFINITY, 0.0);
    for &(eta, a) in &a_of_eta {
        let value = a + err / (eta * eta);
        if value < best.0 {
            best = (value, eta);
        }
    }
    ChiEstimate { err_chi: best.0, eta_opt: best.1, a_of_eta }
}

/// L¹ distance between `chi_star` and the thresholded field, with each node
/// carrying `weights[i]`; returns (mismatch, mismatch ≤ err_chi).
pub fn verify_chi_bound(v: &[f64], chi_star: &[f64], weights: &[f64], err_chi: f64) -> (f64, bool) {
    let chi_v = model::threshold(v, 0.5);
    let mismatch: f64 = chi_v.iter().zip(chi_star).zip(weights).map(|((a, b), w)| w * (a - b).abs()).sum();
    (mismatch, mismatch <= err_chi)
}

fn check_feasible(q: &[[f64; 2]]) -> Result<()> {
    let m = model::max_norm(q);
    if m > 1.0 + FEASIBILITY_TOL {
        return Err(Error::Infeasible { max_norm: m });
    }
    Ok(())
}

/// Discrete certificate of a scheme: 2ν/(c₁−c₂)² (E_h^rel[V] + D_h^rel[Q]).
/// It bounds the distance to the discrete minimizer in the scheme's primal norm.
pub fn discrete_estimate_u<D: Discretization + ?Sized>(
    disc: &D,
    v: &[f64],
    q: &[[f64; 2]],
    params: &ModelParams,
) -> Result<UEstimate> {
    check_feasible(q)?;
    let e = disc.energy_relaxed(v);
    let d = disc.energy_predual(q);
    Ok(UEstimate { err_u_sq: params.gap_scale() * (e + d), e_primal: e, d_predual: d, per_cell: Vec::new() })
}

#[derive(Clone, Copy)]
struct LocalAffine {
    origin: [f64; 2],
    value: f64,
    grad: [f64; 2],
    div: f64,
}

impl LocalAffine {
    #[inline]
    fn at(&self, x: f64, y: f64) -> f64 {
        self.value + self.grad[0] * (x - self.origin[0]) + self.grad[1] * (y - self.origin[1])
    }
}

#[inline]
fn densities(v: f64, grad_norm: f64, div: f64, u0: f64, params: &ModelParams) -> (f64, f64) {
    let (t1, t2) = params.theta_at(u0);
    (model::primal_density(v, t1, t2) + grad_norm, model::predual_density(div, t1, t2))
}

/// Continuous certificate for P1 fields on an adaptive mesh: `v` primal DOF
/// values and `q` nodal dual DOF vectors (feasible, zero normal trace).
///
/// For image data the integrals run over the finest lattice cells, where u₀ is
/// affine on the cross triangles; for analytic data they run over the mesh
/// triangles directly. Per-cell values follow the mesh leaves (Morton order).
pub fn estimate_u_mesh(
    mesh: &QuadMesh,
    v: &[f64],
    q: &[[f64; 2]],
    source: &Source,
    params: &ModelParams,
) -> Result<UEstimate> {
    if v.len() != mesh.n_dofs() || q.len() != mesh.n_dofs() {
        return Err(Error::SizeMismatch { expected: mesh.n_dofs(), got: v.len().min(q.len()) });
    }
    check_feasible(q)?;
    if let Source::Image(img) = source {
        if img.level() < mesh.finest_level() {
            return Err(Error::InvalidConfig(format!(
                "mesh level {} exceeds image level {}",
                mesh.finest_level(),
                img.level()
            )));
        }
    }
    let vn = mesh.expand(v);
    let qn = mesh.expand_vector(q);
    let pieces: Vec<LocalAffine> = (0..mesh.n_triangles())
        .map(|t| {
            let tri = mesh.triangles()[t];
            let g = mesh.barycentric_grads(t);
            let mut grad = [0.0; 2];
            let mut div = 0.0;
            for k in 0..3 {
                grad[0] += vn[tri[k]] * g[k][0];
                grad[1] += vn[tri[k]] * g[k][1];
                div += qn[tri[k]][0] * g[k][0] + qn[tri[k]][1] * g[k][1];
            }
            LocalAffine { origin: mesh.node_position(tri[0]), value: vn[tri[0]], grad, div }
        })
        .collect();

    let local: Vec<(f64, f64)> = (0..mesh.leaves().len())
        .into_par_iter()
        .map(|k| match source {
            Source::Analytic(f) => {
                let mut acc = (0.0, 0.0);
                for t in mesh.leaf_triangles(k) {
                    let p = mesh.triangle_vertices(t);
                    let la = &pieces[t];
                    let gn = la.grad[0].hypot(la.grad[1]);
                    let a = mesh.area(t);
                    for (l, w) in TRIANGLE_DEG4.iter() {
                        let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
                        let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
                        let (e, d) = densities(la.at(x, y), gn, la.div, f.eval(x, y), params);
                        acc.0 += w * a * e;
                        acc.1 += w * a * d;
                    }
                }
                acc
            }
            Source::Image(img) => leaf_image_integral(mesh, k, &pieces, img, params),
        })
        .collect();

    let scale = params.gap_scale();
    let mut e_total = 0.0;
    let mut d_total = 0.0;
    let mut per_cell = Vec::with_capacity(local.len());
    for &(e, d) in &local {
        e_total += e;
        d_total += d;
        per_cell.push(scale * (e + d));
    }
    Ok(UEstimate { err_u_sq: scale * (e_total + d_total), e_primal: e_total, d_predual: d_total, per_cell })
}

fn leaf_image_integral(
    mesh: &QuadMesh,
    k: usize,
    pieces: &[LocalAffine],
    img: &crate::input::Image,
    params: &ModelParams,
) -> (f64, f64) {
    let leaf = mesh.leaves()[k];
    let l0 = img.level();
    let sub = 1usize << (l0 - leaf.level);
    let h0 = (-(l0 as f64)).exp2();
    let (ox, oy) = (leaf.i as usize * sub, leaf.j as usize * sub);
    let leaf_size = leaf.size();
    let (lx, ly) = (leaf.i as f64 * leaf_size, leaf.j as f64 * leaf_size);
    let mut acc = (0.0, 0.0);
    // corner pairs of the four cross triangles, counter-clockwise from the bottom
    const TRI: [([f64; 2], [f64; 2]); 4] =
        [([0.0, 0.0], [1.0, 0.0]), ([1.0, 0.0], [1.0, 1.0]), ([1.0, 1.0], [0.0, 1.0]), ([0.0, 1.0], [0.0, 0.0])];
    for cy in oy..oy + sub {
        for cx in ox..ox + sub {
            let c = img.cell_corners(cx, cy);
            let (x0, y0) = (cx as f64 * h0, cy as f64 * h0);
            for (a, b) in TRI {
                let verts = [[a[0], a[1]], [b[0], b[1]], [0.5, 0.5]];
                let centroid = [(verts[0][0] + verts[1][0] + 0.5) / 3.0, (verts[0][1] + verts[1][1] + 0.5) / 3.0];
                // leaf triangle containing this sub-triangle
                let s = (x0 + centroid[0] * h0 - lx) / leaf_size;
                let t = (y0 + centroid[1] * h0 - ly) / leaf_size;
                let local = match (t - s > 0.0, t + s - 1.0 > 0.0) {
                    (false, false) => 0,
                    (false, true) => 1,
                    (true, true) => 2,
                    (true, false) => 3,
                };
                let la = &pieces[4 * k + local];
                let gn = la.grad[0].hypot(la.grad[1]);
                let area = h0 * h0 / 4.0;
                for (l, w) in TRIANGLE_DEG4.iter() {
                    let u = l[0] * verts[0][0] + l[1] * verts[1][0] + l[2] * verts[2][0];
                    let r = l[0] * verts[0][1] + l[1] * verts[1][1] + l[2] * verts[2][1];
                    let u0 = cross_value(c, u, r);
                    let (x, y) = (x0 + u * h0, y0 + r * h0);
                    let (e, d) = densities(la.at(x, y), gn, la.div, u0, params);
                    acc.0 += w * area * e;
                    acc.1 += w * area * d;
                }
            }
        }
    }
    acc
}

/// Continuous certificate for lattice fields: bilinear embeddings of `v` and `q`
/// (the caller zeroes the normal trace of `q`), integrated cellwise with the 3×3
/// Gauss rule. Image data is extended bilinearly on its own lattice.
pub fn estimate_u_lattice(
    lattice: &Lattice,
    v: &[f64],
    q: &[[f64; 2]],
    source: &Source,
    params: &ModelParams,
) -> Result<UEstimate> {
    if v.len() != lattice.n_nodes() || q.len() != lattice.n_nodes() {
        return Err(Error::SizeMismatch { expected: lattice.n_nodes(), got: v.len().min(q.len()) });
    }
    check_feasible(q)?;
    let cells = lattice.side() - 1;
    let h = lattice.h();
    let rule = square_gauss3();
    let local: Vec<(f64, f64)> = (0..cells * cells)
        .into_par_iter()
        .map(|idx| {
            let (cx, cy) = (idx % cells, idx / cells);
            let corner = |f: &dyn Fn(usize) -> f64| {
                [
                    f(lattice.index(cx, cy)),
                    f(lattice.index(cx + 1, cy)),
                    f(lattice.index(cx, cy + 1)),
                    f(lattice.index(cx + 1, cy + 1)),
                ]
            };
            let cv = corner(&|i| v[i]);
            let qx = corner(&|i| q[i][0]);
            let qy = corner(&|i| q[i][1]);
            let mut acc = (0.0, 0.0);
            for ([s, t], w) in rule.iter() {
                let (x, y) = ((cx as f64 + s) * h, (cy as f64 + t) * h);
                let gl = bilinear_grad_local(cv, *s, *t);
                let gn = gl[0].hypot(gl[1]) / h;
                let div = (bilinear_grad_local(qx, *s, *t)[0] + bilinear_grad_local(qy, *s, *t)[1]) / h;
                let u0 = match source {
                    Source::Image(img) => img.eval_bilinear(x, y).unwrap_or(0.0),
                    Source::Analytic(f) => f.eval(x, y),
                };
                let (e, d) = densities(bilinear(cv, *s, *t), gn, div, u0, params);
                acc.0 += w * h * h * e;
                acc.1 += w * h * h * d;
            }
            acc
        })
        .collect();
    let scale = params.gap_scale();
    let (mut e_total, mut d_total) = (0.0, 0.0);
    let mut per_cell = Vec::with_capacity(local.len());
    for &(e, d) in &local {
        e_total += e;
        d_total += d;
        per_cell.push(scale * (e + d));
    }
    Ok(UEstimate { err_u_sq: scale * (e_total + d_total), e_primal: e_total, d_predual: d_total, per_cell })
}
