//! Adaptive quadtree meshes of the unit square.
//!
//! Every leaf square is split into four triangles meeting at an extra centre
//! node. Edge-adjacent leaves differ by at most one level, so an edge carries at
//! most one hanging node; hanging values are the mean of the two edge endpoints
//! and carry no degree of freedom. All matrices are assembled on the condensed
//! (non-hanging) DOFs.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SpdFactor};
use crate::quadrature::{bary_point, barycentric_gradients, signed_area, TRIANGLE_DEG4};

/// Deepest level a mesh may be built for.
pub const MAX_SUPPORTED_LEVEL: u32 = 14;

/// Quadtree cell `[i, i+1]×[j, j+1] · 2^−level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: u32,
    pub i: u32,
    pub j: u32,
}

impl CellId {
    pub fn new(level: u32, i: u32, j: u32) -> Self {
        Self { level, i, j }
    }

    pub fn size(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Children in Morton order.
    pub fn children(&self) -> [CellId; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [CellId::new(l, i, j), CellId::new(l, i + 1, j), CellId::new(l, i, j + 1), CellId::new(l, i + 1, j + 1)]
    }

    pub fn ancestor(&self, level: u32) -> CellId {
        debug_assert!(level <= self.level);
        let shift = self.level - level;
        CellId::new(level, self.i >> shift, self.j >> shift)
    }

    /// Morton index of the lower-left corner at resolution `max_level`.
    pub fn morton(&self, max_level: u32) -> u64 {
        let shift = max_level - self.level;
        interleave(self.i << shift, self.j << shift)
    }

    fn contains_point(&self, x: f64, y: f64) -> bool {
        let s = self.size();
        let (x0, y0) = (self.i as f64 * s, self.j as f64 * s);
        x >= x0 && x <= x0 + s && y >= y0 && y <= y0 + s
    }
}

fn interleave(x: u32, y: u32) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut v = v as u64;
        v = (v | (v << 16)) & 0x0000_FFFF_0000_FFFF;
        v = (v | (v << 8)) & 0x00FF_00FF_00FF_00FF;
        v = (v | (v << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        v = (v | (v << 2)) & 0x3333_3333_3333_3333;
        v = (v | (v << 1)) & 0x5555_5555_5555_5555;
        v
    }
    spread(x) | (spread(y) << 1)
}

/// How a mesh node maps onto degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeDofs {
    Dof(usize),
    /// Mean of two DOFs (the endpoints of the coarse edge the node sits on).
    Hanging([usize; 2]),
}

/// A hanging node and the mesh nodes it is interpolated from, each with weight ½.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub node: usize,
    pub parents: [usize; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefineSummary {
    /// Marked leaves that were split.
    pub split: usize,
    /// Additional leaves split to keep the mesh 1-irregular.
    pub closure: usize,
}

#[derive(Clone, Debug)]
pub struct QuadMesh {
    max_level: u32,
    leaves: Vec<CellId>,
    leaf_index: HashMap<CellId, usize>,
    /// Integer node coordinates on the grid of spacing 2^−(max_level+1).
    nodes: Vec<[u32; 2]>,
    node_lookup: HashMap<u64, usize>,
    node_dofs: Vec<NodeDofs>,
    constraints: Vec<Constraint>,
    dof_nodes: Vec<usize>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
}

fn node_key(p: [u32; 2]) -> u64 {
    ((p[0] as u64) << 32) | p[1] as u64
}

impl QuadMesh {
    /// Uniform mesh at `level`, refinable up to `max_level`.
    pub fn uniform(level: u32, max_level: u32) -> Result<Self> {
        if level > max_level || max_level > MAX_SUPPORTED_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "need level <= max_level <= {MAX_SUPPORTED_LEVEL}, got {level} and {max_level}"
            )));
        }
        let n = 1u32 << level;
        let leaves = (0..n).flat_map(|j| (0..n).map(move |i| CellId::new(level, i, j))).collect();
        Ok(Self::from_leaves(leaves, max_level))
    }

    fn from_leaves(mut leaves: Vec<CellId>, max_level: u32) -> Self {
        leaves.sort_by_key(|c| c.morton(max_level));
        let leaf_index = leaves.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let scale_shift = max_level + 1;

        let mut nodes: Vec<[u32; 2]> = Vec::new();
        let mut node_lookup: HashMap<u64, usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * leaves.len());
        let mut intern = |p: [u32; 2], nodes: &mut Vec<[u32; 2]>| -> usize {
            *node_lookup.entry(node_key(p)).or_insert_with(|| {
                nodes.push(p);
                nodes.len() - 1
            })
        };
        for c in &leaves {
            let s = 1u32 << (scale_shift - c.level);
            let (x, y) = (c.i * s, c.j * s);
            let c0 = intern([x, y], &mut nodes);
            let c1 = intern([x + s, y], &mut nodes);
            let c2 = intern([x + s, y + s], &mut nodes);
            let c3 = intern([x, y + s], &mut nodes);
            let m = intern([x + s / 2, y + s / 2], &mut nodes);
            triangles.extend([[c0, c1, m], [c1, c2, m], [c2, c3, m], [c3, c0, m]]);
        }
        let node_lookup: HashMap<u64, usize> = nodes.iter().enumerate().map(|(k, &p)| (node_key(p), k)).collect();

        // a leaf edge midpoint that is a node belongs to a finer neighbour: hanging
        let mut hanging_parents: Vec<Option<[usize; 2]>> = vec![None; nodes.len()];
        for c in &leaves {
            let s = 1u32 << (scale_shift - c.level);
            let (x, y) = (c.i * s, c.j * s);
            let corners = [[x, y], [x + s, y], [x + s, y + s], [x, y + s]];
            for e in 0..4 {
                let a = corners[e];
                let b = corners[(e + 1) % 4];
                let mid = [(a[0] + b[0]) / 2, (a[1] + b[1]) / 2];
                if let Some(&k) = node_lookup.get(&node_key(mid)) {
                    hanging_parents[k] = Some([node_lookup[&node_key(a)], node_lookup[&node_key(b)]]);
                }
            }
        }

        let mut node_dofs = Vec::with_capacity(nodes.len());
        let mut dof_nodes = Vec::new();
        let mut dof_of_node = vec![usize::MAX; nodes.len()];
        for k in 0..nodes.len() {
            if hanging_parents[k].is_none() {
                dof_of_node[k] = dof_nodes.len();
                dof_nodes.push(k);
            }
        }
        let mut constraints = Vec::new();
        for k in 0..nodes.len() {
            match hanging_parents[k] {
                None => node_dofs.push(NodeDofs::Dof(dof_of_node[k])),
                Some([a, b]) => {
                    debug_assert!(hanging_parents[a].is_none() && hanging_parents[b].is_none());
                    node_dofs.push(NodeDofs::Hanging([dof_of_node[a], dof_of_node[b]]));
                    constraints.push(Constraint { node: k, parents: [a, b] });
                }
            }
        }

        let scale = (scale_shift as f64).exp2();
        let pos = |k: usize| [nodes[k][0] as f64 / scale, nodes[k][1] as f64 / scale];
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let p = [pos(t[0]), pos(t[1]), pos(t[2])];
            areas.push(signed_area(p[0], p[1], p[2]));
            grads.push(barycentric_gradients(p));
        }

        Self {
            max_level,
            leaves,
            leaf_index,
            nodes,
            node_lookup,
            node_dofs,
            constraints,
            dof_nodes,
            triangles,
            areas,
            grads,
        }
    }

    /// Splits the given leaves (closure refinement included). Cells that are no
    /// longer leaves or already sit at `max_level` are skipped.
    pub fn refine(&self, marked: &[CellId]) -> (QuadMesh, RefineSummary) {
        let mut set: HashSet<CellId> = self.leaves.iter().copied().collect();
        let mut summary = RefineSummary::default();
        for &c in marked {
            if set.contains(&c) && c.level < self.max_level {
                split_with_closure(&mut set, c, &mut summary.closure);
                summary.split += 1;
            }
        }
        (Self::from_leaves(set.into_iter().collect(), self.max_level), summary)
    }

    pub fn refine_uniformly(&self) -> QuadMesh {
        self.refine(&self.leaves.clone()).0
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Leaves in Morton order.
    pub fn leaves(&self) -> &[CellId] {
        &self.leaves
    }

    pub fn leaf_position(&self, c: &CellId) -> Option<usize> {
        self.leaf_index.get(c).copied()
    }

    /// The leaf covering the cell `c` (an ancestor of `c` or `c` itself).
    pub fn covering_leaf(&self, c: CellId) -> Option<usize> {
        (0..=c.level).rev().find_map(|l| self.leaf_index.get(&c.ancestor(l)).copied())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_hanging(&self) -> usize {
        self.constraints.len()
    }

    pub fn node_dofs(&self) -> &[NodeDofs] {
        &self.node_dofs
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Triangles of leaf `k` are `4k..4k+4`.
    pub fn leaf_triangles(&self, k: usize) -> std::ops::Range<usize> {
        4 * k..4 * k + 4
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn barycentric_grads(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    fn scale(&self) -> f64 {
        ((self.max_level + 1) as f64).exp2()
    }

    pub fn node_position(&self, k: usize) -> [f64; 2] {
        let s = self.scale();
        [self.nodes[k][0] as f64 / s, self.nodes[k][1] as f64 / s]
    }

    pub fn dof_position(&self, d: usize) -> [f64; 2] {
        self.node_position(self.dof_nodes[d])
    }

    pub fn dof_node(&self, d: usize) -> usize {
        self.dof_nodes[d]
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.node_position(a), self.node_position(b), self.node_position(c)]
    }

    /// Whether DOF `d` lies on the lines x ∈ {0,1} and y ∈ {0,1} respectively.
    pub fn dof_on_boundary(&self, d: usize) -> [bool; 2] {
        let p = self.nodes[self.dof_nodes[d]];
        let top = 1u32 << (self.max_level + 1);
        [p[0] == 0 || p[0] == top, p[1] == 0 || p[1] == top]
    }

    pub fn node_on_boundary(&self, k: usize) -> bool {
        let p = self.nodes[k];
        let top = 1u32 << (self.max_level + 1);
        p[0] == 0 || p[0] == top || p[1] == 0 || p[1] == top
    }

    pub fn h_min(&self) -> f64 {
        let l = self.leaves.iter().map(|c| c.level).max().unwrap_or(0);
        (-(l as f64)).exp2()
    }

    /// Mean leaf edge length.
    pub fn h_avg(&self) -> f64 {
        self.leaves.iter().map(CellId::size).sum::<f64>() / self.leaves.len() as f64
    }

    pub fn min_level(&self) -> u32 {
        self.leaves.iter().map(|c| c.level).min().unwrap_or(0)
    }

    pub fn finest_level(&self) -> u32 {
        self.leaves.iter().map(|c| c.level).max().unwrap_or(0)
    }

    /// Checks that edge-adjacent leaves differ by at most one level.
    pub fn is_one_irregular(&self) -> bool {
        let set: HashSet<CellId> = self.leaves.iter().copied().collect();
        self.leaves.iter().all(|c| {
            neighbours(c).into_iter().flatten().all(|n| match covering_leaf(&set, n) {
                Some(leaf) => c.level - leaf.level <= 1,
                None => true,
            })
        })
    }

    /// Node values from DOF values.
    pub fn expand(&self, dofs: &[f64]) -> Vec<f64> {
        assert_eq!(dofs.len(), self.n_dofs());
        self.node_dofs
            .iter()
            .map(|nd| match *nd {
                NodeDofs::Dof(d) => dofs[d],
                NodeDofs::Hanging([a, b]) => 0.5 * (dofs[a] + dofs[b]),
            })
            .collect()
    }

    pub fn expand_vector(&self, dofs: &[[f64; 2]]) -> Vec<[f64; 2]> {
        assert_eq!(dofs.len(), self.n_dofs());
        self.node_dofs
            .iter()
            .map(|nd| match *nd {
                NodeDofs::Dof(d) => dofs[d],
                NodeDofs::Hanging([a, b]) => [0.5 * (dofs[a][0] + dofs[b][0]), 0.5 * (dofs[a][1] + dofs[b][1])],
            })
            .collect()
    }

    /// Transpose of [`QuadMesh::expand`]: accumulates node values onto DOFs.
    pub fn reduce(&self, nodes: &[f64]) -> Vec<f64> {
        assert_eq!(nodes.len(), self.n_nodes());
        let mut out = vec![0.0; self.n_dofs()];
        for (k, nd) in self.node_dofs.iter().enumerate() {
            match *nd {
                NodeDofs::Dof(d) => out[d] += nodes[k],
                NodeDofs::Hanging([a, b]) => {
                    out[a] += 0.5 * nodes[k];
                    out[b] += 0.5 * nodes[k];
                }
            }
        }
        out
    }

    fn condense(&self, local: impl Fn(usize) -> [[f64; 3]; 3]) -> CsrMatrix {
        let n = self.n_dofs();
        let mut trip = Vec::with_capacity(self.triangles.len() * 9 * 2);
        let weights = |k: usize| -> ([(usize, f64); 2], usize) {
            match self.node_dofs[k] {
                NodeDofs::Dof(d) => ([(d, 1.0), (0, 0.0)], 1),
                NodeDofs::Hanging([a, b]) => ([(a, 0.5), (b, 0.5)], 2),
            }
        };
        for (t, tri) in self.triangles.iter().enumerate() {
            let m = local(t);
            for a in 0..3 {
                let (wa, na) = weights(tri[a]);
                for b in 0..3 {
                    let (wb, nb) = weights(tri[b]);
                    for &(da, xa) in &wa[..na] {
                        for &(db, xb) in &wb[..nb] {
                            trip.push((da, db, xa * xb * m[a][b]));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, n, trip)
    }

    /// Consistent mass matrix, optionally weighted by a positive P1 field given
    /// by DOF values.
    pub fn assemble_mass(&self, weight: Option<&[f64]>) -> Result<CsrMatrix> {
        match weight {
            None => Ok(self.condense(|t| {
                let a = self.areas[t];
                let (d, o) = (a / 6.0, a / 12.0);
                [[d, o, o], [o, d, o], [o, o, d]]
            })),
            Some(w) => {
                if w.len() != self.n_dofs() {
                    return Err(Error::SizeMismatch { expected: self.n_dofs(), got: w.len() });
                }
                if let Some(bad) = w.iter().find(|&&x| !(x > 0.0)) {
                    return Err(Error::InvalidParams(format!("mass weight must be positive, found {bad}")));
                }
                let wn = self.expand(w);
                Ok(self.condense(|t| {
                    let a = self.areas[t];
                    let tri = self.triangles[t];
                    let wl = [wn[tri[0]], wn[tri[1]], wn[tri[2]]];
                    weighted_local_mass(a, wl)
                }))
            }
        }
    }

    pub fn assemble_stiffness(&self) -> CsrMatrix {
        self.condense(|t| {
            let g = &self.grads[t];
            let a = self.areas[t];
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
            m
        })
    }

    /// Diagonal of the lumped mass matrix (row sums of the consistent one).
    pub fn assemble_lumped_mass(&self) -> Vec<f64> {
        let mut nodal = vec![0.0; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &k in tri {
                nodal[k] += self.areas[t] / 3.0;
            }
        }
        self.reduce(&nodal)
    }

    /// `B[i][j] = ∫ φᵢ ∂_c φⱼ` for direction `c`.
    pub fn assemble_derivative(&self, c: usize) -> CsrMatrix {
        self.condense(|t| {
            let g = &self.grads[t];
            let a = self.areas[t] / 3.0;
            let mut m = [[0.0; 3]; 3];
            for row in m.iter_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = a * g[j][c];
                }
            }
            m
        })
    }

    /// Elementwise gradients of the P1 function with the given DOF values.
    pub fn triangle_gradients(&self, dofs: &[f64]) -> Vec<[f64; 2]> {
        let nodal = self.expand(dofs);
        self.triangle_gradients_nodal(&nodal)
    }

    pub fn triangle_gradients_nodal(&self, nodal: &[f64]) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .zip(&self.grads)
            .map(|(tri, g)| {
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += nodal[tri[k]] * g[k][0];
                    out[1] += nodal[tri[k]] * g[k][1];
                }
                out
            })
            .collect()
    }

    /// Lagrange interpolation at the non-hanging nodes.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_dofs()).map(|d| {
            let [x, y] = self.dof_position(d);
            f(x, y)
        }).collect()
    }

    /// `bᵢ = ∫ φᵢ g` by the degree-4 triangle rule.
    pub fn load_vector(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut nodal = vec![0.0; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let p = self.triangle_vertices(t);
            let a = self.areas[t];
            for (l, w) in TRIANGLE_DEG4.iter() {
                let [x, y] = bary_point(&p, l);
                let v = g(x, y) * w * a;
                for k in 0..3 {
                    nodal[tri[k]] += v * l[k];
                }
            }
        }
        self.reduce(&nodal)
    }

    /// L² projection onto the P1 space.
    pub fn project_l2(&self, g: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let factor = SpdFactor::new(&self.assemble_mass(None)?)?;
        Ok(factor.solve(&self.load_vector(g)))
    }

    /// Triangle containing the point together with its barycentric coordinates.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, [f64; 3])> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let n = 1u32 << self.max_level;
        let fx = ((x * n as f64).floor() as u32).min(n - 1);
        let fy = ((y * n as f64).floor() as u32).min(n - 1);
        let k = self
            .covering_leaf(CellId::new(self.max_level, fx, fy))
            .expect("leaves cover the domain");
        let c = self.leaves[k];
        debug_assert!(c.contains_point(x, y));
        let s = c.size();
        let (u, v) = ((x - c.i as f64 * s) / s, (y - c.j as f64 * s) / s);
        let d1 = v - u;
        let d2 = v + u - 1.0;
        let local = match (d1 > 0.0, d2 > 0.0) {
            (false, false) => 0,
            (false, true) => 1,
            (true, true) => 2,
            (true, false) => 3,
        };
        let t = 4 * k + local;
        let p = self.triangle_vertices(t);
        let a = self.areas[t];
        let q = [x, y];
        let l = [
            signed_area(q, p[1], p[2]) / a,
            signed_area(p[0], q, p[2]) / a,
            signed_area(p[0], p[1], q) / a,
        ];
        Ok((t, l))
    }

    /// Evaluates a P1 function given by node values.
    pub fn eval_nodal(&self, nodal: &[f64], x: f64, y: f64) -> Result<f64> {
        let (t, l) = self.locate(x, y)?;
        let tri = self.triangles[t];
        Ok(l[0] * nodal[tri[0]] + l[1] * nodal[tri[1]] + l[2] * nodal[tri[2]])
    }

    /// Interpolates the P1 function `dofs` on `coarse` onto this (nested) mesh.
    pub fn prolong_from(&self, coarse: &QuadMesh, dofs: &[f64]) -> Result<Vec<f64>> {
        let nodal = coarse.expand(dofs);
        (0..self.n_dofs())
            .map(|d| {
                let [x, y] = self.dof_position(d);
                coarse.eval_nodal(&nodal, x, y)
            })
            .collect()
    }

    /// For each triangle, the triangle of `coarse` that contains it.
    pub fn parent_triangles(&self, coarse: &QuadMesh) -> Result<Vec<usize>> {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_vertices(t);
                let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
                let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
                coarse.locate(cx, cy).map(|(t, _)| t)
            })
            .collect()
    }

    /// Text listing of the leaves (Morton order) and the hanging-node table.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# quadmesh max_level={} leaves={} nodes={} dofs={} hanging={} scale={}",
            self.max_level,
            self.leaves.len(),
            self.n_nodes(),
            self.n_dofs(),
            self.n_hanging(),
            1u64 << (self.max_level + 1)
        );
        for c in &self.leaves {
            let _ = writeln!(s, "leaf {} {} {}", c.level, c.i, c.j);
        }
        for con in &self.constraints {
            let [x, y] = self.nodes[con.node];
            let [a, b] = con.parents.map(|k| self.nodes[k]);
            let _ = writeln!(s, "hanging {x} {y} {} {} {} {}", a[0], a[1], b[0], b[1]);
        }
        s
    }

    /// Looks up a node by its integer coordinates at the mesh scale.
    pub fn node_at(&self, p: [u32; 2]) -> Option<usize> {
        self.node_lookup.get(&node_key(p)).copied()
    }
}

/// `∫ w φᵢ φⱼ` on one triangle for P1 weight `w` with vertex values `wl`.
pub fn weighted_local_mass(area: f64, wl: [f64; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    let wsum = wl[0] + wl[1] + wl[2];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = if i == j {
                area * (wl[i] / 10.0 + (wsum - wl[i]) / 30.0)
            } else {
                let k = 3 - i - j;
                area * ((wl[i] + wl[j]) / 30.0 + wl[k] / 60.0)
            };
        }
    }
    m
}

fn neighbours(c: &CellId) -> [Option<CellId>; 4] {
    let n = 1u32 << c.level;
    [
        (c.i > 0).then(|| CellId::new(c.level, c.i - 1, c.j)),
        (c.i + 1 < n).then(|| CellId::new(c.level, c.i + 1, c.j)),
        (c.j > 0).then(|| CellId::new(c.level, c.i, c.j - 1)),
        (c.j + 1 < n).then(|| CellId::new(c.level, c.i, c.j + 1)),
    ]
}

fn covering_leaf(set: &HashSet<CellId>, c: CellId) -> Option<CellId> {
    (0..=c.level).rev().map(|l| c.ancestor(l)).find(|a| set.contains(a))
}

fn split_with_closure(set: &mut HashSet<CellId>, c: CellId, closure: &mut usize) {
    for n in neighbours(&c).into_iter().flatten() {
        if let Some(leaf) = covering_leaf(set, n) {
            if leaf.level < c.level {
                split_with_closure(set, leaf, closure);
                *closure += 1;
            }
        }
    }
    set.remove(&c);
    set.extend(c.children());
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn adaptive_mesh() -> QuadMesh {
        let m = QuadMesh::uniform(1, 5).unwrap();
        let (m, _) = m.refine(&[CellId::new(1, 0, 0)]);
        let (m, _) = m.refine(&[CellId::new(2, 1, 1)]);
        m
    }

    #[test]
    fn single_refinement_counts() {
        let m = QuadMesh::uniform(0, 3).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (5, 4));
        let m = m.refine_uniformly();
        assert_eq!(m.leaves().len(), 4);
        assert_eq!(m.n_nodes(), 13);
        assert_eq!(m.n_triangles(), 16);
        assert_eq!(m.n_hanging(), 0);
    }

    #[test]
    fn refining_one_child_hangs_two_nodes() {
        let m = QuadMesh::uniform(1, 3).unwrap();
        let (m, s) = m.refine(&[CellId::new(1, 0, 0)]);
        assert_eq!(s, RefineSummary { split: 1, closure: 0 });
        assert_eq!(m.n_hanging(), 2);
        // midpoints of the two interior edges of the refined child
        let scale = 16u32;
        let mids = [[scale / 4, scale / 2], [scale / 2, scale / 4]];
        let mut got: Vec<[u32; 2]> = m.constraints().iter().map(|c| m.nodes[c.node]).collect();
        got.sort();
        let mut want = mids.to_vec();
        want.sort();
        assert_eq!(got, want);
        for c in m.constraints() {
            assert!(m.node_dofs()[c.parents[0]] != m.node_dofs()[c.parents[1]]);
            assert!(c.parents.iter().all(|&p| matches!(m.node_dofs()[p], NodeDofs::Dof(_))));
        }
        assert_eq!(m.n_dofs(), m.n_nodes() - m.n_hanging());
    }

    #[test]
    fn closure_refinement_restores_one_irregularity() {
        let m = QuadMesh::uniform(1, 4).unwrap();
        let (m, _) = m.refine(&[CellId::new(1, 0, 0)]);
        // (2,1,1) touches the unrefined level-1 cells (1,1,0) and (1,0,1)
        let (m2, s) = m.refine(&[CellId::new(2, 1, 1)]);
        assert_eq!(s, RefineSummary { split: 1, closure: 2 });
        assert!(m2.is_one_irregular());
        assert!(m2.leaf_position(&CellId::new(1, 1, 0)).is_none());
        assert!(m2.leaf_position(&CellId::new(1, 0, 1)).is_none());
        assert!(m2.leaf_position(&CellId::new(1, 1, 1)).is_some());
    }

    #[test]
    fn refine_is_capped_at_max_level() {
        let m = QuadMesh::uniform(2, 2).unwrap();
        let (m2, s) = m.refine(&[CellId::new(2, 0, 0)]);
        assert_eq!(s.split, 0);
        assert_eq!(m2.leaves().len(), 16);
    }

    #[test]
    fn random_refinements_keep_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = QuadMesh::uniform(2, 6).unwrap();
        for _ in 0..6 {
            let marked: Vec<CellId> = m.leaves().iter().copied().filter(|_| rng.random_bool(0.2)).collect();
            m = m.refine(&marked).0;
            assert!(m.is_one_irregular());
            assert_eq!(m.n_dofs(), m.n_nodes() - m.n_hanging());
            for c in m.constraints() {
                let [a, b] = c.parents.map(|k| m.nodes[k]);
                let x = m.nodes[c.node];
                assert_eq!([a[0] + b[0], a[1] + b[1]], [2 * x[0], 2 * x[1]]);
                assert!(!m.node_on_boundary(c.node));
            }
            let total: f64 = m.areas().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_matrix_properties() {
        let m = adaptive_mesh();
        let mass = m.assemble_mass(None).unwrap();
        let ones = vec![1.0; m.n_dofs()];
        assert!((mass.quadratic_form(&ones) - 1.0).abs() < 1e-12);
        assert!(mass.asymmetry() < 1e-14);
        SpdFactor::new(&mass).unwrap();
        let two = m.assemble_mass(Some(&vec![2.0; m.n_dofs()])).unwrap();
        for r in 0..m.n_dofs() {
            for (c, v) in two.row(r) {
                assert!((v - 2.0 * mass.get(r, c)).abs() < 1e-15);
            }
        }
        assert!(m.assemble_mass(Some(&vec![0.0; m.n_dofs()])).is_err());
    }

    #[test]
    fn unrefined_cell_mass_entries() {
        let m = QuadMesh::uniform(0, 2).unwrap();
        let mass = m.assemble_mass(None).unwrap();
        // each of the 4 triangles has area 1/4; corners touch two, the centre all four
        let a = 0.25;
        let centre = m.node_at([4, 4]).unwrap();
        let c0 = m.node_at([0, 0]).unwrap();
        let c1 = m.node_at([8, 0]).unwrap();
        let c2 = m.node_at([8, 8]).unwrap();
        let d = |k: usize| match m.node_dofs()[k] {
            NodeDofs::Dof(d) => d,
            _ => unreachable!(),
        };
        assert!((mass.get(d(centre), d(centre)) - 4.0 * a / 6.0).abs() < 1e-15);
        assert!((mass.get(d(c0), d(c0)) - 2.0 * a / 6.0).abs() < 1e-15);
        assert!((mass.get(d(c0), d(c1)) - a / 12.0).abs() < 1e-15);
        assert!((mass.get(d(c0), d(centre)) - 2.0 * a / 12.0).abs() < 1e-15);
        assert_eq!(mass.get(d(c0), d(c2)), 0.0);
    }

    #[test]
    fn stiffness_properties() {
        let m = adaptive_mesh();
        let s = m.assemble_stiffness();
        let ones = vec![1.0; m.n_dofs()];
        assert!(s.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(s.asymmetry() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..m.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sv = s.mul_vec(&v);
        assert!(sv.iter().sum::<f64>().abs() < 1e-12);
        // energy equals the elementwise sum of |∇v|² |T|
        let g = m.triangle_gradients(&v);
        let direct: f64 = g.iter().zip(m.areas()).map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1])).sum();
        assert!((s.quadratic_form(&v) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn unit_leg_triangle_stiffness() {
        let g = barycentric_gradients([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let a = 0.5;
        let k = |i: usize, j: usize| a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        // cot-weight form: right angle at vertex 0, 45° at the others
        assert!((k(0, 0) - 1.0).abs() < 1e-15);
        assert!((k(1, 1) - 0.5).abs() < 1e-15);
        assert!((k(0, 1) + 0.5).abs() < 1e-15);
        assert!(k(1, 2).abs() < 1e-15);
    }

    #[test]
    fn lumped_mass_properties() {
        let m = adaptive_mesh();
        let lumped = m.assemble_lumped_mass();
        assert!(lumped.iter().all(|&v| v > 0.0));
        assert!((lumped.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let rows = m.assemble_mass(None).unwrap().row_sums();
        for (a, b) in lumped.iter().zip(&rows) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_and_projection_reproduce_affine() {
        let m = adaptive_mesh();
        let f = |x: f64, y: f64| 0.3 + 2.0 * x - 0.7 * y;
        let i = m.interpolate(f);
        let p = m.project_l2(f).unwrap();
        for d in 0..m.n_dofs() {
            let [x, y] = m.dof_position(d);
            assert!((i[d] - f(x, y)).abs() < 1e-14);
            assert!((p[d] - f(x, y)).abs() < 1e-10);
        }
        // projecting a P1 function (here with hanging-node constraints) is the identity
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..m.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nodal = m.expand(&v);
        let pv = m.project_l2(|x, y| m.eval_nodal(&nodal, x, y).unwrap()).unwrap();
        for (a, b) in v.iter().zip(&pv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prolongation_is_exact() {
        let coarse = adaptive_mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..coarse.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let marked: Vec<CellId> = coarse.leaves().iter().step_by(3).copied().collect();
        let (fine, _) = coarse.refine(&marked);
        let w = fine.prolong_from(&coarse, &v).unwrap();
        for d in 0..coarse.n_dofs() {
            let k = coarse.dof_node(d);
            let fk = fine.node_at(coarse.nodes[k]).unwrap();
            let NodeDofs::Dof(fd) = fine.node_dofs()[fk] else { panic!("old node hangs") };
            assert_eq!(w[fd], v[d]);
        }
        let cn = coarse.expand(&v);
        let fnodal = fine.expand(&w);
        for _ in 0..200 {
            let (x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let a = coarse.eval_nodal(&cn, x, y).unwrap();
            let b = fine.eval_nodal(&fnodal, x, y).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
        let parents = fine.parent_triangles(&coarse).unwrap();
        assert_eq!(parents.len(), fine.n_triangles());
    }

    #[test]
    fn dump_is_morton_ordered() {
        let m = adaptive_mesh();
        let d = m.dump();
        assert!(d.starts_with("# quadmesh"));
        let keys: Vec<u64> = m.leaves().iter().map(|c| c.morton(m.max_level())).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d.lines().filter(|l| l.starts_with("hanging")).count(), m.n_hanging());
    }

    #[test]
    fn locate_rejects_outside() {
        let m = adaptive_mesh();
        assert!(m.locate(-0.1, 0.5).is_err());
        let (_, l) = m.locate(0.3, 0.7).unwrap();
        assert!(l.iter().all(|&v| v >= -1e-14));
    }
}
