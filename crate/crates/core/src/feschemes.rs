//! The two finite-element discretizations on adaptive quadtree meshes.
//!
//! Both use continuous P1 primal functions with the consistent mass product.
//! [`FeVariant::Fe`] carries a nodal dual field with the lumped mass product
//! and `Λ_h = P_h div`; [`FeVariant::FePrime`] carries one dual vector per
//! triangle, the exact elementwise gradient, and the weak divergence
//! `M W = −Gᵀ M_T Q`.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SpdFactor};
use crate::mesh::QuadMesh;
use crate::model::{self, ThetaFields};
use crate::pdsolver::{project_unit_ball, Discretization, PrimalStep};
use crate::quadrature::TRIANGLE_DEG4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeVariant {
    Fe,
    FePrime,
}

impl FeVariant {
    pub fn name(self) -> &'static str {
        match self {
            FeVariant::Fe => "fe",
            FeVariant::FePrime => "fe-prime",
        }
    }
}

/// ‖Λ_h‖² ≤ 96(3+2√2)/h_min² for FE and half of that for FE′.
pub fn fe_norm_bound(mesh: &QuadMesh, variant: FeVariant) -> f64 {
    let c = match variant {
        FeVariant::Fe => 96.0,
        FeVariant::FePrime => 48.0,
    };
    c * (3.0 + 2.0 * 2f64.sqrt()) / mesh.h_min().powi(2)
}

#[derive(Debug)]
pub struct FeScheme {
    variant: FeVariant,
    mesh: QuadMesh,
    theta: ThetaFields,
    theta_nodal: ThetaFields,
    mass: CsrMatrix,
    mass_factor: SpdFactor,
    lumped: Vec<f64>,
    derivative: Option<[CsrMatrix; 2]>,
    boundary_dofs: Vec<[bool; 2]>,
    boundary_triangles: Vec<bool>,
    mass_theta2: Vec<f64>,
}

impl FeScheme {
    /// `theta` holds the nodal values θ_{i,h} = I_h θᵢ at the mesh DOFs.
    pub fn new(variant: FeVariant, mesh: QuadMesh, theta: ThetaFields) -> Result<Self> {
        let n = mesh.n_dofs();
        if theta.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: theta.len() });
        }
        let mass = mesh.assemble_mass(None)?;
        let mass_factor = SpdFactor::new(&mass)?;
        let lumped = mesh.assemble_lumped_mass();
        let derivative = (variant == FeVariant::Fe).then(|| [mesh.assemble_derivative(0), mesh.assemble_derivative(1)]);
        let boundary_dofs = (0..n).map(|d| mesh.dof_on_boundary(d)).collect();
        let boundary_triangles = mesh
            .triangles()
            .iter()
            .map(|t| t.iter().any(|&k| mesh.node_on_boundary(k)))
            .collect();
        let mass_theta2 = mass.mul_vec(&theta.theta2);
        let theta_nodal = ThetaFields { theta1: mesh.expand(&theta.theta1), theta2: mesh.expand(&theta.theta2) };
        Ok(Self {
            variant,
            mesh,
            theta,
            theta_nodal,
            mass,
            mass_factor,
            lumped,
            derivative,
            boundary_dofs,
            boundary_triangles,
            mass_theta2,
        })
    }

    pub fn variant(&self) -> FeVariant {
        self.variant
    }

    pub fn mesh(&self) -> &QuadMesh {
        &self.mesh
    }

    pub fn theta(&self) -> &ThetaFields {
        &self.theta
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn mass_factor(&self) -> &SpdFactor {
        &self.mass_factor
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Zeroes the outward-normal component at boundary DOFs (FE) or every
    /// component on triangles touching ∂Ω (FE′).
    pub fn boundary_fix(&self, q: &mut [[f64; 2]]) {
        match self.variant {
            FeVariant::Fe => zero_normal_components(&self.boundary_dofs, q),
            FeVariant::FePrime => {
                for (v, &b) in q.iter_mut().zip(&self.boundary_triangles) {
                    if b {
                        *v = [0.0, 0.0];
                    }
                }
            }
        }
    }

    /// Right-hand side `M Λ_h Q` of the divergence.
    fn divergence_rhs(&self, q: &[[f64; 2]]) -> Vec<f64> {
        match (&self.derivative, self.variant) {
            (Some([bx, by]), FeVariant::Fe) => {
                let qx: Vec<f64> = q.iter().map(|v| v[0]).collect();
                let qy: Vec<f64> = q.iter().map(|v| v[1]).collect();
                let mut out = bx.mul_vec(&qx);
                by.mul_vec(&qy).iter().zip(out.iter_mut()).for_each(|(a, o)| *o += a);
                out
            }
            _ => {
                let mut nodal = vec![0.0; self.mesh.n_nodes()];
                for (t, tri) in self.mesh.triangles().iter().enumerate() {
                    let g = self.mesh.barycentric_grads(t);
                    let a = self.mesh.area(t);
                    for k in 0..3 {
                        nodal[tri[k]] -= a * (q[t][0] * g[k][0] + q[t][1] * g[k][1]);
                    }
                }
                self.mesh.reduce(&nodal)
            }
        }
    }

    /// Resolvent of G*_h for one step size; builds its own factorization.
    pub fn resolvent_gstar(&self, v: &[f64], tau: f64) -> Result<Vec<f64>> {
        let step = FeStep::new(self, tau)?;
        let mut rhs = self.mass.mul_vec(v);
        for (r, m) in rhs.iter_mut().zip(&self.mass_theta2) {
            *r += 2.0 * tau * m;
        }
        Ok(step.factor.solve(&rhs))
    }

    /// G*_h[V] = ∫ V²θ₁ + (1−V)²θ₂ with P1 θ; the degree-4 rule is exact here.
    pub fn data_energy(&self, v: &[f64]) -> f64 {
        let vn = self.mesh.expand(v);
        self.quadrature_sum(&vn, model::primal_density)
    }

    /// G_h[W] for a P1 field W.
    pub fn predual_data_energy(&self, w: &[f64]) -> f64 {
        let wn = self.mesh.expand(w);
        self.quadrature_sum(&wn, model::predual_density)
    }

    fn quadrature_sum(&self, nodal: &[f64], density: fn(f64, f64, f64) -> f64) -> f64 {
        let th = &self.theta_nodal;
        let mut total = 0.0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let mut local = 0.0;
            for (l, w) in TRIANGLE_DEG4.iter() {
                let at = |f: &[f64]| l[0] * f[tri[0]] + l[1] * f[tri[1]] + l[2] * f[tri[2]];
                local += w * density(at(nodal), at(&th.theta1), at(&th.theta2));
            }
            total += local * self.mesh.area(t);
        }
        total
    }

    /// L² projection of an elementwise field onto nodal P1 vectors, followed by
    /// radial rescaling and the nodal boundary fix.
    pub fn project_dual_to_nodes(&self, q: &[[f64; 2]]) -> Vec<[f64; 2]> {
        fep_project_dual(&self.mesh, &self.mass_factor, q)
    }
}

/// L² projection of an elementwise-constant vector field to nodal P1, rescaled
/// to the unit ball and with zero normal trace.
pub fn fep_project_dual(mesh: &QuadMesh, mass_factor: &SpdFactor, q: &[[f64; 2]]) -> Vec<[f64; 2]> {
    assert_eq!(q.len(), mesh.n_triangles());
    let mut nodal = [vec![0.0; mesh.n_nodes()], vec![0.0; mesh.n_nodes()]];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t) / 3.0;
        for &k in tri {
            nodal[0][k] += a * q[t][0];
            nodal[1][k] += a * q[t][1];
        }
    }
    let px = mass_factor.solve(&mesh.reduce(&nodal[0]));
    let py = mass_factor.solve(&mesh.reduce(&nodal[1]));
    let mut out: Vec<[f64; 2]> = px.into_iter().zip(py).map(|(x, y)| [x, y]).collect();
    project_unit_ball(&mut out);
    let boundary: Vec<[bool; 2]> = (0..mesh.n_dofs()).map(|d| mesh.dof_on_boundary(d)).collect();
    zero_normal_components(&boundary, &mut out);
    out
}

/// Zeroes the x-component on vertical boundary lines and the y-component on
/// horizontal ones.
pub fn zero_normal_components(boundary: &[[bool; 2]], q: &mut [[f64; 2]]) {
    for (v, b) in q.iter_mut().zip(boundary) {
        if b[0] {
            v[0] = 0.0;
        }
        if b[1] {
            v[1] = 0.0;
        }
    }
}

struct FeStep<'a> {
    scheme: &'a FeScheme,
    tau: f64,
    factor: SpdFactor,
}

impl<'a> FeStep<'a> {
    fn new(scheme: &'a FeScheme, tau: f64) -> Result<Self> {
        let w: Vec<f64> = scheme
            .theta
            .theta1
            .iter()
            .zip(&scheme.theta.theta2)
            .map(|(a, b)| 1.0 + 2.0 * tau * (a + b))
            .collect();
        let factor = SpdFactor::new(&scheme.mesh.assemble_mass(Some(&w))?)?;
        Ok(Self { scheme, tau, factor })
    }
}

impl PrimalStep for FeStep<'_> {
    fn apply(&self, u: &[f64], p: &[[f64; 2]], out: &mut [f64]) {
        let s = self.scheme;
        let div = s.divergence_rhs(p);
        s.mass.mul_vec_into(u, out);
        for i in 0..out.len() {
            out[i] += self.tau * (div[i] + 2.0 * s.mass_theta2[i]);
        }
        self.factor.solve_in_place(out);
    }
}

impl Discretization for FeScheme {
    fn name(&self) -> &'static str {
        self.variant.name()
    }

    fn primal_len(&self) -> usize {
        self.mesh.n_dofs()
    }

    fn dual_len(&self) -> usize {
        match self.variant {
            FeVariant::Fe => self.mesh.n_dofs(),
            FeVariant::FePrime => self.mesh.n_triangles(),
        }
    }

    fn gradient(&self, v: &[f64]) -> Vec<[f64; 2]> {
        let mut g = match (&self.derivative, self.variant) {
            (Some([bx, by]), FeVariant::Fe) => {
                let gx = bx.mul_transpose_vec(v);
                let gy = by.mul_transpose_vec(v);
                (0..v.len()).map(|i| [-gx[i] / self.lumped[i], -gy[i] / self.lumped[i]]).collect()
            }
            _ => self.mesh.triangle_gradients(v),
        };
        self.boundary_fix(&mut g);
        g
    }

    fn divergence(&self, q: &[[f64; 2]]) -> Vec<f64> {
        self.mass_factor.solve(&self.divergence_rhs(q))
    }

    fn dual_resolvent(&self, q: &mut [[f64; 2]]) {
        project_unit_ball(q);
        self.boundary_fix(q);
    }

    fn primal_stepper(&self, tau: f64) -> Result<Box<dyn PrimalStep + '_>> {
        Ok(Box::new(FeStep::new(self, tau)?))
    }

    fn norm_bound(&self) -> f64 {
        fe_norm_bound(&self.mesh, self.variant)
    }

    fn primal_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mb = self.mass.mul_vec(b);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    fn dual_dot(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let w = match self.variant {
            FeVariant::Fe => &self.lumped[..],
            FeVariant::FePrime => self.mesh.areas(),
        };
        a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x[0] * y[0] + x[1] * y[1])).sum()
    }

    fn energy_relaxed(&self, v: &[f64]) -> f64 {
        let g = self.gradient(v);
        let w = match self.variant {
            FeVariant::Fe => &self.lumped[..],
            FeVariant::FePrime => self.mesh.areas(),
        };
        let tv: f64 = g.iter().zip(w).map(|(g, w)| w * g[0].hypot(g[1])).sum();
        self.data_energy(v) + tv
    }

    fn energy_predual(&self, q: &[[f64; 2]]) -> f64 {
        if !q.iter().all(|&v| model::is_feasible_vector(v)) {
            return f64::INFINITY;
        }
        self.predual_data_energy(&self.divergence(q))
    }

    fn restrict_dual(&self, q: &mut [[f64; 2]]) {
        self.boundary_fix(q);
    }
}
