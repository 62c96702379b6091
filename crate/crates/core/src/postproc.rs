//! One implicit heat step `(M + ιS)⁻¹M` to damp oscillations before the
//! estimator is evaluated.

use crate::error::Result;
use crate::linalg::{CsrMatrix, SpdFactor};
use crate::mesh::QuadMesh;
use crate::pdsolver::{project_unit_ball, SchemeKind};

/// Smoothing parameters ι for the primal and the dual field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingPlan {
    pub primal: f64,
    pub dual: f64,
}

/// FE: (3h_min², 6h_min²); FE′: (0, 0.75·h_a^0.9); FD: no smoothing.
pub fn smoothing_plan(scheme: SchemeKind, mesh: &QuadMesh) -> SmoothingPlan {
    match scheme {
        SchemeKind::Fe => {
            let h2 = mesh.h_min().powi(2);
            SmoothingPlan { primal: 3.0 * h2, dual: 6.0 * h2 }
        }
        SchemeKind::FePrime => SmoothingPlan { primal: 0.0, dual: 0.75 * mesh.h_avg().powf(0.9) },
        SchemeKind::Fd => SmoothingPlan { primal: 0.0, dual: 0.0 },
    }
}

/// Factorized `M + ιS` on one mesh.
#[derive(Debug)]
pub struct Smoother {
    mass: CsrMatrix,
    factor: Option<SpdFactor>,
    iota: f64,
}

impl Smoother {
    pub fn new(mesh: &QuadMesh, iota: f64) -> Result<Self> {
        if !(iota >= 0.0) {
            return Err(crate::Error::InvalidConfig(format!("smoothing parameter must be >= 0, got {iota}")));
        }
        let mass = mesh.assemble_mass(None)?;
        let factor = if iota > 0.0 {
            Some(SpdFactor::new(&mass.linear_combination(1.0, &mesh.assemble_stiffness(), iota))?)
        } else {
            None
        };
        Ok(Self { mass, factor, iota })
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn smooth(&self, x: &[f64]) -> Vec<f64> {
        match &self.factor {
            None => x.to_vec(),
            Some(f) => f.solve(&self.mass.mul_vec(x)),
        }
    }

    /// Componentwise smoothing of a nodal vector field.
    pub fn smooth_vector(&self, q: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let x: Vec<f64> = q.iter().map(|v| v[0]).collect();
        let y: Vec<f64> = q.iter().map(|v| v[1]).collect();
        self.smooth(&x).into_iter().zip(self.smooth(&y)).map(|(a, b)| [a, b]).collect()
    }
}

/// `(M + ιS)⁻¹ M x` for a scalar P1 field.
pub fn smooth(mesh: &QuadMesh, x: &[f64], iota: f64) -> Result<Vec<f64>> {
    Ok(Smoother::new(mesh, iota)?.smooth(x))
}

/// Smooths a nodal dual field componentwise, then restores |q| ≤ 1 and the
/// zero normal trace.
pub fn smooth_dual(mesh: &QuadMesh, q: &[[f64; 2]], iota: f64) -> Result<Vec<[f64; 2]>> {
    let mut out = Smoother::new(mesh, iota)?.smooth_vector(q);
    let boundary: Vec<[bool; 2]> = (0..mesh.n_dofs()).map(|d| mesh.dof_on_boundary(d)).collect();
    crate::feschemes::zero_normal_components(&boundary, &mut out);
    project_unit_ball(&mut out);
    Ok(out)
}
