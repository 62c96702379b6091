//! One implicit heat step (M + ιS)⁻¹M on a noisy field and on a dual field.

use certseg::mesh::QuadMesh;
use certseg::pdsolver::SchemeKind;
use certseg::postproc::{smooth_dual, smoothing_plan, Smoother};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> certseg::Result<()> {
    let mesh = QuadMesh::uniform(5, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noisy: Vec<f64> = (0..mesh.n_dofs())
        .map(|d| {
            let [x, _] = mesh.dof_position(d);
            x + rng.random_range(-0.1..0.1)
        })
        .collect();

    for scheme in [SchemeKind::Fe, SchemeKind::FePrime] {
        let plan = smoothing_plan(scheme, &mesh);
        println!("{}: iota primal {:.3e}, dual {:.3e}", scheme.as_str(), plan.primal, plan.dual);
    }

    let plan = smoothing_plan(SchemeKind::Fe, &mesh);
    let smoother = Smoother::new(&mesh, plan.primal)?;
    let smoothed = smoother.smooth(&noisy);
    let rough = |v: &[f64]| {
        let g = mesh.triangle_gradients(v);
        (0..g.len()).map(|t| mesh.area(t) * (g[t][0].powi(2) + g[t][1].powi(2))).sum::<f64>()
    };
    println!("Dirichlet energy {:.3} -> {:.3}", rough(&noisy), rough(&smoothed));

    let q: Vec<[f64; 2]> = (0..mesh.n_dofs()).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let p = smooth_dual(&mesh, &q, plan.dual)?;
    let max = p.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    println!("smoothed dual: max |q| = {max:.4}");
    Ok(())
}
