//! Single finite difference solve on a lattice with the discrete and the
//! continuous certificates side by side.

use certseg::estimator::{discrete_estimate_u, estimate_u_lattice, AffinePieces, Certificate};
use certseg::fdgrid::{fd_zero_normal_trace, FdScheme};
use certseg::input::{Image, Source};
use certseg::model::{compute_theta, ModelParams};
use certseg::pdsolver::{solve, Discretization, SolverConfig};

fn main() -> certseg::Result<()> {
    let img = Image::from_fn(6, |x, y| if (x - 0.5).abs() + (y - 0.5).abs() < 0.3 { 0.8 } else { 0.1 });
    let params = ModelParams::new(0.8, 0.1, 2e-2)?;
    let lattice = img.lattice();
    let disc = FdScheme::new(lattice, compute_theta(img.values(), &params)?)?;
    let solver = SolverConfig { threshold: 1e-8, ..SolverConfig::from_bound(disc.norm_bound(), 1.0, 0.9) };

    let outcome = solve(&disc, &solver, img.values().to_vec(), vec![[0.0; 2]; lattice.n_nodes()])?;
    println!("{} iterations, converged: {}", outcome.iterations, outcome.converged);
    for (k, gap) in outcome.gaps.iter().step_by(10) {
        println!("  iteration {k:6}: discrete gap {gap:.3e}");
    }

    let discrete = discrete_estimate_u(&disc, &outcome.u, &outcome.p, &params)?;
    println!("discrete err_u^2   {:.4e}", discrete.err_u_sq);

    let mut q = outcome.p.clone();
    fd_zero_normal_trace(&lattice, &mut q);
    let source = Source::Image(img);
    let est = estimate_u_lattice(&lattice, &outcome.u, &q, &source, &params)?;
    let cert = Certificate::new(est, &AffinePieces::from_lattice(&lattice, &outcome.u));
    println!("continuous err_u^2 {:.4e}  (E = {:.5}, D = {:.5})", cert.err_u_sq, cert.e_primal, cert.d_predual);
    println!("err_chi {:.4e} at eta = {}", cert.err_chi, cert.eta_opt);
    Ok(())
}
