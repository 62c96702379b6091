//! Brute-force checks of the guaranteed bounds on tiny lattices.

use certseg::estimator::{discrete_estimate_u, estimate_chi, verify_chi_bound, AffinePieces};
use certseg::fdgrid::{FdScheme, Lattice};
use certseg::model::{compute_theta, threshold, ModelParams};
use certseg::oracle::{bound_holds, exhaustive_binary_min, reference_relaxed_solve, run_suite};
use certseg::pdsolver::{Discretization, SolverConfig, SolverState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> certseg::Result<()> {
    for c in run_suite(0)? {
        println!("{:<30} {:5} {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lattice = Lattice::with_side(4)?;
    let u0: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
    let params = ModelParams::new(0.8, 0.2, 0.05)?;
    let disc = FdScheme::new(lattice, compute_theta(&u0, &params)?)?;
    let (chi_star, energy) = exhaustive_binary_min(&disc)?;
    println!("exhaustive minimizer (binary energy {energy:.5}): {chi_star:?}");

    let cfg = SolverConfig { max_iters: 100_000, ..SolverConfig::from_bound(disc.norm_bound(), 1.0, 0.9) };
    let reference = reference_relaxed_solve(&disc, &cfg, vec![0.5; 16], vec![[0.0; 2]; 16])?;
    let ref_err = discrete_estimate_u(&disc, &reference.u, &reference.p, &params)?.err_u_sq;
    println!("thresholded reference agrees with it: {}", threshold(&reference.u, 0.5) == chi_star);

    let w = lattice.h().powi(2);
    let mut state = SolverState::new(vec![0.0; 16], vec![[0.0; 2]; 16]);
    let step = disc.primal_stepper(cfg.tau)?;
    let mut scratch = Vec::new();
    for k in 1..=200 {
        state.iterate(&disc, step.as_ref(), cfg.sigma, &mut scratch);
        if k % 40 != 0 {
            continue;
        }
        let est = discrete_estimate_u(&disc, &state.u, &state.p, &params)?;
        let diff: Vec<f64> = reference.u.iter().zip(&state.u).map(|(a, b)| a - b).collect();
        let dist = disc.primal_dot(&diff, &diff);
        let chi = estimate_chi(&AffinePieces::nodal(&state.u, w), est.err_u_sq);
        let (mismatch, ok) = verify_chi_bound(&state.u, &chi_star, &vec![w; 16], chi.err_chi);
        println!(
            "iterate {k:3}: |U_ref - V|^2 {dist:.3e} <= {:.3e} [{}]   mismatch {mismatch:.4} <= {:.4} [{}]",
            est.err_u_sq,
            bound_holds(dist, est.err_u_sq, ref_err),
            chi.err_chi,
            ok
        );
    }
    Ok(())
}
