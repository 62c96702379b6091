//! Brute-force verifiers for tests and the `verify` subcommand. Nothing in the
//! production pipeline calls into this module.

use crate::error::{Error, Result};
use crate::model;
use crate::pdsolver::{self, Discretization, SolveOutcome, SolverConfig};

/// Largest DOF count accepted by [`exhaustive_binary_min`].
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// Enumerates all binary fields and returns the minimizer of the discrete binary
/// energy together with its value. Ties keep the lexicographically smallest field
/// (node 0 most significant).
pub fn exhaustive_binary_min<D: Discretization + ?Sized>(disc: &D) -> Result<(Vec<f64>, f64)> {
    let n = disc.primal_len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::OracleTooLarge { dofs: n, limit: EXHAUSTIVE_LIMIT });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut chi = vec![0.0; n];
    for code in 0u32..(1u32 << n) {
        for (i, c) in chi.iter_mut().enumerate() {
            *c = ((code >> (n - 1 - i)) & 1) as f64;
        }
        let e = model::energy_binary(&chi, disc)?;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((chi.clone(), e));
        }
    }
    Ok(best.expect("at least one configuration"))
}

/// High-accuracy relaxed solve: threshold 1e−12 and ten times the iteration cap.
pub fn reference_relaxed_solve<D: Discretization + ?Sized>(
    disc: &D,
    config: &SolverConfig,
    u0: Vec<f64>,
    p0: Vec<[f64; 2]>,
) -> Result<SolveOutcome> {
    let cfg = SolverConfig { threshold: 1e-12, max_iters: config.max_iters.saturating_mul(10), ..*config };
    pdsolver::solve(disc, &cfg, u0, p0)
}

/// Golden-section minimization of y ↦ (y−v)² + 2τ(y²θ₁ + (1−y)²θ₂) on [−1, 2].
pub fn scalar_prox_oracle(v: f64, tau: f64, theta1: f64, theta2: f64) -> f64 {
    // f(c) − f(d) in factored form, so comparisons near the minimum are not
    // swamped by cancellation
    let less = |c: f64, d: f64| {
        let s = c + d;
        (c - d) * ((s - 2.0 * v) + 2.0 * tau * (theta1 * s - theta2 * (2.0 - s))) < 0.0
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-1.0f64, 2.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while b - a > 1e-10 {
        if less(c, d) {
            b = d;
            d = c;
            c = b - inv_phi * (b - a);
        } else {
            a = c;
            c = d;
            d = a + inv_phi * (b - a);
        }
    }
    0.5 * (a + b)
}

/// Outcome of one cross-check of [`run_suite`].
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// ‖U_ref − V‖ ≤ √err_u²[V,Q] + √err_u²[U_ref,P_ref]: the certificate bounds the
/// distance to the exact discrete minimizer, which U_ref only approximates.
pub fn bound_holds(distance_sq: f64, err_u_sq: f64, ref_err_u_sq: f64) -> bool {
    distance_sq.sqrt() <= err_u_sq.max(0.0).sqrt() + ref_err_u_sq.max(0.0).sqrt() + 1e-12
}

/// Cross-checks behind `verify --suite oracle`.
pub fn run_suite(seed: u64) -> Result<Vec<Check>> {
    use crate::estimator::discrete_estimate_u;
    use crate::fdgrid::{resolvent_gstar_scalar, FdScheme, Lattice};
    use crate::model::{compute_theta, ModelParams, ThetaFields};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (v, tau) = (rng.random_range(-0.5..1.5), rng.random_range(0.0..2.0));
        let (t1, t2) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        worst = worst.max((resolvent_gstar_scalar(v, tau, t1, t2) - scalar_prox_oracle(v, tau, t1, t2)).abs());
    }
    checks.push(Check { name: "resolvent-vs-golden-section", passed: worst < 1e-8, detail: format!("max deviation {worst:.3e}") });

    let lat = Lattice::with_side(4)?;
    let pure = FdScheme::new(lat, ThetaFields::constant(lat.n_nodes(), 0.0, 1.0))?;
    let (chi, e) = exhaustive_binary_min(&pure)?;
    checks.push(Check {
        name: "exhaustive-pure-phase",
        passed: chi.iter().all(|&c| c == 1.0) && e == 0.0,
        detail: format!("energy {e}"),
    });

    let lat = Lattice::with_side(8)?;
    let (t1, t2) = (2.0, 3.0);
    let constant = FdScheme::new(lat, ThetaFields::constant(lat.n_nodes(), t1, t2))?;
    let cfg = SolverConfig { max_iters: 20_000, ..SolverConfig::from_bound(constant.norm_bound(), 1.0, 0.9) };
    let start: Vec<f64> = (0..lat.n_nodes()).map(|_| rng.random_range(0.0..1.0)).collect();
    let r = reference_relaxed_solve(&constant, &cfg, start, vec![[0.0; 2]; lat.n_nodes()])?;
    let dev = r.u.iter().fold(0.0f64, |m, u| m.max((u - t2 / (t1 + t2)).abs()));
    checks.push(Check { name: "reference-constant-minimizer", passed: dev < 1e-8, detail: format!("max deviation {dev:.3e}") });

    let params = ModelParams::new(0.8, 0.2, 0.05)?;
    let u0: Vec<f64> = (0..lat.n_nodes()).map(|_| rng.random_range(0.0..1.0)).collect();
    let disc = FdScheme::new(lat, compute_theta(&u0, &params)?)?;
    let r = reference_relaxed_solve(&disc, &cfg, vec![0.5; lat.n_nodes()], vec![[0.0; 2]; lat.n_nodes()])?;
    let gap = disc.energy_relaxed(&r.u) + disc.energy_predual(&r.p);
    checks.push(Check { name: "reference-gap", passed: gap < 1e-8, detail: format!("gap {gap:.3e}") });
    let ref_err = discrete_estimate_u(&disc, &r.u, &r.p, &params)?.err_u_sq;
    let mut violations = 0;
    for _ in 0..20 {
        let amp = rng.random_range(1e-4..0.3);
        let v: Vec<f64> = r.u.iter().map(|u| u + amp * rng.random_range(-1.0..1.0)).collect();
        let est = discrete_estimate_u(&disc, &v, &r.p, &params)?;
        let d: Vec<f64> = r.u.iter().zip(&v).map(|(a, b)| a - b).collect();
        if !bound_holds(disc.primal_dot(&d, &d), est.err_u_sq, ref_err) {
            violations += 1;
        }
    }
    checks.push(Check { name: "perturbation-bound", passed: violations == 0, detail: format!("{violations} violations of 20") });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdgrid::{FdScheme, Lattice};
    use crate::model::ThetaFields;

    fn scheme(side: usize, t1: Vec<f64>, t2: Vec<f64>) -> FdScheme {
        FdScheme::new(Lattice::with_side(side).unwrap(), ThetaFields { theta1: t1, theta2: t2 }).unwrap()
    }

    #[test]
    fn prox_oracle_trivial_cases() {
        assert!((scalar_prox_oracle(0.3, 0.0, 1.0, 2.0) - 0.3).abs() < 1e-8);
        assert!((scalar_prox_oracle(0.5, 0.7, 2.0, 2.0) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn exhaustive_pure_phases() {
        let s = scheme(3, vec![0.0; 9], vec![1.0; 9]);
        let (chi, e) = exhaustive_binary_min(&s).unwrap();
        assert!(chi.iter().all(|&c| c == 1.0));
        assert_eq!(e, 0.0);
        let s = scheme(3, vec![1.0; 9], vec![0.0; 9]);
        let (chi, _) = exhaustive_binary_min(&s).unwrap();
        assert!(chi.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn isolated_pixel_is_absorbed_when_perimeter_dominates() {
        // centre pixel prefers phase 1 with gain 1; its forward-difference perimeter
        // in all four incident differences costs 4/h = 8 at h = 1/2.
        let mut t1 = vec![5.0; 9];
        let mut t2 = vec![0.0; 9];
        t1[4] = 0.0;
        t2[4] = 1.0;
        let s = scheme(3, t1, t2);
        let (chi, e) = exhaustive_binary_min(&s).unwrap();
        assert!(chi.iter().all(|&c| c == 0.0));
        assert!((e - 0.25).abs() < 1e-12);
    }

    #[test]
    fn suite_passes() {
        for c in run_suite(7).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn rejects_large_lattices() {
        let s = scheme(5, vec![1.0; 25], vec![1.0; 25]);
        assert!(matches!(exhaustive_binary_min(&s), Err(Error::OracleTooLarge { .. })));
    }
}
