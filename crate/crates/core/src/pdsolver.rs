//! First-order primal-dual iteration (Chambolle-Pock, non-accelerated) over any
//! discretization implementing [`Discretization`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A discretization of the relaxed problem: primal nodal scalars, dual 2-vectors,
/// the discrete divergence Λ_h, its (negative) adjoint, and both resolvents.
pub trait Discretization: Sync {
    /// Scheme tag used in reports (`fd`, `fe`, `fe-prime`).
    fn name(&self) -> &'static str;

    fn primal_len(&self) -> usize;

    /// Number of dual 2-vectors.
    fn dual_len(&self) -> usize;

    /// Discrete gradient −Λ*_h V.
    fn gradient(&self, v: &[f64]) -> Vec<[f64; 2]>;

    /// Discrete divergence Λ_h Q.
    fn divergence(&self, q: &[[f64; 2]]) -> Vec<f64>;

    /// Resolvent of the unit-ball indicator followed by the scheme's boundary
    /// post-processing, in place.
    fn dual_resolvent(&self, q: &mut [[f64; 2]]);

    /// Prepares the primal update `(Id + τ∂G*_h)⁻¹(U + τΛ_h P)` for a fixed τ.
    fn primal_stepper(&self, tau: f64) -> Result<Box<dyn PrimalStep + '_>>;

    /// Closed-form upper bound on ‖Λ_h‖².
    fn norm_bound(&self) -> f64;

    /// Inner product on the primal space.
    fn primal_dot(&self, a: &[f64], b: &[f64]) -> f64;

    /// Inner product on the dual space.
    fn dual_dot(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> f64;

    /// E_h^rel[V] = F*_h[−Λ*_h V] + G*_h[V].
    fn energy_relaxed(&self, v: &[f64]) -> f64;

    /// D_h^rel[Q] = F_h[Q] + G_h[Λ_h Q]; `+∞` if Q is infeasible.
    fn energy_predual(&self, q: &[[f64; 2]]) -> f64;

    /// Restricts an arbitrary dual field to the scheme's dual space (boundary
    /// conditions), without touching magnitudes.
    fn restrict_dual(&self, q: &mut [[f64; 2]]);
}

/// Primal resolvent prepared for a fixed step size.
pub trait PrimalStep {
    /// Writes `(Id + τ∂G*_h)⁻¹(u + τΛ_h p)` into `out`.
    fn apply(&self, u: &[f64], p: &[[f64; 2]], out: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub sigma: f64,
    /// Stop once ‖U^{k+1} − U^k‖_∞ falls to this value.
    pub threshold: f64,
    pub max_iters: usize,
    /// Duality gap checkpoint period; 0 disables checkpoints.
    pub gap_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tau: 1e-5, sigma: 5e-5, threshold: 1e-7, max_iters: 200_000, gap_every: 100 }
    }
}

impl SolverConfig {
    /// Step sizes with τσ·bound = `safety` and σ/τ = `ratio`.
    pub fn from_bound(bound: f64, ratio: f64, safety: f64) -> Self {
        let tau = (safety / (bound * ratio)).sqrt();
        Self { tau, sigma: ratio * tau, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.sigma > 0.0 && self.threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau, sigma and threshold must be positive (got {}, {}, {})",
                self.tau, self.sigma, self.threshold
            )));
        }
        Ok(())
    }

    /// Fails with [`Error::StepSize`] unless τσ·bound < 1.
    pub fn check_step(&self, bound: f64) -> Result<()> {
        self.validate()?;
        let product = self.tau * self.sigma * bound;
        if !(product < 1.0) {
            return Err(Error::StepSize { product });
        }
        Ok(())
    }
}

/// Iterates (U^k, P^k, Ū^k) of the primal-dual algorithm.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub p: Vec<[f64; 2]>,
    pub u_bar: Vec<f64>,
    pub iteration: usize,
    pub last_increment: f64,
}

impl SolverState {
    /// Ū⁰ = U⁰.
    pub fn new(u: Vec<f64>, p: Vec<[f64; 2]>) -> Self {
        let u_bar = u.clone();
        Self { u, p, u_bar, iteration: 0, last_increment: f64::INFINITY }
    }

    /// One iteration; returns ‖U^{k+1} − U^k‖_∞.
    pub fn iterate<D: Discretization + ?Sized>(
        &mut self,
        disc: &D,
        step: &dyn PrimalStep,
        sigma: f64,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        let grad = disc.gradient(&self.u_bar);
        for (p, g) in self.p.iter_mut().zip(&grad) {
            p[0] += sigma * g[0];
            p[1] += sigma * g[1];
        }
        disc.dual_resolvent(&mut self.p);

        scratch.resize(self.u.len(), 0.0);
        step.apply(&self.u, &self.p, scratch);
        let mut inc = 0.0f64;
        for ((u, bar), &new) in self.u.iter_mut().zip(self.u_bar.iter_mut()).zip(scratch.iter()) {
            inc = inc.max((new - *u).abs());
            *bar = 2.0 * new - *u;
            *u = new;
        }
        self.iteration += 1;
        self.last_increment = inc;
        inc
    }
}

/// Per-iteration report handed to progress callbacks.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub iteration: usize,
    pub increment: f64,
    /// E_h^rel[U^k] + D_h^rel[P^k] at checkpoints.
    pub gap: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Abort,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub u: Vec<f64>,
    pub p: Vec<[f64; 2]>,
    pub iterations: usize,
    pub converged: bool,
    pub aborted: bool,
    pub last_increment: f64,
    /// (iteration, discrete duality gap) at each checkpoint.
    pub gaps: Vec<(usize, f64)>,
}

/// Discrete duality gap E_h^rel[U] + D_h^rel[P].
pub fn duality_gap<D: Discretization + ?Sized>(disc: &D, u: &[f64], p: &[[f64; 2]]) -> f64 {
    disc.energy_relaxed(u) + disc.energy_predual(p)
}

pub fn solve<D: Discretization + ?Sized>(
    disc: &D,
    config: &SolverConfig,
    u0: Vec<f64>,
    p0: Vec<[f64; 2]>,
) -> Result<SolveOutcome> {
    solve_with_callback(disc, config, u0, p0, |_| Control::Continue)
}

pub fn solve_with_callback<D, F>(
    disc: &D,
    config: &SolverConfig,
    u0: Vec<f64>,
    p0: Vec<[f64; 2]>,
    mut callback: F,
) -> Result<SolveOutcome>
where
    D: Discretization + ?Sized,
    F: FnMut(&Progress) -> Control,
{
    config.check_step(disc.norm_bound())?;
    if u0.len() != disc.primal_len() {
        return Err(Error::SizeMismatch { expected: disc.primal_len(), got: u0.len() });
    }
    if p0.len() != disc.dual_len() {
        return Err(Error::SizeMismatch { expected: disc.dual_len(), got: p0.len() });
    }
    let step = disc.primal_stepper(config.tau)?;
    let mut state = SolverState::new(u0, p0);
    let mut scratch = Vec::new();
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut aborted = false;

    while state.iteration < config.max_iters {
        let inc = state.iterate(disc, step.as_ref(), config.sigma, &mut scratch);
        let gap = (config.gap_every > 0 && state.iteration % config.gap_every == 0)
            .then(|| duality_gap(disc, &state.u, &state.p));
        if let Some(g) = gap {
            gaps.push((state.iteration, g));
        }
        let progress = Progress { iteration: state.iteration, increment: inc, gap };
        if callback(&progress) == Control::Abort {
            aborted = true;
            break;
        }
        if inc <= config.threshold {
            converged = true;
            break;
        }
    }

    Ok(SolveOutcome {
        iterations: state.iteration,
        last_increment: state.last_increment,
        u: state.u,
        p: state.p,
        converged,
        aborted,
        gaps,
    })
}

/// Power iteration on Λ*_h Λ_h in the scheme's dual inner product; a lower
/// estimate of ‖Λ_h‖² used to validate the closed-form bounds.
pub fn estimate_norm_squared<D: Discretization + ?Sized>(disc: &D, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<[f64; 2]> = (0..disc.dual_len())
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    disc.restrict_dual(&mut q);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = disc.dual_dot(&q, &q).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        q.iter_mut().for_each(|v| {
            v[0] /= norm;
            v[1] /= norm;
        });
        let div = disc.divergence(&q);
        estimate = disc.primal_dot(&div, &div);
        // Λ*Λ q = −(−Λ*)(Λ q)
        q = disc.gradient(&div);
        q.iter_mut().for_each(|v| {
            v[0] = -v[0];
            v[1] = -v[1];
        });
        disc.restrict_dual(&mut q);
    }
    estimate
}

/// Radial projection of each 2-vector onto the closed unit ball.
pub fn project_unit_ball(q: &mut [[f64; 2]]) {
    for v in q.iter_mut() {
        let n = v[0].hypot(v[1]);
        if n > 1.0 {
            v[0] /= n;
            v[1] /= n;
        }
    }
}

/// The three discretizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Fd,
    Fe,
    FePrime,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Fd => "fd",
            SchemeKind::Fe => "fe",
            SchemeKind::FePrime => "fe-prime",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(SchemeKind::Fd),
            "fe" => Ok(SchemeKind::Fe),
            "fe-prime" | "fep" => Ok(SchemeKind::FePrime),
            other => Err(Error::InvalidConfig(format!("unknown scheme `{other}` (expected fd, fe or fe-prime)"))),
        }
    }
}
