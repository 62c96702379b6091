//! Finite differences on a regular lattice over [0,1]²: periodic forward-difference
//! gradient, its negative transpose, pointwise resolvents, and the bilinear
//! embedding used by the estimator.

use crate::error::{Error, Result};
use crate::model::{self, ThetaFields};
use crate::pdsolver::{project_unit_ball, Discretization, PrimalStep};

/// Square lattice of `side × side` nodes with spacing h = 1/(side − 1).
/// Node `(ix, iy)` sits at `(ix·h, iy·h)` and has index `iy·side + ix`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    side: usize,
}

impl Lattice {
    /// Lattice with h = 2^−level, i.e. (2^level + 1)² nodes.
    pub fn with_level(level: u32) -> Self {
        Self { side: (1usize << level) + 1 }
    }

    /// Lattice with an arbitrary number of nodes per side (at least 2).
    pub fn with_side(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidConfig(format!("lattice side must be >= 2, got {side}")));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_nodes(&self) -> usize {
        self.side * self.side
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.side - 1) as f64
    }

    /// Refinement level when the side is 2^L + 1.
    pub fn level(&self) -> Option<u32> {
        let cells = self.side - 1;
        cells.is_power_of_two().then(|| cells.trailing_zeros())
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side + ix
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        let h = self.h();
        [(i % self.side) as f64 * h, (i / self.side) as f64 * h]
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| {
            let [x, y] = self.position(i);
            f(x, y)
        }).collect()
    }
}

/// Forward differences with periodic neighbours: ((V^{N(i,j)} − V^i)/h)_{j=1,2}.
pub fn fd_gradient(lat: &Lattice, v: &[f64]) -> Vec<[f64; 2]> {
    assert_eq!(v.len(), lat.n_nodes());
    let n = lat.side;
    let inv_h = 1.0 / lat.h();
    let mut out = vec![[0.0; 2]; v.len()];
    for iy in 0..n {
        let ny = (iy + 1) % n;
        for ix in 0..n {
            let nx = (ix + 1) % n;
            let i = lat.index(ix, iy);
            out[i] = [(v[lat.index(nx, iy)] - v[i]) * inv_h, (v[lat.index(ix, ny)] - v[i]) * inv_h];
        }
    }
    out
}

/// Negative transpose of [`fd_gradient`]: periodic backward differences.
pub fn fd_divergence(lat: &Lattice, q: &[[f64; 2]]) -> Vec<f64> {
    assert_eq!(q.len(), lat.n_nodes());
    let n = lat.side;
    let inv_h = 1.0 / lat.h();
    let mut out = vec![0.0; q.len()];
    for iy in 0..n {
        let py = (iy + n - 1) % n;
        for ix in 0..n {
            let px = (ix + n - 1) % n;
            let i = lat.index(ix, iy);
            out[i] = (q[i][0] - q[lat.index(px, iy)][0] + q[i][1] - q[lat.index(ix, py)][1]) * inv_h;
        }
    }
    out
}

/// Nodal radial projection onto the closed unit ball; σ does not enter.
pub fn fd_resolvent_f(q: &[[f64; 2]], _sigma: f64) -> Vec<[f64; 2]> {
    let mut out = q.to_vec();
    project_unit_ball(&mut out);
    out
}

/// Pointwise (V + 2τθ₂)/(1 + 2τ(θ₁+θ₂)).
pub fn fd_resolvent_gstar(v: &[f64], tau: f64, theta: &ThetaFields) -> Vec<f64> {
    v.iter()
        .zip(theta.theta1.iter().zip(&theta.theta2))
        .map(|(&v, (&t1, &t2))| resolvent_gstar_scalar(v, tau, t1, t2))
        .collect()
}

#[inline]
pub fn resolvent_gstar_scalar(v: f64, tau: f64, theta1: f64, theta2: f64) -> f64 {
    (v + 2.0 * tau * theta2) / (1.0 + 2.0 * tau * (theta1 + theta2))
}

/// ‖Λ_h‖² ≤ 8/h².
pub fn fd_norm_bound(lat: &Lattice) -> f64 {
    8.0 / lat.h().powi(2)
}

/// Zeroes the outward-normal component at boundary nodes (both components at
/// corners) so the bilinear embedding has vanishing normal trace.
pub fn fd_zero_normal_trace(lat: &Lattice, q: &mut [[f64; 2]]) {
    let last = lat.side - 1;
    for iy in 0..lat.side {
        for ix in 0..lat.side {
            let v = &mut q[lat.index(ix, iy)];
            if ix == 0 || ix == last {
                v[0] = 0.0;
            }
            if iy == 0 || iy == last {
                v[1] = 0.0;
            }
        }
    }
}

/// Piecewise bilinear interpolant of nodal lattice values.
#[derive(Clone, Debug)]
pub struct BilinearField<'a, T> {
    lattice: Lattice,
    values: &'a [T],
}

impl<'a, T: Copy> BilinearField<'a, T> {
    pub fn new(lattice: Lattice, values: &'a [T]) -> Self {
        assert_eq!(values.len(), lattice.n_nodes());
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Corner values (00, 10, 01, 11) of cell `(cx, cy)`.
    pub fn corners(&self, cx: usize, cy: usize) -> [T; 4] {
        let l = &self.lattice;
        [
            self.values[l.index(cx, cy)],
            self.values[l.index(cx + 1, cy)],
            self.values[l.index(cx, cy + 1)],
            self.values[l.index(cx + 1, cy + 1)],
        ]
    }

    /// Cell containing (x, y) and local coordinates in [0,1]².
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, usize, f64, f64)> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let cells = self.lattice.side - 1;
        let sx = x * cells as f64;
        let sy = y * cells as f64;
        let cx = (sx.floor() as usize).min(cells - 1);
        let cy = (sy.floor() as usize).min(cells - 1);
        Ok((cx, cy, sx - cx as f64, sy - cy as f64))
    }
}

impl BilinearField<'_, f64> {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let (cx, cy, s, t) = self.locate(x, y)?;
        Ok(bilinear(self.corners(cx, cy), s, t))
    }
}

impl BilinearField<'_, [f64; 2]> {
    pub fn eval(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        let (cx, cy, s, t) = self.locate(x, y)?;
        let c = self.corners(cx, cy);
        Ok([
            bilinear([c[0][0], c[1][0], c[2][0], c[3][0]], s, t),
            bilinear([c[0][1], c[1][1], c[2][1], c[3][1]], s, t),
        ])
    }
}

#[inline]
pub fn bilinear(c: [f64; 4], s: f64, t: f64) -> f64 {
    c[0] * (1.0 - s) * (1.0 - t) + c[1] * s * (1.0 - t) + c[2] * (1.0 - s) * t + c[3] * s * t
}

/// Partial derivatives in local coordinates (multiply by 1/h for physical ones).
#[inline]
pub fn bilinear_grad_local(c: [f64; 4], s: f64, t: f64) -> [f64; 2] {
    [
        (c[1] - c[0]) * (1.0 - t) + (c[3] - c[2]) * t,
        (c[2] - c[0]) * (1.0 - s) + (c[3] - c[1]) * s,
    ]
}

/// The finite-difference scheme: Euclidean products scaled by the cell area h².
#[derive(Clone, Debug)]
pub struct FdScheme {
    lattice: Lattice,
    theta: ThetaFields,
}

impl FdScheme {
    pub fn new(lattice: Lattice, theta: ThetaFields) -> Result<Self> {
        if theta.len() != lattice.n_nodes() {
            return Err(Error::SizeMismatch { expected: lattice.n_nodes(), got: theta.len() });
        }
        Ok(Self { lattice, theta })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn theta(&self) -> &ThetaFields {
        &self.theta
    }

    fn area(&self) -> f64 {
        self.lattice.h().powi(2)
    }
}

struct FdStep<'a> {
    scheme: &'a FdScheme,
    tau: f64,
}

impl PrimalStep for FdStep<'_> {
    fn apply(&self, u: &[f64], p: &[[f64; 2]], out: &mut [f64]) {
        let div = fd_divergence(&self.scheme.lattice, p);
        let th = &self.scheme.theta;
        for i in 0..u.len() {
            out[i] = resolvent_gstar_scalar(u[i] + self.tau * div[i], self.tau, th.theta1[i], th.theta2[i]);
        }
    }
}

impl Discretization for FdScheme {
    fn name(&self) -> &'static str {
        "fd"
    }

    fn primal_len(&self) -> usize {
        self.lattice.n_nodes()
    }

    fn dual_len(&self) -> usize {
        self.lattice.n_nodes()
    }

    fn gradient(&self, v: &[f64]) -> Vec<[f64; 2]> {
        fd_gradient(&self.lattice, v)
    }

    fn divergence(&self, q: &[[f64; 2]]) -> Vec<f64> {
        fd_divergence(&self.lattice, q)
    }

    fn dual_resolvent(&self, q: &mut [[f64; 2]]) {
        project_unit_ball(q);
    }

    fn primal_stepper(&self, tau: f64) -> Result<Box<dyn PrimalStep + '_>> {
        Ok(Box::new(FdStep { scheme: self, tau }))
    }

    fn norm_bound(&self) -> f64 {
        fd_norm_bound(&self.lattice)
    }

    fn primal_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.area() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    fn dual_dot(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        self.area() * a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1]).sum::<f64>()
    }

    fn energy_relaxed(&self, v: &[f64]) -> f64 {
        let grad = self.gradient(v);
        let th = &self.theta;
        let sum: f64 = (0..v.len())
            .map(|i| model::primal_density(v[i], th.theta1[i], th.theta2[i]) + grad[i][0].hypot(grad[i][1]))
            .sum();
        self.area() * sum
    }

    fn energy_predual(&self, q: &[[f64; 2]]) -> f64 {
        if !q.iter().all(|&v| model::is_feasible_vector(v)) {
            return f64::INFINITY;
        }
        let div = self.divergence(q);
        let th = &self.theta;
        let sum: f64 = (0..div.len()).map(|i| model::predual_density(div[i], th.theta1[i], th.theta2[i])).sum();
        self.area() * sum
    }

    fn restrict_dual(&self, _q: &mut [[f64; 2]]) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::scalar_prox_oracle;
    use crate::pdsolver::estimate_norm_squared;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_dual(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
    }

    #[test]
    fn lattice_counts() {
        let l = Lattice::with_level(3);
        assert_eq!(l.n_nodes(), 81);
        assert_eq!(l.level(), Some(3));
        assert_eq!(Lattice::with_side(4).unwrap().level(), None);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let l = Lattice::with_level(2);
        assert!(fd_gradient(&l, &vec![0.7; l.n_nodes()]).iter().all(|g| *g == [0.0, 0.0]));
    }

    #[test]
    fn gradient_of_x_coordinate_wraps() {
        // h = 1/2: interior forward differences are 1, the wrap-around column gives (0 - 1)/h = -2
        let l = Lattice::with_level(1);
        let v = l.sample(|x, _| x);
        let g = fd_gradient(&l, &v);
        for iy in 0..3 {
            assert_eq!(g[l.index(0, iy)], [1.0, 0.0]);
            assert_eq!(g[l.index(1, iy)], [1.0, 0.0]);
            assert_eq!(g[l.index(2, iy)], [-2.0, 0.0]);
        }
    }

    #[test]
    fn divergence_is_negative_transpose() {
        let l = Lattice::with_side(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = random_scalar(l.n_nodes(), &mut rng);
            let q = random_dual(l.n_nodes(), &mut rng);
            let g = fd_gradient(&l, &v);
            let lhs: f64 = g.iter().zip(&q).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
            let rhs: f64 = v.iter().zip(fd_divergence(&l, &q)).map(|(a, b)| a * b).sum();
            assert!((lhs + rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn divergence_of_gradient_double_sum() {
        let l = Lattice::with_level(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_scalar(l.n_nodes(), &mut rng);
        let div = fd_divergence(&l, &fd_gradient(&l, &v));
        let lhs: f64 = div.iter().zip(&v).map(|(a, b)| a * b).sum();
        // direct double sum of squared forward differences over both directions
        let n = l.side();
        let h = l.h();
        let mut norm = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let c = v[l.index(ix, iy)];
                norm += ((v[l.index((ix + 1) % n, iy)] - c) / h).powi(2);
                norm += ((v[l.index(ix, (iy + 1) % n)] - c) / h).powi(2);
            }
        }
        assert!((lhs + norm).abs() < 1e-12 * norm);
    }

    #[test]
    fn divergence_of_single_vector_is_local() {
        let l = Lattice::with_side(5).unwrap();
        let mut q = vec![[0.0; 2]; l.n_nodes()];
        let k = l.index(2, 2);
        q[k] = [0.3, -0.4];
        let div = fd_divergence(&l, &q);
        let support: Vec<usize> = (0..div.len()).filter(|&i| div[i] != 0.0).collect();
        // the node itself and the nodes whose backward neighbour is k: (3,2) and (2,3)
        let mut expected = vec![k, l.index(3, 2), l.index(2, 3)];
        expected.sort();
        assert_eq!(support, expected);
        assert!(fd_divergence(&l, &vec![[0.0; 2]; l.n_nodes()]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn projection_examples() {
        let q = fd_resolvent_f(&[[2.0, 0.0], [0.3, -0.4], [3.0, 4.0]], 0.1);
        assert_eq!(q[0], [1.0, 0.0]);
        assert_eq!(q[1], [0.3, -0.4]);
        assert!((q[2][0] - 0.6).abs() < 1e-15 && (q[2][1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn gstar_resolvent_examples() {
        let th = ThetaFields::constant(1, 1.0, 1.0);
        assert_eq!(fd_resolvent_gstar(&[0.3], 0.0, &th), vec![0.3]);
        assert!((fd_resolvent_gstar(&[0.5], 0.25, &th)[0] - 0.5).abs() < 1e-15);
        let oracle = scalar_prox_oracle(0.5, 0.25, 1.0, 1.0);
        assert!((oracle - 0.5).abs() < 1e-8);
        let pull = fd_resolvent_gstar(&[0.0], 1e12, &ThetaFields::constant(1, 0.0, 1.0));
        assert!((pull[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gstar_resolvent_matches_golden_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v = rng.random_range(-0.5..1.5);
            let tau = rng.random_range(0.0..2.0);
            let t1 = rng.random_range(0.0..5.0);
            let t2 = rng.random_range(0.0..5.0);
            let got = resolvent_gstar_scalar(v, tau, t1, t2);
            assert!((got - scalar_prox_oracle(v, tau, t1, t2)).abs() < 1e-8);
        }
    }

    #[test]
    fn resolvents_are_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let a = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let b = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let pa = fd_resolvent_f(&[a], 1.0)[0];
            let pb = fd_resolvent_f(&[b], 1.0)[0];
            let d_in = (a[0] - b[0]).hypot(a[1] - b[1]);
            assert!((pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= d_in + 1e-15);
            let (t1, t2, tau) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..1.0));
            let x = rng.random_range(-2.0..2.0);
            let y = rng.random_range(-2.0..2.0);
            let rx = resolvent_gstar_scalar(x, tau, t1, t2);
            let ry = resolvent_gstar_scalar(y, tau, t1, t2);
            assert!((rx - ry).abs() <= (x - y).abs() + 1e-15);
        }
    }

    #[test]
    fn norm_bound_values() {
        assert_eq!(fd_norm_bound(&Lattice::with_level(1)), 32.0);
        let b3 = fd_norm_bound(&Lattice::with_level(3));
        let b4 = fd_norm_bound(&Lattice::with_level(4));
        assert!((b4 / b3 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_below_bound() {
        let l = Lattice::with_level(3);
        let s = FdScheme::new(l, ThetaFields::constant(l.n_nodes(), 1.0, 1.0)).unwrap();
        let est = estimate_norm_squared(&s, 200, 1);
        assert!(est <= fd_norm_bound(&l));
        assert!(est > 0.5 * fd_norm_bound(&l));
    }

    #[test]
    fn bilinear_reproduces_bilinear() {
        let l = Lattice::with_level(2);
        let v = l.sample(|x, y| x * y);
        let f = BilinearField::new(l, &v);
        for (x, y) in [(0.125, 0.375), (0.625, 0.875), (1.0, 1.0), (0.3, 0.9)] {
            assert!((f.eval(x, y).unwrap() - x * y).abs() < 1e-15);
        }
        let c = vec![0.4; l.n_nodes()];
        assert!((BilinearField::new(l, &c).eval(0.77, 0.12).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(f.eval(1.1, 0.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn bilinear_embedding_of_feasible_dual_is_feasible() {
        let l = Lattice::with_level(3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut q: Vec<[f64; 2]> = random_dual(l.n_nodes(), &mut rng);
        project_unit_ball(&mut q);
        fd_zero_normal_trace(&l, &mut q);
        let f = BilinearField::new(l, &q);
        let cells = l.side() - 1;
        for cy in 0..cells {
            for cx in 0..cells {
                for a in 0..5 {
                    for b in 0..5 {
                        let x = (cx as f64 + a as f64 / 4.0) * l.h();
                        let y = (cy as f64 + b as f64 / 4.0) * l.h();
                        let v = f.eval(x.min(1.0), y.min(1.0)).unwrap();
                        assert!(v[0].hypot(v[1]) <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_normal_trace_on_boundary() {
        let l = Lattice::with_level(1);
        let mut q = vec![[1.0, 1.0]; l.n_nodes()];
        fd_zero_normal_trace(&l, &mut q);
        assert_eq!(q[l.index(0, 0)], [0.0, 0.0]);
        assert_eq!(q[l.index(0, 1)], [0.0, 1.0]);
        assert_eq!(q[l.index(1, 0)], [1.0, 0.0]);
        assert_eq!(q[l.index(1, 1)], [1.0, 1.0]);
    }
}
