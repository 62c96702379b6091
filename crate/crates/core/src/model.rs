//! Continuous model quantities: parameters, weight fields, pointwise energy
//! densities, 2-means initialization and thresholding.

use crate::error::{Error, Result};
use crate::pdsolver::Discretization;

/// Gray values of the two phases and the regularization weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    c1: f64,
    c2: f64,
    nu: f64,
}

impl ModelParams {
    pub fn new(c1: f64, c2: f64, nu: f64) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite() && nu.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if c1 == c2 {
            return Err(Error::InvalidParams(format!("c1 and c2 must differ (both {c1})")));
        }
        if nu <= 0.0 {
            return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
        }
        Ok(Self { c1, c2, nu })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// 2ν/(c₁−c₂)², the factor turning a duality gap into an L² error bound.
    pub fn gap_scale(&self) -> f64 {
        2.0 * self.nu / (self.c1 - self.c2).powi(2)
    }

    /// Pointwise lower bound (c₁−c₂)²/(2ν) of θ₁+θ₂.
    pub fn theta_sum_lower_bound(&self) -> f64 {
        1.0 / self.gap_scale()
    }

    /// θ₁ and θ₂ at a single intensity value.
    #[inline]
    pub fn theta_at(&self, u0: f64) -> (f64, f64) {
        ((self.c1 - u0).powi(2) / self.nu, (self.c2 - u0).powi(2) / self.nu)
    }
}

/// Data weights θᵢ = (cᵢ − u₀)²/ν sampled at the degrees of freedom of a discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaFields {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl ThetaFields {
    pub fn len(&self) -> usize {
        self.theta1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta1.is_empty()
    }

    /// Constant weights, mostly useful for tests and analytic checks.
    pub fn constant(n: usize, theta1: f64, theta2: f64) -> Self {
        Self { theta1: vec![theta1; n], theta2: vec![theta2; n] }
    }
}

/// Samples θ₁, θ₂ from intensity values. No shift is added to the weights.
pub fn compute_theta(u0: &[f64], params: &ModelParams) -> Result<ThetaFields> {
    if let Some(i) = u0.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("intensity at index {i} is not finite")));
    }
    let (theta1, theta2) = u0.iter().map(|&u| params.theta_at(u)).unzip();
    Ok(ThetaFields { theta1, theta2 })
}

/// Data density of the relaxed functional: u²θ₁ + (1−u)²θ₂.
#[inline]
pub fn primal_density(u: f64, theta1: f64, theta2: f64) -> f64 {
    u * u * theta1 + (1.0 - u) * (1.0 - u) * theta2
}

/// Density of the predual data functional at divergence value `w`:
/// (¼w² + wθ₂ − θ₁θ₂)/(θ₁+θ₂).
#[inline]
pub fn predual_density(w: f64, theta1: f64, theta2: f64) -> f64 {
    (0.25 * w * w + w * theta2 - theta1 * theta2) / (theta1 + theta2)
}

/// Pointwise minimizer θ₂/(θ₁+θ₂) of the data density.
#[inline]
pub fn pointwise_minimizer(theta1: f64, theta2: f64) -> f64 {
    theta2 / (theta1 + theta2)
}

/// Magnitude above which a dual vector counts as infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[inline]
pub fn is_feasible_vector(q: [f64; 2]) -> bool {
    q[0].hypot(q[1]) <= 1.0 + FEASIBILITY_TOL
}

pub fn max_norm(q: &[[f64; 2]]) -> f64 {
    q.iter().fold(0.0f64, |m, v| m.max(v[0].hypot(v[1])))
}

/// Discrete binary energy: the relaxed energy restricted to 0/1-valued fields.
pub fn energy_binary<D: Discretization + ?Sized>(chi: &[f64], disc: &D) -> Result<f64> {
    if let Some(index) = chi.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinary { index, value: chi[index] });
    }
    energy_relaxed(chi, disc)
}

/// Discrete relaxed energy F*_h[−Λ*_h V] + G*_h[V].
pub fn energy_relaxed<D: Discretization + ?Sized>(v: &[f64], disc: &D) -> Result<f64> {
    check_len(disc.primal_len(), v.len())?;
    Ok(disc.energy_relaxed(v))
}

/// Discrete predual energy F_h[Q] + G_h[Λ_h Q]; `+∞` for infeasible `q`.
pub fn energy_predual<D: Discretization + ?Sized>(q: &[[f64; 2]], disc: &D) -> Result<f64> {
    check_len(disc.dual_len(), q.len())?;
    Ok(disc.energy_predual(q))
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Optimal gray values for a fixed phase field: the weighted means of `u0`
/// inside and outside the phase. Quadrature weights per sample are given by
/// `weights`. Not part of the segmentation pipeline, which keeps c₁, c₂ fixed.
pub fn optimal_constants(chi: &[f64], u0: &[f64], weights: &[f64]) -> Option<(f64, f64)> {
    let (mut m1, mut a1, mut m2, mut a2) = (0.0, 0.0, 0.0, 0.0);
    for ((&c, &u), &w) in chi.iter().zip(u0).zip(weights) {
        m1 += w * c * u;
        a1 += w * c;
        m2 += w * (1.0 - c) * u;
        a2 += w * (1.0 - c);
    }
    (a1 > 0.0 && a2 > 0.0).then(|| (m1 / a1, m2 / a2))
}

/// Lloyd's iteration for two clusters on scalar intensities, started from the
/// centers 1 and 0. Values equidistant to both centers join the lower cluster.
/// Returns `(c1, c2)` with `c1` the center that started at 1.
pub fn lloyd_2means(u0: &[f64]) -> Result<(f64, f64)> {
    if u0.is_empty() {
        return Err(Error::DegenerateClustering("empty image".into()));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite intensity".into()));
    }
    // Sorting makes the sums, and hence the result, independent of pixel order.
    let mut sorted = u0.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateClustering(format!(
            "constant image (all values {}); c1 = c2",
            sorted[0]
        )));
    }

    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    // Sorted values: the upper cluster is a suffix starting at `split`.
    let mut split = usize::MAX;
    for _ in 0..10_000 {
        let new_split = sorted.partition_point(|&v| (v - lo).abs() <= (v - hi).abs());
        if new_split == split {
            break;
        }
        split = new_split;
        if split == 0 || split == sorted.len() {
            break;
        }
        lo = sorted[..split].iter().sum::<f64>() / split as f64;
        hi = sorted[split..].iter().sum::<f64>() / (sorted.len() - split) as f64;
    }
    if split == 0 || split == sorted.len() {
        return Err(Error::DegenerateClustering(
            "one cluster is empty at the Lloyd fixed point".into(),
        ));
    }
    Ok((hi, lo))
}

/// Characteristic function of the superlevel set `{v > s}` (strict).
pub fn threshold(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|&x| if x > s { 1.0 } else { 0.0 }).collect()
}
