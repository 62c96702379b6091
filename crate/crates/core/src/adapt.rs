//! The adaptive loop: solve, smooth, certify, mark, refine, prolong.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimator::{self, AffinePieces, Certificate};
use crate::fdgrid::{fd_zero_normal_trace, FdScheme, Lattice};
use crate::feschemes::{FeScheme, FeVariant};
use crate::input::Source;
use crate::mesh::{CellId, QuadMesh, RefineSummary};
use crate::model::{self, ModelParams, ThetaFields};
use crate::pdsolver::{self, SchemeKind, SolveOutcome, SolverConfig};
use crate::postproc::{smooth_dual, smoothing_plan, Smoother};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    /// Marking threshold α ∈ (0,1).
    pub alpha: f64,
    pub cycles: usize,
    pub init_level: u32,
    /// Deepest refinement level L0 (replaced by the image level for image input).
    pub max_level: u32,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { alpha: 0.2, cycles: 10, init_level: 5, max_level: 11 }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidConfig("at least one cycle is required".into()));
        }
        if self.init_level > self.max_level {
            return Err(Error::InvalidConfig(format!(
                "init level {} exceeds max level {}",
                self.init_level, self.max_level
            )));
        }
        Ok(())
    }
}

/// Indices of cells with err² ≥ α·max, together with the upper decile: cells
/// whose 1-based ascending rank exceeds 0.9·count (ties by position).
pub fn mark(per_cell: &[f64], alpha: f64) -> Vec<usize> {
    let max = per_cell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if per_cell.is_empty() || !(max > 0.0) {
        return Vec::new();
    }
    let mut marked = vec![false; per_cell.len()];
    for (m, &v) in marked.iter_mut().zip(per_cell) {
        *m = v >= alpha * max;
    }
    let mut order: Vec<usize> = (0..per_cell.len()).collect();
    order.sort_by(|&a, &b| per_cell[a].total_cmp(&per_cell[b]));
    let cut = 0.9 * per_cell.len() as f64;
    for (rank0, &i) in order.iter().enumerate() {
        if (rank0 + 1) as f64 > cut {
            marked[i] = true;
        }
    }
    (0..per_cell.len()).filter(|&i| marked[i]).collect()
}

/// One cycle of the loop.
#[derive(Clone, Debug)]
pub struct CycleReport {
    pub cycle: usize,
    pub scheme: SchemeKind,
    pub dofs: usize,
    pub leaves: usize,
    pub h_min: f64,
    pub certificate: Certificate,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    /// Leaves selected for refinement after this cycle.
    pub marked: usize,
    pub refine: RefineSummary,
}

/// Final fields sampled on the (2^L0+1)² output lattice, bottom row first.
#[derive(Clone, Debug)]
pub struct Fields {
    pub side: usize,
    pub relaxed: Vec<f64>,
    pub segmentation: Vec<f64>,
    pub dual: Vec<[f64; 2]>,
    /// Local err² density per finest cell, (side−1)² values.
    pub per_cell_density: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub cycles: Vec<CycleReport>,
    pub fields: Fields,
    pub final_mesh: Option<QuadMesh>,
    /// The loop ended because nothing could be marked.
    pub stalled: bool,
    pub warnings: Vec<String>,
}

impl AdaptiveRun {
    pub fn converged(&self) -> bool {
        self.cycles.iter().all(|c| c.converged)
    }

    pub fn last(&self) -> &CycleReport {
        self.cycles.last().expect("at least one cycle")
    }
}

fn u0_at(source: &Source, x: f64, y: f64) -> f64 {
    match source {
        Source::Image(img) => img.eval_cross(x, y).expect("mesh nodes lie in the unit square"),
        Source::Analytic(g) => g.eval(x, y),
    }
}

/// Runs the full pipeline for one scheme. The observer sees every finished cycle.
pub fn run_adaptive(
    source: &Source,
    params: &ModelParams,
    scheme: SchemeKind,
    solver: &SolverConfig,
    adapt: &AdaptConfig,
    observer: &mut dyn FnMut(&CycleReport),
) -> Result<AdaptiveRun> {
    solver.validate()?;
    let mut adapt = *adapt;
    let mut warnings = Vec::new();
    if let Some(l0) = source.level() {
        if adapt.max_level != l0 {
            warnings.push(format!("max level set to the image level {l0} (was {})", adapt.max_level));
            adapt.max_level = l0;
        }
        adapt.init_level = adapt.init_level.min(l0);
    }
    if scheme == SchemeKind::Fd {
        adapt.init_level = adapt.max_level;
    }
    adapt.validate()?;
    solver.check_step(norm_bound_at_level(scheme, adapt.max_level))?;
    match scheme {
        SchemeKind::Fd => {
            if adapt.cycles > 1 {
                warnings.push(format!("fd runs a single solve at level {}; cycles ignored", adapt.max_level));
            }
            run_fd(source, params, solver, &adapt, observer, warnings)
        }
        SchemeKind::Fe => run_fe(source, params, FeVariant::Fe, solver, &adapt, observer, warnings),
        SchemeKind::FePrime => run_fe(source, params, FeVariant::FePrime, solver, &adapt, observer, warnings),
    }
}

fn run_fd(
    source: &Source,
    params: &ModelParams,
    solver: &SolverConfig,
    adapt: &AdaptConfig,
    observer: &mut dyn FnMut(&CycleReport),
    warnings: Vec<String>,
) -> Result<AdaptiveRun> {
    let start = Instant::now();
    let (lattice, u0) = match source {
        Source::Image(img) => (img.lattice(), img.values().to_vec()),
        Source::Analytic(g) => {
            let lat = Lattice::with_level(adapt.max_level);
            let vals = lat.sample(|x, y| g.eval(x, y));
            (lat, vals)
        }
    };
    let theta = model::compute_theta(&u0, params)?;
    let disc = FdScheme::new(lattice, theta)?;
    let init: Vec<f64> = u0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let outcome = pdsolver::solve(&disc, solver, init, vec![[0.0; 2]; lattice.n_nodes()])?;

    let mut q = outcome.p.clone();
    fd_zero_normal_trace(&lattice, &mut q);
    let est = estimator::estimate_u_lattice(&lattice, &outcome.u, &q, source, params)?;
    let certificate = Certificate::new(est, &AffinePieces::from_lattice(&lattice, &outcome.u));
    let report = CycleReport {
        cycle: 1,
        scheme: SchemeKind::Fd,
        dofs: lattice.n_nodes(),
        leaves: (lattice.side() - 1).pow(2),
        h_min: lattice.h(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        marked: 0,
        refine: RefineSummary::default(),
        certificate,
    };
    observer(&report);
    let h2 = lattice.h().powi(2);
    let fields = Fields {
        side: lattice.side(),
        segmentation: model::threshold(&outcome.u, 0.5),
        relaxed: outcome.u,
        dual: q,
        per_cell_density: report.certificate.per_cell.iter().map(|v| v / h2).collect(),
    };
    Ok(AdaptiveRun { cycles: vec![report], fields, final_mesh: None, stalled: false, warnings })
}

/// Smoothed primal and nodal dual pair on which the certificate is evaluated.
pub fn postprocess_fe(disc: &FeScheme, outcome: &SolveOutcome) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let mesh = disc.mesh();
    let scheme = match disc.variant() {
        FeVariant::Fe => SchemeKind::Fe,
        FeVariant::FePrime => SchemeKind::FePrime,
    };
    let plan = smoothing_plan(scheme, mesh);
    let u_bar = Smoother::new(mesh, plan.primal)?.smooth(&outcome.u);
    let nodal = match disc.variant() {
        FeVariant::Fe => outcome.p.clone(),
        FeVariant::FePrime => disc.project_dual_to_nodes(&outcome.p),
    };
    let p_bar = smooth_dual(mesh, &nodal, plan.dual)?;
    Ok((u_bar, p_bar))
}

fn run_fe(
    source: &Source,
    params: &ModelParams,
    variant: FeVariant,
    solver: &SolverConfig,
    adapt: &AdaptConfig,
    observer: &mut dyn FnMut(&CycleReport),
    warnings: Vec<String>,
) -> Result<AdaptiveRun> {
    let scheme_kind = if variant == FeVariant::Fe { SchemeKind::Fe } else { SchemeKind::FePrime };
    let mut mesh = QuadMesh::uniform(adapt.init_level, adapt.max_level)?;
    let mut u_init: Vec<f64> = mesh.interpolate(|x, y| u0_at(source, x, y).clamp(0.0, 1.0));
    let mut p_init: Vec<[f64; 2]> = Vec::new();
    let mut reports = Vec::new();
    let mut stalled = false;
    let mut last: Option<(QuadMesh, Vec<f64>, Vec<[f64; 2]>, Vec<f64>)> = None;

    for cycle in 1..=adapt.cycles {
        let start = Instant::now();
        let u0_nodes = mesh.interpolate(|x, y| u0_at(source, x, y));
        let theta: ThetaFields = model::compute_theta(&u0_nodes, params)?;
        let disc = FeScheme::new(variant, mesh.clone(), theta)?;
        if p_init.len() != pdsolver::Discretization::dual_len(&disc) {
            p_init = vec![[0.0; 2]; pdsolver::Discretization::dual_len(&disc)];
        }
        let outcome = pdsolver::solve(&disc, solver, u_init, p_init)?;
        let (u_bar, p_bar) = postprocess_fe(&disc, &outcome)?;
        let est = estimator::estimate_u_mesh(&mesh, &u_bar, &p_bar, source, params)?;
        let certificate = Certificate::new(est, &AffinePieces::from_mesh(&mesh, &u_bar));

        let mut marked_cells: Vec<CellId> = Vec::new();
        if cycle < adapt.cycles {
            marked_cells = mark(&certificate.per_cell, adapt.alpha)
                .into_iter()
                .map(|k| mesh.leaves()[k])
                .filter(|c| c.level < adapt.max_level)
                .collect();
        }
        let refined = (!marked_cells.is_empty()).then(|| mesh.refine(&marked_cells));
        let report = CycleReport {
            cycle,
            scheme: scheme_kind,
            dofs: mesh.n_dofs(),
            leaves: mesh.leaves().len(),
            h_min: mesh.h_min(),
            iterations: outcome.iterations,
            converged: outcome.converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            marked: marked_cells.len(),
            refine: refined.as_ref().map(|r| r.1).unwrap_or_default(),
            certificate,
        };
        observer(&report);
        let per_cell = report.certificate.per_cell.clone();
        reports.push(report);

        match refined {
            Some((fine, _)) => {
                u_init = fine.prolong_from(&mesh, &outcome.u)?;
                p_init = prolong_dual(variant, &mesh, &fine, &outcome.p)?;
                last = Some((mesh, u_bar, p_bar, per_cell));
                mesh = fine;
            }
            None => {
                stalled = cycle < adapt.cycles;
                last = Some((mesh, u_bar, p_bar, per_cell));
                break;
            }
        }
        if cycle == adapt.cycles {
            break;
        }
    }

    let (final_mesh, u_bar, p_bar, per_cell) = last.expect("at least one cycle ran");
    let fields = sample_fields(&final_mesh, &u_bar, &p_bar, &per_cell)?;
    Ok(AdaptiveRun { cycles: reports, fields, final_mesh: Some(final_mesh), stalled, warnings })
}

fn prolong_dual(variant: FeVariant, coarse: &QuadMesh, fine: &QuadMesh, p: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    match variant {
        FeVariant::Fe => {
            let x: Vec<f64> = p.iter().map(|v| v[0]).collect();
            let y: Vec<f64> = p.iter().map(|v| v[1]).collect();
            let fx = fine.prolong_from(coarse, &x)?;
            let fy = fine.prolong_from(coarse, &y)?;
            Ok(fx.into_iter().zip(fy).map(|(a, b)| [a, b]).collect())
        }
        FeVariant::FePrime => Ok(fine.parent_triangles(coarse)?.into_iter().map(|t| p[t]).collect()),
    }
}

fn sample_fields(mesh: &QuadMesh, u: &[f64], p: &[[f64; 2]], per_cell: &[f64]) -> Result<Fields> {
    let lattice = Lattice::with_level(mesh.max_level());
    let un = mesh.expand(u);
    let pn = mesh.expand_vector(p);
    let px: Vec<f64> = pn.iter().map(|v| v[0]).collect();
    let py: Vec<f64> = pn.iter().map(|v| v[1]).collect();
    let mut relaxed = Vec::with_capacity(lattice.n_nodes());
    let mut dual = Vec::with_capacity(lattice.n_nodes());
    for i in 0..lattice.n_nodes() {
        let [x, y] = lattice.position(i);
        relaxed.push(mesh.eval_nodal(&un, x, y)?);
        dual.push([mesh.eval_nodal(&px, x, y)?, mesh.eval_nodal(&py, x, y)?]);
    }
    let cells = lattice.side() - 1;
    let mut density = vec![0.0; cells * cells];
    for (k, leaf) in mesh.leaves().iter().enumerate() {
        let sub = 1usize << (mesh.max_level() - leaf.level);
        let value = per_cell[k] / leaf.size().powi(2);
        for cy in leaf.j as usize * sub..(leaf.j as usize + 1) * sub {
            for cx in leaf.i as usize * sub..(leaf.i as usize + 1) * sub {
                density[cy * cells + cx] = value;
            }
        }
    }
    Ok(Fields { side: lattice.side(), segmentation: model::threshold(&relaxed, 0.5), relaxed, dual, per_cell_density: density })
}

/// The a-priori bound on ‖Λ‖² for a scheme on a uniform mesh or lattice of the given level.
pub fn norm_bound_at_level(scheme: SchemeKind, level: u32) -> f64 {
    let h2 = 4f64.powi(-(level as i32));
    match scheme {
        SchemeKind::Fd => 8.0 / h2,
        SchemeKind::Fe => 96.0 * (3.0 + 2.0 * 2f64.sqrt()) / h2,
        SchemeKind::FePrime => 48.0 * (3.0 + 2.0 * 2f64.sqrt()) / h2,
    }
}

/// θ at the DOFs of a mesh, interpolated from the source (θ_h = I_h θ).
pub fn theta_on_mesh(mesh: &QuadMesh, source: &Source, params: &ModelParams) -> Result<ThetaFields> {
    model::compute_theta(&mesh.interpolate(|x, y| u0_at(source, x, y)), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{Image, TwoGaussian};

    #[test]
    fn mark_examples() {
        assert_eq!(mark(&[2.0; 7], 0.2), (0..7).collect::<Vec<_>>());
        let vals: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        assert_eq!(mark(&vals, 0.2), (1..10).collect::<Vec<_>>());
        let mut outlier = vec![1.0; 20];
        outlier[13] = 100.0;
        let m = mark(&outlier, 0.2);
        // max rule marks the outlier; the decile adds the last two ranks (ties by position)
        assert_eq!(m, vec![13, 19]);
        assert!(mark(&[0.0; 5], 0.2).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(AdaptConfig { alpha: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdaptConfig { init_level: 7, max_level: 6, ..Default::default() }.validate().is_err());
        assert!(AdaptConfig::default().validate().is_ok());
    }

    #[test]
    fn uniform_image_has_zero_certificate() {
        let img = Image::new(17, vec![0.3; 17 * 17]).unwrap();
        let params = ModelParams::new(0.8, 0.1, 0.05).unwrap();
        let solver = SolverConfig { threshold: 1e-10, max_iters: 5000, gap_every: 0, ..SolverConfig::from_bound(norm_bound_at_level(SchemeKind::Fe, 4), 1.0, 0.9) };
        let adapt = AdaptConfig { alpha: 0.2, cycles: 3, init_level: 2, max_level: 4 };
        let run = run_adaptive(&Source::Image(img), &params, SchemeKind::Fe, &solver, &adapt, &mut |_| {}).unwrap();
        for c in &run.cycles {
            assert!(c.certificate.err_u_sq.abs() < 1e-10, "{}", c.certificate.err_u_sq);
            assert!(c.converged);
        }
        let target = 0.04 / 0.29;
        assert!(run.fields.relaxed.iter().all(|v| (v - target).abs() < 1e-6));
    }

    #[test]
    fn levels_stay_within_bounds() {
        let params = ModelParams::new(0.495349, 0.056845, 5e-3).unwrap();
        let solver = SolverConfig { threshold: 1e-6, max_iters: 3000, gap_every: 0, ..SolverConfig::from_bound(norm_bound_at_level(SchemeKind::FePrime, 4), 1.0, 0.9) };
        let adapt = AdaptConfig { alpha: 0.2, cycles: 3, init_level: 2, max_level: 4 };
        let run = run_adaptive(
            &Source::Analytic(TwoGaussian::default()),
            &params,
            SchemeKind::FePrime,
            &solver,
            &adapt,
            &mut |_| {},
        )
        .unwrap();
        assert!(run.cycles.len() <= 3);
        let mesh = run.final_mesh.unwrap();
        assert!(mesh.finest_level() <= 4 && mesh.min_level() >= 2);
        assert_eq!(run.fields.side, 17);
    }
}
