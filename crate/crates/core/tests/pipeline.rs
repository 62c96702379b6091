use certseg::adapt::{mark, norm_bound_at_level, run_adaptive, AdaptConfig};
use certseg::estimator::{discrete_estimate_u, estimate_u_mesh};
use certseg::feschemes::{FeScheme, FeVariant};
use certseg::fdgrid::{FdScheme, Lattice};
use certseg::input::{Image, Source, TwoGaussian};
use certseg::mesh::{CellId, QuadMesh};
use certseg::model::{compute_theta, ModelParams};
use certseg::oracle::{bound_holds, reference_relaxed_solve};
use certseg::pdsolver::{project_unit_ball, Discretization, SchemeKind, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certificate_dominates_distance_for_any_feasible_pair(
        u0 in proptest::collection::vec(0.0f64..1.0, 36),
        v in proptest::collection::vec(-0.5f64..1.5, 36),
        q in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 36),
        nu in 0.01f64..0.5,
    ) {
        let lat = Lattice::with_side(6).unwrap();
        let params = ModelParams::new(0.9, 0.1, nu).unwrap();
        let disc = FdScheme::new(lat, compute_theta(&u0, &params).unwrap()).unwrap();
        let cfg = SolverConfig { max_iters: 50_000, ..SolverConfig::from_bound(disc.norm_bound(), 1.0, 0.9) };
        let r = reference_relaxed_solve(&disc, &cfg, vec![0.5; 36], vec![[0.0; 2]; 36]).unwrap();
        let ref_err = discrete_estimate_u(&disc, &r.u, &r.p, &params).unwrap().err_u_sq;
        let mut q: Vec<[f64; 2]> = q.into_iter().map(|(a, b)| [a, b]).collect();
        project_unit_ball(&mut q);
        let est = discrete_estimate_u(&disc, &v, &q, &params).unwrap();
        let d: Vec<f64> = r.u.iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(bound_holds(disc.primal_dot(&d, &d), est.err_u_sq, ref_err));
    }

    #[test]
    fn marking_is_nonempty_and_contains_the_maximum(vals in proptest::collection::vec(0.0f64..10.0, 1..200), alpha in 0.01f64..0.99) {
        let m = mark(&vals, alpha);
        let max = vals.iter().copied().fold(0.0f64, f64::max);
        if max > 0.0 {
            let arg = vals.iter().position(|&v| v == max).unwrap();
            prop_assert!(m.contains(&arg));
            prop_assert!(m.len() as f64 >= (vals.len() as f64 * 0.1).floor());
        } else {
            prop_assert!(m.is_empty());
        }
        prop_assert!(m.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn prolongation_keeps_the_primal_function() {
    let coarse = QuadMesh::uniform(2, 5).unwrap().refine(&[CellId::new(2, 2, 1)]).0;
    let fine = coarse.refine(&[CellId::new(3, 4, 2), CellId::new(2, 0, 3)]).0;
    let u: Vec<f64> = (0..coarse.n_dofs()).map(|d| (d as f64 * 0.37).sin()).collect();
    let p = fine.prolong_from(&coarse, &u).unwrap();
    let coarse_nodal = coarse.expand(&u);
    for d in 0..fine.n_dofs() {
        let [x, y] = fine.dof_position(d);
        assert!((p[d] - coarse.eval_nodal(&coarse_nodal, x, y).unwrap()).abs() < 1e-14);
    }
}

#[test]
fn mesh_and_image_estimators_agree_on_smooth_data() {
    // an image sampled from the analytic input integrates nearly the same energies
    let g = TwoGaussian::default();
    let params = ModelParams::new(0.495349, 0.056845, 5e-3).unwrap();
    let mesh = QuadMesh::uniform(4, 6).unwrap();
    let theta = compute_theta(&mesh.interpolate(|x, y| g.eval(x, y)), &params).unwrap();
    let s = FeScheme::new(FeVariant::Fe, mesh.clone(), theta).unwrap();
    let v = mesh.interpolate(|x, y| if g.eval(x, y) > 0.28 { 0.9 } else { 0.1 });
    let q = vec![[0.0; 2]; s.dual_len()];
    let analytic = estimate_u_mesh(&mesh, &v, &q, &Source::Analytic(g), &params).unwrap();
    let img = Image::from_fn(6, |x, y| g.eval(x, y));
    let sampled = estimate_u_mesh(&mesh, &v, &q, &Source::Image(img), &params).unwrap();
    let rel = (analytic.err_u_sq - sampled.err_u_sq).abs() / analytic.err_u_sq;
    assert!(rel < 1e-2, "{} vs {}", analytic.err_u_sq, sampled.err_u_sq);
    assert_eq!(sampled.per_cell.len(), mesh.leaves().len());
    let total: f64 = sampled.per_cell.iter().sum();
    assert!((total - sampled.err_u_sq).abs() < 1e-10 * sampled.err_u_sq.abs().max(1.0));
}

#[test]
fn adaptive_meshes_respect_level_bounds() {
    let params = ModelParams::new(0.495349, 0.056845, 5e-3).unwrap();
    let solver = SolverConfig {
        threshold: 1e-5,
        gap_every: 0,
        ..SolverConfig::from_bound(norm_bound_at_level(SchemeKind::Fe, 5), 1.0, 0.9)
    };
    let adapt = AdaptConfig { alpha: 0.3, cycles: 4, init_level: 2, max_level: 5 };
    let mut seen = Vec::new();
    let run = run_adaptive(&Source::Analytic(TwoGaussian::default()), &params, SchemeKind::Fe, &solver, &adapt, &mut |r| {
        seen.push(r.dofs)
    })
    .unwrap();
    assert_eq!(seen.len(), run.cycles.len());
    assert!(seen.windows(2).all(|w| w[0] < w[1]));
    let mesh = run.final_mesh.unwrap();
    assert!(mesh.is_one_irregular());
    assert!(mesh.finest_level() <= 5 && mesh.min_level() >= 2);
    assert!(run.fields.segmentation.iter().all(|&c| c == 0.0 || c == 1.0));
    assert!(run.fields.dual.iter().all(|q| q[0].hypot(q[1]) <= 1.0 + 1e-9));
}
