//! FD, FE and FE′ on the same image: certificate and segmentation agreement.

use certseg::adapt::{norm_bound_at_level, run_adaptive, AdaptConfig};
use certseg::input::{Image, Source};
use certseg::model::{lloyd_2means, ModelParams};
use certseg::pdsolver::{SchemeKind, SolverConfig};

fn main() -> certseg::Result<()> {
    let level = 5;
    let img = Image::from_fn(level, |x, y| {
        let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
        0.15 + 0.7 / (1.0 + ((r - 0.3) / 0.03).exp())
    });
    let (c1, c2) = lloyd_2means(img.values())?;
    let params = ModelParams::new(c1, c2, 1e-2)?;
    let source = Source::Image(img);

    let mut segmentations = Vec::new();
    for scheme in [SchemeKind::Fd, SchemeKind::Fe, SchemeKind::FePrime] {
        let solver = SolverConfig {
            threshold: 1e-7,
            ..SolverConfig::from_bound(norm_bound_at_level(scheme, level), 1.0, 0.9)
        };
        let adapt = AdaptConfig { alpha: 0.2, cycles: 4, init_level: 3, max_level: level };
        let run = run_adaptive(&source, &params, scheme, &solver, &adapt, &mut |_| {})?;
        let last = run.last();
        println!(
            "{:<9} cycles {}  dofs {:5}  err_u^2 {:.4e}  err_chi {:.4e}",
            scheme.as_str(),
            run.cycles.len(),
            last.dofs,
            last.certificate.err_u_sq,
            last.certificate.err_chi
        );
        segmentations.push((scheme, run.fields.segmentation));
    }
    let (_, fd) = &segmentations[0];
    for (scheme, seg) in &segmentations[1..] {
        let differ = seg.iter().zip(fd).filter(|(a, b)| a != b).count();
        println!("{} vs fd: {differ} of {} lattice nodes differ", scheme.as_str(), fd.len());
    }
    Ok(())
}
