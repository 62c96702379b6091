//! Segment a grayscale PGM with the adaptive FE′ scheme and write every output.
//!
//!     cargo run --release --example segment_image -- [input.pgm] [out-dir]
//!
//! Without arguments a noisy synthetic 129×129 image is generated first.

use std::path::PathBuf;

use certseg::adapt::norm_bound_at_level;
use certseg::cli::{execute, InputSpec, Means, RunSpec};
use certseg::input::{to_u16, write_pgm16, Image};
use certseg::pdsolver::{SchemeKind, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(path: &PathBuf) -> certseg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let img = Image::from_fn(7, |x, y| {
        let disc = ((x - 0.45).powi(2) + (y - 0.55).powi(2)).sqrt() < 0.28;
        let bar = (0.7..0.85).contains(&x) && (0.15..0.8).contains(&y);
        if disc || bar { 0.75 } else { 0.2 }
    });
    let noisy: Vec<u16> = img.values().iter().map(|v| to_u16(v + rng.random_range(-0.15..0.15))).collect();
    write_pgm16(path, img.side(), &noisy)
}

fn main() -> certseg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.get(1).map_or("target/segment_image", String::as_str));
    let input = match args.first() {
        Some(p) => PathBuf::from(p),
        None => {
            std::fs::create_dir_all(&out)?;
            let p = out.join("input.pgm");
            synthetic(&p)?;
            p
        }
    };
    let level = Image::load_pgm(&input)?.level();

    let mut spec = RunSpec {
        input: InputSpec::Image(input),
        scheme: SchemeKind::FePrime,
        means: Means::Auto,
        nu: 5e-3,
        out,
        ..RunSpec::default()
    };
    // steps sized for the finest level the mesh can reach
    spec.solver = SolverConfig {
        threshold: 1e-6,
        ..SolverConfig::from_bound(norm_bound_at_level(SchemeKind::FePrime, level), 1.0, 0.9)
    };
    spec.adapt.init_level = 3.min(level);
    spec.adapt.cycles = 6;

    let outcome = execute(&spec, &mut |r| {
        println!(
            "cycle {:2}  dofs {:6}  err_u^2 {:.4e}  err_chi {:.4e}  ({} iterations)",
            r.cycle, r.dofs, r.certificate.err_u_sq, r.certificate.err_chi, r.iterations
        )
    })?;
    println!("gray values c1 = {:.4}, c2 = {:.4}", outcome.params.c1(), outcome.params.c2());
    for f in &outcome.files {
        println!("  {}", f.display());
    }
    Ok(())
}
