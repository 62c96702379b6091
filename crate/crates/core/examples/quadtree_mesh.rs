//! Build a 1-irregular quadtree mesh, inspect hanging nodes and prolong a field.

use certseg::mesh::{CellId, QuadMesh};

fn main() -> certseg::Result<()> {
    let coarse = QuadMesh::uniform(2, 6)?;
    // refine towards the lower-left corner twice; closure keeps the mesh 1-irregular
    let (mid, first) = coarse.refine(&[CellId::new(2, 0, 0), CellId::new(2, 1, 1)]);
    let (fine, second) = mid.refine(&[CellId::new(3, 0, 0), CellId::new(3, 3, 3)]);
    println!("split {} + {} (closure {} + {})", first.split, second.split, first.closure, second.closure);
    println!(
        "leaves {}, nodes {}, dofs {}, hanging {}, levels {}..{}, 1-irregular: {}",
        fine.leaves().len(),
        fine.n_nodes(),
        fine.n_dofs(),
        fine.n_hanging(),
        fine.min_level(),
        fine.finest_level(),
        fine.is_one_irregular()
    );

    let f = |x: f64, y: f64| x * (1.0 - y) + 0.25;
    let u = mid.interpolate(f);
    let prolonged = fine.prolong_from(&mid, &u)?;
    let worst = (0..fine.n_dofs())
        .map(|d| {
            let [x, y] = fine.dof_position(d);
            (prolonged[d] - mid.eval_nodal(&mid.expand(&u), x, y).unwrap()).abs()
        })
        .fold(0.0f64, f64::max);
    println!("prolongation reproduces the coarse field to {worst:.1e}");

    let mass = fine.assemble_mass(None)?;
    let ones = vec![1.0; fine.n_dofs()];
    println!("1ᵀM1 = {:.15} (area of the unit square)", mass.quadratic_form(&ones));

    print!("{}", fine.dump().lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
