//! The misclassification bound err_chi = min_η a[v,η] + err_u²/η² on a ramp.

use certseg::estimator::{area_band, estimate_chi, AffinePieces};
use certseg::fdgrid::Lattice;

fn main() {
    // v(x, y) = x on a fine lattice: the band {|v − ½| ≤ η} has area 2η
    let lattice = Lattice::with_level(6);
    let v = lattice.sample(|x, _| x);
    let pieces = AffinePieces::from_lattice(&lattice, &v);
    for eta in [0.05, 0.1, 0.25] {
        println!("a[v, {eta}] = {:.6}", area_band(&pieces, eta));
    }
    for err_u_sq in [1e-6, 1e-4, 1e-2] {
        let chi = estimate_chi(&pieces, err_u_sq);
        let analytic = err_u_sq.cbrt();
        println!(
            "err_u^2 = {err_u_sq:.0e}: eta_opt {:.4} (stationary point {:.4}), err_chi {:.5}",
            chi.eta_opt, analytic, chi.err_chi
        );
    }
}
