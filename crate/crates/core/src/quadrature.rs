//! Fixed quadrature rules on triangles and on the unit square.

/// Degree-4 rule on triangles: barycentric coordinates and weights summing to one.
pub const TRIANGLE_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_965;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_322;
    [
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

/// Tensor 3x3 Gauss-Legendre rule on the reference square [0,1]^2 (exact for degree 5).
pub fn square_gauss3() -> [([f64; 2], f64); 9] {
    let d = 0.5 * (0.6f64).sqrt();
    let nodes = [0.5 - d, 0.5, 0.5 + d];
    let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mut out = [([0.0; 2], 0.0); 9];
    for (a, (&x, &wx)) in nodes.iter().zip(&weights).enumerate() {
        for (b, (&y, &wy)) in nodes.iter().zip(&weights).enumerate() {
            out[3 * a + b] = ([x, y], wx * wy);
        }
    }
    out
}

/// Signed area of the triangle (a, b, c).
pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Gradients of the three barycentric coordinate functions of a triangle.
pub fn barycentric_gradients(p: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_area = 2.0 * signed_area(p[0], p[1], p[2]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = p[(k + 1) % 3];
        let b = p[(k + 2) % 3];
        g[k] = [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area];
    }
    g
}

#[inline]
pub fn bary_point(p: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral_ref(a: i32, b: i32) -> f64 {
        // int over the reference triangle (0,0),(1,0),(0,1) of x^a y^b = a! b! / (a+b+2)!
        let f = |n: i32| (1..=n).map(f64::from).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let q: f64 = TRIANGLE_DEG4
                    .iter()
                    .map(|(l, w)| {
                        let x = bary_point(&p, l);
                        w * 0.5 * x[0].powi(a) * x[1].powi(b)
                    })
                    .sum();
                assert!((q - monomial_integral_ref(a, b)).abs() < 1e-14, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn square_rule_exact_to_degree_five() {
        let rule = square_gauss3();
        for a in 0..=5 {
            for b in 0..=5 {
                let q: f64 = rule.iter().map(|(x, w)| w * x[0].powi(a) * x[1].powi(b)).sum();
                let exact = 1.0 / f64::from((a + 1) * (b + 1));
                assert!((q - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let g = barycentric_gradients([[0.1, 0.2], [0.7, 0.25], [0.3, 0.9]]);
        assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-12);
        assert!((g[0][1] + g[1][1] + g[2][1]).abs() < 1e-12);
    }
}
