//! Degree-5 triangle quadrature and the P1/P2 reference elements.
//!
//! Reference coordinates `(ξ, η)` with barycentrics `λ₀ = 1 − ξ − η`,
//! `λ₁ = ξ`, `λ₂ = η`. Local P2 nodes are the three vertices followed by the
//! midpoints of edges (0,1), (1,2), (2,0).

pub const NQ: usize = 7;

/// Quadrature points as barycentric triples and weights on the reference
/// triangle (weights sum to ½). All points are interior.
pub fn points() -> [([f64; 3], f64); NQ] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w2 = (155.0 + s15) / 2400.0;
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 80.0),
        ([b1, a1, a1], w1),
        ([a1, b1, a1], w1),
        ([a1, a1, b1], w1),
        ([b2, a2, a2], w2),
        ([a2, b2, a2], w2),
        ([a2, a2, b2], w2),
    ]
}

/// P2 basis values at barycentric coordinates `l`.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Derivatives `∂φ_i/∂λ_k` of the P2 basis.
pub fn p2_lambda_derivatives(l: [f64; 3]) -> [[f64; 3]; 6] {
    [
        [4.0 * l[0] - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l[1] - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l[2] - 1.0],
        [4.0 * l[1], 4.0 * l[0], 0.0],
        [0.0, 4.0 * l[2], 4.0 * l[1]],
        [4.0 * l[2], 0.0, 4.0 * l[0]],
    ]
}

/// Local vertex pairs of the P2 edge nodes.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64, f64) -> f64) -> f64 {
        points().iter().map(|(l, w)| w * f(l[1], l[2])).sum()
    }

    #[test]
    fn exact_for_degree_five() {
        // ∫ ξ^a η^b over the reference triangle = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let q = integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                assert!((q - exact).abs() < 1e-15, "{a} {b}");
            }
        }
    }

    #[test]
    fn p2_partition_of_unity_and_nodality() {
        for (l, _) in points() {
            let s: f64 = p2_values(l).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, n) in nodes.iter().enumerate() {
            let v = p2_values(*n);
            for (j, vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
