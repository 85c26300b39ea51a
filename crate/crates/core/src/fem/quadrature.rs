//! Quadrature rules on the reference triangle and on segments.

/// Point of a triangle rule in barycentric coordinates; weights sum to 1 and
/// are multiplied by the element area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_20;
const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;

/// Six-point symmetric rule, exact for polynomials of degree 4.
pub const TRIANGLE_DEG4: [QuadPoint; 6] = [
    QuadPoint { bary: [1.0 - 2.0 * A1, A1, A1], weight: W1 },
    QuadPoint { bary: [A1, 1.0 - 2.0 * A1, A1], weight: W1 },
    QuadPoint { bary: [A1, A1, 1.0 - 2.0 * A1], weight: W1 },
    QuadPoint { bary: [1.0 - 2.0 * A2, A2, A2], weight: W2 },
    QuadPoint { bary: [A2, 1.0 - 2.0 * A2, A2], weight: W2 },
    QuadPoint { bary: [A2, A2, 1.0 - 2.0 * A2], weight: W2 },
];

/// Three-point Gauss-Legendre rule on `[0, 1]` as `(s, weight)`, exact to degree 5.
pub const SEGMENT_GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_311_482_073_460_021_76, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_688_517_926_539_978_24, 5.0 / 18.0),
];

/// Two-point Gauss-Legendre rule on `[0, 1]`, exact to degree 3.
pub const SEGMENT_GAUSS2: [(f64, f64); 2] =
    [(0.211_324_865_405_187_117_745_425_609_749_02, 0.5), (0.788_675_134_594_812_882_254_574_390_250_98, 0.5)];

pub fn map_point(p: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_sum_to_one() {
        let s: f64 = TRIANGLE_DEG4.iter().map(|q| q.weight).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_monomials_up_to_degree_four() {
        // on the reference triangle, the integral of L1^a L2^b L3^c is 2 a! b! c! / (a+b+c+2)! times its area
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                for c in 0..=(4 - a - b) {
                    let exact = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                    let quad: f64 = TRIANGLE_DEG4
                        .iter()
                        .map(|q| {
                            q.weight * q.bary[0].powi(a as i32) * q.bary[1].powi(b as i32) * q.bary[2].powi(c as i32)
                        })
                        .sum();
                    assert!((quad - exact).abs() < 1e-13, "({a},{b},{c}): {quad} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn cartesian_monomials_on_a_physical_triangle() {
        // x^2 y^2 over the triangle (0,0),(1,0),(0,1): 1/180
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let quad: f64 = TRIANGLE_DEG4
            .iter()
            .map(|q| {
                let x = map_point(&p, q.bary);
                0.5 * q.weight * x[0] * x[0] * x[1] * x[1]
            })
            .sum();
        assert!((quad - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn segment_rules() {
        for k in 0..=5 {
            let g3: f64 = SEGMENT_GAUSS3.iter().map(|(s, w)| w * s.powi(k)).sum();
            assert!((g3 - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
        for k in 0..=3 {
            let g2: f64 = SEGMENT_GAUSS2.iter().map(|(s, w)| w * s.powi(k)).sum();
            assert!((g2 - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
