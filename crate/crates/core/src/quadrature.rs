//! Symmetric quadrature rules on the reference triangle and tetrahedron, in barycentric form
//! with weights normalized to sum to one.

use crate::error::{Error, Result};

/// Barycentric points and weights on a triangle.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Barycentric points and weights on a tetrahedron.
#[derive(Clone, Debug)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

pub fn triangle_rule(degree: u32) -> Result<TriangleRule> {
    match degree {
        0..=2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            Ok(TriangleRule {
                points: vec![[b, a, a], [a, b, a], [a, a, b]],
                weights: vec![1.0 / 3.0; 3],
            })
        }
        3 | 4 => {
            let a = 0.445_948_490_915_965;
            let wa = 0.223_381_589_678_011;
            let b = 0.091_576_213_509_771;
            let wb = 0.109_951_743_655_322;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (p, w) in [(a, wa), (b, wb)] {
                let q = 1.0 - 2.0 * p;
                points.extend([[q, p, p], [p, q, p], [p, p, q]]);
                weights.extend([w; 3]);
            }
            Ok(normalize_tri(TriangleRule { points, weights }))
        }
        _ => Err(Error::Unsupported {
            what: "triangle quadrature degree",
            value: degree.to_string(),
        }),
    }
}

pub fn tet_rule(degree: u32) -> Result<TetRule> {
    match degree {
        0 | 1 => Ok(TetRule {
            points: vec![[0.25; 4]],
            weights: vec![1.0],
        }),
        2 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            Ok(TetRule {
                points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
                weights: vec![0.25; 4],
            })
        }
        3..=5 => {
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (a, w) in [
                (0.310_885_919_263_300_6, 0.112_687_925_718_015_9),
                (0.092_735_250_310_891_2, 0.073_493_043_116_361_9),
            ] {
                let c = 1.0 - 3.0 * a;
                points.extend([[c, a, a, a], [a, c, a, a], [a, a, c, a], [a, a, a, c]]);
                weights.extend([w; 4]);
            }
            let b = 0.045_503_704_125_649_6;
            let c = 0.5 - b;
            let w = 0.042_546_020_777_081_2;
            for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                let mut p = [c; 4];
                p[i] = b;
                p[j] = b;
                points.push(p);
                weights.push(w);
            }
            Ok(normalize_tet(TetRule { points, weights }))
        }
        _ => Err(Error::Unsupported {
            what: "tetrahedron quadrature degree",
            value: degree.to_string(),
        }),
    }
}

fn normalize_tri(mut r: TriangleRule) -> TriangleRule {
    let s: f64 = r.weights.iter().sum();
    r.weights.iter_mut().for_each(|w| *w /= s);
    r
}

fn normalize_tet(mut r: TetRule) -> TetRule {
    let s: f64 = r.weights.iter().sum();
    r.weights.iter_mut().for_each(|w| *w /= s);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ λ1^a λ2^b over the reference triangle divided by its area: 2 a! b! / (a+b+2)!.
    fn tri_moment(a: u32, b: u32) -> f64 {
        2.0 * fact(a) * fact(b) / fact(a + b + 2)
    }

    /// ∫ λ1^a λ2^b λ3^c over the reference tetrahedron divided by its volume.
    fn tet_moment(a: u32, b: u32, c: u32) -> f64 {
        6.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
    }

    #[test]
    fn triangle_exactness() {
        for (deg, exact) in [(2, 2), (4, 4)] {
            let r = triangle_rule(deg).unwrap();
            for a in 0..=exact {
                for b in 0..=(exact - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    assert!((q - tri_moment(a, b)).abs() < 1e-13, "deg {deg} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn tet_exactness() {
        for (deg, exact) in [(2, 2), (4, 5)] {
            let r = tet_rule(deg).unwrap();
            for a in 0..=exact {
                for b in 0..=(exact - a) {
                    for c in 0..=(exact - a - b) {
                        let q: f64 = r
                            .points
                            .iter()
                            .zip(&r.weights)
                            .map(|(p, w)| {
                                w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32)
                            })
                            .sum();
                        assert!(
                            (q - tet_moment(a, b, c)).abs() < 1e-13,
                            "deg {deg} ({a},{b},{c})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unsupported_degree() {
        assert!(triangle_rule(7).is_err());
        assert!(tet_rule(9).is_err());
    }
}
