//! Linear (P1) triangle element.

use crate::error::{Error, Result};

pub fn signed_area(p: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Gradients of the three hat functions and the triangle area.
pub fn gradients(p: &[[f64; 2]; 3], triangle: usize) -> Result<([[f64; 2]; 3], f64)> {
    let area = signed_area(p);
    if area <= 0.0 || !area.is_finite() {
        return Err(Error::DegenerateTriangle { triangle, area });
    }
    let inv = 1.0 / (2.0 * area);
    let g = [0, 1, 2].map(|i| {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        [(p[j][1] - p[k][1]) * inv, (p[k][0] - p[j][0]) * inv]
    });
    Ok((g, area))
}

/// `ν ∫_T ∇φ_i · ∇φ_j`.
pub fn stiffness(p: &[[f64; 2]; 3], nu: f64, triangle: usize) -> Result<[[f64; 3]; 3]> {
    let (g, area) = gradients(p, triangle)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = nu * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Ok(k)
}

/// Magnet load `ν ∫_T (B_x ∂_yφ_i − B_y ∂_xφ_i)`.
///
/// This is the weak form of the `-∇×(ν B_rem)` source. With this sign a magnet
/// magnetized along +x produces a field pointing along +x inside it.
pub fn magnet_load(p: &[[f64; 2]; 3], nu: f64, b: [f64; 2], triangle: usize) -> Result<[f64; 3]> {
    let (g, area) = gradients(p, triangle)?;
    Ok(g.map(|gi| nu * area * (b[0] * gi[1] - b[1] * gi[0])))
}

/// Current source load `∫_T j φ_i`.
pub fn source_load(p: &[[f64; 2]; 3], j: f64, triangle: usize) -> Result<[f64; 3]> {
    let area = signed_area(p);
    if area <= 0.0 {
        return Err(Error::DegenerateTriangle { triangle, area });
    }
    Ok([j * area / 3.0; 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_right_triangle() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let k = stiffness(&p, 1.0, 0).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clockwise_triangle_is_degenerate() {
        let p = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            stiffness(&p, 1.0, 7),
            Err(Error::DegenerateTriangle { triangle: 7, .. })
        ));
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(stiffness(&flat, 1.0, 0).is_err());
    }

    #[test]
    fn magnet_load_sums_to_zero() {
        let p = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
        let f = magnet_load(&p, 3.0, [0.3, -0.8], 0).unwrap();
        assert!(f.iter().sum::<f64>().abs() < 1e-14);
    }
}
