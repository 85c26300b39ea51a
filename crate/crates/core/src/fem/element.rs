//! Reference-element formulas for P1 and P2 Lagrange triangles.

use crate::mesh::Point;

/// Area and (constant) gradients of the three P1 basis functions.
#[derive(Debug, Clone, Copy)]
pub struct P1Element {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

pub fn p1_element(p: &[Point; 3]) -> P1Element {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
    let inv = 1.0 / (2.0 * area);
    let mut grads = [[0.0; 2]; 3];
    for (i, g) in grads.iter_mut().enumerate() {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        *g = [(p[j][1] - p[k][1]) * inv, (p[k][0] - p[j][0]) * inv];
    }
    P1Element { area, grads }
}

/// P2 basis values at barycentric point `l`: vertices 0..3, then the
/// midpoints of edges (0,1), (1,2), (2,0).
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

/// P2 basis gradients at `l`, given the P1 gradients `g`.
pub fn p2_grads(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        out[i] = [s * g[i][0], s * g[i][1]];
        let j = (i + 1) % 3;
        out[3 + i] = [4.0 * (l[j] * g[i][0] + l[i] * g[j][0]), 4.0 * (l[j] * g[i][1] + l[i] * g[j][1])];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_gradients_reproduce_linear_functions() {
        let p = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
        let e = p1_element(&p);
        let f = |x: Point| 2.0 * x[0] - 3.0 * x[1] + 0.5;
        let mut grad = [0.0; 2];
        for i in 0..3 {
            grad[0] += f(p[i]) * e.grads[i][0];
            grad[1] += f(p[i]) * e.grads[i][1];
        }
        assert!((grad[0] - 2.0).abs() < 1e-14 && (grad[1] + 3.0).abs() < 1e-14);
        // constants are in the kernel
        let sx: f64 = e.grads.iter().map(|g| g[0]).sum();
        assert!(sx.abs() < 1e-14);
    }

    #[test]
    fn p2_nodal_interpolation_and_partition_of_unity() {
        let nodes =
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for (i, l) in nodes.iter().enumerate() {
            let v = p2_values(*l);
            for (j, vj) in v.iter().enumerate() {
                assert!((vj - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let g = p1_element(&[[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]]).grads;
        let gr = p2_grads([0.2, 0.3, 0.5], &g);
        let sum = gr.iter().fold([0.0, 0.0], |s, x| [s[0] + x[0], s[1] + x[1]]);
        assert!(sum[0].abs() < 1e-14 && sum[1].abs() < 1e-14);
    }
}
