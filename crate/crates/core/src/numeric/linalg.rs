use nalgebra::DMatrix;

pub fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().determinant(),
    }
}

/// Cofactor matrix, `cof(A)_{ij} = (-1)^{i+j} det(A without row i, column j)`.
/// Satisfies `d det(A) / dA_{ij} = cof(A)_{ij}`.
pub fn cofactor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(i).remove_column(j);
        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * det(&minor)
    })
}

/// Largest and smallest singular values.
pub fn singular_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactor_is_determinant_gradient() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -1.0, 0.5, 1.5, 0.2, -0.4, 0.7, 3.0]);
        let c = cofactor(&m);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut p = m.clone();
                p[(i, j)] += h;
                let mut q = m.clone();
                q[(i, j)] -= h;
                let fd = (det(&p) - det(&q)) / (2.0 * h);
                assert!((fd - c[(i, j)]).abs() < 1e-8);
            }
        }
        assert!((det(&m) - m.clone().determinant()).abs() < 1e-12);
    }
}
