//! Tiny dense symmetric linear algebra for the k <= 3 projection paths.

/// Jacobi eigendecomposition of a symmetric matrix; returns (eigenvalues,
/// eigenvectors as columns).
pub(crate) fn sym_eigen(mat: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let mut off = 0.0;
        let (mut p, mut q) = (0, 1);
        for i in 0..n {
            for j in (i + 1)..n {
                if a[i][j].abs() > off {
                    off = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
        let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for k in 0..n {
            let (akp, akq) = (a[k][p], a[k][q]);
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
        }
        for k in 0..n {
            let (apk, aqk) = (a[p][k], a[q][k]);
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
        }
        for k in 0..n {
            let (vkp, vkq) = (v[k][p], v[k][q]);
            v[k][p] = c * vkp - s * vkq;
            v[k][q] = s * vkp + c * vkq;
        }
    }
    let evals = (0..n).map(|i| a[i][i]).collect();
    (evals, v)
}

/// Inverse square root of a symmetric positive-definite matrix.
pub(crate) fn inv_sqrt_spd(mat: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = mat.len();
    let (evals, evecs) = sym_eigen(mat);
    let mut out = vec![vec![0.0; n]; n];
    for (k, &lam) in evals.iter().enumerate() {
        assert!(lam > 0.0, "matrix must be positive definite");
        let w = 1.0 / lam.sqrt();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += w * evecs[i][k] * evecs[j][k];
            }
        }
    }
    out
}

pub(crate) fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt_of_diagonal() {
        let m = vec![vec![4.0, 0.0], vec![0.0, 9.0]];
        let w = inv_sqrt_spd(&m);
        assert!((w[0][0] - 0.5).abs() < 1e-12);
        assert!((w[1][1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(w[0][1].abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_whitens() {
        let m = vec![vec![2.0, 0.7, 0.1], vec![0.7, 1.5, -0.3], vec![0.1, -0.3, 0.8]];
        let w = inv_sqrt_spd(&m);
        // W * M * W should be the identity
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        acc += w[i][p] * m[p][q] * w[q][j];
                    }
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-10, "({i},{j}) -> {acc}");
            }
        }
    }
}
