//! Fixed-size 3x3 linear algebra for ray and Riccati transport.
//!
//! Two-dimensional problems are embedded with a zero third row and column
//! for `Sigma` and an identity block for `Gamma`, so determinants and solves
//! of the embedded matrices agree with the 2x2 ones.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO: Mat3 = [[0.0; 3]; 3];
pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// `J` with `J x = x^perp = (x_2, -x_1, 0)`.
pub const ROT: Mat3 = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];

pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mul_vec(a: &Mat3, x: &Vec3) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|k| a[i][k] * x[k]).sum())
}

pub fn transpose(a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn add(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn axpy(s: f64, a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| s * a[i][j] + b[i][j]))
}

pub fn scale(s: f64, a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| s * a[i][j]))
}

pub fn diag(d: &Vec3) -> Mat3 {
    let mut m = ZERO;
    for i in 0..3 {
        m[i][i] = d[i];
    }
    m
}

pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn symmetrize(a: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (a[i][j] + a[j][i])))
}

/// Largest absolute entry of `a - a^T`.
pub fn asymmetry(a: &Mat3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - a[j][i]).abs());
        }
    }
    m
}

pub fn is_finite(a: &Mat3) -> bool {
    a.iter().flatten().all(|v| v.is_finite())
}

pub fn frobenius(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat3, b: &Vec3) -> Option<Vec3> {
    let mut m = *a;
    let mut r = *b;
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(a: &Mat3) -> Vec3 {
    let mut m = symmetrize(a);
    for _ in 0..64 {
        let off = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
        if off <= 1e-30 * frobenius(&m).powi(2).max(1e-300) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = IDENTITY;
            rot[p][p] = c;
            rot[q][q] = c;
            rot[p][q] = s;
            rot[q][p] = -s;
            m = mul(&transpose(&rot), &mul(&m, &rot));
        }
    }
    [m[0][0], m[1][1], m[2][2]]
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(a: &Mat3) -> f64 {
    sym_eigenvalues(a).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_solve() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        assert!((det(&a) - 18.0).abs() < 1e-14);
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let back = mul_vec(&a, &x);
        for i in 0..3 {
            assert!((back[i] - [1.0, 2.0, 3.0][i]).abs() < 1e-14);
        }
        assert!(solve(&ZERO, &[1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn rot_is_perp() {
        let x = mul_vec(&ROT, &[1.0, 2.0, 3.0]);
        assert_eq!(x, [2.0, -1.0, 0.0]);
        assert_eq!(trace(&ROT), 0.0);
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        let mut ev = sym_eigenvalues(&a);
        ev.sort_by(f64::total_cmp);
        let s = 2f64.sqrt();
        let expect = [2.0 - s, 2.0, 2.0 + s];
        for i in 0..3 {
            assert!((ev[i] - expect[i]).abs() < 1e-12, "{ev:?}");
        }
        assert!((sym_norm(&scale(-1.0, &a)) - (2.0 + s)).abs() < 1e-12);
    }
}
