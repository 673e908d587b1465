//! Exact rational matrix checks used to certify floating-point results.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::poly::Coefficient;

pub type RationalMatrix = Vec<Vec<BigRational>>;

pub fn to_rational(m: &DMatrix<f64>) -> RationalMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| BigRational::from_f64(m[(i, j)]))
                .collect()
        })
        .collect()
}

/// Exact positive-semidefiniteness test for a symmetric rational matrix by
/// symmetric Gaussian elimination: a zero pivot requires its whole remaining
/// row to vanish, a negative pivot refutes.
pub fn is_psd_exact(m: &RationalMatrix) -> bool {
    let n = m.len();
    let mut a = m.clone();
    for i in 0..n {
        if a[i].len() != n || (0..n).any(|j| a[i][j] != m[j][i]) {
            return false;
        }
    }
    for k in 0..n {
        let pivot = a[k][k].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if (k + 1..n).any(|j| !a[k][j].is_zero()) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            if a[k][i].is_zero() {
                continue;
            }
            let f = a[i][k].clone() / pivot.clone();
            for j in k + 1..n {
                let delta = f.clone() * a[k][j].clone();
                a[i][j] -= delta;
            }
        }
    }
    true
}

/// `m - shift * I`
pub fn shifted(m: &RationalMatrix, shift: &BigRational) -> RationalMatrix {
    let mut out = m.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] -= shift.clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rational;

    fn mat(rows: &[&[i64]]) -> RationalMatrix {
        rows.iter()
            .map(|r| r.iter().map(|&v| rational(v, 1)).collect())
            .collect()
    }

    #[test]
    fn psd_cases() {
        assert!(is_psd_exact(&mat(&[&[1, 1], &[1, 1]])));
        assert!(!is_psd_exact(&mat(&[&[1, 2], &[2, 1]])));
        assert!(!is_psd_exact(&mat(&[&[0, 1], &[1, 0]])));
        assert!(is_psd_exact(&mat(&[&[0, 0], &[0, 3]])));
        assert!(!is_psd_exact(&mat(&[&[1, 0], &[1, 1]])));
        assert!(is_psd_exact(&mat(&[
            &[2, -1, 0],
            &[-1, 2, -1],
            &[0, -1, 2]
        ])));
    }

    #[test]
    fn shift_moves_spectrum() {
        let m = mat(&[&[2, 0], &[0, 3]]);
        assert!(is_psd_exact(&shifted(&m, &rational(2, 1))));
        assert!(!is_psd_exact(&shifted(&m, &rational(201, 100))));
    }
}
