//! Dense Gauss–Jordan elimination over any [`Field`].
//!
//! Pivots are chosen as the first entry with non-zero value, which is exact on
//! the exact tag. Floating callers that need stability use [`rank_float`].

use num_complex::Complex64;

use crate::scalar::Field;

pub type Matrix<R> = Vec<Vec<R>>;

/// Inverse of a square matrix, or `None` if it is singular.
pub fn inverse<R: Field>(a: &Matrix<R>) -> Option<Matrix<R>> {
    let n = a.len();
    let mut m: Matrix<R> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| R::int(i64::from(i == j))));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !is_zero(&m[r][col]))?;
        m.swap(col, piv);
        let inv = m[col][col].recip()?;
        m[col] = m[col].iter().map(|v| v.clone() * inv.clone()).collect();
        for r in 0..n {
            if r != col && !is_zero(&m[r][col]) {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (dst, src) in m[r].iter_mut().zip(pivot_row) {
                    *dst = dst.clone() - f.clone() * src;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

fn is_zero<R: Field>(v: &R) -> bool {
    use crate::scalar::Scalar;
    v.value().is_zero()
}

pub fn mat_vec<R: Field>(a: &Matrix<R>, v: &[R]) -> Vec<R> {
    a.iter().map(|row| row.iter().zip(v).fold(R::int(0), |acc, (x, y)| acc + x.clone() * y.clone())).collect()
}

/// Exact rank (pivots must be exactly zero to be skipped).
pub fn rank<R: Field>(a: &Matrix<R>) -> usize {
    let mut m = a.clone();
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).find(|&i| !is_zero(&m[i][c])) else { continue };
        m.swap(r, piv);
        let inv = m[r][c].recip().expect("pivot is non-zero");
        for i in r + 1..rows {
            if !is_zero(&m[i][c]) {
                let f = m[i][c].clone() * inv.clone();
                let pivot_row = m[r].clone();
                for (dst, src) in m[i].iter_mut().zip(pivot_row) {
                    *dst = dst.clone() - f.clone() * src;
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Numerical rank with partial pivoting; entries below `tol` times the
/// largest entry count as zero.
pub fn rank_float(a: &Matrix<Complex64>, tol: f64) -> usize {
    let mut m = a.clone();
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut r = 0;
    for c in 0..cols {
        let (piv, best) =
            (r..rows).map(|i| (i, m[i][c].norm())).fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            continue;
        }
        m.swap(r, piv);
        for i in r + 1..rows {
            let f = m[i][c] / m[r][c];
            for j in c..cols {
                let s = m[r][j];
                m[i][j] -= f * s;
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}
