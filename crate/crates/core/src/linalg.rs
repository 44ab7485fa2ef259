//! Small dense kernels. Desk-scale problems keep every matrix below a few
//! hundred rows, so plain row-major `Vec<Vec<T>>` storage is enough.

use crate::real::Real;

pub type Dense<T> = Vec<Vec<T>>;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn dist_inf<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(a: &[T], t: T) -> Vec<T> {
    a.iter().map(|&x| x * t).collect()
}

pub fn identity<T: Real>(n: usize) -> Dense<T> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect()
}

pub fn mat_vec<T: Real>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Gauss-Jordan inverse with partial pivoting. `None` when a pivot falls
/// below [`Real::pivot_tol`] relative to the largest entry.
pub fn invert<T: Real>(m: &[Vec<T>]) -> Option<Dense<T>> {
    let n = m.len();
    let mut a: Dense<T> = m.to_vec();
    let mut inv = identity::<T>(n);
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |s, &x| s.max(x.abs()))
        .max(T::one());
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= T::pivot_tol() * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let (ac, ic) = (a[col][j], inv[col][j]);
                a[r][j] -= f * ac;
                inv[r][j] -= f * ic;
            }
        }
    }
    Some(inv)
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(m: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = m.len();
    let mut a: Dense<T> = m.to_vec();
    let mut x = b.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |s, &v| s.max(v.abs()))
        .max(T::min_positive_value());
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, T::zero()), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best <= T::pivot_tol() * scale {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a[col][j];
                a[r][j] -= f * v;
            }
            let v = x[col];
            x[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in col + 1..n {
            s -= a[col][j] * x[j];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Cholesky solve for a symmetric positive definite system.
pub fn solve_spd<T: Real>(m: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = m.len();
    let mut l = vec![vec![T::zero(); n]; n];
    let diag_max = (0..n).fold(T::zero(), |s, i| s.max(m[i][i].abs()));
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= T::epsilon() * diag_max * T::of(16.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * y[k];
        }
        y[i] = s / l[i][i];
    }
    Some(y)
}

/// Basis of the null space of `rows` (each of length `n`), returned as a list
/// of column vectors. Rank is decided by reduced row echelon form with a
/// relative pivot tolerance, so redundant equality rows are harmless.
pub fn null_space<T: Real>(rows: &[Vec<T>], n: usize, tol: T) -> Vec<Vec<T>> {
    let mut a: Dense<T> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r >= a.len() {
            break;
        }
        let (piv, best) = (r..a.len())
            .map(|i| (i, a[i][col].abs()))
            .fold((r, T::zero()), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best <= tol {
            continue;
        }
        a.swap(r, piv);
        let p = a[r][col];
        for j in 0..n {
            a[r][j] /= p;
        }
        for i in 0..a.len() {
            if i == r {
                continue;
            }
            let f = a[i][col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let v = a[r][j];
                a[i][j] -= f * v;
            }
        }
        pivots.push(col);
        r += 1;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![T::zero(); n];
            v[f] = T::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][f];
            }
            v
        })
        .collect()
}

/// Normalizes a row to unit Euclidean length, returning the scale factor used.
pub fn normalize<T: Real>(v: &mut [T]) -> T {
    let nrm = norm2(v);
    if nrm > T::zero() {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
    nrm
}
