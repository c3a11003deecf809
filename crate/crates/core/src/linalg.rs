//! Tiny dense routines on row-major `n*n` slices. Used in hot loops where
//! allocating nalgebra matrices per grid node would dominate the run time.

/// In-place lower Cholesky factorization. On failure returns the index and
/// value of the first pivot below `tol`. Upper triangle is left untouched.
pub fn cholesky_in_place(a: &mut [f64], n: usize, tol: f64) -> Result<(), (usize, f64)> {
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d >= tol) {
            return Err((i, d));
        }
        row_i[i] = d.sqrt();
    }
    Ok(())
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Solves `L x = b` in place.
pub fn forward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i + 1];
        b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn backward_sub_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for (k, bk) in b.iter().enumerate().skip(i + 1) {
            s -= l[k * n + i] * bk;
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `A x = b` for symmetric positive definite `A` given by its Cholesky factor.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    forward_sub(l, n, b);
    backward_sub_t(l, n, b);
}

/// xᵀ A y for row-major A.
pub fn quad_form(a: &[f64], n: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * y[j];
        }
        s += x[i] * row;
    }
    s
}
