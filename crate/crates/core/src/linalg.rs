// Sparse-aware kernels for the small dense matrices used throughout. The
// optical elements are monomial or block-local, so iterating over nonzero
// entries keeps every sandwich product at O(nnz · n).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;

pub(crate) fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v.re != 0.0 || v.im != 0.0 {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// `op · rho · op†` for square `op`.
pub(crate) fn sandwich(op: &CMatrix, rho: &CMatrix) -> CMatrix {
    sandwich_nz(&nonzeros(op), rho)
}

// With A = ρ·op†, the result is op·A = (A†·op†)†, so both passes only add
// scaled columns, which are contiguous in column-major storage.
pub(crate) fn sandwich_nz(nz: &[(usize, usize, Complex64)], rho: &CMatrix) -> CMatrix {
    let n = rho.nrows();
    let a = right_mul_adjoint(rho.as_slice(), n, nz);
    let b = adjoint_slice(&a, n);
    let c = right_mul_adjoint(&b, n, nz);
    CMatrix::from_vec(n, n, adjoint_slice(&c, n))
}

// m · op†: column i of the result gathers conj(op[i, j]) · column j of m.
fn right_mul_adjoint(m: &[Complex64], n: usize, nz: &[(usize, usize, Complex64)]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for &(i, j, v) in nz {
        let vc = v.conj();
        let (src, dst) = (&m[j * n..(j + 1) * n], i * n);
        for (r, x) in src.iter().enumerate() {
            out[dst + r] += x * vc;
        }
    }
    out
}

fn adjoint_slice(m: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..n {
        for r in 0..n {
            out[r * n + c] = m[c * n + r].conj();
        }
    }
    out
}

/// `op† · op`.
pub(crate) fn gram(op: &CMatrix) -> CMatrix {
    let n = op.ncols();
    let mut out = CMatrix::zeros(n, n);
    let nz = nonzeros(op);
    // group by row so each row contributes its outer product
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); op.nrows()];
    for (i, j, v) in nz {
        rows[i].push((j, v));
    }
    for row in &rows {
        for &(j, a) in row {
            for &(k, b) in row {
                out[(j, k)] += a.conj() * b;
            }
        }
    }
    out
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn identity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs_diff(m, &CMatrix::identity(n, n))
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Whether the Hermitian part of `m` plus `shift·I` has a Cholesky factor
/// with strictly positive real pivots.
pub(crate) fn shifted_cholesky_ok(m: &CMatrix, shift: f64) -> bool {
    let n = m.nrows();
    // lower triangle, row-major, of the Hermitian part
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
        l[i * n + i] += shift;
    }
    for j in 0..n {
        let mut d = l[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

pub(crate) fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMatrix {
        let mut x = seed;
        CMatrix::from_fn(n, n, |_, _| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((x >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((x >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            Complex64::new(a, b)
        })
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let op = sample(8, 1);
        let rho = sample(8, 2);
        let dense = &op * &rho * op.adjoint();
        assert!(max_abs_diff(&sandwich(&op, &rho), &dense) < 1e-12);
    }

    #[test]
    fn gram_matches_dense_product() {
        let op = sample(6, 7);
        let dense = op.adjoint() * &op;
        assert!(max_abs_diff(&gram(&op), &dense) < 1e-12);
    }
}
