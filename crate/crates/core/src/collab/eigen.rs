//! Dense symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by implicit-shift QL
//! iteration with eigenvector accumulation — the classic dense path, which is
//! plenty at the matrix sizes the clustering recursion produces. The basis is
//! accumulated with each vector stored contiguously so the hot loops stay on
//! cache-friendly slices. Off-diagonal entries are considered negligible
//! below [`EIGEN_TOL`] relative to the neighboring diagonal; downstream code
//! treats cluster assignments, not raw eigenvector coordinates, as the stable
//! contract.

use crate::num::{real, Real};

/// Relative off-diagonal threshold for QL deflation.
pub const EIGEN_TOL: f64 = 1e-8;

const MAX_QL_ITERATIONS: usize = 50;

/// Eigenvalues in ascending order with an orthonormal eigenvector each.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<F> {
    pub values: Vec<F>,
    /// Eigenvectors stored contiguously: vector k occupies `[k*n, (k+1)*n)`.
    vectors: Vec<F>,
    pub n: usize,
}

impl<F: Real> SymmetricEigen<F> {
    /// Component `row` of eigenvector `k`.
    #[inline]
    pub fn vector_entry(&self, row: usize, k: usize) -> F {
        self.vectors[k * self.n + row]
    }

    /// Eigenvector `k` as a slice.
    pub fn vector(&self, k: usize) -> &[F] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Decompose a symmetric matrix given as a row-major `n x n` slice.
///
/// Only the lower triangle is read. Returns `None` if the QL iteration fails
/// to deflate an eigenvalue within the iteration budget, which does not occur
/// for finite symmetric input.
pub fn symmetric_eigen<F: Real>(matrix: &[F], n: usize) -> Option<SymmetricEigen<F>> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return Some(SymmetricEigen {
            values: Vec::new(),
            vectors: Vec::new(),
            n,
        });
    }
    let mut a = matrix.to_vec();
    let mut d = vec![F::zero(); n];
    let mut e = vec![F::zero(); n];
    let mut h_of = vec![F::zero(); n];
    tridiagonalize(&mut a, n, &mut d, &mut e, &mut h_of);
    let mut basis = accumulate_transform(&a, n, &h_of);
    ql_implicit(&mut d, &mut e, &mut basis, n)?;
    sort_ascending(&mut d, &mut basis, n);
    Some(SymmetricEigen {
        values: d,
        vectors: basis,
        n,
    })
}

/// Householder reduction. On exit `d` holds the diagonal of the tridiagonal
/// form, `e[1..]` its subdiagonal, `h_of[i]` the Householder scalar of step i
/// (zero when the step was skipped), and row i of `a` the scaled reflector.
fn tridiagonalize<F: Real>(a: &mut [F], n: usize, d: &mut [F], e: &mut [F], h_of: &mut [F]) {
    let mut p = vec![F::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = F::zero();
        if l > 0 {
            let scale: F = a[i * n..i * n + i].iter().map(|v| v.abs()).sum();
            if scale == F::zero() {
                e[i] = a[i * n + l];
            } else {
                let inv_scale = F::one() / scale;
                for v in &mut a[i * n..i * n + i] {
                    *v *= inv_scale;
                    h += *v * *v;
                }
                let f = a[i * n + l];
                let g = if f >= F::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;

                // p = A·u over the lower triangle, rows staying contiguous.
                let (lower, upper) = a.split_at_mut(i * n);
                let u = &upper[..i];
                for slot in &mut p[..i] {
                    *slot = F::zero();
                }
                for k in 0..i {
                    let row = &lower[k * n..k * n + k + 1];
                    let uk = u[k];
                    let mut acc = row[k] * uk;
                    for j in 0..k {
                        p[j] += row[j] * uk;
                        acc += row[j] * u[j];
                    }
                    p[k] += acc;
                }

                let inv_h = F::one() / h;
                let mut f_acc = F::zero();
                for (slot, &uj) in p[..i].iter_mut().zip(u) {
                    *slot *= inv_h;
                    f_acc += *slot * uj;
                }
                let hh = f_acc / (h + h);
                for (slot, &uj) in p[..i].iter_mut().zip(u) {
                    *slot -= hh * uj;
                }
                // Rank-2 update of the lower triangle.
                for j in 0..i {
                    let fj = u[j];
                    let gj = p[j];
                    let row = &mut lower[j * n..j * n + j + 1];
                    for k in 0..=j {
                        row[k] = row[k] - (fj * p[k] + gj * u[k]);
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        h_of[i] = h;
    }
    h_of[0] = F::zero();
    e[0] = F::zero();
    for i in 0..n {
        d[i] = a[i * n + i];
    }
}

/// Accumulate the Householder transform as a contiguous-vector basis:
/// `basis[k*n..][..n]` is basis vector k (initially the k-th column of Q).
fn accumulate_transform<F: Real>(a: &[F], n: usize, h_of: &[F]) -> Vec<F> {
    let mut basis = vec![F::zero(); n * n];
    let mut uh = vec![F::zero(); n];
    for i in 0..n {
        let h = h_of[i];
        if h != F::zero() {
            let u = &a[i * n..i * n + i];
            let inv_h = F::one() / h;
            for (slot, &uk) in uh[..i].iter_mut().zip(u) {
                *slot = uk * inv_h;
            }
            for j in 0..i {
                let row_j = &mut basis[j * n..j * n + i];
                let g: F = u
                    .iter()
                    .zip(row_j.iter())
                    .map(|(&ua, &qa)| ua * qa)
                    .fold(F::zero(), |acc, v| acc + v);
                for (q, &scaled) in row_j.iter_mut().zip(&uh[..i]) {
                    *q -= g * scaled;
                }
            }
        }
        for k in 0..n {
            basis[i * n + k] = F::zero();
        }
        basis[i * n + i] = F::one();
    }
    basis
}

/// Implicit-shift QL sweeps on the tridiagonal (d, e), rotating the basis
/// vectors along. Vector k lives in `basis[k*n..][..n]`.
fn ql_implicit<F: Real>(d: &mut [F], e: &mut [F], basis: &mut [F], n: usize) -> Option<()> {
    let tol = F::epsilon().max(real(EIGEN_TOL));
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = F::zero();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= tol * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (e[l] + e[l]);
            let mut r = g.hypot(F::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = F::one();
            let mut c = F::one();
            let mut p = F::zero();
            let mut deflated_early = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == F::zero() {
                    d[i + 1] -= p;
                    e[m] = F::zero();
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + (c + c) * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate basis vectors i and i+1 (contiguous rows).
                let (lo, hi) = basis.split_at_mut((i + 1) * n);
                let row_i = &mut lo[i * n..];
                let row_j = &mut hi[..n];
                for (vi, vj) in row_i.iter_mut().zip(row_j.iter_mut()) {
                    f = *vj;
                    *vj = s * *vi + c * f;
                    *vi = c * *vi - s * f;
                }
            }
            if deflated_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = F::zero();
        }
    }
    Some(())
}

fn sort_ascending<F: Real>(d: &mut [F], basis: &mut [F], n: usize) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_d: Vec<F> = order.iter().map(|&k| d[k]).collect();
    let mut sorted = vec![F::zero(); n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        sorted[new_k * n..(new_k + 1) * n].copy_from_slice(&basis[old_k * n..(old_k + 1) * n]);
    }
    d.copy_from_slice(&sorted_d);
    basis.copy_from_slice(&sorted);
}
