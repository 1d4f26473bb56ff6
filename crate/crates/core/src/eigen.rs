//! Symmetric eigendecomposition.
//!
//! The dense path is Householder tridiagonalisation followed by the implicit
//! QL algorithm (the classic `tred2`/`tql2` pair). It does not need the
//! matrix to be positive semidefinite, which matters once cannot-link edits
//! push degrees negative. For very large orders a shifted subspace iteration
//! with Rayleigh-Ritz extraction computes only the smallest few pairs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{dot, norm, Matrix};
use crate::{Error, Result};

/// Orders at or below this use the dense decomposition.
pub const DENSE_LIMIT: usize = 2000;

/// Residual tolerance for the iterative path.
pub const ITERATIVE_TOL: f64 = 1e-8;

/// Eigenvalues ascending with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Full decomposition of a symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(a: &Matrix) -> Result<Eigen> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eigendecomposition needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: Vec::new() });
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // Rotations in the QL sweep act on pairs of columns; keeping them as
    // rows makes the inner loop contiguous.
    let mut vt = v.transpose();
    tridiagonal_ql(&mut d, &mut e, &mut vt)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order.iter().map(|&k| vt.row(k).to_vec()).collect();
    Ok(Eigen { values, vectors })
}

/// The `count` smallest eigenpairs, ascending. Dense up to
/// [`DENSE_LIMIT`], iterative above it.
pub fn smallest_symmetric_eigen(a: &Matrix, count: usize) -> Result<Eigen> {
    smallest_with_limit(a, count, DENSE_LIMIT)
}

pub(crate) fn smallest_with_limit(a: &Matrix, count: usize, dense_limit: usize) -> Result<Eigen> {
    if a.rows() <= dense_limit {
        let mut full = symmetric_eigen(a)?;
        full.values.truncate(count);
        full.vectors.truncate(count);
        Ok(full)
    } else {
        subspace_smallest(a, count, ITERATIVE_TOL, 20_000)
    }
}

/// Householder reduction to tridiagonal form. On return `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// subdiagonal.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`. `vt` holds the transform as rows
/// and receives the eigenvectors as rows.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], vt: &mut Matrix) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(10);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::Numerical(format!("QL iteration did not converge for eigenvalue {l}")));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(vt, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(vt: &mut Matrix, i: usize, c: f64, s: f64) {
    let cols = vt.cols();
    let (head, tail) = vt_rows_pair(vt, i, cols);
    for (a, b) in head.iter_mut().zip(tail.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

fn vt_rows_pair(vt: &mut Matrix, i: usize, cols: usize) -> (&mut [f64], &mut [f64]) {
    // Rows i and i + 1 are adjacent in row-major storage.
    let start = i * cols;
    vt.as_mut_slice()[start..start + 2 * cols].split_at_mut(cols)
}

/// Smallest `count` eigenpairs via subspace iteration on `sigma I - A`,
/// where `sigma` is a Gershgorin upper bound on the spectrum.
pub(crate) fn subspace_smallest(a: &Matrix, count: usize, tol: f64, max_iter: usize) -> Result<Eigen> {
    let n = a.rows();
    if count == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: Vec::new() });
    }
    let block = (count + count.max(8)).min(n);
    let sigma = (0..n)
        .map(|i| {
            let row = a.row(i);
            row[i] + row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x.abs()).sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let shifted_apply = |x: &[f64]| -> Vec<f64> {
        let ax = a.mul_vec(x);
        x.iter().zip(ax).map(|(xi, axi)| sigma * xi - axi).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut basis: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    orthonormalize(&mut basis)?;

    for _ in 0..max_iter {
        let mut next: Vec<Vec<f64>> = basis.iter().map(|x| shifted_apply(x)).collect();
        orthonormalize(&mut next)?;

        // Rayleigh-Ritz on the original matrix.
        let images: Vec<Vec<f64>> = next.iter().map(|x| a.mul_vec(x)).collect();
        let mut h = Matrix::zeros(block, block);
        for i in 0..block {
            for j in i..block {
                let hij = 0.5 * (dot(&next[i], &images[j]) + dot(&next[j], &images[i]));
                h[(i, j)] = hij;
                h[(j, i)] = hij;
            }
        }
        let small = symmetric_eigen(&h)?;
        basis = (0..block)
            .map(|k| {
                let mut x = vec![0.0; n];
                for (j, coef) in small.vectors[k].iter().enumerate() {
                    for (xi, bi) in x.iter_mut().zip(&next[j]) {
                        *xi += coef * bi;
                    }
                }
                x
            })
            .collect();

        let converged = (0..count).all(|k| {
            let lambda = small.values[k];
            let ax = a.mul_vec(&basis[k]);
            let res: Vec<f64> = ax.iter().zip(&basis[k]).map(|(y, x)| y - lambda * x).collect();
            norm(&res) <= tol * lambda.abs().max(1.0)
        });
        if converged {
            return Ok(Eigen {
                values: small.values[..count].to_vec(),
                vectors: basis.into_iter().take(count).collect(),
            });
        }
    }
    Err(Error::Numerical(format!("subspace iteration did not reach residual {tol:e} in {max_iter} sweeps")))
}

/// Modified Gram-Schmidt, applied twice.
fn orthonormalize(vs: &mut [Vec<f64>]) -> Result<()> {
    for _pass in 0..2 {
        for i in 0..vs.len() {
            let (done, rest) = vs.split_at_mut(i);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(u, v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let len = norm(v);
            if !(len > 1e-300) {
                return Err(Error::Numerical("subspace basis collapsed".into()));
            }
            for vi in v.iter_mut() {
                *vi /= len;
            }
        }
    }
    Ok(())
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.random::<f64>() * 2.0 - 1.0;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    fn check_pairs(a: &Matrix, eig: &Eigen, tol: f64) {
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            assert!((norm(v) - 1.0).abs() < 1e-10);
            let av = a.mul_vec(v);
            let res: f64 = av.iter().zip(v).map(|(y, x)| (y - lambda * x).powi(2)).sum::<f64>().sqrt();
            assert!(res < tol * lambda.abs().max(1.0), "residual {res}");
        }
        for i in 0..eig.vectors.len() {
            for j in 0..i {
                assert!(dot(&eig.vectors[i], &eig.vectors[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_by_one_and_diagonal() {
        let a = Matrix::from_rows(&[[3.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![3.0]);

        let d = Matrix::from_rows(&[[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 5.0]]).unwrap();
        let e = symmetric_eigen(&d).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 5.0]);
        check_pairs(&d, &e, 1e-12);
    }

    #[test]
    fn random_matrices_have_small_residuals() {
        for seed in 0..10 {
            let a = random_symmetric(17 + seed as usize, seed);
            let e = symmetric_eigen(&a).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            check_pairs(&a, &e, 1e-10);
        }
    }

    #[test]
    fn subspace_matches_dense_smallest() {
        let a = random_symmetric(60, 7);
        let dense = symmetric_eigen(&a).unwrap();
        let it = subspace_smallest(&a, 3, 1e-9, 50_000).unwrap();
        for k in 0..3 {
            assert!((dense.values[k] - it.values[k]).abs() < 1e-8);
            let overlap = dot(&dense.vectors[k], &it.vectors[k]).abs();
            assert!((overlap - 1.0).abs() < 1e-6, "overlap {overlap}");
        }
        check_pairs(&a, &it, 1e-8);
    }

    #[test]
    fn dense_limit_switches_path() {
        let a = random_symmetric(40, 3);
        let dense = smallest_with_limit(&a, 2, 100).unwrap();
        let iter = smallest_with_limit(&a, 2, 10).unwrap();
        for k in 0..2 {
            assert!((dense.values[k] - iter.values[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn sign_rule() {
        let mut v = vec![0.1, -0.9, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
        let mut w = vec![0.5, -0.5];
        fix_sign(&mut w);
        assert_eq!(w, vec![0.5, -0.5]);
    }
}
