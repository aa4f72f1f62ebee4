//! Small dense factorizations: Cholesky for Gram matrices, the closed-form
//! tri-factor core solve, cyclic Jacobi for symmetric eigenproblems and a
//! randomized truncated SVD used for initialization.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Relative pivot below which a Gram matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-12;
/// Ridge applied to a singular Gram matrix, relative to its mean eigenvalue.
pub const GRAM_DAMPING: f64 = 1e-8;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Returns `None` when a pivot falls below the relative singularity tolerance.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        let n = a.rows();
        if n != a.cols() {
            return None;
        }
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(T::zero(), T::max);
        let tol = T::lit(PIVOT_TOL) * max_diag;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if !(d > tol) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(Cholesky { l })
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "cholesky_solve",
                left: self.l.shape(),
                right: b.shape(),
            });
        }
        let mut x = b.clone();
        for c in 0..b.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[(i, c)];
                for p in 0..i {
                    s -= self.l[(i, p)] * x[(p, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
            // backward: Lᵀ x = y
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for p in i + 1..n {
                    s -= self.l[(p, i)] * x[(p, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
        }
        Ok(x)
    }
}

/// Factors a Gram matrix, adding `λI` with `λ = 1e-8 · tr(A)/k` only when the
/// plain factorization fails. The flag reports whether damping was applied.
pub fn factor_gram<T: Scalar>(gram: &Matrix<T>) -> Result<(Cholesky<T>, bool)> {
    if let Some(c) = Cholesky::new(gram) {
        return Ok((c, false));
    }
    let k = gram.rows().max(1);
    let mean_eig = gram.trace() / T::from_usize_lossy(k);
    let lambda = (T::lit(GRAM_DAMPING) * mean_eig).max(T::min_positive_value().sqrt());
    let mut damped = gram.clone();
    for i in 0..gram.rows() {
        damped[(i, i)] += lambda;
    }
    Cholesky::new(&damped)
        .map(|c| (c, true))
        .ok_or_else(|| Error::NonFinite("Gram matrix singular after damping".into()))
}

/// `argmin_S ‖R − Gi S Gjᵀ‖²_F`, i.e. `(GiᵀGi)⁻¹ GiᵀR Gj (GjᵀGj)⁻¹`.
pub fn solve_sylvester_least_squares<T: Scalar>(
    gi: &Matrix<T>,
    r: &Matrix<T>,
    gj: &Matrix<T>,
) -> Result<Matrix<T>> {
    if gi.rows() != r.rows() || gj.rows() != r.cols() {
        return Err(Error::DimensionMismatch {
            op: "solve_sylvester_least_squares",
            left: gi.shape(),
            right: r.shape(),
        });
    }
    let rhs = gi.t_matmul(r)?.matmul(gj)?;
    solve_core_from_projection(&gi.gram(), &rhs, &gj.gram())
}

/// Solves `Ai S Aj = M` for symmetric positive (semi)definite `Ai`, `Aj`.
pub(crate) fn solve_core_from_projection<T: Scalar>(
    gram_i: &Matrix<T>,
    projected: &Matrix<T>,
    gram_j: &Matrix<T>,
) -> Result<Matrix<T>> {
    let (ci, _) = factor_gram(gram_i)?;
    let (cj, _) = factor_gram(gram_j)?;
    let left = ci.solve(projected)?;
    let s = cj.solve(&left.transpose())?.transpose();
    s.ensure_finite("core least-squares solve")?;
    Ok(s)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "symmetric_eigen",
            left: a.shape(),
            right: (a.cols(), a.rows()),
        });
    }
    let mut m = a.symmetric_part()?;
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(T::min_positive_value());
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= eps * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m[(y, y)]
            .partial_cmp(&m[(x, x)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Orthonormalizes the columns in place (two passes of modified Gram-Schmidt).
/// Columns that collapse numerically are zeroed.
fn orthonormalize_columns<T: Scalar>(y: &mut Matrix<T>) {
    let (n, l) = y.shape();
    for _pass in 0..2 {
        for j in 0..l {
            for p in 0..j {
                let dot: T = (0..n).map(|r| y[(r, p)] * y[(r, j)]).sum();
                for r in 0..n {
                    let yp = y[(r, p)];
                    y[(r, j)] -= dot * yp;
                }
            }
            let norm: T = (0..n).map(|r| y[(r, j)] * y[(r, j)]).sum::<T>().sqrt();
            let inv = if norm > T::epsilon() { T::one() / norm } else { T::zero() };
            for r in 0..n {
                y[(r, j)] *= inv;
            }
        }
    }
}

/// Leading `k` left singular vectors (columns) and singular values of `a`,
/// via randomized subspace iteration.
pub fn truncated_svd<T: Scalar, R: Rng + ?Sized>(
    a: &Matrix<T>,
    k: usize,
    rng: &mut R,
) -> Result<(Matrix<T>, Vec<T>)> {
    let (n, p) = a.shape();
    let l = (k + 5).min(n.min(p)).max(k.min(n.min(p)));
    let omega = Matrix::from_fn(p, l, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    });
    let at = a.transpose();
    let mut q = a.matmul(&omega)?;
    orthonormalize_columns(&mut q);
    for _ in 0..4 {
        let mut z = at.matmul(&q)?;
        orthonormalize_columns(&mut z);
        q = a.matmul(&z)?;
        orthonormalize_columns(&mut q);
    }
    let b = q.t_matmul(a)?;
    let bbt = b.matmul_t(&b)?;
    let (vals, vecs) = symmetric_eigen(&bbt)?;
    let u_full = q.matmul(&vecs)?;
    let kk = k.min(l);
    let mut u = Matrix::zeros(n, k);
    for r in 0..n {
        for c in 0..kk {
            u[(r, c)] = u_full[(r, c)];
        }
    }
    let mut sigma: Vec<T> = vals.iter().take(kk).map(|&v| v.max(T::zero()).sqrt()).collect();
    sigma.resize(k, T::zero());
    Ok((u, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_factors_return_r() {
        let r = Matrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, 3.0, 4.0]]);
        let s = solve_sylvester_least_squares(&Matrix::identity(2), &r, &Matrix::identity(3)).unwrap();
        assert!(s.sub(&r).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn scaled_left_factor_halves_core() {
        let r = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let gi = Matrix::identity(2).scale(2.0);
        let s = solve_sylvester_least_squares(&gi, &r, &Matrix::identity(2)).unwrap();
        assert!(s.sub(&r.scale(0.5)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn recovers_planted_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gi = rand_matrix(&mut rng, 6, 2);
        let gj = rand_matrix(&mut rng, 5, 2);
        let planted = rand_matrix(&mut rng, 2, 2);
        let r = gi.matmul(&planted).unwrap().matmul_t(&gj).unwrap();
        let s = solve_sylvester_least_squares(&gi, &r, &gj).unwrap();
        assert!(s.sub(&planted).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn satisfies_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let gi = rand_matrix(&mut rng, 8, 3);
            let gj = rand_matrix(&mut rng, 7, 2);
            let r = rand_matrix(&mut rng, 8, 7);
            let s = solve_sylvester_least_squares(&gi, &r, &gj).unwrap();
            let lhs = gi.gram().matmul(&s).unwrap().matmul(&gj.gram()).unwrap();
            let rhs = gi.t_matmul(&r).unwrap().matmul(&gj).unwrap();
            let resid = lhs.sub(&rhs).unwrap().max_abs() / rhs.max_abs();
            assert!(resid < 1e-8, "relative residual {resid}");
        }
    }

    #[test]
    fn singular_gram_is_damped() {
        let g = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]]);
        let (_, damped) = factor_gram(&g.gram()).unwrap();
        assert!(damped);
        let r = Matrix::from_rows(&[[1.0], [2.0], [0.5]]);
        let s = solve_sylvester_least_squares(&g, &r, &Matrix::identity(1)).unwrap();
        assert!(s.is_finite());
        let fit = g.matmul(&s).unwrap();
        assert!(fit.sub(&r).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = rand_matrix(&mut rng, 5, 5);
        let a = b.add(&b.transpose()).unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = Matrix::from_fn(5, 5, |r, c| if r == c { vals[r] } else { 0.0 });
        let back = vecs.matmul(&d).unwrap().matmul_t(&vecs).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn truncated_svd_spans_low_rank_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = rand_matrix(&mut rng, 12, 2);
        let v = rand_matrix(&mut rng, 9, 2);
        let a = u.matmul_t(&v).unwrap();
        let (left, sigma) = truncated_svd(&a, 2, &mut rng).unwrap();
        assert!(sigma[0] >= sigma[1] && sigma[1] > 0.0);
        // projecting onto the recovered span reproduces a
        let proj = left.matmul(&left.t_matmul(&a).unwrap()).unwrap();
        assert!(proj.sub(&a).unwrap().max_abs() < 1e-8);
    }
}
