//! Upper-triangular Cholesky factors: factorization, rank-k downdates and
//! triangular solves.

use alloc::vec;

use super::Matrix;
use crate::error::{Error, Result};
use crate::math;

/// Relative pivot tolerance: pivots within `PSD_TOL · max diag` of zero are
/// treated as exact zeros, more negative ones are an error.
pub const PSD_TOL: f64 = 1e-12;

/// Returns upper-triangular `U` with `UᵀU = S` for symmetric positive
/// semi-definite `S`. Only the upper triangle of `S` is read.
pub fn cholesky_factorize(s: &Matrix) -> Result<Matrix> {
    cholesky_factorize_tol(s, PSD_TOL)
}

/// [`cholesky_factorize`] with an explicit relative pivot tolerance.
pub fn cholesky_factorize_tol(s: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Dimension(alloc::format!("cannot factorize a {}x{} matrix", n, s.cols())));
    }
    let max_diag = (0..n).map(|i| math::abs(s[(i, i)])).fold(0.0, f64::max);
    let tol = rel_tol * max_diag;
    let mut u = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= u[(k, j)] * u[(k, j)];
        }
        if !(d >= -tol) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        if d <= tol {
            // Semi-definite direction: the rest of this row stays zero, which
            // requires the matching off-diagonal residuals to vanish too.
            for i in j + 1..n {
                let mut r = s[(j, i)];
                for k in 0..j {
                    r -= u[(k, j)] * u[(k, i)];
                }
                let scale = math::sqrt(math::abs(s[(i, i)]) * max_diag.max(f64::MIN_POSITIVE));
                if math::abs(r) > 1e-6 * scale.max(tol) {
                    return Err(Error::NotPositiveDefinite { pivot: j });
                }
            }
            continue;
        }
        let p = math::sqrt(d);
        u[(j, j)] = p;
        for i in j + 1..n {
            let mut r = s[(j, i)];
            for k in 0..j {
                r -= u[(k, j)] * u[(k, i)];
            }
            u[(j, i)] = r / p;
        }
    }
    Ok(u)
}

/// Returns `U'` with `U'ᵀU' = UᵀU − KᵀK`, applying one rank-1 downdate per
/// row of `K`.
pub fn cholesky_downdate(u: &Matrix, k: &Matrix) -> Result<Matrix> {
    let n = u.rows();
    if k.cols() != n || u.cols() != n {
        return Err(Error::Dimension(alloc::format!(
            "downdate of a {n}x{} factor by a {}x{} matrix",
            u.cols(),
            k.rows(),
            k.cols()
        )));
    }
    let mut r = u.clone();
    let mut x = vec![0.0; n];
    for row in 0..k.rows() {
        x.copy_from_slice(k.row(row));
        let before = r.clone();
        if !downdate_rank1(&mut r, &mut x) {
            r = before;
            // Near-singular result: the rotation form loses accuracy, so
            // finish from the explicit product instead.
            let mut s = r.tmul(&r);
            for rest in row..k.rows() {
                let kr = k.row(rest);
                for i in 0..n {
                    for j in 0..n {
                        s[(i, j)] -= kr[i] * kr[j];
                    }
                }
            }
            return cholesky_factorize(&s);
        }
    }
    Ok(r)
}

/// In-place rank-1 downdate `RᵀR − xxᵀ`. Returns false when a pivot gets
/// too close to zero for the hyperbolic rotations to stay accurate.
fn downdate_rank1(r: &mut Matrix, x: &mut [f64]) -> bool {
    let n = x.len();
    for k in 0..n {
        let rkk = r[(k, k)];
        let xk = x[k];
        if xk == 0.0 {
            continue;
        }
        let d = rkk * rkk - xk * xk;
        if !(d > 1e-8 * rkk * rkk) {
            return false;
        }
        let rnew = math::sqrt(d);
        let c = rnew / rkk;
        let s = xk / rkk;
        r[(k, k)] = rnew;
        for j in k + 1..n {
            let v = (r[(k, j)] - s * x[j]) / c;
            r[(k, j)] = v;
            x[j] = c * x[j] - s * v;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(U) X = B`.
    Left,
    /// Solve `X op(U) = B`.
    Right,
}

/// Solves a triangular system with upper-triangular `U`, where `op(U)` is
/// `Uᵀ` if `transpose` is set. Zero pivots (semi-definite factors) give zero
/// components, i.e. the solution in the range of the factor.
pub fn triangular_solve(u: &Matrix, b: &Matrix, side: Side, transpose: bool) -> Matrix {
    match side {
        Side::Left => solve_left(u, b, transpose),
        // X op(U) = B  <=>  op(U)ᵀ Xᵀ = Bᵀ
        Side::Right => solve_left(u, &b.transpose(), !transpose).transpose(),
    }
}

fn solve_left(u: &Matrix, b: &Matrix, transpose: bool) -> Matrix {
    let n = u.rows();
    assert_eq!(b.rows(), n, "triangular solve dimension mismatch");
    let mut x = b.clone();
    for c in 0..b.cols() {
        if transpose {
            // Uᵀ is lower triangular: forward substitution.
            for i in 0..n {
                let mut v = x[(i, c)];
                for k in 0..i {
                    v -= u[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = pivot_div(v, u[(i, i)]);
            }
        } else {
            for i in (0..n).rev() {
                let mut v = x[(i, c)];
                for k in i + 1..n {
                    v -= u[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = pivot_div(v, u[(i, i)]);
            }
        }
    }
    x
}

#[inline]
fn pivot_div(v: f64, p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        v / p
    }
}

/// `op(U)⁻¹ v` for a single vector.
pub fn solve_vec(u: &Matrix, v: &[f64], transpose: bool) -> alloc::vec::Vec<f64> {
    let b = Matrix::from_vec(v.len(), 1, v.to_vec());
    solve_left(u, &b, transpose).as_slice().to_vec()
}

/// Log-determinant of a triangular factor, `Σ log |U_ii|`.
pub fn log_det(u: &Matrix) -> f64 {
    (0..u.rows()).map(|i| math::ln(math::abs(u[(i, i)]))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec::Vec;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frobenius() / b.frobenius().max(1e-300)
    }

    fn is_upper(u: &Matrix) -> bool {
        (0..u.rows()).all(|i| (0..i).all(|j| u[(i, j)] == 0.0)) && (0..u.rows()).all(|i| u[(i, i)] >= 0.0)
    }

    /// A random SPD matrix `AᵀA + εI` from the given entries.
    fn spd(n: usize, entries: &[f64]) -> Matrix {
        let a = Matrix::from_vec(n, n, entries[..n * n].to_vec());
        a.tmul(&a).add(&Matrix::identity(n).scale(0.1))
    }

    /// Dense inverse by Gauss-Jordan with partial pivoting (test oracle).
    fn inverse(m: &Matrix) -> Matrix {
        let n = m.rows();
        let mut a = m.clone();
        let mut inv = Matrix::identity(n);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
            for j in 0..n {
                let (t1, t2) = (a[(c, j)], inv[(c, j)]);
                a[(c, j)] = a[(p, j)];
                inv[(c, j)] = inv[(p, j)];
                a[(p, j)] = t1;
                inv[(p, j)] = t2;
            }
            let d = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= d;
                inv[(c, j)] /= d;
            }
            for i in 0..n {
                if i != c {
                    let f = a[(i, c)];
                    for j in 0..n {
                        a[(i, j)] -= f * a[(c, j)];
                        inv[(i, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn factorize_examples() {
        assert_eq!(cholesky_factorize(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let u = cholesky_factorize(&Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]])).unwrap();
        assert_eq!(u, Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]));
        assert_eq!(
            cholesky_factorize(&Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        );
    }

    #[test]
    fn semi_definite_pivots_are_zeroed() {
        // rank-1: v vᵀ with v = (1, 2)
        let s = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let u = cholesky_factorize(&s).unwrap();
        assert!(is_upper(&u));
        assert!(u.tmul(&u).max_abs_diff(&s) < 1e-14);
        assert_eq!(u[(1, 1)], 0.0);
        // zero variance with a non-zero covariance is not PSD
        let bad = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert!(cholesky_factorize(&bad).is_err());
    }

    #[test]
    fn downdate_examples() {
        let u = Matrix::identity(2).scale(2.0);
        assert_eq!(cholesky_downdate(&u, &Matrix::zeros(3, 2)).unwrap(), u);
        let d = cholesky_downdate(&u, &Matrix::identity(2)).unwrap();
        assert!(d.max_abs_diff(&Matrix::identity(2).scale(3f64.sqrt())) < 1e-15);
        // removing everything leaves a zero factor
        let z = cholesky_downdate(&u, &u).unwrap();
        assert!(z.frobenius() < 1e-7);
        // removing more than everything is an error
        assert!(cholesky_downdate(&u, &Matrix::identity(2).scale(3.0)).is_err());
    }

    #[test]
    fn triangular_examples() {
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i = Matrix::identity(2);
        for side in [Side::Left, Side::Right] {
            for t in [false, true] {
                assert_eq!(triangular_solve(&i, &b, side, t), b);
            }
        }
        let one = Matrix::from_rows(&[&[4.0]]);
        let x = triangular_solve(&one, &Matrix::from_rows(&[&[2.0]]), Side::Left, false);
        assert_eq!(x[(0, 0)], 0.5);
    }

    proptest! {
        #[test]
        fn factorization_reproduces_spd(n in 1usize..=8, entries in prop::collection::vec(-2.0f64..2.0, 64)) {
            let s = spd(n, &entries);
            let u = cholesky_factorize(&s).unwrap();
            prop_assert!(is_upper(&u));
            let back = u.tmul(&u);
            prop_assert!(rel_err(&back, &s) < 1e-10);
            prop_assert!(back.max_abs_diff(&back.transpose()) < 1e-13 * s.frobenius());
        }

        #[test]
        fn downdate_matches_refactorization(
            n in 1usize..=8,
            m in 1usize..=3,
            entries in prop::collection::vec(-2.0f64..2.0, 64),
            kent in prop::collection::vec(-1.0f64..1.0, 24),
            shrink in 0.05f64..0.9,
        ) {
            let s = spd(n, &entries);
            let u = cholesky_factorize(&s).unwrap();
            // K = shrink · (rows of a factor of a fraction of S) keeps UᵀU − KᵀK PSD
            let mut k = Matrix::from_vec(m, n, kent[..m * n].to_vec());
            // scale K so that KᵀK <= shrink · λ_min(S)·I, using ‖K‖_F² as a bound
            let bound = 0.1 * shrink / k.frobenius().powi(2).max(1e-12);
            k = k.scale(bound.sqrt().min(1.0));
            let d = cholesky_downdate(&u, &k).unwrap();
            prop_assert!(is_upper(&d));
            let target = s.sub(&k.tmul(&k));
            let oracle = cholesky_factorize(&target).unwrap();
            prop_assert!(rel_err(&d.tmul(&d), &target) < 1e-10);
            prop_assert!(rel_err(&d, &oracle) < 1e-8);
        }

        #[test]
        fn solves_match_dense_inverse(
            n in 1usize..=6,
            entries in prop::collection::vec(-2.0f64..2.0, 64),
            bent in prop::collection::vec(-3.0f64..3.0, 18),
        ) {
            let u = cholesky_factorize(&spd(n, &entries)).unwrap();
            let inv = inverse(&u);
            let b_left = Matrix::from_vec(n, 3, bent[..n * 3].to_vec());
            let b_right = b_left.transpose();
            let invt = inv.transpose();
            let cases: Vec<(Matrix, Matrix)> = vec![
                (triangular_solve(&u, &b_left, Side::Left, false), inv.mul(&b_left)),
                (triangular_solve(&u, &b_left, Side::Left, true), invt.mul(&b_left)),
                (triangular_solve(&u, &b_right, Side::Right, false), b_right.mul(&inv)),
                (triangular_solve(&u, &b_right, Side::Right, true), b_right.mul(&invt)),
            ];
            for (x, oracle) in cases {
                prop_assert!(x.max_abs_diff(&oracle) < 1e-8 * (1.0 + oracle.frobenius()));
            }
        }
    }

    #[test]
    fn random_5x5_downdate() {
        let entries: Vec<f64> = (0..25).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let s = spd(5, &entries);
        let u = cholesky_factorize(&s).unwrap();
        let k = Matrix::from_vec(2, 5, (0..10).map(|i| 0.05 * (i as f64 - 4.5)).collect());
        let d = cholesky_downdate(&u, &k).unwrap();
        let oracle = cholesky_factorize(&s.sub(&k.tmul(&k))).unwrap();
        assert!(rel_err(&d, &oracle) < 1e-10);
    }
}
