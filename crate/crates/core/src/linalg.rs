//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::poly::ComplexPolynomial;

pub type CMatrix = DMatrix<C64>;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[Vec<C64>]) -> C64 {
    let n = m.len();
    let mut a: Vec<Vec<C64>> = m.to_vec();
    let mut d = C64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[piv][col].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            a.swap(piv, col);
            d = -d;
        }
        d *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
        }
    }
    d
}

/// Determinant of a matrix of polynomials by Laplace expansion along the
/// first row. Intended for the small (at most ~6x6) Jacobi–Trudi matrices.
pub fn poly_det(m: &[Vec<ComplexPolynomial>]) -> ComplexPolynomial {
    let n = m.len();
    match n {
        0 => ComplexPolynomial::one(),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {
            let mut acc = ComplexPolynomial::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<ComplexPolynomial>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, p)| p.clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][j] * &poly_det(&minor);
                acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues with
/// orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues and (unit) right eigenvectors of a general complex matrix with
/// a simple spectrum, via the complex Schur form and back substitution.
pub fn general_eigen(m: &CMatrix) -> (Vec<C64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let (q, t) = nalgebra::Schur::new(m.clone()).unpack();
    let scale = fro_norm(&t).max(f64::MIN_POSITIVE);
    let mut vecs = CMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        vals.push(lam);
        let mut y = DVector::<C64>::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lam;
            if denom.norm() < 1e-14 * scale {
                denom = C64::new(1e-14 * scale, 0.0);
            }
            y[i] = -s / denom;
        }
        let x = &q * y;
        let nx = x.norm();
        vecs.set_column(k, &(x / C64::new(nx, 0.0)));
    }
    (vals, vecs)
}

/// Rayleigh quotient `v^H A v / v^H v`.
pub fn rayleigh(a: &CMatrix, v: &DVector<C64>) -> C64 {
    let av = a * v;
    v.dotc(&av) / v.dotc(v)
}

/// Solve `A x = b` for a small dense complex system.
pub fn solve(a: &CMatrix, b: &DVector<C64>) -> Option<DVector<C64>> {
    a.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn det_small() {
        let m = vec![
            vec![c(2.0, 0.0), c(1.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 1.0), c(3.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, -1.0)],
        ];
        // cofactor expansion by hand
        let want = c(2.0, 0.0) * (c(3.0, 0.0) * c(1.0, -1.0) - c(1.0, 0.0) * c(0.0, 0.0))
            - c(1.0, 1.0) * (c(0.0, 1.0) * c(1.0, -1.0) - c(1.0, 0.0) * c(1.0, 0.0))
            + c(0.0, 0.0);
        assert!((det(&m) - want).norm() < 1e-13);
    }

    #[test]
    fn poly_det_matches_pointwise_det() {
        let p = |a: f64, b: f64| ComplexPolynomial::new(vec![c(a, 0.0), c(b, 1.0)]);
        let m = vec![
            vec![p(1.0, 2.0), p(0.5, -1.0), p(2.0, 0.0)],
            vec![p(-1.0, 1.0), p(3.0, 0.0), p(0.0, 1.0)],
            vec![p(0.2, 0.2), p(1.0, 1.0), p(-2.0, 0.5)],
        ];
        let d = poly_det(&m);
        let u = c(0.37, -0.81);
        let num: Vec<Vec<C64>> = m.iter().map(|r| r.iter().map(|q| q.eval(u)).collect()).collect();
        assert!((d.eval(u) - det(&num)).norm() < 1e-12);
    }

    #[test]
    fn general_eigen_recovers_vectors() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(2.0, 1.0),
                c(0.0, 0.0),
                c(0.0, 0.5),
                c(-1.0, 0.0),
                c(1.0, 0.0),
                c(0.3, 0.0),
                c(0.0, 0.0),
                c(2.0, 2.0),
            ],
        );
        let (vals, vecs) = general_eigen(&a);
        for k in 0..3 {
            let v = vecs.column(k).into_owned();
            let r = &a * &v - &v * vals[k];
            assert!(r.norm() < 1e-12);
        }
    }
}
