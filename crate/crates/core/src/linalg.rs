//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };

#[inline]
pub fn cis(theta: f64) -> C64 {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn norm_sqr(z: C64) -> f64 {
    z.re * z.re + z.im * z.im
}

/// Real Frobenius inner product `Re tr(A^H B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| norm_sqr(*z)).sum()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    let ah = a.adjoint();
    (a + ah).map(|z| z * 0.5)
}

/// Largest elementwise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are real; columns of
/// the returned matrix are the eigenvectors.
pub fn hermitian_eigen(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(a);
    vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to zero.
pub fn project_psd(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    rebuild(&vecs, vals.iter().map(|&l| l.max(0.0)))
}

/// A factor `S` with `A = S S^H` for a PSD `A`. Eigenvalues below the
/// numerical-rank threshold `n·ε·λ_max` are treated as zero.
pub fn psd_factor(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let floor = vals.len() as f64 * f64::EPSILON * top;
    let mut s = vecs;
    for (j, l) in vals.iter().enumerate() {
        let scale = if *l > floor { l.sqrt() } else { 0.0 };
        for i in 0..s.nrows() {
            s[(i, j)] *= scale;
        }
    }
    s
}

fn rebuild(vecs: &CMatrix, vals: impl Iterator<Item = f64>) -> CMatrix {
    let mut scaled = vecs.clone();
    for (j, l) in vals.enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= l;
        }
    }
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// `Re{x^H A x}` for Hermitian `A`.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    let ax = a * x;
    x.iter().zip(ax.iter()).map(|(xi, yi)| (xi.conj() * yi).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex::new(2.0, 0.0),
                Complex::new(1.0, -0.5),
                Complex::new(-0.3, 0.2),
                Complex::new(1.0, 0.5),
                Complex::new(-1.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(-0.3, -0.2),
                Complex::new(0.0, -1.0),
                Complex::new(0.5, 0.0),
            ],
        )
    }

    #[test]
    fn eigen_reconstructs() {
        let a = sample_hermitian();
        let (vals, vecs) = hermitian_eigen(&a);
        let back = rebuild(&vecs, vals.iter().cloned());
        assert!((back - &a).norm() < 1e-12);
    }

    #[test]
    fn psd_projection_is_psd_and_idempotent() {
        let a = sample_hermitian();
        let p = project_psd(&a);
        assert!(min_eigenvalue(&p) > -1e-12);
        let pp = project_psd(&p);
        assert!((pp - &p).norm() < 1e-12);
        assert!(hermitian_defect(&p) < 1e-14);
    }

    #[test]
    fn factor_reproduces_psd_matrix() {
        let p = project_psd(&sample_hermitian());
        let s = psd_factor(&p);
        assert!((&s * s.adjoint() - &p).norm() < 1e-12);
    }
}
