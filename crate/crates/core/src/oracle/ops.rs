//! Single- and two-qubit operator matrices in the `(|e⟩, |g⟩)` basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn m2(a: [[f64; 2]; 2]) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |i, j| Complex64::new(a[i][j], 0.0))
}

/// `σ₋ = |g⟩⟨e|`.
pub fn sigma_minus() -> DMatrix<Complex64> {
    m2([[0.0, 0.0], [1.0, 0.0]])
}

/// `σ₊ = |e⟩⟨g|`.
pub fn sigma_plus() -> DMatrix<Complex64> {
    m2([[0.0, 1.0], [0.0, 0.0]])
}

pub fn sigma_z() -> DMatrix<Complex64> {
    m2([[1.0, 0.0], [0.0, -1.0]])
}

pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// `A ⊗ 1`.
pub fn source_op(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(&DMatrix::identity(2, 2))
}

/// `1 ⊗ A`.
pub fn probe_op(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::<Complex64>::identity(2, 2).kronecker(a)
}
