use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::{Complex, Complex64};

use super::WaveFunction;
use crate::error::{Error, Result};
use crate::real::Real;

/// Hermiticity tolerance accepted by [`diagonalize`].
const HERMITIAN_TOL: f64 = 1e-12;

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `sum_j e_j |w_j><w_j|`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let diag = DVector::from_iterator(self.dim(), self.values.iter().map(|&e| Complex64::new(e, 0.0)));
        &self.vectors * DMatrix::from_diagonal(&diag) * self.vectors.adjoint()
    }
}

pub fn diagonalize(matrix: &DMatrix<Complex64>) -> Result<EigenDecomposition> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {}x{}", n, matrix.ncols())));
    }
    let asym = (matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > HERMITIAN_TOL {
        return Err(Error::Numeric {
            realization: 0,
            step: 0,
            message: format!("matrix is not Hermitian (max |A - A^H| = {asym:.3e})"),
        });
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 1000 * n.max(1)).ok_or_else(|| Error::Numeric {
        realization: 0,
        step: 0,
        message: "Hermitian eigensolver did not converge".into(),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// `psi <- sum_j exp(-i e_j dt / hbar) |w_j><w_j|psi>`.
pub fn step_eigen<T: Real>(decomp: &EigenDecomposition, psi: &mut WaveFunction<T>, dt: f64, hbar: f64) {
    let n = decomp.dim();
    debug_assert_eq!(psi.dim(), n);
    let x = DVector::from_iterator(n, psi.amplitudes.iter().map(|z| Complex64::new(z.re.f64(), z.im.f64())));
    let mut coeffs = decomp.vectors.ad_mul(&x);
    for (c, &e) in coeffs.iter_mut().zip(&decomp.values) {
        *c *= Complex64::from_polar(1.0, -e * dt / hbar);
    }
    let y = &decomp.vectors * coeffs;
    for (z, v) in psi.amplitudes.iter_mut().zip(y.iter()) {
        *z = Complex::new(T::of(v.re), T::of(v.im));
    }
    psi.time += dt;
}
