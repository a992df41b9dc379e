//! Packed lower-triangular storage for the ensemble-averaged density matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagators::WaveFunction;
use crate::real::Real;

/// Largest dimension for which dense eigenvalue checks are performed.
pub const DENSE_CHECK_CAP: usize = 256;

/// `<rho>` stored as its lower triangle, row-major: entry `(a, b)` with
/// `b <= a` lives at `a (a + 1) / 2 + b`. Entries above the diagonal are the
/// conjugates, so the matrix is Hermitian by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    packed: Vec<Complex64>,
    sample_count: usize,
    time: f64,
}

#[inline]
pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl DensityMatrix {
    pub fn from_packed(dim: usize, packed: Vec<Complex64>, sample_count: usize, time: f64) -> Result<Self> {
        if packed.len() != packed_len(dim) {
            return Err(Error::Dimension(format!(
                "packed density of dimension {dim} needs {} entries, got {}",
                packed_len(dim),
                packed.len()
            )));
        }
        Ok(Self {
            dim,
            packed,
            sample_count,
            time,
        })
    }

    /// Projector onto a single state.
    pub fn pure<T: Real>(psi: &WaveFunction<T>) -> Self {
        accumulate_density(std::slice::from_ref(psi)).expect("single state is consistent")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[Complex64] {
        &self.packed
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        if b <= a {
            self.packed[a * (a + 1) / 2 + b]
        } else {
            self.packed[b * (b + 1) / 2 + a].conj()
        }
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |a| self.packed[a * (a + 1) / 2 + a].re)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| self.get(a, b))
    }

    /// Eigenvalues in ascending order (dense path, dimension capped).
    pub fn eigenvalues(&self, cap: usize) -> Result<Vec<f64>> {
        if self.dim > cap {
            return Err(Error::Capacity(format!(
                "dense eigenvalues of a {}-dimensional density matrix exceed the cap of {cap}",
                self.dim
            )));
        }
        let mut values: Vec<f64> = SymmetricEigen::new(self.to_dense()).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues(DENSE_CHECK_CAP)?[0])
    }
}

/// `<rho> = (1/R) sum_i |psi_i><psi_i|` in packed storage.
///
/// Rows are filled in parallel; every entry sums realizations in index order,
/// so the result does not depend on the thread count.
pub fn accumulate_density<T: Real>(states: &[WaveFunction<T>]) -> Result<DensityMatrix> {
    let Some(first) = states.first() else {
        return Err(Error::Consistency("no states to average".into()));
    };
    let dim = first.dim();
    let time = first.time;
    for (i, s) in states.iter().enumerate() {
        if s.dim() != dim {
            return Err(Error::Dimension(format!(
                "state {i} has dimension {} instead of {dim}",
                s.dim()
            )));
        }
        if (s.time - time).abs() > 1e-9 * time.abs().max(1.0) {
            return Err(Error::Consistency(format!(
                "state {i} is at time {} while state 0 is at time {time}",
                s.time
            )));
        }
    }
    let count = states.len();
    let amps: Vec<Complex64> = states
        .iter()
        .flat_map(|s| s.amplitudes.iter().map(|z| Complex64::new(z.re.f64(), z.im.f64())))
        .collect();
    let mut packed = vec![Complex64::new(0.0, 0.0); packed_len(dim)];
    let mut rows = Vec::with_capacity(dim);
    let mut rest = packed.as_mut_slice();
    for a in 0..dim {
        let (row, tail) = rest.split_at_mut(a + 1);
        rows.push((a, row));
        rest = tail;
    }
    let inv = 1.0 / count as f64;
    rows.into_par_iter().for_each(|(a, row)| {
        for psi in amps.chunks_exact(dim) {
            let wa = psi[a];
            for (slot, wb) in row.iter_mut().zip(&psi[..=a]) {
                *slot += wa * wb.conj();
            }
        }
        for slot in row.iter_mut() {
            *slot *= inv;
        }
        row[a].im = 0.0;
    });
    Ok(DensityMatrix {
        dim,
        packed,
        sample_count: count,
        time,
    })
}
