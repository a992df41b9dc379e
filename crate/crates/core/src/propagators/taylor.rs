use num_complex::Complex;

use super::{WaveFunction, Workspace};
use crate::hamiltonian::ReducedHamiltonian;
use crate::lattice::TopologyMatrix;
use crate::real::Real;

/// Advance `psi` by `dt` with the order-`order` Taylor expansion of
/// `exp(-i H dt / hbar)`.
///
/// `psi` itself accumulates the partial sum; the current term `Phi_j` and the
/// sparse product target are the only scratch vectors, whatever the order.
pub fn step_taylor<T: Real>(
    h: &ReducedHamiltonian<T>,
    topology: &TopologyMatrix,
    psi: &mut WaveFunction<T>,
    dt: f64,
    hbar: f64,
    order: usize,
    workspace: &mut Workspace<T>,
) {
    psi.time += dt;
    if order == 0 {
        return;
    }
    let dim = psi.dim();
    let [phi, next] = workspace.take::<2>(dim);
    phi.copy_from_slice(&psi.amplitudes);
    for j in 1..=order {
        // Phi_j = -(i / hbar) (dt / j) H Phi_{j-1}
        let coef = Complex::new(T::zero(), T::of(-dt / (hbar * j as f64)));
        for ((alpha, out), acc) in next.iter_mut().enumerate().zip(psi.amplitudes.iter_mut()) {
            let v = coef * h.row_product(topology, alpha, phi);
            *out = v;
            *acc += v;
        }
        std::mem::swap(phi, next);
    }
}
