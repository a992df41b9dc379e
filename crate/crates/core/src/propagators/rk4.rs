use num_complex::Complex;

use super::{WaveFunction, Workspace};
use crate::hamiltonian::ReducedHamiltonian;
use crate::lattice::TopologyMatrix;
use crate::real::Real;

/// Classical fourth-order Runge-Kutta step for `d psi/dt = -(i/hbar) H psi`.
///
/// Each stage evaluates one sparse product and immediately folds it into the
/// running combination (weights 1/6, 1/3, 1/3, 1/6) and into the next stage
/// input.
pub fn step_rk4<T: Real>(
    h: &ReducedHamiltonian<T>,
    topology: &TopologyMatrix,
    psi: &mut WaveFunction<T>,
    dt: f64,
    hbar: f64,
    workspace: &mut Workspace<T>,
) {
    let dim = psi.dim();
    let [acc, stage_a, stage_b] = workspace.take::<3>(dim);
    let minus_i = Complex::new(T::zero(), T::of(-1.0 / hbar));
    let w16 = T::of(dt / 6.0);
    let w13 = T::of(dt / 3.0);
    let half = T::of(dt / 2.0);
    let full = T::of(dt);
    let x0 = &psi.amplitudes;

    // K1 = f(psi)
    for alpha in 0..dim {
        let k = minus_i * h.row_product(topology, alpha, x0);
        acc[alpha] = x0[alpha] + k.scale(w16);
        stage_a[alpha] = x0[alpha] + k.scale(half);
    }
    // K2 = f(psi + dt/2 K1)
    for alpha in 0..dim {
        let k = minus_i * h.row_product(topology, alpha, stage_a);
        acc[alpha] += k.scale(w13);
        stage_b[alpha] = x0[alpha] + k.scale(half);
    }
    // K3 = f(psi + dt/2 K2)
    for alpha in 0..dim {
        let k = minus_i * h.row_product(topology, alpha, stage_b);
        acc[alpha] += k.scale(w13);
        stage_a[alpha] = x0[alpha] + k.scale(full);
    }
    // K4 = f(psi + dt K3)
    for (alpha, a) in acc.iter_mut().enumerate() {
        *a += (minus_i * h.row_product(topology, alpha, stage_a)).scale(w16);
    }
    std::mem::swap(&mut psi.amplitudes, acc);
    psi.time += dt;
}
