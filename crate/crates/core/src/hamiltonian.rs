//! Per-realization reduced Hamiltonian in the diagonal-plus-forward-half layout.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{JointSpace, TopologyMatrix};
use crate::noise::{NoiseElement, NoiseProcess};
use crate::real::Real;

/// Largest joint dimension [`ReducedHamiltonian::densify`] accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Deterministic part of the Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    /// On-site energy of every lattice site.
    pub onsite_energy: f64,
    /// Tunneling amplitude on every link.
    pub tunneling: f64,
    /// Optional per-direction tunneling, overriding `tunneling`.
    pub tunneling_per_direction: Option<Vec<f64>>,
    /// Energy added once per pair of particles sharing a site.
    pub interaction: f64,
    pub hbar: f64,
}

impl Default for CouplingModel {
    fn default() -> Self {
        Self {
            onsite_energy: 0.0,
            tunneling: 1.0,
            tunneling_per_direction: None,
            interaction: 0.0,
            hbar: 1.0,
        }
    }
}

impl CouplingModel {
    pub fn validate(&self, q: usize) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::config(format!("hbar = {} must be > 0", self.hbar)));
        }
        for (name, v) in [
            ("onsite_energy", self.onsite_energy),
            ("tunneling", self.tunneling),
            ("interaction", self.interaction),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} = {v} is not finite")));
            }
        }
        if let Some(per) = &self.tunneling_per_direction {
            if per.len() != q {
                return Err(Error::config(format!(
                    "tunneling_per_direction has {} entries for a {q}-dimensional lattice",
                    per.len()
                )));
            }
            if per.iter().any(|c| !c.is_finite()) {
                return Err(Error::config("tunneling_per_direction has non-finite entries"));
            }
        }
        Ok(())
    }

    pub fn tunneling_along(&self, direction: usize) -> f64 {
        self.tunneling_per_direction
            .as_ref()
            .map_or(self.tunneling, |per| per[direction])
    }

    /// Gershgorin-style bound on the spectral radius for any noise draw with
    /// |xi| <= `noise_bound` on the noisy elements.
    pub fn norm_bound(
        &self,
        space: &JointSpace,
        link_noise_bound: f64,
        site_noise_bound: f64,
    ) -> f64 {
        let m = space.particles() as f64;
        let lattice = space.lattice();
        let pairs = (space.particles() * (space.particles() - 1) / 2) as f64;
        let diag = m * (self.onsite_energy.abs() + site_noise_bound) + self.interaction.abs() * pairs;
        let off: f64 = (0..lattice.q())
            .map(|d| 2.0 * lattice.k_half()[d] as f64 * (self.tunneling_along(d).abs() + link_noise_bound))
            .sum();
        diag + m * off
    }
}

fn diagonal_energy(space: &JointSpace, model: &CouplingModel, noise: &NoiseProcess, positions: &[usize]) -> f64 {
    let mut e = 0.0;
    for &x in positions {
        e += model.onsite_energy + noise.site(x);
    }
    e + model.interaction * space.coincidences(positions) as f64
}

#[inline]
fn link_energy(model: &CouplingModel, noise: &NoiseProcess, direction: usize, link: usize) -> f64 {
    model.tunneling_along(direction) + noise.link(link)
}

/// Non-zero Hamiltonian values of one realization: `rows x (m k / 2 + 1)`
/// entries, slot 0 the (real) diagonal and slot `1 + j` the value on forward
/// slot `j` of the shared [`TopologyMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedHamiltonian<T: Real> {
    half: usize,
    values: Vec<Complex<T>>,
    realization_id: usize,
}

impl<T: Real> ReducedHamiltonian<T> {
    pub fn assemble(
        space: &JointSpace,
        topology: &TopologyMatrix,
        model: &CouplingModel,
        noise: &NoiseProcess,
        realization_id: usize,
    ) -> Result<Self> {
        if topology.rows() != space.dim() || topology.half_width() != space.half_width() {
            return Err(Error::Dimension(format!(
                "topology is {}x{} but the joint space needs {}x{}",
                topology.rows(),
                topology.width(),
                space.dim(),
                space.width()
            )));
        }
        let lattice = space.lattice();
        let per_particle = lattice.links_per_site();
        let hw = space.half_width() + 1;
        let mut values = vec![Complex::new(T::zero(), T::zero()); space.dim() * hw];
        let mut positions = vec![0; space.particles()];
        for (alpha, row) in values.chunks_exact_mut(hw).enumerate() {
            space.positions_into(alpha, &mut positions);
            row[0] = Complex::new(T::of(diagonal_energy(space, model, noise, &positions)), T::zero());
            let forward = topology.forward(alpha);
            for (p, &x) in positions.iter().enumerate() {
                for s in 0..per_particle {
                    let j = p * per_particle + s;
                    if forward[j] == TopologyMatrix::INVALID {
                        continue;
                    }
                    let (d, _) = lattice.slot_move(s);
                    let link = x * per_particle + s;
                    row[1 + j] = Complex::new(T::of(link_energy(model, noise, d, link)), T::zero());
                }
            }
        }
        Ok(Self {
            half: space.half_width(),
            values,
            realization_id,
        })
    }

    /// Wrap explicit values for a custom topology. Diagonal entries must be real.
    pub fn from_values(topology: &TopologyMatrix, values: Vec<Complex<T>>) -> Result<Self> {
        let hw = topology.half_width() + 1;
        if values.len() != topology.rows() * hw {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                topology.rows() * hw,
                values.len()
            )));
        }
        if let Some(a) = (0..topology.rows()).find(|&a| values[a * hw].im != T::zero()) {
            return Err(Error::Consistency(format!("diagonal entry {a} is not real")));
        }
        Ok(Self {
            half: topology.half_width(),
            values,
            realization_id: 0,
        })
    }

    /// Rewrite the entries touched by the noise elements that changed in the
    /// last advance. A no-op when nothing changed.
    pub fn update(&mut self, space: &JointSpace, model: &CouplingModel, noise: &NoiseProcess) {
        if !noise.has_changes() {
            return;
        }
        let lattice = space.lattice();
        let per_particle = lattice.links_per_site();
        let hw = self.half + 1;
        let mut positions = vec![0; space.particles()];
        for element in noise.changed() {
            match element {
                NoiseElement::Link(link) => {
                    if !lattice.link_exists(link) {
                        continue;
                    }
                    let site = link / per_particle;
                    let s = link % per_particle;
                    let (d, _) = lattice.slot_move(s);
                    let v = Complex::new(T::of(link_energy(model, noise, d, link)), T::zero());
                    for p in 0..space.particles() {
                        let j = 1 + p * per_particle + s;
                        for alpha in space.states_with_particle_at(p, site) {
                            self.values[alpha * hw + j] = v;
                        }
                    }
                }
                NoiseElement::Site(site) => {
                    for p in 0..space.particles() {
                        for alpha in space.states_with_particle_at(p, site) {
                            space.positions_into(alpha, &mut positions);
                            let e = diagonal_energy(space, model, noise, &positions);
                            self.values[alpha * hw] = Complex::new(T::of(e), T::zero());
                        }
                    }
                }
            }
        }
    }

    pub fn realization_id(&self) -> usize {
        self.realization_id
    }

    pub fn rows(&self) -> usize {
        self.values.len() / (self.half + 1)
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    /// The stored value table, `rows x (half + 1)` row-major.
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn stored_values(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn diagonal(&self, alpha: usize) -> T {
        self.values[alpha * (self.half + 1)].re
    }

    /// Value on any topology slot of a row, reconstructing the backward half
    /// by conjugation. Returns zero for absent neighbors.
    pub fn entry(&self, topology: &TopologyMatrix, alpha: usize, slot: usize) -> Complex<T> {
        let hw = self.half + 1;
        let beta = topology.row(alpha)[slot];
        if beta == TopologyMatrix::INVALID {
            return Complex::new(T::zero(), T::zero());
        }
        if slot <= self.half {
            self.values[alpha * hw + slot]
        } else {
            let j = slot - self.half;
            self.values[beta as usize * hw + j].conj()
        }
    }

    /// Row `alpha` of `H x`.
    #[inline(always)]
    pub fn row_product(&self, topology: &TopologyMatrix, alpha: usize, x: &[Complex<T>]) -> Complex<T> {
        let hw = self.half + 1;
        let row = &self.values[alpha * hw..(alpha + 1) * hw];
        let mut acc = x[alpha].scale(row[0].re);
        let cols = topology.row(alpha);
        let (fwd, bwd) = cols[1..].split_at(self.half);
        for (j, &beta) in fwd.iter().enumerate() {
            if beta != TopologyMatrix::INVALID {
                acc += row[1 + j] * x[beta as usize];
            }
        }
        for (j, &beta) in bwd.iter().enumerate() {
            if beta != TopologyMatrix::INVALID {
                let b = beta as usize;
                acc += self.values[b * hw + 1 + j].conj() * x[b];
            }
        }
        acc
    }

    /// `out = H x` using only the stored half.
    pub fn apply(&self, topology: &TopologyMatrix, x: &[Complex<T>], out: &mut [Complex<T>]) {
        debug_assert_eq!(x.len(), self.rows());
        debug_assert_eq!(out.len(), self.rows());
        for (alpha, o) in out.iter_mut().enumerate() {
            *o = self.row_product(topology, alpha, x);
        }
    }

    /// Full Hermitian matrix represented by the reduced table.
    pub fn densify(&self, topology: &TopologyMatrix, cap: usize) -> Result<DMatrix<Complex64>> {
        let n = self.rows();
        if n > cap {
            return Err(Error::Capacity(format!(
                "dense Hamiltonian of dimension {n} exceeds the cap of {cap}"
            )));
        }
        let hw = self.half + 1;
        let mut dense = DMatrix::<Complex64>::zeros(n, n);
        for alpha in 0..n {
            dense[(alpha, alpha)] += Complex64::new(self.diagonal(alpha).f64(), 0.0);
            for (j, &beta) in topology.forward(alpha).iter().enumerate() {
                if beta == TopologyMatrix::INVALID {
                    continue;
                }
                let v = self.values[alpha * hw + 1 + j];
                let v = Complex64::new(v.re.f64(), v.im.f64());
                dense[(alpha, beta as usize)] += v;
                dense[(beta as usize, alpha)] += v.conj();
            }
        }
        Ok(dense)
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn gershgorin_bound(&self, topology: &TopologyMatrix) -> f64 {
        (0..self.rows())
            .map(|alpha| {
                (0..topology.width())
                    .map(|slot| self.entry(topology, alpha, slot).norm().f64())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}
