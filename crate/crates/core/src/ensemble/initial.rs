//! Initial joint states.

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::JointSpace;
use crate::propagators::WaveFunction;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStateSpec {
    /// Particles localized on adjacent sites around the lattice center.
    #[default]
    Central,
    /// Joint basis state with particle `p` on `positions[p]`.
    SingleSite { positions: Vec<usize> },
    /// Tensor product of one single-particle amplitude vector per particle.
    Product { factors: Vec<Vec<Complex64>> },
    /// (|a, b> + |b, a>) / sqrt(2) for two particles (|a, a> when a == b).
    SymmetrizedPair { sites: [usize; 2] },
    /// (|a, b> - |b, a>) / sqrt(2) for two particles, a != b.
    AntisymmetrizedPair { sites: [usize; 2] },
    /// Explicit joint amplitudes, normalized on construction.
    CustomVector { amplitudes: Vec<Complex64> },
}

/// Adjacent sites around the lattice center, one per particle, along the
/// first direction.
pub fn central_positions(space: &JointSpace) -> Vec<usize> {
    let lattice = space.lattice();
    let center: Vec<usize> = lattice.dims().iter().map(|&n| n / 2).collect();
    (0..space.particles())
        .map(|p| {
            let mut c = center.clone();
            c[0] = (c[0] + p) % lattice.dims()[0];
            lattice.site(&c).expect("center is inside the lattice")
        })
        .collect()
}

impl InitialStateSpec {
    pub fn amplitudes(&self, space: &JointSpace) -> Result<Vec<Complex64>> {
        let dim = space.dim();
        let n = space.lattice().n_sites();
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let pair = |sites: &[usize; 2]| -> Result<(usize, usize)> {
            if space.particles() != 2 {
                return Err(Error::config("pair initial states need exactly two particles"));
            }
            Ok((space.joint_index(sites)?, space.joint_index(&[sites[1], sites[0]])?))
        };
        match self {
            InitialStateSpec::Central => {
                amps[space.joint_index(&central_positions(space))?] = Complex64::new(1.0, 0.0);
            }
            InitialStateSpec::SingleSite { positions } => {
                amps[space.joint_index(positions)?] = Complex64::new(1.0, 0.0);
            }
            InitialStateSpec::Product { factors } => {
                if factors.len() != space.particles() {
                    return Err(Error::config(format!(
                        "product state needs {} factors, got {}",
                        space.particles(),
                        factors.len()
                    )));
                }
                if let Some(f) = factors.iter().find(|f| f.len() != n) {
                    return Err(Error::config(format!(
                        "product factor has {} amplitudes for {n} sites",
                        f.len()
                    )));
                }
                let mut positions = vec![0; space.particles()];
                for (alpha, a) in amps.iter_mut().enumerate() {
                    space.positions_into(alpha, &mut positions);
                    *a = positions
                        .iter()
                        .zip(factors)
                        .fold(Complex64::new(1.0, 0.0), |acc, (&x, f)| acc * f[x]);
                }
            }
            InitialStateSpec::SymmetrizedPair { sites } => {
                let (ab, ba) = pair(sites)?;
                amps[ab] += Complex64::new(1.0, 0.0);
                amps[ba] += Complex64::new(1.0, 0.0);
            }
            InitialStateSpec::AntisymmetrizedPair { sites } => {
                if sites[0] == sites[1] {
                    return Err(Error::config("antisymmetrized pair needs two distinct sites"));
                }
                let (ab, ba) = pair(sites)?;
                amps[ab] = Complex64::new(1.0, 0.0);
                amps[ba] = Complex64::new(-1.0, 0.0);
            }
            InitialStateSpec::CustomVector { amplitudes } => {
                if amplitudes.len() != dim {
                    return Err(Error::config(format!(
                        "custom initial vector has {} amplitudes, the joint space has {dim}",
                        amplitudes.len()
                    )));
                }
                amps.copy_from_slice(amplitudes);
            }
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::config("initial state has zero or non-finite norm"));
        }
        for z in &mut amps {
            *z /= norm;
        }
        Ok(amps)
    }

    pub fn build<T: Real>(&self, space: &JointSpace) -> Result<WaveFunction<T>> {
        let amps = self.amplitudes(space)?;
        Ok(WaveFunction::new(
            amps.into_iter().map(|z| Complex::new(T::of(z.re), T::of(z.im))).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, LatticeTopology};

    fn space(n: usize, m: usize) -> JointSpace {
        JointSpace::new(LatticeTopology::chain(n, Boundary::Periodic).unwrap(), m).unwrap()
    }

    #[test]
    fn central_pair_is_adjacent() {
        let s = space(31, 2);
        assert_eq!(central_positions(&s), vec![15, 16]);
        let psi = InitialStateSpec::Central.build::<f64>(&s).unwrap();
        assert_eq!(psi.amplitudes[15 * 31 + 16], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn every_kind_is_normalized() {
        let s = space(5, 2);
        let kinds = [
            InitialStateSpec::SingleSite { positions: vec![1, 2] },
            InitialStateSpec::Product {
                factors: vec![vec![Complex64::new(1.0, 0.0); 5], vec![Complex64::new(0.0, 2.0); 5]],
            },
            InitialStateSpec::SymmetrizedPair { sites: [1, 3] },
            InitialStateSpec::SymmetrizedPair { sites: [2, 2] },
            InitialStateSpec::AntisymmetrizedPair { sites: [0, 4] },
            InitialStateSpec::CustomVector {
                amplitudes: (0..25).map(|i| Complex64::new(i as f64, 1.0)).collect(),
            },
        ];
        for k in kinds {
            let psi = k.build::<f64>(&s).unwrap();
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn exchange_symmetry() {
        let s = space(5, 2);
        let sym = InitialStateSpec::SymmetrizedPair { sites: [1, 3] }.build::<f64>(&s).unwrap();
        let anti = InitialStateSpec::AntisymmetrizedPair { sites: [1, 3] }.build::<f64>(&s).unwrap();
        assert_eq!(sym.amplitudes[8], sym.amplitudes[16]);
        assert_eq!(anti.amplitudes[8], -anti.amplitudes[16]);
    }

    #[test]
    fn invalid_initial_states() {
        let s = space(5, 2);
        assert!(InitialStateSpec::AntisymmetrizedPair { sites: [2, 2] }.build::<f64>(&s).is_err());
        assert!(InitialStateSpec::SingleSite { positions: vec![7, 0] }.build::<f64>(&s).is_err());
        assert!(InitialStateSpec::CustomVector { amplitudes: vec![Complex64::new(0.0, 0.0); 25] }
            .build::<f64>(&s)
            .is_err());
        assert!(InitialStateSpec::SymmetrizedPair { sites: [0, 1] }.build::<f64>(&space(5, 1)).is_err());
    }
}
