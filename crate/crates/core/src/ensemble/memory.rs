//! Pre-flight memory estimate of a run.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagators::Backend;

use super::density::packed_len;
use super::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityStorage {
    /// Lower triangle only, N^m (N^m + 1) / 2 entries.
    Packed,
    /// Full N^m x N^m matrix.
    Full,
}

/// Storage parameters the estimate depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryLayout {
    pub dim: usize,
    /// Topology columns per row, m k + 1.
    pub width: usize,
    pub realizations: usize,
    pub state_complex_bytes: usize,
    pub density_complex_bytes: usize,
    pub density_storage: DensityStorage,
    /// Scratch vectors held per realization by the propagator.
    pub scratch_vectors: usize,
    /// Whether each realization caches a dense eigendecomposition.
    pub dense_eigenvectors: bool,
}

/// Byte counts per structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct MemoryEstimate {
    pub density: u64,
    pub states: u64,
    pub hamiltonians: u64,
    pub topology: u64,
    pub workspace: u64,
    pub eigen: u64,
}

impl MemoryEstimate {
    pub fn of(layout: &MemoryLayout) -> Self {
        let d = layout.dim as u64;
        let r = layout.realizations as u64;
        let half_plus_one = (layout.width as u64 - 1) / 2 + 1;
        let density_entries = match layout.density_storage {
            DensityStorage::Packed => packed_len(layout.dim) as u64,
            DensityStorage::Full => d.saturating_mul(d),
        };
        let sb = layout.state_complex_bytes as u64;
        Self {
            density: density_entries.saturating_mul(layout.density_complex_bytes as u64),
            states: r.saturating_mul(d).saturating_mul(sb),
            hamiltonians: r.saturating_mul(d).saturating_mul(half_plus_one).saturating_mul(sb),
            topology: d.saturating_mul(layout.width as u64).saturating_mul(4),
            workspace: r
                .saturating_mul(d)
                .saturating_mul(layout.scratch_vectors as u64)
                .saturating_mul(sb),
            eigen: if layout.dense_eigenvectors {
                r.saturating_mul(d.saturating_mul(d).saturating_mul(16).saturating_add(d * 8))
            } else {
                0
            },
        }
    }

    pub fn total(&self) -> u64 {
        [
            self.density,
            self.states,
            self.hamiltonians,
            self.topology,
            self.workspace,
            self.eigen,
        ]
        .iter()
        .fold(0u64, |acc, &b| acc.saturating_add(b))
    }
}

/// Largest joint dimension whose estimate fits in `budget` bytes, with
/// `dim` substituted into `layout`.
pub fn max_rows_within(budget: u64, layout: MemoryLayout) -> usize {
    let fits = |dim: usize| MemoryEstimate::of(&MemoryLayout { dim, ..layout }).total() <= budget;
    let (mut lo, mut hi) = (0usize, 1usize);
    while fits(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub(crate) fn scratch_vectors(backend: Backend) -> usize {
    match backend {
        Backend::Eigen => 0,
        Backend::Rk4 => 3,
        Backend::Taylor => 2,
    }
}

/// Byte breakdown for a run configuration. The density matrix is always
/// accumulated in double precision.
pub fn estimate_memory(config: &RunConfig) -> Result<MemoryEstimate> {
    if config.realizations == 0 {
        return Err(Error::config("realization count must be >= 1"));
    }
    let layout = MemoryLayout {
        dim: config.space.dim(),
        width: config.space.width(),
        realizations: config.realizations,
        state_complex_bytes: config.precision.complex_bytes(),
        density_complex_bytes: 16,
        density_storage: DensityStorage::Packed,
        scratch_vectors: scratch_vectors(config.stepper.backend),
        dense_eigenvectors: config.stepper.backend == Backend::Eigen,
    };
    Ok(MemoryEstimate::of(&layout))
}
