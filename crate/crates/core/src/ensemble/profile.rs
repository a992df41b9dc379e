//! Wall-clock attribution of a run to its stages.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initialization,
    WavefunctionEvolution,
    HamiltonianUpdate,
    DensityAndPostprocessing,
    /// Time spent in output sinks, kept apart from the density stage.
    Io,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCalls {
    pub initialization: u64,
    pub wavefunction_evolution: u64,
    pub hamiltonian_update: u64,
    pub density_and_postprocessing: u64,
    pub io: u64,
}

/// Seconds per stage. Stages are contiguous laps of one monotonic clock, so
/// their sum equals `total` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageProfile {
    pub initialization: f64,
    pub wavefunction_evolution: f64,
    pub hamiltonian_update: f64,
    pub density_and_postprocessing: f64,
    pub io: f64,
    pub total: f64,
    pub calls: StageCalls,
}

impl StageProfile {
    pub fn stage_sum(&self) -> f64 {
        self.initialization
            + self.wavefunction_evolution
            + self.hamiltonian_update
            + self.density_and_postprocessing
            + self.io
    }

    /// Fraction of the total spent forming and post-processing the density matrix.
    pub fn density_share(&self) -> f64 {
        if self.total > 0.0 {
            self.density_and_postprocessing / self.total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageClock {
    start: Instant,
    mark: Instant,
    profile: StageProfile,
}

impl StageClock {
    pub fn start() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            mark: now,
            profile: StageProfile::default(),
        }
    }

    /// Charge the time since the previous lap to `stage`.
    pub fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        let secs = now.duration_since(self.mark).as_secs_f64();
        self.mark = now;
        let p = &mut self.profile;
        let (slot, calls) = match stage {
            Stage::Initialization => (&mut p.initialization, &mut p.calls.initialization),
            Stage::WavefunctionEvolution => (&mut p.wavefunction_evolution, &mut p.calls.wavefunction_evolution),
            Stage::HamiltonianUpdate => (&mut p.hamiltonian_update, &mut p.calls.hamiltonian_update),
            Stage::DensityAndPostprocessing => {
                (&mut p.density_and_postprocessing, &mut p.calls.density_and_postprocessing)
            }
            Stage::Io => (&mut p.io, &mut p.calls.io),
        };
        *slot += secs;
        *calls += 1;
    }

    pub fn finish(mut self) -> StageProfile {
        self.profile.total = self.mark.duration_since(self.start).as_secs_f64();
        self.profile
    }
}
