//! The realization loop and ensemble averaging.
//!
//! Each step runs three stages over all realizations: evolve the wave
//! functions, advance the noise and patch the Hamiltonians, and on snapshot
//! steps average the projectors into a [`DensityMatrix`] and evaluate the
//! selected observables.

mod density;
mod initial;
mod memory;
mod profile;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingModel, ReducedHamiltonian, DEFAULT_DENSE_CAP};
use crate::lattice::{JointSpace, TopologyMatrix};
use crate::noise::{realization_seed, NoiseProcess, NoiseSpec};
use crate::observables::{centroid, populations, ObservableSet, Observables};
use crate::propagators::{Evolver, NormEvent, StepperConfig, WaveFunction};
use crate::real::{Precision, Real};

pub use density::{accumulate_density, packed_len, DensityMatrix, DENSE_CHECK_CAP};
pub use initial::{central_positions, InitialStateSpec};
pub use memory::{estimate_memory, max_rows_within, DensityStorage, MemoryEstimate, MemoryLayout};
pub use profile::{Stage, StageCalls, StageClock, StageProfile};

/// Norm events kept verbatim in the report; later ones are only counted.
pub const RECORDED_EVENT_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub space: JointSpace,
    pub model: CouplingModel,
    pub noise_spec: NoiseSpec,
    pub stepper: StepperConfig,
    pub realizations: usize,
    pub steps: usize,
    /// Average and post-process on every `post_rate`-th step.
    pub post_rate: usize,
    pub master_seed: u64,
    pub initial_state: InitialStateSpec,
    /// Thread count; 0 picks one per available core.
    pub workers: usize,
    pub precision: Precision,
    /// When false, no density matrix is formed at all.
    pub postprocess: bool,
    /// Also emit a snapshot of the initial ensemble at t = 0.
    pub initial_snapshot: bool,
    pub observables: ObservableSet,
    /// Largest joint dimension the spectral backend may densify.
    pub dense_cap: usize,
    /// Upper bound on the pre-flight memory estimate, in bytes.
    pub memory_budget: Option<u64>,
}

impl RunConfig {
    pub fn new(space: JointSpace) -> Self {
        Self {
            space,
            model: CouplingModel::default(),
            noise_spec: NoiseSpec::default(),
            stepper: StepperConfig::default(),
            realizations: 1000,
            steps: 1500,
            post_rate: 100,
            master_seed: 0,
            initial_state: InitialStateSpec::default(),
            workers: 0,
            precision: Precision::default(),
            postprocess: true,
            initial_snapshot: true,
            observables: ObservableSet::default(),
            dense_cap: DEFAULT_DENSE_CAP,
            memory_budget: None,
        }
    }

    pub fn t_max(&self) -> f64 {
        self.steps as f64 * self.stepper.dt
    }

    /// Step size with ||H|| dt / hbar = 0.1 under the worst-case noise values.
    pub fn suggested_dt(&self) -> f64 {
        let (links, sites) = (self.noise_spec.target.links(), self.noise_spec.target.sites());
        let bound = self.noise_spec.max_abs_level();
        let norm = self.model.norm_bound(
            &self.space,
            if links { bound } else { 0.0 },
            if sites { bound } else { 0.0 },
        );
        if norm > 0.0 {
            0.1 * self.model.hbar / norm
        } else {
            self.stepper.dt
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::config("realization count must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        if self.post_rate == 0 || self.post_rate > self.steps {
            return Err(Error::config(format!(
                "post_rate must satisfy 1 <= post_rate <= steps ({}), got {}",
                self.steps, self.post_rate
            )));
        }
        if self.postprocess && self.observables.is_empty() {
            return Err(Error::config("observable set must be non-empty when post-processing is enabled"));
        }
        self.model.validate(self.space.lattice().q())?;
        self.noise_spec.validate()?;
        self.stepper.validate()
    }
}

/// One ensemble snapshot handed to a sink.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub step: usize,
    pub time: f64,
    pub density: &'a DensityMatrix,
    pub observables: &'a Observables,
}

/// Receiver of run output. Time spent inside a sink is attributed to the io stage.
pub trait SnapshotSink {
    fn snapshot(&mut self, snapshot: &Snapshot<'_>) -> Result<()>;

    fn norm_events(&mut self, _events: &[NormEvent]) -> Result<()> {
        Ok(())
    }

    /// Files written so far.
    fn outputs(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Discards everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl SnapshotSink for NullSink {
    fn snapshot(&mut self, _snapshot: &Snapshot<'_>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OwnedSnapshot {
    pub step: usize,
    pub time: f64,
    pub density: DensityMatrix,
    pub observables: Observables,
}

/// Keeps every snapshot in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    pub snapshots: Vec<OwnedSnapshot>,
    pub norm_events: Vec<NormEvent>,
}

impl SnapshotSink for MemorySink {
    fn snapshot(&mut self, s: &Snapshot<'_>) -> Result<()> {
        self.snapshots.push(OwnedSnapshot {
            step: s.step,
            time: s.time,
            density: s.density.clone(),
            observables: s.observables.clone(),
        });
        Ok(())
    }

    fn norm_events(&mut self, events: &[NormEvent]) -> Result<()> {
        self.norm_events.extend_from_slice(events);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub profile: StageProfile,
    pub dim: usize,
    pub realizations: usize,
    pub steps: usize,
    pub snapshots: usize,
    /// Steps where a state left the `tol_norm` band.
    pub norm_event_count: u64,
    pub norm_corrections: u64,
    /// Largest |<psi|psi> - 1| seen right after a step.
    pub max_norm_deviation: f64,
    /// Largest deviation of a state carried into the next step.
    pub max_accepted_deviation: f64,
    pub noise_switches: u64,
    pub memory: MemoryEstimate,
    pub norm_events: Vec<NormEvent>,
    pub outputs: Vec<String>,
}

struct Realization<T: Real> {
    noise: NoiseProcess,
    hamiltonian: ReducedHamiltonian<T>,
    evolver: Evolver<T>,
}

/// Execute the full loop and report timings and norm statistics.
pub fn run(config: &RunConfig, sink: &mut dyn SnapshotSink) -> Result<RunReport> {
    match config.precision {
        Precision::Single => run_typed::<f32>(config, sink),
        Precision::Double => run_typed::<f64>(config, sink),
    }
}

fn run_typed<T: Real>(config: &RunConfig, sink: &mut dyn SnapshotSink) -> Result<RunReport> {
    let mut clock = StageClock::start();
    config.validate()?;
    let memory = estimate_memory(config)?;
    if let Some(budget) = config.memory_budget {
        if memory.total() > budget {
            return Err(Error::Capacity(format!(
                "estimated memory {} bytes exceeds the budget of {budget} bytes",
                memory.total()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;

    let space = &config.space;
    let topology = TopologyMatrix::build(space)?;
    let psi0: WaveFunction<T> = config.initial_state.build(space)?;
    let reference = {
        let rho0 = DensityMatrix::pure(&psi0);
        centroid(&populations(&rho0, space)?, space.particles(), space.lattice())
    };
    let (mut realizations, mut states) = pool.install(|| -> Result<_> {
        let realizations = (0..config.realizations)
            .into_par_iter()
            .map(|i| {
                let noise = NoiseProcess::new(
                    &config.noise_spec,
                    space.lattice(),
                    realization_seed(config.master_seed, i),
                )?;
                let hamiltonian = ReducedHamiltonian::assemble(space, &topology, &config.model, &noise, i)?;
                let evolver = Evolver::new(config.stepper.clone(), config.model.hbar, config.dense_cap);
                Ok(Realization {
                    noise,
                    hamiltonian,
                    evolver,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((realizations, vec![psi0.clone(); config.realizations]))
    })?;
    clock.lap(Stage::Initialization);

    let mut report = RunReport {
        profile: StageProfile::default(),
        dim: space.dim(),
        realizations: config.realizations,
        steps: config.steps,
        snapshots: 0,
        norm_event_count: 0,
        norm_corrections: 0,
        max_norm_deviation: 0.0,
        max_accepted_deviation: 0.0,
        noise_switches: 0,
        memory,
        norm_events: Vec::new(),
        outputs: Vec::new(),
    };
    for psi in &states {
        let d = (psi.norm_sqr() - 1.0).abs();
        report.max_norm_deviation = report.max_norm_deviation.max(d);
        report.max_accepted_deviation = report.max_accepted_deviation.max(d);
    }

    let post = |step: usize, states: &[WaveFunction<T>], clock: &mut StageClock, sink: &mut dyn SnapshotSink| -> Result<()> {
        let rho = pool.install(|| accumulate_density(states))?;
        let obs = Observables::compute(&rho, space, &config.observables, &reference)?;
        clock.lap(Stage::DensityAndPostprocessing);
        sink.snapshot(&Snapshot {
            step,
            time: rho.time(),
            density: &rho,
            observables: &obs,
        })?;
        clock.lap(Stage::Io);
        Ok(())
    };

    if config.postprocess && config.initial_snapshot {
        post(0, &states, &mut clock, sink)?;
        report.snapshots += 1;
    }

    let dt = config.stepper.dt;
    let mut events = Vec::new();
    for step in 1..=config.steps {
        let checks: Vec<_> = pool.install(|| {
            realizations
                .par_iter_mut()
                .zip(states.par_iter_mut())
                .map(|(r, psi)| r.evolver.step(&r.hamiltonian, &topology, psi))
                .collect()
        });
        clock.lap(Stage::WavefunctionEvolution);

        events.clear();
        for (i, check) in checks.into_iter().enumerate() {
            let check = check.map_err(|e| e.at(i, step))?;
            report.max_norm_deviation = report.max_norm_deviation.max(check.deviation);
            report.max_accepted_deviation = report.max_accepted_deviation.max(check.accepted_deviation);
            if check.event {
                report.norm_event_count += 1;
                report.norm_corrections += u64::from(check.corrected);
                events.push(NormEvent {
                    realization: i,
                    step,
                    deviation: check.deviation,
                    corrected: check.corrected,
                });
            }
        }

        let t = (step - 1) as f64 * dt;
        pool.install(|| {
            realizations.par_iter_mut().for_each(|r| {
                if r.noise.advance(t, dt) {
                    r.hamiltonian.update(space, &config.model, &r.noise);
                    r.evolver.invalidate();
                }
            })
        });
        clock.lap(Stage::HamiltonianUpdate);

        if !events.is_empty() {
            let room = RECORDED_EVENT_LIMIT.saturating_sub(report.norm_events.len());
            report.norm_events.extend(events.iter().take(room).copied());
            sink.norm_events(&events)?;
            clock.lap(Stage::Io);
        }

        if config.postprocess && step % config.post_rate == 0 {
            post(step, &states, &mut clock, sink)?;
            report.snapshots += 1;
        }
    }

    report.noise_switches = realizations.iter().map(|r| r.noise.switch_count()).sum();
    report.outputs = sink.outputs();
    report.profile = clock.finish();
    Ok(report)
}
