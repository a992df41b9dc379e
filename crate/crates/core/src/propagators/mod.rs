//! Single-step propagation of one realization's wave function.
//!
//! Three interchangeable backends advance `i hbar d|psi>/dt = H |psi>` by one
//! step `dt` with the Hamiltonian held fixed over the step:
//!
//! - [`Backend::Eigen`]: exact spectral propagator from a dense diagonalization,
//! - [`Backend::Rk4`]: classical fourth-order Runge-Kutta on the sparse layout,
//! - [`Backend::Taylor`]: truncated Taylor series of the evolution operator,
//!   accumulated term by term with scratch memory independent of the order.
//!
//! Neither RK4 nor Taylor is unitary, so every step is followed by
//! [`check_norm`].

mod eigen;
mod rk4;
mod taylor;

pub use eigen::{diagonalize, step_eigen, EigenDecomposition};
pub use rk4::step_rk4;
pub use taylor::step_taylor;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ReducedHamiltonian;
use crate::lattice::TopologyMatrix;
use crate::real::Real;

/// Highest supported Taylor order.
pub const MAX_TAYLOR_ORDER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Eigen,
    Rk4,
    #[default]
    Taylor,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Eigen => "eigen",
            Backend::Rk4 => "rk4",
            Backend::Taylor => "taylor",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "eigen" => Ok(Backend::Eigen),
            "rk4" => Ok(Backend::Rk4),
            "taylor" => Ok(Backend::Taylor),
            other => Err(format!("unknown backend '{other}' (expected eigen, rk4 or taylor)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub backend: Backend,
    pub dt: f64,
    pub taylor_order: usize,
    pub tol_norm: f64,
    pub tol_fail: f64,
    pub renormalize: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Taylor,
            dt: 0.01,
            taylor_order: 4,
            tol_norm: 1e-6,
            tol_fail: 1e-3,
            renormalize: true,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt = {} must be > 0", self.dt)));
        }
        if self.taylor_order == 0 || self.taylor_order > MAX_TAYLOR_ORDER {
            return Err(Error::config(format!(
                "taylor_order = {} must be in 1..={MAX_TAYLOR_ORDER}",
                self.taylor_order
            )));
        }
        if !(self.tol_norm >= 0.0 && self.tol_norm < self.tol_fail) {
            return Err(Error::config(format!(
                "tolerances must satisfy 0 <= tol_norm < tol_fail (got {} and {})",
                self.tol_norm, self.tol_fail
            )));
        }
        Ok(())
    }
}

/// Amplitudes of one realization and the time they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction<T: Real> {
    pub amplitudes: Vec<Complex<T>>,
    pub time: f64,
}

impl<T: Real> WaveFunction<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Self {
        Self {
            amplitudes,
            time: 0.0,
        }
    }

    pub fn basis(dim: usize, alpha: usize) -> Self {
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); dim];
        amplitudes[alpha] = Complex::new(T::one(), T::zero());
        Self::new(amplitudes)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Squared 2-norm accumulated in double precision.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| {
                let (re, im) = (z.re.f64(), z.im.f64());
                re * re + im * im
            })
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        let f = T::of(factor);
        for z in &mut self.amplitudes {
            *z = z.scale(f);
        }
    }
}

/// A norm deviation above `tol_norm` observed after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEvent {
    pub realization: usize,
    pub step: usize,
    /// |<psi|psi> - 1| before correction.
    pub deviation: f64,
    pub corrected: bool,
}

/// Result of a norm check on an accepted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCheck {
    /// |<psi|psi> - 1| before any correction.
    pub deviation: f64,
    /// Deviation of the state handed back to the caller.
    pub accepted_deviation: f64,
    /// Whether the state exceeded `tol_norm` (and was rescaled if enabled).
    pub event: bool,
    pub corrected: bool,
}

/// Check `<psi|psi>` against the tolerances, rescaling when enabled.
pub fn check_norm<T: Real>(
    psi: &mut WaveFunction<T>,
    tol_norm: f64,
    tol_fail: f64,
    renormalize: bool,
) -> Result<NormCheck> {
    let norm_sqr = psi.norm_sqr();
    let deviation = (norm_sqr - 1.0).abs();
    if !deviation.is_finite() || deviation > tol_fail {
        return Err(Error::NormFailure {
            realization: 0,
            step: 0,
            deviation,
            tolerance: tol_fail,
        });
    }
    if deviation <= tol_norm {
        return Ok(NormCheck {
            deviation,
            accepted_deviation: deviation,
            event: false,
            corrected: false,
        });
    }
    if renormalize {
        psi.scale(1.0 / norm_sqr.sqrt());
        Ok(NormCheck {
            deviation,
            accepted_deviation: (psi.norm_sqr() - 1.0).abs(),
            event: true,
            corrected: true,
        })
    } else {
        Ok(NormCheck {
            deviation,
            accepted_deviation: deviation,
            event: true,
            corrected: false,
        })
    }
}

/// Scratch buffers reused across steps; their count depends on the backend,
/// never on the Taylor order.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T: Real> {
    buffers: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Self { buffers: Vec::new() }
    }

    fn take<const K: usize>(&mut self, dim: usize) -> [&mut Vec<Complex<T>>; K] {
        if self.buffers.len() < K {
            self.buffers.resize_with(K, Vec::new);
        }
        for b in &mut self.buffers[..K] {
            b.resize(dim, Complex::new(T::zero(), T::zero()));
        }
        let mut it = self.buffers.iter_mut();
        std::array::from_fn(|_| it.next().unwrap())
    }

    /// Complex values currently allocated.
    pub fn allocated(&self) -> usize {
        self.buffers.iter().map(|b| b.len()).sum()
    }
}

/// Per-realization propagation state: scratch memory and, for the spectral
/// backend, the cached decomposition of the current Hamiltonian.
#[derive(Debug, Clone)]
pub struct Evolver<T: Real> {
    config: StepperConfig,
    hbar: f64,
    dense_cap: usize,
    workspace: Workspace<T>,
    decomposition: Option<EigenDecomposition>,
}

impl<T: Real> Evolver<T> {
    pub fn new(config: StepperConfig, hbar: f64, dense_cap: usize) -> Self {
        Self {
            config,
            hbar,
            dense_cap,
            workspace: Workspace::new(),
            decomposition: None,
        }
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    /// Drop the cached decomposition after the Hamiltonian changed.
    pub fn invalidate(&mut self) {
        self.decomposition = None;
    }

    /// Advance `psi` by one step and check its norm.
    pub fn step(
        &mut self,
        h: &ReducedHamiltonian<T>,
        topology: &TopologyMatrix,
        psi: &mut WaveFunction<T>,
    ) -> Result<NormCheck> {
        let cfg = &self.config;
        match cfg.backend {
            Backend::Eigen => {
                if self.decomposition.is_none() {
                    let dense = h.densify(topology, self.dense_cap)?;
                    self.decomposition = Some(diagonalize(&dense)?);
                }
                let decomp = self.decomposition.as_ref().expect("decomposition present");
                step_eigen(decomp, psi, cfg.dt, self.hbar);
            }
            Backend::Rk4 => step_rk4(h, topology, psi, cfg.dt, self.hbar, &mut self.workspace),
            Backend::Taylor => step_taylor(
                h,
                topology,
                psi,
                cfg.dt,
                self.hbar,
                cfg.taylor_order,
                &mut self.workspace,
            ),
        }
        check_norm(psi, cfg.tol_norm, cfg.tol_fail, cfg.renormalize)
    }
}
