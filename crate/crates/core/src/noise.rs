//! Random telegraph noise on the single-particle lattice.
//!
//! Every noisy lattice element (a link for tunneling noise, a site for
//! on-site noise) holds one value drawn from a finite level set and switches
//! at the arrival times of a Poisson process with rate `switch_rate`. At each
//! switch the value is redrawn uniformly from the levels. Values are held
//! piecewise constant over a time step: switches that land inside
//! `(t, t + dt]` take effect at `t + dt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseTarget {
    #[default]
    Tunneling,
    Onsite,
    Both,
}

impl NoiseTarget {
    pub fn links(self) -> bool {
        matches!(self, NoiseTarget::Tunneling | NoiseTarget::Both)
    }

    pub fn sites(self) -> bool {
        matches!(self, NoiseTarget::Onsite | NoiseTarget::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseTarget::Tunneling => "tunneling",
            NoiseTarget::Onsite => "onsite",
            NoiseTarget::Both => "both",
        }
    }
}

impl std::str::FromStr for NoiseTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tunneling" => Ok(NoiseTarget::Tunneling),
            "onsite" => Ok(NoiseTarget::Onsite),
            "both" => Ok(NoiseTarget::Both),
            other => Err(format!(
                "unknown noise target '{other}' (expected tunneling, onsite or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target: NoiseTarget,
    /// Values the process may take, in energy units.
    pub levels: Vec<f64>,
    /// Switching rate gamma (1 / time). Zero freezes the initial draw.
    pub switch_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::two_level(NoiseTarget::Tunneling, 0.3, 0.2)
    }
}

impl NoiseSpec {
    /// Symmetric two-level telegraph noise {-amplitude, +amplitude}.
    pub fn two_level(target: NoiseTarget, amplitude: f64, switch_rate: f64) -> Self {
        Self {
            target,
            levels: vec![-amplitude, amplitude],
            switch_rate,
        }
    }

    /// No noise at all.
    pub fn silent() -> Self {
        Self {
            target: NoiseTarget::Tunneling,
            levels: vec![0.0],
            switch_rate: 0.0,
        }
    }

    pub fn is_static(&self) -> bool {
        self.switch_rate == 0.0
    }

    pub fn max_abs_level(&self) -> f64 {
        self.levels.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::config("noise levels must not be empty"));
        }
        if let Some(l) = self.levels.iter().find(|l| !l.is_finite()) {
            return Err(Error::config(format!("noise level {l} is not finite")));
        }
        if !self.switch_rate.is_finite() || self.switch_rate < 0.0 {
            return Err(Error::config(format!(
                "switch rate {} must be finite and >= 0",
                self.switch_rate
            )));
        }
        Ok(())
    }
}

/// A noisy lattice element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseElement {
    Link(usize),
    Site(usize),
}

/// Per-realization seed derived from the run's master seed.
pub fn realization_seed(master_seed: u64, realization: usize) -> u64 {
    master_seed ^ realization as u64
}

/// The noise state of one realization.
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    levels: Vec<f64>,
    waiting: Option<Exp<f64>>,
    link_count: usize,
    site_count: usize,
    values: Vec<f64>,
    next_switch: Vec<f64>,
    changed: Vec<usize>,
    switches: u64,
    time: f64,
    rng: ChaCha8Rng,
}

impl NoiseProcess {
    pub fn new(spec: &NoiseSpec, lattice: &LatticeTopology, seed: u64) -> Result<Self> {
        spec.validate()?;
        let link_count = if spec.target.links() {
            lattice.link_slots()
        } else {
            0
        };
        let site_count = if spec.target.sites() {
            lattice.n_sites()
        } else {
            0
        };
        let waiting = if spec.is_static() {
            None
        } else {
            Some(Exp::new(spec.switch_rate).map_err(|e| Error::config(e.to_string()))?)
        };
        let mut process = Self {
            levels: spec.levels.clone(),
            waiting,
            link_count,
            site_count,
            values: Vec::with_capacity(link_count + site_count),
            next_switch: Vec::with_capacity(link_count + site_count),
            changed: Vec::new(),
            switches: 0,
            time: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for i in 0..link_count + site_count {
            let v = process.draw_level();
            // unused link slots at open edges never switch
            let active = i >= link_count || lattice.link_exists(i);
            let next = match (&process.waiting, active) {
                (Some(exp), true) => exp.sample(&mut process.rng),
                _ => f64::INFINITY,
            };
            process.values.push(v);
            process.next_switch.push(next);
        }
        Ok(process)
    }

    fn draw_level(&mut self) -> f64 {
        if self.levels.len() == 1 {
            self.levels[0]
        } else {
            self.levels[self.rng.random_range(0..self.levels.len())]
        }
    }

    /// Advance the switching clocks over `(t, t + dt]`. Returns whether any
    /// element value changed; the changed elements are available from
    /// [`changed`](Self::changed) until the next call.
    pub fn advance(&mut self, t: f64, dt: f64) -> bool {
        assert!(dt > 0.0, "noise advance needs a positive time step");
        self.changed.clear();
        let horizon = t + dt;
        self.time = horizon;
        let Some(exp) = self.waiting else {
            return false;
        };
        for i in 0..self.values.len() {
            if self.next_switch[i] > horizon {
                continue;
            }
            let old = self.values[i];
            while self.next_switch[i] <= horizon {
                self.values[i] = if self.levels.len() == 1 {
                    self.levels[0]
                } else {
                    self.levels[self.rng.random_range(0..self.levels.len())]
                };
                self.next_switch[i] += exp.sample(&mut self.rng);
                self.switches += 1;
            }
            if self.values[i] != old {
                self.changed.push(i);
            }
        }
        !self.changed.is_empty()
    }

    /// Overwrite one element's value (scripted noise). The value must be one
    /// of the levels; the element is reported as changed if it differs.
    pub fn set_value(&mut self, element: NoiseElement, value: f64) -> Result<()> {
        if !self.levels.contains(&value) {
            return Err(Error::config(format!("{value} is not a noise level")));
        }
        let i = self
            .flat_index(element)
            .ok_or_else(|| Error::Index(format!("{element:?} carries no noise")))?;
        if self.values[i] != value {
            self.values[i] = value;
            if !self.changed.contains(&i) {
                self.changed.push(i);
            }
        }
        Ok(())
    }

    fn flat_index(&self, element: NoiseElement) -> Option<usize> {
        match element {
            NoiseElement::Link(l) if l < self.link_count => Some(l),
            NoiseElement::Site(x) if x < self.site_count => Some(self.link_count + x),
            _ => None,
        }
    }

    fn element(&self, i: usize) -> NoiseElement {
        if i < self.link_count {
            NoiseElement::Link(i)
        } else {
            NoiseElement::Site(i - self.link_count)
        }
    }

    /// Noise on a lattice link (zero when links are noiseless).
    #[inline]
    pub fn link(&self, link: usize) -> f64 {
        if self.link_count > 0 {
            self.values[link]
        } else {
            0.0
        }
    }

    /// Noise on a lattice site (zero when sites are noiseless).
    #[inline]
    pub fn site(&self, site: usize) -> f64 {
        if self.site_count > 0 {
            self.values[self.link_count + site]
        } else {
            0.0
        }
    }

    pub fn value(&self, element: NoiseElement) -> Option<f64> {
        self.flat_index(element).map(|i| self.values[i])
    }

    pub fn next_switch(&self, element: NoiseElement) -> Option<f64> {
        self.flat_index(element).map(|i| self.next_switch[i])
    }

    /// Elements whose value changed during the last advance (or `set_value`).
    pub fn changed(&self) -> impl Iterator<Item = NoiseElement> + '_ {
        self.changed.iter().map(|&i| self.element(i))
    }

    pub fn has_changes(&self) -> bool {
        !self.changed.is_empty()
    }

    /// Number of noisy elements.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total switching events fired so far (including redraws of the same level).
    pub fn switch_count(&self) -> u64 {
        self.switches
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}
