//! Observables computed from density matrix snapshots.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::ensemble::DensityMatrix;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, JointSpace, LatticeTopology};

/// Population near the antipode above which a periodic walker counts as wrapped.
pub const WRAP_THRESHOLD: f64 = 1e-3;
/// Sites on either side of the antipode inspected by the wrap check.
pub const WRAP_WINDOW: usize = 2;
/// Largest dimension accepted by [`trace_distance`].
pub const TRACE_DISTANCE_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Populations,
    JointDistribution,
    PositionMeanVariance,
    Purity,
    ParticipationRatio,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 5] = [
        ObservableKind::Populations,
        ObservableKind::JointDistribution,
        ObservableKind::PositionMeanVariance,
        ObservableKind::Purity,
        ObservableKind::ParticipationRatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservableKind::Populations => "populations",
            ObservableKind::JointDistribution => "joint_distribution",
            ObservableKind::PositionMeanVariance => "position_mean_variance",
            ObservableKind::Purity => "purity",
            ObservableKind::ParticipationRatio => "participation_ratio",
        }
    }
}

impl std::str::FromStr for ObservableKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown observable '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSet(pub Vec<ObservableKind>);

impl Default for ObservableSet {
    fn default() -> Self {
        ObservableSet(vec![
            ObservableKind::Populations,
            ObservableKind::PositionMeanVariance,
            ObservableKind::Purity,
            ObservableKind::ParticipationRatio,
        ])
    }
}

impl ObservableSet {
    pub fn contains(&self, kind: ObservableKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Spreading statistics along one lattice direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionStats {
    pub mean: f64,
    pub variance: f64,
    /// Periodic lattices only: the walker reached the antipode of the reference.
    pub wrapped: bool,
}

/// Values of the selected observables at one snapshot.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Observables {
    pub populations: Option<Vec<f64>>,
    pub joint_distribution: Option<Vec<f64>>,
    pub position: Option<Vec<PositionStats>>,
    pub purity: Option<f64>,
    pub participation_ratio: Option<f64>,
}

impl Observables {
    /// Evaluate `set` on `rho`. `reference` holds one reference coordinate per
    /// lattice direction for the spreading statistics.
    pub fn compute(rho: &DensityMatrix, space: &JointSpace, set: &ObservableSet, reference: &[f64]) -> Result<Self> {
        let mut out = Observables::default();
        let pops = if set.contains(ObservableKind::Populations) || set.contains(ObservableKind::PositionMeanVariance) {
            Some(populations(rho, space)?)
        } else {
            None
        };
        if set.contains(ObservableKind::PositionMeanVariance) {
            let p = pops.as_ref().expect("populations computed");
            out.position = Some(position_stats(p, space.particles(), space.lattice(), reference)?);
        }
        if set.contains(ObservableKind::Populations) {
            out.populations = pops;
        }
        if set.contains(ObservableKind::JointDistribution) {
            out.joint_distribution = Some(rho.diagonal().collect());
        }
        if set.contains(ObservableKind::Purity) {
            out.purity = Some(purity(rho));
        }
        if set.contains(ObservableKind::ParticipationRatio) {
            out.participation_ratio = Some(participation_ratio(rho));
        }
        Ok(out)
    }

    /// Flattened `(name, component_index, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, usize, f64)> {
        let mut rows = Vec::new();
        if let Some(p) = &self.populations {
            rows.extend(p.iter().enumerate().map(|(i, &v)| ("population", i, v)));
        }
        if let Some(j) = &self.joint_distribution {
            rows.extend(j.iter().enumerate().map(|(i, &v)| ("joint_distribution", i, v)));
        }
        if let Some(pos) = &self.position {
            rows.extend(pos.iter().enumerate().map(|(d, s)| ("position_mean", d, s.mean)));
            rows.extend(pos.iter().enumerate().map(|(d, s)| ("position_variance", d, s.variance)));
            rows.extend(
                pos.iter()
                    .enumerate()
                    .map(|(d, s)| ("wrap_flag", d, if s.wrapped { 1.0 } else { 0.0 })),
            );
        }
        if let Some(p) = self.purity {
            rows.push(("purity", 0, p));
        }
        if let Some(p) = self.participation_ratio {
            rows.push(("participation_ratio", 0, p));
        }
        rows
    }
}

/// Site occupations P(x), summing to the particle count.
pub fn populations(rho: &DensityMatrix, space: &JointSpace) -> Result<Vec<f64>> {
    if rho.dim() != space.dim() {
        return Err(Error::Dimension(format!(
            "density matrix has dimension {} but the joint space has {}",
            rho.dim(),
            space.dim()
        )));
    }
    let mut p = vec![0.0; space.lattice().n_sites()];
    let mut positions = vec![0; space.particles()];
    for (alpha, w) in rho.diagonal().enumerate() {
        space.positions_into(alpha, &mut positions);
        for &x in &positions {
            p[x] += w;
        }
    }
    Ok(p)
}

/// Coordinate reference per direction: the single-particle centroid of `populations`.
pub fn centroid(populations: &[f64], particles: usize, lattice: &LatticeTopology) -> Vec<f64> {
    (0..lattice.q())
        .map(|d| {
            populations
                .iter()
                .enumerate()
                .map(|(x, &w)| w * lattice.coordinate(x, d) as f64)
                .sum::<f64>()
                / particles as f64
        })
        .collect()
}

/// Mean and variance of the single-particle marginal along each direction,
/// with displacements measured from `reference`. On periodic lattices the
/// displacement is taken on the covering line within half a period of the
/// reference, which is exact only until the walker reaches the antipode.
pub fn position_stats(
    populations: &[f64],
    particles: usize,
    lattice: &LatticeTopology,
    reference: &[f64],
) -> Result<Vec<PositionStats>> {
    if reference.len() != lattice.q() {
        return Err(Error::Dimension(format!(
            "{} reference coordinates for a {}-dimensional lattice",
            reference.len(),
            lattice.q()
        )));
    }
    let mut stats = Vec::with_capacity(lattice.q());
    for (d, &r) in reference.iter().enumerate() {
        let n = lattice.dims()[d];
        let mut marginal = vec![0.0; n];
        for (x, &w) in populations.iter().enumerate() {
            marginal[lattice.coordinate(x, d)] += w / particles as f64;
        }
        let periodic = lattice.boundary() == Boundary::Periodic;
        let displacement = |c: usize| {
            let raw = c as f64 - r;
            if periodic {
                let nf = n as f64;
                (raw + nf / 2.0).rem_euclid(nf) - nf / 2.0
            } else {
                raw
            }
        };
        let mean: f64 = marginal.iter().enumerate().map(|(c, &w)| w * displacement(c)).sum();
        let second: f64 = marginal
            .iter()
            .enumerate()
            .map(|(c, &w)| w * displacement(c).powi(2))
            .sum();
        let wrapped = periodic && {
            let half = n as f64 / 2.0;
            let near_antipode: f64 = marginal
                .iter()
                .enumerate()
                .filter(|&(c, _)| half - displacement(c).abs() <= WRAP_WINDOW as f64)
                .map(|(_, &w)| w)
                .sum();
            near_antipode > WRAP_THRESHOLD
        };
        stats.push(PositionStats {
            mean,
            variance: second - mean * mean,
            wrapped,
        });
    }
    Ok(stats)
}

/// Position variance per direction around `reference`.
pub fn position_variance(rho: &DensityMatrix, space: &JointSpace, reference: &[f64]) -> Result<Vec<PositionStats>> {
    let p = populations(rho, space)?;
    position_stats(&p, space.particles(), space.lattice(), reference)
}

/// Tr(rho^2) from the packed triangle.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let mut diag = 0.0;
    let mut off = 0.0;
    let packed = rho.packed();
    for a in 0..rho.dim() {
        let row = &packed[a * (a + 1) / 2..(a + 1) * (a + 2) / 2];
        diag += row[a].re * row[a].re;
        off += row[..a].iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    diag + 2.0 * off
}

/// Inverse participation of the joint distribution, 1 / sum_a rho_aa^2.
pub fn participation_ratio(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho.diagonal().map(|p| p * p).sum();
    1.0 / s
}

/// (1/2) sum |eigenvalues(rho1 - rho2)|.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::Dimension(format!(
            "cannot compare density matrices of dimension {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    if rho1.dim() > TRACE_DISTANCE_CAP {
        return Err(Error::Capacity(format!(
            "trace distance of dimension {} exceeds the cap of {TRACE_DISTANCE_CAP}",
            rho1.dim()
        )));
    }
    let diff = rho1.to_dense() - rho2.to_dense();
    let ev = SymmetricEigen::new(diff).eigenvalues;
    Ok(0.5 * ev.iter().map(|e| e.abs()).sum::<f64>())
}
