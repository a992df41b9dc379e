//! The `validate` command: invariant checks on a tiny noisy instance.

use ctqw::ensemble::MemorySink;
use ctqw::observables::trace_distance;
use ctqw::{
    run, Backend, Boundary, JointSpace, LatticeTopology, NoiseSpec, NoiseTarget, ObservableKind, ObservableSet,
    Precision, Result, RunConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Two particles on a six-site ring with telegraph noise on links and sites.
pub fn tiny_config(workers: usize) -> Result<RunConfig> {
    let space = JointSpace::new(LatticeTopology::chain(6, Boundary::Periodic)?, 2)?;
    let mut c = RunConfig::new(space);
    c.noise_spec = NoiseSpec::two_level(NoiseTarget::Both, 0.3, 0.5);
    c.model.interaction = 0.5;
    c.realizations = 20;
    c.steps = 30;
    c.post_rate = 5;
    c.master_seed = 2024;
    c.precision = Precision::Double;
    c.workers = workers;
    c.observables = ObservableSet(ObservableKind::ALL.to_vec());
    c.stepper.dt = c.suggested_dt();
    Ok(c)
}

pub fn validate(workers: usize) -> Result<Vec<Check>> {
    let cfg = tiny_config(workers)?;
    let m = cfg.space.particles() as f64;
    let d = cfg.space.dim() as f64;
    let mut first = MemorySink::default();
    run(&cfg, &mut first)?;

    let mut trace = 0.0f64;
    let mut min_diag = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut pop = 0.0f64;
    let mut purity_ok = true;
    for s in &first.snapshots {
        trace = trace.max((s.density.trace() - 1.0).abs());
        min_diag = min_diag.min(s.density.diagonal().fold(f64::INFINITY, f64::min));
        min_eig = min_eig.min(s.density.min_eigenvalue()?);
        let total: f64 = s.observables.populations.as_deref().unwrap_or_default().iter().sum();
        pop = pop.max((total - m).abs());
        let p = s.observables.purity.unwrap_or(f64::NAN);
        purity_ok &= p >= 1.0 / d - 1e-12 && p <= 1.0 + 1e-8;
    }
    let mut checks = vec![
        check("trace", trace <= 1e-6, format!("max |Tr rho - 1| = {trace:.3e}")),
        check("diagonal", min_diag >= -1e-12, format!("min diagonal = {min_diag:.3e}")),
        check("positive_semidefinite", min_eig >= -1e-8, format!("min eigenvalue = {min_eig:.3e}")),
        check("populations", pop <= 1e-6, format!("max |sum P - m| = {pop:.3e}")),
        check("purity_range", purity_ok, format!("bounds [1/{d}, 1 + 1e-8]")),
    ];

    let mut second = MemorySink::default();
    let mut other_workers = cfg.clone();
    other_workers.workers = if workers == 1 { 2 } else { 1 };
    run(&other_workers, &mut second)?;
    let same = first
        .snapshots
        .iter()
        .zip(&second.snapshots)
        .all(|(a, b)| a.density.packed() == b.density.packed());
    checks.push(check(
        "determinism",
        same && first.snapshots.len() == second.snapshots.len(),
        format!("workers {} vs {}", cfg.workers, other_workers.workers),
    ));

    let mut taylor = cfg.clone();
    taylor.stepper.taylor_order = 12;
    let mut eigen = taylor.clone();
    eigen.stepper.backend = Backend::Eigen;
    let (mut a, mut b) = (MemorySink::default(), MemorySink::default());
    run(&taylor, &mut a)?;
    run(&eigen, &mut b)?;
    let dist = match (a.snapshots.last(), b.snapshots.last()) {
        (Some(x), Some(y)) => trace_distance(&x.density, &y.density)?,
        _ => f64::NAN,
    };
    checks.push(check("backend_agreement", dist <= 1e-8, format!("trace distance = {dist:.3e}")));
    Ok(checks)
}
