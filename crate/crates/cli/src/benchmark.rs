//! Timing sweeps over mesh size, post-processing rate and realization count.

use std::path::Path;

use ctqw::{run, Error, JointSpace, LatticeTopology, NullSink, Result, RunConfig, StageProfile};
use serde::Deserialize;

use crate::config::LoadedConfig;

pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const FAILURES_FILE: &str = "benchmark_failures.csv";

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    /// Target joint dimensions N^m; each is rounded to the nearest lattice.
    pub meshes: Vec<usize>,
    pub post_rates: Vec<usize>,
    #[serde(rename = "R")]
    pub realizations: Vec<usize>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.meshes.is_empty() || self.post_rates.is_empty() || self.realizations.is_empty() {
            return Err(Error::Config("benchmark plan lists must be non-empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("benchmark repetitions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.meshes.len() * self.post_rates.len() * self.realizations.len() * self.repetitions
    }
}

pub fn parse_plan(text: &str) -> Result<BenchmarkPlan> {
    let plan: BenchmarkPlan = toml::from_str(text).map_err(|e| Error::Config(format!("benchmark plan: {e}")))?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<BenchmarkPlan> {
    parse_plan(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub mesh: usize,
    pub dim: usize,
    pub post_rate: usize,
    pub realizations: usize,
    pub repetition: usize,
    pub profile: StageProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkFailure {
    pub mesh: usize,
    pub post_rate: usize,
    pub realizations: usize,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkOutcome {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<BenchmarkFailure>,
}

/// The template's lattice resized so that N^m is as close as possible to `target`.
pub fn resize_space(template: &JointSpace, target: usize) -> Result<JointSpace> {
    let lat = template.lattice();
    let exponent = (lat.q() * template.particles()) as f64;
    let n = ((target as f64).powf(1.0 / exponent).round() as usize).max(1);
    let lattice = LatticeTopology::new(lat.q(), &vec![n; lat.q()], lat.k_half(), lat.boundary())?;
    JointSpace::new(lattice, template.particles())
}

fn point_config(template: &RunConfig, mesh: usize, post_rate: usize, realizations: usize) -> Result<RunConfig> {
    let mut cfg = template.clone();
    cfg.space = resize_space(&template.space, mesh)?;
    cfg.post_rate = post_rate;
    cfg.realizations = realizations;
    Ok(cfg)
}

/// Run every point of `plan` with output sinks disabled. A failing point is
/// recorded and the sweep moves on.
pub fn run_plan(plan: &BenchmarkPlan, template: &RunConfig) -> Result<BenchmarkOutcome> {
    plan.validate()?;
    let mut out = BenchmarkOutcome::default();
    for &mesh in &plan.meshes {
        for &post_rate in &plan.post_rates {
            for &realizations in &plan.realizations {
                for repetition in 0..plan.repetitions {
                    let result = point_config(template, mesh, post_rate, realizations)
                        .and_then(|cfg| run(&cfg, &mut NullSink).map(|r| (cfg.space.dim(), r)));
                    match result {
                        Ok((dim, report)) => out.rows.push(BenchmarkRow {
                            mesh,
                            dim,
                            post_rate,
                            realizations,
                            repetition,
                            profile: report.profile,
                        }),
                        Err(e) => out.failures.push(BenchmarkFailure {
                            mesh,
                            post_rate,
                            realizations,
                            repetition,
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }
    Ok(out)
}

pub const BENCHMARK_HEADER: [&str; 12] = [
    "mesh",
    "dim",
    "post_rate",
    "R",
    "repetition",
    "total",
    "initialization",
    "wavefunction_evolution",
    "hamiltonian_update",
    "density_and_postprocessing",
    "io",
    "density_share",
];

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Sweep `plan` and write benchmark.csv (and benchmark_failures.csv when any
/// point failed) into `out_dir`.
pub fn benchmark(plan: &BenchmarkPlan, template: &LoadedConfig, out_dir: &Path) -> Result<BenchmarkOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let outcome = run_plan(plan, &template.run)?;
    let mut w = csv::Writer::from_path(out_dir.join(BENCHMARK_FILE)).map_err(csv_error)?;
    w.write_record(BENCHMARK_HEADER).map_err(csv_error)?;
    for r in &outcome.rows {
        let p = &r.profile;
        let fields = [
            r.mesh.to_string(),
            r.dim.to_string(),
            r.post_rate.to_string(),
            r.realizations.to_string(),
            r.repetition.to_string(),
            p.total.to_string(),
            p.initialization.to_string(),
            p.wavefunction_evolution.to_string(),
            p.hamiltonian_update.to_string(),
            p.density_and_postprocessing.to_string(),
            p.io.to_string(),
            p.density_share().to_string(),
        ];
        w.write_record(&fields).map_err(csv_error)?;
    }
    w.flush()?;
    if !outcome.failures.is_empty() {
        let mut f = csv::Writer::from_path(out_dir.join(FAILURES_FILE)).map_err(csv_error)?;
        f.write_record(["mesh", "post_rate", "R", "repetition", "error"]).map_err(csv_error)?;
        for x in &outcome.failures {
            f.write_record([
                x.mesh.to_string(),
                x.post_rate.to_string(),
                x.realizations.to_string(),
                x.repetition.to_string(),
                x.message.clone(),
            ])
            .map_err(csv_error)?;
        }
        f.flush()?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn plan_parsing() {
        let p = parse_plan("meshes = [64]\npost_rates = [5, 10]\nR = [2]\nrepetitions = 2\n").unwrap();
        assert_eq!(p.points(), 4);
        assert!(parse_plan("meshes = []\npost_rates = [5]\nR = [2]\n").is_err());
        assert!(parse_plan("meshes = [4]\npost_rates = [5]\nR = [2]\nextra = 1\n").is_err());
    }

    #[test]
    fn mesh_targets_round_to_lattices() {
        let t = parse_config("dims = [5]\nm = 2\n").unwrap().run.space;
        assert_eq!(resize_space(&t, 1600).unwrap().dim(), 1600);
        assert_eq!(resize_space(&t, 2500).unwrap().dim(), 2500);
        let t2 = parse_config("dims = [3, 3]\nm = 1\n").unwrap().run.space;
        assert_eq!(resize_space(&t2, 230).unwrap().lattice().dims(), &[15, 15]);
    }

    #[test]
    fn failures_are_recorded_and_the_sweep_continues() {
        let template = parse_config("dims = [4]\nm = 1\nsteps = 10\nR = 1\npost_rate = 5\n").unwrap();
        let plan = parse_plan("meshes = [4, 9]\npost_rates = [5, 20]\nR = [1, 2]\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = benchmark(&plan, &template, dir.path()).unwrap();
        // post_rate 20 exceeds the 10 steps
        assert_eq!(out.failures.len(), 4);
        assert_eq!(out.rows.len(), plan.points() - out.failures.len());
        let text = std::fs::read_to_string(dir.path().join(BENCHMARK_FILE)).unwrap();
        assert_eq!(text.lines().count(), 1 + out.rows.len());
        assert!(text.starts_with("mesh,dim,post_rate,R,repetition,total"));
        assert!(dir.path().join(FAILURES_FILE).exists());
    }
}
