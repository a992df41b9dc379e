//! Flat key-value run configuration (a TOML subset).
//!
//! Every key is optional except `dims`. Unset keys take the library defaults;
//! a missing `dt` is derived from the worst-case Hamiltonian norm.

use std::fmt::Write as _;
use std::path::Path;

use ctqw::{
    Backend, Boundary, Complex64, CouplingModel, Error, InitialStateSpec, JointSpace, LatticeTopology, NoiseSpec,
    ObservableKind, ObservableSet, Precision, Result, RunConfig,
};
use toml::{Table, Value};

pub const VALID_KEYS: &[&str] = &[
    "dims",
    "k_half",
    "boundary",
    "m",
    "onsite_energy",
    "tunneling",
    "tunneling_per_direction",
    "interaction",
    "hbar",
    "noise_target",
    "noise_amplitude",
    "noise_levels",
    "switch_rate",
    "backend",
    "dt",
    "taylor_order",
    "tol_norm",
    "tol_fail",
    "renormalize",
    "R",
    "steps",
    "post_rate",
    "seed",
    "workers",
    "precision",
    "initial_state",
    "initial_positions",
    "initial_sites",
    "initial_factors",
    "initial_amplitudes",
    "postprocess",
    "initial_snapshot",
    "observables",
    "density_snapshots",
    "dense_cap",
    "memory_budget_mb",
];

/// A validated run configuration plus the options that only affect output.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    /// Write every snapshot's density matrix as a binary file.
    pub density_snapshots: bool,
}

/// Command-line overrides applied on top of a loaded file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub precision: Option<Precision>,
    pub backend: Option<Backend>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(p) = self.precision {
            cfg.precision = p;
        }
        if let Some(b) = self.backend {
            cfg.stepper.backend = b;
        }
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(format!("parse error: {e}")))?;
    from_table(&table)
}

struct Keys<'a>(&'a Table);

fn key_error(key: &str, expected: &str) -> Error {
    Error::Config(format!("key '{key}': expected {expected}"))
}

impl Keys<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| as_float(v).ok_or_else(|| key_error(key, "a number"))).transpose()
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| key_error(key, "a non-negative integer"))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.uint(key)?
            .map(|v| usize::try_from(v).map_err(|_| key_error(key, "an integer that fits in usize")))
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.get(key).map(|v| v.as_bool().ok_or_else(|| key_error(key, "true or false"))).transpose()
    }

    fn string(&self, key: &str) -> Result<Option<&str>> {
        self.get(key).map(|v| v.as_str().ok_or_else(|| key_error(key, "a string"))).transpose()
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, key: &str) -> Result<Option<T>> {
        self.string(key)?
            .map(|s| s.parse().map_err(|e| Error::Config(format!("key '{key}': {e}"))))
            .transpose()
    }

    fn array<'v>(&'v self, key: &str) -> Result<Option<&'v [Value]>> {
        self.get(key)
            .map(|v| v.as_array().map(Vec::as_slice).ok_or_else(|| key_error(key, "an array")))
            .transpose()
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.array(key)?
            .map(|a| {
                a.iter()
                    .map(|v| {
                        v.as_integer()
                            .and_then(|i| usize::try_from(i).ok())
                            .ok_or_else(|| key_error(key, "an array of non-negative integers"))
                    })
                    .collect()
            })
            .transpose()
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.array(key)?
            .map(|a| {
                a.iter()
                    .map(|v| as_float(v).ok_or_else(|| key_error(key, "an array of numbers")))
                    .collect()
            })
            .transpose()
    }
}

fn as_float(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn complex_list(key: &str, values: &[Value]) -> Result<Vec<Complex64>> {
    values
        .iter()
        .map(|v| match v {
            Value::Array(pair) if pair.len() == 2 => match (as_float(&pair[0]), as_float(&pair[1])) {
                (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                _ => Err(key_error(key, "[re, im] number pairs")),
            },
            other => as_float(other)
                .map(|re| Complex64::new(re, 0.0))
                .ok_or_else(|| key_error(key, "numbers or [re, im] pairs")),
        })
        .collect()
}

fn from_table(table: &Table) -> Result<LoadedConfig> {
    let unknown: Vec<&str> = table
        .keys()
        .map(String::as_str)
        .filter(|k| !VALID_KEYS.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "unknown key(s) {}; valid keys are: {}",
            unknown.join(", "),
            VALID_KEYS.join(", ")
        )));
    }
    let k = Keys(table);

    let dims = k.usize_list("dims")?.ok_or_else(|| Error::Config("missing required key 'dims'".into()))?;
    let q = dims.len();
    let k_half = match k.get("k_half") {
        None => vec![1; q],
        Some(Value::Integer(_)) => vec![k.usize("k_half")?.unwrap_or(1); q],
        Some(_) => k.usize_list("k_half")?.unwrap_or_default(),
    };
    let boundary: Boundary = k.parsed("boundary")?.unwrap_or(Boundary::Periodic);
    let lattice = LatticeTopology::new(q, &dims, &k_half, boundary)?;
    let space = JointSpace::new(lattice, k.usize("m")?.unwrap_or(1))?;
    let mut cfg = RunConfig::new(space);

    let defaults = CouplingModel::default();
    cfg.model = CouplingModel {
        onsite_energy: k.float("onsite_energy")?.unwrap_or(defaults.onsite_energy),
        tunneling: k.float("tunneling")?.unwrap_or(defaults.tunneling),
        tunneling_per_direction: k.float_list("tunneling_per_direction")?,
        interaction: k.float("interaction")?.unwrap_or(defaults.interaction),
        hbar: k.float("hbar")?.unwrap_or(defaults.hbar),
    };

    let mut noise = NoiseSpec::default();
    if let Some(t) = k.parsed("noise_target")? {
        noise.target = t;
    }
    match (k.float("noise_amplitude")?, k.float_list("noise_levels")?) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "set either 'noise_amplitude' or 'noise_levels', not both".into(),
            ))
        }
        (Some(a), None) => noise.levels = NoiseSpec::two_level(noise.target, a, 0.0).levels,
        (None, Some(levels)) => noise.levels = levels,
        (None, None) => {}
    }
    if let Some(g) = k.float("switch_rate")? {
        noise.switch_rate = g;
    }
    cfg.noise_spec = noise;

    if let Some(b) = k.parsed("backend")? {
        cfg.stepper.backend = b;
    }
    if let Some(n) = k.usize("taylor_order")? {
        cfg.stepper.taylor_order = n;
    }
    if let Some(t) = k.float("tol_norm")? {
        cfg.stepper.tol_norm = t;
    }
    if let Some(t) = k.float("tol_fail")? {
        cfg.stepper.tol_fail = t;
    }
    if let Some(r) = k.boolean("renormalize")? {
        cfg.stepper.renormalize = r;
    }
    if let Some(r) = k.usize("R")? {
        cfg.realizations = r;
    }
    if let Some(s) = k.usize("steps")? {
        cfg.steps = s;
    }
    cfg.post_rate = k.usize("post_rate")?.unwrap_or(cfg.post_rate.min(cfg.steps.max(1)));
    if let Some(s) = k.uint("seed")? {
        cfg.master_seed = s;
    }
    if let Some(w) = k.usize("workers")? {
        cfg.workers = w;
    }
    if let Some(p) = k.parsed("precision")? {
        cfg.precision = p;
    }
    cfg.initial_state = initial_state(&k)?;
    if let Some(p) = k.boolean("postprocess")? {
        cfg.postprocess = p;
    }
    if let Some(s) = k.boolean("initial_snapshot")? {
        cfg.initial_snapshot = s;
    }
    if let Some(list) = k.array("observables")? {
        let kinds = list
            .iter()
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| key_error("observables", "an array of strings"))
                    .and_then(|s| s.parse::<ObservableKind>().map_err(|e| Error::Config(format!("key 'observables': {e}"))))
            })
            .collect::<Result<Vec<_>>>()?;
        cfg.observables = ObservableSet(kinds);
    }
    if let Some(c) = k.usize("dense_cap")? {
        cfg.dense_cap = c;
    }
    if let Some(mb) = k.float("memory_budget_mb")? {
        if mb.is_nan() || mb <= 0.0 {
            return Err(key_error("memory_budget_mb", "a positive number"));
        }
        cfg.memory_budget = Some((mb * 1e6) as u64);
    }
    cfg.stepper.dt = match k.float("dt")? {
        Some(dt) => dt,
        None => {
            cfg.model.validate(cfg.space.lattice().q())?;
            cfg.noise_spec.validate()?;
            cfg.suggested_dt()
        }
    };
    cfg.validate()?;
    Ok(LoadedConfig {
        run: cfg,
        density_snapshots: k.boolean("density_snapshots")?.unwrap_or(false),
    })
}

fn initial_state(k: &Keys<'_>) -> Result<InitialStateSpec> {
    let kind = k.string("initial_state")?.unwrap_or("central");
    let pair = |key: &str| -> Result<[usize; 2]> {
        let sites = k.usize_list(key)?.ok_or_else(|| Error::Config(format!("initial_state '{kind}' needs '{key}'")))?;
        <[usize; 2]>::try_from(sites).map_err(|_| key_error(key, "exactly two sites"))
    };
    Ok(match kind {
        "central" => InitialStateSpec::Central,
        "single_site" => InitialStateSpec::SingleSite {
            positions: k
                .usize_list("initial_positions")?
                .ok_or_else(|| Error::Config("initial_state 'single_site' needs 'initial_positions'".into()))?,
        },
        "product" => {
            let factors = k
                .array("initial_factors")?
                .ok_or_else(|| Error::Config("initial_state 'product' needs 'initial_factors'".into()))?;
            InitialStateSpec::Product {
                factors: factors
                    .iter()
                    .map(|f| {
                        f.as_array()
                            .ok_or_else(|| key_error("initial_factors", "an array of amplitude arrays"))
                            .and_then(|a| complex_list("initial_factors", a))
                    })
                    .collect::<Result<_>>()?,
            }
        }
        "symmetrized_pair" => InitialStateSpec::SymmetrizedPair {
            sites: pair("initial_sites")?,
        },
        "antisymmetrized_pair" => InitialStateSpec::AntisymmetrizedPair {
            sites: pair("initial_sites")?,
        },
        "custom_vector" => InitialStateSpec::CustomVector {
            amplitudes: complex_list(
                "initial_amplitudes",
                k.array("initial_amplitudes")?
                    .ok_or_else(|| Error::Config("initial_state 'custom_vector' needs 'initial_amplitudes'".into()))?,
            )?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown initial_state '{other}' (expected central, single_site, product, symmetrized_pair, antisymmetrized_pair or custom_vector)"
            )))
        }
    })
}

/// The effective configuration in the same key-value format.
pub fn describe(loaded: &LoadedConfig) -> String {
    let c = &loaded.run;
    let lat = c.space.lattice();
    let mut s = String::new();
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let _ = writeln!(s, "dims = [{}]", list(lat.dims()));
    let _ = writeln!(s, "k_half = [{}]", list(lat.k_half()));
    let _ = writeln!(s, "boundary = \"{}\"", lat.boundary().as_str());
    let _ = writeln!(s, "m = {}", c.space.particles());
    let _ = writeln!(s, "onsite_energy = {:?}", c.model.onsite_energy);
    let _ = writeln!(s, "tunneling = {:?}", c.model.tunneling);
    if let Some(t) = &c.model.tunneling_per_direction {
        let _ = writeln!(s, "tunneling_per_direction = {t:?}");
    }
    let _ = writeln!(s, "interaction = {:?}", c.model.interaction);
    let _ = writeln!(s, "hbar = {:?}", c.model.hbar);
    let _ = writeln!(s, "noise_target = \"{}\"", c.noise_spec.target.as_str());
    let _ = writeln!(s, "noise_levels = {:?}", c.noise_spec.levels);
    let _ = writeln!(s, "switch_rate = {:?}", c.noise_spec.switch_rate);
    let _ = writeln!(s, "backend = \"{}\"", c.stepper.backend.as_str());
    let _ = writeln!(s, "dt = {:?}", c.stepper.dt);
    let _ = writeln!(s, "taylor_order = {}", c.stepper.taylor_order);
    let _ = writeln!(s, "tol_norm = {:?}", c.stepper.tol_norm);
    let _ = writeln!(s, "tol_fail = {:?}", c.stepper.tol_fail);
    let _ = writeln!(s, "renormalize = {}", c.stepper.renormalize);
    let _ = writeln!(s, "R = {}", c.realizations);
    let _ = writeln!(s, "steps = {}", c.steps);
    let _ = writeln!(s, "post_rate = {}", c.post_rate);
    let _ = writeln!(s, "seed = {}", c.master_seed);
    let _ = writeln!(s, "workers = {}", c.workers);
    let _ = writeln!(s, "precision = \"{}\"", c.precision.as_str());
    let _ = writeln!(s, "initial_state = {:?}", c.initial_state);
    let _ = writeln!(s, "postprocess = {}", c.postprocess);
    let _ = writeln!(s, "initial_snapshot = {}", c.initial_snapshot);
    let obs: Vec<_> = c.observables.0.iter().map(|o| format!("\"{}\"", o.as_str())).collect();
    let _ = writeln!(s, "observables = [{}]", obs.join(", "));
    let _ = writeln!(s, "density_snapshots = {}", loaded.density_snapshots);
    let _ = writeln!(s, "dense_cap = {}", c.dense_cap);
    if let Some(b) = c.memory_budget {
        let _ = writeln!(s, "memory_budget_mb = {}", b as f64 / 1e6);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("dims = [31]\nm = 2\nsteps = 1500\nR = 1000\n").unwrap().run;
        assert_eq!(c.space.dim(), 961);
        assert_eq!(c.realizations, 1000);
        assert_eq!(c.steps, 1500);
        assert_eq!(c.stepper.backend, Backend::Taylor);
        assert_eq!(c.noise_spec, NoiseSpec::default());
        assert_eq!(c.precision, Precision::Single);
        // ||H|| <= 2 m (c + nu) = 5.2 on a two-particle ring
        assert!((c.stepper.dt - 0.1 / 5.2).abs() < 1e-15);
        assert!(c.post_rate >= 1 && c.post_rate <= c.steps);
    }

    #[test]
    fn zero_post_rate_is_rejected() {
        let e = parse_config("dims = [8]\npost_rate = 0\nsteps = 10\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("post_rate"));
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let e = parse_config("dims = [8]\nrealisations = 4\n").unwrap_err().to_string();
        assert!(e.contains("realisations"));
        assert!(e.contains("tol_fail") && e.contains("post_rate"));
    }

    #[test]
    fn parse_error_names_the_line() {
        let e = parse_config("dims = [8]\nsteps = = 3\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn wrong_type_names_the_key() {
        let e = parse_config("dims = [8]\nsteps = \"ten\"\n").unwrap_err().to_string();
        assert!(e.contains("'steps'"), "{e}");
    }

    #[test]
    fn full_config_round_trips_through_describe() {
        let text = r#"
dims = [6, 5]
k_half = [1, 2]
boundary = "open"
m = 2
tunneling = 0.5
interaction = 1.5
noise_target = "both"
noise_levels = [-0.1, 0.0, 0.2]
switch_rate = 0.7
backend = "rk4"
dt = 0.01
R = 3
steps = 20
post_rate = 5
seed = 11
precision = "double"
initial_state = "antisymmetrized_pair"
initial_sites = [2, 9]
observables = ["purity", "joint_distribution"]
density_snapshots = true
memory_budget_mb = 64
"#;
        let a = parse_config(text).unwrap();
        assert_eq!(a.run.space.width(), 2 * 6 + 1);
        assert_eq!(a.run.stepper.backend, Backend::Rk4);
        assert_eq!(a.run.memory_budget, Some(64_000_000));
        assert!(a.density_snapshots);
        assert_eq!(
            a.run.initial_state,
            InitialStateSpec::AntisymmetrizedPair { sites: [2, 9] }
        );
        let echoed = describe(&a);
        assert!(echoed.contains("boundary = \"open\""));
        assert!(echoed.contains("k_half = [1, 2]"));
    }

    #[test]
    fn amplitude_shortcut_and_levels_conflict() {
        let c = parse_config("dims = [8]\nnoise_amplitude = 0.5\n").unwrap().run;
        assert_eq!(c.noise_spec.levels, vec![-0.5, 0.5]);
        assert!(parse_config("dims = [8]\nnoise_amplitude = 0.5\nnoise_levels = [0.1]\n").is_err());
    }

    #[test]
    fn custom_vector_amplitudes() {
        let c = parse_config(
            "dims = [3]\ninitial_state = \"custom_vector\"\ninitial_amplitudes = [[1, 0], 0, [0, 1]]\n",
        )
        .unwrap()
        .run;
        let InitialStateSpec::CustomVector { amplitudes } = c.initial_state else {
            panic!("wrong kind")
        };
        assert_eq!(amplitudes[2], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn overrides_win() {
        let mut c = parse_config("dims = [8]\nseed = 1\n").unwrap().run;
        Overrides {
            seed: Some(9),
            workers: Some(2),
            precision: Some(Precision::Double),
            backend: Some(Backend::Eigen),
        }
        .apply(&mut c);
        assert_eq!((c.master_seed, c.workers), (9, 2));
        assert_eq!(c.precision, Precision::Double);
        assert_eq!(c.stepper.backend, Backend::Eigen);
    }
}
