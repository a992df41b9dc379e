//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use ctqw::ensemble::{MemorySink, OwnedSnapshot};
use ctqw::observables::trace_distance;
use ctqw::propagators::{diagonalize, step_eigen, step_rk4, step_taylor, Workspace};
use ctqw::{
    run, Backend, Boundary, Complex64, InitialStateSpec, JointSpace, LatticeTopology, NoiseSpec, NoiseTarget,
    ObservableKind, ObservableSet, Precision, ReducedHamiltonian, RunConfig, TopologyMatrix, WaveFunction,
};
use ctqw_cli::benchmark::{run_plan, BenchmarkPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// 1: Taylor-4 and RK4 single steps
const C1_INSTANCES: usize = 50;
const C1_DIMS: [usize; 3] = [8, 64, 441];
const C1_TOL: f64 = 1e-12;
const C1_RUNTIME: f64 = 10.0;
// 2 and 5: Taylor(n = 10) against the spectral propagator
const C2_SITES: usize = 8;
const C2_AMPLITUDE: f64 = 0.3;
const C2_RATE: f64 = 0.2;
const C2_STEPS: usize = 200;
const C2_REALIZATIONS: usize = 100;
const C2_ORDER: usize = 10;
const C2_NORM_DT: f64 = 0.1;
const C2_TOL: f64 = 1e-8;
const C2_RUNTIME: f64 = 60.0;
const C5_TRACE_TOL: f64 = 1e-6;
const C5_MIN_EIGENVALUE: f64 = -1e-8;
// 3: one-step convergence order
const C3_ORDERS: [usize; 2] = [2, 4];
const C3_REL_TOL: f64 = 0.10;
// 4: norm control
const C4_STEPS: usize = 1500;
const C4_ORDER: usize = 4;
const C4_MAX_DEVIATION: f64 = 1e-6;
const C4_DT_FACTOR: f64 = 10.0;
const C4_EXIT_CODE: i32 = 3;
// 6: ballistic spreading
const C6_SITES: usize = 101;
const C6_MIN_SNAPSHOTS: usize = 20;
const C6_EXPONENT: (f64, f64) = (1.95, 2.05);
const C6_RUNTIME: f64 = 60.0;
// 7: noise suppresses spreading
const C7_REALIZATIONS: usize = 500;
const C7_RATIO: f64 = 0.7;
const C7_RUNTIME: f64 = 300.0;
// 8: linear cost in R
const C8_MESH: usize = 1600;
const C8_REALIZATIONS: [usize; 4] = [250, 500, 1000, 2000];
const C8_MIN_R2: f64 = 0.99;
// 9: post-processing share
const C9_MESH: usize = 2500;
const C9_FREQUENT_RATE: usize = 10;
const C9_FREQUENT_MIN_SHARE: f64 = 0.5;
const C9_SINGLE_MAX_SHARE: f64 = 0.2;
// 10: parallel speedup
const C10_MESH: usize = 1600;
const C10_REALIZATIONS: usize = 1000;
const C10_WORKERS: usize = 4;
const C10_MIN_SPEEDUP: f64 = 2.0;
// 11: determinism
const C11_SITES: usize = 31;
const C11_PARTICLES: usize = 2;
const C11_REALIZATIONS: usize = 100;
const C11_STEPS: usize = 300;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn ring(n: usize, m: usize) -> JointSpace {
    JointSpace::new(LatticeTopology::chain(n, Boundary::Periodic).unwrap(), m).unwrap()
}

fn random_hamiltonian(topo: &TopologyMatrix, rng: &mut ChaCha8Rng) -> ReducedHamiltonian<f64> {
    let hw = topo.half_width() + 1;
    let mut values = vec![Complex64::new(0.0, 0.0); topo.rows() * hw];
    for a in 0..topo.rows() {
        values[a * hw] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for (j, &col) in topo.forward(a).iter().enumerate() {
            if col != TopologyMatrix::INVALID {
                values[a * hw + 1 + j] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
    }
    ReducedHamiltonian::from_values(topo, values).unwrap()
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> WaveFunction<f64> {
    let mut psi = WaveFunction::new(
        (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    );
    let n = psi.norm_sqr();
    psi.scale(1.0 / n.sqrt());
    psi
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spaces = [ring(8, 1), ring(8, 2), ring(21, 2)];
    assert_eq!(spaces.each_ref().map(|s| s.dim()), C1_DIMS);
    let topos: Vec<_> = spaces.iter().map(|s| TopologyMatrix::build(s).unwrap()).collect();
    let mut worst = 0.0f64;
    let (mut ws_t, mut ws_r) = (Workspace::new(), Workspace::new());
    for i in 0..C1_INSTANCES {
        let topo = &topos[i % 3];
        let h = random_hamiltonian(topo, &mut rng);
        let dt = 0.1 / h.gershgorin_bound(topo);
        let psi0 = random_state(topo.rows(), &mut rng);
        let (mut a, mut b) = (psi0.clone(), psi0);
        step_taylor(&h, topo, &mut a, dt, 1.0, 4, &mut ws_t);
        step_rk4(&h, topo, &mut b, dt, 1.0, &mut ws_r);
        worst = worst.max(max_abs_diff(&a.amplitudes, &b.amplitudes));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= C1_TOL && secs < C1_RUNTIME,
        format!("max |delta| = {worst:.2e} (<= {C1_TOL:.0e}) over {C1_INSTANCES} instances, {secs:.2} s"),
    )
}

fn criterion_2_config(backend: Backend) -> RunConfig {
    let mut c = RunConfig::new(ring(C2_SITES, 1));
    c.noise_spec = NoiseSpec::two_level(NoiseTarget::Tunneling, C2_AMPLITUDE, C2_RATE);
    c.realizations = C2_REALIZATIONS;
    c.steps = C2_STEPS;
    c.post_rate = 10;
    c.master_seed = 20240917;
    c.precision = Precision::Double;
    c.stepper.backend = backend;
    c.stepper.taylor_order = C2_ORDER;
    let bound = c.model.norm_bound(&c.space, C2_AMPLITUDE, 0.0);
    c.stepper.dt = C2_NORM_DT * c.model.hbar / bound;
    c
}

fn criterion_2(snapshots: &mut Vec<OwnedSnapshot>) -> Verdict {
    let start = Instant::now();
    let mut taylor = MemorySink::default();
    let mut eigen = MemorySink::default();
    run(&criterion_2_config(Backend::Taylor), &mut taylor).unwrap();
    run(&criterion_2_config(Backend::Eigen), &mut eigen).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (a, b) = (taylor.snapshots.last().unwrap(), eigen.snapshots.last().unwrap());
    assert_eq!(a.step, C2_STEPS);
    let d = trace_distance(&a.density, &b.density).unwrap();
    *snapshots = taylor.snapshots;
    verdict(
        d <= C2_TOL && secs < C2_RUNTIME,
        format!("trace distance = {d:.2e} (<= {C2_TOL:.0e}), {secs:.2} s"),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let space = ring(8, 1);
    let topo = TopologyMatrix::build(&space).unwrap();
    let h = random_hamiltonian(&topo, &mut rng);
    let decomp = diagonalize(&h.densify(&topo, 64).unwrap()).unwrap();
    let psi0 = random_state(8, &mut rng);
    let dt = 0.05 / h.gershgorin_bound(&topo);
    let error = |order: usize, dt: f64| {
        let (mut a, mut b) = (psi0.clone(), psi0.clone());
        step_taylor(&h, &topo, &mut a, dt, 1.0, order, &mut Workspace::new());
        step_eigen(&decomp, &mut b, dt, 1.0);
        a.amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for n in C3_ORDERS {
        let ratio = error(n, dt) / error(n, dt / 2.0);
        let expected = 2f64.powi(n as i32 + 1);
        ok &= (ratio / expected - 1.0).abs() <= C3_REL_TOL;
        parts.push(format!("n={n}: ratio {ratio:.3} vs {expected}"));
    }
    verdict(ok, format!("{} (within {:.0}%)", parts.join(", "), C3_REL_TOL * 100.0))
}

fn criterion_4() -> Verdict {
    let mut c = RunConfig::new(ring(31, 2));
    c.realizations = 10;
    c.steps = C4_STEPS;
    c.post_rate = C4_STEPS;
    c.master_seed = 4;
    c.stepper.taylor_order = C4_ORDER;
    c.stepper.dt = c.suggested_dt();
    let report = run(&c, &mut ctqw::NullSink);
    let (ok_run, detail_run) = match &report {
        Ok(r) => (
            r.max_accepted_deviation <= C4_MAX_DEVIATION,
            format!(
                "max accepted deviation {:.2e} (<= {C4_MAX_DEVIATION:.0e}), raw {:.2e}, {} corrections, 0 aborts",
                r.max_accepted_deviation, r.max_norm_deviation, r.norm_corrections
            ),
        ),
        Err(e) => (false, format!("run aborted: {e}")),
    };

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c4.toml");
    std::fs::write(
        &cfg,
        format!(
            "dims = [31]\nm = 2\nR = 10\nsteps = {C4_STEPS}\npost_rate = {C4_STEPS}\nseed = 4\ntaylor_order = {C4_ORDER}\ndt = {}\n",
            C4_DT_FACTOR * c.stepper.dt
        ),
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_ctqw"))
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .env_remove("CTQW_WORKERS")
        .output()
        .unwrap()
        .status;
    let code = status.code();
    verdict(
        ok_run && code == Some(C4_EXIT_CODE),
        format!("{detail_run}; {C4_DT_FACTOR}x dt exit code {code:?}"),
    )
}

fn criterion_5(snapshots: &[OwnedSnapshot]) -> Verdict {
    let mut worst_trace = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut hermitian = true;
    for s in snapshots {
        let rho = &s.density;
        worst_trace = worst_trace.max((rho.trace() - 1.0).abs());
        min_eig = min_eig.min(rho.min_eigenvalue().unwrap());
        for a in 0..rho.dim() {
            for b in 0..rho.dim() {
                hermitian &= rho.get(a, b) == rho.get(b, a).conj();
            }
        }
    }
    verdict(
        !snapshots.is_empty() && worst_trace <= C5_TRACE_TOL && hermitian && min_eig >= C5_MIN_EIGENVALUE,
        format!(
            "{} snapshots: max |Tr - 1| = {worst_trace:.2e}, exact Hermitian = {hermitian}, min eigenvalue = {min_eig:.2e}",
            snapshots.len()
        ),
    )
}

fn spreading_config(realizations: usize, noise: NoiseSpec) -> RunConfig {
    let mut c = RunConfig::new(ring(C6_SITES, 1));
    c.noise_spec = noise;
    c.realizations = realizations;
    c.steps = 400;
    c.post_rate = 10;
    c.master_seed = 6;
    c.precision = Precision::Double;
    c.initial_state = InitialStateSpec::Central;
    c.observables = ObservableSet(vec![ObservableKind::PositionMeanVariance]);
    c.stepper.dt = 0.05;
    c
}

/// (time, variance, wrapped) per snapshot.
fn variance_series(sink: &MemorySink) -> Vec<(f64, f64, bool)> {
    sink.snapshots
        .iter()
        .map(|s| {
            let p = s.observables.position.as_ref().unwrap()[0];
            (s.time, p.variance, p.wrapped)
        })
        .collect()
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut sink = MemorySink::default();
    run(&spreading_config(1, NoiseSpec::silent()), &mut sink).unwrap();
    let series: Vec<_> = variance_series(&sink)
        .into_iter()
        .take_while(|&(_, _, wrapped)| !wrapped)
        .filter(|&(t, _, _)| t > 0.0)
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.iter().map(|&(t, v, _)| (t.ln(), v.ln())).unzip();
    let (slope, _, _) = linear_fit(&xs, &ys);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        series.len() >= C6_MIN_SNAPSHOTS && (C6_EXPONENT.0..=C6_EXPONENT.1).contains(&slope) && secs < C6_RUNTIME,
        format!(
            "exponent {slope:.4} in [{}, {}] over {} pre-wrap snapshots, {secs:.2} s",
            C6_EXPONENT.0,
            C6_EXPONENT.1,
            series.len()
        ),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut clean = MemorySink::default();
    let mut noisy = MemorySink::default();
    run(&spreading_config(1, NoiseSpec::silent()), &mut clean).unwrap();
    // amplitude c and switching rate c / hbar with c = hbar = 1
    let noise = NoiseSpec::two_level(NoiseTarget::Tunneling, 1.0, 1.0);
    run(&spreading_config(C7_REALIZATIONS, noise), &mut noisy).unwrap();
    let clean = variance_series(&clean);
    let noisy = variance_series(&noisy);
    let last = clean
        .iter()
        .zip(&noisy)
        .take_while(|(a, b)| !a.2 && !b.2)
        .last()
        .map(|(a, b)| (a.0, a.1, b.1));
    let secs = start.elapsed().as_secs_f64();
    match last {
        Some((t, v0, v)) => verdict(
            v < C7_RATIO * v0 && secs < C7_RUNTIME,
            format!(
                "t = {t:.2}: noisy {v:.3} vs noiseless {v0:.3}, ratio {:.3} (< {C7_RATIO}), {secs:.1} s",
                v / v0
            ),
        ),
        None => verdict(false, "no pre-wrap snapshot".into()),
    }
}

/// Least-squares slope, intercept and coefficient of determination.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn timing_template(steps: usize) -> RunConfig {
    let mut c = RunConfig::new(ring(40, 2));
    c.steps = steps;
    c.post_rate = steps;
    c.master_seed = 8;
    c.stepper.dt = c.suggested_dt();
    c
}

fn criterion_8() -> Verdict {
    let mut template = timing_template(20);
    template.postprocess = false;
    template.workers = 1;
    let plan = BenchmarkPlan {
        meshes: vec![C8_MESH],
        post_rates: vec![template.steps],
        realizations: C8_REALIZATIONS.to_vec(),
        repetitions: 1,
    };
    let out = run_plan(&plan, &template).unwrap();
    if !out.failures.is_empty() || out.rows.iter().any(|r| r.dim != C8_MESH) {
        return verdict(false, format!("sweep failed: {:?}", out.failures));
    }
    let xs: Vec<f64> = out.rows.iter().map(|r| r.realizations as f64).collect();
    let ys: Vec<f64> = out.rows.iter().map(|r| r.profile.wavefunction_evolution).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let times: Vec<String> = ys.iter().map(|t| format!("{t:.3}")).collect();
    verdict(
        r2 >= C8_MIN_R2,
        format!(
            "evolution times [{}] s, slope {:.2e} s per realization, R^2 = {r2:.4} (>= {C8_MIN_R2})",
            times.join(", "),
            slope
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut frequent = timing_template(300);
    frequent.realizations = 20;
    let plan = BenchmarkPlan {
        meshes: vec![C9_MESH],
        post_rates: vec![C9_FREQUENT_RATE],
        realizations: vec![frequent.realizations],
        repetitions: 1,
    };
    let a = run_plan(&plan, &frequent).unwrap();

    let mut single = timing_template(1500);
    single.realizations = 20;
    single.initial_snapshot = false;
    let plan = BenchmarkPlan {
        meshes: vec![C9_MESH],
        post_rates: vec![single.steps],
        realizations: vec![single.realizations],
        repetitions: 1,
    };
    let b = run_plan(&plan, &single).unwrap();
    match (a.rows.first(), b.rows.first()) {
        (Some(x), Some(y)) => {
            let (sa, sb) = (x.profile.density_share(), y.profile.density_share());
            verdict(
                x.dim >= C9_MESH && sa > C9_FREQUENT_MIN_SHARE && sb < C9_SINGLE_MAX_SHARE,
                format!(
                    "N^m = {}: post_rate {C9_FREQUENT_RATE} share {:.1}% (> {:.0}%), single snapshot share {:.1}% (< {:.0}%)",
                    x.dim,
                    100.0 * sa,
                    100.0 * C9_FREQUENT_MIN_SHARE,
                    100.0 * sb,
                    100.0 * C9_SINGLE_MAX_SHARE
                ),
            )
        }
        _ => verdict(false, format!("runs failed: {:?} {:?}", a.failures, b.failures)),
    }
}

fn criterion_10() -> Verdict {
    let mut c = timing_template(10);
    c.realizations = C10_REALIZATIONS;
    c.postprocess = false;
    let mut evo = Vec::new();
    for workers in [1, C10_WORKERS] {
        c.workers = workers;
        let plan = BenchmarkPlan {
            meshes: vec![C10_MESH],
            post_rates: vec![c.steps],
            realizations: vec![C10_REALIZATIONS],
            repetitions: 1,
        };
        let out = run_plan(&plan, &c).unwrap();
        match out.rows.first() {
            Some(r) => evo.push(r.profile.wavefunction_evolution),
            None => return verdict(false, format!("run failed: {:?}", out.failures)),
        }
    }
    let speedup = evo[0] / evo[1];
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    verdict(
        speedup >= C10_MIN_SPEEDUP,
        format!(
            "evolution {:.3} s (1 worker) vs {:.3} s ({C10_WORKERS} workers): speedup {speedup:.2}x (>= {C10_MIN_SPEEDUP}x), {cores} core(s) available",
            evo[0], evo[1]
        ),
    )
}

fn criterion_11() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c11.toml");
    std::fs::write(
        &cfg,
        format!(
            "dims = [{C11_SITES}]\nm = {C11_PARTICLES}\nR = {C11_REALIZATIONS}\nsteps = {C11_STEPS}\npost_rate = 50\nseed = 11\n"
        ),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_ctqw"))
            .args(["simulate", "--config", cfg.to_str().unwrap(), "--out"])
            .arg(&out)
            .env_remove("CTQW_WORKERS")
            .output()
            .unwrap();
        if !o.status.success() {
            return verdict(false, format!("run failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        outputs.push(std::fs::read(out.join("observables.csv")).unwrap());
    }
    verdict(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("observables.csv {} bytes, identical = {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let mut failures = 0;
    let mut report = |i: usize, name: &str, v: Verdict| {
        println!("criterion {i:>2} {} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        failures += usize::from(!v.passed);
    };
    let mut c2_snapshots = Vec::new();
    report(1, "Taylor/RK4 coincidence", guarded(criterion_1));
    report(2, "oracle agreement", guarded(|| criterion_2(&mut c2_snapshots)));
    report(3, "convergence order", guarded(criterion_3));
    report(4, "norm control", guarded(criterion_4));
    report(5, "density structure", guarded(|| criterion_5(&c2_snapshots)));
    report(6, "ballistic baseline", guarded(criterion_6));
    report(7, "noise suppresses spreading", guarded(criterion_7));
    report(8, "realization scaling", guarded(criterion_8));
    report(9, "post-processing dominance", guarded(criterion_9));
    report(10, "parallel efficiency", guarded(criterion_10));
    report(11, "determinism", guarded(criterion_11));
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
