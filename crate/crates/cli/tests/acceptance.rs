//! End-to-end acceptance gates. Runs every criterion, prints one PASS/FAIL
//! line each and exits nonzero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use scarlab::basis::satisfies_blockade;
use scarlab::cumulants::{
    crossing_term, decompose_scar_correlator, default_pattern, factorization_test, scar_free_cumulant,
    thermal_free_cumulant, uniform_grid, Ensemble, EnsembleKind, ScarPair,
};
use scarlab::haar::{
    check_first_moment, check_second_moment, check_typicality_scaling, second_moment_battery,
    test_inputs, weingarten_inverts_gram, HaarSampler,
};
use scarlab::scars::neel_overlap;
use scarlab::{select_scars, ConstrainedBasis, PxpSystem, ScarSet, SelectionMethod};

const SYMMETRY_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-9;
const FROBENIUS_GATE: f64 = 0.35;
const THREEPOINT_GATE: f64 = 0.2;
const SLOPE_RANGE: (f64, f64) = (-1.5, -0.5);
const BRUTE_FORCE_TOL: f64 = 1e-12;
const SIGMA_GATE: f64 = 4.0;
const NEEL_SUM_TOL: f64 = 1e-10;

// Scar selection used by the factorization, three-point and entropy gates.
const SCAR_COUNT: usize = 6;
const CROSSING_SCAR_COUNT: usize = 3;
const BAND: f64 = 0.6;

type Outcome = Result<String, String>;

fn scars_of(sys: &PxpSystem, count: usize) -> ScarSet {
    select_scars(&sys.spectrum, &sys.sector, SelectionMethod::NeelOverlap, count, BAND).unwrap()
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took <= budget {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, budget {budget:?}"))
    }
}

fn basis_dimensions() -> Outcome {
    let start = Instant::now();
    for n in 3..=16usize {
        let brute = (0u64..1 << n).filter(|&c| satisfies_blockade(c, n)).count();
        // independent filter: no two cyclically adjacent set bits
        let by_bits = (0u64..1 << n)
            .filter(|&c| (0..n).all(|j| !(c >> j & 1 == 1 && c >> ((j + 1) % n) & 1 == 1)))
            .count();
        let dim = ConstrainedBasis::enumerate(n).unwrap().dim();
        if dim != brute || dim != by_bits {
            return Err(format!("N={n}: {dim} vs {brute}/{by_bits}"));
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok("N=3..16 exact".into())
}

fn spectral_symmetry() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [8, 10, 12, 14] {
        let sys = PxpSystem::build(n).unwrap();
        let e = sys.spectrum.energies();
        let d = e.len();
        worst = (0..d).map(|k| (e[k] + e[d - 1 - k]).abs()).fold(worst, f64::max);
    }
    within(Duration::from_secs(30), start)?;
    if worst <= SYMMETRY_TOL {
        Ok(format!("max |E_k + E_(D+1-k)| = {worst:.2e}"))
    } else {
        Err(format!("asymmetry {worst:.2e}"))
    }
}

fn resolution_of_identity() -> Outcome {
    let start = Instant::now();
    let sys = PxpSystem::build(10).unwrap();
    let scars = scars_of(&sys, SCAR_COUNT);
    let a = scars.central_scar().unwrap();
    let b = scars.adjacent_scar(a).unwrap();
    let grid = uniform_grid(40.0, 401).unwrap();
    let mut worst: f64 = 0.0;
    for (x, y) in [(a, a), (a, b)] {
        let pair = ScarPair::new(&sys.spectrum, &scars, x, y, 10).unwrap();
        for q in 2..=4 {
            let r = decompose_scar_correlator(
                &sys.spectrum,
                &sys.observable,
                &scars,
                &pair,
                &grid,
                &default_pattern(q),
                false,
            )
            .unwrap();
            worst = worst.max(r.max_abs_error);
        }
    }
    within(Duration::from_secs(60), start)?;
    if worst <= IDENTITY_TOL {
        Ok(format!("max abs error {worst:.2e} for q=2,3,4"))
    } else {
        Err(format!("max abs error {worst:.2e}"))
    }
}

fn factorization_scaling() -> Outcome {
    let start = Instant::now();
    let err = |n| {
        let sys = PxpSystem::build(n).unwrap();
        let scars = scars_of(&sys, SCAR_COUNT);
        factorization_test(&sys.spectrum, &sys.observable, &scars, n, EnsembleKind::Canonical, None)
            .unwrap()
            .frobenius_rel_error
    };
    let (small, large) = (err(10), err(14));
    within(Duration::from_secs(120), start)?;
    let msg = format!("relative Frobenius error N=10 {small:.4}, N=14 {large:.4}");
    if large <= FROBENIUS_GATE && large < small {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn threepoint_decomposition() -> Outcome {
    let start = Instant::now();
    let err = |n| {
        let sys = PxpSystem::build(n).unwrap();
        let scars = scars_of(&sys, SCAR_COUNT);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spectrum, &scars, a, a, n).unwrap();
        let grid = uniform_grid(40.0, 401).unwrap();
        decompose_scar_correlator(
            &sys.spectrum,
            &sys.observable,
            &scars,
            &pair,
            &grid,
            &[0.0, 1.0, 0.0],
            true,
        )
        .unwrap()
        .max_rel_error
    };
    let (small, large) = (err(10), err(14));
    within(Duration::from_secs(120), start)?;
    let msg = format!("max|sum-exact|/max|exact| N=10 {small:.4}, N=14 {large:.4}");
    if large <= THREEPOINT_GATE && large < small {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn crossing_suppression(work: &Path) -> Outcome {
    let start = Instant::now();
    let config = work.join("crossing.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"n_sweep": [8, 10, 12, 14], "crossing_scar_count": {CROSSING_SCAR_COUNT}, "band_fraction": {BAND}}}"#
        ),
    )
    .unwrap();
    let out = work.join("crossing");
    run_cli(&["crossing"], &config, &out, &work.join("cache"))?;
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("crossing_fit.json")).unwrap()).unwrap();
    let slope = |k: &str| fit[k].as_f64().unwrap_or(f64::NAN);
    let (aa, ab) = (slope("slope_aa"), slope("slope_ab"));
    within(Duration::from_secs(60), start)?;
    let inside = |s: f64| s >= SLOPE_RANGE.0 && s <= SLOPE_RANGE.1;
    let msg = format!("log-log slopes a=a {aa:.3}, adjacent {ab:.3}");
    if inside(aa) && inside(ab) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn phase(e: &[f64], m: usize, n: usize, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, (e[m] - e[n]) * t)
}

fn brute_force_cumulants() -> Outcome {
    let start = Instant::now();
    let sys = PxpSystem::build(8).unwrap();
    let scars = scars_of(&sys, 2);
    let (spec, obs) = (&sys.spectrum, &sys.observable);
    let e = spec.energies();
    let o = |m: usize, n: usize| obs.get(m, n);
    let thermal = scars.non_scar_indices();
    let a = scars.scar_indices[0];
    let b = scars.scar_indices[1];
    let (t1, t2, t3) = (0.7, -1.3, 2.1);
    let mut worst: f64 = 0.0;
    let mut track = |got: Complex64, want: Complex64| worst = worst.max((got - want).norm());

    let ens = Ensemble::canonical(spec, 0.4);
    let z: f64 = thermal.iter().map(|&i| ens.weights()[i]).sum();
    let p = |i: usize| ens.weights()[i] / z;
    let k1: f64 = thermal.iter().map(|&i| p(i) * o(i, i)).sum();
    track(thermal_free_cumulant(spec, &ens, obs, &thermal, &[], 1).unwrap(), k1.into());
    let mut k2 = Complex64::new(0.0, 0.0);
    for &i in &thermal {
        for &j in &thermal {
            if i != j {
                k2 += p(i) * o(i, j) * o(j, i) * phase(e, i, j, t1);
            }
        }
    }
    track(thermal_free_cumulant(spec, &ens, obs, &thermal, &[t1], 2).unwrap(), k2);

    for (x, y) in [(a, a), (a, b)] {
        track(
            scar_free_cumulant(spec, obs, &scars, &thermal, x, y, &[t1]).unwrap(),
            o(x, y) * phase(e, x, y, t1),
        );
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut s3 = Complex64::new(0.0, 0.0);
        for &i in &thermal {
            s2 += o(x, i) * o(i, y) * phase(e, x, i, t1) * phase(e, i, y, t2);
            for &j in &thermal {
                if i != j {
                    s3 += o(x, i) * o(i, j) * o(j, y) * phase(e, x, i, t1) * phase(e, i, j, t2) * phase(e, j, y, t3);
                }
            }
        }
        track(scar_free_cumulant(spec, obs, &scars, &thermal, x, y, &[t1, t2]).unwrap(), s2);
        track(scar_free_cumulant(spec, obs, &scars, &thermal, x, y, &[t1, t2, t3]).unwrap(), s3);

        let mut c = 0.0;
        for &i in &thermal {
            for &j in &thermal {
                if i != j {
                    c += o(x, i) * o(i, j).powi(3) * o(j, y);
                }
            }
        }
        track(crossing_term(obs, &thermal, x, y).unwrap().into(), c.into());
    }
    within(Duration::from_secs(10), start)?;
    if worst <= BRUTE_FORCE_TOL {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e}"))
    }
}

fn weingarten_checks() -> Outcome {
    let start = Instant::now();
    if !(2..=16).all(|d| weingarten_inverts_gram(d).unwrap()) {
        return Err("Q C != I".into());
    }
    let u4 = second_moment_battery()[0].prediction(2).unwrap();
    if u4 != num_rational::Rational64::new(1, 3) {
        return Err(format!("E|U_11|^4 at d=2 is {u4}"));
    }
    let d = 8;
    let sampler = HaarSampler::new(d, 2024).unwrap();
    let (o, a, b) = test_inputs(d, 2024);
    let reports = [
        ("first", check_first_moment(&sampler, 20_000, &o).unwrap()),
        ("second", check_second_moment(&sampler, 50_000).unwrap()),
        ("q1", check_typicality_scaling(&sampler, 10_000, &o, &a, &b, 1).unwrap()),
        ("q2", check_typicality_scaling(&sampler, 100_000, &o, &a, &b, 2).unwrap()),
    ];
    let d2 = check_second_moment(&HaarSampler::new(2, 2024).unwrap(), 50_000).unwrap();
    within(Duration::from_secs(60), start)?;
    let mut summary: Vec<String> =
        reports.iter().map(|(k, r)| format!("{k} {:.2}", r.max_sigmas())).collect();
    summary.push(format!("second(d=2) {:.2}", d2.max_sigmas()));
    let msg = format!("max sigmas: {}", summary.join(", "));
    if reports.iter().all(|(_, r)| r.passes(SIGMA_GATE)) && d2.passes(SIGMA_GATE) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn scar_diagnostics() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for n in [10, 12, 14] {
        let sys = PxpSystem::build(n).unwrap();
        let overlap = neel_overlap(&sys.spectrum, &sys.sector).unwrap();
        let total: f64 = overlap.iter().sum();
        if (total - 1.0).abs() > NEEL_SUM_TOL {
            return Err(format!("N={n}: Néel weights sum to {total}"));
        }
        let scars = scars_of(&sys, SCAR_COUNT);
        let (s, t) = (scars.mean_scar_entropy(), scars.mean_thermal_entropy());
        if !(s < t) {
            return Err(format!("N={n}: scar entropy {s:.4} >= thermal {t:.4}"));
        }
        parts.push(format!("N={n} {s:.3}<{t:.3}"));
    }
    within(Duration::from_secs(60), start)?;
    Ok(parts.join(", "))
}

fn run_cli(args: &[&str], config: &Path, out: &Path, cache: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_scarlab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--cache")
        .arg(cache)
        .env("RUST_LOG", "warn")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("scarlab {args:?} exited with {status}"))
    }
}

fn payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(work: &Path) -> Outcome {
    let config = work.join("determinism.json");
    std::fs::write(
        &config,
        r#"{"n_sites": 10, "n_points": 101, "n_sweep": [8, 10], "haar_dim": 4, "haar_samples": 3000, "seed": 17}"#,
    )
    .unwrap();
    let commands = ["spectrum", "scars", "factorization", "threepoint", "fourpoint", "crossing", "haar"];
    let mut runs = Vec::new();
    for run in ["first", "second"] {
        let out = work.join(run);
        for cmd in commands {
            run_cli(&[cmd], &config, &out, &work.join(format!("cache_{run}")))?;
        }
        runs.push(payloads(&out));
    }
    if runs[0].is_empty() {
        return Err("no output files".into());
    }
    if runs[0] == runs[1] {
        Ok(format!("{} files byte-identical across two runs", runs[0].len()))
    } else {
        let differing: Vec<&str> = runs[0]
            .iter()
            .zip(&runs[1])
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.as_str())
            .collect();
        Err(format!("differing outputs: {differing:?}"))
    }
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("basis dimensions", Box::new(basis_dimensions)),
        ("spectral symmetry", Box::new(spectral_symmetry)),
        ("resolution of identity", Box::new(resolution_of_identity)),
        ("factorization", Box::new(factorization_scaling)),
        ("three-point decomposition", Box::new(threepoint_decomposition)),
        ("crossing suppression", Box::new(|| crossing_suppression(work.path()))),
        ("brute-force cumulants", Box::new(brute_force_cumulants)),
        ("Weingarten moments", Box::new(weingarten_checks)),
        ("scar diagnostics", Box::new(scar_diagnostics)),
        ("determinism", Box::new(|| determinism(work.path()))),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
