use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use scarlab::cache;
use scarlab::cumulants::{
    crossing_point, decompose_scar_correlator, default_pattern, factorization_test, loglog_slope,
    uniform_grid, DecompositionReport, ScarPair,
};
use scarlab::cumulants::decomposition::write_reports_csv;
use scarlab::haar::{
    check_first_moment, check_second_moment, check_typicality_scaling, test_inputs, HaarSampler,
};
use scarlab::sector::SECTOR_ID;
use scarlab::table::{fmt_float, write_row};
use scarlab::{select_scars, CacheStatus, PxpSystem, ScarSet};

use crate::config::ExperimentConfig;

/// Whether every numerical gate of a command held.
pub type Gate = bool;

pub struct Lab {
    pub cfg: ExperimentConfig,
    pub cache_dir: PathBuf,
}

impl Lab {
    fn system(&self, n: usize) -> Result<PxpSystem> {
        let (sys, status) = PxpSystem::load_or_build(n, &self.cache_dir)
            .with_context(|| format!("preparing spectrum for N={n}"))?;
        match status {
            CacheStatus::Hit => info!("N={n}: spectrum loaded from cache"),
            CacheStatus::Built => info!("N={n}: spectrum computed and cached"),
            CacheStatus::Rebuilt(reason) => {
                warn!("N={n}: discarded cached spectrum ({reason}); recomputed")
            }
        }
        Ok(sys)
    }

    fn scars(&self, sys: &PxpSystem, count: usize) -> Result<ScarSet> {
        Ok(select_scars(
            &sys.spectrum,
            &sys.sector,
            self.cfg.scar_method,
            count,
            self.cfg.band_fraction,
        )?)
    }

    fn output(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        std::fs::create_dir_all(&self.cfg.out_dir)
            .with_context(|| format!("creating {}", self.cfg.out_dir.display()))?;
        let path = self.cfg.out_dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let (path, mut w) = self.output(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}

fn done(path: &Path) {
    info!("wrote {}", path.display());
}

pub fn spectrum(ctx: &Lab) -> Result<Gate> {
    let n = ctx.cfg.n_sites;
    let start = Instant::now();
    let sys = ctx.system(n)?;
    let elapsed = start.elapsed().as_secs_f64();
    let bytes = std::fs::read(cache::cache_path(&ctx.cache_dir, n, SECTOR_ID))?;
    let checksum = cache::checksum_of(&bytes).context("cache file too short")?;

    let (path, mut w) = ctx.output(&format!("spectrum_n{n}.csv"))?;
    write_row(&mut w, &["index", "energy[J]"])?;
    for (k, e) in sys.spectrum.energies().iter().enumerate() {
        write_row(&mut w, &[k.to_string(), fmt_float(*e)])?;
    }
    w.flush()?;
    done(&path);
    println!(
        "N={n} sector={SECTOR_ID} dim={} E_min={} E_max={} checksum={checksum:016x} wall={elapsed:.3}s",
        sys.dim(),
        fmt_float(sys.spectrum.e_min()),
        fmt_float(sys.spectrum.e_max()),
    );
    Ok(true)
}

pub fn scars(ctx: &Lab) -> Result<Gate> {
    let n = ctx.cfg.n_sites;
    let sys = ctx.system(n)?;
    let set = ctx.scars(&sys, ctx.cfg.scar_count)?;
    let (path, mut w) = ctx.output(&format!("scars_n{n}.csv"))?;
    set.write_csv(&mut w)?;
    w.flush()?;
    done(&path);
    println!(
        "N={n} scars={:?} mean_entropy scar={} thermal={}",
        set.scar_indices,
        fmt_float(set.mean_scar_entropy()),
        fmt_float(set.mean_thermal_entropy())
    );
    Ok(true)
}

pub fn factorization(ctx: &Lab) -> Result<Gate> {
    let n = ctx.cfg.n_sites;
    let sys = ctx.system(n)?;
    let set = ctx.scars(&sys, ctx.cfg.scar_count)?;
    let kind = ctx.cfg.ensemble_kind(&sys.spectrum);
    let report = factorization_test(&sys.spectrum, &sys.observable, &set, n, kind, None)?;

    let (path, mut w) = ctx.output(&format!("factorization_n{n}.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    done(&path);

    let passed = report.frobenius_rel_error <= ctx.cfg.frobenius_gate;
    let path = ctx.write_json(
        &format!("factorization_n{n}.json"),
        &json!({
            "n_sites": n,
            "dim": sys.dim(),
            "ensemble": kind,
            "scars": report.scars,
            "frobenius_rel_error": report.frobenius_rel_error,
            "gate": ctx.cfg.frobenius_gate,
            "passed": passed,
        }),
    )?;
    done(&path);
    println!(
        "N={n} frobenius_rel_error={} gate={} {}",
        fmt_float(report.frobenius_rel_error),
        ctx.cfg.frobenius_gate,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

fn decomposition(ctx: &Lab, q: usize, name: &str) -> Result<Gate> {
    let n = ctx.cfg.n_sites;
    let pattern = ctx.cfg.pattern.clone().unwrap_or_else(|| default_pattern(q));
    if pattern.len() != q {
        bail!("pattern has {} entries, the {name} command needs {q}", pattern.len());
    }
    let sys = ctx.system(n)?;
    let set = ctx.scars(&sys, ctx.cfg.scar_count)?;
    let (a, b) = match ctx.cfg.pair {
        Some([a, b]) => (a, b),
        None => {
            let c = set.central_scar().context("no scars selected")?;
            (c, c)
        }
    };
    let pair = ScarPair::new(&sys.spectrum, &set, a, b, n)?;
    let grid = uniform_grid(ctx.cfg.t_max, ctx.cfg.n_points)?;
    let run = |factorized| -> Result<DecompositionReport> {
        Ok(decompose_scar_correlator(
            &sys.spectrum,
            &sys.observable,
            &set,
            &pair,
            &grid,
            &pattern,
            factorized,
        )?)
    };
    let (fact, exact) = (run(true)?, run(false)?);

    let (path, mut w) = ctx.output(&format!("{name}_n{n}.csv"))?;
    write_reports_csv(&mut w, &[("", &fact), ("unfactorized_", &exact)])?;
    w.flush()?;
    done(&path);
    let path = ctx.write_json(
        &format!("{name}_n{n}.json"),
        &json!({
            "n_sites": n,
            "a": a,
            "b": b,
            "beta_ab": pair.beta_ab,
            "pattern": pattern,
            "terms": fact.terms.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
            "factorized": {
                "max_abs_error": fact.max_abs_error,
                "max_rel_error": fact.max_rel_error,
            },
            "unfactorized": {
                "max_abs_error": exact.max_abs_error,
                "max_rel_error": exact.max_rel_error,
            },
        }),
    )?;
    done(&path);
    println!(
        "N={n} a={a} b={b} max_rel_error factorized={} unfactorized={}",
        fmt_float(fact.max_rel_error),
        fmt_float(exact.max_rel_error)
    );
    Ok(true)
}

pub fn threepoint(ctx: &Lab) -> Result<Gate> {
    decomposition(ctx, 3, "threepoint")
}

pub fn fourpoint(ctx: &Lab) -> Result<Gate> {
    decomposition(ctx, 4, "fourpoint")
}

pub fn crossing(ctx: &Lab) -> Result<Gate> {
    let mut points = Vec::new();
    for &n in &ctx.cfg.n_sweep {
        let sys = ctx.system(n)?;
        let set = ctx.scars(&sys, ctx.cfg.crossing_scar_count)?;
        points.push(crossing_point(&sys.observable, &set, n)?);
    }
    let (path, mut w) = ctx.output("crossing.csv")?;
    write_row(&mut w, &["N", "D", "crossing_aa[1]", "crossing_ab[1]"])?;
    for p in &points {
        write_row(
            &mut w,
            &[p.n_sites.to_string(), p.dim.to_string(), fmt_float(p.diagonal), fmt_float(p.adjacent)],
        )?;
    }
    w.flush()?;
    done(&path);

    let dims: Vec<f64> = points.iter().map(|p| p.dim as f64).collect();
    let diag: Vec<f64> = points.iter().map(|p| p.diagonal).collect();
    let adj: Vec<f64> = points.iter().map(|p| p.adjacent).collect();
    let (slope_aa, slope_ab) = (loglog_slope(&dims, &diag), loglog_slope(&dims, &adj));
    if points.len() < 2 {
        warn!("a single chain length gives no slope; reporting NaN");
    }
    let path = ctx.write_json(
        "crossing_fit.json",
        &json!({
            "n_sweep": ctx.cfg.n_sweep,
            "scar_count": ctx.cfg.crossing_scar_count,
            "points": points,
            // NaN is written as null
            "slope_aa": slope_aa,
            "slope_ab": slope_ab,
        }),
    )?;
    done(&path);
    println!("slope_aa={slope_aa} slope_ab={slope_ab}");
    Ok(true)
}

pub fn haar(ctx: &Lab) -> Result<Gate> {
    let cfg = &ctx.cfg;
    let d = cfg.haar_dim;
    let sampler = HaarSampler::new(d, cfg.seed)?;
    let (o, a, b) = test_inputs(d, cfg.seed);
    let first = check_first_moment(&sampler, cfg.haar_samples, &o)?;
    let second = check_second_moment(&sampler, cfg.haar_samples)?;
    let q1 = check_typicality_scaling(&sampler, cfg.haar_samples, &o, &a, &b, 1)?;
    let q2 = check_typicality_scaling(&sampler, cfg.haar_samples, &o, &a, &b, 2)?;

    let gate = cfg.sigma_gate;
    let checks = [
        ("first_moment", &first),
        ("second_moment", &second),
        ("typicality_q1", &q1),
        ("typicality_q2", &q2),
    ];
    let mut passed = true;
    for (name, r) in checks {
        let path = ctx.write_json(&format!("haar_{name}.json"), r)?;
        done(&path);
        let ok = r.passes(gate);
        passed &= ok;
        println!(
            "{name}: max_sigmas={:.3} gate={gate} {}",
            r.max_sigmas(),
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(passed)
}
