//! Subcommand execution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use stirap_core::sweep::conversion_efficiency;
use stirap_core::{cpt_state, evolve, map, optimize, sweep_eta, Amps, IntegrationError, StabilityError, SweepError};

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, write_manifest, CsvOut};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Cpt,
    StabilityMap,
    Sweep,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Cpt => "cpt",
            Command::StabilityMap => "stability-map",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
        }
    }

    pub fn csv_name(self) -> &'static str {
        match self {
            Command::Evolve => "trajectory.csv",
            Command::Cpt => "cpt.csv",
            Command::StabilityMap => "stability_map.csv",
            Command::Sweep => "sweep.csv",
            Command::Optimize => "optimize.csv",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrationError),
    #[error("stability analysis failed: {0}")]
    Stability(#[from] StabilityError),
    #[error("optimization failed: {0}")]
    Sweep(#[from] SweepError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot build thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Integration(_) | CliError::Stability(_) | CliError::Sweep(_) => 3,
            CliError::Io { .. } | CliError::Threads(_) => 1,
        }
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct Report {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub results: BTreeMap<String, Value>,
}

/// Runs `command` on the rayon pool sized by `config.threads` and writes the
/// CSV plus `manifest.json` into `out`.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Report, CliError> {
    std::fs::create_dir_all(out).map_err(io_at(out))?;
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Threads(e.to_string()))?;
    let csv = out.join(command.csv_name());
    let results = pool.install(|| match command {
        Command::Evolve => run_evolve(config, &csv),
        Command::Cpt => run_cpt(config, &csv),
        Command::StabilityMap => run_map(config, &csv),
        Command::Sweep => run_sweep(config, &csv),
        Command::Optimize => run_optimize(config, &csv),
    })?;

    let mut record = config.to_record();
    record.insert("meta_command".into(), Value::from(command.name()));
    record.insert("meta_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    record.insert("meta_threads".into(), Value::from(pool.current_num_threads()));
    record.insert("meta_wall_time_s".into(), Value::from(started.elapsed().as_secs_f64()));
    record.extend(results.iter().map(|(k, v)| (k.clone(), v.clone())));
    let manifest = out.join("manifest.json");
    write_manifest(&manifest, &record).map_err(io_at(&manifest))?;
    Ok(Report { csv, manifest, results })
}

type Results = Result<BTreeMap<String, Value>, CliError>;

fn run_evolve(c: &RunConfig, path: &Path) -> Results {
    let p = &c.params;
    let pulses = p.pulses();
    let tr = evolve(p, &pulses, Amps::atomic(), c.t_start, c.t_end, &c.evolve)?;

    let header = [
        "t", "t_over_tau", "re_a", "im_a", "re_b", "im_b", "re_g", "im_g", "pop_a", "pop_b", "pop_g", "norm", "omega1", "omega2",
        "delta", "cpt_pop_a", "cpt_pop_g",
    ];
    let io = io_at(path);
    let mut w = CsvOut::create(path, &header).map_err(&io)?;
    for s in &tr.samples {
        let a = &s.amps;
        w.row(&[
            num(s.t),
            num(s.t / p.tau),
            num(a.a.re),
            num(a.a.im),
            num(a.b.re),
            num(a.b.im),
            num(a.g.re),
            num(a.g.im),
            num(a.pop_a()),
            num(a.pop_b()),
            num(a.pop_g()),
            num(s.norm),
            num(s.omega1),
            num(s.omega2),
            num(s.delta),
            num(s.cpt_pop_a),
            num(s.cpt_pop_g),
        ])
        .map_err(&io)?;
    }
    w.finish().map_err(&io)?;

    let last = tr.samples.last().expect("at least two samples");
    let mut r = BTreeMap::new();
    r.insert("result_eta".into(), Value::from(tr.eta));
    r.insert("result_pop_g_final".into(), Value::from(last.amps.pop_g()));
    r.insert("result_norm_final".into(), Value::from(last.norm));
    r.insert("result_max_pop_b".into(), Value::from(tr.max_pop_b()));
    r.insert("result_steps_accepted".into(), Value::from(tr.stats.accepted));
    r.insert("result_steps_rejected".into(), Value::from(tr.stats.rejected));

    let mut hits = Vec::new();
    let near = |eta: f64| c.eta_target.is_some_and(|x| (eta - x).abs() <= c.eta_tolerance);
    if near(tr.eta) {
        hits.push(p.gamma_b);
    }

    // the same sequence under other decay rates, Δ₁/γ_b held fixed
    if !c.alt_gamma_b.is_empty() {
        let ratio = if p.gamma_b > 0.0 { p.delta1 / p.gamma_b } else { 0.0 };
        let mut deltas = Vec::new();
        let mut etas = Vec::new();
        for &g in &c.alt_gamma_b {
            let mut q = *p;
            q.gamma_b = g;
            q.delta1 = if p.gamma_b > 0.0 { ratio * g } else { p.delta1 };
            let eta = conversion_efficiency(&q, &c.evolve)?;
            if near(eta) {
                hits.push(g);
            }
            deltas.push(q.delta1);
            etas.push(eta);
        }
        r.insert("result_alt_gamma_b".into(), Value::from(c.alt_gamma_b.clone()));
        r.insert("result_alt_delta1".into(), Value::from(deltas));
        r.insert("result_alt_eta".into(), Value::from(etas));
    }
    if c.eta_target.is_some() {
        r.insert("result_eta_target_met_gamma_b".into(), Value::from(hits));
    }
    Ok(r)
}

fn run_cpt(c: &RunConfig, path: &Path) -> Results {
    let p = &c.params;
    let io = io_at(path);
    let mut w = CsvOut::create(path, &["ratio", "pop_a", "pop_g", "amp_a", "amp_g", "delta", "mu_a"]).map_err(&io)?;
    for r in c.cpt_ratio.values() {
        // unit bound-bound coupling: only the ratio matters
        let pt = cpt_state(r, 1.0, p).map_err(|e| ConfigError::Invalid { key: "cpt_ratio".into(), reason: e.to_string() })?;
        w.row(&[num(r), num(pt.pop_a), num(pt.pop_g), num(pt.amp_a.re), num(pt.amp_g.re), num(pt.delta), num(pt.mu_a)])
            .map_err(&io)?;
    }
    w.finish().map_err(&io)?;
    Ok(BTreeMap::new())
}

fn run_map(c: &RunConfig, path: &Path) -> Results {
    let m = map(&c.params, &c.map_ratio.values(), &c.map_detuning.values(), &c.stability)?;
    let io = io_at(path);
    let mut w =
        CsvOut::create(path, &["omega2_over_omega1", "delta1_over_omega1", "max_growth_rate", "unstable"]).map_err(&io)?;
    let mut unstable = 0usize;
    for (ratio, detuning, cell) in m.iter() {
        unstable += cell.unstable as usize;
        w.row(&[num(ratio), num(detuning), num(cell.max_growth_rate), cell.unstable.to_string()]).map_err(&io)?;
    }
    w.finish().map_err(&io)?;
    let max_growth = m.cells.iter().map(|c| c.max_growth_rate).fold(0.0, f64::max);
    Ok(BTreeMap::from([
        ("result_unstable_cells".to_string(), Value::from(unstable)),
        ("result_max_growth_rate".to_string(), Value::from(max_growth)),
    ]))
}

fn run_sweep(c: &RunConfig, path: &Path) -> Results {
    let p = &c.params;
    let delta1: Vec<f64> = c.sweep_delta1_over_gamma_b.values().iter().map(|x| x * p.gamma_b).collect();
    let s = sweep_eta(p, &delta1, &c.sweep_t1, p.t2, &c.evolve)?;
    let io = io_at(path);
    let mut w = CsvOut::create(path, &["delta1", "t1", "eta", "status"]).map_err(&io)?;
    for cell in &s.cells {
        w.row(&[num(cell.delta1), num(cell.t1), num(cell.eta().unwrap_or(f64::NAN)), cell.status().to_string()])
            .map_err(&io)?;
    }
    w.finish().map_err(&io)?;
    let mut r = BTreeMap::new();
    r.insert("result_failed_cells".into(), Value::from(s.cells.iter().filter(|c| c.eta().is_none()).count()));
    if let Some((d, t1, eta)) = s.best() {
        r.insert("result_best_delta1".into(), Value::from(d));
        r.insert("result_best_t1".into(), Value::from(t1));
        r.insert("result_best_eta".into(), Value::from(eta));
    }
    Ok(r)
}

fn run_optimize(c: &RunConfig, path: &Path) -> Results {
    let p = &c.params;
    let o = optimize(p, c.opt_delta1, c.opt_delay, c.opt_budget, &c.evolve)?;
    let io = io_at(path);
    let mut w = CsvOut::create(path, &["delta1", "delay", "t1", "eta", "status"]).map_err(&io)?;
    for e in &o.evaluations {
        let (eta, status) = match &e.outcome {
            Ok(eta) => (*eta, "ok"),
            Err(_) => (f64::NAN, "failed"),
        };
        w.row(&[num(e.delta1), num(e.delay), num(p.t2 + e.delay), num(eta), status.to_string()]).map_err(&io)?;
    }
    w.finish().map_err(&io)?;
    Ok(BTreeMap::from([
        ("result_delta1".to_string(), Value::from(o.delta1)),
        ("result_delay".to_string(), Value::from(o.delay)),
        ("result_t1".to_string(), Value::from(p.t2 + o.delay)),
        ("result_eta".to_string(), Value::from(o.eta)),
        ("result_coarse_eta".to_string(), Value::from(o.coarse_eta)),
        ("result_evaluations".to_string(), Value::from(o.evaluations.len())),
    ]))
}
