//! Experiment orchestration: measurement cells per `N`, checker evaluation and
//! the artifact directory.

use crate::config::{Classical, ExperimentConfig, McInit, McModel, Mode, MonteCarlo, Quantum};
use crate::fit::fit_slope;
use crate::plot::emit_plots;
use crate::results::{read_csv, write_csv, ResultRow};
use chaoscope_core::bounds::{self, BoundCheck, BoundsConstants, CheckReport};
use chaoscope_core::correlation::{chaos_distance, correlation_error, NormRow};
use chaoscope_core::hierarchy::{verify_equivalence, HierarchyConfig};
use chaoscope_core::master::{evolve_master_at, marginals, FullState, MasterOptions};
use chaoscope_core::meanfield::solve_mean_field;
use chaoscope_core::montecarlo::{
    anisotropy, conservation_drift, conserved_quantities, estimate_pair_correlation, estimate_relaxation_rate,
    maxwell_anisotropy_rate, simulate_kac, simulate_soft_spheres, CrossSection, KacEnsemble, SoftSphereEnsemble,
    ThinningOptions, Vec3,
};
use chaoscope_core::quantum::{
    evolve_von_neumann_at, quantum_chaos_distance, quantum_correlation_error, solve_hartree, trace_norm, CMatrix,
    Complex, DensityMatrix,
};
use chaoscope_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::Path;

pub const DEFAULT_HARTREE_DT: f64 = 1e-3;
/// Relative momentum and energy drift tolerated per replica.
pub const CONSERVATION_TOL: f64 = 1e-8;
pub const FREE_FLIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub entries: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub quantity: String,
    pub j: usize,
    pub t: f64,
    pub slope: f64,
    pub ci95: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: String,
    pub config_hash: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub slopes: Vec<SlopeReport>,
}

/// Checker verdicts plus the bound entries used for plot overlays.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: Report,
    pub bounds: Vec<BoundCheck>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub evaluation: Evaluation,
    /// Extra binary artifacts, relative path and bytes.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

struct Cell {
    rows: Vec<ResultRow>,
    artifacts: Vec<(String, Vec<u8>)>,
}

impl Cell {
    fn rows(rows: Vec<ResultRow>) -> Self {
        Self { rows, artifacts: Vec::new() }
    }
}

/// Per-`N` seed, fixed by the run seed.
pub fn cell_seed(seed: u64, n: usize) -> u64 {
    let mut z = seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn with_zero(times: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(times.iter().copied()).collect()
}

fn one_particle(state: &FullState) -> Result<Vec<f64>> {
    Ok(marginals(state, 1)?.remove(0).into_vec())
}

fn classical_dt(cfg: &ExperimentConfig, c: &Classical, n: usize) -> f64 {
    cfg.dt.unwrap_or_else(|| MasterOptions::default_for(&c.kernel, n).dt)
}

fn exact_cell(cfg: &ExperimentConfig, c: &Classical, n: usize) -> Result<Cell> {
    let state0 = c.initial_state(n, cfg.mem_cap)?;
    let f0 = one_particle(&state0)?;
    let checkpoints = with_zero(&cfg.times);
    let dt = classical_dt(cfg, c, n);
    let states = evolve_master_at(&c.kernel, &c.k0, &state0, &checkpoints, &MasterOptions { dt, mem_cap: cfg.mem_cap })?;
    let mut rows = Vec::new();
    for (state, &t) in states.iter().zip(&checkpoints) {
        let f = solve_mean_field(&c.kernel, &c.k0, &f0, t, dt)?.last().to_vec();
        let margs = marginals(state, cfg.j_max)?;
        let family = correlation_error(&margs, &f)?;
        let norms = family.norms();
        for j in 1..=cfg.j_max {
            rows.push(ResultRow::new(n, j, t, "E_norm", norms[j]));
        }
        for j in 1..=cfg.j_max {
            rows.push(ResultRow::new(n, j, t, "chaos", chaos_distance(&margs[j - 1], &f)?));
        }
        // diagnostic only: factorization against F_1^N instead of the mean field
        for j in 1..=cfg.j_max {
            rows.push(ResultRow::new(n, j, t, "chaos_self", chaos_distance(&margs[j - 1], margs[0].data())?));
        }
    }
    Ok(Cell::rows(rows))
}

fn verify_cell(cfg: &ExperimentConfig, c: &Classical, n: usize) -> Result<Cell> {
    let state0 = c.initial_state(n, cfg.mem_cap)?;
    let f0 = one_particle(&state0)?;
    let hcfg = HierarchyConfig::new(n, cfg.j_max, c.kernel.clone(), c.k0.clone())?;
    let report = verify_equivalence(&hcfg, &state0, &f0, &cfg.times, classical_dt(cfg, c, n))?;
    Ok(Cell::rows(report.entries.iter().map(|d| ResultRow::new(n, d.j, d.t, "discrepancy", d.value)).collect()))
}

fn pauli_x() -> CMatrix {
    let (o, z) = (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
    CMatrix::from_row_slice(2, 2, &[z, o, o, z])
}

/// `(h0, ρ0)` for one qubit.
pub fn quantum_initial(q: &Quantum) -> Result<(CMatrix, DensityMatrix)> {
    let psi = [
        Complex::new((q.theta / 2.0).cos(), 0.0),
        Complex::from_polar((q.theta / 2.0).sin(), q.phi),
    ];
    Ok((pauli_x() * Complex::new(q.field, 0.0), DensityMatrix::pure(&psi)?))
}

fn quantum_cell(cfg: &ExperimentConfig, q: &Quantum, n: usize) -> Result<Cell> {
    let (h0, rho1) = quantum_initial(q)?;
    let rho0 = DensityMatrix::product(&rho1, n, q.dim_cap)?;
    let checkpoints = with_zero(&cfg.times);
    let states = evolve_von_neumann_at(&h0, &q.pair, &rho0, &checkpoints, q.dim_cap)?;
    let dt = cfg.dt.unwrap_or(DEFAULT_HARTREE_DT);
    let mut rows = Vec::new();
    for (state, &t) in states.iter().zip(&checkpoints) {
        let hartree = solve_hartree(&h0, &q.pair, &rho1, t, dt)?;
        let rho = hartree.last();
        let margs: Vec<CMatrix> =
            (1..=cfg.j_max).map(|j| state.partial_trace(j).map(|m| m.matrix().clone())).collect::<Result<_>>()?;
        for j in 1..=cfg.j_max {
            rows.push(ResultRow::new(n, j, t, "quantum_chaos", quantum_chaos_distance(&margs[j - 1], rho, j)?));
        }
        let errors = quantum_correlation_error(&margs, rho)?;
        for j in 1..=cfg.j_max {
            rows.push(ResultRow::new(n, j, t, "quantum_E_norm", trace_norm(&errors[j])?));
        }
    }
    Ok(Cell::rows(rows))
}

fn phi(cap: f64) -> impl Fn(Vec3) -> f64 {
    move |v: Vec3| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).min(cap)
}

fn replica_slices(velocities: &[Vec3], n: usize) -> Vec<&[Vec3]> {
    velocities.chunks(n).collect()
}

fn pair_row(n: usize, t: f64, velocities: &[Vec3], mc: &MonteCarlo, seed: u64) -> Result<ResultRow> {
    let reps = replica_slices(velocities, n);
    let (value, stderr) = estimate_pair_correlation(n, &reps, phi(mc.phi_cap), phi(mc.phi_cap), mc.bootstrap, seed)?;
    Ok(ResultRow::new(n, 2, t, "pair_correlation", value).with_stderr(stderr))
}

fn kac_cell(cfg: &ExperimentConfig, mc: &MonteCarlo, n: usize) -> Result<Cell> {
    let seed = cell_seed(cfg.seed, n);
    let mut ens = match mc.init {
        McInit::Shell { speed } => KacEnsemble::shell(n, mc.replicas, speed, seed)?,
        McInit::Gaussian { sigma } => KacEnsemble::gaussian(n, mc.replicas, sigma, seed)?,
    };
    let opts = ThinningOptions { majorant_factor: mc.majorant_factor };
    let conserved = |e: &KacEnsemble| -> Vec<(Vec3, f64)> {
        (0..e.replicas()).map(|r| conserved_quantities(e.replica(r))).collect()
    };
    let aniso = |e: &KacEnsemble| -> Vec<f64> { (0..e.replicas()).map(|r| anisotropy(e.replica(r))).collect() };
    let before = conserved(&ens);
    let x0 = aniso(&ens);
    let mut rows = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        simulate_kac(&mut ens, &mc.cross_section, t, &opts)?;
        rows.push(pair_row(n, t, ens.velocities(), mc, seed.wrapping_add(1 + k as u64))?);
        let (dp, de) = conservation_drift(&before, &conserved(&ens), n);
        rows.push(ResultRow::new(n, 0, t, "momentum_drift", dp));
        rows.push(ResultRow::new(n, 0, t, "energy_drift", de));
        if mc.check_rate {
            let (rate, se) = estimate_relaxation_rate(&x0, &aniso(&ens), t, mc.bootstrap, seed.wrapping_sub(1 + k as u64))?;
            rows.push(ResultRow::new(n, 0, t, "anisotropy_rate", rate).with_stderr(se));
        }
    }
    let mut snapshot = Vec::new();
    ens.write_snapshot(&mut snapshot)?;
    Ok(Cell { rows, artifacts: vec![(format!("snapshots/kac_N{n}.bin"), snapshot)] })
}

fn soft_cell(cfg: &ExperimentConfig, mc: &MonteCarlo, n: usize) -> Result<Cell> {
    let seed = cell_seed(cfg.seed, n);
    let mut ens = SoftSphereEnsemble::random_box(n, mc.replicas, mc.box_side, seed)?;
    let opts = ThinningOptions { majorant_factor: mc.majorant_factor };
    let free = mc.cutoff.sup() == 0.0;
    let (x0, v0) = (ens.positions().to_vec(), ens.velocities().to_vec());
    let conserved = |vs: &[Vec3]| -> Vec<(Vec3, f64)> { vs.chunks(n).map(conserved_quantities).collect() };
    let before = conserved(&v0);
    let mut rows = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        simulate_soft_spheres(&mut ens, &mc.cross_section, &mc.cutoff, t, &opts)?;
        rows.push(pair_row(n, t, ens.velocities(), mc, seed.wrapping_add(1 + k as u64))?);
        let (dp, de) = conservation_drift(&before, &conserved(ens.velocities()), n);
        rows.push(ResultRow::new(n, 0, t, "momentum_drift", dp));
        rows.push(ResultRow::new(n, 0, t, "energy_drift", de));
        if free {
            let mut err: f64 = 0.0;
            for ((x, v), (x1, v1)) in x0.iter().zip(&v0).zip(ens.positions().iter().zip(ens.velocities())) {
                for c in 0..3 {
                    let scale = 1.0 + x[c].abs() + (v[c] * t).abs();
                    err = err.max((x1[c] - (x[c] + v[c] * t)).abs() / scale).max((v1[c] - v[c]).abs());
                }
            }
            rows.push(ResultRow::new(n, 0, t, "free_flight_error", err));
        }
    }
    let mut snapshot = Vec::new();
    ens.write_snapshot(&mut snapshot)?;
    Ok(Cell { rows, artifacts: vec![(format!("snapshots/soft_N{n}.bin"), snapshot)] })
}

fn cell(cfg: &ExperimentConfig, n: usize) -> Result<Cell> {
    let missing = || Error::Argument(format!("config has no model section for `{}`", cfg.mode));
    match cfg.mode {
        Mode::ExactRun | Mode::ScalingSweep => exact_cell(cfg, cfg.classical.as_ref().ok_or_else(missing)?, n),
        Mode::VerifyHierarchy => verify_cell(cfg, cfg.classical.as_ref().ok_or_else(missing)?, n),
        Mode::QuantumRun => quantum_cell(cfg, cfg.quantum.as_ref().ok_or_else(missing)?, n),
        Mode::McRun => {
            let mc = cfg.mc.as_ref().ok_or_else(missing)?;
            match mc.model {
                McModel::Kac => kac_cell(cfg, mc, n),
                McModel::Soft => soft_cell(cfg, mc, n),
            }
        }
    }
}

/// Runs every `N` cell on the rayon pool and evaluates the checkers.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let cells: Vec<Cell> = cfg.ns.par_iter().map(|&n| cell(cfg, n)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for c in cells {
        rows.extend(c.rows);
        artifacts.extend(c.artifacts);
    }
    let evaluation = evaluate(cfg, &rows)?;
    Ok(RunOutput { rows, evaluation, artifacts })
}

fn norm_rows(rows: &[ResultRow], quantity: &str, n: usize) -> Vec<NormRow> {
    rows.iter()
        .filter(|r| r.quantity == quantity && r.n == n)
        .map(|r| NormRow { n: r.n, j: r.j, t: r.t, value: r.value })
        .collect()
}

fn report_check(name: &str, result: Result<CheckReport>, bounds: &mut Vec<BoundCheck>) -> Result<Check> {
    match result {
        Ok(report) => {
            let failures = report.failures();
            let detail = if report.pass {
                format!("{} entries within bound", report.entries.len())
            } else {
                format!("{} of {} entries exceed the bound at (j, t) = {:?}", failures.len(), report.entries.len(), failures)
            };
            let entries = serde_json::to_value(&report.entries).map_err(|e| Error::Validation(e.to_string()))?;
            bounds.extend(report.entries);
            Ok(Check { name: name.to_string(), pass: report.pass, detail, entries })
        }
        Err(Error::Hypothesis(msg)) => Ok(Check { name: name.to_string(), pass: false, detail: msg, entries: Value::Array(vec![]) }),
        Err(e) => Err(e),
    }
}

fn distinct_ns(rows: &[ResultRow]) -> Vec<usize> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

fn fitted_slopes(cfg: &ExperimentConfig, rows: &[ResultRow], quantities: &[&str]) -> Vec<SlopeReport> {
    let Some(&t) = cfg.times.last() else { return Vec::new() };
    let mut out = Vec::new();
    for &quantity in quantities {
        let mut js: Vec<usize> = rows.iter().filter(|r| r.quantity == quantity).map(|r| r.j).collect();
        js.sort_unstable();
        js.dedup();
        if let Some(wanted) = &cfg.slope_j {
            js.retain(|j| wanted.contains(j));
        }
        for j in js {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.quantity == quantity && r.j == j && r.t == t)
                .map(|r| (r.n as f64, r.value.abs()))
                .collect();
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Ok(fit) = fit_slope(&x, &y) {
                out.push(SlopeReport { quantity: quantity.to_string(), j, t, slope: fit.slope, ci95: fit.ci95, points: fit.points });
            }
        }
    }
    out
}

fn slope_check(cfg: &ExperimentConfig, slopes: &[SlopeReport]) -> Option<Check> {
    let (lo, hi) = cfg.expect_slope?;
    let bad: Vec<String> = slopes
        .iter()
        .filter(|s| !(lo..=hi).contains(&s.slope))
        .map(|s| format!("{} j={}: {:.4}", s.quantity, s.j, s.slope))
        .collect();
    let pass = !slopes.is_empty() && bad.is_empty();
    let detail = if slopes.is_empty() {
        "no slope could be fitted".to_string()
    } else if pass {
        format!("{} slopes within [{lo}, {hi}]", slopes.len())
    } else {
        format!("outside [{lo}, {hi}]: {}", bad.join("; "))
    };
    Some(Check { name: "slope".into(), pass, detail, entries: serde_json::to_value(slopes).unwrap_or(Value::Null) })
}

fn threshold_check(name: &str, rows: &[ResultRow], quantities: &[&str], tol: f64) -> Check {
    let selected: Vec<&ResultRow> = rows.iter().filter(|r| quantities.contains(&r.quantity.as_str())).collect();
    let max = selected.iter().map(|r| r.value).fold(0.0, f64::max);
    let pass = selected.iter().all(|r| r.value <= tol);
    Check {
        name: name.to_string(),
        pass,
        detail: format!("max {max:e} against tolerance {tol:e} over {} rows", selected.len()),
        entries: serde_json::to_value(&selected).unwrap_or(Value::Null),
    }
}

fn rate_check(mc: &MonteCarlo, rows: &[ResultRow]) -> Check {
    let name = "anisotropy_rate".to_string();
    let CrossSection::Maxwell { b0 } = mc.cross_section else {
        return Check { name, pass: true, detail: "no closed-form rate for this cross-section".into(), entries: Value::Null };
    };
    let oracle = maxwell_anisotropy_rate(b0);
    let selected: Vec<&ResultRow> = rows.iter().filter(|r| r.quantity == "anisotropy_rate").collect();
    let within = |r: &ResultRow| r.stderr.is_some_and(|se| (r.value - oracle).abs() <= 3.0 * se);
    let pass = !selected.is_empty() && selected.iter().all(|r| within(r));
    let detail = selected
        .iter()
        .map(|r| format!("N={} t={}: {:.5} ± {:.5} vs {oracle:.5}", r.n, r.t, r.value, r.stderr.unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join("; ");
    Check { name, pass, detail, entries: serde_json::to_value(&selected).unwrap_or(Value::Null) }
}

/// Applies every enabled checker to `rows`. The result depends only on the
/// config and the rows, so it can be reproduced from `results.csv` alone.
pub fn evaluate(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<Evaluation> {
    let constants: BoundsConstants = bounds::compute_constants(cfg.c0, cfg.b0)?;
    let mut checks = Vec::new();
    let mut bound_entries = Vec::new();
    let slopes = match cfg.mode {
        Mode::ExactRun | Mode::ScalingSweep => {
            let norm_v = cfg.classical.as_ref().map(|c| c.kernel.operator_norm()).unwrap_or(0.0);
            for n in distinct_ns(rows) {
                let e = bounds::check_main_theorem(&norm_rows(rows, "E_norm", n), &constants, norm_v, n);
                checks.push(report_check(&format!("main_theorem N={n}"), e, &mut bound_entries)?);
                let c = bounds::check_corollary(&norm_rows(rows, "chaos", n), &constants, norm_v, n);
                checks.push(report_check(&format!("corollary N={n}"), c, &mut bound_entries)?);
            }
            fitted_slopes(cfg, rows, &["E_norm", "chaos"])
        }
        Mode::VerifyHierarchy => {
            checks.push(threshold_check("hierarchy_equivalence", rows, &["discrepancy"], cfg.tolerance));
            Vec::new()
        }
        Mode::QuantumRun => {
            let q = cfg.quantum.as_ref().ok_or_else(|| Error::Argument("missing quantum model".into()))?;
            for n in distinct_ns(rows) {
                let r = bounds::check_quantum_chaos(
                    &norm_rows(rows, "quantum_chaos", n),
                    &constants,
                    q.pair.norm_inf(),
                    q.pair.hbar(),
                    n,
                );
                checks.push(report_check(&format!("quantum_chaos N={n}"), r, &mut bound_entries)?);
            }
            fitted_slopes(cfg, rows, &["quantum_chaos", "quantum_E_norm"])
        }
        Mode::McRun => {
            let mc = cfg.mc.as_ref().ok_or_else(|| Error::Argument("missing Monte Carlo model".into()))?;
            checks.push(threshold_check("conservation", rows, &["momentum_drift", "energy_drift"], CONSERVATION_TOL));
            if rows.iter().any(|r| r.quantity == "free_flight_error") {
                checks.push(threshold_check("free_flight", rows, &["free_flight_error"], FREE_FLIGHT_TOL));
            }
            if mc.check_rate {
                checks.push(rate_check(mc, rows));
            }
            fitted_slopes(cfg, rows, &["pair_correlation"])
        }
    };
    checks.extend(slope_check(cfg, &slopes));
    let pass = checks.iter().all(|c| c.pass);
    let report = Report {
        mode: cfg.mode.name().to_string(),
        config_hash: cfg.hash.clone(),
        seed: cfg.seed,
        pass,
        checks,
        slopes,
    };
    Ok(Evaluation { report, bounds: bound_entries })
}

fn write_plots(dir: &Path, rows: &[ResultRow], bounds: &[BoundCheck]) -> Result<()> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    for (name, svg) in emit_plots(rows, bounds) {
        fs::write(plots.join(name), svg)?;
    }
    Ok(())
}

fn to_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report).map(|s| s + "\n").map_err(|e| Error::Validation(e.to_string()))
}

/// Writes `config.copy`, `results.csv`, `report.json`, `plots/` and any
/// snapshots into `dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.copy"), &cfg.text)?;
    let mut csv = Vec::new();
    write_csv(&out.rows, &cfg.hash, cfg.seed, &mut csv)?;
    fs::write(dir.join("results.csv"), csv)?;
    fs::write(dir.join("report.json"), to_json(&out.evaluation.report)?)?;
    write_plots(dir, &out.rows, &out.evaluation.bounds)?;
    for (rel, bytes) in &out.artifacts {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Report> {
    let out = execute(cfg)?;
    write_artifacts(cfg, &out, dir)?;
    Ok(out.evaluation.report)
}

/// A finished run directory read back from disk.
pub struct Stored {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub report: Report,
}

pub fn load(dir: &Path, mem_cap: Option<usize>) -> Result<Stored> {
    let report: Report = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)
        .map_err(|e| Error::Validation(format!("report.json: {e}")))?;
    let text = fs::read_to_string(dir.join("config.copy"))?;
    let config = ExperimentConfig::parse(&text, report.mode.parse()?, Some(report.seed), mem_cap)?;
    let rows = read_csv(&fs::read_to_string(dir.join("results.csv"))?)?;
    Ok(Stored { config, rows, report })
}

/// Re-runs the checkers on a stored `results.csv`.
pub fn standalone_checks(dir: &Path, mem_cap: Option<usize>) -> Result<(Report, Report)> {
    let stored = load(dir, mem_cap)?;
    let fresh = evaluate(&stored.config, &stored.rows)?.report;
    Ok((fresh, stored.report))
}

/// Regenerates `plots/` from a stored run.
pub fn replot(dir: &Path, mem_cap: Option<usize>) -> Result<()> {
    let stored = load(dir, mem_cap)?;
    let eval = evaluate(&stored.config, &stored.rows)?;
    write_plots(dir, &stored.rows, &eval.bounds)
}
