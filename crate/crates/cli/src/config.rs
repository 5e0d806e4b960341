//! Experiment configuration: flat `key = value` text validated up front.

use chaoscope_core::kv::KeyValues;
use chaoscope_core::master::{FullState, DEFAULT_MEM_CAP};
use chaoscope_core::montecarlo::{CrossSection, Cutoff};
use chaoscope_core::quantum::{DEFAULT_DIM_CAP, PairHamiltonian};
use chaoscope_core::tensor::checked_len;
use chaoscope_core::{Error, OneBodyGenerator, PairKernel, Result, StateSpace};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    ExactRun,
    VerifyHierarchy,
    ScalingSweep,
    QuantumRun,
    McRun,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ExactRun => "exact-run",
            Mode::VerifyHierarchy => "verify-hierarchy",
            Mode::ScalingSweep => "scaling-sweep",
            Mode::QuantumRun => "quantum-run",
            Mode::McRun => "mc-run",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact-run" => Mode::ExactRun,
            "verify-hierarchy" | "hierarchy-verify" => Mode::VerifyHierarchy,
            "scaling-sweep" => Mode::ScalingSweep,
            "quantum-run" => Mode::QuantumRun,
            "mc-run" => Mode::McRun,
            other => return Err(Error::Argument(format!("unknown mode `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Factorized(Vec<f64>),
    /// `w f0^{⊗N} + (1-w) f0b^{⊗N}`.
    Mixture { f0: Vec<f64>, f0b: Vec<f64>, weight: f64 },
    Table(PathBuf),
}

#[derive(Clone, Debug)]
pub struct Classical {
    pub kernel: PairKernel,
    pub k0: OneBodyGenerator,
    pub initial: Initial,
}

impl Classical {
    pub fn initial_state(&self, n: usize, mem_cap: usize) -> Result<FullState> {
        match &self.initial {
            Initial::Factorized(f0) => FullState::factorized(f0, n, mem_cap),
            Initial::Mixture { f0, f0b, weight } => {
                FullState::mixture(&[(*weight, f0.as_slice()), (1.0 - weight, f0b.as_slice())], n, mem_cap)
            }
            Initial::Table(path) => FullState::read_table(path, self.kernel.states(), n, mem_cap),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Quantum {
    pub pair: PairHamiltonian,
    /// Bloch angles of the pure one-qubit initial state.
    pub theta: f64,
    pub phi: f64,
    /// Coefficient of `σ_x` in `h0`.
    pub field: f64,
    pub dim_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McModel {
    Kac,
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum McInit {
    /// Every velocity uniform on `|v| = speed`.
    Shell { speed: f64 },
    Gaussian { sigma: [f64; 3] },
}

#[derive(Clone, Debug)]
pub struct MonteCarlo {
    pub model: McModel,
    pub replicas: usize,
    pub cross_section: CrossSection,
    pub init: McInit,
    pub bootstrap: usize,
    pub phi_cap: f64,
    pub majorant_factor: f64,
    pub cutoff: Cutoff,
    pub box_side: f64,
    pub check_rate: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub text: String,
    pub hash: String,
    pub seed: u64,
    pub ns: Vec<usize>,
    pub j_max: usize,
    pub times: Vec<f64>,
    pub dt: Option<f64>,
    pub c0: f64,
    pub b0: f64,
    pub tolerance: f64,
    pub expect_slope: Option<(f64, f64)>,
    pub slope_j: Option<Vec<usize>>,
    pub mem_cap: usize,
    pub classical: Option<Classical>,
    pub quantum: Option<Quantum>,
    pub mc: Option<MonteCarlo>,
}

const COMMON: &[&str] = &["mode", "seed", "N", "j_max", "t", "dt", "C0", "B0", "tolerance", "expect_slope", "slope_j"];
const CLASSICAL: &[&str] = &["S", "preset", "beta", "lambda", "k0", "initial", "f0", "f0b", "mix_weight", "initial_table"];
const QUANTUM: &[&str] = &["d", "g", "hbar", "theta", "phi", "field"];
const MC: &[&str] = &[
    "model", "replicas", "cross_section", "b0", "init", "speed", "sigma", "bootstrap", "phi_cap", "majorant_factor",
    "cutoff_radius", "cutoff_height", "box", "check_rate",
];

/// First 16 hex digits of the SHA-256 of the configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn allowed_keys(mode: Mode) -> Vec<&'static str> {
    let extra = match mode {
        Mode::ExactRun | Mode::VerifyHierarchy | Mode::ScalingSweep => CLASSICAL,
        Mode::QuantumRun => QUANTUM,
        Mode::McRun => MC,
    };
    COMMON.iter().chain(extra).copied().collect()
}

fn check_probability(kv: &KeyValues, key: &str, f: &[f64], s: usize) -> Result<()> {
    if f.len() != s {
        return Err(kv.error(key, format!("needs {s} entries, got {}", f.len())));
    }
    if f.iter().any(|x| !(*x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(kv.error(key, "must be a probability vector"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates `text` for the command `mode`. A `mode` key in
    /// the file must agree with the command. `seed` and `mem_cap` override
    /// the file and the defaults.
    pub fn parse(text: &str, mode: Mode, seed: Option<u64>, mem_cap: Option<usize>) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if let Some(raw) = kv.raw("mode") {
            let file_mode: Mode = raw.parse().map_err(|e: Error| kv.error("mode", e.to_string()))?;
            let compatible = file_mode == mode || (file_mode == Mode::ExactRun && mode == Mode::ScalingSweep);
            if !compatible {
                return Err(kv.error("mode", format!("config is for `{file_mode}` but the command is `{mode}`")));
            }
        }
        let allowed = allowed_keys(mode);
        if let Some(bad) = kv.keys().find(|k| !allowed.contains(k)) {
            return Err(kv.error(bad, format!("not a recognized key for `{mode}`")));
        }

        let ns: Vec<usize> = kv.get_list("N")?.ok_or_else(|| kv.error("N", "missing required key"))?;
        if ns.is_empty() {
            return Err(kv.error("N", "needs at least one value"));
        }
        let min_n = if matches!(mode, Mode::McRun | Mode::QuantumRun) { 2 } else { 1 };
        if ns.iter().any(|n| *n < min_n) {
            return Err(kv.error("N", format!("every N must be ≥ {min_n}")));
        }
        if mode == Mode::ScalingSweep && ns.len() < 3 {
            return Err(kv.error("N", "a scaling sweep needs at least three N values"));
        }
        let smallest = *ns.iter().min().expect("nonempty");
        let j_max: usize = match mode {
            Mode::McRun => kv.get_or("j_max", 2)?,
            _ => kv.get("j_max")?.ok_or_else(|| kv.error("j_max", "missing required key"))?,
        };
        if j_max == 0 || j_max > smallest {
            return Err(kv.error("j_max", format!("must satisfy 1 ≤ j_max ≤ min N = {smallest}, got {j_max}")));
        }
        let times: Vec<f64> = kv.get_list("t")?.ok_or_else(|| kv.error("t", "missing required key"))?;
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(kv.error("t", "checkpoints must be positive and strictly increasing"));
        }
        let dt: Option<f64> = kv.get("dt")?;
        if dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(kv.error("dt", "must be positive"));
        }
        let c0 = kv.get_or("C0", 1.0)?;
        let b0 = kv.get_or("B0", 1.0)?;
        if !(c0 >= 1.0) {
            return Err(kv.error("C0", "must be ≥ 1"));
        }
        if !(b0 > 0.0) {
            return Err(kv.error("B0", "must be positive"));
        }
        let tolerance = kv.get_or("tolerance", 1e-6)?;
        let expect_slope = match kv.get_list::<f64>("expect_slope")? {
            None => None,
            Some(v) if v.len() == 2 && v[0] <= v[1] => Some((v[0], v[1])),
            Some(_) => return Err(kv.error("expect_slope", "needs `low, high` with low ≤ high")),
        };
        let slope_j = kv.get_list("slope_j")?;
        let seed = match seed {
            Some(s) => s,
            None => kv.get_or("seed", 0)?,
        };

        let mut cfg = Self {
            mode,
            text: text.to_string(),
            hash: config_hash(text),
            seed,
            ns,
            j_max,
            times,
            dt,
            c0,
            b0,
            tolerance,
            expect_slope,
            slope_j,
            mem_cap: mem_cap.unwrap_or(DEFAULT_MEM_CAP),
            classical: None,
            quantum: None,
            mc: None,
        };
        match mode {
            Mode::ExactRun | Mode::VerifyHierarchy | Mode::ScalingSweep => cfg.classical = Some(cfg.parse_classical(&kv)?),
            Mode::QuantumRun => cfg.quantum = Some(cfg.parse_quantum(&kv, mem_cap)?),
            Mode::McRun => cfg.mc = Some(parse_mc(&kv)?),
        }
        Ok(cfg)
    }

    fn parse_classical(&self, kv: &KeyValues) -> Result<Classical> {
        let kernel = PairKernel::from_config(kv)?;
        let s = kernel.states();
        for &n in &self.ns {
            match checked_len(s, n) {
                Some(len) if len <= self.mem_cap => {}
                _ => return Err(kv.error("N", format!("S^N for N = {n} exceeds the memory cap of {} entries", self.mem_cap))),
            }
        }
        let space = StateSpace::new(s)?;
        let k0 = match kv.get_list::<f64>("k0")? {
            None => OneBodyGenerator::zero(space),
            Some(m) => OneBodyGenerator::new(space, m).map_err(|e| kv.error("k0", e.to_string()))?,
        };
        let initial = match kv.raw("initial").unwrap_or("factorized") {
            "factorized" => {
                let f0: Vec<f64> = kv.get_list("f0")?.ok_or_else(|| kv.error("f0", "missing required key"))?;
                check_probability(kv, "f0", &f0, s)?;
                Initial::Factorized(f0)
            }
            "mixture" => {
                let f0: Vec<f64> = kv.get_list("f0")?.ok_or_else(|| kv.error("f0", "missing required key"))?;
                let f0b: Vec<f64> = kv.get_list("f0b")?.ok_or_else(|| kv.error("f0b", "missing required key"))?;
                check_probability(kv, "f0", &f0, s)?;
                check_probability(kv, "f0b", &f0b, s)?;
                let weight: f64 = kv.get_or("mix_weight", 0.5)?;
                if !(0.0..=1.0).contains(&weight) {
                    return Err(kv.error("mix_weight", "must lie in [0, 1]"));
                }
                Initial::Mixture { f0, f0b, weight }
            }
            "table" => {
                if self.ns.len() != 1 {
                    return Err(kv.error("initial", "a probability table fixes N; give a single N"));
                }
                let path: String = kv.get("initial_table")?.ok_or_else(|| kv.error("initial_table", "missing required key"))?;
                Initial::Table(PathBuf::from(path))
            }
            other => return Err(kv.error("initial", format!("unknown initial data `{other}`"))),
        };
        Ok(Classical { kernel, k0, initial })
    }

    fn parse_quantum(&self, kv: &KeyValues, cap: Option<usize>) -> Result<Quantum> {
        let d: usize = kv.get_or("d", 2)?;
        if d != 2 {
            return Err(kv.error("d", "only qubits (d = 2) have a coupling preset"));
        }
        let dim_cap = cap.unwrap_or(DEFAULT_DIM_CAP);
        for &n in &self.ns {
            if checked_len(d, n).is_none_or(|len| len > dim_cap) {
                return Err(kv.error("N", format!("d^N for N = {n} exceeds the cap of {dim_cap}")));
            }
        }
        let g: f64 = kv.get_or("g", 0.5)?;
        let hbar: f64 = kv.get_or("hbar", 1.0)?;
        let pair = PairHamiltonian::default_coupling(g, hbar).map_err(|e| kv.error("hbar", e.to_string()))?;
        Ok(Quantum {
            pair,
            theta: kv.get_or("theta", std::f64::consts::PI / 3.0)?,
            phi: kv.get_or("phi", 0.0)?,
            field: kv.get_or("field", 0.0)?,
            dim_cap,
        })
    }
}

fn parse_mc(kv: &KeyValues) -> Result<MonteCarlo> {
    let model = match kv.raw("model").unwrap_or("kac") {
        "kac" => McModel::Kac,
        "soft" => McModel::Soft,
        other => return Err(kv.error("model", format!("unknown model `{other}`"))),
    };
    let replicas: usize = kv.get_or("replicas", 200)?;
    if replicas < 10 {
        return Err(kv.error("replicas", "need at least 10 replicas for error bars"));
    }
    let b0: f64 = kv.get_or("b0", 1.0 / (4.0 * std::f64::consts::PI))?;
    let cross_section = CrossSection::from_name(kv.raw("cross_section").unwrap_or("maxwell"), b0)
        .map_err(|e| kv.error("cross_section", e.to_string()))?;
    let init = match kv.raw("init").unwrap_or("shell") {
        "shell" => McInit::Shell { speed: kv.get_or("speed", 3f64.sqrt())? },
        "gaussian" => {
            let sigma: Vec<f64> = kv.get_list("sigma")?.unwrap_or_else(|| vec![1.0; 3]);
            if sigma.len() != 3 || sigma.iter().any(|s| !(*s > 0.0)) {
                return Err(kv.error("sigma", "needs three positive standard deviations"));
            }
            McInit::Gaussian { sigma: [sigma[0], sigma[1], sigma[2]] }
        }
        other => return Err(kv.error("init", format!("unknown initial ensemble `{other}`"))),
    };
    let majorant_factor: f64 = kv.get_or("majorant_factor", 1.0)?;
    if !(majorant_factor >= 1.0) {
        return Err(kv.error("majorant_factor", "must be ≥ 1"));
    }
    let cutoff = Cutoff::new(kv.get_or("cutoff_radius", 0.0)?, kv.get_or("cutoff_height", 0.0)?)
        .map_err(|e| kv.error("cutoff_radius", e.to_string()))?;
    let box_side: f64 = kv.get_or("box", 1.0)?;
    if !(box_side > 0.0) {
        return Err(kv.error("box", "must be positive"));
    }
    Ok(MonteCarlo {
        model,
        replicas,
        cross_section,
        init,
        bootstrap: kv.get_or("bootstrap", 200)?,
        phi_cap: kv.get_or("phi_cap", 50.0)?,
        majorant_factor,
        cutoff,
        box_side,
        check_rate: kv.get_or("check_rate", false)?,
    })
}
