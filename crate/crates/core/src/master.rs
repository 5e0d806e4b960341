//! Exact integration of the `N`-particle master equation
//! `dF/dt = (K₀^N + V^N) F` with `V^N = (1/N) Σ_{i<j} V_{i,j}` on the full
//! dense state space `S^N`.

use crate::error::{Error, Result};
use crate::model::{OneBodyGenerator, PairKernel};
use crate::ode::{step_plan, Rk4};
use crate::tensor::{checked_len, digits_into, Tensor, SYMMETRY_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Default cap on `S^N` (dense entries).
pub const DEFAULT_MEM_CAP: usize = 1 << 24;
/// Entries below `-POSITIVITY_TOL` abort an evolution.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Allowed drift of the total probability over a run.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A symmetric probability vector over `S^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    tensor: Tensor,
}

fn check_cap(states: usize, n: usize, cap: usize) -> Result<usize> {
    match checked_len(states, n) {
        Some(len) if len <= cap => Ok(len),
        Some(len) => Err(Error::MemoryCap { entries: len as u128, cap }),
        None => Err(Error::MemoryCap { entries: (states as u128).saturating_pow(n as u32), cap }),
    }
}

impl FullState {
    /// `f0^{⊗N}`.
    pub fn factorized(f0: &[f64], n: usize, mem_cap: usize) -> Result<Self> {
        validate_probability(f0)?;
        if n == 0 {
            return Err(Error::Argument("N must be at least 1".into()));
        }
        check_cap(f0.len(), n, mem_cap)?;
        Ok(Self { tensor: Tensor::power(f0, n) })
    }

    /// `Σ_k w_k f_k^{⊗N}`: symmetric, and not a product unless all `f_k` agree.
    pub fn mixture(components: &[(f64, &[f64])], n: usize, mem_cap: usize) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument("mixture weights must be ≥ 0 and sum to 1".into()));
        }
        let mut acc: Option<Tensor> = None;
        for (w, f) in components {
            let mut part = Self::factorized(f, n, mem_cap)?.tensor;
            part.scale(*w);
            match acc.as_mut() {
                Some(t) if t.same_shape(&part) => t.add_scaled(&part, 1.0),
                Some(_) => return Err(Error::Dimension("mixture components differ in S".into())),
                None => acc = Some(part),
            }
        }
        Self::from_tensor(acc.expect("nonempty"))
    }

    /// Wraps an explicit table, validating positivity, normalization and
    /// permutation symmetry.
    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        if tensor.order() == 0 {
            return Err(Error::Argument("N must be at least 1".into()));
        }
        validate_probability(tensor.data())?;
        tensor.check_symmetric(SYMMETRY_TOL)?;
        Ok(Self { tensor })
    }

    /// Reads a flat text table (one value per line, row-major over `S^N`).
    pub fn read_table(path: &Path, states: usize, n: usize, mem_cap: usize) -> Result<Self> {
        check_cap(states, n, mem_cap)?;
        let text = std::fs::read_to_string(path)?;
        let mut data = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse { line: idx + 1, msg: format!("not a number: `{line}`") })?;
            data.push(v);
        }
        Self::from_tensor(Tensor::from_vec(states, n, data)?)
    }

    pub fn particles(&self) -> usize {
        self.tensor.order()
    }

    pub fn states(&self) -> usize {
        self.tensor.states()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn data(&self) -> &[f64] {
        self.tensor.data()
    }
}

pub(crate) fn validate_probability(f: &[f64]) -> Result<()> {
    if f.iter().any(|x| !x.is_finite() || *x < -1e-12) {
        return Err(Error::Validation("probability vector has negative or non-finite entries".into()));
    }
    let sum: f64 = f.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("probability vector sums to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterOptions {
    pub dt: f64,
    pub mem_cap: usize,
}

impl MasterOptions {
    /// `dt = min(10⁻³, 0.1 / (‖V‖ N))` with the default memory cap.
    pub fn default_for(kernel: &PairKernel, n: usize) -> Self {
        let norm = kernel.operator_norm();
        let dt = if norm > 0.0 { (0.1 / (norm * n as f64)).min(1e-3) } else { 1e-3 };
        Self { dt, mem_cap: DEFAULT_MEM_CAP }
    }

    pub fn with_dt(dt: f64) -> Self {
        Self { dt, mem_cap: DEFAULT_MEM_CAP }
    }
}

/// Writes `(K₀^N + V^N) F` into `out`.
pub fn master_rhs(kernel: &PairKernel, k0: &OneBodyGenerator, n: usize, f: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let scale = 1.0 / n as f64;
    for i in 0..n {
        for r in i + 1..n {
            kernel.accumulate_t(f, out, n, i, r, scale);
        }
    }
    if !k0.is_zero() {
        k0.accumulate(f, out, n, 1.0);
    }
}

/// Evolves `f0` to every time in `checkpoints` (nondecreasing, ≥ 0).
pub fn evolve_master_at(
    kernel: &PairKernel,
    k0: &OneBodyGenerator,
    f0: &FullState,
    checkpoints: &[f64],
    opts: &MasterOptions,
) -> Result<Vec<FullState>> {
    let n = f0.particles();
    let s = f0.states();
    if kernel.states() != s || k0.states() != s {
        return Err(Error::Dimension("kernel, K₀ and state disagree on S".into()));
    }
    check_cap(s, n, opts.mem_cap)?;
    if !(opts.dt > 0.0) {
        return Err(Error::Argument(format!("dt must be positive, got {}", opts.dt)));
    }
    if checkpoints.iter().any(|t| *t < 0.0) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("checkpoints must be nondecreasing and ≥ 0".into()));
    }
    let mut y = f0.data().to_vec();
    let mut rk = Rk4::new(y.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        let (steps, h) = step_plan(t, target, opts.dt);
        for _ in 0..steps {
            rk.step(t, h, &mut y, |_, f, d| master_rhs(kernel, k0, n, f, d));
            t += h;
            let min = y.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -POSITIVITY_TOL {
                return Err(Error::NegativeProbability { value: min, time: t });
            }
        }
        t = target;
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!("total probability drifted to {sum} at t = {t}")));
        }
        out.push(FullState { tensor: Tensor::from_vec(s, n, y.clone())? });
    }
    Ok(out)
}

/// Evolves `f0` to `t_final` with RK4 step `dt` and the default memory cap.
pub fn evolve_master(
    kernel: &PairKernel,
    k0: &OneBodyGenerator,
    f0: &FullState,
    t_final: f64,
    dt: f64,
) -> Result<FullState> {
    let mut states = evolve_master_at(kernel, k0, f0, &[t_final], &MasterOptions::with_dt(dt))?;
    Ok(states.pop().expect("one checkpoint"))
}

/// `F_j^N`: sums out particles `j+1..N`.
pub fn marginal(f: &FullState, j: usize) -> Result<Tensor> {
    let n = f.particles();
    if j == 0 || j > n {
        return Err(Error::Argument(format!("marginal order {j} outside 1..={n}")));
    }
    Ok(f.tensor.sum_trailing(j))
}

/// All marginals `F_1, ..., F_jmax`, computed by successive contraction.
pub fn marginals(f: &FullState, j_max: usize) -> Result<Vec<Tensor>> {
    let n = f.particles();
    if j_max == 0 || j_max > n {
        return Err(Error::Argument(format!("marginal order {j_max} outside 1..={n}")));
    }
    let mut out = vec![f.tensor.sum_trailing(j_max)];
    for _ in 1..j_max {
        let next = out.last().unwrap().contract_last();
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

/// Largest `‖F - F∘swap(i,k)‖_∞` over sampled particle transpositions; all
/// transpositions are used when there are at most `n_samples` of them.
pub fn check_symmetry(f: &FullState, n_samples: usize) -> f64 {
    let n = f.particles();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |k| (i, k))).collect();
    if pairs.len() > n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        pairs = (0..n_samples)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut k = rng.gen_range(0..n - 1);
                if k >= i {
                    k += 1;
                }
                (i.min(k), i.max(k))
            })
            .collect();
    }
    let s = f.states();
    let data = f.data();
    let mut digits = vec![0; n];
    let mut worst: f64 = 0.0;
    for (i, k) in pairs {
        let si = s.pow((n - 1 - i) as u32);
        let sk = s.pow((n - 1 - k) as u32);
        for (x, v) in data.iter().enumerate() {
            digits_into(x, s, &mut digits);
            let (a, b) = (digits[i], digits[k]);
            if a == b {
                continue;
            }
            let y = x + b * si + a * sk - a * si - b * sk;
            worst = worst.max((v - data[y]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;

    fn space(s: usize) -> StateSpace {
        StateSpace::new(s).unwrap()
    }

    #[test]
    fn swap_kernel_keeps_products_fixed() {
        let k = PairKernel::swap(space(3), 1.0).unwrap();
        let k0 = OneBodyGenerator::zero(space(3));
        let f0 = FullState::factorized(&[0.2, 0.3, 0.5], 4, DEFAULT_MEM_CAP).unwrap();
        let f = evolve_master(&k, &k0, &f0, 0.7, 1e-2).unwrap();
        assert!(f.tensor().max_abs_diff(f0.tensor()) < 1e-15);
    }

    #[test]
    fn zero_rates_keep_state_fixed() {
        let k = PairKernel::uniform(space(2), 0.0).unwrap();
        let k0 = OneBodyGenerator::zero(space(2));
        let f0 = FullState::factorized(&[0.7, 0.3], 5, DEFAULT_MEM_CAP).unwrap();
        let f = evolve_master(&k, &k0, &f0, 1.0, 1e-2).unwrap();
        assert_eq!(f, f0);
    }

    #[test]
    fn first_marginal_closed_form_for_uniform_kernel() {
        // The one-particle marginal closes: dF₁/dt = α(1,N) β (1/S - F₁).
        let (n, beta, t) = (4, 1.0, 1.0);
        let k = PairKernel::uniform(space(2), beta).unwrap();
        let k0 = OneBodyGenerator::zero(space(2));
        let f0 = [0.7, 0.3];
        let start = FullState::factorized(&f0, n, DEFAULT_MEM_CAP).unwrap();
        let f = evolve_master(&k, &k0, &start, t, 1e-3).unwrap();
        let m1 = marginal(&f, 1).unwrap();
        let alpha = (n as f64 - 1.0) / n as f64;
        for a in 0..2 {
            let expect = 0.5 + (f0[a] - 0.5) * (-alpha * beta * t).exp();
            assert!((m1.data()[a] - expect).abs() < 1e-12);
        }
        assert!((f.tensor().sum() - 1.0).abs() < 1e-12);
        assert!(check_symmetry(&f, 100) <= 1e-10);
    }

    #[test]
    fn nonzero_k0_drives_marginals() {
        let sp = space(2);
        let k = PairKernel::swap(sp, 1.0).unwrap();
        let k0 = OneBodyGenerator::new(sp, vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        let start = FullState::factorized(&[1.0, 0.0], 3, DEFAULT_MEM_CAP).unwrap();
        let f = evolve_master(&k, &k0, &start, 0.5, 1e-3).unwrap();
        // independent two-state flips: p(t) = (1 + e^{-2t})/2
        let expect = 0.5 * (1.0 + (-1.0f64).exp());
        assert!((marginal(&f, 1).unwrap().data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn memory_cap_and_bad_dt_rejected() {
        assert!(matches!(
            FullState::factorized(&[0.5, 0.5], 25, DEFAULT_MEM_CAP),
            Err(Error::MemoryCap { .. })
        ));
        let k = PairKernel::uniform(space(2), 1.0).unwrap();
        let k0 = OneBodyGenerator::zero(space(2));
        let f0 = FullState::factorized(&[0.5, 0.5], 3, DEFAULT_MEM_CAP).unwrap();
        assert!(evolve_master(&k, &k0, &f0, 1.0, 0.0).is_err());
        let opts = MasterOptions { dt: 0.1, mem_cap: 4 };
        assert!(matches!(evolve_master_at(&k, &k0, &f0, &[1.0], &opts), Err(Error::MemoryCap { .. })));
    }

    #[test]
    fn mixtures_are_symmetric_and_correlated() {
        let a: &[f64] = &[0.9, 0.1];
        let b: &[f64] = &[0.2, 0.8];
        let mix = FullState::mixture(&[(0.5, a), (0.5, b)], 3, DEFAULT_MEM_CAP).unwrap();
        let m1 = marginal(&mix, 1).unwrap();
        let m2 = marginal(&mix, 2).unwrap();
        assert!((m1.data()[0] - 0.55).abs() < 1e-15);
        assert!((m2.data()[0] - 0.5 * (0.81 + 0.04)).abs() < 1e-15);
        assert!((m2.data()[0] - m1.data()[0] * m1.data()[0]).abs() > 0.1);
        assert!(FullState::mixture(&[(0.5, a), (0.6, b)], 3, DEFAULT_MEM_CAP).is_err());
        assert!(FullState::mixture(&[(0.5, a), (0.5, &[0.2, 0.3, 0.5])], 3, DEFAULT_MEM_CAP).is_err());
    }

    #[test]
    fn oversized_step_reports_negative_probability() {
        let k = PairKernel::uniform(space(2), 50.0).unwrap();
        let k0 = OneBodyGenerator::zero(space(2));
        let f0 = FullState::factorized(&[1.0, 0.0], 4, DEFAULT_MEM_CAP).unwrap();
        let err = evolve_master(&k, &k0, &f0, 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::NegativeProbability { .. }), "{err}");
    }

    #[test]
    fn marginal_of_product_is_product() {
        let f = [0.1, 0.6, 0.3];
        let full = FullState::factorized(&f, 4, DEFAULT_MEM_CAP).unwrap();
        assert!(marginal(&full, 2).unwrap().max_abs_diff(&Tensor::power(&f, 2)) < 1e-16);
        assert_eq!(marginal(&full, 4).unwrap(), *full.tensor());
        assert!(marginal(&full, 0).is_err());
        assert!(marginal(&full, 5).is_err());
        let all = marginals(&full, 3).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all[2].max_abs_diff(&Tensor::power(&f, 3)) < 1e-16);
    }

    #[test]
    fn marginal_matches_nested_loops() {
        let s = 2;
        let raw: Vec<f64> = (0..16).map(|x| 1.0 + ((x * 7) % 5) as f64).collect();
        let t = Tensor::from_vec(s, 4, raw).unwrap().symmetrized();
        let total = t.sum();
        let mut norm = t.clone();
        norm.scale(1.0 / total);
        let full = FullState::from_tensor(norm.clone()).unwrap();
        let m = marginal(&full, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for c in 0..2 {
                    for d in 0..2 {
                        acc += norm.get(&[a, b, c, d]);
                    }
                }
                assert!((m.get(&[a, b]) - acc).abs() < 1e-15);
            }
        }
        assert!((m.l1_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetry_check() {
        let full = FullState::factorized(&[0.3, 0.7], 4, DEFAULT_MEM_CAP).unwrap();
        assert!(check_symmetry(&full, 10) < 1e-15);
        let mut t = full.tensor().clone();
        t.data_mut()[1] += 0.01;
        t.data_mut()[2] -= 0.01;
        let skewed = FullState { tensor: t };
        assert!(check_symmetry(&skewed, 10) > 0.0);
        assert!(check_symmetry(&skewed, 2) >= 0.0);
    }

    #[test]
    fn asymmetric_table_rejected() {
        let t = Tensor::from_vec(2, 2, vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!(FullState::from_tensor(t).is_err());
    }
}
