//! BBGKY and correlation hierarchies.
//!
//! The marginals obey
//!
//! ```text
//! ∂_t F_j = (K₀^j + T_j/N) F_j + α(j,N) C_{j+1}(F_{j+1}),   α(j,N) = (N-j)/N,
//! ```
//!
//! and the correlation errors obey the closed system
//!
//! ```text
//! ∂_t E_j = (K₀^j + T_j/N) E_j + D_j(E_j) + D_j¹(E_{j+1}) + D_j⁻¹(E_{j-1}) + D_j⁻²(E_{j-2})
//! ```
//!
//! driven by the mean-field solution `F(t)`. Expressions such as
//! `F^{⊗{i}} A_{J^i ∪ {j+1}}` are realized by placing `F` on slot `i` and the
//! symmetric tensor `A` on the remaining slots of a `(j+1)`-slot tensor
//! ([`Tensor::embed`]); `C_{i,j+1}` then acts on slot pair `(i, j+1)` and sums
//! the extra slot out. With `E_0 = 1` the general formulas reproduce the
//! boundary conventions `D_1⁻¹(E_0) = -Q(F,F)/N` and the explicit `D_2⁻²(E_0)`.

use crate::bounds::alpha;
use crate::correlation::{correlation_error, CorrelationFamily};
use crate::error::{Error, Result};
use crate::master::{evolve_master_at, marginals, FullState, MasterOptions};
use crate::meanfield::{mean_field_rhs, solve_mean_field};
use crate::model::{OneBodyGenerator, PairKernel};
use crate::ode::{step_plan, Rk4};
use crate::tensor::Tensor;
use rand::Rng;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug)]
pub struct HierarchyConfig {
    pub n: usize,
    pub j_max: usize,
    pub kernel: PairKernel,
    pub k0: OneBodyGenerator,
}

impl HierarchyConfig {
    pub fn new(n: usize, j_max: usize, kernel: PairKernel, k0: OneBodyGenerator) -> Result<Self> {
        if j_max == 0 || j_max > n {
            return Err(Error::Argument(format!("need 1 ≤ j_max ≤ N, got j_max = {j_max}, N = {n}")));
        }
        if kernel.states() != k0.states() {
            return Err(Error::Dimension("kernel and K₀ disagree on S".into()));
        }
        Ok(Self { n, j_max, kernel, k0 })
    }

    pub fn states(&self) -> usize {
        self.kernel.states()
    }

    fn inv_n(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `(K₀^j + T_j/N)(A)`.
    pub fn free_part(&self, a: &Tensor) -> Tensor {
        let j = a.order();
        let mut out = Tensor::zeros(a.states(), j);
        for i in 0..j {
            for r in i + 1..j {
                self.kernel.accumulate_t(a.data(), out.data_mut(), j, i, r, self.inv_n());
            }
        }
        if !self.k0.is_zero() {
            self.k0.accumulate(a.data(), out.data_mut(), j, 1.0);
        }
        out
    }
}

/// Right-hand side of the BBGKY hierarchy for order `j`; `marginals[k]` is
/// `F_{k+1}`.
pub fn bbgky_rhs(cfg: &HierarchyConfig, marginals: &[Tensor], j: usize) -> Result<Tensor> {
    if j == 0 || j > cfg.n || marginals.len() < j {
        return Err(Error::Argument(format!("order {j} unavailable (N = {}, {} marginals)", cfg.n, marginals.len())));
    }
    let mut out = cfg.free_part(&marginals[j - 1]);
    if j < cfg.n {
        let next = marginals
            .get(j)
            .ok_or_else(|| Error::Argument(format!("F_{} is needed for order {j}", j + 1)))?;
        out.add_scaled(&cfg.kernel.apply_c_sum(next)?, alpha(j, cfg.n));
    }
    Ok(out)
}

fn check_reference(cfg: &HierarchyConfig, f: &[f64]) -> Result<()> {
    if f.len() != cfg.states() {
        return Err(Error::Dimension(format!("F has length {}, expected {}", f.len(), cfg.states())));
    }
    Ok(())
}

/// `D_j(A)` for `A` of order `j ≥ 1`.
pub fn d_same(cfg: &HierarchyConfig, f: &[f64], a: &Tensor) -> Result<Tensor> {
    check_reference(cfg, f)?;
    let j = a.order();
    if j == 0 {
        return Err(Error::Argument("D_j needs j ≥ 1".into()));
    }
    let m = j + 1;
    let last = j;
    let mut buf = Tensor::zeros(a.states(), m);
    let al = alpha(j, cfg.n);
    if al != 0.0 {
        let tail = Tensor::embed(m, &[(last, f)], a)?;
        for i in 0..j {
            let mut x = Tensor::embed(m, &[(i, f)], a)?;
            x.add_scaled(&tail, 1.0);
            cfg.kernel.accumulate_t(x.data(), buf.data_mut(), m, i, last, al);
        }
    }
    for s in 0..j {
        let y = Tensor::embed(m, &[(s, f)], a)?;
        for i in (0..j).filter(|i| *i != s) {
            cfg.kernel.accumulate_t(y.data(), buf.data_mut(), m, i, last, -cfg.inv_n());
        }
    }
    Ok(buf.contract_last())
}

/// `D_j¹(A) = α(j,N) C_{j+1}(A)` for `A` of order `j+1`; zero for `j = N`.
pub fn d_up(cfg: &HierarchyConfig, a: &Tensor) -> Result<Tensor> {
    let j = a
        .order()
        .checked_sub(1)
        .filter(|j| *j >= 1)
        .ok_or_else(|| Error::Argument("D_j¹ needs an input of order ≥ 2".into()))?;
    if j >= cfg.n {
        return Ok(Tensor::zeros(a.states(), j));
    }
    let mut out = cfg.kernel.apply_c_sum(a)?;
    out.scale(alpha(j, cfg.n));
    Ok(out)
}

/// `D_j⁻¹(A)` for `A` of order `j-1 ≥ 0`.
pub fn d_down1(cfg: &HierarchyConfig, f: &[f64], a: &Tensor) -> Result<Tensor> {
    check_reference(cfg, f)?;
    let j = a.order() + 1;
    let q = cfg.kernel.mean_field_q(f, f)?;
    let inv_n = cfg.inv_n();
    let mut out = Tensor::zeros(a.states(), j);
    for i in 0..j {
        out.add_scaled(&Tensor::embed(j, &[(i, &q)], a)?, -(j as f64) * inv_n);
    }
    for i in 0..j {
        let x = Tensor::embed(j, &[(i, f)], a)?;
        for s in (0..j).filter(|s| *s != i) {
            cfg.kernel.accumulate_t(x.data(), out.data_mut(), j, i, s, inv_n);
        }
    }
    let m = j + 1;
    let last = j;
    let mut buf = Tensor::zeros(a.states(), m);
    for i in 0..j {
        for s in (0..j).filter(|s| *s != i) {
            let mut x = Tensor::embed(m, &[(i, f), (s, f)], a)?;
            x.add_scaled(&Tensor::embed(m, &[(s, f), (last, f)], a)?, 1.0);
            cfg.kernel.accumulate_t(x.data(), buf.data_mut(), m, i, last, -inv_n);
        }
    }
    out.add_scaled(&buf.contract_last(), 1.0);
    Ok(out)
}

/// `D_j⁻²(A)` for `A` of order `j-2 ≥ 0`.
pub fn d_down2(cfg: &HierarchyConfig, f: &[f64], a: &Tensor) -> Result<Tensor> {
    check_reference(cfg, f)?;
    let j = a.order() + 2;
    let q = cfg.kernel.mean_field_q(f, f)?;
    let inv_n = cfg.inv_n();
    let mut out = Tensor::zeros(a.states(), j);
    for i in 0..j {
        for s in (0..j).filter(|s| *s != i) {
            let x = Tensor::embed(j, &[(i, f), (s, f)], a)?;
            cfg.kernel.accumulate_t(x.data(), out.data_mut(), j, i, s, 0.5 * inv_n);
            out.add_scaled(&Tensor::embed(j, &[(i, &q), (s, f)], a)?, -inv_n);
        }
    }
    Ok(out)
}

/// Right-hand side of the correlation hierarchy for order `j ≥ 1`.
/// `errors[k]` is `E_k` with `errors[0]` the scalar 1. When `E_{j+1}` is not
/// supplied for `j < N` it is taken as zero (truncated system).
pub fn correlation_rhs(cfg: &HierarchyConfig, errors: &[Tensor], f: &[f64], j: usize) -> Result<Tensor> {
    if j == 0 || j > cfg.n || errors.len() <= j {
        return Err(Error::Argument(format!("order {j} unavailable (N = {}, {} tensors)", cfg.n, errors.len())));
    }
    let e = &errors[j];
    let mut out = cfg.free_part(e);
    out.add_scaled(&d_same(cfg, f, e)?, 1.0);
    if j < cfg.n {
        if let Some(next) = errors.get(j + 1) {
            out.add_scaled(&d_up(cfg, next)?, 1.0);
        }
    }
    out.add_scaled(&d_down1(cfg, f, &errors[j - 1])?, 1.0);
    if j >= 2 {
        out.add_scaled(&d_down2(cfg, f, &errors[j - 2])?, 1.0);
    }
    Ok(out)
}

/// Correlation families at a list of times.
#[derive(Clone, Debug)]
pub struct FamilyTrajectory {
    pub times: Vec<f64>,
    pub families: Vec<CorrelationFamily>,
    /// `true` when the system was closed with `E_{jmax+1} := 0`, `jmax < N`.
    pub truncated: bool,
}

impl FamilyTrajectory {
    /// CSV with columns `t, j, l1_norm_Ej`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,j,l1_norm_Ej")?;
        for (t, fam) in self.times.iter().zip(&self.families) {
            for (j, e) in fam.errors.iter().enumerate().skip(1) {
                writeln!(w, "{t:.16e},{j},{:.16e}", e.l1_norm())?;
            }
        }
        Ok(())
    }

    /// Full tensors `E_1..E_jmax` at checkpoint `k`, one dump after another.
    pub fn write_binary(&self, k: usize, mut w: impl Write) -> Result<()> {
        let fam = self
            .families
            .get(k)
            .ok_or_else(|| Error::Argument(format!("no checkpoint {k}")))?;
        for e in &fam.errors[1..] {
            crate::io::write_tensor(&mut w, e)?;
        }
        Ok(())
    }
}

fn unpack(cfg: &HierarchyConfig, y: &[f64], j_max: usize) -> (Vec<f64>, Vec<Tensor>) {
    let s = cfg.states();
    let f = y[..s].to_vec();
    let mut errors = vec![Tensor::scalar(s, 1.0)];
    let mut offset = s;
    for j in 1..=j_max {
        let len = s.pow(j as u32);
        errors.push(Tensor::from_vec(s, j, y[offset..offset + len].to_vec()).expect("layout"));
        offset += len;
    }
    (f, errors)
}

/// Integrates the mean-field state and `E_1..E_jmax` jointly with RK4, so the
/// coefficients of the `D` operators are evaluated at the exact stage times.
pub fn integrate_correlation_hierarchy(
    cfg: &HierarchyConfig,
    initial: &CorrelationFamily,
    checkpoints: &[f64],
    dt: f64,
) -> Result<FamilyTrajectory> {
    let s = cfg.states();
    let j_max = initial.j_max().min(cfg.j_max);
    if j_max == 0 {
        return Err(Error::Argument("need at least E_1".into()));
    }
    if initial.reference.len() != s {
        return Err(Error::Dimension("initial reference state has the wrong length".into()));
    }
    if !(dt > 0.0) || checkpoints.iter().any(|t| *t < 0.0) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument("need dt > 0 and nondecreasing checkpoints ≥ 0".into()));
    }
    let mut y = initial.reference.clone();
    for e in &initial.errors[1..=j_max] {
        y.extend_from_slice(e.data());
    }
    let rhs = |_t: f64, y: &[f64], out: &mut [f64]| {
        let (f, errors) = unpack(cfg, y, j_max);
        mean_field_rhs(&cfg.kernel, &cfg.k0, &f, &mut out[..s]);
        let mut offset = s;
        for j in 1..=j_max {
            let d = correlation_rhs(cfg, &errors, &f, j).expect("shapes are consistent");
            out[offset..offset + d.len()].copy_from_slice(d.data());
            offset += d.len();
        }
    };
    let mut rk = Rk4::new(y.len());
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut families = Vec::new();
    for &target in checkpoints {
        let (steps, h) = step_plan(t, target, dt);
        for _ in 0..steps {
            rk.step(t, h, &mut y, rhs);
            t += h;
        }
        t = target;
        let (reference, errors) = unpack(cfg, &y, j_max);
        times.push(target);
        families.push(CorrelationFamily { reference, errors });
    }
    Ok(FamilyTrajectory { times, families, truncated: j_max < cfg.n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub j: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub entries: Vec<Discrepancy>,
    pub max: f64,
}

/// Compares `E_j(t)` from two independent routes: exact master evolution
/// followed by inclusion-exclusion, and direct integration of the full
/// correlation hierarchy (`j ≤ N`) started from the correlation errors of
/// `initial`. The mean-field initial datum is `f0`. Discrepancies are
/// reported for `j ≤ cfg.j_max`.
pub fn verify_equivalence(
    cfg: &HierarchyConfig,
    initial: &FullState,
    f0: &[f64],
    checkpoints: &[f64],
    dt: f64,
) -> Result<EquivalenceReport> {
    let n = cfg.n;
    if initial.particles() != n {
        return Err(Error::Dimension(format!("initial state has {} particles, config N = {n}", initial.particles())));
    }
    let full_cfg = HierarchyConfig { j_max: n, ..cfg.clone() };

    // route A: master equation → marginals → inclusion-exclusion
    let states = evolve_master_at(&cfg.kernel, &cfg.k0, initial, checkpoints, &MasterOptions::with_dt(dt))?;
    let mut route_a = Vec::with_capacity(checkpoints.len());
    for (state, &t) in states.iter().zip(checkpoints) {
        let traj = solve_mean_field(&cfg.kernel, &cfg.k0, f0, t, dt)?;
        route_a.push(correlation_error(&marginals(state, n)?, traj.last())?);
    }

    // route B: correlation hierarchy from E(0)
    let e0 = correlation_error(&marginals(initial, n)?, f0)?;
    let route_b = integrate_correlation_hierarchy(&full_cfg, &e0, checkpoints, dt)?;

    let mut entries = Vec::new();
    for ((fa, fb), &t) in route_a.iter().zip(&route_b.families).zip(checkpoints) {
        for j in 1..=cfg.j_max {
            entries.push(Discrepancy { j, t, value: fa.errors[j].l1_distance(&fb.errors[j]) });
        }
    }
    let max = entries.iter().map(|d| d.value).fold(0.0, f64::max);
    Ok(EquivalenceReport { entries, max })
}

/// Largest observed `‖Op(A)‖₁ / ‖A‖₁` for one operator and order.
#[derive(Clone, Debug, Serialize)]
pub struct NormAudit {
    pub operator: &'static str,
    pub j: usize,
    pub n: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

fn random_symmetric(rng: &mut impl Rng, s: usize, order: usize) -> Tensor {
    let len = s.pow(order as u32);
    let raw = Tensor::from_vec(s, order, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("len");
    raw.symmetrized()
}

fn random_tensor(rng: &mut impl Rng, s: usize, order: usize) -> Tensor {
    let len = s.pow(order as u32);
    Tensor::from_vec(s, order, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("len")
}

fn random_probability(rng: &mut impl Rng, s: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..s).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Samples `samples` random inputs per operator and order `j ≤ j_max` and
/// compares the largest action ratio with the operator-norm bounds
/// `‖T_j‖ ≤ j(j-1)/2 ‖V‖`, `‖C_{j+1}‖ ≤ j‖V‖`, `‖D_j‖ ≤ 3j‖V‖`,
/// `‖D_j¹‖ ≤ j‖V‖`, `‖D_j⁻¹‖ ≤ 4 j²/N ‖V‖`, `‖D_j⁻²‖ ≤ (3/2) j²/N ‖V‖`.
/// The mean-field state is a fresh random probability vector per sample;
/// the `D` operators are fed symmetric inputs.
pub fn audit_operator_norms(cfg: &HierarchyConfig, j_max: usize, samples: usize, rng: &mut impl Rng) -> Result<Vec<NormAudit>> {
    let s = cfg.states();
    let n = cfg.n;
    let norm_v = cfg.kernel.operator_norm();
    let nf = n as f64;
    let mut out = Vec::new();
    let tol = 1e-12;
    for j in 1..=j_max.min(n) {
        let jf = j as f64;
        let mut ratios = [0.0f64; 6];
        for _ in 0..samples {
            let f = random_probability(rng, s);
            if j >= 2 {
                let a = random_tensor(rng, s, j);
                ratios[0] = ratios[0].max(cfg.kernel.apply_t_sum(&a)?.l1_norm() / a.l1_norm());
            }
            let b = random_tensor(rng, s, j + 1);
            ratios[1] = ratios[1].max(cfg.kernel.apply_c_sum(&b)?.l1_norm() / b.l1_norm());
            let a = random_symmetric(rng, s, j);
            ratios[2] = ratios[2].max(d_same(cfg, &f, &a)?.l1_norm() / a.l1_norm());
            if j < n {
                let b = random_symmetric(rng, s, j + 1);
                ratios[3] = ratios[3].max(d_up(cfg, &b)?.l1_norm() / b.l1_norm());
            }
            let c = random_symmetric(rng, s, j - 1);
            ratios[4] = ratios[4].max(d_down1(cfg, &f, &c)?.l1_norm() / c.l1_norm());
            if j >= 2 {
                let c = random_symmetric(rng, s, j - 2);
                ratios[5] = ratios[5].max(d_down2(cfg, &f, &c)?.l1_norm() / c.l1_norm());
            }
        }
        let bounds = [
            ("T_j", jf * (jf - 1.0) / 2.0 * norm_v, j >= 2),
            ("C_j+1", jf * norm_v, true),
            ("D_j", 3.0 * jf * norm_v, true),
            ("D_j^1", jf * norm_v, j < n),
            ("D_j^-1", 4.0 * jf * jf / nf * norm_v, true),
            ("D_j^-2", 1.5 * jf * jf / nf * norm_v, j >= 2),
        ];
        for ((operator, bound, active), ratio) in bounds.into_iter().zip(ratios) {
            if active {
                out.push(NormAudit { operator, j, n, max_ratio: ratio, bound, pass: ratio <= bound * (1.0 + tol) + tol });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::tests::random_marginals;
    use crate::master::{evolve_master, DEFAULT_MEM_CAP};
    use crate::model::StateSpace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_cfg(n: usize, beta: f64) -> HierarchyConfig {
        let sp = StateSpace::new(2).unwrap();
        HierarchyConfig::new(n, n, PairKernel::uniform(sp, beta).unwrap(), OneBodyGenerator::zero(sp)).unwrap()
    }

    #[test]
    fn config_validation() {
        let sp = StateSpace::new(2).unwrap();
        let k = PairKernel::uniform(sp, 1.0).unwrap();
        assert!(HierarchyConfig::new(4, 0, k.clone(), OneBodyGenerator::zero(sp)).is_err());
        assert!(HierarchyConfig::new(4, 5, k.clone(), OneBodyGenerator::zero(sp)).is_err());
        assert!(HierarchyConfig::new(4, 5, k, OneBodyGenerator::zero(StateSpace::new(3).unwrap())).is_err());
    }

    #[test]
    fn bbgky_first_order_is_collision_term() {
        let cfg = uniform_cfg(6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_marginals(&mut rng, 2, 3);
        let rhs = bbgky_rhs(&cfg, &m, 1).unwrap();
        let mut expect = cfg.kernel.apply_c_sum(&m[1]).unwrap();
        expect.scale(5.0 / 6.0);
        assert!(rhs.max_abs_diff(&expect) < 1e-16);
        assert!(bbgky_rhs(&cfg, &m, 3).is_err());
        for j in 1..=2 {
            assert!(bbgky_rhs(&cfg, &m, j).unwrap().sum().abs() < 1e-14);
        }
    }

    #[test]
    fn bbgky_swap_products_vanish() {
        let sp = StateSpace::new(3).unwrap();
        let cfg = HierarchyConfig::new(5, 3, PairKernel::swap(sp, 1.0).unwrap(), OneBodyGenerator::zero(sp)).unwrap();
        let f = [0.2, 0.3, 0.5];
        let m: Vec<Tensor> = (1..=4).map(|j| Tensor::power(&f, j)).collect();
        for j in 1..=3 {
            assert!(bbgky_rhs(&cfg, &m, j).unwrap().l1_norm() < 1e-15);
        }
    }

    #[test]
    fn bbgky_matches_master_finite_differences() {
        let n = 5;
        let cfg = uniform_cfg(n, 1.0);
        let sp = StateSpace::new(2).unwrap();
        let mut rates = vec![0.0; 16];
        for (i, r) in rates.iter_mut().enumerate() {
            let (a, b, c, d) = (i / 8, (i / 4) % 2, (i / 2) % 2, i % 2);
            let v = 0.1 + 0.2 * (a + 2 * c) as f64 + 0.05 * (b * d) as f64;
            let w = 0.1 + 0.2 * (b + 2 * d) as f64 + 0.05 * (a * c) as f64;
            *r = 0.5 * (v + w);
        }
        let k = PairKernel::weighted(sp, rates).unwrap();
        let cfg = HierarchyConfig { kernel: k, ..cfg };
        let start = FullState::factorized(&[0.8, 0.2], n, DEFAULT_MEM_CAP).unwrap();
        let h = 1e-3;
        let t = 0.3;
        let at = |time: f64| evolve_master(&cfg.kernel, &cfg.k0, &start, time, 1e-3).unwrap();
        let (minus, mid, plus) = (at(t - h), at(t), at(t + h));
        let m_mid = marginals(&mid, n).unwrap();
        let m_minus = marginals(&minus, n).unwrap();
        let m_plus = marginals(&plus, n).unwrap();
        for j in 1..=n {
            let mut fd = m_plus[j - 1].clone();
            fd.add_scaled(&m_minus[j - 1], -1.0);
            fd.scale(0.5 / h);
            let rhs = bbgky_rhs(&cfg, &m_mid, j).unwrap();
            assert!(fd.max_abs_diff(&rhs) < 1e-6, "j = {j}: {}", fd.max_abs_diff(&rhs));
        }
    }

    #[test]
    fn boundary_conventions_follow_from_general_formulas() {
        let cfg = uniform_cfg(7, 1.3);
        let f = [0.65, 0.35];
        let one = Tensor::scalar(2, 1.0);
        let q = cfg.kernel.mean_field_q(&f, &f).unwrap();
        let n = 7.0;
        // D_1⁻¹(E_0) = -Q(F,F)/N
        let d1 = d_down1(&cfg, &f, &one).unwrap();
        for a in 0..2 {
            assert!((d1.data()[a] + q[a] / n).abs() < 1e-16);
        }
        // D_2⁻²(E_0) = (T_{1,2}F⊗F − Q⊗F − F⊗Q)/N
        let ff = Tensor::power(&f, 2);
        let mut expect = cfg.kernel.apply_t(&ff, 0, 1).unwrap();
        expect.add_scaled(&Tensor::product(&[&q, &f]).unwrap(), -1.0);
        expect.add_scaled(&Tensor::product(&[&f, &q]).unwrap(), -1.0);
        expect.scale(1.0 / n);
        assert!(d_down2(&cfg, &f, &one).unwrap().max_abs_diff(&expect) < 1e-16);
    }

    #[test]
    fn first_order_rhs_without_correlations() {
        let cfg = uniform_cfg(9, 1.0);
        let f = [0.7, 0.3];
        let fam = CorrelationFamily::zero(&f, 9);
        let rhs = correlation_rhs(&cfg, &fam.errors, &f, 1).unwrap();
        let q = cfg.kernel.mean_field_q(&f, &f).unwrap();
        for a in 0..2 {
            assert!((rhs.data()[a] + q[a] / 9.0).abs() < 1e-16);
        }
        assert!(correlation_rhs(&cfg, &fam.errors, &f, 0).is_err());
        assert!(correlation_rhs(&cfg, &fam.errors, &[0.5, 0.25, 0.25], 1).is_err());
    }

    #[test]
    fn swap_kernel_hierarchy_stays_at_zero() {
        let sp = StateSpace::new(2).unwrap();
        let cfg = HierarchyConfig::new(5, 5, PairKernel::swap(sp, 1.0).unwrap(), OneBodyGenerator::zero(sp)).unwrap();
        let f = [0.6, 0.4];
        let fam = CorrelationFamily::zero(&f, 5);
        for j in 1..=5 {
            assert!(correlation_rhs(&cfg, &fam.errors, &f, j).unwrap().l1_norm() < 1e-16);
        }
        let traj = integrate_correlation_hierarchy(&cfg, &fam, &[0.5, 1.0], 1e-2).unwrap();
        assert!(!traj.truncated);
        for fam in &traj.families {
            assert!(fam.norms()[1..].iter().all(|x| *x < 1e-16));
        }
    }

    #[test]
    fn e1_closed_form_from_full_hierarchy() {
        let n = 8;
        let cfg = uniform_cfg(n, 1.0);
        let f0 = [0.7, 0.3];
        let fam = CorrelationFamily::zero(&f0, n);
        let times = [0.25, 0.5, 1.0];
        let traj = integrate_correlation_hierarchy(&cfg, &fam, &times, 1e-2).unwrap();
        let alpha1 = (n as f64 - 1.0) / n as f64;
        for (t, fam) in times.iter().zip(&traj.families) {
            let expect = (f0[0] - 0.5) * ((-alpha1 * t).exp() - (-t).exp());
            assert!((fam.errors[1].data()[0] - expect).abs() < 1e-9);
            assert!((fam.errors[1].data()[1] + expect).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_runs_are_flagged() {
        let cfg = HierarchyConfig { j_max: 3, ..uniform_cfg(8, 1.0) };
        let fam = CorrelationFamily::zero(&[0.7, 0.3], 3);
        let traj = integrate_correlation_hierarchy(&cfg, &fam, &[0.1], 1e-2).unwrap();
        assert!(traj.truncated);
        assert_eq!(traj.families[0].j_max(), 3);
    }

    #[test]
    fn equivalence_small_systems() {
        let cfg = uniform_cfg(4, 1.0);
        let start = FullState::factorized(&[0.7, 0.3], 4, DEFAULT_MEM_CAP).unwrap();
        let report = verify_equivalence(&cfg, &start, &[0.7, 0.3], &[0.5, 1.0], 1e-2).unwrap();
        assert!(report.max < 1e-8, "{}", report.max);
        assert_eq!(report.entries.len(), 8);

        let sp = StateSpace::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rates = vec![0.0; 81];
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * 3 + b) * 3 + c) * 3 + d;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let v = rng.gen_range(0.0..0.5);
                        rates[idx(a, b, c, d)] = v;
                        rates[idx(b, a, d, c)] = v;
                    }
                }
            }
        }
        let k0 = OneBodyGenerator::new(sp, vec![-0.2, 0.1, 0.0, 0.2, -0.3, 0.4, 0.0, 0.2, -0.4]).unwrap();
        let cfg = HierarchyConfig::new(4, 4, PairKernel::weighted(sp, rates).unwrap(), k0).unwrap();
        let m = random_marginals(&mut rng, 3, 4);
        let start = FullState::from_tensor(m[3].clone()).unwrap();
        let f0 = [0.2, 0.5, 0.3];
        let report = verify_equivalence(&cfg, &start, &f0, &[0.4, 0.8], 1e-2).unwrap();
        assert!(report.max < 1e-8, "{}", report.max);
    }

    #[test]
    fn equivalence_discrepancy_is_fourth_order() {
        let cfg = uniform_cfg(5, 2.0);
        let start = FullState::factorized(&[0.9, 0.1], 5, DEFAULT_MEM_CAP).unwrap();
        let coarse = verify_equivalence(&cfg, &start, &[0.9, 0.1], &[1.0], 0.2).unwrap().max;
        let fine = verify_equivalence(&cfg, &start, &[0.9, 0.1], &[1.0], 0.1).unwrap().max;
        let ratio = coarse / fine;
        assert!(ratio > 10.0 && ratio < 24.0, "ratio {ratio}");
    }

    #[test]
    fn sampled_operator_norms_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = uniform_cfg(8, 1.0);
        let audit = audit_operator_norms(&cfg, 4, 50, &mut rng).unwrap();
        assert!(audit.iter().all(|a| a.pass), "{audit:?}");
        assert_eq!(audit.iter().filter(|a| a.j == 1).count(), 4);
    }

    #[test]
    fn family_csv() {
        let traj = FamilyTrajectory { times: vec![0.5], families: vec![CorrelationFamily::zero(&[0.5, 0.5], 2)], truncated: false };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("t,j,l1_norm_Ej\n"));
    }
}
