//! Event-driven simulation of the continuous Kac model in `ℝ³` and of soft
//! spheres in `ℝ³ × ℝ³`.
//!
//! Both master equations have pair rate `(1/N) B(ω; v_i - v_j)` (times
//! `h(|x_i - x_j|)` for soft spheres) and are sampled by thinning: candidate
//! events arrive at a constant majorant rate, a uniform pair and scattering
//! vector are drawn, and the candidate is accepted with probability
//! `rate/majorant`. An accepted collision maps
//! `v_i ↦ v_i - ω(ω·u)`, `v_j ↦ v_j + ω(ω·u)` with `u = v_i - v_j`.
//!
//! Each replica owns a ChaCha8 generator seeded with the run seed on stream
//! `replica`, so results do not depend on how replicas are scheduled.

use crate::error::{Error, Result};
use crate::io::{write_f64s, write_header};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

pub type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm2(a: Vec3) -> f64 {
    dot(a, a)
}

/// Sum by recursive halving, so the result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => pairwise_sum(&values[..len / 2]) + pairwise_sum(&values[len / 2..]),
    }
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Bounded collision kernel `B(ω; u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CrossSection {
    /// Constant `b0` per unit solid angle.
    Maxwell { b0: f64 },
    /// `b0 |ω·û|`.
    Cosine { b0: f64 },
}

impl CrossSection {
    pub fn maxwell(b0: f64) -> Result<Self> {
        Self::checked(Self::Maxwell { b0 }, b0)
    }

    pub fn cosine(b0: f64) -> Result<Self> {
        Self::checked(Self::Cosine { b0 }, b0)
    }

    fn checked(cs: Self, b0: f64) -> Result<Self> {
        if !(b0 >= 0.0 && b0.is_finite()) {
            return Err(Error::Argument(format!("b0 must be finite and ≥ 0, got {b0}")));
        }
        Ok(cs)
    }

    pub fn from_name(name: &str, b0: f64) -> Result<Self> {
        match name {
            "maxwell" => Self::maxwell(b0),
            "cosine" => Self::cosine(b0),
            other => Err(Error::Argument(format!("unknown cross-section preset {other:?}"))),
        }
    }

    pub fn eval(&self, omega: Vec3, u: Vec3) -> f64 {
        match *self {
            Self::Maxwell { b0 } => b0,
            Self::Cosine { b0 } => {
                let nu = norm2(u).sqrt();
                if nu == 0.0 {
                    0.0
                } else {
                    b0 * dot(omega, u).abs() / nu
                }
            }
        }
    }

    /// `‖B‖_∞`.
    pub fn sup(&self) -> f64 {
        match *self {
            Self::Maxwell { b0 } | Self::Cosine { b0 } => b0,
        }
    }
}

/// `v_i ↦ v_i - ω(ω·u)`, `v_j ↦ v_j + ω(ω·u)`.
pub fn collide(vi: &mut Vec3, vj: &mut Vec3, omega: Vec3) {
    let c = dot(omega, sub(*vi, *vj));
    for k in 0..3 {
        vi[k] -= omega[k] * c;
        vj[k] += omega[k] * c;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub proposed: u64,
    pub accepted: u64,
    /// Candidates drawn with coincident positions (soft spheres only).
    pub overlaps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThinningOptions {
    /// Multiplier `≥ 1` applied to the minimal majorant.
    pub majorant_factor: f64,
}

impl Default for ThinningOptions {
    fn default() -> Self {
        Self { majorant_factor: 1.0 }
    }
}

impl ThinningOptions {
    fn check(&self) -> Result<()> {
        if !(self.majorant_factor >= 1.0 && self.majorant_factor.is_finite()) {
            return Err(Error::Argument(format!("majorant factor must be ≥ 1, got {}", self.majorant_factor)));
        }
        Ok(())
    }
}

/// `M` independent replicas of `N` velocities.
#[derive(Clone, Debug)]
pub struct KacEnsemble {
    n: usize,
    m: usize,
    velocities: Vec<Vec3>,
    rngs: Vec<ChaCha8Rng>,
    counts: Vec<EventCounts>,
    time: f64,
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n < 2 || m == 0 {
        return Err(Error::Argument(format!("need N ≥ 2 and M ≥ 1, got N = {n}, M = {m}")));
    }
    Ok(())
}

impl KacEnsemble {
    /// `velocities` is replica-major: replica `r` holds entries `r·N..(r+1)·N`.
    pub fn from_velocities(n: usize, m: usize, velocities: Vec<Vec3>, seed: u64) -> Result<Self> {
        check_sizes(n, m)?;
        if velocities.len() != n * m {
            return Err(Error::Dimension(format!("expected {} velocities, got {}", n * m, velocities.len())));
        }
        if velocities.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Argument("velocities must be finite".into()));
        }
        let rngs = (0..m).map(|r| replica_rng(seed, r)).collect();
        Ok(Self { n, m, velocities, rngs, counts: vec![EventCounts::default(); m], time: 0.0 })
    }

    /// Independent Gaussian components with standard deviations `sigma`.
    pub fn gaussian(n: usize, m: usize, sigma: Vec3, seed: u64) -> Result<Self> {
        let mut rng = replica_rng(seed, usize::MAX);
        let velocities = (0..n * m)
            .map(|_| {
                let g: Vec3 = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                [g[0] * sigma[0], g[1] * sigma[1], g[2] * sigma[2]]
            })
            .collect();
        Self::from_velocities(n, m, velocities, seed)
    }

    /// Every velocity uniform on the sphere `|v| = speed`.
    pub fn shell(n: usize, m: usize, speed: f64, seed: u64) -> Result<Self> {
        let mut rng = replica_rng(seed, usize::MAX);
        let velocities = (0..n * m)
            .map(|_| {
                let w: [f64; 3] = UnitSphere.sample(&mut rng);
                [w[0] * speed, w[1] * speed, w[2] * speed]
            })
            .collect();
        Self::from_velocities(n, m, velocities, seed)
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn replicas(&self) -> usize {
        self.m
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> &[EventCounts] {
        &self.counts
    }

    pub fn replica(&self, r: usize) -> &[Vec3] {
        &self.velocities[r * self.n..(r + 1) * self.n]
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }

    /// Header `N, M, 3`, then the velocities.
    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &[self.n as u64, self.m as u64, 3])?;
        write_f64s(w, &self.velocities.concat())
    }
}

/// Per-replica `Σv` and `Σ|v|²`.
pub fn conserved_quantities(velocities: &[Vec3]) -> (Vec3, f64) {
    let mut p = [0.0; 3];
    let mut e = 0.0;
    for v in velocities {
        for k in 0..3 {
            p[k] += v[k];
        }
        e += norm2(*v);
    }
    (p, e)
}

/// Largest relative change of momentum and energy over all replicas.
/// Momentum changes are measured against `√(N Σ|v|²)`.
pub fn conservation_drift(before: &[(Vec3, f64)], after: &[(Vec3, f64)], n: usize) -> (f64, f64) {
    let mut dp: f64 = 0.0;
    let mut de: f64 = 0.0;
    for ((p0, e0), (p1, e1)) in before.iter().zip(after) {
        let scale = (n as f64 * e0).sqrt().max(f64::MIN_POSITIVE);
        dp = dp.max(norm2(sub(*p1, *p0)).sqrt() / scale);
        de = de.max((e1 - e0).abs() / e0.max(f64::MIN_POSITIVE));
    }
    (dp, de)
}

fn uniform_pair(rng: &mut impl Rng, n: usize) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Advances every replica to absolute time `t_final`.
pub fn simulate_kac(ens: &mut KacEnsemble, cs: &CrossSection, t_final: f64, opts: &ThinningOptions) -> Result<()> {
    opts.check()?;
    if !(t_final > ens.time) {
        return Err(Error::Argument(format!("t_final = {t_final} must exceed the current time {}", ens.time)));
    }
    let n = ens.n;
    let bound = cs.sup() * opts.majorant_factor;
    let rate = (n as f64 - 1.0) / 2.0 * 4.0 * PI * bound;
    let duration = t_final - ens.time;
    ens.velocities
        .par_chunks_mut(n)
        .zip(ens.rngs.par_iter_mut())
        .zip(ens.counts.par_iter_mut())
        .for_each(|((vel, rng), counts)| {
            if rate <= 0.0 {
                return;
            }
            let mut t = 0.0;
            loop {
                let u: f64 = rng.gen();
                t += -(1.0 - u).ln() / rate;
                if t > duration {
                    break;
                }
                counts.proposed += 1;
                let (i, j) = uniform_pair(rng, n);
                let omega: [f64; 3] = UnitSphere.sample(rng);
                let rel = sub(vel[i], vel[j]);
                if rng.gen::<f64>() * bound < cs.eval(omega, rel) {
                    counts.accepted += 1;
                    let (lo, hi) = (i.min(j), i.max(j));
                    let (a, b) = vel.split_at_mut(hi);
                    if i < j {
                        collide(&mut a[lo], &mut b[0], omega);
                    } else {
                        collide(&mut b[0], &mut a[lo], omega);
                    }
                }
            }
        });
    ens.time = t_final;
    Ok(())
}

/// Rate modulation `h(r) = height` for `r < radius`, zero beyond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub radius: f64,
    pub height: f64,
}

impl Cutoff {
    pub fn new(radius: f64, height: f64) -> Result<Self> {
        if !(radius >= 0.0 && height >= 0.0 && radius.is_finite() && height.is_finite()) {
            return Err(Error::Argument(format!("cutoff needs finite radius, height ≥ 0, got {radius}, {height}")));
        }
        Ok(Self { radius, height })
    }

    pub fn zero() -> Self {
        Self { radius: 0.0, height: 0.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < self.radius {
            self.height
        } else {
            0.0
        }
    }

    pub fn sup(&self) -> f64 {
        if self.radius > 0.0 {
            self.height
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct SoftSphereEnsemble {
    n: usize,
    m: usize,
    positions: Vec<Vec3>,
    velocities: Vec<Vec3>,
    rngs: Vec<ChaCha8Rng>,
    counts: Vec<EventCounts>,
    time: f64,
}

impl SoftSphereEnsemble {
    pub fn new(n: usize, m: usize, positions: Vec<Vec3>, velocities: Vec<Vec3>, seed: u64) -> Result<Self> {
        check_sizes(n, m)?;
        if positions.len() != n * m || velocities.len() != n * m {
            return Err(Error::Dimension(format!("expected {} positions and velocities", n * m)));
        }
        if positions.iter().chain(&velocities).flatten().any(|x| !x.is_finite()) {
            return Err(Error::Argument("phase-space coordinates must be finite".into()));
        }
        let rngs = (0..m).map(|r| replica_rng(seed, r)).collect();
        Ok(Self { n, m, positions, velocities, rngs, counts: vec![EventCounts::default(); m], time: 0.0 })
    }

    /// Positions uniform in `[0, side]³`, Gaussian velocities of unit variance.
    pub fn random_box(n: usize, m: usize, side: f64, seed: u64) -> Result<Self> {
        let mut rng = replica_rng(seed, usize::MAX);
        let positions = (0..n * m).map(|_| std::array::from_fn(|_| rng.gen_range(0.0..side))).collect();
        let velocities = (0..n * m).map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng))).collect();
        Self::new(n, m, positions, velocities, seed)
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn replicas(&self) -> usize {
        self.m
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> &[EventCounts] {
        &self.counts
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }

    pub fn replica_velocities(&self, r: usize) -> &[Vec3] {
        &self.velocities[r * self.n..(r + 1) * self.n]
    }

    /// Header `N, M, 6`, then `x, y, z, vx, vy, vz` per particle.
    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &[self.n as u64, self.m as u64, 6])?;
        let flat: Vec<f64> = self.positions.iter().zip(&self.velocities).flat_map(|(x, v)| x.iter().chain(v).copied()).collect();
        write_f64s(w, &flat)
    }
}

fn drift(x: &mut [Vec3], v: &[Vec3], dt: f64) {
    for (xi, vi) in x.iter_mut().zip(v) {
        for k in 0..3 {
            xi[k] += vi[k] * dt;
        }
    }
}

/// Advances every replica to absolute time `t_final`: exact free flight
/// between candidates, scattering vector `(x_i - x_j)/|x_i - x_j|`.
pub fn simulate_soft_spheres(
    ens: &mut SoftSphereEnsemble,
    cs: &CrossSection,
    h: &Cutoff,
    t_final: f64,
    opts: &ThinningOptions,
) -> Result<()> {
    opts.check()?;
    if !(t_final > ens.time) {
        return Err(Error::Argument(format!("t_final = {t_final} must exceed the current time {}", ens.time)));
    }
    let n = ens.n;
    let bound = cs.sup() * h.sup() * opts.majorant_factor;
    let rate = (n as f64 - 1.0) / 2.0 * bound;
    let duration = t_final - ens.time;
    ens.positions
        .par_chunks_mut(n)
        .zip(ens.velocities.par_chunks_mut(n))
        .zip(ens.rngs.par_iter_mut())
        .zip(ens.counts.par_iter_mut())
        .for_each(|(((pos, vel), rng), counts)| {
            let mut t = 0.0;
            loop {
                let next = if rate > 0.0 { t - (1.0 - rng.gen::<f64>()).ln() / rate } else { f64::INFINITY };
                if next > duration {
                    drift(pos, vel, duration - t);
                    break;
                }
                drift(pos, vel, next - t);
                t = next;
                counts.proposed += 1;
                let (i, j) = uniform_pair(rng, n);
                let sep = sub(pos[i], pos[j]);
                let dist = norm2(sep).sqrt();
                if dist == 0.0 {
                    counts.overlaps += 1;
                    continue;
                }
                let omega = [sep[0] / dist, sep[1] / dist, sep[2] / dist];
                let actual = h.eval(dist) * cs.eval(omega, sub(vel[i], vel[j]));
                if rng.gen::<f64>() * bound < actual {
                    counts.accepted += 1;
                    let (lo, hi) = (i.min(j), i.max(j));
                    let (a, b) = vel.split_at_mut(hi);
                    collide(&mut a[lo], &mut b[0], omega);
                }
            }
        });
    ens.time = t_final;
    Ok(())
}

/// `⟨φ⊗ψ, f₂⟩ - ⟨φ, f₁⟩⟨ψ, f₁⟩` estimated from replicas: a within-replica
/// U-statistic for the first term and replica means for the second (bias
/// `O(1/M)`), with a replica-bootstrap standard error.
pub fn estimate_pair_correlation(
    n: usize,
    replicas: &[&[Vec3]],
    phi: impl Fn(Vec3) -> f64,
    psi: impl Fn(Vec3) -> f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let m = replicas.len();
    if m < 10 {
        return Err(Error::Argument(format!("need at least 10 replicas, got {m}")));
    }
    if n < 2 || replicas.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("every replica needs N = {n} ≥ 2 particles")));
    }
    let nf = n as f64;
    let mut u = Vec::with_capacity(m);
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for rep in replicas {
        let ph: Vec<f64> = rep.iter().map(|v| phi(*v)).collect();
        let ps: Vec<f64> = rep.iter().map(|v| psi(*v)).collect();
        let diag: Vec<f64> = ph.iter().zip(&ps).map(|(x, y)| x * y).collect();
        let (sa, sb) = (pairwise_sum(&ph), pairwise_sum(&ps));
        u.push((sa * sb - pairwise_sum(&diag)) / (nf * (nf - 1.0)));
        a.push(sa / nf);
        b.push(sb / nf);
    }
    let value = |idx: &[usize]| {
        let pick = |xs: &[f64]| mean(&idx.iter().map(|&k| xs[k]).collect::<Vec<_>>());
        pick(&u) - pick(&a) * pick(&b)
    };
    let all: Vec<usize> = (0..m).collect();
    let estimate = value(&all);
    let stderr = bootstrap(m, resamples, seed, value);
    Ok((estimate, stderr))
}

fn bootstrap(m: usize, resamples: usize, seed: u64, stat: impl Fn(&[usize]) -> f64) -> f64 {
    if resamples < 2 {
        return f64::NAN;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            let idx: Vec<usize> = (0..m).map(|_| rng.gen_range(0..m)).collect();
            stat(&idx)
        })
        .collect();
    let mu = mean(&draws);
    let var = pairwise_sum(&draws.iter().map(|x| (x - mu).powi(2)).collect::<Vec<_>>()) / (resamples as f64 - 1.0);
    var.sqrt()
}

/// Traceless `zz` entry of `X = Σ v vᵀ - (Σv)(Σv)ᵀ/N`.
pub fn anisotropy(velocities: &[Vec3]) -> f64 {
    let n = velocities.len() as f64;
    let (p, _) = conserved_quantities(velocities);
    let mut x = [0.0; 3];
    for v in velocities {
        for k in 0..3 {
            x[k] += v[k] * v[k];
        }
    }
    for k in 0..3 {
        x[k] -= p[k] * p[k] / n;
    }
    x[2] - (x[0] + x[1] + x[2]) / 3.0
}

/// Decay rate of the traceless part of `X` for constant `B = b0`:
/// `dX/dt = -(8π b0/5) X`.
pub fn maxwell_anisotropy_rate(b0: f64) -> f64 {
    8.0 * PI * b0 / 5.0
}

/// `-ln(Σ_r X_r(t)/Σ_r X_r(0))/t` with a paired replica-bootstrap error.
pub fn estimate_relaxation_rate(x0: &[f64], x1: &[f64], t: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if x0.len() != x1.len() || x0.len() < 10 || !(t > 0.0) {
        return Err(Error::Argument("need ≥ 10 paired replicas and t > 0".into()));
    }
    let rate = |idx: &[usize]| {
        let s0 = pairwise_sum(&idx.iter().map(|&k| x0[k]).collect::<Vec<_>>());
        let s1 = pairwise_sum(&idx.iter().map(|&k| x1[k]).collect::<Vec<_>>());
        -(s1 / s0).ln() / t
    };
    let all: Vec<usize> = (0..x0.len()).collect();
    let value = rate(&all);
    if !value.is_finite() {
        return Err(Error::Validation("anisotropy changed sign; rate undefined".into()));
    }
    Ok((value, bootstrap(x0.len(), resamples, seed, rate)))
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Argument("KS test needs two nonempty samples without NaN".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xs[i].min(ys[j]);
        while i < na && xs[i] <= x {
            i += 1;
        }
        while j < nb && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatorRow {
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
}

/// CSV with columns `N, M, t, value, stderr`.
pub fn write_estimator_csv(rows: &[EstimatorRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "N,M,t,value,stderr")?;
    for r in rows {
        writeln!(w, "{},{},{:.16e},{:.16e},{:.16e}", r.n, r.m, r.t, r.value, r.stderr)?;
    }
    Ok(())
}
