//! Finite-state realization of the abstract pair dynamics.
//!
//! A particle takes one of `S` discrete velocity states. A [`PairKernel`]
//! holds the rate `Λ(a, b; a', b')` at which an ordered pair in `(a, b)`
//! jumps to `(a', b')`; the induced pair generator is the gain-loss form
//!
//! ```text
//! V(A)(a, b) = Σ_{a', b'} Λ(a', b'; a, b) A(a', b') - r(a, b) A(a, b),
//! r(a, b)    = Σ_{a'', b''} Λ(a, b; a'', b'').
//! ```
//!
//! `T_{i,r}` applies `V` on two slots of an order-`j` tensor, `C_{i,j+1}`
//! additionally sums out slot `j+1`, and `Q(F, G) = ℓ₂(V(F ⊗ G))` is the
//! mean-field collision operator. Slots are 0-based throughout the API.

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelPreset {
    /// Full re-randomization: every outcome at rate `β/S²`.
    Uniform,
    /// Velocity exchange `(a, b) → (b, a)` at rate `β`.
    Swap,
    /// User-supplied rate table.
    Weighted,
}

impl FromStr for KernelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "swap" => Ok(Self::Swap),
            "weighted" => Ok(Self::Weighted),
            other => Err(Error::Kernel(format!("unknown preset `{other}`"))),
        }
    }
}

impl fmt::Display for KernelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Swap => "swap",
            Self::Weighted => "weighted",
        })
    }
}

/// Number of discrete velocity states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSpace(usize);

impl StateSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Argument(format!("state space needs S ≥ 2, got {size}")));
        }
        Ok(Self(size))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairKernel {
    states: usize,
    preset: KernelPreset,
    beta: f64,
    /// `Λ(a, b; a', b')`, row-major in `(a, b, a', b')`.
    rates: Vec<f64>,
    /// `r(a, b)`, row-major in `(a, b)`.
    loss: Vec<f64>,
    /// Pair generator as an `S² × S²` matrix acting on `A(a', b')`:
    /// `M[(a,b), (a',b')] = Λ(a', b'; a, b) - δ r(a, b)`.
    generator: Vec<f64>,
}

impl PairKernel {
    pub fn uniform(space: StateSpace, beta: f64) -> Result<Self> {
        let s = space.size();
        let rate = beta / (s * s) as f64;
        Self::build(s, KernelPreset::Uniform, beta, vec![rate; s.pow(4)])
    }

    pub fn swap(space: StateSpace, beta: f64) -> Result<Self> {
        let s = space.size();
        let mut rates = vec![0.0; s.pow(4)];
        for a in 0..s {
            for b in 0..s {
                rates[((a * s + b) * s + b) * s + a] = beta;
            }
        }
        Self::build(s, KernelPreset::Swap, beta, rates)
    }

    /// Validates a user rate table (row-major in `(a, b, a', b')`).
    pub fn weighted(space: StateSpace, rates: Vec<f64>) -> Result<Self> {
        let s = space.size();
        if rates.len() != s.pow(4) {
            return Err(Error::Kernel(format!("rate table needs S⁴ = {} entries, got {}", s.pow(4), rates.len())));
        }
        let beta = rates.chunks_exact(s * s).map(|c| c.iter().sum::<f64>()).fold(0.0, f64::max);
        Self::build(s, KernelPreset::Weighted, beta, rates)
    }

    fn build(states: usize, preset: KernelPreset, beta: f64, rates: Vec<f64>) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Kernel(format!("rate β must be finite and ≥ 0, got {beta}")));
        }
        if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::Kernel(format!("rates must be finite and ≥ 0, found {bad}")));
        }
        let s = states;
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * s + b) * s + c) * s + d;
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    for d in 0..s {
                        let lhs = rates[idx(a, b, c, d)];
                        let rhs = rates[idx(b, a, d, c)];
                        if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(1.0) {
                            return Err(Error::Kernel(format!(
                                "exchange symmetry broken: Λ({a},{b};{c},{d}) = {lhs} but Λ({b},{a};{d},{c}) = {rhs}"
                            )));
                        }
                    }
                }
            }
        }
        let s2 = s * s;
        let loss: Vec<f64> = rates.chunks_exact(s2).map(|c| c.iter().sum()).collect();
        let mut generator = vec![0.0; s2 * s2];
        for out in 0..s2 {
            for src in 0..s2 {
                generator[out * s2 + src] = rates[src * s2 + out];
            }
            generator[out * s2 + out] -= loss[out];
        }
        Ok(Self { states, preset, beta, rates, loss, generator })
    }

    /// Loads `preset`, `S`, `beta` and for `weighted` a flat `lambda` list.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let preset: KernelPreset = match kv.raw("preset") {
            Some(p) => p.parse().map_err(|e: Error| kv.error("preset", e.to_string()))?,
            None => KernelPreset::Uniform,
        };
        let s: usize = kv.require("S")?;
        let space = StateSpace::new(s).map_err(|e| kv.error("S", e.to_string()))?;
        let beta: f64 = kv.get_or("beta", 1.0)?;
        let kernel = match preset {
            KernelPreset::Uniform => Self::uniform(space, beta),
            KernelPreset::Swap => Self::swap(space, beta),
            KernelPreset::Weighted => {
                let rates = kv
                    .get_list::<f64>("lambda")?
                    .ok_or_else(|| kv.error("preset", "weighted preset needs a `lambda` table"))?;
                Self::weighted(space, rates)
            }
        };
        kernel.map_err(|e| kv.error(if preset == KernelPreset::Weighted { "lambda" } else { "beta" }, e.to_string()))
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn preset(&self) -> KernelPreset {
        self.preset
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rate(&self, a: usize, b: usize, a2: usize, b2: usize) -> f64 {
        let s = self.states;
        self.rates[((a * s + b) * s + a2) * s + b2]
    }

    pub fn loss_rate(&self, a: usize, b: usize) -> f64 {
        self.loss[a * self.states + b]
    }

    /// The `S² × S²` generator matrix, row = output pair, column = input pair.
    pub fn generator_matrix(&self) -> &[f64] {
        &self.generator
    }

    fn check_tensor(&self, a: &Tensor, min_order: usize) -> Result<()> {
        if a.states() != self.states {
            return Err(Error::Dimension(format!(
                "tensor over {} states, kernel over {}",
                a.states(),
                self.states
            )));
        }
        if a.order() < min_order {
            return Err(Error::Dimension(format!("need order ≥ {min_order}, got {}", a.order())));
        }
        Ok(())
    }

    /// `V(A)` for an order-2 tensor.
    pub fn apply_pair_generator(&self, a: &Tensor) -> Result<Tensor> {
        self.check_tensor(a, 2)?;
        if a.order() != 2 {
            return Err(Error::Dimension(format!("pair generator acts on order 2, got {}", a.order())));
        }
        self.apply_t(a, 0, 1)
    }

    /// `T_{i,r}(A)`: `V` on slots `(i, r)`, identity elsewhere. Slot `i` plays
    /// the first particle; by exchange symmetry `T_{i,r} = T_{r,i}`.
    pub fn apply_t(&self, a: &Tensor, i: usize, r: usize) -> Result<Tensor> {
        self.check_tensor(a, 2)?;
        let j = a.order();
        if i == r || i >= j || r >= j {
            return Err(Error::Argument(format!("invalid slot pair ({i}, {r}) for order {j}")));
        }
        let mut out = Tensor::zeros(self.states, j);
        self.accumulate_t(a.data(), out.data_mut(), j, i, r, 1.0);
        Ok(out)
    }

    /// `out += scale · T_{i,r}(input)` on flat order-`order` buffers.
    pub(crate) fn accumulate_t(&self, input: &[f64], out: &mut [f64], order: usize, i: usize, r: usize, scale: f64) {
        let s = self.states;
        let s2 = s * s;
        let si = s.pow((order - 1 - i) as u32);
        let sr = s.pow((order - 1 - r) as u32);
        let offsets: Vec<usize> = (0..s2).map(|p| (p / s) * si + (p % s) * sr).collect();
        let gen: Vec<f64> = self.generator.iter().map(|g| g * scale).collect();
        let layout = PairLayout::new(s, order, i.min(r), i.max(r));
        match s {
            2 => pair_block::<4>(&gen, &offsets, layout, input, out),
            3 => pair_block::<9>(&gen, &offsets, layout, input, out),
            _ => {
                let mut block = vec![0.0; s2];
                layout.for_each_base(|base| {
                    for (v, off) in block.iter_mut().zip(&offsets) {
                        *v = input[base + off];
                    }
                    for (p, off) in offsets.iter().enumerate() {
                        let row = &gen[p * s2..(p + 1) * s2];
                        let w: f64 = row.iter().zip(&block).map(|(g, v)| g * v).sum();
                        out[base + off] += w;
                    }
                });
            }
        }
    }

    /// `T_j = Σ_{i<r} T_{i,r}`.
    pub fn apply_t_sum(&self, a: &Tensor) -> Result<Tensor> {
        self.check_tensor(a, 0)?;
        let j = a.order();
        let mut out = Tensor::zeros(self.states, j);
        for i in 0..j {
            for r in i + 1..j {
                self.accumulate_t(a.data(), out.data_mut(), j, i, r, 1.0);
            }
        }
        Ok(out)
    }

    /// `C_{i,j+1}(A) = ℓ_{j+1}(T_{i,j+1}(A))` for an order-`(j+1)` tensor.
    pub fn apply_c(&self, a: &Tensor, i: usize) -> Result<Tensor> {
        self.check_tensor(a, 2)?;
        let last = a.order() - 1;
        if i >= last {
            return Err(Error::Argument(format!("C_{{i,j+1}} needs i < {last}, got {i}")));
        }
        Ok(self.apply_t(a, i, last)?.contract_last())
    }

    /// `C_{j+1}(A) = Σ_i C_{i,j+1}(A)`.
    pub fn apply_c_sum(&self, a: &Tensor) -> Result<Tensor> {
        self.check_tensor(a, 2)?;
        let order = a.order();
        let last = order - 1;
        let mut full = Tensor::zeros(self.states, order);
        for i in 0..last {
            self.accumulate_t(a.data(), full.data_mut(), order, i, last, 1.0);
        }
        Ok(full.contract_last())
    }

    /// `Q(F, G) = ℓ₂(V(F ⊗ G))`.
    pub fn mean_field_q(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.states || g.len() != self.states {
            return Err(Error::Dimension(format!(
                "Q needs two length-{} vectors, got {} and {}",
                self.states,
                f.len(),
                g.len()
            )));
        }
        let fg = Tensor::product(&[f, g])?;
        Ok(self.apply_pair_generator(&fg)?.contract_last().into_vec())
    }

    /// Exact `L¹ → L¹` norm of `V`: the largest absolute column sum.
    pub fn operator_norm(&self) -> f64 {
        let s2 = self.states * self.states;
        (0..s2)
            .map(|col| (0..s2).map(|row| self.generator[row * s2 + col].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Flat indices of an order-`order` tensor whose digits at slots `hi < lo`
/// are both zero, as runs of `run` contiguous entries.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairLayout {
    outer: usize,
    outer_stride: usize,
    middle: usize,
    middle_stride: usize,
    run: usize,
}

impl PairLayout {
    pub(crate) fn new(states: usize, order: usize, hi: usize, lo: usize) -> Self {
        debug_assert!(hi < lo && lo < order);
        let s_hi = states.pow((order - 1 - hi) as u32);
        let s_lo = states.pow((order - 1 - lo) as u32);
        Self {
            outer: states.pow(hi as u32),
            outer_stride: s_hi * states,
            middle: s_hi / (s_lo * states),
            middle_stride: s_lo * states,
            run: s_lo,
        }
    }

    pub(crate) fn for_each_base(&self, mut f: impl FnMut(usize)) {
        for h in 0..self.outer {
            for m in 0..self.middle {
                let start = h * self.outer_stride + m * self.middle_stride;
                for l in start..start + self.run {
                    f(l);
                }
            }
        }
    }
}

fn pair_block<const S2: usize>(gen: &[f64], offsets: &[usize], layout: PairLayout, input: &[f64], out: &mut [f64]) {
    let g: [[f64; S2]; S2] = std::array::from_fn(|p| std::array::from_fn(|q| gen[p * S2 + q]));
    let off: [usize; S2] = std::array::from_fn(|q| offsets[q]);
    for h in 0..layout.outer {
        for m in 0..layout.middle {
            let start = h * layout.outer_stride + m * layout.middle_stride;
            for x in start..start + layout.run {
                let v: [f64; S2] = std::array::from_fn(|q| input[x + off[q]]);
                for p in 0..S2 {
                    let mut acc = 0.0;
                    for q in 0..S2 {
                        acc += g[p][q] * v[q];
                    }
                    out[x + off[p]] += acc;
                }
            }
        }
    }
}

/// One-body rate matrix `K₀`, acting as `(K₀F)(a) = Σ_{a'} k0[a][a'] F(a')`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyGenerator {
    states: usize,
    matrix: Vec<f64>,
}

impl OneBodyGenerator {
    pub fn zero(space: StateSpace) -> Self {
        let s = space.size();
        Self { states: s, matrix: vec![0.0; s * s] }
    }

    /// Row-major `S × S` matrix; columns must sum to zero and off-diagonal
    /// entries must be nonnegative.
    pub fn new(space: StateSpace, matrix: Vec<f64>) -> Result<Self> {
        let s = space.size();
        if matrix.len() != s * s {
            return Err(Error::Dimension(format!("K₀ needs {} entries, got {}", s * s, matrix.len())));
        }
        for col in 0..s {
            let sum: f64 = (0..s).map(|row| matrix[row * s + col]).sum();
            let scale: f64 = (0..s).map(|row| matrix[row * s + col].abs()).sum::<f64>().max(1.0);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::Validation(format!("K₀ column {col} sums to {sum:e}, not 0")));
            }
            for row in 0..s {
                if row != col && matrix[row * s + col] < 0.0 {
                    return Err(Error::Validation(format!("K₀ off-diagonal entry ({row},{col}) is negative")));
                }
            }
        }
        Ok(Self { states: s, matrix })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|x| *x == 0.0)
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let s = self.states;
        (0..s).map(|a| (0..s).map(|b| self.matrix[a * s + b] * f[b]).sum()).collect()
    }

    /// `K₀^j = Σ_i 𝕀 ⊗ ... ⊗ K₀ (slot i) ⊗ ... ⊗ 𝕀`.
    pub fn apply_sum(&self, a: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(a.states(), a.order());
        if !self.is_zero() {
            self.accumulate(a.data(), out.data_mut(), a.order(), 1.0);
        }
        out
    }

    pub(crate) fn accumulate(&self, input: &[f64], out: &mut [f64], order: usize, scale: f64) {
        let s = self.states;
        for slot in 0..order {
            let stride = s.pow((order - 1 - slot) as u32);
            for x in 0..input.len() {
                let digit = (x / stride) % s;
                let base = x - digit * stride;
                let w: f64 = (0..s).map(|b| self.matrix[digit * s + b] * input[base + b * stride]).sum();
                out[x] += scale * w;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::digits_into;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(s: usize) -> StateSpace {
        StateSpace::new(s).unwrap()
    }

    fn random_tensor(rng: &mut impl Rng, s: usize, order: usize) -> Tensor {
        let n = s.pow(order as u32);
        Tensor::from_vec(s, order, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_weighted(rng: &mut impl Rng, s: usize) -> PairKernel {
        let mut rates = vec![0.0; s.pow(4)];
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * s + b) * s + c) * s + d;
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    for d in 0..s {
                        let v = rng.gen_range(0.0..1.0);
                        rates[idx(a, b, c, d)] = v;
                        rates[idx(b, a, d, c)] = v;
                    }
                }
            }
        }
        PairKernel::weighted(space(s), rates).unwrap()
    }

    /// Literal gain-loss formula on slots (i, r) with all others fixed.
    fn brute_t(k: &PairKernel, a: &Tensor, i: usize, r: usize) -> Tensor {
        let s = a.states();
        let j = a.order();
        let mut out = Tensor::zeros(s, j);
        let mut x = vec![0; j];
        for flat in 0..a.len() {
            digits_into(flat, s, &mut x);
            let mut v = -k.loss_rate(x[i], x[r]) * a.data()[flat];
            for a2 in 0..s {
                for b2 in 0..s {
                    let mut y = x.clone();
                    y[i] = a2;
                    y[r] = b2;
                    v += k.rate(a2, b2, x[i], x[r]) * a.get(&y);
                }
            }
            out.data_mut()[flat] = v;
        }
        out
    }

    #[test]
    fn state_space_needs_two_states() {
        assert!(StateSpace::new(1).is_err());
        assert!(StateSpace::new(2).is_ok());
    }

    #[test]
    fn swap_kernel_fixes_exchangeable_products() {
        let k = PairKernel::swap(space(3), 1.3).unwrap();
        let f = [0.2, 0.3, 0.5];
        let a = Tensor::power(&f, 2);
        assert!(k.apply_pair_generator(&a).unwrap().l1_norm() < 1e-15);
        assert!(k.mean_field_q(&f, &f).unwrap().iter().all(|q| q.abs() < 1e-15));
    }

    #[test]
    fn uniform_kernel_on_point_mass() {
        let beta = 0.8;
        let s = 3;
        let k = PairKernel::uniform(space(s), beta).unwrap();
        let (c, d) = (2, 1);
        let mut a = Tensor::zeros(s, 2);
        a.data_mut()[c * s + d] = 1.0;
        let v = k.apply_pair_generator(&a).unwrap();
        for x in 0..s {
            for y in 0..s {
                let expect = beta / 9.0 - if (x, y) == (c, d) { beta } else { 0.0 };
                assert!((v.get(&[x, y]) - expect).abs() < 1e-15);
            }
        }
        assert!(v.sum().abs() < 1e-15);
    }

    #[test]
    fn pair_generator_zero_on_zero_and_rejects_shapes() {
        let k = PairKernel::uniform(space(2), 1.0).unwrap();
        assert_eq!(k.apply_pair_generator(&Tensor::zeros(2, 2)).unwrap().l1_norm(), 0.0);
        assert!(k.apply_pair_generator(&Tensor::zeros(3, 2)).is_err());
        assert!(k.apply_pair_generator(&Tensor::zeros(2, 3)).is_err());
    }

    #[test]
    fn apply_t_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = PairKernel::uniform(space(3), 1.0).unwrap();
        let f1 = [0.1, 0.6, 0.3];
        let f2 = [0.5, 0.25, 0.25];
        let f3 = [0.7, 0.2, 0.1];
        let a = Tensor::product(&[&f1, &f2, &f3]).unwrap();
        for (i, r) in [(0, 1), (0, 2), (1, 2), (2, 0)] {
            let t = k.apply_t(&a, i, r).unwrap();
            assert!(t.max_abs_diff(&brute_t(&k, &a, i, r)) < 1e-15);
            assert!(t.sum().abs() < 1e-14);
        }
        let w = random_weighted(&mut rng, 3);
        let b = random_tensor(&mut rng, 3, 4);
        for (i, r) in [(0, 3), (1, 2), (3, 1)] {
            let t = w.apply_t(&b, i, r).unwrap();
            assert!(t.max_abs_diff(&brute_t(&w, &b, i, r)) < 1e-13);
        }
        let two = random_tensor(&mut rng, 3, 2);
        assert_eq!(w.apply_t(&two, 0, 1).unwrap(), w.apply_pair_generator(&two).unwrap());
    }

    #[test]
    fn apply_t_rejects_bad_slots() {
        let k = PairKernel::uniform(space(2), 1.0).unwrap();
        let a = Tensor::zeros(2, 3);
        assert!(k.apply_t(&a, 1, 1).is_err());
        assert!(k.apply_t(&a, 0, 3).is_err());
        assert!(k.apply_c(&a, 2).is_err());
    }

    #[test]
    fn apply_t_on_swap_fixed_point() {
        let k = PairKernel::swap(space(2), 1.0).unwrap();
        let f = [0.3, 0.7];
        let g = [0.9, 0.1];
        let a = Tensor::product(&[&f, &g, &f]).unwrap();
        assert!(k.apply_t(&a, 0, 2).unwrap().l1_norm() < 1e-15);
        assert!(k.apply_t(&a, 0, 1).unwrap().l1_norm() > 0.1);
    }

    #[test]
    fn apply_c_on_product_gives_q_in_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_weighted(&mut rng, 3);
        let f = [0.2, 0.5, 0.3];
        let q = k.mean_field_q(&f, &f).unwrap();
        let j = 3;
        let a = Tensor::power(&f, j + 1);
        for i in 0..j {
            let mut factors: Vec<&[f64]> = vec![&f; j];
            factors[i] = &q;
            let expect = Tensor::product(&factors).unwrap();
            assert!(k.apply_c(&a, i).unwrap().max_abs_diff(&expect) < 1e-15);
        }
        let swap = PairKernel::swap(space(3), 2.0).unwrap();
        assert!(swap.apply_c(&a, 1).unwrap().l1_norm() < 1e-15);
    }

    #[test]
    fn apply_c_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = random_weighted(&mut rng, 2);
        let a = random_tensor(&mut rng, 2, 3);
        for i in 0..2 {
            let c = k.apply_c(&a, i).unwrap();
            let t = brute_t(&k, &a, i, 2);
            for x in 0..2 {
                for y in 0..2 {
                    let expect: f64 = (0..2).map(|z| t.get(&[x, y, z])).sum();
                    assert!((c.get(&[x, y]) - expect).abs() < 1e-14);
                }
            }
        }
        let sum = k.apply_c_sum(&a).unwrap();
        let mut manual = k.apply_c(&a, 0).unwrap();
        manual.add_scaled(&k.apply_c(&a, 1).unwrap(), 1.0);
        assert!(sum.max_abs_diff(&manual) < 1e-15);
    }

    #[test]
    fn q_for_uniform_kernel_relaxes_to_uniform() {
        let beta = 1.7;
        let k = PairKernel::uniform(space(4), beta).unwrap();
        let f = [0.1, 0.2, 0.3, 0.4];
        let q = k.mean_field_q(&f, &f).unwrap();
        for a in 0..4 {
            assert!((q[a] - beta * (0.25 - f[a])).abs() < 1e-15);
        }
        let u = [0.25; 4];
        assert!(k.mean_field_q(&u, &u).unwrap().iter().all(|x| x.abs() < 1e-16));
        assert!(k.mean_field_q(&f, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn operator_norms() {
        let k = PairKernel::uniform(space(2), 1.0).unwrap();
        assert!((k.operator_norm() - 1.5).abs() < 1e-15);
        let sw = PairKernel::swap(space(3), 1.0).unwrap();
        assert!((sw.operator_norm() - 2.0).abs() < 1e-15);
        assert_eq!(PairKernel::uniform(space(3), 0.0).unwrap().operator_norm(), 0.0);
    }

    #[test]
    fn weighted_kernel_validation() {
        let mut rates = vec![0.0; 16];
        rates[1] = 1.0; // Λ(0,0;0,1) without its mirror Λ(0,0;1,0)
        assert!(PairKernel::weighted(space(2), rates).is_err());
        assert!(PairKernel::weighted(space(2), vec![0.0; 15]).is_err());
        assert!(PairKernel::weighted(space(2), vec![-1.0; 16]).is_err());
    }

    #[test]
    fn kernel_from_config() {
        let kv = KeyValues::parse("preset = swap\nS = 3\nbeta = 0.5").unwrap();
        let k = PairKernel::from_config(&kv).unwrap();
        assert_eq!(k.preset(), KernelPreset::Swap);
        assert_eq!(k.rate(0, 1, 1, 0), 0.5);
        let table: Vec<String> = (0..16).map(|_| "0.25".to_string()).collect();
        let text = format!("preset = weighted\nS = 2\nlambda = {}", table.join(", "));
        let w = PairKernel::from_config(&KeyValues::parse(&text).unwrap()).unwrap();
        assert!((w.operator_norm() - 1.5).abs() < 1e-15);
        let err = PairKernel::from_config(&KeyValues::parse("preset = fancy\nS = 2").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn one_body_generator() {
        let k0 = OneBodyGenerator::new(space(2), vec![-1.0, 2.0, 1.0, -2.0]).unwrap();
        let f = [0.5, 0.5];
        let kf = k0.apply(&f);
        assert!((kf.iter().sum::<f64>()).abs() < 1e-15);
        let a = Tensor::power(&f, 2);
        let sum = k0.apply_sum(&a);
        let expect = {
            let mut t = Tensor::product(&[&kf, &f]).unwrap();
            t.add_scaled(&Tensor::product(&[&f, &kf]).unwrap(), 1.0);
            t
        };
        assert!(sum.max_abs_diff(&expect) < 1e-15);
        assert!(OneBodyGenerator::new(space(2), vec![-1.0, 0.0, 0.5, 0.0]).is_err());
        assert!(OneBodyGenerator::new(space(2), vec![1.0, 0.0, -1.0, 0.0]).is_err());
        assert!(OneBodyGenerator::zero(space(2)).is_zero());
    }
}
