//! Dense real tensors over `S^j`.
//!
//! Entries are stored row-major with slot 0 most significant, so the flat
//! index of `(x_0, ..., x_{j-1})` is `sum_k x_k * S^(j-1-k)`. Order 0 is a
//! single scalar. Marginals, tensor powers and correlation errors all live
//! in this type; symmetry is a property checked on demand, not a type-level
//! guarantee, because the pair generator acts on non-symmetric inputs too.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Tolerance used by [`Tensor::check_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    states: usize,
    order: usize,
    data: Vec<f64>,
}

/// Number of entries of an order-`order` tensor, `None` on overflow.
pub fn checked_len(states: usize, order: usize) -> Option<usize> {
    let mut n: usize = 1;
    for _ in 0..order {
        n = n.checked_mul(states)?;
    }
    Some(n)
}

/// Writes the base-`states` digits of `index` into `out` (slot 0 first).
#[inline]
pub fn digits_into(mut index: usize, states: usize, out: &mut [usize]) {
    for slot in (0..out.len()).rev() {
        out[slot] = index % states;
        index /= states;
    }
}

#[inline]
fn flat_index(digits: &[usize], states: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * states + d)
}

impl Tensor {
    pub fn zeros(states: usize, order: usize) -> Self {
        let len = checked_len(states, order).expect("tensor size overflows usize");
        Self { states, order, data: vec![0.0; len] }
    }

    /// Order-0 tensor holding `value`.
    pub fn scalar(states: usize, value: f64) -> Self {
        Self { states, order: 0, data: vec![value] }
    }

    pub fn from_vec(states: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        if states == 0 {
            return Err(Error::Argument("state space must be non-empty".into()));
        }
        match checked_len(states, order) {
            Some(len) if len == data.len() => Ok(Self { states, order, data }),
            Some(len) => Err(Error::Dimension(format!(
                "order-{order} tensor over {states} states needs {len} entries, got {}",
                data.len()
            ))),
            None => Err(Error::Dimension(format!("{states}^{order} overflows"))),
        }
    }

    pub fn vector(values: &[f64]) -> Self {
        Self { states: values.len(), order: 1, data: values.to_vec() }
    }

    /// Outer product `f_0 ⊗ f_1 ⊗ ... ⊗ f_{k-1}`.
    pub fn product(factors: &[&[f64]]) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(Error::Argument("outer product of zero factors".into()));
        };
        let states = first.len();
        if factors.iter().any(|f| f.len() != states) {
            return Err(Error::Dimension("factors have different lengths".into()));
        }
        let mut data = vec![1.0];
        for f in factors {
            let mut next = Vec::with_capacity(data.len() * states);
            for &d in &data {
                next.extend(f.iter().map(|&x| d * x));
            }
            data = next;
        }
        Ok(Self { states, order: factors.len(), data })
    }

    /// Tensor power `f^{⊗order}`; order 0 gives the scalar 1.
    pub fn power(f: &[f64], order: usize) -> Self {
        if order == 0 {
            return Self::scalar(f.len(), 1.0);
        }
        let factors = vec![f; order];
        Self::product(&factors).expect("equal-length factors")
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Stride of `slot` in the flat layout.
    pub fn stride(&self, slot: usize) -> usize {
        self.states.pow((self.order - 1 - slot) as u32)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.order);
        self.data[flat_index(index, self.states)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `ℓ(|A|)`: the sum of absolute entries.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &Tensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.states == other.states && self.order == other.order
    }

    pub fn add_scaled(&mut self, other: &Tensor, c: f64) {
        assert!(self.same_shape(other), "shape mismatch in add_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// The tensor with slots `a` and `b` exchanged.
    pub fn swap_slots(&self, a: usize, b: usize) -> Tensor {
        assert!(a < self.order && b < self.order);
        let mut out = Tensor::zeros(self.states, self.order);
        let mut digits = vec![0; self.order];
        for (x, value) in self.data.iter().enumerate() {
            digits_into(x, self.states, &mut digits);
            digits.swap(a, b);
            out.data[flat_index(&digits, self.states)] = *value;
        }
        out
    }

    /// Largest entrywise change under an adjacent slot transposition.
    /// Adjacent transpositions generate the symmetric group, so zero means
    /// fully symmetric.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut digits = vec![0; self.order];
        for (x, value) in self.data.iter().enumerate() {
            digits_into(x, self.states, &mut digits);
            for k in 0..self.order.saturating_sub(1) {
                if digits[k] == digits[k + 1] {
                    continue;
                }
                digits.swap(k, k + 1);
                let y = flat_index(&digits, self.states);
                digits.swap(k, k + 1);
                worst = worst.max((value - self.data[y]).abs());
            }
        }
        worst
    }

    /// Average over all slot permutations. Entries sharing the same multiset
    /// of digits form one orbit, so averaging per orbit is exact.
    pub fn symmetrized(&self) -> Tensor {
        let mut orbits: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
        let mut digits = vec![0; self.order];
        for (x, value) in self.data.iter().enumerate() {
            digits_into(x, self.states, &mut digits);
            let mut key = digits.clone();
            key.sort_unstable();
            let slot = orbits.entry(key).or_insert((0.0, 0));
            slot.0 += value;
            slot.1 += 1;
        }
        let mut out = Tensor::zeros(self.states, self.order);
        for x in 0..self.data.len() {
            digits_into(x, self.states, &mut digits);
            digits.sort_unstable();
            let (sum, count) = orbits[&digits];
            out.data[x] = sum / count as f64;
        }
        out
    }

    /// Symmetrize-and-compare validation.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let asym = self.asymmetry();
        if asym > tol {
            return Err(Error::Validation(format!(
                "order-{} tensor is not symmetric (deviation {asym:e} > {tol:e})",
                self.order
            )));
        }
        Ok(())
    }

    /// Sum over the last slot.
    pub fn contract_last(&self) -> Tensor {
        assert!(self.order >= 1, "cannot contract a scalar");
        let s = self.states;
        let data = self.data.chunks_exact(s).map(|c| c.iter().sum()).collect();
        Tensor { states: s, order: self.order - 1, data }
    }

    /// Sums out every slot after the first `keep` ones.
    pub fn sum_trailing(&self, keep: usize) -> Tensor {
        assert!(keep <= self.order);
        let block = checked_len(self.states, self.order - keep).unwrap();
        let data = self.data.chunks_exact(block).map(|c| c.iter().sum()).collect();
        Tensor { states: self.states, order: keep, data }
    }

    /// Builds an order-`order` tensor carrying the one-body vector `f` on
    /// each listed slot and `rest` on the remaining slots, in increasing
    /// slot order:
    ///
    /// `out(x) = Π_{(k, f) ∈ ones} f(x_k) · rest(x_{complement})`.
    pub fn embed(order: usize, ones: &[(usize, &[f64])], rest: &Tensor) -> Result<Tensor> {
        let states = rest.states;
        if ones.len() + rest.order != order {
            return Err(Error::Dimension(format!(
                "embedding {} one-body factors and an order-{} tensor into order {order}",
                ones.len(),
                rest.order
            )));
        }
        let mut is_one = vec![false; order];
        for (slot, f) in ones {
            if *slot >= order || is_one[*slot] {
                return Err(Error::Argument(format!("bad or repeated slot {slot}")));
            }
            if f.len() != states {
                return Err(Error::Dimension("one-body factor length differs from S".into()));
            }
            is_one[*slot] = true;
        }
        let rest_slots: Vec<usize> = (0..order).filter(|k| !is_one[*k]).collect();
        let mut out = Tensor::zeros(states, order);
        let mut digits = vec![0; order];
        for x in 0..out.data.len() {
            digits_into(x, states, &mut digits);
            let mut value = 1.0;
            for (slot, f) in ones {
                value *= f[digits[*slot]];
            }
            if value == 0.0 {
                continue;
            }
            let y = rest_slots.iter().fold(0, |acc, &k| acc * states + digits[k]);
            out.data[x] = value * rest.data[y];
        }
        Ok(out)
    }
}
