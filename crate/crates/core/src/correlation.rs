//! Correlation errors by inclusion-exclusion over exact marginals.
//!
//! For `J = {1..j}`,
//!
//! ```text
//! E_j = Σ_{K ⊂ J} (-1)^{|K|} F^{⊗K} F_{J∖K}      (F on slots in K)
//! F_j = Σ_{K ⊂ J}            F^{⊗K} E_{J∖K}
//! ```
//!
//! with `F_0 = E_0 = 1`. Subsets are enumerated as bitmasks and each term is
//! placed on its actual slots, so no symmetrization shortcut is taken.

use crate::error::{Error, Result};
use crate::master::validate_probability;
use crate::tensor::{digits_into, Tensor, SYMMETRY_TOL};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest order accepted by the subset enumeration.
pub const MAX_SUBSET_ORDER: usize = 24;

/// `{E_0, ..., E_jmax}` together with the reference one-particle state.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationFamily {
    pub reference: Vec<f64>,
    /// `errors[0]` is the scalar 1; `errors[j]` has order `j`.
    pub errors: Vec<Tensor>,
}

impl CorrelationFamily {
    /// The family with every `E_j = 0`, `j ≥ 1`.
    pub fn zero(reference: &[f64], j_max: usize) -> Self {
        let s = reference.len();
        let mut errors = vec![Tensor::scalar(s, 1.0)];
        errors.extend((1..=j_max).map(|j| Tensor::zeros(s, j)));
        Self { reference: reference.to_vec(), errors }
    }

    pub fn j_max(&self) -> usize {
        self.errors.len() - 1
    }

    pub fn norms(&self) -> Vec<f64> {
        self.errors.iter().map(Tensor::l1_norm).collect()
    }
}

/// `Σ_{K ⊂ J} sign(K) Π_{k∈K} f(x_k) · parts[j - |K|](x_{J∖K})`.
fn subset_sum(f: &[f64], parts: &[&Tensor], j: usize, alternate: bool) -> Result<Tensor> {
    if j > MAX_SUBSET_ORDER {
        return Err(Error::Argument(format!("order {j} exceeds the subset enumeration limit {MAX_SUBSET_ORDER}")));
    }
    let s = f.len();
    let mut out = Tensor::zeros(s, j);
    let mut digits = vec![0; j];
    let masks = 1usize << j;
    for x in 0..out.len() {
        digits_into(x, s, &mut digits);
        let mut acc = 0.0;
        for mask in 0..masks {
            let k = mask.count_ones() as usize;
            let mut weight = if alternate && k % 2 == 1 { -1.0 } else { 1.0 };
            let mut rest = 0usize;
            for (slot, &d) in digits.iter().enumerate() {
                if mask >> (j - 1 - slot) & 1 == 1 {
                    weight *= f[d];
                } else {
                    rest = rest * s + d;
                }
            }
            if weight != 0.0 {
                acc += weight * parts[j - k].data()[rest];
            }
        }
        out.data_mut()[x] = acc;
    }
    Ok(out)
}

fn check_orders(tensors: &[Tensor], s: usize, what: &str) -> Result<()> {
    for (k, t) in tensors.iter().enumerate() {
        if t.order() != k + 1 || t.states() != s {
            return Err(Error::Dimension(format!(
                "{what}[{k}] should have order {} over {s} states, has order {} over {}",
                k + 1,
                t.order(),
                t.states()
            )));
        }
    }
    Ok(())
}

/// Builds `E_1..E_jmax` from marginals `F_1..F_jmax` (`marginals[k]` has order
/// `k+1`) and a one-particle probability vector `f`.
pub fn correlation_error(marginals: &[Tensor], f: &[f64]) -> Result<CorrelationFamily> {
    validate_probability(f)?;
    let s = f.len();
    check_orders(marginals, s, "marginals")?;
    for m in marginals {
        m.check_symmetric(SYMMETRY_TOL)?;
    }
    let one = Tensor::scalar(s, 1.0);
    let mut parts: Vec<&Tensor> = vec![&one];
    parts.extend(marginals.iter());
    let mut errors = vec![one.clone()];
    for j in 1..=marginals.len() {
        errors.push(subset_sum(f, &parts, j, true)?);
    }
    Ok(CorrelationFamily { reference: f.to_vec(), errors })
}

/// Inverts [`correlation_error`]: `F_j = Σ_K F^{⊗K} E_{J∖K}`.
pub fn reconstruct_marginal(family: &CorrelationFamily, j: usize) -> Result<Tensor> {
    if j > family.j_max() {
        return Err(Error::Argument(format!("order {j} above j_max = {}", family.j_max())));
    }
    let parts: Vec<&Tensor> = family.errors.iter().collect();
    subset_sum(&family.reference, &parts, j, false)
}

pub fn l1_norm(a: &Tensor) -> f64 {
    a.l1_norm()
}

/// `‖F_j − F^{⊗j}‖₁`.
pub fn chaos_distance(marginal: &Tensor, f: &[f64]) -> Result<f64> {
    if marginal.states() != f.len() {
        return Err(Error::Dimension("marginal and F disagree on S".into()));
    }
    Ok(marginal.l1_distance(&Tensor::power(f, marginal.order())))
}

/// One `(N, j, t, value)` measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub n: usize,
    pub j: usize,
    pub t: f64,
    pub value: f64,
}

/// CSV with columns `N, j, t, norm`.
pub fn write_norms_csv(rows: &[NormRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "N,j,t,norm")?;
    for r in rows {
        writeln!(w, "{},{},{:.16e},{:.16e}", r.n, r.j, r.t, r.value)?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random symmetric marginals of a random symmetric state of `n` particles.
    pub(crate) fn random_marginals(rng: &mut impl Rng, s: usize, n: usize) -> Vec<Tensor> {
        let len = s.pow(n as u32);
        let raw = Tensor::from_vec(s, n, (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let mut sym = raw.symmetrized();
        let total = sym.sum();
        sym.scale(1.0 / total);
        let mut out = vec![sym];
        while out.last().unwrap().order() > 1 {
            let next = out.last().unwrap().contract_last();
            out.push(next);
        }
        out.reverse();
        out
    }

    fn random_probability(rng: &mut impl Rng, s: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    }

    #[test]
    fn e1_is_marginal_minus_reference() {
        let f = [0.3, 0.7];
        let fam = correlation_error(&[Tensor::vector(&f)], &f).unwrap();
        assert_eq!(fam.errors[1].l1_norm(), 0.0);
        let g = [0.5, 0.5];
        let fam = correlation_error(&[Tensor::vector(&g)], &f).unwrap();
        assert!((fam.errors[1].data()[0] - 0.2).abs() < 1e-16);
        assert_eq!(fam.errors[0].data(), &[1.0]);
    }

    #[test]
    fn factorized_marginals_have_no_correlation() {
        let f = [0.2, 0.5, 0.3];
        let marginals: Vec<Tensor> = (1..=5).map(|j| Tensor::power(&f, j)).collect();
        let fam = correlation_error(&marginals, &f).unwrap();
        for e in &fam.errors[1..] {
            assert!(e.l1_norm() < 1e-15);
        }
    }

    #[test]
    fn point_mass_example_by_subsets() {
        let f = [1.0, 0.0];
        let f1 = Tensor::vector(&[0.0, 1.0]);
        let mut f2 = Tensor::zeros(2, 2);
        f2.data_mut()[3] = 1.0;
        let fam = correlation_error(&[f1, f2], &f).unwrap();
        // δ_(2,2) − δ_1⊗δ_2 − δ_2⊗δ_1 + δ_1⊗δ_1, flat order (1,1),(1,2),(2,1),(2,2)
        assert_eq!(fam.errors[2].data(), &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l1_norm(&fam.errors[2]), 4.0);
    }

    #[test]
    fn reconstruct_simple_cases() {
        let f = [0.25, 0.75];
        let fam = CorrelationFamily::zero(&f, 3);
        assert!(reconstruct_marginal(&fam, 3).unwrap().max_abs_diff(&Tensor::power(&f, 3)) < 1e-16);
        let mut fam = CorrelationFamily::zero(&f, 1);
        fam.errors[1] = Tensor::vector(&[0.05, -0.05]);
        assert_eq!(reconstruct_marginal(&fam, 1).unwrap().data(), &[0.3, 0.7]);
        assert!(reconstruct_marginal(&fam, 2).is_err());
    }

    #[test]
    fn roundtrip_s3_j4() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let marginals = random_marginals(&mut rng, 3, 4);
        let f = random_probability(&mut rng, 3);
        let fam = correlation_error(&marginals, &f).unwrap();
        for (k, m) in marginals.iter().enumerate() {
            let back = reconstruct_marginal(&fam, k + 1).unwrap();
            assert!(back.max_abs_diff(m) < 1e-12);
        }
    }

    #[test]
    fn asymmetric_marginal_rejected() {
        let f = [0.5, 0.5];
        let f2 = Tensor::from_vec(2, 2, vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!(correlation_error(&[Tensor::vector(&f), f2], &f).is_err());
        assert!(correlation_error(&[Tensor::vector(&f), Tensor::zeros(2, 3)], &f).is_err());
    }

    #[test]
    fn chaos_distance_cases() {
        let f = [0.4, 0.6];
        assert_eq!(chaos_distance(&Tensor::power(&f, 3), &f).unwrap(), 0.0);
        let mut m = Tensor::zeros(2, 2);
        m.data_mut()[3] = 1.0;
        assert_eq!(chaos_distance(&m, &[1.0, 0.0]).unwrap(), 2.0);
        let neg = {
            let mut t = m.clone();
            t.scale(-1.0);
            t
        };
        assert_eq!(l1_norm(&neg), l1_norm(&m));
    }

    #[test]
    fn norms_csv() {
        let mut buf = Vec::new();
        write_norms_csv(&[NormRow { n: 8, j: 2, t: 0.5, value: 0.125 }], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "N,j,t,norm\n8,2,5.0000000000000000e-1,1.2500000000000000e-1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn roundtrip_and_norm_bounds(seed in any::<u64>(), s in 2usize..=4, n in 1usize..=6) {
            prop_assume!(s.pow(n as u32) <= 4096);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let marginals = random_marginals(&mut rng, s, n);
            let f = random_probability(&mut rng, s);
            let fam = correlation_error(&marginals, &f).unwrap();
            for j in 1..=n {
                let back = reconstruct_marginal(&fam, j).unwrap();
                prop_assert!(back.max_abs_diff(&marginals[j - 1]) <= 1e-12);
                prop_assert!(fam.errors[j].l1_norm() <= 2f64.powi(j as i32) + 1e-12);
                prop_assert!(fam.errors[j].asymmetry() <= 1e-12);
                // chaos distance ≤ Σ_k C(j,k) ‖E_k‖₁
                let mut binom = 1.0;
                let mut bound = 0.0;
                for k in 1..=j {
                    binom = binom * (j + 1 - k) as f64 / k as f64;
                    bound += binom * fam.errors[k].l1_norm();
                }
                let d = chaos_distance(&marginals[j - 1], &f).unwrap();
                prop_assert!(d <= bound + 1e-12);
                prop_assert!(d <= 2.0 + 1e-12);
            }
        }
    }
}
