//! Explicit constants of the chaos estimates and checkers for them.
//!
//! Bounds grow like `e^{C₁ t ‖V‖ j}` with `C₁ ≈ 2.4·10⁴`, far beyond the
//! range of `f64`, so every comparison is made in log space. The reported
//! `bound` is `exp(log_bound)` and serializes as `null` once it overflows.

use crate::correlation::NormRow;
use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::E;

/// Largest `r` accepted by [`subset_alpha_identity`].
pub const MAX_IDENTITY_SUBSET: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsConstants {
    pub c0: f64,
    pub b0: f64,
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `16(2e)^{1+1/(12e)}`.
pub fn pinned_k() -> f64 {
    16.0 * (2.0 * E).powf(1.0 + 1.0 / (12.0 * E))
}

pub fn compute_constants(c0: f64, b0: f64) -> Result<BoundsConstants> {
    if !(c0 >= 1.0) || !(b0 > 0.0) {
        return Err(Error::Argument(format!("need C0 ≥ 1 and B0 > 0, got C0 = {c0}, B0 = {b0}")));
    }
    let k = pinned_k();
    let c2 = k * c0;
    let c1 = 4.0 * k / (1.0 - 1.0 / (24.0 * E)).ln().abs();
    assert!(c1 > 2.0, "B2 needs C1 > 2");
    let b1 = 2.0 * c1;
    let b2 = b0 + 0.5 + 16.0 * c2 * c2 / (c1 - 2.0);
    let d2 = b2.max(8.0 * (E * c2).powi(2));
    let d1 = b1.max(2.0 * c1);
    Ok(BoundsConstants { c0, b0, c1, c2, b1, b2, d1, d2 })
}

/// `α(j, N) = (N - j)/N`.
pub fn alpha(j: usize, n: usize) -> f64 {
    debug_assert!(j <= n);
    (n as f64 - j as f64) / n as f64
}

/// Both sides of `Σ_{K⊂R} (-1)^{|K|} α(j-|K|, N) = α(j,N) δ_{R,∅} - δ_{|R|,1}/N`
/// with `|R| = r`; the left side enumerates all `2^r` subsets.
pub fn subset_alpha_identity(j: usize, n: usize, r: usize) -> Result<(f64, f64)> {
    if r > MAX_IDENTITY_SUBSET {
        return Err(Error::Argument(format!("r = {r} exceeds {MAX_IDENTITY_SUBSET}")));
    }
    if r > j || j > n || n == 0 {
        return Err(Error::Argument(format!("need 0 ≤ r ≤ j ≤ N, got r = {r}, j = {j}, N = {n}")));
    }
    let lhs = (0u32..1 << r)
        .map(|mask| {
            let k = mask.count_ones() as usize;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * alpha(j - k, n)
        })
        .sum();
    let rhs = match r {
        0 => alpha(j, n),
        1 => -1.0 / n as f64,
        _ => 0.0,
    };
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub kind: &'static str,
    pub n: usize,
    pub j: usize,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub log_bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(kind: &'static str, row: &NormRow, log_bound: f64) -> Self {
        let pass = row.value <= 0.0 || row.value.ln() <= log_bound;
        Self { kind, n: row.n, j: row.j, t: row.t, value: row.value, bound: log_bound.exp(), log_bound, pass }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub entries: Vec<BoundCheck>,
    pub pass: bool,
}

impl CheckReport {
    fn from_entries(entries: Vec<BoundCheck>) -> Self {
        let pass = entries.iter().all(|e| e.pass);
        Self { entries, pass }
    }

    pub fn failures(&self) -> Vec<(usize, f64)> {
        self.entries.iter().filter(|e| !e.pass).map(|e| (e.j, e.t)).collect()
    }

    pub fn merge(mut self, other: CheckReport) -> Self {
        self.pass &= other.pass;
        self.entries.extend(other.entries);
        self
    }
}

fn validate_rows(rows: &[NormRow], n: usize) -> Result<()> {
    for row in rows {
        if row.n != n || row.j == 0 || row.t < 0.0 || !row.value.is_finite() || row.value < 0.0 {
            return Err(Error::Argument(format!("invalid row {row:?} for N = {n}")));
        }
    }
    Ok(())
}

/// `ln(j/√N)^j`.
fn log_size(j: usize, n: usize) -> f64 {
    let jf = j as f64;
    jf * (jf.ln() - 0.5 * (n as f64).ln())
}

/// Checks `‖E_j(t)‖₁ ≤ (C₂ e^{C₁ t ‖V‖})^j (j/√N)^j` for every row and, for
/// `j = 1`, also `‖E₁(t)‖₁ ≤ B₂ e^{B₁ t ‖V‖}/N`. Rows at `t = 0` must satisfy
/// the hypothesis `‖E_j(0)‖₁ ≤ C₀^j (j/√N)^j`.
pub fn check_main_theorem(rows: &[NormRow], constants: &BoundsConstants, norm_v: f64, n: usize) -> Result<CheckReport> {
    validate_rows(rows, n)?;
    for row in rows.iter().filter(|r| r.t == 0.0) {
        let log_hyp = row.j as f64 * constants.c0.ln() + log_size(row.j, n);
        if row.value > 0.0 && row.value.ln() > log_hyp + 1e-12 {
            return Err(Error::Hypothesis(format!(
                "‖E_{}(0)‖₁ = {} exceeds C0^j (j/√N)^j = {}",
                row.j,
                row.value,
                log_hyp.exp()
            )));
        }
    }
    let mut entries = Vec::new();
    for row in rows {
        let jf = row.j as f64;
        let log_bound = jf * (constants.c2.ln() + constants.c1 * row.t * norm_v) + log_size(row.j, n);
        entries.push(BoundCheck::new("E_j", row, log_bound));
        if row.j == 1 {
            let log_bound = constants.b2.ln() + constants.b1 * row.t * norm_v - (n as f64).ln();
            entries.push(BoundCheck::new("E_1", row, log_bound));
        }
    }
    Ok(CheckReport::from_entries(entries))
}

fn chaos_check(kind: &'static str, rows: &[NormRow], constants: &BoundsConstants, rate: f64, n: usize) -> Result<CheckReport> {
    validate_rows(rows, n)?;
    let entries = rows
        .iter()
        .map(|row| {
            let jf = row.j as f64;
            let log_bound = constants.d2.ln() + constants.d1 * row.t * rate + 2.0 * jf.ln() - (n as f64).ln();
            BoundCheck::new(kind, row, log_bound)
        })
        .collect();
    Ok(CheckReport::from_entries(entries))
}

/// Checks `‖F_j(t) - F(t)^{⊗j}‖₁ ≤ D₂ e^{D₁ t ‖V‖} j²/N`.
pub fn check_corollary(rows: &[NormRow], constants: &BoundsConstants, norm_v: f64, n: usize) -> Result<CheckReport> {
    chaos_check("chaos", rows, constants, norm_v, n)
}

/// Checks `Tr|F_j(t) - F(t)^{⊗j}| ≤ D₂ e^{2 D₁ t ‖V‖_∞/ħ} j²/N`.
pub fn check_quantum_chaos(
    rows: &[NormRow],
    constants: &BoundsConstants,
    norm_v_inf: f64,
    hbar: f64,
    n: usize,
) -> Result<CheckReport> {
    if !(hbar > 0.0) {
        return Err(Error::Argument("ħ must be positive".into()));
    }
    chaos_check("quantum_chaos", rows, constants, 2.0 * norm_v_inf / hbar, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, j: usize, t: f64, value: f64) -> NormRow {
        NormRow { n, j, t, value }
    }

    #[test]
    fn constants_closed_forms() {
        let c = compute_constants(1.0, 1.0).unwrap();
        let k = 16.0 * (2.0 * E).powf(1.0 + 1.0 / (12.0 * E));
        assert_eq!(c.c2, k);
        assert!((c.c2 - 91.6).abs() < 0.1);
        assert!((c.c1 / 2.37e4 - 1.0).abs() < 0.01, "{}", c.c1);
        assert_eq!(c.b1, 2.0 * c.c1);
        assert_eq!(c.d1, c.b1);
        assert_eq!(c.d2, c.b2.max(8.0 * (E * c.c2).powi(2)));
        assert!(c.c2 >= 1.0 && c.b2 >= 1.0);
        let c2 = compute_constants(2.0, 1.0).unwrap();
        assert!((c2.c2 - 2.0 * c.c2).abs() < 1e-12);
        assert!(compute_constants(0.5, 1.0).is_err());
        assert!(compute_constants(1.0, 0.0).is_err());
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(0, 7), 1.0);
        assert_eq!(alpha(7, 7), 0.0);
        assert!((alpha(3, 10) - 0.7).abs() < 1e-16);
    }

    #[test]
    fn identity_examples() {
        let (l, r) = subset_alpha_identity(5, 20, 0).unwrap();
        assert_eq!((l, r), (alpha(5, 20), alpha(5, 20)));
        let (l, r) = subset_alpha_identity(5, 20, 1).unwrap();
        assert!((l + 0.05).abs() < 1e-15 && r == -0.05);
        let (l, r) = subset_alpha_identity(5, 20, 2).unwrap();
        assert!(l.abs() < 1e-15 && r == 0.0);
        assert!(subset_alpha_identity(30, 40, 25).is_err());
        assert!(subset_alpha_identity(3, 4, 4).is_err());
    }

    #[test]
    fn zero_errors_pass() {
        let c = compute_constants(1.0, 1.0).unwrap();
        let rows: Vec<NormRow> = (1..=8).flat_map(|j| [0.0, 0.5, 1.0].map(|t| row(16, j, t, 0.0))).collect();
        let report = check_main_theorem(&rows, &c, 1.5, 16).unwrap();
        assert!(report.pass);
        assert_eq!(report.entries.len(), 24 + 3);
        assert!(check_corollary(&rows, &c, 1.5, 16).unwrap().pass);
    }

    #[test]
    fn hypothesis_violation_is_refused() {
        let c = compute_constants(1.0, 1.0).unwrap();
        let rows = [row(10_000, 2, 0.0, 3.0)];
        assert!(matches!(check_main_theorem(&rows, &c, 1.0, 10_000), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn constructed_violations_fail() {
        let c = compute_constants(1.0, 1.0).unwrap();
        let n = 1_000_000;
        // at t > 0 with ‖V‖ = 0 the bound is C₂^j (j/√N)^j
        let rows = [row(n, 2, 0.5, 3.0), row(n, 3, 0.5, 0.0)];
        let report = check_main_theorem(&rows, &c, 0.0, n).unwrap();
        assert!(!report.pass);
        assert_eq!(report.failures(), vec![(2, 0.5)]);
        let rows = [row(n, 1, 0.5, 1e3)];
        assert!(!check_corollary(&rows, &c, 0.0, n).unwrap().pass);
        assert!(!check_quantum_chaos(&rows, &c, 0.0, 1.0, n).unwrap().pass);
    }

    #[test]
    fn overflowing_bounds_stay_comparable() {
        let c = compute_constants(1.0, 1.0).unwrap();
        let rows = [row(8, 8, 1.0, 1.0)];
        let report = check_main_theorem(&rows, &c, 1.5, 8).unwrap();
        assert!(report.entries[0].bound.is_infinite());
        assert!(report.entries[0].log_bound.is_finite());
        assert!(report.pass);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"bound\":null"));
    }

    #[test]
    fn rows_are_validated() {
        let c = compute_constants(1.0, 1.0).unwrap();
        assert!(check_corollary(&[row(8, 1, 0.5, 0.1)], &c, 1.0, 9).is_err());
        assert!(check_corollary(&[row(8, 1, 0.5, f64::NAN)], &c, 1.0, 8).is_err());
        assert!(check_quantum_chaos(&[row(8, 1, 0.5, 0.1)], &c, 1.0, 0.0, 8).is_err());
    }
}
