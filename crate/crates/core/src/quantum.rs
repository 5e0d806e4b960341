//! Finite-dimensional quantum mean field: `n` qudits of local dimension `d`
//! with `H_N = Σ_i h0_i + (1/N) Σ_{i<j} V_ij`, the Hartree equation
//! `∂_t ρ = (1/iħ)[h0 + h_ρ, ρ]` with `h_ρ = Tr₂(V(I ⊗ ρ))`, and trace-norm
//! correlation errors. Qudit 0 is the most significant tensor factor.

use crate::error::{Error, Result};
use crate::io::{read_f64s, read_header, write_f64s, write_header};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::{Read, Write};

pub type CMatrix = DMatrix<Complex64>;
pub use num_complex::Complex64 as Complex;

/// Default cap on `d^n`.
pub const DEFAULT_DIM_CAP: usize = 256;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Hermiticity tolerance of [`trace_norm`].
pub const TRACE_NORM_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn dim(d: usize, n: usize) -> Result<usize> {
    (0..n)
        .try_fold(1usize, |acc, _| acc.checked_mul(d))
        .ok_or_else(|| Error::Dimension(format!("{d}^{n} overflows")))
}

fn check_cap(d: usize, n: usize, cap: usize) -> Result<usize> {
    let size = dim(d, n)?;
    if size > cap {
        return Err(Error::MemoryCap { entries: size as u128, cap });
    }
    Ok(size)
}

/// Largest entry of `A - A†`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..a.nrows() {
        for c in r..a.ncols() {
            worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus.
pub fn max_entry(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_hermitian(a: &CMatrix, tol: f64, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{what} is not square")));
    }
    let defect = hermiticity_defect(a);
    if defect > tol {
        return Err(Error::Validation(format!("{what} is not Hermitian (defect {defect:e})")));
    }
    Ok(())
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn eigenvalues(a: &CMatrix) -> Vec<f64> {
    hermitian_part(a).symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// `Tr|A|` for Hermitian `A`.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    check_hermitian(a, TRACE_NORM_TOL, "trace-norm argument")?;
    Ok(eigenvalues(a).iter().map(|x| x.abs()).sum())
}

/// `A ⊗ B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn kron_power(a: &CMatrix, n: usize) -> CMatrix {
    (0..n).fold(CMatrix::from_element(1, 1, ONE), |acc, _| kron(&acc, a))
}

/// Traces out all but the first `keep` of `n` qudits.
pub fn partial_trace_matrix(m: &CMatrix, d: usize, n: usize, keep: usize) -> Result<CMatrix> {
    if keep > n {
        return Err(Error::Argument(format!("cannot keep {keep} of {n} qudits")));
    }
    let size = dim(d, n)?;
    if m.nrows() != size || m.ncols() != size {
        return Err(Error::Dimension(format!("expected a {size}×{size} matrix")));
    }
    let kept = dim(d, keep)?;
    let rest = size / kept;
    Ok(CMatrix::from_fn(kept, kept, |x, y| (0..rest).map(|z| m[(x * rest + z, y * rest + z)]).sum()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    d: usize,
    n: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(d: usize, n: usize, data: CMatrix) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(format!("local dimension must be ≥ 2, got {d}")));
        }
        let size = dim(d, n)?;
        if data.nrows() != size || data.ncols() != size {
            return Err(Error::Dimension(format!("density matrix of {n} qudits needs {size}×{size}")));
        }
        check_hermitian(&data, HERMITIAN_TOL, "density matrix")?;
        let tr = data.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!("trace {tr} ≠ 1")));
        }
        let min = eigenvalues(&data).into_iter().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::Validation(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { d, n, data })
    }

    /// `|ψ⟩⟨ψ|` of a normalized single-qudit vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!("state vector has squared norm {norm}")));
        }
        let d = psi.len();
        Self::new(d, 1, CMatrix::from_fn(d, d, |a, b| psi[a] * psi[b].conj()))
    }

    /// `ρ^{⊗n}` of a single-qudit state.
    pub fn product(rho: &DensityMatrix, n: usize, cap: usize) -> Result<Self> {
        if rho.n != 1 {
            return Err(Error::Argument("product needs a one-qudit state".into()));
        }
        check_cap(rho.d, n, cap)?;
        Ok(Self { d: rho.d, n, data: kron_power(&rho.data, n) })
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn qudits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }

    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        if keep == 0 || keep > self.n {
            return Err(Error::Argument(format!("keep must lie in 1..={}, got {keep}", self.n)));
        }
        DensityMatrix::new(self.d, keep, partial_trace_matrix(&self.data, self.d, self.n, keep)?)
    }

    /// Header `d, n`, then row-major `(re, im)` pairs.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        write_matrix(w, self.d, self.n, &self.data)
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let (d, n, m) = read_matrix(r)?;
        Self::new(d, n, m)
    }
}

pub fn write_matrix(w: &mut impl Write, d: usize, n: usize, m: &CMatrix) -> Result<()> {
    write_header(w, &[d as u64, n as u64])?;
    let mut flat = Vec::with_capacity(2 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            flat.push(m[(r, c)].re);
            flat.push(m[(r, c)].im);
        }
    }
    write_f64s(w, &flat)
}

pub fn read_matrix(r: &mut impl Read) -> Result<(usize, usize, CMatrix)> {
    let [d, n] = read_header::<2>(r)?;
    let (d, n) = (d as usize, n as usize);
    let size = check_cap(d, n, 1 << 16)?;
    let flat = read_f64s(r, 2 * size * size)?;
    Ok((d, n, CMatrix::from_fn(size, size, |a, b| {
        let k = 2 * (a * size + b);
        Complex64::new(flat[k], flat[k + 1])
    })))
}

/// Pair interaction `V` on `C^d ⊗ C^d` and the reduced Planck constant.
#[derive(Clone, Debug, PartialEq)]
pub struct PairHamiltonian {
    d: usize,
    v: CMatrix,
    hbar: f64,
}

fn swap_matrix(d: usize) -> CMatrix {
    CMatrix::from_fn(d * d, d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { ZERO })
}

impl PairHamiltonian {
    pub fn new(d: usize, v: CMatrix, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar <= 1.0) {
            return Err(Error::Argument(format!("ħ must lie in (0, 1], got {hbar}")));
        }
        if v.nrows() != d * d || v.ncols() != d * d {
            return Err(Error::Dimension(format!("V must be {0}×{0}", d * d)));
        }
        check_hermitian(&v, HERMITIAN_TOL, "V")?;
        let swap = swap_matrix(d);
        let defect = max_entry(&(&swap * &v * &swap - &v));
        if defect > HERMITIAN_TOL {
            return Err(Error::Validation(format!("V is not swap-symmetric (defect {defect:e})")));
        }
        Ok(Self { d, v, hbar })
    }

    /// `V = g (σ_z ⊗ σ_z + SWAP)/2` on qubits.
    pub fn default_coupling(g: f64, hbar: f64) -> Result<Self> {
        let zz = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE, -ONE, ONE]));
        Self::new(2, (zz + swap_matrix(2)).scale(0.5 * g), hbar)
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Operator norm `‖V‖_∞` (largest absolute eigenvalue).
    pub fn norm_inf(&self) -> f64 {
        eigenvalues(&self.v).into_iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `h_ρ = Tr₂(V(I ⊗ ρ))`, i.e. `h_ρ[a,a'] = Σ_{b,b'} V[(a,b),(a',b')] ρ[b',b]`.
    pub fn hartree_field(&self, rho: &CMatrix) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |a, a2| {
            let mut acc = ZERO;
            for b in 0..d {
                for b2 in 0..d {
                    acc += self.v[(a * d + b, a2 * d + b2)] * rho[(b2, b)];
                }
            }
            acc
        })
    }

    /// `Tr₂([V, ρ ⊗ ρ])`.
    pub fn reduced_pair_commutator(&self, rho: &CMatrix) -> CMatrix {
        let rr = kron(rho, rho);
        let comm = &self.v * &rr - &rr * &self.v;
        partial_trace_matrix(&comm, self.d, 2, 1).expect("two qudits")
    }
}

fn check_local(h0: &CMatrix, d: usize) -> Result<()> {
    if h0.nrows() != d || h0.ncols() != d {
        return Err(Error::Dimension(format!("h0 must be {d}×{d}")));
    }
    check_hermitian(h0, HERMITIAN_TOL, "h0")
}

/// `H_N = Σ_i h0_i + (1/N) Σ_{i<j} V_ij` on `n` qudits.
pub fn n_body_hamiltonian(h0: &CMatrix, pair: &PairHamiltonian, n: usize, cap: usize) -> Result<CMatrix> {
    let d = pair.d;
    check_local(h0, d)?;
    let size = check_cap(d, n, cap)?;
    let stride = |k: usize| d.pow((n - 1 - k) as u32);
    let digit = |x: usize, k: usize| (x / stride(k)) % d;
    let mut h = CMatrix::zeros(size, size);
    let inv_n = 1.0 / n as f64;
    for x in 0..size {
        for k in 0..n {
            let a = digit(x, k);
            let base = x - a * stride(k);
            for a2 in 0..d {
                h[(base + a2 * stride(k), x)] += h0[(a2, a)];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (digit(x, i), digit(x, j));
                let base = x - a * stride(i) - b * stride(j);
                for a2 in 0..d {
                    for b2 in 0..d {
                        h[(base + a2 * stride(i) + b2 * stride(j), x)] += pair.v[(a2 * d + b2, a * d + b)] * inv_n;
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Exact evolution `ρ(t) = e^{-iHt/ħ} ρ0 e^{iHt/ħ}` at each checkpoint, from a
/// single eigendecomposition of `H_N`.
pub fn evolve_von_neumann_at(
    h0: &CMatrix,
    pair: &PairHamiltonian,
    rho0: &DensityMatrix,
    times: &[f64],
    cap: usize,
) -> Result<Vec<DensityMatrix>> {
    if rho0.d != pair.d {
        return Err(Error::Dimension("state and V disagree on d".into()));
    }
    let h = n_body_hamiltonian(h0, pair, rho0.n, cap)?;
    let eig = h.symmetric_eigen();
    let u = eig.eigenvectors;
    let u_adj = u.adjoint();
    let rotated = &u_adj * &rho0.data * &u;
    let size = rotated.nrows();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let phases: Vec<Complex64> =
            eig.eigenvalues.iter().map(|e| Complex64::from_polar(1.0, -e * t / pair.hbar)).collect();
        let evolved = CMatrix::from_fn(size, size, |r, c| phases[r] * rotated[(r, c)] * phases[c].conj());
        let data = hermitian_part(&(&u * evolved * &u_adj));
        out.push(DensityMatrix::new(rho0.d, rho0.n, data)?);
    }
    Ok(out)
}

pub fn evolve_von_neumann(
    h0: &CMatrix,
    pair: &PairHamiltonian,
    rho0: &DensityMatrix,
    t_final: f64,
) -> Result<DensityMatrix> {
    Ok(evolve_von_neumann_at(h0, pair, rho0, &[t_final], DEFAULT_DIM_CAP)?.remove(0))
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `(1/iħ)[H, ρ]`.
fn liouville(h: &CMatrix, rho: &CMatrix, hbar: f64) -> CMatrix {
    commutator(h, rho) * Complex64::new(0.0, -1.0 / hbar)
}

#[derive(Clone, Debug)]
pub struct HartreeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

impl HartreeTrajectory {
    pub fn last(&self) -> &CMatrix {
        self.states.last().expect("initial state present")
    }
}

/// Largest deviation tolerated between `Tr₂[V, ρ⊗ρ]` and `[h_ρ, ρ]`.
pub const HARTREE_IDENTITY_TOL: f64 = 1e-12;

/// RK4 for the Hartree equation. At every step the reduced pair commutator is
/// compared with `[h_ρ, ρ]`, and trace and Hermiticity drift are bounded by
/// `10⁻⁹`.
pub fn solve_hartree(
    h0: &CMatrix,
    pair: &PairHamiltonian,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Result<HartreeTrajectory> {
    if rho0.n != 1 || rho0.d != pair.d {
        return Err(Error::Argument("Hartree needs a one-qudit state matching V".into()));
    }
    check_local(h0, pair.d)?;
    if !(dt > 0.0) || t_final < 0.0 {
        return Err(Error::Argument("need dt > 0 and t_final ≥ 0".into()));
    }
    let hbar = pair.hbar;
    let rhs = |rho: &CMatrix| liouville(&(h0 + pair.hartree_field(rho)), rho, hbar);
    let (steps, h) = crate::ode::step_plan(0.0, t_final, dt);
    let mut rho = rho0.data.clone();
    let mut times = vec![0.0];
    let mut states = vec![rho.clone()];
    for k in 0..steps {
        let identity_gap = max_entry(&(pair.reduced_pair_commutator(&rho) - commutator(&pair.hartree_field(&rho), &rho)));
        if identity_gap > HARTREE_IDENTITY_TOL {
            return Err(Error::Validation(format!("Hartree identity violated by {identity_gap:e}")));
        }
        let k1 = rhs(&rho);
        let k2 = rhs(&(&rho + &k1 * Complex64::from(h / 2.0)));
        let k3 = rhs(&(&rho + &k2 * Complex64::from(h / 2.0)));
        let k4 = rhs(&(&rho + &k3 * Complex64::from(h)));
        rho += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(h / 6.0);
        let tr = rho.trace();
        if (tr - ONE).norm() > 1e-9 || hermiticity_defect(&rho) > 1e-9 {
            return Err(Error::Validation(format!("Hartree drift at step {k}: trace {tr}")));
        }
        times.push(if k + 1 == steps { t_final } else { (k + 1) as f64 * h });
        states.push(rho.clone());
    }
    Ok(HartreeTrajectory { times, states })
}

/// `ρ` on the slots set in `mask` and `rest` on the others, as a `j`-qudit
/// operator. Bit `j-1-k` of `mask` marks slot `k`.
fn embed_operator(j: usize, d: usize, mask: usize, rho: &CMatrix, rest: &CMatrix) -> CMatrix {
    let size = d.pow(j as u32);
    let digits = |x: usize| -> Vec<usize> { (0..j).map(|k| (x / d.pow((j - 1 - k) as u32)) % d).collect() };
    let all: Vec<Vec<usize>> = (0..size).map(digits).collect();
    let rest_index = |ds: &[usize]| {
        (0..j).filter(|k| mask & (1 << (j - 1 - k)) == 0).fold(0, |acc, k| acc * d + ds[k])
    };
    CMatrix::from_fn(size, size, |x, y| {
        let (dx, dy) = (&all[x], &all[y]);
        let mut v = rest[(rest_index(dx), rest_index(dy))];
        for k in (0..j).filter(|k| mask & (1 << (j - 1 - k)) != 0) {
            v *= rho[(dx[k], dy[k])];
        }
        v
    })
}

/// `E_0 = 1` and `E_j = Σ_{K⊂J} (-1)^{|K|} ρ^{⊗K} ⊗ ρ_{j-|K|}` on the
/// remaining slots; `marginals[k]` is `ρ_{k+1}`.
pub fn quantum_correlation_error(marginals: &[CMatrix], rho: &CMatrix) -> Result<Vec<CMatrix>> {
    let d = rho.nrows();
    if !rho.is_square() || d < 2 {
        return Err(Error::Dimension("reference state must be a square matrix with d ≥ 2".into()));
    }
    let j_max = marginals.len();
    if j_max > crate::correlation::MAX_SUBSET_ORDER {
        return Err(Error::Argument(format!("j_max = {j_max} is too large")));
    }
    let mut blocks = vec![CMatrix::from_element(1, 1, ONE)];
    for (k, m) in marginals.iter().enumerate() {
        let size = dim(d, k + 1)?;
        if m.nrows() != size || m.ncols() != size {
            return Err(Error::Dimension(format!("ρ_{} must be {size}×{size}", k + 1)));
        }
        check_hermitian(m, HERMITIAN_TOL, "marginal")?;
        blocks.push(m.clone());
    }
    let mut out = vec![CMatrix::from_element(1, 1, ONE)];
    for j in 1..=j_max {
        let size = d.pow(j as u32);
        let mut e = CMatrix::zeros(size, size);
        for mask in 0usize..1 << j {
            let k = mask.count_ones() as usize;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            e += embed_operator(j, d, mask, rho, &blocks[j - k]) * Complex64::from(sign);
        }
        out.push(hermitian_part(&e));
    }
    Ok(out)
}

/// `Tr|ρ_j - ρ^{⊗j}|`.
pub fn quantum_chaos_distance(marginal: &CMatrix, rho: &CMatrix, j: usize) -> Result<f64> {
    let power = kron_power(rho, j);
    if power.shape() != marginal.shape() {
        return Err(Error::Dimension("marginal and ρ^{⊗j} differ in shape".into()));
    }
    trace_norm(&(marginal - power))
}
