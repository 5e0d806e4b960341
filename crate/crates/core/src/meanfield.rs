//! The one-particle kinetic equation `dF/dt = K₀F + Q(F, F)`.

use crate::error::{Error, Result};
use crate::master::validate_probability;
use crate::model::{OneBodyGenerator, PairKernel};
use crate::ode::{step_plan, Rk4};
use crate::tensor::Tensor;
use std::io::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl MeanFieldTrajectory {
    /// State at a grid time; errors when `t` is not on the grid.
    pub fn at(&self, t: f64) -> Result<&[f64]> {
        self.times
            .iter()
            .position(|g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|k| self.states[k].as_slice())
            .ok_or_else(|| Error::Argument(format!("t = {t} is not on the mean-field grid")))
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial state")
    }

    /// CSV with columns `t, F[1..S]`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let s = self.states.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=s).map(|a| format!("F{a}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, f) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(*t).chain(f.iter().copied()).map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Writes `K₀F + Q(F, F)` into `out`.
pub fn mean_field_rhs(kernel: &PairKernel, k0: &OneBodyGenerator, f: &[f64], out: &mut [f64]) {
    let q = kernel.mean_field_q(f, f).expect("length checked by caller");
    out.copy_from_slice(&q);
    if !k0.is_zero() {
        for (o, k) in out.iter_mut().zip(k0.apply(f)) {
            *o += k;
        }
    }
}

/// RK4 trajectory on the grid `0, dt, 2dt, ...`, ending exactly at `t_final`.
pub fn solve_mean_field(
    kernel: &PairKernel,
    k0: &OneBodyGenerator,
    f0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<MeanFieldTrajectory> {
    validate_probability(f0)?;
    if f0.len() != kernel.states() || k0.states() != kernel.states() {
        return Err(Error::Dimension("f0, kernel and K₀ disagree on S".into()));
    }
    if !(dt > 0.0) || t_final < 0.0 {
        return Err(Error::Argument("need dt > 0 and t_final ≥ 0".into()));
    }
    let (steps, h) = step_plan(0.0, t_final, dt);
    let mut y = f0.to_vec();
    let mut rk = Rk4::new(y.len());
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    for k in 0..steps {
        let t = k as f64 * h;
        rk.step(t, h, &mut y, |_, f, d| mean_field_rhs(kernel, k0, f, d));
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::NegativeProbability { value: min, time: t + h });
        }
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("mean-field mass drifted to {sum}")));
        }
        times.push(if k + 1 == steps { t_final } else { (k + 1) as f64 * h });
        states.push(y.clone());
    }
    Ok(MeanFieldTrajectory { times, states })
}

/// `F^{⊗j}` as a tensor.
pub fn tensor_power(f: &[f64], j: usize) -> Tensor {
    Tensor::power(f, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;

    #[test]
    fn uniform_kernel_closed_form() {
        let sp = StateSpace::new(2).unwrap();
        let k = PairKernel::uniform(sp, 1.0).unwrap();
        let k0 = OneBodyGenerator::zero(sp);
        let traj = solve_mean_field(&k, &k0, &[0.9, 0.1], 2.0, 1e-2).unwrap();
        for (t, f) in traj.times.iter().zip(&traj.states) {
            let e = 0.4 * (-t).exp();
            assert!((f[0] - (0.5 + e)).abs() < 1e-10);
            assert!((f[1] - (0.5 - e)).abs() < 1e-10);
        }
        assert_eq!(*traj.times.last().unwrap(), 2.0);
        assert_eq!(traj.times.len(), 201);
    }

    #[test]
    fn fixed_points() {
        let sp = StateSpace::new(3).unwrap();
        let k0 = OneBodyGenerator::zero(sp);
        let f0 = [0.6, 0.3, 0.1];
        let swap = PairKernel::swap(sp, 2.0).unwrap();
        let traj = solve_mean_field(&swap, &k0, &f0, 1.0, 0.1).unwrap();
        assert_eq!(traj.last(), &f0);
        let uniform = PairKernel::uniform(sp, 2.0).unwrap();
        let u = [1.0 / 3.0; 3];
        let traj = solve_mean_field(&uniform, &k0, &u, 1.0, 0.1).unwrap();
        assert!(traj.last().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_non_probability() {
        let sp = StateSpace::new(2).unwrap();
        let k = PairKernel::uniform(sp, 1.0).unwrap();
        let k0 = OneBodyGenerator::zero(sp);
        assert!(solve_mean_field(&k, &k0, &[0.5, 0.6], 1.0, 0.1).is_err());
        assert!(solve_mean_field(&k, &k0, &[1.5, -0.5], 1.0, 0.1).is_err());
    }

    #[test]
    fn tensor_power_tracks_formal_hierarchy_limit() {
        // d/dt F^{⊗j} = K₀^j F^{⊗j} + C_{j+1}(F^{⊗(j+1)}), checked by
        // central differences along the solved trajectory.
        let sp = StateSpace::new(3).unwrap();
        let mut rates = vec![0.0; 81];
        for (i, r) in rates.iter_mut().enumerate() {
            let (a, b, c, d) = (i / 27, (i / 9) % 3, (i / 3) % 3, i % 3);
            *r = 0.1 + 0.05 * ((a + b) as f64) + 0.02 * ((c * d) as f64) + 0.01 * ((a * c + b * d) as f64);
        }
        let k = PairKernel::weighted(sp, rates).unwrap();
        let k0 = OneBodyGenerator::new(sp, vec![-0.3, 0.1, 0.0, 0.3, -0.1, 0.2, 0.0, 0.0, -0.2]).unwrap();
        let dt = 1e-3;
        let traj = solve_mean_field(&k, &k0, &[0.5, 0.3, 0.2], 0.5, dt).unwrap();
        let mid = 250;
        let f = &traj.states[mid];
        for j in 1..=3 {
            let mut fd = tensor_power(&traj.states[mid + 1], j);
            fd.add_scaled(&tensor_power(&traj.states[mid - 1], j), -1.0);
            fd.scale(1.0 / (2.0 * dt));
            let mut rhs = k0.apply_sum(&tensor_power(f, j));
            rhs.add_scaled(&k.apply_c_sum(&tensor_power(f, j + 1)).unwrap(), 1.0);
            assert!(fd.max_abs_diff(&rhs) < 1e-6, "j = {j}: {}", fd.max_abs_diff(&rhs));
        }
    }

    #[test]
    fn csv_export() {
        let traj = MeanFieldTrajectory { times: vec![0.0, 0.5], states: vec![vec![1.0, 0.0], vec![0.75, 0.25]] };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,F1,F2");
        assert!(lines[2].starts_with("5.0000000000000000e-1,7.5"));
        assert_eq!(traj.at(0.5).unwrap(), &[0.75, 0.25]);
        assert!(traj.at(0.25).is_err());
    }
}
