//! Classical fixed-step fourth-order Runge–Kutta on flat state vectors.

/// Reusable RK4 stepper; owns its stage buffers.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }

    /// Advances `y` from `t` to `t + dt`. `rhs(t, y, out)` must overwrite `out`.
    pub fn step<F>(&mut self, t: f64, dt: f64, y: &mut [f64], mut rhs: F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        rhs(t, y, &mut self.k1);
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = y + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k2);
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = y + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k3);
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = y + dt * k;
        }
        rhs(t + dt, &self.stage, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, y) in y.iter_mut().enumerate() {
            *y += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Splits `[t0, t1]` into the fewest equal steps no longer than `dt`.
pub fn step_plan(t0: f64, t1: f64, dt: f64) -> (usize, f64) {
    let span = t1 - t0;
    if span <= 0.0 {
        return (0, 0.0);
    }
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}
