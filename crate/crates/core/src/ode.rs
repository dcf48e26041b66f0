//! Fixed-step classical Runge-Kutta integration over flat state slices.

/// Scratch buffers for one RK4 integration; reuse across steps to keep the
/// inner loop allocation-free.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    /// Advances `y` from `t` to `t + dt` in place. `rhs(t, y, dy)` writes the
    /// derivative into `dy`.
    pub fn step<F>(&mut self, mut rhs: F, t: f64, y: &mut [f64], dt: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        debug_assert_eq!(y.len(), self.dim());
        let half = 0.5 * dt;

        rhs(t, y, &mut self.k1);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = yi + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k2);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = yi + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k3);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = yi + dt * k;
        }
        rhs(t + dt, &self.stage, &mut self.k4);

        let sixth = dt / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// Integrates with `n_steps` equal steps from `t0` to `t1`.
    pub fn integrate<F>(&mut self, mut rhs: F, t0: f64, t1: f64, y: &mut [f64], n_steps: usize)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dt = (t1 - t0) / n_steps as f64;
        for k in 0..n_steps {
            self.step(&mut rhs, t0 + k as f64 * dt, y, dt);
        }
    }
}
