//! Deterministic fixed-step closed-loop simulation of a plant driven by
//! either a pure high-gain feedback or the internal-model regulator, with
//! optional high-pass coloured measurement noise.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, RegulatorError, Result};
use crate::format::fmt_f64;
use crate::internal_model::OscillatorBank;
use crate::ode::Rk4;
use crate::plants::Plant;

/// Any state component beyond this magnitude aborts the run.
pub const OVERFLOW_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub enum Controller {
    /// `u = -sigma (e + v)`.
    HighGain { sigma: f64 },
    /// `z' = Phi z + Gamma (e + v)`, `u = -sigma e + mu M^T N_z (z - M (e + v))`.
    InternalModel(OscillatorBank),
}

impl Controller {
    pub fn high_gain(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", format!("{sigma} must be positive")));
        }
        Ok(Self::HighGain { sigma })
    }

    /// Controller state dimension (0 for the static high-gain law).
    pub fn dim(&self) -> usize {
        match self {
            Self::HighGain { .. } => 0,
            Self::InternalModel(bank) => bank.dim(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Self::HighGain { sigma } => *sigma,
            Self::InternalModel(bank) => bank.sigma(),
        }
    }

    #[inline]
    fn output(&self, z: &[f64], e: f64, v: f64) -> f64 {
        match self {
            Self::HighGain { sigma } => -sigma * (e + v),
            Self::InternalModel(bank) => bank.control_split(z, e, e + v),
        }
    }

    #[inline]
    fn rhs(&self, z: &[f64], e_measured: f64, dz: &mut [f64]) {
        if let Self::InternalModel(bank) = self {
            bank.rhs_into(z, e_measured, dz);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub e0: f64,
    /// Controller initial state; `None` means zero.
    pub z0: Option<Vec<f64>>,
    pub record_stride: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// The benchmark protocol: `x(0) = (1, -2)`, `e(0) = 4`, `z(0) = 0`, 150 s
    /// at `dt = 1e-4`, recording at 100 Hz.
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_end: 150.0,
            x0: vec![1.0, -2.0],
            e0: 4.0,
            z0: None,
            record_stride: 100,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(invalid("t_end", format!("{} must be at least dt", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Band-limited white noise coloured by `H(s) = s^2 / (s^2 + 3 s + 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub enabled: bool,
    /// White-noise power (variance times seconds).
    pub power: f64,
}

impl NoiseModel {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn with_power(power: f64) -> Self {
        Self {
            enabled: true,
            power,
        }
    }
}

/// Tustin discretization of `s^2 / (s^2 + 3 s + 2)`, transposed direct form II.
#[derive(Debug, Clone)]
pub struct HighPassFilter {
    b: [f64; 3],
    a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl HighPassFilter {
    pub fn new(dt: f64) -> Self {
        let k = 2.0 / dt;
        let k2 = k * k;
        let a0 = k2 + 3.0 * k + 2.0;
        Self {
            b: [k2 / a0, -2.0 * k2 / a0, k2 / a0],
            a: [(4.0 - 2.0 * k2) / a0, (k2 - 3.0 * k + 2.0) / a0],
            s1: 0.0,
            s2: 0.0,
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Per-run noise generator; one sample per integration step.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    white: Option<Normal<f64>>,
    filter: HighPassFilter,
}

impl NoiseSource {
    pub fn new(power: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(invalid("noise power", format!("{power} must be nonnegative")));
        }
        let white = if power > 0.0 {
            Some(Normal::new(0.0, (power / dt).sqrt()).map_err(|e| invalid("noise power", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            white,
            filter: HighPassFilter::new(dt),
        })
    }

    pub fn next_sample(&mut self) -> f64 {
        match &self.white {
            Some(n) => {
                let w = n.sample(&mut self.rng);
                self.filter.process(w)
            }
            None => 0.0,
        }
    }
}

/// `n` samples of coloured noise, identical to what [`run`] injects for the
/// same `(power, dt, seed)`.
pub fn make_noise(power: f64, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = NoiseSource::new(power, dt, seed)?;
    Ok((0..n).map(|_| src.next_sample()).collect())
}

/// Instantaneous closed-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub t: f64,
    pub x: Vec<f64>,
    pub e: f64,
    pub z: Vec<f64>,
}

/// Closed-loop integrator with preallocated buffers. The packed state is
/// `[x, e, z]`.
pub struct Stepper<'a, P: Plant + ?Sized> {
    plant: &'a P,
    controller: &'a Controller,
    rk: Rk4,
    y: Vec<f64>,
    n: usize,
}

impl<'a, P: Plant + ?Sized> Stepper<'a, P> {
    pub fn new(plant: &'a P, controller: &'a Controller, x0: &[f64], e0: f64, z0: Option<&[f64]>) -> Result<Self> {
        let n = plant.state_dim();
        if x0.len() != n {
            return Err(RegulatorError::DimensionMismatch {
                expected: n,
                got: x0.len(),
            });
        }
        let nz = controller.dim();
        let mut y = Vec::with_capacity(n + 1 + nz);
        y.extend_from_slice(x0);
        y.push(e0);
        match z0 {
            Some(z) if z.len() != nz => {
                return Err(RegulatorError::DimensionMismatch {
                    expected: nz,
                    got: z.len(),
                })
            }
            Some(z) => y.extend_from_slice(z),
            None => y.resize(n + 1 + nz, 0.0),
        }
        Ok(Self {
            plant,
            controller,
            rk: Rk4::new(y.len()),
            y,
            n,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.y[..self.n]
    }

    pub fn e(&self) -> f64 {
        self.y[self.n]
    }

    pub fn z(&self) -> &[f64] {
        &self.y[self.n + 1..]
    }

    /// Control input at the current state for measurement noise `v`.
    pub fn control(&self, v: f64) -> f64 {
        self.controller.output(self.z(), self.e(), v)
    }

    /// One RK4 step from `t`, holding `v` constant across the stages.
    pub fn step(&mut self, t: f64, dt: f64, v: f64) -> Result<()> {
        let (plant, controller, n) = (self.plant, self.controller, self.n);
        self.rk.step(
            |t, y, dy| {
                let (x, rest) = y.split_at(n);
                let (e, z) = (rest[0], &rest[1..]);
                let (dx, drest) = dy.split_at_mut(n);
                plant.f(t, x, e, dx);
                drest[0] = plant.q(t, x, e) + controller.output(z, e, v);
                controller.rhs(z, e + v, &mut drest[1..]);
            },
            t,
            &mut self.y,
            dt,
        );
        if let Some(i) = self.y.iter().position(|v| !(v.abs() <= OVERFLOW_LIMIT)) {
            return Err(RegulatorError::Overflow {
                t: t + dt,
                detail: format!("state component {i} = {} exceeds {OVERFLOW_LIMIT:e}", self.y[i]),
            });
        }
        Ok(())
    }
}

/// Single RK4 step of the closed loop; convenience wrapper around
/// [`Stepper`] for one-off use.
pub fn step_rk4<P: Plant + ?Sized>(
    plant: &P,
    controller: &Controller,
    state: &LoopState,
    dt: f64,
    v: f64,
) -> Result<LoopState> {
    let mut s = Stepper::new(plant, controller, &state.x, state.e, Some(&state.z))?;
    s.step(state.t, dt, v)?;
    Ok(LoopState {
        t: state.t + dt,
        x: s.x().to_vec(),
        e: s.e(),
        z: s.z().to_vec(),
    })
}

/// Uniformly sampled closed-loop record. `x` and `z` are row-major with
/// `n_x` and `n_z` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_x: usize,
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub n_z: usize,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Spacing between recorded samples.
    pub sample_dt: f64,
}

impl Trajectory {
    fn with_capacity(n_x: usize, n_z: usize, cap: usize, sample_dt: f64) -> Self {
        Self {
            times: Vec::with_capacity(cap),
            n_x,
            x: Vec::with_capacity(cap * n_x),
            e: Vec::with_capacity(cap),
            n_z,
            z: Vec::with_capacity(cap * n_z),
            u: Vec::with_capacity(cap),
            v: Vec::with_capacity(cap),
            sample_dt,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.n_z..(i + 1) * self.n_z]
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Largest absolute state component over the record.
    pub fn sup_state(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.e)
            .chain(&self.z)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,e,u,v,x1..xn,z1..zk`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t,e,u,v");
        for i in 1..=self.n_x {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=self.n_z {
            header.push_str(&format!(",z{i}"));
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            line.push_str(&fmt_f64(self.times[i]));
            for v in [self.e[i], self.u[i], self.v[i]].into_iter().chain(self.x_row(i).iter().copied()).chain(self.z_row(i).iter().copied()) {
                line.push(',');
                line.push_str(&fmt_f64(v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Integrates the closed loop from `t = 0` to `t_end`.
pub fn run<P: Plant + ?Sized>(plant: &P, controller: &Controller, sim: &SimConfig, noise: &NoiseModel) -> Result<Trajectory> {
    sim.validate()?;
    let n_steps = sim.n_steps();
    let mut stepper = Stepper::new(plant, controller, &sim.x0, sim.e0, sim.z0.as_deref())?;
    let power = if noise.enabled { noise.power } else { 0.0 };
    let mut source = NoiseSource::new(power, sim.dt, sim.seed)?;

    let stride = sim.record_stride;
    let mut traj = Trajectory::with_capacity(
        plant.state_dim(),
        controller.dim(),
        n_steps / stride + 1,
        sim.dt * stride as f64,
    );
    let record = |traj: &mut Trajectory, k: usize, s: &Stepper<'_, P>, v: f64| {
        traj.times.push(k as f64 * sim.dt);
        traj.x.extend_from_slice(s.x());
        traj.e.push(s.e());
        traj.z.extend_from_slice(s.z());
        traj.u.push(s.control(v));
        traj.v.push(v);
    };

    let mut v = source.next_sample();
    record(&mut traj, 0, &stepper, v);
    for k in 0..n_steps {
        stepper.step(k as f64 * sim.dt, sim.dt, v)?;
        v = source.next_sample();
        if (k + 1) % stride == 0 {
            record(&mut traj, k + 1, &stepper, v);
        }
    }
    Ok(traj)
}
