//! Periodic single-input plants in normal form
//!
//! ```text
//! x' = f(t, x, e)
//! e' = q(t, x, e) + u
//! ```
//!
//! with `f`, `q` periodic in `t`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid, RegulatorError, Result};

/// A plant in normal form with a scalar regulated output `e`.
///
/// Implementations must be free of shared mutable state so that one plant can
/// be evaluated from many simulation threads at once.
pub trait Plant: Send + Sync {
    /// Dimension of the zero-dynamics state `x`.
    fn state_dim(&self) -> usize;

    /// Period `T` of the time dependence, in seconds.
    fn period(&self) -> f64;

    /// Writes `f(t, x, e)` into `dx`.
    fn f(&self, t: f64, x: &[f64], e: f64, dx: &mut [f64]);

    /// Drift of the regulated output, `q(t, x, e)`.
    fn q(&self, t: f64, x: &[f64], e: f64) -> f64;
}

impl<P: Plant + ?Sized> Plant for Box<P> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn period(&self) -> f64 {
        (**self).period()
    }
    fn f(&self, t: f64, x: &[f64], e: f64, dx: &mut [f64]) {
        (**self).f(t, x, e, dx)
    }
    fn q(&self, t: f64, x: &[f64], e: f64) -> f64 {
        (**self).q(t, x, e)
    }
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Two-state nonlinear benchmark plant with period 1 s. Locally
/// exponentially stable around the origin, unstable for large `x` because of
/// the `x2^2` term.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExamplePlant;

pub fn example_plant() -> ExamplePlant {
    ExamplePlant
}

impl Plant for ExamplePlant {
    fn state_dim(&self) -> usize {
        2
    }

    fn period(&self) -> f64 {
        1.0
    }

    fn f(&self, t: f64, x: &[f64], e: f64, dx: &mut [f64]) {
        let (x1, x2) = (x[0], x[1]);
        let s1 = (2.0 * PI * t).sin();
        let c2 = (4.0 * PI * t).cos();
        dx[0] = -x1 / 5.0 + SQRT_3 * x2 + x2.sin() / 10.0 + s1;
        dx[1] = -SQRT_3 * x1 - x2 + x2 * x2 / 10.0 + x2 * e + c2 * (1.0 + s1);
    }

    fn q(&self, t: f64, x: &[f64], e: f64) -> f64 {
        let c = (2.0 * PI * t).cos();
        let harmonics = c * (1.0 + c * (1.0 + c * (1.0 + c)));
        1.0 + x[0] + (e * x[1]).atan() + harmonics
    }
}

pub type SignalFn = dyn Fn(f64) -> f64 + Send + Sync;

/// `e' = u + q(t)`: no zero dynamics, exogenous periodic drift.
pub struct LinearTestPlant {
    period: f64,
    signal: Box<SignalFn>,
}

impl LinearTestPlant {
    pub fn new(period: f64, signal: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            period,
            signal: Box::new(signal),
        }
    }
}

pub fn linear_test_plant(period: f64, signal: impl Fn(f64) -> f64 + Send + Sync + 'static) -> LinearTestPlant {
    LinearTestPlant::new(period, signal)
}

impl fmt::Debug for LinearTestPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearTestPlant").field("period", &self.period).finish()
    }
}

impl Plant for LinearTestPlant {
    fn state_dim(&self) -> usize {
        0
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn f(&self, _t: f64, _x: &[f64], _e: f64, _dx: &mut [f64]) {}
    fn q(&self, t: f64, _x: &[f64], _e: f64) -> f64 {
        (self.signal)(t)
    }
}

/// `chi' = f0(t, chi, xi_1)`, written into the last argument.
pub type ChainZeroDynamics = dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync;
/// `q0(t, chi, (xi_1..xi_{r-1}), xi_r)`.
pub type ChainDrift = dyn Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync;

/// Linear part of the relative-degree reduction: `y' = A y + B e`, `xi_1 = C y`
/// with `A` the companion matrix whose last row is `(-a_1, ..., -a_{r-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormReduction {
    pub r: usize,
    pub a_coeffs: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl NormalFormReduction {
    pub fn new(r: usize, a_coeffs: &[f64]) -> Result<Self> {
        if r < 2 {
            return Err(invalid("r", format!("relative degree {r} must be at least 2")));
        }
        if a_coeffs.len() != r - 1 {
            return Err(RegulatorError::DimensionMismatch {
                expected: r - 1,
                got: a_coeffs.len(),
            });
        }
        if a_coeffs.iter().any(|a| !a.is_finite()) {
            return Err(invalid("a_coeffs", "coefficients must be finite"));
        }
        let n = r - 1;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for (j, ai) in a_coeffs.iter().enumerate() {
            a[(n - 1, j)] = -ai;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        let mut c = DMatrix::zeros(1, n);
        c[(0, 0)] = 1.0;

        let worst = a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(worst < 0.0) {
            return Err(RegulatorError::NotHurwitz(worst));
        }
        Ok(Self {
            r,
            a_coeffs: a_coeffs.to_vec(),
            a,
            b,
            c,
        })
    }

    /// `xi_r = e - sum a_i xi_i`.
    pub fn last_state(&self, y: &[f64], e: f64) -> f64 {
        e - self.a_coeffs.iter().zip(y).map(|(a, xi)| a * xi).sum::<f64>()
    }

    /// `e = xi_r + sum a_i xi_i`, the new regulated output.
    pub fn output(&self, xi: &[f64]) -> f64 {
        xi[self.r - 1] + self.a_coeffs.iter().zip(xi).map(|(a, x)| a * x).sum::<f64>()
    }
}

/// An integrator chain of relative degree `r` behind zero dynamics `chi`,
/// rewritten in relative-degree-one normal form with state `x = (chi, y)`,
/// `y = (xi_1, ..., xi_{r-1})`.
pub struct ChainPlant {
    chi_dim: usize,
    period: f64,
    reduction: NormalFormReduction,
    f0: Box<ChainZeroDynamics>,
    q0: Box<ChainDrift>,
}

impl fmt::Debug for ChainPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainPlant")
            .field("chi_dim", &self.chi_dim)
            .field("period", &self.period)
            .field("reduction", &self.reduction)
            .finish()
    }
}

impl ChainPlant {
    pub fn reduction(&self) -> &NormalFormReduction {
        &self.reduction
    }

    pub fn chi_dim(&self) -> usize {
        self.chi_dim
    }
}

pub fn reduce_relative_degree(
    chi_dim: usize,
    r: usize,
    a_coeffs: &[f64],
    period: f64,
    f0: impl Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    q0: impl Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
) -> Result<ChainPlant> {
    if !(period.is_finite() && period > 0.0) {
        return Err(invalid("period", format!("{period} must be positive")));
    }
    Ok(ChainPlant {
        chi_dim,
        period,
        reduction: NormalFormReduction::new(r, a_coeffs)?,
        f0: Box::new(f0),
        q0: Box::new(q0),
    })
}

impl Plant for ChainPlant {
    fn state_dim(&self) -> usize {
        self.chi_dim + self.reduction.r - 1
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn f(&self, t: f64, x: &[f64], e: f64, dx: &mut [f64]) {
        let (chi, y) = x.split_at(self.chi_dim);
        let (dchi, dy) = dx.split_at_mut(self.chi_dim);
        (self.f0)(t, chi, y[0], dchi);
        let n = y.len();
        dy[..n - 1].copy_from_slice(&y[1..]);
        dy[n - 1] = self.reduction.last_state(y, e);
    }

    fn q(&self, t: f64, x: &[f64], e: f64) -> f64 {
        let (chi, y) = x.split_at(self.chi_dim);
        let a = &self.reduction.a_coeffs;
        let n = y.len();
        let xi_r = self.reduction.last_state(y, e);
        let shift: f64 = (0..n - 1).map(|i| a[i] * y[i + 1]).sum();
        (self.q0)(t, chi, y, xi_r) + shift + a[n - 1] * xi_r
    }
}
