//! Closed-form frequency-domain quantities of the regulator.
//!
//! The gain `T(w)` from a scalar input `v` to `N_z^{1/2} zeta` of
//! `zeta' = (Phi - mu M M^T N_z) zeta - M v` has the rational form
//!
//! ```text
//!            sum_l n_l (w^2 + w_l^2) / (w_l^2 - w^2)^2
//! T(w) = ---------------------------------------------------
//!        1 + mu^2 (sum_l n_l w / (w_l^2 - w^2))^2
//! ```
//!
//! whose poles at `w = w_l` are removable. Near a resonance it is evaluated
//! through the polynomial form normalized by the product of the non-resonant
//! factors, which never forms the products explicitly.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{RegulatorError, Result};
use crate::format::fmt_f64;
use crate::internal_model::{CoefficientSequence, OscillatorBank, RegulatorConfig};

/// Relative distance (in units of the base frequency) below which the
/// singularity-free form is used.
pub const RESONANCE_WINDOW: f64 = 1e-6;

/// Plot floor for exact zeros.
pub const DB_FLOOR: f64 = -160.0;

fn sum_weights(omegas: &[f64], weights: &[f64], w: f64) -> (f64, f64) {
    let w2 = w * w;
    let mut num = 0.0;
    let mut s = 0.0;
    for (&wl, &n) in omegas.iter().zip(weights) {
        let d = wl * wl - w2;
        num += n * (w2 + wl * wl) / (d * d);
        s += n / d;
    }
    (num, s)
}

/// Rational form. Not defined exactly at a resonance.
pub fn transfer_gain_rational(omegas: &[f64], weights: &[f64], mu: f64, w: f64) -> f64 {
    let (num, s) = sum_weights(omegas, weights, w);
    num / (1.0 + mu * mu * (w * s) * (w * s))
}

/// Polynomial form divided through by the squared product of the factors
/// `(w_m^2 - w^2)` of every oscillator except the nearest one. Finite at every
/// resonance; requires distinct frequencies. `omegas` includes the
/// integrator's `0`.
pub fn transfer_gain_polynomial(omegas: &[f64], weights: &[f64], mu: f64, w: f64) -> f64 {
    if omegas.is_empty() {
        return 0.0;
    }
    let w2 = w * w;
    let deltas: Vec<f64> = omegas.iter().map(|wl| wl * wl - w2).collect();
    let j = deltas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let dj = deltas[j];

    if omegas[j] == 0.0 {
        // both numerator and denominator carry a factor w^2 here
        let (mut a, mut b) = (0.0, 0.0);
        for l in (0..omegas.len()).filter(|&l| l != j) {
            let d = deltas[l];
            a += (omegas[l] * omegas[l] + w2) * weights[l] / (d * d);
            b += weights[l] / d;
        }
        let num = weights[j] + w2 * a;
        let c = weights[j] - w2 * b;
        return num / (w2 + mu * mu * c * c);
    }

    let mut num = (omegas[j] * omegas[j] + w2) * weights[j];
    let mut c = weights[j];
    for l in (0..omegas.len()).filter(|&l| l != j) {
        let r = dj / deltas[l];
        num += (omegas[l] * omegas[l] + w2) * weights[l] * r * r;
        c += weights[l] * r;
    }
    num / (dj * dj + mu * mu * w2 * c * c)
}

fn gain_from_parts(omegas: &[f64], weights: &[f64], mu: f64, omega_hat: f64, w: f64) -> f64 {
    let w = w.abs();
    let tol = RESONANCE_WINDOW * omega_hat;
    if omegas.iter().any(|wl| (wl - w).abs() <= tol) {
        transfer_gain_polynomial(omegas, weights, mu, w)
    } else {
        transfer_gain_rational(omegas, weights, mu, w)
    }
}

/// `T(w)` for the configured oscillator bank; equals `2 / (mu^2 n_l)` at
/// `w = l * omega_hat` for `l >= 1` and `1 / (mu^2 n_0)` at `w = 0`.
pub fn transfer_gain(config: &RegulatorConfig, w: f64) -> f64 {
    gain_from_parts(
        &config.frequencies(),
        config.coefficients.values(),
        config.mu,
        config.omega_hat,
        w,
    )
}

/// Same gain through a complex linear solve with the dense state matrix:
/// `zeta = -(i w I - (Phi - mu M M^T N_z))^{-1} M`, gain `zeta^* N_z zeta`.
pub fn transfer_gain_resolvent(bank: &OscillatorBank, mu: f64, w: f64) -> Result<f64> {
    let a = bank.zeta_matrix(mu);
    let n = bank.dim();
    let lhs = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let diag = if i == j { Complex64::new(0.0, w) } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(a[(i, j)], 0.0)
    });
    let rhs = DMatrix::<Complex64>::from_fn(n, 1, |i, _| Complex64::new(-bank.m_vec()[i], 0.0));
    let zeta = lhs.lu().solve(&rhs).ok_or(RegulatorError::SingularSolve(w))?;
    let gain = (0..n).map(|i| bank.n_z()[(i, i)] * zeta[i].norm_sqr()).sum::<f64>();
    if gain.is_finite() {
        Ok(gain)
    } else {
        Err(RegulatorError::SingularSolve(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub kappa0: f64,
    pub kappa1: f64,
    /// `S = n_0/n_1 + n_0/(3 n_2) + 10/3`
    pub s: f64,
    /// `max((2 + sqrt 2) S, 25/8)`
    pub a: f64,
    /// `1 / (48 (a + 2))`
    pub varpi: f64,
}

/// Constants of the quadratic envelope `T(x) <= kappa0 + kappa1 x^2`,
/// `x = w / omega_hat`, uniform in the number of oscillators.
pub fn bound_constants(coefficients: &CoefficientSequence, mu: f64) -> Result<BoundConstants> {
    let (n0, n1, n2) = match (coefficients.coefficient(0), coefficients.coefficient(1), coefficients.coefficient(2)) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(RegulatorError::Insufficient(
                "bound constants need n_z0, n_z1 and n_z2".into(),
            ))
        }
    };
    if !(mu.is_finite() && mu > 0.0) {
        return Err(RegulatorError::InvalidParameter {
            name: "mu",
            reason: format!("{mu} must be positive"),
        });
    }
    let s = n0 / n1 + n0 / (3.0 * n2) + 10.0 / 3.0;
    let a = ((2.0 + std::f64::consts::SQRT_2) * s).max(25.0 / 8.0);
    let varpi = 1.0 / (48.0 * (a + 2.0));
    Ok(BoundConstants {
        kappa0: 3.5 * n0,
        kappa1: 4.0 * n0 / (varpi * varpi) + 512.0 / (mu * mu * n1),
        s,
        a,
        varpi,
    })
}

/// `T` sampled on a grid of normalized frequencies `x = w / omega_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl TransferCurve {
    pub fn new(config: &RegulatorConfig, x_grid: Vec<f64>) -> Result<Self> {
        let bc = bound_constants(&config.coefficients, config.mu)?;
        let values = x_grid.iter().map(|x| transfer_gain(config, x * config.omega_hat)).collect();
        Ok(Self {
            x_grid,
            values,
            kappa0: bc.kappa0,
            kappa1: bc.kappa1,
        })
    }

    /// Grid points where `T(x) > kappa0 + kappa1 x^2`.
    pub fn bound_violations(&self) -> Vec<(f64, f64)> {
        self.x_grid
            .iter()
            .zip(&self.values)
            .filter(|(x, v)| !(**v <= self.kappa0 + self.kappa1 * *x * *x))
            .map(|(x, v)| (*x, *v))
            .collect()
    }
}

/// `|e(iw) / q(iw)|` for `e' = u + q` under `u = -sigma e`.
pub fn high_gain_magnitude(sigma: f64, w: f64) -> f64 {
    1.0 / w.hypot(sigma)
}

/// `|e(iw) / q(iw)|` for `e' = u + q` under the internal-model regulator:
///
/// ```text
/// |e/q|^2 = 1 / (1 + mu^2 (w sum_l n_l / (w_l^2 - w^2))^2) / (w^2 + sigma^2)
/// ```
///
/// exactly zero at every oscillator frequency.
pub fn internal_model_magnitude(config: &RegulatorConfig, w: f64) -> f64 {
    let w = w.abs();
    let omegas = config.frequencies();
    if omegas.contains(&w) {
        return 0.0;
    }
    let (_, s) = sum_weights(&omegas, config.coefficients.values(), w);
    let g = config.mu * w * s;
    1.0 / (1.0 + g * g).sqrt() * high_gain_magnitude(config.sigma, w)
}

pub fn to_db(magnitude: f64) -> f64 {
    if magnitude > 0.0 {
        (20.0 * magnitude.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodeCurve {
    pub omega_grid: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

impl BodeCurve {
    fn from_fn(omega_grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let magnitude: Vec<f64> = omega_grid.iter().map(|w| f(*w)).collect();
        let magnitude_db = magnitude.iter().map(|m| to_db(*m)).collect();
        Self {
            omega_grid,
            magnitude,
            magnitude_db,
        }
    }

    /// CSV with header `omega_rad_s,magnitude,magnitude_db`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "omega_rad_s,magnitude,magnitude_db")?;
        for i in 0..self.omega_grid.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(self.omega_grid[i]),
                fmt_f64(self.magnitude[i]),
                fmt_f64(self.magnitude_db[i])
            )?;
        }
        Ok(())
    }
}

pub fn bode_high_gain(sigma: f64, omega_grid: Vec<f64>) -> BodeCurve {
    BodeCurve::from_fn(omega_grid, |w| high_gain_magnitude(sigma, w))
}

pub fn bode_internal_model(config: &RegulatorConfig, omega_grid: Vec<f64>) -> BodeCurve {
    BodeCurve::from_fn(omega_grid, |w| internal_model_magnitude(config, w))
}

/// `n` logarithmically spaced points from `lo` to `hi`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut g: Vec<f64> = (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cfg(n_o: usize, mu: f64, eps: f64) -> RegulatorConfig {
        RegulatorConfig::canonical(n_o, 2.0, mu, 2.0 * PI, eps).unwrap()
    }

    #[test]
    fn resonance_values() {
        for mu in [0.5, 1.0, 2.0] {
            let c = cfg(6, mu, 0.5);
            for l in 1..=6 {
                let exact = 2.0 / (mu * mu * c.coefficients.values()[l]);
                let got = transfer_gain(&c, l as f64 * c.omega_hat);
                assert!(((got - exact) / exact).abs() < 1e-10);
            }
            let dc = transfer_gain(&c, 0.0);
            assert_relative_eq!(dc, 1.0 / (mu * mu * 2.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn scalar_case() {
        // n_o = 0: zeta' = -mu n0 zeta - v, gain n0 / (w^2 + mu^2 n0^2)
        let c = cfg(0, 1.5, 0.5);
        let bank = OscillatorBank::build(&c).unwrap();
        for w in [0.0, 0.3, 1.0, 7.0, 100.0] {
            let exact = 2.0 / (w * w + 1.5 * 1.5 * 4.0);
            assert_relative_eq!(transfer_gain(&c, w), exact, max_relative = 1e-12);
            assert_relative_eq!(transfer_gain_resolvent(&bank, 1.5, w).unwrap(), exact, max_relative = 1e-12);
        }
        assert_relative_eq!(transfer_gain(&c, 0.0), 1.0 / (1.5 * 1.5 * 2.0), max_relative = 1e-12);
    }

    #[test]
    fn high_frequency_limit_below_case_c_bound() {
        let c = cfg(0, 1.0, 0.5);
        for w in [10.0, 1e2, 1e3, 1e5] {
            assert!(transfer_gain(&c, w) <= 1.5 * 2.0);
        }
        assert!(transfer_gain(&c, 1e6) < 1e-9);
    }

    #[test]
    fn polynomial_form_continuous_through_resonance() {
        let c = cfg(4, 1.0, 0.5);
        let (om, wt) = (c.frequencies(), c.coefficients.values().to_vec());
        for l in 1..=4 {
            let w0 = l as f64 * c.omega_hat;
            let at = transfer_gain_polynomial(&om, &wt, 1.0, w0);
            for d in [1e-9, 1e-7, -1e-7, 1e-5] {
                let near_p = transfer_gain_polynomial(&om, &wt, 1.0, w0 + d);
                let near_r = transfer_gain_rational(&om, &wt, 1.0, w0 + d);
                assert_relative_eq!(near_p, at, max_relative = 1e-3);
                assert_relative_eq!(near_p, near_r, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn bound_constants_canonical() {
        let seq = CoefficientSequence::canonical(2, 0.5).unwrap();
        let bc = bound_constants(&seq, 1.0).unwrap();
        assert_eq!(bc.kappa0, 7.0);
        // independent evaluation
        let s = 2.0 + 2.0 / (3.0 * 2f64.powf(-1.5)) + 10.0 / 3.0;
        assert_relative_eq!(bc.s, s, max_relative = 1e-15);
        assert_relative_eq!(bc.s, 7.219, epsilon = 1e-3);
        let a = (2.0 + 2f64.sqrt()) * s;
        assert_relative_eq!(bc.a, a, max_relative = 1e-15);
        assert_relative_eq!(bc.a, 24.65, epsilon = 1e-2);
        assert_relative_eq!(bc.varpi, 1.0 / (48.0 * (a + 2.0)), max_relative = 1e-15);
        assert_relative_eq!(bc.kappa1, 8.0 * (48.0 * (a + 2.0)).powi(2) + 512.0, max_relative = 1e-14);

        let bc2 = bound_constants(&seq, 2.0).unwrap();
        assert!(bc2.kappa1 < bc.kappa1);

        // canonical tail supplies n_z2 even with n_o = 1
        assert!(bound_constants(&CoefficientSequence::canonical(1, 0.5).unwrap(), 1.0).is_ok());
        let short = CoefficientSequence::explicit(vec![2.0, 1.0]).unwrap();
        assert!(bound_constants(&short, 1.0).is_err());
        assert!(bound_constants(&seq, 0.0).is_err());
    }

    #[test]
    fn bode_curves() {
        assert_relative_eq!(high_gain_magnitude(2.0, 0.0), 0.5);
        assert_relative_eq!(to_db(0.5), -6.0206, epsilon = 1e-4);
        let c = cfg(10, 1.0, 0.5);
        for l in 0..=10 {
            assert_eq!(internal_model_magnitude(&c, l as f64 * c.omega_hat), 0.0);
        }
        assert_eq!(to_db(0.0), DB_FLOOR);
        for w in [700.0, 1e3, 1e4] {
            let r = internal_model_magnitude(&c, w) / high_gain_magnitude(2.0, w);
            assert!((r - 1.0).abs() < 0.01);
        }
        let g = log_grid(0.1, 1000.0, 2000);
        assert_eq!(g.len(), 2000);
        assert_eq!((g[0], g[1999]), (0.1, 1000.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));

        let curve = bode_internal_model(&c, vec![0.0, 1.0]);
        assert_eq!(curve.magnitude_db[0], DB_FLOOR);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("omega_rad_s,magnitude,magnitude_db\n"));
    }

    #[test]
    fn transfer_curve_respects_bound() {
        let c = cfg(3, 1.0, 0.5);
        let grid: Vec<f64> = (0..=800).map(|k| k as f64 * 0.01).collect();
        let curve = TransferCurve::new(&c, grid).unwrap();
        assert!(curve.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(curve.bound_violations().is_empty());
    }
}
