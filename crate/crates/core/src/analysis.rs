//! Steady-state extraction, norms and harmonic content of the regulated error.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{RegulatorError, Result};
use crate::format::{fmt_f64, fmt_opt};
use crate::simulate::Trajectory;

/// A tail section of a trajectory spanning a whole number of plant periods.
#[derive(Debug, Clone, Copy)]
pub struct SteadyWindow<'a> {
    traj: &'a Trajectory,
    /// Inclusive sample range.
    first: usize,
    last: usize,
    period: f64,
    n_periods: usize,
    samples_per_period: usize,
}

impl<'a> SteadyWindow<'a> {
    pub fn t_start(&self) -> f64 {
        self.traj.times[self.first]
    }

    pub fn t_end(&self) -> f64 {
        self.traj.times[self.last]
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn times(&self) -> &'a [f64] {
        &self.traj.times[self.first..=self.last]
    }

    pub fn e(&self) -> &'a [f64] {
        &self.traj.e[self.first..=self.last]
    }

    fn sample_dt(&self) -> f64 {
        self.traj.sample_dt
    }

    /// Largest `|e(t) - e(t - T)|` over the window, using the samples one
    /// period before the window start.
    pub fn periodicity_residual(&self) -> Option<f64> {
        let back = self.first.checked_sub(self.samples_per_period)?;
        let e = &self.traj.e;
        Some(
            (self.first..=self.last)
                .map(|i| (e[i] - e[i - self.first + back]).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn samples_per_period(traj: &Trajectory, period: f64) -> Result<usize> {
    if !(period.is_finite() && period > 0.0) {
        return Err(RegulatorError::InvalidParameter {
            name: "period",
            reason: format!("{period} must be positive"),
        });
    }
    let spp = (period / traj.sample_dt).round();
    if spp < 2.0 || ((spp * traj.sample_dt) - period).abs() > 1e-9 * period {
        return Err(RegulatorError::InvalidParameter {
            name: "period",
            reason: format!("{period} is not a whole number of {}-s samples", traj.sample_dt),
        });
    }
    Ok(spp as usize)
}

/// The last `n_periods` periods of `traj`, which must begin no earlier than
/// `settle_time`.
pub fn steady_window(traj: &Trajectory, period: f64, n_periods: usize, settle_time: f64) -> Result<SteadyWindow<'_>> {
    if n_periods == 0 {
        return Err(RegulatorError::InvalidParameter {
            name: "n_periods",
            reason: "must be at least 1".into(),
        });
    }
    let spp = samples_per_period(traj, period)?;
    let span = spp * n_periods;
    if traj.len() <= span {
        return Err(RegulatorError::TrajectoryTooShort(format!(
            "{} s recorded, {} periods of {period} s requested",
            traj.t_end(),
            n_periods
        )));
    }
    let last = traj.len() - 1;
    let first = last - span;
    if traj.times[first] + 1e-9 < settle_time {
        return Err(RegulatorError::TrajectoryTooShort(format!(
            "window starts at {} s, before the settling time {settle_time} s",
            traj.times[first]
        )));
    }
    Ok(SteadyWindow {
        traj,
        first,
        last,
        period,
        n_periods,
        samples_per_period: spp,
    })
}

/// One period starting at a seeded uniformly chosen sample inside the last
/// `span` seconds.
pub fn random_period_window(traj: &Trajectory, period: f64, span: f64, seed: u64) -> Result<SteadyWindow<'_>> {
    let spp = samples_per_period(traj, period)?;
    let span_samples = (span / traj.sample_dt).round() as usize;
    if span_samples < spp || traj.len() <= span_samples {
        return Err(RegulatorError::TrajectoryTooShort(format!(
            "need {span} s of record containing a full period of {period} s"
        )));
    }
    let last_possible_first = traj.len() - 1 - spp;
    let earliest = traj.len() - 1 - span_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(earliest..=last_possible_first);
    Ok(SteadyWindow {
        traj,
        first,
        last: first + spp,
        period,
        n_periods: 1,
        samples_per_period: spp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// `sup |e|` over the window samples.
    pub sup: f64,
    /// `(1/T) * integral over one period of e^2`, averaged over the window's
    /// periods.
    pub l2: f64,
}

impl Norms {
    /// Root of the period mean square; this is the scale on which the
    /// reference tables of the example report their integral column.
    pub fn rms(&self) -> f64 {
        self.l2.sqrt()
    }
}

pub fn norms(window: &SteadyWindow<'_>) -> Norms {
    let e = window.e();
    let sup = e.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h = window.sample_dt();
    let spp = window.samples_per_period;
    let mut total = 0.0;
    for p in 0..window.n_periods {
        let seg = &e[p * spp..=(p + 1) * spp];
        let mut s = 0.5 * (seg[0] * seg[0] + seg[spp] * seg[spp]);
        s += seg[1..spp].iter().map(|v| v * v).sum::<f64>();
        total += s * h / window.period;
    }
    Norms {
        sup,
        l2: total / window.n_periods as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicSpectrum {
    /// rad/s
    pub frequencies: Vec<f64>,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl HarmonicSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Magnitude at the entry whose frequency is closest to `omega`.
    pub fn magnitude_at(&self, omega: f64) -> Option<f64> {
        self.frequencies
            .iter()
            .zip(&self.magnitudes)
            .min_by(|a, b| (a.0 - omega).abs().total_cmp(&(b.0 - omega).abs()))
            .map(|(_, m)| *m)
    }

    /// CSV with header `freq_rad_s,cos,sin,magnitude`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "freq_rad_s,cos,sin,magnitude")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(self.frequencies[i]),
                fmt_f64(self.cos_coeffs[i]),
                fmt_f64(self.sin_coeffs[i]),
                fmt_f64(self.magnitudes[i])
            )?;
        }
        Ok(())
    }
}

/// Fourier coefficients of `e` at exactly the requested frequencies, by
/// trapezoid quadrature over the window: `(2/W) * integral e(t) {cos, sin}(w t)`,
/// with `1/W` for the mean.
pub fn fourier_at(window: &SteadyWindow<'_>, freqs: &[f64]) -> HarmonicSpectrum {
    let (t, e) = (window.times(), window.e());
    let h = window.sample_dt();
    let width = window.t_end() - window.t_start();
    let n = e.len();
    let mut out = HarmonicSpectrum::default();
    for &w in freqs {
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..n {
            let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let (sn, cs) = (w * t[i]).sin_cos();
            c += weight * e[i] * cs;
            s += weight * e[i] * sn;
        }
        let scale = if w == 0.0 { h / width } else { 2.0 * h / width };
        let (c, s) = (c * scale, s * scale);
        out.frequencies.push(w);
        out.cos_coeffs.push(c);
        out.sin_coeffs.push(s);
        out.magnitudes.push(c.hypot(s));
    }
    out
}

/// `[0, w, 2w, ..., k_max w]` with `w = 2 pi / T`.
pub fn harmonic_grid(period: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| k as f64 * 2.0 * PI / period).collect()
}

/// One-sided amplitude spectrum of the window on the FFT bin grid:
/// `(frequency in rad/s, amplitude)` up to Nyquist.
pub fn fft_spectrum(window: &SteadyWindow<'_>) -> Vec<(f64, f64)> {
    // drop the closing sample so the record is exactly n_periods long
    let e = &window.e()[..window.e().len() - 1];
    let n = e.len();
    let mut buf: Vec<Complex<f64>> = e.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 2.0 * PI / (n as f64 * window.sample_dt());
    (0..=n / 2)
        .map(|k| {
            let scale = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            (k as f64 * df, scale * buf[k].norm() / n as f64)
        })
        .collect()
}

pub fn write_fft_csv<W: Write>(spectrum: &[(f64, f64)], mut w: W) -> io::Result<()> {
    writeln!(w, "freq_rad_s,magnitude")?;
    for (f, m) in spectrum {
        writeln!(w, "{},{}", fmt_f64(*f), fmt_f64(*m))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaScaling {
    /// `max sigma * sup|e_p|` over the points.
    pub psi_hat: f64,
    /// Whether `sup|e_p|` strictly decreases as sigma increases.
    pub monotone_decay: bool,
}

/// Fits the `sup|e_p| <= psi / sigma` law to `(sigma, sup)` points.
pub fn sigma_scaling_check(points: &[(f64, f64)]) -> Result<SigmaScaling> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 3 {
        return Err(RegulatorError::Insufficient(format!(
            "sigma scaling needs at least 3 distinct sigma values, got {}",
            pts.len()
        )));
    }
    let psi_hat = pts.iter().map(|(s, e)| s * e).fold(f64::NEG_INFINITY, f64::max);
    let monotone_decay = pts.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(SigmaScaling { psi_hat, monotone_decay })
}

/// One line of the norms report.
#[derive(Debug, Clone, PartialEq)]
pub struct NormsRow {
    pub scenario: String,
    pub sigma: f64,
    /// `None` for the pure high-gain law.
    pub mu: Option<f64>,
    pub n_o: Option<usize>,
    pub omega_hat: Option<f64>,
    pub norms: Norms,
    pub noisy: bool,
}

pub const NORMS_HEADER: &str = "scenario,sigma,mu,n_o,omega_hat,sup,inf_l2,noisy";

impl NormsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scenario,
            fmt_f64(self.sigma),
            fmt_opt(self.mu),
            self.n_o.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(self.omega_hat),
            fmt_f64(self.norms.sup),
            fmt_f64(self.norms.l2),
            self.noisy
        )
    }
}

pub fn write_norms_csv<W: Write>(rows: &[NormsRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{NORMS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}
