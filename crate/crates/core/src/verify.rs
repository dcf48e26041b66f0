//! Structural certification of a regulator before it is simulated:
//! coefficient ordering, observability of `(Phi, M^T N_z)` and stability of
//! `Phi - mu M M^T N_z`.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{RegulatorError, Result};
use crate::format::fmt_f64;
use crate::internal_model::{OscillatorBank, RegulatorConfig};

/// Relative slack on the non-strict ordering conditions, so that e.g.
/// `l^2 * l^-2` rounding to `1 - ulp` is not reported.
const ORDER_SLACK: f64 = 1e-12;

/// Eigenvalue real parts must be below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-12;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceViolation {
    /// `n_(l+1) < n_l` fails.
    NotDecreasing { l: usize, current: f64, next: f64 },
    /// `l n_l` must be non-increasing for `l >= 1`.
    LinearWeightIncreases { l: usize },
    /// `l^2 n_l` must be non-decreasing.
    QuadraticWeightDecreases { l: usize },
}

impl fmt::Display for SequenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotDecreasing { l, current, next } => {
                write!(f, "not strictly decreasing: n_z{} = {next} >= n_z{l} = {current}", l + 1)
            }
            Self::LinearWeightIncreases { l } => {
                write!(f, "l * n_zl increases between l = {l} and l = {}", l + 1)
            }
            Self::QuadraticWeightDecreases { l } => {
                write!(f, "l^2 * n_zl decreases between l = {l} and l = {}", l + 1)
            }
        }
    }
}

/// Checks the three ordering families over a finite prefix. Each family is a
/// monotonicity statement, so consecutive pairs suffice.
pub fn check_sequence(values: &[f64]) -> Vec<SequenceViolation> {
    let mut out = Vec::new();
    for l in 0..values.len().saturating_sub(1) {
        let (a, b) = (values[l], values[l + 1]);
        if !(b < a) {
            out.push(SequenceViolation::NotDecreasing {
                l,
                current: a,
                next: b,
            });
        }
        let (lf, nf) = (l as f64, (l + 1) as f64);
        if l >= 1 && nf * b > lf * a * (1.0 + ORDER_SLACK) {
            out.push(SequenceViolation::LinearWeightIncreases { l });
        }
        if lf * lf * a > nf * nf * b * (1.0 + ORDER_SLACK) {
            out.push(SequenceViolation::QuadraticWeightDecreases { l });
        }
    }
    out
}

/// Stacked `[C; C Phi; ...; C Phi^(2 n_o)]` with `C = M^T N_z`. Entries grow
/// like `omega_max^(2 n_o)`, so this is only useful for small banks.
pub fn observability_matrix(bank: &OscillatorBank) -> DMatrix<f64> {
    let n = bank.dim();
    let mut row = bank.m_vec().transpose() * bank.n_z();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        out.set_row(k, &row);
        row = &row * bank.phi();
    }
    out
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0, |a: f64, b| a.max(*b));
    sv.iter().filter(|s| **s > RANK_TOL * max).count()
}

fn min_pbh_ratio(bank: &OscillatorBank) -> f64 {
    let n = bank.dim();
    let phi = bank.phi();
    let c = bank.m_vec().transpose() * bank.n_z();
    let mut worst = f64::INFINITY;
    for &w in bank.frequencies() {
        let lambda = Complex64::new(0.0, w);
        let m = DMatrix::<Complex64>::from_fn(n + 1, n, |i, j| {
            if i < n {
                let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
                d - Complex64::new(phi[(i, j)], 0.0)
            } else {
                Complex64::new(c[(0, j)], 0.0)
            }
        });
        let sv = m.singular_values();
        let max = sv.iter().fold(0.0, |a: f64, b| a.max(*b));
        let min = sv.iter().fold(f64::INFINITY, |a: f64, b| a.min(*b));
        worst = worst.min(min / max);
    }
    worst
}

/// Observability of `(Phi, M^T N_z)` by the PBH test at each eigenvalue of
/// `Phi` (`0` and `i omega_l`), rank decided by `sigma_min > 1e-8 sigma_max`.
pub fn check_observability(bank: &OscillatorBank) -> bool {
    min_pbh_ratio(bank) > RANK_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzCheck {
    pub hurwitz: bool,
    /// Largest eigenvalue real part of `Phi - mu M M^T N_z`.
    pub worst_real_part: f64,
    /// Real part within the margin of the imaginary axis.
    pub marginal: bool,
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| RegulatorError::Insufficient("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn check_hurwitz(bank: &OscillatorBank, mu: f64) -> Result<HurwitzCheck> {
    let worst = eigenvalues(&bank.zeta_matrix(mu))?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HurwitzCheck {
        hurwitz: worst < -HURWITZ_MARGIN,
        worst_real_part: worst,
        marginal: worst.abs() <= HURWITZ_MARGIN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    /// Within numerical margin; reported but does not fail the report.
    Marginal,
    Fail,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Marginal => "marginal",
            Self::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub checks: Vec<Check>,
    pub worst_eig_real: f64,
    pub sequence_violations: Vec<SequenceViolation>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// CSV with header `check,pass,detail`; `pass` is `pass`, `marginal` or `fail`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "check,pass,detail")?;
        for c in &self.checks {
            writeln!(w, "{},{},\"{}\"", c.name, c.status, c.detail.replace('"', "'"))?;
        }
        Ok(())
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{:>8}] {:<14} {}", c.status, c.name, c.detail)?;
        }
        write!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Runs every structural check on `config` without rejecting it up front,
/// so that each problem is reported.
pub fn certify(config: &RegulatorConfig) -> CertificationReport {
    let mut checks = Vec::new();
    for (name, v) in [("sigma", config.sigma), ("mu", config.mu), ("omega_hat", config.omega_hat)] {
        checks.push(Check {
            name,
            status: status(v.is_finite() && v > 0.0),
            detail: format!("{name} = {v}"),
        });
    }
    let len_ok = config.coefficients.len() == config.n_o + 1;
    checks.push(Check {
        name: "coefficients",
        status: status(len_ok),
        detail: format!("{} coefficients for n_o = {}", config.coefficients.len(), config.n_o),
    });

    // Phi, N_z, M do not depend on sigma or mu
    let omegas: Vec<f64> = (1..=config.n_o).map(|l| l as f64 * config.omega_hat).collect();
    let bank = if len_ok {
        OscillatorBank::from_parts(1.0, 0.0, &omegas, config.coefficients.values()).ok()
    } else {
        None
    };
    let mut report = certify_parts(bank.as_ref(), config.mu, config.coefficients.values());
    checks.append(&mut report.checks);
    report.checks = checks;
    report
}

/// Sequence, observability and Hurwitz checks for an already assembled bank,
/// which may carry arbitrary frequencies.
pub fn certify_bank(bank: &OscillatorBank, mu: f64) -> CertificationReport {
    certify_parts(Some(bank), mu, bank.weights())
}

fn certify_parts(bank: Option<&OscillatorBank>, mu: f64, weights: &[f64]) -> CertificationReport {
    let mut checks = Vec::new();
    let sequence_violations = check_sequence(weights);
    checks.push(Check {
        name: "sequence",
        status: status(sequence_violations.is_empty()),
        detail: if sequence_violations.is_empty() {
            "ordering conditions hold".into()
        } else {
            sequence_violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        },
    });

    let mut worst_eig_real = f64::NAN;
    match bank {
        Some(bank) => {
            let ratio = min_pbh_ratio(bank);
            checks.push(Check {
                name: "observability",
                status: status(ratio > RANK_TOL),
                detail: format!("min sigma_min/sigma_max of PBH pencils = {}", fmt_f64(ratio)),
            });
            match check_hurwitz(bank, mu) {
                Ok(h) => {
                    worst_eig_real = h.worst_real_part;
                    let st = if h.hurwitz {
                        CheckStatus::Pass
                    } else if h.marginal && mu > 0.0 {
                        CheckStatus::Marginal
                    } else {
                        CheckStatus::Fail
                    };
                    checks.push(Check {
                        name: "hurwitz",
                        status: st,
                        detail: format!("max Re(eig) = {}", fmt_f64(h.worst_real_part)),
                    });
                }
                Err(e) => checks.push(Check {
                    name: "hurwitz",
                    status: CheckStatus::Fail,
                    detail: e.to_string(),
                }),
            }
        }
        None => {
            for name in ["observability", "hurwitz"] {
                checks.push(Check {
                    name,
                    status: CheckStatus::Fail,
                    detail: "not evaluated: bank could not be assembled".into(),
                });
            }
        }
    }
    CertificationReport {
        checks,
        worst_eig_real,
        sequence_violations,
    }
}
