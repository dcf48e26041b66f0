//! The internal-model unit: an integrator plus a bank of harmonic oscillators
//! driven by the regulated error, coupled to the plant through a high-gain
//! stabilizer.
//!
//! Controller state is ordered as `[z_0, z_1a, z_1b, ..., z_na, z_nb]`: slot 0
//! is the integrator and oscillator `l` occupies slots `2l - 1` and `2l`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, RegulatorError, Result};
use crate::verify::{check_sequence, SequenceViolation};

/// How the coefficient list continues past its stored prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRule {
    /// `n_z0 = 2`, `n_zl = 1 / l^(1 + epsilon)`.
    CanonicalEpsilon(f64),
    Explicit,
}

/// Positive weights `n_z0, ..., n_z(n_o)` coupling each oscillator to the
/// control.
///
/// Explicit lists are only checked for positivity here. The ordering
/// conditions are enforced by [`OscillatorBank::build`]; summability of the
/// infinite sequence cannot be decided from a finite prefix and is left to
/// the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSequence {
    values: Vec<f64>,
    tail_rule: TailRule,
}

impl CoefficientSequence {
    pub const CANONICAL_NZ0: f64 = 2.0;
    pub const DEFAULT_EPSILON: f64 = 0.5;

    pub fn canonical(n_o: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("{epsilon} is outside (0, 1]")));
        }
        let values = (0..=n_o).map(|l| canonical_term(l, epsilon)).collect();
        Ok(Self {
            values,
            tail_rule: TailRule::CanonicalEpsilon(epsilon),
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("coefficients", "at least n_z0 is required"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(invalid(
                "coefficients",
                format!("entry {i} = {v} is not a positive finite number"),
            ));
        }
        Ok(Self {
            values,
            tail_rule: TailRule::Explicit,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_rule(&self) -> TailRule {
        self.tail_rule
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficient `l`, extending past the stored prefix for canonical rules.
    pub fn coefficient(&self, l: usize) -> Option<f64> {
        match (self.values.get(l), self.tail_rule) {
            (Some(v), _) => Some(*v),
            (None, TailRule::CanonicalEpsilon(eps)) => Some(canonical_term(l, eps)),
            (None, TailRule::Explicit) => None,
        }
    }

    /// Partial sum of the stored prefix, which equals `M^T N_z M` for a bank
    /// built from this sequence.
    pub fn partial_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn violations(&self) -> Vec<SequenceViolation> {
        check_sequence(&self.values)
    }
}

fn canonical_term(l: usize, epsilon: f64) -> f64 {
    if l == 0 {
        CoefficientSequence::CANONICAL_NZ0
    } else {
        1.0 / (l as f64).powf(1.0 + epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorConfig {
    /// Number of oscillators, not counting the integrator.
    pub n_o: usize,
    /// High-gain coefficient.
    pub sigma: f64,
    /// Forwarding gain.
    pub mu: f64,
    /// Base frequency in rad/s; oscillator `l` runs at `l * omega_hat`.
    pub omega_hat: f64,
    pub coefficients: CoefficientSequence,
}

impl RegulatorConfig {
    pub fn canonical(n_o: usize, sigma: f64, mu: f64, omega_hat: f64, epsilon: f64) -> Result<Self> {
        let config = Self {
            n_o,
            sigma,
            mu,
            omega_hat,
            coefficients: CoefficientSequence::canonical(n_o, epsilon)?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks scalar parameters and the coefficient length. Sequence ordering
    /// is checked separately by [`OscillatorBank::build`].
    pub fn validate(&self) -> Result<()> {
        positive("sigma", self.sigma)?;
        positive("mu", self.mu)?;
        positive("omega_hat", self.omega_hat)?;
        if self.coefficients.len() != self.n_o + 1 {
            return Err(RegulatorError::DimensionMismatch {
                expected: self.n_o + 1,
                got: self.coefficients.len(),
            });
        }
        Ok(())
    }

    /// `[0, omega_hat, 2 omega_hat, ..., n_o omega_hat]`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..=self.n_o).map(|l| l as f64 * self.omega_hat).collect()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_o + 1
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive and finite")))
    }
}

/// Constant matrices of the regulator
/// `z' = Phi z + Gamma e`, `u = -sigma e + mu M^T N_z (z - M e)`.
///
/// The hot-loop arithmetic uses the block structure (O(n_o) per call); dense
/// copies of `Phi`, `N_z`, `M`, `Gamma` are kept for verification and
/// linear-algebra routines.
#[derive(Debug, Clone)]
pub struct OscillatorBank {
    sigma: f64,
    mu: f64,
    /// `omega_0 = 0, omega_1, ..., omega_{n_o}`
    omegas: Vec<f64>,
    /// `n_z0, ..., n_z(n_o)`
    weights: Vec<f64>,
    phi: DMatrix<f64>,
    n_z: DMatrix<f64>,
    m_vec: DVector<f64>,
    gamma: DVector<f64>,
}

impl OscillatorBank {
    pub fn build(config: &RegulatorConfig) -> Result<Self> {
        config.validate()?;
        let violations = config.coefficients.violations();
        if !violations.is_empty() {
            return Err(RegulatorError::InvalidSequence(violations));
        }
        let omegas = config.frequencies();
        Self::from_parts(config.sigma, config.mu, &omegas[1..], config.coefficients.values())
    }

    /// Builds a bank from arbitrary oscillator frequencies `omega_1..omega_n`
    /// and weights `n_z0..n_zn` without checking the ordering conditions.
    /// Used for structural experiments such as repeated frequencies;
    /// `mu = 0` is accepted here.
    pub fn from_parts(sigma: f64, mu: f64, omegas: &[f64], weights: &[f64]) -> Result<Self> {
        positive("sigma", sigma)?;
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(invalid("mu", format!("{mu} must be nonnegative and finite")));
        }
        if weights.len() != omegas.len() + 1 {
            return Err(RegulatorError::DimensionMismatch {
                expected: omegas.len() + 1,
                got: weights.len(),
            });
        }
        if let Some(w) = omegas.iter().find(|w| !w.is_finite()) {
            return Err(invalid("omega", format!("{w} is not finite")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid("coefficients", format!("{w} is not positive")));
        }

        let n_o = omegas.len();
        let dim = 2 * n_o + 1;
        let mut phi = DMatrix::zeros(dim, dim);
        let mut n_z = DMatrix::zeros(dim, dim);
        let mut m_vec = DVector::zeros(dim);
        let mut gamma = DVector::zeros(dim);

        n_z[(0, 0)] = weights[0];
        m_vec[0] = 1.0;
        gamma[0] = -sigma;
        for (l, (&w, &nz)) in omegas.iter().zip(&weights[1..]).enumerate() {
            let (a, b) = (2 * l + 1, 2 * l + 2);
            phi[(a, b)] = w;
            phi[(b, a)] = -w;
            n_z[(a, a)] = nz;
            n_z[(b, b)] = nz;
            m_vec[a] = 1.0;
            // -(Phi + sigma I) M restricted to the block with M_l = (1, 0)
            gamma[a] = -sigma;
            gamma[b] = w;
        }

        let mut all_omegas = Vec::with_capacity(n_o + 1);
        all_omegas.push(0.0);
        all_omegas.extend_from_slice(omegas);

        Ok(Self {
            sigma,
            mu,
            omegas: all_omegas,
            weights: weights.to_vec(),
            phi,
            n_z,
            m_vec,
            gamma,
        })
    }

    pub fn n_o(&self) -> usize {
        self.omegas.len() - 1
    }

    /// Controller state dimension, `2 n_o + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n_o() + 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Oscillator frequencies including `omega_0 = 0` for the integrator.
    pub fn frequencies(&self) -> &[f64] {
        &self.omegas
    }

    /// Per-oscillator weights `n_z0..n_z(n_o)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn n_z(&self) -> &DMatrix<f64> {
        &self.n_z
    }

    pub fn m_vec(&self) -> &DVector<f64> {
        &self.m_vec
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// `M^T N_z M`, the sum of the weights.
    pub fn m_nz_m(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// State matrix of the shifted coordinates, `Phi - mu M M^T N_z`.
    pub fn zeta_matrix(&self, mu: f64) -> DMatrix<f64> {
        let c = self.m_vec.transpose() * &self.n_z;
        &self.phi - (&self.m_vec * c) * mu
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(RegulatorError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            })
        }
    }

    /// `Phi z + Gamma e`.
    pub fn controller_rhs(&self, z: &[f64], e: f64) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        let mut out = vec![0.0; z.len()];
        self.rhs_into(z, e, &mut out);
        Ok(out)
    }

    /// `-sigma e + mu M^T N_z (z - M e)`.
    pub fn control_output(&self, z: &[f64], e: f64) -> Result<f64> {
        self.check_dim(z.len())?;
        Ok(self.control_split(z, e, e))
    }

    /// Shifted coordinates `z - M e`.
    pub fn zeta_coordinates(&self, z: &[f64], e: f64) -> Result<Vec<f64>> {
        self.check_dim(z.len())?;
        Ok(z.iter()
            .zip(self.m_vec.iter())
            .map(|(zi, mi)| zi - mi * e)
            .collect())
    }

    pub(crate) fn rhs_into(&self, z: &[f64], e: f64, out: &mut [f64]) {
        out[0] = -self.sigma * e;
        for l in 1..self.omegas.len() {
            let w = self.omegas[l];
            let (a, b) = (2 * l - 1, 2 * l);
            out[a] = w * z[b] - self.sigma * e;
            out[b] = -w * z[a] + w * e;
        }
    }

    /// Control law with the high-gain term acting on `e_hg` and the
    /// forwarding term on `e_im`; the measured-noise variant feeds `e` to the
    /// former and `e + v` to the latter.
    pub(crate) fn control_split(&self, z: &[f64], e_hg: f64, e_im: f64) -> f64 {
        let mut acc = self.weights[0] * (z[0] - e_im);
        for l in 1..self.omegas.len() {
            acc += self.weights[l] * (z[2 * l - 1] - e_im);
        }
        -self.sigma * e_hg + self.mu * acc
    }
}

/// Mutable controller state for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorState {
    pub z: Vec<f64>,
}

impl RegulatorState {
    pub fn zero(bank: &OscillatorBank) -> Self {
        Self {
            z: vec![0.0; bank.dim()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().all(|v| v.is_finite())
    }

    pub fn zeta(&self, bank: &OscillatorBank, e: f64) -> Result<Vec<f64>> {
        bank.zeta_coordinates(&self.z, e)
    }
}
