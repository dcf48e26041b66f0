//! Flat `key=value` scenario files with dotted section prefixes.
//!
//! ```text
//! name=table2-n1
//! plant.kind=example
//! regulator.kind=internal_model
//! regulator.sigma=2
//! regulator.n_o=1
//! regulator.omega_hat=2pi
//! sim.t_end=150
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Reals accept a
//! trailing `pi` (`2pi`, `0.99*2pi`). Keys not given fall back to the
//! benchmark protocol.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use imreg::internal_model::CoefficientSequence;
use imreg::plants::{example_plant, linear_test_plant, reduce_relative_degree, Plant};
use imreg::{Controller, NoiseModel, OscillatorBank, RegulatorConfig, SimConfig};

use crate::CliError;

/// `offset + sum_k cos[k-1] cos(2 pi k t / T) + sin[k-1] sin(2 pi k t / T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub offset: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            offset: 0.0,
            cos: vec![1.0],
            sin: vec![],
        }
    }
}

impl SignalSpec {
    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w = 2.0 * PI / period;
        let c: f64 = self.cos.iter().enumerate().map(|(k, a)| a * (w * (k + 1) as f64 * t).cos()).sum();
        let s: f64 = self.sin.iter().enumerate().map(|(k, b)| b * (w * (k + 1) as f64 * t).sin()).sum();
        self.offset + c + s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    /// The two-state nonlinear benchmark with unit period.
    Example,
    /// `e' = u + signal(t)`.
    Linear { period: f64, signal: SignalSpec },
    /// Relative degree `r` chain `y^(r) = u + signal(t) + chi` behind the
    /// zero dynamics `chi' = -chi + xi_1`, reduced to relative degree one
    /// with the Hurwitz coefficients `a`.
    Chain {
        period: f64,
        r: usize,
        a: Vec<f64>,
        signal: SignalSpec,
    },
}

impl PlantSpec {
    pub fn period(&self) -> f64 {
        match self {
            Self::Example => 1.0,
            Self::Linear { period, .. } | Self::Chain { period, .. } => *period,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Self::Example => 2,
            Self::Linear { .. } => 0,
            Self::Chain { r, .. } => *r,
        }
    }

    fn default_x0(&self) -> Vec<f64> {
        match self {
            Self::Example => SimConfig::default().x0,
            _ => vec![0.0; self.state_dim()],
        }
    }

    pub fn build(&self) -> Result<Box<dyn Plant>, CliError> {
        Ok(match self {
            Self::Example => Box::new(example_plant()),
            Self::Linear { period, signal } => {
                let (p, s) = (*period, signal.clone());
                Box::new(linear_test_plant(p, move |t| s.eval(t, p)))
            }
            Self::Chain { period, r, a, signal } => {
                let (p, s) = (*period, signal.clone());
                Box::new(reduce_relative_degree(
                    1,
                    *r,
                    a,
                    p,
                    |_, chi, xi1, dchi| dchi[0] = -chi[0] + xi1,
                    move |t, chi, _, _| s.eval(t, p) + chi[0],
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    HighGain,
    InternalModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSpec {
    pub kind: ControllerKind,
    pub sigma: f64,
    pub mu: f64,
    pub n_o: usize,
    pub omega_hat: f64,
    pub epsilon: f64,
    /// Explicit `n_z0..n_z(n_o)`; overrides `epsilon` when present.
    pub coefficients: Option<Vec<f64>>,
}

impl Default for RegulatorSpec {
    fn default() -> Self {
        Self {
            kind: ControllerKind::InternalModel,
            sigma: 2.0,
            mu: 1.0,
            n_o: 2,
            omega_hat: 2.0 * PI,
            epsilon: CoefficientSequence::DEFAULT_EPSILON,
            coefficients: None,
        }
    }
}

impl RegulatorSpec {
    pub fn config(&self) -> Result<RegulatorConfig, CliError> {
        let config = match &self.coefficients {
            None => RegulatorConfig::canonical(self.n_o, self.sigma, self.mu, self.omega_hat, self.epsilon)?,
            Some(c) => {
                let config = RegulatorConfig {
                    n_o: self.n_o,
                    sigma: self.sigma,
                    mu: self.mu,
                    omega_hat: self.omega_hat,
                    coefficients: CoefficientSequence::explicit(c.clone())?,
                };
                config.validate()?;
                config
            }
        };
        Ok(config)
    }

    pub fn controller(&self) -> Result<Controller, CliError> {
        Ok(match self.kind {
            ControllerKind::HighGain => Controller::high_gain(self.sigma)?,
            ControllerKind::InternalModel => Controller::InternalModel(OscillatorBank::build(&self.config()?)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub n_periods: usize,
    /// The steady window must start at or after this time.
    pub settle: f64,
    /// Harmonics `0..=harmonics` of `2 pi / T` in the spectrum export.
    pub harmonics: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            n_periods: 20,
            settle: 0.0,
            harmonics: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub regulator: RegulatorSpec,
    pub sim: SimConfig,
    pub noise: NoiseModel,
    pub analysis: AnalysisSpec,
    pub out_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            plant: PlantSpec::Example,
            regulator: RegulatorSpec::default(),
            sim: SimConfig::default(),
            noise: NoiseModel::off(),
            analysis: AnalysisSpec::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse(format!("line {line}: {}", msg.into()))
}

/// Real number with an optional `pi` factor: `1.5`, `pi`, `2pi`, `0.99*2pi`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("`{s}` is not a real number");
    if let Some(head) = s.strip_suffix("pi") {
        let mut factor = 1.0;
        for part in head.split('*').map(str::trim).filter(|p| !p.is_empty()) {
            factor *= part.parse::<f64>().map_err(|_| bad())?;
        }
        return Ok(factor * PI);
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_nan() {
        return Err(bad());
    }
    Ok(v)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_real)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a non-negative integer", s.trim()))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Default)]
struct PlantKeys {
    kind: Option<String>,
    period: Option<f64>,
    r: Option<usize>,
    a: Option<Vec<f64>>,
    signal: SignalSpec,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc = Self::parse_unchecked(text)?;
        sc.validate()?;
        Ok(sc)
    }

    /// Key syntax and value types only; the parts are not built.
    pub fn parse_unchecked(text: &str) -> Result<Self, CliError> {
        let mut sc = Scenario::default();
        let mut plant = PlantKeys::default();
        let mut x0: Option<Vec<f64>> = None;

        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(ln, format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |m: String| parse_err(ln, format!("{key}: {m}"));
            match key {
                "name" => sc.name = value.to_string(),
                "plant.kind" => plant.kind = Some(value.to_string()),
                "plant.period" => plant.period = Some(parse_real(value).map_err(err)?),
                "plant.r" => plant.r = Some(parse_int(value).map_err(err)?),
                "plant.a" => plant.a = Some(parse_list(value).map_err(err)?),
                "plant.signal.offset" => plant.signal.offset = parse_real(value).map_err(err)?,
                "plant.signal.cos" => plant.signal.cos = parse_list(value).map_err(err)?,
                "plant.signal.sin" => plant.signal.sin = parse_list(value).map_err(err)?,
                "regulator.kind" => {
                    sc.regulator.kind = match value {
                        "internal_model" => ControllerKind::InternalModel,
                        "high_gain" => ControllerKind::HighGain,
                        other => return Err(err(format!("unknown controller `{other}`"))),
                    }
                }
                "regulator.sigma" => sc.regulator.sigma = parse_real(value).map_err(err)?,
                "regulator.mu" => sc.regulator.mu = parse_real(value).map_err(err)?,
                "regulator.n_o" => sc.regulator.n_o = parse_int(value).map_err(err)?,
                "regulator.omega_hat" => sc.regulator.omega_hat = parse_real(value).map_err(err)?,
                "regulator.epsilon" => sc.regulator.epsilon = parse_real(value).map_err(err)?,
                "regulator.coefficients" => {
                    sc.regulator.coefficients = if value.is_empty() {
                        None
                    } else {
                        Some(parse_list(value).map_err(err)?)
                    }
                }
                "sim.dt" => sc.sim.dt = parse_real(value).map_err(err)?,
                "sim.t_end" => sc.sim.t_end = parse_real(value).map_err(err)?,
                "sim.x0" => x0 = Some(parse_list(value).map_err(err)?),
                "sim.e0" => sc.sim.e0 = parse_real(value).map_err(err)?,
                "sim.z0" => {
                    sc.sim.z0 = if value.is_empty() {
                        None
                    } else {
                        Some(parse_list(value).map_err(err)?)
                    }
                }
                "sim.record_stride" => sc.sim.record_stride = parse_int(value).map_err(err)?,
                "sim.seed" => sc.sim.seed = parse_int(value).map_err(err)?,
                "noise.enabled" => sc.noise.enabled = parse_bool(value).map_err(err)?,
                "noise.power" => sc.noise.power = parse_real(value).map_err(err)?,
                "analysis.n_periods" => sc.analysis.n_periods = parse_int(value).map_err(err)?,
                "analysis.settle" => sc.analysis.settle = parse_real(value).map_err(err)?,
                "analysis.harmonics" => sc.analysis.harmonics = parse_int(value).map_err(err)?,
                "outputs.dir" => sc.out_dir = PathBuf::from(value),
                other => return Err(parse_err(ln, format!("unknown key `{other}`"))),
            }
        }

        sc.plant = match plant.kind.as_deref().unwrap_or("example") {
            "example" => PlantSpec::Example,
            "linear" => PlantSpec::Linear {
                period: plant.period.unwrap_or(1.0),
                signal: plant.signal,
            },
            "chain" => {
                let r = plant.r.unwrap_or(2);
                PlantSpec::Chain {
                    period: plant.period.unwrap_or(1.0),
                    r,
                    a: plant.a.unwrap_or_else(|| vec![1.0; r.saturating_sub(1)]),
                    signal: plant.signal,
                }
            }
            other => return Err(CliError::Parse(format!("plant.kind: unknown plant `{other}`"))),
        };
        sc.sim.x0 = x0.unwrap_or_else(|| sc.plant.default_x0());
        Ok(sc)
    }

    /// Checks that every part can be built; run after parsing and after
    /// command-line overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = self.plant.period();
        if !(p.is_finite() && p > 0.0) {
            return Err(CliError::Parse(format!("plant.period: {p} must be positive")));
        }
        let plant = self.plant.build()?;
        if self.sim.x0.len() != plant.state_dim() {
            return Err(CliError::Parse(format!(
                "sim.x0: plant has {} states, got {} values",
                plant.state_dim(),
                self.sim.x0.len()
            )));
        }
        let controller = self.regulator.controller()?;
        if let Some(z0) = &self.sim.z0 {
            if z0.len() != controller.dim() {
                return Err(CliError::Parse(format!(
                    "sim.z0: regulator has {} states, got {} values",
                    controller.dim(),
                    z0.len()
                )));
            }
        }
        self.sim.validate()?;
        if !(self.noise.power.is_finite() && self.noise.power >= 0.0) {
            return Err(CliError::Parse(format!("noise.power: {} must be nonnegative", self.noise.power)));
        }
        if self.analysis.n_periods == 0 {
            return Err(CliError::Parse("analysis.n_periods must be at least 1".into()));
        }
        Ok(())
    }

    /// Fails with "trajectory too short" when `t_end` cannot hold the
    /// settling time plus the analysis window.
    pub fn check_window(&self) -> Result<(), CliError> {
        let need = self.analysis.settle + self.analysis.n_periods as f64 * self.plant.period();
        if self.sim.t_end + 1e-9 < need {
            return Err(imreg::RegulatorError::TrajectoryTooShort(format!(
                "t_end = {} s but settle + window needs {need} s",
                self.sim.t_end
            ))
            .into());
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("name", self.name.clone());
        match &self.plant {
            PlantSpec::Example => kv("plant.kind", "example".into()),
            PlantSpec::Linear { period, signal } => {
                kv("plant.kind", "linear".into());
                kv("plant.period", period.to_string());
                kv("plant.signal.offset", signal.offset.to_string());
                kv("plant.signal.cos", join(&signal.cos));
                kv("plant.signal.sin", join(&signal.sin));
            }
            PlantSpec::Chain { period, r, a, signal } => {
                kv("plant.kind", "chain".into());
                kv("plant.period", period.to_string());
                kv("plant.r", r.to_string());
                kv("plant.a", join(a));
                kv("plant.signal.offset", signal.offset.to_string());
                kv("plant.signal.cos", join(&signal.cos));
                kv("plant.signal.sin", join(&signal.sin));
            }
        }
        let r = &self.regulator;
        kv(
            "regulator.kind",
            match r.kind {
                ControllerKind::HighGain => "high_gain",
                ControllerKind::InternalModel => "internal_model",
            }
            .into(),
        );
        kv("regulator.sigma", r.sigma.to_string());
        kv("regulator.mu", r.mu.to_string());
        kv("regulator.n_o", r.n_o.to_string());
        kv("regulator.omega_hat", r.omega_hat.to_string());
        kv("regulator.epsilon", r.epsilon.to_string());
        kv("regulator.coefficients", r.coefficients.as_deref().map(join).unwrap_or_default());
        kv("sim.dt", self.sim.dt.to_string());
        kv("sim.t_end", self.sim.t_end.to_string());
        kv("sim.x0", join(&self.sim.x0));
        kv("sim.e0", self.sim.e0.to_string());
        kv("sim.z0", self.sim.z0.as_deref().map(join).unwrap_or_default());
        kv("sim.record_stride", self.sim.record_stride.to_string());
        kv("sim.seed", self.sim.seed.to_string());
        kv("noise.enabled", self.noise.enabled.to_string());
        kv("noise.power", self.noise.power.to_string());
        kv("analysis.n_periods", self.analysis.n_periods.to_string());
        kv("analysis.settle", self.analysis.settle.to_string());
        kv("analysis.harmonics", self.analysis.harmonics.to_string());
        kv("outputs.dir", self.out_dir.display().to_string());
        s
    }
}
