use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imreg::analysis::{
    fft_spectrum, fourier_at, harmonic_grid, norms, random_period_window, steady_window, write_fft_csv,
    write_norms_csv, HarmonicSpectrum, Norms, NormsRow,
};
use imreg::format::fmt_f64;
use imreg::freqdomain::{bode_high_gain, bode_internal_model, high_gain_magnitude, internal_model_magnitude, log_grid, to_db};
use imreg::internal_model::CoefficientSequence;
use imreg::verify::certify;
use imreg::{run, RegulatorConfig, Trajectory};
use rayon::prelude::*;

use crate::reproduce::{self, Table};
use crate::scenario::{parse_list, parse_real, ControllerKind, RegulatorSpec, Scenario};
use crate::{CliError, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

/// Noisy runs are scored over one random period in this trailing span.
pub const NOISY_SPAN: f64 = 30.0;

#[derive(Debug, Parser)]
#[command(name = "imreg", version, about = "Internal-model regulator simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario; write trajectory, norms and spectrum CSVs.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma separated; reals accept a `pi` suffix.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Norms and spectra of an exported trajectory CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0, value_parser = real)]
        period: f64,
        #[arg(long, default_value_t = 20)]
        n_periods: usize,
        #[arg(long, default_value_t = 10)]
        harmonics: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linear-loop Bode magnitudes for the high-gain and internal-model laws.
    Bode {
        #[command(flatten)]
        regulator: RegulatorFlags,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Structural checks of a regulator configuration.
    Verify {
        #[command(flatten)]
        regulator: RegulatorFlags,
        /// Take the regulator from a scenario file instead of the flags.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the benchmark tables and figure data against reference values.
    Reproduce {
        #[arg(long, value_enum)]
        table: Table,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Sigma,
    #[value(name = "n_o")]
    NO,
    #[value(name = "omega_hat")]
    OmegaHat,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long, value_parser = real)]
    pub dt: Option<f64>,
    #[arg(long, value_parser = real)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunFlags {
    pub fn apply(&self, sc: &mut Scenario) -> Result<(), CliError> {
        if let Some(dt) = self.dt {
            // keep the record rate when the step changes
            let rate = sc.sim.dt * sc.sim.record_stride as f64;
            sc.sim.dt = dt;
            sc.sim.record_stride = ((rate / dt).round() as usize).max(1);
        }
        if let Some(t) = self.t_end {
            sc.sim.t_end = t;
        }
        if let Some(s) = self.seed {
            sc.sim.seed = s;
        }
        if let Some(o) = &self.out {
            sc.out_dir = o.clone();
        }
        sc.validate()
    }
}

#[derive(Debug, Clone, Args)]
pub struct RegulatorFlags {
    #[arg(long, default_value_t = 2.0, value_parser = real)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0, value_parser = real)]
    pub mu: f64,
    #[arg(long, default_value_t = CoefficientSequence::DEFAULT_EPSILON, value_parser = real)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI, value_parser = real)]
    pub omega_hat: f64,
    #[arg(long, default_value_t = 10)]
    pub n_o: usize,
    /// Explicit `n_z0,...,n_z(n_o)` instead of the canonical sequence.
    #[arg(long, allow_hyphen_values = true)]
    pub coefficients: Option<String>,
}

impl RegulatorFlags {
    /// Assembled without validation so that `verify` can report every problem.
    pub fn config(&self) -> Result<RegulatorConfig, CliError> {
        let coefficients = match &self.coefficients {
            Some(c) => Some(parse_list(c).map_err(CliError::Parse)?),
            None => None,
        };
        unchecked_config(&RegulatorSpec {
            kind: ControllerKind::InternalModel,
            sigma: self.sigma,
            mu: self.mu,
            n_o: self.n_o,
            omega_hat: self.omega_hat,
            epsilon: self.epsilon,
            coefficients,
        })
    }
}

/// Regulator configuration without the gain and ordering checks, so that
/// `verify` can report on them.
pub fn unchecked_config(spec: &RegulatorSpec) -> Result<RegulatorConfig, CliError> {
    let coefficients = match &spec.coefficients {
        Some(c) => CoefficientSequence::explicit(c.clone())?,
        None => CoefficientSequence::canonical(spec.n_o, spec.epsilon)?,
    };
    Ok(RegulatorConfig {
        n_o: spec.n_o,
        sigma: spec.sigma,
        mu: spec.mu,
        omega_hat: spec.omega_hat,
        coefficients,
    })
}

fn real(s: &str) -> Result<f64, String> {
    parse_real(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    Scenario::parse(&text)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

pub(crate) fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

pub(crate) fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

/// Result of running one scenario through simulation and steady-state analysis.
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub norms: Norms,
    pub spectrum: HarmonicSpectrum,
}

pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, CliError> {
    sc.check_window()?;
    let plant = sc.plant.build()?;
    let controller = sc.regulator.controller()?;
    let trajectory = run(plant.as_ref(), &controller, &sc.sim, &sc.noise)?;
    let period = sc.plant.period();
    let (n, spectrum) = {
        let window = steady_window(&trajectory, period, sc.analysis.n_periods, sc.analysis.settle)?;
        let n = if sc.noise.enabled {
            let span = NOISY_SPAN.min(sc.sim.t_end - sc.analysis.settle);
            norms(&random_period_window(&trajectory, period, span, sc.sim.seed)?)
        } else {
            norms(&window)
        };
        (n, fourier_at(&window, &harmonic_grid(period, sc.analysis.harmonics)))
    };
    Ok(RunOutput {
        trajectory,
        norms: n,
        spectrum,
    })
}

pub fn norms_row(sc: &Scenario, n: Norms) -> NormsRow {
    let im = sc.regulator.kind == ControllerKind::InternalModel;
    NormsRow {
        scenario: sc.name.clone(),
        sigma: sc.regulator.sigma,
        mu: im.then_some(sc.regulator.mu),
        n_o: im.then_some(sc.regulator.n_o),
        omega_hat: im.then_some(sc.regulator.omega_hat),
        norms: n,
        noisy: sc.noise.enabled,
    }
}

fn summary(sc: &Scenario, n: &Norms) -> String {
    format!(
        "{}: sup={} l2={} rms={}",
        sc.name,
        fmt_f64(n.sup),
        fmt_f64(n.l2),
        fmt_f64(n.rms())
    )
}

fn cmd_simulate(path: &Path, flags: &RunFlags) -> Result<u8, CliError> {
    let mut sc = load_scenario(path)?;
    flags.apply(&mut sc)?;
    let out = run_scenario(&sc)?;
    let dir = &sc.out_dir;
    write_with(&dir.join("trajectory.csv"), |w| out.trajectory.write_csv(w))?;
    write_with(&dir.join("norms.csv"), |w| write_norms_csv(&[norms_row(&sc, out.norms)], w))?;
    write_with(&dir.join("spectrum.csv"), |w| out.spectrum.write_csv(w))?;
    println!("{}", summary(&sc, &out.norms));
    Ok(EXIT_OK)
}

fn sweep_values(axis: Axis, values: &str) -> Result<Vec<f64>, CliError> {
    let v = parse_list(values).map_err(CliError::Parse)?;
    if v.is_empty() {
        return Err(CliError::Usage("--values must list at least one value".into()));
    }
    if axis == Axis::NO {
        if let Some(bad) = v.iter().find(|x| !(x.fract() == 0.0 && **x >= 0.0)) {
            return Err(CliError::Usage(format!("n_o value {bad} is not a non-negative integer")));
        }
    }
    Ok(v)
}

pub fn sweep_scenarios(base: &Scenario, axis: Axis, values: &[f64]) -> Result<Vec<Scenario>, CliError> {
    values
        .iter()
        .map(|&v| {
            let mut sc = base.clone();
            match axis {
                Axis::Sigma => sc.regulator.sigma = v,
                Axis::NO => sc.regulator.n_o = v as usize,
                Axis::OmegaHat => sc.regulator.omega_hat = v,
            }
            sc.name = format!("{}[{}={}]", base.name, axis.to_possible_value().unwrap().get_name(), v);
            sc.validate()?;
            Ok(sc)
        })
        .collect()
}

fn cmd_sweep(path: &Path, axis: Axis, values: &str, flags: &RunFlags, workers: Option<usize>) -> Result<u8, CliError> {
    let mut base = load_scenario(path)?;
    flags.apply(&mut base)?;
    let values = sweep_values(axis, values)?;
    let scenarios = sweep_scenarios(&base, axis, &values)?;
    base.check_window()?;
    let results: Vec<Result<Norms, CliError>> =
        pool(workers)?.install(|| scenarios.par_iter().map(|sc| run_scenario(sc).map(|o| o.norms)).collect());
    let mut rows = Vec::with_capacity(results.len());
    for (sc, r) in scenarios.iter().zip(results) {
        let n = r?;
        println!("{}", summary(sc, &n));
        rows.push(norms_row(sc, n));
    }
    write_with(&base.out_dir.join("sweep.csv"), |w| write_norms_csv(&rows, w))?;
    Ok(EXIT_OK)
}

/// Reads the `t` and `e` columns of a trajectory export.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').map(str::trim).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Parse(format!("{}: no `{name}` column", path.display())))
    };
    let (ti, ei) = (col("t")?, col("e")?);
    let (mut times, mut e) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64, CliError> {
            fields
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| CliError::Parse(format!("{}: bad value on data row {}", path.display(), k + 1)))
        };
        times.push(get(ti)?);
        e.push(get(ei)?);
    }
    if times.len() < 2 {
        return Err(CliError::Parse(format!("{}: fewer than two samples", path.display())));
    }
    let sample_dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let len = times.len();
    Ok(Trajectory {
        times,
        n_x: 0,
        x: vec![],
        e,
        n_z: 0,
        z: vec![],
        u: vec![0.0; len],
        v: vec![0.0; len],
        sample_dt,
    })
}

fn cmd_analyze(input: &Path, period: f64, n_periods: usize, harmonics: usize, out: Option<&Path>) -> Result<u8, CliError> {
    let traj = read_trajectory(input)?;
    let window = steady_window(&traj, period, n_periods, 0.0)?;
    let n = norms(&window);
    let spectrum = fourier_at(&window, &harmonic_grid(period, harmonics));
    println!(
        "window [{}, {}]: sup={} l2={} rms={} periodicity_residual={}",
        window.t_start(),
        window.t_end(),
        fmt_f64(n.sup),
        fmt_f64(n.l2),
        fmt_f64(n.rms()),
        window.periodicity_residual().map(fmt_f64).unwrap_or_else(|| "n/a".into())
    );
    if let Some(dir) = out {
        write_with(&dir.join("spectrum.csv"), |w| spectrum.write_csv(w))?;
        write_with(&dir.join("fft.csv"), |w| write_fft_csv(&fft_spectrum(&window), w))?;
    }
    Ok(EXIT_OK)
}

/// Log grid over 0.1..1000 rad/s with the exact oscillator frequencies
/// merged in so that the notches are sampled.
pub fn bode_grid(config: &RegulatorConfig) -> Vec<f64> {
    let (lo, hi) = (0.1, 1000.0);
    let mut g = log_grid(lo, hi, 2000);
    g.extend(
        (1..=config.n_o)
            .map(|l| l as f64 * config.omega_hat)
            .filter(|w| (lo..=hi).contains(w)),
    );
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Smallest `|high gain| - |internal model|` in dB over `l * omega_hat`,
/// `l = 0..=n_o`.
pub fn notch_depth_db(config: &RegulatorConfig) -> f64 {
    (0..=config.n_o)
        .map(|l| {
            let w = l as f64 * config.omega_hat;
            to_db(high_gain_magnitude(config.sigma, w)) - to_db(internal_model_magnitude(config, w))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn write_bode(config: &RegulatorConfig, dir: &Path) -> Result<(), CliError> {
    let grid = bode_grid(config);
    let hg = bode_high_gain(config.sigma, grid.clone());
    let im = bode_internal_model(config, grid);
    write_with(&dir.join("bode_high_gain.csv"), |w| hg.write_csv(w))?;
    write_with(&dir.join("bode_internal_model.csv"), |w| im.write_csv(w))
}

fn cmd_bode(flags: &RegulatorFlags, out: &Path) -> Result<u8, CliError> {
    let config = flags.config()?;
    config.validate()?;
    write_bode(&config, out)?;
    println!(
        "bode: n_o={} notch depth at l*omega_hat, l=0..{}: {:.1} dB; written to {}",
        config.n_o,
        config.n_o,
        notch_depth_db(&config),
        out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(flags: &RegulatorFlags, scenario: Option<&Path>, out: Option<&Path>) -> Result<u8, CliError> {
    let config = match scenario {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(CliError::io(p))?;
            unchecked_config(&Scenario::parse_unchecked(&text)?.regulator)?
        }
        None => flags.config()?,
    };
    let report = certify(&config);
    println!("{report}");
    if let Some(path) = out {
        write_with(path, |w| report.write_csv(w))?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
}

pub fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { scenario, run } => cmd_simulate(&scenario, &run),
        Command::Sweep {
            scenario,
            axis,
            values,
            run,
            workers,
        } => cmd_sweep(&scenario, axis, &values, &run, workers),
        Command::Analyze {
            input,
            period,
            n_periods,
            harmonics,
            out,
        } => cmd_analyze(&input, period, n_periods, harmonics, out.as_deref()),
        Command::Bode { regulator, out } => cmd_bode(&regulator, &out),
        Command::Verify { regulator, scenario, out } => cmd_verify(&regulator, scenario.as_deref(), out.as_deref()),
        Command::Reproduce { table, run, workers } => reproduce::run_table(table, &run, workers),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
