//! End-to-end acceptance checks on the example plant, the regulator's
//! frequency-domain characterisation and the integrator. Runs every check,
//! prints one line per criterion and exits non-zero if any failed.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use imreg::analysis::{fourier_at, harmonic_grid, norms, random_period_window, steady_window, Norms};
use imreg::freqdomain::{
    bound_constants, high_gain_magnitude, internal_model_magnitude, log_grid, to_db, transfer_gain,
    transfer_gain_resolvent, TransferCurve,
};
use imreg::plants::linear_test_plant;
use imreg::simulate::Stepper;
use imreg::verify::{check_hurwitz, check_observability};
use imreg::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const TABLE1_TOL: f64 = 0.05;
const TABLE2_TOL: f64 = 0.10;
const DETUNED_FLAT_TOL: f64 = 0.05;
const N_O4_SUP_MAX: f64 = 1e-3;
const N_O4_L2_MAX: f64 = 1e-4;
const BLOCKING_REL: f64 = 1e-4;
const L2_SCALING_SLACK: f64 = 0.10;
const SIGMA_SUP_MAX: f64 = 10.0;
const RESOLVENT_REL: f64 = 1e-8;
const RESONANCE_REL: f64 = 1e-10;
const HURWITZ_TREND_SLACK: f64 = 0.05;
const BODE_GAP_DB: f64 = 60.0;
const BODE_HF_REL: f64 = 0.01;
const NOISE_POWER: f64 = 1e-3;
const RK4_RATIO: (f64, f64) = (12.0, 20.0);

/// `(sigma, sup, integral column)` for the high-gain loop.
const TABLE1: [(f64, f64, f64); 5] = [
    (2.0, 1.2555, 0.9657),
    (5.0, 0.6577, 0.4083),
    (10.0, 0.400, 0.2166),
    (20.0, 0.2248, 0.1126),
    (40.0, 0.1181, 0.0572),
];

/// `(n_o, sup, integral column)` at `omega_hat = 2 pi`.
const TABLE2_TUNED: [(usize, f64, f64); 4] = [
    (0, 0.3074, 0.1777),
    (1, 0.0917, 0.0549),
    (2, 0.0178, 0.0099),
    (3, 0.0049, 0.0035),
];

/// `(omega_hat / 2 pi, n_o, sup, integral column)`.
fn table2_detuned() -> Vec<(f64, usize, f64, f64)> {
    let phi_g = (1.0 + 5f64.sqrt()) / 2.0;
    vec![
        (0.99, 1, 0.1145, 0.0587),
        (0.99, 2, 0.0835, 0.0371),
        (0.99, 3, 0.0837, 0.0369),
        (0.95, 1, 0.2045, 0.0996),
        (0.95, 2, 0.2038, 0.0980),
        (0.95, 3, 0.2041, 0.0982),
        (phi_g, 1, 0.2915, 0.1788),
        (phi_g, 2, 0.2928, 0.1790),
        (phi_g, 3, 0.2929, 0.1790),
    ]
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn regulator(n_o: usize, omega_hat: f64) -> Controller {
    let cfg = RegulatorConfig::canonical(n_o, 2.0, 1.0, omega_hat, 0.5).unwrap();
    Controller::InternalModel(OscillatorBank::build(&cfg).unwrap())
}

fn steady_norms(controller: &Controller) -> Norms {
    let traj = run(&example_plant(), controller, &SimConfig::default(), &NoiseModel::off()).unwrap();
    norms(&steady_window(&traj, 1.0, 20, 0.0).unwrap())
}

/// Worst relative error of `(sup, rms)` against a reference row.
fn table_error(n: &Norms, sup: f64, integral: f64) -> (f64, f64) {
    (rel(n.sup, sup), rel(n.rms(), integral))
}

fn criterion_1(hg: &[Norms]) -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for (n, &(_, sup, l2)) in hg.iter().zip(&TABLE1) {
        let (a, b) = table_error(n, sup, l2);
        worst = (worst.0.max(a), worst.1.max(b));
    }
    Outcome {
        pass: worst.0 <= TABLE1_TOL && worst.1 <= TABLE1_TOL,
        detail: format!(
            "high-gain norms, worst rel err sup {:.2e} integral {:.2e} (tol {TABLE1_TOL})",
            worst.0, worst.1
        ),
    }
}

fn criterion_2(tuned: &[Norms]) -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for (n, &(_, sup, l2)) in tuned.iter().zip(&TABLE2_TUNED) {
        let (a, b) = table_error(n, sup, l2);
        worst = (worst.0.max(a), worst.1.max(b));
    }
    let n4 = &tuned[4];
    let floor_ok = n4.sup < N_O4_SUP_MAX && n4.l2 < N_O4_L2_MAX;
    Outcome {
        pass: worst.0 <= TABLE2_TOL && worst.1 <= TABLE2_TOL && floor_ok,
        detail: format!(
            "n_o 0..3 worst rel err sup {:.2e} integral {:.2e} (tol {TABLE2_TOL}); n_o=4 sup {:.2e} l2 {:.2e}",
            worst.0, worst.1, n4.sup, n4.l2
        ),
    }
}

fn criterion_3() -> Outcome {
    let rows = table2_detuned();
    let results: Vec<Norms> = rows
        .par_iter()
        .map(|&(f, n_o, _, _)| steady_norms(&regulator(n_o, f * 2.0 * PI)))
        .collect();
    let mut worst = (0.0f64, 0.0f64);
    for (n, &(_, _, sup, l2)) in results.iter().zip(&rows) {
        let (a, b) = table_error(n, sup, l2);
        worst = (worst.0.max(a), worst.1.max(b));
    }
    let golden = &results[6..9];
    let flat = golden.iter().map(|n| rel(n.l2, golden[0].l2)).fold(0.0, f64::max);
    Outcome {
        pass: worst.0 <= TABLE2_TOL && worst.1 <= TABLE2_TOL && flat < DETUNED_FLAT_TOL,
        detail: format!(
            "detuned rows worst rel err sup {:.2e} integral {:.2e} (tol {TABLE2_TOL}); golden n_o 1->3 l2 change {:.2e} (tol {DETUNED_FLAT_TOL})",
            worst.0, worst.1, flat
        ),
    }
}

fn criterion_4() -> Outcome {
    let omega_hat = 2.0 * PI;
    let grid = harmonic_grid(1.0, 10);
    let worst = [1usize, 2, 3]
        .par_iter()
        .map(|&n_o| {
            let traj = run(&example_plant(), &regulator(n_o, omega_hat), &SimConfig::default(), &NoiseModel::off()).unwrap();
            let window = steady_window(&traj, 1.0, 20, 0.0).unwrap();
            let spec = fourier_at(&window, &grid);
            let max = spec.max_magnitude();
            (0..=n_o)
                .map(|l| spec.magnitude_at(l as f64 * omega_hat).unwrap() / max)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Outcome {
        pass: worst < BLOCKING_REL,
        detail: format!("n_o 1..3, worst |e_l| / max |e_k| over 0..20 pi = {worst:.2e} (tol {BLOCKING_REL:e})"),
    }
}

fn criterion_5(tuned: &[Norms]) -> Outcome {
    let scaled: Vec<f64> = tuned
        .iter()
        .enumerate()
        .map(|(n_o, n)| ((n_o + 1) * (n_o + 1)) as f64 * n.l2)
        .collect();
    let pass = scaled.windows(2).all(|w| w[1] <= w[0] * (1.0 + L2_SCALING_SLACK));
    Outcome {
        pass,
        detail: format!(
            "(n_o+1)^2 l2 = [{}] (slack {L2_SCALING_SLACK})",
            scaled.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_6(hg: &[Norms]) -> Outcome {
    let decreasing = hg.windows(2).all(|w| w[1].sup < w[0].sup);
    let scaled: Vec<f64> = hg.iter().zip(&TABLE1).map(|(n, r)| r.0 * n.sup).collect();
    let max = scaled.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: decreasing && max < SIGMA_SUP_MAX,
        detail: format!("sup strictly decreasing: {decreasing}; max sigma*sup = {max:.3} (limit {SIGMA_SUP_MAX})"),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_o = rng.random_range(0..=20);
        let mu = rng.random_range(0.2..4.0);
        let omega_hat = rng.random_range(0.5..10.0);
        let eps = rng.random_range(0.05..=1.0);
        let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, omega_hat, eps).unwrap();
        let bank = OscillatorBank::build(&cfg).unwrap();
        let w = rng.random_range(0.0..(n_o as f64 + 2.0) * omega_hat);
        let closed = transfer_gain(&cfg, w);
        let oracle = transfer_gain_resolvent(&bank, mu, w).unwrap();
        worst = worst.max(rel(closed, oracle));
    }
    let mut worst_res = 0.0f64;
    for n_o in 1..=20 {
        for mu in [0.5, 1.0, 2.0] {
            let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, 2.0 * PI, 0.5).unwrap();
            for l in 1..=n_o {
                let n_l = cfg.coefficients.coefficient(l).unwrap();
                let expect = 2.0 / (mu * mu * n_l);
                worst_res = worst_res.max(rel(transfer_gain(&cfg, l as f64 * cfg.omega_hat), expect));
            }
        }
    }
    Outcome {
        pass: worst <= RESOLVENT_REL && worst_res <= RESONANCE_REL,
        detail: format!(
            "closed form vs resolvent worst rel {worst:.2e} (tol {RESOLVENT_REL:e}); resonance identity worst rel {worst_res:.2e} (tol {RESONANCE_REL:e})"
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut violations = 0usize;
    let mut tightest = f64::INFINITY;
    for n_o in 1..=32usize {
        for mu in [1.0, 2.0, 4.0] {
            for eps in [0.25, 0.5, 1.0] {
                let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, 2.0 * PI, eps).unwrap();
                let x_max = 2.0 * (n_o as f64 + 1.0);
                let mut grid: Vec<f64> = (0..10_000).map(|i| x_max * i as f64 / 9_999.0).collect();
                grid.extend((1..=n_o).map(|l| l as f64));
                let curve = TransferCurve::new(&cfg, grid).unwrap();
                violations += curve.bound_violations().len();
                let bc = bound_constants(&cfg.coefficients, mu).unwrap();
                assert!((bc.kappa0 - 3.5 * cfg.coefficients.coefficient(0).unwrap()).abs() < 1e-15);
                for (x, v) in curve.x_grid.iter().zip(&curve.values) {
                    tightest = tightest.min((curve.kappa0 + curve.kappa1 * x * x) / v);
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations over 864 configs x 10^4 points; min bound/T = {tightest:.3}"),
    }
}

fn criterion_9() -> Outcome {
    let mut all_ok = true;
    let mut trend_ok = true;
    let mut worst_overall = f64::NEG_INFINITY;
    for mu in [0.5, 1.0, 2.0] {
        let mut prev: Option<f64> = None;
        for n_o in 0..=64usize {
            let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, 2.0 * PI, 0.5).unwrap();
            let bank = OscillatorBank::build(&cfg).unwrap();
            let h = check_hurwitz(&bank, mu).unwrap();
            all_ok &= check_observability(&bank) && h.hurwitz && h.worst_real_part < 0.0;
            worst_overall = worst_overall.max(h.worst_real_part);
            let mag = h.worst_real_part.abs();
            if let Some(p) = prev {
                trend_ok &= mag <= p * (1.0 + HURWITZ_TREND_SLACK);
            }
            prev = Some(mag);
        }
    }
    Outcome {
        pass: all_ok && trend_ok,
        detail: format!(
            "observable and Hurwitz for all: {all_ok}; |max Re| non-increasing: {trend_ok}; largest max Re = {worst_overall:.3e}"
        ),
    }
}

fn criterion_10() -> Outcome {
    let cfg = RegulatorConfig::canonical(10, 2.0, 1.0, 2.0 * PI, 0.5).unwrap();
    let gap = (0..=10)
        .map(|l| {
            let w = l as f64 * cfg.omega_hat;
            to_db(high_gain_magnitude(cfg.sigma, w)) - to_db(internal_model_magnitude(&cfg, w))
        })
        .fold(f64::INFINITY, f64::min);
    let hf = log_grid(100.0 * cfg.omega_hat, 1e4 * cfg.omega_hat, 2000)
        .into_iter()
        .filter(|w| *w > 100.0 * cfg.omega_hat)
        .map(|w| rel(internal_model_magnitude(&cfg, w), high_gain_magnitude(cfg.sigma, w)))
        .fold(0.0, f64::max);
    Outcome {
        pass: gap >= BODE_GAP_DB && hf <= BODE_HF_REL,
        detail: format!("min gap at l*omega_hat {gap:.1} dB (need {BODE_GAP_DB}); worst rel deviation above 100 omega_hat {hf:.2e} (tol {BODE_HF_REL})"),
    }
}

fn criterion_11() -> Outcome {
    let results: Vec<(f64, f64)> = (1..=5u64)
        .into_par_iter()
        .map(|seed| {
            let sim = SimConfig {
                seed,
                ..SimConfig::default()
            };
            let noise = NoiseModel::with_power(NOISE_POWER);
            let plant = example_plant();
            let l2 = |c: &Controller| {
                let traj = run(&plant, c, &sim, &noise).unwrap();
                norms(&random_period_window(&traj, 1.0, 30.0, seed).unwrap()).l2
            };
            (l2(&regulator(2, 2.0 * PI)), l2(&Controller::high_gain(2.0).unwrap()))
        })
        .collect();
    let wins = results.iter().filter(|(im, hg)| im < hg).count();
    Outcome {
        pass: wins == 5,
        detail: format!(
            "internal model below high gain on {wins}/5 seeds; pairs [{}]",
            results
                .iter()
                .map(|(a, b)| format!("{a:.3e}<{b:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn criterion_12() -> Outcome {
    let plant = linear_test_plant(1.0, |t| 0.3 + (2.0 * PI * t).sin() + 0.5 * (4.0 * PI * t).cos());
    let controller = regulator(2, 2.0 * PI);
    let t_end = 5.0;
    let terminal = |n_steps: usize| {
        let dt = t_end / n_steps as f64;
        let mut s = Stepper::new(&plant, &controller, &[], 1.0, None).unwrap();
        for k in 0..n_steps {
            s.step(k as f64 * dt, dt, 0.0).unwrap();
        }
        let mut y = vec![s.e()];
        y.extend_from_slice(s.z());
        y
    };
    let n = 250;
    let (coarse, fine, reference) = (terminal(n), terminal(2 * n), terminal(8 * n));
    let err = |a: &[f64]| a.iter().zip(&reference).map(|(x, r)| (x - r).abs()).fold(0.0, f64::max);
    let ratio = err(&coarse) / err(&fine);
    Outcome {
        pass: (RK4_RATIO.0..=RK4_RATIO.1).contains(&ratio),
        detail: format!(
            "terminal error ratio dt={:.0e} vs dt/2 = {ratio:.2} (range {:?})",
            t_end / n as f64,
            RK4_RATIO
        ),
    }
}

type Row = (usize, &'static str, Outcome, f64);

fn timed(results: &mut Vec<Row>, id: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let out = f();
    results.push((id, name, out, t.elapsed().as_secs_f64()));
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<Row> = Vec::new();

    let hg_start = Instant::now();
    let hg: Vec<Norms> = TABLE1
        .par_iter()
        .map(|&(s, _, _)| steady_norms(&Controller::high_gain(s).unwrap()))
        .collect();
    let hg_time = hg_start.elapsed().as_secs_f64();
    let tuned_start = Instant::now();
    let tuned: Vec<Norms> = (0..=4usize)
        .into_par_iter()
        .map(|n_o| steady_norms(&regulator(n_o, 2.0 * PI)))
        .collect();
    let tuned_time = tuned_start.elapsed().as_secs_f64();

    timed(&mut results, 1, "table 1 high-gain norms", || criterion_1(&hg));
    results.last_mut().unwrap().3 += hg_time;
    timed(&mut results, 2, "table 2 tuned internal model", || criterion_2(&tuned));
    results.last_mut().unwrap().3 += tuned_time;
    timed(&mut results, 3, "table 2 detuned base frequency", criterion_3);
    timed(&mut results, 4, "blocking zeros at embedded frequencies", criterion_4);
    timed(&mut results, 5, "l2 scaling in n_o", || criterion_5(&tuned));
    timed(&mut results, 6, "sigma scaling of sup", || criterion_6(&hg));
    timed(&mut results, 7, "transfer gain closed form vs resolvent", criterion_7);
    timed(&mut results, 8, "quadratic envelope of transfer gain", criterion_8);
    timed(&mut results, 9, "observability and hurwitz certification", criterion_9);
    timed(&mut results, 10, "bode notch and high-frequency match", criterion_10);
    timed(&mut results, 11, "noisy loop ordering", criterion_11);
    timed(&mut results, 12, "rk4 convergence order", criterion_12);

    let mut failed = 0;
    for (id, name, out, secs) in &results {
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{secs:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
