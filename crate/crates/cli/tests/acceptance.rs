//! Acceptance suite. Each criterion runs at its fixed tolerance and prints one
//! PASS/FAIL line; the process exits nonzero if any criterion fails.
//!
//! Run alone with `cargo test -p weakosc-cli --test acceptance`.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakosc_cli::scenarios::random_oscillating_state;
use weakosc_core::continuum::{
    continuum_averaged_weak_value, continuum_mixed_weak_value, countable_reduction, natural_window,
    recover_amplitudes, tailored_postselection, ContinuumProfile, TailoredPostselection, Window,
};
use weakosc_core::oscillate::time_average;
use weakosc_core::pointerlab::{estimate_weak_value, monte_carlo, Estimator, McConfig, PointerModel};
use weakosc_core::strongeq::equivalence_suite;
use weakosc_core::weakval::{
    averaged_weak_value, naive_substitution_weak_value, two_state_averaged, two_state_averaged_quadrature,
    two_state_mixed, weak_value_by_decomposition, weak_value_mixed, weak_value_pure,
};
use weakosc_core::{
    AveragingWindow, MixtureDecomposition, Observable, PureState, TwoStateConfig, C64,
};

const GRID: [f64; 7] = [0.1, 0.25, 0.5, 0.8, 1.25, 2.0, 4.0];

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn grid_pairs() -> impl Iterator<Item = (f64, f64)> {
    GRID.iter().flat_map(|&a| GRID.iter().map(move |&b| (a, b)))
}

fn is_unit(x: f64) -> bool {
    (x - 1.0).abs() < 1e-12
}

fn sgn_law(x: f64) -> f64 {
    if is_unit(x) {
        0.0
    } else {
        (1.0 - x * x).signum()
    }
}

fn rational_law(x: f64) -> f64 {
    (1.0 - x * x) / (1.0 + x * x)
}

/// Quadrature of the generic time-domain weak value over one period.
fn quadrature_average(a: f64, b: f64) -> C64 {
    let cfg = TwoStateConfig::new(a, b, 1.0e6, 0.3).unwrap();
    let window = AveragingWindow::periods(0.0, TAU / cfg.omega, 1.0, 1 << 16).unwrap();
    averaged_weak_value(&cfg.oscillating_state(), &Observable::polarization(), &cfg.post_state(), &window)
        .unwrap()
        .value
}

fn c01_sign_law() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut points = 0;
    for (a, b) in grid_pairs().filter(|(a, b)| !is_unit(a * b)) {
        let start = Instant::now();
        let avg = quadrature_average(a, b);
        slowest = slowest.max(start.elapsed());
        worst = worst.max((avg.re - sgn_law(a * b)).abs());
        points += 1;
    }
    verdict(
        worst <= 1e-6 && slowest < Duration::from_secs(1),
        format!("{points} grid points, max |Re - sgn| = {worst:.2e}, slowest point {slowest:?}"),
    )
}

fn c02_unit_product() -> Verdict {
    let mut closed_exact = true;
    let mut worst: f64 = 0.0;
    for (a, b) in [(1.0, 1.0), (0.8, 1.25), (0.5, 2.0), (4.0, 0.25)] {
        for phi0 in [0.0, 0.4, 2.0] {
            let cfg = TwoStateConfig::new(a, b, 1.0e6, phi0).unwrap();
            closed_exact &= two_state_averaged(&cfg).value == C64::new(0.0, 0.0);
            let pv = two_state_averaged_quadrature(&cfg, 1 << 16).unwrap();
            worst = worst.max(pv.value.norm());
        }
    }
    verdict(
        closed_exact && worst <= 1e-6,
        format!("closed form exactly zero: {closed_exact}, principal value max |.| = {worst:.2e}"),
    )
}

fn c03_imaginary_part() -> Verdict {
    let worst = grid_pairs()
        .filter(|(a, b)| !is_unit(a * b))
        .map(|(a, b)| quadrature_average(a, b).im.abs())
        .fold(0.0, f64::max);
    verdict(worst <= 1e-10, format!("max |Im| = {worst:.2e}"))
}

fn c04_mixed_law() -> Verdict {
    let obs = Observable::polarization();
    let mixed = |a: f64, b: f64| {
        let cfg = TwoStateConfig::new(a, b, 1.0, 0.0).unwrap();
        weak_value_mixed(&cfg.mixed_pre(), &obs, &cfg.mixed_post()).unwrap().value
    };
    let worst = grid_pairs()
        .map(|(a, b)| (mixed(a, b) - C64::new(rational_law(a * b), 0.0)).norm())
        .fold(0.0, f64::max);
    let spot_plus = mixed(0.5, 1.0).re;
    let spot_minus = mixed(2.0, 1.0).re;
    let spots = (spot_plus - 0.6).abs() <= 1e-12 && (spot_minus + 0.6).abs() <= 1e-12;
    verdict(
        worst <= 1e-12 && spots,
        format!("max deviation {worst:.2e}, (0.5,1) -> {spot_plus}, (2,1) -> {spot_minus}"),
    )
}

fn c05_integral_identity() -> Verdict {
    let a: f64 = 1.25;
    let window = AveragingWindow::new(0.0, TAU, 256).unwrap();
    let mean = time_average(|x| C64::new(1.0 / (a + x.cos()), 0.0), &window).unwrap();
    let numeric = TAU * mean.re;
    let exact = TAU / (a * a - 1.0).sqrt();
    let err = (numeric - exact).abs();
    verdict(err <= 1e-10, format!("numeric {numeric:.15}, exact {exact:.15}, error {err:.2e}"))
}

/// Largest deviation and largest coherence bound over 100 seeded states.
fn worst_strong_deviation(duration: f64) -> (f64, f64) {
    let window = AveragingWindow::new(0.0, duration, 2).unwrap();
    (0..100u64)
        .flat_map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(2024);
            rng.set_stream(k);
            let s = random_oscillating_state(4, 1.0, 3.0, &mut rng);
            equivalence_suite(&s, 1, &window, k).unwrap()
        })
        .fold((0.0, 0.0), |(d, b), r| (r.deviation.max(d), r.bound.max(b)))
}

fn c06_strong_indistinguishability() -> Verdict {
    // min_gap = 1, so min_gap * duration = 2 pi 1e4
    let duration = TAU * 1.0e4;
    let (full, full_bound) = worst_strong_deviation(duration);
    let (half, half_bound) = worst_strong_deviation(duration / 2.0);
    let ratio = half / full;
    verdict(
        full <= 1e-3 && ratio >= 2.0,
        format!(
            "worst deviation {full:.3e}; halved window {half:.3e} (ratio {ratio:.3}, required >= 2; \
             envelope ratio {:.3})",
            half_bound / full_bound
        ),
    )
}

fn random_mixture(dim: usize, rng: &mut ChaCha8Rng) -> MixtureDecomposition {
    let n = rng.random_range(1..=dim + 1);
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let components = (0..n).map(|_| PureState::random(dim, rng)).collect();
    MixtureDecomposition::new(weights.iter().map(|w| w / total).collect(), components).unwrap()
}

fn c07_decomposition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let dim = 2 + k % 5;
        let pre = random_mixture(dim, &mut rng);
        let post = random_mixture(dim, &mut rng);
        let obs = Observable::random(dim, &mut rng);
        let by_parts = weak_value_by_decomposition(&pre, &obs, &post).unwrap();
        let trace = weak_value_mixed(&pre.to_density(), &obs, &post.to_density()).unwrap();
        worst = worst.max((by_parts.value - trace.value).norm());
    }
    verdict(worst <= 1e-10, format!("100 mixtures, dims 2-6, max difference {worst:.2e}"))
}

fn c08_naive_substitution() -> Verdict {
    let cfg = TwoStateConfig::new(0.5, 1.0, 1.0e6, 0.0).unwrap();
    let window = AveragingWindow::periods(0.0, TAU / cfg.omega, 1.0, 4096).unwrap();
    let naive = naive_substitution_weak_value(
        &cfg.oscillating_state(),
        &Observable::polarization(),
        &cfg.post_state(),
        &window,
    )
    .unwrap();
    let err = (naive.value - two_state_mixed(&cfg).value).norm();
    verdict(err <= 1e-6, format!("naive {:.12}, mixed 0.6, difference {err:.2e}", naive.re()))
}

fn gaussian(x: f64) -> f64 {
    (-x * x / 4.0).exp()
}

fn continuum_profile(bins: usize) -> ContinuumProfile {
    ContinuumProfile::sampled(-8.0, 8.0, bins, gaussian)
        .unwrap()
        .with_phase(1.0e6, 0.4)
        .with_resolution(0.1, 1.0)
}

/// Bin probabilities integrated from the underlying density with composite
/// Simpson, as a non-selective position measurement would report them.
fn integrated_tailoring(p: &ContinuumProfile, w: &Window, c1: f64, c2: f64) -> TailoredPostselection {
    let h = p.spacing();
    let norm = p.amplitude()[0] / gaussian(p.grid()[0]);
    let probabilities: Vec<f64> = p
        .grid()
        .iter()
        .map(|&x| {
            let n = 32;
            let step = h / n as f64;
            let f = |y: f64| (norm * gaussian(y)).powi(2);
            let lo = x - 0.5 * h;
            let mut s = f(lo) + f(lo + h);
            for i in 1..n {
                s += f(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * step / 3.0
        })
        .collect();
    TailoredPostselection::from_amplitudes(&recover_amplitudes(&probabilities, h), h, w, c1, c2).unwrap()
}

fn c09_continuum_laws() -> Verdict {
    let p = continuum_profile(512);
    let w = Window::new(&p, 0.0, 1.0).unwrap();
    let window = natural_window(&p, &w, 64).unwrap();
    let (mut avg_err, mut mixed_err): (f64, f64) = (0.0, 0.0);
    for ratio in [1.0 / 3.0, 0.5, 2.0, 3.0] {
        // C1 / C2 = ratio
        let (c1, c2) = (ratio, 1.0);
        let r2 = (c2 / c1) * (c2 / c1);
        let post = tailored_postselection(&p, &w, c1, c2).unwrap();
        let avg = continuum_averaged_weak_value(&p, &post, &w, &window).unwrap();
        avg_err = avg_err.max((avg.value - C64::new((1.0 - r2).signum(), 0.0)).norm());
        let mixed = continuum_mixed_weak_value(&p, &post, &w).unwrap();
        mixed_err = mixed_err.max((mixed.value - C64::new((1.0 - r2) / (1.0 + r2), 0.0)).norm());
    }

    let law = |c1: f64, c2: f64| {
        let r2 = (c2 / c1).powi(2);
        (1.0 - r2) / (1.0 + r2)
    };
    let errors: Vec<f64> = [512, 1024, 2048]
        .iter()
        .map(|&bins| {
            let p = continuum_profile(bins);
            // off-centre, so the two halves carry different tailoring errors
            let w = Window::new(&p, 0.5, 2.0).unwrap();
            let post = integrated_tailoring(&p, &w, 2.0, 1.0);
            (continuum_mixed_weak_value(&p, &post, &w).unwrap().re() - law(2.0, 1.0)).abs()
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let orders_ok = orders.iter().all(|o| (1.9..=2.1).contains(o));
    verdict(
        avg_err <= 1e-3 && mixed_err <= 1e-6 && orders_ok,
        format!("averaged max error {avg_err:.2e}, mixed max error {mixed_err:.2e}, refinement orders {orders:.3?}"),
    )
}

fn c10_countable() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 20 {
        let amps: Vec<C64> = (0..5)
            .map(|_| C64::from_polar(rng.random::<f64>() + 0.05, rng.random::<f64>() * TAU))
            .collect();
        let a_idx = rng.random_range(0..5);
        let b_idx = (a_idx + rng.random_range(1..5)) % 5;
        let b = GRID[rng.random_range(0..GRID.len())];
        let chi = rng.random::<f64>() * TAU;
        let x = amps[b_idx].norm() / amps[a_idx].norm() * b;
        if x.ln().abs() < 0.05 {
            continue;
        }
        let r = countable_reduction(&amps, a_idx, b_idx, b, chi).unwrap();
        worst = worst
            .max((r.averaged.value - C64::new(sgn_law(x), 0.0)).norm())
            .max((r.mixed.value - C64::new(rational_law(x), 0.0)).norm());
        cases += 1;
    }
    verdict(worst <= 1e-10, format!("{cases} dim-5 embeddings, max deviation {worst:.2e}"))
}

fn c11_pointer_convergence() -> Verdict {
    let obs = Observable::polarization();
    let cfg = TwoStateConfig::new(0.5, 1.0, 0.0, PI / 3.0).unwrap();
    let pre = cfg.oscillating_state().state_at(0.0);
    let post = cfg.post_state();
    let exact = weak_value_pure(&pre, &obs, &post).unwrap();
    let couplings = [0.04, 0.02, 0.01];
    let errors: Vec<f64> = couplings
        .iter()
        .map(|&g| {
            let pm = PointerModel::standard(1.0, g).unwrap();
            (estimate_weak_value(&pre, &obs, &post, &pm).unwrap().value - exact.value).norm()
        })
        .collect();
    // least-squares slope of ln(error) against ln(g)
    let xs: Vec<f64> = couplings.iter().map(|g| g.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    // A = B = 1 with relative phase -+ pi/2 gives weak values +-i
    let mut calibration_ok = true;
    let mut calibration = Vec::new();
    for (delta, target) in [(-PI / 2.0, C64::new(0.0, 1.0)), (PI / 2.0, C64::new(0.0, -1.0))] {
        let c = TwoStateConfig::new(1.0, 1.0, 0.0, delta).unwrap();
        let (pre, post) = (c.oscillating_state().state_at(0.0), c.post_state());
        for g in couplings {
            let pm = PointerModel::standard(1.0, g).unwrap();
            let err = (estimate_weak_value(&pre, &obs, &post, &pm).unwrap().value - target).norm();
            calibration_ok &= err <= g;
            calibration.push(err);
        }
    }
    let slope_ok = (slope - 1.0).abs() <= 0.2;
    verdict(
        slope_ok && calibration_ok,
        format!(
            "errors {:?}, log-log slope {slope:.3} (required 1.0 +- 0.2); \
             +-i calibration within g: {calibration_ok} (max error {:.2e})",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            calibration.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn c12_estimator_dichotomy() -> Verdict {
    let start = Instant::now();
    let cfg = TwoStateConfig::new(0.5, 1.0, 1.0, 0.0).unwrap();
    let pm = PointerModel::standard(1.0, 0.05).unwrap();
    let window = AveragingWindow::new(0.0, TAU, 4096).unwrap();
    let run = |estimator| {
        let mc = McConfig {
            window,
            trials: 1_000_000,
            seed: 12,
            estimator,
        };
        monte_carlo(&cfg.oscillating_state(), &Observable::polarization(), &cfg.post_state(), &pm, &mc).unwrap()
    };
    let pooled = run(Estimator::Pooled);
    let binned = run(Estimator::TimeBinned { bins: 64 });
    let elapsed = start.elapsed();
    let pooled_dev = (pooled.value.re - 0.6).abs();
    let binned_dev = (binned.value.re - 1.0).abs();
    let pass = pooled_dev <= 3.0 * pooled.stderr_re
        && binned_dev <= 3.0 * binned.stderr_re + 0.05
        && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "pooled {:.4} +- {:.4} (vs 0.6), time-binned {:.4} +- {:.4} (vs 1), {elapsed:.1?}",
            pooled.value.re, pooled.stderr_re, binned.value.re, binned.stderr_re
        ),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn c13_cli_determinism() -> Verdict {
    let mut configs: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    let scratch = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for config in &configs {
        let stem = config.file_stem().unwrap().to_string_lossy().to_string();
        let csv: Vec<Vec<u8>> = ["a", "b"]
            .iter()
            .map(|run| {
                let out = scratch.path().join(format!("{stem}-{run}"));
                let status = Command::new(env!("CARGO_BIN_EXE_weakosc"))
                    .args(["run", &config.to_string_lossy(), "--seed", "5", "--out", &out.to_string_lossy()])
                    .output()
                    .unwrap();
                assert!(status.status.success(), "{stem}: {}", String::from_utf8_lossy(&status.stderr));
                std::fs::read(out.join("results.csv")).unwrap()
            })
            .collect();
        if csv[0] != csv[1] {
            mismatched.push(stem);
        }
    }
    verdict(
        mismatched.is_empty() && !configs.is_empty(),
        format!("{} example configs run twice; mismatches: {mismatched:?}", configs.len()),
    )
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("two-state averaged value follows the sign law", c01_sign_law),
        ("unit product gives zero", c02_unit_product),
        ("averaged imaginary part vanishes", c03_imaginary_part),
        ("mixed two-state value follows the rational law", c04_mixed_law),
        ("periodic integral identity", c05_integral_identity),
        ("strong statistics match the dephased state", c06_strong_indistinguishability),
        ("decomposition and trace routes agree", c07_decomposition),
        ("naive substitution equals the mixed value", c08_naive_substitution),
        ("continuum averaged and mixed laws", c09_continuum_laws),
        ("countable embedding reduces to two states", c10_countable),
        ("pointer estimate converges linearly in the coupling", c11_pointer_convergence),
        ("pooled and time-binned estimators split", c12_estimator_dichotomy),
        ("CLI output is deterministic", c13_cli_determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {name} | {} [{:.1?}]", k + 1, v.detail, start.elapsed());
        if !v.pass {
            failed.push(k + 1);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed{}",
        criteria.len() - failed.len(),
        criteria.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
