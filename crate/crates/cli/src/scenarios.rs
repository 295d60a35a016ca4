//! One runner per scenario kind. Each returns CSV-ready rows plus the
//! `(A, B, measured)` samples a sweep feeds to the discriminator.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use weakosc_core::continuum::{
    check_fast_condition, continuum_averaged_weak_value, continuum_mixed_weak_value, countable_reduction,
    natural_window, recover_amplitudes, ContinuumProfile, TailoredPostselection, Window,
};
use weakosc_core::oscillate::DEFAULT_FAST_FACTOR;
use weakosc_core::pointerlab::{monte_carlo, Estimator, McConfig, PointerModel};
use weakosc_core::strongeq::equivalence_suite;
use weakosc_core::weakval::{
    averaged_weak_value, classify, pole_symmetric_window, weak_value_mixed, DiscriminationSample, VERDICT_TOL,
};
use weakosc_core::{AveragingWindow, Observable, OscillatingPureState, TwoStateConfig, WeakValue, C64};

use crate::config::{ScenarioConfig, ScenarioKind, WindowSpec};
use crate::error::ScenarioError;
use crate::record::{Fields, ResultRecord, Row};

pub const INDISTINGUISHABLE: &str = "Indistinguishable";
pub const DISTINGUISHABLE: &str = "Distinguishable";

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<Row>,
    /// Present for kinds whose result is a weak value on the `A B` axis.
    pub sample: Option<DiscriminationSample>,
    pub verdict: String,
}

pub fn run(cfg: &ScenarioConfig) -> Result<ResultRecord, ScenarioError> {
    let outcome = run_point(cfg)?;
    Ok(ResultRecord::new(cfg, outcome.rows, Some(outcome.verdict)))
}

pub fn run_point(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    match cfg.kind {
        ScenarioKind::TwoState => two_state(cfg),
        ScenarioKind::Countable => countable(cfg),
        ScenarioKind::Continuum => continuum(cfg),
        ScenarioKind::PointerMC => pointer_mc(cfg),
        ScenarioKind::StrongEquivalence => strong_equivalence(cfg),
    }
}

fn two_level(cfg: &ScenarioConfig) -> Result<TwoStateConfig, ScenarioError> {
    Ok(TwoStateConfig::new(cfg.two_level_a(), cfg.num("B"), cfg.num("omega"), cfg.num("phi0"))?)
}

/// Window over the relative phase `omega t + phi0`. Without an explicit start
/// the nodes straddle the weak value's pole symmetrically.
fn phase_window(spec: &WindowSpec, phi0: f64, omega: f64) -> Result<AveragingWindow, ScenarioError> {
    let period = TAU / omega.abs();
    let length = spec.length(period);
    let window = match spec.start {
        Some(start) => AveragingWindow::new(start, length, spec.nodes)?,
        None => {
            let symmetric = pole_symmetric_window(phi0, omega, spec.nodes)?;
            AveragingWindow::new(symmetric.start, length, symmetric.nodes)?
        }
    };
    Ok(window)
}

fn push_window(inputs: &mut Fields, w: &AveragingWindow) {
    inputs.push("window_start", w.start);
    inputs.push("duration", w.duration);
    inputs.push("nodes", w.nodes as u64);
}

fn weak_row(inputs: Fields, ab: f64, measured: WeakValue, mixed: WeakValue, tol: f64) -> Row {
    let verdict = classify(ab, measured, tol);
    let mut row = Row::new(inputs, measured.value, mixed.value, verdict.as_str());
    row.extras.push("gap", (measured.value - mixed.value).norm());
    row
}

fn two_state(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let ts = two_level(cfg)?;
    let source = cfg.text("source");
    let window = phase_window(&cfg.averaging, ts.phi0, ts.omega)?;
    let obs = Observable::polarization();
    let mixed = weak_value_mixed(&ts.mixed_pre(), &obs, &ts.mixed_post())?;
    let measured = if source == "mixed" {
        mixed
    } else {
        averaged_weak_value(&ts.oscillating_state(), &obs, &ts.post_state(), &window)?
    };

    let mut inputs = Fields::default();
    inputs.push("A", ts.a);
    inputs.push("B", ts.b);
    inputs.push("AB", ts.ab());
    inputs.push("omega", ts.omega);
    inputs.push("phi0", ts.phi0);
    inputs.push("source", source);
    push_window(&mut inputs, &window);
    let row = weak_row(inputs, ts.ab(), measured, mixed, VERDICT_TOL);
    Ok(Outcome {
        verdict: row.verdict.clone(),
        rows: vec![row],
        sample: Some(DiscriminationSample {
            a: ts.a,
            b: ts.b,
            measured,
        }),
    })
}

fn countable(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let preset = cfg
        .preset("source")
        .ok_or_else(|| ScenarioError::validation("parameters.source", "invalid source preset"))?;
    let (a_idx, b_idx) = (cfg.count("a_idx"), cfg.count("b_idx"));
    if a_idx >= preset.levels || b_idx >= preset.levels {
        return Err(ScenarioError::validation(
            "parameters.b_idx",
            format!("basis indices must be below the preset's {} levels", preset.levels),
        ));
    }
    let amps = preset.generate(cfg.seed);
    let (b, chi) = (cfg.num("B"), cfg.num("chi"));
    let reduced = countable_reduction(&amps, a_idx, b_idx, b, chi)?;

    let mut inputs = Fields::default();
    inputs.push("preset", preset.name.as_str());
    inputs.push("levels", preset.levels as u64);
    inputs.push("temperature", preset.temperature);
    inputs.push("seed", cfg.seed);
    inputs.push("a_idx", a_idx as u64);
    inputs.push("b_idx", b_idx as u64);
    inputs.push("A", reduced.effective_a);
    inputs.push("B", b);
    inputs.push("AB", reduced.effective_a * b);
    inputs.push("chi", chi);
    let row = weak_row(inputs, reduced.effective_a * b, reduced.averaged, reduced.mixed, VERDICT_TOL);
    Ok(Outcome {
        verdict: row.verdict.clone(),
        rows: vec![row],
        sample: Some(DiscriminationSample {
            a: reduced.effective_a,
            b,
            measured: reduced.averaged,
        }),
    })
}

/// Multinomial counts over bins, drawn as a chain of binomials.
fn measure_bins(probabilities: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass: f64 = probabilities.iter().sum();
    probabilities
        .iter()
        .map(|&p| {
            if remaining == 0 || mass <= 0.0 {
                return 0;
            }
            let q = (p / mass).clamp(0.0, 1.0);
            let count = Binomial::new(remaining, q).map(|d| d.sample(rng)).unwrap_or(remaining);
            remaining -= count;
            mass -= p;
            count
        })
        .collect()
}

/// Gaussian profile whose amplitudes are first measured without
/// post-selection; the post-selection is then tailored from that estimate.
fn continuum(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let (centre, width) = (cfg.num("center"), cfg.num("width"));
    let (omega, phi) = (cfg.num("omega"), cfg.num("phi"));
    let profile = ContinuumProfile::sampled(cfg.num("lower"), cfg.num("upper"), cfg.count("bins"), |x| {
        (-(x - centre).powi(2) / (4.0 * width * width)).exp()
    })?;
    let h = profile.spacing();
    let profile = profile.with_phase(omega, phi).with_resolution(
        cfg.opt_num("delta_x").unwrap_or(h),
        cfg.num("delta_t"),
    );
    let w = Window::new(&profile, cfg.num("a"), cfg.num("delta_a"))?;
    let (c1, c2) = (cfg.num("C1"), cfg.num("C2"));

    let shots = cfg.count("shots") as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let counts = measure_bins(&profile.bin_probabilities(), shots, &mut rng);
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / shots as f64).collect();
    let estimate = recover_amplitudes(&frequencies, h);
    let amplitude_error = estimate
        .iter()
        .zip(profile.amplitude())
        .map(|(e, a)| (e - a).abs())
        .fold(0.0, f64::max);
    let post = TailoredPostselection::from_amplitudes(&estimate, h, &w, c1, c2).map_err(|e| match e {
        weakosc_core::Error::VanishingAmplitude { x, amplitude } => weakosc_core::Error::VanishingAmplitude {
            x: profile.grid()[x as usize],
            amplitude,
        },
        e => e,
    })?;

    let mixed = continuum_mixed_weak_value(&profile, &post, &w)?;
    let measured = if cfg.text("source") == "mixed" {
        mixed
    } else {
        let per_cycle = (cfg.averaging.nodes / (2 * w.half_bins())).max(64);
        let window = natural_window(&profile, &w, per_cycle)?;
        continuum_averaged_weak_value(&profile, &post, &w, &window)?
    };
    let fast = check_fast_condition(&profile, DEFAULT_FAST_FACTOR);

    let ratio = c2 / c1;
    let mut inputs = Fields::default();
    inputs.push("bins", profile.grid().len() as u64);
    inputs.push("lower", cfg.num("lower"));
    inputs.push("upper", cfg.num("upper"));
    inputs.push("center", centre);
    inputs.push("width", width);
    inputs.push("omega", omega);
    inputs.push("phi", phi);
    inputs.push("delta_x", profile.delta_x());
    inputs.push("delta_t", profile.delta_t());
    inputs.push("a", w.a);
    inputs.push("delta_a", w.delta_a);
    inputs.push("C1", c1);
    inputs.push("C2", c2);
    inputs.push("shots", shots);
    inputs.push("seed", cfg.seed);
    inputs.push("source", cfg.text("source"));
    let mut row = weak_row(inputs, ratio, measured, mixed, VERDICT_TOL);
    row.extras.push("amplitude_max_error", amplitude_error);
    row.extras.push("amplitude_sampling_error", 1.0 / (2.0 * (shots as f64 * h).sqrt()));
    row.extras.push("fast", fast.report.is_fast);
    row.extras.push("cycles_per_cell", fast.report.cycles_in_window);
    Ok(Outcome {
        verdict: row.verdict.clone(),
        rows: vec![row],
        sample: Some(DiscriminationSample {
            a: ratio,
            b: 1.0,
            measured,
        }),
    })
}

fn pointer_mc(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let ts = two_level(cfg)?;
    let sigma = cfg.num("sigma");
    let span = cfg.opt_num("span").unwrap_or(32.0 * sigma);
    let pm = PointerModel::new(cfg.count("points"), span, sigma, cfg.num("g"))?;
    let period = TAU / ts.omega.abs();
    let spec = &cfg.averaging;
    let window = AveragingWindow::new(spec.start.unwrap_or(0.0), spec.length(period), spec.nodes)?;
    let estimator = match cfg.text("estimator").as_str() {
        "Pooled" => Estimator::Pooled,
        _ => Estimator::TimeBinned { bins: cfg.count("bins") },
    };
    let mc = McConfig {
        window,
        trials: cfg.count("trials"),
        seed: cfg.seed,
        estimator,
    };
    let obs = Observable::polarization();
    let estimate = monte_carlo(&ts.oscillating_state(), &obs, &ts.post_state(), &pm, &mc)?;
    let mixed = weak_value_mixed(&ts.mixed_pre(), &obs, &ts.mixed_post())?;
    let measured = WeakValue::new(estimate.value);

    let mut inputs = Fields::default();
    inputs.push("A", ts.a);
    inputs.push("B", ts.b);
    inputs.push("AB", ts.ab());
    inputs.push("omega", ts.omega);
    inputs.push("phi0", ts.phi0);
    inputs.push("sigma", sigma);
    inputs.push("g", pm.coupling());
    inputs.push("points", pm.points() as u64);
    inputs.push("span", pm.span());
    inputs.push("estimator", estimator.as_str());
    inputs.push("bins", if let Estimator::TimeBinned { bins } = estimator { bins as u64 } else { 1 });
    inputs.push("trials", estimate.trials as u64);
    inputs.push("seed", cfg.seed);
    push_window(&mut inputs, &window);
    // sampling noise widens the band a reading may fall in
    let tol = VERDICT_TOL.max(3.0 * estimate.stderr_re.hypot(estimate.stderr_im));
    let mut row = weak_row(inputs, ts.ab(), measured, mixed, tol);
    row.extras.push("stderr_re", estimate.stderr_re);
    row.extras.push("stderr_im", estimate.stderr_im);
    row.extras.push("survivors", estimate.survivors as u64);
    row.extras.push("bin_too_coarse", estimate.bin_too_coarse);
    Ok(Outcome {
        verdict: row.verdict.clone(),
        rows: vec![row],
        sample: Some(DiscriminationSample {
            a: ts.a,
            b: ts.b,
            measured,
        }),
    })
}

/// Random state with unit-norm amplitudes and frequency gaps drawn from
/// `[min_gap, ratio * min_gap]`.
pub fn random_oscillating_state(dim: usize, min_gap: f64, max_gap_ratio: f64, rng: &mut ChaCha8Rng) -> OscillatingPureState {
    let amps: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.1).collect();
    let mut freqs = Vec::with_capacity(dim);
    let mut f = 0.0;
    for _ in 0..dim {
        freqs.push(f);
        f += min_gap * (1.0 + rng.random::<f64>() * (max_gap_ratio - 1.0).max(0.0));
    }
    let offsets: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * TAU).collect();
    OscillatingPureState::normalized(amps, freqs, offsets).expect("distinct positive-gap frequencies")
}

fn strong_equivalence(cfg: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let dim = cfg.count("dim");
    let (min_gap, ratio) = (cfg.num("min_gap"), cfg.num("max_gap_ratio"));
    let spec = &cfg.averaging;
    let window = AveragingWindow::new(spec.start.unwrap_or(0.0), spec.length(TAU / min_gap), spec.nodes)?;
    let mut rows = Vec::new();
    for state in 0..cfg.count("states") {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(state as u64);
        let s = random_oscillating_state(dim, min_gap, ratio, &mut rng);
        let trial_seed = cfg.seed.wrapping_add(state as u64);
        for report in equivalence_suite(&s, cfg.count("trials"), &window, trial_seed)? {
            let mut inputs = Fields::default();
            inputs.push("dim", dim as u64);
            inputs.push("min_gap", min_gap);
            inputs.push("max_gap_ratio", ratio);
            inputs.push("seed", cfg.seed);
            inputs.push("state", state as u64);
            inputs.push("trial", report.trial as u64);
            inputs.push("quantity", report.quantity.as_str());
            push_window(&mut inputs, &window);
            let verdict = if report.passes() { INDISTINGUISHABLE } else { DISTINGUISHABLE };
            let mut row = Row::new(inputs, report.oscillating_value, report.mixed_value, verdict);
            row.extras.push("deviation", report.deviation);
            row.extras.push("bound", report.bound);
            row.extras.push("window_is_fast", report.window_is_fast);
            rows.push(row);
        }
    }
    let verdict = if rows.iter().all(|r| r.verdict == INDISTINGUISHABLE) {
        INDISTINGUISHABLE
    } else {
        DISTINGUISHABLE
    };
    Ok(Outcome {
        rows,
        sample: None,
        verdict: verdict.to_string(),
    })
}

/// Mean of a complex column, for summaries.
pub fn mean_averaged(rows: &[Row]) -> C64 {
    rows.iter().map(Row::averaged).sum::<C64>() / rows.len().max(1) as f64
}
