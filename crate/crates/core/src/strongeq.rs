//! Strong, non-post-selected statistics of an oscillating state under finite
//! time resolution, compared with its dephased mixture.
//!
//! All window averages here are exact: for linear phases every quantity is a
//! trigonometric polynomial in `t`, so each coherence term is averaged with
//! [`analytic_linear_phase_average`]. The quadrature engine serves as the
//! independent check in the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oscillate::{analytic_linear_phase_average, fastness, AveragingWindow, OscillatingPureState, DEFAULT_FAST_FACTOR};
use crate::qcore::{ensure_dims, expectation, trace_of_product, ComplexMatrix, Observable, PureState, C64, ZERO};

/// Slack added to the analytic deviation bound for floating-point rounding.
pub const ROUNDING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Expectation,
    Transition,
    CorrelatorC1,
    ProductOfMeansC2,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Expectation => "expectation",
            Quantity::Transition => "transition",
            Quantity::CorrelatorC1 => "correlator_c1",
            Quantity::ProductOfMeansC2 => "product_of_means_c2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub trial: usize,
    pub quantity: Quantity,
    pub oscillating_value: C64,
    pub mixed_value: C64,
    pub deviation: f64,
    /// Worst-case residual coherence for this window.
    pub bound: f64,
    /// Whether the window resolves the slowest coherence (see [`fastness`]).
    pub window_is_fast: bool,
}

impl EquivalenceReport {
    fn new(trial: usize, quantity: Quantity, osc: C64, mixed: C64, bound: f64, window_is_fast: bool) -> Self {
        Self {
            trial,
            quantity,
            oscillating_value: osc,
            mixed_value: mixed,
            deviation: (osc - mixed).norm(),
            bound,
            window_is_fast,
        }
    }

    /// Indistinguishable: the window is fast and the deviation respects the bound.
    pub fn passes(&self) -> bool {
        self.window_is_fast && self.deviation <= self.bound + ROUNDING_TOL
    }
}

/// Exact window average of `<psi(t)| M |psi(t)>`.
pub(crate) fn averaged_matrix_element(s: &OscillatingPureState, m: &ComplexMatrix, window: &AveragingWindow) -> C64 {
    let (a, w, p) = (s.amplitudes(), s.frequencies(), s.phase_offsets());
    let n = s.dim();
    let mut diagonal = ZERO;
    for i in 0..n {
        diagonal += m[(i, i)] * (a[i] * a[i]);
    }
    let mut coherences = ZERO;
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != ZERO {
                let weight = C64::from_polar(a[i] * a[j], p[j] - p[i]);
                coherences += weight * m[(i, j)] * analytic_linear_phase_average(w[j] - w[i], window);
            }
        }
    }
    diagonal + coherences
}

/// `sum_{i != j} A_i A_j |M_ij| min(1, 2/(|w_i - w_j| duration))`.
pub fn coherence_bound(s: &OscillatingPureState, m: &ComplexMatrix, window: &AveragingWindow) -> f64 {
    let (a, w) = (s.amplitudes(), s.frequencies());
    let n = s.dim();
    let mut bound = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let gap = (w[j] - w[i]).abs();
                let envelope = if gap == 0.0 { 1.0 } else { (2.0 / (gap * window.duration)).min(1.0) };
                bound += a[i] * a[j] * m[(i, j)].norm() * envelope;
            }
        }
    }
    bound
}

pub fn averaged_expectation(s: &OscillatingPureState, obs: &Observable, window: &AveragingWindow) -> Result<f64> {
    ensure_dims(s.dim(), obs.dim())?;
    Ok(averaged_matrix_element(s, obs.matrix(), window).re)
}

pub fn averaged_transition(s: &OscillatingPureState, target: &PureState, window: &AveragingWindow) -> Result<f64> {
    ensure_dims(s.dim(), target.dim())?;
    Ok(averaged_matrix_element(s, &target.outer(), window).re)
}

/// Window average of `Tr[Pi(t) P]` for a caller-supplied operator chain `P`.
pub fn correlator_c1(s: &OscillatingPureState, product: &ComplexMatrix, window: &AveragingWindow) -> Result<C64> {
    if product.nrows() != product.ncols() {
        return Err(Error::NotSquare {
            rows: product.nrows(),
            cols: product.ncols(),
        });
    }
    ensure_dims(s.dim(), product.nrows())?;
    Ok(averaged_matrix_element(s, product, window))
}

/// Product over offsets of the expectation, each factor averaged over its own
/// window shifted by `tau_i`.
pub fn product_of_means_c2(
    s: &OscillatingPureState,
    obs: &Observable,
    offsets: &[f64],
    window: &AveragingWindow,
) -> Result<f64> {
    if offsets.is_empty() {
        return Err(Error::InvalidParameter("product of means needs at least one offset".into()));
    }
    ensure_dims(s.dim(), obs.dim())?;
    Ok(offsets
        .iter()
        .map(|&tau| averaged_matrix_element(s, obs.matrix(), &window.shifted(tau)).re)
        .fold(1.0, |acc, f| acc * f))
}

fn trial_reports(s: &OscillatingPureState, window: &AveragingWindow, seed: u64, trial: usize) -> Result<Vec<EquivalenceReport>> {
    let dim = s.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let obs = Observable::random(dim, &mut rng);
    let target = PureState::random(dim, &mut rng);
    let factor_a = Observable::random(dim, &mut rng);
    let factor_b = Observable::random(dim, &mut rng);
    let product = factor_a.matrix() * factor_b.matrix();
    let offsets: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * window.duration).collect();

    let rho = s.dephase()?;
    let fast = fastness(s, window, DEFAULT_FAST_FACTOR).is_fast;
    let real = |v: f64| C64::new(v, 0.0);

    let obs_bound = coherence_bound(s, obs.matrix(), window);
    let mean = expectation(&rho, &obs)?;
    let projector = Observable::projector(&target);

    let c2_osc = product_of_means_c2(s, &obs, &offsets, window)?;
    let c2_mixed = mean * mean;
    let c2_bound = (mean.abs() + obs_bound).powi(2) - mean.abs().powi(2);

    Ok(vec![
        EquivalenceReport::new(
            trial,
            Quantity::Expectation,
            real(averaged_expectation(s, &obs, window)?),
            real(mean),
            obs_bound,
            fast,
        ),
        EquivalenceReport::new(
            trial,
            Quantity::Transition,
            real(averaged_transition(s, &target, window)?),
            real(expectation(&rho, &projector)?),
            coherence_bound(s, projector.matrix(), window),
            fast,
        ),
        EquivalenceReport::new(
            trial,
            Quantity::CorrelatorC1,
            correlator_c1(s, &product, window)?,
            trace_of_product(rho.matrix(), &product),
            coherence_bound(s, &product, window),
            fast,
        ),
        EquivalenceReport::new(trial, Quantity::ProductOfMeansC2, real(c2_osc), real(c2_mixed), c2_bound, fast),
    ])
}

/// Runs random observables, targets and operator chains through all four
/// quantities. Trial `k` draws from its own ChaCha stream, so the output is
/// identical for any thread count; reports are ordered by trial.
pub fn equivalence_suite(
    s: &OscillatingPureState,
    trials: usize,
    window: &AveragingWindow,
    seed: u64,
) -> Result<Vec<EquivalenceReport>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("equivalence suite needs at least one trial".into()));
    }
    let per_trial: Result<Vec<Vec<EquivalenceReport>>> =
        (0..trials).into_par_iter().map(|k| trial_reports(s, window, seed, k)).collect();
    Ok(per_trial?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillate::{time_average, QuadratureRule};
    use crate::qcore::DensityOperator;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};
    use rand::Rng;

    fn random_state(seed: u64, dim: usize) -> OscillatingPureState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 0.1).collect();
        let freqs: Vec<f64> = (0..dim).map(|k| k as f64 * (1.0 + rng.random::<f64>())).collect();
        let offs: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * TAU).collect();
        OscillatingPureState::normalized(amps, freqs, offs).unwrap()
    }

    /// Quadrature oracle: sample `<psi(t)|M|psi(t)>` directly.
    fn quadrature_element(s: &OscillatingPureState, m: &ComplexMatrix, window: &AveragingWindow) -> C64 {
        time_average(
            |t| {
                let v = s.coefficients_at(t);
                v.dotc(&(m * &v))
            },
            window,
        )
        .unwrap()
    }

    #[test]
    fn diagonal_observable_ignores_window() {
        let s = random_state(1, 4);
        let o = Observable::diagonal(&[1.0, -2.0, 0.5, 3.0]);
        let expected: f64 = s.amplitudes().iter().zip([1.0, -2.0, 0.5, 3.0]).map(|(a, d)| a * a * d).sum();
        for duration in [0.01, 1.0, 1e5] {
            let w = AveragingWindow::new(0.3, duration, 2).unwrap();
            assert_abs_diff_eq!(averaged_expectation(&s, &o, &w).unwrap(), expected, epsilon = 1e-15);
        }
        let w = AveragingWindow::new(0.0, 1.0, 2).unwrap();
        assert_abs_diff_eq!(averaged_expectation(&s, &Observable::identity(4), &w).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn random_observable_matches_dephased_within_bound() {
        let s = random_state(2, 4);
        let rho = s.dephase().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let o = Observable::random(4, &mut rng);
        let w = AveragingWindow::new(0.0, TAU * 1e4 / s.min_gap(), 2).unwrap();
        let dev = (averaged_expectation(&s, &o, &w).unwrap() - expectation(&rho, &o).unwrap()).abs();
        assert!(dev <= coherence_bound(&s, o.matrix(), &w) + ROUNDING_TOL);
        assert!(dev < 1e-3);
    }

    #[test]
    fn exact_average_agrees_with_quadrature() {
        let s = random_state(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Observable::random(4, &mut rng).matrix() * Observable::random(4, &mut rng).matrix();
        // ~100 cycles of the slowest coherence, generously resolved
        let w = AveragingWindow::new(0.7, TAU * 100.0 / s.min_gap(), 1 << 16).unwrap();
        let exact = correlator_c1(&s, &m, &w).unwrap();
        let quad = crate::oscillate::time_average_with(
            |t| {
                let v = s.coefficients_at(t);
                v.dotc(&(&m * &v))
            },
            &w,
            QuadratureRule::TrapezoidRichardson,
        )
        .unwrap();
        assert!((exact - quad.value).norm() < 1e-10, "{exact} vs {}", quad.value);
        let rho = s.dephase().unwrap();
        let mixed = trace_of_product(rho.matrix(), &m);
        assert!((exact - mixed).norm() <= coherence_bound(&s, &m, &w) + ROUNDING_TOL);
    }

    #[test]
    fn periodic_window_quadrature_matches_exact() {
        // commensurate frequencies: one common period makes the rectangle rule exact
        let s = OscillatingPureState::normalized(vec![0.5, 0.7, 0.2], vec![0.0, 2.0, 5.0], vec![0.0, 1.0, -0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let o = Observable::random(3, &mut rng);
        let w = AveragingWindow::new(0.2, TAU * 3.0, 256).unwrap();
        let q = quadrature_element(&s, o.matrix(), &w);
        assert_abs_diff_eq!(q.re, averaged_expectation(&s, &o, &w).unwrap(), epsilon = 1e-13);
        // integer number of every period: coherences vanish exactly
        assert_abs_diff_eq!(q.re, expectation(&s.dephase().unwrap(), &o).unwrap(), epsilon = 1e-13);
    }

    #[test]
    fn transition_examples() {
        let s = random_state(4, 3);
        let w = AveragingWindow::new(0.0, 10.0, 2).unwrap();
        for j in 0..3 {
            let a = s.amplitudes()[j];
            assert_eq!(averaged_transition(&s, &PureState::basis(3, j), &w).unwrap(), a * a);
        }
        let partial = OscillatingPureState::new(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0], vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        assert_eq!(averaged_transition(&partial, &PureState::basis(3, 2), &w).unwrap(), 0.0);

        let pair = OscillatingPureState::new(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let plus = PureState::from_slice(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let long = AveragingWindow::new(0.0, 1e8, 2).unwrap();
        assert_abs_diff_eq!(averaged_transition(&pair, &plus, &long).unwrap(), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn correlator_special_cases() {
        let s = random_state(5, 3);
        let w = AveragingWindow::new(0.0, 3.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = Observable::random(3, &mut rng);
        assert_abs_diff_eq!(correlator_c1(&s, o.matrix(), &w).unwrap().re, averaged_expectation(&s, &o, &w).unwrap(), epsilon = 1e-15);
        let id = correlator_c1(&s, &ComplexMatrix::identity(3, 3), &w).unwrap();
        assert_abs_diff_eq!(id.re, 1.0, epsilon = 1e-15);
        assert!(matches!(correlator_c1(&s, &ComplexMatrix::identity(2, 2), &w), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_of_means_cases() {
        let s = random_state(6, 3);
        let w = AveragingWindow::new(0.0, 1e6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = Observable::random(3, &mut rng);
        let single = averaged_expectation(&s, &o, &w).unwrap();
        assert_eq!(product_of_means_c2(&s, &o, &[0.0], &w).unwrap(), single);
        let cubed = product_of_means_c2(&s, &o, &[0.0, 0.0, 0.0], &w).unwrap();
        assert_eq!(cubed, single * single * single);
        let mean = expectation(&s.dephase().unwrap(), &o).unwrap();
        assert!((cubed - mean.powi(3)).abs() < 1e-4);

        // zero mean under the dephased state: traceless w.r.t. rho
        let z = Observable::diagonal(&[s.amplitudes()[1].powi(2), -s.amplitudes()[0].powi(2), 0.0]);
        assert!(product_of_means_c2(&s, &z, &[0.0, 0.5], &w).unwrap().abs() < 1e-15);
        assert!(product_of_means_c2(&s, &o, &[], &w).is_err());
    }

    #[test]
    fn suite_passes_on_fast_windows_and_fails_on_slow_ones() {
        let s = random_state(7, 4);
        let fast = AveragingWindow::new(0.0, TAU * 1e4 / s.min_gap(), 2).unwrap();
        let reports = equivalence_suite(&s, 5, &fast, 11).unwrap();
        assert_eq!(reports.len(), 20);
        assert!(reports.iter().all(EquivalenceReport::passes));
        assert!(reports.windows(2).all(|w| w[0].trial <= w[1].trial));

        let slow = AveragingWindow::new(0.0, 0.1 * TAU / s.min_gap(), 2).unwrap();
        let reports = equivalence_suite(&s, 5, &slow, 11).unwrap();
        assert!(reports.iter().all(|r| !r.passes()));
        // coherences are plainly visible, not merely flagged
        let worst = reports.iter().map(|r| r.deviation).fold(0.0, f64::max);
        assert!(worst > 1e-2, "worst deviation {worst}");
    }

    #[test]
    fn suite_is_deterministic() {
        let s = random_state(8, 4);
        let w = AveragingWindow::new(0.0, 1e3, 2).unwrap();
        let a = equivalence_suite(&s, 6, &w, 3).unwrap();
        let b = equivalence_suite(&s, 6, &w, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_dimensional_state_has_no_deviation() {
        let s = OscillatingPureState::new(vec![1.0], vec![4.0], vec![0.3]).unwrap();
        let w = AveragingWindow::new(0.0, 0.01, 2).unwrap();
        for r in equivalence_suite(&s, 4, &w, 0).unwrap() {
            assert_eq!(r.deviation, 0.0, "{:?}", r.quantity);
        }
    }

    #[test]
    fn halving_the_bound_when_doubling_the_window() {
        let s = random_state(9, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let o = Observable::random(4, &mut rng);
        let w = AveragingWindow::new(0.0, 1e4, 2).unwrap();
        let b1 = coherence_bound(&s, o.matrix(), &w);
        let b2 = coherence_bound(&s, o.matrix(), &w.with_duration(2e4).unwrap());
        assert_abs_diff_eq!(b1 / b2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn dephased_expectation_helper_consistent() {
        let rho = DensityOperator::from_diagonal(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(expectation(&rho, &Observable::polarization()).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn global_phase_invariance(seed in any::<u64>(), shift in -10.0f64..10.0) {
            let s = random_state(seed, 3);
            let shifted = s.with_global_phase(shift);
            let w = AveragingWindow::new(0.1, 7.0, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let o = Observable::random(3, &mut rng);
            let t = PureState::random(3, &mut rng);
            let m = o.matrix() * Observable::random(3, &mut rng).matrix();
            prop_assert!((averaged_expectation(&s, &o, &w).unwrap() - averaged_expectation(&shifted, &o, &w).unwrap()).abs() < 1e-12);
            prop_assert!((averaged_transition(&s, &t, &w).unwrap() - averaged_transition(&shifted, &t, &w).unwrap()).abs() < 1e-12);
            prop_assert!((correlator_c1(&s, &m, &w).unwrap() - correlator_c1(&shifted, &m, &w).unwrap()).norm() < 1e-12);
            prop_assert!((product_of_means_c2(&s, &o, &[0.0, 1.0], &w).unwrap() - product_of_means_c2(&shifted, &o, &[0.0, 1.0], &w).unwrap()).abs() < 1e-12);
        }
    }
}
