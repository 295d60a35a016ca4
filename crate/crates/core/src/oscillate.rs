//! Quickly oscillating pure states and the time-averaging engine.
//!
//! A state here is `sum_i A_i exp(i(w_i t + p_i)) |i>` in the computational
//! basis: non-negative amplitudes, linear phases. Arbitrary phase laws can
//! still be averaged through [`time_average`], which takes any integrand.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, ComplexVector, DensityOperator, PureState, C64, STATE_TOL, ZERO};

/// Cycles of the slowest coherence that a window must contain to count as fast.
pub const DEFAULT_FAST_FACTOR: f64 = 100.0;

/// Node count above which integrands are sampled in parallel.
const PARALLEL_NODES: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatingPureState {
    amplitudes: Vec<f64>,
    frequencies: Vec<f64>,
    phase_offsets: Vec<f64>,
}

impl OscillatingPureState {
    pub fn new(amplitudes: Vec<f64>, frequencies: Vec<f64>, phase_offsets: Vec<f64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("oscillating state needs at least one term".into()));
        }
        if frequencies.len() != dim || phase_offsets.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes, {} frequencies, {} phase offsets",
                dim,
                frequencies.len(),
                phase_offsets.len()
            )));
        }
        let all_finite = amplitudes
            .iter()
            .chain(&frequencies)
            .chain(&phase_offsets)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("oscillating state has non-finite parameters".into()));
        }
        if amplitudes.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidParameter(
                "amplitudes must be non-negative; absorb signs into the phase offsets".into(),
            ));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a * a).sum();
        if (norm_sqr - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self {
            amplitudes,
            frequencies,
            phase_offsets,
        })
    }

    /// Like [`new`](Self::new) but rescales the amplitudes to unit norm first.
    pub fn normalized(amplitudes: Vec<f64>, frequencies: Vec<f64>, phase_offsets: Vec<f64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        Self::new(amplitudes.iter().map(|a| a / norm).collect(), frequencies, phase_offsets)
    }

    /// Splits complex coefficients into modulus (amplitude) and argument (offset).
    pub fn from_coefficients(coefficients: &[C64], frequencies: Vec<f64>) -> Result<Self> {
        Self::normalized(
            coefficients.iter().map(|z| z.norm()).collect(),
            frequencies,
            coefficients.iter().map(|z| z.arg()).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phase_offsets(&self) -> &[f64] {
        &self.phase_offsets
    }

    /// `A_i exp(i(w_i t + p_i))`.
    pub fn coefficient(&self, i: usize, t: f64) -> C64 {
        C64::from_polar(self.amplitudes[i], self.frequencies[i] * t + self.phase_offsets[i])
    }

    pub fn coefficients_at(&self, t: f64) -> ComplexVector {
        ComplexVector::from_fn(self.dim(), |i, _| self.coefficient(i, t))
    }

    pub fn state_at(&self, t: f64) -> PureState {
        PureState::new(self.coefficients_at(t)).expect("amplitudes are normalized at construction")
    }

    /// Instantaneous projector; entry `(j, i)` is `A_i A_j exp(i[(w_j - w_i)t + p_j - p_i])`.
    pub fn projector_at(&self, t: f64) -> DensityOperator {
        self.state_at(t).projector()
    }

    /// The time-averaged fixed point `diag(A_i^2)`.
    pub fn dephase(&self) -> Result<DensityOperator> {
        if let Some((i, j)) = self.degenerate_pair() {
            return Err(Error::DegenerateFrequencies { i, j });
        }
        let weights: Vec<f64> = self.amplitudes.iter().map(|a| a * a).collect();
        DensityOperator::from_diagonal(&weights)
    }

    fn degenerate_pair(&self) -> Option<(usize, usize)> {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| self.frequencies[i] == self.frequencies[j])
    }

    /// Smallest nonzero `|w_i - w_j|`, or `+inf` when there is none.
    pub fn min_gap(&self) -> f64 {
        let n = self.dim();
        let mut gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d = (self.frequencies[i] - self.frequencies[j]).abs();
                if d > 0.0 {
                    gap = gap.min(d);
                }
            }
        }
        gap
    }

    /// Largest `|w_i - w_j|` (zero for a single term).
    pub fn max_gap(&self) -> f64 {
        let lo = self.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.frequencies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Same state with every phase offset shifted by `shift`.
    pub fn with_global_phase(&self, shift: f64) -> Self {
        Self {
            phase_offsets: self.phase_offsets.iter().map(|p| p + shift).collect(),
            ..self.clone()
        }
    }

    /// Same moduli and frequencies, different offsets.
    pub fn with_phase_offsets(&self, phase_offsets: Vec<f64>) -> Result<Self> {
        Self::new(self.amplitudes.clone(), self.frequencies.clone(), phase_offsets)
    }

    /// Exact window average of the projector, entry by entry.
    pub fn averaged_projector(&self, window: &AveragingWindow) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |j, i| {
            if i == j {
                C64::new(self.amplitudes[i] * self.amplitudes[i], 0.0)
            } else {
                let static_part = C64::from_polar(
                    self.amplitudes[i] * self.amplitudes[j],
                    self.phase_offsets[j] - self.phase_offsets[i],
                );
                static_part * analytic_linear_phase_average(self.frequencies[j] - self.frequencies[i], window)
            }
        })
    }
}

/// Measurement time window `[start, start + duration)` sampled at `nodes` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingWindow {
    pub start: f64,
    pub duration: f64,
    pub nodes: usize,
}

impl AveragingWindow {
    pub fn new(start: f64, duration: f64, nodes: usize) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() || !start.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window needs finite start and positive duration, got start {start}, duration {duration}"
            )));
        }
        if nodes < 2 {
            return Err(Error::InvalidParameter(format!("window needs at least 2 nodes, got {nodes}")));
        }
        Ok(Self { start, duration, nodes })
    }

    /// `count` whole periods of length `period`.
    pub fn periods(start: f64, period: f64, count: f64, nodes: usize) -> Result<Self> {
        Self::new(start, period.abs() * count, nodes)
    }

    pub fn step(&self) -> f64 {
        self.duration / self.nodes as f64
    }

    /// Left-endpoint nodes of the periodic rectangle rule.
    pub fn node(&self, k: usize) -> f64 {
        self.start + self.duration * (k as f64 / self.nodes as f64)
    }

    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::new(self.start, duration, self.nodes)
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            start: self.start + offset,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Equal weights at `nodes` equispaced points; spectrally accurate when the
    /// window spans an integer number of periods of a smooth integrand.
    PeriodicRectangle,
    /// Composite trapezoid with `nodes` intervals plus one Richardson step
    /// against the half-resolution rule.
    TrapezoidRichardson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: C64,
    /// Zero for the periodic rule, which carries no built-in estimate.
    pub error_estimate: f64,
}

/// Pairwise summation in a fixed left-to-right tree, independent of threading.
pub fn tree_sum(values: &[C64]) -> C64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().fold(ZERO, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

fn sample<F>(f: &F, times: &[f64]) -> Result<Vec<C64>>
where
    F: Fn(f64) -> C64 + Sync,
{
    let eval = |&t: &f64| {
        let v = f(t);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { t })
        }
    };
    if times.len() >= PARALLEL_NODES {
        times.par_iter().map(eval).collect()
    } else {
        times.iter().map(eval).collect()
    }
}

/// [`time_average`] for integrands that can fail at a node; the first failing
/// node in time order is reported.
pub fn try_time_average<F>(f: F, window: &AveragingWindow) -> Result<C64>
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    let times: Vec<f64> = (0..window.nodes).map(|k| window.node(k)).collect();
    let eval = |&t: &f64| {
        let v = f(t)?;
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { t })
        }
    };
    let values: Vec<C64> = if times.len() >= PARALLEL_NODES {
        times.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        times.iter().map(eval).collect::<Result<_>>()?
    };
    Ok(tree_sum(&values) / window.nodes as f64)
}

/// `(1/duration) * integral of f` over the window, periodic rectangle rule.
///
/// `f` may be called concurrently and must be free of side effects.
pub fn time_average<F>(f: F, window: &AveragingWindow) -> Result<C64>
where
    F: Fn(f64) -> C64 + Sync,
{
    Ok(time_average_with(f, window, QuadratureRule::PeriodicRectangle)?.value)
}

pub fn time_average_with<F>(f: F, window: &AveragingWindow, rule: QuadratureRule) -> Result<QuadratureEstimate>
where
    F: Fn(f64) -> C64 + Sync,
{
    match rule {
        QuadratureRule::PeriodicRectangle => {
            let times: Vec<f64> = (0..window.nodes).map(|k| window.node(k)).collect();
            let values = sample(&f, &times)?;
            Ok(QuadratureEstimate {
                value: tree_sum(&values) / window.nodes as f64,
                error_estimate: 0.0,
            })
        }
        QuadratureRule::TrapezoidRichardson => {
            let intervals = window.nodes + window.nodes % 2;
            let times: Vec<f64> = (0..=intervals)
                .map(|k| window.start + window.duration * (k as f64 / intervals as f64))
                .collect();
            let values = sample(&f, &times)?;
            let trapezoid = |stride: usize| {
                let picked: Vec<C64> = values.iter().step_by(stride).copied().collect();
                let inner = tree_sum(&picked[1..picked.len() - 1]);
                let ends = (picked[0] + picked[picked.len() - 1]) * 0.5;
                (inner + ends) / (picked.len() - 1) as f64
            };
            let fine = trapezoid(1);
            let coarse = trapezoid(2);
            let correction = (fine - coarse) / 3.0;
            Ok(QuadratureEstimate {
                value: fine + correction,
                error_estimate: correction.norm(),
            })
        }
    }
}

/// Exact window average of `exp(i * rate * t)`.
pub fn analytic_linear_phase_average(rate: f64, window: &AveragingWindow) -> C64 {
    if rate == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let half = 0.5 * rate * window.duration;
    let envelope = half.sin() / half;
    C64::from_polar(envelope, rate * (window.start + 0.5 * window.duration))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastnessReport {
    pub min_gap: f64,
    pub cycles_in_window: f64,
    pub fast_factor: f64,
    pub is_fast: bool,
}

impl FastnessReport {
    pub fn from_cycles(min_gap: f64, cycles_in_window: f64, fast_factor: f64) -> Self {
        Self {
            min_gap,
            cycles_in_window,
            fast_factor,
            is_fast: cycles_in_window >= fast_factor,
        }
    }
}

/// How many cycles of the slowest coherence the window contains.
pub fn fastness(s: &OscillatingPureState, window: &AveragingWindow, fast_factor: f64) -> FastnessReport {
    let min_gap = s.min_gap();
    let cycles = min_gap * window.duration / std::f64::consts::TAU;
    FastnessReport::from_cycles(min_gap, cycles, fast_factor)
}

/// `exp(i * phase)`.
pub(crate) fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}
