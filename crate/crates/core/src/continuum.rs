//! Continuous-spectrum version of the experiment on a uniform midpoint grid.
//!
//! The oscillating state carries amplitude `A(x)` and phase
//! `-(omega t - phi) x`, linear in `x`. The observable is `+1` on the left
//! half-window `[a - da, a]` and `-1` on the right half `[a, a + da]`, and the
//! post-selection `B(x) = N C / A(x)` flattens the product `A B` to `N C1` on
//! the left and `N C2` on the right. Post-selection phase is zero throughout.

use std::f64::consts::TAU;

use log::warn;

use crate::error::{Error, Result};
use crate::oscillate::{cis, tree_sum, try_time_average, AveragingWindow, FastnessReport, OscillatingPureState};
use crate::qcore::{Observable, PureState, C64};
use crate::weakval::{averaged_weak_value, pole_symmetric_window, weak_value_mixed, WeakValue};

/// Amplitudes at or below this cannot be inverted into a post-selection.
pub const AMPLITUDE_EPS: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;
const GRID_TOL: f64 = 1e-9;
const VANISHING_SUM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumProfile {
    grid: Vec<f64>,
    spacing: f64,
    amplitude: Vec<f64>,
    omega: f64,
    phi: f64,
    delta_x: f64,
    delta_t: f64,
}

impl ContinuumProfile {
    /// Takes bin centers and amplitudes; `sum A^2 h` must already be 1.
    pub fn new(grid: Vec<f64>, amplitude: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        if grid.len() != amplitude.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: amplitude.len(),
            });
        }
        let spacing = grid[1] - grid[0];
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        for (k, pair) in grid.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - spacing).abs() > GRID_TOL * spacing {
                return Err(Error::InvalidParameter(format!("grid spacing is not uniform at index {}", k + 1)));
            }
        }
        if let Some(k) = amplitude.iter().position(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude at index {k} must be finite and non-negative"
            )));
        }
        let norm: f64 = amplitude.iter().map(|a| a * a).sum::<f64>() * spacing;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr: norm });
        }
        Ok(Self {
            grid,
            spacing,
            amplitude,
            omega: 0.0,
            phi: 0.0,
            delta_x: spacing,
            delta_t: 1.0,
        })
    }

    /// `bins` midpoints on `[lower, upper]`, amplitudes `f(x)` rescaled to unit grid norm.
    pub fn sampled<F: Fn(f64) -> f64>(lower: f64, upper: f64, bins: usize, f: F) -> Result<Self> {
        if !(upper > lower) || bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "need upper > lower and at least 2 bins, got [{lower}, {upper}] with {bins}"
            )));
        }
        let h = (upper - lower) / bins as f64;
        let grid: Vec<f64> = (0..bins).map(|k| lower + (k as f64 + 0.5) * h).collect();
        let raw: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
        if raw.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("amplitude function must be finite and non-negative".into()));
        }
        let norm = (raw.iter().map(|a| a * a).sum::<f64>() * h).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("amplitude function vanishes on the grid".into()));
        }
        Self::new(grid, raw.iter().map(|a| a / norm).collect())
    }

    /// Phase `-(omega t - phi) x`.
    pub fn with_phase(mut self, omega: f64, phi: f64) -> Self {
        self.omega = omega;
        self.phi = phi;
        self
    }

    pub fn with_resolution(mut self, delta_x: f64, delta_t: f64) -> Self {
        self.delta_x = delta_x;
        self.delta_t = delta_t;
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    fn lower_edge(&self) -> f64 {
        self.grid[0] - 0.5 * self.spacing
    }

    /// Probability mass per bin, `A^2 h`.
    pub fn bin_probabilities(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a * a * self.spacing).collect()
    }
}

/// Amplitude estimate `sqrt(p_k / h)` from per-bin probabilities.
pub fn recover_amplitudes(bin_probabilities: &[f64], spacing: f64) -> Vec<f64> {
    bin_probabilities.iter().map(|p| (p.max(0.0) / spacing).sqrt()).collect()
}

/// Split window `[a - da, a + da]`, snapped to bin edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub a: f64,
    pub delta_a: f64,
    first: usize,
    half_bins: usize,
}

impl Window {
    pub fn new(p: &ContinuumProfile, a: f64, delta_a: f64) -> Result<Self> {
        let h = p.spacing;
        let centre = (a - p.lower_edge()) / h;
        let half = delta_a / h;
        if (centre - centre.round()).abs() > GRID_TOL * centre.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("window centre {a} is not on a bin edge")));
        }
        if (half - half.round()).abs() > GRID_TOL * half.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "half-width {delta_a} is not a whole number of bins of width {h}"
            )));
        }
        let (centre, half) = (centre.round() as i64, half.round() as i64);
        if half < 2 {
            return Err(Error::InvalidParameter(format!(
                "half-width must span at least 2 bins, got {half}"
            )));
        }
        if centre - half < 0 || centre + half > p.grid.len() as i64 {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] leaves the grid",
                a - delta_a,
                a + delta_a
            )));
        }
        Ok(Self {
            a,
            delta_a,
            first: (centre - half) as usize,
            half_bins: half as usize,
        })
    }

    pub fn half_bins(&self) -> usize {
        self.half_bins
    }

    /// Grid indices of the left half, then the right half.
    pub fn indices(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mid = self.first + self.half_bins;
        (self.first..mid, mid..mid + self.half_bins)
    }

    fn span(&self) -> std::ops::Range<usize> {
        self.first..self.first + 2 * self.half_bins
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumFastness {
    pub report: FastnessReport,
    /// Set when the static phase alone winds faster than the position resolution.
    pub spatial_mixing: bool,
}

/// Temporal averaging is valid when `|omega| >= fast_factor * 2 pi / (dx dt)`.
pub fn check_fast_condition(p: &ContinuumProfile, fast_factor: f64) -> ContinuumFastness {
    let rate = p.omega.abs() * p.delta_x;
    let cycles = rate * p.delta_t / TAU;
    let mut report = FastnessReport::from_cycles(rate, cycles, fast_factor);
    report.is_fast = p.omega != 0.0 && cycles >= fast_factor;
    ContinuumFastness {
        report,
        spatial_mixing: p.phi.abs() * p.delta_x >= TAU,
    }
}

/// Post-selection amplitudes on the window, zero phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TailoredPostselection {
    samples: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub norm: f64,
}

impl TailoredPostselection {
    /// `B = N C / A` with `A` taken from `estimate` (full grid), normalized
    /// so that `sum B^2 h = 1` on the window.
    pub fn from_amplitudes(estimate: &[f64], spacing: f64, w: &Window, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0) || !(c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "C1 and C2 must be strictly positive, got {c1} and {c2}"
            )));
        }
        let span = w.span();
        if span.end > estimate.len() {
            return Err(Error::DimensionMismatch {
                expected: span.end,
                found: estimate.len(),
            });
        }
        if let Some(k) = span.clone().find(|&k| !(estimate[k] > AMPLITUDE_EPS)) {
            return Err(Error::VanishingAmplitude {
                x: k as f64,
                amplitude: estimate[k],
            });
        }
        let level = |k: usize| if k < w.first + w.half_bins { c1 } else { c2 };
        let unnormalized: Vec<f64> = span.clone().map(|k| level(k) / estimate[k]).collect();
        let norm = 1.0 / (unnormalized.iter().map(|b| b * b).sum::<f64>() * spacing).sqrt();
        Ok(Self {
            samples: unnormalized.iter().map(|b| b * norm).collect(),
            c1,
            c2,
            norm,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn ratio(&self) -> f64 {
        self.c2 / self.c1
    }
}

pub fn tailored_postselection(p: &ContinuumProfile, w: &Window, c1: f64, c2: f64) -> Result<TailoredPostselection> {
    TailoredPostselection::from_amplitudes(&p.amplitude, p.spacing, w, c1, c2)
        .map_err(|e| match e {
            Error::VanishingAmplitude { x, amplitude } => Error::VanishingAmplitude {
                x: p.grid[x as usize],
                amplitude,
            },
            e => e,
        })
}

fn ensure_built_for(p: &ContinuumProfile, post: &TailoredPostselection, w: &Window) -> Result<()> {
    if post.samples.len() != 2 * w.half_bins || w.first + 2 * w.half_bins > p.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * w.half_bins,
            found: post.samples.len(),
        });
    }
    Ok(())
}

/// Midpoint-rule weak value at time `t`: `(L - R) / (L + R)` where `L` and `R`
/// are the half-window integrals of `A B exp(i (omega t - phi) x)`.
pub fn continuum_weak_value(p: &ContinuumProfile, post: &TailoredPostselection, w: &Window, t: f64) -> Result<WeakValue> {
    ensure_built_for(p, post, w)?;
    let rate = p.omega * t - p.phi;
    let h = p.spacing;
    let (left, right) = w.indices();
    // phases relative to the window centre; the common factor cancels
    let term = |k: usize| {
        let offset = (k as f64 - (w.first + w.half_bins) as f64 + 0.5) * h;
        cis(rate * offset) * (p.amplitude[k] * post.samples[k - w.first] * h)
    };
    let l_terms: Vec<C64> = left.map(term).collect();
    let r_terms: Vec<C64> = right.map(term).collect();
    let (l, r) = (tree_sum(&l_terms), tree_sum(&r_terms));
    let scale: f64 = l_terms.iter().chain(&r_terms).map(|z| z.norm()).sum();
    let den = l + r;
    if l.norm() + r.norm() <= VANISHING_SUM * scale {
        return Err(Error::PoleOnPath { t });
    }
    if den.norm() <= VANISHING_SUM * (l.norm() + r.norm()) {
        return Err(Error::PoleAtPhase {
            phase: rate * w.delta_a,
        });
    }
    Ok(WeakValue::new((l - r) / den))
}

/// Phase `u = omega da t - phi da` of the half-window ratio.
pub fn window_phase(omega: f64, phi: f64, delta_a: f64, t: f64) -> f64 {
    omega * delta_a * t - phi * delta_a
}

/// `(1 - r e^{iu}) / (1 + r e^{iu})` with `r = C2 / C1`.
pub fn continuum_closed_form(c1: f64, c2: f64, phase: f64) -> Result<WeakValue> {
    let z = cis(phase) * (c2 / c1);
    let one = C64::new(1.0, 0.0);
    if (one + z).norm() < 1e-12 {
        return Err(Error::PoleAtPhase { phase });
    }
    Ok(WeakValue::new((one - z) / (one + z)))
}

/// Unsimplified four-exponential form of [`continuum_closed_form`]; 0/0 at `u = 0 mod 2 pi`.
pub fn continuum_four_term_form(c1: f64, c2: f64, phase: f64) -> WeakValue {
    let (fwd, back) = (cis(phase), cis(-phase));
    let num = C64::new(c1 + c2, 0.0) - back * c1 - fwd * c2;
    let den = C64::new(c1 - c2, 0.0) - back * c1 + fwd * c2;
    WeakValue::new(num / den)
}

/// `sgn(1 - C2^2 / C1^2)`.
pub fn continuum_averaged_closed_form(c1: f64, c2: f64) -> WeakValue {
    if c1 == c2 {
        WeakValue::real(0.0)
    } else {
        WeakValue::real((c1 - c2).signum())
    }
}

/// One period of the lattice phase `exp(i (omega t - phi) h)`, with
/// `2 * nodes_per_cycle` nodes per cycle of the half-window phase placed
/// symmetrically about the pole at `u = pi`.
pub fn natural_window(p: &ContinuumProfile, w: &Window, nodes_per_cycle: usize) -> Result<AveragingWindow> {
    let m = w.half_bins;
    let per_cycle = 2 * nodes_per_cycle.max(1);
    let cycle = pole_symmetric_window(-p.phi * w.delta_a, p.omega * w.delta_a, per_cycle)?;
    AveragingWindow::new(cycle.start, cycle.duration * m as f64, per_cycle * m)
}

/// Time average of [`continuum_weak_value`] over `window`. Logs a warning if
/// the profile does not satisfy the fast-oscillation condition.
pub fn continuum_averaged_weak_value(
    p: &ContinuumProfile,
    post: &TailoredPostselection,
    w: &Window,
    window: &AveragingWindow,
) -> Result<WeakValue> {
    let fast = check_fast_condition(p, crate::oscillate::DEFAULT_FAST_FACTOR);
    if !fast.report.is_fast {
        warn!(
            "continuum averaging outside the fast regime: {:.3e} cycles per resolution cell",
            fast.report.cycles_in_window
        );
    }
    let value = try_time_average(|t| continuum_weak_value(p, post, w, t).map(|v| v.value), window)?;
    Ok(WeakValue::new(value))
}

/// Weak value for the dephased profile: half-window integrals of `A^2 B^2`.
pub fn continuum_mixed_weak_value(p: &ContinuumProfile, post: &TailoredPostselection, w: &Window) -> Result<WeakValue> {
    ensure_built_for(p, post, w)?;
    let (left, right) = w.indices();
    let weight = |k: usize| {
        let ab = p.amplitude[k] * post.samples[k - w.first];
        ab * ab * p.spacing
    };
    let l: f64 = left.map(weight).sum();
    let r: f64 = right.map(weight).sum();
    if !(l + r > 0.0) {
        return Err(Error::OrthogonalPostselection { overlap: 0.0 });
    }
    Ok(WeakValue::real((l - r) / (l + r)))
}

/// `sgn(1 - C2^2 / C1^2)` and `(1 - C2^2/C1^2) / (1 + C2^2/C1^2)`.
pub fn continuum_mixed_closed_form(c1: f64, c2: f64) -> WeakValue {
    let r2 = (c2 / c1).powi(2);
    WeakValue::real((1.0 - r2) / (1.0 + r2))
}

/// Averaged and mixed weak values of the full countable-dimensional setup:
/// state `sum_j amps[j] e^{i j omega0 t} |j>`, observable `|a><a| - |b><b|`,
/// post-selection `|a> + B e^{i chi} |b>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountableReduction {
    pub averaged: WeakValue,
    pub mixed: WeakValue,
    /// `|amps[b]| / |amps[a]|`.
    pub effective_a: f64,
}

pub fn countable_reduction(amps: &[C64], a_idx: usize, b_idx: usize, b: f64, chi: f64) -> Result<CountableReduction> {
    let dim = amps.len();
    if dim < 3 {
        return Err(Error::InvalidParameter(format!("countable reduction needs dim >= 3, got {dim}")));
    }
    if a_idx >= dim || b_idx >= dim || a_idx == b_idx {
        return Err(Error::InvalidParameter(format!(
            "basis indices {a_idx} and {b_idx} must be distinct and below {dim}"
        )));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("B must be strictly positive, got {b}")));
    }
    for idx in [a_idx, b_idx] {
        if !(amps[idx].norm() > AMPLITUDE_EPS) {
            return Err(Error::VanishingAmplitude {
                x: idx as f64,
                amplitude: amps[idx].norm(),
            });
        }
    }
    let omega0 = 1.0;
    let frequencies: Vec<f64> = (0..dim).map(|j| j as f64 * omega0).collect();
    let total = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let normalized: Vec<C64> = amps.iter().map(|z| z / total).collect();
    let state = OscillatingPureState::from_coefficients(&normalized, frequencies)?;

    let obs = Observable::difference_of_projectors(dim, a_idx, b_idx);
    let mut post = vec![C64::new(0.0, 0.0); dim];
    post[a_idx] = C64::new(1.0, 0.0);
    post[b_idx] = C64::from_polar(b, chi);
    let post = PureState::normalized(post.into())?;

    // weak value depends on t only through delta = chi - (w_b - w_a) t - (arg b - arg a)
    let rate = -(state.frequencies()[b_idx] - state.frequencies()[a_idx]);
    let delta0 = chi - (state.phase_offsets()[b_idx] - state.phase_offsets()[a_idx]);
    // rectangle-rule aliasing error decays like x^nodes with x = min(AB, 1/AB)
    let x = (amps[b_idx].norm() / amps[a_idx].norm() * b).ln().abs();
    let nodes = if x > 0.0 { (40.0 / x).ceil().clamp(512.0, 1048576.0) as usize } else { 512 };
    let window = pole_symmetric_window(delta0, rate, nodes)?;
    let averaged = averaged_weak_value(&state, &obs, &post, &window)?;
    let mixed = weak_value_mixed(&state.dephase()?, &obs, &post.projector())?;
    Ok(CountableReduction {
        averaged,
        mixed,
        effective_a: amps[b_idx].norm() / amps[a_idx].norm(),
    })
}
