//! Von Neumann pointer simulation: weak coupling to a Gaussian pointer,
//! post-selection, readout, and Monte Carlo over jittered measurement times.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::oscillate::{AveragingWindow, OscillatingPureState};
use crate::qcore::{ensure_dims, ComplexMatrix, Observable, PureState, C64, ZERO};
use crate::weakval::{TwoStateConfig, WeakValue, OVERLAP_EPS};

pub const MIN_POINTS: usize = 128;
pub const MIN_SPAN_SIGMAS: f64 = 10.0;
const SURVIVAL_FLOOR: f64 = 1e-300;
const CHUNK: usize = 4096;

/// Uniform pointer grid `x_j = -L/2 + j L / M` carrying a Gaussian of width
/// `sigma`, coupled with strength `g`.
#[derive(Clone)]
pub struct PointerModel {
    points: usize,
    span: f64,
    sigma: f64,
    g: f64,
    positions: Vec<f64>,
    wavenumbers: Vec<f64>,
    initial: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    momentum_scale: Option<f64>,
}

impl fmt::Debug for PointerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PointerModel")
            .field("points", &self.points)
            .field("span", &self.span)
            .field("sigma", &self.sigma)
            .field("g", &self.g)
            .field("momentum_scale", &self.momentum_scale)
            .finish()
    }
}

impl PointerModel {
    /// Builds the grid and, for `g != 0`, calibrates the momentum readout
    /// constant on a pre/post pair whose weak value is `-i`.
    pub fn new(points: usize, span: f64, sigma: f64, g: f64) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "pointer grid needs at least {MIN_POINTS} points, got {points}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("pointer width must be positive, got {sigma}")));
        }
        if !(span >= MIN_SPAN_SIGMAS * sigma) || !span.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pointer span {span} is below {MIN_SPAN_SIGMAS} widths"
            )));
        }
        if !g.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        let dx = span / points as f64;
        let positions: Vec<f64> = (0..points).map(|j| -0.5 * span + j as f64 * dx).collect();
        let wavenumbers: Vec<f64> = (0..points)
            .map(|n| {
                let signed = if n <= points / 2 { n as f64 } else { n as f64 - points as f64 };
                TAU * signed / span
            })
            .collect();
        let raw: Vec<C64> = positions
            .iter()
            .map(|x| C64::new((-x * x / (4.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
        let initial = raw.iter().map(|z| z / norm).collect();
        let mut planner = FftPlanner::new();
        let mut model = Self {
            points,
            span,
            sigma,
            g,
            positions,
            wavenumbers,
            initial,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
            momentum_scale: None,
        };
        if g != 0.0 {
            model.momentum_scale = Some(model.calibrate()?);
        }
        Ok(model)
    }

    /// 256 points over 32 widths.
    pub fn standard(sigma: f64, g: f64) -> Result<Self> {
        Self::new(256, 32.0 * sigma, sigma, g)
    }

    pub fn with_coupling(&self, g: f64) -> Result<Self> {
        Self::new(self.points, self.span, self.sigma, g)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn spacing(&self) -> f64 {
        self.span / self.points as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn initial(&self) -> &[C64] {
        &self.initial
    }

    /// Calibrated constant `c` in `Im O_w = c * mean_momentum / g`.
    pub fn momentum_scale(&self) -> Option<f64> {
        self.momentum_scale
    }

    fn spectrum(&self, wave: &[C64]) -> Vec<C64> {
        let mut buf = wave.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// `psi(x - d)` by a phase ramp in the discrete Fourier domain.
    pub fn translate(&self, wave: &[C64], d: f64) -> Result<Vec<C64>> {
        if d.abs() > 0.25 * self.span {
            return Err(Error::GridOverflow {
                shift: d,
                span: self.span,
            });
        }
        let mut buf = self.spectrum(wave);
        for (z, k) in buf.iter_mut().zip(&self.wavenumbers) {
            *z *= C64::from_polar(1.0 / self.points as f64, -k * d);
        }
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    fn calibrate(&self) -> Result<f64> {
        let cfg = TwoStateConfig::new(1.0, 1.0, 0.0, PI / 2.0)?;
        let pre = cfg.oscillating_state().state_at(0.0);
        let post = cfg.post_state();
        let joint = weak_couple(&pre, &Observable::polarization(), self)?;
        let (pointer, _) = postselect(&joint, &post)?;
        let (_, momentum) = readout(self, &pointer);
        let target = -1.0;
        let scale = target * self.g / momentum;
        let expected = 2.0 * self.sigma * self.sigma;
        // exact Gaussian overlap factor on top of the first-order constant
        let slack = 1.01 * (0.5 * (self.g / self.sigma).powi(2)).exp_m1() + 1e-6;
        if ((scale.abs() - expected) / expected).abs() > slack {
            return Err(Error::InvalidParameter(format!(
                "momentum readout constant {scale} does not have magnitude 2 sigma^2 = {expected}"
            )));
        }
        Ok(scale)
    }
}

/// System x pointer amplitudes, row-major by system index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    system_dim: usize,
    points: usize,
    spacing: f64,
    amplitudes: Vec<C64>,
}

impl JointState {
    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    /// Pointer wavefunction attached to system basis state `i`.
    pub fn branch(&self, i: usize) -> &[C64] {
        &self.amplitudes[i * self.points..(i + 1) * self.points]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing
    }

    /// Pointer position density with the system traced out.
    pub fn pointer_marginal(&self) -> Vec<f64> {
        (0..self.points)
            .map(|j| (0..self.system_dim).map(|i| self.branch(i)[j].norm_sqr()).sum())
            .collect()
    }
}

struct Branches {
    /// Eigenvectors as columns; `shifted[n]` is the pointer moved by `g * lambda_n`.
    vectors: ComplexMatrix,
    shifted: Vec<Vec<C64>>,
}

fn branches(obs: &Observable, pm: &PointerModel) -> Result<Branches> {
    let (values, vectors) = obs.eigen();
    let shifted = values
        .iter()
        .map(|&l| pm.translate(&pm.initial, pm.g * l))
        .collect::<Result<Vec<_>>>()?;
    Ok(Branches { vectors, shifted })
}

/// Applies `exp(-i g O p)`: the pointer attached to eigenvector `n` moves by
/// `g * lambda_n`.
pub fn weak_couple(system: &PureState, obs: &Observable, pm: &PointerModel) -> Result<JointState> {
    ensure_dims(system.dim(), obs.dim())?;
    let b = branches(obs, pm)?;
    let dim = system.dim();
    let weights = b.vectors.adjoint() * system.amplitudes();
    let mut amplitudes = vec![ZERO; dim * pm.points];
    for (n, wave) in b.shifted.iter().enumerate() {
        for i in 0..dim {
            let c = b.vectors[(i, n)] * weights[n];
            let row = &mut amplitudes[i * pm.points..(i + 1) * pm.points];
            for (slot, w) in row.iter_mut().zip(wave) {
                *slot += c * w;
            }
        }
    }
    Ok(JointState {
        system_dim: dim,
        points: pm.points,
        spacing: pm.spacing(),
        amplitudes,
    })
}

/// Normalized pointer wavefunction on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerState {
    pub wave: Vec<C64>,
}

/// Projects the system onto `post`; returns the renormalized pointer and the
/// post-selection probability.
pub fn postselect(j: &JointState, post: &PureState) -> Result<(PointerState, f64)> {
    ensure_dims(j.system_dim, post.dim())?;
    let mut wave = vec![ZERO; j.points];
    for (i, c) in post.amplitudes().iter().enumerate() {
        let c = c.conj();
        for (slot, z) in wave.iter_mut().zip(j.branch(i)) {
            *slot += c * z;
        }
    }
    let probability = wave.iter().map(|z| z.norm_sqr()).sum::<f64>() * j.spacing;
    // anything below rounding level of the joint norm counts as zero
    let floor = SURVIVAL_FLOOR.max(f64::EPSILON * f64::EPSILON * j.norm_sqr());
    if !(probability > floor) {
        return Err(Error::NoSurvivors);
    }
    let scale = 1.0 / probability.sqrt();
    Ok((PointerState { wave: wave.iter().map(|z| z * scale).collect() }, probability))
}

/// `(mean position, mean wavenumber)`; the latter from the discrete spectrum.
pub fn readout(pm: &PointerModel, pointer: &PointerState) -> (f64, f64) {
    let density: f64 = pointer.wave.iter().map(|z| z.norm_sqr()).sum();
    let position = pointer
        .wave
        .iter()
        .zip(&pm.positions)
        .map(|(z, x)| z.norm_sqr() * x)
        .sum::<f64>()
        / density;
    let spectrum = pm.spectrum(&pointer.wave);
    let weight: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
    let momentum = spectrum
        .iter()
        .zip(&pm.wavenumbers)
        .map(|(z, k)| z.norm_sqr() * k)
        .sum::<f64>()
        / weight;
    (position, momentum)
}

fn to_weak_value(pm: &PointerModel, position: f64, momentum: f64) -> Result<WeakValue> {
    let scale = pm
        .momentum_scale
        .ok_or_else(|| Error::InvalidParameter("weak value estimate needs nonzero coupling".into()))?;
    Ok(WeakValue::new(C64::new(position / pm.g, scale * momentum / pm.g)))
}

/// Weak value read off the pointer: `mean_x / g + i c mean_k / g`.
pub fn estimate_weak_value(pre: &PureState, obs: &Observable, post: &PureState, pm: &PointerModel) -> Result<WeakValue> {
    ensure_dims(pre.dim(), post.dim())?;
    let overlap = pre.inner(post)?.norm();
    if !(overlap > OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap });
    }
    let joint = weak_couple(pre, obs, pm)?;
    let (pointer, _) = postselect(&joint, post)?;
    let (x, k) = readout(pm, &pointer);
    to_weak_value(pm, x, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// All survivors' readings averaged together.
    Pooled,
    /// Per-time-bin weak values, averaged uniformly over bins.
    TimeBinned { bins: usize },
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Pooled => "Pooled",
            Estimator::TimeBinned { .. } => "TimeBinned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub window: AveragingWindow,
    pub trials: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub trials: usize,
    pub survivors: usize,
    pub estimator: Estimator,
    /// Time bins wider than a sixteenth of the fastest oscillation period.
    pub bin_too_coarse: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    x: f64,
    xx: f64,
    k: f64,
    kk: f64,
}

impl Moments {
    fn push(&mut self, x: f64, k: f64) {
        self.n += 1;
        self.x += x;
        self.xx += x * x;
        self.k += k;
        self.kk += k * k;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.x += other.x;
        self.xx += other.xx;
        self.k += other.k;
        self.kk += other.kk;
    }

    fn means(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.x / n, self.k / n)
    }

    /// Variances of the two sample means.
    fn mean_variances(&self) -> (f64, f64) {
        if self.n < 2 {
            return (0.0, 0.0);
        }
        let n = self.n as f64;
        let (mx, mk) = self.means();
        let vx = ((self.xx - n * mx * mx) / (n - 1.0)).max(0.0);
        let vk = ((self.kk - n * mk * mk) / (n - 1.0)).max(0.0);
        (vx / n, vk / n)
    }
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

/// Monte Carlo of the jittered weak measurement. Each trial uses its own
/// ChaCha stream `(seed, trial)`, so the result does not depend on threading.
pub fn monte_carlo(
    s: &OscillatingPureState,
    obs: &Observable,
    post: &PureState,
    pm: &PointerModel,
    cfg: &McConfig,
) -> Result<McEstimate> {
    ensure_dims(s.dim(), obs.dim())?;
    ensure_dims(s.dim(), post.dim())?;
    let bins = match cfg.estimator {
        Estimator::Pooled => 1,
        Estimator::TimeBinned { bins } if bins >= 1 => bins,
        Estimator::TimeBinned { .. } => return Err(Error::InvalidParameter("need at least one time bin".into())),
    };
    let b = branches(obs, pm)?;
    let spectra: Vec<Vec<C64>> = b.shifted.iter().map(|w| pm.spectrum(w)).collect();
    // <post|n>
    let post_weights: Vec<C64> = (0..b.shifted.len())
        .map(|n| b.vectors.column(n).dotc(post.amplitudes()).conj())
        .collect();
    let dx = pm.spacing();
    let gram: Vec<Vec<C64>> = b
        .shifted
        .iter()
        .map(|u| {
            b.shifted
                .iter()
                .map(|v| u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>() * dx)
                .collect()
        })
        .collect();

    let window = cfg.window;
    let chunks = cfg.trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); bins];
            let mut density = vec![0.0; pm.points];
            let mut weights = vec![0.0; pm.points];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(cfg.trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(trial as u64);
                let u: f64 = rng.random();
                let t = window.start + window.duration * u;
                let psi = s.coefficients_at(t);
                let alpha: Vec<C64> = (0..b.shifted.len())
                    .map(|n| post_weights[n] * b.vectors.column(n).dotc(&psi))
                    .collect();
                let mut survival = 0.0;
                for (n, an) in alpha.iter().enumerate() {
                    for (m, am) in alpha.iter().enumerate() {
                        survival += (an.conj() * am * gram[n][m]).re;
                    }
                }
                if rng.random::<f64>() >= survival {
                    continue;
                }
                for j in 0..pm.points {
                    let z: C64 = alpha.iter().zip(&b.shifted).map(|(a, w)| a * w[j]).sum();
                    density[j] = z.norm_sqr();
                    let q: C64 = alpha.iter().zip(&spectra).map(|(a, w)| a * w[j]).sum();
                    weights[j] = q.norm_sqr();
                }
                let x = pm.positions[sample_index(&mut rng, &density)];
                let k = pm.wavenumbers[sample_index(&mut rng, &weights)];
                let bin = ((u * bins as f64) as usize).min(bins - 1);
                acc[bin].push(x, k);
            }
            acc
        })
        .collect();

    let mut totals = vec![Moments::default(); bins];
    for chunk in &per_chunk {
        for (t, m) in totals.iter_mut().zip(chunk) {
            t.merge(m);
        }
    }
    let survivors: usize = totals.iter().map(|m| m.n).sum();
    if survivors == 0 {
        return Err(Error::NoSurvivors);
    }
    let scale = pm
        .momentum_scale
        .ok_or_else(|| Error::InvalidParameter("weak value estimate needs nonzero coupling".into()))?;

    let (value, stderr_re, stderr_im) = match cfg.estimator {
        Estimator::Pooled => {
            let all = totals[0];
            let (mx, mk) = all.means();
            let (vx, vk) = all.mean_variances();
            (
                to_weak_value(pm, mx, mk)?.value,
                vx.sqrt() / pm.g.abs(),
                (scale / pm.g).abs() * vk.sqrt(),
            )
        }
        Estimator::TimeBinned { .. } => {
            let filled: Vec<&Moments> = totals.iter().filter(|m| m.n > 0).collect();
            if filled.len() < bins {
                warn!("{} of {} time bins received no survivors", bins - filled.len(), bins);
            }
            let count = filled.len() as f64;
            let mut value = ZERO;
            let (mut vx, mut vk) = (0.0, 0.0);
            for m in &filled {
                let (mx, mk) = m.means();
                value += to_weak_value(pm, mx, mk)?.value;
                let (a, b) = m.mean_variances();
                vx += a;
                vk += b;
            }
            (
                value / count,
                vx.sqrt() / (count * pm.g.abs()),
                (scale / pm.g).abs() * vk.sqrt() / count,
            )
        }
    };

    let period = TAU / s.max_gap();
    let bin_too_coarse = match cfg.estimator {
        Estimator::TimeBinned { bins } => window.duration / bins as f64 > period / 16.0,
        Estimator::Pooled => false,
    };
    if bin_too_coarse {
        warn!("time bins are wider than 1/16 of the oscillation period");
    }
    Ok(McEstimate {
        value,
        stderr_re,
        stderr_im,
        trials: cfg.trials,
        survivors,
        estimator: cfg.estimator,
        bin_too_coarse,
    })
}
