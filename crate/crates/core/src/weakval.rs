//! Weak values for pure, mixed, time-averaged and naively substituted
//! pre-selections, plus the two-level closed forms and the verdict logic that
//! separates an oscillating source from a mixed one.
//!
//! Convention: the pre-selected state sits on the bra,
//! `O_w = <pre|O|post> / <pre|post>`. This is the complex conjugate of the
//! more common ket-side convention; only the sign of the imaginary part
//! differs.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::oscillate::{time_average, try_time_average, AveragingWindow, OscillatingPureState};
use crate::qcore::{
    ensure_dims, trace_of_product, ComplexMatrix, ComplexVector, DensityOperator, MixtureDecomposition, Observable,
    PureState, C64, ZERO,
};

/// Minimum `|<pre|post>|` (relative to unit norm) accepted for a weak value.
pub const OVERLAP_EPS: f64 = 1e-8;
/// Largest residual a model may leave and still explain the data.
pub const VERDICT_TOL: f64 = 0.05;
/// Samples with `|AB - 1|` below this are dropped by [`discriminate`].
pub const POLE_MARGIN: f64 = 0.05;
/// Half-width of the excluded neighbourhood around a pole in principal-value averages.
pub const PV_HALF_WIDTH: f64 = 1e-9;

/// Complex weak value. The real part is read from the pointer position, the
/// imaginary part from the pointer momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakValue {
    pub value: C64,
}

impl WeakValue {
    pub fn new(value: C64) -> Self {
        Self { value }
    }

    pub fn real(re: f64) -> Self {
        Self::new(C64::new(re, 0.0))
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }
}

/// Weak value of arbitrary nonzero vectors; overall scale factors cancel.
pub fn weak_value_vectors(pre: &ComplexVector, obs: &ComplexMatrix, post: &ComplexVector) -> Result<WeakValue> {
    ensure_dims(pre.len(), post.len())?;
    ensure_dims(pre.len(), obs.nrows())?;
    let overlap = pre.dotc(post);
    let relative = overlap.norm() / (pre.norm() * post.norm());
    if !(relative > OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap: relative });
    }
    Ok(WeakValue::new(pre.dotc(&(obs * post)) / overlap))
}

pub fn weak_value_pure(pre: &PureState, obs: &Observable, post: &PureState) -> Result<WeakValue> {
    weak_value_vectors(pre.amplitudes(), obs.matrix(), post.amplitudes())
}

/// Same quantity as [`weak_value_pure`], computed as
/// `Tr[Pi_pre O Pi_post] / Tr[Pi_pre Pi_post]`.
pub fn weak_value_projector_form(pre: &PureState, obs: &Observable, post: &PureState) -> Result<WeakValue> {
    ensure_dims(pre.dim(), obs.dim())?;
    ensure_dims(pre.dim(), post.dim())?;
    let (p1, p2) = (pre.outer(), post.outer());
    let den = trace_of_product(&p1, &p2);
    if !(den.re > OVERLAP_EPS * OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap: den.re.max(0.0).sqrt() });
    }
    Ok(WeakValue::new(trace_of_product(&p1, &(obs.matrix() * p2)) / den))
}

/// `Tr[rho1 O rho2] / Tr[rho1 rho2]`.
pub fn weak_value_mixed(pre: &DensityOperator, obs: &Observable, post: &DensityOperator) -> Result<WeakValue> {
    ensure_dims(pre.dim(), obs.dim())?;
    ensure_dims(pre.dim(), post.dim())?;
    let den = trace_of_product(pre.matrix(), post.matrix());
    if !(den.re > OVERLAP_EPS * OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap: den.re.max(0.0).sqrt() });
    }
    let num = trace_of_product(pre.matrix(), &(obs.matrix() * post.matrix()));
    Ok(WeakValue::new(num / den))
}

/// Ensemble-level weak value: pure-pair weak values weighted by
/// `p_i q_j Tr[Pi_i Pi_j]`, normalized by the total post-selection probability.
///
/// Pairs too close to orthogonal for a pure weak value contribute through the
/// limit `p_i q_j <psi_i|O|phi_j><phi_j|psi_i>` of weight times weak value.
pub fn weak_value_by_decomposition(
    pre: &MixtureDecomposition,
    obs: &Observable,
    post: &MixtureDecomposition,
) -> Result<WeakValue> {
    ensure_dims(pre.dim(), obs.dim())?;
    ensure_dims(pre.dim(), post.dim())?;
    let mut weighted = ZERO;
    let mut total = 0.0;
    for (p, psi) in pre.weights().iter().zip(pre.components()) {
        for (q, phi) in post.weights().iter().zip(post.components()) {
            let overlap = psi.inner(phi)?;
            let survival = p * q * overlap.norm_sqr();
            total += survival;
            match weak_value_pure(psi, obs, phi) {
                Ok(w) => weighted += w.value * survival,
                Err(Error::OrthogonalPostselection { .. }) => {
                    let element = psi.amplitudes().dotc(&(obs.matrix() * phi.amplitudes()));
                    weighted += element * overlap.conj() * (p * q);
                }
                Err(e) => return Err(e),
            }
        }
    }
    if !(total > OVERLAP_EPS * OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap: total.sqrt() });
    }
    Ok(WeakValue::new(weighted / total))
}

/// Time average of the instantaneous weak value over the window.
///
/// Fails with [`Error::PoleOnPath`] if any node has a near-orthogonal
/// post-selection; perturb the window or change the node count.
pub fn averaged_weak_value(
    s: &OscillatingPureState,
    obs: &Observable,
    post: &PureState,
    window: &AveragingWindow,
) -> Result<WeakValue> {
    ensure_dims(s.dim(), obs.dim())?;
    ensure_dims(s.dim(), post.dim())?;
    let value = try_time_average(
        |t| match weak_value_vectors(&s.coefficients_at(t), obs.matrix(), post.amplitudes()) {
            Ok(w) => Ok(w.value),
            Err(Error::OrthogonalPostselection { .. }) => Err(Error::PoleOnPath { t }),
            Err(e) => Err(e),
        },
        window,
    )?;
    Ok(WeakValue::new(value))
}

/// Ratio of the separately averaged numerator `Tr[Pi1 O Pi2]` and denominator
/// `Tr[Pi1 Pi2]`.
pub fn naive_substitution_weak_value(
    s: &OscillatingPureState,
    obs: &Observable,
    post: &PureState,
    window: &AveragingWindow,
) -> Result<WeakValue> {
    ensure_dims(s.dim(), obs.dim())?;
    ensure_dims(s.dim(), post.dim())?;
    let target = post.amplitudes();
    let o_post = obs.matrix() * target;
    let num = time_average(
        |t| {
            let v = s.coefficients_at(t);
            v.dotc(&o_post) * target.dotc(&v)
        },
        window,
    )?;
    let den = time_average(|t| C64::new(s.coefficients_at(t).dotc(target).norm_sqr(), 0.0), window)?;
    if !(den.re > OVERLAP_EPS * OVERLAP_EPS) {
        return Err(Error::OrthogonalPostselection { overlap: den.re.max(0.0).sqrt() });
    }
    Ok(WeakValue::new(num / den.re))
}

/// Window of one period of a phase difference `delta(t) = delta0 + rate * t`
/// whose rectangle-rule nodes sit symmetrically about `delta = pi`, half a
/// step away on either side. Averages over it are principal values when the
/// weak value has its pole at `pi`.
pub fn pole_symmetric_window(delta0: f64, rate: f64, nodes: usize) -> Result<AveragingWindow> {
    if rate == 0.0 || !rate.is_finite() {
        return Err(Error::InvalidParameter("phase rate must be nonzero and finite".into()));
    }
    let nodes = nodes + nodes % 2;
    let first = PI + rate.signum() * PI / nodes as f64;
    AveragingWindow::new((first - delta0) / rate, TAU / rate.abs(), nodes)
}

/// Two-level scenario: pre-selection `N1(|+> + A e^{i phi(t)} |->)`,
/// post-selection `N2(|+> + B |->)`, with phase difference
/// `delta(t) = chi - phi(t) = omega t + phi0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateConfig {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
    pub phi0: f64,
}

impl TwoStateConfig {
    pub fn new(a: f64, b: f64, omega: f64, phi0: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("A and B must be strictly positive, got A={a}, B={b}")));
        }
        if !omega.is_finite() || !phi0.is_finite() {
            return Err(Error::InvalidParameter("omega and phi0 must be finite".into()));
        }
        Ok(Self { a, b, omega, phi0 })
    }

    pub fn ab(&self) -> f64 {
        self.a * self.b
    }

    pub fn delta(&self, t: f64) -> f64 {
        self.omega * t + self.phi0
    }

    /// Pre-selected oscillating state; the `|->` phase runs as `-(omega t + phi0)`.
    pub fn oscillating_state(&self) -> OscillatingPureState {
        OscillatingPureState::normalized(vec![1.0, self.a], vec![0.0, -self.omega], vec![0.0, -self.phi0])
            .expect("A > 0 gives a normalizable state")
    }

    pub fn post_state(&self) -> PureState {
        PureState::from_slice(&[C64::new(1.0, 0.0), C64::new(self.b, 0.0)]).expect("B > 0 gives a normalizable state")
    }

    /// `N1^2 (|+><+| + A^2 |-><-|)`.
    pub fn mixed_pre(&self) -> DensityOperator {
        let n = 1.0 + self.a * self.a;
        DensityOperator::from_diagonal(&[1.0 / n, self.a * self.a / n]).expect("valid diagonal mixture")
    }

    /// `N2^2 (|+><+| + B^2 |-><-|)`.
    pub fn mixed_post(&self) -> DensityOperator {
        let n = 1.0 + self.b * self.b;
        DensityOperator::from_diagonal(&[1.0 / n, self.b * self.b / n]).expect("valid diagonal mixture")
    }
}

/// Polarization weak value at phase difference `delta` for product `x = AB`,
/// as separate real and imaginary closed forms. For `x = 1` the real part is
/// exactly zero away from the pole.
fn polarization_weak_value_at(x: f64, delta: f64) -> Result<WeakValue> {
    let den = 1.0 + x * x + 2.0 * x * delta.cos();
    if (C64::new(1.0, 0.0) + C64::from_polar(x, delta)).norm() < 1e-12 {
        return Err(Error::PoleAtPhase { phase: delta });
    }
    let re = ((1.0 - x * x) / (2.0 * x)) / ((1.0 + x * x) / (2.0 * x) + delta.cos());
    let im = -2.0 * x * delta.sin() / den;
    Ok(WeakValue::new(C64::new(re, im)))
}

/// Instantaneous polarization weak value `(1 - AB e^{i delta}) / (1 + AB e^{i delta})`.
pub fn two_state_weak_value(cfg: &TwoStateConfig, t: f64) -> Result<WeakValue> {
    polarization_weak_value_at(cfg.ab(), cfg.delta(t))
}

/// Closed-form time average: `sgn(1 - A^2 B^2)`, zero at `AB = 1`.
pub fn two_state_averaged(cfg: &TwoStateConfig) -> WeakValue {
    let x = cfg.ab();
    if x == 1.0 {
        WeakValue::real(0.0)
    } else {
        WeakValue::real((1.0 - x * x).signum())
    }
}

/// Quadrature route for [`two_state_averaged`]: rectangle rule over one period
/// of `delta` with nodes symmetric about the pole at `delta = pi`, dropping any
/// node within [`PV_HALF_WIDTH`] of it. The period average does not depend on
/// `omega` or `phi0`, so the integration runs directly in the phase variable.
pub fn two_state_averaged_quadrature(cfg: &TwoStateConfig, nodes: usize) -> Result<WeakValue> {
    let x = cfg.ab();
    let window = pole_symmetric_window(0.0, 1.0, nodes)?;
    let value = try_time_average(
        |delta| {
            let from_pole = (delta - PI).rem_euclid(TAU);
            if x == 1.0 && from_pole.min(TAU - from_pole) < PV_HALF_WIDTH {
                return Ok(ZERO);
            }
            polarization_weak_value_at(x, delta).map(|w| w.value)
        },
        &window,
    )?;
    Ok(WeakValue::new(value))
}

/// Runs both routes and fails unless they agree within `tol` in each part.
pub fn two_state_averaged_checked(cfg: &TwoStateConfig, nodes: usize, tol: f64) -> Result<WeakValue> {
    let closed = two_state_averaged(cfg);
    let quad = two_state_averaged_quadrature(cfg, nodes)?;
    if (quad.re() - closed.re()).abs() > tol || quad.im().abs() > tol {
        return Err(Error::RouteDisagreement {
            quadrature: quad.re(),
            closed_form: closed.re(),
        });
    }
    Ok(closed)
}

/// Weak value with the oscillating pre-selection replaced by its mixture:
/// `(1 - A^2 B^2) / (1 + A^2 B^2)`.
pub fn two_state_mixed(cfg: &TwoStateConfig) -> WeakValue {
    let x2 = cfg.ab() * cfg.ab();
    WeakValue::real((1.0 - x2) / (1.0 + x2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminationSample {
    pub a: f64,
    pub b: f64,
    pub measured: WeakValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub a: f64,
    pub b: f64,
    pub measured: WeakValue,
    pub sgn_prediction: f64,
    pub mixed_prediction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    OscillatingPure,
    Mixed,
    Inconclusive,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::OscillatingPure => "OscillatingPure",
            VerdictKind::Mixed => "Mixed",
            VerdictKind::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub evidence: Vec<Evidence>,
    /// Largest `|measured - sgn(1 - A^2 B^2)|` over the evidence.
    pub sgn_residual: f64,
    /// Largest `|measured - (1 - A^2 B^2)/(1 + A^2 B^2)|` over the evidence.
    pub mixed_residual: f64,
}

/// Classifies one measured value against both laws.
pub fn classify(ab: f64, measured: WeakValue, verdict_tol: f64) -> VerdictKind {
    let sgn = if ab == 1.0 { 0.0 } else { (1.0 - ab * ab).signum() };
    let mixed = (1.0 - ab * ab) / (1.0 + ab * ab);
    let fits_sgn = (measured.value - C64::new(sgn, 0.0)).norm() <= verdict_tol;
    let fits_mixed = (measured.value - C64::new(mixed, 0.0)).norm() <= verdict_tol;
    match (fits_sgn, fits_mixed) {
        (true, false) => VerdictKind::OscillatingPure,
        (false, true) => VerdictKind::Mixed,
        _ => VerdictKind::Inconclusive,
    }
}

pub fn discriminate(samples: &[DiscriminationSample]) -> Result<Verdict> {
    discriminate_with(samples, VERDICT_TOL, POLE_MARGIN)
}

pub fn discriminate_with(samples: &[DiscriminationSample], verdict_tol: f64, pole_margin: f64) -> Result<Verdict> {
    let evidence: Vec<Evidence> = samples
        .iter()
        .filter(|s| (s.a * s.b - 1.0).abs() > pole_margin)
        .map(|s| {
            let x = s.a * s.b;
            Evidence {
                a: s.a,
                b: s.b,
                measured: s.measured,
                sgn_prediction: (1.0 - x * x).signum(),
                mixed_prediction: (1.0 - x * x) / (1.0 + x * x),
            }
        })
        .collect();

    let mut products: Vec<f64> = evidence.iter().map(|e| e.a * e.b).collect();
    products.sort_by(f64::total_cmp);
    products.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
    if products.len() < 3 {
        return Err(Error::InsufficientSamples {
            required: 3,
            found: products.len(),
        });
    }

    let residual = |pick: fn(&Evidence) -> f64| {
        evidence
            .iter()
            .map(|e| (e.measured.value - C64::new(pick(e), 0.0)).norm())
            .fold(0.0, f64::max)
    };
    let sgn_residual = residual(|e| e.sgn_prediction);
    let mixed_residual = residual(|e| e.mixed_prediction);
    let kind = match (sgn_residual <= verdict_tol, mixed_residual <= verdict_tol) {
        (true, false) => VerdictKind::OscillatingPure,
        (false, true) => VerdictKind::Mixed,
        _ => VerdictKind::Inconclusive,
    };
    Ok(Verdict {
        kind,
        evidence,
        sgn_residual,
        mixed_residual,
    })
}
