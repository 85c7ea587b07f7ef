//! Link budget emulation, fiber spans, and the few-mode SMF28 penalty.

use crate::error::{Result, SimError};
use crate::signal::{self, Envelope};

/// Fiber type at 850 nm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberKind {
    /// Shortwave single-mode fiber; pure distributed loss.
    Hi780,
    /// C-band telecom fiber; few-mode at 850 nm.
    Smf28,
}

/// A fiber span with distributed loss (~2 dB/km at 850 nm).
#[derive(Debug, Clone, Copy)]
pub struct FiberSpan {
    pub kind: FiberKind,
    pub length_m: f64,
    pub alpha_db_per_km: f64,
}

impl FiberSpan {
    pub fn new(kind: FiberKind, length_m: f64) -> Self {
        FiberSpan { kind, length_m, alpha_db_per_km: 2.0 }
    }

    pub fn propagation_loss_db(&self) -> f64 {
        self.alpha_db_per_km * self.length_m / 1000.0
    }
}

/// Lumped model of the SMF28→HI780 mode-filtering transition: a fixed strip
/// loss plus an incoherent background whose fraction saturates with length.
#[derive(Debug, Clone, Copy)]
pub struct FewModeModel {
    pub strip_loss_db: f64,
    /// Mode-coupling rate per meter.
    pub h_per_m: f64,
    /// Asymptotic incoherent background fraction, in [0, 0.5].
    pub bg_cap: f64,
}

impl Default for FewModeModel {
    fn default() -> Self {
        // Calibration targets, not measured claims.
        FewModeModel { strip_loss_db: 4.0, h_per_m: 0.004, bg_cap: 0.022 }
    }
}

impl FewModeModel {
    /// Fraction of the pre-strip photon rate converted to incoherent
    /// background after `length_m` of few-mode propagation. Monotone in
    /// length and bounded by `bg_cap`.
    pub fn bg_fraction(&self, length_m: f64) -> f64 {
        self.bg_cap * (1.0 - (-self.h_per_m * length_m).exp())
    }
}

/// VOA emulating the optical budget of the transmission link.
pub fn attenuate(env: &Envelope, budget_db: f64) -> Result<Envelope> {
    signal::scale_power(env, budget_db)
}

/// Propagate over one span. HI780 is pure distributed loss; SMF28 adds the
/// lumped strip loss once and an incoherent, phase-uncorrelated background
/// photon rate that is handled as a uniform Poisson rate at detection.
pub fn propagate_span(
    env: &Envelope,
    span: &FiberSpan,
    fm: &FewModeModel,
) -> Result<(Envelope, f64)> {
    if span.length_m < 0.0 || span.alpha_db_per_km < 0.0 {
        return Err(SimError::config("span length and attenuation must be non-negative"));
    }
    let after_prop = signal::scale_power(env, span.propagation_loss_db())?;
    match span.kind {
        FiberKind::Hi780 => Ok((after_prop, 0.0)),
        FiberKind::Smf28 => {
            let pre_strip_rate = after_prop.mean_photon_rate();
            let bg_rate = fm.bg_fraction(span.length_m) * pre_strip_rate;
            let out = signal::scale_power(&after_prop, fm.strip_loss_db)?;
            Ok((out, bg_rate))
        }
    }
}

/// Invert a monotone-decreasing budget→rate baseline: return the budget at
/// which the baseline rate equals `rate_observed`. Piecewise-linear in
/// log-rate, so exponential baselines interpolate exactly.
pub fn equivalent_budget(rate_observed: f64, baseline: &[(f64, f64)]) -> Result<f64> {
    if baseline.len() < 2 {
        return Err(SimError::config("baseline table needs at least two points"));
    }
    for w in baseline.windows(2) {
        if !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1) {
            return Err(SimError::config(
                "baseline must have increasing budgets and strictly decreasing rates",
            ));
        }
    }
    if rate_observed <= 0.0 {
        return Err(SimError::config("observed rate must be positive"));
    }
    let rmax = baseline.first().unwrap().1;
    let rmin = baseline.last().unwrap().1;
    if rate_observed > rmax || rate_observed < rmin {
        return Err(SimError::config(format!(
            "rate {rate_observed} outside baseline range [{rmin}, {rmax}]"
        )));
    }
    for w in baseline.windows(2) {
        let (b0, r0) = w[0];
        let (b1, r1) = w[1];
        if rate_observed <= r0 && rate_observed >= r1 {
            let f = (r0.ln() - rate_observed.ln()) / (r0.ln() - r1.ln());
            return Ok(b0 + f * (b1 - b0));
        }
    }
    unreachable!("rate bracketed above");
}
