//! Frame synchronization, temporal filtering, sifting, QBER/raw-key
//! statistics, the 5% security threshold, and the NIST secured-capacity
//! rule — the real-time evaluation chain behind the receiver.

use std::f64::consts::PI;

use crate::detector::ClickTrain;
use crate::error::{Result, SimError};

/// Temporal filtering and decision configuration.
#[derive(Debug, Clone, Copy)]
pub struct SiftConfig {
    /// Symbol period, seconds.
    pub t_sym: f64,
    /// Acceptance window as a fraction of the symbol width.
    pub window_fraction: f64,
    /// Window center measured from the slot start, seconds. The scenario
    /// calibrates this to the demodulation burst position.
    pub window_center_offset: f64,
}

impl SiftConfig {
    pub fn new(t_sym: f64) -> Self {
        SiftConfig { t_sym, window_fraction: 0.20, window_center_offset: t_sym / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_sym > 0.0) {
            return Err(SimError::config("symbol period must be positive"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(SimError::config("window fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Sifted-key statistics for one run or one time interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyStats {
    pub n_clicks: u64,
    pub n_sifted: u64,
    pub n_errors: u64,
    /// NaN when no bits were sifted; check `defined`.
    pub qber: f64,
    pub raw_rate_bps: f64,
    pub duration_s: f64,
    pub defined: bool,
}

/// Security policy: QBER threshold and the NIST key-consumption rule.
#[derive(Debug, Clone, Copy)]
pub struct SecurityPolicy {
    pub qber_threshold: f64,
    pub aes_key_bits: f64,
    pub chunk_bytes: f64,
}

impl Default for SecurityPolicy {
    fn default() -> Self {
        SecurityPolicy { qber_threshold: 0.05, aes_key_bits: 256.0, chunk_bytes: 64e9 }
    }
}

/// Result of circular-correlation frame synchronization.
#[derive(Debug, Clone, Copy)]
pub struct SyncResult {
    pub offset_s: f64,
    /// Peak over second-peak ratio of the circular correlation.
    pub confidence: f64,
    pub synchronized: bool,
}

const SYNC_CONFIDENCE_THRESHOLD: f64 = 2.0;

/// Find the frame offset maximizing the circular correlation between the
/// click histogram (time mod frame period, one bin per slot) and the
/// expected flip pattern, then refine to sub-slot precision with the
/// circular mean of the intra-slot click phase.
pub fn frame_sync(
    clicks: &ClickTrain,
    frame_period_s: f64,
    expected_flip_slots: &[bool],
) -> Result<SyncResult> {
    if clicks.is_empty() {
        return Err(SimError::config("cannot synchronize an empty click train"));
    }
    let n = expected_flip_slots.len();
    if n == 0 {
        return Err(SimError::config("expected flip pattern is empty"));
    }
    let t_sym = frame_period_s / n as f64;

    let mut hist = vec![0.0_f64; n];
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    for &t in &clicks.times {
        let phase = (t % frame_period_s) / t_sym;
        let bin = (phase as usize).min(n - 1);
        hist[bin] += 1.0;
        let intra = 2.0 * PI * phase.fract();
        sin_sum += intra.sin();
        cos_sum += intra.cos();
    }

    let n_flips = expected_flip_slots.iter().filter(|&&d| d).count();
    let mean = n_flips as f64 / n as f64;
    let pattern: Vec<f64> =
        expected_flip_slots.iter().map(|&d| if d { 1.0 - mean } else { -mean }).collect();

    let mut best_k = 0usize;
    let mut best = f64::NEG_INFINITY;
    let mut worst = f64::INFINITY;
    let mut corr = vec![0.0_f64; n];
    for (k, c) in corr.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &p) in pattern.iter().enumerate() {
            acc += hist[(j + k) % n] * p;
        }
        *c = acc;
        if acc > best {
            best = acc;
            best_k = k;
        }
        worst = worst.min(acc);
    }
    let mut second = f64::NEG_INFINITY;
    for (k, &c) in corr.iter().enumerate() {
        let dist = (k as isize - best_k as isize).rem_euclid(n as isize);
        if dist.min(n as isize - dist) > 1 {
            second = second.max(c);
        }
    }
    let confidence = if second > worst { (best - worst) / (second - worst) } else { f64::INFINITY };

    // Sub-slot refinement: the circular mean of the intra-slot phase is
    // independent of the coarse slot shift.
    let mean_phase = sin_sum.atan2(cos_sum).rem_euclid(2.0 * PI);
    let intra = mean_phase / (2.0 * PI) * t_sym;
    let mut delta = intra - 0.5 * t_sym;
    if delta > 0.5 * t_sym {
        delta -= t_sym;
    }
    let offset = (best_k as f64 * t_sym + delta).rem_euclid(frame_period_s);

    Ok(SyncResult {
        offset_s: offset,
        confidence,
        synchronized: confidence >= SYNC_CONFIDENCE_THRESHOLD,
    })
}

/// Keep clicks inside the acceptance window: closed interval
/// `|((t − offset) mod t_sym) − center| ≤ 0.5 · window_fraction · t_sym`.
pub fn temporal_filter(clicks: &ClickTrain, cfg: &SiftConfig, offset_s: f64) -> ClickTrain {
    let half = 0.5 * cfg.window_fraction * cfg.t_sym;
    let times = clicks
        .times
        .iter()
        .copied()
        .filter(|&t| {
            let intra = (t - offset_s).rem_euclid(cfg.t_sym);
            let mut d = (intra - cfg.window_center_offset).abs();
            d = d.min(cfg.t_sym - d);
            d <= half
        })
        .collect();
    ClickTrain { times, duration: clicks.duration }
}

/// Sift the filtered clicks against Alice's differential bits. A through-port
/// click decodes bit 1 (a phase flip); a click landing on a `d = 0` slot is
/// an error. Pass iff the QBER stays at or below the policy threshold.
pub fn sift(
    clicks: &ClickTrain,
    alice_diff_bits: &[bool],
    cfg: &SiftConfig,
    policy: &SecurityPolicy,
    offset_s: f64,
) -> (KeyStats, bool) {
    let n = alice_diff_bits.len();
    let frame_period = cfg.t_sym * n as f64;
    let mut n_errors = 0u64;
    for &t in &clicks.times {
        let slot = (((t - offset_s).rem_euclid(frame_period)) / cfg.t_sym) as usize;
        let slot = slot.min(n - 1);
        if !alice_diff_bits[slot] {
            n_errors += 1;
        }
    }
    let n_sifted = clicks.len() as u64;
    let defined = n_sifted > 0;
    let qber = if defined { n_errors as f64 / n_sifted as f64 } else { f64::NAN };
    let stats = KeyStats {
        n_clicks: clicks.len() as u64,
        n_sifted,
        n_errors,
        qber,
        raw_rate_bps: n_sifted as f64 / clicks.duration,
        duration_s: clicks.duration,
        defined,
    };
    let pass = defined && qber <= policy.qber_threshold;
    (stats, pass)
}

/// Analytic QBER from the three click-rate contributions: leak clicks (d=0
/// slots) are all erroneous, uniform dark-like clicks half erroneous.
/// Returns `None` when all rates vanish.
pub fn predict_qber(rate_signal: f64, rate_leak: f64, rate_dark_in_window: f64) -> Option<f64> {
    let total = rate_signal + rate_leak + rate_dark_in_window;
    if total <= 0.0 {
        return None;
    }
    Some((0.5 * rate_dark_in_window + rate_leak) / total)
}

/// NIST key-consumption rule: a `key_rate` of fresh key secures
/// `(key_rate / aes_key_bits) · chunk_bytes · 8` bits/s of classical data.
pub fn nist_secured_capacity(key_rate_bps: f64, policy: &SecurityPolicy) -> f64 {
    (key_rate_bps / policy.aes_key_bits) * policy.chunk_bytes * 8.0
}

/// Per-interval sift statistics over the acquisition.
pub fn stability_series(
    clicks: &ClickTrain,
    alice_diff_bits: &[bool],
    cfg: &SiftConfig,
    policy: &SecurityPolicy,
    offset_s: f64,
    interval_s: f64,
) -> Result<Vec<(f64, KeyStats, bool)>> {
    if !(interval_s > 0.0) {
        return Err(SimError::config("interval must be positive"));
    }
    let n_intervals = (clicks.duration / interval_s).round().max(1.0) as usize;
    let mut series = Vec::with_capacity(n_intervals);
    let mut idx = 0usize;
    for k in 0..n_intervals {
        let t_start = k as f64 * interval_s;
        let t_end = if k + 1 == n_intervals { clicks.duration } else { t_start + interval_s };
        let mut chunk = Vec::new();
        while idx < clicks.times.len() && clicks.times[idx] < t_end {
            chunk.push(clicks.times[idx]);
            idx += 1;
        }
        let train = ClickTrain { times: chunk, duration: t_end - t_start };
        let (stats, pass) = sift(&train, alice_diff_bits, cfg, policy, offset_s);
        series.push((t_start, stats, pass));
    }
    Ok(series)
}
