//! Scenario engine: builds the optical pipeline once (transmitter → channel
//! → ring → static losses), then evaluates operating points either
//! analytically (per-slot click probabilities) or by Monte Carlo detection
//! with synchronization and sifting.
//!
//! Every stage after the ring is a scalar on the photon flux, so sweeps over
//! budget, residual loss, or leak fraction reuse one prepared envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ringdps_core::detector::{self, SpadParams};
use ringdps_core::keyproc::{self, KeyStats, SecurityPolicy, SiftConfig, SyncResult};
use ringdps_core::ring::{self, RingParams};
use ringdps_core::signal::{self, Envelope};
use ringdps_core::transmitter;
use ringdps_core::{Result, SimError};

use crate::scenario::ScenarioConfig;

/// Stream labels mixed into the scenario seed so the bit pattern, transmitter
/// noise, and detection draws are independent.
const STREAM_BITS: u64 = 0x01;
const STREAM_TX: u64 = 0x02;
const STREAM_DETECT: u64 = 0x03;

pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A scenario compiled to its detector-plane form: the filtered one-frame
/// envelope with all static losses applied, the accompanying incoherent
/// uniform photon rate, and the calibrated acceptance-window position.
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub bits: Vec<bool>,
    /// One frame at the detector, photon-flux normalized.
    pub envelope: Envelope,
    /// Incoherent optical photon rate at the detector (few-mode background
    /// plus demodulation leak), photons/s.
    pub uniform_rate: f64,
    pub spad: SpadParams,
    pub policy: SecurityPolicy,
    pub ring: RingParams,
    pub spp: usize,
    /// Effective symbol period on the sample grid, seconds.
    pub t_sym: f64,
    /// Acceptance-window center from the slot start, seconds.
    pub window_center_s: f64,
    /// Per-slot signal photons inside the acceptance window.
    pub window_photons: Vec<f64>,
    /// Window width, seconds.
    pub win_s: f64,
    /// Signal photons per frame at the detector.
    pub photons_per_frame: f64,
    /// Set when the VCSEL drive clipped.
    pub vcsel_clipped: bool,
}

/// One evaluated operating point.
#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub stats: KeyStats,
    pub pass: bool,
    pub secured_capacity_bps: f64,
    pub synchronized: bool,
}

impl Prepared {
    pub fn build(cfg: &ScenarioConfig) -> Result<Prepared> {
        let spec = cfg.ring.spectral_spec();
        let fitted = ring::fit_params(&spec)?;
        let dt = fitted.t_rt / 4.0;
        let n = cfg.frame.n_symbols;
        if n == 0 {
            return Err(SimError::config("frame needs at least one symbol"));
        }

        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_BITS));
        let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let frame = cfg.frame.build(bits.clone())?;

        let mut vcsel_clipped = false;
        let env = if let Some(params) = cfg.transmitter.ideal_params() {
            transmitter::encode_ideal(&frame, &params, dt, mix_seed(cfg.seed, STREAM_TX))?
        } else {
            let params = cfg.transmitter.vcsel_params().expect("transmitter is one of two kinds");
            let (drive, _ripple) = transmitter::predistort(&frame, &params, dt)?;
            let out = transmitter::vcsel_emit(&drive, &params)?;
            vcsel_clipped = out.clipped;
            let mut env = out.envelope;
            signal::normalize_total_photons(&mut env, frame.mu * n as f64)?;
            env
        };

        let spp = env.grid.count / n;
        let t_sym = spp as f64 * dt;

        // Channel: every span is a scalar loss on the coherent field; SMF28
        // spans additionally convert part of the flux into an incoherent
        // background that tracks the signal through all later losses.
        let fm = cfg.channel.few_mode.to_model();
        let mut channel_loss_db = cfg.channel.budget_db;
        let mut bg_over_sig = 0.0;
        for span_cfg in &cfg.channel.spans {
            let span = span_cfg.to_span();
            if span.length_m < 0.0 {
                return Err(SimError::config("span length must be non-negative"));
            }
            channel_loss_db += span.propagation_loss_db();
            if matches!(span.kind, ringdps_core::channel::FiberKind::Smf28) {
                // bg_fraction is defined against the pre-strip rate; express
                // it against the post-strip signal the detector sees.
                bg_over_sig +=
                    fm.bg_fraction(span.length_m) * 10f64.powf(fm.strip_loss_db / 10.0);
                channel_loss_db += fm.strip_loss_db;
            }
        }

        let detuned = RingParams { detune_hz: cfg.ring.detune_hz, ..fitted };
        let filtered = ring::filter_time_domain_steady(&env, &detuned)?;
        let total_static_db =
            channel_loss_db + cfg.ring.il_db + cfg.calibration.residual_loss_db;
        let at_detector = signal::scale_power(&filtered, total_static_db)?;

        let sig_rate = at_detector.mean_photon_rate();
        let uniform_rate = (bg_over_sig + cfg.calibration.leak_fraction) * sig_rate;
        let spad = cfg.detector.to_params()?;

        let wf = cfg.sift.window_fraction;
        if !(wf > 0.0 && wf <= 1.0) {
            return Err(SimError::config("window fraction must be in (0, 1]"));
        }
        let wlen = ((wf * spp as f64).round() as usize).max(1);
        // The analytic path works on the jitter-smeared power profile so its
        // window sums describe what the jittered detector actually collects.
        let smeared = detector::jitter_smeared_power(&at_detector, spad.jitter_sigma_s);
        let prefix = power_prefix(&smeared, dt);
        let center = best_window_center(&prefix, spp, wlen, &bits);
        let window_center_s = center as f64 * dt;
        let window_photons = per_slot_window_photons(&prefix, spp, wlen, center);
        let photons_per_frame = signal::total_photons(&at_detector);

        Ok(Prepared {
            cfg: cfg.clone(),
            bits,
            envelope: at_detector,
            uniform_rate,
            spad,
            policy: cfg.policy.to_policy(),
            ring: detuned,
            spp,
            t_sym,
            window_center_s,
            window_photons,
            win_s: wlen as f64 * dt,
            photons_per_frame,
            vcsel_clipped,
        })
    }

    pub fn frame_duration(&self) -> f64 {
        self.envelope.grid.duration()
    }

    pub fn sift_config(&self) -> SiftConfig {
        SiftConfig {
            t_sym: self.t_sym,
            window_fraction: self.cfg.sift.window_fraction,
            window_center_offset: self.t_sym / 2.0,
        }
    }

    /// Signal photon rate at the detector, photons/s.
    pub fn signal_rate(&self) -> f64 {
        self.photons_per_frame / self.frame_duration()
    }

    /// Analytic operating-point evaluation: per-slot window click
    /// probabilities (signal + uniform + darks), slot sums split into
    /// correct (`d = 1`) and erroneous (`d = 0`) clicks, and the
    /// non-paralyzable dead-time throughput factor.
    pub fn analytic(&self, extra_loss_db: f64, extra_uniform_cps: f64) -> Outcome {
        let g = 10f64.powf(-extra_loss_db / 10.0);
        let eta = self.spad.efficiency;
        let u_opt = self.uniform_rate * g + extra_uniform_cps;
        let lam_uniform = (eta * u_opt + self.spad.dark_cps) * self.win_s;

        let mut correct = 0.0;
        let mut errors = 0.0;
        for (&n_win, &d) in self.window_photons.iter().zip(&self.bits) {
            let p = 1.0 - (-(eta * n_win * g + lam_uniform)).exp();
            if d {
                correct += p;
            } else {
                errors += p;
            }
        }

        let frame_t = self.frame_duration();
        let click_rate = eta * (self.photons_per_frame * g / frame_t + u_opt)
            + self.spad.dark_cps;
        let throughput = 1.0 / (1.0 + click_rate * self.spad.dead_time_s);

        let sifted_rate = throughput * (correct + errors) / frame_t;
        let duration = frame_t * self.cfg.n_repetitions as f64;
        let n_sifted = (sifted_rate * duration).round() as u64;
        let defined = correct + errors > 0.0;
        let qber = if defined { errors / (correct + errors) } else { f64::NAN };
        let stats = KeyStats {
            n_clicks: n_sifted,
            n_sifted,
            n_errors: (qber * n_sifted as f64).round() as u64,
            qber,
            raw_rate_bps: sifted_rate,
            duration_s: duration,
            defined,
        };
        let pass = defined && qber <= self.policy.qber_threshold;
        Outcome {
            stats,
            pass,
            secured_capacity_bps: keyproc::nist_secured_capacity(sifted_rate, &self.policy),
            synchronized: true,
        }
    }

    /// Monte Carlo operating-point evaluation: click generation over
    /// `n_repetitions` frames, frame synchronization, temporal filtering,
    /// sifting.
    pub fn monte_carlo(
        &self,
        extra_loss_db: f64,
        extra_uniform_cps: f64,
        seed_offset: u64,
    ) -> Result<(Outcome, SyncResult)> {
        let g = 10f64.powf(-extra_loss_db / 10.0);
        let env = if extra_loss_db != 0.0 {
            signal::scale_power(&self.envelope, extra_loss_db)?
        } else {
            self.envelope.clone()
        };
        let u_opt = self.uniform_rate * g + extra_uniform_cps;
        let seed = mix_seed(self.cfg.seed, STREAM_DETECT.wrapping_add(seed_offset));
        let clicks =
            detector::detect_mc(&env, u_opt, &self.spad, seed, self.cfg.n_repetitions)?;
        if clicks.is_empty() {
            return Err(SimError::numerical(
                "no clicks generated; increase repetitions or reduce loss",
            ));
        }
        let period = self.frame_duration();
        let sync = keyproc::frame_sync(&clicks, period, &self.bits)?;
        let cfg = self.sift_config();
        let offset = delay_scan_offset(&clicks, sync.offset_s, self.t_sym, self.win_s);
        let kept = keyproc::temporal_filter(&clicks, &cfg, offset);
        let (stats, pass) = keyproc::sift(&kept, &self.bits, &cfg, &self.policy, offset);
        let outcome = Outcome {
            stats,
            pass,
            secured_capacity_bps: keyproc::nist_secured_capacity(
                stats.raw_rate_bps,
                &self.policy,
            ),
            synchronized: sync.synchronized,
        };
        Ok((outcome, sync))
    }

    /// Monte Carlo acquisition split into per-interval statistics.
    pub fn stability(
        &self,
        interval_s: f64,
        seed_offset: u64,
    ) -> Result<Vec<(f64, KeyStats, bool)>> {
        let seed = mix_seed(self.cfg.seed, STREAM_DETECT.wrapping_add(seed_offset));
        let clicks = detector::detect_mc(
            &self.envelope,
            self.uniform_rate,
            &self.spad,
            seed,
            self.cfg.n_repetitions,
        )?;
        let sync = keyproc::frame_sync(&clicks, self.frame_duration(), &self.bits)?;
        let cfg = self.sift_config();
        let offset = delay_scan_offset(&clicks, sync.offset_s, self.t_sym, self.win_s);
        let kept = keyproc::temporal_filter(&clicks, &cfg, offset);
        keyproc::stability_series(&kept, &self.bits, &cfg, &self.policy, offset, interval_s)
    }
}

/// Delay scan: shift the sift-window position within the slot so that the
/// windows capture the most clicks, keeping the frame alignment found by
/// synchronization. The frame-sync refinement centres on the circular mean
/// of the click distribution, which for asymmetric demodulation bursts is
/// not the throughput-optimal window position.
fn delay_scan_offset(
    clicks: &detector::ClickTrain,
    sync_offset: f64,
    t_sym: f64,
    window_s: f64,
) -> f64 {
    const NBINS: usize = 2048;
    let bin = t_sym / NBINS as f64;
    let mut hist = vec![0u64; NBINS];
    for &t in &clicks.times {
        let m = (t - sync_offset).rem_euclid(t_sym);
        hist[((m / bin) as usize).min(NBINS - 1)] += 1;
    }
    let mut prefix = vec![0u64; NBINS + 1];
    for (n, &h) in hist.iter().enumerate() {
        prefix[n + 1] = prefix[n] + h;
    }
    let total = prefix[NBINS];
    let wlen = ((window_s / bin).round() as usize).clamp(1, NBINS);
    let mut best = (0usize, 0u64);
    for c in 0..NBINS {
        let s = (c + NBINS - wlen / 2) % NBINS;
        let e = s + wlen;
        let kept = if e <= NBINS {
            prefix[e] - prefix[s]
        } else {
            (total - prefix[s]) + prefix[e - NBINS]
        };
        if kept > best.1 {
            best = (c, kept);
        }
    }
    let center = (best.0 as f64 + 0.5) * bin;
    let mut delta = center - t_sym / 2.0;
    if delta > t_sym / 2.0 {
        delta -= t_sym;
    }
    sync_offset + delta
}

/// Cumulative photon number over a sampled power profile.
fn power_prefix(power: &[f64], dt: f64) -> Vec<f64> {
    let mut prefix = vec![0.0_f64; power.len() + 1];
    for (n, &p) in power.iter().enumerate() {
        prefix[n + 1] = prefix[n] + p * dt;
    }
    prefix
}

fn window_sum(prefix: &[f64], start: isize, wlen: usize) -> f64 {
    let count = prefix.len() - 1;
    let total = prefix[count];
    let s = start.rem_euclid(count as isize) as usize;
    let e = s + wlen;
    if e <= count {
        prefix[e] - prefix[s]
    } else {
        (total - prefix[s]) + prefix[e - count]
    }
}

/// Intra-slot window position (bins from the slot start) maximizing the
/// collected flip-slot photons.
fn best_window_center(prefix: &[f64], spp: usize, wlen: usize, bits: &[bool]) -> usize {
    let step = (spp / 256).max(1);
    let mut best = (0usize, f64::NEG_INFINITY);
    for c in (0..spp).step_by(step) {
        let mut metric = 0.0;
        for (slot, &d) in bits.iter().enumerate() {
            if d {
                metric += window_sum(
                    prefix,
                    (slot * spp + c) as isize - (wlen / 2) as isize,
                    wlen,
                );
            }
        }
        if metric > best.1 {
            best = (c, metric);
        }
    }
    best.0
}

/// Windowed signal photons for every slot, windows centered `center` bins
/// after each slot start, wrapping periodically.
fn per_slot_window_photons(prefix: &[f64], spp: usize, wlen: usize, center: usize) -> Vec<f64> {
    let n_slots = (prefix.len() - 1) / spp;
    (0..n_slots)
        .map(|slot| {
            window_sum(prefix, (slot * spp + center) as isize - (wlen / 2) as isize, wlen)
        })
        .collect()
}
