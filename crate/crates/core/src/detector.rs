//! Single-photon detection: Monte Carlo click generation with dark counts,
//! Gaussian timing jitter, non-paralyzable dead time, and time-tagger
//! quantization, plus the analytic expected-probability oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Result, SimError};
use crate::signal::Envelope;

/// Detector model parameters.
#[derive(Debug, Clone, Copy)]
pub struct SpadParams {
    pub efficiency: f64,
    pub dark_cps: f64,
    /// Non-paralyzable dead time, seconds.
    pub dead_time_s: f64,
    pub jitter_sigma_s: f64,
    /// Time-tagger timestamp quantum, seconds.
    pub resolution_s: f64,
}

impl SpadParams {
    /// Green-enhanced Si SPAD: 9.5% efficiency, 212 cts/s darks, 77 ns dead.
    pub fn spad_g() -> Self {
        SpadParams {
            efficiency: 0.095,
            dark_cps: 212.0,
            dead_time_s: 77e-9,
            jitter_sigma_s: 100e-12,
            resolution_s: 1e-12,
        }
    }

    /// Red-enhanced Si SPAD: 42% efficiency, 611 cts/s darks, 50 ns dead.
    pub fn spad_r() -> Self {
        SpadParams {
            efficiency: 0.42,
            dark_cps: 611.0,
            dead_time_s: 50e-9,
            jitter_sigma_s: 100e-12,
            resolution_s: 1e-12,
        }
    }

    /// Typical C-band InGaAs comparator: 10% efficiency, 25 us dead time.
    pub fn ingaas() -> Self {
        SpadParams {
            efficiency: 0.10,
            dark_cps: 450.0,
            dead_time_s: 25e-6,
            jitter_sigma_s: 100e-12,
            resolution_s: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(SimError::config("efficiency must be in [0, 1]"));
        }
        if self.dark_cps < 0.0
            || self.dead_time_s < 0.0
            || self.jitter_sigma_s < 0.0
            || self.resolution_s < 0.0
        {
            return Err(SimError::config("detector parameters must be non-negative"));
        }
        Ok(())
    }
}

/// Sorted, dead-time-pruned click timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickTrain {
    pub times: Vec<f64>,
    pub duration: f64,
}

impl ClickTrain {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.duration
    }
}

/// Per-frame detection intensity: a normalized CDF over sample bins plus the
/// mean optical click number per frame. Built once per deterministic field
/// pattern; click sampling then repeats cheaply over frame repetitions.
#[derive(Debug, Clone)]
pub struct IntensityProfile {
    /// Cumulative per-bin expected click number (unnormalized; last entry is
    /// the per-frame mean).
    cum: Vec<f64>,
    pub mean_clicks_per_frame: f64,
    pub dt: f64,
    pub frame_duration: f64,
}

impl IntensityProfile {
    /// Expected optical clicks per bin: `η · (|E[n]|² + bg) · dt`.
    pub fn from_envelope(env: &Envelope, extra_bg_rate: f64, efficiency: f64) -> Self {
        let dt = env.grid.dt;
        let mut cum = Vec::with_capacity(env.grid.count);
        let mut acc = 0.0;
        for n in 0..env.grid.count {
            acc += efficiency * (env.power(n) + extra_bg_rate) * dt;
            cum.push(acc);
        }
        IntensityProfile {
            mean_clicks_per_frame: acc,
            cum,
            dt,
            frame_duration: env.grid.duration(),
        }
    }

    fn sample_time(&self, u: f64, rng: &mut impl Rng) -> f64 {
        let target = u * self.mean_clicks_per_frame;
        let bin = self.cum.partition_point(|&c| c < target);
        let bin = bin.min(self.cum.len() - 1);
        (bin as f64 + rng.gen::<f64>()) * self.dt
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over (seed, index) so repetitions are independent streams.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson_draw(mean: f64, rng: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Monte Carlo detection of `n_repetitions` consecutive frames, each an
/// independent physical transmission of the same deterministic field.
/// Deterministic given `(seed, repetition index)`.
pub fn detect_mc(
    env: &Envelope,
    extra_bg_rate: f64,
    spad: &SpadParams,
    seed: u64,
    n_repetitions: u64,
) -> Result<ClickTrain> {
    spad.validate()?;
    if n_repetitions == 0 {
        return Err(SimError::config("need at least one repetition"));
    }
    let profile = IntensityProfile::from_envelope(env, extra_bg_rate, spad.efficiency);
    detect_mc_profile(&profile, 0.0, spad, seed, n_repetitions)
}

/// Sampling core shared by `detect_mc` and the scenario engine. The profile
/// carries the optical intensity; `extra_uniform_cps` is an additional
/// uniform click rate (already at the detector, like dark counts).
pub fn detect_mc_profile(
    profile: &IntensityProfile,
    extra_uniform_cps: f64,
    spad: &SpadParams,
    seed: u64,
    n_repetitions: u64,
) -> Result<ClickTrain> {
    spad.validate()?;
    let frame_t = profile.frame_duration;
    let uniform_mean = (spad.dark_cps + extra_uniform_cps) * frame_t;
    let expected = ((profile.mean_clicks_per_frame + uniform_mean) * n_repetitions as f64) as usize;
    let mut times: Vec<f64> = Vec::with_capacity(expected + 64);

    for rep in 0..n_repetitions {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, rep));
        let base = rep as f64 * frame_t;
        let n_opt = poisson_draw(profile.mean_clicks_per_frame, &mut rng);
        for _ in 0..n_opt {
            let u: f64 = rng.gen();
            let mut t = profile.sample_time(u, &mut rng);
            if spad.jitter_sigma_s > 0.0 {
                let jitter = Normal::new(0.0, spad.jitter_sigma_s).unwrap();
                t += jitter.sample(&mut rng);
            }
            times.push(base + t);
        }
        let n_uni = poisson_draw(uniform_mean, &mut rng);
        for _ in 0..n_uni {
            times.push(base + rng.gen::<f64>() * frame_t);
        }
    }

    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if spad.resolution_s > 0.0 {
        for t in &mut times {
            *t = (*t / spad.resolution_s).round() * spad.resolution_s;
        }
    }
    prune_dead_time(&mut times, spad.dead_time_s);
    Ok(ClickTrain { times, duration: frame_t * n_repetitions as f64 })
}

/// Non-paralyzable dead-time pruning of a sorted timestamp list: a click is
/// kept only if it is strictly later than the last kept click and at least
/// the dead time after it. Idempotent.
pub fn prune_dead_time(times: &mut Vec<f64>, dead_time_s: f64) {
    let mut last = f64::NEG_INFINITY;
    times.retain(|&t| {
        if t > last && t - last >= dead_time_s {
            last = t;
            true
        } else {
            false
        }
    });
}

/// Analytic per-slot click probabilities (no dead time): the variance
/// reduction oracle for the Monte Carlo chain. The window of width
/// `window_fraction · t_sym` is centered `window_center_s` after each slot
/// start and wraps periodically across the frame.
pub fn detect_expected(
    env: &Envelope,
    extra_bg_rate: f64,
    spad: &SpadParams,
    t_sym: f64,
    window_fraction: f64,
    window_center_s: f64,
) -> Result<Vec<f64>> {
    spad.validate()?;
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(SimError::config("window fraction must be in (0, 1]"));
    }
    let count = env.grid.count;
    let dt = env.grid.dt;
    let spp = (t_sym / dt).round() as usize;
    if spp == 0 || count % spp != 0 {
        return Err(SimError::config("slot period must align with the envelope grid"));
    }
    let n_slots = count / spp;
    let wlen = ((window_fraction * spp as f64).round() as usize).max(1);
    let win_s = wlen as f64 * dt;
    let center_bins = (window_center_s / dt).round() as isize;

    let mut prefix = vec![0.0_f64; count + 1];
    for n in 0..count {
        prefix[n + 1] = prefix[n] + env.power(n) * dt;
    }
    let total = prefix[count];
    let window_photons = |start: isize| -> f64 {
        let s = start.rem_euclid(count as isize) as usize;
        let e = s + wlen;
        if e <= count {
            prefix[e] - prefix[s]
        } else {
            (total - prefix[s]) + prefix[e - count]
        }
    };

    let uniform = spad.efficiency * extra_bg_rate * win_s + spad.dark_cps * win_s;
    let mut probs = Vec::with_capacity(n_slots);
    for slot in 0..n_slots {
        let start = slot as isize * spp as isize + center_bins - (wlen / 2) as isize;
        let n_window = window_photons(start);
        probs.push(1.0 - (-(spad.efficiency * n_window + uniform)).exp());
    }
    Ok(probs)
}

/// Closed-form observed rate of a non-paralyzable detector: `R / (1 + R·τ)`.
pub fn dead_time_observed_rate(rate_true: f64, dead_time_s: f64) -> f64 {
    rate_true / (1.0 + rate_true * dead_time_s)
}

/// Optical power profile convolved with the Gaussian timing-jitter kernel
/// (periodic over the frame): what a jittered detector effectively samples.
/// Total photon number is preserved; tiny negative FFT residues are clamped.
pub fn jitter_smeared_power(env: &Envelope, sigma_s: f64) -> Vec<f64> {
    let n = env.grid.count;
    let mut power: Vec<num_complex::Complex64> = (0..n)
        .map(|k| num_complex::Complex64::new(env.power(k), 0.0))
        .collect();
    if sigma_s <= 0.0 {
        return power.into_iter().map(|c| c.re).collect();
    }
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut power);
    let df = 1.0 / (n as f64 * env.grid.dt);
    for (k, bin) in power.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 * df } else { (k as f64 - n as f64) * df };
        let w = 2.0 * std::f64::consts::PI * f * sigma_s;
        *bin *= (-0.5 * w * w).exp();
    }
    planner.plan_fft_inverse(n).process(&mut power);
    let scale = 1.0 / n as f64;
    power.into_iter().map(|c| (c.re * scale).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Envelope, TimeGrid};

    fn flat_envelope(rate_photons_per_s: f64, duration: f64, bins: usize) -> Envelope {
        let grid = TimeGrid::new(duration / bins as f64, bins, 0.0).unwrap();
        let mut env = Envelope::zeros(grid);
        let amp = rate_photons_per_s.sqrt();
        for s in &mut env.samples {
            *s = num_complex::Complex64::new(amp, 0.0);
        }
        env
    }

    #[test]
    fn dark_only_mean_counts() {
        let env = flat_envelope(0.0, 10.0, 1024);
        let mut spad = SpadParams::spad_g();
        spad.efficiency = 0.0;
        spad.dead_time_s = 0.0;
        let clicks = detect_mc(&env, 0.0, &spad, 17, 1).unwrap();
        // Poisson(2120): 4σ window.
        let n = clicks.len() as f64;
        assert!((n - 2120.0).abs() < 4.0 * 2120f64.sqrt(), "{n} counts");
    }

    #[test]
    fn dark_only_poisson_statistics() {
        // 100 trials of 10 s: sample mean within 3σ, variance consistent
        // with Poisson via a chi-square bound at the 1% level.
        let env = flat_envelope(0.0, 10.0, 64);
        let mut spad = SpadParams::spad_g();
        spad.efficiency = 0.0;
        spad.dead_time_s = 0.0;
        let counts: Vec<f64> = (0..100)
            .map(|i| detect_mc(&env, 0.0, &spad, 1000 + i, 1).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / 100.0;
        let sigma_mean = (2120.0_f64 / 100.0).sqrt();
        assert!((mean - 2120.0).abs() < 3.0 * sigma_mean, "mean {mean}");
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 99.0;
        // chi2_{0.005,99} ≈ 66.5, chi2_{0.995,99} ≈ 139.0
        let stat = 99.0 * var / 2120.0;
        assert!(stat > 66.5 && stat < 139.0, "chi-square stat {stat}");
    }

    #[test]
    fn min_gap_respects_dead_time() {
        let env = flat_envelope(1e7, 1e-3, 4096);
        let spad = SpadParams { jitter_sigma_s: 0.0, ..SpadParams::spad_r() };
        let clicks = detect_mc(&env, 0.0, &spad, 3, 10).unwrap();
        assert!(clicks.len() > 10);
        for w in clicks.times.windows(2) {
            assert!(w[1] - w[0] >= spad.dead_time_s, "gap {}", w[1] - w[0]);
        }
    }

    #[test]
    fn prune_idempotent() {
        let mut times: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.73).fract() * 1e-3).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prune_dead_time(&mut times, 5e-6);
        let once = times.clone();
        prune_dead_time(&mut times, 5e-6);
        assert_eq!(once, times);
    }

    #[test]
    fn expected_zero_field_zero_darks() {
        let env = flat_envelope(0.0, 1e-6, 1000);
        let mut spad = SpadParams::spad_r();
        spad.dark_cps = 0.0;
        let p = detect_expected(&env, 0.0, &spad, 1e-8, 0.2, 5e-9).unwrap();
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn expected_closed_form_slot() {
        // Slot with 0.01 photons in window at 42% efficiency.
        let t_sym = 1e-8;
        let env = flat_envelope(0.01 / (0.2 * t_sym), t_sym, 1000);
        let mut spad = SpadParams::spad_r();
        spad.dark_cps = 0.0;
        let p = detect_expected(&env, 0.0, &spad, t_sym, 0.2, t_sym / 2.0).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 4.1912e-3).abs() < 1e-6, "p = {}", p[0]);
    }

    #[test]
    fn expected_saturates_at_one() {
        let t_sym = 1e-8;
        let env = flat_envelope(1e12, t_sym, 1000);
        let mut spad = SpadParams::spad_r();
        spad.efficiency = 1.0;
        spad.dark_cps = 0.0;
        let p = detect_expected(&env, 0.0, &spad, t_sym, 0.2, t_sym / 2.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mc_matches_expected_over_repetitions() {
        // Cross-oracle: mean click count from the Monte Carlo path within 4σ
        // of the analytic per-slot probabilities.
        let t_sym = 2e-9;
        let n_slots = 64;
        let env = flat_envelope(5e5, t_sym * n_slots as f64, 64 * 128);
        let spad = SpadParams {
            dark_cps: 0.0,
            dead_time_s: 0.0,
            jitter_sigma_s: 0.0,
            ..SpadParams::spad_r()
        };
        let reps = 100_000;
        let clicks = detect_mc(&env, 0.0, &spad, 77, reps).unwrap();
        let p = detect_expected(&env, 0.0, &spad, t_sym, 1.0, t_sym / 2.0).unwrap();
        let expect_per_frame: f64 = p.iter().sum();
        let mean = clicks.len() as f64 / reps as f64;
        let sigma = (expect_per_frame / reps as f64).sqrt();
        assert!((mean - expect_per_frame).abs() < 4.0 * sigma, "{mean} vs {expect_per_frame}");
    }

    #[test]
    fn dead_time_closed_form_cases() {
        assert_eq!(dead_time_observed_rate(1e5, 0.0), 1e5);
        let r = dead_time_observed_rate(1e5, 77e-9);
        assert!((r - 99_235.8).abs() < 0.1, "{r}");
        let sat = dead_time_observed_rate(1e15, 77e-9);
        assert!((sat * 77e-9 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mc_rate_matches_dead_time_closed_form() {
        // Homogeneous input at a rate where dead time bites; compare the
        // observed Monte Carlo rate against R/(1+Rτ) within 3σ.
        let true_rate = 2e6;
        let duration = 0.5;
        let env = flat_envelope(true_rate, duration, 1 << 16);
        let spad = SpadParams {
            efficiency: 1.0,
            dark_cps: 0.0,
            dead_time_s: 77e-9,
            jitter_sigma_s: 0.0,
            resolution_s: 1e-12,
        };
        let clicks = detect_mc(&env, 0.0, &spad, 5, 1).unwrap();
        let expect = dead_time_observed_rate(true_rate, spad.dead_time_s) * duration;
        let n = clicks.len() as f64;
        assert!((n - expect).abs() < 3.0 * expect.sqrt(), "{n} vs {expect}");
    }

    #[test]
    fn jitter_free_clicks_land_in_generating_slot() {
        // One bright slot out of 16; with zero jitter and fine resolution
        // every click must fall inside that slot.
        let t_sym = 2e-9;
        let n_slots = 16;
        let bins = n_slots * 64;
        let grid = TimeGrid::new(t_sym * n_slots as f64 / bins as f64, bins, 0.0).unwrap();
        let mut env = Envelope::zeros(grid);
        for n in 5 * 64..6 * 64 {
            env.samples[n] = num_complex::Complex64::new(1e5, 0.0);
        }
        let spad = SpadParams {
            efficiency: 1.0,
            dark_cps: 0.0,
            dead_time_s: 0.0,
            jitter_sigma_s: 0.0,
            resolution_s: 1e-15,
        };
        let clicks = detect_mc(&env, 0.0, &spad, 21, 2000).unwrap();
        assert!(clicks.len() > 100);
        for &t in &clicks.times {
            let slot = ((t % (t_sym * n_slots as f64)) / t_sym).floor() as usize;
            assert_eq!(slot, 5, "click at {t}");
        }
    }

    #[test]
    fn jitter_smearing_conserves_photons_and_spreads() {
        let grid = TimeGrid::new(1e-12, 4096, 0.0).unwrap();
        let mut env = Envelope::zeros(grid);
        // Narrow burst in the middle.
        for n in 2000..2020 {
            env.samples[n] = num_complex::Complex64::new(1e6, 0.0);
        }
        let total_before = (0..4096).map(|n| env.power(n) * 1e-12).sum::<f64>();
        let smeared = jitter_smeared_power(&env, 100e-12);
        let total_after = smeared.iter().map(|p| p * 1e-12).sum::<f64>();
        assert!((total_after - total_before).abs() / total_before < 1e-9);
        // Energy leaks out of the original support.
        let outside: f64 = smeared[..1900].iter().chain(&smeared[2120..]).sum();
        assert!(outside > 0.0);
        // Zero sigma is the identity.
        let same = jitter_smeared_power(&env, 0.0);
        for n in 0..4096 {
            assert!((same[n] - env.power(n)).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let env = flat_envelope(1e6, 1e-4, 4096);
        let spad = SpadParams::spad_r();
        let a = detect_mc(&env, 0.0, &spad, 123, 50).unwrap();
        let b = detect_mc(&env, 0.0, &spad, 123, 50).unwrap();
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn prune_keeps_min_gap_and_first_click(
            mut times in proptest::collection::vec(0.0f64..1e-3, 1..400),
            tau_ns in 1.0f64..10_000.0,
        ) {
            let tau = tau_ns * 1e-9;
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let original = times.clone();
            prune_dead_time(&mut times, tau);
            proptest::prop_assert_eq!(times[0], original[0]);
            proptest::prop_assert!(times.windows(2).all(|w| w[1] - w[0] >= tau));
            proptest::prop_assert!(times.iter().all(|t| original.contains(t)));
        }

        #[test]
        fn observed_rate_below_true_rate(rate in 1.0f64..1e8, tau_ns in 0.0f64..1e5) {
            let obs = dead_time_observed_rate(rate, tau_ns * 1e-9);
            proptest::prop_assert!(obs <= rate);
            proptest::prop_assert!(obs > 0.0);
            if tau_ns > 0.0 {
                // Saturation bound: never more than one click per dead time.
                proptest::prop_assert!(obs <= 1.0 / (tau_ns * 1e-9));
            }
        }
    }
}
