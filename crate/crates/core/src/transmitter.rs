//! Quantum-state encoders: the ideal MZM+PM chain and the directly
//! modulated, chirp-encoded VCSEL with single-pole predistortion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::signal::{self, Envelope, SymbolFrame, TimeGrid};

/// MZM pulse carver + phase modulator parameters.
#[derive(Debug, Clone, Copy)]
pub struct IdealTxParams {
    /// Finite carver extinction: inter-pulse power floor this many dB below
    /// the pulse peak. Use `f64::INFINITY` for an ideal carver.
    pub carver_extinction_db: f64,
    /// Per-symbol Gaussian phase jitter, radians.
    pub phase_error_sigma: f64,
}

impl IdealTxParams {
    pub fn ideal() -> Self {
        IdealTxParams { carver_extinction_db: f64::INFINITY, phase_error_sigma: 0.0 }
    }
}

/// Directly modulated VCSEL model.
#[derive(Debug, Clone, Copy)]
pub struct VcselParams {
    pub bias_ma: f64,
    pub threshold_ma: f64,
    /// Output photon rate per mA above threshold (normalized units).
    pub slope: f64,
    /// Adiabatic chirp coefficient, GHz of optical frequency per mA.
    pub chirp_ghz_per_ma: f64,
    /// Single-pole electro-optic bandwidth, Hz.
    pub eo_bw_hz: f64,
    /// Side-mode suppression ratio, dB (informational).
    pub smsr_db: f64,
}

impl VcselParams {
    /// Shortwave single-mode VCSEL preset: 3 mA bias, 260 MHz bandwidth.
    pub fn preset() -> Self {
        VcselParams {
            bias_ma: 3.0,
            threshold_ma: 1.0,
            slope: 1.0,
            chirp_ghz_per_ma: 0.25,
            eo_bw_hz: 260e6,
            smsr_db: 43.9,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.bias_ma > self.threshold_ma) {
            return Err(SimError::config("VCSEL bias must exceed threshold"));
        }
        if !(self.eo_bw_hz > 0.0) {
            return Err(SimError::config("VCSEL electro-optic bandwidth must be positive"));
        }
        if !(self.chirp_ghz_per_ma > 0.0) {
            return Err(SimError::config("VCSEL chirp coefficient must be positive"));
        }
        Ok(())
    }
}

/// AWG current deviation applied on top of the bias, mA per sample.
#[derive(Debug, Clone)]
pub struct DriveWaveform {
    pub grid: TimeGrid,
    pub delta_i_ma: Vec<f64>,
}

/// VCSEL output field plus a clipping flag set when the drive would have
/// taken the laser current below zero.
#[derive(Debug, Clone)]
pub struct VcselOutput {
    pub envelope: Envelope,
    pub clipped: bool,
}

/// Encode a frame with the MZM+PM chain: per-slot differential phases
/// `π·d_n`, an inter-pulse power floor at the carver extinction, and
/// optional per-symbol phase jitter.
pub fn encode_ideal(
    frame: &SymbolFrame,
    params: &IdealTxParams,
    dt: f64,
    seed: u64,
) -> Result<Envelope> {
    if !(params.carver_extinction_db > 0.0) {
        return Err(SimError::config("carver extinction must be positive"));
    }
    if params.phase_error_sigma < 0.0 {
        return Err(SimError::config("phase jitter sigma must be non-negative"));
    }
    let mut track = signal::integrate_diff_bits(&frame.diff_bits);
    if params.phase_error_sigma > 0.0 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, params.phase_error_sigma)
            .map_err(|e| SimError::config(e.to_string()))?;
        for p in &mut track.phases {
            *p += noise.sample(&mut rng);
        }
    }
    let mut env = signal::synthesize(frame, &track, dt)?;
    if params.carver_extinction_db.is_finite() {
        let peak = env
            .samples
            .iter()
            .map(|s| s.norm())
            .fold(0.0_f64, f64::max);
        let floor = peak * 10.0_f64.powf(-params.carver_extinction_db / 20.0);
        let spp = env.grid.count / frame.n_symbols;
        for n in 0..env.grid.count {
            if env.samples[n].norm() < floor {
                let slot = (n / spp).min(frame.n_symbols - 1);
                env.samples[n] = Complex64::from_polar(floor, track.phases[slot]);
            }
        }
    }
    Ok(env)
}

/// Per-symbol target instantaneous-frequency profile: a short raised-cosine
/// chirp pulse at the start of each flip slot whose discrete time integral
/// is exactly 1/2 cycle, so the phase advances by π early in the symbol and
/// then stays settled. The pulse width is limited by the drive bandwidth so
/// the inverted drive stays within the laser's linear range; a narrow pulse
/// also pushes the chirped light far enough off resonance to demodulate.
fn target_frequency(frame: &SymbolFrame, eo_bw_hz: f64, dt: f64) -> Result<(TimeGrid, Vec<f64>)> {
    let t_sym = frame.symbol_period();
    let spp_f = t_sym / dt;
    let spp = spp_f.round();
    if spp < 8.0 {
        return Err(SimError::config("fewer than 8 samples per symbol"));
    }
    if ((spp_f - spp) / spp_f).abs() > 1e-3 {
        return Err(SimError::config("dt does not divide the symbol period within 0.1%"));
    }
    let spp = spp as usize;
    let grid = TimeGrid::new(dt, spp * frame.n_symbols, 0.0)?;
    let mut nu = vec![0.0_f64; grid.count];

    let edge = (0.35 / eo_bw_hz).min(0.25 * t_sym).max(2.0 * dt);
    let width = (2.0 * edge).max(0.1 * t_sym);
    for (n, &d) in frame.diff_bits.iter().enumerate() {
        if !d {
            continue;
        }
        let start = n * spp;
        let mut area = 0.0;
        for k in 0..spp {
            let t = (k as f64 + 0.5) * dt;
            let s = if t < width { 0.5 * (1.0 - (2.0 * PI * t / width).cos()) } else { 0.0 };
            nu[start + k] = s;
            area += s * dt;
        }
        // Exact half-cycle per flip after discrete integration.
        let scale = 0.5 / area;
        for k in 0..spp {
            nu[start + k] *= scale;
        }
    }
    Ok((grid, nu))
}

/// Invert the single-pole electro-optic response so that, after the laser's
/// low-pass, the instantaneous optical frequency follows the target boxcar
/// profile. Returns the drive and the residual relative amplitude ripple of
/// the forward-simulated output power.
pub fn predistort(
    frame: &SymbolFrame,
    params: &VcselParams,
    dt: f64,
) -> Result<(DriveWaveform, f64)> {
    params.validate()?;
    let (grid, nu) = target_frequency(frame, params.eo_bw_hz, dt)?;
    let chirp_hz_per_ma = params.chirp_ghz_per_ma * 1e9;
    let beta = (-2.0 * PI * params.eo_bw_hz * dt).exp();
    let gain = 1.0 - beta;
    let mut delta_i = vec![0.0_f64; grid.count];
    let mut prev = 0.0;
    for (k, &target) in nu.iter().enumerate() {
        // Exact discrete inverse of y[k] = (1-β)·x[k] + β·y[k-1]; the dt→0
        // limit is the analog inversion ΔI = (ν + ν'/(2π f_c)) / chirp.
        delta_i[k] = (target - beta * prev) / (gain * chirp_hz_per_ma);
        prev = target;
    }
    let drive = DriveWaveform { grid, delta_i_ma: delta_i };
    let out = vcsel_emit(&drive, params)?;
    let mut pmin = f64::INFINITY;
    let mut pmax = 0.0_f64;
    let mut psum = 0.0;
    for n in 0..out.envelope.grid.count {
        let p = out.envelope.power(n);
        pmin = pmin.min(p);
        pmax = pmax.max(p);
        psum += p;
    }
    let pmean = psum / out.envelope.grid.count as f64;
    let ripple = if pmean > 0.0 { (pmax - pmin) / (2.0 * pmean) } else { 0.0 };
    Ok((drive, ripple))
}

/// Drive the laser: single-pole low-pass of the current, power from the LI
/// slope above threshold, phase from the time integral of the adiabatic
/// chirp. Currents that would go negative are clipped and flagged.
pub fn vcsel_emit(drive: &DriveWaveform, params: &VcselParams) -> Result<VcselOutput> {
    params.validate()?;
    let dt = drive.grid.dt;
    let beta = (-2.0 * PI * params.eo_bw_hz * dt).exp();
    let gain = 1.0 - beta;
    let chirp_hz_per_ma = params.chirp_ghz_per_ma * 1e9;
    let mut env = Envelope::zeros(drive.grid);
    let mut y = 0.0_f64;
    let mut phase = 0.0_f64;
    let mut clipped = false;
    for (k, &x) in drive.delta_i_ma.iter().enumerate() {
        y = gain * x + beta * y;
        let mut current = params.bias_ma + y;
        if current < 0.0 {
            current = 0.0;
            clipped = true;
        }
        let power = params.slope * (current - params.threshold_ma).max(0.0);
        phase += 2.0 * PI * chirp_hz_per_ma * (current - params.bias_ma) * dt;
        env.samples[k] = Complex64::from_polar(power.sqrt(), phase);
    }
    Ok(VcselOutput { envelope: env, clipped })
}

/// Accumulated phase of `env` across each symbol slot, radians.
pub fn per_symbol_phase_steps(env: &Envelope, n_symbols: usize) -> Vec<f64> {
    let spp = env.grid.count / n_symbols;
    let mut unwrapped = vec![0.0_f64; env.grid.count];
    let mut raw_prev = env.samples[0].arg();
    unwrapped[0] = raw_prev;
    for k in 1..env.grid.count {
        let raw = env.samples[k].arg();
        let mut d = raw - raw_prev;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        unwrapped[k] = unwrapped[k - 1] + d;
        raw_prev = raw;
    }
    (0..n_symbols)
        .map(|n| {
            let end = ((n + 1) * spp - 1).min(env.grid.count - 1);
            let start = if n == 0 { 0 } else { n * spp - 1 };
            unwrapped[end] - unwrapped[start]
        })
        .collect()
}
