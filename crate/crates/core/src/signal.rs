//! Time grids, photon-flux-normalized envelopes, and weak-coherent pulse
//! train synthesis.
//!
//! The normalization convention used throughout: `|E[n]|^2 * dt` is the
//! expected photon number in sample bin `n`, so `|E|^2` is a photon rate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Uniform sampling grid shared by all envelope operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    /// Seconds per sample.
    pub dt: f64,
    /// Number of samples.
    pub count: usize,
    /// Start time in seconds.
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, count: usize, t0: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::config(format!("grid dt must be positive, got {dt}")));
        }
        if count == 0 {
            return Err(SimError::config("grid must have at least one sample"));
        }
        Ok(TimeGrid { dt, count, t0 })
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.count as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

/// Sampled complex baseband optical field.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub grid: TimeGrid,
    pub samples: Vec<Complex64>,
}

impl Envelope {
    pub fn zeros(grid: TimeGrid) -> Self {
        Envelope { samples: vec![Complex64::new(0.0, 0.0); grid.count], grid }
    }

    /// Instantaneous photon rate `|E[n]|^2` at sample `n`.
    pub fn power(&self, n: usize) -> f64 {
        self.samples[n].norm_sqr()
    }

    /// Mean photon arrival rate over the whole envelope, photons/s.
    pub fn mean_photon_rate(&self) -> f64 {
        total_photons(self) / self.grid.duration()
    }
}

/// Alice's differential bit pattern together with the carving parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// Symbol rate in symbols per second.
    pub rate: f64,
    pub n_symbols: usize,
    /// Carving duty cycle in (0, 1].
    pub duty: f64,
    /// Mean photons per pulse.
    pub mu: f64,
    /// Differential bits, one per symbol.
    pub diff_bits: Vec<bool>,
}

impl SymbolFrame {
    pub fn new(rate: f64, duty: f64, mu: f64, diff_bits: Vec<bool>) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(SimError::config("symbol rate must be positive"));
        }
        if !(duty > 0.0 && duty <= 1.0) {
            return Err(SimError::config(format!("duty must be in (0, 1], got {duty}")));
        }
        if !(mu >= 0.0) {
            return Err(SimError::config("mu must be non-negative"));
        }
        if diff_bits.is_empty() {
            return Err(SimError::config("frame needs at least one symbol"));
        }
        Ok(SymbolFrame { rate, n_symbols: diff_bits.len(), duty, mu, diff_bits })
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Cumulative absolute phases, one per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrack {
    /// Phase in radians per symbol, folded into [0, 2π).
    pub phases: Vec<f64>,
}

impl PhaseTrack {
    /// Recover the differential bits by pairwise differencing, with an
    /// implicit reference phase of 0 before the first symbol.
    pub fn to_diff_bits(&self) -> Vec<bool> {
        let mut prev = 0.0;
        self.phases
            .iter()
            .map(|&p| {
                let d = (p - prev).rem_euclid(2.0 * PI);
                prev = p;
                (d - PI).abs() < PI / 2.0
            })
            .collect()
    }
}

/// Accumulate differential bits into absolute phases: a `1` flips the phase
/// by π relative to the previous symbol, starting from reference phase 0.
pub fn integrate_diff_bits(diff_bits: &[bool]) -> PhaseTrack {
    let mut phases = Vec::with_capacity(diff_bits.len());
    let mut phi = 0.0_f64;
    for &d in diff_bits {
        if d {
            phi = (phi + PI).rem_euclid(2.0 * PI);
        }
        phases.push(phi);
    }
    PhaseTrack { phases }
}

/// Carved pulse shape: rectangular with raised-cosine amplitude edges.
///
/// The FWHM of the pulse is `duty` slot widths and each edge spans 10% of the
/// slot, so the rise of one pulse and the fall of its neighbour sum to unit
/// amplitude when `duty = 1` (CW limit).
fn pulse_shape(x: f64, spp: f64, duty: f64) -> f64 {
    let center = 0.5 * spp;
    let mut edge = 0.1 * spp;
    let half = 0.5 * duty * spp;
    if edge > 2.0 * half {
        edge = 2.0 * half;
    }
    let d = (x - center).abs();
    let plateau = half - 0.5 * edge;
    if d <= plateau {
        1.0
    } else if d <= half + 0.5 * edge {
        0.5 * (1.0 + (PI * (d - plateau) / edge).cos())
    } else {
        0.0
    }
}

/// Synthesize the phase-encoded weak-coherent pulse train on a grid with
/// sample spacing `dt`. Each slot carries exactly `mu` expected photons and
/// the per-slot phase from `track`. Slots wrap periodically across the frame
/// boundary so the `duty = 1` limit is a constant-magnitude field.
pub fn synthesize(frame: &SymbolFrame, track: &PhaseTrack, dt: f64) -> Result<Envelope> {
    if track.phases.len() != frame.n_symbols {
        return Err(SimError::config(format!(
            "phase track has {} entries for {} symbols",
            track.phases.len(),
            frame.n_symbols
        )));
    }
    let t_sym = frame.symbol_period();
    let spp_f = t_sym / dt;
    let spp = spp_f.round();
    if spp < 4.0 {
        return Err(SimError::config("fewer than 4 samples per symbol"));
    }
    if ((spp_f - spp) / spp_f).abs() > 1e-3 {
        return Err(SimError::config(format!(
            "dt = {dt} does not divide the symbol period {t_sym} within 0.1%"
        )));
    }
    let spp = spp as usize;
    let count = spp * frame.n_symbols;
    let grid = TimeGrid::new(dt, count, 0.0)?;
    let mut env = Envelope::zeros(grid);

    // Shape energy of one isolated pulse; forces per-slot photons to mu.
    let mut shape = vec![0.0_f64; 2 * spp];
    let mut energy = 0.0;
    for (k, s) in shape.iter_mut().enumerate() {
        // Sample positions relative to the slot start, allowing spill of the
        // raised-cosine edges into the neighbouring slots.
        let x = k as f64 - 0.5 * spp as f64;
        *s = pulse_shape(x, spp as f64, frame.duty);
        energy += *s * *s * dt;
    }
    let amp = if energy > 0.0 { (frame.mu / energy).sqrt() } else { 0.0 };

    for (n, &phi) in track.phases.iter().enumerate() {
        let field = Complex64::from_polar(amp, phi);
        let base = n as isize * spp as isize - (spp as isize) / 2;
        for (k, &s) in shape.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let idx = (base + k as isize).rem_euclid(count as isize) as usize;
            env.samples[idx] += field * s;
        }
    }
    Ok(env)
}

/// Total expected photon number `Σ |E[n]|^2 dt`.
pub fn total_photons(env: &Envelope) -> f64 {
    env.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * env.grid.dt
}

/// Attenuate the envelope by `factor_db >= 0`; the photon total scales by
/// exactly `10^(-factor_db/10)`. Gain is unsupported.
pub fn scale_power(env: &Envelope, factor_db: f64) -> Result<Envelope> {
    if factor_db < 0.0 {
        return Err(SimError::config(format!(
            "negative attenuation {factor_db} dB (gain unsupported)"
        )));
    }
    let amp = 10.0_f64.powf(-factor_db / 20.0);
    let mut out = env.clone();
    for s in &mut out.samples {
        *s *= amp;
    }
    Ok(out)
}

/// Rescale the field so the total photon number equals `target` exactly.
/// Models the launch VOA that sets the mean photon number per pulse.
pub fn normalize_total_photons(env: &mut Envelope, target: f64) -> Result<()> {
    if target < 0.0 {
        return Err(SimError::config("target photon number must be non-negative"));
    }
    let total = total_photons(env);
    if total <= 0.0 {
        if target == 0.0 {
            return Ok(());
        }
        return Err(SimError::numerical("cannot normalize a zero envelope to nonzero photons"));
    }
    let amp = (target / total).sqrt();
    for s in &mut env.samples {
        *s *= amp;
    }
    Ok(())
}
