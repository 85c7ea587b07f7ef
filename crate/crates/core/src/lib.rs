//! Physics building blocks for a desk-scale shortwave DPS-QKD link.
//!
//! The library models the full chain of a differential-phase-shift QKD link
//! whose receiver is a micro-ring resonator acting as the phase demodulator:
//!
//! * [`signal`] — time grids, photon-flux-normalized complex envelopes, and
//!   synthesis of phase-encoded weak-coherent pulse trains.
//! * [`transmitter`] — the ideal MZM+PM encoder and a directly modulated
//!   VCSEL with chirp predistortion.
//! * [`channel`] — link-budget attenuation, fiber spans, and the few-mode
//!   penalty of running 850 nm light over C-band fiber.
//! * [`ring`] — the all-pass micro-ring through-port transfer, fitted from a
//!   measured spectrum and applied in time or frequency domain.
//! * [`detector`] — Monte Carlo single-photon detection with dark counts,
//!   timing jitter, non-paralyzable dead time, and timestamp quantization.
//! * [`keyproc`] — frame synchronization, temporal filtering, sifting,
//!   QBER/raw-key statistics, and the NIST secured-capacity rule.
//!
//! Envelopes are normalized so `|E[n]|^2 * dt` is the expected photon number
//! in sample bin `n`; detection then needs no extra conversion constants.

pub mod channel;
pub mod detector;
pub mod error;
pub mod keyproc;
pub mod ring;
pub mod signal;
pub mod transmitter;

pub use error::{Result, SimError};
