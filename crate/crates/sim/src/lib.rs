//! Scenario runner for the ring-demodulated DPS-QKD link model: JSON
//! scenario configs, the pipeline engine, rate/QBER calibration, and the
//! figure-reproducing sweeps behind the `ringdps` CLI.

pub mod calibrate;
pub mod engine;
pub mod output;
pub mod scenario;
pub mod sweeps;
