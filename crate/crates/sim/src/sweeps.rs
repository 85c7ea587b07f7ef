//! Figure-reproducing sweeps: raw-key rate and QBER vs optical budget, the
//! few-mode SMF28 length sweep with equivalent-budget mapping, and the
//! transmitter comparison.

use rayon::prelude::*;

use ringdps_core::channel;
use ringdps_core::{Result, SimError};

use crate::engine::{Outcome, Prepared};
use crate::scenario::ScenarioConfig;

/// How an operating point is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum EvalMode {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy)]
pub struct BudgetRow {
    pub budget_db: f64,
    pub raw_rate_bps: f64,
    pub qber: f64,
    pub n_sifted: u64,
    pub pass: bool,
    pub secured_capacity_bps: f64,
}

fn to_budget_row(budget_db: f64, out: &Outcome) -> BudgetRow {
    BudgetRow {
        budget_db,
        raw_rate_bps: out.stats.raw_rate_bps,
        qber: out.stats.qber,
        n_sifted: out.stats.n_sifted,
        pass: out.pass,
        secured_capacity_bps: out.secured_capacity_bps,
    }
}

/// Rate/QBER vs the budget-emulating VOA, everything else fixed.
pub fn sweep_budget(
    prep: &Prepared,
    budgets_db: &[f64],
    mode: EvalMode,
) -> Result<Vec<BudgetRow>> {
    budgets_db
        .par_iter()
        .enumerate()
        .map(|(idx, &b)| {
            if b < 0.0 {
                return Err(SimError::config("budget must be non-negative"));
            }
            let out = match mode {
                EvalMode::Analytic => prep.analytic(b, 0.0),
                EvalMode::MonteCarlo => prep.monte_carlo(b, 0.0, 1000 + idx as u64)?.0,
            };
            Ok(to_budget_row(b, &out))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct FiberRow {
    pub length_m: f64,
    pub raw_rate_bps: f64,
    pub qber: f64,
    pub n_sifted: u64,
    pub pass: bool,
    /// VOA budget at which the back-to-back baseline yields the same rate.
    pub equivalent_budget_db: f64,
    /// QBER at this length minus the baseline QBER at the equivalent budget.
    pub qber_penalty: f64,
}

/// SMF28 length sweep on top of the base scenario (which must not already
/// contain an SMF28 span). A zero length means no span at all, so the first
/// positive length exposes the lumped strip loss as a rate discontinuity.
pub fn sweep_fiber(
    prep: &Prepared,
    lengths_m: &[f64],
    mode: EvalMode,
) -> Result<Vec<FiberRow>> {
    let fm = prep.cfg.channel.few_mode.to_model();
    let alpha_db_per_km = 2.0;
    let sig_rate0 = prep.signal_rate();

    // Fine back-to-back baseline for the equivalent-budget inversion.
    let baseline: Vec<(f64, f64)> = (0..=1500)
        .map(|k| {
            let b = k as f64 * 0.01;
            (b, prep.analytic(b, 0.0).stats.raw_rate_bps)
        })
        .collect();

    lengths_m
        .par_iter()
        .enumerate()
        .map(|(idx, &length)| {
            if length < 0.0 {
                return Err(SimError::config("fiber length must be non-negative"));
            }
            let (extra_db, extra_uniform) = if length > 0.0 {
                let extra_db = fm.strip_loss_db + alpha_db_per_km * length / 1000.0;
                let bg_over_sig =
                    fm.bg_fraction(length) * 10f64.powf(fm.strip_loss_db / 10.0);
                let extra_uniform = bg_over_sig * sig_rate0 * 10f64.powf(-extra_db / 10.0);
                (extra_db, extra_uniform)
            } else {
                (0.0, 0.0)
            };
            let out = match mode {
                EvalMode::Analytic => prep.analytic(extra_db, extra_uniform),
                EvalMode::MonteCarlo => {
                    prep.monte_carlo(extra_db, extra_uniform, 2000 + idx as u64)?.0
                }
            };
            let rate = out
                .stats
                .raw_rate_bps
                .clamp(baseline.last().unwrap().1, baseline.first().unwrap().1);
            let equivalent = channel::equivalent_budget(rate, &baseline)?;
            let qber_penalty = out.stats.qber - prep.analytic(equivalent, 0.0).stats.qber;
            Ok(FiberRow {
                length_m: length,
                raw_rate_bps: out.stats.raw_rate_bps,
                qber: out.stats.qber,
                n_sifted: out.stats.n_sifted,
                pass: out.pass,
                equivalent_budget_db: equivalent,
                qber_penalty,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TxRow {
    pub label: String,
    pub rate_baud: f64,
    pub raw_rate_bps: f64,
    pub qber: f64,
    pub n_sifted: u64,
    pub pass: bool,
}

/// Back-to-back comparison of two transmitter scenarios (typically the
/// MZM+PM chain at 0.5 Gbaud against the VCSEL at 0.1 Gbaud) under the same
/// calibration constants.
pub fn tx_compare(
    ideal_cfg: &ScenarioConfig,
    vcsel_cfg: &ScenarioConfig,
    mode: EvalMode,
) -> Result<Vec<TxRow>> {
    let mut rows = Vec::with_capacity(2);
    for (label, cfg) in [("ideal-mzm-pm", ideal_cfg), ("vcsel", vcsel_cfg)] {
        let prep = Prepared::build(cfg)?;
        let out = match mode {
            EvalMode::Analytic => prep.analytic(0.0, 0.0),
            EvalMode::MonteCarlo => prep.monte_carlo(0.0, 0.0, 3000)?.0,
        };
        rows.push(TxRow {
            label: label.to_string(),
            rate_baud: cfg.frame.rate_baud,
            raw_rate_bps: out.stats.raw_rate_bps,
            qber: out.stats.qber,
            n_sifted: out.stats.n_sifted,
            pass: out.pass,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b2b_config() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{
                "seed": 7,
                "n_repetitions": 100000,
                "frame": {"rate_baud": 5e8, "n_symbols": 128, "duty": 0.98},
                "transmitter": {"type": "ideal-mzm-pm"},
                "channel": {"spans": [{"kind": "hi780", "length_m": 10.0}]},
                "detector": {"preset": "spad-r"},
                "calibration": {"residual_loss_db": 15.0, "leak_fraction": 0.01}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn budget_sweep_monotone_rate() {
        let prep = Prepared::build(&b2b_config()).unwrap();
        let budgets: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let rows = sweep_budget(&prep, &budgets, EvalMode::Analytic).unwrap();
        assert_eq!(rows.len(), 11);
        for w in rows.windows(2) {
            assert!(w[1].raw_rate_bps < w[0].raw_rate_bps);
            assert!(w[1].qber > w[0].qber);
        }
    }

    #[test]
    fn budget_sweep_rejects_negative() {
        let prep = Prepared::build(&b2b_config()).unwrap();
        assert!(sweep_budget(&prep, &[-1.0], EvalMode::Analytic).is_err());
    }

    #[test]
    fn fiber_sweep_discontinuity_and_equivalence() {
        let prep = Prepared::build(&b2b_config()).unwrap();
        let rows =
            sweep_fiber(&prep, &[0.0, 10.0, 256.0, 330.0], EvalMode::Analytic).unwrap();
        // Zero length sits at the baseline origin.
        assert!(rows[0].equivalent_budget_db < 0.02);
        assert!(rows[0].qber_penalty.abs() < 1e-9);
        // First insertion: rate drops by at least the strip loss.
        assert!(rows[1].raw_rate_bps < 0.5 * rows[0].raw_rate_bps);
        // Equivalent budget tracks strip + propagation loss.
        assert!((rows[3].equivalent_budget_db - 4.66).abs() < 0.1);
        // Few-mode background costs extra QBER at matched budget.
        assert!(rows[3].qber_penalty > 0.0);
    }
}
