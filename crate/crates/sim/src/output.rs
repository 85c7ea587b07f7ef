//! Deterministic CSV rendering for sweep and stability results. All floats
//! are formatted with fixed notation so identical runs produce byte-identical
//! files.

use ringdps_core::keyproc::KeyStats;

use crate::sweeps::{BudgetRow, FiberRow, TxRow};

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.9e}")
    }
}

pub fn budget_csv(rows: &[BudgetRow]) -> String {
    let mut s = String::from(
        "budget_db,raw_rate_bps,qber,n_sifted,pass,secured_capacity_bps\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(r.budget_db),
            fmt(r.raw_rate_bps),
            fmt(r.qber),
            r.n_sifted,
            r.pass,
            fmt(r.secured_capacity_bps)
        ));
    }
    s
}

pub fn fiber_csv(rows: &[FiberRow]) -> String {
    let mut s = String::from(
        "length_m,raw_rate_bps,qber,n_sifted,pass,equivalent_budget_db,qber_penalty\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(r.length_m),
            fmt(r.raw_rate_bps),
            fmt(r.qber),
            r.n_sifted,
            r.pass,
            fmt(r.equivalent_budget_db),
            fmt(r.qber_penalty)
        ));
    }
    s
}

pub fn tx_csv(rows: &[TxRow]) -> String {
    let mut s = String::from("transmitter,rate_baud,raw_rate_bps,qber,n_sifted,pass\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            fmt(r.rate_baud),
            fmt(r.raw_rate_bps),
            fmt(r.qber),
            r.n_sifted,
            r.pass
        ));
    }
    s
}

pub fn stability_csv(series: &[(f64, KeyStats, bool)]) -> String {
    let mut s = String::from("t_start_s,n_sifted,n_errors,qber,raw_rate_bps,pass\n");
    for (t, stats, pass) in series {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(*t),
            stats.n_sifted,
            stats.n_errors,
            fmt(stats.qber),
            fmt(stats.raw_rate_bps),
            pass
        ));
    }
    s
}

pub fn spectrum_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("detune_hz,transmission_db\n");
    for (f, t) in points {
        s.push_str(&format!("{},{}\n", fmt(*f), fmt(*t)));
    }
    s
}
