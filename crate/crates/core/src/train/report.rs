//! CSV reports.

use std::fmt::Write as _;

use super::metrics::{Counts, Metrics};
use crate::corpus::Genre;
use crate::model::{Ablation, ContextWindow};

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn rpf(c: &Counts) -> String {
    format!("{},{},{}", pct(c.recall()), pct(c.precision()), pct(c.f_score()))
}

/// `epoch,mean_loss`, epochs numbered from 1.
pub fn loss_log_csv(epoch_losses: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in epoch_losses.iter().enumerate() {
        let _ = writeln!(out, "{},{l:.9}", i + 1);
    }
    out
}

/// Overall row then one row per genre present (in table order), R/P/F as
/// percentages with one decimal.
pub fn metrics_csv(metrics: &Metrics, ablation: Ablation) -> String {
    let mut out = String::from("ablation,source,R,P,F\n");
    let _ = writeln!(out, "{ablation},Overall,{}", rpf(&metrics.overall));
    for g in Genre::ALL {
        if let Some(c) = metrics.per_genre.get(&g) {
            let _ = writeln!(out, "{ablation},{g},{}", rpf(c));
        }
    }
    out
}

pub fn ablation_label(a: Ablation) -> &'static str {
    match a {
        Ablation::Full => "Full system",
        Ablation::GlobalOnly => "Global information only",
        Ablation::LocalOnly => "Local information only",
    }
}

pub fn ablation_csv(rows: &[(Ablation, Metrics)]) -> String {
    let mut out = String::from("system,R,P,F\n");
    for (a, m) in rows {
        let _ = writeln!(out, "{},{}", ablation_label(*a), rpf(&m.overall));
    }
    out
}

pub fn sweep_csv(rows: &[(ContextWindow, Metrics)]) -> String {
    let mut out = String::from("window,R,P,F\n");
    for (w, m) in rows {
        let _ = writeln!(out, "{w},{}", rpf(&m.overall));
    }
    out
}
