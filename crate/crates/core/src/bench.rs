//! Built-in heat-shock reproduction suite: reduced and full-model
//! sensitivities of `x3` and `x1` against their closed forms.

use std::sync::Arc;

use crate::error::Result;
use crate::network::models::heat_shock;
use crate::network::OutputFunction;
use crate::report::{line, num};
use crate::sensitivity::{full_vs_reduced_report, CfdConfig, Comparison};
use crate::stats::Z95;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// N in {50, 200}: minutes on a laptop.
    Desk,
    /// Adds N = 10^4; long running.
    Paper,
}

impl Scale {
    pub fn n_list(self) -> &'static [f64] {
        match self {
            Scale::Desk => &[50.0, 200.0],
            Scale::Paper => &[50.0, 200.0, 1e4],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub scale: Scale,
    pub seed: u64,
    pub v0: i64,
    pub theta: f64,
    pub h: f64,
    pub t: f64,
    pub target_rel_halfwidth: f64,
}

impl BenchConfig {
    pub fn new(scale: Scale, seed: u64) -> Self {
        Self {
            scale,
            seed,
            v0: 20,
            theta: 1.0,
            h: 0.01,
            t: 1.0,
            target_rel_halfwidth: 0.05,
        }
    }
}

/// `d/dθ E X̂₃(t)` for the reduced heat-shock model: a linear death process
/// for `v = S1 + S2` at rate `κ v` with `κ = 5θ/(2+θ)`.
pub fn reduced_x3_sensitivity(v0: i64, theta: f64, t: f64) -> f64 {
    let kappa = 5.0 * theta / (2.0 + theta);
    let dkappa = 10.0 / (2.0 + theta).powi(2);
    v0 as f64 * t * dkappa * (-kappa * t).exp()
}

/// `d/dθ E[2 v(t)/(2+θ)]`, the averaged `x1` output.
pub fn reduced_x1_sensitivity(v0: i64, theta: f64, t: f64) -> f64 {
    let kappa = 5.0 * theta / (2.0 + theta);
    let dkappa = 10.0 / (2.0 + theta).powi(2);
    let decay = v0 as f64 * (-kappa * t).exp();
    decay * (-2.0 / (2.0 + theta).powi(2) - 2.0 / (2.0 + theta) * t * dkappa)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    pub f: &'static str,
    pub analytic: f64,
    pub comparison: Comparison,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub entries: Vec<SuiteEntry>,
}

pub fn run_heatshock(cfg: &BenchConfig) -> Result<BenchResult> {
    let net = heat_shock(cfg.v0);
    let shared = Arc::new(net);
    let cfd = CfdConfig::new(cfg.theta, cfg.h, cfg.t, cfg.target_rel_halfwidth, cfg.seed);
    let mut entries = Vec::new();
    for (name, coord, analytic) in [
        ("x3", 2, reduced_x3_sensitivity(cfg.v0, cfg.theta, cfg.t)),
        ("x1", 0, reduced_x1_sensitivity(cfg.v0, cfg.theta, cfg.t)),
    ] {
        let f = OutputFunction::coordinate(3, coord);
        let comparison = full_vs_reduced_report(shared.clone(), &f, &cfd, cfg.scale.n_list())?;
        entries.push(SuiteEntry {
            f: name,
            analytic,
            comparison,
        });
    }
    Ok(BenchResult {
        config: cfg.clone(),
        entries,
    })
}

impl BenchResult {
    pub fn converged(&self) -> bool {
        self.entries.iter().all(|e| {
            e.comparison.reduced.converged && e.comparison.rows.iter().all(|r| r.full.converged)
        })
    }

    /// Everything except wall-clock times; byte-identical for a fixed seed.
    pub fn results_csv(&self) -> String {
        let mut out = line([
            "suite",
            "f",
            "method",
            "N",
            "value",
            "halfwidth95",
            "samples",
            "events",
            "converged",
            "reference",
            "gap",
            "gap_halfwidth95",
            "event_ratio",
        ]);
        for e in &self.entries {
            let red = &e.comparison.reduced;
            out += &line([
                "heatshock",
                e.f,
                "analytic",
                "",
                &num(e.analytic),
                &num(0.0),
                "0",
                "0",
                "true",
                "",
                "",
                "",
                "",
            ]);
            out += &line([
                "heatshock".to_string(),
                e.f.to_string(),
                red.method.to_string(),
                String::new(),
                num(red.value),
                num(red.halfwidth95),
                red.samples.to_string(),
                red.events.to_string(),
                red.converged.to_string(),
                num(e.analytic),
                num((red.value - e.analytic).abs()),
                num(red.halfwidth95),
                String::new(),
            ]);
            for row in &e.comparison.rows {
                let full = &row.full;
                out += &line([
                    "heatshock".to_string(),
                    e.f.to_string(),
                    full.method.to_string(),
                    num(row.n),
                    num(full.value),
                    num(full.halfwidth95),
                    full.samples.to_string(),
                    full.events.to_string(),
                    full.converged.to_string(),
                    num(red.value),
                    num(row.gap),
                    num(Z95 * row.gap_se),
                    num(full.events as f64 / red.events.max(1) as f64),
                ]);
            }
        }
        out
    }

    /// Wall-clock times and the full/reduced speedup; machine dependent.
    pub fn timings_csv(&self) -> String {
        let mut out = line(["f", "method", "N", "wall_seconds", "speedup"]);
        for e in &self.entries {
            let red = &e.comparison.reduced;
            out += &line([
                e.f.to_string(),
                red.method.to_string(),
                String::new(),
                num(red.wall_seconds),
                num(1.0),
            ]);
            for row in &e.comparison.rows {
                out += &line([
                    e.f.to_string(),
                    row.full.method.to_string(),
                    num(row.n),
                    num(row.full.wall_seconds),
                    num(row.full.wall_seconds / red.wall_seconds.max(f64::MIN_POSITIVE)),
                ]);
            }
        }
        out
    }

    /// Two-column `N gap` data for one output, gnuplot style.
    pub fn gap_data(&self, f: &str) -> Option<String> {
        let e = self.entries.iter().find(|e| e.f == f)?;
        let mut out = format!("# heatshock f={f}: |S^N - S_reduced| against N\n# N gap\n");
        for row in &e.comparison.rows {
            out += &format!("{} {}\n", num(row.n), num(row.gap));
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let e = (-5.0f64 / 3.0).exp();
        assert!((reduced_x3_sensitivity(20, 1.0, 1.0) - 200.0 / 9.0 * e).abs() < 1e-12);
        assert!(
            (reduced_x1_sensitivity(20, 1.0, 1.0) - (-40.0 / 9.0 - 400.0 / 27.0) * e).abs() < 1e-12
        );
        // Central differences of the closed-form means.
        let mean3 = |th: f64| 20.0 * (1.0 - (-5.0 * th / (2.0 + th)).exp());
        let mean1 = |th: f64| 2.0 / (2.0 + th) * 20.0 * (-5.0 * th / (2.0 + th)).exp();
        let d = 1e-6;
        assert!(
            ((mean3(1.0 + d) - mean3(1.0 - d)) / (2.0 * d) - reduced_x3_sensitivity(20, 1.0, 1.0))
                .abs()
                < 1e-7
        );
        assert!(
            ((mean1(1.0 + d) - mean1(1.0 - d)) / (2.0 * d) - reduced_x1_sensitivity(20, 1.0, 1.0))
                .abs()
                < 1e-7
        );
    }
}
