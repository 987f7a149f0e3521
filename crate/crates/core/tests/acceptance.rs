//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines are always printed.
//! Long-running variants (N = 10^4) run only with `--ignored`,
//! `--include-ignored` or `MSSA_ACCEPTANCE_LONG=1`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mssa::bench::{reduced_x1_sensitivity, reduced_x3_sensitivity};
use mssa::network::models::{birth_death, heat_shock, three_scale_chain};
use mssa::network::OutputFunction;
use mssa::oracle::{adaptive_simpson, equivalence_check, mismatch_probability, BetaSystem, Oracle};
use mssa::reduction::ReducedNetwork;
use mssa::sensitivity::{
    cfd_reduced, full_vs_reduced_report, steady_state_sensitivity, CfdConfig, SteadyMode,
};

const SEED: u64 = 42;

const X3_REFERENCE: f64 = 4.1972;
const X1_REFERENCE: f64 = -3.6374;
const BIAS_ALLOWANCE: f64 = 0.03;
const GAP_LIMIT_N200: f64 = 0.25;
const GAP_TARGET_REL_HALFWIDTH: f64 = 0.02;
const EQUIVALENCE_SAMPLES: u64 = 10_000;
const THETA_SUM_TOL: f64 = 1e-12;
const SURVIVAL_TOL: f64 = 1e-8;
const IDENTITY_PROBES: usize = 50;
const BETA_MC_PATHS: u64 = 100_000;
const CLOSED_FORM_TOL: f64 = 1e-10;
const KERNEL_REL_LIMIT: f64 = 1e-3;
const DEVIATION_SCALE: f64 = 10.0;
const STEADY_ANALYTIC_TOL: f64 = 1e-8;
const MISMATCH_SLACK: f64 = 0.1;
const MISMATCH_FIBERS: usize = 20;

type Verdict = Result<String, String>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Verdict>);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let long = args
        .iter()
        .any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("MSSA_ACCEPTANCE_LONG").is_ok_and(|v| v == "1");

    let mut criteria: Vec<Criterion> = vec![
        ("1 reduced sensitivity f=x3", Box::new(reduced_x3)),
        ("2 reduced sensitivity f=x1", Box::new(reduced_x1)),
        ("3 full-vs-reduced gap trend (desk)", Box::new(gap_trend)),
        ("4 W-process equivalence", Box::new(w_equivalence)),
        ("5 kernel identities", Box::new(kernel_identities)),
        ("6 beta ODE vs Monte Carlo", Box::new(beta_monte_carlo)),
        ("7 heat-shock closed forms", Box::new(closed_forms)),
        ("8 averaging limits", Box::new(averaging_limits)),
        ("9 steady-state sensitivity", Box::new(steady_state)),
        ("10 coupling mismatch bound", Box::new(mismatch_bound)),
        ("11 bench determinism", Box::new(bench_determinism)),
    ];
    if long {
        criteria.push(("3L full-vs-reduced at N=1e4", Box::new(large_n_comparison)));
    }

    // A bare argument selects criteria by substring, like the libtest filter.
    let filter: Option<&String> = args.iter().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let start = std::time::Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS [{name}] {d} ({secs:.1}s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL [{name}] {d} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

fn heat_shock_reduced(v0: i64) -> ReducedNetwork {
    ReducedNetwork::new(Arc::new(heat_shock(v0))).expect("heat shock reduces")
}

fn reduced_x3() -> Verdict {
    let red = heat_shock_reduced(20);
    let est = cfd_reduced(
        &red,
        &OutputFunction::coordinate(3, 2),
        &CfdConfig::new(1.0, 0.01, 1.0, 0.05, SEED),
    )
    .map_err(|e| e.to_string())?;
    let closed = reduced_x3_sensitivity(20, 1.0, 1.0);
    check(
        est.converged && (est.value - X3_REFERENCE).abs() <= est.halfwidth95 + BIAS_ALLOWANCE,
        format!(
            "{:.4} ± {:.4} ({} samples) vs {X3_REFERENCE} ± {BIAS_ALLOWANCE}; closed form {closed:.6}",
            est.value, est.halfwidth95, est.samples
        ),
    )
}

fn reduced_x1() -> Verdict {
    let red = heat_shock_reduced(20);
    let est = cfd_reduced(
        &red,
        &OutputFunction::coordinate(3, 0),
        &CfdConfig::new(1.0, 0.01, 1.0, 0.05, SEED),
    )
    .map_err(|e| e.to_string())?;
    let closed = reduced_x1_sensitivity(20, 1.0, 1.0);
    check(
        est.converged && (est.value - X1_REFERENCE).abs() <= est.halfwidth95 + BIAS_ALLOWANCE,
        format!(
            "{:.4} ± {:.4} ({} samples) vs {X1_REFERENCE} ± {BIAS_ALLOWANCE}; closed form {closed:.6}",
            est.value, est.halfwidth95, est.samples
        ),
    )
}

fn gap_trend() -> Verdict {
    let cfg = CfdConfig::new(1.0, 0.01, 1.0, GAP_TARGET_REL_HALFWIDTH, SEED);
    let report = full_vs_reduced_report(
        Arc::new(heat_shock(20)),
        &OutputFunction::coordinate(3, 2),
        &cfg,
        &[50.0, 200.0],
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (&report.rows[0], &report.rows[1]);
    let pooled = a.full.std_error().hypot(b.full.std_error());
    let converged = report.reduced.converged && a.full.converged && b.full.converged;
    check(
        converged && b.gap <= a.gap + 3.0 * pooled && b.gap <= GAP_LIMIT_N200,
        format!(
            "reduced {:.4} ± {:.4}; N=50 {:.4} ± {:.4} gap {:.4}; N=200 {:.4} ± {:.4} gap {:.4}; pooled SE {:.4}",
            report.reduced.value,
            report.reduced.halfwidth95,
            a.full.value,
            a.full.halfwidth95,
            a.gap,
            b.full.value,
            b.full.halfwidth95,
            b.gap,
            pooled
        ),
    )
}

fn large_n_comparison() -> Verdict {
    let cfg = CfdConfig::new(1.0, 0.01, 1.0, 0.05, SEED);
    let mut details = Vec::new();
    let mut ok = true;
    for (name, coord) in [("x3", 2), ("x1", 0)] {
        let report = full_vs_reduced_report(
            Arc::new(heat_shock(20)),
            &OutputFunction::coordinate(3, coord),
            &cfg,
            &[1e4],
        )
        .map_err(|e| e.to_string())?;
        let (r, f) = (&report.reduced, &report.rows[0].full);
        ok &= (r.value - f.value).abs() <= r.halfwidth95 + f.halfwidth95;
        details.push(format!(
            "{name}: full {:.4} ± {:.4} reduced {:.4} ± {:.4}",
            f.value, f.halfwidth95, r.value, r.halfwidth95
        ));
    }
    check(ok, details.join("; "))
}

fn w_equivalence() -> Verdict {
    let red = heat_shock_reduced(5);
    let oracle = Oracle::new(&red, 1.0, 20.0);
    let eq = equivalence_check(
        &oracle,
        &OutputFunction::coordinate(3, 2),
        0.5,
        EQUIVALENCE_SAMPLES,
        SEED,
    )
    .map_err(|e| e.to_string())?;
    check(
        eq.difference.abs() <= 3.0 * eq.pooled_se,
        format!(
            "full {:.5} vs W {:.5}: |diff| {:.5} <= 3 x {:.5}",
            eq.full.mean,
            eq.w.mean,
            eq.difference.abs(),
            eq.pooled_se
        ),
    )
}

fn kernel_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let networks = [
        Arc::new(ReducedNetwork::new(Arc::new(heat_shock(20))).map_err(|e| e.to_string())?),
        Arc::new(ReducedNetwork::new(Arc::new(three_scale_chain(8))).map_err(|e| e.to_string())?),
    ];
    let (mut worst_sum, mut worst_surv) = (0.0f64, 0.0f64);
    for probe in 0..IDENTITY_PROBES {
        let red = &networks[probe % 2];
        let theta = rng.random_range(0.5..2.0);
        let n = 10f64.powf(rng.random_range(0.0..3.0));
        let t = rng.random_range(0.05..2.0);
        let v = if probe % 2 == 0 {
            let v1 = rng.random_range(1..=20);
            vec![v1, 20 - v1]
        } else {
            let ab = rng.random_range(1..=8);
            let c = rng.random_range(0..=8 - ab);
            red.representative(&[ab, c, 8 - ab - c])
                .map_err(|e| e.to_string())?;
            vec![ab, c, 8 - ab - c]
        };
        let oracle = Oracle::new(red, theta, n);
        let sys = oracle.fiber_system(&v).map_err(|e| e.to_string())?;
        let z = sys.fiber.states[rng.random_range(0..sys.fiber.len())].clone();
        let kernel = oracle.jump_kernel(&v, &z, t).map_err(|e| e.to_string())?;
        for th in &kernel.theta {
            worst_sum = worst_sum.max((th.iter().sum::<f64>() - 1.0).abs());
        }
        let integral = adaptive_simpson(
            |s| {
                oracle
                    .jump_kernel(&v, &z, s)
                    .map(|k| k.rho0)
                    .unwrap_or(f64::NAN)
            },
            0.0,
            t,
            1e-11,
        );
        worst_surv = worst_surv.max((kernel.survival - (-integral).exp()).abs());
    }
    check(
        worst_sum <= THETA_SUM_TOL && worst_surv <= SURVIVAL_TOL,
        format!("max |ΣΘ - 1| = {worst_sum:.2e}, max |Σβ - exp(-∫ρ0)| = {worst_surv:.2e} over {IDENTITY_PROBES} probes"),
    )
}

fn beta_monte_carlo() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let edges = [(0usize, 1usize), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)];
    let rates: Vec<f64> = (0..edges.len())
        .map(|_| rng.random_range(0.2..2.0))
        .collect();
    let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.5)).collect();
    let sys = BetaSystem::new(3, &edges, &rates, weights.clone(), 1.0);
    let mut worst = 0.0f64;
    for t in [0.5, 1.0] {
        let exact = sys.from_state(0, t).map_err(|e| e.to_string())?;
        let mut sum = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        for path in 0..BETA_MC_PATHS {
            let mut r = ChaCha8Rng::seed_from_u64(SEED);
            r.set_stream(path + (t * 1000.0) as u64 * BETA_MC_PATHS);
            let (mut z, mut now, mut v) = (0usize, 0.0f64, 0.0f64);
            loop {
                let out: Vec<(usize, f64)> = edges
                    .iter()
                    .zip(&rates)
                    .filter(|((i, _), _)| *i == z)
                    .map(|(&(_, j), &q)| (j, q))
                    .collect();
                let total: f64 = out.iter().map(|p| p.1).sum();
                let dt = -(1.0 - r.random::<f64>()).ln() / total;
                if now + dt >= t {
                    v += weights[z] * (t - now);
                    break;
                }
                v += weights[z] * dt;
                now += dt;
                let mut u = r.random::<f64>() * total;
                for (j, q) in &out {
                    z = *j;
                    if u < *q {
                        break;
                    }
                    u -= q;
                }
            }
            let x = (-v).exp();
            sum[z] += x;
            sq[z] += x * x;
        }
        let n = BETA_MC_PATHS as f64;
        for e in 0..3 {
            let mean = sum[e] / n;
            let se = ((sq[e] / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
            worst = worst.max((mean - exact[e]).abs() / se.max(f64::MIN_POSITIVE));
        }
    }
    check(
        worst <= 3.0,
        format!("max |MC - ODE| / SE = {worst:.2} over 3 states x 2 times"),
    )
}

fn binomial(n: i64, k: i64, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

fn closed_forms() -> Verdict {
    let red = heat_shock_reduced(30);
    let x1 = OutputFunction::coordinate(3, 0);
    let mut worst = 0.0f64;
    for theta in [0.5, 1.0, 2.0] {
        let p = theta / (2.0 + theta);
        for v1 in 0..=30i64 {
            let u = [v1, 30 - v1];
            let sol = red.solution(&u, theta).map_err(|e| e.to_string())?;
            for (z, pi) in sol.fiber.states.iter().zip(&sol.stationary.pi) {
                worst = worst.max((pi - binomial(v1, z[1], p)).abs());
            }
            let lam = 5.0 * v1 as f64 * theta / (2.0 + theta);
            worst = worst.max((sol.rates[0].0 - lam).abs() / lam.max(1.0));
            let f = red
                .averaged_function(&x1, &u, theta)
                .map_err(|e| e.to_string())?
                .0;
            worst = worst.max((f - 2.0 * v1 as f64 / (2.0 + theta)).abs() / (v1 as f64).max(1.0));
        }
    }
    check(
        worst <= CLOSED_FORM_TOL,
        format!("max deviation {worst:.2e} (π, λ̂3 and f_θ relative to scale)"),
    )
}

fn averaging_limits() -> Verdict {
    let red = heat_shock_reduced(3);
    let (theta, v, z) = (1.0, vec![3, 0], vec![3, 0, 0]);
    let sol = red.solution(&v, theta).map_err(|e| e.to_string())?;
    let lam = sol.rates[0].0;
    let mut rho_err = Vec::new();
    let mut dev = Vec::new();
    for n in [10.0, 1e2, 1e3, 1e4] {
        let oracle = Oracle::new(&red, theta, n);
        let k = oracle.jump_kernel(&v, &z, 1.0).map_err(|e| e.to_string())?;
        rho_err.push((k.rho[0] - lam).abs());
        let eps = 1.0 / f64::sqrt(n);
        let mut worst = 0.0f64;
        for i in 0..=400 {
            let t = eps + (2.0 - eps) * i as f64 / 400.0;
            let beta = oracle.beta(&v, &z, t).map_err(|e| e.to_string())?;
            let d: f64 = beta
                .iter()
                .zip(&sol.stationary.pi)
                .map(|(b, p)| (b - (-lam * t).exp() * p).abs())
                .sum();
            worst = worst.max(d);
        }
        dev.push(worst);
    }
    let decreasing = |x: &[f64]| x.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing(&rho_err)
        && decreasing(&dev)
        && rho_err[3] <= KERNEL_REL_LIMIT * lam
        && dev[3] <= DEVIATION_SCALE / 1e4;
    check(
        ok,
        format!(
            "|ρ3 - λ̂3| = {:.2e}; max ||β - e^(-λt)π||_1 = {:.2e} (N = 10, 1e2, 1e3, 1e4; λ̂3 = {lam})",
            Fmt(&rho_err),
            Fmt(&dev)
        ),
    )
}

struct Fmt<'a>(&'a [f64]);

impl std::fmt::LowerExp for Fmt<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| format!("{x:.2e}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn steady_state() -> Verdict {
    let net = birth_death(0, 2.0);
    let x = OutputFunction::coordinate(1, 0);
    let analytic =
        steady_state_sensitivity(&net, &x, 2.0, SteadyMode::Analytic { max_states: 40 }, SEED)
            .map_err(|e| e.to_string())?;
    let mode = SteadyMode::Simulated {
        t_long: 10.0,
        h: 1e-2,
        target_rel_halfwidth: 0.02,
        max_samples: 5_000_000,
    };
    let sim = steady_state_sensitivity(&net, &x, 2.0, mode, SEED).map_err(|e| e.to_string())?;
    check(
        (analytic.value - 1.0).abs() <= STEADY_ANALYTIC_TOL
            && sim.converged
            && (sim.value - 1.0).abs() <= 3.0 * sim.halfwidth95,
        format!(
            "analytic {:.12}; simulated {:.4} ± {:.4} ({} samples)",
            analytic.value, sim.value, sim.halfwidth95, sim.samples
        ),
    )
}

fn mismatch_bound() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let red = heat_shock_reduced(20);
    let mut worst_ratio = 0.0f64;
    let mut violations = 0;
    let mut cdf_violations = 0;
    let mut cases = 0;
    for _ in 0..MISMATCH_FIBERS {
        let v1 = rng.random_range(1..=20);
        let v = vec![v1, 20 - v1];
        let theta = rng.random_range(0.5..2.0);
        let n = 10f64.powf(rng.random_range(1.0..3.0));
        let t = rng.random_range(0.1..2.0);
        let kernel_at = |th: f64, z: &[i64]| -> Result<Vec<Vec<f64>>, String> {
            Ok(Oracle::new(&red, th, n)
                .jump_kernel(&v, z, t)
                .map_err(|e| e.to_string())?
                .theta)
        };
        let fiber = Oracle::new(&red, theta, n)
            .fiber_system(&v)
            .map_err(|e| e.to_string())?
            .fiber
            .clone();
        let z = fiber.states[rng.random_range(0..fiber.len())].clone();
        let base = kernel_at(theta, &z)?;
        let d = 1e-6;
        let (up, down) = (kernel_at(theta + d, &z)?, kernel_at(theta - d, &z)?);
        for h in [1e-2, 1e-3] {
            let shifted = kernel_at(theta + h, &z)?;
            for k in 0..base.len() {
                let deriv: f64 = up[k]
                    .iter()
                    .zip(&down[k])
                    .map(|(a, b)| ((a - b) / (2.0 * d)).abs())
                    .sum();
                let bound = h * deriv + MISMATCH_SLACK * h;
                let p = mismatch_probability(&base[k], &shifted[k]);
                // Diagnostic only: the CDF-difference bound Σ_l |F_θ+h(l) - F_θ(l)|.
                let cdf: f64 = base[k]
                    .iter()
                    .zip(&shifted[k])
                    .scan(0.0, |acc, (a, b)| {
                        *acc += b - a;
                        Some(acc.abs())
                    })
                    .sum();
                if p > cdf + 1e-12 {
                    cdf_violations += 1;
                }
                cases += 1;
                worst_ratio = worst_ratio.max(p / bound);
                if p > bound {
                    violations += 1;
                }
            }
        }
    }
    check(
        violations == 0,
        format!(
            "{violations}/{cases} cases exceed h·Σ|∂Θ/∂θ| + {MISMATCH_SLACK}h; worst mismatch/bound = {worst_ratio:.3}; \
             {cdf_violations}/{cases} exceed Σ|ΔF|"
        ),
    )
}

fn bench_determinism() -> Verdict {
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_mssa"))
            .args([
                "bench",
                "--suite",
                "heatshock",
                "--scale",
                "desk",
                "--seed",
                "42",
                "--out",
            ])
            .arg(d.path())
            .env_remove("MSSA_SEED")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("bench exited with {status}"));
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{} differs between runs", name.to_string_lossy()));
        }
    }
    check(
        names.len() >= 3,
        format!(
            "{} output files byte-identical across two runs",
            names.len()
        ),
    )
}
