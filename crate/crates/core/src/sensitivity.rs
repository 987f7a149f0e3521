//! Parameter sensitivities of `E f(X(t))` by coupled finite differences, and
//! of stationary expectations.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinetics::{ChannelSet, Kinetics};
use crate::network::StateFunction;
use crate::reduction::{solve_stationary, Averaged, ReducedNetwork, SharedKinetics, DENSE_LIMIT};
use crate::ssa::{exp1, select, RngStream, DEFAULT_EVENT_CAP};
use crate::stats::{KahanSum, Moments};

pub const BLOCK: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    CfdFull,
    CfdReduced,
    SteadyAnalytic,
    SteadySimulated,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::CfdFull => "cfd-full",
            Method::CfdReduced => "cfd-reduced",
            Method::SteadyAnalytic => "steady-analytic",
            Method::SteadySimulated => "steady-simulated",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityEstimate {
    pub value: f64,
    pub halfwidth95: f64,
    pub h: f64,
    pub method: Method,
    pub samples: u64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub variance: f64,
    /// Reaction events simulated over all pairs (a hardware-independent cost).
    pub events: u64,
    /// False when `max_samples` was reached before the target half-width.
    pub converged: bool,
}

impl SensitivityEstimate {
    pub fn std_error(&self) -> f64 {
        self.halfwidth95 / crate::stats::Z95
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfdConfig {
    pub theta: f64,
    pub h: f64,
    pub t: f64,
    pub target_rel_halfwidth: f64,
    pub max_samples: u64,
    pub seed: u64,
    /// Difference `θ-h` against `θ+h` instead of `θ` against `θ+h`.
    pub central: bool,
}

impl CfdConfig {
    pub fn new(theta: f64, h: f64, t: f64, target_rel_halfwidth: f64, seed: u64) -> Self {
        Self {
            theta,
            h,
            t,
            target_rel_halfwidth,
            max_samples: 10_000_000,
            seed,
            central: false,
        }
    }

    fn parameters(&self) -> (f64, f64, f64) {
        if self.central {
            (self.theta - self.h, self.theta + self.h, 2.0 * self.h)
        } else {
            (self.theta, self.theta + self.h, self.h)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairEnd {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub events: u64,
    /// Residual firings that happened while the two states coincided.
    pub split_while_equal: u64,
}

/// One coupled pair: per channel a shared stream at the smaller of the two
/// rates plus one residual stream for each copy.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pair<K: Kinetics + ?Sized, R: Rng>(
    kin: &K,
    set: &ChannelSet,
    theta_lo: f64,
    theta_hi: f64,
    x0: &[i64],
    t: f64,
    rng: &mut R,
) -> Result<PairEnd> {
    let c = set.len();
    let mut lo = x0.to_vec();
    let mut hi = x0.to_vec();
    let mut full_lo = vec![0.0; kin.channels()];
    let mut full_hi = vec![0.0; kin.channels()];
    let mut rates = vec![0.0; 3 * c];
    let mut clock = KahanSum::default();
    let mut end = PairEnd {
        lo: vec![],
        hi: vec![],
        events: 0,
        split_while_equal: 0,
    };
    loop {
        kin.rates_into(&lo, theta_lo, &mut full_lo)?;
        kin.rates_into(&hi, theta_hi, &mut full_hi)?;
        let mut total = 0.0;
        for (i, (&k, &m)) in set.channels.iter().zip(&set.multipliers).enumerate() {
            let a = m * full_lo[k];
            let b = m * full_hi[k];
            let common = a.min(b);
            rates[3 * i] = common;
            rates[3 * i + 1] = a - common;
            rates[3 * i + 2] = b - common;
            total += a.max(b);
        }
        if total <= 0.0 {
            break;
        }
        let dt = exp1(rng) / total;
        if clock.peek(dt) > t {
            break;
        }
        if end.events >= DEFAULT_EVENT_CAP {
            return Err(Error::HorizonGuard {
                cap: DEFAULT_EVENT_CAP,
            });
        }
        clock.add(dt);
        let j = select(&rates, total, rng.random());
        let zeta = kin.jump(set.channels[j / 3]);
        if !j.is_multiple_of(3) && lo == hi {
            end.split_while_equal += 1;
        }
        if j % 3 != 2 {
            lo.iter_mut().zip(zeta).for_each(|(x, z)| *x += z);
        }
        if j % 3 != 1 {
            hi.iter_mut().zip(zeta).for_each(|(x, z)| *x += z);
        }
        end.events += 1;
    }
    end.lo = lo;
    end.hi = hi;
    Ok(end)
}

/// Coupled finite-difference estimate of `∂/∂θ E f_θ(X_θ(t))`, sampled in
/// blocks of [`BLOCK`] pairs until the 95% half-width is within the relative
/// target (pair `i` uses stream `i`).
pub fn cfd_estimate<K, F>(
    kin: &K,
    set: &ChannelSet,
    f: &F,
    cfg: &CfdConfig,
    method: Method,
) -> Result<SensitivityEstimate>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    if cfg.h.is_nan() || cfg.h <= 0.0 {
        return Err(Error::Value(format!("h must be positive, got {}", cfg.h)));
    }
    let start = Instant::now();
    let (theta_lo, theta_hi, denom) = cfg.parameters();
    let x0 = kin.initial_state();
    let mut moments = Moments::default();
    let mut events = 0u64;
    let mut converged = false;
    while moments.count < cfg.max_samples {
        let first = moments.count;
        let last = (first + BLOCK).min(cfg.max_samples);
        let diffs: Vec<(f64, u64)> = (first..last)
            .into_par_iter()
            .map(|id| {
                let mut rng = RngStream::new(cfg.seed, id).generator();
                let end = simulate_pair(kin, set, theta_lo, theta_hi, &x0, cfg.t, &mut rng)?;
                let d = (f.value(&end.hi, theta_hi)?.0 - f.value(&end.lo, theta_lo)?.0) / denom;
                Ok((d, end.events))
            })
            .collect::<Result<_>>()?;
        for (d, e) in diffs {
            moments.push(d);
            events += e;
        }
        if moments.count >= 2
            && moments.halfwidth95() <= cfg.target_rel_halfwidth * moments.mean.abs()
        {
            converged = true;
            break;
        }
    }
    Ok(SensitivityEstimate {
        value: moments.mean,
        halfwidth95: moments.halfwidth95(),
        h: cfg.h,
        method,
        samples: moments.count,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        variance: moments.variance(),
        events,
        converged,
    })
}

/// Full model at reference scale `gamma` with scale parameter `n`.
pub fn cfd_full<K, F>(
    kin: &K,
    gamma: num_rational::Rational64,
    n: f64,
    f: &F,
    cfg: &CfdConfig,
) -> Result<SensitivityEstimate>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    cfd_estimate(
        kin,
        &ChannelSet::at_scale(kin, gamma, n),
        f,
        cfg,
        Method::CfdFull,
    )
}

/// Limiting reduced model with the averaged output `f_θ`.
pub fn cfd_reduced<F>(
    reduced: &ReducedNetwork,
    f: &F,
    cfg: &CfdConfig,
) -> Result<SensitivityEstimate>
where
    F: StateFunction + ?Sized,
{
    let averaged = Averaged { reduced, f };
    cfd_estimate(
        reduced,
        &reduced.limit_channels(),
        &averaged,
        cfg,
        Method::CfdReduced,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub n: f64,
    pub full: SensitivityEstimate,
    /// `|S^N - Ŝ|`.
    pub gap: f64,
    /// Standard error of the gap (independent estimates).
    pub gap_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub reduced: SensitivityEstimate,
    pub rows: Vec<ComparisonRow>,
}

/// Full-model estimates at the second time-scale for every `n`, against one
/// reduced-model estimate.
pub fn full_vs_reduced_report<F>(
    network: SharedKinetics,
    f: &F,
    cfg: &CfdConfig,
    n_list: &[f64],
) -> Result<Comparison>
where
    F: StateFunction + ?Sized,
{
    let reduced = ReducedNetwork::new(network.clone())?;
    let red = cfd_reduced(&reduced, f, cfg)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let full = cfd_full(network.as_ref(), reduced.gamma2(), n, f, cfg)?;
        let gap = (full.value - red.value).abs();
        let gap_se = full.std_error().hypot(red.std_error());
        rows.push(ComparisonRow {
            n,
            full,
            gap,
            gap_se,
        });
    }
    Ok(Comparison { reduced: red, rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SteadyMode {
    /// Stationary solve on the reachable states, truncated at `max_states`.
    Analytic { max_states: usize },
    Simulated {
        t_long: f64,
        h: f64,
        target_rel_halfwidth: f64,
        max_samples: u64,
    },
}

/// `d/dθ Σ f π_θ` for a single-scale ergodic network (every channel at unit multiplier).
pub fn steady_state_sensitivity<K, F>(
    kin: &K,
    f: &F,
    theta: f64,
    mode: SteadyMode,
    seed: u64,
) -> Result<SensitivityEstimate>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    let set = ChannelSet::natural((0..kin.channels()).collect());
    match mode {
        SteadyMode::Analytic { max_states } => {
            let start = Instant::now();
            let value = stationary_derivative(kin, f, theta, max_states)?;
            Ok(SensitivityEstimate {
                value,
                halfwidth95: 0.0,
                h: 0.0,
                method: Method::SteadyAnalytic,
                samples: 1,
                wall_seconds: start.elapsed().as_secs_f64(),
                seed,
                variance: 0.0,
                events: 0,
                converged: true,
            })
        }
        SteadyMode::Simulated {
            t_long,
            h,
            target_rel_halfwidth,
            max_samples,
        } => {
            let cfg = CfdConfig {
                max_samples,
                ..CfdConfig::new(theta, h, t_long, target_rel_halfwidth, seed)
            };
            cfd_estimate(kin, &set, f, &cfg, Method::SteadySimulated)
        }
    }
}

const TRUNCATION_MASS: f64 = 1e-8;

fn stationary_derivative<K, F>(kin: &K, f: &F, theta: f64, max_states: usize) -> Result<f64>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    let x0 = kin.initial_state();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::from([(x0.clone(), 0)]);
    let mut states = vec![x0.clone()];
    let mut queue = VecDeque::from([x0]);
    let mut edges = Vec::new();
    let mut rates = Vec::new();
    let mut leaks = vec![false; 1];
    while let Some(x) = queue.pop_front() {
        let i = index[&x];
        for k in 0..kin.channels() {
            let (a, da) = kin.propensity(k, &x, theta)?;
            if a <= 0.0 {
                continue;
            }
            let y: Vec<i64> = x.iter().zip(kin.jump(k)).map(|(p, q)| p + q).collect();
            let j = match index.get(&y) {
                Some(&j) => j,
                None if states.len() < max_states => {
                    index.insert(y.clone(), states.len());
                    states.push(y.clone());
                    leaks.push(false);
                    queue.push_back(y);
                    states.len() - 1
                }
                None => {
                    leaks[i] = true;
                    continue;
                }
            };
            edges.push((i, j));
            rates.push((a, da));
        }
    }
    let st = solve_stationary(states.len(), &edges, &rates, DENSE_LIMIT)?;
    let boundary: f64 = st
        .pi
        .iter()
        .zip(&leaks)
        .filter(|(_, &l)| l)
        .map(|(p, _)| p)
        .sum();
    if boundary > TRUNCATION_MASS {
        return Err(Error::Truncation { mass: boundary });
    }
    let mut value = 0.0;
    for ((x, p), dp) in states.iter().zip(&st.pi).zip(&st.dpi) {
        let (g, dg) = f.value(x, theta)?;
        value += g * dp + dg * p;
    }
    Ok(value)
}

/// Convenience: shared handle for a network.
pub fn shared<K: Kinetics + Send + Sync + 'static>(kin: K) -> SharedKinetics {
    Arc::new(kin)
}
