//! Weighted occupation times of the fast chain and the auxiliary process that
//! jumps only at slow firings. Used to cross-check the full simulator.

mod beta;
mod quadrature;

pub use beta::{beta_solve, BetaSystem, BetaVector, DENSE_EXP_LIMIT};
pub use quadrature::adaptive_simpson;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinetics::scale_factor;
use crate::network::StateFunction;
use crate::reduction::{FiberSpace, ReducedNetwork};
use crate::ssa::{
    estimate_expectation, open_uniform, project, select, MonteCarloEstimate, RngStream,
    DEFAULT_EVENT_CAP,
};
use crate::stats::Moments;

/// Inverse-CDF selection over the fiber order: the smallest `l` with
/// `u <= Σ_{i<=l} weights_i` (falls back to the last positive entry).
pub fn digamma_sample(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last = i;
        }
        if u <= acc && w > 0.0 {
            return i;
        }
    }
    last
}

/// Exact `P(digamma_sample(a, U) != digamma_sample(b, U))` for uniform `U`.
pub fn mismatch_probability(a: &[f64], b: &[f64]) -> f64 {
    let (mut ca, mut cb) = (0.0f64, 0.0f64);
    let mut same = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let lo = ca.max(cb);
        ca += x;
        cb += y;
        same += (ca.min(cb) - lo).max(0.0);
    }
    (1.0 - same).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WState {
    /// Time since the last slow firing.
    pub tau: f64,
    pub v: Vec<i64>,
    /// Full state inside the fiber of `v`.
    pub z: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WPath {
    /// `(time, state just after the jump)`, starting with the initial state at 0.
    pub jumps: Vec<(f64, WState)>,
    pub end_time: f64,
    pub truncated: bool,
}

impl WPath {
    pub fn state_at_end(&self) -> WState {
        let (t, w) = self.jumps.last().expect("path has an initial state");
        WState {
            tau: w.tau + (self.end_time - t),
            v: w.v.clone(),
            z: w.z.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpKernel {
    pub t: f64,
    /// Parent channel of each entry below.
    pub channels: Vec<usize>,
    /// `ρ_k(t) = Σ λ_k β / Σ β` (unscaled propensities).
    pub rho: Vec<f64>,
    /// Placement law `Θ_k(t)` over the fiber states.
    pub theta: Vec<Vec<f64>>,
    /// Total jump intensity `Σ N^{β_k+γ2} ρ_k`.
    pub rho0: f64,
    pub survival: f64,
    pub beta: Vec<f64>,
}

/// Per-fiber data: the β system and the unscaled slow propensities on every state.
#[derive(Debug)]
pub struct FiberSystem {
    pub fiber: Arc<FiberSpace>,
    pub lambdas: Vec<Vec<f64>>,
    pub system: BetaSystem,
}

/// The W-process machinery for one reduction at fixed `(θ, N)`.
pub struct Oracle<'a> {
    reduced: &'a ReducedNetwork,
    pub theta: f64,
    pub n: f64,
    pub fast_multiplier: f64,
    /// Parent channels outside the fast set, with their rate multipliers at γ2.
    pub slow: Vec<usize>,
    pub slow_multipliers: Vec<f64>,
    cache: RwLock<HashMap<Vec<i64>, Arc<FiberSystem>>>,
}

impl<'a> Oracle<'a> {
    pub fn new(reduced: &'a ReducedNetwork, theta: f64, n: f64) -> Self {
        let parent = reduced.parent();
        let s = &reduced.scales;
        let slow: Vec<usize> = (0..parent.channels())
            .filter(|k| !s.fast.contains(k))
            .collect();
        let slow_multipliers = slow
            .iter()
            .map(|&k| scale_factor(n, parent.scale_exponent(k) + s.gamma2))
            .collect();
        Self {
            reduced,
            theta,
            n,
            fast_multiplier: scale_factor(n, s.gamma2 - s.gamma1),
            slow,
            slow_multipliers,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn fiber_system(&self, v: &[i64]) -> Result<Arc<FiberSystem>> {
        if let Some(s) = self.cache.read().expect("oracle lock").get(v) {
            return Ok(s.clone());
        }
        let parent = self.reduced.parent();
        let fiber = self.reduced.fiber(v)?;
        let rates: Vec<f64> = fiber
            .transition_rates(parent.as_ref(), self.theta)?
            .into_iter()
            .map(|r| r.0)
            .collect();
        let mut lambdas = Vec::with_capacity(self.slow.len());
        for &k in &self.slow {
            lambdas.push(
                fiber
                    .states
                    .iter()
                    .map(|z| parent.propensity(k, z, self.theta).map(|p| p.0))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let weights: Vec<f64> = (0..fiber.len())
            .map(|e| {
                lambdas
                    .iter()
                    .zip(&self.slow_multipliers)
                    .map(|(l, m)| m * l[e])
                    .sum()
            })
            .collect();
        let system = BetaSystem::for_fiber(&fiber, &rates, weights, self.fast_multiplier);
        let sys = Arc::new(FiberSystem {
            fiber,
            lambdas,
            system,
        });
        Ok(self
            .cache
            .write()
            .expect("oracle lock")
            .entry(v.to_vec())
            .or_insert(sys)
            .clone())
    }

    fn locate(&self, sys: &FiberSystem, z: &[i64]) -> Result<usize> {
        sys.fiber.position(z).ok_or_else(|| Error::NotErgodic {
            v: sys.fiber.v.clone(),
        })
    }

    pub fn beta(&self, v: &[i64], z: &[i64], t: f64) -> Result<Vec<f64>> {
        let sys = self.fiber_system(v)?;
        let zi = self.locate(&sys, z)?;
        sys.system.from_state(zi, t)
    }

    pub fn jump_kernel(&self, v: &[i64], z: &[i64], t: f64) -> Result<JumpKernel> {
        let sys = self.fiber_system(v)?;
        let zi = self.locate(&sys, z)?;
        let beta = sys.system.from_state(zi, t)?;
        Ok(self.kernel_from(&sys, zi, t, beta))
    }

    fn kernel_from(&self, sys: &FiberSystem, zi: usize, t: f64, beta: Vec<f64>) -> JumpKernel {
        let survival: f64 = beta.iter().sum();
        let mut rho = Vec::with_capacity(self.slow.len());
        let mut theta = Vec::with_capacity(self.slow.len());
        for lam in &sys.lambdas {
            let weighted: Vec<f64> = lam.iter().zip(&beta).map(|(l, b)| l * b).collect();
            let total: f64 = weighted.iter().sum();
            rho.push(if survival > 0.0 {
                total / survival
            } else {
                lam[zi]
            });
            if total > 0.0 {
                theta.push(weighted.iter().map(|w| w / total).collect());
            } else {
                let mut point = vec![0.0; beta.len()];
                point[zi] = 1.0;
                theta.push(point);
            }
        }
        let rho0 = rho
            .iter()
            .zip(&self.slow_multipliers)
            .map(|(r, m)| r * m)
            .sum();
        JumpKernel {
            t,
            channels: self.slow.clone(),
            rho,
            theta,
            rho0,
            survival,
            beta,
        }
    }

    /// `f^N(τ, v, z) = Σ f(e) β_e(τ) / Σ β_e(τ)`.
    pub fn lifted<F: StateFunction + ?Sized>(&self, f: &F, w: &WState) -> Result<f64> {
        let sys = self.fiber_system(&w.v)?;
        let beta = self.beta(&w.v, &w.z, w.tau)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (e, b) in sys.fiber.states.iter().zip(&beta) {
            num += f.value(e, self.theta)?.0 * b;
            den += b;
        }
        Ok(num / den)
    }

    /// One path of W on `[0, t_end]` from the initial state of the parent network.
    pub fn simulate_w(&self, t_end: f64, stream: RngStream) -> Result<WPath> {
        let mut rng = stream.generator();
        let parent = self.reduced.parent();
        let m = self.reduced.m();
        let x0 = parent.initial_state();
        let mut path = WPath {
            jumps: vec![(
                0.0,
                WState {
                    tau: 0.0,
                    v: project(m, &x0),
                    z: x0,
                },
            )],
            end_time: t_end,
            truncated: false,
        };
        let mut now = 0.0;
        loop {
            let (v, z) = {
                let w = &path.jumps.last().expect("nonempty").1;
                (w.v.clone(), w.z.clone())
            };
            let sys = self.fiber_system(&v)?;
            let zi = self.locate(&sys, &z)?;
            let remaining = t_end - now;
            let u = open_uniform(&mut rng);
            let end_beta = sys.system.from_state(zi, remaining)?;
            if end_beta.iter().sum::<f64>() > u {
                break;
            }
            if path.jumps.len() as u64 > DEFAULT_EVENT_CAP {
                path.truncated = true;
                path.end_time = now;
                break;
            }
            let (tau, beta) = self.holding_time(&sys, zi, u, remaining)?;
            let kernel = self.kernel_from(&sys, zi, tau, beta);
            let intensities: Vec<f64> = kernel
                .rho
                .iter()
                .zip(&self.slow_multipliers)
                .map(|(r, m)| r * m)
                .collect();
            let c = select(&intensities, kernel.rho0, rng.random());
            let e = digamma_sample(&kernel.theta[c], open_uniform(&mut rng));
            let k = self.slow[c];
            let next: Vec<i64> = sys.fiber.states[e]
                .iter()
                .zip(parent.jump(k))
                .map(|(a, b)| a + b)
                .collect();
            now += tau;
            path.jumps.push((
                now,
                WState {
                    tau: 0.0,
                    v: project(m, &next),
                    z: next,
                },
            ));
        }
        Ok(path)
    }

    /// Solves `Σβ(τ) = u` on `(0, t_max]` by safeguarded Newton.
    fn holding_time(
        &self,
        sys: &FiberSystem,
        zi: usize,
        u: f64,
        t_max: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (mut lo, mut hi) = (0.0, t_max);
        let mut tau = 0.5 * t_max;
        for _ in 0..200 {
            let beta = sys.system.from_state(zi, tau)?;
            let g = beta.iter().sum::<f64>() - u;
            if g > 0.0 {
                lo = tau
            } else {
                hi = tau
            }
            let slope = sys.system.survival_rate(&beta);
            if hi - lo <= 1e-10 * tau.max(1.0) || g == 0.0 {
                return Ok((tau, beta));
            }
            let newton = if slope < 0.0 {
                tau - g / slope
            } else {
                f64::NAN
            };
            tau = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (tau - lo).min(hi - tau) <= 0.0 {
                tau = 0.5 * (lo + hi);
            }
        }
        let beta = sys.system.from_state(zi, tau)?;
        Ok((tau, beta))
    }
}

/// `E f(X^N(t))` from the full simulator against `E f^N(W^N(t))` from the
/// auxiliary process; the two must agree in distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Equivalence {
    pub full: MonteCarloEstimate,
    pub w: MonteCarloEstimate,
    pub difference: f64,
    pub pooled_se: f64,
}

/// The full simulator uses `seed`, the auxiliary process `seed + 1`.
pub fn equivalence_check<F: StateFunction + ?Sized>(
    oracle: &Oracle<'_>,
    f: &F,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<Equivalence> {
    let start = std::time::Instant::now();
    let parent = oracle.reduced.parent();
    let full = estimate_expectation(
        parent.as_ref(),
        oracle.reduced.gamma2(),
        oracle.n,
        oracle.theta,
        f,
        t,
        samples,
        seed,
    )?;
    let w_seed = seed.wrapping_add(1);
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|id| {
            let path = oracle.simulate_w(t, RngStream::new(w_seed, id))?;
            oracle.lifted(f, &path.state_at_end())
        })
        .collect::<Result<_>>()?;
    let moments: Moments = values.into_iter().collect();
    let w = MonteCarloEstimate::from_moments(&moments, w_seed, start.elapsed().as_secs_f64(), 0);
    Ok(Equivalence {
        difference: full.mean - w.mean,
        pooled_se: full.std_error().hypot(w.std_error()),
        full,
        w,
    })
}
