//! Averaging out the fastest reactions: conserved coordinates, fibers, their
//! stationary laws, and the averaged (reduced) network.

mod cone;
mod fiber;
mod stationary;

pub use cone::{extreme_rays, independent_rows, rank};
pub use fiber::{enumerate_fiber, find_representative, FiberSpace, DEFAULT_FIBER_CAP};
pub use stationary::{
    balance_residual, solve_stationary, stationary_distribution, StationaryDistribution,
    DENSE_LIMIT,
};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::kinetics::{ChannelSet, Kinetics};
use crate::network::{first_timescale, StateFunction};
use crate::ssa::{project, record_path, RngStream, Trajectory, DEFAULT_EVENT_CAP};

pub type SharedKinetics = Arc<dyn Kinetics + Send + Sync>;

/// `(u, θ bits)`.
type SolutionKey = (Vec<i64>, u64);

/// `(u, θ, averaged rates with θ-derivatives)`.
pub type VisitedState = (Vec<i64>, f64, Vec<(f64, f64)>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConservedBasis {
    /// Extreme rays of the conserved cone, descending lexicographic order.
    pub rays: Vec<Vec<i64>>,
    /// Rows: linearly independent rays spanning the same space.
    pub m: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondScale {
    pub gamma1: Rational64,
    pub fast: Vec<usize>,
    pub gamma2: Rational64,
    pub gamma2_set: Vec<usize>,
    pub basis: ConservedBasis,
}

/// Time-scale at which the conserved coordinates of the fast subnetwork move.
pub fn second_timescale<K: Kinetics + ?Sized>(kin: &K) -> Result<SecondScale> {
    let (gamma1, fast) = first_timescale(kin);
    let eqs: Vec<Vec<i64>> = fast.iter().map(|&k| kin.jump(k).to_vec()).collect();
    let rays = extreme_rays(kin.dim(), &eqs);
    if rays.is_empty() {
        return Err(Error::NoSecondScale(
            "no nonnegative quantity is conserved by the fast reactions".into(),
        ));
    }
    // A strictly positive combination of the rays is orthogonal to ζ_k exactly
    // when every ray is, so the union of ray supports decides γ_v.
    let moved = |k: usize| {
        rays.iter()
            .any(|r| r.iter().zip(kin.jump(k)).map(|(a, b)| a * b).sum::<i64>() != 0)
    };
    let beta_max = (0..kin.channels())
        .filter(|&k| moved(k))
        .map(|k| kin.scale_exponent(k))
        .max();
    let Some(beta_max) = beta_max else {
        return Err(Error::NoSecondScale(
            "no reaction changes the conserved coordinates".into(),
        ));
    };
    let gamma2 = -beta_max;
    let gamma2_set: Vec<usize> = (0..kin.channels())
        .filter(|&k| kin.scale_exponent(k) == beta_max)
        .collect();
    if gamma2 <= gamma1 || gamma2_set.iter().any(|k| fast.contains(k)) {
        return Err(Error::DegenerateScale(format!(
            "gamma2 = {gamma2} does not exceed gamma1 = {gamma1}"
        )));
    }
    let m = independent_rows(&rays);
    Ok(SecondScale {
        gamma1,
        fast,
        gamma2,
        gamma2_set,
        basis: ConservedBasis { rays, m },
    })
}

/// Stationary law of one fiber at one θ, with the averaged rates of every
/// reduced channel.
#[derive(Debug)]
pub struct FiberSolution {
    pub fiber: Arc<FiberSpace>,
    pub stationary: StationaryDistribution,
    pub rates: Vec<(f64, f64)>,
}

impl FiberSolution {
    /// `Σ g(z) π(z)` and its θ-derivative.
    pub fn average<F: StateFunction + ?Sized>(&self, g: &F, theta: f64) -> Result<(f64, f64)> {
        let mut value = 0.0;
        let mut deriv = 0.0;
        let mut first = None;
        let mut constant = true;
        for ((z, &p), &dp) in self
            .fiber
            .states
            .iter()
            .zip(&self.stationary.pi)
            .zip(&self.stationary.dpi)
        {
            let (g, dg) = g.value(z, theta)?;
            constant &= *first.get_or_insert(g) == g;
            value += g * p;
            deriv += dg * p + g * dp;
        }
        // Σπ = 1 only up to rounding; keep fiber-constant outputs exact.
        if let (true, Some(c)) = (constant, first) {
            let dg: f64 = self
                .fiber
                .states
                .iter()
                .zip(&self.stationary.pi)
                .map(|(z, p)| Ok(g.value(z, theta)?.1 * p))
                .sum::<Result<f64>>()?;
            return Ok((c, dg));
        }
        Ok((value, deriv))
    }
}

/// The averaged network on conserved coordinates `u = Mx`. Channel `k` is
/// parent channel `channel(k)` with jump `Mζ` and averaged propensity; only
/// parent channels outside the fast set that move `u` are kept.
pub struct ReducedNetwork {
    parent: SharedKinetics,
    pub scales: SecondScale,
    channels: Vec<usize>,
    jumps: Vec<Vec<i64>>,
    u0: Vec<i64>,
    theta_nominal: f64,
    fiber_cap: usize,
    fibers: RwLock<HashMap<Vec<i64>, Arc<FiberSpace>>>,
    hints: RwLock<HashMap<Vec<i64>, Vec<i64>>>,
    solutions: RwLock<HashMap<SolutionKey, Arc<FiberSolution>>>,
}

impl fmt::Debug for ReducedNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedNetwork")
            .field("scales", &self.scales)
            .field("channels", &self.channels)
            .field("jumps", &self.jumps)
            .field("u0", &self.u0)
            .finish()
    }
}

impl ReducedNetwork {
    pub fn new(parent: SharedKinetics) -> Result<Self> {
        Self::with_fiber_cap(parent, DEFAULT_FIBER_CAP)
    }

    pub fn with_fiber_cap(parent: SharedKinetics, fiber_cap: usize) -> Result<Self> {
        let scales = second_timescale(parent.as_ref())?;
        let m = &scales.basis.m;
        let mut channels = Vec::new();
        let mut jumps = Vec::new();
        for k in 0..parent.channels() {
            let jump = project(m, parent.jump(k));
            if !scales.fast.contains(&k) && jump.iter().any(|&c| c != 0) {
                channels.push(k);
                jumps.push(jump);
            }
        }
        let x0 = parent.initial_state();
        let u0 = project(m, &x0);
        let theta_nominal = parent.theta_nominal();
        let net = Self {
            parent,
            scales,
            channels,
            jumps,
            u0: u0.clone(),
            theta_nominal,
            fiber_cap,
            fibers: RwLock::new(HashMap::new()),
            hints: RwLock::new(HashMap::from([(u0.clone(), x0)])),
            solutions: RwLock::new(HashMap::new()),
        };
        net.fiber(&u0)?;
        Ok(net)
    }

    pub fn parent(&self) -> &SharedKinetics {
        &self.parent
    }

    pub fn m(&self) -> &[Vec<i64>] {
        &self.scales.basis.m
    }

    pub fn gamma2(&self) -> Rational64 {
        self.scales.gamma2
    }

    /// Parent channel behind reduced channel `k`.
    pub fn channel(&self, k: usize) -> usize {
        self.channels[k]
    }

    /// Reduced channels that survive the limit at the second time-scale.
    pub fn limit_channels(&self) -> ChannelSet {
        let zero = Rational64::from_integer(0);
        ChannelSet::natural(
            (0..self.channels.len())
                .filter(|&k| self.scale_exponent(k) + self.scales.gamma2 == zero)
                .collect(),
        )
    }

    /// A parent state with `Mx = u`: a cached hint if one is known, else the
    /// lexicographically smallest one in the feasibility box.
    pub fn representative(&self, u: &[i64]) -> Result<Vec<i64>> {
        if let Some(x) = self.hints.read().expect("hint lock").get(u) {
            return Ok(x.clone());
        }
        find_representative(self.parent.as_ref(), self.m(), u)
    }

    pub fn fiber(&self, u: &[i64]) -> Result<Arc<FiberSpace>> {
        if let Some(f) = self.fibers.read().expect("fiber lock").get(u) {
            return Ok(f.clone());
        }
        let rep = self.representative(u)?;
        let fiber = Arc::new(enumerate_fiber(
            self.parent.as_ref(),
            &self.scales.fast,
            self.m(),
            &rep,
            self.theta_nominal,
            self.fiber_cap,
        )?);
        // Every state reachable by a slow firing is a representative of the neighbouring fiber.
        {
            let mut hints = self.hints.write().expect("hint lock");
            for &k in &self.channels {
                for z in &fiber.states {
                    if self.parent.propensity(k, z, self.theta_nominal)?.0 > 0.0 {
                        let y: Vec<i64> = z
                            .iter()
                            .zip(self.parent.jump(k))
                            .map(|(a, b)| a + b)
                            .collect();
                        hints.entry(project(self.m(), &y)).or_insert(y);
                    }
                }
            }
        }
        let mut fibers = self.fibers.write().expect("fiber lock");
        Ok(fibers.entry(u.to_vec()).or_insert(fiber).clone())
    }

    pub fn solution(&self, u: &[i64], theta: f64) -> Result<Arc<FiberSolution>> {
        let key = (u.to_vec(), theta.to_bits());
        if let Some(s) = self.solutions.read().expect("solution lock").get(&key) {
            return Ok(s.clone());
        }
        let fiber = self.fiber(u)?;
        let stationary = stationary_distribution(&fiber, self.parent.as_ref(), theta)?;
        let mut rates = Vec::with_capacity(self.channels.len());
        for &k in &self.channels {
            let mut value = 0.0;
            let mut deriv = 0.0;
            for ((z, &p), &dp) in fiber.states.iter().zip(&stationary.pi).zip(&stationary.dpi) {
                let (l, dl) = self.parent.propensity(k, z, theta)?;
                value += l * p;
                deriv += dl * p + l * dp;
            }
            rates.push((value, deriv));
        }
        let sol = Arc::new(FiberSolution {
            fiber,
            stationary,
            rates,
        });
        let mut cache = self.solutions.write().expect("solution lock");
        Ok(cache.entry(key).or_insert(sol).clone())
    }

    /// Averaged propensity of reduced channel `k` at `u`.
    pub fn reduced_propensity(&self, k: usize, u: &[i64], theta: f64) -> Result<(f64, f64)> {
        if k >= self.channels.len() {
            return Err(Error::Index {
                index: k,
                len: self.channels.len(),
            });
        }
        Ok(self.solution(u, theta)?.rates[k])
    }

    /// `f_θ(u) = Σ f(z) π(z)` over the fiber of `u`, with its θ-derivative.
    pub fn averaged_function<F: StateFunction + ?Sized>(
        &self,
        f: &F,
        u: &[i64],
        theta: f64,
    ) -> Result<(f64, f64)> {
        self.solution(u, theta)?.average(f, theta)
    }

    /// Number of distinct fibers visited so far.
    pub fn cached_fibers(&self) -> usize {
        self.fibers.read().expect("fiber lock").len()
    }

    /// Visited `(u, θ)` pairs with their averaged rates, sorted.
    pub fn visited(&self) -> Vec<VisitedState> {
        let cache = self.solutions.read().expect("solution lock");
        let mut out: Vec<_> = cache
            .iter()
            .map(|((u, t), s)| (u.clone(), f64::from_bits(*t), s.rates.clone()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out
    }
}

impl Kinetics for ReducedNetwork {
    fn dim(&self) -> usize {
        self.scales.basis.m.len()
    }

    fn channels(&self) -> usize {
        self.channels.len()
    }

    fn jump(&self, k: usize) -> &[i64] {
        &self.jumps[k]
    }

    fn scale_exponent(&self, k: usize) -> Rational64 {
        self.parent.scale_exponent(self.channels[k])
    }

    fn initial_state(&self) -> Vec<i64> {
        self.u0.clone()
    }

    fn propensity(&self, k: usize, u: &[i64], theta: f64) -> Result<(f64, f64)> {
        self.reduced_propensity(k, u, theta)
    }

    fn rates_into(&self, u: &[i64], theta: f64, out: &mut [f64]) -> Result<()> {
        let sol = self.solution(u, theta)?;
        for (slot, r) in out.iter_mut().zip(&sol.rates) {
            *slot = r.0;
        }
        Ok(())
    }

    fn admissible(&self, u: &[i64]) -> bool {
        self.representative(u).is_ok()
    }

    fn coordinate_names(&self) -> Vec<String> {
        let names = self.parent.coordinate_names();
        self.m()
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&names)
                    .filter(|(&c, _)| c != 0)
                    .map(|(&c, n)| {
                        if c == 1 {
                            n.clone()
                        } else {
                            format!("{c}*{n}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("+")
            })
            .collect()
    }

    fn theta_nominal(&self) -> f64 {
        self.theta_nominal
    }
}

/// `f` averaged over fibers: a function of the reduced coordinates.
pub struct Averaged<'a, F: ?Sized> {
    pub reduced: &'a ReducedNetwork,
    pub f: &'a F,
}

impl<F: StateFunction + ?Sized> StateFunction for Averaged<'_, F> {
    fn value(&self, u: &[i64], theta: f64) -> Result<(f64, f64)> {
        self.reduced.averaged_function(self.f, u, theta)
    }
}

/// One path of the limiting reduced process.
pub fn simulate_reduced(
    reduced: &ReducedNetwork,
    theta: f64,
    t_end: f64,
    stream: RngStream,
) -> Result<Trajectory> {
    record_path(
        reduced,
        &reduced.limit_channels(),
        theta,
        reduced.initial_state(),
        t_end,
        stream,
        DEFAULT_EVENT_CAP,
    )
}

#[derive(Debug)]
pub struct IteratedReduction {
    pub stages: Vec<Arc<ReducedNetwork>>,
    /// Why the procedure stopped before the requested number of steps.
    pub stopped: Option<Error>,
}

/// Applies the reduction up to `steps` times, each stage averaging the fastest
/// remaining channels of the previous one.
pub fn reduce_iterated(network: SharedKinetics, steps: usize) -> Result<IteratedReduction> {
    let mut stages: Vec<Arc<ReducedNetwork>> = Vec::new();
    let mut current = network;
    for _ in 0..steps {
        match ReducedNetwork::new(current.clone()) {
            Ok(r) => {
                let r = Arc::new(r);
                current = r.clone();
                stages.push(r);
            }
            Err(e @ Error::NoSecondScale(_)) if !stages.is_empty() => {
                return Ok(IteratedReduction {
                    stages,
                    stopped: Some(e),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(IteratedReduction {
        stages,
        stopped: None,
    })
}
