use num_rational::Rational64;

use crate::error::Result;

/// A jump process on integer lattice states: channel `k` moves the state by
/// `jump(k)` at rate `N^{scale_exponent(k) + γ} · propensity(k, x, θ)`.
///
/// Implemented by mass-action networks and by averaged (reduced) networks, so
/// the simulators, the time-scale analysis and the reduction itself can be
/// applied at any stage of an iterated reduction.
pub trait Kinetics: Sync {
    fn dim(&self) -> usize;
    fn channels(&self) -> usize;
    fn jump(&self, k: usize) -> &[i64];
    fn scale_exponent(&self, k: usize) -> Rational64;
    fn initial_state(&self) -> Vec<i64>;

    /// Propensity and its θ-derivative.
    fn propensity(&self, k: usize, x: &[i64], theta: f64) -> Result<(f64, f64)>;

    /// All propensities at `x` (values only).
    fn rates_into(&self, x: &[i64], theta: f64, out: &mut [f64]) -> Result<()> {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.propensity(k, x, theta)?.0;
        }
        Ok(())
    }

    /// Whether `x` is a state the process can occupy.
    fn admissible(&self, x: &[i64]) -> bool;

    fn coordinate_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Parameter value used where only the support of the rates matters.
    fn theta_nominal(&self) -> f64 {
        1.0
    }
}

/// `N^q` for a rational exponent; exact for integer exponents.
pub fn scale_factor(n: f64, q: Rational64) -> f64 {
    if q.is_integer() {
        n.powi(q.to_integer() as i32)
    } else {
        n.powf(*q.numer() as f64 / *q.denom() as f64)
    }
}

/// Channels that take part in a simulation, with their rate multipliers.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub channels: Vec<usize>,
    pub multipliers: Vec<f64>,
}

impl ChannelSet {
    /// Every channel of `kin` at reference time-scale `gamma`, multiplier `N^{β_k+γ}`.
    pub fn at_scale<K: Kinetics + ?Sized>(kin: &K, gamma: Rational64, n: f64) -> Self {
        let channels: Vec<usize> = (0..kin.channels()).collect();
        let multipliers = channels
            .iter()
            .map(|&k| scale_factor(n, kin.scale_exponent(k) + gamma))
            .collect();
        Self {
            channels,
            multipliers,
        }
    }

    /// The listed channels with unit multipliers.
    pub fn natural(channels: Vec<usize>) -> Self {
        let multipliers = vec![1.0; channels.len()];
        Self {
            channels,
            multipliers,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}
