//! Direct-method simulation of the random time change representation.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::Rational64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::kinetics::{ChannelSet, Kinetics};
use crate::network::StateFunction;
use crate::stats::{KahanSum, Moments};

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

/// Identifies one reproducible random stream: ChaCha8 keyed by `seed`, on
/// stream `stream_id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -open_uniform(rng).ln()
}

/// Index `i` of the first positive rate whose cumulative sum exceeds `u * total`.
pub(crate) fn select(rates: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            acc += r;
            last = i;
            if acc > target {
                return i;
            }
        }
    }
    last
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `jump_times[0] = 0` for the initial state, then one entry per firing.
    pub jump_times: Vec<f64>,
    pub states: Vec<Vec<i64>>,
    pub end_time: f64,
    pub reaction_log: Vec<usize>,
    pub truncated: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &[i64] {
        self.states.last().expect("trajectory has an initial state")
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &[i64] {
        let i = self.jump_times.partition_point(|&s| s <= t);
        &self.states[i.saturating_sub(1)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnd {
    pub state: Vec<i64>,
    pub events: u64,
    pub truncated: bool,
}

/// Runs the direct method on `set` from `x0` up to `t_end`, calling
/// `on_jump(time, new_state, channel)` after every firing.
#[allow(clippy::too_many_arguments)]
pub fn run_direct<K, R, F>(
    kin: &K,
    set: &ChannelSet,
    theta: f64,
    x0: Vec<i64>,
    t_end: f64,
    rng: &mut R,
    event_cap: u64,
    mut on_jump: F,
) -> Result<PathEnd>
where
    K: Kinetics + ?Sized,
    R: Rng,
    F: FnMut(f64, &[i64], usize),
{
    let mut x = x0;
    let mut clock = KahanSum::default();
    let mut events = 0u64;
    let mut rates = vec![0.0; set.len()];
    loop {
        let mut total = 0.0;
        for (i, (&k, &m)) in set.channels.iter().zip(&set.multipliers).enumerate() {
            rates[i] = m * kin.propensity(k, &x, theta)?.0;
            total += rates[i];
        }
        if total <= 0.0 {
            break;
        }
        let dt = exp1(rng) / total;
        if clock.peek(dt) > t_end {
            break;
        }
        if events >= event_cap {
            return Ok(PathEnd {
                state: x,
                events,
                truncated: true,
            });
        }
        clock.add(dt);
        let i = select(&rates, total, rng.random());
        let k = set.channels[i];
        for (xi, z) in x.iter_mut().zip(kin.jump(k)) {
            *xi += z;
        }
        events += 1;
        on_jump(clock.value(), &x, k);
    }
    Ok(PathEnd {
        state: x,
        events,
        truncated: false,
    })
}

/// One exact sample path at reference scale `gamma` (rates `N^{β_k+γ} λ_k`).
pub fn simulate_path<K: Kinetics + ?Sized>(
    kin: &K,
    gamma: Rational64,
    n: f64,
    theta: f64,
    t_end: f64,
    stream: RngStream,
) -> Result<Trajectory> {
    let set = ChannelSet::at_scale(kin, gamma, n);
    record_path(
        kin,
        &set,
        theta,
        kin.initial_state(),
        t_end,
        stream,
        DEFAULT_EVENT_CAP,
    )
}

pub fn record_path<K: Kinetics + ?Sized>(
    kin: &K,
    set: &ChannelSet,
    theta: f64,
    x0: Vec<i64>,
    t_end: f64,
    stream: RngStream,
    event_cap: u64,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        jump_times: vec![0.0],
        states: vec![x0.clone()],
        end_time: t_end,
        reaction_log: vec![],
        truncated: false,
    };
    let mut rng = stream.generator();
    let end = run_direct(
        kin,
        set,
        theta,
        x0,
        t_end,
        &mut rng,
        event_cap,
        |t, x, k| {
            traj.jump_times.push(t);
            traj.states.push(x.to_vec());
            traj.reaction_log.push(k);
        },
    )?;
    if end.truncated {
        traj.truncated = true;
        traj.end_time = *traj.jump_times.last().expect("nonempty");
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub halfwidth95: f64,
    pub samples: u64,
    pub variance: f64,
    pub seed: u64,
    pub wall_seconds: f64,
    /// Number of samples cut short by the event cap.
    pub truncated: u64,
}

impl MonteCarloEstimate {
    pub fn from_moments(m: &Moments, seed: u64, wall_seconds: f64, truncated: u64) -> Self {
        Self {
            mean: m.mean,
            halfwidth95: m.halfwidth95(),
            samples: m.count,
            variance: m.variance(),
            seed,
            wall_seconds,
            truncated,
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            (self.variance / self.samples as f64).sqrt()
        }
    }
}

/// Values of `f(X(t))` for stream ids `first..first + count`, in stream order.
#[allow(clippy::too_many_arguments)]
pub fn sample_endpoints<K, F>(
    kin: &K,
    set: &ChannelSet,
    theta: f64,
    f: &F,
    t: f64,
    seed: u64,
    streams: std::ops::Range<u64>,
) -> Result<Vec<(f64, bool)>>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    let x0 = kin.initial_state();
    streams
        .into_par_iter()
        .map(|id| {
            let mut rng = RngStream::new(seed, id).generator();
            let end = run_direct(
                kin,
                set,
                theta,
                x0.clone(),
                t,
                &mut rng,
                DEFAULT_EVENT_CAP,
                |_, _, _| {},
            )?;
            Ok((f.value(&end.state, theta)?.0, end.truncated))
        })
        .collect()
}

/// Monte Carlo estimate of `E f(X(t))` from `samples` paths with stream ids `0..samples`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expectation<K, F>(
    kin: &K,
    gamma: Rational64,
    n: f64,
    theta: f64,
    f: &F,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    let set = ChannelSet::at_scale(kin, gamma, n);
    estimate_with(kin, &set, theta, f, t, samples, seed)
}

pub fn estimate_with<K, F>(
    kin: &K,
    set: &ChannelSet,
    theta: f64,
    f: &F,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate>
where
    K: Kinetics + ?Sized,
    F: StateFunction + ?Sized,
{
    let start = Instant::now();
    let values = sample_endpoints(kin, set, theta, f, t, seed, 0..samples)?;
    let m: Moments = values.iter().map(|v| v.0).collect();
    let truncated = values.iter().filter(|v| v.1).count() as u64;
    Ok(MonteCarloEstimate::from_moments(
        &m,
        seed,
        start.elapsed().as_secs_f64(),
        truncated,
    ))
}

/// Residence time per full state, with the conserved-coordinate map used to
/// group states into fibers.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationMeasure {
    pub weights: BTreeMap<Vec<i64>, f64>,
    pub horizon: f64,
    projection: Vec<Vec<i64>>,
}

impl OccupationMeasure {
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn project(&self, x: &[i64]) -> Vec<i64> {
        project(&self.projection, x)
    }

    /// Normalized residence fractions of the states with `Mx = v`.
    pub fn fiber_fractions(&self, v: &[i64]) -> BTreeMap<Vec<i64>, f64> {
        let inside: BTreeMap<Vec<i64>, f64> = self
            .weights
            .iter()
            .filter(|(x, _)| self.project(x) == v)
            .map(|(x, &w)| (x.clone(), w))
            .collect();
        let total: f64 = inside.values().sum();
        inside.into_iter().map(|(x, w)| (x, w / total)).collect()
    }
}

pub fn project(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn empirical_occupation(traj: &Trajectory, projection: &[Vec<i64>]) -> OccupationMeasure {
    let mut sums: BTreeMap<Vec<i64>, KahanSum> = BTreeMap::new();
    for (i, x) in traj.states.iter().enumerate() {
        let until = traj.jump_times.get(i + 1).copied().unwrap_or(traj.end_time);
        sums.entry(x.clone())
            .or_default()
            .add(until - traj.jump_times[i]);
    }
    OccupationMeasure {
        weights: sums.into_iter().map(|(x, s)| (x, s.value())).collect(),
        horizon: traj.end_time,
        projection: projection.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::models::{heat_shock, pure_birth};
    use crate::network::{OutputFunction, RateConstant, Reaction, ReactionNetwork};

    #[test]
    fn absorbing_state_never_fires() {
        let r = Reaction::new(
            2,
            vec![(0, 1)],
            vec![(1, 1)],
            0,
            RateConstant::new(1.0, 0).unwrap(),
        );
        let net = ReactionNetwork::new(vec!["A".into(), "B".into()], vec![r], vec![0, 0], 1, 1.0)
            .unwrap();
        let tr = simulate_path(
            &net,
            Rational64::from_integer(0),
            1.0,
            1.0,
            3.0,
            RngStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(tr.states, vec![vec![0, 0]]);
        assert_eq!(tr.end_time, 3.0);
        assert!(tr.reaction_log.is_empty());
    }

    /// Competing exponentials on a hand-fed tape: the first three events of the
    /// heat-shock chain at N = 1, γ = 1 must match an explicit reference that
    /// draws the same uniforms in the same order.
    #[test]
    fn matches_reference_direct_method() {
        let net = heat_shock(4);
        let gamma = Rational64::from_integer(1);
        for id in 0..50 {
            let stream = RngStream::new(7, id);
            let tr = simulate_path(&net, gamma, 1.0, 1.0, 1e9, stream).unwrap();

            let mut rng = stream.generator();
            let mut x = [4i64, 0, 0];
            let mut t = 0.0;
            for step in 0..3 {
                let a = [x[0] as f64, 2.0 * x[1] as f64, 5.0 * x[1] as f64];
                let a0: f64 = a.iter().sum();
                if a0 == 0.0 {
                    assert_eq!(tr.states.len(), step + 1);
                    break;
                }
                t += exp1(&mut rng) / a0;
                let r = rng.random::<f64>() * a0;
                let k = if r < a[0] {
                    0
                } else if r < a[0] + a[1] {
                    1
                } else {
                    2
                };
                let z = [[-1, 1, 0], [1, -1, 0], [0, -1, 1]][k];
                for i in 0..3 {
                    x[i] += z[i];
                }
                assert_eq!(tr.reaction_log[step], k);
                assert_eq!(tr.states[step + 1], x.to_vec());
                assert!((tr.jump_times[step + 1] - t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poisson_count() {
        let net = pure_birth(2.0, 0);
        let f = OutputFunction::coordinate(1, 0);
        let est = estimate_expectation(
            &net,
            Rational64::from_integer(0),
            1.0,
            1.0,
            &f,
            1.0,
            100_000,
            11,
        )
        .unwrap();
        let se = est.std_error();
        assert!((est.mean - 2.0).abs() <= 3.0 * se, "{est:?}");
        assert!((est.variance - 2.0).abs() < 0.05);
        assert_eq!(
            est.halfwidth95,
            1.96 * (est.variance / est.samples as f64).sqrt()
        );
    }

    #[test]
    fn constant_output_has_no_spread() {
        let net = heat_shock(5);
        let f = OutputFunction::constant(3, 7.0);
        let est = estimate_expectation(
            &net,
            Rational64::from_integer(1),
            10.0,
            1.0,
            &f,
            0.5,
            200,
            3,
        )
        .unwrap();
        assert_eq!(est.mean, 7.0);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn confidence_interval_coverage() {
        let net = pure_birth(2.0, 0);
        let f = OutputFunction::coordinate(1, 0);
        let set = ChannelSet::at_scale(&net, Rational64::from_integer(0), 1.0);
        let covered = (0..200)
            .filter(|&rep| {
                let e = estimate_with(&net, &set, 1.0, &f, 1.0, 400, 1000 + rep).unwrap();
                (e.mean - 2.0).abs() <= e.halfwidth95
            })
            .count();
        let rate = covered as f64 / 200.0;
        assert!((0.90..=0.99).contains(&rate), "coverage {rate}");
    }

    #[test]
    fn deterministic_given_stream() {
        let net = heat_shock(20);
        let g = Rational64::from_integer(1);
        let a = simulate_path(&net, g, 50.0, 1.0, 1.0, RngStream::new(5, 9)).unwrap();
        let b = simulate_path(&net, g, 50.0, 1.0, 1.0, RngStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&net, g, 50.0, 1.0, 1.0, RngStream::new(5, 10)).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn conservation_and_fast_invariance() {
        let net = heat_shock(20);
        let m = vec![vec![1, 1, 0], vec![0, 0, 1]];
        for id in 0..20 {
            let tr = simulate_path(
                &net,
                Rational64::from_integer(1),
                100.0,
                1.0,
                1.0,
                RngStream::new(2, id),
            )
            .unwrap();
            for w in tr.jump_times.windows(2) {
                assert!(w[0] < w[1]);
            }
            for (i, x) in tr.states.iter().enumerate() {
                assert!(x.iter().all(|&v| v >= 0));
                assert_eq!(x.iter().sum::<i64>(), 20);
                if i > 0 {
                    let k = tr.reaction_log[i - 1];
                    let moved = project(&m, x) != project(&m, &tr.states[i - 1]);
                    assert_eq!(moved, k == 2, "reaction {k}");
                }
            }
        }
    }

    #[test]
    fn occupation_by_definition() {
        let constant = Trajectory {
            jump_times: vec![0.0],
            states: vec![vec![1, 2]],
            end_time: 4.0,
            reaction_log: vec![],
            truncated: false,
        };
        let occ = empirical_occupation(&constant, &[vec![1, 1]]);
        assert_eq!(occ.weights.len(), 1);
        assert_eq!(occ.weights[&vec![1, 2]], 4.0);

        let two = Trajectory {
            jump_times: vec![0.0, 0.5],
            states: vec![vec![1, 0], vec![0, 1]],
            end_time: 1.0,
            reaction_log: vec![0],
            truncated: false,
        };
        let occ = empirical_occupation(&two, &[vec![1, 1]]);
        assert_eq!(occ.weights[&vec![1, 0]], 0.5);
        assert_eq!(occ.weights[&vec![0, 1]], 0.5);
        assert_eq!(occ.fiber_fractions(&[1]).len(), 2);
        assert!((occ.total() - occ.horizon).abs() <= 1e-9);
    }
}
