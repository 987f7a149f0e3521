use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::kinetics::Kinetics;
use crate::ssa::project;

pub const DEFAULT_FIBER_CAP: usize = 1_000_000;

/// The states sharing a conserved coordinate `v` that communicate through the
/// fast channels, in ascending lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSpace {
    pub v: Vec<i64>,
    pub states: Vec<Vec<i64>>,
    /// `(from, to, channel)`; every fast firing with positive rate inside the fiber.
    pub transitions: Vec<(usize, usize, usize)>,
    index: HashMap<Vec<i64>, usize>,
}

impl FiberSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn position(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Rates and θ-derivatives of every transition.
    pub fn transition_rates<K: Kinetics + ?Sized>(
        &self,
        kin: &K,
        theta: f64,
    ) -> Result<Vec<(f64, f64)>> {
        self.transitions
            .iter()
            .map(|&(i, _, k)| kin.propensity(k, &self.states[i], theta))
            .collect()
    }
}

fn shifted(x: &[i64], z: &[i64], sign: i64) -> Vec<i64> {
    x.iter().zip(z).map(|(a, b)| a + sign * b).collect()
}

/// Closure of `representative` under forward and reverse firings of the
/// `fast` channels, with a strong-connectivity check.
pub fn enumerate_fiber<K: Kinetics + ?Sized>(
    kin: &K,
    fast: &[usize],
    m: &[Vec<i64>],
    representative: &[i64],
    theta: f64,
    cap: usize,
) -> Result<FiberSpace> {
    let v = project(m, representative);
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut order = vec![representative.to_vec()];
    seen.insert(representative.to_vec());
    let mut queue = VecDeque::from([representative.to_vec()]);
    let mut edges = Vec::new();

    while let Some(x) = queue.pop_front() {
        for &k in fast {
            let z = kin.jump(k);
            let mut found = Vec::with_capacity(2);
            if kin.propensity(k, &x, theta)?.0 > 0.0 {
                let y = shifted(&x, z, 1);
                edges.push((x.clone(), y.clone(), k));
                found.push(y);
            }
            let y = shifted(&x, z, -1);
            if kin.admissible(&y) && kin.propensity(k, &y, theta)?.0 > 0.0 {
                found.push(y);
            }
            for y in found {
                if !seen.contains(&y) {
                    if order.len() >= cap {
                        return Err(Error::FiberNotFinite { cap });
                    }
                    seen.insert(y.clone());
                    order.push(y.clone());
                    queue.push_back(y);
                }
            }
        }
    }

    order.sort_unstable();
    let index: HashMap<Vec<i64>, usize> = order
        .iter()
        .enumerate()
        .map(|(i, x)| (x.clone(), i))
        .collect();
    let mut transitions: Vec<(usize, usize, usize)> = edges
        .iter()
        .map(|(x, y, k)| (index[x], index[y], *k))
        .collect();
    transitions.sort_unstable();

    let fiber = FiberSpace {
        v,
        states: order,
        transitions,
        index,
    };
    if !strongly_connected(fiber.len(), &fiber.transitions) {
        return Err(Error::NotErgodic { v: fiber.v });
    }
    Ok(fiber)
}

fn strongly_connected(m: usize, transitions: &[(usize, usize, usize)]) -> bool {
    let reach = |forward: bool| {
        let mut adj = vec![Vec::new(); m];
        for &(i, j, _) in transitions {
            if forward {
                adj[i].push(j)
            } else {
                adj[j].push(i)
            }
        }
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Lexicographically smallest admissible `x` in the box implied by the
/// nonnegative rows of `m` with `Mx = v`.
pub fn find_representative<K: Kinetics + ?Sized>(
    kin: &K,
    m: &[Vec<i64>],
    v: &[i64],
) -> Result<Vec<i64>> {
    let none = || Error::NoRepresentative { v: v.to_vec() };
    if v.iter().any(|&c| c < 0) || m.iter().flatten().any(|&c| c < 0) {
        return Err(none());
    }
    let d = kin.dim();
    let bounds: Vec<i64> = (0..d)
        .map(|i| {
            m.iter()
                .zip(v)
                .filter(|(row, _)| row[i] > 0)
                .map(|(row, &vj)| vj / row[i])
                .min()
                .unwrap_or(0)
        })
        .collect();
    // covers[i][j]: some column >= i has a positive entry in row j
    let mut covers = vec![vec![false; m.len()]; d + 1];
    for i in (0..d).rev() {
        for j in 0..m.len() {
            covers[i][j] = covers[i + 1][j] || m[j][i] > 0;
        }
    }
    let mut x = vec![0i64; d];
    if search(kin, m, &bounds, &covers, 0, &mut x, v) {
        Ok(x)
    } else {
        Err(none())
    }
}

fn search<K: Kinetics + ?Sized>(
    kin: &K,
    m: &[Vec<i64>],
    bounds: &[i64],
    covers: &[Vec<bool>],
    i: usize,
    x: &mut Vec<i64>,
    residual: &[i64],
) -> bool {
    if residual
        .iter()
        .enumerate()
        .any(|(j, &r)| r < 0 || (r > 0 && !covers[i][j]))
    {
        return false;
    }
    if i == x.len() {
        return kin.admissible(x);
    }
    let mut rest = residual.to_vec();
    for value in 0..=bounds[i] {
        x[i] = value;
        if search(kin, m, bounds, covers, i + 1, x, &rest) {
            return true;
        }
        for (r, row) in rest.iter_mut().zip(m) {
            *r -= row[i];
        }
        if rest.iter().any(|&r| r < 0) {
            break;
        }
    }
    x[i] = 0;
    false
}
