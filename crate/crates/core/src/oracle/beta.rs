//! `dβ/dt = (N Qᵀ - D) β`: exponential moments of the weighted occupation time
//! of a finite chain.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::reduction::FiberSpace;

/// Systems up to this size use a dense matrix exponential.
pub const DENSE_EXP_LIMIT: usize = 500;

const UNIFORMIZATION_TOL: f64 = 1e-14;
const MAX_CHUNKS: usize = 10_000_000;

#[derive(Clone, Debug)]
pub struct BetaSystem {
    m: usize,
    /// `A = N Qᵀ - D`, kept sparse as `(row, col, value)`.
    entries: Vec<(usize, usize, f64)>,
    diag: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaVector {
    pub t: f64,
    pub values: Vec<f64>,
    pub survival: f64,
}

impl BetaSystem {
    /// Chain on `m` states with `(from, to)` edges at `n * rates`, killed at rate `weights`.
    pub fn new(
        m: usize,
        edges: &[(usize, usize)],
        rates: &[f64],
        weights: Vec<f64>,
        n: f64,
    ) -> Self {
        let mut diag: Vec<f64> = weights.iter().map(|w| -w).collect();
        let mut entries = Vec::with_capacity(edges.len());
        for (&(i, j), &r) in edges.iter().zip(rates) {
            if i != j && r > 0.0 {
                entries.push((j, i, n * r));
                diag[i] -= n * r;
            }
        }
        Self {
            m,
            entries,
            diag,
            weights,
        }
    }

    pub fn for_fiber(fiber: &FiberSpace, rates: &[f64], weights: Vec<f64>, n: f64) -> Self {
        let edges: Vec<(usize, usize)> =
            fiber.transitions.iter().map(|&(i, j, _)| (i, j)).collect();
        Self::new(fiber.len(), &edges, rates, weights, n)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag));
        for &(r, c, v) in &self.entries {
            a[(r, c)] += v;
        }
        a
    }

    /// `exp(tA) start`.
    pub fn propagate(&self, start: &[f64], t: f64) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(start.to_vec());
        }
        let out = if self.m <= DENSE_EXP_LIMIT {
            let e = (self.dense() * t).exp();
            (e * DVector::from_column_slice(start))
                .iter()
                .copied()
                .collect()
        } else {
            self.uniformized(start, t)?
        };
        Ok(out.into_iter().map(|b: f64| b.max(0.0)).collect())
    }

    /// `β(t)` from the indicator of `z0`.
    pub fn from_state(&self, z0: usize, t: f64) -> Result<Vec<f64>> {
        let mut start = vec![0.0; self.m];
        start[z0] = 1.0;
        self.propagate(&start, t)
    }

    /// `d/dt Σβ = -Σ Λ_e β_e` (fast transitions conserve mass).
    pub fn survival_rate(&self, beta: &[f64]) -> f64 {
        -beta
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| b * w)
            .sum::<f64>()
    }

    /// Uniformization: `exp(tA) = e^{-ct} Σ (ct)^k/k! Pᵏ` with `P = I + A/c ≥ 0`,
    /// applied over chunks with `c Δt ≤ 50` so the Poisson weights stay representable.
    fn uniformized(&self, start: &[f64], t: f64) -> Result<Vec<f64>> {
        let c = self.diag.iter().fold(0.0f64, |a, d| a.max(-d));
        if c == 0.0 {
            return Ok(start.to_vec());
        }
        let chunks = ((c * t) / 50.0).ceil().max(1.0);
        if chunks > MAX_CHUNKS as f64 {
            return Err(Error::StiffnessFailure(format!(
                "uniformization needs {chunks:e} chunks"
            )));
        }
        let lam = c * t / chunks;
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut out: Vec<f64> = v
                .iter()
                .zip(&self.diag)
                .map(|(x, d)| x * (1.0 + d / c))
                .collect();
            for &(r, col, a) in &self.entries {
                out[r] += a / c * v[col];
            }
            out
        };
        let mut v = start.to_vec();
        for _ in 0..chunks as usize {
            let mut weight = (-lam).exp();
            let mut cumulative = weight;
            let mut term = v.clone();
            let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
            let mut k = 0u32;
            while 1.0 - cumulative > UNIFORMIZATION_TOL {
                k += 1;
                if k > 10_000 {
                    return Err(Error::StiffnessFailure(
                        "Poisson series failed to converge".into(),
                    ));
                }
                term = apply(&term);
                weight *= lam / k as f64;
                cumulative += weight;
                acc.iter_mut()
                    .zip(&term)
                    .for_each(|(a, x)| *a += weight * x);
            }
            v = acc;
        }
        Ok(v)
    }
}

/// β on `t_grid` for the chain on `fiber` with fast `rates` scaled by `n`,
/// killing weights `weights`, started from state index `z0`.
pub fn beta_solve(
    fiber: &FiberSpace,
    rates: &[f64],
    weights: &[f64],
    n: f64,
    z0: usize,
    t_grid: &[f64],
) -> Result<Vec<BetaVector>> {
    let sys = BetaSystem::for_fiber(fiber, rates, weights.to_vec(), n);
    t_grid
        .iter()
        .map(|&t| {
            let values = sys.from_state(z0, t)?;
            let survival = values.iter().sum();
            Ok(BetaVector {
                t,
                values,
                survival,
            })
        })
        .collect()
}
