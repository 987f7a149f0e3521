use nalgebra::{DMatrix, DVector};

use super::fiber::FiberSpace;
use crate::error::{Error, Result};
use crate::kinetics::Kinetics;

/// Fibers up to this size are solved by dense LU.
pub const DENSE_LIMIT: usize = 10_000;

const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub dpi: Vec<f64>,
}

pub fn stationary_distribution<K: Kinetics + ?Sized>(
    fiber: &FiberSpace,
    kin: &K,
    theta: f64,
) -> Result<StationaryDistribution> {
    let rates = fiber.transition_rates(kin, theta)?;
    let edges: Vec<(usize, usize)> = fiber.transitions.iter().map(|&(i, j, _)| (i, j)).collect();
    solve_stationary(fiber.len(), &edges, &rates, DENSE_LIMIT)
}

/// `πQ = 0, Σπ = 1` and `(∂π)Q = -π ∂Q, Σ∂π = 0` for the generator with the
/// given `(from, to)` edges and `(rate, ∂rate)` values.
pub fn solve_stationary(
    m: usize,
    edges: &[(usize, usize)],
    rates: &[(f64, f64)],
    dense_limit: usize,
) -> Result<StationaryDistribution> {
    if m == 1 {
        return Ok(StationaryDistribution {
            pi: vec![1.0],
            dpi: vec![0.0],
        });
    }
    let mut outflow = vec![0.0; m];
    for (&(i, j), &(r, _)) in edges.iter().zip(rates) {
        if i != j {
            outflow[i] += r;
        }
    }
    let q_norm = 2.0 * outflow.iter().cloned().fold(0.0, f64::max);
    if q_norm == 0.0 {
        return Err(Error::SingularSolve(
            "fast generator has no transitions".into(),
        ));
    }

    let (pi, dpi) = if m <= dense_limit {
        dense(m, edges, rates)?
    } else {
        iterative(m, edges, rates, &outflow, q_norm)?
    };

    let res = balance_residual(&pi, edges, rates, &outflow);
    if res > RESIDUAL_TOL * q_norm {
        return Err(Error::SingularSolve(format!(
            "stationary residual {res:e} exceeds tolerance"
        )));
    }
    Ok(StationaryDistribution { pi, dpi })
}

/// `‖πQ‖∞`.
pub fn balance_residual(
    pi: &[f64],
    edges: &[(usize, usize)],
    rates: &[(f64, f64)],
    outflow: &[f64],
) -> f64 {
    let mut flux: Vec<f64> = pi.iter().zip(outflow).map(|(p, o)| -p * o).collect();
    for (&(i, j), &(r, _)) in edges.iter().zip(rates) {
        if i != j {
            flux[j] += pi[i] * r;
        }
    }
    flux.iter().fold(0.0, |a, f| a.max(f.abs()))
}

fn finish_pi(mut pi: Vec<f64>) -> Result<Vec<f64>> {
    if pi.iter().any(|p| !p.is_finite() || *p < -1e-10) {
        return Err(Error::SingularSolve(
            "stationary vector has negative entries".into(),
        ));
    }
    pi.iter_mut().for_each(|p| *p = p.max(0.0));
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    Ok(pi)
}

/// `-(∂Q)ᵀπ`.
fn derivative_rhs(pi: &[f64], edges: &[(usize, usize)], rates: &[(f64, f64)]) -> Vec<f64> {
    let mut c = vec![0.0; pi.len()];
    for (&(i, j), &(_, dr)) in edges.iter().zip(rates) {
        if i != j {
            c[j] -= pi[i] * dr;
            c[i] += pi[i] * dr;
        }
    }
    c
}

fn dense(m: usize, edges: &[(usize, usize)], rates: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (&(i, j), &(r, _)) in edges.iter().zip(rates) {
        if i != j {
            a[(j, i)] += r;
            a[(i, i)] -= r;
        }
    }
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let lu = a.clone().lu();
    let singular = || Error::SingularSolve(format!("{m}x{m} balance system is singular"));
    let solve = |b: &DVector<f64>| -> Result<DVector<f64>> {
        let mut x = lu.solve(b).ok_or_else(singular)?;
        // one step of iterative refinement
        let r = b - &a * &x;
        x += lu.solve(&r).ok_or_else(singular)?;
        Ok(x)
    };

    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let pi = finish_pi(solve(&b)?.iter().copied().collect())?;

    let mut c = DVector::from_vec(derivative_rhs(&pi, edges, rates));
    c[m - 1] = 0.0;
    let dpi: Vec<f64> = solve(&c)?.iter().copied().collect();
    Ok((pi, dpi))
}

fn iterative(
    m: usize,
    edges: &[(usize, usize)],
    rates: &[(f64, f64)],
    outflow: &[f64],
    q_norm: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const MAX_SWEEPS: usize = 200_000;
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (&(i, j), &(r, _)) in edges.iter().zip(rates) {
        if i != j {
            incoming[j].push((i, r));
        }
    }

    let mut pi = vec![1.0 / m as f64; m];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        for j in 0..m {
            let inflow: f64 = incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
            pi[j] = inflow / outflow[j];
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
        if balance_residual(&pi, edges, rates, outflow) <= 0.1 * RESIDUAL_TOL * q_norm {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SingularSolve(
            "Gauss-Seidel stationary solve did not converge".into(),
        ));
    }
    let pi = finish_pi(pi)?;

    // Qᵀ y = c restricted to Σy = 0.
    let c = derivative_rhs(&pi, edges, rates);
    let c_norm = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut y = vec![0.0; m];
    for _ in 0..MAX_SWEEPS {
        for j in 0..m {
            let inflow: f64 = incoming[j].iter().map(|&(i, r)| y[i] * r).sum();
            y[j] = (inflow - c[j]) / outflow[j];
        }
        let s: f64 = y.iter().sum();
        y.iter_mut().zip(&pi).for_each(|(v, p)| *v -= s * p);
        let mut res = 0.0f64;
        for j in 0..m {
            let inflow: f64 = incoming[j].iter().map(|&(i, r)| y[i] * r).sum();
            res = res.max((inflow - outflow[j] * y[j] - c[j]).abs());
        }
        if res <= RESIDUAL_TOL * (q_norm + c_norm) {
            return Ok((pi, y));
        }
    }
    Err(Error::SingularSolve(
        "Gauss-Seidel derivative solve did not converge".into(),
    ))
}
