//! Reaction networks with mass-action kinetics, separated time-scales and a
//! scalar sensitivity parameter.

mod file;
mod output;
mod timescale;
mod validate;

pub use file::{parse_model, to_model_string};
pub use output::{parse_output_expr, OutputFunction, StateFunction, MAX_TOTAL_DEGREE};
pub use timescale::{classify, first_timescale, TimescaleClassification};
pub use validate::{validate_assumptions, Check, ValidationReport};

use std::collections::HashMap;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::kinetics::Kinetics;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// Rate constant `base * theta^theta_exponent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstant {
    pub base: f64,
    pub theta_exponent: u32,
}

impl RateConstant {
    pub fn new(base: f64, theta_exponent: u32) -> Result<Self> {
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Value(format!(
                "rate base must be positive, got {base}"
            )));
        }
        Ok(Self {
            base,
            theta_exponent,
        })
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.base * theta.powi(self.theta_exponent as i32)
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match self.theta_exponent {
            0 => 0.0,
            p => p as f64 * self.base * theta.powi(p as i32 - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    /// `(species index, multiplicity)`, sorted by species index, multiplicities > 0.
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    /// Net change `products - reactants`.
    pub zeta: Vec<i64>,
    pub beta: i64,
    pub rate: RateConstant,
}

impl Reaction {
    pub fn new(
        dim: usize,
        reactants: Vec<(usize, u32)>,
        products: Vec<(usize, u32)>,
        beta: i64,
        rate: RateConstant,
    ) -> Self {
        let reactants = normalize_complex(reactants);
        let products = normalize_complex(products);
        let mut zeta = vec![0i64; dim];
        for &(i, m) in &products {
            zeta[i] += m as i64;
        }
        for &(i, m) in &reactants {
            zeta[i] -= m as i64;
        }
        Self {
            reactants,
            products,
            zeta,
            beta,
            rate,
        }
    }

    /// Total reactant order.
    pub fn order(&self) -> u32 {
        self.reactants.iter().map(|&(_, m)| m).sum()
    }

    /// Combinatorial factor `prod_i x_i! / (x_i - r_i)!`.
    pub fn combinations(&self, x: &[i64]) -> f64 {
        let mut acc = 1.0;
        for &(i, m) in &self.reactants {
            let xi = x[i];
            if xi < m as i64 {
                return 0.0;
            }
            for j in 0..m as i64 {
                acc *= (xi - j) as f64;
            }
        }
        acc
    }
}

fn normalize_complex(mut c: Vec<(usize, u32)>) -> Vec<(usize, u32)> {
    c.sort_unstable();
    let mut out: Vec<(usize, u32)> = Vec::with_capacity(c.len());
    for (i, m) in c {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += m,
            _ => out.push((i, m)),
        }
    }
    out.retain(|&(_, m)| m > 0);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    pub x0: Vec<i64>,
    pub n0: u64,
    pub theta_nominal: f64,
}

impl ReactionNetwork {
    pub fn new(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        x0: Vec<i64>,
        n0: u64,
        theta_nominal: f64,
    ) -> Result<Self> {
        if species.is_empty() || reactions.is_empty() {
            return Err(Error::Schema(
                "network needs at least one species and one reaction".into(),
            ));
        }
        let mut seen = HashMap::new();
        for (i, s) in species.iter().enumerate() {
            if seen.insert(s.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate species `{s}`")));
            }
        }
        let d = species.len();
        if x0.len() != d {
            return Err(Error::Schema(format!(
                "initial_state has {} entries for {d} species",
                x0.len()
            )));
        }
        if let Some(v) = x0.iter().find(|&&v| v < 0) {
            return Err(Error::Value(format!("negative initial count {v}")));
        }
        if n0 == 0 {
            return Err(Error::Value("N0 must be positive".into()));
        }
        if !(theta_nominal.is_finite() && theta_nominal > 0.0) {
            return Err(Error::Value(format!(
                "theta must be positive, got {theta_nominal}"
            )));
        }
        for r in &reactions {
            if r.zeta.len() != d || r.reactants.iter().chain(&r.products).any(|&(i, _)| i >= d) {
                return Err(Error::Schema(
                    "reaction references a species outside the network".into(),
                ));
            }
        }
        let species = species
            .into_iter()
            .enumerate()
            .map(|(index, name)| Species { name, index })
            .collect();
        Ok(Self {
            species,
            reactions,
            x0,
            n0,
            theta_nominal,
        })
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    /// Mass-action propensity and its exact θ-derivative.
    pub fn propensity(&self, k: usize, x: &[i64], theta: f64) -> Result<(f64, f64)> {
        let r = self.reactions.get(k).ok_or(Error::Index {
            index: k,
            len: self.reactions.len(),
        })?;
        let comb = r.combinations(x);
        Ok((r.rate.value(theta) * comb, r.rate.derivative(theta) * comb))
    }

    /// Human-readable reaction equation, e.g. `S1 + 2 S2 -> S3`.
    pub fn equation(&self, k: usize) -> String {
        let side = |c: &[(usize, u32)]| {
            if c.is_empty() {
                return "0".to_string();
            }
            c.iter()
                .map(|&(i, m)| {
                    let name = &self.species[i].name;
                    if m == 1 {
                        name.clone()
                    } else {
                        format!("{m} {name}")
                    }
                })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        let r = &self.reactions[k];
        format!("{} -> {}", side(&r.reactants), side(&r.products))
    }
}

impl Kinetics for ReactionNetwork {
    fn dim(&self) -> usize {
        self.species.len()
    }

    fn channels(&self) -> usize {
        self.reactions.len()
    }

    fn jump(&self, k: usize) -> &[i64] {
        &self.reactions[k].zeta
    }

    fn scale_exponent(&self, k: usize) -> Rational64 {
        Rational64::from_integer(self.reactions[k].beta)
    }

    fn initial_state(&self) -> Vec<i64> {
        self.x0.clone()
    }

    fn propensity(&self, k: usize, x: &[i64], theta: f64) -> Result<(f64, f64)> {
        ReactionNetwork::propensity(self, k, x, theta)
    }

    fn rates_into(&self, x: &[i64], theta: f64, out: &mut [f64]) -> Result<()> {
        for (slot, r) in out.iter_mut().zip(&self.reactions) {
            *slot = r.rate.value(theta) * r.combinations(x);
        }
        Ok(())
    }

    fn admissible(&self, x: &[i64]) -> bool {
        x.len() == self.species.len() && x.iter().all(|&v| v >= 0)
    }

    fn coordinate_names(&self) -> Vec<String> {
        self.species_names()
    }

    fn theta_nominal(&self) -> f64 {
        self.theta_nominal
    }
}

/// Built-in models.
pub mod models {
    use super::*;

    /// Three-species heat-shock network: `S1 -> S2` (rate θ), `S2 -> S1` (rate 2),
    /// both at β = 0, and the slow `S2 -> S3` (rate 5, β = -1). `N0 = 10^4`.
    pub fn heat_shock(v0: i64) -> ReactionNetwork {
        let rate = |b, p| RateConstant::new(b, p).expect("positive rate");
        let reactions = vec![
            Reaction::new(3, vec![(0, 1)], vec![(1, 1)], 0, rate(1.0, 1)),
            Reaction::new(3, vec![(1, 1)], vec![(0, 1)], 0, rate(2.0, 0)),
            Reaction::new(3, vec![(1, 1)], vec![(2, 1)], -1, rate(5.0, 0)),
        ];
        ReactionNetwork::new(
            vec!["S1".into(), "S2".into(), "S3".into()],
            reactions,
            vec![v0, 0, 0],
            10_000,
            1.0,
        )
        .expect("valid built-in model")
    }

    /// Model-file text of [`heat_shock`] with `v0 = 20`.
    pub const HEAT_SHOCK_MODEL: &str = r#"species = ["S1", "S2", "S3"]
initial_state = [20, 0, 0]
N0 = 10000
theta = 1.0

[[reactions]]
reactants = { S1 = 1 }
products = { S2 = 1 }
rate_base = 1.0
rate_theta_exponent = 1
beta = 0

[[reactions]]
reactants = { S2 = 1 }
products = { S1 = 1 }
rate_base = 2.0
rate_theta_exponent = 0
beta = 0

[[reactions]]
reactants = { S2 = 1 }
products = { S3 = 1 }
rate_base = 5.0
rate_theta_exponent = 0
beta = -1
"#;

    /// Birth-death `0 -> A` at rate θ, `A -> 0` at unit rate, single scale.
    pub fn birth_death(x0: i64, theta: f64) -> ReactionNetwork {
        let reactions = vec![
            Reaction::new(
                1,
                vec![],
                vec![(0, 1)],
                0,
                RateConstant {
                    base: 1.0,
                    theta_exponent: 1,
                },
            ),
            Reaction::new(
                1,
                vec![(0, 1)],
                vec![],
                0,
                RateConstant {
                    base: 1.0,
                    theta_exponent: 0,
                },
            ),
        ];
        ReactionNetwork::new(vec!["A".into()], reactions, vec![x0], 1, theta)
            .expect("valid built-in model")
    }

    /// Linear chain on three scales: `A <-> B` (rates θ, 2; β = 0),
    /// `B <-> C` (rates 3, 1; β = -1), `C -> D` (rate 4; β = -2), from `A = a0`.
    pub fn three_scale_chain(a0: i64) -> ReactionNetwork {
        let rate = |b, p| RateConstant::new(b, p).expect("positive rate");
        let reactions = vec![
            Reaction::new(4, vec![(0, 1)], vec![(1, 1)], 0, rate(1.0, 1)),
            Reaction::new(4, vec![(1, 1)], vec![(0, 1)], 0, rate(2.0, 0)),
            Reaction::new(4, vec![(1, 1)], vec![(2, 1)], -1, rate(3.0, 0)),
            Reaction::new(4, vec![(2, 1)], vec![(1, 1)], -1, rate(1.0, 0)),
            Reaction::new(4, vec![(2, 1)], vec![(3, 1)], -2, rate(4.0, 0)),
        ];
        ReactionNetwork::new(
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            reactions,
            vec![a0, 0, 0, 0],
            100,
            1.0,
        )
        .expect("valid built-in model")
    }

    /// Pure birth `0 -> A` at rate `base * θ^p`.
    pub fn pure_birth(base: f64, theta_exponent: u32) -> ReactionNetwork {
        let reactions = vec![Reaction::new(
            1,
            vec![],
            vec![(0, 1)],
            0,
            RateConstant {
                base,
                theta_exponent,
            },
        )];
        ReactionNetwork::new(vec!["A".into()], reactions, vec![0], 1, 1.0)
            .expect("valid built-in model")
    }
}
