//! TOML model documents.
//!
//! ```toml
//! species = ["S1", "S2", "S3"]
//! initial_state = [20, 0, 0]
//! N0 = 10000
//! theta = 1.0
//!
//! [[reactions]]
//! reactants = { S1 = 1 }
//! products = { S2 = 1 }
//! rate_base = 1.0
//! rate_theta_exponent = 1
//! beta = 0
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RateConstant, Reaction, ReactionNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    species: Vec<String>,
    initial_state: Vec<i64>,
    #[serde(rename = "N0")]
    n0: i64,
    theta: f64,
    reactions: Vec<ReactionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionDoc {
    reactants: BTreeMap<String, i64>,
    products: BTreeMap<String, i64>,
    rate_base: f64,
    rate_theta_exponent: i64,
    beta: i64,
}

pub fn parse_model(document: &str) -> Result<ReactionNetwork> {
    let doc: ModelDoc = toml::from_str(document).map_err(|e| toml_error(document, &e))?;
    let index: BTreeMap<&str, usize> = doc
        .species
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let d = doc.species.len();

    let complex = |m: &BTreeMap<String, i64>| -> Result<Vec<(usize, u32)>> {
        m.iter()
            .map(|(name, &count)| {
                let i = *index
                    .get(name.as_str())
                    .ok_or_else(|| Error::Species(name.clone()))?;
                if count < 0 {
                    return Err(Error::Value(format!(
                        "negative multiplicity {count} for `{name}`"
                    )));
                }
                let count = u32::try_from(count)
                    .map_err(|_| Error::Value(format!("multiplicity {count} too large")))?;
                Ok((i, count))
            })
            .collect()
    };

    let mut reactions = Vec::with_capacity(doc.reactions.len());
    for (k, r) in doc.reactions.iter().enumerate() {
        let reactants = complex(&r.reactants)?;
        let products = complex(&r.products)?;
        if r.rate_theta_exponent < 0 {
            return Err(Error::Value(format!(
                "reaction {}: negative rate_theta_exponent {}",
                k + 1,
                r.rate_theta_exponent
            )));
        }
        let rate = RateConstant::new(r.rate_base, r.rate_theta_exponent as u32)
            .map_err(|e| Error::Value(format!("reaction {}: {e}", k + 1)))?;
        reactions.push(Reaction::new(d, reactants, products, r.beta, rate));
    }
    if doc.n0 <= 0 {
        return Err(Error::Value(format!("N0 must be positive, got {}", doc.n0)));
    }
    ReactionNetwork::new(
        doc.species,
        reactions,
        doc.initial_state,
        doc.n0 as u64,
        doc.theta,
    )
}

pub fn to_model_string(net: &ReactionNetwork) -> String {
    let names = net.species_names();
    let complex = |c: &[(usize, u32)]| {
        c.iter()
            .map(|&(i, m)| (names[i].clone(), m as i64))
            .collect()
    };
    let doc = ModelDoc {
        species: names.clone(),
        initial_state: net.x0.clone(),
        n0: net.n0 as i64,
        theta: net.theta_nominal,
        reactions: net
            .reactions
            .iter()
            .map(|r| ReactionDoc {
                reactants: complex(&r.reactants),
                products: complex(&r.products),
                rate_base: r.rate.base,
                rate_theta_exponent: r.rate.theta_exponent as i64,
                beta: r.beta,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("model document serializes")
}

fn toml_error(document: &str, e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    if message.contains("missing field") || message.contains("unknown field") {
        return Error::Schema(message);
    }
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &document[..span.start.min(document.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
            (Some(line), Some(column))
        }
        None => (None, None),
    };
    Error::Parse {
        message,
        line,
        column,
    }
}
