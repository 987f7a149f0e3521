use std::fmt;

use super::ReactionNetwork;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "ok  " } else { "WARN" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Structural checks that keep the process inside the nonnegative orthant and
/// rule out explosion. Never fails; problems are reported as warnings.
pub fn validate_assumptions(net: &ReactionNetwork) -> ValidationReport {
    let mut checks = vec![Check {
        name: "state-space",
        passed: true,
        detail: "mass-action propensities vanish unless all reactants are present".into(),
    }];

    // Reactions that increase the total molecule count must grow at most linearly.
    let births: Vec<usize> = (0..net.reactions.len())
        .filter(|&k| net.reactions[k].zeta.iter().sum::<i64>() > 0)
        .collect();
    let bad: Vec<usize> = births
        .iter()
        .copied()
        .filter(|&k| net.reactions[k].order() > 1)
        .collect();
    if bad.is_empty() {
        let detail = if births.is_empty() {
            "no reaction increases the total count".to_string()
        } else {
            format!(
                "{} count-increasing reaction(s), all of order <= 1",
                births.len()
            )
        };
        checks.push(Check {
            name: "linear-growth",
            passed: true,
            detail,
        });
    }
    for k in bad {
        checks.push(Check {
            name: "linear-growth",
            passed: false,
            detail: format!(
                "reaction {} ({}) increases the total count with reactant order {}",
                k + 1,
                net.equation(k),
                net.reactions[k].order()
            ),
        });
    }

    checks.push(Check {
        name: "smoothness",
        passed: true,
        detail: "rates base*theta^p are smooth in theta".into(),
    });
    ValidationReport { checks }
}
