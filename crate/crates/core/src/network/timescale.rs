use num_rational::Rational64;

use crate::kinetics::Kinetics;

/// Reactions split by the sign of `β_k + γ` at a reference exponent `γ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimescaleClassification {
    pub gamma: Rational64,
    pub natural: Vec<usize>,
    pub fast: Vec<usize>,
    pub slow: Vec<usize>,
}

pub fn classify<K: Kinetics + ?Sized>(kin: &K, gamma: Rational64) -> TimescaleClassification {
    let mut c = TimescaleClassification {
        gamma,
        natural: vec![],
        fast: vec![],
        slow: vec![],
    };
    for k in 0..kin.channels() {
        let e = kin.scale_exponent(k) + gamma;
        if e == Rational64::from_integer(0) {
            c.natural.push(k);
        } else if e > Rational64::from_integer(0) {
            c.fast.push(k);
        } else {
            c.slow.push(k);
        }
    }
    c
}

/// `γ1 = -max β_k` and the channels that are natural at that scale.
pub fn first_timescale<K: Kinetics + ?Sized>(kin: &K) -> (Rational64, Vec<usize>) {
    let max = (0..kin.channels())
        .map(|k| kin.scale_exponent(k))
        .max()
        .expect("network has at least one channel");
    let gamma1 = -max;
    let natural = (0..kin.channels())
        .filter(|&k| kin.scale_exponent(k) == max)
        .collect();
    (gamma1, natural)
}
