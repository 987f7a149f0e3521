//! Extreme rays of `{v >= 0 : <v, a> = 0 for every row a}` by double description.

use num_integer::Integer;
use num_rational::Ratio;

/// Extreme rays, gcd-normalized and sorted in descending lexicographic order.
pub fn extreme_rays(dim: usize, equalities: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut rays: Vec<Vec<i128>> = (0..dim)
        .map(|i| {
            let mut e = vec![0i128; dim];
            e[i] = 1;
            e
        })
        .collect();

    for a in equalities.iter().filter(|a| a.iter().any(|&c| c != 0)) {
        let dots: Vec<i128> = rays.iter().map(|r| dot(r, a)).collect();
        let mut next: Vec<Vec<i128>> = rays
            .iter()
            .zip(&dots)
            .filter(|(_, &d)| d == 0)
            .map(|(r, _)| r.clone())
            .collect();
        for (p, &dp) in rays.iter().zip(&dots).filter(|(_, &d)| d > 0) {
            for (n, &dn) in rays.iter().zip(&dots).filter(|(_, &d)| d < 0) {
                if !adjacent(p, n, &rays) {
                    continue;
                }
                let mut r: Vec<i128> = p
                    .iter()
                    .zip(n)
                    .map(|(&pi, &ni)| dp * ni - dn * pi)
                    .collect();
                normalize(&mut r);
                if !next.contains(&r) {
                    next.push(r);
                }
            }
        }
        rays = next;
        if rays.is_empty() {
            break;
        }
    }

    let mut out: Vec<Vec<i64>> = rays
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|c| i64::try_from(c).expect("ray entries fit in i64"))
                .collect()
        })
        .collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out.dedup();
    out
}

fn dot(r: &[i128], a: &[i64]) -> i128 {
    r.iter().zip(a).map(|(&x, &y)| x * y as i128).sum()
}

fn zero_set(r: &[i128]) -> Vec<bool> {
    r.iter().map(|&c| c == 0).collect()
}

/// Combinatorial test: `p` and `n` are adjacent iff no other ray vanishes on
/// every coordinate where both of them vanish.
fn adjacent(p: &[i128], n: &[i128], rays: &[Vec<i128>]) -> bool {
    let zp = zero_set(p);
    let zn = zero_set(n);
    let common: Vec<usize> = (0..p.len()).filter(|&i| zp[i] && zn[i]).collect();
    !rays
        .iter()
        .filter(|r| r.as_slice() != p && r.as_slice() != n)
        .any(|r| common.iter().all(|&i| r[i] == 0))
}

fn normalize(r: &mut [i128]) {
    let g = r.iter().fold(0i128, |g, &c| g.gcd(&c));
    if g > 1 {
        r.iter_mut().for_each(|c| *c /= g);
    }
}

/// Greedily keeps the rows that increase the rank, in the given order.
pub fn independent_rows(rows: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut echelon: Vec<Vec<Ratio<i128>>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut kept = Vec::new();
    for row in rows {
        let mut r: Vec<Ratio<i128>> = row
            .iter()
            .map(|&c| Ratio::from_integer(c as i128))
            .collect();
        for (e, &p) in echelon.iter().zip(&pivots) {
            if r[p] != Ratio::from_integer(0) {
                let f = r[p] / e[p];
                for (ri, ei) in r.iter_mut().zip(e) {
                    *ri -= f * ei;
                }
            }
        }
        if let Some(p) = r.iter().position(|c| *c != Ratio::from_integer(0)) {
            echelon.push(r);
            pivots.push(p);
            kept.push(row.clone());
        }
    }
    kept
}

pub fn rank(rows: &[Vec<i64>]) -> usize {
    independent_rows(rows).len()
}
