//! Mod-r cohomology of the cyclic configuration space of the sphere
//! `S^{d−1}` modulo ℤ_r, and the orbit-count lower bounds it yields.
//!
//! For `d` even the Betti numbers are 2 on
//! `{ℓ(d−2), ℓ(d−2)+1 : 1 ≤ ℓ ≤ r−2}` and 1 on the rest of
//! `0..=(r−1)(d−2)+1`; for `d` odd the doubled degrees are
//! `{2ℓ(d−2), 2ℓ(d−2)+1 : 1 ≤ ℓ ≤ (r−3)/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyProfile {
    pub d: usize,
    pub r: usize,
    /// Indexed by degree `0..=(r−1)(d−2)+1`.
    pub betti: Vec<u64>,
    pub total: u64,
    pub alternating_sum: i64,
    pub cat_lower: u64,
    pub bound_general: u64,
    pub bound_generic: u64,
}

pub fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| n % k != 0)
}

fn validate(d: usize, r: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::InvalidParameters(format!("need d ≥ 3, got {d}")));
    }
    if r % 2 == 0 {
        return Err(Error::InvalidParameters(format!("r must be an odd prime, got {r}")));
    }
    if !is_prime(r) {
        return Err(Error::InvalidParameters(format!("r must be prime, got {r}")));
    }
    Ok(())
}

fn top_degree(d: usize, r: usize) -> usize {
    (r - 1) * (d - 2) + 1
}

pub fn betti_numbers(d: usize, r: usize) -> Result<CohomologyProfile> {
    validate(d, r)?;
    let top = top_degree(d, r);
    let mut betti = vec![1u64; top + 1];
    let (step, count) = if d % 2 == 0 {
        (d - 2, r - 2)
    } else {
        (2 * (d - 2), (r - 3) / 2)
    };
    for l in 1..=count {
        betti[l * step] = 2;
        betti[l * step + 1] = 2;
    }
    let total = betti.iter().sum();
    let alternating_sum = betti
        .iter()
        .enumerate()
        .map(|(n, &b)| if n % 2 == 0 { b as i64 } else { -(b as i64) })
        .sum();
    Ok(CohomologyProfile {
        d,
        r,
        betti,
        total,
        alternating_sum,
        cat_lower: cat_lower_bound(d, r)?,
        bound_general: orbit_lower_bound(d, r, false)?,
        bound_generic: orbit_lower_bound(d, r, true)?,
    })
}

/// Lusternik–Schnirelmann category bound `(r−1)(d−2)+1`.
pub fn cat_lower_bound(d: usize, r: usize) -> Result<u64> {
    validate(d, r)?;
    Ok(top_degree(d, r) as u64)
}

/// Minimal number of distinct r-periodic ℤ_r-orbits: the category bound in
/// general, the Betti sum for a generic table.
pub fn orbit_lower_bound(d: usize, r: usize, generic: bool) -> Result<u64> {
    validate(d, r)?;
    let b = match (generic, d % 2 == 0) {
        (false, _) => top_degree(d, r),
        (true, true) => (r - 1) * d,
        (true, false) => (r - 1) * (d - 1),
    };
    Ok(b as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Degree sets enumerated independently of the step formula.
    fn doubled_degrees(d: usize, r: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if d % 2 == 0 {
            for l in 1..=r - 2 {
                out.extend([l * (d - 2), l * (d - 2) + 1]);
            }
        } else {
            for l in 1..=(r - 3) / 2 {
                out.extend([2 * l * (d - 2), 2 * l * (d - 2) + 1]);
            }
        }
        out
    }

    #[test]
    fn spot_profiles() {
        assert_eq!(betti_numbers(3, 3).unwrap().betti, vec![1, 1, 1, 1]);
        assert_eq!(betti_numbers(3, 3).unwrap().total, 4);
        assert_eq!(betti_numbers(4, 3).unwrap().betti, vec![1, 1, 2, 2, 1, 1]);
        assert_eq!(betti_numbers(4, 3).unwrap().total, 8);
        assert_eq!(betti_numbers(3, 5).unwrap().betti, vec![1, 1, 2, 2, 1, 1]);
        assert_eq!(betti_numbers(3, 5).unwrap().total, 8);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(cat_lower_bound(3, 3).unwrap(), 3);
        assert_eq!(cat_lower_bound(4, 3).unwrap(), 5);
        assert_eq!(cat_lower_bound(3, 5).unwrap(), 5);
        assert_eq!(orbit_lower_bound(3, 3, false).unwrap(), 3);
        assert_eq!(orbit_lower_bound(3, 3, true).unwrap(), 4);
        assert_eq!(orbit_lower_bound(4, 3, true).unwrap(), 8);
        assert_eq!(orbit_lower_bound(5, 7, false).unwrap(), 19);
    }

    #[test]
    fn invalid_parameters() {
        for (d, r) in [(3, 4), (3, 2), (3, 9), (2, 3), (3, 1), (0, 3)] {
            assert!(matches!(betti_numbers(d, r), Err(Error::InvalidParameters(_))), "{d} {r}");
            assert!(cat_lower_bound(d, r).is_err());
            assert!(orbit_lower_bound(d, r, true).is_err());
        }
    }

    #[test]
    fn primality() {
        let primes: Vec<usize> = (0..40).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]);
    }

    #[test]
    fn sweep_consistency() {
        for d in 3..=10 {
            for r in [3, 5, 7, 11] {
                let p = betti_numbers(d, r).unwrap();
                let top = (r - 1) * (d - 2) + 1;
                assert_eq!(p.betti.len(), top + 1);
                assert_eq!(p.total, p.bound_generic);
                assert_eq!(p.alternating_sum, 0);
                assert_eq!(p.cat_lower, p.bound_general);
                assert_eq!(p.cat_lower as usize, top);
                assert_eq!(p.betti[0], 1);
                assert_eq!(p.betti[top], 1);
                let doubled = doubled_degrees(d, r);
                for (n, &b) in p.betti.iter().enumerate() {
                    assert_eq!(b, if doubled.contains(&n) { 2 } else { 1 });
                }
            }
        }
    }

    proptest! {
        #[test]
        fn betti_entries_are_one_or_two(d in 3usize..40, k in 0usize..6) {
            let r = [3, 5, 7, 11, 13, 17][k];
            let p = betti_numbers(d, r).unwrap();
            prop_assert!(p.betti.iter().all(|&b| b == 1 || b == 2));
            prop_assert_eq!(p.total, p.bound_generic);
            prop_assert_eq!(p.alternating_sum, 0);
        }
    }
}
