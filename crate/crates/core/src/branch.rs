//! Step-to-step branch matching and permutations of three branch labels.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::model::C64;

/// All orderings of three slots, in lexicographic order.
pub const PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Costs closer than this are reported as an ambiguous match.
pub const AMBIGUITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matching {
    /// Branch `i` continues into slot `order[i]` of the new frame.
    pub order: [usize; 3],
    /// Total displacement `Σ |next[order[i]] − prev[i]|`.
    pub cost: f64,
    /// Largest single-branch displacement.
    pub max_step: f64,
    pub ambiguous: bool,
}

/// Minimum-total-distance assignment of `next` onto `prev` over all six
/// permutations; ties go to the lexicographically first permutation.
pub fn match_branches(prev: &[C64; 3], next: &[C64; 3]) -> Matching {
    let cost = |p: &[usize; 3]| (0..3).map(|i| (next[p[i]] - prev[i]).norm()).sum::<f64>();
    let mut best = PERMUTATIONS[0];
    let mut best_cost = cost(&best);
    let mut second = f64::INFINITY;
    for p in &PERMUTATIONS[1..] {
        let c = cost(p);
        if c < best_cost {
            second = best_cost;
            best_cost = c;
            best = *p;
        } else if c < second {
            second = c;
        }
    }
    let max_step = (0..3).map(|i| (next[best[i]] - prev[i]).norm()).fold(0.0, f64::max);
    Matching { order: best, cost: best_cost, max_step, ambiguous: second - best_cost < AMBIGUITY_TOL }
}

/// `min over pairings of max |a_i − b_π(i)|`.
pub fn multiset_distance(a: &[C64; 3], b: &[C64; 3]) -> f64 {
    PERMUTATIONS
        .iter()
        .map(|p| (0..3).map(|i| (a[i] - b[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// A bijection on three branch positions, stored zero-based: branch `i`
/// ends at the starting position of branch `map[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Permutation3 {
    map: [usize; 3],
}

impl Permutation3 {
    pub const IDENTITY: Self = Self { map: [0, 1, 2] };

    pub fn new(map: [usize; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for &m in &map {
            if m > 2 || seen[m] {
                return None;
            }
            seen[m] = true;
        }
        Some(Self { map })
    }

    /// From one-based images, e.g. `[3, 1, 2]` for `1 → 3, 2 → 1, 3 → 2`.
    pub fn from_one_based(map: [usize; 3]) -> Option<Self> {
        if map.contains(&0) {
            return None;
        }
        Self::new(map.map(|m| m - 1))
    }

    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn one_based(&self) -> [usize; 3] {
        self.map.map(|m| m + 1)
    }

    /// Apply `self`, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self { map: self.map.map(|m| next.map[m]) }
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::IDENTITY, |acc, _| acc.then(self))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Smallest `k ≥ 1` with `self^k = id`.
    pub fn order(&self) -> u32 {
        (1..=6).find(|&k| self.pow(k).is_identity()).unwrap()
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.map[i] == i).collect()
    }

    /// Cycle notation with one-based labels, fixed points omitted; the
    /// identity prints as `()`.
    pub fn cycle_notation(&self) -> String {
        let mut seen = [false; 3];
        let mut out = String::new();
        for start in 0..3 {
            if seen[start] || self.map[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = vec![start + 1];
            seen[start] = true;
            let mut k = self.map[start];
            while k != start {
                seen[k] = true;
                cycle.push(k + 1);
                k = self.map[k];
            }
            let body: Vec<String> = cycle.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("({})", body.join(" ")));
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }
}

impl fmt::Display for Permutation3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cycle_notation())
    }
}

impl Serialize for Permutation3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matching_follows_nearest_values() {
        let prev = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        let next = [c(-1.01, 0.0), c(1.01, 0.0), c(0.0, 0.99)];
        let m = match_branches(&prev, &next);
        assert_eq!(m.order, [1, 2, 0]);
        assert!(!m.ambiguous);
        assert!((m.cost - 0.03).abs() < 1e-12);
    }

    #[test]
    fn equal_costs_are_flagged_and_tie_broken_lexicographically() {
        let prev = [c(0.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)];
        let next = [c(0.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)];
        let m = match_branches(&prev, &next);
        assert!(m.ambiguous);
        assert_eq!(m.order, [0, 1, 2]);
    }

    #[test]
    fn cycle_notation_examples() {
        assert_eq!(Permutation3::IDENTITY.cycle_notation(), "()");
        assert_eq!(Permutation3::from_one_based([1, 3, 2]).unwrap().cycle_notation(), "(2 3)");
        assert_eq!(Permutation3::from_one_based([2, 1, 3]).unwrap().cycle_notation(), "(1 2)");
        assert_eq!(Permutation3::from_one_based([3, 1, 2]).unwrap().cycle_notation(), "(1 3 2)");
    }

    #[test]
    fn orders() {
        assert_eq!(Permutation3::IDENTITY.order(), 1);
        assert_eq!(Permutation3::from_one_based([2, 1, 3]).unwrap().order(), 2);
        assert_eq!(Permutation3::from_one_based([3, 1, 2]).unwrap().order(), 3);
    }

    #[test]
    fn invalid_maps_rejected() {
        assert!(Permutation3::new([0, 0, 1]).is_none());
        assert!(Permutation3::new([0, 1, 3]).is_none());
        assert!(Permutation3::from_one_based([0, 1, 2]).is_none());
    }

    proptest! {
        #[test]
        fn power_is_repeated_composition(i in 0usize..6, n in 0u32..8) {
            let p = Permutation3::new(PERMUTATIONS[i]).unwrap();
            let mut acc = Permutation3::IDENTITY;
            for _ in 0..n {
                acc = acc.then(&p);
            }
            prop_assert_eq!(p.pow(n), acc);
            prop_assert!(p.pow(p.order()).is_identity());
        }

        #[test]
        fn matching_recovers_shuffle(
            re in proptest::array::uniform3(-3.0f64..3.0),
            im in proptest::array::uniform3(-3.0f64..3.0),
            i in 0usize..6,
        ) {
            let prev = [0, 1, 2].map(|k| c(re[k] + 10.0 * k as f64, im[k]));
            let p = PERMUTATIONS[i];
            let mut next = prev;
            for k in 0..3 {
                next[p[k]] = prev[k] + c(1e-3, -1e-3);
            }
            prop_assert_eq!(match_branches(&prev, &next).order, p);
        }
    }
}
