//! Canonical DP states: sorted machine load profiles and per-type leftover
//! counts.

use std::fmt;

use crate::numerics::Rational;

/// Non-decreasing vector of machine available times.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoadProfile(Vec<Rational>);

impl LoadProfile {
    pub fn zeros(machines: usize) -> Self {
        LoadProfile(vec![Rational::zero(); machines])
    }

    pub fn from_loads(mut loads: Vec<Rational>) -> Self {
        loads.sort();
        LoadProfile(loads)
    }

    pub fn loads(&self) -> &[Rational] {
        &self.0
    }

    pub fn machines(&self) -> usize {
        self.0.len()
    }

    /// `t* = min load`.
    pub fn t_star(&self) -> &Rational {
        &self.0[0]
    }

    /// Replaces the minimum entry with `value` and re-sorts.
    pub fn with_first(&self, value: Rational) -> Self {
        let mut loads = self.0.clone();
        loads[0] = value;
        LoadProfile::from_loads(loads)
    }

    /// Raises every entry below `t` to `t`.
    pub fn raised_to(&self, t: &Rational) -> Self {
        LoadProfile(
            self.0
                .iter()
                .map(|l| if l < t { t.clone() } else { l.clone() })
                .collect(),
        )
    }

    pub fn scaled(&self, k: u64) -> Self {
        LoadProfile(self.0.iter().map(|l| l.scale(k)).collect())
    }
}

/// Per-type counts of jobs not yet started. Within a type the next job is the
/// remaining one with the smallest probability, i.e. rank `N_j - ν_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leftover(Vec<usize>);

impl Leftover {
    pub fn new(counts: Vec<usize>) -> Self {
        Leftover(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, ty: usize) -> usize {
        self.0[ty]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn without_one(&self, ty: usize) -> Self {
        let mut counts = self.0.clone();
        counts[ty] -= 1;
        Leftover(counts)
    }

    /// Largest type index with jobs left (the smallest remaining size).
    pub fn last_nonzero(&self) -> Option<usize> {
        self.0.iter().rposition(|&c| c > 0)
    }
}

/// Canonical text key of a state, e.g. `m=0,3/2;nu=1,0`.
pub fn state_key(profile: &LoadProfile, nu: &Leftover) -> String {
    let m: Vec<String> = profile.loads().iter().map(Rational::to_string).collect();
    let n: Vec<String> = nu.counts().iter().map(usize::to_string).collect();
    format!("m={};nu={}", m.join(","), n.join(","))
}

impl fmt::Display for LoadProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m: Vec<String> = self.0.iter().map(Rational::to_string).collect();
        write!(f, "[{}]", m.join(", "))
    }
}
