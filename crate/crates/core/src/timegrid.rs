//! Time grid for stratified policies: interval endpoints, their `(1 + 5ε)`
//! stretch, per-group thresholds, and the nested allowed-start sets `Q`.
//!
//! Groups are indexed from 0 (largest sizes) to `γ - 1` (smallest sizes), so
//! `Q[γ-1] ⊇ … ⊇ Q[0] ∋ 0`. Every set is infinite; membership and successor
//! queries are answered in closed form from the per-group endpoint segments,
//! never by enumeration.
//!
//! Layout of `Q[h]`:
//! - below the first stretched threshold `p°[γ-1]`: multiples of `ε·rep[γ-1]`
//!   (the base grid, shared by every group);
//! - from there up to `p°[h-1]` (unbounded for `h = 0`): the stretched
//!   endpoints `l'_k`;
//! - at and beyond `p°[h-1]`: fine points `l'_k + i·ε·rep[h]` with
//!   `l'_k + i·ε·rep[h] < l'_{k+1} - pmax[h]`.

use serde::Serialize;

use crate::error::SolveError;
use crate::instance::{GroupStructure, Instance};
use crate::numerics::Rational;

/// Per-group thresholds `p*` and their stretched images `p° = (1 + 5ε) p*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub p_star: Vec<Rational>,
    pub p_circ: Vec<Rational>,
}

/// Run of endpoints `start + i·pitch` for `i < count`, optionally followed by
/// one midpoint, covering `[start, end)`. The last segment is the unbounded
/// tail.
#[derive(Clone, Debug, PartialEq)]
struct Segment {
    start: Rational,
    pitch: Rational,
    count: u64,
    mid: Option<Rational>,
    end: Option<Rational>,
    group: usize,
}

/// Interval `[left, right)` of the unstretched grid with its group label.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub left: Rational,
    pub right: Rational,
    pub group: usize,
}

#[derive(Clone, Debug)]
pub struct TimeGrid {
    eps: Rational,
    stretch: Rational,
    thresholds: Thresholds,
    reps: Vec<Rational>,
    pmax: Vec<Rational>,
    /// `ε·rep[h]`
    fine_pitch: Vec<Rational>,
    group_of: Vec<usize>,
    segments: Vec<Segment>,
}

fn p_star(eps: &Rational, groups: &GroupStructure) -> Vec<Rational> {
    let gamma = groups.gamma();
    let factor = &(&Rational::one() + eps) * eps;
    (0..gamma)
        .map(|h| {
            let mut extra = Rational::zero();
            for k in h..gamma.saturating_sub(1) {
                let below: usize = groups.groups[k + 1..].iter().map(Vec::len).sum();
                extra += &groups.rep[k].scale(below as u64 + 3);
            }
            &groups.rep[h] + &(&factor * &extra)
        })
        .collect()
}

/// Builds thresholds, endpoint segments, and the `Q` structure for a
/// divisibility-rounded instance.
pub fn build_grid(inst: &Instance, groups: &GroupStructure) -> Result<TimeGrid, SolveError> {
    let gamma = groups.gamma();
    if gamma == 0 {
        return Err(SolveError::Grid("instance has no job types".into()));
    }
    let eps = inst.epsilon();
    let stretch = &Rational::one() + &eps.scale(5);
    let p_star = p_star(&eps, groups);
    let p_circ = p_star.iter().map(|p| &stretch * p).collect();
    let fine_pitch: Vec<Rational> = groups.rep.iter().map(|r| &eps * r).collect();

    let mut segments = vec![Segment {
        start: Rational::zero(),
        pitch: p_star[gamma - 1].clone(),
        count: 1,
        mid: None,
        end: Some(p_star[gamma - 1].clone()),
        group: gamma - 1,
    }];
    for h in (1..gamma).rev() {
        let start = p_star[h].clone();
        let next = &p_star[h - 1];
        let pitch = fine_pitch[h].clone();
        let bound = next
            .checked_sub(&pitch)
            .map_err(|_| SolveError::Grid(format!("groups {h} and {} overlap", h - 1)))?;
        // points start + i·pitch strictly below `bound`
        let count = match bound.checked_sub(&start) {
            Ok(span) if !span.is_zero() => {
                let c = span.ceil_to_multiple_of(&pitch).expect("positive pitch");
                let n = (&c / &pitch).numer().clone();
                u64::try_from(n).map_err(|_| SolveError::Grid("too many endpoints".into()))?
            }
            _ => return Err(SolveError::Grid(format!("group {h} region shorter than its pitch"))),
        };
        let last = &start + &pitch.scale(count - 1);
        let mid = &last + &(&(next - &last) / &Rational::from_int(2));
        segments.push(Segment {
            start,
            pitch,
            count,
            mid: Some(mid),
            end: Some(next.clone()),
            group: h,
        });
    }
    segments.push(Segment {
        start: p_star[0].clone(),
        pitch: fine_pitch[0].clone(),
        count: u64::MAX,
        mid: None,
        end: None,
        group: 0,
    });

    let grid = TimeGrid {
        eps,
        stretch,
        thresholds: Thresholds { p_star, p_circ },
        reps: groups.rep.clone(),
        pmax: groups.pmax.clone(),
        fine_pitch,
        group_of: groups.group_of.clone(),
        segments,
    };
    // Fine points must fit in every tail interval or successor queries would
    // never terminate.
    let tail_len = &grid.stretch * &grid.fine_pitch[0];
    for h in 1..gamma {
        if grid.pmax[h] >= tail_len {
            return Err(SolveError::Grid(format!(
                "group {h} jobs ({}) do not fit in a tail interval ({tail_len})",
                grid.pmax[h]
            )));
        }
    }
    Ok(grid)
}

impl Segment {
    fn point(&self, i: u64) -> Rational {
        &self.start + &self.pitch.scale(i)
    }

    /// Interval of this segment containing `u` (`u >= start`, `u < end`).
    fn interval(&self, u: &Rational) -> (Rational, Rational) {
        if let (Some(mid), Some(end)) = (&self.mid, &self.end) {
            if u >= mid {
                return (mid.clone(), end.clone());
            }
        }
        let off = u.checked_sub(&self.start).expect("u inside segment");
        let i = off.floor_div(&self.pitch).expect("positive pitch");
        let i = u64::try_from(i).unwrap_or(u64::MAX).min(self.count - 1);
        let right = if i + 1 < self.count {
            self.point(i + 1)
        } else {
            self.mid
                .clone()
                .or_else(|| self.end.clone())
                .expect("bounded segment has an end")
        };
        (self.point(i), right)
    }
}

impl TimeGrid {
    pub fn epsilon(&self) -> &Rational {
        &self.eps
    }

    /// `1 + 5ε`.
    pub fn stretch(&self) -> &Rational {
        &self.stretch
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn gamma(&self) -> usize {
        self.reps.len()
    }

    pub fn group_of(&self, ty: usize) -> usize {
        self.group_of[ty]
    }

    pub fn n_types(&self) -> usize {
        self.group_of.len()
    }

    pub fn p_circ(&self, h: usize) -> &Rational {
        &self.thresholds.p_circ[h]
    }

    pub fn pmax(&self, h: usize) -> &Rational {
        &self.pmax[h]
    }

    pub fn rep(&self, h: usize) -> &Rational {
        &self.reps[h]
    }

    fn segment_for(&self, u: &Rational) -> &Segment {
        let idx = self.segments.partition_point(|s| &s.start <= u);
        &self.segments[idx - 1]
    }

    /// Unstretched interval `[l_k, l_{k+1})` containing `u`.
    pub fn interval_at(&self, u: &Rational) -> Interval {
        let seg = self.segment_for(u);
        let (left, right) = seg.interval(u);
        Interval {
            left,
            right,
            group: seg.group,
        }
    }

    /// Stretched interval `[l'_k, l'_{k+1})` containing `t`.
    pub fn stretched_interval_at(&self, t: &Rational) -> (Rational, Rational) {
        let iv = self.interval_at(&(t / &self.stretch));
        (&iv.left * &self.stretch, &iv.right * &self.stretch)
    }

    /// Smallest stretched endpoint `>= t` (or `> t` when `strict`).
    fn endpoint_from(&self, t: &Rational, strict: bool) -> Rational {
        let (l, r) = self.stretched_interval_at(t);
        if &l == t && !strict {
            l
        } else {
            r
        }
    }

    pub fn is_stretched_endpoint(&self, t: &Rational) -> bool {
        self.stretched_interval_at(t).0 == *t
    }

    /// The first `limit` unstretched endpoints `l_0 < l_1 < …`.
    pub fn prefix_endpoints(&self, limit: usize) -> Vec<Rational> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let n = if seg.end.is_none() { u64::MAX } else { seg.count };
            for i in 0..n {
                if out.len() >= limit {
                    return out;
                }
                out.push(seg.point(i));
            }
            if let Some(mid) = &seg.mid {
                if out.len() >= limit {
                    return out;
                }
                out.push(mid.clone());
            }
        }
        out
    }

    /// Every interval before the tail, plus the first `tail` tail intervals.
    pub fn intervals(&self, tail: usize) -> Vec<Interval> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let n = if seg.end.is_none() { tail as u64 } else { seg.count };
            for i in 0..n {
                out.push(self.interval_at(&seg.point(i)));
            }
            if let Some(mid) = &seg.mid {
                out.push(self.interval_at(mid));
            }
        }
        out
    }

    fn base_end(&self) -> &Rational {
        &self.thresholds.p_circ[self.gamma() - 1]
    }

    fn base_pitch(&self) -> &Rational {
        &self.fine_pitch[self.gamma() - 1]
    }

    /// Start of the fine region of group `h`: `p°[h-1]`, none for `h = 0`.
    fn fine_start(&self, h: usize) -> Option<&Rational> {
        (h > 0).then(|| &self.thresholds.p_circ[h - 1])
    }

    /// Exact membership `t ∈ Q[h]`.
    pub fn q_contains(&self, h: usize, t: &Rational) -> bool {
        if t < self.base_end() {
            return t.is_multiple_of(self.base_pitch());
        }
        match self.fine_start(h) {
            Some(f) if t >= f => {
                let (l, r) = self.stretched_interval_at(t);
                (t - &l).is_multiple_of(&self.fine_pitch[h]) && t + &self.pmax[h] < r
            }
            _ => self.is_stretched_endpoint(t),
        }
    }

    /// `min { s ∈ Q[h] : s >= t }`.
    pub fn q_successor(&self, h: usize, t: &Rational) -> Rational {
        self.successor_impl(h, t, false)
    }

    /// `min { s ∈ Q[h] : s > t }`.
    pub fn q_next_after(&self, h: usize, t: &Rational) -> Rational {
        self.successor_impl(h, t, true)
    }

    fn successor_impl(&self, h: usize, t: &Rational, strict: bool) -> Rational {
        let mut t = t.clone();
        let mut strict = strict;
        if &t < self.base_end() {
            let s = ceil_multiple(&t, self.base_pitch(), strict);
            if &s < self.base_end() {
                return s;
            }
            t = self.base_end().clone();
            strict = false;
        }
        let fine_start = self.fine_start(h);
        if fine_start.is_none_or(|f| &t < f) {
            let s = self.endpoint_from(&t, strict);
            match fine_start {
                Some(f) if &s >= f => {
                    t = f.clone();
                    strict = false;
                }
                _ => return s,
            }
        }
        loop {
            let (l, r) = self.stretched_interval_at(&t);
            let off = &t - &l;
            let s = &l + &ceil_multiple(&off, &self.fine_pitch[h], strict);
            if &s + &self.pmax[h] < r {
                return s;
            }
            t = r;
            strict = false;
        }
    }

    /// Types whose group admits `t` as a start time.
    pub fn allowed_types(&self, t: &Rational) -> Vec<usize> {
        let admits: Vec<bool> = (0..self.gamma()).map(|h| self.q_contains(h, t)).collect();
        (0..self.n_types())
            .filter(|&ty| admits[self.group_of[ty]])
            .collect()
    }

    /// First `k` members of `Q[h]`.
    pub fn q_members(&self, h: usize, k: usize) -> Vec<Rational> {
        let mut out = Vec::with_capacity(k);
        let mut t = Rational::zero();
        while out.len() < k {
            out.push(t.clone());
            t = self.q_next_after(h, &t);
        }
        out
    }
}

fn ceil_multiple(x: &Rational, g: &Rational, strict: bool) -> Rational {
    let c = x.ceil_to_multiple_of(g).expect("positive pitch");
    if strict && &c == x {
        &c + g
    } else {
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_groups, JobType};
    use crate::numerics::rat;

    fn grid_for(e: u64, sizes: &[(i64, i64)]) -> (Instance, TimeGrid) {
        let inst = Instance::new(
            1,
            e,
            sizes
                .iter()
                .map(|&(n, d)| JobType {
                    size: rat(n, d).unwrap(),
                    probs: vec![1.0],
                })
                .collect(),
        )
        .unwrap();
        let g = build_groups(&inst);
        let grid = build_grid(&inst, &g).unwrap();
        (inst, grid)
    }

    fn r(n: i64, d: i64) -> Rational {
        rat(n, d).unwrap()
    }

    #[test]
    fn one_type_thresholds_and_tail() {
        let (_, g) = grid_for(13, &[(169, 1)]);
        assert_eq!(g.thresholds().p_star, vec![r(169, 1)]);
        assert_eq!(g.thresholds().p_circ, vec![r(234, 1)]);
        // l'_k = (18/13)(169 + 13(k-1)) for k >= 1
        for k in 1..6i64 {
            let l = r(18, 13) * r(169 + 13 * (k - 1), 1);
            assert!(g.is_stretched_endpoint(&l), "{l}");
            assert!(g.q_contains(0, &l));
        }
        assert!(g.q_contains(0, &Rational::zero()));
        assert!(g.q_contains(0, &r(234, 1)));
        assert!(!g.q_contains(0, &r(235, 1)));
        assert!(!g.q_contains(0, &r(250, 1)));
    }

    #[test]
    fn one_type_successors() {
        let (_, g) = grid_for(13, &[(169, 1)]);
        // base grid below 234 has pitch 13
        assert_eq!(g.q_successor(0, &r(169, 1)), r(169, 1));
        assert_eq!(g.q_successor(0, &r(170, 1)), r(182, 1));
        assert_eq!(g.q_successor(0, &r(222, 1)), r(234, 1));
        assert_eq!(g.q_successor(0, &r(235, 1)), r(252, 1));
        assert_eq!(g.q_successor(0, &r(403, 1)), r(414, 1));
        assert_eq!(g.q_successor(0, &r(414, 1)), r(414, 1));
    }

    #[test]
    fn two_type_figure_parameters() {
        // ε = 1/8, p_2 = p_1/80
        let (_, g) = grid_for(8, &[(80, 1), (1, 1)]);
        let stretch = g.stretch().clone();
        assert_eq!(&r(80, 1) * &stretch, r(130, 1));
        assert_eq!(&r(90, 1) * &stretch, r(585, 4));
        let t = g.thresholds();
        // p*_2 = p_2; p*_1 = 80 + (9/8)(1/8)(1 + 3)·80
        assert_eq!(t.p_star, vec![r(125, 1), r(1, 1)]);
        assert_eq!(t.p_circ, vec![r(1625, 8), r(13, 8)]);
        // tail spaced ε·p_1 = 10 from p*_1
        assert!(g.is_stretched_endpoint(&(&r(135, 1) * &stretch)));
        assert!(!g.is_stretched_endpoint(&(&r(130, 1) * &stretch)));
        // the group-2 region starts at p*_2 with pitch 1/8
        let pre = g.prefix_endpoints(4);
        assert_eq!(pre, vec![r(0, 1), r(1, 1), r(9, 8), r(5, 4)]);
        // endpoints lie in both sets
        let l = &r(2, 1) * &stretch;
        assert!(g.q_contains(0, &l) && g.q_contains(1, &l));
        assert_eq!(g.allowed_types(&l), vec![0, 1]);
        assert_eq!(g.allowed_types(&Rational::zero()), vec![0, 1]);
    }

    #[test]
    fn fine_points_past_the_large_threshold() {
        let (_, g) = grid_for(8, &[(80, 1), (1, 1)]);
        let pc1 = g.p_circ(0).clone();
        // inside [p°_1, p°_1 + (13/8)·10): fine type-2 points at pitch 1/8
        let t = &pc1 + &r(1, 8);
        assert!(g.q_contains(1, &t));
        assert!(!g.q_contains(0, &t));
        assert_eq!(g.allowed_types(&t), vec![1]);
        // just past a fine point the successor is the next fine point
        let just_after = &t + &r(1, 100);
        assert_eq!(g.q_successor(1, &just_after), &t + &r(1, 8));
        // the last admissible fine point keeps a type-2 job inside the interval
        let right = &pc1 + &(&r(10, 1) * g.stretch());
        let last = g.q_successor(1, &(&right - &r(1, 1)));
        assert!(&last + &Rational::one() < right || last == right);
    }

    #[test]
    fn interval_lengths_respect_group_pitch() {
        for sizes in [&[(28561, 1), (169, 1), (1, 1)][..], &[(5000, 1), (13, 1)], &[(80, 1), (1, 1)]] {
            let (inst, g) = grid_for(13, sizes);
            let groups = build_groups(&inst);
            for iv in g.intervals(5).iter().skip(1) {
                let len = &iv.right - &iv.left;
                let pitch = &g.eps * &groups.rep[iv.group];
                assert!(len <= pitch && len >= &pitch / &r(2, 1), "{iv:?}");
            }
            for h in 0..g.gamma() {
                assert!(g.is_stretched_endpoint(g.p_circ(h)));
                assert!(g.q_contains(h, g.p_circ(h)));
            }
        }
    }

    #[test]
    fn successor_is_minimal_member() {
        let (_, g) = grid_for(8, &[(80, 1), (1, 1)]);
        for h in 0..2 {
            let members = g.q_members(h, 400);
            for w in members.windows(2) {
                assert!(w[0] < w[1]);
                assert_eq!(g.q_next_after(h, &w[0]), w[1]);
                assert!(g.q_contains(h, &w[1]));
                // a point strictly between two members is not a member
                let between = &(&w[0] + &w[1]) / &r(2, 1);
                assert!(!g.q_contains(h, &between));
                assert_eq!(g.q_successor(h, &between), w[1]);
            }
        }
    }

    #[test]
    fn single_group_uses_only_the_tail() {
        let (_, g) = grid_for(13, &[(100, 1), (90, 1)]);
        assert_eq!(g.gamma(), 1);
        assert_eq!(g.allowed_types(g.p_circ(0)), vec![0, 1]);
    }

    use crate::instance::round_for_divisibility;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sets_are_nested_and_successors_minimal(
            small in 1i64..40,
            mid_ratio in 200i64..600,
            big_ratio in 200i64..600,
            three in any::<bool>(),
            probes in proptest::collection::vec((0i64..40_000_000, 1i64..50), 12),
        ) {
            let mut sizes = vec![(small, 1), (small * mid_ratio, 1)];
            if three {
                sizes.push((small * mid_ratio * big_ratio, 1));
            }
            let inst = Instance::new(
                1,
                13,
                sizes.iter().map(|&(n, d)| JobType { size: r(n, d), probs: vec![0.5] }).collect(),
            ).unwrap();
            let groups = build_groups(&inst);
            let (rounded, rgroups) = round_for_divisibility(&inst, &groups).unwrap();
            let g = build_grid(&rounded.instance, &rgroups).unwrap();
            let scale = if three { 1 } else { 100 };
            for &(num, den) in &probes {
                let t = r(num / scale, den);
                for h in 0..g.gamma() {
                    let s = g.q_successor(h, &t);
                    prop_assert!(s >= t);
                    prop_assert!(g.q_contains(h, &s));
                    if h + 1 < g.gamma() {
                        if g.q_contains(h, &t) {
                            prop_assert!(g.q_contains(h + 1, &t));
                        }
                        prop_assert!(g.q_successor(h + 1, &t) <= s);
                    }
                    // members of the next-larger group's set leave no gap shorter
                    // than pmax, except inside that group's own fine region
                    if h >= 1 {
                        let below_fine = h == 1 || &s < g.p_circ(h - 2);
                        let next = g.q_next_after(h - 1, &s);
                        if below_fine && next < &s + g.pmax(h) {
                            prop_assert!(g.q_contains(h - 1, &s));
                        }
                    }
                }
            }
        }
    }
}
