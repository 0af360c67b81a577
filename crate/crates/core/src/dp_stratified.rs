//! Optimal stratified policy: memoized recursion over load profiles whose
//! entries lie on the time grid, with start times restricted to `Q` and a
//! mandatory hold after every long job.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_bigint::BigUint;
use serde::Serialize;

use crate::dp_exact::improves;
use crate::error::SolveError;
use crate::instance::{build_groups, round_for_divisibility, GroupStructure, Instance, Rounded};
use crate::numerics::Rational;
use crate::policy::{PolicyTable, TableDecision};
use crate::state::{state_key, Leftover, LoadProfile};
use crate::timegrid::{build_grid, TimeGrid};

pub const DEFAULT_STATE_CAP: usize = 5_000_000;
pub const DEFAULT_IDLE_CHAIN_CAP: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct StratOptions {
    pub state_cap: usize,
    pub idle_chain_cap: usize,
}

impl Default for StratOptions {
    fn default() -> Self {
        StratOptions {
            state_cap: DEFAULT_STATE_CAP,
            idle_chain_cap: DEFAULT_IDLE_CHAIN_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub relevant_time_points: usize,
    pub max_profiles_per_timepoint: usize,
    pub states: usize,
    /// `N^n ε^{-2n}`
    pub time_point_ceiling: String,
    /// `Π_h C(ε^{-2|G_h|} + m, m)`
    pub profile_ceiling: String,
}

#[derive(Clone, Debug)]
pub struct StratSolution {
    pub value: f64,
    pub decisions: BTreeMap<(LoadProfile, Leftover), TableDecision>,
    pub table: PolicyTable,
    pub diagnostics: Diagnostics,
}

/// `m^j`: the least-loaded machine takes a long type-`ty` job and is held to
/// the first `Q` point at or after both its completion and the group
/// threshold.
pub fn update_profile_long(
    m: &LoadProfile,
    ty: usize,
    inst: &Instance,
    grid: &TimeGrid,
) -> LoadProfile {
    m.with_first(long_hold(m.t_star(), ty, inst, grid))
}

fn long_hold(t: &Rational, ty: usize, inst: &Instance, grid: &TimeGrid) -> Rational {
    let h = grid.group_of(ty);
    let done = t + inst.size(ty);
    let target = if &done < grid.p_circ(h) {
        grid.p_circ(h).clone()
    } else {
        done
    };
    grid.q_successor(h, &target)
}

/// `m^0`: every machine below the next admissible start of the smallest
/// remaining type is raised to that time.
pub fn update_profile_idle(
    m: &LoadProfile,
    nu: &Leftover,
    grid: &TimeGrid,
) -> Result<(LoadProfile, Rational), SolveError> {
    let j = nu
        .last_nonzero()
        .ok_or_else(|| SolveError::Grid("idle advance with no jobs left".into()))?;
    let t = grid.q_successor(grid.group_of(j), m.t_star());
    if &t <= m.t_star() {
        return Err(SolveError::Grid(format!(
            "idle advance from {} does not progress for type {}",
            m.t_star(),
            j + 1
        )));
    }
    Ok((m.raised_to(&t), t))
}

type Key = (LoadProfile, Leftover);

struct StratDp<'a> {
    inst: &'a Instance,
    grid: &'a TimeGrid,
    opts: StratOptions,
    memo: HashMap<Key, (f64, TableDecision)>,
}

impl StratDp<'_> {
    fn prob_next(&self, nu: &Leftover, ty: usize) -> f64 {
        let probs = &self.inst.types()[ty].probs;
        probs[probs.len() - nu.get(ty)]
    }

    fn cost(&mut self, m: &LoadProfile, nu: &Leftover, idle_run: usize) -> Result<f64, SolveError> {
        if nu.is_empty() {
            return Ok(0.0);
        }
        let key = (m.clone(), nu.clone());
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(*v);
        }
        let t = m.t_star();
        let startable: Vec<usize> = self
            .grid
            .allowed_types(t)
            .into_iter()
            .filter(|&ty| nu.get(ty) > 0)
            .collect();
        let best = if startable.is_empty() {
            if idle_run >= self.opts.idle_chain_cap {
                return Err(SolveError::IdleChain {
                    consecutive: idle_run + 1,
                    state: state_key(m, nu),
                });
            }
            let (next, until) = update_profile_idle(m, nu, self.grid)?;
            (self.cost(&next, nu, idle_run + 1)?, TableDecision::Idle { until })
        } else {
            let tf = t.to_f64();
            let mut best: Option<(f64, TableDecision)> = None;
            for ty in startable {
                let q = self.prob_next(nu, ty);
                let rest = nu.without_one(ty);
                let hold = long_hold(t, ty, self.inst, self.grid);
                let long = self.cost(&m.with_first(hold.clone()), &rest, 0)?;
                let mut v = q * (long + tf + self.inst.size(ty).to_f64());
                if q < 1.0 {
                    v += (1.0 - q) * (self.cost(m, &rest, 0)? + tf);
                }
                if improves(v, best.as_ref().map(|b| b.0)) {
                    best = Some((
                        v,
                        TableDecision::Start {
                            ty,
                            hold_if_long: Some(hold),
                        },
                    ));
                }
            }
            best.expect("at least one startable type")
        };
        let v = best.0;
        self.memo.insert(key, best);
        if self.memo.len() > self.opts.state_cap {
            return Err(SolveError::StateCap {
                cap: self.opts.state_cap,
                states: self.memo.len(),
            });
        }
        Ok(v)
    }

    fn diagnostics(&self, groups: &GroupStructure) -> Diagnostics {
        let mut per_time: BTreeMap<&Rational, BTreeSet<&LoadProfile>> = BTreeMap::new();
        for (m, _) in self.memo.keys() {
            per_time.entry(m.t_star()).or_default().insert(m);
        }
        Diagnostics {
            relevant_time_points: per_time.len(),
            max_profiles_per_timepoint: per_time.values().map(BTreeSet::len).max().unwrap_or(0),
            states: self.memo.len(),
            time_point_ceiling: time_point_ceiling(self.inst).to_string(),
            profile_ceiling: profile_ceiling(self.inst, groups).to_string(),
        }
    }
}

/// `N^n ε^{-2n}` for `N` jobs of `n` types.
pub fn time_point_ceiling(inst: &Instance) -> BigUint {
    let n = inst.n_types() as u32;
    BigUint::from(inst.total_jobs()).pow(n) * BigUint::from(inst.eps_den()).pow(2 * n)
}

/// `Π_h C(ε^{-2|G_h|} + m, m)`.
pub fn profile_ceiling(inst: &Instance, groups: &GroupStructure) -> BigUint {
    let m = inst.machines() as u64;
    let mut total = BigUint::from(1u32);
    for g in &groups.groups {
        let a = BigUint::from(inst.eps_den()).pow(2 * g.len() as u32);
        let mut binom = BigUint::from(1u32);
        for i in 1..=m {
            binom = binom * (&a + i) / i;
        }
        total *= binom;
    }
    total
}

fn check_ceilings(d: &Diagnostics) -> Result<(), SolveError> {
    let tp: BigUint = d.time_point_ceiling.parse().expect("decimal ceiling");
    let pc: BigUint = d.profile_ceiling.parse().expect("decimal ceiling");
    if BigUint::from(d.relevant_time_points) > tp {
        return Err(SolveError::Ceiling(format!(
            "{} time points above {tp}",
            d.relevant_time_points
        )));
    }
    if BigUint::from(d.max_profiles_per_timepoint) > pc {
        return Err(SolveError::Ceiling(format!(
            "{} profiles at one time point above {pc}",
            d.max_profiles_per_timepoint
        )));
    }
    Ok(())
}

pub fn solve_stratified(
    inst: &Instance,
    groups: &GroupStructure,
    grid: &TimeGrid,
) -> Result<StratSolution, SolveError> {
    solve_stratified_with(inst, groups, grid, StratOptions::default())
}

/// Solves on an instance that already satisfies the divisibility conditions
/// behind `grid`.
pub fn solve_stratified_with(
    inst: &Instance,
    groups: &GroupStructure,
    grid: &TimeGrid,
    opts: StratOptions,
) -> Result<StratSolution, SolveError> {
    let mut dp = StratDp {
        inst,
        grid,
        opts,
        memo: HashMap::new(),
    };
    let root = (LoadProfile::zeros(inst.machines()), Leftover::new(inst.counts()));
    let value = dp.cost(&root.0, &root.1, 0)?;
    let diagnostics = dp.diagnostics(groups);
    check_ceilings(&diagnostics)?;
    let decisions = extract_decisions(&dp, root);
    let table = PolicyTable {
        kind: "stratified".into(),
        machines: inst.machines(),
        entries: decisions
            .iter()
            .map(|((m, nu), d)| (state_key(m, nu), d.clone()))
            .collect(),
    };
    Ok(StratSolution {
        value,
        decisions,
        table,
        diagnostics,
    })
}

fn extract_decisions(dp: &StratDp<'_>, root: Key) -> BTreeMap<Key, TableDecision> {
    let mut out = BTreeMap::new();
    let mut queue = VecDeque::from([root]);
    while let Some(key) = queue.pop_front() {
        if key.1.is_empty() || out.contains_key(&key) {
            continue;
        }
        let (m, nu) = &key;
        let d = dp.memo[&key].1.clone();
        match &d {
            TableDecision::Idle { until } => queue.push_back((m.raised_to(until), nu.clone())),
            TableDecision::Start { ty, hold_if_long } => {
                let rest = nu.without_one(*ty);
                let hold = hold_if_long.clone().expect("stratified starts carry a hold");
                queue.push_back((m.with_first(hold), rest.clone()));
                if dp.prob_next(nu, *ty) < 1.0 {
                    queue.push_back((m.clone(), rest));
                }
            }
        }
        out.insert(key, d);
    }
    out
}

/// Divisibility rounding, grid, and stratified solution for one instance.
#[derive(Clone, Debug)]
pub struct StratifiedRun {
    pub rounded: Rounded,
    pub groups: GroupStructure,
    pub grid: TimeGrid,
    pub solution: StratSolution,
}

pub fn solve_stratified_rounded(
    inst: &Instance,
    opts: StratOptions,
) -> Result<StratifiedRun, SolveError> {
    let (rounded, groups) = round_for_divisibility(inst, &build_groups(inst))?;
    let grid = build_grid(&rounded.instance, &groups)?;
    let solution = solve_stratified_with(&rounded.instance, &groups, &grid, opts)?;
    Ok(StratifiedRun {
        rounded,
        groups,
        grid,
        solution,
    })
}
