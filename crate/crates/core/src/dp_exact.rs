//! Optimal non-anticipatory policy by memoized recursion over sorted load
//! profiles and per-type leftover counts, plus two independent oracles that
//! work on raw, uncompressed states.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::SolveError;
use crate::instance::Instance;
use crate::numerics::Rational;
use crate::policy::{PolicyTable, TableDecision};
use crate::state::{state_key, Leftover, LoadProfile};

pub const DEFAULT_JOB_CAP: usize = 12;
pub const DEFAULT_STATE_CAP: usize = 5_000_000;
pub const BRUTE_FORCE_CAP: usize = 6;
pub const IDLING_ORACLE_CAP: usize = 4;

/// Relative margin a later type must beat to replace the current argmin.
/// Keeps lowest-index tie-breaking stable under uniform scaling.
pub(crate) const TIE_MARGIN: f64 = 1e-12;

pub(crate) fn improves(candidate: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => candidate < b - TIE_MARGIN * b.abs(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExactOptions {
    pub job_cap: usize,
    pub state_cap: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            job_cap: DEFAULT_JOB_CAP,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub value: f64,
    /// Memoized states visited while solving.
    pub states: usize,
    /// Chosen type at every state reachable under the optimal policy.
    pub decisions: BTreeMap<(LoadProfile, Leftover), usize>,
    pub table: PolicyTable,
}

type Key = (LoadProfile, Leftover);

struct ExactDp<'a> {
    inst: &'a Instance,
    memo: HashMap<Key, (f64, usize)>,
    cap: usize,
}

impl ExactDp<'_> {
    fn prob_next(&self, nu: &Leftover, ty: usize) -> f64 {
        let probs = &self.inst.types()[ty].probs;
        probs[probs.len() - nu.get(ty)]
    }

    fn long_profile(&self, m: &LoadProfile, ty: usize) -> LoadProfile {
        m.with_first(m.t_star() + self.inst.size(ty))
    }

    fn cost(&mut self, m: &LoadProfile, nu: &Leftover) -> Result<f64, SolveError> {
        if nu.is_empty() {
            return Ok(0.0);
        }
        let key = (m.clone(), nu.clone());
        if let Some(&(v, _)) = self.memo.get(&key) {
            return Ok(v);
        }
        let t = m.t_star().to_f64();
        let mut best: Option<(f64, usize)> = None;
        for ty in 0..nu.counts().len() {
            if nu.get(ty) == 0 {
                continue;
            }
            let q = self.prob_next(nu, ty);
            let rest = nu.without_one(ty);
            let p = self.inst.size(ty).to_f64();
            let long = self.cost(&self.long_profile(m, ty), &rest)?;
            let mut v = q * (long + t + p);
            if q < 1.0 {
                let short = self.cost(m, &rest)?;
                v += (1.0 - q) * (short + t);
            }
            if improves(v, best.map(|b| b.0)) {
                best = Some((v, ty));
            }
        }
        let best = best.expect("some type has jobs left");
        self.memo.insert(key, best);
        if self.memo.len() > self.cap {
            return Err(SolveError::StateCap {
                cap: self.cap,
                states: self.memo.len(),
            });
        }
        Ok(best.0)
    }
}

pub fn solve_exact(inst: &Instance) -> Result<ExactSolution, SolveError> {
    solve_exact_with(inst, ExactOptions::default())
}

pub fn solve_exact_with(inst: &Instance, opts: ExactOptions) -> Result<ExactSolution, SolveError> {
    if inst.total_jobs() > opts.job_cap {
        return Err(SolveError::JobCap {
            jobs: inst.total_jobs(),
            cap: opts.job_cap,
        });
    }
    let mut dp = ExactDp {
        inst,
        memo: HashMap::new(),
        cap: opts.state_cap,
    };
    let root = (LoadProfile::zeros(inst.machines()), Leftover::new(inst.counts()));
    let value = dp.cost(&root.0, &root.1)?;

    let mut decisions = BTreeMap::new();
    let mut queue = VecDeque::from([root]);
    while let Some((m, nu)) = queue.pop_front() {
        if nu.is_empty() || decisions.contains_key(&(m.clone(), nu.clone())) {
            continue;
        }
        let ty = dp.memo[&(m.clone(), nu.clone())].1;
        let q = dp.prob_next(&nu, ty);
        let rest = nu.without_one(ty);
        queue.push_back((dp.long_profile(&m, ty), rest.clone()));
        if q < 1.0 {
            queue.push_back((m.clone(), rest));
        }
        decisions.insert((m, nu), ty);
    }
    let entries = decisions
        .iter()
        .map(|((m, nu), &ty)| {
            (
                state_key(m, nu),
                TableDecision::Start {
                    ty,
                    hold_if_long: None,
                },
            )
        })
        .collect();
    Ok(ExactSolution {
        value,
        states: dp.memo.len(),
        decisions,
        table: PolicyTable {
            kind: "exact".into(),
            machines: inst.machines(),
            entries,
        },
    })
}

struct RawJob {
    size: Rational,
    q: f64,
}

fn raw_jobs(inst: &Instance) -> Vec<RawJob> {
    inst.jobs()
        .into_iter()
        .map(|j| RawJob {
            size: inst.size(j.ty).clone(),
            q: inst.prob(j),
        })
        .collect()
}

/// Expectimax over machine-indexed loads and explicit remaining-job sets.
/// Every remaining job is a candidate at every decision; no memo, no
/// symmetry reduction.
pub fn brute_force_oracle(inst: &Instance) -> Result<f64, SolveError> {
    let jobs = raw_jobs(inst);
    if jobs.len() > BRUTE_FORCE_CAP {
        return Err(SolveError::JobCap {
            jobs: jobs.len(),
            cap: BRUTE_FORCE_CAP,
        });
    }
    fn go(jobs: &[RawJob], loads: &mut Vec<Rational>, remaining: u32) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let mut i = 0;
        for k in 1..loads.len() {
            if loads[k] < loads[i] {
                i = k;
            }
        }
        let t = loads[i].clone();
        let mut best = f64::INFINITY;
        for (j, job) in jobs.iter().enumerate() {
            if remaining >> j & 1 == 0 {
                continue;
            }
            let rest = remaining & !(1 << j);
            let end = &t + &job.size;
            loads[i] = end.clone();
            let long = go(jobs, loads, rest) + end.to_f64();
            loads[i] = t.clone();
            let short = go(jobs, loads, rest) + t.to_f64();
            best = best.min(job.q * long + (1.0 - job.q) * short);
        }
        best
    }
    let mut loads = vec![Rational::zero(); inst.machines()];
    Ok(go(&jobs, &mut loads, (1u32 << jobs.len()) - 1))
}

/// Expectimax that, besides starting any job on a free machine, may leave a
/// free machine idle until the next completion epoch.
pub fn idling_oracle(inst: &Instance) -> Result<f64, SolveError> {
    let jobs = raw_jobs(inst);
    if jobs.len() > IDLING_ORACLE_CAP {
        return Err(SolveError::JobCap {
            jobs: jobs.len(),
            cap: IDLING_ORACLE_CAP,
        });
    }
    struct Epoch {
        t: Rational,
        busy_until: Vec<Rational>,
        deferred: Vec<bool>,
    }
    fn go(jobs: &[RawJob], s: &mut Epoch, remaining: u32) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let free = (0..s.busy_until.len()).find(|&i| s.busy_until[i] <= s.t && !s.deferred[i]);
        let Some(i) = free else {
            // every free machine waits: jump to the next completion
            let next = s
                .busy_until
                .iter()
                .filter(|b| **b > s.t)
                .min()
                .expect("deferral requires a running job")
                .clone();
            let old_t = std::mem::replace(&mut s.t, next);
            let old_def = std::mem::replace(&mut s.deferred, vec![false; s.busy_until.len()]);
            let v = go(jobs, s, remaining);
            s.t = old_t;
            s.deferred = old_def;
            return v;
        };
        let t = s.t.clone();
        let mut best = f64::INFINITY;
        for (j, job) in jobs.iter().enumerate() {
            if remaining >> j & 1 == 0 {
                continue;
            }
            let rest = remaining & !(1 << j);
            let end = &t + &job.size;
            let old = std::mem::replace(&mut s.busy_until[i], end.clone());
            let long = go(jobs, s, rest) + end.to_f64();
            s.busy_until[i] = old;
            let short = go(jobs, s, rest) + t.to_f64();
            best = best.min(job.q * long + (1.0 - job.q) * short);
        }
        if s.busy_until.iter().any(|b| *b > t) {
            s.deferred[i] = true;
            best = best.min(go(jobs, s, remaining));
            s.deferred[i] = false;
        }
        best
    }
    let m = inst.machines();
    let mut s = Epoch {
        t: Rational::zero(),
        busy_until: vec![Rational::zero(); m],
        deferred: vec![false; m],
    };
    Ok(go(&jobs, &mut s, (1u32 << jobs.len()) - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::JobType;
    use crate::numerics::rat;
    use crate::policy::{ListPolicy, Policy};
    use crate::simulate::expected_cost_exact;

    fn inst(m: usize, types: &[(i64, &[f64])]) -> Instance {
        Instance::new(
            m,
            13,
            types
                .iter()
                .map(|&(p, qs)| JobType {
                    size: rat(p, 1).unwrap(),
                    probs: qs.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    /// `Σ_k (number of jobs finishing at or after position k) · p`, computed
    /// per machine for SPT dealt round-robin.
    fn spt_value(m: usize, sizes: &[i64]) -> f64 {
        let mut s = sizes.to_vec();
        s.sort();
        let n = s.len();
        s.iter()
            .enumerate()
            .map(|(i, &p)| ((n - 1 - i) / m + 1) as f64 * p as f64)
            .sum()
    }

    #[test]
    fn small_stochastic_example() {
        let i = inst(1, &[(3, &[0.5]), (1, &[1.0])]);
        let sol = solve_exact(&i).unwrap();
        assert!((sol.value - 3.5).abs() < 1e-12);
        let root = (LoadProfile::zeros(1), Leftover::new(vec![1, 1]));
        assert_eq!(sol.decisions[&root], 1);
        assert!((brute_force_oracle(&i).unwrap() - 3.5).abs() < 1e-12);
        assert!((idling_oracle(&i).unwrap() - 3.5).abs() < 1e-12);
        assert!((expected_cost_exact(&sol.table, &i).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn trivial_cases() {
        let one = inst(1, &[(5, &[1.0])]);
        assert_eq!(solve_exact(&one).unwrap().value, 5.0);
        assert_eq!(idling_oracle(&inst(1, &[(5, &[0.25])])).unwrap(), 1.25);
        let two = inst(2, &[(3, &[0.5]), (1, &[1.0])]);
        assert!((solve_exact(&two).unwrap().value - 2.5).abs() < 1e-12);
        let empty = Instance::new(1, 13, vec![]).unwrap();
        assert_eq!(solve_exact(&empty).unwrap().value, 0.0);
        assert!(solve_exact(&empty).unwrap().table.is_empty());
        assert_eq!(brute_force_oracle(&empty).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_instances_match_spt() {
        for (m, sizes) in [(1, vec![4, 1, 2]), (2, vec![5, 3, 3, 1, 2]), (3, vec![7, 2, 2, 1])] {
            let types: Vec<(i64, Vec<f64>)> = sizes.iter().map(|&p| (p, vec![1.0])).collect();
            let refs: Vec<(i64, &[f64])> = types.iter().map(|(p, q)| (*p, q.as_slice())).collect();
            let i = inst(m, &refs);
            let want = spt_value(m, &sizes);
            assert!((brute_force_oracle(&i).unwrap() - want).abs() < 1e-9);
            assert!((solve_exact(&i).unwrap().value - want).abs() < 1e-9);
        }
        let two = inst(1, &[(2, &[1.0]), (1, &[1.0])]);
        assert_eq!(idling_oracle(&two).unwrap(), 4.0);
    }

    #[test]
    fn caps_are_enforced() {
        let big = inst(1, &[(1, &[0.5; 13])]);
        assert!(matches!(solve_exact(&big), Err(SolveError::JobCap { .. })));
        assert!(brute_force_oracle(&big).is_err());
        let mid = inst(2, &[(3, &[0.5; 4]), (1, &[0.5; 4])]);
        let opts = ExactOptions {
            job_cap: 12,
            state_cap: 5,
        };
        assert!(matches!(
            solve_exact_with(&mid, opts),
            Err(SolveError::StateCap { .. })
        ));
    }

    #[test]
    fn removing_a_job_never_hurts() {
        let i = inst(2, &[(9, &[0.25, 0.5]), (3, &[0.5, 1.0]), (1, &[0.25])]);
        let full = solve_exact(&i).unwrap().value;
        for j in i.jobs() {
            assert!(solve_exact(&i.without(j)).unwrap().value <= full + 1e-9);
        }
    }

    #[test]
    fn scaling_preserves_decisions() {
        let i = inst(2, &[(9, &[0.25, 0.5]), (3, &[0.5, 1.0]), (1, &[0.25, 1.0])]);
        let a = solve_exact(&i).unwrap();
        let b = solve_exact(&i.scaled(&rat(7, 1).unwrap()).unwrap()).unwrap();
        assert!((b.value - 7.0 * a.value).abs() <= 1e-9 * b.value);
        let scaled: BTreeMap<_, _> = a
            .decisions
            .iter()
            .map(|((m, nu), &ty)| ((m.scaled(7), nu.clone()), ty))
            .collect();
        assert_eq!(scaled, b.decisions);
    }

    #[test]
    fn list_policies_never_beat_optimum() {
        let i = inst(2, &[(9, &[0.25, 0.5]), (3, &[0.5, 1.0]), (1, &[0.25])]);
        let opt = solve_exact(&i).unwrap().value;
        let mut order = i.jobs();
        order.reverse();
        let p: &dyn Policy = &ListPolicy { order };
        assert!(expected_cost_exact(p, &i).unwrap() >= opt - 1e-9);
    }
}
