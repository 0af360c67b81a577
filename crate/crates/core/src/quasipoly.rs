//! Composite policy for many job types: sizes are split into small, medium,
//! and large classes relative to an estimate of the optimum; large and small
//! jobs are scheduled greedily, and medium jobs follow a stratified table
//! computed on their power-of-`c` rounding.

use std::collections::HashSet;

use crate::dp_stratified::{solve_stratified_rounded, StratOptions};
use crate::error::{InstanceError, PolicyError};
use crate::instance::{partition_sml, round_to_powers_of_c, Instance, JobId, SmlPartition};
use crate::numerics::Rational;
use crate::policy::{sept_policy, Decision, Policy, PolicyTable, StateView, TableDecision};
use crate::simulate::{expected_cost_exact, expected_cost_mc, ENUMERATION_CAP};
use crate::state::{state_key, Leftover, LoadProfile};

pub const DEFAULT_BASE: u64 = 169;
const SCALE_TRIALS: u64 = 10_000;
const SCALE_SEED: u64 = 0;
/// Uncertain jobs up to which the SEPT estimate is enumerated exactly.
const SCALE_ENUMERATION_CAP: usize = 14;

#[derive(Clone, Debug)]
pub struct QuasiPolyPolicy {
    pub partition: SmlPartition,
    /// Estimate of the optimal cost used for the class thresholds.
    pub scale: f64,
    /// Earliest start for medium jobs once small jobs exist.
    pub medium_floor: Rational,
    /// Uniform factor applied to medium sizes before power rounding.
    pub prescale: Rational,
    pub inner: PolicyTable,
    /// For each inner type, the original jobs it stands for, by probability.
    pub inner_jobs: Vec<Vec<JobId>>,
    large: HashSet<JobId>,
    medium: HashSet<JobId>,
    index_order: Vec<JobId>,
}

/// Expected cost of SEPT, exact when enumeration is affordable.
pub fn sept_scale(inst: &Instance) -> Result<f64, PolicyError> {
    let sept = sept_policy(inst);
    let uncertain = inst.jobs().into_iter().filter(|&j| inst.prob(j) < 1.0).count();
    if uncertain <= SCALE_ENUMERATION_CAP.min(ENUMERATION_CAP) {
        expected_cost_exact(&sept, inst)
    } else {
        Ok(expected_cost_mc(&sept, inst, SCALE_TRIALS, SCALE_SEED)?.mean)
    }
}

pub fn quasipoly_policy(
    inst: &Instance,
    c: u64,
    scale: Option<f64>,
    opts: StratOptions,
) -> Result<QuasiPolyPolicy, PolicyError> {
    let scale = match scale {
        Some(s) => s,
        None => sept_scale(inst)?,
    };
    let partition = partition_sml(inst, scale)?;
    let medium: HashSet<JobId> = partition.medium.iter().copied().collect();

    // medium sub-instance, one sub-type per original type
    let mut sub_types = Vec::new();
    let mut sub_origin = Vec::new();
    for ty in 0..inst.n_types() {
        if medium.contains(&JobId { ty, rank: 0 }) {
            sub_types.push(inst.types()[ty].clone());
            sub_origin.push(ty);
        }
    }
    let sub = Instance::new(inst.machines(), inst.eps_den(), sub_types)?;
    let powered = round_to_powers_of_c(&sub, c)?;
    let run = solve_stratified_rounded(&powered.rounded.instance, opts)?;
    let inner_inst = &run.rounded.instance;
    let mut inner_jobs: Vec<Vec<(f64, JobId)>> = vec![Vec::new(); inner_inst.n_types()];
    for (sub_ty, &orig_ty) in sub_origin.iter().enumerate() {
        let t = run.rounded.type_map[powered.rounded.type_map[sub_ty]];
        for (rank, &q) in inst.types()[orig_ty].probs.iter().enumerate() {
            inner_jobs[t].push((q, JobId { ty: orig_ty, rank }));
        }
    }
    let inner_jobs = inner_jobs
        .into_iter()
        .map(|mut v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let n = inst.total_jobs().max(1) as u64;
    let medium_floor = if partition.small.is_empty() {
        Rational::zero()
    } else {
        &Rational::from_f64(scale).map_err(InstanceError::from)? / &Rational::from_int(n)
    };
    Ok(QuasiPolyPolicy {
        large: partition.large.iter().copied().collect(),
        medium,
        index_order: inst.jobs(),
        partition,
        scale,
        medium_floor,
        prescale: powered.prescale,
        inner: run.solution.table,
        inner_jobs,
    })
}

fn start(job: JobId) -> Decision {
    Decision::Start {
        job,
        hold_if_long: None,
    }
}

impl QuasiPolyPolicy {
    fn first_unstarted<'a>(
        &self,
        view: &StateView<'_>,
        mut jobs: impl Iterator<Item = &'a JobId>,
    ) -> Option<JobId> {
        jobs.find(|&&j| !view.is_started(j)).copied()
    }

    /// Time the medium phase begins: the floor, or the latest completion of
    /// a large or small job if later.
    pub fn medium_start(&self, view: &StateView<'_>) -> Rational {
        let mut t0 = self.medium_floor.clone();
        for rec in view.history {
            if self.medium.contains(&rec.job) {
                continue;
            }
            let end = if rec.long {
                &rec.start + view.inst.size(rec.job.ty)
            } else {
                rec.start.clone()
            };
            if end > t0 {
                t0 = end;
            }
        }
        t0
    }

    fn medium_decision(&self, view: &StateView<'_>) -> Result<Decision, PolicyError> {
        let t0 = self.medium_start(view);
        if view.t_star < &t0 {
            return Ok(Decision::Idle { until: t0 });
        }
        let to_inner = |t: &Rational| &(t - &t0) * &self.prescale;
        let from_inner = |t: &Rational| &t0 + &(t / &self.prescale);
        let loads: Vec<Rational> = view.loads.iter().flatten().map(to_inner).collect();
        let nu = Leftover::new(
            self.inner_jobs
                .iter()
                .map(|jobs| jobs.iter().filter(|&&j| !view.is_started(j)).count())
                .collect(),
        );
        let key = state_key(&LoadProfile::from_loads(loads), &nu);
        match self.inner.entries.get(&key) {
            None => Err(PolicyError::MissingState(key)),
            Some(TableDecision::Idle { until }) => Ok(Decision::Idle {
                until: from_inner(until),
            }),
            Some(TableDecision::Start { ty, hold_if_long }) => {
                let jobs = &self.inner_jobs[*ty];
                let job = jobs[jobs.len() - nu.get(*ty)];
                Ok(Decision::Start {
                    job,
                    hold_if_long: hold_if_long.as_ref().map(from_inner),
                })
            }
        }
    }
}

impl Policy for QuasiPolyPolicy {
    fn decide(&self, view: &StateView<'_>) -> Result<Decision, PolicyError> {
        let large_long = view
            .history
            .iter()
            .any(|r| r.long && self.large.contains(&r.job));
        if large_long {
            return self
                .first_unstarted(view, self.index_order.iter())
                .map(start)
                .ok_or_else(|| PolicyError::InvalidDecision("no jobs left".into()));
        }
        if let Some(j) = self
            .first_unstarted(view, self.partition.large.iter())
            .or_else(|| self.first_unstarted(view, self.partition.small.iter()))
        {
            return Ok(start(j));
        }
        self.medium_decision(view)
    }
}
