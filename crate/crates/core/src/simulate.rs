//! Replay of a policy against a realization, exact expectation by
//! enumerating realizations, and seeded Monte Carlo estimation.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::PolicyError;
use crate::instance::{Instance, JobId};
use crate::numerics::{Rational, SeedStream};
use crate::policy::{Decision, Policy, StartRecord, StateView};

/// Uncertain jobs allowed in exact enumeration.
pub const ENUMERATION_CAP: usize = 20;

/// Long/short outcome of every job, indexed `[type][rank]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub long: Vec<Vec<bool>>,
}

impl Realization {
    pub fn all(inst: &Instance, long: bool) -> Self {
        Realization {
            long: inst.types().iter().map(|t| vec![long; t.probs.len()]).collect(),
        }
    }

    pub fn is_long(&self, job: JobId) -> bool {
        self.long[job.ty][job.rank]
    }

    pub fn probability(&self, inst: &Instance) -> f64 {
        inst.jobs()
            .into_iter()
            .map(|j| {
                let q = inst.prob(j);
                if self.is_long(j) {
                    q
                } else {
                    1.0 - q
                }
            })
            .product()
    }

    pub fn sample<R: Rng>(inst: &Instance, rng: &mut R) -> Self {
        Realization {
            long: inst
                .types()
                .iter()
                .map(|t| t.probs.iter().map(|&q| rng.random::<f64>() < q).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduledJob {
    pub job: JobId,
    pub machine: usize,
    pub start: Rational,
    pub completion: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    /// In start order.
    pub jobs: Vec<ScheduledJob>,
    /// Machine reservations after long jobs, `(machine, from, until)`.
    pub holds: Vec<(usize, Rational, Rational)>,
}

impl Schedule {
    pub fn cost(&self) -> Rational {
        self.jobs.iter().map(|j| &j.completion).sum()
    }

    pub fn entry(&self, job: JobId) -> Option<&ScheduledJob> {
        self.jobs.iter().find(|s| s.job == job)
    }

    /// Checks that every job ran once, `C = S + X`, and nonzero-length jobs
    /// on one machine do not overlap.
    pub fn check_feasible(&self, inst: &Instance, real: &Realization) -> Result<(), String> {
        let mut seen = vec![false; inst.total_jobs()];
        for s in &self.jobs {
            let idx = inst.flat_index(s.job);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(format!("job {} started twice", s.job));
            }
            let x = if real.is_long(s.job) {
                inst.size(s.job.ty).clone()
            } else {
                Rational::zero()
            };
            if s.completion != &s.start + &x {
                return Err(format!("job {} has C != S + X", s.job));
            }
        }
        if let Some(i) = seen.iter().position(|&b| !b) {
            return Err(format!("job {} never started", inst.jobs()[i]));
        }
        for m in 0..inst.machines() {
            let mut iv: Vec<(&Rational, &Rational)> = self
                .jobs
                .iter()
                .filter(|s| s.machine == m && s.completion > s.start)
                .map(|s| (&s.start, &s.completion))
                .collect();
            iv.sort();
            if iv.windows(2).any(|w| w[0].1 > w[1].0) {
                return Err(format!("overlapping jobs on machine {m}"));
            }
        }
        Ok(())
    }
}

/// Runs `policy` against `real` until every job has started.
pub fn replay(
    policy: &dyn Policy,
    inst: &Instance,
    real: &Realization,
) -> Result<Schedule, PolicyError> {
    let mut loads: Vec<Option<Rational>> = vec![Some(Rational::zero()); inst.machines()];
    let mut started: Vec<Vec<bool>> = inst
        .types()
        .iter()
        .map(|t| vec![false; t.probs.len()])
        .collect();
    let mut history = Vec::new();
    let mut schedule = Schedule {
        jobs: Vec::new(),
        holds: Vec::new(),
    };
    let mut remaining = inst.total_jobs();
    while remaining > 0 {
        let (machine, t_star) = loads
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.as_ref().map(|l| (i, l.clone())))
            .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
            .ok_or(PolicyError::AllRetired(remaining))?;
        let view = StateView {
            inst,
            machine,
            t_star: &t_star,
            loads: &loads,
            started: &started,
            history: &history,
        };
        match policy.decide(&view)? {
            Decision::Start { job, hold_if_long } => {
                if job.ty >= started.len()
                    || job.rank >= started[job.ty].len()
                    || started[job.ty][job.rank]
                {
                    return Err(PolicyError::UnavailableJob(job.to_string()));
                }
                started[job.ty][job.rank] = true;
                remaining -= 1;
                let long = real.is_long(job);
                let completion = if long {
                    &t_star + inst.size(job.ty)
                } else {
                    t_star.clone()
                };
                let next_free = match (long, hold_if_long) {
                    (true, Some(h)) => {
                        if h < completion {
                            return Err(PolicyError::InvalidDecision(format!(
                                "hold {h} ends before job {job} completes at {completion}"
                            )));
                        }
                        if h > completion {
                            schedule.holds.push((machine, completion.clone(), h.clone()));
                        }
                        h
                    }
                    _ => completion.clone(),
                };
                loads[machine] = Some(next_free);
                history.push(StartRecord {
                    job,
                    machine,
                    start: t_star.clone(),
                    long,
                });
                schedule.jobs.push(ScheduledJob {
                    job,
                    machine,
                    start: t_star,
                    completion,
                });
            }
            Decision::Idle { until } => {
                if until <= t_star {
                    return Err(PolicyError::InvalidDecision(format!(
                        "idle until {until} does not advance past {t_star}"
                    )));
                }
                for l in loads.iter_mut().flatten() {
                    if *l < until {
                        *l = until.clone();
                    }
                }
            }
            Decision::Retire => loads[machine] = None,
        }
    }
    Ok(schedule)
}

/// Exact expected total completion time, summing over every realization of
/// the jobs with `0 < q < 1`.
pub fn expected_cost_exact(policy: &dyn Policy, inst: &Instance) -> Result<f64, PolicyError> {
    let uncertain: Vec<JobId> = inst
        .jobs()
        .into_iter()
        .filter(|&j| inst.prob(j) < 1.0)
        .collect();
    if uncertain.len() > ENUMERATION_CAP {
        return Err(PolicyError::EnumerationCap {
            uncertain: uncertain.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let base = Realization::all(inst, true);
    let terms: Vec<Result<f64, PolicyError>> = (0u64..1 << uncertain.len())
        .into_par_iter()
        .map(|mask| {
            let mut real = base.clone();
            let mut prob = 1.0;
            for (bit, j) in uncertain.iter().enumerate() {
                let q = inst.prob(*j);
                if mask >> bit & 1 == 1 {
                    prob *= q;
                } else {
                    real.long[j.ty][j.rank] = false;
                    prob *= 1.0 - q;
                }
            }
            let cost = replay(policy, inst, &real)?.cost().to_f64();
            Ok(prob * cost)
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Monte Carlo estimate; trial `i` draws its realization from substream `i`
/// of `seed`, so results do not depend on thread scheduling.
pub fn expected_cost_mc(
    policy: &dyn Policy,
    inst: &Instance,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, PolicyError> {
    if trials == 0 {
        return Err(PolicyError::NoTrials);
    }
    let costs: Vec<Result<f64, PolicyError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeedStream::new(seed, i).rng();
            let real = Realization::sample(inst, &mut rng);
            Ok(replay(policy, inst, &real)?.cost().to_f64())
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for c in costs {
        let c = c?;
        sum += c;
        sum_sq += c * c;
    }
    let n = trials as f64;
    let mean = sum / n;
    let stderr = if trials > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        trials,
    })
}
