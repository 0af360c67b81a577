//! Policy interface shared by DP tables and built-in heuristics.
//!
//! A policy is consulted whenever the least-loaded active machine becomes
//! free. It sees only what a non-anticipatory scheduler may know: current
//! loads, which jobs have started, and the outcomes of those jobs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::instance::{Instance, JobId};
use crate::numerics::Rational;
use crate::state::{state_key, Leftover, LoadProfile};

#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    /// Start `job` on the current machine at `t*`. If the job turns out long
    /// and `hold_if_long` is set, the machine stays blocked until then instead
    /// of until the job's completion.
    Start {
        job: JobId,
        hold_if_long: Option<Rational>,
    },
    /// Keep every machine that frees up before `until` idle until `until`.
    Idle { until: Rational },
    /// Take the current machine out of service for good.
    Retire,
}

/// Outcome of one started job, as visible to later decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct StartRecord {
    pub job: JobId,
    pub machine: usize,
    pub start: Rational,
    pub long: bool,
}

pub struct StateView<'a> {
    pub inst: &'a Instance,
    /// Lowest-indexed active machine attaining the minimum load.
    pub machine: usize,
    pub t_star: &'a Rational,
    /// Machine-indexed loads; `None` marks a retired machine.
    pub loads: &'a [Option<Rational>],
    pub started: &'a [Vec<bool>],
    pub history: &'a [StartRecord],
}

impl StateView<'_> {
    pub fn leftover(&self) -> Leftover {
        Leftover::new(
            self.started
                .iter()
                .map(|s| s.iter().filter(|&&b| !b).count())
                .collect(),
        )
    }

    pub fn profile(&self) -> LoadProfile {
        LoadProfile::from_loads(self.loads.iter().flatten().cloned().collect())
    }

    pub fn key(&self) -> String {
        state_key(&self.profile(), &self.leftover())
    }

    pub fn is_started(&self, job: JobId) -> bool {
        self.started[job.ty][job.rank]
    }

    /// Lowest-probability job of `ty` not yet started.
    pub fn next_of_type(&self, ty: usize) -> Option<JobId> {
        self.started[ty]
            .iter()
            .position(|&b| !b)
            .map(|rank| JobId { ty, rank })
    }
}

pub trait Policy: Sync {
    fn decide(&self, view: &StateView<'_>) -> Result<Decision, PolicyError>;
}

/// Decision stored in a policy table; the job is implied by the type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TableDecision {
    Start {
        ty: usize,
        hold_if_long: Option<Rational>,
    },
    Idle {
        until: Rational,
    },
}

/// Explicit state-to-decision map over the states a policy can reach.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    pub kind: String,
    pub machines: usize,
    pub entries: BTreeMap<String, TableDecision>,
}

impl Policy for PolicyTable {
    fn decide(&self, view: &StateView<'_>) -> Result<Decision, PolicyError> {
        let key = view.key();
        match self.entries.get(&key) {
            None => Err(PolicyError::MissingState(key)),
            Some(TableDecision::Idle { until }) => Ok(Decision::Idle {
                until: until.clone(),
            }),
            Some(TableDecision::Start { ty, hold_if_long }) => {
                let job = view
                    .next_of_type(*ty)
                    .ok_or_else(|| PolicyError::UnavailableJob(format!("type {}", ty + 1)))?;
                Ok(Decision::Start {
                    job,
                    hold_if_long: hold_if_long.clone(),
                })
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hold_if_long: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idle_until: Option<Rational>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    kind: String,
    machines: usize,
    entries: BTreeMap<String, EntryJson>,
}

impl PolicyTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Types are written 1-based.
    pub fn to_json(&self) -> String {
        let entries = self
            .entries
            .iter()
            .map(|(k, d)| {
                let e = match d {
                    TableDecision::Start { ty, hold_if_long } => EntryJson {
                        start: Some(ty + 1),
                        hold_if_long: hold_if_long.clone(),
                        idle_until: None,
                    },
                    TableDecision::Idle { until } => EntryJson {
                        start: None,
                        hold_if_long: None,
                        idle_until: Some(until.clone()),
                    },
                };
                (k.clone(), e)
            })
            .collect();
        let table = TableJson {
            kind: self.kind.clone(),
            machines: self.machines,
            entries,
        };
        serde_json::to_string_pretty(&table).expect("policy table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let raw: TableJson =
            serde_json::from_str(text).map_err(|e| PolicyError::Format(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (k, e) in raw.entries {
            let d = match (e.start, e.idle_until) {
                (Some(ty), None) if ty >= 1 => TableDecision::Start {
                    ty: ty - 1,
                    hold_if_long: e.hold_if_long,
                },
                (None, Some(until)) if e.hold_if_long.is_none() => TableDecision::Idle { until },
                _ => return Err(PolicyError::Format(format!("bad entry for state {k}"))),
            };
            entries.insert(k, d);
        }
        Ok(PolicyTable {
            kind: raw.kind,
            machines: raw.machines,
            entries,
        })
    }
}

/// Non-idling list policy: the current machine starts the first unstarted
/// job of `order`.
#[derive(Clone, Debug)]
pub struct ListPolicy {
    pub order: Vec<JobId>,
}

impl Policy for ListPolicy {
    fn decide(&self, view: &StateView<'_>) -> Result<Decision, PolicyError> {
        self.order
            .iter()
            .find(|&&j| !view.is_started(j))
            .map(|&job| Decision::Start {
                job,
                hold_if_long: None,
            })
            .ok_or_else(|| PolicyError::InvalidDecision("list exhausted".into()))
    }
}

/// Jobs by ascending expected size `q·p`, ties by type then probability.
pub fn sept_order(inst: &Instance) -> Vec<JobId> {
    let mut jobs = inst.jobs();
    jobs.sort_by(|a, b| {
        let ea = inst.prob(*a) * inst.size(a.ty).to_f64();
        let eb = inst.prob(*b) * inst.size(b.ty).to_f64();
        ea.total_cmp(&eb)
            .then(a.ty.cmp(&b.ty))
            .then(inst.prob(*a).total_cmp(&inst.prob(*b)))
            .then(a.rank.cmp(&b.rank))
    });
    jobs
}

pub fn sept_policy(inst: &Instance) -> ListPolicy {
    ListPolicy {
        order: sept_order(inst),
    }
}

/// Jobs dealt round-robin in SEPT order to machines at time 0; each machine
/// runs its own list and is retired once the list is done.
#[derive(Clone, Debug)]
pub struct FixedAssignmentPolicy {
    pub per_machine: Vec<Vec<JobId>>,
}

pub fn fixed_assignment_policy(inst: &Instance) -> FixedAssignmentPolicy {
    let mut per_machine = vec![Vec::new(); inst.machines()];
    for (i, job) in sept_order(inst).into_iter().enumerate() {
        per_machine[i % inst.machines()].push(job);
    }
    FixedAssignmentPolicy { per_machine }
}

impl Policy for FixedAssignmentPolicy {
    fn decide(&self, view: &StateView<'_>) -> Result<Decision, PolicyError> {
        Ok(self.per_machine[view.machine]
            .iter()
            .find(|&&j| !view.is_started(j))
            .map_or(Decision::Retire, |&job| Decision::Start {
                job,
                hold_if_long: None,
            }))
    }
}
