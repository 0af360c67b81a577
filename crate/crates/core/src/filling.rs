//! Greedy filling of reserved idle slots ("spaces") with jobs of one type.

use crate::error::PolicyError;
use crate::instance::{Instance, JobId};
use crate::numerics::Rational;
use crate::simulate::{Realization, ScheduledJob};

/// Idle slot `[left, left + p_ty)` on `machine`, reserved for type `ty`.
#[derive(Clone, Debug, PartialEq)]
pub struct Space {
    pub machine: usize,
    pub left: Rational,
    pub ty: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filling {
    pub jobs: Vec<ScheduledJob>,
    /// Indices into the space list that received no job.
    pub unused: Vec<usize>,
}

fn check_spaces(inst: &Instance, spaces: &[Space]) -> Result<(), PolicyError> {
    if spaces.windows(2).any(|w| w[0].left > w[1].left) {
        return Err(PolicyError::BadSpaces("not ordered by left endpoint".into()));
    }
    for (i, s) in spaces.iter().enumerate() {
        if s.ty >= inst.n_types() || s.machine >= inst.machines() {
            return Err(PolicyError::BadSpaces(format!("space {i} out of range")));
        }
        let end = &s.left + inst.size(s.ty);
        let overlap = spaces[i + 1..]
            .iter()
            .any(|o| o.machine == s.machine && o.left < end);
        if overlap {
            return Err(PolicyError::BadSpaces(format!("space {i} overlaps a later one")));
        }
    }
    Ok(())
}

/// Each type's jobs, in probability order, go into that type's spaces in
/// left-endpoint order. A short job leaves the space open for the next job at
/// the same left endpoint; a long job closes it. With `dummy`, every type
/// gets one extra always-long job after its real ones, which must also find a
/// space.
pub fn fill_spaces(
    inst: &Instance,
    spaces: &[Space],
    real: &Realization,
    dummy: bool,
) -> Result<Filling, PolicyError> {
    check_spaces(inst, spaces)?;
    let mut jobs = Vec::new();
    let mut used = vec![false; spaces.len()];
    for ty in 0..inst.n_types() {
        let mut slots = (0..spaces.len()).filter(|&i| spaces[i].ty == ty);
        let n = inst.count(ty);
        let total = n + usize::from(dummy);
        let mut next = 0;
        while next < total {
            let Some(i) = slots.next() else {
                return Err(PolicyError::SpacesExhausted {
                    job_type: ty + 1,
                    remaining: total - next,
                });
            };
            used[i] = true;
            let s = &spaces[i];
            while next < total {
                let long = next == n || real.long[ty][next];
                if next < n {
                    let completion = if long {
                        &s.left + inst.size(ty)
                    } else {
                        s.left.clone()
                    };
                    jobs.push(ScheduledJob {
                        job: JobId { ty, rank: next },
                        machine: s.machine,
                        start: s.left.clone(),
                        completion,
                    });
                }
                next += 1;
                if long {
                    break;
                }
            }
        }
    }
    let unused = (0..spaces.len()).filter(|&i| !used[i]).collect();
    Ok(Filling { jobs, unused })
}
