//! Instance model: job types with exact sizes, per-job long-probabilities,
//! size groups, and the size-rounding reductions.

use std::collections::BTreeMap;

use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::InstanceError;
use crate::numerics::Rational;

/// One job type: a common size and the long-probabilities of its jobs,
/// kept in non-decreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct JobType {
    pub size: Rational,
    pub probs: Vec<f64>,
}

/// A job, addressed by its type and its rank within the type's
/// probability-ascending job list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct JobId {
    pub ty: usize,
    pub rank: usize,
}

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.ty + 1, self.rank + 1)
    }
}

/// A canonical instance. Types are indexed from 0 in the API; external
/// formats number them from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    machines: usize,
    eps_den: u64,
    types: Vec<JobType>,
}

/// On-disk instance layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub machines: usize,
    pub epsilon: String,
    pub types: Vec<RawType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawType {
    pub size: Rational,
    pub jobs: Vec<f64>,
}

fn parse_epsilon(s: &str) -> Result<u64, InstanceError> {
    let bad = || InstanceError::BadEpsilon(s.to_string());
    let r: Rational = s.parse().map_err(|_| bad())?;
    if !r.numer().is_one() {
        return Err(bad());
    }
    let den = r.denom().to_u64().ok_or_else(bad)?;
    if den < 2 {
        return Err(bad());
    }
    Ok(den)
}

/// Sorts, merges equal sizes, and checks every field. Rejects an instance
/// without jobs.
pub fn validate_and_canonicalize(raw: &RawInstance) -> Result<Instance, InstanceError> {
    let eps_den = parse_epsilon(&raw.epsilon)?;
    let types = raw
        .types
        .iter()
        .map(|t| JobType {
            size: t.size.clone(),
            probs: t.jobs.clone(),
        })
        .collect();
    let inst = Instance::new(raw.machines, eps_den, types)?;
    if inst.total_jobs() == 0 {
        return Err(InstanceError::Empty);
    }
    Ok(inst)
}

impl Instance {
    /// Canonicalizing constructor. Zero-job instances are allowed here (the
    /// solvers and oracles accept them); file input goes through
    /// [`validate_and_canonicalize`], which rejects them.
    pub fn new(machines: usize, eps_den: u64, types: Vec<JobType>) -> Result<Self, InstanceError> {
        if machines == 0 {
            return Err(InstanceError::NoMachines);
        }
        if eps_den < 2 {
            return Err(InstanceError::BadEpsilon(format!("1/{eps_den}")));
        }
        let mut merged: BTreeMap<Rational, Vec<f64>> = BTreeMap::new();
        for t in types {
            if t.size.is_zero() {
                return Err(InstanceError::NonPositiveSize(t.size.to_string()));
            }
            for &q in &t.probs {
                if !(q > 0.0 && q <= 1.0) {
                    return Err(InstanceError::BadProbability(q));
                }
            }
            merged.entry(t.size).or_default().extend(t.probs);
        }
        let types = merged
            .into_iter()
            .rev()
            .filter(|(_, probs)| !probs.is_empty())
            .map(|(size, mut probs)| {
                probs.sort_by(|a, b| a.total_cmp(b));
                JobType { size, probs }
            })
            .collect();
        Ok(Instance {
            machines,
            eps_den,
            types,
        })
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    /// The integer `E` with `ε = 1/E`.
    pub fn eps_den(&self) -> u64 {
        self.eps_den
    }

    pub fn epsilon(&self) -> Rational {
        Rational::one_over(self.eps_den)
    }

    pub fn types(&self) -> &[JobType] {
        &self.types
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn size(&self, ty: usize) -> &Rational {
        &self.types[ty].size
    }

    pub fn count(&self, ty: usize) -> usize {
        self.types[ty].probs.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.types.iter().map(|t| t.probs.len()).collect()
    }

    pub fn total_jobs(&self) -> usize {
        self.types.iter().map(|t| t.probs.len()).sum()
    }

    pub fn prob(&self, job: JobId) -> f64 {
        self.types[job.ty].probs[job.rank]
    }

    /// All jobs in canonical order: by type, then by rank.
    pub fn jobs(&self) -> Vec<JobId> {
        self.types
            .iter()
            .enumerate()
            .flat_map(|(ty, t)| (0..t.probs.len()).map(move |rank| JobId { ty, rank }))
            .collect()
    }

    /// Position of a job in [`Instance::jobs`].
    pub fn flat_index(&self, job: JobId) -> usize {
        self.types[..job.ty].iter().map(|t| t.probs.len()).sum::<usize>() + job.rank
    }

    pub fn with_machines(&self, machines: usize) -> Result<Instance, InstanceError> {
        Instance::new(machines, self.eps_den, self.types.clone())
    }

    /// Multiplies every size by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Result<Instance, InstanceError> {
        let types = self
            .types
            .iter()
            .map(|t| JobType {
                size: &t.size * factor,
                probs: t.probs.clone(),
            })
            .collect();
        Instance::new(self.machines, self.eps_den, types)
    }

    /// Drops one job.
    pub fn without(&self, job: JobId) -> Instance {
        let mut types = self.types.clone();
        types[job.ty].probs.remove(job.rank);
        Instance::new(self.machines, self.eps_den, types).expect("valid sub-instance")
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            machines: self.machines,
            epsilon: format!("1/{}", self.eps_den),
            types: self
                .types
                .iter()
                .map(|t| RawType {
                    size: t.size.clone(),
                    jobs: t.probs.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
        let raw: RawInstance =
            serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        validate_and_canonicalize(&raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }
}

/// Partition of the (size-descending) types into size groups.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupStructure {
    /// Type indices of each group, largest sizes first.
    pub groups: Vec<Vec<usize>>,
    /// Smallest size in each group.
    pub rep: Vec<Rational>,
    /// Largest size in each group.
    pub pmax: Vec<Rational>,
    /// Group index of each type.
    pub group_of: Vec<usize>,
}

impl GroupStructure {
    pub fn gamma(&self) -> usize {
        self.groups.len()
    }

    /// Largest group cardinality.
    pub fn z(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Greedy grouping: a type joins the current group iff its size exceeds
/// `ε²` times the previous type's size.
pub fn build_groups(inst: &Instance) -> GroupStructure {
    let eps = inst.epsilon();
    let eps2 = &eps * &eps;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for ty in 0..inst.n_types() {
        let joins = ty > 0 && *inst.size(ty) > &eps2 * inst.size(ty - 1);
        if joins {
            groups.last_mut().expect("open group").push(ty);
        } else {
            groups.push(vec![ty]);
        }
    }
    let rep = groups
        .iter()
        .map(|g| inst.size(*g.last().unwrap()).clone())
        .collect();
    let pmax = groups.iter().map(|g| inst.size(g[0]).clone()).collect();
    let mut group_of = vec![0; inst.n_types()];
    for (h, g) in groups.iter().enumerate() {
        for &ty in g {
            group_of[ty] = h;
        }
    }
    GroupStructure {
        groups,
        rep,
        pmax,
        group_of,
    }
}

/// Result of a size rounding: the new instance plus, for each original
/// type, the index of the type it became. Several original types mapping to
/// the same new index is a recorded merge.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounded {
    pub instance: Instance,
    pub type_map: Vec<usize>,
}

impl Rounded {
    /// Groups of original types that collapsed into one rounded type.
    pub fn merges(&self) -> Vec<Vec<usize>> {
        let mut by_new: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (old, &new) in self.type_map.iter().enumerate() {
            by_new.entry(new).or_default().push(old);
        }
        by_new.into_values().filter(|v| v.len() > 1).collect()
    }
}

fn rebuild(inst: &Instance, new_sizes: Vec<Rational>) -> Result<Rounded, InstanceError> {
    let types = inst
        .types()
        .iter()
        .zip(&new_sizes)
        .map(|(t, s)| JobType {
            size: s.clone(),
            probs: t.probs.clone(),
        })
        .collect();
    let instance = Instance::new(inst.machines(), inst.eps_den(), types)?;
    let type_map = new_sizes
        .iter()
        .map(|s| {
            instance
                .types()
                .iter()
                .position(|t| &t.size == s)
                .expect("rounded size present")
        })
        .collect();
    Ok(Rounded { instance, type_map })
}

/// Divisibility rounding for grouped sizes, processed from the smallest
/// group upward: each representative is raised to a multiple of the next
/// smaller (already rounded) representative, then every size in a group is
/// raised to a multiple of `ε` times its representative.
///
/// Fails if the recomputed grouping is not the image of the original one.
pub fn round_for_divisibility(
    inst: &Instance,
    groups: &GroupStructure,
) -> Result<(Rounded, GroupStructure), InstanceError> {
    let eps = inst.epsilon();
    let gamma = groups.gamma();
    let mut reps = vec![Rational::zero(); gamma];
    for h in (0..gamma).rev() {
        reps[h] = if h + 1 == gamma {
            groups.rep[h].clone()
        } else {
            groups.rep[h].ceil_to_multiple_of(&reps[h + 1])?
        };
    }
    let mut sizes = vec![Rational::zero(); inst.n_types()];
    for (h, g) in groups.groups.iter().enumerate() {
        let pitch = &eps * &reps[h];
        for &ty in g {
            sizes[ty] = inst.size(ty).ceil_to_multiple_of(&pitch)?;
        }
        // the representative keeps its rounded value exactly
        sizes[*g.last().unwrap()] = reps[h].clone();
    }
    let rounded = rebuild(inst, sizes)?;
    let new_groups = build_groups(&rounded.instance);
    let expected: Vec<Vec<usize>> = groups
        .groups
        .iter()
        .map(|g| {
            let mut v: Vec<usize> = g.iter().map(|&t| rounded.type_map[t]).collect();
            v.dedup();
            v
        })
        .collect();
    if expected != new_groups.groups {
        return Err(InstanceError::GroupsChanged {
            before: expected,
            after: new_groups.groups,
        });
    }
    Ok((rounded, new_groups))
}

/// Output of [`round_to_powers_of_c`].
#[derive(Clone, Debug, PartialEq)]
pub struct PowerRounding {
    pub rounded: Rounded,
    /// Uniform pre-scaling applied before rounding.
    pub prescale: Rational,
    /// Exponent `k >= 1` of each rounded type's size `c^k`.
    pub exponents: Vec<u32>,
}

/// Scales sizes uniformly by the smallest integer that lifts the minimum size
/// to at least `c`, then rounds every size up to the next power `c^k`.
pub fn round_to_powers_of_c(inst: &Instance, c: u64) -> Result<PowerRounding, InstanceError> {
    if c < 2 {
        return Err(InstanceError::BadBase(c));
    }
    let base = Rational::from_int(c);
    let prescale = match inst.types().last() {
        Some(t) if t.size < base => {
            let k = base.checked_div(&t.size)?;
            Rational::from_bigint(k.ceil_to_multiple_of(&Rational::one())?.numer().clone())?
        }
        _ => Rational::one(),
    };
    let mut sizes = Vec::with_capacity(inst.n_types());
    for t in inst.types() {
        let s = &t.size * &prescale;
        let mut p = base.clone();
        while p < s {
            p = &p * &base;
        }
        sizes.push(p);
    }
    let rounded = rebuild(inst, sizes)?;
    let exponents = rounded
        .instance
        .types()
        .iter()
        .map(|t| {
            let mut k = 1;
            let mut p = base.clone();
            while p < t.size {
                p = &p * &base;
                k += 1;
            }
            k
        })
        .collect();
    Ok(PowerRounding {
        rounded,
        prescale,
        exponents,
    })
}

/// Small / medium / large job classes by normalized size.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SmlPartition {
    pub small: Vec<JobId>,
    pub medium: Vec<JobId>,
    pub large: Vec<JobId>,
}

/// Classifies each job by `p / scale` against `1/N²` and `N⁸`.
pub fn partition_sml(inst: &Instance, scale: f64) -> Result<SmlPartition, InstanceError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(InstanceError::BadScale(scale));
    }
    let n = inst.total_jobs() as f64;
    let lo = 1.0 / (n * n);
    let hi = n.powi(8);
    let mut part = SmlPartition::default();
    for job in inst.jobs() {
        let p = inst.size(job.ty).to_f64() / scale;
        if p < lo {
            part.small.push(job);
        } else if p < hi {
            part.medium.push(job);
        } else {
            part.large.push(job);
        }
    }
    Ok(part)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    /// Largest squared coefficient of variation, `max (1 - q) / q`.
    pub delta: f64,
}

pub fn compute_stats(inst: &Instance) -> InstanceStats {
    let delta = inst
        .types()
        .iter()
        .flat_map(|t| t.probs.iter())
        .map(|&q| (1.0 - q) / q)
        .fold(0.0, f64::max);
    InstanceStats { delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rat;

    fn inst(m: usize, e: u64, types: &[(i64, i64, &[f64])]) -> Instance {
        Instance::new(
            m,
            e,
            types
                .iter()
                .map(|(n, d, q)| JobType {
                    size: rat(*n, *d).unwrap(),
                    probs: q.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn sizes(i: &Instance) -> Vec<String> {
        i.types().iter().map(|t| t.size.to_string()).collect()
    }

    #[test]
    fn canonical_order_and_merge() {
        let i = inst(1, 13, &[(1, 1, &[0.5]), (3, 1, &[0.2]), (3, 1, &[0.1])]);
        assert_eq!(sizes(&i), ["3", "1"]);
        assert_eq!(i.types()[0].probs, vec![0.1, 0.2]);
        assert_eq!(i.total_jobs(), 3);
    }

    #[test]
    fn validation_errors() {
        let raw = RawInstance {
            machines: 1,
            epsilon: "1/13".into(),
            types: vec![],
        };
        assert_eq!(validate_and_canonicalize(&raw), Err(InstanceError::Empty));
        let mut raw = RawInstance {
            machines: 1,
            epsilon: "1/13".into(),
            types: vec![RawType {
                size: rat(5, 1).unwrap(),
                jobs: vec![1.0],
            }],
        };
        let single = validate_and_canonicalize(&raw).unwrap();
        assert_eq!(sizes(&single), ["5"]);
        assert_eq!(single.types()[0].probs, vec![1.0]);
        raw.epsilon = "2/13".into();
        assert!(matches!(validate_and_canonicalize(&raw), Err(InstanceError::BadEpsilon(_))));
        raw.epsilon = "1".into();
        assert!(matches!(validate_and_canonicalize(&raw), Err(InstanceError::BadEpsilon(_))));
        raw.epsilon = "1/8".into();
        raw.types[0].jobs = vec![0.0];
        assert_eq!(validate_and_canonicalize(&raw), Err(InstanceError::BadProbability(0.0)));
        raw.types[0].jobs = vec![1.5];
        assert!(validate_and_canonicalize(&raw).is_err());
        raw.types[0].jobs = vec![0.5];
        raw.types[0].size = Rational::zero();
        assert!(matches!(validate_and_canonicalize(&raw), Err(InstanceError::NonPositiveSize(_))));
        raw.types[0].size = Rational::one();
        raw.machines = 0;
        assert_eq!(validate_and_canonicalize(&raw), Err(InstanceError::NoMachines));
    }

    #[test]
    fn json_schema_roundtrip() {
        let text = r#"{"machines": 2, "epsilon": "1/8",
            "types": [{"size": "1", "jobs": [0.5]}, {"size": "80", "jobs": [0.9, 0.3]}]}"#;
        let i = Instance::from_json(text).unwrap();
        assert_eq!(sizes(&i), ["80", "1"]);
        assert_eq!(i.types()[0].probs, vec![0.3, 0.9]);
        assert_eq!(Instance::from_json(&i.to_json()).unwrap(), i);
    }

    #[test]
    fn groups_strict_boundary() {
        let g = build_groups(&inst(1, 13, &[(28561, 1, &[1.0]), (169, 1, &[1.0]), (1, 1, &[1.0])]));
        assert_eq!(g.groups, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(g.z(), 1);
        let g = build_groups(&inst(1, 13, &[(100, 1, &[1.0]), (90, 1, &[1.0])]));
        assert_eq!(g.groups, vec![vec![0, 1]]);
        assert_eq!(g.rep, vec![rat(90, 1).unwrap()]);
        assert_eq!(g.pmax, vec![rat(100, 1).unwrap()]);
        let g = build_groups(&inst(1, 13, &[(7, 1, &[1.0])]));
        assert_eq!((g.gamma(), g.z()), (1, 1));
    }

    #[test]
    fn divisibility_examples() {
        let i = inst(1, 13, &[(1000, 1, &[1.0]), (3, 1, &[1.0])]);
        let (r, _) = round_for_divisibility(&i, &build_groups(&i)).unwrap();
        assert_eq!(sizes(&r.instance), ["1002", "3"]);

        let i = inst(1, 13, &[(27, 1, &[1.0]), (26, 1, &[1.0])]);
        let (r, g) = round_for_divisibility(&i, &build_groups(&i)).unwrap();
        assert_eq!(sizes(&r.instance), ["28", "26"]);
        assert_eq!(g.groups, vec![vec![0, 1]]);

        let i = inst(1, 13, &[(28561, 1, &[1.0]), (169, 1, &[1.0]), (1, 1, &[1.0])]);
        let (r, _) = round_for_divisibility(&i, &build_groups(&i)).unwrap();
        assert_eq!(r.instance, i);
        assert!(r.merges().is_empty());
    }

    #[test]
    fn divisibility_merge_is_recorded() {
        // the representative 25.9 is lifted to 26 (multiple of 1/7) and meets 26
        let i = inst(1, 13, &[(26, 1, &[0.5]), (259, 10, &[0.4]), (1, 7, &[1.0])]);
        let (r, g) = round_for_divisibility(&i, &build_groups(&i)).unwrap();
        assert_eq!(sizes(&r.instance), ["26", "1/7"]);
        assert_eq!(r.merges(), vec![vec![0, 1]]);
        assert_eq!(r.instance.types()[0].probs, vec![0.4, 0.5]);
        assert_eq!(g.groups, vec![vec![0], vec![1]]);
    }

    #[test]
    fn powers_of_c() {
        let i = inst(1, 13, &[(200, 1, &[1.0]), (169, 1, &[1.0])]);
        let p = round_to_powers_of_c(&i, 169).unwrap();
        assert_eq!(sizes(&p.rounded.instance), ["28561", "169"]);
        assert_eq!(p.exponents, vec![2, 1]);
        assert_eq!(p.prescale, Rational::one());

        let i = inst(1, 13, &[(1, 1, &[1.0])]);
        let p = round_to_powers_of_c(&i, 169).unwrap();
        assert_eq!(sizes(&p.rounded.instance), ["169"]);
        assert_eq!(p.prescale, rat(169, 1).unwrap());
        assert!(round_to_powers_of_c(&i, 1).is_err());
    }

    #[test]
    fn sml_thresholds() {
        let i = inst(
            1,
            13,
            &[(1_000_000_000, 1, &[1.0]), (1, 1, &[1.0; 8]), (1, 1000, &[1.0])],
        );
        let p = partition_sml(&i, 1.0).unwrap();
        assert_eq!(p.small, vec![JobId { ty: 2, rank: 0 }]);
        assert_eq!(p.medium.len(), 8);
        assert_eq!(p.large, vec![JobId { ty: 0, rank: 0 }]);

        // N = 2: the small threshold is 1/4
        let i = inst(1, 13, &[(1, 5, &[1.0]), (3, 10, &[1.0])]);
        let p = partition_sml(&i, 1.0).unwrap();
        assert_eq!(p.small, vec![JobId { ty: 1, rank: 0 }]);
        assert_eq!(p.medium, vec![JobId { ty: 0, rank: 0 }]);
        assert!(partition_sml(&i, 0.0).is_err());
    }

    #[test]
    fn stats_delta() {
        assert_eq!(compute_stats(&inst(1, 13, &[(1, 1, &[1.0, 1.0])])).delta, 0.0);
        assert_eq!(compute_stats(&inst(1, 13, &[(1, 1, &[0.5])])).delta, 1.0);
        assert!((compute_stats(&inst(1, 13, &[(1, 1, &[0.1, 1.0])])).delta - 9.0).abs() < 1e-12);
    }
}
