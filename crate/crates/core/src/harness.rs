//! Seeded instance generation, exact-versus-stratified comparison, and
//! CSV/JSON reporting.

use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp_exact::{solve_exact_with, ExactOptions};
use crate::dp_stratified::{solve_stratified_rounded, StratOptions};
use crate::error::{HarnessError, PolicyError, SolveError};
use crate::instance::{Instance, JobType};
use crate::numerics::{Rational, SeedStream, COST_TOL};
use crate::policy::{fixed_assignment_policy, sept_policy, Policy};
use crate::simulate::{expected_cost_exact, expected_cost_mc};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SizeScheme {
    /// Consecutive sizes differ by a factor of at least `2/ε²`.
    Separated,
    /// `groups` clusters of sizes within a factor 3, clusters `4/ε²` apart.
    Grouped { groups: usize },
    /// Distinct powers `c^k`.
    PowersOfC { c: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QDist {
    Choices { values: Vec<f64> },
    /// Uniform on `[low, high]`, rounded to three decimals.
    Uniform { low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub count: usize,
    pub types: usize,
    pub max_jobs: usize,
    pub max_per_type: usize,
    pub max_machines: usize,
    pub eps_den: u64,
    pub scheme: SizeScheme,
    pub q: QDist,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            count: 10,
            types: 2,
            max_jobs: 6,
            max_per_type: 4,
            max_machines: 3,
            eps_den: 13,
            scheme: SizeScheme::Separated,
            q: QDist::Choices {
                values: vec![0.25, 0.5, 0.75, 1.0],
            },
            seed: 0,
        }
    }
}

/// Generated instance with a stable id `"<seed>-<index>"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub id: String,
    pub instance: Instance,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Spec(m.into()));
        if self.types == 0 || self.max_per_type == 0 {
            return bad("need at least one type and one job per type");
        }
        if self.max_jobs < self.types {
            return bad("max_jobs must allow one job per type");
        }
        if self.max_machines == 0 {
            return bad("max_machines must be positive");
        }
        if self.eps_den < 2 {
            return bad("eps_den must be at least 2");
        }
        match &self.scheme {
            SizeScheme::Grouped { groups } if *groups == 0 || *groups > self.types => {
                return bad("groups must be between 1 and types");
            }
            SizeScheme::PowersOfC { c } if *c < 2 => return bad("c must be at least 2"),
            _ => {}
        }
        match &self.q {
            QDist::Choices { values } => {
                if values.is_empty() || values.iter().any(|&q| !(q > 0.0 && q <= 1.0)) {
                    return bad("q choices must lie in (0, 1]");
                }
            }
            QDist::Uniform { low, high } => {
                if !(*low > 0.0 && low <= high && *high <= 1.0) {
                    return bad("q range must satisfy 0 < low <= high <= 1");
                }
            }
        }
        Ok(())
    }
}

fn draw_q<R: Rng>(q: &QDist, rng: &mut R) -> f64 {
    match q {
        QDist::Choices { values } => values[rng.random_range(0..values.len())],
        QDist::Uniform { low, high } => {
            let x = rng.random_range(*low..=*high);
            ((x * 1000.0).round() / 1000.0).clamp(0.001, 1.0)
        }
    }
}

/// Sizes from largest to smallest.
fn draw_sizes<R: Rng>(spec: &ExperimentSpec, rng: &mut R) -> Vec<Rational> {
    let e2 = spec.eps_den * spec.eps_den;
    let n = spec.types;
    match &spec.scheme {
        SizeScheme::Separated => {
            let mut sizes = vec![Rational::from_int(rng.random_range(1..=9))];
            for _ in 1..n {
                let k = rng.random_range(2..=4);
                sizes.push(sizes.last().unwrap().scale(e2 * k));
            }
            sizes.reverse();
            sizes
        }
        SizeScheme::Grouped { groups } => {
            // split the types into `groups` nonempty runs, smallest group first
            let mut cuts: Vec<usize> = sample(rng, n - 1, groups - 1)
                .into_iter()
                .map(|c| c + 1)
                .collect();
            cuts.sort();
            cuts.push(n);
            let mut sizes = Vec::with_capacity(n);
            let mut base = Rational::from_int(rng.random_range(1..=9));
            let mut prev = 0;
            for cut in cuts {
                let width = cut - prev;
                let mut quarters: Vec<u64> = sample(rng, 9, width)
                    .into_iter()
                    .map(|u| u as u64 + 4)
                    .collect();
                quarters.sort();
                for u in quarters {
                    sizes.push(&base.scale(u) / &Rational::from_int(4));
                }
                base = base.scale(4 * e2);
                prev = cut;
            }
            sizes.reverse();
            sizes
        }
        SizeScheme::PowersOfC { c } => {
            let mut exps: Vec<usize> = sample(rng, n + 2, n).into_iter().collect();
            exps.sort();
            exps.reverse();
            exps.iter()
                .map(|&k| Rational::from_int(c.pow(k as u32)))
                .collect()
        }
    }
}

/// `p_j <= ε² p_{j-1}` for consecutive sizes (largest first).
pub fn is_separated(sizes: &[Rational], eps_den: u64) -> bool {
    let e2 = eps_den * eps_den;
    sizes.windows(2).all(|w| w[1].scale(e2) <= w[0])
}

pub fn generate(spec: &ExperimentSpec) -> Result<Vec<Generated>, HarnessError> {
    spec.validate()?;
    (0..spec.count)
        .map(|i| {
            let mut rng = SeedStream::new(spec.seed, i as u64).rng();
            let machines = rng.random_range(1..=spec.max_machines);
            let cap = spec.max_jobs.min(spec.types * spec.max_per_type);
            let total = rng.random_range(spec.types..=cap);
            let mut counts = vec![1; spec.types];
            for _ in spec.types..total {
                let open: Vec<usize> = (0..spec.types)
                    .filter(|&t| counts[t] < spec.max_per_type)
                    .collect();
                counts[open[rng.random_range(0..open.len())]] += 1;
            }
            let sizes = draw_sizes(spec, &mut rng);
            let id = format!("{}-{}", spec.seed, i);
            if spec.scheme == SizeScheme::Separated && !is_separated(&sizes, spec.eps_den) {
                return Err(HarnessError::Invariant {
                    id,
                    detail: "generated sizes are not separated".into(),
                });
            }
            let types = sizes
                .into_iter()
                .zip(&counts)
                .map(|(size, &n)| JobType {
                    size,
                    probs: (0..n).map(|_| draw_q(&spec.q, &mut rng)).collect(),
                })
                .collect();
            let instance = Instance::new(machines, spec.eps_den, types)?;
            Ok(Generated { id, instance })
        })
        .collect()
}

/// `(1 + ε)(1 + (2n + 4)(1 + ε)ε)(1 + 5ε)`.
pub fn sandwich_bound(n_types: usize, eps: &Rational) -> Rational {
    let one = Rational::one();
    let one_eps = &one + eps;
    let mid = &one + &(&(&one_eps * eps) * &Rational::from_int(2 * n_types as u64 + 4));
    &(&one_eps * &mid) * &(&one + &eps.scale(5))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub id: String,
    pub types: usize,
    pub jobs: usize,
    pub machines: usize,
    pub epsilon: String,
    pub exact: Option<f64>,
    pub stratified: Option<f64>,
    pub ratio: Option<f64>,
    pub bound: f64,
    pub sept: Option<f64>,
    pub fixed: Option<f64>,
    pub exact_states: Option<usize>,
    pub stratified_states: Option<usize>,
    pub time_points: Option<usize>,
    pub max_profiles: Option<usize>,
    pub exact_ms: f64,
    pub stratified_ms: f64,
    pub skipped: Option<String>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompareOptions {
    pub exact: ExactOptions,
    pub stratified: StratOptions,
    pub heuristics: bool,
    /// Seed for Monte Carlo fallbacks when heuristics cannot be enumerated.
    pub seed: u64,
}

const HEURISTIC_TRIALS: u64 = 20_000;

fn policy_value(
    p: &dyn Policy,
    inst: &Instance,
    seed: u64,
) -> Result<f64, PolicyError> {
    match expected_cost_exact(p, inst) {
        Err(PolicyError::EnumerationCap { .. }) => {
            Ok(expected_cost_mc(p, inst, HEURISTIC_TRIALS, seed)?.mean)
        }
        other => other,
    }
}

fn is_cap(e: &SolveError) -> bool {
    matches!(e, SolveError::JobCap { .. } | SolveError::StateCap { .. })
}

fn compare_one(g: &Generated, opts: &CompareOptions) -> Result<ComparisonRow, HarnessError> {
    let inst = &g.instance;
    let mut row = ComparisonRow {
        id: g.id.clone(),
        types: inst.n_types(),
        jobs: inst.total_jobs(),
        machines: inst.machines(),
        epsilon: inst.epsilon().to_string(),
        exact: None,
        stratified: None,
        ratio: None,
        bound: sandwich_bound(inst.n_types(), &inst.epsilon()).to_f64(),
        sept: None,
        fixed: None,
        exact_states: None,
        stratified_states: None,
        time_points: None,
        max_profiles: None,
        exact_ms: 0.0,
        stratified_ms: 0.0,
        skipped: None,
    };
    let fail = |e: &dyn std::fmt::Display| HarnessError::Invariant {
        id: g.id.clone(),
        detail: e.to_string(),
    };

    let clock = Instant::now();
    match solve_exact_with(inst, opts.exact) {
        Ok(sol) => {
            row.exact = Some(sol.value);
            row.exact_states = Some(sol.states);
        }
        Err(e) if is_cap(&e) => row.skipped = Some(format!("exact: {e}")),
        Err(e) => return Err(fail(&e)),
    }
    row.exact_ms = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    match solve_stratified_rounded(inst, opts.stratified) {
        Ok(run) => {
            row.stratified = Some(run.solution.value);
            row.stratified_states = Some(run.solution.diagnostics.states);
            row.time_points = Some(run.solution.diagnostics.relevant_time_points);
            row.max_profiles = Some(run.solution.diagnostics.max_profiles_per_timepoint);
        }
        Err(e) if is_cap(&e) => {
            row.skipped = Some(match row.skipped.take() {
                Some(s) => format!("{s}; stratified: {e}"),
                None => format!("stratified: {e}"),
            })
        }
        Err(e) => return Err(fail(&e)),
    }
    row.stratified_ms = clock.elapsed().as_secs_f64() * 1e3;

    if let (Some(ex), Some(st)) = (row.exact, row.stratified) {
        let ratio = if ex > 0.0 { st / ex } else { 1.0 };
        row.ratio = Some(ratio);
        if ratio < 1.0 - COST_TOL || ratio > row.bound + COST_TOL {
            return Err(HarnessError::BoundViolation {
                id: g.id.clone(),
                ratio,
                bound: row.bound,
                instance: inst.to_json(),
            });
        }
    }
    if opts.heuristics {
        row.sept = Some(policy_value(&sept_policy(inst), inst, opts.seed)?);
        row.fixed = Some(policy_value(&fixed_assignment_policy(inst), inst, opts.seed)?);
    }
    Ok(row)
}

/// Solves every instance (in parallel) and returns rows in input order.
/// Aborts on the first bound violation in input order.
pub fn compare(
    instances: &[Generated],
    opts: &CompareOptions,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    instances
        .par_iter()
        .map(|g| compare_one(g, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub skipped: usize,
    pub max_ratio: Option<f64>,
    pub max_exact_states: Option<usize>,
    pub max_stratified_states: Option<usize>,
}

pub fn summarize(rows: &[ComparisonRow]) -> Summary {
    let max_f = |it: &mut dyn Iterator<Item = f64>| it.reduce(f64::max);
    Summary {
        rows: rows.len(),
        skipped: rows.iter().filter(|r| r.skipped.is_some()).count(),
        max_ratio: max_f(&mut rows.iter().filter_map(|r| r.ratio)),
        max_exact_states: rows.iter().filter_map(|r| r.exact_states).max(),
        max_stratified_states: rows.iter().filter_map(|r| r.stratified_states).max(),
    }
}

pub fn rows_to_csv(rows: &[ComparisonRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        // header only
        w.write_record(CSV_HEADER).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
}

pub const CSV_HEADER: [&str; 18] = [
    "id",
    "types",
    "jobs",
    "machines",
    "epsilon",
    "exact",
    "stratified",
    "ratio",
    "bound",
    "sept",
    "fixed",
    "exact_states",
    "stratified_states",
    "time_points",
    "max_profiles",
    "exact_ms",
    "stratified_ms",
    "skipped",
];

/// Writes `comparison.csv`, `comparison.json`, and `summary.json` to `dir`.
pub fn report(rows: &[ComparisonRow], dir: &Path) -> Result<Summary, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("comparison.csv"), rows_to_csv(rows)?).map_err(io)?;
    let json = serde_json::to_string_pretty(rows).expect("rows serialize");
    std::fs::write(dir.join("comparison.json"), json).map_err(io)?;
    let summary = summarize(rows);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), json).map_err(io)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::build_groups;
    use crate::numerics::rat;

    #[test]
    fn separated_scheme_is_separated() {
        let spec = ExperimentSpec {
            count: 20,
            eps_den: 8,
            ..ExperimentSpec::default()
        };
        for g in generate(&spec).unwrap() {
            let sizes: Vec<_> = g.instance.types().iter().map(|t| t.size.clone()).collect();
            assert!(is_separated(&sizes, 8));
            assert!(g.instance.total_jobs() <= 6);
            assert_eq!(build_groups(&g.instance).gamma(), g.instance.n_types());
        }
    }

    #[test]
    fn grouped_and_power_schemes() {
        let spec = ExperimentSpec {
            count: 20,
            types: 4,
            max_jobs: 8,
            scheme: SizeScheme::Grouped { groups: 2 },
            ..ExperimentSpec::default()
        };
        for g in generate(&spec).unwrap() {
            assert_eq!(build_groups(&g.instance).gamma(), 2);
        }
        let spec = ExperimentSpec {
            scheme: SizeScheme::PowersOfC { c: 169 },
            types: 3,
            ..ExperimentSpec::default()
        };
        for g in generate(&spec).unwrap() {
            for t in g.instance.types() {
                let mut p = Rational::one();
                while p < t.size {
                    p = p.scale(169);
                }
                assert_eq!(p, t.size);
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = ExperimentSpec {
            q: QDist::Uniform {
                low: 0.1,
                high: 1.0,
            },
            ..ExperimentSpec::default()
        };
        let a: Vec<String> = generate(&spec).unwrap().iter().map(|g| g.instance.to_json()).collect();
        let b: Vec<String> = generate(&spec).unwrap().iter().map(|g| g.instance.to_json()).collect();
        assert_eq!(a, b);
        assert!(generate(&ExperimentSpec {
            max_jobs: 1,
            ..spec
        })
        .is_err());
    }

    #[test]
    fn bound_value() {
        // (14/13)(1 + 8·(14/13)/13)(18/13) = (14·281·18)/(13·169·13)
        let b = sandwich_bound(2, &rat(1, 13).unwrap());
        assert_eq!(b, rat(70812, 28561).unwrap());
        assert!((b.to_f64() - 2.4793).abs() < 1e-4);
    }

    #[test]
    fn one_type_row() {
        let inst = Instance::new(
            1,
            13,
            vec![JobType {
                size: rat(169, 1).unwrap(),
                probs: vec![1.0, 1.0],
            }],
        )
        .unwrap();
        let g = Generated {
            id: "x".into(),
            instance: inst,
        };
        let opts = CompareOptions {
            heuristics: true,
            ..CompareOptions::default()
        };
        let rows = compare(&[g], &opts).unwrap();
        let r = &rows[0];
        assert_eq!(r.exact, Some(507.0));
        assert_eq!(r.stratified, Some(572.0));
        assert!((r.ratio.unwrap() - 1.1282).abs() < 1e-4);
        assert_eq!(r.sept, r.exact);
        assert!(compare(&[], &opts).unwrap().is_empty());
    }

    #[test]
    fn report_outputs() {
        let spec = ExperimentSpec {
            count: 3,
            ..ExperimentSpec::default()
        };
        let rows = compare(&generate(&spec).unwrap(), &CompareOptions::default()).unwrap();
        let csv = rows_to_csv(&rows[..1]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(rows_to_csv(&[]).unwrap().lines().count(), 1);
        let s = summarize(&rows);
        let max = rows.iter().filter_map(|r| r.ratio).fold(f64::MIN, f64::max);
        assert_eq!(s.max_ratio, Some(max));
        let json = serde_json::to_string(&rows).unwrap();
        let back: Vec<ComparisonRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rows);
    }
}
