use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use bernsched::dp_exact::{solve_exact_with, ExactOptions};
use bernsched::dp_stratified::{solve_stratified_rounded, StratOptions};
use bernsched::error::HarnessError;
use bernsched::harness::{self, CompareOptions, ExperimentSpec, Generated, QDist, SizeScheme};
use bernsched::instance::{build_groups, partition_sml, round_for_divisibility, round_to_powers_of_c};
use bernsched::policy::{fixed_assignment_policy, sept_policy, Policy, PolicyTable};
use bernsched::quasipoly::{quasipoly_policy, DEFAULT_BASE};
use bernsched::simulate::{expected_cost_exact, expected_cost_mc};
use bernsched::timegrid::build_grid;
use bernsched::Instance;

#[derive(Parser)]
#[command(name = "bernsched", version, about = "Stochastic scheduling of Bernoulli jobs")]
struct Cli {
    /// Master seed for generation and Monte Carlo.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded instances into a directory.
    Gen(GenArgs),
    /// Solve the exact dynamic program.
    SolveExact {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        dump_policy: Option<PathBuf>,
        #[arg(long, default_value_t = bernsched::dp_exact::DEFAULT_JOB_CAP)]
        job_cap: usize,
    },
    /// Round for divisibility and solve the stratified dynamic program.
    SolveStratified {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        dump_policy: Option<PathBuf>,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Evaluate a policy by enumeration or Monte Carlo.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        /// exact | stratified | sept | fixed | quasipoly | file:<path>
        #[arg(long)]
        policy: String,
        #[arg(long, conflicts_with = "enumerate")]
        trials: Option<u64>,
        #[arg(long)]
        enumerate: bool,
        /// Power base for the quasipoly policy.
        #[arg(long, default_value_t = DEFAULT_BASE)]
        c: u64,
    },
    /// Compare exact and stratified values over generated or given instances.
    Compare(CompareArgs),
    /// Print thresholds, grid endpoints, and leading Q members.
    GridDump {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 20)]
        members: usize,
    },
    /// Apply a size rounding and print the result.
    Round {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RoundMode::Divisibility)]
        mode: RoundMode,
        #[arg(long, default_value_t = DEFAULT_BASE)]
        c: u64,
        /// Normalization scale for the small/medium/large split.
        #[arg(long)]
        scale: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundMode {
    Divisibility,
    Powers,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Separated,
    Grouped,
    Powers,
}

#[derive(Args)]
struct SpecArgs {
    /// JSON experiment spec; flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 2)]
    types: usize,
    #[arg(long, default_value_t = 6)]
    max_jobs: usize,
    #[arg(long, default_value_t = 4)]
    max_per_type: usize,
    #[arg(long, default_value_t = 3)]
    max_machines: usize,
    #[arg(long, default_value_t = 13)]
    eps_den: u64,
    #[arg(long, value_enum, default_value_t = Scheme::Separated)]
    scheme: Scheme,
    /// Number of groups for the grouped scheme.
    #[arg(long, default_value_t = 1)]
    groups: usize,
    #[arg(long, default_value_t = DEFAULT_BASE)]
    c: u64,
    /// Comma-separated probability choices.
    #[arg(long, default_value = "0.25,0.5,0.75,1")]
    q: String,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Instance files to compare instead of generating.
    #[arg(long = "instance")]
    instances: Vec<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also evaluate SEPT and fixed assignment.
    #[arg(long)]
    heuristics: bool,
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn build_spec(a: &SpecArgs, seed: u64) -> Result<ExperimentSpec> {
    if let Some(path) = &a.spec {
        let text = fs::read_to_string(path)?;
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    let values = a
        .q
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .context("parsing --q")?;
    Ok(ExperimentSpec {
        count: a.count,
        types: a.types,
        max_jobs: a.max_jobs,
        max_per_type: a.max_per_type,
        max_machines: a.max_machines,
        eps_den: a.eps_den,
        scheme: match a.scheme {
            Scheme::Separated => SizeScheme::Separated,
            Scheme::Grouped => SizeScheme::Grouped { groups: a.groups },
            Scheme::Powers => SizeScheme::PowersOfC { c: a.c },
        },
        q: QDist::Choices { values },
        seed,
    })
}

fn gen(args: &GenArgs, seed: u64) -> Result<()> {
    let spec = build_spec(&args.spec, seed)?;
    let instances = harness::generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    let mut files = Vec::new();
    for g in &instances {
        let path = args.out.join(format!("{}.json", g.id));
        write(&path, &g.instance.to_json())?;
        files.push(path.display().to_string());
    }
    print(&json!({ "instances": files }))
}

fn compare(args: &CompareArgs, seed: u64) -> Result<()> {
    let instances = if args.instances.is_empty() {
        harness::generate(&build_spec(&args.spec, seed)?)?
    } else {
        args.instances
            .iter()
            .map(|p| {
                Ok(Generated {
                    id: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                    instance: read_instance(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    let opts = CompareOptions {
        heuristics: args.heuristics,
        seed,
        ..CompareOptions::default()
    };
    let rows = match harness::compare(&instances, &opts) {
        Ok(rows) => rows,
        Err(e) => {
            if let HarnessError::BoundViolation { id, instance, .. } = &e {
                let path = args.out.join(format!("violation-{id}.json"));
                write(&path, instance)?;
                eprintln!("offending instance written to {}", path.display());
            }
            return Err(e.into());
        }
    };
    let summary = harness::report(&rows, &args.out)?;
    print(&summary)
}

fn load_policy(
    spec: &str,
    inst: &Instance,
    c: u64,
) -> Result<(Box<dyn Policy>, Instance)> {
    Ok(match spec {
        "exact" => {
            let sol = solve_exact_with(inst, ExactOptions::default())?;
            (Box::new(sol.table), inst.clone())
        }
        // stratified tables live on the divisibility-rounded instance
        "stratified" => {
            let run = solve_stratified_rounded(inst, StratOptions::default())?;
            (Box::new(run.solution.table), run.rounded.instance)
        }
        "sept" => (Box::new(sept_policy(inst)), inst.clone()),
        "fixed" => (Box::new(fixed_assignment_policy(inst)), inst.clone()),
        "quasipoly" => (
            Box::new(quasipoly_policy(inst, c, None, StratOptions::default())?),
            inst.clone(),
        ),
        other => match other.strip_prefix("file:") {
            Some(path) => {
                let table = PolicyTable::from_json(&fs::read_to_string(path)?)?;
                if table.machines != inst.machines() {
                    bail!("policy is for {} machines, instance has {}", table.machines, inst.machines());
                }
                (Box::new(table), inst.clone())
            }
            None => bail!("unknown policy {other:?}"),
        },
    })
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(args) => gen(&args, seed),
        Command::Compare(args) => compare(&args, seed),
        Command::SolveExact {
            instance,
            dump_policy,
            job_cap,
        } => {
            let inst = read_instance(&instance)?;
            let opts = ExactOptions {
                job_cap,
                ..ExactOptions::default()
            };
            let sol = solve_exact_with(&inst, opts)?;
            if let Some(p) = dump_policy {
                write(&p, &sol.table.to_json())?;
            }
            print(&json!({
                "value": sol.value,
                "states": sol.states,
                "policy_states": sol.table.len(),
            }))
        }
        Command::SolveStratified {
            instance,
            dump_policy,
            diagnostics,
        } => {
            let inst = read_instance(&instance)?;
            let run = solve_stratified_rounded(&inst, StratOptions::default())?;
            let sol = &run.solution;
            if let Some(p) = dump_policy {
                write(&p, &sol.table.to_json())?;
            }
            let d = json!({
                "relevant_time_points": sol.diagnostics.relevant_time_points,
                "max_profiles_per_timepoint": sol.diagnostics.max_profiles_per_timepoint,
                "states": sol.diagnostics.states,
            });
            if let Some(p) = diagnostics {
                write(&p, &serde_json::to_string_pretty(&d)?)?;
            }
            print(&json!({
                "value": sol.value,
                "policy_states": sol.table.len(),
                "merges": run.rounded.merges(),
                "rounded_sizes": run.rounded.instance.types().iter().map(|t| t.size.to_string()).collect::<Vec<_>>(),
                "diagnostics": d,
            }))
        }
        Command::Simulate {
            instance,
            policy,
            trials,
            enumerate,
            c,
        } => {
            let inst = read_instance(&instance)?;
            let (policy, target) = load_policy(&policy, &inst, c)?;
            match trials.filter(|_| !enumerate) {
                None => {
                    let mean = expected_cost_exact(policy.as_ref(), &target)?;
                    print(&json!({ "mean": mean, "stderr": 0.0, "method": "enum" }))
                }
                Some(trials) => {
                    let est = expected_cost_mc(policy.as_ref(), &target, trials, seed)?;
                    print(&json!({ "mean": est.mean, "stderr": est.stderr, "method": "mc" }))
                }
            }
        }
        Command::GridDump { instance, members } => {
            let inst = read_instance(&instance)?;
            let (rounded, groups) = round_for_divisibility(&inst, &build_groups(&inst))?;
            let grid = build_grid(&rounded.instance, &groups)?;
            let strs = |v: Vec<bernsched::Rational>| v.iter().map(ToString::to_string).collect::<Vec<_>>();
            let q: Vec<_> = (0..grid.gamma())
                .map(|h| strs(grid.q_members(h, members)))
                .collect();
            let endpoints = grid.prefix_endpoints(members);
            let stretched = endpoints.iter().map(|l| l * grid.stretch()).collect();
            print(&json!({
                "groups": groups.groups,
                "p_star": strs(grid.thresholds().p_star.clone()),
                "p_circ": strs(grid.thresholds().p_circ.clone()),
                "endpoints": strs(endpoints),
                "stretched_endpoints": strs(stretched),
                "q_members": q,
            }))
        }
        Command::Round {
            instance,
            mode,
            c,
            scale,
        } => {
            let inst = read_instance(&instance)?;
            let mut out = match mode {
                RoundMode::Divisibility => {
                    let (r, _) = round_for_divisibility(&inst, &build_groups(&inst))?;
                    json!({
                        "instance": serde_json::from_str::<serde_json::Value>(&r.instance.to_json())?,
                        "type_map": r.type_map,
                        "merges": r.merges(),
                    })
                }
                RoundMode::Powers => {
                    let p = round_to_powers_of_c(&inst, c)?;
                    json!({
                        "instance": serde_json::from_str::<serde_json::Value>(&p.rounded.instance.to_json())?,
                        "type_map": p.rounded.type_map,
                        "merges": p.rounded.merges(),
                        "prescale": p.prescale.to_string(),
                        "exponents": p.exponents,
                    })
                }
            };
            if let Some(s) = scale {
                let part = partition_sml(&inst, s)?;
                let ids = |v: &[bernsched::JobId]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
                out["sml"] = json!({
                    "small": ids(&part.small),
                    "medium": ids(&part.medium),
                    "large": ids(&part.large),
                });
            }
            print(&out)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
