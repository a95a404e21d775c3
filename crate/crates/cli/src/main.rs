//! `nsum`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nsum::bounds::{
    self, adversarial_lower_bound, chernoff_lower, chernoff_two_sided, er_ros_bound, fullsampling_worstcase,
    mor_bound, ros_bound_pmf, ros_bound_simple, sample_size, sample_size_real, sf_ros_bound, DegreeSummary,
    DeltaPolicy, MuMode,
};
use nsum::degree::{er_p_for_mean, DegreeDistribution};
use nsum::estimators::{
    apply_policy, draw_sample, empirical_rs_pmf, estimate_fs, estimate_fs_bidirectional, estimate_mor,
    estimate_ros, extract_ard, fs_degree_bounds, Sample, ZeroDegreePolicy, DEFAULT_RS_TRIALS,
};
use nsum::graphgen::{build_adversarial_pair, generate, GeneratorConfig, HiddenSpec};
use nsum::ingest::{build_instance, load_edges, load_genres, GenreAliases};
use nsum::oracle::{default_corpus, format_table, run_corpus};
use nsum::pmf::DiscretePmf;
use nsum::simulate::{run_experiment, write_outputs, ExperimentConfig, FULL_SCALE_N};
use nsum::{ArdSet, Instance, Method, NsumError};

#[derive(Parser)]
#[command(name = "nsum", version, about = "Network scale-up estimators, bounds and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network with a planted hidden population.
    Gen(GenArgs),
    /// Estimate prevalence from a saved instance or an ARD file.
    Estimate(EstimateArgs),
    /// Evaluate a closed-form bound.
    Bound {
        #[command(subcommand)]
        bound: BoundCommand,
    },
    /// Run a Monte-Carlo sweep described by a TOML config.
    Sweep(SweepArgs),
    /// Load a friendship dataset and report its statistics.
    Ingest(IngestArgs),
    /// Check the expectation and negative-dependence identities exactly.
    Oracle(OracleArgs),
    /// Build the two indistinguishable instances and compare their errors.
    Adversarial(AdversarialArgs),
}

#[derive(Args)]
struct DegreeArgs {
    /// Truncated Erdős–Rényi in-degrees with this mean.
    #[arg(long, group = "degrees")]
    mean_degree: Option<f64>,
    /// Power-law in-degrees with this exponent.
    #[arg(long, group = "degrees")]
    gamma: Option<f64>,
    /// Explicit in-degree pmf, e.g. `1:0.5,2:0.5`.
    #[arg(long, group = "degrees")]
    pmf: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Placement {
    Uniform,
    First,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    degrees: DegreeArgs,
    /// Hidden population size.
    #[arg(long, conflicts_with = "rho")]
    h: Option<usize>,
    /// Hidden prevalence; `h = round(rho n)`.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum, default_value = "uniform")]
    hidden: Placement,
    #[arg(long, env = "NSUM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes `<prefix>.edges` and `<prefix>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mor,
    Ros,
    Fs,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZeroDegreeArg {
    Reject,
    Drop,
}

impl From<ZeroDegreeArg> for ZeroDegreePolicy {
    fn from(z: ZeroDegreeArg) -> Self {
        match z {
            ZeroDegreeArg::Reject => ZeroDegreePolicy::Reject,
            ZeroDegreeArg::Drop => ZeroDegreePolicy::Drop,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Instance prefix written by `gen` (reads `<prefix>.edges` and `<prefix>.json`).
    #[arg(long, required_unless_present = "ard", conflicts_with = "ard")]
    instance: Option<PathBuf>,
    /// ARD CSV with header `node,R,C`.
    #[arg(long)]
    ard: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    /// Sample size; the whole population when omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, env = "NSUM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "reject")]
    zero_degree: ZeroDegreeArg,
    /// Population size, needed for FS on an ARD file.
    #[arg(long)]
    n: Option<usize>,
    /// Smallest out-degree, needed for FS on an ARD file.
    #[arg(long)]
    min_out: Option<u32>,
    /// Largest out-degree, needed for FS on an ARD file.
    #[arg(long)]
    max_out: Option<u32>,
    /// Write the sampled ARD to this CSV.
    #[arg(long)]
    save_ard: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MuModeArg {
    IntegralApprox,
    ExactPmfMean,
}

#[derive(Args)]
struct DeltaArgs {
    /// Fixed Chernoff slack; minimized over a grid when omitted.
    #[arg(long)]
    delta: Option<f64>,
}

impl DeltaArgs {
    fn policy(&self) -> DeltaPolicy {
        self.delta.map_or(DeltaPolicy::Minimize, DeltaPolicy::Fixed)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WorstMethod {
    Mor,
    Ros,
}

#[derive(Subcommand)]
enum BoundCommand {
    /// F(beta, m rho), bounding P[E_MoR > beta].
    Mor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: u64,
        /// Accepted for symmetry with `sample-size`; the bound does not use it.
        #[arg(long)]
        n: Option<u64>,
    },
    /// F(beta, m rho), bounding P[E_RoS > beta] via R_S >= m.
    Ros {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Expectation of F(beta, R rho) under the law of R_S.
    RosPmf {
        #[command(flatten)]
        common: Common,
        /// Explicit R_S pmf, e.g. `100:0.5,200:0.5`.
        #[arg(long, required_unless_present = "instance")]
        pmf: Option<String>,
        /// Estimate the R_S pmf by sampling this instance.
        #[arg(long, requires = "m", conflicts_with = "pmf")]
        instance: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_RS_TRIALS)]
        trials: usize,
        #[arg(long, env = "NSUM_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// RoS bound on truncated Erdős–Rényi networks.
    ErRos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long, required_unless_present = "mean_degree", conflicts_with = "mean_degree")]
        p: Option<f64>,
        #[arg(long)]
        mean_degree: Option<f64>,
        #[command(flatten)]
        delta: DeltaArgs,
    },
    /// RoS bound on scale-free networks (gamma > 2).
    SfRos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        delta: DeltaArgs,
        #[arg(long, value_enum, default_value = "integral-approx")]
        mu_mode: MuModeArg,
    },
    /// Two-sided tail F(beta, mu), or the lower tail when --delta is given.
    Chernoff {
        #[arg(long, required_unless_present = "delta")]
        beta: Option<f64>,
        #[arg(long)]
        mu: f64,
        #[arg(long, conflicts_with = "beta")]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample size making both tails of F at most 1 / (2 n^alpha).
    SampleSize {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-sampling worst-case errors from degree extremes.
    Worstcase {
        #[arg(long, value_enum)]
        method: WorstMethod,
        /// Read the degree extremes from this instance.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, required_unless_present = "instance")]
        max_out: Option<f64>,
        #[arg(long, required_unless_present = "instance")]
        min_out: Option<f64>,
        #[arg(long, required_unless_present = "instance")]
        min_in: Option<f64>,
        #[arg(long, required_unless_present = "instance")]
        max_in: Option<f64>,
        #[arg(long, required_unless_present = "instance")]
        mean_in: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error floor sqrt((n-1)/2) of any ARD-only method.
    AdversarialLb {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long, env = "NSUM_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Use n = 10^6.
    #[arg(long, conflicts_with = "n")]
    full_scale: bool,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<usize>>,
    /// Worker threads; all available cores by default.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    genres: Option<PathBuf>,
    /// Hidden population; lists every genre's prevalence when omitted.
    #[arg(long, requires = "genres")]
    genre: Option<String>,
    /// JSON object mapping display labels to dataset genre names.
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Save the resulting instance under this prefix (needs --genre).
    #[arg(long, requires = "genre")]
    save: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Corpus {
    Default,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Table,
    Csv,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "default")]
    corpus: Corpus,
    #[arg(long, value_enum, default_value = "table")]
    format: TableFormat,
    /// Print failing rows only.
    #[arg(long)]
    failures_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdversarialArgs {
    #[arg(long)]
    k: usize,
    /// Survey every node.
    #[arg(long, conflicts_with = "m")]
    full_sample: bool,
    /// Sample size; the same respondents are used on both instances.
    #[arg(long, required_unless_present = "full_sample")]
    m: Option<usize>,
    #[arg(long, env = "NSUM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

type Result<T> = std::result::Result<T, NsumError>;

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?, out)
}

fn parse_pairs(text: &str) -> Result<Vec<(u64, f64)>> {
    text.split(',')
        .map(|item| {
            let (k, p) = item
                .split_once(':')
                .ok_or_else(|| NsumError::InvalidArgument(format!("expected `value:prob`, got `{item}`")))?;
            let k = k.trim().parse().map_err(|_| NsumError::InvalidArgument(format!("bad value `{k}`")))?;
            let p = p.trim().parse().map_err(|_| NsumError::InvalidArgument(format!("bad probability `{p}`")))?;
            Ok((k, p))
        })
        .collect()
}

fn degree_distribution(n: usize, args: &DegreeArgs) -> Result<DegreeDistribution> {
    match (args.mean_degree, args.gamma, &args.pmf) {
        (Some(mean), _, _) => DegreeDistribution::er_truncated(n, er_p_for_mean(n, mean)),
        (_, Some(gamma), _) => DegreeDistribution::scale_free(n, gamma),
        (_, _, Some(pmf)) => {
            let pairs: Vec<(usize, f64)> = parse_pairs(pmf)?.into_iter().map(|(k, p)| (k as usize, p)).collect();
            DegreeDistribution::explicit(n, &pairs)
        }
        _ => Err(NsumError::InvalidArgument("give one of --mean-degree, --gamma, --pmf".into())),
    }
}

fn load_instance(prefix: &Path) -> Result<Instance> {
    Instance::load(&prefix.with_extension("edges"), &prefix.with_extension("json"))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let degrees = degree_distribution(args.n, &args.degrees)?;
    let h = match (args.h, args.rho) {
        (Some(h), _) => h,
        (None, Some(rho)) => (rho * args.n as f64).round() as usize,
        (None, None) => return Err(NsumError::InvalidArgument("give --h or --rho".into())),
    };
    let hidden = match args.hidden {
        Placement::Uniform => HiddenSpec::Uniform(h),
        Placement::First => HiddenSpec::FirstH(h),
    };
    let instance = generate(&GeneratorConfig::new(degrees, hidden, args.seed))?;
    instance.save(&args.out)?;
    emit_json(
        &json!({
            "n": instance.n(),
            "edges": instance.edge_count(),
            "hidden": instance.hidden_count(),
            "rho": instance.rho(),
            "seed": args.seed,
            "files": [args.out.with_extension("edges"), args.out.with_extension("json")],
        }),
        None,
    )
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let policy = ZeroDegreePolicy::from(args.zero_degree);
    let instance = args.instance.as_deref().map(load_instance).transpose()?;
    let (ard, population) = match (&instance, &args.ard) {
        (Some(inst), _) => {
            let sample = match args.m {
                Some(m) => draw_sample(inst, m, args.seed)?,
                None => Sample::full(inst.n()),
            };
            (extract_ard(inst, &sample)?, Some(inst.n()))
        }
        (None, Some(path)) => (ArdSet::read_csv(fs::File::open(path)?)?, args.n),
        (None, None) => unreachable!("clap requires one source"),
    };
    if let Some(path) = &args.save_ard {
        ard.write_csv(fs::File::create(path)?)?;
    }
    let methods = match args.method {
        MethodArg::Mor => vec![Method::MoR],
        MethodArg::Ros => vec![Method::RoS],
        MethodArg::Fs => vec![Method::FS],
        MethodArg::All => vec![Method::MoR, Method::RoS],
    };
    let mut results = Vec::new();
    for method in methods {
        let estimate = match method {
            Method::MoR => estimate_mor(&apply_policy(&ard, policy)?)?,
            Method::RoS => estimate_ros(&apply_policy(&ard, policy)?)?,
            Method::FS => match (&instance, args.m) {
                (Some(inst), None) => estimate_fs_bidirectional(inst)?,
                (Some(_), Some(_)) => {
                    return Err(NsumError::InvalidArgument("FS needs the full population; drop --m".into()))
                }
                (None, _) => {
                    let n = args.n.or(population).ok_or_else(|| NsumError::InvalidArgument("FS needs --n".into()))?;
                    let (min, max) = match (args.min_out, args.max_out) {
                        (Some(a), Some(b)) => (a, b),
                        _ => fs_degree_bounds(&ard)?,
                    };
                    estimate_fs(&ard, n, min, max)?
                }
            },
        };
        let errors = instance.as_ref().map(|i| i.prevalence().errors(estimate.value)).transpose()?;
        results.push(json!({
            "method": method,
            "estimate": estimate.value,
            "errors": errors,
        }));
    }
    emit_json(
        &json!({
            "respondents": ard.len(),
            "rho": instance.as_ref().map(Instance::rho),
            "estimates": results,
        }),
        args.out.as_deref(),
    )
}

fn cmd_bound(bound: BoundCommand) -> Result<()> {
    fn report(family: &str, r: bounds::BoundResult) -> serde_json::Value {
        json!({ "family": family, "raw": r.raw, "clamped": r.clamped, "inputs": r.inputs })
    }
    match bound {
        BoundCommand::Mor { common, m, .. } => {
            emit_json(&report("mor", mor_bound(common.beta, m, common.rho)?), common.out.as_deref())
        }
        BoundCommand::Ros { common, m, .. } => {
            emit_json(&report("ros_simple", ros_bound_simple(common.beta, m, common.rho)?), common.out.as_deref())
        }
        BoundCommand::RosPmf {
            common,
            pmf,
            instance,
            m,
            trials,
            seed,
        } => {
            let pmf = match (pmf, instance) {
                (Some(text), _) => DiscretePmf::new(parse_pairs(&text)?)?,
                (None, Some(prefix)) => {
                    empirical_rs_pmf(&load_instance(&prefix)?, m.expect("clap requires --m"), trials, seed)?
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            emit_json(&report("ros_pmf", ros_bound_pmf(common.beta, common.rho, &pmf)?), common.out.as_deref())
        }
        BoundCommand::ErRos {
            common,
            m,
            n,
            p,
            mean_degree,
            delta,
        } => {
            let p = p.unwrap_or_else(|| er_p_for_mean(n as usize, mean_degree.expect("clap requires one")));
            let r = er_ros_bound(common.beta, common.rho, m, n, p, delta.policy())?;
            emit_json(&report("er_ros", r), common.out.as_deref())
        }
        BoundCommand::SfRos {
            common,
            m,
            n,
            gamma,
            delta,
            mu_mode,
        } => {
            let mode = match mu_mode {
                MuModeArg::IntegralApprox => MuMode::IntegralApprox,
                MuModeArg::ExactPmfMean => MuMode::ExactPmfMean,
            };
            let r = sf_ros_bound(common.beta, common.rho, m, n, gamma, delta.policy(), mode)?;
            emit_json(&report("sf_ros", r), common.out.as_deref())
        }
        BoundCommand::Chernoff { beta, mu, delta, out } => {
            let r = match (beta, delta) {
                (_, Some(d)) => report("chernoff_lower", chernoff_lower(d, mu)?),
                (Some(b), None) => report("chernoff_two_sided", chernoff_two_sided(b, mu)?),
                (None, None) => unreachable!("clap requires one"),
            };
            emit_json(&r, out.as_deref())
        }
        BoundCommand::SampleSize {
            n,
            rho,
            beta,
            alpha,
            out,
        } => {
            let m = sample_size(n, rho, beta, alpha)?;
            emit_json(
                &json!({
                    "sample_size": m,
                    "unrounded": sample_size_real(n, rho, beta, alpha),
                    "n": n, "rho": rho, "beta": beta, "alpha": alpha,
                }),
                out.as_deref(),
            )
        }
        BoundCommand::Worstcase {
            method,
            instance,
            max_out,
            min_out,
            min_in,
            max_in,
            mean_in,
            out,
        } => {
            let summary = match instance {
                Some(prefix) => DegreeSummary::from_instance(&load_instance(&prefix)?),
                None => DegreeSummary {
                    max_out: max_out.unwrap_or_default(),
                    min_out: min_out.unwrap_or_default(),
                    min_in: min_in.unwrap_or_default(),
                    max_in: max_in.unwrap_or_default(),
                    mean_in: mean_in.unwrap_or_default(),
                },
            };
            let method = match method {
                WorstMethod::Mor => Method::MoR,
                WorstMethod::Ros => Method::RoS,
            };
            let (upper, lower) = fullsampling_worstcase(method, &summary)?;
            emit_json(
                &json!({ "method": method, "upper": upper, "lower": lower, "degrees": summary }),
                out.as_deref(),
            )
        }
        BoundCommand::AdversarialLb { n, out } => emit_json(
            &json!({ "n": n, "lower_bound": adversarial_lower_bound(n)? }),
            out.as_deref(),
        ),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let mut config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| NsumError::Data(format!("{}: {}", args.config.display(), e.message())))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if args.full_scale {
        config.n = FULL_SCALE_N;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(i) = args.instances {
        config.instances = i;
    }
    if let Some(s) = args.samples {
        config.samples_per_instance = s;
    }
    if let Some(sizes) = args.sample_sizes {
        config.sample_sizes = sizes;
    }
    config.validate()?;
    log::info!(
        "sweep {}: n = {}, {} sample sizes, {} instances x {} samples",
        config.hash(),
        config.n,
        config.sample_sizes.len(),
        config.instances,
        config.samples_per_instance
    );
    let run = || -> Result<Vec<PathBuf>> {
        let results = run_experiment(&config)?;
        write_outputs(&results, &args.out_dir)
    };
    let written = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| NsumError::InvalidArgument(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    emit_json(&json!({ "config_hash": config.hash(), "files": written }), None)
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let graph = load_edges(&args.edges)?;
    let stats = graph.stats();
    let isolated = graph.degrees().iter().filter(|&&d| d == 0).count();
    let mut report = json!({ "stats": stats, "isolated_nodes": isolated });
    if let Some(genres_path) = &args.genres {
        let index = load_genres(genres_path, graph.n())?;
        let aliases = match &args.aliases {
            Some(path) => GenreAliases::load(path)?,
            None => GenreAliases::default(),
        };
        match &args.genre {
            Some(genre) => {
                let hidden: &BTreeSet<u32> = index.resolve(genre, &aliases)?;
                let instance = build_instance(&graph, hidden)?;
                report["genre"] = json!(genre);
                report["hidden"] = json!(instance.hidden_count());
                report["rho"] = json!(instance.rho());
                if let Some(prefix) = &args.save {
                    instance.save(prefix)?;
                }
            }
            None => {
                let prevalence: serde_json::Map<String, serde_json::Value> = index
                    .names()
                    .map(|name| {
                        let size = index.get(name).map_or(0, BTreeSet::len);
                        (name.to_string(), json!(size as f64 / graph.n() as f64))
                    })
                    .collect();
                report["genre_prevalence"] = serde_json::Value::Object(prevalence);
            }
        }
    }
    emit_json(&report, args.out.as_deref())
}

/// Returns whether every check passed.
fn cmd_oracle(args: OracleArgs) -> Result<bool> {
    let corpus = match args.corpus {
        Corpus::Default => default_corpus(),
    };
    let rows = run_corpus(&corpus)?;
    let all_passed = rows.iter().all(|r| r.passed);
    let shown: Vec<_> = rows.iter().filter(|r| !args.failures_only || !r.passed).cloned().collect();
    let text = match args.format {
        TableFormat::Table => {
            let passed = rows.iter().filter(|r| r.passed).count();
            format!("{}{passed}/{} checks passed on {} models\n", format_table(&shown), rows.len(), corpus.len())
        }
        TableFormat::Csv => {
            let mut csv = csv_writer();
            for row in &shown {
                csv.serialize(row).map_err(NsumError::from)?;
            }
            String::from_utf8(csv.into_inner().map_err(|e| NsumError::Data(e.to_string()))?)
                .expect("csv output is utf-8")
        }
    };
    emit(&text, args.out.as_deref())?;
    Ok(all_passed)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn cmd_adversarial(args: AdversarialArgs) -> Result<()> {
    let (first, second) = build_adversarial_pair(args.k)?;
    let sample = match args.m {
        Some(m) => draw_sample(&first, m, args.seed)?,
        None => Sample::full(first.n()),
    };
    let mut reports = Vec::new();
    let mut multisets = Vec::new();
    for (name, inst) in [("I1", &first), ("I2", &second)] {
        let ard = extract_ard(inst, &sample)?;
        multisets.push(ard.sorted_pairs());
        let p = inst.prevalence();
        let mor = estimate_mor(&ard)?.value;
        let ros = estimate_ros(&ard)?.value;
        reports.push(json!({
            "instance": name,
            "hidden": p.hidden,
            "rho": p.rho(),
            "MoR": { "estimate": mor, "errors": p.errors(mor)? },
            "RoS": { "estimate": ros, "errors": p.errors(ros)? },
        }));
    }
    emit_json(
        &json!({
            "k": args.k,
            "n": first.n(),
            "respondents": sample.len(),
            "ard_identical": multisets[0] == multisets[1],
            "lower_bound": adversarial_lower_bound(first.n() as u64)?,
            "instances": reports,
        }),
        args.out.as_deref(),
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| true),
        Command::Estimate(a) => cmd_estimate(a).map(|_| true),
        Command::Bound { bound } => cmd_bound(bound).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Ingest(a) => cmd_ingest(a).map(|_| true),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Adversarial(a) => cmd_adversarial(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
