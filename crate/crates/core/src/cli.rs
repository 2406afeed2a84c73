//! Command-line front end for the `dquad` binary.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 infeasible
//! rule design, 4 optimizer did not converge.

use std::ffi::OsString;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dqgen::{
    min_nodes_search, parse_rule, save_rule, DqOptions, DqOutcome, MinNodes, QuadratureRule, RuleCache, Symmetry,
    RULE_CACHE_ENV,
};
use crate::error::{Error, Result};
use crate::mmnl::{
    fit, load_dataset, save_dataset, CovarianceStructure, FitOptions, LoglikDiagnostics, MmnlParams, SimulationNodes,
};
use crate::multiindex::tensor_rule;
use crate::orthopoly::WeightFamily;
use crate::qmc::draws;
use crate::simstudy::{generate_dataset, run_study, DgpSpec, MethodKind, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "dquad", version, about = "Designed quadrature and QMC rules for mixed logit estimation")]
struct Cli {
    /// Rule cache directory [default: $DQUAD_RULE_CACHE, then ./rules]
    #[arg(long, global = true, value_name = "DIR")]
    rule_cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a designed quadrature rule (or a tensor Gauss rule) and write it
    GenRule(GenRuleArgs),
    /// Smallest node count for which a rule of the given order can be designed
    MinNodes(MinNodesArgs),
    /// Recompute a rule's residual and check its invariants
    VerifyRule(VerifyRuleArgs),
    /// Simulate a mixed logit panel dataset
    Simulate(SimulateArgs),
    /// Estimate a mixed logit model by simulated maximum likelihood
    Fit(FitArgs),
    /// Run a Monte Carlo study described by a TOML config
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Weight family: normal or uniform
    #[arg(long, default_value = "normal")]
    family: String,
    /// Dimension
    #[arg(long)]
    dim: usize,
    /// Moment residual target
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Seed of the first attempt; attempt k uses seed + k
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total number of optimizer attempts
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Node layout: auto, none or central
    #[arg(long, default_value = "auto")]
    symmetry: String,
}

impl DesignArgs {
    fn options(&self) -> Result<(WeightFamily, DqOptions)> {
        let family: WeightFamily = self.family.parse()?;
        let symmetry = match self.symmetry.as_str() {
            "auto" => Symmetry::Auto,
            "none" => Symmetry::None,
            "central" => Symmetry::Central,
            other => return Err(Error::invalid(format!("unknown symmetry `{other}`"))),
        };
        let opts = DqOptions::default()
            .with_eps(self.eps)
            .with_seed(self.seed)
            .with_restarts(self.restarts)
            .with_symmetry(symmetry);
        Ok((family, opts))
    }
}

#[derive(Args, Debug)]
struct GenRuleArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Total polynomial order to integrate exactly
    #[arg(long, required_unless_present = "tensor")]
    order: Option<u32>,
    /// Number of nodes
    #[arg(long, required_unless_present = "tensor")]
    nodes: Option<usize>,
    /// Write the tensor product of N-point Gauss rules instead
    #[arg(long, value_name = "N", conflicts_with_all = ["order", "nodes"])]
    tensor: Option<usize>,
    /// Output file [default: the rule cache]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MinNodesArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Total polynomial order
    #[arg(long)]
    order: u32,
    /// Lower end of the search range
    #[arg(long, default_value_t = 1)]
    lo: usize,
    /// Upper end of the search range
    #[arg(long)]
    hi: usize,
    /// Store the minimal rule in the cache
    #[arg(long)]
    store: bool,
}

#[derive(Args, Debug)]
struct VerifyRuleArgs {
    /// Rule file, path without `.rule`, or cache key such as normal-d5-r6-n100
    #[arg(long)]
    rule: String,
    /// Print the error of every moment, not only the worst
    #[arg(long)]
    report_moments: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of random coefficients
    #[arg(long)]
    dim: usize,
    /// Covariance of the random coefficients: diagonal or full
    #[arg(long, default_value = "full")]
    covariance: String,
    #[arg(long, default_value_t = 500)]
    individuals: usize,
    #[arg(long, default_value_t = 5)]
    tasks: usize,
    #[arg(long, default_value_t = 5)]
    alternatives: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the true parameters as JSON
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// halton, halton-scrambled, mlhs or dq
    #[arg(long)]
    method: String,
    /// Draws per individual (QMC methods)
    #[arg(long, required_unless_present = "rule", conflicts_with = "rule")]
    draws: Option<usize>,
    /// Designed rule: file, path without `.rule`, or cache key (method dq)
    #[arg(long)]
    rule: Option<String>,
    /// Draw seed (QMC methods)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Covariance structure to estimate: diagonal or full
    #[arg(long, default_value = "full")]
    covariance: String,
    /// JSON array of starting values in report order
    #[arg(long, value_name = "FILE")]
    start: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Include optimizer wall time in the report (otherwise it goes to stderr)
    #[arg(long)]
    report_time: bool,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// TOML study configuration
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Directory for reports and stored fits
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::EigenNonConvergence { .. } => EXIT_INTERNAL,
        Error::Io(e) if !matches!(e.kind(), ErrorKind::NotFound | ErrorKind::PermissionDenied) => EXIT_INTERNAL,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cache = RuleCache::resolve(cli.rule_cache.as_deref());
    let outcome = match cli.command {
        Command::GenRule(a) => gen_rule(&a, &cache),
        Command::MinNodes(a) => min_nodes(&a, &cache),
        Command::VerifyRule(a) => verify_rule(&a, &cache),
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit_command(&a, &cache),
        Command::Study(a) => study(&a, &cache),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::RuleNotFound { key, .. } = &e {
                eprintln!(
                    "hint: rules are cached as <family>-d<dim>-r<order>-n<nodes>.rule under {} (set with --rule-cache or {RULE_CACHE_ENV}); create `{key}` with `dquad gen-rule`",
                    cache.dir().display()
                );
            }
            exit_code(&e)
        }
    }
}

fn describe(rule: &QuadratureRule) -> String {
    format!(
        "{}: {} nodes, residual {:.3e}, min weight {:.3e}, {}",
        rule.cache_key(),
        rule.len(),
        rule.residual(),
        rule.weights().min(),
        rule.provenance().name()
    )
}

fn gen_rule(a: &GenRuleArgs, cache: &RuleCache) -> Result<i32> {
    let (family, opts) = a.design.options()?;
    let rule = if let Some(n1) = a.tensor {
        tensor_rule(family, a.design.dim, n1)?
    } else {
        let (order, nodes) = (a.order.expect("required by clap"), a.nodes.expect("required by clap"));
        match crate::dqgen::generate_dq_with(family, a.design.dim, order, nodes, &opts)? {
            DqOutcome::Converged(rule) => rule,
            DqOutcome::Infeasible(report) => {
                eprintln!("infeasible: {report}");
                return Ok(EXIT_INFEASIBLE);
            }
        }
    };
    let path = match &a.out {
        Some(p) => {
            save_rule(&rule, p)?;
            p.clone()
        }
        None => cache.store(&rule)?,
    };
    println!("{}", describe(&rule));
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn min_nodes(a: &MinNodesArgs, cache: &RuleCache) -> Result<i32> {
    let (family, opts) = a.design.options()?;
    match min_nodes_search(family, a.design.dim, a.order, a.lo, a.hi, &opts)? {
        MinNodes::Found { nodes, rule } => {
            println!("minimum nodes: {nodes}");
            println!("{}", describe(&rule));
            if a.store {
                println!("wrote {}", cache.store(&rule)?.display());
            }
            Ok(EXIT_OK)
        }
        MinNodes::NotFound { upper, best_residual } => {
            eprintln!("infeasible: no rule with at most {upper} nodes (best residual {best_residual:.3e})");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn verify_rule(a: &VerifyRuleArgs, cache: &RuleCache) -> Result<i32> {
    let path = cache.locate(&a.rule)?;
    let rule = parse_rule(&path)?;
    println!("rule {} ({})", rule.cache_key(), path.display());
    let recomputed = rule.recompute_residual()?;
    let mass: f64 = rule.weights().iter().sum();
    println!("residual stored {:.6e} recomputed {recomputed:.6e}", rule.residual());
    println!("mass {mass:.17} min weight {:.6e}", rule.weights().min());
    let errors = rule.moment_errors()?;
    if a.report_moments {
        for (alpha, err) in &errors {
            println!("moment {alpha} error {err:+.3e}");
        }
    }
    if let Some((alpha, err)) = errors.iter().max_by(|x, y| x.1.abs().total_cmp(&y.1.abs())) {
        println!("worst moment {alpha} error {:.3e}", err.abs());
    }
    let violations = rule.invariant_violations();
    if violations.is_empty() {
        println!("OK");
        Ok(EXIT_OK)
    } else {
        for v in &violations {
            println!("FAIL {v}");
        }
        Ok(EXIT_INVALID)
    }
}

fn parse_covariance(s: &str) -> Result<CovarianceStructure> {
    CovarianceStructure::parse(s).ok_or_else(|| Error::invalid(format!("unknown covariance `{s}`")))
}

#[derive(Serialize)]
struct NamedValue {
    name: String,
    value: f64,
}

fn simulate(a: &SimulateArgs) -> Result<i32> {
    let cov = parse_covariance(&a.covariance)?;
    let mut spec = DgpSpec::standard(a.dim, cov)?.with_individuals(a.individuals);
    spec.tasks = a.tasks;
    spec.alternatives = a.alternatives;
    let data = generate_dataset(&spec, a.seed)?;
    save_dataset(&data, &a.out)?;
    let truth = spec.true_params()?;
    let names = MmnlParams::names(1, a.dim, CovarianceStructure::Full);
    let values = truth.pack(CovarianceStructure::Full);
    let rows: Vec<NamedValue> = names
        .into_iter()
        .zip(values)
        .map(|(name, value)| NamedValue { name, value })
        .collect();
    if let Some(p) = &a.truth {
        fs::write(p, serde_json::to_string_pretty(&rows)? + "\n")?;
    }
    println!(
        "wrote {} ({} individuals, {} tasks, {} alternatives)",
        a.out.display(),
        data.len(),
        a.tasks,
        a.alternatives
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ParameterReport {
    name: String,
    estimate: f64,
    std_error: Option<f64>,
    z: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    method: String,
    draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    covariance: String,
    individuals: usize,
    converged: bool,
    termination: String,
    loglik: f64,
    gradient_norm: f64,
    iterations: usize,
    loglik_evaluations: usize,
    diagnostics: LoglikDiagnostics,
    parameters: Vec<ParameterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

fn fit_command(a: &FitArgs, cache: &RuleCache) -> Result<i32> {
    let kind = MethodKind::parse(&a.method).ok_or_else(|| Error::invalid(format!("unknown method `{}`", a.method)))?;
    let cov = parse_covariance(&a.covariance)?;
    let rule_path = match &a.rule {
        Some(spec) => Some(cache.locate(spec)?),
        None => None,
    };
    let data = load_dataset(&a.data)?;
    let (p, d) = (data.fixed_dim(), data.random_dim());

    let (nodes, draws_used, rule_key, seed) = match (kind.generator(), &rule_path, a.draws) {
        (None, Some(path), _) => {
            let rule = parse_rule(path)?;
            rule.verify()?;
            if rule.dim() != d || rule.family() != WeightFamily::StandardNormal {
                return Err(Error::invalid(format!(
                    "rule {} does not match the {d} normal random coefficients of the data",
                    rule.cache_key()
                )));
            }
            let (n, key) = (rule.len(), rule.cache_key());
            (SimulationNodes::Shared(rule), n, Some(key), None)
        }
        (None, None, _) => return Err(Error::invalid("method dq needs --rule")),
        (Some(g), None, Some(r)) => {
            let dm = draws(g, d, data.len(), r, a.seed)?;
            (SimulationNodes::from_draws(&dm)?, r, None, Some(a.seed))
        }
        (Some(_), _, _) => return Err(Error::invalid(format!("method {} needs --draws", kind.name()))),
    };

    let start = match &a.start {
        Some(path) => {
            let v: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
            MmnlParams::unpack(p, d, cov, &v)?
        }
        None => MmnlParams::default_start(p, d),
    };
    let opts = FitOptions {
        max_iterations: a.max_iterations,
        ..FitOptions::default()
    }
    .with_structure(cov);
    let res = fit(&data, &nodes, &start, &opts)?;

    let names = MmnlParams::names(p, d, cov);
    let est = res.params.pack(cov);
    let finite = |x: f64| x.is_finite().then_some(x);
    let z = res.z_scores();
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(k, name)| ParameterReport {
            name,
            estimate: est[k],
            std_error: finite(res.standard_errors[k]),
            z: finite(z[k]),
        })
        .collect();
    let report = FitReport {
        method: kind.name().to_string(),
        draws: draws_used,
        seed,
        rule: rule_key,
        covariance: cov.name().to_string(),
        individuals: data.len(),
        converged: res.converged,
        termination: res.termination.name().to_string(),
        loglik: res.loglik,
        gradient_norm: res.gradient_norm,
        iterations: res.iterations,
        loglik_evaluations: res.loglik_evaluations,
        diagnostics: res.diagnostics,
        parameters,
        wall_time_seconds: a.report_time.then_some(res.wall_time),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.out {
        Some(path) => fs::write(path, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if !a.report_time {
        eprintln!("optimizer wall time {:.3}s", res.wall_time);
    }
    if res.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("not converged: {}", res.termination.name());
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn study(a: &StudyArgs, cache: &RuleCache) -> Result<i32> {
    let config = StudyConfig::load(&a.config)?;
    let progress = |line: &str| eprintln!("{line}");
    let report = run_study(&config, &a.out_dir, cache, &progress)?;
    let failed: usize = report.cells.iter().map(|c| c.failed).sum();
    print!("{}", report.to_tsv());
    println!("# wrote {}", report_paths(&a.out_dir));
    if failed > 0 {
        eprintln!("{failed} fits failed or did not converge; see report.json");
    }
    Ok(EXIT_OK)
}

fn report_paths(dir: &Path) -> String {
    ["report.tsv", "report.json", "timing.tsv"]
        .iter()
        .map(|f| dir.join(f).display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
