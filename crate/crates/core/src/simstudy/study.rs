//! Declarative study configuration, the resumable resample loop and the
//! report writers.
//!
//! Every fit is stored under `fits/<sha256>.json` in the output directory,
//! keyed by everything that determines its result, so an interrupted study
//! picks up where it stopped. `report.tsv` and `report.json` hold only
//! quantities that are reproducible bit for bit; optimizer wall times go to
//! `timing.tsv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{apb, generate_dataset, parameter_ratios, t_stat, DgpSpec, NUMERAIRE};
use crate::dqgen::{DqOptions, DqOutcome, QuadratureRule, RuleCache};
use crate::error::{Error, Result};
use crate::mmnl::{fit, ChoiceDataset, CovarianceStructure, FitOptions, LoglikDiagnostics, MmnlParams, SimulationNodes};
use crate::orthopoly::WeightFamily;
use crate::qmc::{draws, Generator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Halton,
    HaltonScrambled,
    Mlhs,
    Dq,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Halton => "halton",
            MethodKind::HaltonScrambled => "halton-scrambled",
            MethodKind::Mlhs => "mlhs",
            MethodKind::Dq => "dq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dq" => Some(MethodKind::Dq),
            other => Generator::parse(other).map(Self::from),
        }
    }

    pub fn generator(self) -> Option<Generator> {
        match self {
            MethodKind::Halton => Some(Generator::HaltonRandomized),
            MethodKind::HaltonScrambled => Some(Generator::HaltonScrambled),
            MethodKind::Mlhs => Some(Generator::Mlhs),
            MethodKind::Dq => None,
        }
    }
}

impl From<Generator> for MethodKind {
    fn from(g: Generator) -> Self {
        match g {
            Generator::HaltonRandomized => MethodKind::Halton,
            Generator::HaltonScrambled => MethodKind::HaltonScrambled,
            Generator::Mlhs => MethodKind::Mlhs,
        }
    }
}

/// One simulation method and its grid. `draws` is the number of draws for
/// QMC and the number of nodes for designed quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub draws: Vec<usize>,
    /// Total orders; required for `dq`, ignored otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<u32>,
    /// Restricts the method to these covariance structures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariances: Option<Vec<CovarianceStructure>>,
    /// Restricts the method to these dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

fn default_resamples() -> usize {
    10
}
fn default_individuals() -> usize {
    500
}
fn default_five() -> usize {
    5
}
fn default_restarts() -> usize {
    20
}
fn default_eps() -> f64 {
    1e-8
}
fn default_iterations() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Master seed; every dataset and draw seed derives from it.
    pub seed: u64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_individuals")]
    pub individuals: usize,
    #[serde(default = "default_five")]
    pub tasks: usize,
    #[serde(default = "default_five")]
    pub alternatives: usize,
    pub dims: Vec<usize>,
    pub covariances: Vec<CovarianceStructure>,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub dq_seed: u64,
    #[serde(default = "default_restarts")]
    pub dq_restarts: usize,
    #[serde(default = "default_eps")]
    pub dq_eps: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.resamples == 0 || self.individuals == 0 || self.tasks == 0 {
            return bad("resamples, individuals and tasks must be positive".into());
        }
        if self.alternatives < 2 {
            return bad("at least two alternatives are needed".into());
        }
        if self.dims.is_empty() || self.covariances.is_empty() || self.methods.is_empty() {
            return bad("dims, covariances and methods must be non-empty".into());
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
            return bad(format!("dimension {d} is below 2"));
        }
        for m in &self.methods {
            if m.draws.is_empty() || m.draws.contains(&0) {
                return bad(format!("method {} needs a non-empty grid of positive draws", m.kind.name()));
            }
            if m.kind == MethodKind::Dq && m.orders.is_empty() {
                return bad("method dq needs at least one order".into());
            }
        }
        if !(self.dq_eps > 0.0) {
            return bad("dq_eps must be positive".into());
        }
        Ok(())
    }

    fn spec(&self, dim: usize, covariance: CovarianceStructure) -> Result<DgpSpec> {
        let mut spec = DgpSpec::standard(dim, covariance)?.with_individuals(self.individuals);
        spec.tasks = self.tasks;
        spec.alternatives = self.alternatives;
        Ok(spec)
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &dim in &self.dims {
            for &covariance in &self.covariances {
                for m in &self.methods {
                    if m.dims.as_ref().is_some_and(|ds| !ds.contains(&dim)) {
                        continue;
                    }
                    if m.covariances.as_ref().is_some_and(|cs| !cs.contains(&covariance)) {
                        continue;
                    }
                    let orders: Vec<Option<u32>> = if m.kind == MethodKind::Dq {
                        m.orders.iter().map(|&o| Some(o)).collect()
                    } else {
                        vec![None]
                    };
                    for order in orders {
                        for &n in &m.draws {
                            out.push(Cell {
                                dim,
                                covariance,
                                method: m.kind,
                                order,
                                draws: n,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cell {
    dim: usize,
    covariance: CovarianceStructure,
    method: MethodKind,
    order: Option<u32>,
    draws: usize,
}

impl Cell {
    fn label(&self) -> String {
        let order = self.order.map(|o| format!(" r={o}")).unwrap_or_default();
        format!("d={} {} {}{order} n={}", self.dim, self.covariance.name(), self.method.name(), self.draws)
    }
}

/// Seed from the master seed and a path of labels (SHA-256, first 8 bytes).
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleStatus {
    Ok,
    NotConverged,
    Failed,
}

/// Stored result of one fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FitRecord {
    status: ResampleStatus,
    loglik: Option<f64>,
    params: Vec<f64>,
    ratios: Vec<f64>,
    evaluations: usize,
    iterations: usize,
    wall_time: f64,
    termination: Option<String>,
    diagnostics: LoglikDiagnostics,
    message: Option<String>,
}

impl FitRecord {
    fn failed(message: String) -> Self {
        FitRecord {
            status: ResampleStatus::Failed,
            loglik: None,
            params: Vec::new(),
            ratios: Vec::new(),
            evaluations: 0,
            iterations: 0,
            wall_time: 0.0,
            termination: None,
            diagnostics: LoglikDiagnostics::default(),
            message: Some(message),
        }
    }
}

/// Everything that determines a fit.
#[derive(Serialize)]
struct FitKey<'a> {
    format: u32,
    dim: usize,
    covariance: CovarianceStructure,
    individuals: usize,
    tasks: usize,
    alternatives: usize,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    dataset_seed: u64,
    method: &'a str,
    draws: usize,
    order: Option<u32>,
    draw_seed: Option<u64>,
    rule: Option<(u64, String)>,
    max_iterations: usize,
}

/// Per-resample line of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleOutcome {
    pub resample: usize,
    pub dataset_seed: u64,
    pub status: ResampleStatus,
    pub loglik: Option<f64>,
    /// APB averaged over the reported ratios.
    pub apb: Option<f64>,
    pub evaluations: usize,
    pub ratios: Vec<f64>,
    pub diagnostics: LoglikDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Aggregates over the resamples that converged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dim: usize,
    pub covariance: CovarianceStructure,
    pub method: MethodKind,
    pub order: Option<u32>,
    pub draws: usize,
    pub resamples: usize,
    pub completed: usize,
    /// Errors and non-converged fits; they are excluded from every mean.
    pub failed: usize,
    pub mean_neg_loglik: Option<f64>,
    pub mean_apb: Option<f64>,
    pub mean_evaluations: Option<f64>,
    pub mean_abs_t: Option<f64>,
    /// Ratios whose estimates did not vary across resamples.
    pub zero_fsse: usize,
    pub diagnostics: LoglikDiagnostics,
    pub outcomes: Vec<ResampleOutcome>,
}

impl CellReport {
    pub fn label(&self) -> String {
        Cell {
            dim: self.dim,
            covariance: self.covariance,
            method: self.method,
            order: self.order,
            draws: self.draws,
        }
        .label()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub dim: usize,
    pub covariance: CovarianceStructure,
    pub method: MethodKind,
    pub order: Option<u32>,
    pub draws: usize,
    pub mean_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub numeraire: String,
    pub cells: Vec<CellReport>,
    #[serde(skip)]
    pub timings: Vec<CellTiming>,
}

impl StudyReport {
    /// The cell for `(dim, covariance, method, order, draws)`.
    pub fn cell(
        &self,
        dim: usize,
        covariance: CovarianceStructure,
        method: MethodKind,
        order: Option<u32>,
        draws: usize,
    ) -> Option<&CellReport> {
        self.cells.iter().find(|c| {
            c.dim == dim && c.covariance == covariance && c.method == method && c.order == order && c.draws == draws
        })
    }

    /// Sum of every cell's guard-rail counters.
    pub fn diagnostics(&self) -> LoglikDiagnostics {
        let mut total = LoglikDiagnostics::default();
        for c in &self.cells {
            total.merge(&c.diagnostics);
        }
        total
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ratios are divided by the numeraire {}", self.numeraire);
        let _ = writeln!(s, "# means are over completed resamples; failed counts errors and non-converged fits");
        let _ = writeln!(
            s,
            "dim\tcovariance\tmethod\torder\tdraws\tresamples\tcompleted\tfailed\tneg_loglik\tapb_pct\tloglik_evals\tabs_t"
        );
        let f = |v: Option<f64>, prec: usize| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.prec$}"));
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.dim,
                c.covariance.name(),
                c.method.name(),
                c.order.map_or_else(|| "-".to_string(), |o| o.to_string()),
                c.draws,
                c.resamples,
                c.completed,
                c.failed,
                f(c.mean_neg_loglik, 4),
                f(c.mean_apb, 4),
                f(c.mean_evaluations, 2),
                f(c.mean_abs_t, 4),
            );
        }
        s
    }

    pub fn timing_tsv(&self) -> String {
        let mut s = String::from("dim\tcovariance\tmethod\torder\tdraws\tmean_seconds\n");
        for t in &self.timings {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                t.dim,
                t.covariance.name(),
                t.method.name(),
                t.order.map_or_else(|| "-".to_string(), |o| o.to_string()),
                t.draws,
                t.mean_seconds.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}")),
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.tsv`, `report.json` and `timing.tsv`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join("report.tsv"), self.to_tsv())?;
        fs::write(out_dir.join("report.json"), self.to_json()?)?;
        fs::write(out_dir.join("timing.tsv"), self.timing_tsv())?;
        Ok(())
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every cell of `config`, reusing fits already stored in `out_dir`,
/// and writes the reports there. DQ rules come from `cache`, generated on a
/// miss. Per-cell failures are recorded and the study carries on.
pub fn run_study(
    config: &StudyConfig,
    out_dir: &Path,
    cache: &RuleCache,
    progress: &dyn Fn(&str),
) -> Result<StudyReport> {
    config.validate()?;
    let fits_dir = out_dir.join("fits");
    fs::create_dir_all(&fits_dir)?;
    let fit_opts = FitOptions {
        max_iterations: config.max_iterations,
        standard_errors: false,
        ..FitOptions::default()
    };

    let mut cells = Vec::new();
    let mut timings = Vec::new();
    let all = config.cells();
    let mut current: Option<(usize, CovarianceStructure, DgpSpec, Vec<Option<ChoiceDataset>>)> = None;

    for (ci, cell) in all.iter().enumerate() {
        if current.as_ref().is_none_or(|c| (c.0, c.1) != (cell.dim, cell.covariance)) {
            let spec = config.spec(cell.dim, cell.covariance)?;
            current = Some((cell.dim, cell.covariance, spec, vec![None; config.resamples]));
        }
        let (_, _, spec, datasets) = current.as_mut().expect("set above");
        let truth = parameter_ratios(&spec.true_params()?)?;
        progress(&format!("[{}/{}] {}", ci + 1, all.len(), cell.label()));

        let rule: std::result::Result<Option<QuadratureRule>, String> = match cell.order {
            Some(order) => {
                let opts = DqOptions::default()
                    .with_seed(config.dq_seed)
                    .with_eps(config.dq_eps)
                    .with_restarts(config.dq_restarts);
                match cache.get_or_generate(WeightFamily::StandardNormal, cell.dim, order, cell.draws, &opts) {
                    Ok(DqOutcome::Converged(rule)) => Ok(Some(rule)),
                    Ok(DqOutcome::Infeasible(rep)) => Err(rep.to_string()),
                    Err(e) => Err(e.to_string()),
                }
            }
            None => Ok(None),
        };
        let shared = match &rule {
            Ok(Some(r)) => Some(SimulationNodes::Shared(r.clone())),
            _ => None,
        };

        let mut records = Vec::with_capacity(config.resamples);
        for r in 0..config.resamples {
            let dataset_seed = derive_seed(config.seed, &["data", &cell.dim.to_string(), cell.covariance.name(), &r.to_string()]);
            let draw_seed = cell.method.generator().map(|_| {
                derive_seed(
                    config.seed,
                    &["draws", cell.method.name(), &cell.dim.to_string(), cell.covariance.name(), &r.to_string(), &cell.draws.to_string()],
                )
            });
            let key = FitKey {
                format: 1,
                dim: cell.dim,
                covariance: cell.covariance,
                individuals: spec.individuals,
                tasks: spec.tasks,
                alternatives: spec.alternatives,
                alpha: spec.alpha.iter().copied().collect(),
                gamma: spec.gamma.iter().copied().collect(),
                delta: spec.delta.iter().copied().collect(),
                dataset_seed,
                method: cell.method.name(),
                draws: cell.draws,
                order: cell.order,
                draw_seed,
                rule: match &rule {
                    Ok(Some(rule)) => Some((rule.seed(), format!("{:e}", rule.residual()))),
                    _ => None,
                },
                max_iterations: config.max_iterations,
            };
            let hash = hex(&Sha256::digest(serde_json::to_vec(&key)?));
            let path = fits_dir.join(format!("{hash}.json"));

            let cached = fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str::<FitRecord>(&t).ok());
            let record = match cached {
                Some(rec) => rec,
                None => {
                    let rec = match &rule {
                        Err(msg) => FitRecord::failed(format!("rule unavailable: {msg}")),
                        Ok(_) => {
                            if datasets[r].is_none() {
                                datasets[r] = Some(generate_dataset(spec, dataset_seed)?);
                            }
                            let data = datasets[r].as_ref().expect("generated above");
                            run_fit(data, cell, shared.as_ref(), draw_seed, &fit_opts)
                        }
                    };
                    write_atomic(&path, &serde_json::to_string(&rec)?)?;
                    rec
                }
            };
            records.push((r, dataset_seed, record));
        }
        let (report, timing) = aggregate(cell, &truth, records);
        progress(&format!(
            "    completed {}/{}, mean -loglik {}",
            report.completed,
            report.resamples,
            report.mean_neg_loglik.map_or("NA".into(), |v| format!("{v:.3}"))
        ));
        cells.push(report);
        timings.push(timing);
    }

    let report = StudyReport {
        config: config.clone(),
        numeraire: NUMERAIRE.to_string(),
        cells,
        timings,
    };
    report.write(out_dir)?;
    Ok(report)
}

fn run_fit(
    data: &ChoiceDataset,
    cell: &Cell,
    shared: Option<&SimulationNodes>,
    draw_seed: Option<u64>,
    opts: &FitOptions,
) -> FitRecord {
    let owned;
    let nodes = match (shared, cell.method.generator(), draw_seed) {
        (Some(n), _, _) => n,
        (None, Some(g), Some(seed)) => {
            match draws(g, cell.dim, data.len(), cell.draws, seed).and_then(|dm| SimulationNodes::from_draws(&dm)) {
                Ok(n) => {
                    owned = n;
                    &owned
                }
                Err(e) => return FitRecord::failed(e.to_string()),
            }
        }
        _ => return FitRecord::failed("no simulation nodes".into()),
    };
    let start = MmnlParams::default_start(data.fixed_dim(), data.random_dim());
    let opts = opts.clone().with_structure(cell.covariance);
    match fit(data, nodes, &start, &opts) {
        Err(e) => FitRecord::failed(e.to_string()),
        Ok(res) => {
            let (ratios, ratio_err) = match parameter_ratios(&res.params) {
                Ok(r) => (r, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            let status = if ratio_err.is_some() {
                ResampleStatus::Failed
            } else if res.converged {
                ResampleStatus::Ok
            } else {
                ResampleStatus::NotConverged
            };
            FitRecord {
                status,
                loglik: Some(res.loglik),
                params: res.params.pack(res.structure),
                ratios,
                evaluations: res.loglik_evaluations,
                iterations: res.iterations,
                wall_time: res.wall_time,
                termination: Some(res.termination.name().to_string()),
                diagnostics: res.diagnostics,
                message: ratio_err.or_else(|| (!res.converged).then(|| format!("stopped: {}", res.termination.name()))),
            }
        }
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(cell: &Cell, truth: &[f64], records: Vec<(usize, u64, FitRecord)>) -> (CellReport, CellTiming) {
    let mut diagnostics = LoglikDiagnostics::default();
    let mut outcomes = Vec::new();
    let mut ok: Vec<&FitRecord> = Vec::new();
    for (_, _, rec) in &records {
        diagnostics.merge(&rec.diagnostics);
        if rec.status == ResampleStatus::Ok {
            ok.push(rec);
        }
    }
    let resample_apb = |rec: &FitRecord| -> Option<f64> {
        let v: Vec<f64> = rec.ratios.iter().zip(truth).filter_map(|(e, t)| apb(*e, *t)).collect();
        mean(&v)
    };
    for (r, seed, rec) in &records {
        outcomes.push(ResampleOutcome {
            resample: *r,
            dataset_seed: *seed,
            status: rec.status,
            loglik: rec.loglik,
            apb: if rec.ratios.is_empty() { None } else { resample_apb(rec) },
            evaluations: rec.evaluations,
            ratios: rec.ratios.clone(),
            diagnostics: rec.diagnostics,
            message: rec.message.clone(),
        });
    }

    let neg_ll: Vec<f64> = ok.iter().filter_map(|r| r.loglik.map(|l| -l)).collect();
    let apbs: Vec<f64> = ok.iter().filter_map(|r| resample_apb(r)).collect();
    let evals: Vec<f64> = ok.iter().map(|r| r.evaluations as f64).collect();
    let mut zero_fsse = 0;
    let mean_abs_t = if ok.len() >= 2 {
        let ts: Vec<f64> = (0..truth.len())
            .filter_map(|k| {
                let est: Vec<f64> = ok.iter().map(|r| r.ratios[k]).collect();
                let t = t_stat(&est, truth[k]).ok()?;
                if t.zero_fsse {
                    zero_fsse += 1;
                    None
                } else {
                    Some(t.value.abs())
                }
            })
            .collect();
        mean(&ts)
    } else {
        None
    };
    let times: Vec<f64> = ok.iter().map(|r| r.wall_time).collect();
    let report = CellReport {
        dim: cell.dim,
        covariance: cell.covariance,
        method: cell.method,
        order: cell.order,
        draws: cell.draws,
        resamples: records.len(),
        completed: ok.len(),
        failed: records.len() - ok.len(),
        mean_neg_loglik: mean(&neg_ll),
        mean_apb: mean(&apbs),
        mean_evaluations: mean(&evals),
        mean_abs_t,
        zero_fsse,
        diagnostics,
        outcomes,
    };
    let timing = CellTiming {
        dim: cell.dim,
        covariance: cell.covariance,
        method: cell.method,
        order: cell.order,
        draws: cell.draws,
        mean_seconds: mean(&times),
    };
    (report, timing)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
resamples = 2
individuals = 60
dims = [3]
covariances = ["diagonal"]

[[methods]]
kind = "halton"
draws = [20]

[[methods]]
kind = "dq"
orders = [3]
draws = [6]
"#;

    #[test]
    fn config_parses_and_expands() {
        let cfg = StudyConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.tasks, 5);
        let cells = cfg.cells();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1].order, Some(3));
        assert!(StudyConfig::from_toml("seed = 1\nbogus = 2\ndims=[3]\ncovariances=[]\nmethods=[]").is_err());
        let no_order = MINIMAL.replace("orders = [3]\n", "");
        assert!(matches!(StudyConfig::from_toml(&no_order), Err(Error::Config(_))));
    }

    #[test]
    fn derived_seeds_separate_labels() {
        let a = derive_seed(1, &["data", "3"]);
        assert_eq!(a, derive_seed(1, &["data", "3"]));
        assert_ne!(a, derive_seed(2, &["data", "3"]));
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }

    #[test]
    fn small_study_runs_resumes_and_isolates_failures() {
        let dir = tempfile::tempdir().unwrap();
        let cache = RuleCache::new(dir.path().join("rules"));
        let mut cfg = StudyConfig::from_toml(MINIMAL).unwrap();
        // a 1-node rule of order 2 in d=3 cannot exist
        cfg.methods.push(MethodSpec {
            kind: MethodKind::Dq,
            draws: vec![1],
            orders: vec![2],
            covariances: None,
            dims: None,
        });
        cfg.dq_restarts = 2;
        let out = dir.path().join("out");
        let quiet = |_: &str| {};
        let first = run_study(&cfg, &out, &cache, &quiet).unwrap();
        assert_eq!(first.cells.len(), 3);
        for c in &first.cells[..2] {
            assert_eq!(c.resamples, 2);
            assert!(c.mean_neg_loglik.is_some() || c.failed > 0);
        }
        let bad = &first.cells[2];
        assert_eq!((bad.completed, bad.failed), (0, 2));
        assert!(bad.outcomes[0].message.as_deref().unwrap().contains("rule unavailable"));
        assert_eq!(first.diagnostics().invalid, 0);

        let tsv = fs::read_to_string(out.join("report.tsv")).unwrap();
        assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 4);

        // interrupted run: drop one stored fit and rerun
        let victim = fs::read_dir(out.join("fits")).unwrap().next().unwrap().unwrap().path();
        fs::remove_file(victim).unwrap();
        let json_before = fs::read(out.join("report.json")).unwrap();
        let second = run_study(&cfg, &out, &cache, &quiet).unwrap();
        assert_eq!(second.cells, first.cells);
        assert_eq!(fs::read(out.join("report.json")).unwrap(), json_before);
        assert_eq!(fs::read_to_string(out.join("report.tsv")).unwrap(), tsv);
    }
}
