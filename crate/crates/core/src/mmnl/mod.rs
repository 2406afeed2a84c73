//! Mixed multinomial logit: choice probabilities, simulated loglikelihood
//! under any positive-weight rule, its analytic gradient, and BFGS
//! maximum simulated likelihood.
//!
//! Individual `i` in task `t` picks among `J` alternatives with utilities
//! `x_itj' alpha + z_itj' beta_i + e_itj`, where `beta_i = gamma + L u`,
//! `u ~ N(0, I_d)` and `e` is Type-I extreme value. With rule nodes `u_q`
//! and weights `w_q` the simulated loglikelihood is
//!
//! ```text
//! l(psi) = sum_i ln sum_q w_q prod_t P_itj*(alpha, gamma + L u_q)
//! ```
//!
//! The inner sum is taken in log space, so positive weights always give a
//! real, finite value.

mod data;
pub(crate) mod optim;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{load_dataset, save_dataset, ChoiceDataset, Individual};
pub use optim::Termination;

use crate::dqgen::QuadratureRule;
use crate::error::{Error, Result};
use crate::orthopoly::WeightFamily;
use crate::qmc::{to_normal_rule, DrawMatrix};

/// Per-individual simulated probabilities below this are clamped.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Which entries of the Cholesky factor are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceStructure {
    /// Only the diagonal of `L`; off-diagonal entries stay at zero.
    Diagonal,
    /// The whole lower triangle of `L`.
    Full,
}

impl CovarianceStructure {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceStructure::Diagonal => "diagonal",
            CovarianceStructure::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "diagonal" | "diag" => Some(CovarianceStructure::Diagonal),
            "full" => Some(CovarianceStructure::Full),
            _ => None,
        }
    }

    /// Estimated `(row, col)` entries of `L`, row-major over the lower triangle.
    pub fn chol_entries(self, d: usize) -> Vec<(usize, usize)> {
        match self {
            CovarianceStructure::Diagonal => (0..d).map(|a| (a, a)).collect(),
            CovarianceStructure::Full => (0..d).flat_map(|a| (0..=a).map(move |b| (a, b))).collect(),
        }
    }
}

/// `(alpha, gamma, L)` with `Delta = L L'`.
#[derive(Clone, Debug, PartialEq)]
pub struct MmnlParams {
    alpha: DVector<f64>,
    gamma: DVector<f64>,
    chol: DMatrix<f64>,
}

impl MmnlParams {
    /// `chol` must be square, match `gamma`, and vanish above the diagonal.
    pub fn new(alpha: DVector<f64>, gamma: DVector<f64>, chol: DMatrix<f64>) -> Result<Self> {
        let d = gamma.len();
        if chol.shape() != (d, d) {
            return Err(Error::invalid(format!("Cholesky factor is {:?}, expected {d}x{d}", chol.shape())));
        }
        if (0..d).any(|a| (a + 1..d).any(|b| chol[(a, b)] != 0.0)) {
            return Err(Error::invalid("Cholesky factor must be lower triangular"));
        }
        Ok(MmnlParams { alpha, gamma, chol })
    }

    /// `alpha = 0`, `gamma = 0`, `L = 0.1 I`.
    pub fn default_start(fixed: usize, random: usize) -> Self {
        MmnlParams {
            alpha: DVector::zeros(fixed),
            gamma: DVector::zeros(random),
            chol: DMatrix::identity(random, random) * 0.1,
        }
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `Delta = L L'`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    pub fn fixed_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn random_dim(&self) -> usize {
        self.gamma.len()
    }

    /// Flat vector `alpha, gamma, L` (entries per `structure`).
    pub fn pack(&self, structure: CovarianceStructure) -> Vec<f64> {
        let mut v: Vec<f64> = self.alpha.iter().chain(self.gamma.iter()).copied().collect();
        v.extend(structure.chol_entries(self.random_dim()).into_iter().map(|(a, b)| self.chol[(a, b)]));
        v
    }

    pub fn unpack(fixed: usize, random: usize, structure: CovarianceStructure, v: &[f64]) -> Result<Self> {
        let entries = structure.chol_entries(random);
        let want = fixed + random + entries.len();
        if v.len() != want {
            return Err(Error::dimension_mismatch("parameter vector", want, v.len()));
        }
        let alpha = DVector::from_column_slice(&v[..fixed]);
        let gamma = DVector::from_column_slice(&v[fixed..fixed + random]);
        let mut chol = DMatrix::zeros(random, random);
        for (k, (a, b)) in entries.into_iter().enumerate() {
            chol[(a, b)] = v[fixed + random + k];
        }
        Ok(MmnlParams { alpha, gamma, chol })
    }

    /// Names matching [`MmnlParams::pack`]: `alpha_1`, `gamma_1`, `L_2_1`, ...
    pub fn names(fixed: usize, random: usize, structure: CovarianceStructure) -> Vec<String> {
        let mut names: Vec<String> = (1..=fixed).map(|k| format!("alpha_{k}")).collect();
        names.extend((1..=random).map(|k| format!("gamma_{k}")));
        names.extend(structure.chol_entries(random).into_iter().map(|(a, b)| format!("L_{}_{}", a + 1, b + 1)));
        names
    }

    /// Drops off-diagonal entries when `structure` is diagonal.
    pub fn restricted(&self, structure: CovarianceStructure) -> Self {
        Self::unpack(self.fixed_dim(), self.random_dim(), structure, &self.pack(structure))
            .expect("pack and unpack agree")
    }
}

/// Rules used to integrate out `u`: one rule for everybody, or one per
/// individual (QMC blocks).
#[derive(Clone, Debug)]
pub enum SimulationNodes {
    Shared(QuadratureRule),
    PerIndividual(Vec<QuadratureRule>),
}

impl SimulationNodes {
    /// Wraps every individual's QMC block as a normal-space rule.
    pub fn from_draws(draws: &DrawMatrix) -> Result<Self> {
        let rules = (0..draws.individuals())
            .map(|i| to_normal_rule(draws, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulationNodes::PerIndividual(rules))
    }

    pub fn rule_for(&self, individual: usize) -> &QuadratureRule {
        match self {
            SimulationNodes::Shared(rule) => rule,
            SimulationNodes::PerIndividual(rules) => &rules[individual],
        }
    }

    fn check(&self, data: &ChoiceDataset) -> Result<()> {
        let rules: &[QuadratureRule] = match self {
            SimulationNodes::Shared(rule) => std::slice::from_ref(rule),
            SimulationNodes::PerIndividual(rules) => {
                if rules.len() != data.len() {
                    return Err(Error::dimension_mismatch("per-individual rules", data.len(), rules.len()));
                }
                rules
            }
        };
        for rule in rules {
            if rule.family() != WeightFamily::StandardNormal {
                return Err(Error::invalid(format!("simulation needs standard normal rules, got {}", rule.family())));
            }
            if rule.dim() != data.random_dim() {
                return Err(Error::dimension_mismatch("rule dimension", data.random_dim(), rule.dim()));
            }
        }
        Ok(())
    }
}

impl From<QuadratureRule> for SimulationNodes {
    fn from(rule: QuadratureRule) -> Self {
        SimulationNodes::Shared(rule)
    }
}

/// Softmax with max-subtraction.
pub fn logit_prob(utilities: &[f64]) -> Vec<f64> {
    let m = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = utilities.iter().map(|u| (u - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `prod_t P(chosen_t | alpha, beta)` for one individual.
pub fn conditional_likelihood(ind: &Individual, alpha: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let j = ind.alternatives();
    let v = ind.x() * alpha + ind.z() * beta;
    (0..ind.tasks())
        .map(|t| logit_prob(&v.as_slice()[t * j..(t + 1) * j])[ind.chosen()[t]])
        .product()
}

/// Guard-rail counters accumulated over likelihood evaluations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoglikDiagnostics {
    /// Individuals whose simulated probability fell below the floor.
    pub clamped: usize,
    /// Individuals whose simulated probability came out negative or non-finite.
    pub invalid: usize,
    /// Evaluations whose total was not a finite real number.
    pub non_finite_totals: usize,
}

impl LoglikDiagnostics {
    pub fn merge(&mut self, other: &LoglikDiagnostics) {
        self.clamped += other.clamped;
        self.invalid += other.invalid;
        self.non_finite_totals += other.non_finite_totals;
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedLoglik {
    pub value: f64,
    /// `ln P_i` per individual, after clamping.
    pub ln_probabilities: Vec<f64>,
    pub diagnostics: LoglikDiagnostics,
}

#[derive(Clone, Debug)]
pub struct LoglikGradient {
    pub loglik: SimulatedLoglik,
    /// `d l / d psi` in [`MmnlParams::pack`] order.
    pub gradient: DVector<f64>,
    /// Per-individual scores, one column per individual.
    pub scores: DMatrix<f64>,
}

struct Term {
    ln_p: f64,
    clamped: bool,
    invalid: bool,
    score: Vec<f64>,
}

fn check_params(data: &ChoiceDataset, params: &MmnlParams) -> Result<()> {
    if params.fixed_dim() != data.fixed_dim() {
        return Err(Error::dimension_mismatch("alpha", data.fixed_dim(), params.fixed_dim()));
    }
    if params.random_dim() != data.random_dim() {
        return Err(Error::dimension_mismatch("gamma", data.random_dim(), params.random_dim()));
    }
    Ok(())
}

/// `ln sum_q w_q L_iq` and, when asked, the score of individual `ind`.
///
/// `b = L U` holds the random-coefficient deviations at the rule's nodes.
fn individual_term(
    ind: &Individual,
    params: &MmnlParams,
    rule: &QuadratureRule,
    b: &DMatrix<f64>,
    structure: Option<CovarianceStructure>,
) -> Term {
    let j = ind.alternatives();
    let tasks = ind.tasks();
    let r = rule.len();
    let base = ind.x() * &params.alpha + ind.z() * &params.gamma;
    let mut u = ind.z() * b;
    for mut col in u.column_iter_mut() {
        col += &base;
    }

    let rows = u.nrows();
    let mut a = vec![0.0; r];
    for (col, aq) in u.as_mut_slice().chunks_exact_mut(rows).zip(a.iter_mut()) {
        let mut ln_l = 0.0;
        for t in 0..tasks {
            let seg = &mut col[t * j..(t + 1) * j];
            let m = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + seg.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let c = ind.chosen()[t];
            ln_l += seg[c] - lse;
            if structure.is_some() {
                // logit residual d - P
                for (k, v) in seg.iter_mut().enumerate() {
                    *v = f64::from(u8::from(k == c)) - (*v - lse).exp();
                }
            }
        }
        *aq = ln_l;
    }
    for (aq, w) in a.iter_mut().zip(rule.weights().iter()) {
        *aq += w.ln();
    }
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ln_p = m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln();

    let invalid = !ln_p.is_finite() && !(ln_p == f64::NEG_INFINITY);
    let clamped = invalid || ln_p < PROBABILITY_FLOOR.ln();
    if clamped {
        ln_p = PROBABILITY_FLOOR.ln();
    }

    let Some(structure) = structure else {
        return Term {
            ln_p,
            clamped,
            invalid,
            score: Vec::new(),
        };
    };
    let (p, d) = (params.fixed_dim(), params.random_dim());
    let entries = structure.chol_entries(d);
    let mut score = vec![0.0; p + d + entries.len()];
    if clamped {
        // the floor is flat
        return Term {
            ln_p,
            clamped,
            invalid,
            score,
        };
    }
    // posterior node weights
    let h = DVector::from_iterator(r, a.iter().map(|v| (v - ln_p).exp()));
    let resid_h = &u * &h;
    let s_alpha = ind.x().tr_mul(&resid_h);
    let s = ind.z().tr_mul(&u);
    let s_gamma = &s * &h;
    let mut sh = s;
    for (mut col, hq) in sh.column_iter_mut().zip(h.iter()) {
        col *= *hq;
    }
    let s_chol = sh * rule.nodes().transpose();
    score[..p].copy_from_slice(s_alpha.as_slice());
    score[p..p + d].copy_from_slice(s_gamma.as_slice());
    for (k, (ra, rb)) in entries.into_iter().enumerate() {
        score[p + d + k] = s_chol[(ra, rb)];
    }
    Term {
        ln_p,
        clamped,
        invalid,
        score,
    }
}

fn evaluate(
    data: &ChoiceDataset,
    params: &MmnlParams,
    nodes: &SimulationNodes,
    structure: Option<CovarianceStructure>,
) -> Result<(SimulatedLoglik, Option<DMatrix<f64>>)> {
    check_params(data, params)?;
    nodes.check(data)?;
    let shared_b = match nodes {
        SimulationNodes::Shared(rule) => Some(&params.chol * rule.nodes()),
        SimulationNodes::PerIndividual(_) => None,
    };
    let terms: Vec<Term> = data
        .individuals()
        .par_iter()
        .enumerate()
        .map(|(i, ind)| {
            let rule = nodes.rule_for(i);
            match &shared_b {
                Some(b) => individual_term(ind, params, rule, b, structure),
                None => individual_term(ind, params, rule, &(&params.chol * rule.nodes()), structure),
            }
        })
        .collect();

    // fixed-order reduction
    let mut diagnostics = LoglikDiagnostics::default();
    let mut value = 0.0;
    for t in &terms {
        value += t.ln_p;
        diagnostics.clamped += usize::from(t.clamped);
        diagnostics.invalid += usize::from(t.invalid);
    }
    if !value.is_finite() {
        diagnostics.non_finite_totals += 1;
    }
    let scores = structure.map(|s| {
        let k = data.fixed_dim() + data.random_dim() + s.chol_entries(data.random_dim()).len();
        DMatrix::from_fn(k, terms.len(), |row, i| terms[i].score[row])
    });
    let loglik = SimulatedLoglik {
        value,
        ln_probabilities: terms.iter().map(|t| t.ln_p).collect(),
        diagnostics,
    };
    Ok((loglik, scores))
}

pub fn simulated_loglik(data: &ChoiceDataset, params: &MmnlParams, nodes: &SimulationNodes) -> Result<SimulatedLoglik> {
    Ok(evaluate(data, params, nodes, None)?.0)
}

/// Loglikelihood with its gradient over the entries selected by `structure`.
pub fn simulated_loglik_gradient(
    data: &ChoiceDataset,
    params: &MmnlParams,
    nodes: &SimulationNodes,
    structure: CovarianceStructure,
) -> Result<LoglikGradient> {
    let (loglik, scores) = evaluate(data, params, nodes, Some(structure))?;
    let scores = scores.expect("scores requested");
    let mut gradient = DVector::zeros(scores.nrows());
    for col in scores.column_iter() {
        gradient += col;
    }
    Ok(LoglikGradient {
        loglik,
        gradient,
        scores,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub structure: CovarianceStructure,
    pub max_iterations: usize,
    /// Stop once the gradient infinity norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step changes the loglikelihood by less than
    /// this fraction of its magnitude.
    pub relative_tolerance: f64,
    pub standard_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            structure: CovarianceStructure::Full,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            relative_tolerance: 1e-9,
            standard_errors: true,
        }
    }
}

impl FitOptions {
    pub fn with_structure(mut self, structure: CovarianceStructure) -> Self {
        self.structure = structure;
        self
    }
}

#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub params: MmnlParams,
    pub structure: CovarianceStructure,
    pub loglik: f64,
    /// Infinity norm of the gradient at the returned point.
    pub gradient_norm: f64,
    /// Objective evaluations made by the optimizer, line search included.
    pub loglik_evaluations: usize,
    pub iterations: usize,
    /// Optimizer wall time in seconds.
    pub wall_time: f64,
    pub converged: bool,
    pub termination: Termination,
    /// BHHH standard errors in [`MmnlParams::pack`] order; NaN when the
    /// outer-product matrix is singular.
    pub standard_errors: DVector<f64>,
    pub diagnostics: LoglikDiagnostics,
    /// Loglikelihood at every accepted iterate.
    pub trace: Vec<f64>,
}

impl EstimationResult {
    /// Estimates divided by their standard errors.
    pub fn z_scores(&self) -> DVector<f64> {
        let est = DVector::from_vec(self.params.pack(self.structure));
        est.component_div(&self.standard_errors)
    }
}

/// Maximum simulated likelihood by BFGS. Non-convergence is flagged in the
/// result, which carries the best point reached.
pub fn fit(
    data: &ChoiceDataset,
    nodes: &SimulationNodes,
    start: &MmnlParams,
    options: &FitOptions,
) -> Result<EstimationResult> {
    check_params(data, start)?;
    nodes.check(data)?;
    let structure = options.structure;
    let (p, d) = (data.fixed_dim(), data.random_dim());
    let x0 = start.pack(structure);
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("starting values must be finite"));
    }

    let mut evaluations = 0usize;
    let mut diagnostics = LoglikDiagnostics::default();
    let mut failure: Option<Error> = None;
    let clock = Instant::now();
    let report = {
        let objective = |v: &[f64]| -> (f64, Vec<f64>) {
            evaluations += 1;
            let params = MmnlParams::unpack(p, d, structure, v).expect("fixed length");
            match simulated_loglik_gradient(data, &params, nodes, structure) {
                Ok(g) => {
                    diagnostics.merge(&g.loglik.diagnostics);
                    (-g.loglik.value, g.gradient.iter().map(|x| -x).collect())
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, vec![f64::NAN; v.len()])
                }
            }
        };
        let opts = optim::BfgsOptions {
            max_iterations: options.max_iterations,
            gradient_tolerance: options.gradient_tolerance,
            relative_tolerance: options.relative_tolerance,
            ..optim::BfgsOptions::default()
        };
        optim::minimize(objective, x0, &opts)
    };
    let wall_time = clock.elapsed().as_secs_f64();
    if let Some(e) = failure {
        return Err(e);
    }

    let params = MmnlParams::unpack(p, d, structure, &report.x)?;
    let k = report.x.len();
    let standard_errors = if options.standard_errors {
        let g = simulated_loglik_gradient(data, &params, nodes, structure)?;
        bhhh_standard_errors(&g.scores)
    } else {
        DVector::from_element(k, f64::NAN)
    };
    Ok(EstimationResult {
        params,
        structure,
        loglik: -report.f,
        gradient_norm: report.g.iter().fold(0.0, |m, x| m.max(x.abs())),
        loglik_evaluations: evaluations,
        iterations: report.iterations,
        wall_time,
        converged: report.termination.converged(),
        termination: report.termination,
        standard_errors,
        diagnostics,
        trace: report.trace.iter().map(|f| -f).collect(),
    })
}

/// `sqrt(diag((sum_i s_i s_i')^{-1}))`.
pub fn bhhh_standard_errors(scores: &DMatrix<f64>) -> DVector<f64> {
    let k = scores.nrows();
    let opg = scores * scores.transpose();
    match opg.cholesky() {
        Some(ch) => ch.inverse().diagonal().map(f64::sqrt),
        None => DVector::from_element(k, f64::NAN),
    }
}
