use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::BasisTable;
use super::MomentSystem;
use crate::error::{Error, Result};
use crate::multiindex::{total_order_set, MultiIndex};
use crate::orthopoly::WeightFamily;

/// How a rule was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Dq,
    Tensor,
    QmcWrapped,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Dq => "dq",
            Provenance::Tensor => "tensor",
            Provenance::QmcWrapped => "qmc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dq" => Some(Provenance::Dq),
            "tensor" => Some(Provenance::Tensor),
            "qmc" | "qmc-wrapped" => Some(Provenance::QmcWrapped),
            _ => None,
        }
    }
}

/// Quadrature rule on `R^d`: a `d x n` node matrix (one node per column) and
/// `n` positive weights, tagged with the total order `r` it was designed for
/// and the moment residual `eps = ||V(X) w - e_1||_2` over `Lambda_{T_r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    family: WeightFamily,
    order: u32,
    nodes: DMatrix<f64>,
    weights: DVector<f64>,
    residual: f64,
    seed: u64,
    provenance: Provenance,
}

/// A broken rule invariant, reported by [`QuadratureRule::invariant_violations`].
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

impl QuadratureRule {
    /// Assembles a rule without checking any invariant except shapes.
    pub fn from_parts(
        family: WeightFamily,
        order: u32,
        nodes: DMatrix<f64>,
        weights: DVector<f64>,
        residual: f64,
        seed: u64,
        provenance: Provenance,
    ) -> Result<Self> {
        if nodes.nrows() == 0 {
            return Err(Error::invalid("rule dimension must be at least 1"));
        }
        if nodes.ncols() != weights.len() {
            return Err(Error::dimension_mismatch("rule weights", nodes.ncols(), weights.len()));
        }
        if weights.is_empty() {
            return Err(Error::invalid("rule needs at least one node"));
        }
        Ok(QuadratureRule {
            family,
            order,
            nodes,
            weights,
            residual,
            seed,
            provenance,
        })
    }

    /// Assembles a rule and measures its residual over `Lambda_{T_order}`.
    pub fn with_computed_residual(
        family: WeightFamily,
        order: u32,
        nodes: DMatrix<f64>,
        weights: DVector<f64>,
        seed: u64,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut rule = Self::from_parts(family, order, nodes, weights, 0.0, seed, provenance)?;
        rule.residual = rule.recompute_residual()?;
        Ok(rule)
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.nodes.nrows()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.ncols() == 0
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn nodes(&self) -> &DMatrix<f64> {
        &self.nodes
    }

    /// Coordinates of node `q`.
    pub fn node(&self, q: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes.as_slice()[q * d..(q + 1) * d]
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Cache key `family-d{d}-r{r}-n{n}`.
    pub fn cache_key(&self) -> String {
        super::cache_key(self.family, self.dim(), self.order, self.len())
    }

    /// `sum_q f(x_q) w_q`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|q| f(self.node(q)) * self.weights[q]).sum()
    }

    pub fn recompute_residual(&self) -> Result<f64> {
        let sys = MomentSystem::total_order(self.family, self.dim(), self.order)?;
        super::residual(&sys, &self.nodes, &self.weights)
    }

    /// Per-index moment errors `sum_q pi_alpha(x_q) w_q - delta_{alpha,0}`.
    pub fn moment_errors(&self) -> Result<Vec<(MultiIndex, f64)>> {
        let set = total_order_set(self.dim(), self.order)?;
        let table = BasisTable::new(self.family, &set);
        let mut acc = vec![0.0; set.len()];
        let mut column = vec![0.0; set.len()];
        let mut scratch = table.scratch();
        for q in 0..self.len() {
            table.column(self.node(q), &mut scratch, &mut column);
            let w = self.weights[q];
            for (a, v) in acc.iter_mut().zip(&column) {
                *a += w * v;
            }
        }
        acc[0] -= 1.0;
        Ok(set.indices().iter().cloned().zip(acc).collect())
    }

    /// Lists every broken invariant: finiteness, positive weights, nodes in
    /// the support, unit mass and agreement of the stored residual.
    pub fn invariant_violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        if let Some(q) = (0..self.len()).find(|&q| !self.weights[q].is_finite() || self.node(q).iter().any(|x| !x.is_finite())) {
            out.push(InvariantViolation {
                invariant: "finite",
                detail: format!("node {q} has a non-finite coordinate or weight"),
            });
            return out;
        }
        if let Some(q) = (0..self.len()).find(|&q| self.weights[q] <= 0.0) {
            out.push(InvariantViolation {
                invariant: "positive-weights",
                detail: format!("weight {q} is {:e}", self.weights[q]),
            });
        }
        if let Some(q) = (0..self.len()).find(|&q| self.node(q).iter().any(|&x| !self.family.contains(x))) {
            out.push(InvariantViolation {
                invariant: "node-in-support",
                detail: format!("node {q} = {:?} lies outside the {} support", self.node(q), self.family),
            });
        }
        let mass: f64 = self.weights.iter().sum();
        let mass_tol = (10.0 * self.residual).max(1e-12);
        if (mass - 1.0).abs() > mass_tol {
            out.push(InvariantViolation {
                invariant: "unit-mass",
                detail: format!("weights sum to {mass:.17e}, tolerance {mass_tol:e}"),
            });
        }
        match self.recompute_residual() {
            Ok(eps) => {
                let tol = 1e-12 * (1.0 + self.residual.abs());
                if !(eps - self.residual).abs().le(&tol) {
                    out.push(InvariantViolation {
                        invariant: "residual",
                        detail: format!("stored epsilon {:e} but recomputed {:e}", self.residual, eps),
                    });
                }
            }
            Err(e) => out.push(InvariantViolation {
                invariant: "residual",
                detail: e.to_string(),
            }),
        }
        out
    }

    /// Fails with the first broken invariant.
    pub fn verify(&self) -> Result<()> {
        match self.invariant_violations().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::RuleInvariant {
                invariant: v.invariant,
                detail: v.detail,
            }),
        }
    }

    /// Reorders nodes lexicographically by coordinate.
    pub(crate) fn sorted(mut self) -> Self {
        let d = self.dim();
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (xa, xb) = (self.node(a), self.node(b));
            xa.iter()
                .zip(xb)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let nodes = DMatrix::from_fn(d, n, |j, q| self.nodes[(j, order[q])]);
        let weights = DVector::from_fn(n, |q, _| self.weights[order[q]]);
        self.nodes = nodes;
        self.weights = weights;
        self
    }
}
