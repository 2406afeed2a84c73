//! Multi-index sets, multivariate orthonormal polynomials and tensor rules.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dqgen::{Provenance, QuadratureRule};
use crate::error::{Error, Result};
use crate::orthopoly::{eval_orthonormal, gauss_rule_1d, WeightFamily};

/// Default cap on index-set cardinality and tensor-rule node counts.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// A multi-index `alpha` in `N_0^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a multi-index needs at least one component"));
        }
        Ok(MultiIndex(components))
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `|alpha|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Non-zero components as `(dimension, degree)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| a > 0).map(|(j, &a)| (j, a))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Ordered multi-index set. The first element is always the zero index.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexSet {
    dim: usize,
    indices: Vec<MultiIndex>,
    order: Option<u32>,
}

impl MultiIndexSet {
    /// Builds a set from explicit indices; rejects sets that do not start at
    /// zero or are not downward closed.
    pub fn from_indices(dim: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        if indices.first() != Some(&MultiIndex::zero(dim)) {
            return Err(Error::invalid("index set must start with the zero multi-index"));
        }
        if let Some(bad) = indices.iter().find(|a| a.dim() != dim) {
            return Err(Error::dimension_mismatch("multi-index", dim, bad.dim()));
        }
        let set = MultiIndexSet {
            dim,
            indices,
            order: None,
        };
        if !set.is_downward_closed() {
            return Err(Error::invalid("index set is not downward closed"));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Total order `r` when the set is a total-order space.
    pub fn order(&self) -> Option<u32> {
        self.order
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Checks that every `alpha - e_j` (for `alpha_j > 0`) is also present,
    /// which by induction covers every component-wise smaller index.
    pub fn is_downward_closed(&self) -> bool {
        let members: HashSet<&[u32]> = self.indices.iter().map(|a| a.components()).collect();
        let mut scratch = vec![0u32; self.dim];
        for alpha in &self.indices {
            for j in 0..self.dim {
                if alpha.0[j] == 0 {
                    continue;
                }
                scratch.copy_from_slice(&alpha.0);
                scratch[j] -= 1;
                if !members.contains(scratch.as_slice()) {
                    return false;
                }
            }
        }
        true
    }
}

/// Binomial coefficient `C(n, k)`, `None` on `u128` overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Total-order set `{alpha : |alpha| <= r}` in graded lexicographic order.
pub fn total_order_set(dim: usize, order: u32) -> Result<MultiIndexSet> {
    total_order_set_with_cap(dim, order, DEFAULT_CAP)
}

pub fn total_order_set_with_cap(dim: usize, order: u32, cap: u128) -> Result<MultiIndexSet> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let size = binomial(dim as u64 + u64::from(order), u64::from(order)).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::CapExceeded {
            what: "total-order index set",
            requested: size,
            cap,
        });
    }
    let mut indices = Vec::with_capacity(size as usize);
    let mut current = vec![0u32; dim];
    for degree in 0..=order {
        push_compositions(&mut current, 0, degree, &mut indices);
    }
    debug_assert_eq!(indices.len() as u128, size);
    Ok(MultiIndexSet {
        dim,
        indices,
        order: Some(order),
    })
}

/// All compositions of `remaining` into `current[pos..]`, first component descending.
fn push_compositions(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        push_compositions(current, pos + 1, remaining - first, out);
    }
    current[pos] = 0;
}

/// `pi_alpha(x) = prod_j p_{alpha_j}(x_j)`.
pub fn eval_multivariate(family: WeightFamily, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
    if alpha.dim() != x.len() {
        return Err(Error::dimension_mismatch("point", alpha.dim(), x.len()));
    }
    Ok(alpha
        .support()
        .map(|(j, a)| eval_orthonormal(family, a as usize, x[j]))
        .product())
}

/// Tensor product of the `n_1d`-point Gauss rule; exact on total degree `2 n_1d - 1`.
pub fn tensor_rule(family: WeightFamily, dim: usize, n_1d: usize) -> Result<QuadratureRule> {
    tensor_rule_with_cap(family, dim, n_1d, DEFAULT_CAP)
}

pub fn tensor_rule_with_cap(family: WeightFamily, dim: usize, n_1d: usize, cap: u128) -> Result<QuadratureRule> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let count = (n_1d as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "tensor-product rule",
            requested: count,
            cap,
        });
    }
    let base = gauss_rule_1d(family, n_1d)?;
    let n = count as usize;
    let mut nodes = DMatrix::<f64>::zeros(dim, n);
    let mut weights = DVector::<f64>::zeros(n);
    // odometer over per-dimension node indices, last dimension fastest
    let mut digits = vec![0usize; dim];
    for q in 0..n {
        let mut w = 1.0;
        for (j, &k) in digits.iter().enumerate() {
            nodes[(j, q)] = base.nodes[k];
            w *= base.weights[k];
        }
        weights[q] = w;
        for j in (0..dim).rev() {
            digits[j] += 1;
            if digits[j] < n_1d {
                break;
            }
            digits[j] = 0;
        }
    }
    let order = (2 * n_1d - 1) as u32;
    QuadratureRule::with_computed_residual(family, order, nodes, weights, 0, Provenance::Tensor)
}
