//! Flattened multi-index table for fast Vandermonde evaluation.

use crate::multiindex::MultiIndexSet;
use crate::orthopoly::{eval_orthonormal_all, eval_orthonormal_with_derivative, WeightFamily};

/// Each row stores only the non-zero components of its multi-index, since
/// `p_0 = 1` contributes nothing to the product.
#[derive(Clone, Debug)]
pub(crate) struct BasisTable {
    family: WeightFamily,
    dim: usize,
    stride: usize,
    offsets: Vec<usize>,
    terms: Vec<(usize, usize)>,
    degrees: Vec<u32>,
}

/// Per-node univariate values `p_k(x_j)` (and derivatives) laid out as
/// `[j * stride + k]`.
#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    pub vals: Vec<f64>,
    pub ders: Vec<f64>,
}

impl BasisTable {
    pub fn new(family: WeightFamily, set: &MultiIndexSet) -> Self {
        Self::from_rows(family, set, |_| true)
    }

    /// Table restricted to the rows whose multi-index satisfies `keep`.
    pub fn from_rows(family: WeightFamily, set: &MultiIndexSet, keep: impl Fn(u32) -> bool) -> Self {
        let mut offsets = vec![0];
        let mut terms = Vec::new();
        let mut degrees = Vec::new();
        for alpha in set.indices() {
            if !keep(alpha.degree()) {
                continue;
            }
            terms.extend(alpha.support().map(|(j, a)| (j, a as usize)));
            offsets.push(terms.len());
            degrees.push(alpha.degree());
        }
        BasisTable {
            family,
            dim: set.dim(),
            stride: set.max_degree() as usize + 1,
            offsets,
            terms,
            degrees,
        }
    }

    pub fn rows(&self) -> usize {
        self.degrees.len()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            vals: vec![0.0; self.dim * self.stride],
            ders: vec![0.0; self.dim * self.stride],
        }
    }

    pub fn fill(&self, x: &[f64], scratch: &mut Scratch, with_derivatives: bool) {
        debug_assert_eq!(x.len(), self.dim);
        for (j, &xj) in x.iter().enumerate() {
            let range = j * self.stride..(j + 1) * self.stride;
            if with_derivatives {
                eval_orthonormal_with_derivative(
                    self.family,
                    xj,
                    &mut scratch.vals[range.clone()],
                    &mut scratch.ders[range],
                );
            } else {
                eval_orthonormal_all(self.family, xj, &mut scratch.vals[range]);
            }
        }
    }

    #[inline]
    pub fn terms(&self, row: usize) -> &[(usize, usize)] {
        &self.terms[self.offsets[row]..self.offsets[row + 1]]
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn row_value(&self, row: usize, vals: &[f64]) -> f64 {
        self.terms(row).iter().map(|&(j, a)| vals[j * self.stride + a]).product()
    }

    /// Vandermonde column `out[k] = pi_{alpha(k)}(x)`.
    pub fn column(&self, x: &[f64], scratch: &mut Scratch, out: &mut [f64]) {
        self.fill(x, scratch, false);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.row_value(k, &scratch.vals);
        }
    }
}
